//! Automorphisms of the base group and exact normal forms in the mapping
//! torus `G = ⟨F, t | t f t⁻¹ = φ(f)⟩`.
//!
//! Every element of `G` normalizes to `u·t^k` with `u` a reduced base word
//! and `k` the net `t`-exponent; the left-to-right collection uses only the
//! defining relation, so the form is exact. Powers of `φ` are memoized on
//! generator images.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::base::{BaseGroup, CapExceeded};
use crate::words::{Alphabet, Letter, Word, WordError};

#[derive(Debug, Error)]
pub enum TorusError {
    #[error(transparent)]
    Word(#[from] WordError),
    #[error("automorphism table rejected: {reason}")]
    BadAutomorphism { reason: String },
    #[error(transparent)]
    Capped(#[from] CapExceeded),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Element `u·t^k` of the mapping torus.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TorusElement {
    pub u: Word,
    pub k: i64,
}

impl TorusElement {
    pub fn identity() -> TorusElement {
        TorusElement { u: Word::empty(), k: 0 }
    }

    pub fn from_base(u: Word) -> TorusElement {
        TorusElement { u, k: 0 }
    }

    pub fn is_identity(&self) -> bool {
        self.u.is_empty() && self.k == 0
    }

    /// True exactly when the element lies in the base group `F`.
    pub fn in_base(&self) -> bool {
        self.k == 0
    }
}

/// Invertible endomorphism given by forward and backward generator images.
pub struct Automorphism {
    forward: Vec<Word>,
    backward: Vec<Word>,
    /// power ↦ image of every generator under `φ^power`; grown on demand,
    /// never mutated after insertion.
    memo: RwLock<HashMap<i64, Arc<Vec<Word>>>>,
}

impl Automorphism {
    /// Validates invertibility against the base group's word problem; in
    /// surface mode also checks that both tables kill every relator.
    pub fn new(base: &BaseGroup, forward: Vec<Word>, backward: Vec<Word>) -> Result<Automorphism, TorusError> {
        let rank = base.alphabet().len();
        if forward.len() != rank || backward.len() != rank {
            return Err(TorusError::BadAutomorphism {
                reason: format!(
                    "tables must cover all {rank} generators (got {} forward, {} backward)",
                    forward.len(),
                    backward.len()
                ),
            });
        }
        for w in forward.iter().chain(&backward) {
            base.alphabet().check_word(w)?;
        }
        let aut = Automorphism {
            forward,
            backward,
            memo: RwLock::new(HashMap::new()),
        };
        for gen in 0..rank {
            let g = Word::single(Letter::positive(gen));
            let round = aut.apply(Direction::Backward, &aut.apply(Direction::Forward, &g));
            if !base.equal(&base.reduce(&round), &g) {
                return Err(TorusError::BadAutomorphism {
                    reason: format!("backward∘forward does not fix generator {}", base.alphabet().name(gen)),
                });
            }
            let round = aut.apply(Direction::Forward, &aut.apply(Direction::Backward, &g));
            if !base.equal(&base.reduce(&round), &g) {
                return Err(TorusError::BadAutomorphism {
                    reason: format!("forward∘backward does not fix generator {}", base.alphabet().name(gen)),
                });
            }
        }
        if let Some(p) = base.presentation() {
            for (i, r) in p.relators().iter().enumerate() {
                for dir in [Direction::Forward, Direction::Backward] {
                    if !base.is_identity(&aut.apply(dir, r)) {
                        return Err(TorusError::BadAutomorphism {
                            reason: format!("table does not preserve relator {i}"),
                        });
                    }
                }
            }
        }
        Ok(aut)
    }

    pub fn identity(rank: usize) -> Automorphism {
        let images: Vec<Word> = (0..rank).map(|g| Word::single(Letter::positive(g))).collect();
        Automorphism {
            forward: images.clone(),
            backward: images,
            memo: RwLock::new(HashMap::new()),
        }
    }

    fn table(&self, dir: Direction) -> &[Word] {
        match dir {
            Direction::Forward => &self.forward,
            Direction::Backward => &self.backward,
        }
    }

    /// Substitutes generator images and freely reduces.
    pub fn apply(&self, dir: Direction, w: &Word) -> Word {
        let table = self.table(dir);
        let mut out = Word::empty();
        for &l in w.letters() {
            let image = &table[l.generator()];
            if l.is_positive() {
                for &m in image.letters() {
                    out.push(m);
                }
            } else {
                for &m in image.letters().iter().rev() {
                    out.push(m.inverse());
                }
            }
        }
        out
    }

    /// Generator images under `φ^power`, memoized.
    pub fn power_images(&self, power: i64) -> Arc<Vec<Word>> {
        if let Some(images) = self.memo.read().unwrap().get(&power) {
            return Arc::clone(images);
        }
        let rank = self.forward.len();
        let mut memo = self.memo.write().unwrap();
        // Walk outward from the nearest cached power toward `power`.
        let step = if power >= 0 { 1 } else { -1 };
        let dir = if power >= 0 { Direction::Forward } else { Direction::Backward };
        let mut k = 0;
        let mut images: Arc<Vec<Word>> = Arc::new(
            (0..rank).map(|g| Word::single(Letter::positive(g))).collect(),
        );
        memo.entry(0).or_insert_with(|| Arc::clone(&images));
        while k != power {
            if let Some(cached) = memo.get(&(k + step)) {
                images = Arc::clone(cached);
            } else {
                let next: Vec<Word> = images.iter().map(|w| self.apply(dir, w)).collect();
                images = Arc::new(next);
                memo.insert(k + step, Arc::clone(&images));
            }
            k += step;
        }
        images
    }

    /// `φ^power` of a single signed letter.
    pub fn letter_image(&self, power: i64, l: Letter) -> Word {
        if power == 0 {
            return Word::single(l);
        }
        let images = self.power_images(power);
        let image = &images[l.generator()];
        if l.is_positive() {
            image.clone()
        } else {
            image.inverse()
        }
    }

    /// `φ^power` applied to a whole word.
    pub fn power_apply(&self, power: i64, w: &Word) -> Word {
        if power == 0 {
            return w.clone();
        }
        let images = self.power_images(power);
        let mut out = Word::empty();
        for &l in w.letters() {
            let image = &images[l.generator()];
            if l.is_positive() {
                for &m in image.letters() {
                    out.push(m);
                }
            } else {
                for &m in image.letters().iter().rev() {
                    out.push(m.inverse());
                }
            }
        }
        out
    }
}

/// Exact letter counts of `φⁿ(w)` for `n = 0..=N`.
#[derive(Clone, Debug)]
pub struct GrowthProfile {
    pub lengths: Vec<usize>,
    pub estimated_rate: f64,
}

pub struct MappingTorus {
    base: BaseGroup,
    aut: Automorphism,
    extended: Alphabet,
    t_gen: usize,
}

impl MappingTorus {
    pub const STABLE_LETTER: &'static str = "t";

    pub fn new(base: BaseGroup, aut: Automorphism) -> Result<MappingTorus, TorusError> {
        let mut names: Vec<String> = base.alphabet().names().to_vec();
        if names.iter().any(|n| n == Self::STABLE_LETTER) {
            return Err(TorusError::BadAutomorphism {
                reason: "base alphabet may not contain the stable letter t".to_string(),
            });
        }
        let t_gen = names.len();
        names.push(Self::STABLE_LETTER.to_string());
        let extended = Alphabet::new(names)?;
        Ok(MappingTorus { base, aut, extended, t_gen })
    }

    pub fn base(&self) -> &BaseGroup {
        &self.base
    }

    pub fn automorphism(&self) -> &Automorphism {
        &self.aut
    }

    /// Base alphabet plus the stable letter `t`.
    pub fn alphabet(&self) -> &Alphabet {
        &self.extended
    }

    pub fn t_gen(&self) -> usize {
        self.t_gen
    }

    pub fn apply_aut(&self, dir: Direction, w: &Word) -> Result<Word, TorusError> {
        self.base.alphabet().check_word(w)?;
        Ok(self.reduce_base(self.aut.apply(dir, w)))
    }

    pub fn aut_power_apply(&self, power: i64, w: &Word) -> Result<Word, TorusError> {
        self.base.alphabet().check_word(w)?;
        Ok(self.reduce_base(self.aut.power_apply(power, w)))
    }

    fn reduce_base(&self, w: Word) -> Word {
        if self.base.is_surface() {
            self.base.reduce(&w)
        } else {
            w
        }
    }

    /// Left-to-right collection: a base letter `f` read under `t`-exponent
    /// `k` contributes `φᵏ(f)`; `t^{±1}` shifts the exponent. Total.
    pub fn normalize(&self, raw: &[Letter]) -> Result<TorusElement, TorusError> {
        let mut u = Word::empty();
        let mut k: i64 = 0;
        for &l in raw {
            if l.generator() == self.t_gen {
                k += if l.is_positive() { 1 } else { -1 };
            } else if l.generator() < self.t_gen {
                let image = self.aut.letter_image(k, l);
                for &m in image.letters() {
                    u.push(m);
                }
            } else {
                return Err(TorusError::Word(WordError::AlphabetMismatch));
            }
        }
        Ok(TorusElement { u: self.reduce_base(u), k })
    }

    pub fn parse_element(&self, text: &str) -> Result<TorusElement, TorusError> {
        let letters = self.extended.parse_letters(text)?;
        self.normalize(&letters)
    }

    /// `(u,k)·(v,l) = (u·φᵏ(v), k+l)`.
    pub fn mul(&self, a: &TorusElement, b: &TorusElement) -> TorusElement {
        let image = self.aut.power_apply(a.k, &b.u);
        let u = self.reduce_base(a.u.mul(&image));
        TorusElement { u, k: a.k + b.k }
    }

    /// `(u,k)⁻¹ = (φ⁻ᵏ(u⁻¹), −k)`.
    pub fn inv(&self, a: &TorusElement) -> TorusElement {
        let u = self.reduce_base(self.aut.power_apply(-a.k, &a.u.inverse()));
        TorusElement { u, k: -a.k }
    }

    pub fn mul_letter(&self, a: &TorusElement, l: Letter) -> Result<TorusElement, TorusError> {
        if l.generator() == self.t_gen {
            return Ok(TorusElement {
                u: a.u.clone(),
                k: a.k + if l.is_positive() { 1 } else { -1 },
            });
        }
        if l.generator() > self.t_gen {
            return Err(TorusError::Word(WordError::AlphabetMismatch));
        }
        let image = self.aut.letter_image(a.k, l);
        Ok(TorusElement {
            u: self.reduce_base(a.u.mul(&image)),
            k: a.k,
        })
    }

    /// Spells `u` followed by `t^k` over the extended alphabet.
    pub fn element_word(&self, e: &TorusElement) -> Word {
        let mut letters: Vec<Letter> = e.u.letters().to_vec();
        let t = Letter::with_sign(self.t_gen, e.k >= 0);
        for _ in 0..e.k.unsigned_abs() {
            letters.push(t);
        }
        Word::from_letters(letters)
    }

    /// Canonical spelling: in surface mode the base part is replaced by its
    /// shortlex-geodesic representative (capped).
    pub fn canonical_word(&self, e: &TorusElement, cap: usize) -> Result<Word, CapExceeded> {
        let u = self.base.canonical(&e.u, cap)?;
        Ok(self.element_word(&TorusElement { u, k: e.k }))
    }

    /// Length of the defining representative: base length plus `|k|`.
    /// Exact base length in free mode, capped geodesic length in surface mode.
    pub fn factor_len(&self, e: &TorusElement, cap: usize) -> Result<usize, CapExceeded> {
        Ok(self.base.geodesic_len(&e.u, cap)? + e.k.unsigned_abs() as usize)
    }

    pub fn growth_profile(&self, w: &Word, n_max: usize) -> Result<GrowthProfile, TorusError> {
        if w.is_empty() {
            return Err(TorusError::Word(WordError::DegenerateInput));
        }
        self.base.alphabet().check_word(w)?;
        let mut lengths = Vec::with_capacity(n_max + 1);
        let mut cur = self.reduce_base(w.clone());
        lengths.push(cur.len());
        for _ in 0..n_max {
            cur = self.reduce_base(self.aut.apply(Direction::Forward, &cur));
            lengths.push(cur.len());
        }
        let estimated_rate = if lengths.len() >= 2 {
            lengths[lengths.len() - 1] as f64 / lengths[lengths.len() - 2] as f64
        } else {
            1.0
        };
        Ok(GrowthProfile { lengths, estimated_rate })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn default_torus() -> MappingTorus {
        crate::preset::default_free_torus()
    }

    fn w(t: &MappingTorus, s: &str) -> Word {
        t.base().alphabet().parse_word(s).unwrap()
    }

    #[test]
    fn apply_examples() {
        let t = default_torus();
        assert!(t.apply_aut(Direction::Forward, &Word::empty()).unwrap().is_empty());
        assert_eq!(t.apply_aut(Direction::Forward, &w(&t, "ab")).unwrap(), w(&t, "bc"));
        assert_eq!(t.apply_aut(Direction::Backward, &w(&t, "b")).unwrap(), w(&t, "a"));
        assert_eq!(t.apply_aut(Direction::Backward, &w(&t, "a")).unwrap(), w(&t, "cA"));
    }

    #[test]
    fn power_apply_examples() {
        let t = default_torus();
        assert_eq!(t.aut_power_apply(0, &w(&t, "a")).unwrap(), w(&t, "a"));
        assert_eq!(t.aut_power_apply(3, &w(&t, "a")).unwrap(), w(&t, "ab"));
        assert_eq!(t.aut_power_apply(10, &w(&t, "a")).unwrap().len(), 12);
    }

    #[test]
    fn normalize_examples() {
        let t = default_torus();
        let e = t.parse_element("taT").unwrap();
        assert_eq!(e, TorusElement { u: w(&t, "b"), k: 0 });
        assert!(e.in_base());

        let e = t.parse_element("at").unwrap();
        assert_eq!(e, TorusElement { u: w(&t, "a"), k: 1 });
        assert!(!e.in_base());

        let e = t.parse_element("tt").unwrap();
        assert_eq!(e, TorusElement { u: Word::empty(), k: 2 });
    }

    #[test]
    fn mul_inv_examples() {
        let t = default_torus();
        let a1 = TorusElement { u: w(&t, "a"), k: 1 };
        let id_m1 = TorusElement { u: Word::empty(), k: -1 };
        assert_eq!(t.mul(&a1, &id_m1), TorusElement { u: w(&t, "a"), k: 0 });

        let t1 = TorusElement { u: Word::empty(), k: 1 };
        let a0 = TorusElement { u: w(&t, "a"), k: 0 };
        assert_eq!(t.mul(&t1, &a0), TorusElement { u: w(&t, "b"), k: 1 });

        assert_eq!(t.inv(&a1), TorusElement { u: w(&t, "aC"), k: -1 });
        assert!(t.mul(&a1, &t.inv(&a1)).is_identity());
    }

    #[test]
    fn base_membership_via_normal_form() {
        let t = default_torus();
        assert!(t.parse_element("ab").unwrap().in_base());
        assert!(!t.parse_element("t").unwrap().in_base());
        assert!(t.parse_element("taT").unwrap().in_base());
    }

    fn random_raw(rng: &mut impl Rng, t: &MappingTorus, len: usize) -> Vec<Letter> {
        (0..len)
            .map(|_| Letter::with_sign(rng.gen_range(0..t.alphabet().len()), rng.gen_bool(0.5)))
            .collect()
    }

    #[test]
    fn normal_form_consistency() {
        let t = default_torus();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10_000 {
            let len = rng.gen_range(0..8);
            let r1 = random_raw(&mut rng, &t, len);
            let len = rng.gen_range(0..8);
            let r2 = random_raw(&mut rng, &t, len);
            let g1 = t.normalize(&r1).unwrap();
            let g2 = t.normalize(&r2).unwrap();
            let concat: Vec<Letter> = r1.iter().chain(&r2).copied().collect();
            assert_eq!(t.mul(&g1, &g2), t.normalize(&concat).unwrap());
        }
    }

    #[test]
    fn inverse_law() {
        let t = default_torus();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..1_000 {
            let len = rng.gen_range(0..10);
            let raw = random_raw(&mut rng, &t, len);
            let g = t.normalize(&raw).unwrap();
            assert!(t.mul(&g, &t.inv(&g)).is_identity());
            assert!(t.mul(&t.inv(&g), &g).is_identity());
        }
    }

    #[test]
    fn conjugation_law() {
        let t = default_torus();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..500 {
            let len = rng.gen_range(0..6);
            let f = Word::from_letters(random_raw(&mut rng, &t, len))
                .letters()
                .iter()
                .copied()
                .filter(|l| l.generator() < t.t_gen())
                .collect::<Vec<_>>();
            let f = Word::from_letters(f);
            let n = rng.gen_range(-8..=8i64);
            let tn = TorusElement { u: Word::empty(), k: n };
            let fe = TorusElement::from_base(f.clone());
            let conj = t.mul(&t.mul(&tn, &fe), &t.inv(&tn));
            assert_eq!(conj, TorusElement { u: t.aut_power_apply(n, &f).unwrap(), k: 0 });
        }
    }

    #[test]
    fn automorphism_validity_round_trip() {
        let t = default_torus();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..1_000 {
            let raw: Vec<Letter> = (0..rng.gen_range(0..8))
                .map(|_| Letter::with_sign(rng.gen_range(0..3), rng.gen_bool(0.5)))
                .collect();
            let u = Word::from_letters(raw);
            let round = t
                .apply_aut(Direction::Backward, &t.apply_aut(Direction::Forward, &u).unwrap())
                .unwrap();
            assert_eq!(round, u);
        }
    }

    #[test]
    fn homomorphism_property() {
        let t = default_torus();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..1_000 {
            let u = Word::from_letters(
                (0..rng.gen_range(0..6))
                    .map(|_| Letter::with_sign(rng.gen_range(0..3), rng.gen_bool(0.5)))
                    .collect::<Vec<_>>(),
            );
            let v = Word::from_letters(
                (0..rng.gen_range(0..6))
                    .map(|_| Letter::with_sign(rng.gen_range(0..3), rng.gen_bool(0.5)))
                    .collect::<Vec<_>>(),
            );
            let lhs = t.apply_aut(Direction::Forward, &u.mul(&v)).unwrap();
            let rhs = t
                .apply_aut(Direction::Forward, &u)
                .unwrap()
                .mul(&t.apply_aut(Direction::Forward, &v).unwrap());
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn growth_profile_identity_aut() {
        let alpha = Alphabet::new(["a", "b"]).unwrap();
        let base = BaseGroup::free(alpha);
        let aut = Automorphism::identity(2);
        let t = MappingTorus::new(base, aut).unwrap();
        let w = t.base().alphabet().parse_word("ab").unwrap();
        let p = t.growth_profile(&w, 6).unwrap();
        assert!(p.lengths.iter().all(|&l| l == 2));
        assert_eq!(p.estimated_rate, 1.0);
    }

    #[test]
    fn growth_profile_default() {
        let t = default_torus();
        let p = t.growth_profile(&w(&t, "a"), 10).unwrap();
        assert_eq!(p.lengths, vec![1, 1, 1, 2, 2, 3, 4, 5, 7, 9, 12]);

        let p = t.growth_profile(&w(&t, "a"), 30).unwrap();
        assert_eq!(p.lengths[30], 3329);
        assert!((p.estimated_rate - 1.3247).abs() < 1e-3);
    }

    #[test]
    fn rejects_incomplete_tables() {
        let alpha = Alphabet::new(["a", "b"]).unwrap();
        let base = BaseGroup::free(alpha.clone());
        let fwd = vec![alpha.parse_word("b").unwrap()];
        let bwd = vec![alpha.parse_word("a").unwrap()];
        assert!(matches!(
            Automorphism::new(&base, fwd, bwd),
            Err(TorusError::BadAutomorphism { .. })
        ));
    }

    #[test]
    fn rejects_non_inverse_tables() {
        let alpha = Alphabet::new(["a", "b"]).unwrap();
        let base = BaseGroup::free(alpha.clone());
        let fwd = vec![alpha.parse_word("b").unwrap(), alpha.parse_word("a").unwrap()];
        let bwd = vec![alpha.parse_word("a").unwrap(), alpha.parse_word("b").unwrap()];
        assert!(matches!(
            Automorphism::new(&base, fwd, bwd),
            Err(TorusError::BadAutomorphism { .. })
        ));
    }
}
