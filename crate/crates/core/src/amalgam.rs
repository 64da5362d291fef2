//! The cyclic amalgam `M = G ∗_C G₁` of two copies of the mapping torus,
//! glued along `C = ⟨x⟩ = ⟨x₁⟩`.
//!
//! Elements are kept as strictly alternating syllable sequences with no
//! interior `C`-syllables; pure `C`-powers are spelled in the left factor.
//! The canonical word of an element is produced by the coset-shortest
//! rewriting chain: every non-final syllable is replaced by the shortest
//! (shortlex tie-broken) representative of its right coset mod `C`, with the
//! extracted `x`-power carried into the next syllable. Two elements are
//! equal in `M` exactly when their canonical words match letter for letter.

use thiserror::Error;

use crate::base::CapExceeded;
use crate::torus::{MappingTorus, TorusElement, TorusError};
use crate::words::{Alphabet, Letter, Word, WordError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Factor {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum MulSide {
    Left,
    Right,
}

impl Factor {
    pub fn other(self) -> Factor {
        match self {
            Factor::Left => Factor::Right,
            Factor::Right => Factor::Left,
        }
    }
}

/// One alternating block: a nonidentity factor element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Syllable {
    pub factor: Factor,
    pub value: TorusElement,
}

/// Normal form in `M`: empty for the identity, a single left-factor
/// `x`-power for `C`-elements, otherwise a strictly alternating sequence of
/// syllables outside `C`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct AmalgamNf {
    syllables: Vec<Syllable>,
}

impl AmalgamNf {
    pub fn identity() -> AmalgamNf {
        AmalgamNf::default()
    }

    pub fn is_identity(&self) -> bool {
        self.syllables.is_empty()
    }

    pub fn syllables(&self) -> &[Syllable] {
        &self.syllables
    }
}

/// Chain-aligned canonical element: every non-final syllable is the
/// right-coset-shortest representative of its prefix coset with the
/// extracted `x`-power carried into its successor, so the canonical word is
/// the plain concatenation of syllable spellings. Maintained incrementally
/// under right multiplication by letters; the workhorse of ball enumeration.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct CanonElem {
    syllables: Vec<Syllable>,
}

impl CanonElem {
    pub fn identity() -> CanonElem {
        CanonElem::default()
    }

    pub fn is_identity(&self) -> bool {
        self.syllables.is_empty()
    }

    pub fn syllables(&self) -> &[Syllable] {
        &self.syllables
    }
}

/// Syllable count with the `C`-membership flag; `C`-elements (including the
/// identity) count zero syllables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyllableCount {
    pub count: usize,
    pub in_edge_subgroup: bool,
}

/// The amalgamated words `x` (in the left base) and `x₁` (in the right base).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeSpec {
    pub x_left: Word,
    pub x_right: Word,
}

/// Stable reason codes for rejected edge words.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeReason {
    Empty,
    NotCyclicallyReduced,
    ProperPower,
}

impl EdgeReason {
    pub fn code(self) -> &'static str {
        match self {
            EdgeReason::Empty => "edge-empty",
            EdgeReason::NotCyclicallyReduced => "edge-not-cyclically-reduced",
            EdgeReason::ProperPower => "edge-proper-power",
        }
    }
}

impl EdgeSpec {
    pub fn new(x_left: Word, x_right: Word) -> Result<EdgeSpec, AmalgamError> {
        for (side, w) in [(Factor::Left, &x_left), (Factor::Right, &x_right)] {
            if w.is_empty() {
                return Err(AmalgamError::EdgeRejected { side, reason: EdgeReason::Empty });
            }
            if !w.is_cyclically_reduced() {
                return Err(AmalgamError::EdgeRejected {
                    side,
                    reason: EdgeReason::NotCyclicallyReduced,
                });
            }
        }
        Ok(EdgeSpec { x_left, x_right })
    }

    pub fn word(&self, f: Factor) -> &Word {
        match f {
            Factor::Left => &self.x_left,
            Factor::Right => &self.x_right,
        }
    }

    /// The paper's hypothesis on the glued element: not a proper power.
    pub fn check_primitive(&self) -> Result<(), AmalgamError> {
        for (side, w) in [(Factor::Left, &self.x_left), (Factor::Right, &self.x_right)] {
            let (_, exponent) = w.primitive_root().expect("nonempty by construction");
            if exponent > 1 {
                return Err(AmalgamError::EdgeRejected { side, reason: EdgeReason::ProperPower });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AmalgamCaps {
    /// Coset-power window in surface mode (free mode derives its own bound).
    pub coset_window: usize,
    /// Cap for geodesic-length queries against a surface base.
    pub geodesic_cap: usize,
}

impl Default for AmalgamCaps {
    fn default() -> Self {
        AmalgamCaps { coset_window: 24, geodesic_cap: 8 }
    }
}

/// A factor element split along `C`: `g = x^power · remainder`, with the
/// remainder the shortest (then shortlex-least) element of `Cg`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CosetDecomposition {
    pub power: i64,
    pub remainder: TorusElement,
    pub remainder_len: usize,
}

#[derive(Debug, Error)]
pub enum AmalgamError {
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Torus(#[from] TorusError),
    #[error(transparent)]
    Capped(#[from] CapExceeded),
    #[error("coset search capped at window {window}; best candidate so far attached")]
    CappedCoset {
        window: i64,
        best: Option<CosetDecomposition>,
    },
    #[error("edge word ({side:?}) rejected: {}", reason.code())]
    EdgeRejected { side: Factor, reason: EdgeReason },
    #[error("amalgam context rejected: {reason}")]
    BadContext { reason: String },
}

pub struct AmalgamContext {
    torus: MappingTorus,
    edge: EdgeSpec,
    alphabet: Alphabet,
    caps: AmalgamCaps,
    inner_len: usize,
}

impl AmalgamContext {
    /// Builds the combined alphabet: the left factor's generators followed by
    /// the same names suffixed `1` for the right copy. Edge words must be
    /// nonempty, cyclically reduced base words; primitivity is checked
    /// separately at experiment entry.
    pub fn new(torus: MappingTorus, edge: EdgeSpec, caps: AmalgamCaps) -> Result<AmalgamContext, AmalgamError> {
        let base_len = torus.base().alphabet().len();
        for name in torus.base().alphabet().names() {
            if name.len() != 1 {
                return Err(AmalgamError::BadContext {
                    reason: format!("base generator {name:?} must be a single letter in amalgam mode"),
                });
            }
        }
        for w in [&edge.x_left, &edge.x_right] {
            if !w.letters().iter().all(|l| l.generator() < base_len) {
                return Err(AmalgamError::BadContext {
                    reason: "edge words must lie in the base group".to_string(),
                });
            }
        }
        let mut names: Vec<String> = torus.alphabet().names().to_vec();
        let inner_len = names.len();
        for i in 0..inner_len {
            names.push(format!("{}1", names[i]));
        }
        let alphabet = Alphabet::new(names)?;
        Ok(AmalgamContext { torus, edge, alphabet, caps, inner_len })
    }

    pub fn torus(&self) -> &MappingTorus {
        &self.torus
    }

    pub fn edge(&self) -> &EdgeSpec {
        &self.edge
    }

    pub fn caps(&self) -> &AmalgamCaps {
        &self.caps
    }

    /// The combined alphabet `{a, …, t, a1, …, t1}`.
    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn split_letter(&self, l: Letter) -> (Factor, Letter) {
        let gen = l.generator();
        if gen < self.inner_len {
            (Factor::Left, l)
        } else {
            (Factor::Right, Letter::with_sign(gen - self.inner_len, l.is_positive()))
        }
    }

    pub fn join_letter(&self, f: Factor, l: Letter) -> Letter {
        match f {
            Factor::Left => l,
            Factor::Right => Letter::with_sign(l.generator() + self.inner_len, l.is_positive()),
        }
    }

    fn edge_power(&self, f: Factor, m: i64) -> TorusElement {
        TorusElement::from_base(self.edge.word(f).pow(m))
    }

    /// Returns `m` with `g = x^m` when `g` lies in `C`. Exact in free mode;
    /// in surface mode the power is sought within the configured window.
    pub fn edge_membership(&self, f: Factor, g: &TorusElement) -> Option<i64> {
        if g.k != 0 {
            return None;
        }
        let x = self.edge.word(f);
        if self.torus.base().is_surface() {
            if self.torus.base().is_identity(&g.u) {
                return Some(0);
            }
            for m in 1..=self.caps.coset_window as i64 {
                if self.torus.base().equal(&g.u, &x.pow(m)) {
                    return Some(m);
                }
                if self.torus.base().equal(&g.u, &x.pow(-m)) {
                    return Some(-m);
                }
            }
            return None;
        }
        if g.u.is_empty() {
            return Some(0);
        }
        if g.u.len() % x.len() != 0 {
            return None;
        }
        let m = (g.u.len() / x.len()) as i64;
        if g.u == x.pow(m) {
            Some(m)
        } else if g.u == x.pow(-m) {
            Some(-m)
        } else {
            None
        }
    }

    /// Window wide enough that any candidate beating `m = 0` is inspected:
    /// `|x^{-m}·u| ≥ |m|·ℓ − |u|` with `ℓ` the cyclic-core length of the
    /// relevant `x`-image, so `|m| ≤ 2|u|/ℓ` suffices.
    fn free_window(u_len: usize, core_len: usize) -> i64 {
        (2 * u_len / core_len.max(1)) as i64 + 1
    }

    /// Left decomposition `g = x^m · u` minimizing the factor length of `u`
    /// over the coset `Cg`, shortlex tie-break.
    pub fn coset_shortest(&self, f: Factor, g: &TorusElement) -> Result<CosetDecomposition, AmalgamError> {
        let x = self.edge.word(f);
        self.coset_scan(g, x, MulSide::Left)
    }

    /// Right decomposition `g = u · x^m`; the multiplier passes through the
    /// torus twist, so the scan works with powers of `φᵏ(x)`.
    pub fn coset_shortest_right(&self, f: Factor, g: &TorusElement) -> Result<CosetDecomposition, AmalgamError> {
        let x = self.edge.word(f);
        let twisted = self.torus.automorphism().power_apply(g.k, x);
        self.coset_scan(g, &twisted, MulSide::Right)
    }

    /// Ordered scan m = 0, +1, −1, +2, −2, … with the multiplier powers
    /// extended incrementally. In free mode the scan stops once
    /// `m·ℓ − |u|` exceeds the best length found, since no later candidate
    /// can win or tie; surface mode walks the full configured window.
    fn coset_scan(
        &self,
        g: &TorusElement,
        mult: &Word,
        side: MulSide,
    ) -> Result<CosetDecomposition, AmalgamError> {
        let surface = self.torus.base().is_surface();
        let core_len = mult.cyclic_core().len().max(1) as i64;
        let window = if surface {
            self.caps.coset_window as i64
        } else {
            Self::free_window(g.u.len(), core_len as usize)
        };
        let mult_inv = mult.inverse();
        let mut pow_pos = Word::empty(); // mult^{-m} for candidate +m
        let mut pow_neg = Word::empty(); // mult^{+m} for candidate -m
        let mut best: Option<(usize, i64, Word)> = None;
        let mut capped = false;

        for m in 0..=window {
            if let Some((best_len, _, _)) = &best {
                if !surface && m * core_len > g.u.len() as i64 + *best_len as i64 {
                    break;
                }
            }
            let signed: &[i64] = if m == 0 { &[0] } else { &[m, -m] };
            for &mm in signed {
                let p = if mm >= 0 { &pow_pos } else { &pow_neg };
                let u = match side {
                    MulSide::Left => p.mul(&g.u),
                    MulSide::Right => g.u.mul(p),
                };
                let base_len = if surface {
                    match self.torus.base().geodesic_len(&u, self.caps.geodesic_cap) {
                        Ok(l) => l,
                        Err(_) => {
                            capped = true;
                            continue;
                        }
                    }
                } else {
                    u.len()
                };
                let better = match &best {
                    None => true,
                    Some((bl, _, bu)) => {
                        base_len < *bl
                            || (base_len == *bl && u.shortlex_cmp(bu) == std::cmp::Ordering::Less)
                    }
                };
                if better {
                    best = Some((base_len, mm, u));
                }
            }
            pow_pos = pow_pos.mul(&mult_inv);
            pow_neg = pow_neg.mul(mult);
        }

        let k_len = g.k.unsigned_abs() as usize;
        let best = best.map(|(len, m, u)| CosetDecomposition {
            power: m,
            remainder: TorusElement { u, k: g.k },
            remainder_len: len + k_len,
        });
        if capped {
            return Err(AmalgamError::CappedCoset { window, best });
        }
        best.ok_or(AmalgamError::CappedCoset { window, best: None })
    }

    /// Spells a normal form back into raw combined letters (syllable reduced
    /// words followed by their `t`-powers; no coset alignment).
    pub fn raw_letters(&self, nf: &AmalgamNf) -> Vec<Letter> {
        let mut out = Vec::new();
        for s in &nf.syllables {
            let inner = self.torus.element_word(&s.value);
            out.extend(inner.letters().iter().map(|&l| self.join_letter(s.factor, l)));
        }
        out
    }

    pub fn parse_word(&self, text: &str) -> Result<Word, AmalgamError> {
        Ok(self.alphabet.parse_word(text)?)
    }

    pub fn parse(&self, text: &str) -> Result<AmalgamNf, AmalgamError> {
        let letters = self.alphabet.parse_letters(text)?;
        self.normalize(&letters)
    }

    /// Splits a raw word into maximal single-factor runs, torus-normalizes
    /// each run, then iterates identity dropping, same-factor merging, and
    /// `C`-syllable translation until the sequence strictly alternates with
    /// no interior `C`-syllables. Pure `C`-powers canonicalize into the left
    /// factor.
    pub fn normalize(&self, raw: &[Letter]) -> Result<AmalgamNf, AmalgamError> {
        let mut syllables: Vec<Syllable> = Vec::new();
        let mut run: Vec<Letter> = Vec::new();
        let mut run_factor = Factor::Left;
        for &l in raw {
            let (f, inner) = self.split_letter(l);
            if run.is_empty() || f == run_factor {
                run_factor = f;
                run.push(inner);
            } else {
                let value = self.torus.normalize(&run)?;
                syllables.push(Syllable { factor: run_factor, value });
                run.clear();
                run.push(inner);
                run_factor = f;
            }
        }
        if !run.is_empty() {
            let value = self.torus.normalize(&run)?;
            syllables.push(Syllable { factor: run_factor, value });
        }
        self.cleanup(syllables)
    }

    fn cleanup(&self, mut syl: Vec<Syllable>) -> Result<AmalgamNf, AmalgamError> {
        loop {
            let before = syl.len();
            syl.retain(|s| !s.value.is_identity());

            // Merge adjacent same-factor syllables.
            let mut stack: Vec<Syllable> = Vec::with_capacity(syl.len());
            for s in syl.drain(..) {
                match stack.last_mut() {
                    Some(top) if top.factor == s.factor => {
                        top.value = self.torus.mul(&top.value, &s.value);
                        if top.value.is_identity() {
                            stack.pop();
                        }
                    }
                    _ => stack.push(s),
                }
            }
            syl = stack;

            // Translate one C-syllable across the edge and attach it.
            let mut attached = false;
            if syl.len() > 1 {
                for i in 0..syl.len() {
                    if let Some(m) = self.edge_membership(syl[i].factor, &syl[i].value) {
                        if i > 0 {
                            let f = syl[i - 1].factor;
                            let c = self.edge_power(f, m);
                            syl[i - 1].value = self.torus.mul(&syl[i - 1].value, &c);
                        } else {
                            let f = syl[1].factor;
                            let c = self.edge_power(f, m);
                            syl[1].value = self.torus.mul(&c, &syl[1].value);
                        }
                        syl.remove(i);
                        attached = true;
                        break;
                    }
                }
            }
            if !attached && syl.len() == before {
                break;
            }
        }

        // Canonical C-form: a lone C-syllable is spelled in the left factor.
        if syl.len() == 1 {
            if let Some(m) = self.edge_membership(syl[0].factor, &syl[0].value) {
                syl[0] = Syllable { factor: Factor::Left, value: self.edge_power(Factor::Left, m) };
            }
        }
        Ok(AmalgamNf { syllables: syl })
    }

    /// True when the normal form is a pure `C`-power (or the identity);
    /// returns the power.
    pub fn as_edge_power(&self, nf: &AmalgamNf) -> Option<i64> {
        match nf.syllables.len() {
            0 => Some(0),
            1 => self.edge_membership(nf.syllables[0].factor, &nf.syllables[0].value),
            _ => None,
        }
    }

    pub fn syllable_length(&self, nf: &AmalgamNf) -> SyllableCount {
        match self.as_edge_power(nf) {
            Some(_) => SyllableCount { count: 0, in_edge_subgroup: true },
            None => SyllableCount { count: nf.syllables.len(), in_edge_subgroup: false },
        }
    }

    /// True exactly when every syllable has `t`-exponent zero, i.e. the
    /// element lies in the subgroup generated by the two base groups.
    /// Well defined because `C`-translation never changes the exponents.
    pub fn h_membership(&self, nf: &AmalgamNf) -> bool {
        nf.syllables.iter().all(|s| s.value.k == 0)
    }

    /// The coset-shortest rewriting: carries `x`-powers left to right,
    /// spelling each non-final syllable as its right-coset-shortest
    /// representative and the final syllable as the carried element itself.
    /// `C`-powers are spelled as `x^k` in the left factor. The output
    /// evaluates to the input, and two normal forms share an output exactly
    /// when they are equal in `M`.
    pub fn bgss_word(&self, nf: &AmalgamNf) -> Result<Word, AmalgamError> {
        let aligned = self.align(nf)?;
        self.canon_word(&aligned)
    }

    /// Runs the rewriting chain once, producing the aligned form.
    pub fn align(&self, nf: &AmalgamNf) -> Result<CanonElem, AmalgamError> {
        if self.as_edge_power(nf).is_some() {
            return Ok(CanonElem { syllables: nf.syllables.clone() });
        }
        let mut out = Vec::with_capacity(nf.syllables.len());
        let mut carry: i64 = 0;
        let last = nf.syllables.len() - 1;
        for (i, s) in nf.syllables.iter().enumerate() {
            let carried = if carry == 0 {
                s.value.clone()
            } else {
                self.torus.mul(&self.edge_power(s.factor, carry), &s.value)
            };
            if i < last {
                let dec = self.coset_shortest_right(s.factor, &carried)?;
                carry = dec.power;
                out.push(Syllable { factor: s.factor, value: dec.remainder });
            } else {
                out.push(Syllable { factor: s.factor, value: carried });
            }
        }
        Ok(CanonElem { syllables: out })
    }

    /// Canonical word of an aligned element: plain concatenation.
    pub fn canon_word(&self, e: &CanonElem) -> Result<Word, AmalgamError> {
        let mut out: Vec<Letter> = Vec::new();
        for s in &e.syllables {
            let spelled = self.spell_syllable(s.factor, &s.value)?;
            out.extend_from_slice(spelled.letters());
        }
        Ok(Word::from_letters(out))
    }

    pub fn canon_from_letters(&self, raw: &[Letter]) -> Result<CanonElem, AmalgamError> {
        self.align(&self.normalize(raw)?)
    }

    /// The `x`-power of a pure-`C` aligned element (`Some(0)` for the
    /// identity), `None` otherwise.
    pub fn canon_edge_power(&self, e: &CanonElem) -> Option<i64> {
        match e.syllables.len() {
            0 => Some(0),
            1 => self.edge_membership(e.syllables[0].factor, &e.syllables[0].value),
            _ => None,
        }
    }

    /// Downgrades an aligned element to the plain normal form (the aligned
    /// syllables are a valid alternating decomposition already).
    pub fn canon_to_nf(&self, e: &CanonElem) -> AmalgamNf {
        AmalgamNf { syllables: e.syllables.clone() }
    }

    /// Right multiplication by one combined letter, preserving alignment.
    /// Only the tail region changes: extending within the tail factor
    /// mutates the tail; a factor switch first freezes the tail as an
    /// interior coset-shortest syllable and pushes the carried letter.
    pub fn canon_mul_letter(&self, e: &CanonElem, l: Letter) -> Result<CanonElem, AmalgamError> {
        let (f, inner) = self.split_letter(l);
        let letter_elem = if inner.generator() == self.torus.t_gen() {
            TorusElement { u: Word::empty(), k: if inner.is_positive() { 1 } else { -1 } }
        } else {
            TorusElement::from_base(Word::single(inner))
        };

        if e.syllables.is_empty() {
            return Ok(match self.edge_membership(f, &letter_elem) {
                Some(m) => self.canon_c_form(m),
                None => CanonElem {
                    syllables: vec![Syllable { factor: f, value: letter_elem }],
                },
            });
        }

        if let Some(p) = self.canon_edge_power(e) {
            // Pure C-power: translate into the letter's factor and multiply.
            let v = self.torus.mul(&self.edge_power(f, p), &letter_elem);
            return Ok(match self.edge_membership(f, &v) {
                Some(m) => self.canon_c_form(m),
                None => CanonElem {
                    syllables: vec![Syllable { factor: f, value: v }],
                },
            });
        }

        let mut syllables = e.syllables.clone();
        let tail = syllables.last().expect("nonempty checked").clone();
        if tail.factor == f {
            let v = self.torus.mul(&tail.value, &letter_elem);
            if v.is_identity() {
                syllables.pop();
                return Ok(CanonElem { syllables });
            }
            if let Some(m) = self.edge_membership(f, &v) {
                syllables.pop();
                match syllables.last_mut() {
                    None => return Ok(self.canon_c_form(m)),
                    Some(prev) => {
                        prev.value = self.torus.mul(&prev.value, &self.edge_power(prev.factor, m));
                    }
                }
                return Ok(CanonElem { syllables });
            }
            syllables.last_mut().expect("nonempty").value = v;
            return Ok(CanonElem { syllables });
        }

        // Letter lives in the other factor.
        if let Some(m) = self.edge_membership(f, &letter_elem) {
            // An edge letter crosses over and is absorbed by the tail.
            let prev = syllables.last_mut().expect("nonempty");
            prev.value = self.torus.mul(&prev.value, &self.edge_power(prev.factor, m));
            return Ok(CanonElem { syllables });
        }
        let dec = self.coset_shortest_right(tail.factor, &tail.value)?;
        syllables.last_mut().expect("nonempty").value = dec.remainder;
        let carried = self.torus.mul(&self.edge_power(f, dec.power), &letter_elem);
        syllables.push(Syllable { factor: f, value: carried });
        Ok(CanonElem { syllables })
    }

    fn canon_c_form(&self, m: i64) -> CanonElem {
        if m == 0 {
            return CanonElem::identity();
        }
        CanonElem {
            syllables: vec![Syllable {
                factor: Factor::Left,
                value: self.edge_power(Factor::Left, m),
            }],
        }
    }

    /// H-membership of an aligned element (`x`-power carries never change
    /// the `t`-exponents, so this matches the normal-form decision).
    pub fn canon_h_membership(&self, e: &CanonElem) -> bool {
        e.syllables.iter().all(|s| s.value.k == 0)
    }

    fn spell_syllable(&self, f: Factor, value: &TorusElement) -> Result<Word, AmalgamError> {
        let inner = self.torus.canonical_word(value, self.caps.geodesic_cap)?;
        Ok(Word::from_letters(
            inner.letters().iter().map(|&l| self.join_letter(f, l)),
        ))
    }

    /// Letter-for-letter equality of the canonical words.
    pub fn equal(&self, a: &AmalgamNf, b: &AmalgamNf) -> Result<bool, AmalgamError> {
        Ok(self.bgss_word(a)? == self.bgss_word(b)?)
    }

    pub fn mul(&self, a: &AmalgamNf, b: &AmalgamNf) -> Result<AmalgamNf, AmalgamError> {
        let mut letters = self.raw_letters(a);
        letters.extend(self.raw_letters(b));
        self.normalize(&letters)
    }

    pub fn inv(&self, a: &AmalgamNf) -> Result<AmalgamNf, AmalgamError> {
        let letters: Vec<Letter> = self.raw_letters(a).iter().rev().map(|l| l.inverse()).collect();
        self.normalize(&letters)
    }

    pub fn mul_letter(&self, a: &AmalgamNf, l: Letter) -> Result<AmalgamNf, AmalgamError> {
        let mut letters = self.raw_letters(a);
        letters.push(l);
        self.normalize(&letters)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preset::default_free_amalgam;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn ctx() -> AmalgamContext {
        default_free_amalgam()
    }

    fn nf(ctx: &AmalgamContext, s: &str) -> AmalgamNf {
        ctx.parse(s).unwrap()
    }

    fn canon(ctx: &AmalgamContext, s: &str) -> String {
        ctx.alphabet().print_word(&ctx.bgss_word(&nf(ctx, s)).unwrap())
    }

    #[test]
    fn edge_membership_examples() {
        let c = ctx();
        let t = c.torus();
        let a5 = TorusElement::from_base(t.base().alphabet().parse_word("aaaaa").unwrap());
        assert_eq!(c.edge_membership(Factor::Left, &a5), Some(5));

        let b = TorusElement::from_base(t.base().alphabet().parse_word("b").unwrap());
        assert_eq!(c.edge_membership(Factor::Left, &b), None);

        let inv3 = TorusElement::from_base(t.base().alphabet().parse_word("AAA").unwrap());
        assert_eq!(c.edge_membership(Factor::Left, &inv3), Some(-3));
    }

    #[test]
    fn edge_membership_longer_edge_word() {
        // x = ab: (ab)³ ↦ 3.
        let torus = crate::preset::default_free_torus();
        let x = torus.base().alphabet().parse_word("ab").unwrap();
        let edge = EdgeSpec::new(x.clone(), x).unwrap();
        let c = AmalgamContext::new(torus, edge, AmalgamCaps::default()).unwrap();
        let g = TorusElement::from_base(c.torus().base().alphabet().parse_word("ababab").unwrap());
        assert_eq!(c.edge_membership(Factor::Left, &g), Some(3));
    }

    #[test]
    fn coset_shortest_examples() {
        let c = ctx();
        let alpha = c.torus().base().alphabet();
        // g = (ab)³: m = 1 strips the leading a.
        let g = TorusElement::from_base(alpha.parse_word("ababab").unwrap());
        let dec = c.coset_shortest(Factor::Left, &g).unwrap();
        assert_eq!(dec.power, 1);
        assert_eq!(dec.remainder.u, alpha.parse_word("babab").unwrap());
        assert_eq!(dec.remainder_len, 5);

        let g = TorusElement::from_base(alpha.parse_word("aaaaa").unwrap());
        let dec = c.coset_shortest(Factor::Left, &g).unwrap();
        assert_eq!(dec.power, 5);
        assert!(dec.remainder.is_identity());

        let g = TorusElement::from_base(alpha.parse_word("b").unwrap());
        let dec = c.coset_shortest(Factor::Left, &g).unwrap();
        assert_eq!(dec.power, 0);
        assert_eq!(dec.remainder.u, alpha.parse_word("b").unwrap());
    }

    /// Brute-force oracle over an oversized window with naive length compare.
    #[test]
    fn coset_shortest_against_bruteforce() {
        let c = ctx();
        let alpha = c.torus().base().alphabet();
        let x = alpha.parse_word("a").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..300 {
            let letters: Vec<Letter> = (0..rng.gen_range(0..8))
                .map(|_| Letter::with_sign(rng.gen_range(0..3), rng.gen_bool(0.5)))
                .collect();
            let g = TorusElement::from_base(Word::from_letters(letters));
            let window = 2 * g.u.len() as i64 + 4;
            let mut best: Option<(usize, i64, Word)> = None;
            for m in -window..=window {
                let u = x.pow(-m).mul(&g.u);
                let better = match &best {
                    None => true,
                    Some((len, _, bu)) => {
                        u.len() < *len
                            || (u.len() == *len && u.shortlex_cmp(bu) == std::cmp::Ordering::Less)
                    }
                };
                if better {
                    best = Some((u.len(), m, u));
                }
            }
            let (len, m, u) = best.unwrap();
            let dec = c.coset_shortest(Factor::Left, &g).unwrap();
            assert_eq!((dec.remainder_len, dec.power, dec.remainder.u), (len, m, u));
        }
    }

    #[test]
    fn normalize_examples() {
        let c = ctx();
        // Amalgamation relation: a a1⁻¹ = 1.
        assert!(nf(&c, "aA1").is_identity());

        // a1 a crosses the edge and merges.
        let z = nf(&c, "a1a");
        assert_eq!(z.syllables().len(), 1);
        assert_eq!(z.syllables()[0].factor, Factor::Left);
        assert_eq!(
            z.syllables()[0].value.u,
            c.torus().base().alphabet().parse_word("aa").unwrap()
        );

        // b t b1 splits into two syllables (b,1) and (b1,0).
        let z = nf(&c, "btb1");
        assert_eq!(z.syllables().len(), 2);
        assert_eq!(z.syllables()[0].factor, Factor::Left);
        assert_eq!(z.syllables()[0].value.k, 1);
        assert_eq!(z.syllables()[1].factor, Factor::Right);
        assert_eq!(z.syllables()[1].value.k, 0);
    }

    #[test]
    fn bgss_examples() {
        let c = ctx();
        assert_eq!(canon(&c, ""), "");
        // Single syllable: plain reduced spelling.
        assert_eq!(canon(&c, "ababab"), "ababab");
        // b t1: no a-power shortens b, so the word survives as-is.
        assert_eq!(canon(&c, "bt1"), "bt1");
        // C-powers spell in the left factor.
        assert_eq!(canon(&c, "a1a1a1"), "aaa");
        assert_eq!(canon(&c, "aA1"), "");
    }

    #[test]
    fn equality_examples() {
        let c = ctx();
        assert!(c.equal(&nf(&c, "aA1"), &nf(&c, "")).unwrap());
        assert!(!c.equal(&nf(&c, "t"), &nf(&c, "t1")).unwrap());
        assert!(c.equal(&nf(&c, "a1b"), &nf(&c, "ab")).unwrap());
    }

    #[test]
    fn h_membership_examples() {
        let c = ctx();
        assert!(c.h_membership(&nf(&c, "aBa1")));
        assert!(!c.h_membership(&nf(&c, "t")));
        assert!(c.h_membership(&nf(&c, "taT")));
        assert!(!c.h_membership(&nf(&c, "btb1")));
    }

    #[test]
    fn syllable_length_examples() {
        let c = ctx();
        assert_eq!(
            c.syllable_length(&nf(&c, "")),
            SyllableCount { count: 0, in_edge_subgroup: true }
        );
        assert_eq!(
            c.syllable_length(&nf(&c, "aaaaaaa")),
            SyllableCount { count: 0, in_edge_subgroup: true }
        );
        assert_eq!(
            c.syllable_length(&nf(&c, "btb1")),
            SyllableCount { count: 2, in_edge_subgroup: false }
        );
    }

    fn random_combined(rng: &mut impl Rng, c: &AmalgamContext, len: usize) -> Vec<Letter> {
        (0..len)
            .map(|_| Letter::with_sign(rng.gen_range(0..c.alphabet().len()), rng.gen_bool(0.5)))
            .collect()
    }

    #[test]
    fn evaluation_soundness() {
        let c = ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..10_000 {
            let len = rng.gen_range(0..10);
            let raw = random_combined(&mut rng, &c, len);
            let z = c.normalize(&raw).unwrap();
            let canonical = c.bgss_word(&z).unwrap();
            let reparsed = c.normalize(canonical.letters()).unwrap();
            // Fixpoint: rewriting the canonical word is the identity map.
            assert_eq!(c.bgss_word(&reparsed).unwrap(), canonical);
            assert!(c.equal(&z, &reparsed).unwrap());
        }
    }

    #[test]
    fn membership_closure() {
        let c = ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        // Random H-elements: words over base letters of both factors only.
        let h_letters: Vec<Letter> = (0..c.alphabet().len())
            .map(Letter::positive)
            .filter(|l| {
                let (f, inner) = c.split_letter(*l);
                let _ = f;
                inner.generator() < c.torus().t_gen()
            })
            .collect();
        for _ in 0..10_000 {
            let pick = |rng: &mut ChaCha8Rng| {
                let letters: Vec<Letter> = (0..rng.gen_range(0..6))
                    .map(|_| {
                        let l = h_letters[rng.gen_range(0..h_letters.len())];
                        if rng.gen_bool(0.5) {
                            l
                        } else {
                            l.inverse()
                        }
                    })
                    .collect();
                letters
            };
            let h1 = c.normalize(&pick(&mut rng)).unwrap();
            let h2 = c.normalize(&pick(&mut rng)).unwrap();
            assert!(c.h_membership(&h1));
            assert!(c.h_membership(&h2));
            assert!(c.h_membership(&c.mul(&h1, &h2).unwrap()));
            assert!(c.h_membership(&c.inv(&h1).unwrap()));
        }
    }

    #[test]
    fn c_translation_invariance() {
        let c = ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for _ in 0..2_000 {
            let len = rng.gen_range(0..8);
            let raw = random_combined(&mut rng, &c, len);
            let z = c.normalize(&raw).unwrap();
            if z.is_identity() {
                continue;
            }
            // Multiply a random syllable on the right by x^m and renormalize.
            let idx = rng.gen_range(0..z.syllables().len());
            let m = rng.gen_range(-3..=3i64);
            let mut letters = Vec::new();
            for (i, s) in z.syllables().iter().enumerate() {
                let inner = c.torus().element_word(&s.value);
                letters.extend(inner.letters().iter().map(|&l| c.join_letter(s.factor, l)));
                if i == idx {
                    let x = c.edge().word(s.factor).pow(m);
                    letters.extend(x.letters().iter().map(|&l| c.join_letter(s.factor, l)));
                }
            }
            let shifted = c.normalize(&letters).unwrap();
            // Syllable count and H-membership are invariant under right
            // C-multiplication of any single syllable.
            assert_eq!(c.syllable_length(&z).count, c.syllable_length(&shifted).count);
            assert_eq!(c.h_membership(&z), c.h_membership(&shifted));
        }
    }

    /// Dual-route canonical oracle: decompose with *left* cosets processed
    /// right-to-left, spelling a leading x-power, and check that the induced
    /// equality partition matches the bgss one on all short words.
    fn left_canonical(c: &AmalgamContext, z: &AmalgamNf) -> Word {
        if let Some(m) = c.as_edge_power(z) {
            let value = TorusElement::from_base(c.edge().word(Factor::Left).pow(m));
            let inner = c.torus().element_word(&value);
            return Word::from_letters(
                inner.letters().iter().map(|&l| c.join_letter(Factor::Left, l)),
            );
        }
        let mut pieces: Vec<Word> = Vec::new();
        let mut carry: i64 = 0;
        for (i, s) in z.syllables().iter().enumerate().rev() {
            let carried = if carry == 0 {
                s.value.clone()
            } else {
                c.torus()
                    .mul(&s.value, &TorusElement::from_base(c.edge().word(s.factor).pow(carry)))
            };
            if i > 0 {
                let dec = c.coset_shortest(s.factor, &carried).unwrap();
                carry = dec.power;
                let inner = c.torus().element_word(&dec.remainder);
                pieces.push(Word::from_letters(
                    inner.letters().iter().map(|&l| c.join_letter(s.factor, l)),
                ));
            } else {
                // The first syllable absorbs the remaining carry exactly.
                let inner = c.torus().element_word(&carried);
                pieces.push(Word::from_letters(
                    inner.letters().iter().map(|&l| c.join_letter(s.factor, l)),
                ));
            }
        }
        let mut letters = Vec::new();
        for p in pieces.iter().rev() {
            letters.extend_from_slice(p.letters());
        }
        Word::from_letters(letters)
    }

    #[test]
    fn dual_route_partitions_agree_exhaustively() {
        let c = ctx();
        let n = c.alphabet().len();
        let mut words: Vec<Vec<Letter>> = vec![vec![]];
        let mut frontier: Vec<Vec<Letter>> = vec![vec![]];
        for _ in 0..3 {
            let mut next = Vec::new();
            for w in &frontier {
                for gen in 0..n {
                    for positive in [true, false] {
                        let mut w2 = w.clone();
                        w2.push(Letter::with_sign(gen, positive));
                        next.push(w2);
                    }
                }
            }
            words.extend(next.iter().cloned());
            frontier = next;
        }
        // bgss key → left-route key must be a bijection on classes.
        let mut to_left: HashMap<Word, Word> = HashMap::new();
        let mut to_bgss: HashMap<Word, Word> = HashMap::new();
        for raw in &words {
            let z = c.normalize(raw).unwrap();
            let bgss = c.bgss_word(&z).unwrap();
            let left = left_canonical(&c, &z);
            // The left route must evaluate to the same element.
            assert!(c.equal(&z, &c.normalize(left.letters()).unwrap()).unwrap());
            if let Some(prev) = to_left.insert(bgss.clone(), left.clone()) {
                assert_eq!(prev, left, "bgss class split by left route");
            }
            if let Some(prev) = to_bgss.insert(left, bgss.clone()) {
                assert_eq!(prev, bgss, "left class split by bgss route");
            }
        }
    }

    /// The incremental canonical path must agree with the rewriting chain on
    /// every input: append letters one at a time and compare words.
    #[test]
    fn canon_mul_letter_matches_chain_exhaustively() {
        let c = ctx();
        let n = c.alphabet().len();
        let mut frontier: Vec<Vec<Letter>> = vec![vec![]];
        for _ in 0..3 {
            let mut next = Vec::new();
            for w in &frontier {
                for gen in 0..n {
                    for positive in [true, false] {
                        let mut w2 = w.clone();
                        w2.push(Letter::with_sign(gen, positive));
                        next.push(w2);
                    }
                }
            }
            for raw in &next {
                let mut e = CanonElem::identity();
                for &l in raw {
                    e = c.canon_mul_letter(&e, l).unwrap();
                }
                let incremental = c.canon_word(&e).unwrap();
                let chained = c.bgss_word(&c.normalize(raw).unwrap()).unwrap();
                assert_eq!(
                    incremental,
                    chained,
                    "divergence on {:?}",
                    c.alphabet().print_word(&Word::from_letters(raw.clone()))
                );
            }
            frontier = next;
        }
    }

    #[test]
    fn canon_mul_letter_matches_chain_random() {
        let c = ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        for _ in 0..3000 {
            let len = rng.gen_range(0..14);
            let raw = random_combined(&mut rng, &c, len);
            let mut e = CanonElem::identity();
            for &l in &raw {
                e = c.canon_mul_letter(&e, l).unwrap();
            }
            let incremental = c.canon_word(&e).unwrap();
            let chained = c.bgss_word(&c.normalize(&raw).unwrap()).unwrap();
            assert_eq!(
                incremental,
                chained,
                "divergence on {:?}",
                c.alphabet().print_word(&Word::from_letters(raw.clone()))
            );
        }
    }

    #[test]
    fn edge_spec_validation() {
        let alpha = crate::words::Alphabet::new(["a", "b", "c"]).unwrap();
        let aa = alpha.parse_word("aa").unwrap();
        let a = alpha.parse_word("a").unwrap();
        let spec = EdgeSpec::new(aa, a).unwrap();
        assert!(matches!(
            spec.check_primitive(),
            Err(AmalgamError::EdgeRejected { reason: EdgeReason::ProperPower, .. })
        ));
        assert!(matches!(
            EdgeSpec::new(Word::empty(), alpha.parse_word("a").unwrap()),
            Err(AmalgamError::EdgeRejected { reason: EdgeReason::Empty, .. })
        ));
        let not_cyc = alpha.parse_word("abA").unwrap();
        assert!(matches!(
            EdgeSpec::new(not_cyc, alpha.parse_word("a").unwrap()),
            Err(AmalgamError::EdgeRejected { reason: EdgeReason::NotCyclicallyReduced, .. })
        ));
    }
}
