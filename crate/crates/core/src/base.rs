//! The base group `F`: free over its alphabet, or a C'(1/6) quotient given
//! by a presentation (surface mode).
//!
//! Free mode is exact everywhere. Surface mode decides the word problem with
//! Dehn's algorithm and gets geodesic lengths and canonical (shortlex-least
//! geodesic) words from a memoized ball enumeration, capped by the caller.

use std::collections::HashMap;
use std::sync::RwLock;

use thiserror::Error;

use crate::words::{Alphabet, Letter, Presentation, Word, WordError};

/// A search that hit its configured cap before resolving.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("search exceeded cap {cap}")]
pub struct CapExceeded {
    pub cap: usize,
}

#[derive(Debug, Error)]
pub enum BaseError {
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Capped(#[from] CapExceeded),
}

pub enum BaseGroup {
    Free(Alphabet),
    Surface(SurfaceBase),
}

impl BaseGroup {
    pub fn free(alphabet: Alphabet) -> BaseGroup {
        BaseGroup::Free(alphabet)
    }

    pub fn surface(presentation: Presentation) -> Result<BaseGroup, WordError> {
        if !presentation.satisfies_sixth() {
            return Err(WordError::UnsupportedPresentation);
        }
        Ok(BaseGroup::Surface(SurfaceBase {
            presentation,
            ball: RwLock::new(SurfaceBall::new()),
        }))
    }

    pub fn alphabet(&self) -> &Alphabet {
        match self {
            BaseGroup::Free(a) => a,
            BaseGroup::Surface(s) => s.presentation.alphabet(),
        }
    }

    pub fn is_surface(&self) -> bool {
        matches!(self, BaseGroup::Surface(_))
    }

    pub fn presentation(&self) -> Option<&Presentation> {
        match self {
            BaseGroup::Free(_) => None,
            BaseGroup::Surface(s) => Some(&s.presentation),
        }
    }

    /// Deterministic reduced representative: free reduction, then Dehn
    /// reduction in surface mode. Not canonical in surface mode.
    pub fn reduce(&self, w: &Word) -> Word {
        match self {
            BaseGroup::Free(_) => w.clone(),
            BaseGroup::Surface(s) => s.presentation.dehn_reduce(w).expect("validated C'(1/6)"),
        }
    }

    pub fn is_identity(&self, w: &Word) -> bool {
        match self {
            BaseGroup::Free(_) => w.is_empty(),
            BaseGroup::Surface(s) => s
                .presentation
                .is_identity(w)
                .expect("validated C'(1/6)"),
        }
    }

    pub fn equal(&self, a: &Word, b: &Word) -> bool {
        match self {
            BaseGroup::Free(_) => a == b,
            BaseGroup::Surface(_) => self.is_identity(&a.mul(&b.inverse())),
        }
    }

    /// Exact geodesic length, capped in surface mode.
    pub fn geodesic_len(&self, w: &Word, cap: usize) -> Result<usize, CapExceeded> {
        match self {
            BaseGroup::Free(_) => Ok(w.len()),
            BaseGroup::Surface(s) => Ok(s.canonical(w, cap)?.len()),
        }
    }

    /// Canonical word: the reduced word itself in free mode, the
    /// shortlex-least geodesic representative in surface mode.
    pub fn canonical(&self, w: &Word, cap: usize) -> Result<Word, CapExceeded> {
        match self {
            BaseGroup::Free(_) => Ok(w.clone()),
            BaseGroup::Surface(s) => s.canonical(w, cap),
        }
    }
}

pub struct SurfaceBase {
    presentation: Presentation,
    ball: RwLock<SurfaceBall>,
}

impl SurfaceBase {
    fn canonical(&self, w: &Word, cap: usize) -> Result<Word, CapExceeded> {
        let reduced = self.presentation.dehn_reduce(w).expect("validated C'(1/6)");
        // The Dehn-reduced length bounds the geodesic length from above.
        let target = reduced.len().min(cap);
        {
            let ball = self.ball.read().unwrap();
            if let Some(word) = ball.lookup(&self.presentation, &reduced) {
                return Ok(word);
            }
            if ball.radius >= target {
                return Err(CapExceeded { cap });
            }
        }
        let mut ball = self.ball.write().unwrap();
        while ball.radius < target {
            ball.grow(&self.presentation);
            if let Some(word) = ball.lookup(&self.presentation, &reduced) {
                return Ok(word);
            }
        }
        ball.lookup(&self.presentation, &reduced)
            .ok_or(CapExceeded { cap })
    }
}

/// Memoized shortlex-geodesic enumeration of the surface group.
///
/// Elements are deduplicated with Dehn-based equality, bucketed by the
/// abelianized exponent vector to keep the quadratic comparisons local.
struct SurfaceBall {
    radius: usize,
    words: Vec<Word>,
    level_start: Vec<usize>,
    buckets: HashMap<Vec<i32>, Vec<usize>>,
}

fn abelianized(w: &Word, rank: usize) -> Vec<i32> {
    let mut v = vec![0i32; rank];
    for &l in w.letters() {
        v[l.generator()] += if l.is_positive() { 1 } else { -1 };
    }
    v
}

impl SurfaceBall {
    fn new() -> SurfaceBall {
        SurfaceBall {
            radius: 0,
            words: vec![Word::empty()],
            level_start: vec![0, 1],
            buckets: HashMap::new(),
        }
    }

    fn lookup(&self, p: &Presentation, reduced: &Word) -> Option<Word> {
        // The identity lives outside the buckets.
        if p.is_identity(reduced).expect("validated") {
            return Some(Word::empty());
        }
        let rank = p.alphabet().len();
        let key = abelianized(reduced, rank);
        let ids = self.buckets.get(&key)?;
        for &id in ids {
            if p.equal(&self.words[id], reduced).expect("validated") {
                return Some(self.words[id].clone());
            }
        }
        None
    }

    fn grow(&mut self, p: &Presentation) {
        let rank = p.alphabet().len();
        let lo = self.level_start[self.radius];
        let hi = self.level_start[self.radius + 1];
        let mut next_ids = Vec::new();
        for parent in lo..hi {
            let base = self.words[parent].clone();
            for gen in 0..rank {
                for positive in [true, false] {
                    let l = Letter::with_sign(gen, positive);
                    if base.letters().last() == Some(&l.inverse()) {
                        continue;
                    }
                    let mut cand = base.clone();
                    cand.push(l);
                    // Geodesics are Dehn-irreducible; anything reducible was
                    // discovered at a smaller radius.
                    if p.dehn_reduce(&cand).expect("validated").len() < cand.len() {
                        continue;
                    }
                    let key = abelianized(&cand, rank);
                    let bucket = self.buckets.entry(key).or_default();
                    let mut seen = false;
                    for &id in bucket.iter() {
                        if p.equal(&self.words[id], &cand).expect("validated") {
                            seen = true;
                            break;
                        }
                    }
                    if !seen {
                        let id = self.words.len();
                        self.words.push(cand);
                        bucket.push(id);
                        next_ids.push(id);
                    }
                }
            }
        }
        self.radius += 1;
        self.level_start.push(self.words.len());
    }
}
