//! Radius-capped metric substrate: Cayley-ball enumeration over canonical
//! keys, bidirectional distance search, Gromov products, four-point
//! hyperbolicity estimation, quasiconvexity and distortion profiles.
//!
//! Every context exposes a canonical word per element; two elements share a
//! key exactly when they are equal in the group (within the configured
//! caps). All reported quantities carry the caps they were computed under
//! and are never extrapolated past them.

use std::collections::HashMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::amalgam::{AmalgamContext, AmalgamError, CanonElem};
use crate::base::{BaseGroup, CapExceeded};
use crate::torus::{MappingTorus, TorusElement, TorusError};
use crate::words::{Alphabet, Letter, Word, WordError};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Torus(#[from] TorusError),
    #[error(transparent)]
    Amalgam(#[from] AmalgamError),
    #[error(transparent)]
    Capped(#[from] CapExceeded),
    #[error("ball construction stopped at radius {achieved} of requested {requested}")]
    PartialBall { requested: usize, achieved: usize },
}

/// A group with canonical keys, seen through its generator moves.
pub trait GroupContext {
    type Elem: Clone;

    fn alphabet(&self) -> &Alphabet;
    fn identity_elem(&self) -> Self::Elem;
    fn mul_letter_elem(&self, e: &Self::Elem, l: Letter) -> Result<Self::Elem, MetricError>;
    fn mul_elem(&self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem, MetricError>;
    fn inv_elem(&self, e: &Self::Elem) -> Result<Self::Elem, MetricError>;
    /// Canonical word: equal elements, equal words.
    fn canonical_word(&self, e: &Self::Elem) -> Result<Word, MetricError>;
    fn elem_of_word(&self, w: &Word) -> Result<Self::Elem, MetricError>;

    fn letter_count(&self) -> usize {
        2 * self.alphabet().len()
    }

    fn letter_by_index(&self, i: usize) -> Letter {
        Letter::with_sign(i / 2, i % 2 == 0)
    }

    fn parse_elem(&self, text: &str) -> Result<Self::Elem, MetricError> {
        let w = self.alphabet().parse_word(text)?;
        self.elem_of_word(&w)
    }
}

/// Plain free group over an alphabet.
pub struct FreeGroupCtx {
    alphabet: Alphabet,
}

impl FreeGroupCtx {
    pub fn new(alphabet: Alphabet) -> FreeGroupCtx {
        FreeGroupCtx { alphabet }
    }
}

impl GroupContext for FreeGroupCtx {
    type Elem = Word;

    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn identity_elem(&self) -> Word {
        Word::empty()
    }

    fn mul_letter_elem(&self, e: &Word, l: Letter) -> Result<Word, MetricError> {
        let mut w = e.clone();
        w.push(l);
        Ok(w)
    }

    fn mul_elem(&self, a: &Word, b: &Word) -> Result<Word, MetricError> {
        Ok(a.mul(b))
    }

    fn inv_elem(&self, e: &Word) -> Result<Word, MetricError> {
        Ok(e.inverse())
    }

    fn canonical_word(&self, e: &Word) -> Result<Word, MetricError> {
        Ok(e.clone())
    }

    fn elem_of_word(&self, w: &Word) -> Result<Word, MetricError> {
        self.alphabet.check_word(w)?;
        Ok(w.clone())
    }
}

/// Base group seen as a metric context (free or surface mode).
pub struct BaseCtx<'a> {
    base: &'a BaseGroup,
    cap: usize,
}

impl<'a> BaseCtx<'a> {
    pub fn new(base: &'a BaseGroup, cap: usize) -> BaseCtx<'a> {
        BaseCtx { base, cap }
    }
}

impl GroupContext for BaseCtx<'_> {
    type Elem = Word;

    fn alphabet(&self) -> &Alphabet {
        self.base.alphabet()
    }

    fn identity_elem(&self) -> Word {
        Word::empty()
    }

    fn mul_letter_elem(&self, e: &Word, l: Letter) -> Result<Word, MetricError> {
        let mut w = e.clone();
        w.push(l);
        Ok(self.base.reduce(&w))
    }

    fn mul_elem(&self, a: &Word, b: &Word) -> Result<Word, MetricError> {
        Ok(self.base.reduce(&a.mul(b)))
    }

    fn inv_elem(&self, e: &Word) -> Result<Word, MetricError> {
        Ok(e.inverse())
    }

    fn canonical_word(&self, e: &Word) -> Result<Word, MetricError> {
        Ok(self.base.canonical(e, self.cap)?)
    }

    fn elem_of_word(&self, w: &Word) -> Result<Word, MetricError> {
        self.base.alphabet().check_word(w)?;
        Ok(self.base.reduce(w))
    }
}

/// Mapping torus as a metric context over `base ∪ {t}`.
pub struct TorusCtx<'a> {
    torus: &'a MappingTorus,
    cap: usize,
}

impl<'a> TorusCtx<'a> {
    pub fn new(torus: &'a MappingTorus, cap: usize) -> TorusCtx<'a> {
        TorusCtx { torus, cap }
    }

    pub fn torus(&self) -> &MappingTorus {
        self.torus
    }
}

impl GroupContext for TorusCtx<'_> {
    type Elem = TorusElement;

    fn alphabet(&self) -> &Alphabet {
        self.torus.alphabet()
    }

    fn identity_elem(&self) -> TorusElement {
        TorusElement::identity()
    }

    fn mul_letter_elem(&self, e: &TorusElement, l: Letter) -> Result<TorusElement, MetricError> {
        Ok(self.torus.mul_letter(e, l)?)
    }

    fn mul_elem(&self, a: &TorusElement, b: &TorusElement) -> Result<TorusElement, MetricError> {
        Ok(self.torus.mul(a, b))
    }

    fn inv_elem(&self, e: &TorusElement) -> Result<TorusElement, MetricError> {
        Ok(self.torus.inv(e))
    }

    fn canonical_word(&self, e: &TorusElement) -> Result<Word, MetricError> {
        Ok(self.torus.canonical_word(e, self.cap)?)
    }

    fn elem_of_word(&self, w: &Word) -> Result<TorusElement, MetricError> {
        Ok(self.torus.normalize(w.letters())?)
    }
}

impl GroupContext for AmalgamContext {
    type Elem = CanonElem;

    fn alphabet(&self) -> &Alphabet {
        AmalgamContext::alphabet(self)
    }

    fn identity_elem(&self) -> CanonElem {
        CanonElem::identity()
    }

    fn mul_letter_elem(&self, e: &CanonElem, l: Letter) -> Result<CanonElem, MetricError> {
        Ok(self.canon_mul_letter(e, l)?)
    }

    fn mul_elem(&self, a: &CanonElem, b: &CanonElem) -> Result<CanonElem, MetricError> {
        let mut letters = self.raw_letters(&self.canon_to_nf(a));
        letters.extend(self.raw_letters(&self.canon_to_nf(b)));
        Ok(self.canon_from_letters(&letters)?)
    }

    fn inv_elem(&self, e: &CanonElem) -> Result<CanonElem, MetricError> {
        let letters: Vec<Letter> = self
            .raw_letters(&self.canon_to_nf(e))
            .iter()
            .rev()
            .map(|l| l.inverse())
            .collect();
        Ok(self.canon_from_letters(&letters)?)
    }

    fn canonical_word(&self, e: &CanonElem) -> Result<Word, MetricError> {
        Ok(self.canon_word(e)?)
    }

    fn elem_of_word(&self, w: &Word) -> Result<CanonElem, MetricError> {
        Ok(self.canon_from_letters(w.letters())?)
    }
}

/// Canonical word packed into a u128 when short enough (5 bits per letter,
/// up to 25 letters); longer words spill to a boxed code slice.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum CompactKey {
    Packed(u128),
    Spilled(Box<[i16]>),
}

impl CompactKey {
    pub fn encode(w: &Word) -> CompactKey {
        let letters = w.letters();
        let packable =
            letters.len() <= 25 && letters.iter().all(|l| l.shortlex_rank() < 31);
        if packable {
            let mut v: u128 = 0;
            for (i, l) in letters.iter().enumerate() {
                v |= ((l.shortlex_rank() as u128) + 1) << (5 * i);
            }
            CompactKey::Packed(v)
        } else {
            CompactKey::Spilled(
                letters
                    .iter()
                    .map(|l| {
                        let g = l.generator() as i16 + 1;
                        if l.is_positive() {
                            g
                        } else {
                            -g
                        }
                    })
                    .collect(),
            )
        }
    }

    pub fn decode(&self) -> Word {
        match self {
            CompactKey::Packed(mut v) => {
                let mut letters = Vec::new();
                while v & 0x1f != 0 {
                    let rank = (v & 0x1f) as usize - 1;
                    letters.push(Letter::with_sign(rank / 2, rank % 2 == 0));
                    v >>= 5;
                }
                Word::from_letters(letters)
            }
            CompactKey::Spilled(codes) => Word::from_letters(codes.iter().map(|&c| {
                Letter::with_sign(c.unsigned_abs() as usize - 1, c > 0)
            })),
        }
    }
}

/// Breadth-first closure of the identity under all generator moves, with
/// canonical keys as the visited set. Exact metric within the radius.
pub struct Ball {
    radius: usize,
    keys: Vec<CompactKey>,
    index: HashMap<CompactKey, u32>,
    level_start: Vec<usize>,
    preds: Option<Vec<Vec<u32>>>,
}

impl Ball {
    pub fn build<C: GroupContext>(
        ctx: &C,
        radius: usize,
        track_preds: bool,
    ) -> Result<Ball, MetricError> {
        let identity = ctx.identity_elem();
        let k0 = CompactKey::encode(&ctx.canonical_word(&identity)?);
        let mut keys = vec![k0.clone()];
        let mut index = HashMap::new();
        index.insert(k0, 0u32);
        let mut level_start = vec![0usize, 1];
        let mut preds: Option<Vec<Vec<u32>>> = track_preds.then(|| vec![Vec::new()]);

        let mut frontier: Vec<C::Elem> = vec![identity];
        for r in 1..=radius {
            // Elements of the final level are recorded but never expanded,
            // so their decoded forms are not retained.
            let keep_elems = r < radius;
            let mut next: Vec<C::Elem> = Vec::new();
            for (offset, pe) in frontier.iter().enumerate() {
                let parent = level_start[r - 1] + offset;
                for mv in 0..ctx.letter_count() {
                    let l = ctx.letter_by_index(mv);
                    let child = match ctx.mul_letter_elem(pe, l) {
                        Ok(e) => e,
                        Err(_) => {
                            return Err(MetricError::PartialBall {
                                requested: radius,
                                achieved: r - 1,
                            })
                        }
                    };
                    let word = match ctx.canonical_word(&child) {
                        Ok(w) => w,
                        Err(_) => {
                            return Err(MetricError::PartialBall {
                                requested: radius,
                                achieved: r - 1,
                            })
                        }
                    };
                    let key = CompactKey::encode(&word);
                    match index.get(&key) {
                        Some(&i) => {
                            if let Some(p) = preds.as_mut() {
                                if (i as usize) >= level_start[r] {
                                    p[i as usize].push(parent as u32);
                                }
                            }
                        }
                        None => {
                            let i = keys.len() as u32;
                            keys.push(key.clone());
                            index.insert(key, i);
                            if let Some(p) = preds.as_mut() {
                                p.push(vec![parent as u32]);
                            }
                            if keep_elems {
                                next.push(child);
                            }
                        }
                    }
                }
            }
            frontier = next;
            level_start.push(keys.len());
        }
        Ok(Ball { radius, keys, index, level_start, preds })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Number of elements within each radius r = 0..=radius.
    pub fn cumulative_sizes(&self) -> Vec<usize> {
        self.level_start[1..].to_vec()
    }

    pub fn dist_of_index(&self, i: usize) -> usize {
        // The level of entry i is the largest r with level_start[r] <= i.
        self.level_start.partition_point(|&s| s <= i) - 1
    }

    pub fn lookup_word(&self, w: &Word) -> Option<(u32, usize)> {
        let key = CompactKey::encode(w);
        self.index
            .get(&key)
            .map(|&i| (i, self.dist_of_index(i as usize)))
    }

    pub fn word_of_index(&self, i: usize) -> Word {
        self.keys[i].decode()
    }

    pub fn preds_of(&self, i: usize) -> Option<&[u32]> {
        self.preds.as_ref().map(|p| p[i].as_slice())
    }

    /// Entry indices of all vertices lying on some geodesic from the
    /// identity to the given entry (requires predecessor tracking).
    pub fn geodesic_vertices(&self, target: usize) -> Vec<usize> {
        let preds = self.preds.as_ref().expect("ball built without predecessor dag");
        let mut seen = vec![target];
        let mut stack = vec![target];
        while let Some(i) = stack.pop() {
            for &p in &preds[i] {
                let p = p as usize;
                if !seen.contains(&p) {
                    seen.push(p);
                    stack.push(p);
                }
            }
        }
        seen.sort_unstable();
        seen
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DistanceResult {
    Exact(usize),
    ExceedsCap { cap: usize },
}

impl DistanceResult {
    pub fn exact(&self) -> Option<usize> {
        match self {
            DistanceResult::Exact(d) => Some(*d),
            DistanceResult::ExceedsCap { .. } => None,
        }
    }
}

/// Bidirectional breadth-first search meeting in the middle on canonical
/// keys. Exact whenever the distance is at most `2·cap`.
pub fn distance<C: GroupContext>(
    ctx: &C,
    a: &C::Elem,
    b: &C::Elem,
    cap: usize,
) -> Result<DistanceResult, MetricError> {
    let ka = CompactKey::encode(&ctx.canonical_word(a)?);
    let kb = CompactKey::encode(&ctx.canonical_word(b)?);
    if ka == kb {
        return Ok(DistanceResult::Exact(0));
    }
    let mut fwd: HashMap<CompactKey, usize> = HashMap::from([(ka, 0)]);
    let mut bwd: HashMap<CompactKey, usize> = HashMap::from([(kb, 0)]);
    let mut f_frontier = vec![a.clone()];
    let mut b_frontier = vec![b.clone()];
    let mut rf = 0usize;
    let mut rb = 0usize;
    let mut best: Option<usize> = None;

    loop {
        if let Some(d) = best {
            if rf + rb >= d {
                return Ok(DistanceResult::Exact(d));
            }
        }
        let expand_fwd = if rf >= cap {
            false
        } else if rb >= cap {
            true
        } else {
            f_frontier.len() <= b_frontier.len()
        };
        if (rf >= cap && rb >= cap) || (expand_fwd && f_frontier.is_empty()) || (!expand_fwd && b_frontier.is_empty())
        {
            return Ok(match best {
                Some(d) => DistanceResult::Exact(d),
                None => DistanceResult::ExceedsCap { cap },
            });
        }

        let (own, other, frontier, depth) = if expand_fwd {
            (&mut fwd, &bwd, &mut f_frontier, &mut rf)
        } else {
            (&mut bwd, &fwd, &mut b_frontier, &mut rb)
        };
        let mut next = Vec::new();
        for e in frontier.drain(..) {
            for mv in 0..ctx.letter_count() {
                let l = ctx.letter_by_index(mv);
                let child = ctx.mul_letter_elem(&e, l)?;
                let key = CompactKey::encode(&ctx.canonical_word(&child)?);
                if own.contains_key(&key) {
                    continue;
                }
                own.insert(key.clone(), *depth + 1);
                if let Some(&od) = other.get(&key) {
                    let cand = *depth + 1 + od;
                    best = Some(best.map_or(cand, |b| b.min(cand)));
                }
                next.push(child);
            }
        }
        *frontier = next;
        *depth += 1;
    }
}

/// Distances from the identity, backed by a precomputed identity ball: a
/// lookup when the element lies inside, otherwise an outward search that
/// stops at the first level meeting the ball (which yields the exact
/// distance, since every geodesic must cross the ball's sphere).
pub struct BasepointOracle<'a, C: GroupContext> {
    ctx: &'a C,
    ball: &'a Ball,
}

impl<'a, C: GroupContext> BasepointOracle<'a, C> {
    pub fn new(ctx: &'a C, ball: &'a Ball) -> Self {
        BasepointOracle { ctx, ball }
    }

    pub fn ball(&self) -> &Ball {
        self.ball
    }

    pub fn length(&self, e: &C::Elem, side_cap: usize) -> Result<DistanceResult, MetricError> {
        let w = self.ctx.canonical_word(e)?;
        if let Some((_, d)) = self.ball.lookup_word(&w) {
            return Ok(DistanceResult::Exact(d));
        }
        let mut visited: HashMap<CompactKey, ()> = HashMap::new();
        visited.insert(CompactKey::encode(&w), ());
        let mut frontier = vec![e.clone()];
        for k in 1..=side_cap {
            let mut next = Vec::new();
            let mut meet: Option<usize> = None;
            for cur in frontier.drain(..) {
                for mv in 0..self.ctx.letter_count() {
                    let l = self.ctx.letter_by_index(mv);
                    let child = self.ctx.mul_letter_elem(&cur, l)?;
                    let cw = self.ctx.canonical_word(&child)?;
                    let key = CompactKey::encode(&cw);
                    if visited.contains_key(&key) {
                        continue;
                    }
                    visited.insert(key.clone(), ());
                    if let Some(&i) = self.ball.index.get(&key) {
                        let cand = k + self.ball.dist_of_index(i as usize);
                        meet = Some(meet.map_or(cand, |m| m.min(cand)));
                    }
                    next.push(child);
                }
            }
            if let Some(d) = meet {
                return Ok(DistanceResult::Exact(d));
            }
            frontier = next;
        }
        Ok(DistanceResult::ExceedsCap { cap: side_cap })
    }

    /// `d(a, b) = |a⁻¹ b|`.
    pub fn distance(
        &self,
        a: &C::Elem,
        b: &C::Elem,
        side_cap: usize,
    ) -> Result<DistanceResult, MetricError> {
        let g = self.ctx.mul_elem(&self.ctx.inv_elem(a)?, b)?;
        self.length(&g, side_cap)
    }
}

/// Gromov product at the identity, in half-integer units (`twice` holds
/// `2·(g,h)₁`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GromovResult {
    Exact { twice: i64 },
    ExceedsCap { cap: usize },
}

pub fn gromov_product<C: GroupContext>(
    ctx: &C,
    a: &C::Elem,
    b: &C::Elem,
    cap: usize,
) -> Result<GromovResult, MetricError> {
    let id = ctx.identity_elem();
    let la = distance(ctx, &id, a, cap)?;
    let lb = distance(ctx, &id, b, cap)?;
    let dab = distance(ctx, a, b, cap)?;
    match (la.exact(), lb.exact(), dab.exact()) {
        (Some(la), Some(lb), Some(d)) => Ok(GromovResult::Exact {
            twice: la as i64 + lb as i64 - d as i64,
        }),
        _ => Ok(GromovResult::ExceedsCap { cap }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DeltaMode {
    Exhaustive,
    Sampled,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaReport {
    pub radius: usize,
    /// `2·δ̂`: the least slack, in half-units, making every scanned
    /// four-point inequality hold.
    pub delta_hat_twice: i64,
    pub mode: DeltaMode,
    pub quadruples_scanned: usize,
    pub seed: u64,
}

impl DeltaReport {
    /// Least integer δ̂.
    pub fn delta_hat_int(&self) -> i64 {
        (self.delta_hat_twice + 1) / 2
    }

    pub fn delta_hat(&self) -> f64 {
        self.delta_hat_twice as f64 / 2.0
    }
}

/// Four-point estimate over quadruples of ball members: the maximum of
/// `min((x,z)_w, (z,y)_w) − (x,y)_w`, clamped at zero.
pub fn estimate_delta<C: GroupContext>(
    ctx: &C,
    ball: &Ball,
    mode: DeltaMode,
    sample_count: usize,
    seed: u64,
) -> Result<DeltaReport, MetricError> {
    let n = ball.len();
    let cap = ball.radius().max(1);
    let elems: Vec<C::Elem> = (0..n)
        .map(|i| ctx.elem_of_word(&ball.word_of_index(i)))
        .collect::<Result<_, _>>()?;

    let mut worst: i64 = 0;
    let mut scanned = 0usize;

    match mode {
        DeltaMode::Exhaustive => {
            // Pairwise distances first; inside the ball 2·cap always reaches.
            let mut dm = vec![0usize; n * n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = distance(ctx, &elems[i], &elems[j], cap)?
                        .exact()
                        .expect("ball members are within 2·radius");
                    dm[i * n + j] = d;
                    dm[j * n + i] = d;
                }
            }
            let dist = |i: usize, j: usize| dm[i * n + j] as i64;
            let prod = |w: usize, x: usize, y: usize| dist(w, x) + dist(w, y) - dist(x, y);
            for w in 0..n {
                for x in 0..n {
                    for y in 0..n {
                        for z in 0..n {
                            let v = prod(w, x, z).min(prod(w, z, y)) - prod(w, x, y);
                            worst = worst.max(v);
                            scanned += 1;
                        }
                    }
                }
            }
        }
        DeltaMode::Sampled => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..sample_count {
                let pick: Vec<usize> = (0..4).map(|_| rng.gen_range(0..n)).collect();
                let (w, x, y, z) = (pick[0], pick[1], pick[2], pick[3]);
                let d = |i: usize, j: usize| -> Result<i64, MetricError> {
                    Ok(distance(ctx, &elems[i], &elems[j], cap)?
                        .exact()
                        .expect("ball members are within 2·radius") as i64)
                };
                let pxz = d(w, x)? + d(w, z)? - d(x, z)?;
                let pzy = d(w, z)? + d(w, y)? - d(z, y)?;
                let pxy = d(w, x)? + d(w, y)? - d(x, y)?;
                worst = worst.max(pxz.min(pzy) - pxy);
                scanned += 1;
            }
        }
    }
    Ok(DeltaReport {
        radius: ball.radius(),
        delta_hat_twice: worst,
        mode,
        quadruples_scanned: scanned,
        seed,
    })
}

/// ε̂ per radius: over all subgroup members within the radius and all
/// geodesics of the stored dag between them, the largest distance from a
/// geodesic vertex to the subgroup (measured by an outward membership
/// search, which always terminates at one of the endpoints).
pub fn quasiconvexity_profile<C: GroupContext>(
    ctx: &C,
    ball: &Ball,
    mut is_member: impl FnMut(&C::Elem) -> Result<bool, MetricError>,
    max_radius: usize,
) -> Result<Vec<(usize, usize)>, MetricError> {
    let mut members: Vec<(usize, C::Elem)> = Vec::new();
    for i in 0..ball.len() {
        let e = ctx.elem_of_word(&ball.word_of_index(i))?;
        if is_member(&e)? {
            members.push((i, e));
        }
    }
    let max_radius = max_radius.min(ball.radius());
    let mut rows = Vec::new();
    let mut eps = 0usize;
    for r in 1..=max_radius {
        let in_r: Vec<&(usize, C::Elem)> = members
            .iter()
            .filter(|(i, _)| ball.dist_of_index(*i) <= r)
            .collect();
        for a in 0..in_r.len() {
            for b in (a + 1)..in_r.len() {
                let (_, ea) = in_r[a];
                let (_, eb) = in_r[b];
                let g = ctx.mul_elem(&ctx.inv_elem(ea)?, eb)?;
                let gw = ctx.canonical_word(&g)?;
                let Some((gi, _)) = ball.lookup_word(&gw) else {
                    continue; // pair separation exceeds the stored search
                };
                for v in ball.geodesic_vertices(gi as usize) {
                    let u = ctx.elem_of_word(&ball.word_of_index(v))?;
                    let vertex = ctx.mul_elem(ea, &u)?;
                    let d = nearest_member_distance(ctx, &vertex, &mut is_member, 2 * r + 1)?;
                    eps = eps.max(d);
                }
            }
        }
        rows.push((r, eps));
    }
    Ok(rows)
}

fn nearest_member_distance<C: GroupContext>(
    ctx: &C,
    from: &C::Elem,
    is_member: &mut impl FnMut(&C::Elem) -> Result<bool, MetricError>,
    bound: usize,
) -> Result<usize, MetricError> {
    if is_member(from)? {
        return Ok(0);
    }
    let mut visited: HashMap<CompactKey, ()> = HashMap::new();
    visited.insert(CompactKey::encode(&ctx.canonical_word(from)?), ());
    let mut frontier = vec![from.clone()];
    for k in 1..=bound {
        let mut next = Vec::new();
        for cur in frontier.drain(..) {
            for mv in 0..ctx.letter_count() {
                let l = ctx.letter_by_index(mv);
                let child = ctx.mul_letter_elem(&cur, l)?;
                let key = CompactKey::encode(&ctx.canonical_word(&child)?);
                if visited.contains_key(&key) {
                    continue;
                }
                visited.insert(key, ());
                if is_member(&child)? {
                    return Ok(k);
                }
                next.push(child);
            }
        }
        frontier = next;
    }
    // Unreachable for vertices on geodesics between members: the endpoint
    // itself is a member within the bound.
    Ok(bound + 1)
}

/// One row of the distortion table: the witness `t^n·x·t^{-n}` has ambient
/// representative length `2n + |x|`; its base-group length is `|φⁿ(x)|`,
/// exact in free mode and capped in surface mode.
#[derive(Clone, Debug, Serialize)]
pub struct DistortionRow {
    pub n: u32,
    pub ambient_upper: usize,
    pub subgroup_exact: Option<usize>,
    pub capped: bool,
}

pub fn distortion_profile(
    torus: &MappingTorus,
    x: &Word,
    n_max: u32,
    geodesic_cap: usize,
) -> Result<Vec<DistortionRow>, MetricError> {
    torus.base().alphabet().check_word(x)?;
    let mut rows = Vec::with_capacity(n_max as usize + 1);
    let mut image = torus.base().reduce(x);
    for n in 0..=n_max {
        if n > 0 {
            image = torus.base().reduce(
                &torus
                    .automorphism()
                    .apply(crate::torus::Direction::Forward, &image),
            );
        }
        let ambient_upper = 2 * n as usize + x.len();
        match torus.base().geodesic_len(&image, geodesic_cap) {
            Ok(len) => rows.push(DistortionRow {
                n,
                ambient_upper,
                subgroup_exact: Some(len),
                capped: false,
            }),
            Err(_) => rows.push(DistortionRow { n, ambient_upper, subgroup_exact: None, capped: true }),
        }
    }
    Ok(rows)
}

/// Empirically estimated constants, always carrying their caps.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ConstantsReport {
    pub delta_hat: Option<f64>,
    pub delta_radius: Option<usize>,
    pub k_hat: Option<u64>,
    pub d_hat: Option<f64>,
    pub epsilon_profile: Option<Vec<(usize, usize)>>,
    pub distortion_rows: Option<Vec<DistortionRow>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preset::{default_free_amalgam, default_free_torus};
    use crate::words::Alphabet;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn free2() -> FreeGroupCtx {
        FreeGroupCtx::new(Alphabet::new(["a", "b"]).unwrap())
    }

    #[test]
    fn compact_key_round_trip() {
        let a = Alphabet::new(["a", "b", "c", "t", "a1", "b1", "c1", "t1"]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..500 {
            let letters: Vec<Letter> = (0..rng.gen_range(0..30))
                .map(|_| Letter::with_sign(rng.gen_range(0..8), rng.gen_bool(0.5)))
                .collect();
            let w = Word::from_letters(letters);
            assert_eq!(CompactKey::encode(&w).decode(), w);
            let _ = a;
        }
    }

    #[test]
    fn free_rank2_ball_counts() {
        let ctx = free2();
        let ball = Ball::build(&ctx, 3, false).unwrap();
        assert_eq!(ball.cumulative_sizes(), vec![1, 5, 17, 53]);
    }

    #[test]
    fn amalgam_radius1_ball_identifies_edge() {
        // The 16 generator letters of M collapse a = a1 and A = A1, so the
        // radius-1 ball has 1 + 14 elements.
        let ctx = default_free_amalgam();
        let ball = Ball::build(&ctx, 1, false).unwrap();
        assert_eq!(ball.len(), 15);
    }

    #[test]
    fn distance_examples() {
        let ctx = free2();
        let id = ctx.identity_elem();
        let a = ctx.parse_elem("a").unwrap();
        assert_eq!(distance(&ctx, &id, &a, 4).unwrap(), DistanceResult::Exact(1));

        let t = default_free_torus();
        let tctx = TorusCtx::new(&t, 8);
        let id = tctx.identity_elem();
        let e = tctx.parse_elem("taT").unwrap();
        assert_eq!(distance(&tctx, &id, &e, 4).unwrap(), DistanceResult::Exact(1));

        let m = default_free_amalgam();
        let id = m.identity_elem();
        let e = m.parse_elem("aA1").unwrap();
        assert_eq!(distance(&m, &id, &e, 4).unwrap(), DistanceResult::Exact(0));
    }

    #[test]
    fn distance_cap_behaviour() {
        let ctx = free2();
        let id = ctx.identity_elem();
        let far = ctx.parse_elem("ababababab").unwrap(); // length 10
        assert_eq!(
            distance(&ctx, &id, &far, 2).unwrap(),
            DistanceResult::ExceedsCap { cap: 2 }
        );
        assert_eq!(
            distance(&ctx, &id, &far, 5).unwrap(),
            DistanceResult::Exact(10)
        );
    }

    #[test]
    fn distance_is_word_length_in_free_contexts() {
        let ctx = free2();
        let id = ctx.identity_elem();
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for _ in 0..200 {
            let letters: Vec<Letter> = (0..rng.gen_range(0..7))
                .map(|_| Letter::with_sign(rng.gen_range(0..2), rng.gen_bool(0.5)))
                .collect();
            let w = Word::from_letters(letters);
            let d = distance(&ctx, &id, &w, 4).unwrap().exact().unwrap();
            assert_eq!(d, w.len());
        }
    }

    #[test]
    fn gromov_product_examples() {
        let ctx = free2();
        let id = ctx.identity_elem();
        let g = ctx.parse_elem("abab").unwrap();
        // (g, 1)₁ = 0
        assert_eq!(
            gromov_product(&ctx, &g, &id, 6).unwrap(),
            GromovResult::Exact { twice: 0 }
        );
        // (g, g)₁ = |g|
        assert_eq!(
            gromov_product(&ctx, &g, &g, 6).unwrap(),
            GromovResult::Exact { twice: 8 }
        );
        // (a, b)₁ = 0 in the free group
        let a = ctx.parse_elem("a").unwrap();
        let b = ctx.parse_elem("b").unwrap();
        assert_eq!(
            gromov_product(&ctx, &a, &b, 6).unwrap(),
            GromovResult::Exact { twice: 0 }
        );
    }

    #[test]
    fn basepoint_oracle_matches_direct_search() {
        let m = default_free_amalgam();
        let ball = Ball::build(&m, 3, false).unwrap();
        let oracle = BasepointOracle::new(&m, &ball);
        let id = m.identity_elem();
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..60 {
            let letters: Vec<Letter> = (0..rng.gen_range(0..6))
                .map(|_| Letter::with_sign(rng.gen_range(0..8), rng.gen_bool(0.5)))
                .collect();
            let e = m.canon_from_letters(&letters).unwrap();
            let via_oracle = oracle.length(&e, 4).unwrap().exact().unwrap();
            let direct = distance(&m, &id, &e, 5).unwrap().exact().unwrap();
            assert_eq!(via_oracle, direct);
        }
    }

    #[test]
    fn free_group_delta_is_zero() {
        let ctx = free2();
        let ball = Ball::build(&ctx, 3, false).unwrap();
        let report = estimate_delta(&ctx, &ball, DeltaMode::Exhaustive, 0, 0).unwrap();
        assert_eq!(report.delta_hat_twice, 0);
        assert_eq!(report.delta_hat_int(), 0);
    }

    #[test]
    fn rank1_free_delta_is_zero() {
        let ctx = FreeGroupCtx::new(Alphabet::new(["a"]).unwrap());
        let ball = Ball::build(&ctx, 5, false).unwrap();
        let report = estimate_delta(&ctx, &ball, DeltaMode::Exhaustive, 0, 0).unwrap();
        assert_eq!(report.delta_hat_twice, 0);
    }

    #[test]
    fn sampled_delta_is_deterministic_per_seed() {
        let m = default_free_amalgam();
        let ball = Ball::build(&m, 3, false).unwrap();
        let r1 = estimate_delta(&m, &ball, DeltaMode::Sampled, 200, 5).unwrap();
        let r2 = estimate_delta(&m, &ball, DeltaMode::Sampled, 200, 5).unwrap();
        assert_eq!(r1.delta_hat_twice, r2.delta_hat_twice);
    }

    #[test]
    fn axis_subgroup_is_zero_quasiconvex() {
        let ctx = free2();
        let ball = Ball::build(&ctx, 4, true).unwrap();
        let rows = quasiconvexity_profile(
            &ctx,
            &ball,
            |w: &Word| Ok(w.letters().iter().all(|l| l.generator() == 0)),
            4,
        )
        .unwrap();
        assert_eq!(rows, vec![(1, 0), (2, 0), (3, 0), (4, 0)]);
    }

    #[test]
    fn base_in_torus_profile_is_nondecreasing() {
        let t = default_free_torus();
        let ctx = TorusCtx::new(&t, 8);
        let ball = Ball::build(&ctx, 4, true).unwrap();
        let rows = quasiconvexity_profile(&ctx, &ball, |e: &TorusElement| Ok(e.in_base()), 4).unwrap();
        for pair in rows.windows(2) {
            assert!(pair[0].1 <= pair[1].1);
        }
    }

    #[test]
    fn distortion_table_free_mode() {
        let t = default_free_torus();
        let x = t.base().alphabet().parse_word("a").unwrap();
        let rows = distortion_profile(&t, &x, 30, 64).unwrap();
        assert_eq!(rows[0].ambient_upper, 1);
        assert_eq!(rows[0].subgroup_exact, Some(1));
        assert_eq!(rows[3].ambient_upper, 7);
        assert_eq!(rows[3].subgroup_exact, Some(2));
        assert_eq!(rows[30].ambient_upper, 61);
        assert_eq!(rows[30].subgroup_exact, Some(3329));
    }

    #[test]
    fn metric_axioms_on_random_triples() {
        let m = default_free_amalgam();
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for _ in 0..100 {
            let mut elems = Vec::new();
            for _ in 0..3 {
                let letters: Vec<Letter> = (0..rng.gen_range(0..4))
                    .map(|_| Letter::with_sign(rng.gen_range(0..8), rng.gen_bool(0.5)))
                    .collect();
                elems.push(m.canon_from_letters(&letters).unwrap());
            }
            let d = |x: &CanonElem, y: &CanonElem| {
                distance(&m, x, y, 5).unwrap().exact().unwrap() as i64
            };
            let (a, b, c) = (&elems[0], &elems[1], &elems[2]);
            assert_eq!(d(a, b), d(b, a));
            assert_eq!(d(a, a), 0);
            assert!(d(a, c) <= d(a, b) + d(b, c));
        }
    }
}
