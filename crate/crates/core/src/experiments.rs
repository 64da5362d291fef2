//! Reproducible quantitative experiments over the amalgam machinery, with
//! fixed CSV schemas. Given equal parameters, seeds, and caps, every
//! experiment emits byte-identical output.

use serde::Serialize;
use thiserror::Error;

use crate::amalgam::{AmalgamContext, AmalgamError, CanonElem, Factor};
use crate::metric::{
    distortion_profile, estimate_delta, quasiconvexity_profile, Ball, BasepointOracle, DeltaMode,
    DeltaReport, DistortionRow, GroupContext, MetricError, TorusCtx,
};
use crate::torus::MappingTorus;
use crate::words::{Word, WordError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Amalgam(#[from] AmalgamError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("hypothesis violated ({code}): {detail}")]
    HypothesisViolation { code: &'static str, detail: String },
}

fn hypothesis(code: &'static str, detail: String) -> ExperimentError {
    ExperimentError::HypothesisViolation { code, detail }
}

// ---------------------------------------------------------------------------
// y-validation

/// Stable reason codes for rejected `y` words.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum YReason {
    /// Empty word.
    Degenerate,
    /// Not cyclically reduced, so `|yⁿ| ≠ n·|y|`.
    PeriodicGeodesic,
    /// Some power of `y` matches a power of the edge word up to rotation.
    ConjugatePower,
}

impl YReason {
    pub fn code(self) -> &'static str {
        match self {
            YReason::Degenerate => "degenerate",
            YReason::PeriodicGeodesic => "periodic-geodesic",
            YReason::ConjugatePower => "conjugate-power",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct YVerdict {
    pub valid: bool,
    pub reason: Option<YReason>,
    /// Set in surface mode, where the rotation check is only a free-word
    /// heuristic within the window.
    pub partial: bool,
}

/// Checks that `y` is cyclically reduced (hence periodically geodesic in the
/// free base) and that no small power of `y` is conjugate to a power of the
/// edge word. Conjugacy of cyclically reduced free words is rotation
/// equality; the length obstruction `|yᵏ| ≠ |x^m|` prunes the scan.
pub fn validate_y(ctx: &AmalgamContext, y: &Word, window: usize) -> YVerdict {
    let partial = ctx.torus().base().is_surface();
    if y.is_empty() {
        return YVerdict { valid: false, reason: Some(YReason::Degenerate), partial };
    }
    if !y.is_cyclically_reduced() {
        return YVerdict { valid: false, reason: Some(YReason::PeriodicGeodesic), partial };
    }
    let x = &ctx.edge().x_left;
    for k in 1..=window {
        let yk = y.pow(k as i64);
        for m in 1..=window {
            for sign in [1i64, -1] {
                let xm = x.pow(sign * m as i64);
                if yk.len() != xm.len() {
                    continue;
                }
                for off in 0..yk.len() {
                    if yk.rotated(off) == xm {
                        return YVerdict {
                            valid: false,
                            reason: Some(YReason::ConjugatePower),
                            partial,
                        };
                    }
                }
            }
        }
    }
    YVerdict { valid: true, reason: None, partial }
}

// ---------------------------------------------------------------------------
// Claim 1: coset-shortest decompositions of yⁿ

#[derive(Clone, Debug, Serialize)]
pub struct Claim1Row {
    pub n: i64,
    pub m: i64,
    pub c_length: usize,
    pub u_length: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Claim1Report {
    pub rows: Vec<Claim1Row>,
    /// Maximum carried `|x^m|` over the window.
    pub k_hat: u64,
}

pub fn exp_claim1(
    ctx: &AmalgamContext,
    y: &Word,
    n_min: i64,
    n_max: i64,
    y_window: usize,
) -> Result<Claim1Report, ExperimentError> {
    ctx.edge().check_primitive()?;
    let verdict = validate_y(ctx, y, y_window);
    if !verdict.valid {
        let reason = verdict.reason.expect("invalid verdicts carry a reason");
        return Err(hypothesis(reason.code(), format!("y rejected: {:?}", reason)));
    }
    let x = &ctx.edge().x_left;
    let mut rows = Vec::new();
    let mut k_hat = 0u64;
    for n in n_min..=n_max {
        let g = crate::torus::TorusElement::from_base(y.pow(n));
        let dec = ctx.coset_shortest(Factor::Left, &g)?;
        let c_length = x.pow(dec.power).len();
        k_hat = k_hat.max(c_length as u64);
        rows.push(Claim1Row { n, m: dec.power, c_length, u_length: dec.remainder_len });
    }
    Ok(Claim1Report { rows, k_hat })
}

pub fn claim1_csv(report: &Claim1Report) -> String {
    let mut out = String::from("n,m,c_length,u_length\n");
    for r in &report.rows {
        out.push_str(&format!("{},{},{},{}\n", r.n, r.m, r.c_length, r.u_length));
    }
    out
}

// ---------------------------------------------------------------------------
// Claim 2: growth of the rewritten q·yⁿ

#[derive(Clone, Debug, Serialize)]
pub struct Claim2Row {
    pub q: String,
    pub n: u32,
    pub proxy_len: usize,
    pub exact_len: Option<usize>,
    pub capped: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Claim2Slope {
    pub q: String,
    pub num: i64,
    pub den: i64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Claim2Report {
    pub rows: Vec<Claim2Row>,
    /// Least-squares slope of proxy length against n, exact rational per q.
    pub slopes: Vec<Claim2Slope>,
    /// Least D with every exact row satisfying `l ≥ n/D − D`.
    pub d_hat: f64,
}

pub fn exp_claim2(
    ctx: &AmalgamContext,
    oracle: &BasepointOracle<'_, AmalgamContext>,
    q_texts: &[String],
    y: &Word,
    n_max: u32,
    exact_side_cap: usize,
) -> Result<Claim2Report, ExperimentError> {
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for q_text in q_texts {
        let q = ctx.parse(q_text)?;
        // Hypothesis: q lies in C or its normal form ends in the right factor.
        let ends_ok = ctx.as_edge_power(&q).is_some()
            || q.syllables().last().map(|s| s.factor) == Some(Factor::Right);
        if !ends_ok {
            return Err(hypothesis(
                "q-ending",
                format!("q = {:?} neither lies in C nor ends in the right factor", q_text),
            ));
        }
        let mut pts = Vec::new();
        for n in 0..=n_max {
            let yn = ctx.normalize(y.pow(n as i64).letters())?;
            let e = ctx.align(&ctx.mul(&q, &yn)?)?;
            let proxy_len = ctx.canon_word(&e)?.len();
            let (exact_len, capped) = match oracle.length(&e, exact_side_cap)? {
                crate::metric::DistanceResult::Exact(d) => (Some(d), false),
                crate::metric::DistanceResult::ExceedsCap { .. } => (None, true),
            };
            pts.push((n as i64, proxy_len as i64));
            rows.push(Claim2Row { q: q_text.clone(), n, proxy_len, exact_len, capped });
        }
        let (num, den) = least_squares_slope(&pts);
        slopes.push(Claim2Slope { q: q_text.clone(), num, den });
    }
    let d_hat = fit_d_hat(rows.iter().filter_map(|r| r.exact_len.map(|l| (r.n, l))));
    Ok(Claim2Report { rows, slopes, d_hat })
}

/// Exact rational least-squares slope, reduced, denominator positive.
fn least_squares_slope(pts: &[(i64, i64)]) -> (i64, i64) {
    let n = pts.len() as i128;
    let sx: i128 = pts.iter().map(|p| p.0 as i128).sum();
    let sy: i128 = pts.iter().map(|p| p.1 as i128).sum();
    let sxy: i128 = pts.iter().map(|p| p.0 as i128 * p.1 as i128).sum();
    let sxx: i128 = pts.iter().map(|p| p.0 as i128 * p.0 as i128).sum();
    let num = n * sxy - sx * sy;
    let den = n * sxx - sx * sx;
    if den == 0 {
        return (0, 1);
    }
    let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i128;
    let (mut num, mut den) = (num / g, den / g);
    if den < 0 {
        num = -num;
        den = -den;
    }
    (num as i64, den as i64)
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

/// Smallest D > 0 with `l ≥ n/D − D` for all rows: per row the binding value
/// is `(−l + √(l² + 4n)) / 2`.
fn fit_d_hat(rows: impl Iterator<Item = (u32, usize)>) -> f64 {
    let mut d = 0.0f64;
    for (n, l) in rows {
        if n == 0 {
            continue;
        }
        let l = l as f64;
        let n = n as f64;
        d = d.max((-l + (l * l + 4.0 * n).sqrt()) / 2.0);
    }
    d
}

pub fn claim2_csv(report: &Claim2Report) -> String {
    let mut out = String::from("q,n,proxy_len,exact_len,capped\n");
    for r in &report.rows {
        let exact = r.exact_len.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{},{}\n", r.q, r.n, r.proxy_len, exact, r.capped));
    }
    out
}

// ---------------------------------------------------------------------------
// Eq. (2) shadow: Gromov-product escape

#[derive(Clone, Debug, Serialize)]
pub struct EscapeRow {
    pub n: u32,
    /// `2 · max (h, z·yⁿ)₁` over the H-ball, exact rows only.
    pub max_product_twice: Option<i64>,
    pub witness: String,
    pub capped: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EscapeReport {
    pub z: String,
    pub h_radius: usize,
    pub side_cap: usize,
    pub h_members: usize,
    pub rows: Vec<EscapeRow>,
}

/// Enumerates the H-ball by filtering the identity ball through
/// `h_membership`, then maximizes the basepoint Gromov product `(h, z·yⁿ)₁`
/// per n. Rows touching a capped distance are flagged and never guessed.
pub fn exp_gromov_escape(
    ctx: &AmalgamContext,
    oracle: &BasepointOracle<'_, AmalgamContext>,
    z_text: &str,
    y: &Word,
    h_radius: usize,
    n_max: u32,
    side_cap: usize,
    threads: usize,
) -> Result<EscapeReport, ExperimentError> {
    let z = ctx.parse(z_text)?;
    let ball = oracle.ball();
    let mut members: Vec<(usize, CanonElem)> = Vec::new();
    for i in 0..ball.len() {
        if ball.dist_of_index(i) > h_radius {
            break; // discovery order is distance order
        }
        let e = ctx.elem_of_word(&ball.word_of_index(i))?;
        if ctx.canon_h_membership(&e) {
            members.push((i, e));
        }
    }

    let mut rows = Vec::new();
    for n in 0..=n_max {
        let yn = ctx.normalize(y.pow(n as i64).letters())?;
        let zyn = ctx.align(&ctx.mul(&z, &yn)?)?;
        let z_len = oracle.length(&zyn, side_cap)?;
        let Some(z_len) = z_len.exact() else {
            rows.push(EscapeRow {
                n,
                max_product_twice: None,
                witness: String::new(),
                capped: true,
            });
            continue;
        };

        // (h, Z)₁ ≤ min(|h|, |Z|), so the scan can stop at the ceiling.
        let ceiling = 2 * (h_radius as i64).min(z_len as i64);
        let best = scan_members(oracle, &members, &zyn, z_len, side_cap, ceiling, threads)?;
        let (max2, witness_idx, capped) = best;
        let witness = match witness_idx {
            Some(i) => ctx.alphabet().print_word(&ball.word_of_index(i)),
            None => String::new(),
        };
        rows.push(EscapeRow { n, max_product_twice: max2, witness, capped });
    }
    Ok(EscapeReport {
        z: z_text.to_string(),
        h_radius,
        side_cap,
        h_members: members.len(),
        rows,
    })
}

type ScanOutcome = (Option<i64>, Option<usize>, bool);

fn scan_chunk(
    oracle: &BasepointOracle<'_, AmalgamContext>,
    chunk: &[(usize, CanonElem)],
    zyn: &CanonElem,
    z_len: usize,
    side_cap: usize,
    ceiling: i64,
) -> Result<ScanOutcome, ExperimentError> {
    let ball = oracle.ball();
    let mut best: Option<i64> = None;
    let mut witness: Option<usize> = None;
    let mut capped = false;
    for (i, h) in chunk {
        let h_len = ball.dist_of_index(*i);
        match oracle.distance(h, zyn, side_cap)? {
            crate::metric::DistanceResult::Exact(d) => {
                let twice = h_len as i64 + z_len as i64 - d as i64;
                if best.map_or(true, |b| twice > b) {
                    best = Some(twice);
                    witness = Some(*i);
                    if twice >= ceiling {
                        break;
                    }
                }
            }
            crate::metric::DistanceResult::ExceedsCap { .. } => capped = true,
        }
    }
    Ok((best, witness, capped))
}

fn scan_members(
    oracle: &BasepointOracle<'_, AmalgamContext>,
    members: &[(usize, CanonElem)],
    zyn: &CanonElem,
    z_len: usize,
    side_cap: usize,
    ceiling: i64,
    threads: usize,
) -> Result<ScanOutcome, ExperimentError> {
    if threads <= 1 || members.len() < 2 * threads {
        return scan_chunk(oracle, members, zyn, z_len, side_cap, ceiling);
    }
    let chunk_size = members.len().div_ceil(threads);
    let outcomes: Vec<Result<ScanOutcome, ExperimentError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = members
            .chunks(chunk_size)
            .map(|chunk| {
                scope.spawn(move || scan_chunk(oracle, chunk, zyn, z_len, side_cap, ceiling))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("scan thread panicked")).collect()
    });
    // Deterministic merge: maximum product, ties to the earliest member.
    let mut best: Option<i64> = None;
    let mut witness: Option<usize> = None;
    let mut capped = false;
    for outcome in outcomes {
        let (b, w, c) = outcome?;
        capped |= c;
        if let (Some(b), Some(w)) = (b, w) {
            let better = match (best, witness) {
                (None, _) => true,
                (Some(cur), Some(cw)) => b > cur || (b == cur && w < cw),
                (Some(cur), None) => b > cur,
            };
            if better {
                best = Some(b);
                witness = Some(w);
            }
        }
    }
    Ok((best, witness, capped))
}

fn fmt_half(twice: i64) -> String {
    let sign = if twice < 0 { "-" } else { "" };
    let mag = twice.unsigned_abs();
    if mag % 2 == 0 {
        format!("{sign}{}", mag / 2)
    } else {
        format!("{sign}{}.5", mag / 2)
    }
}

pub fn escape_csv(report: &EscapeReport) -> String {
    let mut out = String::from("n,max_product,witness,capped\n");
    for r in &report.rows {
        let p = r.max_product_twice.map(fmt_half).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", r.n, p, r.witness, r.capped));
    }
    out
}

// ---------------------------------------------------------------------------
// Corollary 3(b) shadow: coset growth of H ∩ gHg⁻¹

#[derive(Clone, Debug, Serialize)]
pub struct VnRow {
    pub g: String,
    pub radius: usize,
    pub coset_count: usize,
}

/// Counts distinct cosets of `H ∩ gHg⁻¹` among the H-ball members per
/// radius. Two members share a coset exactly when `h₁h₂⁻¹` and its
/// `g`-conjugate both lie in `H` — both exact decisions.
pub fn exp_vn_index(
    ctx: &AmalgamContext,
    ball: &Ball,
    g_text: &str,
    max_radius: usize,
) -> Result<Vec<VnRow>, ExperimentError> {
    let g = ctx.align(&ctx.parse(g_text)?)?;
    let g_inv = ctx.inv_elem(&g)?;
    let max_radius = max_radius.min(ball.radius());

    let mut reps: Vec<CanonElem> = Vec::new();
    let mut rows = Vec::new();
    let mut idx = 0usize;
    for r in 1..=max_radius {
        while idx < ball.len() && ball.dist_of_index(idx) <= r {
            let h = ctx.elem_of_word(&ball.word_of_index(idx))?;
            idx += 1;
            if !ctx.canon_h_membership(&h) {
                continue;
            }
            let mut found = false;
            for rep in &reps {
                let w = ctx.mul_elem(&h, &ctx.inv_elem(rep)?)?;
                if ctx.canon_h_membership(&w) {
                    let conj = ctx.mul_elem(&ctx.mul_elem(&g_inv, &w)?, &g)?;
                    if ctx.canon_h_membership(&conj) {
                        found = true;
                        break;
                    }
                }
            }
            if !found {
                reps.push(h);
            }
        }
        rows.push(VnRow { g: g_text.to_string(), radius: r, coset_count: reps.len() });
    }
    Ok(rows)
}

pub fn vn_csv(rows: &[VnRow]) -> String {
    let mut out = String::from("g,radius,coset_count\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.g, r.radius, r.coset_count));
    }
    out
}

// ---------------------------------------------------------------------------
// Distortion, delta, quasiconvexity wrappers with CSV schemas

pub fn exp_distortion(
    torus: &MappingTorus,
    x: &Word,
    n_max: u32,
    geodesic_cap: usize,
) -> Result<Vec<DistortionRow>, ExperimentError> {
    Ok(distortion_profile(torus, x, n_max, geodesic_cap)?)
}

pub fn distortion_csv(rows: &[DistortionRow]) -> String {
    let mut out = String::from("n,ambient_upper,subgroup_exact,ratio\n");
    for r in rows {
        match r.subgroup_exact {
            Some(s) => {
                let ratio = s as f64 / r.ambient_upper as f64;
                out.push_str(&format!("{},{},{},{:.6}\n", r.n, r.ambient_upper, s, ratio));
            }
            None => out.push_str(&format!("{},{},,\n", r.n, r.ambient_upper)),
        }
    }
    out
}

pub fn exp_delta<C: GroupContext>(
    ctx: &C,
    max_radius: usize,
    mode: DeltaMode,
    sample_count: usize,
    seed: u64,
) -> Result<Vec<DeltaReport>, ExperimentError> {
    let mut reports = Vec::new();
    for r in 1..=max_radius {
        let ball = Ball::build(ctx, r, false)?;
        reports.push(estimate_delta(ctx, &ball, mode, sample_count, seed)?);
    }
    Ok(reports)
}

pub fn delta_csv(reports: &[DeltaReport]) -> String {
    let mut out = String::from("radius,delta_hat,mode\n");
    for r in reports {
        let mode = match r.mode {
            DeltaMode::Exhaustive => "exhaustive",
            DeltaMode::Sampled => "sampled",
        };
        out.push_str(&format!("{},{},{}\n", r.radius, fmt_half(r.delta_hat_twice), mode));
    }
    out
}

/// Which subgroup a quasiconvexity run profiles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SubgroupChoice {
    /// `C = ⟨x⟩` inside the amalgam.
    EdgeInAmalgam,
    /// `H = sgp(F, F₁)` inside the amalgam.
    HInAmalgam,
    /// The base group `F` inside one mapping torus.
    BaseInTorus,
}

pub fn exp_quasiconvexity(
    amalgam: &AmalgamContext,
    choice: SubgroupChoice,
    radius: usize,
) -> Result<Vec<(usize, usize)>, ExperimentError> {
    match choice {
        SubgroupChoice::EdgeInAmalgam => {
            let ball = Ball::build(amalgam, radius, true)?;
            Ok(quasiconvexity_profile(
                amalgam,
                &ball,
                |e: &CanonElem| Ok(amalgam.canon_edge_power(e).is_some()),
                radius,
            )?)
        }
        SubgroupChoice::HInAmalgam => {
            let ball = Ball::build(amalgam, radius, true)?;
            Ok(quasiconvexity_profile(
                amalgam,
                &ball,
                |e: &CanonElem| Ok(amalgam.canon_h_membership(e)),
                radius,
            )?)
        }
        SubgroupChoice::BaseInTorus => {
            let cap = amalgam.caps().geodesic_cap.max(2 * radius);
            let tctx = TorusCtx::new(amalgam.torus(), cap);
            let ball = Ball::build(&tctx, radius, true)?;
            Ok(quasiconvexity_profile(
                &tctx,
                &ball,
                |e: &crate::torus::TorusElement| Ok(e.in_base()),
                radius,
            )?)
        }
    }
}

pub fn quasiconvexity_csv(rows: &[(usize, usize)]) -> String {
    let mut out = String::from("radius,epsilon_hat\n");
    for (r, eps) in rows {
        out.push_str(&format!("{},{}\n", r, eps));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preset::{default_free_amalgam, default_free_torus, DEFAULT_Y};

    fn ctx() -> AmalgamContext {
        default_free_amalgam()
    }

    fn y_word(c: &AmalgamContext) -> Word {
        c.torus().base().alphabet().parse_word(DEFAULT_Y).unwrap()
    }

    #[test]
    fn validate_y_examples() {
        let c = ctx();
        let alpha = c.torus().base().alphabet();
        assert!(validate_y(&c, &alpha.parse_word("ab").unwrap(), 12).valid);

        let v = validate_y(&c, &alpha.parse_word("aa").unwrap(), 12);
        assert_eq!(v.reason, Some(YReason::ConjugatePower));

        let v = validate_y(&c, &alpha.parse_word("a").unwrap(), 12);
        assert_eq!(v.reason, Some(YReason::ConjugatePower));

        let v = validate_y(&c, &alpha.parse_word("abA").unwrap(), 12);
        assert_eq!(v.reason, Some(YReason::PeriodicGeodesic));

        let v = validate_y(&c, &Word::empty(), 12);
        assert_eq!(v.reason, Some(YReason::Degenerate));
    }

    #[test]
    fn claim1_default_window() {
        let c = ctx();
        let report = exp_claim1(&c, &y_word(&c), -20, 20, 12).unwrap();
        assert_eq!(report.k_hat, 1);
        for row in &report.rows {
            if row.n > 0 {
                assert_eq!(row.m, 1, "positive n strips one leading a");
                assert_eq!(row.u_length, (2 * row.n - 1) as usize);
            } else if row.n < 0 {
                assert_eq!(row.m, 0, "negative powers admit no cancellation");
                assert_eq!(row.u_length, (2 * -row.n) as usize);
            } else {
                assert_eq!((row.m, row.u_length), (0, 0));
            }
        }
    }

    #[test]
    fn claim1_rejects_bad_y() {
        let c = ctx();
        let alpha = c.torus().base().alphabet();
        let err = exp_claim1(&c, &alpha.parse_word("a").unwrap(), -3, 3, 12).unwrap_err();
        match err {
            ExperimentError::HypothesisViolation { code, .. } => {
                assert_eq!(code, "conjugate-power")
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn claim2_identity_slope_is_two() {
        let c = ctx();
        let ball = Ball::build(&c, 3, false).unwrap();
        let oracle = BasepointOracle::new(&c, &ball);
        let report =
            exp_claim2(&c, &oracle, &["".to_string()], &y_word(&c), 6, 4).unwrap();
        assert_eq!(report.slopes.len(), 1);
        assert_eq!((report.slopes[0].num, report.slopes[0].den), (2, 1));
        for r in &report.rows {
            assert_eq!(r.proxy_len, 2 * r.n as usize);
        }
    }

    #[test]
    fn claim2_rejects_left_ending_q() {
        let c = ctx();
        let ball = Ball::build(&c, 2, false).unwrap();
        let oracle = BasepointOracle::new(&c, &ball);
        let err = exp_claim2(&c, &oracle, &["b".to_string()], &y_word(&c), 3, 2).unwrap_err();
        assert!(matches!(err, ExperimentError::HypothesisViolation { code: "q-ending", .. }));
    }

    #[test]
    fn vn_identity_and_edge_give_one_coset() {
        let c = ctx();
        let ball = Ball::build(&c, 3, false).unwrap();
        for g in ["", "a", "aaa"] {
            let rows = exp_vn_index(&c, &ball, g, 3).unwrap();
            assert!(rows.iter().all(|r| r.coset_count == 1), "g = {g:?}: {rows:?}");
        }
    }

    #[test]
    fn vn_counts_nondecreasing() {
        let c = ctx();
        let ball = Ball::build(&c, 3, false).unwrap();
        for g in ["t", "t1", "bt"] {
            let rows = exp_vn_index(&c, &ball, g, 3).unwrap();
            for pair in rows.windows(2) {
                assert!(pair[0].coset_count <= pair[1].coset_count);
            }
        }
    }

    #[test]
    fn escape_products_bounded_by_h_radius() {
        let c = ctx();
        let ball = Ball::build(&c, 4, false).unwrap();
        let oracle = BasepointOracle::new(&c, &ball);
        let report =
            exp_gromov_escape(&c, &oracle, "a", &y_word(&c), 2, 2, 4, 1).unwrap();
        for r in &report.rows {
            let p = r.max_product_twice.unwrap();
            assert!(p <= 2 * 2, "product exceeds min(|h|) bound");
            assert!(!r.capped);
        }
    }

    #[test]
    fn escape_identity_z_hits_witness_bound() {
        // For z = 1 the witness h = yⁿ gives (h,h)₁ = |yⁿ| while it fits.
        let c = ctx();
        let ball = Ball::build(&c, 4, false).unwrap();
        let oracle = BasepointOracle::new(&c, &ball);
        let report =
            exp_gromov_escape(&c, &oracle, "", &y_word(&c), 4, 2, 4, 1).unwrap();
        assert_eq!(report.rows[1].max_product_twice, Some(4)); // (ab, ab)₁ = 2
        assert_eq!(report.rows[2].max_product_twice, Some(8)); // (abab, abab)₁ = 4
    }

    #[test]
    fn escape_threaded_matches_serial() {
        let c = ctx();
        let ball = Ball::build(&c, 3, false).unwrap();
        let oracle = BasepointOracle::new(&c, &ball);
        let serial = exp_gromov_escape(&c, &oracle, "t1", &y_word(&c), 3, 2, 4, 1).unwrap();
        let threaded = exp_gromov_escape(&c, &oracle, "t1", &y_word(&c), 3, 2, 4, 4).unwrap();
        for (a, b) in serial.rows.iter().zip(&threaded.rows) {
            assert_eq!(a.max_product_twice, b.max_product_twice);
            assert_eq!(a.witness, b.witness);
        }
    }

    #[test]
    fn csv_emission_is_deterministic() {
        let c = ctx();
        let report1 = exp_claim1(&c, &y_word(&c), -5, 5, 12).unwrap();
        let report2 = exp_claim1(&c, &y_word(&c), -5, 5, 12).unwrap();
        assert_eq!(claim1_csv(&report1), claim1_csv(&report2));
        assert!(claim1_csv(&report1).starts_with("n,m,c_length,u_length\n"));
    }

    #[test]
    fn distortion_csv_has_target_row() {
        let t = default_free_torus();
        let x = t.base().alphabet().parse_word("a").unwrap();
        let rows = exp_distortion(&t, &x, 30, 64).unwrap();
        let csv = distortion_csv(&rows);
        assert!(csv.contains("30,61,3329,"));
    }

    #[test]
    fn half_formatting() {
        assert_eq!(fmt_half(0), "0");
        assert_eq!(fmt_half(4), "2");
        assert_eq!(fmt_half(5), "2.5");
        assert_eq!(fmt_half(-3), "-1.5");
    }
}
