//! The relaxation layer: a registered projection map onto the constrained
//! family, the KL-penalized score objective, the two-parameter penalized CGF,
//! conditional log-ratio decompositions, and the Hölder-inequality quantities
//! that bound the penalized CGF by scaled score CGFs.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dist::{
    conditional_mutual_information, kl_divergence, moments, tilt, AlphabetProduct,
    ConditionalTable, JointDist,
};
use crate::error::{Error, Result};
use crate::score::{check_window, ScoreSpec};
use crate::tol;

/// Sign of the KL penalty attached to the expected score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    /// Subtract the penalty: objective for maximization.
    Plus,
    /// Add the penalty: objective for minimization.
    Minus,
}

/// Composition map for decoder-side-information problems: rebuilds the joint
/// as `q(u|x) · p(x,y) · q(z|u,y)`, which lands in the constrained family.
#[derive(Debug, Clone)]
pub struct WzComposeMap {
    pub u: usize,
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub p_xy: JointDist,
}

impl WzComposeMap {
    fn apply(&self, q: &JointDist) -> Result<JointDist> {
        let space = q.space();
        let sizes = space.sizes();
        let (u, x, y, z) = (self.u, self.x, self.y, self.z);
        let pxy_sizes = self.p_xy.space().sizes();
        if pxy_sizes != [sizes[x], sizes[y]] {
            return Err(Error::MapFactor {
                factor: "p_xy".into(),
                detail: "reference marginal sizes do not match the space".into(),
            });
        }
        let cond_u_x = q.conditional(&[u], &[x])?;
        let mut uy = vec![u, y];
        AlphabetProduct::canonicalize(&mut uy)?;
        let cond_z_uy = q.conditional(&[z], &uy)?;
        let u_size = sizes[u] as f64;
        let z_size = sizes[z] as f64;

        let mut mass = vec![0.0f64; space.total()];
        for (cell, slot) in mass.iter_mut().enumerate() {
            let coords = space.coords(cell);
            let (iu, ix, iy, iz) = (coords[u], coords[x], coords[y], coords[z]);
            // Undefined conditional rows are completed uniformly; they only
            // ever multiply zero weight or make the support predicate fail.
            let w1 = match cond_u_x.row(ix) {
                Some(row) => row[iu],
                None => 1.0 / u_size,
            };
            let pxy = self.p_xy.prob(ix * sizes[y] + iy);
            let prefix = w1 * pxy;
            if prefix == 0.0 {
                continue;
            }
            let given = if uy[0] == u { iu * sizes[y] + iy } else { iy * sizes[u] + iu };
            let w2 = match cond_z_uy.row(given) {
                Some(row) => row[iz],
                None => 1.0 / z_size,
            };
            *slot = prefix * w2;
        }
        JointDist::new(space.clone(), mass).map_err(|e| Error::MapFactor {
            factor: "compose".into(),
            detail: e.to_string(),
        })
    }
}

/// A registered, serializable construction of the map onto the constrained
/// family, with `map(q) = q` on that family.
#[derive(Debug, Clone)]
pub enum ProjectionMap {
    Identity,
    WzCompose(WzComposeMap),
}

impl ProjectionMap {
    pub fn apply(&self, q: &JointDist) -> Result<JointDist> {
        match self {
            ProjectionMap::Identity => Ok(q.clone()),
            ProjectionMap::WzCompose(m) => m.apply(q),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProjectionMap::Identity => "identity",
            ProjectionMap::WzCompose(_) => "wz-compose",
        }
    }
}

/// One conditional log-ratio term `coeff · ln[p(target|given) / q(target|given)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioTerm {
    pub coeff: f64,
    pub given: Vec<usize>,
    pub target: Vec<usize>,
}

/// The projection map plus the conditional log-ratio decomposition of the
/// score difference `score_q − score_{map(q)}`: added terms carry the
/// `kappa` coefficients, subtracted terms the `nu` coefficients.
#[derive(Debug, Clone)]
pub struct RelaxationSpec {
    space: AlphabetProduct,
    pub map: ProjectionMap,
    kappa_terms: Vec<RatioTerm>,
    nu_terms: Vec<RatioTerm>,
}

impl RelaxationSpec {
    pub fn new(
        space: AlphabetProduct,
        map: ProjectionMap,
        kappa_terms: Vec<RatioTerm>,
        nu_terms: Vec<RatioTerm>,
    ) -> Result<Self> {
        for t in kappa_terms.iter().chain(&nu_terms) {
            if !(t.coeff > 0.0) || !t.coeff.is_finite() {
                return Err(Error::BadSpec("ratio-term coefficients must be positive".into()));
            }
            for &v in &t.target {
                if t.given.binary_search(&v).is_ok() {
                    return Err(Error::OverlappingSubsets(v));
                }
            }
            // Validate subsets against the space.
            space.subspace(&t.given)?;
            space.subspace(&t.target)?;
        }
        Ok(Self { space, map, kappa_terms, nu_terms })
    }

    pub fn space(&self) -> &AlphabetProduct {
        &self.space
    }

    pub fn kappa_terms(&self) -> &[RatioTerm] {
        &self.kappa_terms
    }

    pub fn nu_terms(&self) -> &[RatioTerm] {
        &self.nu_terms
    }

    pub fn kappa_sum(&self) -> f64 {
        self.kappa_terms.iter().map(|t| t.coeff).sum()
    }

    pub fn nu_sum(&self) -> f64 {
        self.nu_terms.iter().map(|t| t.coeff).sum()
    }
}

/// Apply the projection map of a relaxation spec.
pub fn apply_map(relax: &RelaxationSpec, q: &JointDist) -> Result<JointDist> {
    relax.map.apply(q)
}

struct TermLookup {
    proj_given: Vec<usize>,
    proj_target: Vec<usize>,
    p_cond: ConditionalTable,
    q_cond: ConditionalTable,
}

fn term_lookup(space: &AlphabetProduct, t: &RatioTerm, p: &JointDist, q: &JointDist) -> Result<TermLookup> {
    Ok(TermLookup {
        proj_given: space.projection_table(&t.given)?,
        proj_target: space.projection_table(&t.target)?,
        p_cond: p.conditional(&t.target, &t.given)?,
        q_cond: q.conditional(&t.target, &t.given)?,
    })
}

fn log_ratio_at(lk: &TermLookup, cell: usize, what: &str) -> Result<f64> {
    let g = lk.proj_given[cell];
    let t = lk.proj_target[cell];
    let p = lk
        .p_cond
        .prob(g, t)
        .ok_or_else(|| Error::Structural(format!("{what}: projected conditional row undefined inside the support")))?;
    let q = lk
        .q_cond
        .prob(g, t)
        .ok_or_else(|| Error::Structural(format!("{what}: conditional row undefined inside the support")))?;
    if !(p > 0.0) || !(q > 0.0) {
        return Err(Error::Structural(format!(
            "{what}: zero conditional probability inside the support"
        )));
    }
    Ok((p / q).ln())
}

/// Verify the conditional log-ratio decomposition of the score difference
/// on the support of `q`, returning the maximum absolute residual.
pub fn verify_decomposition(
    relax: &RelaxationSpec,
    score: &ScoreSpec,
    q: &JointDist,
) -> Result<f64> {
    let p = apply_map(relax, q)?;
    let sq = score.score_table(q)?;
    let sp = score.score_table(&p)?;
    let space = q.space();
    let kappa: Vec<TermLookup> = relax
        .kappa_terms
        .iter()
        .map(|t| term_lookup(space, t, &p, q))
        .collect::<Result<_>>()?;
    let nu: Vec<TermLookup> = relax
        .nu_terms
        .iter()
        .map(|t| term_lookup(space, t, &p, q))
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for (cell, &m) in q.mass().iter().enumerate() {
        if m <= 0.0 {
            continue;
        }
        if !sp[cell].is_finite() {
            return Err(Error::Structural(
                "mapped score is not finite inside the support".into(),
            ));
        }
        let lhs = sq[cell] - sp[cell];
        let mut rhs = 0.0f64;
        for (lk, t) in kappa.iter().zip(&relax.kappa_terms) {
            rhs += t.coeff * log_ratio_at(lk, cell, "kappa term")?;
        }
        for (lk, t) in nu.iter().zip(&relax.nu_terms) {
            rhs -= t.coeff * log_ratio_at(lk, cell, "nu term")?;
        }
        let r = (lhs - rhs).abs();
        if r > worst {
            worst = r;
        }
    }
    Ok(worst)
}

/// KL-penalized expected score.
///
/// `Plus` returns `E_q[score_q] − α·D(q‖map(q))` (drives maximization);
/// `Minus` returns `E_q[score_q] + α·D(q‖map(q))` (drives minimization).
/// An infinite penalty propagates as a `∓inf` sentinel, not an error.
pub fn penalized_score(
    relax: &RelaxationSpec,
    score: &ScoreSpec,
    q: &JointDist,
    alpha: f64,
    sign: Sign,
) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::Domain(format!("penalty weight {alpha} must be nonnegative")));
    }
    let base = score.expected_score(q)?;
    if alpha == 0.0 {
        return Ok(base);
    }
    let p = apply_map(relax, q)?;
    let d = kl_divergence(q, &p)?;
    Ok(match sign {
        Sign::Plus => {
            if d.is_infinite() {
                f64::NEG_INFINITY
            } else {
                base - alpha * d
            }
        }
        Sign::Minus => {
            if d.is_infinite() {
                f64::INFINITY
            } else {
                base + alpha * d
            }
        }
    })
}

/// Penalized per-outcome weight `score_q(x) − a·ln[q(x)/p(x)]` with
/// `p = map(q)` and `a` the signed penalty. Off the support of `p` the weight
/// is the sentinel that zeroes its CGF contribution.
pub fn penalized_weight_table(
    relax: &RelaxationSpec,
    score: &ScoreSpec,
    q: &JointDist,
    alpha_signed: f64,
) -> Result<Vec<f64>> {
    let p = apply_map(relax, q)?;
    let sq = score.score_table(q)?;
    let mut out = vec![0.0f64; q.space().total()];
    for (cell, slot) in out.iter_mut().enumerate() {
        let qm = q.prob(cell);
        if qm <= 0.0 {
            continue;
        }
        let pm = p.prob(cell);
        *slot = if pm > 0.0 {
            sq[cell] - alpha_signed * (qm / pm).ln()
        } else if alpha_signed > 0.0 {
            f64::NEG_INFINITY
        } else if alpha_signed < 0.0 {
            f64::INFINITY
        } else {
            sq[cell]
        };
    }
    Ok(out)
}

/// Admissible tilt window for the penalized CGF at signed penalty `a`.
///
/// The positive side joins the existence window `[0, 1/(a+Ση)]` with the
/// Hölder window `[0, 1/(a+Σκ)]`, and symmetrically on the negative side,
/// so every inequality stated on either window is checkable.
pub fn penalized_cgf_window(
    relax: &RelaxationSpec,
    score: &ScoreSpec,
    alpha_signed: f64,
) -> (f64, f64) {
    if alpha_signed > 0.0 {
        (0.0, 1.0 / (alpha_signed + score.eta_sum().min(relax.kappa_sum())))
    } else if alpha_signed < 0.0 {
        let a = -alpha_signed;
        (-1.0 / (a + score.mu_sum().min(relax.nu_sum())), 0.0)
    } else {
        score.cgf_window()
    }
}

/// Window on which the penalized CGF is three times differentiable.
pub fn penalized_cgf_derivative_window(
    relax: &RelaxationSpec,
    score: &ScoreSpec,
    alpha_signed: f64,
) -> (f64, f64) {
    let _ = relax;
    if alpha_signed > 0.0 {
        (0.0, 0.5 / (alpha_signed + score.eta_sum()))
    } else if alpha_signed < 0.0 {
        (-0.5 / (-alpha_signed + score.mu_sum()), 0.0)
    } else {
        score.cgf_derivative_window()
    }
}

/// CGF of the penalized weight: `ln E_q[exp{θ(score_q − a·ln(q/p))}]`.
pub fn penalized_cgf(
    relax: &RelaxationSpec,
    score: &ScoreSpec,
    q: &JointDist,
    theta: f64,
    alpha_signed: f64,
) -> Result<f64> {
    check_window(theta, penalized_cgf_window(relax, score, alpha_signed), "penalized cgf scale")?;
    if theta == 0.0 {
        return Ok(0.0);
    }
    let w = penalized_weight_table(relax, score, q, alpha_signed)?;
    log_sum_exp_over_support(q, &w, theta)
}

/// First three derivatives of the penalized CGF in the tilt parameter.
pub fn penalized_cgf_derivatives(
    relax: &RelaxationSpec,
    score: &ScoreSpec,
    q: &JointDist,
    theta: f64,
    alpha_signed: f64,
) -> Result<(f64, f64, f64)> {
    check_window(
        theta,
        penalized_cgf_derivative_window(relax, score, alpha_signed),
        "penalized cgf derivative scale",
    )?;
    let w = penalized_weight_table(relax, score, q, alpha_signed)?;
    let tilted = tilt(q, &w, theta)?;
    let m = moments(&tilted, &w, 3)?;
    Ok((m.mean, m.variance.unwrap(), m.third_central.unwrap()))
}

fn log_sum_exp_over_support(q: &JointDist, w: &[f64], theta: f64) -> Result<f64> {
    let mut shift = f64::NEG_INFINITY;
    for (&m, &v) in q.mass().iter().zip(w) {
        if m > 0.0 {
            let a = theta * v;
            if a == f64::INFINITY || a.is_nan() {
                return Err(Error::Numeric("penalized weight diverges on the support".into()));
            }
            if a > shift {
                shift = a;
            }
        }
    }
    if shift == f64::NEG_INFINITY {
        return Err(Error::Numeric("all penalized weights vanish on the support".into()));
    }
    let mut acc = 0.0f64;
    for (&m, &v) in q.mass().iter().zip(w) {
        if m > 0.0 {
            let a = theta * v;
            if a > f64::NEG_INFINITY {
                acc += m * (a - shift).exp();
            }
        }
    }
    Ok(shift + acc.ln())
}

/// Hölder factor lists for the conditional ratio terms, each `≤ 1` in its
/// regime. The positive-θ regime fills `kappa_factors`, the negative-θ regime
/// fills `nu_factors`; the other list is empty.
#[derive(Debug, Clone, Default)]
pub struct HolderFactors {
    pub kappa_factors: Vec<f64>,
    pub nu_factors: Vec<f64>,
}

/// Compute the Hölder factors at `(θ, α)` with `p = map(q)`.
///
/// Regimes: `0 < θ ≤ 1/(α+Σκ)` for the kappa side, `−1/(α+Σν) ≤ θ < 0` for
/// the nu side; anything else is a domain error.
pub fn holder_factors(
    relax: &RelaxationSpec,
    q: &JointDist,
    theta: f64,
    alpha: f64,
) -> Result<HolderFactors> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("penalty weight {alpha} must be positive")));
    }
    const EDGE: f64 = 1e-12;
    let p = apply_map(relax, q)?;
    let space = q.space();
    let mut out = HolderFactors::default();
    if theta > 0.0 && theta <= 1.0 / (alpha + relax.kappa_sum()) + EDGE {
        let exponent = theta * relax.kappa_sum() / (1.0 - theta * alpha);
        for t in &relax.kappa_terms {
            let lk = term_lookup(space, t, &p, q)?;
            out.kappa_factors.push(ratio_power_expectation(q, &lk, exponent, "kappa factor")?);
        }
    } else if theta < 0.0 && theta >= -1.0 / (alpha + relax.nu_sum()) - EDGE {
        let exponent = -theta * relax.nu_sum() / (1.0 + theta * alpha);
        for t in &relax.nu_terms {
            let lk = term_lookup(space, t, &p, q)?;
            out.nu_factors.push(ratio_power_expectation(q, &lk, exponent, "nu factor")?);
        }
    } else {
        return Err(Error::Domain(format!(
            "tilt scale {theta} is in neither Hölder regime at penalty {alpha}"
        )));
    }
    Ok(out)
}

fn ratio_power_expectation(q: &JointDist, lk: &TermLookup, exponent: f64, what: &str) -> Result<f64> {
    let mut acc = 0.0f64;
    for (cell, &m) in q.mass().iter().enumerate() {
        if m <= 0.0 {
            continue;
        }
        let g = lk.proj_given[cell];
        let t = lk.proj_target[cell];
        let pc = lk
            .p_cond
            .prob(g, t)
            .ok_or_else(|| Error::Structural(format!("{what}: projected row undefined inside the support")))?;
        let qc = lk
            .q_cond
            .prob(g, t)
            .ok_or_else(|| Error::Structural(format!("{what}: row undefined inside the support")))?;
        if !(qc > 0.0) {
            return Err(Error::Structural(format!("{what}: zero denominator inside the support")));
        }
        let ratio = pc / qc;
        acc += m * if exponent == 0.0 { 1.0 } else { ratio.powf(exponent) };
    }
    Ok(acc)
}

/// The pair of ratio-corrected CGFs at `±1/α` under `p = map(q)`.
///
/// Each is bounded by a scaled score CGF of `p`:
/// the `plus` side by `(1 − Σν/α)·cgf(p, 1/(α−Σν))` for `α > Σν`, and the
/// `minus` side by `(1 − Σκ/α)·cgf(p, −1/(α−Σκ))` for `α > Σκ`.
#[derive(Debug, Clone, Copy)]
pub struct CorrectedCgfPair {
    pub plus: f64,
    pub minus: f64,
}

pub fn corrected_cgf_pair(
    relax: &RelaxationSpec,
    score: &ScoreSpec,
    q: &JointDist,
    alpha: f64,
) -> Result<CorrectedCgfPair> {
    if !(alpha > relax.nu_sum()) {
        return Err(Error::Domain(format!(
            "penalty {alpha} must exceed the nu coefficient sum {}",
            relax.nu_sum()
        )));
    }
    if !(alpha > relax.kappa_sum()) {
        return Err(Error::Domain(format!(
            "penalty {alpha} must exceed the kappa coefficient sum {}",
            relax.kappa_sum()
        )));
    }
    let p = apply_map(relax, q)?;
    let sp = score.score_table(&p)?;
    let space = q.space();
    let nu: Vec<(TermLookup, f64)> = relax
        .nu_terms
        .iter()
        .map(|t| Ok((term_lookup(space, t, &p, q)?, t.coeff)))
        .collect::<Result<_>>()?;
    let kappa: Vec<(TermLookup, f64)> = relax
        .kappa_terms
        .iter()
        .map(|t| Ok((term_lookup(space, t, &p, q)?, t.coeff)))
        .collect::<Result<_>>()?;

    let side = |sign: f64, terms: &[(TermLookup, f64)]| -> Result<f64> {
        // ln E_p[ exp{sign·score_p/α} · Π (q_cond/p_cond)^{coeff/α} ].
        let mut vals = Vec::with_capacity(space.total());
        for (cell, &m) in p.mass().iter().enumerate() {
            if m <= 0.0 {
                continue;
            }
            let mut t = m.ln() + sign * sp[cell] / alpha;
            for (lk, coeff) in terms {
                let g = lk.proj_given[cell];
                let tt = lk.proj_target[cell];
                let pc = lk.p_cond.prob(g, tt).ok_or_else(|| {
                    Error::Structural("corrected cgf: projected row undefined on its own support".into())
                })?;
                let qc = lk.q_cond.prob(g, tt).unwrap_or(0.0);
                t += (coeff / alpha) * if qc > 0.0 { (qc / pc).ln() } else { f64::NEG_INFINITY };
            }
            vals.push(t);
        }
        let shift = vals.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
        if shift == f64::NEG_INFINITY {
            return Err(Error::Numeric("corrected cgf has no finite terms".into()));
        }
        let acc: f64 = vals
            .iter()
            .filter(|v| **v > f64::NEG_INFINITY)
            .map(|v| (v - shift).exp())
            .sum();
        Ok(shift + acc.ln())
    };

    Ok(CorrectedCgfPair { plus: side(1.0, &nu)?, minus: side(-1.0, &kappa)? })
}

/// Which family a feasible set describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeasibleKind {
    /// The constrained family the map projects onto.
    Constrained,
    /// The relaxed family the penalized problems range over.
    Relaxed,
}

/// A named, testable membership constraint with a residual magnitude.
#[derive(Debug, Clone)]
pub enum Constraint {
    /// The marginal over `vars` equals `target` within `tol` (sup norm).
    MarginalEquals { vars: Vec<usize>, target: JointDist, tol: f64 },
    /// Markov chain `a ↔ b ↔ c`: conditional mutual information
    /// `I(a; c | b) ≤ tol`.
    MarkovChain { a: Vec<usize>, b: Vec<usize>, c: Vec<usize>, tol: f64 },
    /// The support of `q` includes the support of `map(q)`.
    SupportIncludesMapped { map: ProjectionMap },
    /// Structural cap on one variable's alphabet size.
    CardinalityCap { var: usize, max: usize },
}

impl Constraint {
    pub fn name(&self) -> String {
        match self {
            Constraint::MarginalEquals { vars, .. } => format!("fixed-marginal{vars:?}"),
            Constraint::MarkovChain { a, b, c, .. } => format!("markov{a:?}-{b:?}-{c:?}"),
            Constraint::SupportIncludesMapped { .. } => "support-includes-mapped".into(),
            Constraint::CardinalityCap { var, max } => format!("cardinality-cap(#{var}<={max})"),
        }
    }

    /// Evaluate on a distribution: residual magnitude plus pass/fail.
    pub fn check(&self, q: &JointDist) -> Result<ConstraintReport> {
        let (residual, pass) = match self {
            Constraint::MarginalEquals { vars, target, tol } => {
                let m = q.marginal(vars)?;
                if m.space() != target.space() {
                    return Err(Error::ShapeMismatch);
                }
                let r = m
                    .mass()
                    .iter()
                    .zip(target.mass())
                    .map(|(&a, &b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                (r, r <= *tol)
            }
            Constraint::MarkovChain { a, b, c, tol } => {
                let r = conditional_mutual_information(q, a, b, c)?;
                (r, r <= *tol)
            }
            Constraint::SupportIncludesMapped { map } => {
                let mapped = map.apply(q)?;
                let r: f64 = q
                    .mass()
                    .iter()
                    .zip(mapped.mass())
                    .filter(|(&qm, _)| qm == 0.0)
                    .map(|(_, &pm)| pm)
                    .sum();
                (r, r == 0.0)
            }
            Constraint::CardinalityCap { var, max } => {
                let size = q.space().sizes()[*var];
                ((size.saturating_sub(*max)) as f64, size <= *max)
            }
        };
        Ok(ConstraintReport { name: self.name(), residual, pass })
    }
}

/// Outcome of evaluating one constraint.
#[derive(Debug, Clone, Serialize)]
pub struct ConstraintReport {
    pub name: String,
    pub residual: f64,
    pub pass: bool,
}

/// A feasible family of joint distributions given by testable constraints.
#[derive(Debug, Clone)]
pub struct FeasibleSet {
    pub kind: FeasibleKind,
    pub constraints: Vec<Constraint>,
}

impl FeasibleSet {
    pub fn new(kind: FeasibleKind, constraints: Vec<Constraint>) -> Self {
        Self { kind, constraints }
    }

    pub fn check(&self, q: &JointDist) -> Result<Vec<ConstraintReport>> {
        self.constraints.iter().map(|c| c.check(q)).collect()
    }

    pub fn contains(&self, q: &JointDist) -> Result<bool> {
        for c in &self.constraints {
            if !c.check(q)?.pass {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Largest residual across constraints (0 when all pass exactly).
    pub fn max_residual(&self, q: &JointDist) -> Result<f64> {
        let mut worst = 0.0f64;
        for c in &self.constraints {
            worst = worst.max(c.check(q)?.residual);
        }
        Ok(worst)
    }
}

/// Default residual tolerance for feasibility predicates.
pub const PREDICATE_TOL: f64 = tol::PREDICATE;

// --- serialization -----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct RatioTermRepr {
    coeff: f64,
    given: Vec<String>,
    target: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "name")]
enum MapRepr {
    #[serde(rename = "identity")]
    Identity,
    #[serde(rename = "wz-compose")]
    WzCompose { u: String, x: String, y: String, z: String, p_xy: JointDist },
}

#[derive(Serialize, Deserialize)]
struct RelaxationSpecRepr {
    names: Vec<String>,
    sizes: Vec<usize>,
    map: MapRepr,
    kappa_terms: Vec<RatioTermRepr>,
    nu_terms: Vec<RatioTermRepr>,
}

impl Serialize for RelaxationSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let labels = |vars: &[usize]| {
            let mut v: Vec<String> =
                vars.iter().map(|&i| self.space.names()[i].clone()).collect();
            v.sort();
            v
        };
        let term = |t: &RatioTerm| RatioTermRepr {
            coeff: t.coeff,
            given: labels(&t.given),
            target: labels(&t.target),
        };
        let map = match &self.map {
            ProjectionMap::Identity => MapRepr::Identity,
            ProjectionMap::WzCompose(m) => MapRepr::WzCompose {
                u: self.space.names()[m.u].clone(),
                x: self.space.names()[m.x].clone(),
                y: self.space.names()[m.y].clone(),
                z: self.space.names()[m.z].clone(),
                p_xy: m.p_xy.clone(),
            },
        };
        RelaxationSpecRepr {
            names: self.space.names().to_vec(),
            sizes: self.space.sizes().to_vec(),
            map,
            kappa_terms: self.kappa_terms.iter().map(term).collect(),
            nu_terms: self.nu_terms.iter().map(term).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RelaxationSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = RelaxationSpecRepr::deserialize(deserializer)?;
        let space = AlphabetProduct::new(repr.names, repr.sizes).map_err(D::Error::custom)?;
        let resolve = |terms: Vec<RatioTermRepr>| -> Result<Vec<RatioTerm>> {
            terms
                .into_iter()
                .map(|t| {
                    let g: Vec<&str> = t.given.iter().map(String::as_str).collect();
                    let tt: Vec<&str> = t.target.iter().map(String::as_str).collect();
                    Ok(RatioTerm {
                        coeff: t.coeff,
                        given: space.resolve_vars(&g)?,
                        target: space.resolve_vars(&tt)?,
                    })
                })
                .collect()
        };
        let kappa = resolve(repr.kappa_terms).map_err(D::Error::custom)?;
        let nu = resolve(repr.nu_terms).map_err(D::Error::custom)?;
        let map = match repr.map {
            MapRepr::Identity => ProjectionMap::Identity,
            MapRepr::WzCompose { u, x, y, z, p_xy } => ProjectionMap::WzCompose(WzComposeMap {
                u: space.var_index(&u).map_err(D::Error::custom)?,
                x: space.var_index(&x).map_err(D::Error::custom)?,
                y: space.var_index(&y).map_err(D::Error::custom)?,
                z: space.var_index(&z).map_err(D::Error::custom)?,
                p_xy,
            }),
        };
        RelaxationSpec::new(space, map, kappa, nu).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> AlphabetProduct {
        AlphabetProduct::new(vec!["U", "X", "Y", "Z"], vec![2, 2, 2, 2]).unwrap()
    }

    fn identity_relax() -> RelaxationSpec {
        RelaxationSpec::new(space(), ProjectionMap::Identity, vec![], vec![]).unwrap()
    }

    #[test]
    fn identity_map_fixed_point_and_penalty_zero() {
        let relax = identity_relax();
        let score = ScoreSpec::empty(space());
        let q = JointDist::uniform(space());
        let p = apply_map(&relax, &q).unwrap();
        assert_eq!(p.mass(), q.mass());
        for &alpha in &[0.0, 1.0, 100.0] {
            let v = penalized_score(&relax, &score, &q, alpha, Sign::Plus).unwrap();
            assert_eq!(v, 0.0);
            let v = penalized_score(&relax, &score, &q, alpha, Sign::Minus).unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn penalized_cgf_zero_at_zero() {
        let relax = identity_relax();
        let score = ScoreSpec::empty(space());
        let q = JointDist::uniform(space());
        assert_eq!(penalized_cgf(&relax, &score, &q, 0.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn penalized_cgf_rejects_out_of_window() {
        let relax = identity_relax();
        let score = ScoreSpec::empty(space());
        let q = JointDist::uniform(space());
        // kappa_sum = eta_sum = 0, window hi = 1/alpha.
        assert!(penalized_cgf(&relax, &score, &q, 0.5, 2.0).is_ok());
        assert!(matches!(
            penalized_cgf(&relax, &score, &q, 0.6, 2.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            penalized_cgf(&relax, &score, &q, 0.1, -2.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn decomposition_trivial_for_identity() {
        let relax = identity_relax();
        let score = ScoreSpec::empty(space());
        let q = JointDist::uniform(space());
        let r = verify_decomposition(&relax, &score, &q).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn constraint_reports() {
        let q = JointDist::uniform(space());
        let cap = Constraint::CardinalityCap { var: 0, max: 2 };
        assert!(cap.check(&q).unwrap().pass);
        let cap = Constraint::CardinalityCap { var: 0, max: 1 };
        assert!(!cap.check(&q).unwrap().pass);

        let m = Constraint::MarkovChain { a: vec![0], b: vec![1], c: vec![2], tol: 1e-9 };
        let rep = m.check(&q).unwrap();
        assert!(rep.pass);
        assert!(rep.residual.abs() < 1e-12);
    }
}
