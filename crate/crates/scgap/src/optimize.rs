//! Extremization engines: an exhaustive type-class grid oracle over feasible
//! distributions, a seeded multi-start multiplicative-weights heuristic on
//! products of simplices, and the curvature constants (near-maximizer score
//! variance and scaled third CGF derivative) feeding the gap bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{moments, tilt, AlphabetProduct, JointDist};
use crate::error::{Error, Result};
use crate::relaxation::{penalized_score, FeasibleSet, RelaxationSpec, Sign};
use crate::score::ScoreSpec;

/// Configuration for the extremum searches.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Grid denominator N; the oracle enumerates masses that are multiples of 1/N.
    pub grid_denominator: u32,
    /// Heuristic restarts from seeded Dirichlet(1) draws.
    pub restarts: u32,
    /// Heuristic iterations per restart.
    pub max_iters: u32,
    /// Heuristic convergence threshold on the sup-norm block movement.
    pub step_tolerance: f64,
    /// Base width of the near-maximizer band for the curvature constants;
    /// the grid modulus is added on top.
    pub near_max_tol: f64,
    pub seed: u64,
    /// Refuse oracle enumerations visiting more points than this.
    pub enum_cap: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            grid_denominator: 4,
            restarts: 8,
            max_iters: 200,
            step_tolerance: 1e-9,
            near_max_tol: 1e-6,
            seed: 42,
            enum_cap: 50_000_000,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_denominator < 2 {
            return Err(Error::Config("grid denominator must be at least 2".into()));
        }
        if self.restarts < 1 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if !(self.near_max_tol > 0.0) {
            return Err(Error::Config("near-max tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ORACLE")]
    Oracle,
    #[serde(rename = "HEURISTIC")]
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Max,
    Min,
}

/// An extremum with its witness and a certificate of grid optimism.
#[derive(Debug, Clone, Serialize)]
pub struct ExtremumResult {
    pub value: f64,
    pub argument: JointDist,
    pub method: Method,
    /// Oracle: continuity-modulus bound on how far the grid extremum can sit
    /// from the true extremum. Heuristic: infinite (no certificate).
    pub certified_gap: f64,
    pub evaluations: u64,
}

/// A family of candidate distributions: enumerable on a type-class grid in a
/// deterministic order, and parameterized by simplex blocks for the heuristic.
pub trait CandidateSource {
    fn space(&self) -> &AlphabetProduct;

    /// Number of grid points the enumeration would visit (before filtering).
    fn count_estimate(&self, n: u32) -> u128;

    /// Visit every feasible grid candidate in a deterministic order.
    fn for_each(&self, n: u32, f: &mut dyn FnMut(&JointDist) -> Result<()>) -> Result<()>;

    /// L1 radius within which any feasible point has a grid representative.
    fn rounding_radius(&self, n: u32) -> f64;

    /// Simplex block lengths of the heuristic parameterization.
    fn block_sizes(&self) -> Vec<usize>;

    /// Build the candidate encoded by normalized blocks.
    fn decode(&self, blocks: &[Vec<f64>]) -> Result<JointDist>;
}

/// `C(n+k-1, k-1)` with saturation, the number of compositions of `n` into
/// `k` nonnegative parts.
pub fn composition_count(n: u32, k: usize) -> u128 {
    if k == 0 {
        return 0;
    }
    let mut acc: u128 = 1;
    let n = n as u128;
    for i in 1..(k as u128) {
        acc = match acc.checked_mul(n + i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    acc
}

/// Visit all compositions of `n` into `k` parts in ascending lexicographic
/// order of the count vector.
pub fn for_each_composition(
    n: u32,
    k: usize,
    f: &mut dyn FnMut(&[u32]) -> Result<()>,
) -> Result<()> {
    fn rec(buf: &mut Vec<u32>, rest: u32, slots: usize, f: &mut dyn FnMut(&[u32]) -> Result<()>) -> Result<()> {
        if slots == 1 {
            buf.push(rest);
            let r = f(buf);
            buf.pop();
            return r;
        }
        for v in 0..=rest {
            buf.push(v);
            rec(buf, rest - v, slots - 1, f)?;
            buf.pop();
        }
        Ok(())
    }
    if k == 0 {
        return Ok(());
    }
    let mut buf = Vec::with_capacity(k);
    rec(&mut buf, n, k, f)
}

/// Generic joint-grid candidate source: all type-class distributions with
/// denominator N, filtered by the feasible set's predicates.
#[derive(Debug, Clone)]
pub struct JointGridSource {
    space: AlphabetProduct,
    feasible: Option<FeasibleSet>,
}

impl JointGridSource {
    pub fn new(space: AlphabetProduct, feasible: Option<FeasibleSet>) -> Self {
        Self { space, feasible }
    }
}

impl CandidateSource for JointGridSource {
    fn space(&self) -> &AlphabetProduct {
        &self.space
    }

    fn count_estimate(&self, n: u32) -> u128 {
        composition_count(n, self.space.total())
    }

    fn for_each(&self, n: u32, f: &mut dyn FnMut(&JointDist) -> Result<()>) -> Result<()> {
        let total = self.space.total();
        let denom = n as f64;
        for_each_composition(n, total, &mut |counts| {
            let mass: Vec<f64> = counts.iter().map(|&c| c as f64 / denom).collect();
            let q = JointDist::new(self.space.clone(), mass)?;
            if let Some(fs) = &self.feasible {
                if !fs.contains(&q)? {
                    return Ok(());
                }
            }
            f(&q)
        })
    }

    fn rounding_radius(&self, n: u32) -> f64 {
        (self.space.total() as f64 / n as f64).min(2.0)
    }

    fn block_sizes(&self) -> Vec<usize> {
        vec![self.space.total()]
    }

    fn decode(&self, blocks: &[Vec<f64>]) -> Result<JointDist> {
        if blocks.len() != 1 {
            return Err(Error::Config("joint source expects a single block".into()));
        }
        JointDist::new(self.space.clone(), blocks[0].clone())
    }
}

/// Materialize all feasible type-class distributions with denominator `n`.
pub fn grid_enumerate(
    space: &AlphabetProduct,
    feasible: &FeasibleSet,
    n: u32,
    cap: u64,
) -> Result<Vec<JointDist>> {
    let source = JointGridSource::new(space.clone(), Some(feasible.clone()));
    check_cap(source.count_estimate(n), cap)?;
    let mut out = Vec::new();
    source.for_each(n, &mut |q| {
        out.push(q.clone());
        Ok(())
    })?;
    Ok(out)
}

fn check_cap(required: u128, cap: u64) -> Result<()> {
    if required > cap as u128 {
        return Err(Error::EnumerationCap { required, cap });
    }
    Ok(())
}

/// Continuity-modulus certificate: how much an extremum of the expected
/// score can move under an L1 perturbation of radius `delta`.
pub fn continuity_modulus(k_prime: f64, total_alphabet: usize, delta: f64) -> f64 {
    if k_prime <= 0.0 || delta <= 0.0 {
        return 0.0;
    }
    k_prime * delta * (std::f64::consts::E * total_alphabet as f64 / delta).ln()
}

fn lex_less(a: &JointDist, b: &JointDist) -> bool {
    for (&x, &y) in a.mass().iter().zip(b.mass()) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

fn improves(sense: Sense, v: f64, best: f64) -> bool {
    match sense {
        Sense::Max => v > best,
        Sense::Min => v < best,
    }
}

/// Exhaustive extremization of an objective over a candidate source's grid.
pub fn oracle_extremize(
    objective: &mut dyn FnMut(&JointDist) -> Result<f64>,
    source: &dyn CandidateSource,
    sense: Sense,
    cfg: &OptimizerConfig,
    certified_gap: f64,
) -> Result<ExtremumResult> {
    cfg.validate()?;
    check_cap(source.count_estimate(cfg.grid_denominator), cfg.enum_cap)?;
    let mut best: Option<(f64, JointDist)> = None;
    let mut evaluations = 0u64;
    source.for_each(cfg.grid_denominator, &mut |q| {
        evaluations += 1;
        let v = objective(q)?;
        if v.is_nan() {
            return Ok(());
        }
        match &mut best {
            None => best = Some((v, q.clone())),
            Some((bv, bq)) => {
                // Ties break to the lexicographically smallest mass array.
                if improves(sense, v, *bv) || (v == *bv && lex_less(q, bq)) {
                    *bv = v;
                    *bq = q.clone();
                }
            }
        }
        Ok(())
    })?;
    let (value, argument) = best.ok_or(Error::EmptyGrid)?;
    Ok(ExtremumResult { value, argument, method: Method::Oracle, certified_gap, evaluations })
}

fn dirichlet1(k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| (-(1.0 - rng.random::<f64>()).ln()).max(1e-300)).collect();
    let s: f64 = v.iter().sum();
    for x in &mut v {
        *x /= s;
    }
    v
}

fn renormalize(block: &mut [f64]) {
    let mut s = 0.0;
    for x in block.iter_mut() {
        *x = x.max(1e-15);
        s += *x;
    }
    for x in block.iter_mut() {
        *x /= s;
    }
}

/// Seeded multi-start multiplicative-weights search over the source's simplex
/// blocks. Step size `0.5/√iter`; gradients estimated by central differences
/// on renormalized perturbations.
pub fn heuristic_extremize(
    objective: &mut dyn FnMut(&JointDist) -> Result<f64>,
    source: &dyn CandidateSource,
    sense: Sense,
    cfg: &OptimizerConfig,
) -> Result<ExtremumResult> {
    cfg.validate()?;
    let sizes = source.block_sizes();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(f64, JointDist)> = None;
    let mut evaluations = 0u64;
    let mut first_error: Option<Error> = None;
    let h = 1e-5;
    let direction = match sense {
        Sense::Max => 1.0,
        Sense::Min => -1.0,
    };

    let mut eval = |blocks: &[Vec<f64>],
                    evaluations: &mut u64,
                    first_error: &mut Option<Error>|
     -> (f64, Option<JointDist>) {
        *evaluations += 1;
        match source.decode(blocks).and_then(|q| {
            let v = objective(&q)?;
            Ok((v, q))
        }) {
            Ok((v, q)) => (v, Some(q)),
            Err(e) => {
                first_error.get_or_insert(e);
                (f64::NAN, None)
            }
        }
    };

    for _restart in 0..cfg.restarts {
        let mut blocks: Vec<Vec<f64>> = sizes.iter().map(|&k| dirichlet1(k, &mut rng)).collect();
        let (v, q) = eval(&blocks, &mut evaluations, &mut first_error);
        consider_best(&mut best, sense, v, q);
        for t in 1..=cfg.max_iters {
            let step = 0.5 / (t as f64).sqrt();
            // Central-difference gradient per block entry.
            let mut grads: Vec<Vec<f64>> = sizes.iter().map(|&k| vec![0.0; k]).collect();
            for (b, block) in blocks.iter().enumerate() {
                for i in 0..block.len() {
                    let mut plus = blocks.clone();
                    plus[b][i] += h;
                    renormalize(&mut plus[b]);
                    let mut minus = blocks.clone();
                    minus[b][i] = (minus[b][i] - h).max(1e-15);
                    renormalize(&mut minus[b]);
                    let (fp, _) = eval(&plus, &mut evaluations, &mut first_error);
                    let (fm, _) = eval(&minus, &mut evaluations, &mut first_error);
                    let g = (fp - fm) / (2.0 * h);
                    grads[b][i] = if g.is_finite() { g } else { 0.0 };
                }
            }
            let mut movement = 0.0f64;
            for (block, grad) in blocks.iter_mut().zip(&grads) {
                let old = block.clone();
                for (x, &g) in block.iter_mut().zip(grad) {
                    let e = (direction * step * g).clamp(-50.0, 50.0);
                    *x *= e.exp();
                }
                renormalize(block);
                for (&o, &n) in old.iter().zip(block.iter()) {
                    movement = movement.max((o - n).abs());
                }
            }
            let (v, q) = eval(&blocks, &mut evaluations, &mut first_error);
            consider_best(&mut best, sense, v, q);
            if movement < cfg.step_tolerance {
                break;
            }
        }
    }
    match best {
        Some((value, argument)) => Ok(ExtremumResult {
            value,
            argument,
            method: Method::Heuristic,
            certified_gap: f64::INFINITY,
            evaluations,
        }),
        None => Err(first_error
            .unwrap_or_else(|| Error::Numeric("heuristic never found a finite objective".into()))),
    }
}

fn consider_best(best: &mut Option<(f64, JointDist)>, sense: Sense, v: f64, q: Option<JointDist>) {
    let Some(q) = q else { return };
    if v.is_nan() {
        return;
    }
    match best {
        None => *best = Some((v, q)),
        Some((bv, bq)) => {
            if improves(sense, v, *bv) || (v == *bv && lex_less(&q, bq)) {
                *bv = v;
                *bq = q;
            }
        }
    }
}

/// Extremize the expected score over a candidate source.
pub fn extremize_score(
    score: &ScoreSpec,
    source: &dyn CandidateSource,
    sense: Sense,
    cfg: &OptimizerConfig,
    method: Method,
) -> Result<ExtremumResult> {
    let mut objective = |q: &JointDist| score.expected_score(q);
    match method {
        Method::Oracle => {
            let gap = continuity_modulus(
                score.k_prime(),
                score.space().total(),
                source.rounding_radius(cfg.grid_denominator),
            );
            oracle_extremize(&mut objective, source, sense, cfg, gap)
        }
        Method::Heuristic => heuristic_extremize(&mut objective, source, sense, cfg),
    }
}

/// Extremize the KL-penalized expected score over a relaxed source.
///
/// Maximization pairs with the subtracted penalty, minimization with the
/// added penalty; any other pairing is rejected.
pub fn extremize_penalized(
    score: &ScoreSpec,
    relax: &RelaxationSpec,
    source: &dyn CandidateSource,
    alpha: f64,
    sense: Sense,
    cfg: &OptimizerConfig,
    method: Method,
) -> Result<ExtremumResult> {
    if !(alpha >= 0.0) {
        return Err(Error::Domain(format!("penalty weight {alpha} must be nonnegative")));
    }
    let sign = match sense {
        Sense::Max => Sign::Plus,
        Sense::Min => Sign::Minus,
    };
    let mut objective = |q: &JointDist| penalized_score(relax, score, q, alpha, sign);
    match method {
        Method::Oracle => {
            let gap = continuity_modulus(
                score.k_prime(),
                score.space().total(),
                source.rounding_radius(cfg.grid_denominator),
            );
            oracle_extremize(&mut objective, source, sense, cfg, gap)
        }
        Method::Heuristic => heuristic_extremize(&mut objective, source, sense, cfg),
    }
}

/// Maximize the score CGF at tilt `lambda` over a constrained source.
pub fn cgf_max(
    score: &ScoreSpec,
    source: &dyn CandidateSource,
    lambda: f64,
    cfg: &OptimizerConfig,
) -> Result<ExtremumResult> {
    crate::score::check_window(lambda, score.cgf_derivative_window(), "cgf max scale")?;
    let mut objective = |q: &JointDist| score.cgf(q, lambda);
    let gap = continuity_modulus(
        score.k_prime(),
        score.space().total(),
        source.rounding_radius(cfg.grid_denominator),
    );
    oracle_extremize(&mut objective, source, Sense::Max, cfg, gap)
}

/// Curvature constants over the half-width tilt windows: the largest score
/// variance over near-maximizers of the CGF, and the largest |third
/// derivative|/6 over near-maximizers and tilts in the window.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureConstants {
    pub rho_plus: f64,
    pub rho_minus: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub lambda_grid_plus: Vec<f64>,
    pub lambda_grid_minus: Vec<f64>,
    /// Effective near-maximizer band: configured tolerance plus grid modulus.
    pub near_max_tol_effective: f64,
    pub grid_denominator: u32,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Compute curvature constants over a constrained candidate source.
///
/// When a coefficient sum is zero its half-window is unbounded; the caller
/// must then supply a cap (the largest tilt the downstream bounds will use).
pub fn curvature_constants(
    score: &ScoreSpec,
    source: &dyn CandidateSource,
    cfg: &OptimizerConfig,
    lambda_samples: usize,
    plus_cap: Option<f64>,
    minus_cap: Option<f64>,
) -> Result<CurvatureConstants> {
    cfg.validate()?;
    if lambda_samples < 3 {
        return Err(Error::Config("need at least 3 tilt samples".into()));
    }
    let eta = score.eta_sum();
    let mu = score.mu_sum();
    let hi_plus = if eta > 0.0 {
        0.5 / eta
    } else {
        plus_cap.ok_or_else(|| {
            Error::Domain("eta coefficient sum is zero: supply a positive-side tilt cap".into())
        })?
    };
    let lo_minus = if mu > 0.0 {
        -0.5 / mu
    } else {
        -minus_cap.ok_or_else(|| {
            Error::Domain("mu coefficient sum is zero: supply a negative-side tilt cap".into())
        })?
    };
    if !(hi_plus > 0.0) || !(lo_minus < 0.0) {
        return Err(Error::Domain("tilt caps must be positive".into()));
    }
    let grid_plus = linspace(0.0, hi_plus, lambda_samples);
    let grid_minus = linspace(lo_minus, 0.0, lambda_samples);

    let n = cfg.grid_denominator;
    check_cap(source.count_estimate(n), cfg.enum_cap)?;
    let count = source.count_estimate(n) as usize;
    let slots = 2 * lambda_samples + 3;
    if count.saturating_mul(slots).saturating_mul(8) > 1 << 32 {
        return Err(Error::EnumerationCap {
            required: count as u128,
            cap: ((1u64 << 32) / (slots as u64 * 8)),
        });
    }

    // One pass: CGF values on both grids, score variance, and the largest
    // |d3|/6 over each side's tilt grid, per candidate.
    let mut cgf_vals: Vec<Vec<f64>> = vec![Vec::new(); 2 * lambda_samples];
    let mut variances: Vec<f64> = Vec::new();
    let mut m_plus: Vec<f64> = Vec::new();
    let mut m_minus: Vec<f64> = Vec::new();
    source.for_each(n, &mut |p| {
        let table = score.score_table(p)?;
        for (k, &lam) in grid_plus.iter().chain(grid_minus.iter()).enumerate() {
            let v = if lam == 0.0 {
                0.0
            } else {
                crate::dist::log_tilt_normalizer(p, &table, lam)?
            };
            cgf_vals[k].push(v);
        }
        let m = moments(p, &table, 2)?;
        variances.push(m.variance.unwrap());
        let third_at = |gamma: f64| -> Result<f64> {
            let tilted = tilt(p, &table, gamma)?;
            Ok(moments(&tilted, &table, 3)?.third_central.unwrap().abs() / 6.0)
        };
        let mut mp = 0.0f64;
        for &g in &grid_plus {
            mp = mp.max(third_at(g)?);
        }
        let mut mm = 0.0f64;
        for &g in &grid_minus {
            mm = mm.max(third_at(g)?);
        }
        m_plus.push(mp);
        m_minus.push(mm);
        Ok(())
    })?;
    if variances.is_empty() {
        return Err(Error::EmptyGrid);
    }

    let tol_eff = cfg.near_max_tol
        + continuity_modulus(score.k_prime(), score.space().total(), source.rounding_radius(n));

    let side = |vals: &[Vec<f64>], m_side: &[f64]| -> (f64, f64) {
        let mut rho = 0.0f64;
        let mut c = 0.0f64;
        for per_lambda in vals {
            let max = per_lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for (i, &v) in per_lambda.iter().enumerate() {
                if v >= max - tol_eff {
                    rho = rho.max(variances[i]);
                    c = c.max(m_side[i]);
                }
            }
        }
        (rho, c)
    };
    let (rho_plus, c_plus) = side(&cgf_vals[..lambda_samples], &m_plus);
    let (rho_minus, c_minus) = side(&cgf_vals[lambda_samples..], &m_minus);

    Ok(CurvatureConstants {
        rho_plus,
        rho_minus,
        c_plus,
        c_minus,
        lambda_grid_plus: grid_plus,
        lambda_grid_minus: grid_minus,
        near_max_tol_effective: tol_eff,
        grid_denominator: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relaxation::{Constraint, FeasibleKind};

    fn space(sizes: Vec<usize>) -> AlphabetProduct {
        let names: Vec<String> = (0..sizes.len()).map(|i| format!("V{i}")).collect();
        AlphabetProduct::new(names, sizes).unwrap()
    }

    fn unconstrained(sizes: Vec<usize>) -> JointGridSource {
        JointGridSource::new(space(sizes), None)
    }

    #[test]
    fn composition_counts() {
        assert_eq!(composition_count(2, 2), 3);
        assert_eq!(composition_count(4, 2), 5);
        assert_eq!(composition_count(8, 16), 490_314);
    }

    #[test]
    fn binary_grid_points() {
        let src = unconstrained(vec![2]);
        let mut seen = Vec::new();
        src.for_each(2, &mut |q| {
            seen.push(q.mass().to_vec());
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);

        let mut count = 0;
        src.for_each(4, &mut |_| {
            count += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(count, 5);
    }

    #[test]
    fn marginal_predicate_filters_grid() {
        let sp = space(vec![2, 2]);
        let half = JointDist::new(space(vec![2]), vec![0.5, 0.5]).unwrap();
        // Uniform first marginal only.
        let ux = FeasibleSet::new(
            FeasibleKind::Constrained,
            vec![Constraint::MarginalEquals {
                vars: vec![0],
                target: JointDist::new(sp.subspace(&[0]).unwrap(), half.mass().to_vec()).unwrap(),
                tol: 1e-9,
            }],
        );
        let pts = grid_enumerate(&sp, &ux, 4, 1 << 20).unwrap();
        assert_eq!(pts.len(), 9);

        // Uniform marginals on both variables: hand enumeration gives 3.
        let both = FeasibleSet::new(
            FeasibleKind::Constrained,
            vec![
                Constraint::MarginalEquals {
                    vars: vec![0],
                    target: JointDist::new(sp.subspace(&[0]).unwrap(), half.mass().to_vec())
                        .unwrap(),
                    tol: 1e-9,
                },
                Constraint::MarginalEquals {
                    vars: vec![1],
                    target: JointDist::new(sp.subspace(&[1]).unwrap(), half.mass().to_vec())
                        .unwrap(),
                    tol: 1e-9,
                },
            ],
        );
        let pts = grid_enumerate(&sp, &both, 4, 1 << 20).unwrap();
        assert_eq!(pts.len(), 3);
    }

    #[test]
    fn cap_refusal() {
        let src = unconstrained(vec![2, 2, 2, 2]);
        let cfg = OptimizerConfig { grid_denominator: 8, enum_cap: 1000, ..Default::default() };
        let score = ScoreSpec::empty(src.space().clone());
        let err = extremize_score(&score, &src, Sense::Max, &cfg, Method::Oracle);
        assert!(matches!(err, Err(Error::EnumerationCap { .. })));
    }

    #[test]
    fn empty_score_extremum_is_zero() {
        let src = unconstrained(vec![2, 2]);
        let score = ScoreSpec::empty(src.space().clone());
        let cfg = OptimizerConfig { grid_denominator: 4, ..Default::default() };
        let r = extremize_score(&score, &src, Sense::Max, &cfg, Method::Oracle).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.method, Method::Oracle);
        assert_eq!(r.evaluations, composition_count(4, 4) as u64);
        // All values tie at 0, so the lexicographically smallest mass wins.
        assert_eq!(r.argument.mass(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn oracle_finds_entropy_extrema() {
        // Expected score = −H(p): max at a point mass, min at uniform.
        let src = unconstrained(vec![2, 2]);
        let score = ScoreSpec::new(
            src.space().clone(),
            vec![],
            vec![crate::score::MarginalTerm { coeff: 1.0, vars: vec![0, 1] }],
            vec![],
        )
        .unwrap();
        let cfg = OptimizerConfig { grid_denominator: 4, ..Default::default() };
        let max = extremize_score(&score, &src, Sense::Max, &cfg, Method::Oracle).unwrap();
        assert!((max.value - 0.0).abs() < 1e-12);
        let min = extremize_score(&score, &src, Sense::Min, &cfg, Method::Oracle).unwrap();
        assert!((min.value + (4.0f64).ln()).abs() < 1e-12);
        assert_eq!(min.argument.mass(), &[0.25; 4]);
    }

    #[test]
    fn heuristic_matches_oracle_on_entropy_min() {
        let src = unconstrained(vec![2, 2]);
        let score = ScoreSpec::new(
            src.space().clone(),
            vec![],
            vec![crate::score::MarginalTerm { coeff: 1.0, vars: vec![0, 1] }],
            vec![],
        )
        .unwrap();
        let cfg = OptimizerConfig { grid_denominator: 4, restarts: 4, max_iters: 120, ..Default::default() };
        let h = extremize_score(&score, &src, Sense::Min, &cfg, Method::Heuristic).unwrap();
        assert_eq!(h.method, Method::Heuristic);
        assert!(h.certified_gap.is_infinite());
        assert!((h.value + (4.0f64).ln()).abs() < 1e-3, "heuristic value {}", h.value);
    }

    #[test]
    fn heuristic_is_deterministic() {
        let src = unconstrained(vec![2, 2]);
        let score = ScoreSpec::new(
            src.space().clone(),
            vec![crate::score::FixedTerm { coeff: 1.0, table: vec![0.3, 1.0, 0.1, 0.6] }],
            vec![],
            vec![],
        )
        .unwrap();
        let cfg = OptimizerConfig { restarts: 3, max_iters: 50, seed: 7, ..Default::default() };
        let a = extremize_score(&score, &src, Sense::Max, &cfg, Method::Heuristic).unwrap();
        let b = extremize_score(&score, &src, Sense::Max, &cfg, Method::Heuristic).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.argument.mass(), b.argument.mass());
        assert_eq!(a.evaluations, b.evaluations);
    }

    #[test]
    fn curvature_constants_constant_score_are_zero() {
        let src = unconstrained(vec![2]);
        // Constant fixed term: variance and third derivative vanish.
        let score = ScoreSpec::new(
            src.space().clone(),
            vec![crate::score::FixedTerm { coeff: 2.0, table: vec![3.0, 3.0] }],
            vec![],
            vec![],
        )
        .unwrap();
        let cfg = OptimizerConfig { grid_denominator: 4, ..Default::default() };
        let cc =
            curvature_constants(&score, &src, &cfg, 5, Some(0.25), Some(0.25)).unwrap();
        assert_eq!(cc.rho_plus, 0.0);
        assert_eq!(cc.rho_minus, 0.0);
        assert_eq!(cc.c_plus, 0.0);
        assert_eq!(cc.c_minus, 0.0);
    }

    #[test]
    fn near_max_band_widening_never_shrinks_rho() {
        let src = unconstrained(vec![2, 2]);
        let score = ScoreSpec::new(
            src.space().clone(),
            vec![crate::score::FixedTerm { coeff: 1.0, table: vec![0.0, 1.0, 0.5, 0.25] }],
            vec![],
            vec![],
        )
        .unwrap();
        let tight = OptimizerConfig { grid_denominator: 6, near_max_tol: 1e-9, ..Default::default() };
        let wide = OptimizerConfig { grid_denominator: 6, near_max_tol: 10.0, ..Default::default() };
        let a = curvature_constants(&score, &src, &tight, 5, Some(0.5), Some(0.5)).unwrap();
        let b = curvature_constants(&score, &src, &wide, 5, Some(0.5), Some(0.5)).unwrap();
        assert!(b.rho_plus >= a.rho_plus);
        assert!(b.rho_minus >= a.rho_minus);
    }
}
