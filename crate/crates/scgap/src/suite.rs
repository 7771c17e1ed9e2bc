//! The named verification suite: sandwich ordering, both closed-form gap
//! bounds, CGF derivative checks against finite differences, Hölder factors,
//! the key penalized-CGF inequalities and their limit forms, the corrected
//! CGF pair, the score-difference decomposition, and the Taylor envelope of
//! the CGF maximum.
//!
//! Every check reports a measured quantity, the bound it must not exceed,
//! the slack allowed, and a pass flag; a runner turns these into a report
//! and an exit status.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    baseline_gap_bound, curvature_gap_bound, curvature_threshold_max, curvature_threshold_min,
};
use crate::dist::{conditional_mutual_information, kl_divergence};
use crate::error::{Error, Result};
use crate::optimize::{cgf_max, extremize_penalized, extremize_score, Method, OptimizerConfig, Sense};
use crate::relaxation::{
    apply_map, corrected_cgf_pair, holder_factors, penalized_cgf, penalized_cgf_derivative_window,
    penalized_cgf_derivatives, penalized_score, verify_decomposition, RatioTerm, RelaxationSpec,
    Sign,
};
use crate::sample;
use crate::tol;
use crate::wyner_ziv::{
    WzConstrainedSource, WzInstance, WzProblem, WzRelaxedSource, VAR_U, VAR_X, VAR_Y, VAR_Z,
};

/// One verified property: `holds` iff `measured ≤ bound + slack`.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub slack: f64,
    pub holds: bool,
}

fn check(name: String, measured: f64, bound: f64, slack: f64) -> CheckResult {
    CheckResult { name, measured, bound, slack, holds: measured <= bound + slack }
}

/// Suite parameters; the instance travels separately.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub xi_grid: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Random samples per sampled check.
    pub samples: u32,
    pub lambda_samples: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            xi_grid: vec![0.0, 0.5, 1.0],
            alpha: vec![6.0, 12.0],
            samples: 60,
            lambda_samples: 9,
            optimizer: OptimizerConfig::default(),
        }
    }
}

/// Validate every numeric parameter against the domain windows the suite
/// will exercise, before any computation starts.
pub fn validate_config(instance: &WzInstance, cfg: &SuiteConfig) -> Result<()> {
    cfg.optimizer.validate()?;
    if cfg.xi_grid.is_empty() || cfg.alpha.is_empty() {
        return Err(Error::Config("weight and penalty grids must be non-empty".into()));
    }
    if cfg.samples == 0 {
        return Err(Error::Config("sample count must be positive".into()));
    }
    if cfg.lambda_samples < 3 {
        return Err(Error::Config("need at least 3 tilt samples".into()));
    }
    for &xi in &cfg.xi_grid {
        if !(0.0..=1.0).contains(&xi) {
            return Err(Error::Config(format!("weight {xi} outside [0, 1]")));
        }
        let threshold = 5.0 * (1.0 - xi);
        for &alpha in &cfg.alpha {
            if !(alpha > threshold) || !(alpha > 1.0) {
                return Err(Error::Config(format!(
                    "penalty weight {alpha} must exceed the validity threshold {} at weight {xi}",
                    threshold.max(1.0)
                )));
            }
        }
    }
    let _ = instance.space(instance.u_card_tilde)?;
    Ok(())
}

/// Run the full suite, returning one result per named check.
pub fn run_suite(instance: &WzInstance, cfg: &SuiteConfig) -> Result<Vec<CheckResult>> {
    validate_config(instance, cfg)?;
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.optimizer.seed);

    for &xi in &cfg.xi_grid {
        extremal_checks(instance, xi, cfg, &mut out)?;
    }
    derivative_checks(instance, cfg, &mut rng, &mut out)?;
    holder_checks(instance, cfg, &mut rng, &mut out)?;
    key_inequality_checks(instance, cfg, &mut rng, &mut out)?;
    corrected_cgf_checks(instance, cfg, &mut rng, &mut out)?;
    decomposition_checks(instance, cfg, &mut rng, &mut out)?;
    score_identity_check(instance, cfg, &mut rng, &mut out)?;
    Ok(out)
}

/// Sandwich ordering, both gap bounds, and the CGF Taylor envelope at one
/// weight, sharing the oracle extremizations.
fn extremal_checks(
    instance: &WzInstance,
    xi: f64,
    cfg: &SuiteConfig,
    out: &mut Vec<CheckResult>,
) -> Result<()> {
    let problem = WzProblem::build(instance, xi, None)?;
    let tilde = WzConstrainedSource::new(instance, None)?;
    let star = WzRelaxedSource::new(&problem, instance)?;
    let opt = &cfg.optimizer;

    let tmax = extremize_score(&problem.score, &tilde, Sense::Max, opt, Method::Oracle)?;
    let tmin = extremize_score(&problem.score, &tilde, Sense::Min, opt, Method::Oracle)?;
    let alpha_min = cfg.alpha.iter().copied().fold(f64::INFINITY, f64::min);
    let cc = crate::wyner_ziv::wz_curvature(instance, xi, opt, cfg.lambda_samples, alpha_min)?;

    let k_used = tmax.value.max(instance.score_cap(xi));
    let total = problem.space.total();
    let eta = problem.score.eta_sum();
    let mu = problem.score.mu_sum();
    let kappa = problem.relax.kappa_sum();
    let nu = problem.relax.nu_sum();

    for &alpha in &cfg.alpha {
        let pmax =
            extremize_penalized(&problem.score, &problem.relax, &star, alpha, Sense::Max, opt, Method::Oracle)?;
        let pmin =
            extremize_penalized(&problem.score, &problem.relax, &star, alpha, Sense::Min, opt, Method::Oracle)?;

        // Restricting the relaxed family to the constrained one shows the
        // penalized extrema must dominate the plain ones.
        let violation = (tmax.value - pmax.value).max(pmin.value - tmin.value);
        out.push(check(
            format!("sandwich/xi={xi}/alpha={alpha}"),
            violation,
            0.0,
            tol::INEQ_SLACK,
        ));

        let gap = (pmax.value - tmax.value).max(tmin.value - pmin.value);
        let cert = (tmax.certified_gap + pmax.certified_gap)
            .max(tmin.certified_gap + pmin.certified_gap);
        let baseline = if k_used > 0.0 {
            baseline_gap_bound(k_used, problem.score.k_prime(), alpha, total)?
        } else {
            0.0
        };
        out.push(check(
            format!("baseline-bound/xi={xi}/alpha={alpha}"),
            gap,
            baseline,
            cert + tol::INEQ_SLACK,
        ));

        let bound_max =
            curvature_gap_bound(cc.rho_plus, cc.c_plus, alpha, nu, curvature_threshold_max(eta, nu))?;
        out.push(check(
            format!("curvature-bound-max/xi={xi}/alpha={alpha}"),
            pmax.value - tmax.value,
            bound_max,
            tmax.certified_gap + pmax.certified_gap + tol::INEQ_SLACK,
        ));
        let bound_min =
            curvature_gap_bound(cc.rho_minus, cc.c_minus, alpha, kappa, curvature_threshold_min(mu, kappa))?;
        out.push(check(
            format!("curvature-bound-min/xi={xi}/alpha={alpha}"),
            tmin.value - pmin.value,
            bound_min,
            tmin.certified_gap + pmin.certified_gap + tol::INEQ_SLACK,
        ));
    }

    // Taylor envelope of the CGF maximum at the ends of both tilt grids.
    let lam_plus = *cc.lambda_grid_plus.last().unwrap();
    if lam_plus > 0.0 {
        let m = cgf_max(&problem.score, &tilde, lam_plus, &cfg.optimizer)?;
        let envelope =
            lam_plus * tmax.value + lam_plus * lam_plus * (cc.rho_plus / 2.0 + lam_plus * cc.c_plus);
        out.push(check(
            format!("cgf-taylor-plus/xi={xi}"),
            m.value,
            envelope,
            m.certified_gap + tol::INEQ_SLACK,
        ));
    }
    let lam_minus = cc.lambda_grid_minus[0];
    if lam_minus < 0.0 {
        let m = cgf_max(&problem.score, &tilde, lam_minus, &cfg.optimizer)?;
        let l = -lam_minus;
        let envelope = -l * tmin.value + l * l * (cc.rho_minus / 2.0 + l * cc.c_minus);
        out.push(check(
            format!("cgf-taylor-minus/xi={xi}"),
            m.value,
            envelope,
            m.certified_gap + tol::INEQ_SLACK,
        ));
    }
    Ok(())
}

/// Analytic CGF derivatives against central finite differences, for both the
/// score CGF and the penalized CGF, at random interior points.
fn derivative_checks(
    instance: &WzInstance,
    cfg: &SuiteConfig,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<CheckResult>,
) -> Result<()> {
    let mut worst = 0.0f64;
    let h12 = 1e-3;
    let h3 = 5e-4;
    let margin = 3.0 * h12;

    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);

    for _ in 0..cfg.samples {
        let xi = rng.random_range(0.0..=0.9);
        let problem = WzProblem::build(instance, xi, None)?;
        let p = sample::wz_constrained(instance, None, rng)?;
        let (lo, hi) = problem.score.cgf_derivative_window();
        let (lo, hi) = (lo.max(-3.0), hi.min(3.0));
        let lam = rng.random_range((lo + margin)..(hi - margin));
        let (d1, d2, d3) = problem.score.cgf_derivatives(&p, lam)?;
        let f = |l: f64| problem.score.cgf(&p, l);
        let fd1 = (f(lam + h12)? - f(lam - h12)?) / (2.0 * h12);
        let fd2 = (f(lam + h12)? - 2.0 * f(lam)? + f(lam - h12)?) / (h12 * h12);
        let fd3 = (f(lam + 2.0 * h3)? - 2.0 * f(lam + h3)? + 2.0 * f(lam - h3)?
            - f(lam - 2.0 * h3)?)
            / (2.0 * h3 * h3 * h3);
        worst = worst.max(rel(d1, fd1)).max(rel(d2, fd2)).max(rel(d3, fd3));
        if d2 < 0.0 {
            worst = f64::INFINITY;
        }
    }
    out.push(check("cgf-derivatives-vs-finite-differences".into(), worst, 1e-5, 0.0));

    let mut worst = 0.0f64;
    for _ in 0..cfg.samples {
        let xi = rng.random_range(0.0..=0.9);
        let problem = WzProblem::build(instance, xi, None)?;
        let q = sample::joint(&problem.space, rng);
        let signed = if rng.random::<bool>() {
            rng.random_range(0.5..4.0)
        } else {
            -rng.random_range(0.5..4.0)
        };
        let (lo, hi) = penalized_cgf_derivative_window(&problem.relax, &problem.score, signed);
        if hi - lo <= 2.0 * margin {
            continue;
        }
        let theta = rng.random_range((lo + margin)..(hi - margin));
        let (d1, d2, d3) = penalized_cgf_derivatives(&problem.relax, &problem.score, &q, theta, signed)?;
        let f = |t: f64| penalized_cgf(&problem.relax, &problem.score, &q, t, signed);
        let fd1 = (f(theta + h12)? - f(theta - h12)?) / (2.0 * h12);
        let fd2 = (f(theta + h12)? - 2.0 * f(theta)? + f(theta - h12)?) / (h12 * h12);
        let fd3 = (f(theta + 2.0 * h3)? - 2.0 * f(theta + h3)? + 2.0 * f(theta - h3)?
            - f(theta - 2.0 * h3)?)
            / (2.0 * h3 * h3 * h3);
        worst = worst.max(rel(d1, fd1)).max(rel(d2, fd2)).max(rel(d3, fd3));
    }
    out.push(check("penalized-cgf-derivatives-vs-finite-differences".into(), worst, 1e-5, 0.0));
    Ok(())
}

fn holder_checks(
    instance: &WzInstance,
    cfg: &SuiteConfig,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<CheckResult>,
) -> Result<()> {
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_boundary = 0.0f64;
    let mut worst_constrained = 0.0f64;
    for i in 0..cfg.samples {
        let xi = rng.random_range(0.0..=0.95);
        let problem = WzProblem::build(instance, xi, None)?;
        let q = sample::joint(&problem.space, rng);
        let alpha = rng.random_range(0.5..8.0);
        let kappa = problem.relax.kappa_sum();
        let nu = problem.relax.nu_sum();
        let boundary = i % 10 == 0;
        // Alternate regimes; occasionally pin the boundary exponent.
        let theta = if i % 2 == 0 {
            let hi = 1.0 / (alpha + kappa);
            if boundary {
                hi
            } else {
                hi * rng.random_range(1e-6..1.0)
            }
        } else {
            let lo = -1.0 / (alpha + nu);
            if boundary {
                lo
            } else {
                lo * rng.random_range(1e-6..1.0)
            }
        };
        let factors = holder_factors(&problem.relax, &q, theta, alpha)?;
        for &f in factors.kappa_factors.iter().chain(&factors.nu_factors) {
            worst_excess = worst_excess.max(f - 1.0);
            if boundary {
                worst_boundary = worst_boundary.max((f - 1.0).abs());
            }
        }
        if i % 5 == 0 {
            // Constrained members give ratio 1 identically.
            let qc = sample::wz_constrained(instance, None, rng)?;
            let fc = holder_factors(&problem.relax, &qc, 0.5 / (alpha + kappa).max(1.0), alpha)?;
            for &f in fc.kappa_factors.iter().chain(&fc.nu_factors) {
                worst_constrained = worst_constrained.max((f - 1.0).abs());
            }
        }
    }
    out.push(check("holder-factors-at-most-one".into(), worst_excess.max(0.0), 0.0, 1e-12));
    out.push(check("holder-factors-boundary-exponent".into(), worst_boundary, 0.0, 1e-12));
    out.push(check("holder-factors-constrained-member".into(), worst_constrained, 0.0, 1e-12));
    Ok(())
}

fn key_inequality_checks(
    instance: &WzInstance,
    cfg: &SuiteConfig,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<CheckResult>,
) -> Result<()> {
    let mut v_plus = f64::NEG_INFINITY;
    let mut v_minus = f64::NEG_INFINITY;
    let mut v_limit_plus = f64::NEG_INFINITY;
    let mut v_limit_minus = f64::NEG_INFINITY;
    for _ in 0..cfg.samples {
        let xi = rng.random_range(0.0..=1.0);
        let problem = WzProblem::build(instance, xi, None)?;
        let q = sample::joint(&problem.space, rng);
        let p = apply_map(&problem.relax, &q)?;
        let kappa = problem.relax.kappa_sum();
        let nu = problem.relax.nu_sum();
        let eta = problem.score.eta_sum();
        let mu = problem.score.mu_sum();
        // Keep the scaled-CGF tilts inside their windows.
        let alpha = (eta + nu).max(mu + kappa) + rng.random_range(0.5..8.0);

        let theta = rng.random_range(0.0..1.0 / (alpha + kappa)).max(1e-9);
        let lhs = penalized_cgf(&problem.relax, &problem.score, &q, theta, alpha)?;
        let rhs = theta * (alpha - nu) * problem.score.cgf(&p, 1.0 / (alpha - nu))?;
        v_plus = v_plus.max(lhs - rhs);

        let theta = -rng.random_range(0.0..1.0 / (alpha + nu)).max(1e-9);
        let lhs = penalized_cgf(&problem.relax, &problem.score, &q, theta, -alpha)?;
        let rhs = -theta * (alpha - kappa) * problem.score.cgf(&p, -1.0 / (alpha - kappa))?;
        v_minus = v_minus.max(lhs - rhs);

        let ps = penalized_score(&problem.relax, &problem.score, &q, alpha, Sign::Plus)?;
        let rhs = (alpha - nu) * problem.score.cgf(&p, 1.0 / (alpha - nu))?;
        v_limit_plus = v_limit_plus.max(ps - rhs);

        let ps = penalized_score(&problem.relax, &problem.score, &q, alpha, Sign::Minus)?;
        let rhs = -(alpha - kappa) * problem.score.cgf(&p, -1.0 / (alpha - kappa))?;
        v_limit_minus = v_limit_minus.max(rhs - ps);
    }
    out.push(check("penalized-cgf-bound-plus".into(), v_plus, 0.0, tol::INEQ_SLACK));
    out.push(check("penalized-cgf-bound-minus".into(), v_minus, 0.0, tol::INEQ_SLACK));
    out.push(check("penalized-score-limit-plus".into(), v_limit_plus, 0.0, tol::INEQ_SLACK));
    out.push(check("penalized-score-limit-minus".into(), v_limit_minus, 0.0, tol::INEQ_SLACK));
    Ok(())
}

fn corrected_cgf_checks(
    instance: &WzInstance,
    cfg: &SuiteConfig,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<CheckResult>,
) -> Result<()> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..cfg.samples {
        let xi = rng.random_range(0.0..=1.0);
        let problem = WzProblem::build(instance, xi, None)?;
        let q = sample::joint(&problem.space, rng);
        let p = apply_map(&problem.relax, &q)?;
        let kappa = problem.relax.kappa_sum();
        let nu = problem.relax.nu_sum();
        let eta = problem.score.eta_sum();
        let mu = problem.score.mu_sum();
        let alpha = (eta + nu).max(mu + kappa) + rng.random_range(0.5..8.0);
        let pair = corrected_cgf_pair(&problem.relax, &problem.score, &q, alpha)?;
        let plus_bound = (1.0 - nu / alpha) * problem.score.cgf(&p, 1.0 / (alpha - nu))?;
        let minus_bound = (1.0 - kappa / alpha) * problem.score.cgf(&p, -1.0 / (alpha - kappa))?;
        worst = worst.max(pair.plus - plus_bound).max(pair.minus - minus_bound);
    }
    out.push(check("corrected-cgf-bounds".into(), worst, 0.0, tol::INEQ_SLACK));
    Ok(())
}

fn decomposition_checks(
    instance: &WzInstance,
    cfg: &SuiteConfig,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<CheckResult>,
) -> Result<()> {
    let mut worst = 0.0f64;
    let mut worst_split = 0.0f64;
    for _ in 0..cfg.samples {
        let xi = rng.random_range(0.0..=1.0);
        let problem = WzProblem::build(instance, xi, None)?;
        let q = sample::joint(&problem.space, rng);
        worst = worst.max(verify_decomposition(&problem.relax, &problem.score, &q)?);
        let p = apply_map(&problem.relax, &q)?;
        let d = kl_divergence(&q, &p)?;
        let (i1, d2, i3) = problem.kl_split(&q)?;
        worst_split = worst_split.max((d - (i1 + d2 + i3)).abs());
    }
    out.push(check("decomposition-residual".into(), worst, 0.0, tol::INEQ_SLACK));
    out.push(check("penalty-split-identity".into(), worst_split, 0.0, tol::INEQ_SLACK));

    // A deliberately perturbed coefficient must be detected.
    let problem = WzProblem::build(instance, 0.5, None)?;
    let broken = RelaxationSpec::new(
        problem.space.clone(),
        problem.relax.map.clone(),
        problem
            .relax
            .kappa_terms()
            .iter()
            .map(|t| RatioTerm { coeff: t.coeff * 1.1, given: t.given.clone(), target: t.target.clone() })
            .collect(),
        problem.relax.nu_terms().to_vec(),
    )?;
    let mut min_residual = f64::INFINITY;
    for _ in 0..10 {
        let q = sample::joint(&problem.space, rng);
        min_residual = min_residual.min(verify_decomposition(&broken, &problem.score, &q)?);
    }
    out.push(check(
        "decomposition-detects-perturbation".into(),
        1e-6 - min_residual,
        0.0,
        0.0,
    ));
    Ok(())
}

/// The expected score must equal the independently computed weighted sum of
/// the conditional mutual information and the expected distortion.
fn score_identity_check(
    instance: &WzInstance,
    cfg: &SuiteConfig,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<CheckResult>,
) -> Result<()> {
    let mut worst = 0.0f64;
    for _ in 0..cfg.samples {
        let xi = rng.random_range(0.0..=1.0);
        let problem = WzProblem::build(instance, xi, None)?;
        let q = sample::joint(&problem.space, rng);
        let e = problem.score.expected_score(&q)?;
        let mi = conditional_mutual_information(&q, &[VAR_X], &[VAR_Y], &[VAR_U])?;
        let mut dist = 0.0f64;
        for (cell, &m) in q.mass().iter().enumerate() {
            let coords = q.space().coords(cell);
            dist += m * instance.distortion(coords[VAR_X], coords[VAR_Z]);
        }
        let reference = (1.0 - xi) * mi + xi * dist;
        worst = worst.max((e - reference).abs());
    }
    out.push(check("score-identity".into(), worst, 0.0, tol::INEQ_SLACK));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let inst = WzInstance::binary_symmetric(0.25).unwrap();
        let cfg = SuiteConfig {
            samples: 25,
            optimizer: OptimizerConfig { grid_denominator: 3, ..Default::default() },
            ..Default::default()
        };
        let results = run_suite(&inst, &cfg).unwrap();
        assert!(!results.is_empty());
        for r in &results {
            assert!(r.holds, "{} measured {} bound {} slack {}", r.name, r.measured, r.bound, r.slack);
        }
    }

    #[test]
    fn config_validation_rejects_subthreshold_penalty() {
        let inst = WzInstance::binary_symmetric(0.25).unwrap();
        let cfg = SuiteConfig { alpha: vec![1.0], ..Default::default() };
        assert!(matches!(validate_config(&inst, &cfg), Err(Error::Config(_))));
    }
}
