//! Closed-form evaluation of the relaxation gap bounds and the blocklength
//! outer-bound gap: the Pinsker-based baseline bound, the curvature bound
//! that improves on it for large penalties, its decoder-side-information
//! specialization, and the `O(1/√n)` converse gap with its optimized penalty
//! weight.

use serde::Serialize;

use crate::error::{Error, Result};

/// Pinsker-based baseline gap bound
/// `K′ √(2K/α) · ln(√(α/2K) · e · |X̲|)` in nats.
///
/// `k` is a uniform bound on the expected score, `k_prime` the continuity
/// coefficient, `total_alphabet` the number of joint cells.
pub fn baseline_gap_bound(k: f64, k_prime: f64, alpha: f64, total_alphabet: usize) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("penalty weight {alpha} must be positive")));
    }
    if !(k > 0.0) {
        return Err(Error::Domain(format!("score bound {k} must be positive")));
    }
    if !(k_prime >= 0.0) {
        return Err(Error::Domain(format!("continuity coefficient {k_prime} must be nonnegative")));
    }
    let delta = (2.0 * k / alpha).sqrt();
    Ok(k_prime * delta * (std::f64::consts::E * total_alphabet as f64 / delta).ln())
}

/// Curvature gap bound `(1/(α−s)) · [ρ/2 + c/(α−s)]`.
///
/// `subtract` is the coefficient sum `s` removed from the penalty weight and
/// `threshold` the validity floor the caller derived for its side
/// (`2Ση + Σν` for maximization, `2Σμ + Σκ` for minimization).
pub fn curvature_gap_bound(
    rho: f64,
    c: f64,
    alpha: f64,
    subtract: f64,
    threshold: f64,
) -> Result<f64> {
    if !(rho >= 0.0) || !(c >= 0.0) {
        return Err(Error::Domain("curvature constants must be nonnegative".into()));
    }
    if !(alpha > threshold) {
        return Err(Error::Domain(format!(
            "penalty weight {alpha} must exceed the validity threshold {threshold}"
        )));
    }
    if !(alpha > subtract) {
        return Err(Error::Domain(format!(
            "penalty weight {alpha} must exceed the subtracted coefficient sum {subtract}"
        )));
    }
    let denom = alpha - subtract;
    Ok((rho / 2.0 + c / denom) / denom)
}

/// Decoder-side-information specialization of the curvature bound at weight
/// `xi ∈ [0,1]`: `(1/(α−ξ̄)) · [ρ⁻(ξ)/2 + c⁻(ξ)/(α−ξ̄)]`, valid for
/// `α > 5ξ̄` with `ξ̄ = 1 − ξ`.
pub fn wz_gap_bound(rho_minus: f64, c_minus: f64, alpha: f64, xi: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::Domain(format!("weight {xi} outside [0, 1]")));
    }
    let xibar = 1.0 - xi;
    curvature_gap_bound(rho_minus, c_minus, alpha, xibar, 5.0 * xibar)
}

/// Validity floor of the maximization-side curvature bound.
pub fn curvature_threshold_max(eta_sum: f64, nu_sum: f64) -> f64 {
    2.0 * eta_sum + nu_sum
}

/// Validity floor of the minimization-side curvature bound.
pub fn curvature_threshold_min(mu_sum: f64, kappa_sum: f64) -> f64 {
    2.0 * mu_sum + kappa_sum
}

/// The blocklength outer-bound gap quantities at error level `epsilon`.
#[derive(Debug, Clone, Serialize)]
pub struct ConverseGap {
    pub n: u64,
    pub epsilon: f64,
    /// Penalty weight the gap was evaluated at (the optimized weight when
    /// none was supplied).
    pub alpha: f64,
    /// Gap at `alpha`.
    pub upsilon: f64,
    /// The optimized penalty weight `√(ρn / (2 ln(1/(1−ε)))) + 1`.
    pub alpha_star: f64,
    /// Gap at the optimized weight:
    /// `√((2ρ/n) ln(1/(1−ε))) + (1/n)(2c/ρ + 1) ln(1/(1−ε))`.
    pub upsilon_star: f64,
    /// Comparison gap `√((c/n) ln(5/(1−ε))) + (2/n) ln(5/(1−ε))` for a
    /// user-supplied constant; absent unless explicitly provided.
    pub upsilon_prime: Option<f64>,
}

/// Gap at an explicit penalty weight:
/// `(1/(α−1))[ρ/2 + c/(α−1)] + (α/n) ln(1/(1−ε))`.
pub fn upsilon_at(rho: f64, c: f64, n: u64, epsilon: f64, alpha: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if n < 1 {
        return Err(Error::Domain("blocklength must be at least 1".into()));
    }
    if !(alpha > 1.0) {
        return Err(Error::Domain(format!("penalty weight {alpha} must exceed 1")));
    }
    let log_term = (1.0 / (1.0 - epsilon)).ln();
    let denom = alpha - 1.0;
    Ok((rho / 2.0 + c / denom) / denom + alpha / n as f64 * log_term)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("error level {epsilon} outside (0, 1)")));
    }
    Ok(())
}

/// Evaluate the converse gap quantities from the minimization-side curvature
/// constants (maxima over the weight grid).
///
/// An explicit `alpha` must exceed 5. The comparison constant is a required
/// input for the comparison gap; it is never defaulted.
pub fn converse_gap(
    rho: f64,
    c: f64,
    n: u64,
    epsilon: f64,
    alpha: Option<f64>,
    comparison_constant: Option<f64>,
) -> Result<ConverseGap> {
    check_epsilon(epsilon)?;
    if n < 1 {
        return Err(Error::Domain("blocklength must be at least 1".into()));
    }
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("curvature constant {rho} must be positive")));
    }
    if !(c >= 0.0) {
        return Err(Error::Domain(format!("curvature constant {c} must be nonnegative")));
    }
    if let Some(a) = alpha {
        if !(a > 5.0) {
            return Err(Error::Domain(format!("explicit penalty weight {a} must exceed 5")));
        }
    }
    let log_term = (1.0 / (1.0 - epsilon)).ln();
    let nf = n as f64;
    let alpha_star = (rho * nf / (2.0 * log_term)).sqrt() + 1.0;
    let upsilon_star =
        (2.0 * rho / nf * log_term).sqrt() + (2.0 * c / rho + 1.0) / nf * log_term;
    let eval_alpha = alpha.unwrap_or(alpha_star);
    let upsilon = upsilon_at(rho, c, n, epsilon, eval_alpha)?;
    let upsilon_prime = match comparison_constant {
        Some(cc) => {
            if !(cc > 0.0) {
                return Err(Error::Domain(format!(
                    "comparison constant {cc} must be positive"
                )));
            }
            let log5 = (5.0 / (1.0 - epsilon)).ln();
            Some((cc / nf * log5).sqrt() + 2.0 / nf * log5)
        }
        None => None,
    };
    Ok(ConverseGap {
        n,
        epsilon,
        alpha: eval_alpha,
        upsilon,
        alpha_star,
        upsilon_star,
        upsilon_prime,
    })
}

/// A measured relaxation gap against the closed-form bounds.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub instance: String,
    pub alpha: f64,
    pub measured_gap: f64,
    pub baseline_bound: Option<f64>,
    pub curvature_bound: Option<f64>,
    pub k: f64,
    pub k_prime: f64,
    pub total_alphabet: usize,
    pub rho: f64,
    pub c: f64,
    pub mu_sum: f64,
    pub eta_sum: f64,
    pub kappa_sum: f64,
    pub nu_sum: f64,
    pub holds_baseline: Option<bool>,
    pub holds_curvature: Option<bool>,
    pub slack: f64,
}

impl BoundReport {
    /// CSV row in the batch-report column order.
    pub fn csv_row(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        fn optb(v: Option<bool>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{}",
            self.instance,
            self.alpha,
            self.measured_gap,
            opt(self.baseline_bound),
            opt(self.curvature_bound),
            optb(self.holds_baseline),
            optb(self.holds_curvature),
        )
    }

    pub const CSV_HEADER: &'static str =
        "instance,alpha,measured_gap,prop1,prop2,holds1,holds2";
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_handvalue() {
        // K = 1, K′ = 1, α = 8, |X̲| = 16 → 0.5·ln(32e).
        let b = baseline_gap_bound(1.0, 1.0, 8.0, 16).unwrap();
        let expect = 0.5 * (32.0 * std::f64::consts::E).ln();
        assert!((b - expect).abs() < 1e-12);
        assert!((b - 2.2329).abs() < 1e-4);
        // Zero continuity coefficient kills the bound.
        assert_eq!(baseline_gap_bound(1.0, 0.0, 8.0, 16).unwrap(), 0.0);
    }

    #[test]
    fn baseline_decreasing_for_large_alpha() {
        let mut prev = f64::INFINITY;
        let mut alpha = 8.0;
        while alpha <= 1_000_000.0 {
            let b = baseline_gap_bound(1.0, 1.0, alpha, 16).unwrap();
            assert!(b < prev);
            prev = b;
            alpha *= 2.0;
        }
    }

    #[test]
    fn curvature_handvalue_and_limits() {
        assert_eq!(curvature_gap_bound(0.0, 0.0, 5.0, 1.0, 1.0).unwrap(), 0.0);
        let b = curvature_gap_bound(1.0, 1.0, 5.0, 1.0, 1.0).unwrap();
        assert!((b - 0.1875).abs() < 1e-15);
        // Strictly decreasing in alpha; (α−s)·bound → ρ/2.
        let mut prev = f64::INFINITY;
        for &a in &[3.0, 6.0, 12.0, 100.0, 10_000.0] {
            let b = curvature_gap_bound(1.0, 1.0, a, 1.0, 1.0).unwrap();
            assert!(b < prev);
            prev = b;
        }
        let a = 1e9;
        let b = curvature_gap_bound(1.0, 1.0, a, 1.0, 1.0).unwrap();
        assert!((b * (a - 1.0) - 0.5).abs() < 1e-6);
        // Homogeneity: doubling both constants doubles the bound.
        let b1 = curvature_gap_bound(1.0, 1.0, 7.0, 1.0, 1.0).unwrap();
        let b2 = curvature_gap_bound(2.0, 2.0, 7.0, 1.0, 1.0).unwrap();
        assert!((b2 - 2.0 * b1).abs() < 1e-15);
    }

    #[test]
    fn curvature_threshold_rejection() {
        assert!(matches!(
            curvature_gap_bound(1.0, 1.0, 5.0, 1.0, 5.0),
            Err(Error::Domain(_))
        ));
        assert!(curvature_gap_bound(1.0, 1.0, 5.0001, 1.0, 5.0).is_ok());
    }

    #[test]
    fn wz_bound_handvalues() {
        // ξ = 0: threshold α > 5, subtract 1.
        let b = wz_gap_bound(1.0, 1.0, 6.0, 0.0).unwrap();
        assert!((b - 0.14).abs() < 1e-15);
        // ξ = 1: threshold α > 0, bound = (ρ/2)/α + c/α².
        let b = wz_gap_bound(1.0, 1.0, 2.0, 1.0).unwrap();
        assert!((b - (0.25 + 0.25)).abs() < 1e-15);
        assert!(matches!(wz_gap_bound(1.0, 1.0, 4.9, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn wz_threshold_matches_generic() {
        // With μ_sum = 2ξ̄, κ_sum = ξ̄ the generic minimization threshold is 5ξ̄.
        for &xi in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            let xibar: f64 = 1.0 - xi;
            let general = curvature_threshold_min(2.0 * xibar, xibar);
            assert_eq!(general, 5.0 * xibar);
        }
    }

    #[test]
    fn converse_gap_handvalues() {
        let g = converse_gap(1.0, 1.0, 10_000, 0.5, None, Some(1.0)).unwrap();
        let ln2 = std::f64::consts::LN_2;
        let alpha_expect = (10_000.0 / (2.0 * ln2)).sqrt() + 1.0;
        assert!((g.alpha_star - alpha_expect).abs() < 1e-12 * alpha_expect);
        assert!((g.alpha_star - 85.93).abs() < 5e-3);
        let star_expect = (2.0 / 10_000.0 * ln2).sqrt() + 3.0 / 10_000.0 * ln2;
        assert!((g.upsilon_star - star_expect).abs() < 1e-12 * star_expect);
        assert!((g.upsilon_star - 0.011983).abs() < 1e-6);
        // Defaulted alpha evaluates at the optimized weight and agrees with
        // the closed form.
        assert!((g.upsilon - g.upsilon_star).abs() < 1e-12);
        let ln10 = (10.0f64).ln();
        let prime_expect = (ln10 / 10_000.0).sqrt() + 2.0 / 10_000.0 * ln10;
        let p = g.upsilon_prime.unwrap();
        assert!((p - prime_expect).abs() < 1e-12 * prime_expect);
        assert!((p - 0.015635).abs() < 1e-6);
    }

    #[test]
    fn converse_gap_scaling_and_validation() {
        let n = 1_000_000u64;
        let a = converse_gap(1.0, 1.0, n, 0.5, None, None).unwrap();
        let b = converse_gap(1.0, 1.0, 4 * n, 0.5, None, None).unwrap();
        let ratio = b.upsilon_star / a.upsilon_star;
        assert!((ratio - 0.5).abs() < 0.01, "ratio {ratio}");

        assert!(matches!(
            converse_gap(1.0, 1.0, 100, 1.5, None, None),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            converse_gap(1.0, 1.0, 100, 0.5, Some(4.0), None),
            Err(Error::Domain(_))
        ));
        // Comparison constant is never defaulted.
        let g = converse_gap(1.0, 1.0, 100, 0.5, None, None).unwrap();
        assert!(g.upsilon_prime.is_none());
    }

    #[test]
    fn optimized_weight_minimizes_on_log_grid() {
        let (rho, c, n, eps) = (1.0, 1.0, 10_000u64, 0.5);
        let g = converse_gap(rho, c, n, eps, None, None).unwrap();
        for k in -10..=10 {
            let alpha = g.alpha_star * (1.25f64).powi(k);
            if alpha <= 5.0 {
                continue;
            }
            let u = upsilon_at(rho, c, n, eps, alpha).unwrap();
            assert!(
                g.upsilon_star <= u + 1e-12 * g.upsilon_star.abs(),
                "alpha {alpha}: {u} < {}",
                g.upsilon_star
            );
        }
    }
}
