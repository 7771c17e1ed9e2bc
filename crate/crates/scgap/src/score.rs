//! The score-functional family: per-outcome scores built from fixed tables
//! plus signed log-marginal terms, their expectation, the cumulant generating
//! function of the score under exponential tilting, and the regularity
//! constants used by the gap bounds.
//!
//! A score spec holds terms
//! `score_p(x) = Σ_l ξ_l φ_l(x) + Σ_l μ_l ln p_{S_l}(x_{S_l}) − Σ_l η_l ln p_{T_l}(x_{T_l})`
//! where the `φ_l` are nonnegative tables and the `μ_l`, `η_l` are positive
//! coefficients attached to variable subsets.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dist::{log_tilt_normalizer, moments, tilt, AlphabetProduct, JointDist};
use crate::error::{Error, Result};

/// A fixed table term `ξ · φ(x)` with `φ ≥ 0` and real `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedTerm {
    pub coeff: f64,
    pub table: Vec<f64>,
}

/// A log-marginal term `coeff · ln p_{vars}(x_vars)` with `coeff > 0`.
/// The sign it enters the score with is decided by which list it sits in.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTerm {
    pub coeff: f64,
    pub vars: Vec<usize>,
}

/// The coefficients and index subsets defining the score family.
#[derive(Debug, Clone)]
pub struct ScoreSpec {
    space: AlphabetProduct,
    fixed_terms: Vec<FixedTerm>,
    mu_terms: Vec<MarginalTerm>,
    eta_terms: Vec<MarginalTerm>,
    // Projection tables per marginal term, precomputed once; mu first, then eta.
    projections: Vec<Vec<usize>>,
    sub_totals: Vec<usize>,
}

impl ScoreSpec {
    pub fn new(
        space: AlphabetProduct,
        fixed_terms: Vec<FixedTerm>,
        mu_terms: Vec<MarginalTerm>,
        eta_terms: Vec<MarginalTerm>,
    ) -> Result<Self> {
        for t in &fixed_terms {
            if !t.coeff.is_finite() {
                return Err(Error::BadSpec("fixed-term coefficient must be finite".into()));
            }
            if t.table.len() != space.total() {
                return Err(Error::MassLength { expected: space.total(), got: t.table.len() });
            }
            if t.table.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::BadSpec("fixed-term tables must be nonnegative and finite".into()));
            }
        }
        let mut projections = Vec::new();
        let mut sub_totals = Vec::new();
        for t in mu_terms.iter().chain(&eta_terms) {
            if !(t.coeff > 0.0) || !t.coeff.is_finite() {
                return Err(Error::BadSpec("log-marginal coefficients must be positive".into()));
            }
            projections.push(space.projection_table(&t.vars)?);
            sub_totals.push(space.subspace(&t.vars)?.total());
        }
        Ok(Self { space, fixed_terms, mu_terms, eta_terms, projections, sub_totals })
    }

    /// Empty spec: the score is identically zero.
    pub fn empty(space: AlphabetProduct) -> Self {
        Self {
            space,
            fixed_terms: Vec::new(),
            mu_terms: Vec::new(),
            eta_terms: Vec::new(),
            projections: Vec::new(),
            sub_totals: Vec::new(),
        }
    }

    pub fn space(&self) -> &AlphabetProduct {
        &self.space
    }

    pub fn fixed_terms(&self) -> &[FixedTerm] {
        &self.fixed_terms
    }

    pub fn mu_terms(&self) -> &[MarginalTerm] {
        &self.mu_terms
    }

    pub fn eta_terms(&self) -> &[MarginalTerm] {
        &self.eta_terms
    }

    /// Sum of the added log-marginal coefficients.
    pub fn mu_sum(&self) -> f64 {
        self.mu_terms.iter().map(|t| t.coeff).sum()
    }

    /// Sum of the subtracted log-marginal coefficients.
    pub fn eta_sum(&self) -> f64 {
        self.eta_terms.iter().map(|t| t.coeff).sum()
    }

    /// Largest fixed-table value across all terms and outcomes (0 if none).
    pub fn phi_max(&self) -> f64 {
        self.fixed_terms
            .iter()
            .flat_map(|t| t.table.iter().copied())
            .fold(0.0f64, f64::max)
    }

    /// Continuity coefficient `max{φ_max Σ|ξ_l|, Σμ_l, Ση_l}`.
    pub fn k_prime(&self) -> f64 {
        let xi_abs: f64 = self.fixed_terms.iter().map(|t| t.coeff.abs()).sum();
        (self.phi_max() * xi_abs).max(self.mu_sum()).max(self.eta_sum())
    }

    /// The score table `score_p(x)` for every outcome. Outcomes where a
    /// required marginal vanishes get a `±inf` sentinel (`-inf` from an added
    /// term, `+inf` from a subtracted one, NaN if both collide).
    pub fn score_table(&self, p: &JointDist) -> Result<Vec<f64>> {
        if p.space() != &self.space {
            return Err(Error::ShapeMismatch);
        }
        let total = self.space.total();
        let mut out = vec![0.0f64; total];
        for t in &self.fixed_terms {
            for (o, &v) in out.iter_mut().zip(&t.table) {
                *o += t.coeff * v;
            }
        }
        let mut neg_inf = vec![false; total];
        let mut pos_inf = vec![false; total];
        let n_mu = self.mu_terms.len();
        for (k, t) in self.mu_terms.iter().chain(&self.eta_terms).enumerate() {
            let proj = &self.projections[k];
            let mut marg = vec![0.0f64; self.sub_totals[k]];
            for (cell, &m) in p.mass().iter().enumerate() {
                marg[proj[cell]] += m;
            }
            let log_marg: Vec<f64> =
                marg.iter().map(|&m| if m > 0.0 { m.ln() } else { f64::NEG_INFINITY }).collect();
            let added = k < n_mu;
            let coeff = if added { t.coeff } else { -t.coeff };
            for cell in 0..total {
                let lm = log_marg[proj[cell]];
                if lm == f64::NEG_INFINITY {
                    if added {
                        neg_inf[cell] = true;
                    } else {
                        pos_inf[cell] = true;
                    }
                } else {
                    out[cell] += coeff * lm;
                }
            }
        }
        for cell in 0..total {
            match (neg_inf[cell], pos_inf[cell]) {
                (true, true) => out[cell] = f64::NAN,
                (true, false) => out[cell] = f64::NEG_INFINITY,
                (false, true) => out[cell] = f64::INFINITY,
                (false, false) => {}
            }
        }
        Ok(out)
    }

    /// Score at a single outcome.
    pub fn score_at(&self, p: &JointDist, cell: usize) -> Result<f64> {
        Ok(self.score_table(p)?[cell])
    }

    /// Expected score `E_p[score_p(X)]`. Sentinel values at zero-mass
    /// outcomes contribute nothing.
    pub fn expected_score(&self, p: &JointDist) -> Result<f64> {
        let table = self.score_table(p)?;
        let mut acc = 0.0f64;
        for (&m, &s) in p.mass().iter().zip(&table) {
            if m > 0.0 {
                debug_assert!(s.is_finite(), "score must be finite on the support");
                acc += m * s;
            }
        }
        Ok(acc)
    }

    /// Analytic upper bound on the expected score over every distribution:
    /// positive fixed terms at their maxima plus each subtracted log-marginal
    /// at its entropy cap.
    pub fn expected_score_cap(&self) -> f64 {
        let fixed: f64 = self
            .fixed_terms
            .iter()
            .filter(|t| t.coeff > 0.0)
            .map(|t| t.coeff * t.table.iter().copied().fold(0.0f64, f64::max))
            .sum();
        let eta: f64 = self
            .eta_terms
            .iter()
            .map(|t| {
                let card: usize = t.vars.iter().map(|&v| self.space.sizes()[v]).product();
                t.coeff * (card as f64).ln()
            })
            .sum();
        fixed + eta
    }

    /// Existence window for the score CGF; an infinite endpoint means the
    /// corresponding coefficient sum is zero.
    pub fn cgf_window(&self) -> (f64, f64) {
        let mu = self.mu_sum();
        let eta = self.eta_sum();
        (
            if mu > 0.0 { -1.0 / mu } else { f64::NEG_INFINITY },
            if eta > 0.0 { 1.0 / eta } else { f64::INFINITY },
        )
    }

    /// Half-width window on which the CGF is three times differentiable.
    pub fn cgf_derivative_window(&self) -> (f64, f64) {
        let mu = self.mu_sum();
        let eta = self.eta_sum();
        (
            if mu > 0.0 { -0.5 / mu } else { f64::NEG_INFINITY },
            if eta > 0.0 { 0.5 / eta } else { f64::INFINITY },
        )
    }

    /// Cumulant generating function `ln E_p[exp{λ · score_p(X)}]`.
    ///
    /// Rejects `λ` outside [`Self::cgf_window`]; returns exactly 0 at `λ = 0`.
    pub fn cgf(&self, p: &JointDist, lambda: f64) -> Result<f64> {
        check_window(lambda, self.cgf_window(), "cgf scale")?;
        if lambda == 0.0 {
            return Ok(0.0);
        }
        let table = self.score_table(p)?;
        log_tilt_normalizer(p, &table, lambda)
    }

    /// First three derivatives of the CGF at `λ`: the mean, variance, and
    /// third central moment of the score under the λ-tilted distribution.
    pub fn cgf_derivatives(&self, p: &JointDist, lambda: f64) -> Result<(f64, f64, f64)> {
        check_window(lambda, self.cgf_derivative_window(), "cgf derivative scale")?;
        let table = self.score_table(p)?;
        let tilted = tilt(p, &table, lambda)?;
        let m = moments(&tilted, &table, 3)?;
        Ok((m.mean, m.variance.unwrap(), m.third_central.unwrap()))
    }
}

pub(crate) fn check_window(value: f64, (lo, hi): (f64, f64), what: &str) -> Result<()> {
    // A hair of slack keeps boundary values computed as 1/(α−s) admissible.
    const EDGE: f64 = 1e-12;
    if value < lo - EDGE || value > hi + EDGE || value.is_nan() {
        return Err(Error::Domain(format!("{what} {value} outside window [{lo}, {hi}]")));
    }
    Ok(())
}

/// Regularity constants of a score spec over an enumerated feasible grid.
#[derive(Debug, Clone, Serialize)]
pub struct RegularityConstants {
    /// Grid maximum of the expected score; a lower estimate of the true
    /// uniform bound, tagged with the resolution it was computed at.
    pub k: f64,
    /// Continuity coefficient `max{φ_max Σ|ξ_l|, Σμ_l, Ση_l}`.
    pub k_prime: f64,
    pub phi_max: f64,
    pub mu_sum: f64,
    pub eta_sum: f64,
    /// Denominator of the grid the estimate of `k` came from.
    pub grid_denominator: u32,
}

/// Compute regularity constants, maximizing the expected score over the
/// supplied feasible candidates.
pub fn regularity_constants<'a, I>(
    spec: &ScoreSpec,
    candidates: I,
    grid_denominator: u32,
) -> Result<RegularityConstants>
where
    I: IntoIterator<Item = &'a JointDist>,
{
    let mut k = f64::NEG_INFINITY;
    let mut any = false;
    for p in candidates {
        any = true;
        let v = spec.expected_score(p)?;
        if v > k {
            k = v;
        }
    }
    if !any {
        return Err(Error::EmptyGrid);
    }
    Ok(RegularityConstants {
        k,
        k_prime: spec.k_prime(),
        phi_max: spec.phi_max(),
        mu_sum: spec.mu_sum(),
        eta_sum: spec.eta_sum(),
        grid_denominator,
    })
}

// --- serialization -----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct FixedTermRepr {
    coeff: f64,
    table: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MarginalTermRepr {
    coeff: f64,
    vars: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ScoreSpecRepr {
    names: Vec<String>,
    sizes: Vec<usize>,
    fixed_terms: Vec<FixedTermRepr>,
    mu_terms: Vec<MarginalTermRepr>,
    eta_terms: Vec<MarginalTermRepr>,
}

fn sorted_labels(space: &AlphabetProduct, vars: &[usize]) -> Vec<String> {
    let mut labels: Vec<String> = vars.iter().map(|&v| space.names()[v].clone()).collect();
    labels.sort();
    labels
}

impl Serialize for ScoreSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let term = |t: &MarginalTerm| MarginalTermRepr {
            coeff: t.coeff,
            vars: sorted_labels(&self.space, &t.vars),
        };
        ScoreSpecRepr {
            names: self.space.names().to_vec(),
            sizes: self.space.sizes().to_vec(),
            fixed_terms: self
                .fixed_terms
                .iter()
                .map(|t| FixedTermRepr { coeff: t.coeff, table: t.table.clone() })
                .collect(),
            mu_terms: self.mu_terms.iter().map(term).collect(),
            eta_terms: self.eta_terms.iter().map(term).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ScoreSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = ScoreSpecRepr::deserialize(deserializer)?;
        let space = AlphabetProduct::new(repr.names, repr.sizes).map_err(D::Error::custom)?;
        let resolve = |terms: Vec<MarginalTermRepr>| -> Result<Vec<MarginalTerm>> {
            terms
                .into_iter()
                .map(|t| {
                    let labels: Vec<&str> = t.vars.iter().map(String::as_str).collect();
                    Ok(MarginalTerm { coeff: t.coeff, vars: space.resolve_vars(&labels)? })
                })
                .collect()
        };
        let mu = resolve(repr.mu_terms).map_err(D::Error::custom)?;
        let eta = resolve(repr.eta_terms).map_err(D::Error::custom)?;
        let fixed = repr
            .fixed_terms
            .into_iter()
            .map(|t| FixedTerm { coeff: t.coeff, table: t.table })
            .collect();
        ScoreSpec::new(space, fixed, mu, eta).map_err(D::Error::custom)
    }
}
