//! Decoder-side-information rate-distortion instances: builds the score
//! family, the relaxation, and both feasible sets for a source pair with a
//! distortion table; computes the weighted rate-distortion values, their
//! KL-penalized relaxations, the gap between them, and the region polyline
//! with an optional outer-bound shift.
//!
//! Variable layout is always `[U, X, Y, Z]`: auxiliary, source, side
//! information, reproduction.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dist::{conditional_mutual_information, kl_divergence, AlphabetProduct, JointDist};
use crate::error::{Error, Result};
use crate::optimize::{
    composition_count, extremize_penalized, extremize_score, for_each_composition,
    CandidateSource, CurvatureConstants, ExtremumResult, Method, OptimizerConfig, Sense,
};
use crate::relaxation::{
    apply_map, Constraint, FeasibleKind, FeasibleSet, ProjectionMap, RatioTerm, RelaxationSpec,
    WzComposeMap, PREDICATE_TOL,
};
use crate::score::{FixedTerm, MarginalTerm, RegularityConstants, ScoreSpec};

pub const VAR_U: usize = 0;
pub const VAR_X: usize = 1;
pub const VAR_Y: usize = 2;
pub const VAR_Z: usize = 3;

/// A source pair with decoder side information and a distortion table.
#[derive(Debug, Clone)]
pub struct WzInstance {
    p_xy: JointDist,
    /// Distortion d(x,z), row-major over x then z.
    distortion: Vec<f64>,
    z_card: usize,
    /// Auxiliary-alphabet cap of the constrained family (default `|X|`).
    pub u_card_tilde: usize,
    /// Auxiliary-alphabet cap of the relaxed family (default `|X||Y||Z|`).
    pub u_card_star: usize,
}

impl WzInstance {
    pub fn new(
        p_xy: &JointDist,
        distortion_rows: &[Vec<f64>],
        z_card: usize,
        u_card_tilde: Option<usize>,
        u_card_star: Option<usize>,
    ) -> Result<Self> {
        if p_xy.space().num_vars() != 2 {
            return Err(Error::Config("the source marginal must be over two variables".into()));
        }
        let x_card = p_xy.space().sizes()[0];
        let y_card = p_xy.space().sizes()[1];
        if z_card == 0 {
            return Err(Error::EmptyAlphabet("Z".into()));
        }
        if distortion_rows.len() != x_card {
            return Err(Error::Config(format!(
                "distortion table has {} rows, expected {x_card}",
                distortion_rows.len()
            )));
        }
        let mut distortion = Vec::with_capacity(x_card * z_card);
        for row in distortion_rows {
            if row.len() != z_card {
                return Err(Error::Config(format!(
                    "distortion row has {} entries, expected {z_card}",
                    row.len()
                )));
            }
            for &d in row {
                if !(d >= 0.0) || !d.is_finite() {
                    return Err(Error::Config(format!("distortion value {d} must be nonnegative")));
                }
                distortion.push(d);
            }
        }
        // Canonical labels so marginals of the joint compare against p_xy.
        let space = AlphabetProduct::new(vec!["X", "Y"], vec![x_card, y_card])?;
        let p_xy = JointDist::new(space, p_xy.mass().to_vec())?;
        Ok(Self {
            p_xy,
            distortion,
            z_card,
            u_card_tilde: u_card_tilde.unwrap_or(x_card),
            u_card_star: u_card_star.unwrap_or(x_card * y_card * z_card),
        })
    }

    /// Doubly symmetric binary source with the given crossover probability
    /// and Hamming distortion.
    pub fn binary_symmetric(crossover: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&crossover) {
            return Err(Error::Config(format!("crossover {crossover} outside [0, 1]")));
        }
        let space = AlphabetProduct::new(vec!["X", "Y"], vec![2, 2])?;
        let c = crossover / 2.0;
        let p = JointDist::new(space, vec![0.5 - c, c, c, 0.5 - c])?;
        Self::new(&p, &hamming_distortion(2, 2), 2, None, None)
    }

    pub fn p_xy(&self) -> &JointDist {
        &self.p_xy
    }

    pub fn x_card(&self) -> usize {
        self.p_xy.space().sizes()[0]
    }

    pub fn y_card(&self) -> usize {
        self.p_xy.space().sizes()[1]
    }

    pub fn z_card(&self) -> usize {
        self.z_card
    }

    pub fn distortion(&self, x: usize, z: usize) -> f64 {
        self.distortion[x * self.z_card + z]
    }

    pub fn max_distortion(&self) -> f64 {
        self.distortion.iter().copied().fold(0.0f64, f64::max)
    }

    /// The four-variable space at a given auxiliary cardinality.
    pub fn space(&self, u_card: usize) -> Result<AlphabetProduct> {
        AlphabetProduct::new(
            vec!["U", "X", "Y", "Z"],
            vec![u_card, self.x_card(), self.y_card(), self.z_card],
        )
    }

    /// Analytic cap on the expected score: `ξ·d_max + ξ̄·ln|X|`.
    pub fn score_cap(&self, xi: f64) -> f64 {
        xi * self.max_distortion() + (1.0 - xi) * (self.x_card() as f64).ln()
    }
}

/// Hamming distortion rows for an `x_card × z_card` table.
pub fn hamming_distortion(x_card: usize, z_card: usize) -> Vec<Vec<f64>> {
    (0..x_card)
        .map(|x| (0..z_card).map(|z| if x == z { 0.0 } else { 1.0 }).collect())
        .collect()
}

/// The assembled optimization problem at one weight `xi`.
#[derive(Debug, Clone)]
pub struct WzProblem {
    pub space: AlphabetProduct,
    pub score: ScoreSpec,
    pub relax: RelaxationSpec,
    /// The constrained family (fixed source marginal plus both Markov chains).
    pub constrained: FeasibleSet,
    /// The relaxed family (support inclusion plus the cardinality cap).
    pub relaxed: FeasibleSet,
    pub xi: f64,
}

impl WzProblem {
    /// Build score, relaxation, and both feasible sets at weight `xi`.
    ///
    /// Both families are realized on one shared space whose auxiliary
    /// cardinality defaults to the constrained cap, embedding the smaller
    /// auxiliary alphabet wherever the two caps differ.
    pub fn build(instance: &WzInstance, xi: f64, u_card: Option<usize>) -> Result<Self> {
        if !(0.0..=1.0).contains(&xi) {
            return Err(Error::Domain(format!("weight {xi} outside [0, 1]")));
        }
        let u_card = u_card.unwrap_or(instance.u_card_tilde);
        let space = instance.space(u_card)?;
        let xibar = 1.0 - xi;
        let sizes = space.sizes();

        let mut table = vec![0.0f64; space.total()];
        for (cell, slot) in table.iter_mut().enumerate() {
            let coords = space.coords(cell);
            *slot = instance.distortion(coords[VAR_X], coords[VAR_Z]);
        }
        let fixed = vec![FixedTerm { coeff: xi, table }];
        let (mu, eta, kappa, nu) = if xibar > 0.0 {
            (
                vec![
                    MarginalTerm { coeff: xibar, vars: vec![VAR_U, VAR_X, VAR_Y] },
                    MarginalTerm { coeff: xibar, vars: vec![VAR_Y] },
                ],
                vec![
                    MarginalTerm { coeff: xibar, vars: vec![VAR_U, VAR_Y] },
                    MarginalTerm { coeff: xibar, vars: vec![VAR_X, VAR_Y] },
                ],
                vec![RatioTerm { coeff: xibar, given: vec![VAR_Y], target: vec![VAR_U] }],
                vec![RatioTerm { coeff: xibar, given: vec![VAR_X, VAR_Y], target: vec![VAR_U] }],
            )
        } else {
            (vec![], vec![], vec![], vec![])
        };
        let score = ScoreSpec::new(space.clone(), fixed, mu, eta)?;

        let map = ProjectionMap::WzCompose(WzComposeMap {
            u: VAR_U,
            x: VAR_X,
            y: VAR_Y,
            z: VAR_Z,
            p_xy: instance.p_xy.clone(),
        });
        let relax = RelaxationSpec::new(space.clone(), map.clone(), kappa, nu)?;

        let constrained = FeasibleSet::new(
            FeasibleKind::Constrained,
            vec![
                Constraint::MarginalEquals {
                    vars: vec![VAR_X, VAR_Y],
                    target: instance.p_xy.clone(),
                    tol: PREDICATE_TOL,
                },
                Constraint::MarkovChain {
                    a: vec![VAR_U],
                    b: vec![VAR_X],
                    c: vec![VAR_Y],
                    tol: PREDICATE_TOL,
                },
                Constraint::MarkovChain {
                    a: vec![VAR_X],
                    b: vec![VAR_U, VAR_Y],
                    c: vec![VAR_Z],
                    tol: PREDICATE_TOL,
                },
                Constraint::CardinalityCap { var: VAR_U, max: instance.u_card_tilde },
            ],
        );
        let relaxed = FeasibleSet::new(
            FeasibleKind::Relaxed,
            vec![
                Constraint::SupportIncludesMapped { map },
                Constraint::CardinalityCap { var: VAR_U, max: instance.u_card_star },
            ],
        );
        debug_assert_eq!(sizes[VAR_U], u_card);
        Ok(Self { space, score, relax, constrained, relaxed, xi })
    }

    /// Independently computed split of the penalty divergence:
    /// `D(q‖map(q)) = I(Y;U|X) + D(q_XY‖p_XY) + I(X;Z|U,Y)`.
    pub fn kl_split(&self, q: &JointDist) -> Result<(f64, f64, f64)> {
        let i_yu_x = conditional_mutual_information(q, &[VAR_Y], &[VAR_X], &[VAR_U])?;
        let q_xy = q.marginal(&[VAR_X, VAR_Y])?;
        let p_xy = match &self.relax.map {
            ProjectionMap::WzCompose(m) => &m.p_xy,
            ProjectionMap::Identity => return Err(Error::Config("not a compose problem".into())),
        };
        let d_xy = kl_divergence(&q_xy, p_xy)?;
        let i_xz_uy = conditional_mutual_information(q, &[VAR_X], &[VAR_U, VAR_Y], &[VAR_Z])?;
        Ok((i_yu_x, d_xy, i_xz_uy))
    }
}

/// Compose a joint from factor rows: `q(u,x,y,z) = w_ux[x][u]·p(x,y)·w_zuy[u·|Y|+y][z]`.
pub(crate) fn compose_joint(
    space: &AlphabetProduct,
    p_xy: &JointDist,
    rows_ux: &[Vec<f64>],
    rows_zuy: &[Vec<f64>],
) -> Result<JointDist> {
    let sizes = space.sizes();
    let (u_card, x_card, y_card, z_card) = (sizes[0], sizes[1], sizes[2], sizes[3]);
    let mut mass = vec![0.0f64; space.total()];
    let mut cell = 0usize;
    for u in 0..u_card {
        for x in 0..x_card {
            for y in 0..y_card {
                let prefix = rows_ux[x][u] * p_xy.prob(x * y_card + y);
                let zrow = &rows_zuy[u * y_card + y];
                for z in 0..z_card {
                    mass[cell] = prefix * zrow[z];
                    let _ = z;
                    cell += 1;
                }
            }
        }
    }
    JointDist::new(space.clone(), mass)
}

/// Candidate source for the constrained family, parameterized by the factor
/// tables so the fixed marginal and both Markov chains hold by construction.
#[derive(Debug, Clone)]
pub struct WzConstrainedSource {
    space: AlphabetProduct,
    p_xy: JointDist,
}

impl WzConstrainedSource {
    pub fn new(instance: &WzInstance, u_card: Option<usize>) -> Result<Self> {
        let space = instance.space(u_card.unwrap_or(instance.u_card_tilde))?;
        Ok(Self { space, p_xy: instance.p_xy.clone() })
    }

    fn dims(&self) -> (usize, usize, usize, usize) {
        let s = self.space.sizes();
        (s[0], s[1], s[2], s[3])
    }
}

impl CandidateSource for WzConstrainedSource {
    fn space(&self) -> &AlphabetProduct {
        &self.space
    }

    fn count_estimate(&self, n: u32) -> u128 {
        let (u, x, y, z) = self.dims();
        let per_ux = composition_count(n, u);
        let per_zuy = composition_count(n, z);
        let mut acc: u128 = 1;
        for _ in 0..x {
            acc = acc.saturating_mul(per_ux);
        }
        for _ in 0..(u * y) {
            acc = acc.saturating_mul(per_zuy);
        }
        acc
    }

    fn for_each(&self, n: u32, f: &mut dyn FnMut(&JointDist) -> Result<()>) -> Result<()> {
        let (u, x, y, z) = self.dims();
        let denom = n as f64;
        let row_options = |k: usize| -> Result<Vec<Vec<f64>>> {
            let mut opts = Vec::new();
            for_each_composition(n, k, &mut |counts| {
                opts.push(counts.iter().map(|&c| c as f64 / denom).collect());
                Ok(())
            })?;
            Ok(opts)
        };
        let opts_u = row_options(u)?;
        let opts_z = row_options(z)?;
        let num_rows = x + u * y;
        let radix: Vec<usize> =
            (0..num_rows).map(|r| if r < x { opts_u.len() } else { opts_z.len() }).collect();

        let mut idx = vec![0usize; num_rows];
        let mut rows_ux = vec![opts_u[0].clone(); x];
        let mut rows_zuy = vec![opts_z[0].clone(); u * y];
        loop {
            for r in 0..x {
                rows_ux[r] = opts_u[idx[r]].clone();
            }
            for r in 0..(u * y) {
                rows_zuy[r] = opts_z[idx[x + r]].clone();
            }
            let q = compose_joint(&self.space, &self.p_xy, &rows_ux, &rows_zuy)?;
            f(&q)?;
            // Odometer increment, last row fastest.
            let mut pos = num_rows;
            loop {
                if pos == 0 {
                    return Ok(());
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < radix[pos] {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }

    fn rounding_radius(&self, n: u32) -> f64 {
        let (u, _, _, z) = self.dims();
        (((u + z) as f64) / n as f64).min(2.0)
    }

    fn block_sizes(&self) -> Vec<usize> {
        let (u, x, y, z) = self.dims();
        let mut sizes = vec![u; x];
        sizes.extend(std::iter::repeat(z).take(u * y));
        sizes
    }

    fn decode(&self, blocks: &[Vec<f64>]) -> Result<JointDist> {
        let (u, x, y, _) = self.dims();
        if blocks.len() != x + u * y {
            return Err(Error::Config("wrong number of factor blocks".into()));
        }
        compose_joint(&self.space, &self.p_xy, &blocks[..x], &blocks[x..])
    }
}

/// Candidate source for the relaxed family: the joint type grid filtered by
/// the relaxed predicates, followed by every constrained grid point, so the
/// relaxed grid always contains the constrained one.
#[derive(Debug, Clone)]
pub struct WzRelaxedSource {
    constrained: WzConstrainedSource,
    relaxed: FeasibleSet,
}

impl WzRelaxedSource {
    pub fn new(problem: &WzProblem, instance: &WzInstance) -> Result<Self> {
        let u_card = problem.space.sizes()[VAR_U];
        Ok(Self {
            constrained: WzConstrainedSource::new(instance, Some(u_card))?,
            relaxed: problem.relaxed.clone(),
        })
    }
}

impl CandidateSource for WzRelaxedSource {
    fn space(&self) -> &AlphabetProduct {
        self.constrained.space()
    }

    fn count_estimate(&self, n: u32) -> u128 {
        composition_count(n, self.space().total())
            .saturating_add(self.constrained.count_estimate(n))
    }

    fn for_each(&self, n: u32, f: &mut dyn FnMut(&JointDist) -> Result<()>) -> Result<()> {
        let space = self.space().clone();
        let total = space.total();
        let denom = n as f64;
        for_each_composition(n, total, &mut |counts| {
            let mass: Vec<f64> = counts.iter().map(|&c| c as f64 / denom).collect();
            let q = JointDist::new(space.clone(), mass)?;
            if self.relaxed.contains(&q)? {
                f(&q)?;
            }
            Ok(())
        })?;
        // Constrained points are members of the relaxed family by
        // construction; no predicate re-check needed.
        self.constrained.for_each(n, f)
    }

    fn rounding_radius(&self, n: u32) -> f64 {
        (self.space().total() as f64 / n as f64).min(2.0)
    }

    fn block_sizes(&self) -> Vec<usize> {
        vec![self.space().total()]
    }

    fn decode(&self, blocks: &[Vec<f64>]) -> Result<JointDist> {
        if blocks.len() != 1 {
            return Err(Error::Config("relaxed source expects a single block".into()));
        }
        JointDist::new(self.space().clone(), blocks[0].clone())
    }
}

/// Weighted rate-distortion value: minimum expected score over the
/// constrained family via the factored parameterization.
pub fn rd_support(
    instance: &WzInstance,
    xi: f64,
    cfg: &OptimizerConfig,
    method: Method,
) -> Result<ExtremumResult> {
    let problem = WzProblem::build(instance, xi, None)?;
    let source = WzConstrainedSource::new(instance, None)?;
    let mut r = extremize_score(&problem.score, &source, Sense::Min, cfg, method)?;
    // The objective is a weighted sum of a conditional mutual information
    // and an expected distortion; tiny negative values are rounding noise.
    if r.value < 0.0 {
        if r.value < -1e-9 {
            return Err(Error::Numeric(format!("negative rate-distortion value {}", r.value)));
        }
        r.value = 0.0;
    }
    Ok(r)
}

/// KL-penalized weighted rate-distortion value: minimum of the penalized
/// score over the relaxed family. Verifies the penalty-divergence split
/// identity on the minimizer.
pub fn rd_support_penalized(
    instance: &WzInstance,
    xi: f64,
    alpha: f64,
    cfg: &OptimizerConfig,
    method: Method,
) -> Result<ExtremumResult> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("penalty weight {alpha} must be positive")));
    }
    let problem = WzProblem::build(instance, xi, None)?;
    let source = WzRelaxedSource::new(&problem, instance)?;
    let r = extremize_penalized(&problem.score, &problem.relax, &source, alpha, Sense::Min, cfg, method)?;

    let p = apply_map(&problem.relax, &r.argument)?;
    let d = kl_divergence(&r.argument, &p)?;
    let (i1, d2, i3) = problem.kl_split(&r.argument)?;
    let split = i1 + d2 + i3;
    // Absolute tolerance plus a float-noise allowance for huge penalties.
    let tol = 1e-9 * (1.0 + alpha * 1e-4);
    if d.is_finite() && (alpha * (d - split)).abs() > tol {
        return Err(Error::Numeric(format!(
            "penalty split identity residual {} at alpha {alpha}",
            (d - split).abs()
        )));
    }
    Ok(r)
}

/// Per-weight relaxation gap.
#[derive(Debug, Clone, Serialize)]
pub struct GapPoint {
    pub xi: f64,
    pub rd: f64,
    pub rd_penalized: f64,
    pub gap: f64,
    /// Sum of the two oracle certificates.
    pub certified_gap: f64,
}

/// Relaxation gaps over a weight grid plus their maximum.
///
/// Requires `alpha > 5` so the uniform curvature bound applies across the
/// whole weight range.
pub fn relaxation_gap(
    instance: &WzInstance,
    alpha: f64,
    xi_grid: &[f64],
    cfg: &OptimizerConfig,
) -> Result<(Vec<GapPoint>, f64)> {
    if !(alpha > 5.0) {
        return Err(Error::Domain(format!(
            "penalty weight {alpha} must exceed 5 for the uniform bound"
        )));
    }
    let mut points = Vec::with_capacity(xi_grid.len());
    let mut max_gap = f64::NEG_INFINITY;
    for &xi in xi_grid {
        let rd = rd_support(instance, xi, cfg, Method::Oracle)?;
        let pen = rd_support_penalized(instance, xi, alpha, cfg, Method::Oracle)?;
        let gap = rd.value - pen.value;
        max_gap = max_gap.max(gap);
        points.push(GapPoint {
            xi,
            rd: rd.value,
            rd_penalized: pen.value,
            gap,
            certified_gap: rd.certified_gap + pen.certified_gap,
        });
    }
    Ok((points, max_gap))
}

/// Minimization-side curvature constants of an instance at one weight.
///
/// `alpha_min` caps the tilt grids when a coefficient sum vanishes (at
/// `xi = 1` both windows are unbounded); it must exceed both ratio sums.
pub fn wz_curvature(
    instance: &WzInstance,
    xi: f64,
    cfg: &OptimizerConfig,
    lambda_samples: usize,
    alpha_min: f64,
) -> Result<CurvatureConstants> {
    let problem = WzProblem::build(instance, xi, None)?;
    let source = WzConstrainedSource::new(instance, None)?;
    let nu = problem.relax.nu_sum();
    let kappa = problem.relax.kappa_sum();
    if !(alpha_min > nu) || !(alpha_min > kappa) {
        return Err(Error::Domain(format!(
            "tilt cap requires alpha_min {alpha_min} above both ratio sums"
        )));
    }
    crate::optimize::curvature_constants(
        &problem.score,
        &source,
        cfg,
        lambda_samples,
        Some(1.0 / (alpha_min - nu)),
        Some(1.0 / (alpha_min - kappa)),
    )
}

/// Regularity constants of an instance at one weight, with the score bound
/// taken over the constrained grid.
pub fn wz_regularity(
    instance: &WzInstance,
    xi: f64,
    cfg: &OptimizerConfig,
) -> Result<RegularityConstants> {
    let problem = WzProblem::build(instance, xi, None)?;
    let source = WzConstrainedSource::new(instance, None)?;
    let max = extremize_score(&problem.score, &source, Sense::Max, cfg, Method::Oracle)?;
    Ok(RegularityConstants {
        k: max.value,
        k_prime: problem.score.k_prime(),
        phi_max: problem.score.phi_max(),
        mu_sum: problem.score.mu_sum(),
        eta_sum: problem.score.eta_sum(),
        grid_denominator: cfg.grid_denominator,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionKind {
    #[serde(rename = "INNER_DESCRIPTION")]
    InnerDescription,
    #[serde(rename = "OUTER_SHIFTED")]
    OuterShifted,
}

impl RegionKind {
    fn as_str(&self) -> &'static str {
        match self {
            RegionKind::InnerDescription => "INNER_DESCRIPTION",
            RegionKind::OuterShifted => "OUTER_SHIFTED",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionPoint {
    /// The weight whose half-plane is active at this vertex.
    pub xi: f64,
    pub rate: f64,
    pub distortion: f64,
}

/// A sampled lower envelope of the rate-distortion region.
#[derive(Debug, Clone, Serialize)]
pub struct RegionPolyline {
    pub points: Vec<RegionPoint>,
    pub xi_grid: Vec<f64>,
    pub kind: RegionKind,
}

impl RegionPolyline {
    /// Shift every vertex by `(−amount, −amount)`, clamping at 0.
    pub fn shifted(&self, amount: f64) -> RegionPolyline {
        RegionPolyline {
            points: self
                .points
                .iter()
                .map(|p| RegionPoint {
                    xi: p.xi,
                    rate: (p.rate - amount).max(0.0),
                    distortion: (p.distortion - amount).max(0.0),
                })
                .collect(),
            xi_grid: self.xi_grid.clone(),
            kind: RegionKind::OuterShifted,
        }
    }

    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for p in &self.points {
            out.push_str(&format!("{},{},{},{}\n", p.xi, p.rate, p.distortion, self.kind.as_str()));
        }
        out
    }

    pub const CSV_HEADER: &'static str = "xi,rate,distortion,kind";
}

/// The region output: weighted values per grid weight, the inner-description
/// envelope, and the shifted outer envelope when a shift was requested.
#[derive(Debug, Clone, Serialize)]
pub struct WzRegion {
    pub supports: Vec<GapFreePoint>,
    pub inner: RegionPolyline,
    pub outer: Option<RegionPolyline>,
    pub shift: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapFreePoint {
    pub xi: f64,
    pub rd: f64,
    pub certified_gap: f64,
}

/// Sample the region envelope over a distortion grid from the weighted
/// values on `xi_grid`; optionally shift it outward by `shift`.
///
/// The distortion axis runs over 101 evenly spaced values from 0 to the
/// largest distortion entry.
pub fn rd_region(
    instance: &WzInstance,
    xi_grid: &[f64],
    cfg: &OptimizerConfig,
    shift: Option<f64>,
) -> Result<WzRegion> {
    if xi_grid.is_empty() {
        return Err(Error::Config("weight grid must be non-empty".into()));
    }
    let mut supports = Vec::with_capacity(xi_grid.len());
    for &xi in xi_grid {
        let r = rd_support(instance, xi, cfg, Method::Oracle)?;
        supports.push(GapFreePoint { xi, rd: r.value, certified_gap: r.certified_gap });
    }
    // Distortion floor from weights at 1 (pure-distortion half planes).
    let mut floor = 0.0f64;
    for s in &supports {
        if s.xi == 1.0 {
            floor = floor.max(s.rd);
        }
    }
    let d_cap = instance.max_distortion().max(floor);
    let steps = 101usize;
    let mut points = Vec::with_capacity(steps);
    for i in 0..steps {
        let d = if steps == 1 { 0.0 } else { d_cap * i as f64 / (steps - 1) as f64 };
        if d < floor - 1e-12 {
            continue;
        }
        let mut rate = 0.0f64;
        let mut active_xi = supports[0].xi;
        let mut best = f64::NEG_INFINITY;
        for s in &supports {
            if s.xi >= 1.0 {
                continue;
            }
            let r = (s.rd - s.xi * d) / (1.0 - s.xi);
            if r > best {
                best = r;
                active_xi = s.xi;
            }
        }
        if best > f64::NEG_INFINITY {
            rate = best.max(0.0);
        }
        points.push(RegionPoint { xi: active_xi, rate, distortion: d });
    }
    let inner = RegionPolyline {
        points,
        xi_grid: xi_grid.to_vec(),
        kind: RegionKind::InnerDescription,
    };
    let outer = shift.map(|s| inner.shifted(s));
    Ok(WzRegion { supports, inner, outer, shift })
}

/// Verify the score-difference decomposition and the penalty split identity
/// on one relaxed-family member; returns the larger of the two residuals.
pub fn check_relaxation_identities(problem: &WzProblem, q: &JointDist) -> Result<f64> {
    let residual = crate::relaxation::verify_decomposition(&problem.relax, &problem.score, q)?;
    let p = apply_map(&problem.relax, q)?;
    let d = kl_divergence(q, &p)?;
    let (i1, d2, i3) = problem.kl_split(q)?;
    if !d.is_finite() {
        return Err(Error::Structural("penalty divergence is infinite on this member".into()));
    }
    Ok(residual.max((d - (i1 + d2 + i3)).abs()))
}

// --- serialization -----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct WzInstanceRepr {
    p_xy: JointDist,
    distortion: Vec<Vec<f64>>,
    z_card: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    u_card_tilde: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    u_card_star: Option<usize>,
}

impl Serialize for WzInstance {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..self.x_card())
            .map(|x| (0..self.z_card).map(|z| self.distortion(x, z)).collect())
            .collect();
        WzInstanceRepr {
            p_xy: self.p_xy.clone(),
            distortion: rows,
            z_card: self.z_card,
            u_card_tilde: Some(self.u_card_tilde),
            u_card_star: Some(self.u_card_star),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for WzInstance {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = WzInstanceRepr::deserialize(deserializer)?;
        WzInstance::new(&repr.p_xy, &repr.distortion, repr.z_card, repr.u_card_tilde, repr.u_card_star)
            .map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bsc() -> WzInstance {
        WzInstance::binary_symmetric(0.25).unwrap()
    }

    fn cfg(n: u32) -> OptimizerConfig {
        OptimizerConfig { grid_denominator: n, ..Default::default() }
    }

    #[test]
    fn build_term_counts() {
        let inst = bsc();
        let p = WzProblem::build(&inst, 0.5, None).unwrap();
        assert_eq!(p.score.fixed_terms().len(), 1);
        assert_eq!(p.score.mu_terms().len(), 2);
        assert_eq!(p.score.eta_terms().len(), 2);
        assert_eq!(p.relax.kappa_terms().len(), 1);
        assert_eq!(p.relax.nu_terms().len(), 1);
        assert!((p.score.mu_sum() - 1.0).abs() < 1e-15);
        assert!((p.score.eta_sum() - 1.0).abs() < 1e-15);
        assert!((p.relax.kappa_sum() - 0.5).abs() < 1e-15);
        assert!((p.relax.nu_sum() - 0.5).abs() < 1e-15);

        // Weight 1 empties every coefficient list.
        let p = WzProblem::build(&inst, 1.0, None).unwrap();
        assert!(p.score.mu_terms().is_empty());
        assert!(p.score.eta_terms().is_empty());
        assert_eq!(p.score.mu_sum(), 0.0);
        assert_eq!(p.score.eta_sum(), 0.0);
        assert_eq!(p.relax.kappa_sum(), 0.0);
        assert_eq!(p.relax.nu_sum(), 0.0);

        assert!(WzProblem::build(&inst, 1.5, None).is_err());
    }

    #[test]
    fn constrained_members_pass_predicates() {
        let inst = bsc();
        let problem = WzProblem::build(&inst, 0.5, None).unwrap();
        let source = WzConstrainedSource::new(&inst, None).unwrap();
        let mut checked = 0;
        source
            .for_each(2, &mut |q| {
                assert!(problem.constrained.contains(q).unwrap());
                assert!(problem.relaxed.contains(q).unwrap());
                checked += 1;
                Ok(())
            })
            .unwrap();
        assert_eq!(checked as u128, source.count_estimate(2));
    }

    #[test]
    fn map_is_identity_on_constrained_members() {
        let inst = bsc();
        let problem = WzProblem::build(&inst, 0.5, None).unwrap();
        let source = WzConstrainedSource::new(&inst, None).unwrap();
        source
            .for_each(2, &mut |q| {
                let p = apply_map(&problem.relax, q).unwrap();
                for (a, b) in p.mass().iter().zip(q.mass()) {
                    assert!((a - b).abs() < 1e-12);
                }
                Ok(())
            })
            .unwrap();
    }

    #[test]
    fn map_output_lands_in_constrained_family_and_is_idempotent() {
        let inst = bsc();
        let problem = WzProblem::build(&inst, 0.5, None).unwrap();
        let q = JointDist::uniform(problem.space.clone());
        // Perturb off the family.
        let mut mass = q.mass().to_vec();
        mass[0] += 0.05;
        mass[7] -= 0.05;
        let q = JointDist::new(problem.space.clone(), mass).unwrap();
        let p = apply_map(&problem.relax, &q).unwrap();
        assert!(problem.constrained.max_residual(&p).unwrap() < 1e-9);
        let pp = apply_map(&problem.relax, &p).unwrap();
        for (a, b) in pp.mass().iter().zip(p.mass()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rd_support_trivial_weights() {
        let inst = bsc();
        // Weight 0: a constant auxiliary variable reaches 0.
        let r = rd_support(&inst, 0.0, &cfg(4), Method::Oracle).unwrap();
        assert_eq!(r.value, 0.0);
        // Weight 1 with a zero-diagonal distortion: copying reaches 0.
        let r = rd_support(&inst, 1.0, &cfg(4), Method::Oracle).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn rd_support_zero_for_perfect_side_information() {
        let space = AlphabetProduct::new(vec!["X", "Y"], vec![2, 2]).unwrap();
        let p = JointDist::new(space, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let inst = WzInstance::new(&p, &hamming_distortion(2, 2), 2, None, None).unwrap();
        for &xi in &[0.0, 0.5, 1.0] {
            let r = rd_support(&inst, xi, &cfg(4), Method::Oracle).unwrap();
            assert!(r.value.abs() < 1e-12, "xi {xi}: {}", r.value);
        }
    }

    #[test]
    fn penalized_support_respects_sandwich_on_shared_grid() {
        let inst = bsc();
        let c = cfg(4);
        for &xi in &[0.0, 0.5, 1.0] {
            let rd = rd_support(&inst, xi, &c, Method::Oracle).unwrap();
            for &alpha in &[2.0, 8.0] {
                let pen = rd_support_penalized(&inst, xi, alpha, &c, Method::Oracle).unwrap();
                assert!(
                    pen.value <= rd.value + 1e-9,
                    "xi {xi} alpha {alpha}: {} > {}",
                    pen.value,
                    rd.value
                );
            }
        }
    }

    #[test]
    fn region_envelope_shapes() {
        let inst = bsc();
        let xi_grid = [0.0, 0.25, 0.5, 0.75, 1.0];
        let region = rd_region(&inst, &xi_grid, &cfg(4), Some(0.0)).unwrap();
        let pts = &region.inner.points;
        assert!(!pts.is_empty());
        // Convex nonincreasing envelope in distortion.
        for w in pts.windows(2) {
            assert!(w[1].rate <= w[0].rate + 1e-12);
        }
        for w in pts.windows(3) {
            let left = w[1].rate - w[0].rate;
            let right = w[2].rate - w[1].rate;
            assert!(right >= left - 1e-9, "envelope convexity violated");
        }
        // Zero shift leaves the polyline unchanged.
        let outer = region.outer.as_ref().unwrap();
        for (a, b) in outer.points.iter().zip(pts) {
            assert_eq!(a.rate, b.rate);
            assert_eq!(a.distortion, b.distortion);
        }
        // Half-plane consistency at every vertex.
        for p in pts {
            for s in &region.supports {
                let lhs = (1.0 - s.xi) * p.rate + s.xi * p.distortion;
                assert!(lhs >= s.rd - s.certified_gap - 1e-9);
            }
        }
    }

    #[test]
    fn region_shift_moves_vertices() {
        let inst = bsc();
        let region = rd_region(&inst, &[0.0, 0.5, 1.0], &cfg(4), Some(0.01)).unwrap();
        let outer = region.outer.unwrap();
        for (o, i) in outer.points.iter().zip(&region.inner.points) {
            assert!((o.rate - (i.rate - 0.01).max(0.0)).abs() < 1e-15);
            assert!((o.distortion - (i.distortion - 0.01).max(0.0)).abs() < 1e-15);
        }
        let csv = outer.csv_rows();
        assert!(csv.contains("OUTER_SHIFTED"));
    }

    #[test]
    fn perfect_side_information_region_is_axis_hugging() {
        let space = AlphabetProduct::new(vec!["X", "Y"], vec![2, 2]).unwrap();
        let p = JointDist::new(space, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let inst = WzInstance::new(&p, &hamming_distortion(2, 2), 2, None, None).unwrap();
        let region = rd_region(&inst, &[0.0, 0.5, 1.0], &cfg(4), None).unwrap();
        for pt in &region.inner.points {
            assert!(pt.rate.abs() < 1e-9);
        }
    }

    #[test]
    fn instance_json_round_trip() {
        let inst = bsc();
        let s = serde_json::to_string(&inst).unwrap();
        let back: WzInstance = serde_json::from_str(&s).unwrap();
        assert_eq!(back.p_xy().mass(), inst.p_xy().mass());
        assert_eq!(back.z_card(), 2);
        assert_eq!(back.u_card_tilde, 2);
        assert_eq!(back.u_card_star, 8);
        assert_eq!(back.distortion(0, 1), 1.0);
    }
}
