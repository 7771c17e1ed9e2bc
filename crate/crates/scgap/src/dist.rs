//! Exact finite-alphabet probability machinery: product alphabets, joint
//! distributions, marginals, conditionals, divergences, exponential tilting,
//! and central moments.
//!
//! Conventions used throughout the crate:
//! - all logarithms are natural (nats);
//! - `0 · ln 0 = 0` in every expectation;
//! - conditional rows on zero-probability events are marked undefined, never NaN;
//! - KL divergence with a support violation is the `f64::INFINITY` sentinel,
//!   not an error, so feasibility filters can detect it cheaply;
//! - probability arrays are validated against [`crate::tol::NORM_ABS`] and
//!   rejected when out of tolerance, never silently renormalized.
//!
//! All types are immutable after construction and all operations are pure,
//! so everything here is safe to share across threads.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tol;

/// A product of finite alphabets: labelled variables and their sizes.
///
/// Cells of the product are addressed row-major with the first variable
/// varying slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphabetProduct {
    names: Vec<String>,
    sizes: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl AlphabetProduct {
    pub fn new<S: Into<String>>(names: Vec<S>, sizes: Vec<usize>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() || sizes.is_empty() || names.len() != sizes.len() {
            return Err(Error::EmptySpace);
        }
        for (name, &size) in names.iter().zip(&sizes) {
            if size == 0 {
                return Err(Error::EmptyAlphabet(name.clone()));
            }
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::DuplicateVariable(name.clone()));
            }
        }
        let mut total: usize = 1;
        for &size in &sizes {
            total = total.checked_mul(size).ok_or(Error::SpaceTooLarge)?;
        }
        // Dense storage must stay addressable.
        if total > (isize::MAX as usize) / std::mem::size_of::<f64>() {
            return Err(Error::SpaceTooLarge);
        }
        let mut strides = vec![1usize; sizes.len()];
        for i in (0..sizes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * sizes[i + 1];
        }
        Ok(Self { names, sizes, strides, total })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of variables.
    pub fn num_vars(&self) -> usize {
        self.sizes.len()
    }

    /// Total number of cells in the product.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn var_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Resolve a list of labels to canonical (sorted, deduplicated) indices.
    pub fn resolve_vars(&self, labels: &[&str]) -> Result<Vec<usize>> {
        let mut vars = Vec::with_capacity(labels.len());
        for l in labels {
            vars.push(self.var_index(l)?);
        }
        Self::canonicalize(&mut vars)?;
        Ok(vars)
    }

    /// Sort, reject duplicates, reject empty.
    pub fn canonicalize(vars: &mut Vec<usize>) -> Result<()> {
        if vars.is_empty() {
            return Err(Error::EmptySubset);
        }
        vars.sort_unstable();
        for w in vars.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateVariable(format!("#{}", w[0])));
            }
        }
        Ok(())
    }

    fn check_vars(&self, vars: &[usize]) -> Result<()> {
        if vars.is_empty() {
            return Err(Error::EmptySubset);
        }
        for w in vars.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::BadSpec("variable subset must be sorted and unique".into()));
            }
        }
        if *vars.last().unwrap() >= self.num_vars() {
            return Err(Error::UnknownVariable(format!("#{}", vars.last().unwrap())));
        }
        Ok(())
    }

    pub fn flat_index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.num_vars());
        coords.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    pub fn coords(&self, flat: usize) -> Vec<usize> {
        let mut out = vec![0usize; self.num_vars()];
        let mut rest = flat;
        for (i, &s) in self.strides.iter().enumerate() {
            out[i] = rest / s;
            rest %= s;
        }
        out
    }

    /// The sub-product over a canonical variable subset, preserving order.
    pub fn subspace(&self, vars: &[usize]) -> Result<AlphabetProduct> {
        self.check_vars(vars)?;
        AlphabetProduct::new(
            vars.iter().map(|&v| self.names[v].clone()).collect::<Vec<_>>(),
            vars.iter().map(|&v| self.sizes[v]).collect(),
        )
    }

    /// Map every joint cell to its cell in the subspace over `vars`.
    ///
    /// The table has one entry per joint cell; projections drive marginal
    /// sums and per-cell marginal lookups.
    pub fn projection_table(&self, vars: &[usize]) -> Result<Vec<usize>> {
        self.check_vars(vars)?;
        let sub_sizes: Vec<usize> = vars.iter().map(|&v| self.sizes[v]).collect();
        let mut sub_strides = vec![1usize; vars.len()];
        for i in (0..vars.len().saturating_sub(1)).rev() {
            sub_strides[i] = sub_strides[i + 1] * sub_sizes[i + 1];
        }
        let mut table = vec![0usize; self.total];
        for (flat, slot) in table.iter_mut().enumerate() {
            let mut acc = 0usize;
            for (k, &v) in vars.iter().enumerate() {
                let digit = (flat / self.strides[v]) % self.sizes[v];
                acc += digit * sub_strides[k];
            }
            *slot = acc;
        }
        Ok(table)
    }
}

/// A probability mass over a product of finite alphabets.
///
/// Mass is a flat row-major array; entries are nonnegative and sum to 1
/// within [`tol::NORM_ABS`].
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist {
    space: AlphabetProduct,
    mass: Vec<f64>,
}

impl JointDist {
    pub fn new(space: AlphabetProduct, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != space.total() {
            return Err(Error::MassLength { expected: space.total(), got: mass.len() });
        }
        let mut sum = 0.0;
        for (index, &value) in mass.iter().enumerate() {
            if !(value >= 0.0) {
                return Err(Error::NegativeMass { index, value });
            }
            sum += value;
        }
        if (sum - 1.0).abs() > tol::NORM_ABS {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { space, mass })
    }

    pub fn uniform(space: AlphabetProduct) -> Self {
        let n = space.total();
        Self { space, mass: vec![1.0 / n as f64; n] }
    }

    pub fn space(&self) -> &AlphabetProduct {
        &self.space
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn prob(&self, flat: usize) -> f64 {
        self.mass[flat]
    }

    /// Marginal distribution over a canonical variable subset.
    pub fn marginal(&self, vars: &[usize]) -> Result<JointDist> {
        let proj = self.space.projection_table(vars)?;
        let sub = self.space.subspace(vars)?;
        Ok(JointDist { mass: marginal_mass(&self.mass, &proj, sub.total()), space: sub })
    }

    /// Marginal by variable labels.
    pub fn marginal_by_name(&self, labels: &[&str]) -> Result<JointDist> {
        let vars = self.space.resolve_vars(labels)?;
        self.marginal(&vars)
    }

    /// Conditional table of `target` given `given`. Rows on zero-probability
    /// conditioning events are marked undefined.
    pub fn conditional(&self, target: &[usize], given: &[usize]) -> Result<ConditionalTable> {
        for &t in target {
            if given.binary_search(&t).is_ok() {
                return Err(Error::OverlappingSubsets(t));
            }
        }
        let union = union_vars(target, given);
        let joint = self.marginal(&union)?;
        let union_space = joint.space.clone();

        // Positions of target/given inside the union ordering.
        let pos = |vars: &[usize]| -> Vec<usize> {
            vars.iter().map(|v| union.binary_search(v).unwrap()).collect()
        };
        let proj_given = union_space.projection_table(&pos(given))?;
        let proj_target = union_space.projection_table(&pos(target))?;
        let given_space = self.space.subspace(given)?;
        let target_space = self.space.subspace(target)?;

        let mut row_sums = vec![0.0f64; given_space.total()];
        for (cell, &m) in joint.mass.iter().enumerate() {
            row_sums[proj_given[cell]] += m;
        }
        let mut rows: Vec<Option<Vec<f64>>> = row_sums
            .iter()
            .map(|&s| if s > 0.0 { Some(vec![0.0; target_space.total()]) } else { None })
            .collect();
        for (cell, &m) in joint.mass.iter().enumerate() {
            if let Some(row) = rows[proj_given[cell]].as_mut() {
                row[proj_target[cell]] += m / row_sums[proj_given[cell]];
            }
        }
        Ok(ConditionalTable {
            given: given.to_vec(),
            target: target.to_vec(),
            given_space,
            target_space,
            rows,
        })
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self.mass.iter().filter(|&&m| m > 0.0).map(|&m| m * m.ln()).sum::<f64>()
    }

    /// Entropy of the marginal over `vars` (empty subset has entropy 0).
    pub fn marginal_entropy(&self, vars: &[usize]) -> Result<f64> {
        if vars.is_empty() {
            return Ok(0.0);
        }
        Ok(self.marginal(vars)?.entropy())
    }
}

fn marginal_mass(mass: &[f64], proj: &[usize], sub_total: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; sub_total];
    for (cell, &m) in mass.iter().enumerate() {
        out[proj[cell]] += m;
    }
    out
}

/// Sorted union of two canonical variable subsets.
pub fn union_vars(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out.sort_unstable();
    out.dedup();
    out
}

/// Conditional mass of a target subset given a disjoint conditioning subset.
#[derive(Debug, Clone)]
pub struct ConditionalTable {
    given: Vec<usize>,
    target: Vec<usize>,
    given_space: AlphabetProduct,
    target_space: AlphabetProduct,
    rows: Vec<Option<Vec<f64>>>,
}

impl ConditionalTable {
    pub fn given_vars(&self) -> &[usize] {
        &self.given
    }

    pub fn target_vars(&self) -> &[usize] {
        &self.target
    }

    pub fn given_space(&self) -> &AlphabetProduct {
        &self.given_space
    }

    pub fn target_space(&self) -> &AlphabetProduct {
        &self.target_space
    }

    /// Row for a conditioning cell; `None` when the event has zero probability.
    pub fn row(&self, given_flat: usize) -> Option<&[f64]> {
        self.rows[given_flat].as_deref()
    }

    /// Conditional probability, `None` on an undefined row.
    pub fn prob(&self, given_flat: usize, target_flat: usize) -> Option<f64> {
        self.rows[given_flat].as_ref().map(|r| r[target_flat])
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }
}

/// KL divergence `D(q‖p)` in nats. Returns the `f64::INFINITY` sentinel when
/// the support of `q` is not contained in the support of `p`.
pub fn kl_divergence(q: &JointDist, p: &JointDist) -> Result<f64> {
    if q.space != p.space {
        return Err(Error::ShapeMismatch);
    }
    let mut sum = 0.0f64;
    for (&qi, &pi) in q.mass.iter().zip(&p.mass) {
        if qi > 0.0 {
            if pi <= 0.0 {
                return Ok(f64::INFINITY);
            }
            sum += qi * (qi / pi).ln();
        }
    }
    // Rounding can leave a tiny negative residue; KL is nonnegative.
    Ok(sum.max(0.0))
}

/// L1 distance `Σ_x |q(x) − p(x)|` (twice the total variation distance).
pub fn total_variation_l1(q: &JointDist, p: &JointDist) -> Result<f64> {
    if q.space != p.space {
        return Err(Error::ShapeMismatch);
    }
    Ok(q.mass.iter().zip(&p.mass).map(|(&a, &b)| (a - b).abs()).sum())
}

/// Exponentially tilt `base` by `exp{scale · weight}` and renormalize.
///
/// Weight entries outside the support of `base` are ignored, so sentinel
/// (infinite) values there are harmless. `scale = 0` returns `base` exactly.
pub fn tilt(base: &JointDist, weight: &[f64], scale: f64) -> Result<JointDist> {
    if weight.len() != base.mass.len() {
        return Err(Error::MassLength { expected: base.mass.len(), got: weight.len() });
    }
    if scale == 0.0 {
        return Ok(base.clone());
    }
    // Max-shift keeps exp arguments bounded.
    let mut shift = f64::NEG_INFINITY;
    for (&m, &w) in base.mass.iter().zip(weight) {
        if m > 0.0 {
            let a = scale * w;
            if a == f64::INFINITY {
                return Err(Error::Numeric("tilt weight is +inf on the support".into()));
            }
            if a.is_nan() {
                return Err(Error::Numeric("tilt weight is NaN on the support".into()));
            }
            if a > shift {
                shift = a;
            }
        }
    }
    if shift == f64::NEG_INFINITY {
        return Err(Error::Numeric("tilt base has empty support".into()));
    }
    let mut out = vec![0.0f64; base.mass.len()];
    let mut norm = 0.0f64;
    for (i, (&m, &w)) in base.mass.iter().zip(weight).enumerate() {
        if m > 0.0 {
            let v = m * (scale * w - shift).exp();
            out[i] = v;
            norm += v;
        }
    }
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Numeric(format!("tilt normalizer is {norm}")));
    }
    for v in &mut out {
        *v /= norm;
    }
    Ok(JointDist { space: base.space.clone(), mass: out })
}

/// Log of the tilt normalizer `ln E_base[exp{scale · weight}]`, max-shifted.
pub fn log_tilt_normalizer(base: &JointDist, weight: &[f64], scale: f64) -> Result<f64> {
    if weight.len() != base.mass.len() {
        return Err(Error::MassLength { expected: base.mass.len(), got: weight.len() });
    }
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut shift = f64::NEG_INFINITY;
    for (&m, &w) in base.mass.iter().zip(weight) {
        if m > 0.0 {
            let a = scale * w;
            if a == f64::INFINITY {
                return Err(Error::Numeric("cgf weight is +inf on the support".into()));
            }
            if a.is_nan() {
                return Err(Error::Numeric("cgf weight is NaN on the support".into()));
            }
            if a > shift {
                shift = a;
            }
        }
    }
    if shift == f64::NEG_INFINITY {
        return Err(Error::Numeric("empty support".into()));
    }
    let mut acc = 0.0f64;
    for (&m, &w) in base.mass.iter().zip(weight) {
        if m > 0.0 {
            acc += m * (scale * w - shift).exp();
        }
    }
    if !(acc > 0.0) || !acc.is_finite() {
        return Err(Error::Numeric(format!("cgf accumulator is {acc}")));
    }
    Ok(shift + acc.ln())
}

/// First, second, and third central moments of a function table under `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: Option<f64>,
    pub third_central: Option<f64>,
}

/// Exact weighted central moments of `f` under `p`, up to order `up_to ∈ {1,2,3}`.
///
/// Cells outside the support of `p` contribute nothing, so sentinel values
/// of `f` there are ignored.
pub fn moments(p: &JointDist, f: &[f64], up_to: u8) -> Result<Moments> {
    if f.len() != p.mass.len() {
        return Err(Error::MassLength { expected: p.mass.len(), got: f.len() });
    }
    if !(1..=3).contains(&up_to) {
        return Err(Error::Domain(format!("moment order {up_to} not in 1..=3")));
    }
    let mut mean = 0.0f64;
    for (&m, &v) in p.mass.iter().zip(f) {
        if m > 0.0 {
            mean += m * v;
        }
    }
    if up_to == 1 {
        return Ok(Moments { mean, variance: None, third_central: None });
    }
    let mut var = 0.0f64;
    let mut third = 0.0f64;
    for (&m, &v) in p.mass.iter().zip(f) {
        if m > 0.0 {
            let d = v - mean;
            var += m * d * d;
            if up_to == 3 {
                third += m * d * d * d;
            }
        }
    }
    Ok(Moments {
        mean,
        variance: Some(var.max(0.0)),
        third_central: if up_to == 3 { Some(third) } else { None },
    })
}

/// Conditional mutual information `I(A;C|B)` in nats via marginal entropies.
///
/// `b` may be empty, giving the plain mutual information `I(A;C)`.
pub fn conditional_mutual_information(
    p: &JointDist,
    a: &[usize],
    b: &[usize],
    c: &[usize],
) -> Result<f64> {
    let ab = union_vars(a, b);
    let cb = union_vars(c, b);
    let abc = union_vars(&ab, c);
    let h_ab = p.marginal_entropy(&ab)?;
    let h_cb = p.marginal_entropy(&cb)?;
    let h_b = p.marginal_entropy(b)?;
    let h_abc = p.marginal_entropy(&abc)?;
    Ok((h_ab + h_cb - h_b - h_abc).max(0.0))
}

// --- serialization -----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct JointDistRepr {
    names: Vec<String>,
    sizes: Vec<usize>,
    mass: Vec<f64>,
}

impl Serialize for JointDist {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        JointDistRepr {
            names: self.space.names().to_vec(),
            sizes: self.space.sizes().to_vec(),
            mass: self.mass.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for JointDist {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = JointDistRepr::deserialize(deserializer)?;
        let space =
            AlphabetProduct::new(repr.names, repr.sizes).map_err(D::Error::custom)?;
        JointDist::new(space, repr.mass).map_err(D::Error::custom)
    }
}
