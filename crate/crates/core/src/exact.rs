//! Exact computations on finite trees.
//!
//! [`dp_partition`] runs the bottom-up recursion
//! `Z(i) = λ^i Π_children Σ_{k ≤ C-i} Z_child(k)` in the log domain. Leaves
//! sit at recursion level 1 and the root at level `depth + 1`, so the level of
//! a root law is the distance from the root to the boundary. Factors coming
//! from the fixed boundary spins are dropped; they cancel in every marginal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logspace::{log1m_exp, log_add_exp, log_normalize, log_sum_exp};
use crate::model::{BoundaryCondition, ModelParams, Spin, TreeShape};

/// Probability law of the root spin at a given recursion level.
///
/// Stored as log-probabilities so that tails far below `f64::MIN_POSITIVE`
/// survive large branching factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootLaw {
    log_p: Vec<f64>,
    level: u32,
}

impl RootLaw {
    /// Normalizes unnormalized log-weights.
    pub fn from_log_weights(mut log_w: Vec<f64>, level: u32) -> Result<Self> {
        if log_w.is_empty() || log_w.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
            return Err(Error::DegenerateLaw);
        }
        let z = log_normalize(&mut log_w);
        if !z.is_finite() {
            return Err(Error::DegenerateLaw);
        }
        Ok(RootLaw { log_p: log_w, level })
    }

    /// Builds a law from probabilities that already sum to one (within 1e-12).
    pub fn from_probs(p: &[f64], level: u32) -> Result<Self> {
        if p.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::Precondition("probabilities must be non-negative".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Precondition(format!("probabilities sum to {total}, not 1")));
        }
        RootLaw::from_log_weights(p.iter().map(|x| x.ln()).collect(), level)
    }

    /// Point mass at `spin`.
    pub fn delta(spin: Spin, c: u32, level: u32) -> Self {
        let log_p = (0..=c).map(|i| if i == spin as u32 { 0.0 } else { f64::NEG_INFINITY }).collect();
        RootLaw { log_p, level }
    }

    pub fn capacity(&self) -> u32 {
        self.log_p.len() as u32 - 1
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.log_p[i].exp()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_p.iter().map(|x| x.exp()).collect()
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_p
    }

    /// `ln P(σ ≤ m)`, computed through the upper tail when it is small.
    pub fn log_cdf(&self, m: usize) -> f64 {
        if m >= self.log_p.len() - 1 {
            return 0.0;
        }
        let log_tail = log_sum_exp(&self.log_p[m + 1..]);
        if log_tail < -std::f64::consts::LN_2 {
            log1m_exp(log_tail)
        } else {
            log_sum_exp(&self.log_p[..=m])
        }
    }

    /// `ln P(σ ≥ k)`.
    pub fn log_ccdf(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        if k >= self.log_p.len() {
            return f64::NEG_INFINITY;
        }
        let log_head = log_sum_exp(&self.log_p[..k]);
        if log_head < -std::f64::consts::LN_2 {
            log1m_exp(log_head)
        } else {
            log_sum_exp(&self.log_p[k..])
        }
    }

    pub fn ccdf(&self, k: usize) -> f64 {
        self.log_ccdf(k).exp()
    }

    /// Odds `Q(i) = P(i) / P(0)`; undefined when `P(0) = 0`.
    pub fn q(&self, i: usize) -> Result<f64> {
        if self.log_p[0] == f64::NEG_INFINITY {
            return Err(Error::Precondition("Q is undefined when P(0) = 0".into()));
        }
        Ok((self.log_p[i] - self.log_p[0]).exp())
    }

    /// `R(i) = 1 / P(σ ≤ C - i)`; `+∞` when that mass is zero.
    pub fn r(&self, i: usize) -> f64 {
        let c = self.log_p.len() - 1;
        (-self.log_cdf(c - i)).exp()
    }

    /// `X = P(σ ≥ t) / P(σ < t)` for a threshold `t ≥ 1`.
    pub fn tail_ratio(&self, t: usize) -> f64 {
        (self.log_ccdf(t) - self.log_cdf(t - 1)).exp()
    }

    /// Sup-norm distance between the probability vectors.
    pub fn sup_distance(&self, other: &RootLaw) -> f64 {
        self.log_p
            .iter()
            .zip(&other.log_p)
            .map(|(a, b)| (a.exp() - b.exp()).abs())
            .fold(0.0, f64::max)
    }

    /// `true` if `self` is stochastically at most `other` up to `slack`:
    /// `P_self(σ ≥ k) ≤ P_other(σ ≥ k) + slack` for every `k`.
    pub fn dominated_by(&self, other: &RootLaw, slack: f64) -> bool {
        (1..self.log_p.len()).all(|k| self.ccdf(k) <= other.ccdf(k) + slack)
    }
}

/// Log partition function of the root, one entry per root spin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionVector {
    pub log_z: Vec<f64>,
    pub level: u32,
}

fn check_instance(shape: &TreeShape, bc: &BoundaryCondition, params: &ModelParams) -> Result<()> {
    if shape.b != params.b() {
        return Err(Error::ShapeMismatch(format!(
            "tree has b = {} but the model has b = {}",
            shape.b,
            params.b()
        )));
    }
    bc.validate(shape, params.capacity())
}

/// Leaf vector `ln Z_1(i) = i ln λ` if `i + c_max ≤ C`, else `-∞`.
fn leaf_vector(c_max: Spin, params: &ModelParams) -> Vec<f64> {
    let c = params.capacity();
    let ln_l = params.ln_lambda();
    (0..=c)
        .map(|i| if i + c_max as u32 <= c { i as f64 * ln_l } else { f64::NEG_INFINITY })
        .collect()
}

/// `pre[m] = ln Σ_{k ≤ m} e^{v[k]}`.
fn log_prefix(v: &[f64]) -> Vec<f64> {
    let mut acc = f64::NEG_INFINITY;
    v.iter()
        .map(|&x| {
            acc = log_add_exp(acc, x);
            acc
        })
        .collect()
}

/// Combines child vectors into the parent vector.
fn parent_vector<'a>(children: impl Iterator<Item = &'a [f64]>, params: &ModelParams) -> Vec<f64> {
    let c = params.capacity() as usize;
    let ln_l = params.ln_lambda();
    let mut out: Vec<f64> = (0..=c).map(|i| i as f64 * ln_l).collect();
    for child in children {
        let pre = log_prefix(child);
        for (i, o) in out.iter_mut().enumerate() {
            *o += pre[c - i];
        }
    }
    out
}

/// Subtracts the maximum entry and returns it.
fn shift_to_max(v: &mut [f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_finite() {
        v.iter_mut().for_each(|x| *x -= m);
    }
    m
}

/// Root vector shifted so its maximum is zero, plus the removed offset.
///
/// Every vertex vector is renormalized on the way up. Without this the
/// entries grow like `b^depth` and their differences lose all precision.
fn dp_shifted(
    shape: &TreeShape,
    bc: &BoundaryCondition,
    params: &ModelParams,
) -> Result<(Vec<f64>, f64)> {
    check_instance(shape, bc, params)?;
    let c = params.capacity() as usize;
    let (v, offset) = match bc.constant_spin(params.capacity()) {
        Some(spin) => {
            // Homogeneous boundary: every vertex of a level carries the same vector.
            let b = params.b() as f64;
            let ln_l = params.ln_lambda();
            let mut v = leaf_vector(spin, params);
            let mut offset = shift_to_max(&mut v);
            for _ in 0..shape.depth {
                let pre = log_prefix(&v);
                v = (0..=c).map(|i| i as f64 * ln_l + b * pre[c - i]).collect();
                offset = b * offset + shift_to_max(&mut v);
            }
            (v, offset)
        }
        None => {
            let leaves = shape.level_size(shape.depth).unwrap() as usize;
            let mut level: Vec<(Vec<f64>, f64)> = (0..leaves)
                .map(|pos| {
                    let mut v = leaf_vector(bc.max_child_spin(pos, shape.b, params.capacity()), params);
                    let off = shift_to_max(&mut v);
                    (v, off)
                })
                .collect();
            let b = shape.b as usize;
            while level.len() > 1 {
                level = level
                    .chunks(b)
                    .map(|kids| {
                        let mut v = parent_vector(kids.iter().map(|k| k.0.as_slice()), params);
                        let off = kids.iter().map(|k| k.1).sum::<f64>() + shift_to_max(&mut v);
                        (v, off)
                    })
                    .collect();
            }
            level.pop().unwrap()
        }
    };
    if v.iter().all(|x| *x == f64::NEG_INFINITY) {
        return Err(Error::EmptyEnsemble);
    }
    Ok((v, offset))
}

/// Root partition vector of `shape` under `bc`.
///
/// Absolute values of `log_z` grow like `b^depth`; only their differences
/// carry the marginal, so use [`root_marginal`] when the tree is large.
pub fn dp_partition(
    shape: &TreeShape,
    bc: &BoundaryCondition,
    params: &ModelParams,
) -> Result<PartitionVector> {
    let (v, offset) = dp_shifted(shape, bc, params)?;
    Ok(PartitionVector {
        log_z: v.into_iter().map(|x| x + offset).collect(),
        level: shape.boundary_distance(),
    })
}

/// Law of the root spin of `shape` under `bc`.
pub fn root_marginal(
    shape: &TreeShape,
    bc: &BoundaryCondition,
    params: &ModelParams,
) -> Result<RootLaw> {
    let (v, _) = dp_shifted(shape, bc, params)?;
    RootLaw::from_log_weights(v, shape.boundary_distance())
}

/// `(1/2) Σ |p(i) - q(i)|`.
pub fn tv_distance(p: &RootLaw, q: &RootLaw) -> Result<f64> {
    if p.log_p.len() != q.log_p.len() {
        return Err(Error::DimensionMismatch { expected: p.log_p.len(), found: q.log_p.len() });
    }
    let sum: f64 = p.log_p.iter().zip(&q.log_p).map(|(a, b)| (a.exp() - b.exp()).abs()).sum();
    Ok((0.5 * sum).min(1.0))
}

/// The law conditioned on `σ ≤ i*`, i.e. the law of a vertex whose neighbour
/// carries spin `i`.
pub fn conditioned_law(law: &RootLaw, i: u32) -> Result<RootLaw> {
    let c = law.capacity();
    if i > c {
        return Err(Error::InvalidParameter(format!("spin {i} exceeds C = {c}")));
    }
    let keep = (c - i) as usize;
    let w = law
        .log_p
        .iter()
        .enumerate()
        .map(|(j, &x)| if j <= keep { x } else { f64::NEG_INFINITY })
        .collect();
    RootLaw::from_log_weights(w, law.level)
}

/// `μ(σ ∈ [i*+1, k*]) / μ(σ ≤ k*)`, the total variation distance between the
/// law conditioned on a neighbour at `i` and at `k`, for `k < i`.
pub fn conditional_tv_from_law(law: &RootLaw, i: u32, k: u32) -> Result<f64> {
    let c = law.capacity();
    if k >= i {
        return Err(Error::Precondition(format!("conditional TV needs k < i (got k = {k}, i = {i})")));
    }
    if i > c {
        return Err(Error::InvalidParameter(format!("spin {i} exceeds C = {c}")));
    }
    let (i_star, k_star) = ((c - i) as usize, (c - k) as usize);
    let num = log_sum_exp(&law.log_p[i_star + 1..=k_star]);
    let den = law.log_cdf(k_star);
    if den == f64::NEG_INFINITY {
        return Err(Error::DegenerateLaw);
    }
    Ok((num - den).exp())
}

/// [`conditional_tv_from_law`] applied to the exact root marginal.
pub fn conditional_tv(
    shape: &TreeShape,
    bc: &BoundaryCondition,
    params: &ModelParams,
    i: u32,
    k: u32,
) -> Result<f64> {
    conditional_tv_from_law(&root_marginal(shape, bc, params)?, i, k)
}

/// Vertex limit of the enumeration oracle.
pub const ORACLE_VERTEX_LIMIT: u64 = 22;

/// Number of feasible configurations by root spin and total spin:
/// `counts[root][total]`. The enumeration walks the vertices in level order
/// and backtracks as soon as a partial assignment violates a constraint, so
/// every feasible assignment is visited exactly once.
pub fn brute_force_counts(
    shape: &TreeShape,
    bc: &BoundaryCondition,
    c: u32,
    vertex_limit: u64,
) -> Result<Vec<Vec<u64>>> {
    let n = shape.vertex_count().unwrap_or(u64::MAX);
    if n > vertex_limit {
        return Err(Error::OracleGuard { vertices: n, limit: vertex_limit });
    }
    bc.validate(shape, c)?;
    let n = n as usize;
    let b = shape.b as usize;
    let first_leaf = n - shape.level_size(shape.depth).unwrap() as usize;
    // Flattened level order: parent of v is (v - 1) / b.
    let caps: Vec<u32> = (0..n)
        .map(|v| if v >= first_leaf { c - bc.max_child_spin(v - first_leaf, shape.b, c) as u32 } else { c })
        .collect();
    let mut counts = vec![vec![0u64; n * c as usize + 1]; c as usize + 1];
    let mut spins = vec![0u32; n];

    fn visit(
        v: usize,
        total: usize,
        spins: &mut [u32],
        caps: &[u32],
        b: usize,
        c: u32,
        counts: &mut [Vec<u64>],
    ) {
        if v == spins.len() {
            counts[spins[0] as usize][total] += 1;
            return;
        }
        let bound = if v == 0 { caps[0] } else { caps[v].min(c - spins[(v - 1) / b]) };
        for s in 0..=bound {
            spins[v] = s;
            visit(v + 1, total + s as usize, spins, caps, b, c, counts);
        }
    }
    visit(0, 0, &mut spins, &caps, b, c, &mut counts);
    Ok(counts)
}

/// Root law by exhaustive enumeration (at most [`ORACLE_VERTEX_LIMIT`] vertices).
pub fn brute_force_marginal(
    shape: &TreeShape,
    bc: &BoundaryCondition,
    params: &ModelParams,
) -> Result<RootLaw> {
    brute_force_marginal_with_limit(shape, bc, params, ORACLE_VERTEX_LIMIT)
}

pub fn brute_force_marginal_with_limit(
    shape: &TreeShape,
    bc: &BoundaryCondition,
    params: &ModelParams,
    vertex_limit: u64,
) -> Result<RootLaw> {
    check_instance(shape, bc, params)?;
    let counts = brute_force_counts(shape, bc, params.capacity(), vertex_limit)?;
    let ln_l = params.ln_lambda();
    let log_w = counts
        .iter()
        .map(|by_total| {
            let terms: Vec<f64> = by_total
                .iter()
                .enumerate()
                .filter(|(_, &n)| n > 0)
                .map(|(s, &n)| (n as f64).ln() + s as f64 * ln_l)
                .collect();
            log_sum_exp(&terms)
        })
        .collect();
    RootLaw::from_log_weights(log_w, shape.boundary_distance())
}
