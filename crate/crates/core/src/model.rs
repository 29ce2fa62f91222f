//! Domain types shared by every other module.
//!
//! Vertices of a finite tree are addressed by `(level, position)` with level 0
//! the root; the children of `(l, p)` are `(l + 1, p * b .. p * b + b)`. The
//! boundary is the level just below the deepest level of the tree and is never
//! part of a [`TreeConfig`]; it is described by a [`BoundaryCondition`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A spin value in `0..=C`.
pub type Spin = u8;

/// Largest supported capacity (spins are stored as `u8`).
pub const MAX_CAPACITY: u32 = Spin::MAX as u32;

/// Branching factor, capacity and activity of one model instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    b: u32,
    c: u32,
    lambda: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    b: u32,
    #[serde(rename = "C")]
    c: u32,
    lambda: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.b, raw.c, raw.lambda)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams { b: p.b, c: p.c, lambda: p.lambda }
    }
}

impl ModelParams {
    pub fn new(b: u32, c: u32, lambda: f64) -> Result<Self> {
        if b < 2 {
            return Err(Error::InvalidParameter(format!("b must be at least 2 (got {b})")));
        }
        if c < 1 || c > MAX_CAPACITY {
            return Err(Error::InvalidParameter(format!(
                "C must lie in 1..={MAX_CAPACITY} (got {c})"
            )));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be positive (got {lambda})")));
        }
        Ok(ModelParams { b, c, lambda })
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    pub fn capacity(&self) -> u32 {
        self.c
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn ln_lambda(&self) -> f64 {
        self.lambda.ln()
    }

    /// Same `b` and `C` at another activity.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        ModelParams::new(self.b, self.c, lambda)
    }

    /// `A_λ = Σ_i λ^i = 1/(1-λ)`, defined only for `λ < 1`.
    pub fn a_lambda(&self) -> Result<f64> {
        if self.lambda >= 1.0 {
            return Err(Error::EnvelopesRequireSubcritical(self.lambda));
        }
        Ok(1.0 / (1.0 - self.lambda))
    }

    /// `⌈C/2⌉`, the critical index of the odd-`C` analysis.
    pub fn jc_odd(&self) -> u32 {
        self.c.div_ceil(2)
    }

    /// `C/2 + 1`, the critical index of the even-`C` analysis.
    pub fn jc_even(&self) -> u32 {
        self.c / 2 + 1
    }

    /// The spin threshold `t` of the scalar `X = P(σ ≥ t) / P(σ < t)` that
    /// tracks the transition: [`jc_odd`](Self::jc_odd) for odd `C`,
    /// [`jc_even`](Self::jc_even) for even `C`. For `C = 2` this is the
    /// excess `Y - 1` of the two-step recursion.
    pub fn tail_threshold(&self) -> u32 {
        if self.c % 2 == 1 {
            self.jc_odd()
        } else {
            self.jc_even()
        }
    }

    /// `j* = C - j`.
    pub fn conjugate(&self, j: u32) -> Result<u32> {
        if j > self.c {
            return Err(Error::InvalidParameter(format!("spin index {j} exceeds C = {}", self.c)));
        }
        Ok(self.c - j)
    }
}

/// A complete `b`-ary tree with `depth` levels below the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeShape {
    pub b: u32,
    pub depth: u32,
}

impl TreeShape {
    pub fn new(b: u32, depth: u32) -> Result<Self> {
        if b < 2 {
            return Err(Error::InvalidParameter(format!("b must be at least 2 (got {b})")));
        }
        Ok(TreeShape { b, depth })
    }

    /// Number of vertices on `level`, `None` on overflow.
    pub fn level_size(&self, level: u32) -> Option<u64> {
        (self.b as u64).checked_pow(level)
    }

    /// `(b^(depth+1) - 1) / (b - 1)`.
    pub fn vertex_count(&self) -> Option<u64> {
        (0..=self.depth).try_fold(0u64, |acc, l| acc.checked_add(self.level_size(l)?))
    }

    /// `b^(depth+1)`.
    pub fn boundary_size(&self) -> Option<u64> {
        self.level_size(self.depth + 1)
    }

    /// Distance from the root to the boundary; this is the recursion level of
    /// the root law.
    pub fn boundary_distance(&self) -> u32 {
        self.depth + 1
    }
}

/// Spins imposed on the boundary of a finite tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    Empty,
    Full,
    Constant(Spin),
    /// One spin per boundary vertex, in boundary position order.
    PerVertex(Vec<Spin>),
}

impl BoundaryCondition {
    /// The common spin of a homogeneous condition.
    pub fn constant_spin(&self, c: u32) -> Option<Spin> {
        match self {
            BoundaryCondition::Empty => Some(0),
            BoundaryCondition::Full => Some(c as Spin),
            BoundaryCondition::Constant(s) => Some(*s),
            BoundaryCondition::PerVertex(_) => None,
        }
    }

    pub fn validate(&self, shape: &TreeShape, c: u32) -> Result<()> {
        match self {
            BoundaryCondition::Constant(s) if *s as u32 > c => Err(Error::InvalidBoundary(
                format!("constant spin {s} exceeds C = {c}"),
            )),
            BoundaryCondition::PerVertex(spins) => {
                let expected = shape.boundary_size().ok_or_else(|| {
                    Error::InvalidBoundary("boundary too large to enumerate".into())
                })?;
                if spins.len() as u64 != expected {
                    return Err(Error::InvalidBoundary(format!(
                        "expected {expected} boundary spins, found {}",
                        spins.len()
                    )));
                }
                if let Some(s) = spins.iter().find(|&&s| s as u32 > c) {
                    return Err(Error::InvalidBoundary(format!("spin {s} exceeds C = {c}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Spin at boundary position `pos`.
    pub fn spin_at(&self, pos: usize, c: u32) -> Spin {
        match self {
            BoundaryCondition::PerVertex(spins) => spins[pos],
            other => other.constant_spin(c).expect("homogeneous condition"),
        }
    }

    /// Largest spin among the boundary children of leaf `leaf_pos`.
    pub fn max_child_spin(&self, leaf_pos: usize, b: u32, c: u32) -> Spin {
        match self {
            BoundaryCondition::PerVertex(spins) => {
                let start = leaf_pos * b as usize;
                spins[start..start + b as usize].iter().copied().max().unwrap_or(0)
            }
            other => other.constant_spin(c).expect("homogeneous condition"),
        }
    }
}

/// Spin assignment on the vertices of a finite tree, stored level by level.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeConfig {
    shape: TreeShape,
    spins: Vec<Vec<Spin>>,
}

/// Largest tree that may be materialized as a [`TreeConfig`].
pub const MAX_CONFIG_VERTICES: u64 = 1 << 24;

impl TreeConfig {
    pub fn zeros(shape: TreeShape) -> Result<Self> {
        match shape.vertex_count() {
            Some(n) if n <= MAX_CONFIG_VERTICES => {}
            _ => {
                return Err(Error::GuardViolation(format!(
                    "tree with b = {} and depth {} is too large to materialize",
                    shape.b, shape.depth
                )))
            }
        }
        let spins = (0..=shape.depth)
            .map(|l| vec![0; shape.level_size(l).unwrap() as usize])
            .collect();
        Ok(TreeConfig { shape, spins })
    }

    pub fn from_levels(shape: TreeShape, spins: Vec<Vec<Spin>>) -> Result<Self> {
        if spins.len() != shape.depth as usize + 1 {
            return Err(Error::ShapeMismatch(format!(
                "expected {} levels, found {}",
                shape.depth + 1,
                spins.len()
            )));
        }
        for (l, level) in spins.iter().enumerate() {
            let expected = shape.level_size(l as u32).unwrap_or(u64::MAX);
            if level.len() as u64 != expected {
                return Err(Error::ShapeMismatch(format!(
                    "level {l}: expected {expected} vertices, found {}",
                    level.len()
                )));
            }
        }
        Ok(TreeConfig { shape, spins })
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn levels(&self) -> &[Vec<Spin>] {
        &self.spins
    }

    pub fn get(&self, level: u32, pos: usize) -> Spin {
        self.spins[level as usize][pos]
    }

    pub fn set(&mut self, level: u32, pos: usize, spin: Spin) {
        self.spins[level as usize][pos] = spin;
    }

    pub fn root(&self) -> Spin {
        self.spins[0][0]
    }

    pub fn spin_sum(&self) -> u64 {
        self.spins.iter().flatten().map(|&s| s as u64).sum()
    }

    pub fn max_spin(&self) -> Spin {
        self.spins.iter().flatten().copied().max().unwrap_or(0)
    }

    /// Parent-child pairs as `((level, pos), (level + 1, child))`.
    pub fn edges(&self) -> impl Iterator<Item = ((u32, usize), (u32, usize))> + '_ {
        let b = self.shape.b as usize;
        (0..self.shape.depth).flat_map(move |l| {
            (0..self.spins[l as usize].len())
                .flat_map(move |p| (p * b..p * b + b).map(move |ch| ((l, p), (l + 1, ch))))
        })
    }

    /// True when every spin lies in `0..=C` and every leaf is compatible
    /// with its boundary children.
    pub fn compatible_with_boundary(&self, bc: &BoundaryCondition, c: u32) -> bool {
        let b = self.shape.b;
        self.spins.last().unwrap().iter().enumerate().all(|(pos, &s)| {
            s as u32 + bc.max_child_spin(pos, b, c) as u32 <= c
        })
    }
}

/// `true` iff every spin is at most `C` and every parent-child pair sums to at
/// most `C`.
pub fn feasible(config: &TreeConfig, params: &ModelParams) -> bool {
    let c = params.capacity();
    config.max_spin() as u32 <= c
        && config
            .edges()
            .all(|((l, p), (lc, ch))| config.get(l, p) as u32 + config.get(lc, ch) as u32 <= c)
}

/// `λ^(Σ σ_v)` for a feasible configuration.
pub fn weight(config: &TreeConfig, params: &ModelParams) -> Result<f64> {
    log_weight(config, params).map(f64::exp)
}

/// `(Σ σ_v) · ln λ` for a feasible configuration.
pub fn log_weight(config: &TreeConfig, params: &ModelParams) -> Result<f64> {
    if !feasible(config, params) {
        return Err(Error::InfeasibleConfiguration);
    }
    Ok(config.spin_sum() as f64 * params.ln_lambda())
}

/// The alternating order: `σ ≼ η` iff `σ_v ≤ η_v` at even depth and
/// `σ_v ≥ η_v` at odd depth.
pub fn partial_order_leq(sigma: &TreeConfig, eta: &TreeConfig) -> Result<bool> {
    if sigma.shape != eta.shape {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            sigma.shape, eta.shape
        )));
    }
    Ok(sigma.spins.iter().zip(&eta.spins).enumerate().all(|(l, (s, e))| {
        if l % 2 == 0 {
            s.iter().zip(e).all(|(a, b)| a <= b)
        } else {
            s.iter().zip(e).all(|(a, b)| a >= b)
        }
    }))
}
