//! The level recursion on root laws.
//!
//! One level up the tree maps the root law `p` of a subtree to
//! `p'(i) ∝ λ^i P(σ ≤ C - i)^b`. The law at level 0 is a point mass at the
//! boundary spin, so `Full` gives `δ_C` and `Empty` gives `δ_0`. For `C = 2`
//! the same recursion reduces to a second-order scalar recursion in
//! `Y = R(1) = 1/P(σ ≤ 1)`, implemented by [`c2_two_step`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::RootLaw;
use crate::logspace::log_add_exp;
use crate::maps::ScalarMap;
use crate::model::{BoundaryCondition, ModelParams};

/// Default convergence tolerance on successive even (or odd) laws.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Default cap on the number of even levels.
pub const DEFAULT_MAX_EVEN_LEVELS: u64 = 100_000;

/// The level-0 law of a homogeneous boundary condition.
pub fn seed_law(bc: &BoundaryCondition, c: u32) -> Result<RootLaw> {
    match bc.constant_spin(c) {
        Some(s) if (s as u32) <= c => Ok(RootLaw::delta(s, c, 0)),
        Some(s) => Err(Error::InvalidBoundary(format!("boundary spin {s} exceeds C = {c}"))),
        None => Err(Error::InvalidBoundary(
            "the level recursion needs a homogeneous boundary condition".into(),
        )),
    }
}

/// One level of the recursion: `log p'(i) = i log λ + b log P(σ ≤ C-i) - log Z`.
pub fn law_step(p: &RootLaw, params: &ModelParams) -> Result<RootLaw> {
    let c = params.capacity();
    if p.capacity() != c {
        return Err(Error::DimensionMismatch { expected: c as usize + 1, found: p.capacity() as usize + 1 });
    }
    let b = params.b() as f64;
    let ln_l = params.ln_lambda();
    let w = (0..=c as usize)
        .map(|i| i as f64 * ln_l + b * p.log_cdf(c as usize - i))
        .collect();
    RootLaw::from_log_weights(w, p.level() + 1)
}

/// The scalar `X = P(σ ≥ t) / P(σ < t)` tracked through the transition.
pub fn tracked_scalar(law: &RootLaw, params: &ModelParams) -> f64 {
    law.tail_ratio(params.tail_threshold() as usize)
}

/// Two consecutive values of `Y = R(1)` for `C = 2`.
///
/// Stored as the excesses `X = Y - 1` so that values of `Y` within rounding
/// of 1 (large `b`) keep their precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C2State {
    x_prev: f64,
    x_curr: f64,
}

impl C2State {
    /// From `(Y_{n-1}, Y_n)`; `Y_{n-1} = +∞` is allowed.
    pub fn new(y_prev: f64, y_curr: f64) -> Result<Self> {
        if !(y_prev >= 1.0) || !(y_curr >= 1.0) || !y_curr.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "C = 2 state needs Y_prev in [1, inf] and finite Y_curr >= 1, got ({y_prev}, {y_curr})"
            )));
        }
        Ok(C2State { x_prev: y_prev - 1.0, x_curr: y_curr - 1.0 })
    }

    /// From the excesses `(X_{n-1}, X_n)`.
    pub fn from_excess(x_prev: f64, x_curr: f64) -> Result<Self> {
        if !(x_prev >= 0.0) || !(x_curr >= 0.0) || !x_curr.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid C = 2 excesses ({x_prev}, {x_curr})")));
        }
        Ok(C2State { x_prev, x_curr })
    }

    /// `(Y_0, Y_1) = (1, 1 + λ²/(1+λ))`.
    pub fn empty_seed(lambda: f64) -> Self {
        C2State { x_prev: 0.0, x_curr: lambda * lambda / (1.0 + lambda) }
    }

    /// `(Y_0, Y_1) = (+∞, 1)`.
    pub fn full_seed() -> Self {
        C2State { x_prev: f64::INFINITY, x_curr: 0.0 }
    }

    pub fn y_prev(&self) -> f64 {
        1.0 + self.x_prev
    }

    pub fn y_curr(&self) -> f64 {
        1.0 + self.x_curr
    }

    pub fn x_prev(&self) -> f64 {
        self.x_prev
    }

    pub fn x_curr(&self) -> f64 {
        self.x_curr
    }
}

/// `Y_{n+1} = 1 + λ² / ((Y_n^b + λ)(1 + λ/Y_{n-1}^b)^b)`; returns `(Y_n, Y_{n+1})`.
pub fn c2_two_step(state: C2State, params: &ModelParams) -> Result<C2State> {
    if params.capacity() != 2 {
        return Err(Error::Precondition(format!(
            "the scalar recursion needs C = 2, got C = {}",
            params.capacity()
        )));
    }
    let b = params.b() as f64;
    let ln_l = params.ln_lambda();
    let inner = (ln_l - b * state.x_prev.ln_1p()).exp();
    let log_x = 2.0 * ln_l - log_add_exp(b * state.x_curr.ln_1p(), ln_l) - b * inner.ln_1p();
    Ok(C2State { x_prev: state.x_curr, x_curr: log_x.exp() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryStatus {
    ConvergedUnique,
    ConvergedPeriod2,
    MaxIterations,
}

/// A run of the recursion from a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub laws: Vec<RootLaw>,
    pub tol: f64,
    pub status: TrajectoryStatus,
    /// Smaller of the even and odd limits of the tracked scalar.
    pub m: f64,
    /// Larger of the even and odd limits of the tracked scalar.
    #[serde(rename = "M")]
    pub big_m: f64,
}

/// Scalar trajectory of the `C = 2` recursion in `X = Y - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C2Trajectory {
    pub x: Vec<f64>,
    pub tol: f64,
    pub status: TrajectoryStatus,
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
}

/// Decides convergence of a subsequence from its last two increments.
///
/// A small increment alone is not enough near criticality, where the
/// contraction rate `r` approaches 1; the remaining error `d·r/(1-r)` must
/// also be below `tol`.
fn settled(d_now: f64, d_before: f64, tol: f64) -> bool {
    if d_now == 0.0 {
        return true;
    }
    if d_now >= tol || !(d_before > 0.0) {
        return false;
    }
    let r = d_now / d_before;
    r < 1.0 && d_now * r / (1.0 - r) < tol
}

fn check_iterate_args(tol: f64, max_even_levels: u64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    if max_even_levels == 0 {
        return Err(Error::InvalidParameter("max_even_levels must be positive".into()));
    }
    Ok(())
}

/// Iterates [`law_step`] from `seed`, watching even and odd levels separately.
///
/// Stops once both subsequences have settled or after `max_even_levels`
/// double steps. The status is `ConvergedPeriod2` when the two limits differ
/// by more than `10·tol` in sup norm.
pub fn iterate(seed: &RootLaw, params: &ModelParams, tol: f64, max_even_levels: u64) -> Result<Trajectory> {
    check_iterate_args(tol, max_even_levels)?;
    let mut laws = vec![seed.clone()];
    let mut diffs: Vec<f64> = Vec::new();
    let mut status = TrajectoryStatus::MaxIterations;
    for _ in 0..2 * max_even_levels {
        let next = law_step(laws.last().unwrap(), params)?;
        if laws.len() >= 2 {
            diffs.push(next.sup_distance(&laws[laws.len() - 2]));
        }
        laws.push(next);
        let k = diffs.len();
        if k >= 4 && settled(diffs[k - 1], diffs[k - 3], tol) && settled(diffs[k - 2], diffs[k - 4], tol) {
            let n = laws.len();
            status = if laws[n - 1].sup_distance(&laws[n - 2]) > 10.0 * tol {
                TrajectoryStatus::ConvergedPeriod2
            } else {
                TrajectoryStatus::ConvergedUnique
            };
            break;
        }
    }
    let n = laws.len();
    let (a, b) = (tracked_scalar(&laws[n - 1], params), tracked_scalar(&laws[n - 2], params));
    Ok(Trajectory { laws, tol, status, m: a.min(b), big_m: a.max(b) })
}

/// Iterates [`c2_two_step`] from `seed`; `x[k]` is `X` at level `k`.
pub fn iterate_c2(seed: C2State, params: &ModelParams, tol: f64, max_even_levels: u64) -> Result<C2Trajectory> {
    check_iterate_args(tol, max_even_levels)?;
    let mut x = vec![seed.x_prev, seed.x_curr];
    let mut state = seed;
    let mut status = TrajectoryStatus::MaxIterations;
    for _ in 0..2 * max_even_levels {
        state = c2_two_step(state, params)?;
        x.push(state.x_curr);
        let n = x.len();
        if n >= 6 {
            let d = |k: usize| (x[k] - x[k - 2]).abs();
            if settled(d(n - 1), d(n - 3), tol) && settled(d(n - 2), d(n - 4), tol) {
                status = if (x[n - 1] - x[n - 2]).abs() > 10.0 * tol {
                    TrajectoryStatus::ConvergedPeriod2
                } else {
                    TrajectoryStatus::ConvergedUnique
                };
                break;
            }
        }
    }
    let n = x.len();
    let (a, b) = (x[n - 1], x[n - 2]);
    Ok(C2Trajectory { x, tol, status, m: a.min(b), big_m: a.max(b) })
}

/// The maps `(F₋, F₊)` bounding `X_{n+2}(j)` in terms of `X_n(j)`, where
/// `X(j) = R(j) - 1`:
/// `F± = A^{±2} λ^{j*-j+1} J₂^{(μ±)}` with `μ₊ = λ^j/A`, `μ₋ = Aλ^j`, `A = 1/(1-λ)`.
pub fn envelope_maps(j: u32, params: &ModelParams) -> Result<(ScalarMap, ScalarMap)> {
    let a = params.a_lambda()?;
    let c = params.capacity();
    if j == 0 || j > c {
        return Err(Error::InvalidParameter(format!("envelope index must lie in 1..={c}, got {j}")));
    }
    let l = params.lambda();
    let lj = l.powi(j as i32);
    let base = l.powi(c as i32 - 2 * j as i32 + 1);
    let b = params.b();
    let lower = ScalarMap::ScaledJ2 { b, mu: a * lj, scale: base / (a * a) };
    let upper = ScalarMap::ScaledJ2 { b, mu: lj / a, scale: base * a * a };
    Ok((lower, upper))
}

/// `X(j) = R(j) - 1 = P(σ > C-j) / P(σ ≤ C-j)`.
pub fn envelope_scalar(law: &RootLaw, j: u32) -> f64 {
    let c = law.capacity();
    law.tail_ratio((c - j + 1) as usize)
}
