//! Coexistence detection, critical activities and the order of the transition.
//!
//! Coexistence at `λ` means the even-level limits of the root law from the
//! empty and the full boundary differ. Their total variation distance is the
//! gap `δ_λ`; `λ` counts as coexisting when `δ_λ > gap_tol`.

pub mod limits;
pub mod window;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::tv_distance;
use crate::maps::epsilon_b;
use crate::model::ModelParams;
use crate::recursion::tracked_scalar;

pub use limits::{constant_seed_limits, parity_limits, LimitOptions, ParityLimits};
pub use window::{asymptotic_window, m_of_lambda_scan, MPoint, MScan, WindowGuard, WindowProbe, WindowReport};

pub const DEFAULT_GAP_TOL: f64 = 1e-8;
/// Default search interval for the critical activity.
pub const DEFAULT_BRACKET: (f64, f64) = (1e-4, 100.0);
/// Default relative width of the final bracket.
pub const DEFAULT_BRACKET_TOL: f64 = 1e-7;
pub const DEFAULT_PROBE_OFFSETS: [f64; 3] = [1e-2, 1e-3, 1e-4];

const PROBES_PER_ROUND: usize = 8;
const WIDEN_LIMITS: (f64, f64) = (1e-12, 1e8);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalOptions {
    pub gap_tol: f64,
    pub limits: LimitOptions,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        CriticalOptions { gap_tol: DEFAULT_GAP_TOL, limits: LimitOptions::default() }
    }
}

impl CriticalOptions {
    fn validate(&self) -> Result<()> {
        if !(self.gap_tol > 0.0) || !(self.limits.tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// The gap and the tracked scalars at one activity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub lambda: f64,
    pub delta: f64,
    pub coexists: bool,
    /// Double steps of the recursion.
    pub iterations: u64,
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    /// `false` when the recursion hit its iteration cap.
    pub determined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    First,
    Second,
    Undetermined,
}

/// `δ_λ` from the empty and full boundary limits.
pub fn delta_lambda(params: &ModelParams, opts: &CriticalOptions) -> Result<PhasePoint> {
    opts.validate()?;
    let lim = parity_limits(params, &opts.limits)?;
    let delta = tv_distance(&lim.even, &lim.odd)?;
    let (a, b) = (tracked_scalar(&lim.even, params), tracked_scalar(&lim.odd, params));
    Ok(PhasePoint {
        lambda: params.lambda(),
        delta,
        coexists: delta > opts.gap_tol,
        iterations: lim.two_steps,
        m: a.min(b),
        big_m: a.max(b),
        determined: lim.converged,
    })
}

/// Outcome of a critical-activity search or a grid scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    /// Every evaluated point, sorted by activity.
    pub points: Vec<PhasePoint>,
    pub lambda_cr_bracket: Option<(f64, f64)>,
    pub lambda_cr: Option<f64>,
    pub order: Order,
    pub jump_estimate: Option<f64>,
    /// The indicator was monotone and every point converged.
    pub consistent: bool,
    pub diagnostics: Vec<String>,
}

fn sort_points(points: &mut [PhasePoint]) {
    points.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap());
}

fn eval_many(base: &ModelParams, lambdas: &[f64], opts: &CriticalOptions) -> Result<Vec<PhasePoint>> {
    lambdas
        .par_iter()
        .map(|&l| delta_lambda(&base.with_lambda(l)?, opts))
        .collect()
}

/// Index of the first coexisting point if the indicator switches once
/// (`false…false true…true`), `None` otherwise.
fn single_flip(points: &[PhasePoint]) -> Option<usize> {
    let first = points.iter().position(|p| p.coexists)?;
    points[first..].iter().all(|p| p.coexists).then_some(first)
}

fn undetermined(points: Vec<PhasePoint>, bracket: Option<(f64, f64)>, why: String) -> ScanResult {
    let mut points = points;
    sort_points(&mut points);
    ScanResult {
        points,
        lambda_cr_bracket: bracket,
        lambda_cr: None,
        order: Order::Undetermined,
        jump_estimate: None,
        consistent: false,
        diagnostics: vec![why],
    }
}

/// Brackets the critical activity of `(b, C)` to relative width `rel_tol`
/// and classifies the order of the transition there.
///
/// Each round evaluates eight interior points in parallel (geometrically
/// spaced while the bracket spans more than a factor of two) and keeps the
/// cell where the indicator switches. An endpoint on the wrong side is moved
/// outwards by factors of ten.
pub fn find_lambda_cr(
    b: u32,
    c: u32,
    bracket: Option<(f64, f64)>,
    rel_tol: f64,
    opts: &CriticalOptions,
) -> Result<ScanResult> {
    opts.validate()?;
    let base = ModelParams::new(b, c, 1.0)?;
    let (mut lo, mut hi) = bracket.unwrap_or(DEFAULT_BRACKET);
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!("invalid bracket ({lo}, {hi})")));
    }
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidParameter("bracket tolerance must be positive".into()));
    }
    let eval = |l: f64| delta_lambda(&base.with_lambda(l)?, opts);
    let mut points = Vec::new();
    let mut p_lo = eval(lo)?;
    while p_lo.coexists && p_lo.determined && lo > WIDEN_LIMITS.0 {
        points.push(p_lo);
        lo /= 10.0;
        p_lo = eval(lo)?;
    }
    let mut p_hi = eval(hi)?;
    while !p_hi.coexists && p_hi.determined && hi < WIDEN_LIMITS.1 {
        points.push(p_hi);
        hi *= 10.0;
        p_hi = eval(hi)?;
    }
    points.extend([p_lo, p_hi]);
    if !p_lo.determined || !p_hi.determined {
        return Ok(undetermined(points, Some((lo, hi)), "recursion did not converge at a bracket end".into()));
    }
    if p_lo.coexists || !p_hi.coexists {
        return Ok(undetermined(points, None, "no bracket with uniqueness below and coexistence above".into()));
    }
    while hi - lo > rel_tol * hi {
        let geometric = hi / lo > 2.0;
        let probes: Vec<f64> = (1..=PROBES_PER_ROUND)
            .map(|k| {
                let s = k as f64 / (PROBES_PER_ROUND + 1) as f64;
                if geometric { lo * (hi / lo).powf(s) } else { lo + s * (hi - lo) }
            })
            .collect();
        let round = eval_many(&base, &probes, opts)?;
        points.extend(&round);
        if let Some(p) = round.iter().find(|p| !p.determined) {
            return Ok(undetermined(points, Some((lo, hi)), format!("recursion did not converge at λ = {}", p.lambda)));
        }
        let mut cell = vec![p_lo];
        cell.extend(&round);
        cell.push(p_hi);
        let Some(k) = single_flip(&cell) else {
            return Ok(undetermined(points, Some((lo, hi)), "non-monotone coexistence indicator".into()));
        };
        (p_lo, p_hi) = (cell[k - 1], cell[k]);
        (lo, hi) = (p_lo.lambda, p_hi.lambda);
    }
    sort_points(&mut points);
    let lambda_cr = 0.5 * (lo + hi);
    let report = classify_order(b, c, lambda_cr, &DEFAULT_PROBE_OFFSETS, opts)?;
    let mut diagnostics = report.diagnostics.clone();
    diagnostics.push(format!("gap just above the bracket: {}", p_hi.delta));
    Ok(ScanResult {
        points,
        lambda_cr_bracket: Some((lo, hi)),
        lambda_cr: Some(lambda_cr),
        order: report.order,
        jump_estimate: report.jump_estimate.or(Some(p_hi.delta)),
        consistent: true,
        diagnostics,
    })
}

/// Evaluates `δ_λ` on a grid in parallel and summarizes where the
/// indicator switches. The order is not classified here.
pub fn scan_lambda_grid(b: u32, c: u32, grid: &[f64], opts: &CriticalOptions) -> Result<ScanResult> {
    opts.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty lambda grid".into()));
    }
    let base = ModelParams::new(b, c, 1.0)?;
    let mut points = eval_many(&base, grid, opts)?;
    sort_points(&mut points);
    let mut diagnostics = Vec::new();
    let all_determined = points.iter().all(|p| p.determined);
    if !all_determined {
        diagnostics.push("recursion did not converge at some grid points".into());
    }
    let flip = single_flip(&points);
    let any = points.iter().any(|p| p.coexists);
    if any && flip.is_none() {
        diagnostics.push("non-monotone coexistence indicator".into());
    }
    let (bracket, jump) = match flip {
        Some(0) => {
            diagnostics.push("coexistence at every grid point".into());
            (None, Some(points[0].delta))
        }
        Some(k) => (Some((points[k - 1].lambda, points[k].lambda)), Some(points[k].delta)),
        None => (None, None),
    };
    Ok(ScanResult {
        lambda_cr: bracket.map(|(l, h)| 0.5 * (l + h)),
        lambda_cr_bracket: bracket,
        points,
        order: Order::Undetermined,
        jump_estimate: jump,
        consistent: all_determined && (flip.is_some() || !any),
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub order: Order,
    /// Extrapolated gap at `λ_cr⁺`.
    pub jump_estimate: Option<f64>,
    /// Log-log slope of the gap against the offset.
    pub slope: Option<f64>,
    /// `(offset, point)` pairs, largest offset first.
    pub probes: Vec<(f64, PhasePoint)>,
    /// The lower bound `1/b - x₋` on the scalar jump, for `C = 2`.
    pub epsilon_bound: Option<f64>,
    pub diagnostics: Vec<String>,
}

fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Aitken extrapolation of the last three terms, clipped to `[0, d3]`.
fn aitken(d1: f64, d2: f64, d3: f64) -> f64 {
    let den = d3 - 2.0 * d2 + d1;
    let j = if den.abs() > 1e-300 { d3 - (d3 - d2) * (d3 - d2) / den } else { d3 };
    j.clamp(0.0, d3)
}

/// First order if `δ` tends to a positive jump as `λ ↓ λ_cr`, second order
/// if it vanishes like a power of the offset.
///
/// `δ` is evaluated at `λ_cr·(1+o)`. A slope of at least 1/4 on log-log axes
/// together with an extrapolated jump below a tenth of the smallest gap means
/// second order; a slope below 1/5 with an extrapolated jump above half the
/// smallest gap means first order. For `C = 2` a first-order verdict also
/// requires the jump in the tracked scalar `M - m` to exceed `1/b - x₋`.
pub fn classify_order(
    b: u32,
    c: u32,
    lambda_cr: f64,
    probe_offsets: &[f64],
    opts: &CriticalOptions,
) -> Result<OrderReport> {
    opts.validate()?;
    if probe_offsets.len() < 3 || probe_offsets.iter().any(|o| !(*o > 0.0)) {
        return Err(Error::InvalidParameter("need at least three positive probe offsets".into()));
    }
    let base = ModelParams::new(b, c, lambda_cr)?;
    let mut offsets = probe_offsets.to_vec();
    offsets.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let lambdas: Vec<f64> = offsets.iter().map(|o| lambda_cr * (1.0 + o)).collect();
    let points = eval_many(&base, &lambdas, opts)?;
    let probes: Vec<(f64, PhasePoint)> = offsets.iter().copied().zip(points.iter().copied()).collect();
    let mut report = OrderReport {
        order: Order::Undetermined,
        jump_estimate: None,
        slope: None,
        probes,
        epsilon_bound: None,
        diagnostics: Vec::new(),
    };
    if points.iter().any(|p| !p.determined) {
        report.diagnostics.push("recursion did not converge at a probe".into());
        return Ok(report);
    }
    if points.iter().any(|p| !p.coexists) {
        report.diagnostics.push("no coexistence at some probe above the critical activity".into());
        return Ok(report);
    }
    let deltas: Vec<f64> = points.iter().map(|p| p.delta).collect();
    if deltas.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-9)) {
        report.diagnostics.push("gap is not monotone in the offset".into());
        return Ok(report);
    }
    let slope = log_log_slope(&offsets, &deltas);
    let n = deltas.len();
    let d_min = deltas[n - 1];
    let jump = aitken(deltas[n - 3], deltas[n - 2], d_min);
    report.slope = Some(slope);
    report.jump_estimate = Some(jump);
    report.order = if slope >= 0.25 && jump <= 0.1 * d_min {
        Order::Second
    } else if slope < 0.2 && jump >= 0.5 * d_min {
        Order::First
    } else {
        report.diagnostics.push(format!("ambiguous gap profile: slope {slope}, jump {jump}"));
        Order::Undetermined
    };
    if c == 2 && report.order == Order::First {
        let eps = epsilon_b(b, lambda_cr)?;
        report.epsilon_bound = Some(eps);
        let closest = points[n - 1];
        let scalar_jump = closest.big_m - closest.m;
        if scalar_jump < eps {
            report.diagnostics.push(format!("scalar jump {scalar_jump} below the bound {eps}"));
            report.order = Order::Undetermined;
        }
    }
    Ok(report)
}
