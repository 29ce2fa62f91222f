//! One-dimensional S-shaped maps and their fixed points.
//!
//! `J(x) = λ/(1+x)^b` is the one-step odds map of the `C = 1` recursion and
//! `J₂ = J∘J` the two-step map. `F_κ = λ/(κ+λ)·J₂` and `H_γ(z) = γe^{-γe^{-z}}`
//! control the `C = 2` bound and the large-`b` odd-`C` window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack on `|f'(x) - 1|` inside which a fixed point counts as neutral.
pub const TANGENCY_WINDOW: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ScalarMap {
    J { b: u32, lambda: f64 },
    J2 { b: u32, lambda: f64 },
    FKappa { b: u32, lambda: f64, kappa: f64 },
    HGamma { gamma: f64 },
    /// `scale · J₂^{(μ)}(x)`, where `J₂^{(μ)}` is `J₂` with activity `μ`.
    ScaledJ2 { b: u32, mu: f64, scale: f64 },
}

/// `(J, J', J'')` of `J(x) = μ/(1+x)^b`.
fn j_all(b: u32, mu: f64, x: f64) -> (f64, f64, f64) {
    let b = b as f64;
    let j = (mu.ln() - b * x.ln_1p()).exp();
    (j, -b * j / (1.0 + x), b * (b + 1.0) * j / ((1.0 + x) * (1.0 + x)))
}

/// `(J₂, J₂', J₂'')` with activity `μ`.
fn j2_all(b: u32, mu: f64, x: f64) -> (f64, f64, f64) {
    let (j, d, dd) = j_all(b, mu, x);
    let (jj, dj, ddj) = j_all(b, mu, j);
    (jj, dj * d, ddj * d * d + dj * dd)
}

impl ScalarMap {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        match *self {
            ScalarMap::J { b, lambda } | ScalarMap::J2 { b, lambda } => {
                if b < 2 {
                    return bad("b must be at least 2");
                }
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return bad("lambda must be positive");
                }
            }
            ScalarMap::FKappa { b, lambda, kappa } => {
                if b < 2 {
                    return bad("b must be at least 2");
                }
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return bad("lambda must be positive");
                }
                if !(kappa >= 0.0 && kappa.is_finite()) {
                    return bad("kappa must be non-negative");
                }
            }
            ScalarMap::HGamma { gamma } => {
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return bad("gamma must be positive");
                }
            }
            ScalarMap::ScaledJ2 { b, mu, scale } => {
                if b < 2 || !(mu > 0.0 && mu.is_finite()) || !(scale > 0.0 && scale.is_finite()) {
                    return bad("scaled J2 needs b >= 2 and positive mu, scale");
                }
            }
        }
        Ok(())
    }

    /// `(f, f', f'')` at `x`.
    pub fn eval_all(&self, x: f64) -> (f64, f64, f64) {
        match *self {
            ScalarMap::J { b, lambda } => j_all(b, lambda, x),
            ScalarMap::J2 { b, lambda } => j2_all(b, lambda, x),
            ScalarMap::FKappa { b, lambda, kappa } => {
                let t = lambda / (kappa + lambda);
                let (f, d, dd) = j2_all(b, lambda, x);
                (t * f, t * d, t * dd)
            }
            ScalarMap::HGamma { gamma } => {
                let s = gamma * (-x).exp();
                let h = gamma * (-s).exp();
                (h, s * h, s * h * (s - 1.0))
            }
            ScalarMap::ScaledJ2 { b, mu, scale } => {
                let (f, d, dd) = j2_all(b, mu, x);
                (scale * f, scale * d, scale * dd)
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_all(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.eval_all(x).1
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.eval_all(x).2
    }

    /// `sup_{x ≥ 0} f(x)`.
    pub fn sup(&self) -> f64 {
        match *self {
            ScalarMap::J { lambda, .. } | ScalarMap::J2 { lambda, .. } => lambda,
            ScalarMap::FKappa { lambda, kappa, .. } => lambda * lambda / (kappa + lambda),
            ScalarMap::HGamma { gamma } => gamma,
            ScalarMap::ScaledJ2 { mu, scale, .. } => scale * mu,
        }
    }

    /// The one-step map paired with a two-step family, if any.
    fn one_step(&self) -> Option<ScalarMap> {
        match *self {
            ScalarMap::J2 { b, lambda } => Some(ScalarMap::J { b, lambda }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SShapeReport {
    pub is_s_shaped: bool,
    pub inflection: Option<f64>,
    pub violation: Option<String>,
    pub x_max: f64,
}

fn bisect(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sorted union of a uniform grid and a log-spaced grid on `[0, x_max]`.
fn scan_grid(x_max: f64, n: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..=n).map(|k| x_max * k as f64 / n as f64).collect();
    let lo = (x_max * 1e-12).max(f64::MIN_POSITIVE);
    let ratio = (x_max / lo).ln() / n as f64;
    xs.extend((0..n).map(|k| lo * (ratio * k as f64).exp()));
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    xs
}

/// Checks the S-shape clauses on `[0, x_max]`: `f(0) > 0`, `f` increasing and
/// bounded, `f''` changing sign exactly once (from `+` to `-`).
///
/// `x_max` is doubled until `f'(x_max)` falls below half of the largest slope
/// seen and `f` is concave there.
pub fn verify_s_shape(map: &ScalarMap, x_max: f64, grid: usize) -> Result<SShapeReport> {
    map.validate()?;
    if !(x_max > 0.0) || grid < 8 {
        return Err(Error::InvalidParameter("verify_s_shape needs x_max > 0 and grid >= 8".into()));
    }
    let mut x_max = x_max;
    let fail = |why: &str, x_max: f64| SShapeReport {
        is_s_shaped: false,
        inflection: None,
        violation: Some(why.to_string()),
        x_max,
    };
    if !(map.eval(0.0) > 0.0) {
        return Ok(fail("f(0) > 0", x_max));
    }
    if !map.sup().is_finite() {
        return Ok(fail("bounded", x_max));
    }
    for _ in 0..64 {
        let xs = scan_grid(x_max, grid);
        let max_slope = xs.iter().map(|&x| map.derivative(x)).fold(f64::NEG_INFINITY, f64::max);
        let (_, d, dd) = map.eval_all(x_max);
        if d < 0.5 * max_slope && dd <= 0.0 {
            break;
        }
        x_max *= 2.0;
    }
    let xs = scan_grid(x_max, grid);
    if xs.iter().any(|&x| !(map.derivative(x) > 0.0)) {
        return Ok(fail("increasing", x_max));
    }
    let signs: Vec<(f64, f64)> = xs
        .iter()
        .map(|&x| (x, map.second_derivative(x)))
        .filter(|(_, s)| *s != 0.0)
        .collect();
    let changes: Vec<usize> = (1..signs.len())
        .filter(|&k| (signs[k].1 > 0.0) != (signs[k - 1].1 > 0.0))
        .collect();
    if changes.len() != 1 || signs[changes[0]].1 > 0.0 {
        return Ok(fail("single inflection (f'' from + to -)", x_max));
    }
    let k = changes[0];
    let inflection = bisect(signs[k - 1].0, signs[k].0, 1e-14 * x_max.max(1.0), |x| {
        map.second_derivative(x)
    });
    Ok(SShapeReport { is_s_shaped: true, inflection: Some(inflection), violation: None, x_max })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Attracting,
    Repelling,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub value: f64,
    pub derivative: f64,
    pub stability: Stability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSet {
    pub points: Vec<FixedPoint>,
    pub inflection: Option<f64>,
    /// A root sits inside the tangency window.
    pub critical: bool,
    /// For `J₂`: `max(|J(x₋) - x₊|, |J(x₊) - x₋|)` over the outer points.
    pub pairing_residual: Option<f64>,
}

impl FixedPointSet {
    pub fn smallest(&self) -> f64 {
        self.points[0].value
    }

    pub fn largest(&self) -> f64 {
        self.points[self.points.len() - 1].value
    }
}

fn classify(d: f64) -> Stability {
    if (d.abs() - 1.0).abs() < TANGENCY_WINDOW {
        Stability::Neutral
    } else if d.abs() < 1.0 {
        Stability::Attracting
    } else {
        Stability::Repelling
    }
}

/// Points where `f' = 1`. They split `[0, sup f]` into pieces on which
/// `g(x) = f(x) - x` is monotone; inflection points are added as scan nodes
/// so that a narrow bump of `f'` above 1 is never stepped over.
fn slope_one_points(map: &ScalarMap, xs: &[f64]) -> Vec<f64> {
    let mut nodes = xs.to_vec();
    for k in 1..xs.len() {
        let (a, b) = (map.second_derivative(xs[k - 1]), map.second_derivative(xs[k]));
        if a != 0.0 && b != 0.0 && (a > 0.0) != (b > 0.0) {
            nodes.push(bisect(xs[k - 1], xs[k], 1e-15 * xs[k].max(1.0), |x| map.second_derivative(x)));
        }
    }
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = |x: f64| map.derivative(x) - 1.0;
    let mut out = Vec::new();
    for k in 1..nodes.len() {
        let (a, b) = (h(nodes[k - 1]), h(nodes[k]));
        if a != 0.0 && b != 0.0 && (a > 0.0) != (b > 0.0) {
            out.push(bisect(nodes[k - 1], nodes[k], 1e-15 * nodes[k].max(1.0), h));
        } else if b == 0.0 {
            out.push(nodes[k]);
        }
    }
    out
}

/// Roots of `g(x) = f(x) - x` on `[0, sup f]` from a sign-change scan at `n`
/// nodes. An extremum of `g` within tolerance of zero is a tangential root.
fn roots_on_grid(map: &ScalarMap, n: usize, tol: f64) -> Vec<f64> {
    let g = |x: f64| map.eval(x) - x;
    let mut xs = scan_grid(map.sup(), n);
    let extrema = slope_one_points(map, &xs);
    xs.extend(&extrema);
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    let gs: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    let mut roots = Vec::new();
    for k in 0..xs.len() {
        if gs[k] == 0.0 {
            roots.push(xs[k]);
        } else if k > 0 && gs[k - 1] != 0.0 && (gs[k] > 0.0) != (gs[k - 1] > 0.0) {
            roots.push(bisect(xs[k - 1], xs[k], tol, g));
        }
    }
    for &e in &extrema {
        let near = roots.iter().any(|r| (r - e).abs() <= 1e-6 * (1.0 + e));
        if !near && g(e).abs() <= 1e3 * tol * (1.0 + e) {
            roots.push(e);
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() <= 10.0 * tol * (1.0 + b.abs()));
    roots
}

/// All fixed points of `map` on `[0, ∞)`, sorted.
///
/// The scan grid starts at 512 nodes per family and doubles until the root
/// count is the same for two successive refinements.
pub fn fixed_points(map: &ScalarMap, tol: f64) -> Result<FixedPointSet> {
    map.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let mut n = 512;
    let mut roots = roots_on_grid(map, n, tol);
    let mut stable = 0;
    while stable < 2 && n < (1 << 20) {
        n *= 2;
        let next = roots_on_grid(map, n, tol);
        if next.len() == roots.len() {
            stable += 1;
        } else {
            stable = 0;
        }
        roots = next;
    }
    if roots.is_empty() {
        return Err(Error::Precondition("no fixed point located".into()));
    }
    let points: Vec<FixedPoint> = roots
        .iter()
        .map(|&x| {
            let d = map.derivative(x);
            FixedPoint { value: x, derivative: d, stability: classify(d) }
        })
        .collect();
    let critical = points.iter().any(|p| p.stability == Stability::Neutral);
    let inflection = match map {
        ScalarMap::J { .. } => None,
        _ => verify_s_shape(map, map.sup().max(1.0), 512)?.inflection,
    };
    let pairing_residual = match (map.one_step(), points.len()) {
        (Some(j), k) if k >= 2 => {
            let (lo, hi) = (points[0].value, points[k - 1].value);
            Some((j.eval(lo) - hi).abs().max((j.eval(hi) - lo).abs()))
        }
        _ => None,
    };
    Ok(FixedPointSet { points, inflection, critical, pairing_residual })
}

/// `λ_cr(1) = b^b / (b-1)^{b+1}`.
pub fn lambda_cr1(b: u32) -> Result<f64> {
    if b < 2 {
        return Err(Error::InvalidParameter("b must be at least 2".into()));
    }
    let b = b as f64;
    Ok((b * b.ln() - (b + 1.0) * (b - 1.0).ln()).exp())
}

/// Default fixed-point tolerance.
pub const ROOT_TOL: f64 = 1e-13;

/// `1/b - x₋`, with `x₋` the smallest fixed point of `F_1`.
pub fn epsilon_b(b: u32, lambda: f64) -> Result<f64> {
    let fp = fixed_points(&ScalarMap::FKappa { b, lambda, kappa: 1.0 }, ROOT_TOL)?;
    Ok(1.0 / b as f64 - fp.smallest())
}

/// Minimum of [`epsilon_b`] over `grid`, with the activity attaining it.
pub fn epsilon_b_scan(b: u32, grid: &[f64]) -> Result<(f64, f64)> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty lambda grid".into()));
    }
    let mut best = (f64::INFINITY, grid[0]);
    for &l in grid {
        let e = epsilon_b(b, l)?;
        if e < best.0 {
            best = (e, l);
        }
    }
    Ok(best)
}

/// The smallest fixed point `x₋^{(κ)}` of `F_κ` and its `κ`-derivative
/// `-x / (λ(1 - J₂'(x)) + κ)`.
pub fn smallest_point_kappa_derivative(b: u32, lambda: f64, kappa: f64) -> Result<(f64, f64)> {
    let x = fixed_points(&ScalarMap::FKappa { b, lambda, kappa }, ROOT_TOL)?.smallest();
    let d = ScalarMap::J2 { b, lambda }.derivative(x);
    Ok((x, -x / (lambda * (1.0 - d) + kappa)))
}

/// Activity at which `F_κ` acquires three fixed points.
pub fn tangency_lambda(b: u32, kappa: f64) -> Result<f64> {
    let multiple = |l: f64| -> Result<bool> {
        Ok(fixed_points(&ScalarMap::FKappa { b, lambda: l, kappa }, ROOT_TOL)?.points.len() >= 2)
    };
    let mut lo = lambda_cr1(b)? * 0.5;
    let mut hi = lambda_cr1(b)? * 2.0;
    while multiple(lo)? {
        lo *= 0.5;
    }
    while !multiple(hi)? {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Precondition("no tangency below 1e12".into()));
        }
    }
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if multiple(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
