//! Large-`b` checks: the predicted uniqueness/coexistence window and the
//! jump functional `m(λ)` for even `C`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{constant_seed_limits, delta_lambda, parity_limits, CriticalOptions, PhasePoint};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::recursion::tracked_scalar;

/// Smallest `b` at which the asymptotic predictions are checked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowGuard {
    pub odd_min_b: u32,
    pub even_min_b: u32,
}

impl Default for WindowGuard {
    fn default() -> Self {
        WindowGuard { odd_min_b: 1_000, even_min_b: 10_000 }
    }
}

/// Limits from a constant boundary spin at a window probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantSeedProbe {
    pub spin: u32,
    pub x_even: f64,
    pub x_odd: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowProbe {
    pub gamma: f64,
    pub lambda: f64,
    pub predicted_coexists: bool,
    pub point: PhasePoint,
    pub agrees: bool,
    /// For odd `C`: limits from the `⌊C/2⌋` and `⌈C/2⌉` boundaries.
    pub constant_seeds: Vec<ConstantSeedProbe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub b: u32,
    pub c: u32,
    pub probes: Vec<WindowProbe>,
    pub consistent: bool,
}

/// Probe activities `(γ, λ, predicted coexistence)`, low probe first.
///
/// Odd `C`: `λ = (γ/b)^{1/⌈C/2⌉}` with `γ ∈ {2.5, 3.2}` on either side of `e`.
/// Even `C`: `λ = (γ ln b / b)^{2/(C+2)}` with `γ ∈ {0.6, 2}/(C+2)` on either
/// side of `1/(C+2)`.
pub fn window_probes(b: u32, c: u32) -> Vec<(f64, f64, bool)> {
    let bf = b as f64;
    if c % 2 == 1 {
        let jc = c.div_ceil(2) as f64;
        [(2.5, false), (3.2, true)]
            .into_iter()
            .map(|(g, co)| (g, (g / bf).powf(1.0 / jc), co))
            .collect()
    } else {
        let k = (c + 2) as f64;
        [(0.6 / k, false), (2.0 / k, true)]
            .into_iter()
            .map(|(g, co)| (g, (g * bf.ln() / bf).powf(2.0 / k), co))
            .collect()
    }
}

/// Runs `δ_λ` at the two window probes and compares with the predictions.
pub fn asymptotic_window(b: u32, c: u32, guard: &WindowGuard, opts: &CriticalOptions) -> Result<WindowReport> {
    let min = if c % 2 == 1 { guard.odd_min_b } else { guard.even_min_b };
    if b < min {
        return Err(Error::AsymptoticGuard { b, min });
    }
    let base = ModelParams::new(b, c, 0.5)?;
    let probes = window_probes(b, c)
        .into_par_iter()
        .map(|(gamma, lambda, predicted)| -> Result<WindowProbe> {
            let params = base.with_lambda(lambda)?;
            let point = delta_lambda(&params, opts)?;
            let mut constant_seeds = Vec::new();
            if c % 2 == 1 {
                for spin in [c / 2, c.div_ceil(2)] {
                    let lim = constant_seed_limits(&params, spin, &opts.limits)?;
                    constant_seeds.push(ConstantSeedProbe {
                        spin,
                        x_even: tracked_scalar(&lim.even, &params),
                        x_odd: tracked_scalar(&lim.odd, &params),
                        converged: lim.converged,
                    });
                }
            }
            Ok(WindowProbe {
                gamma,
                lambda,
                predicted_coexists: predicted,
                agrees: point.determined && point.coexists == predicted,
                point,
                constant_seeds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let consistent = probes.iter().all(|p| p.agrees);
    Ok(WindowReport { b, c, probes, consistent })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MPoint {
    pub lambda: f64,
    pub m: f64,
    pub determined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MScan {
    pub points: Vec<MPoint>,
    /// Grid cell holding the largest increase of `m`.
    pub jump_location: Option<(f64, f64)>,
    pub jump_size: f64,
    /// `m` is non-decreasing along the grid.
    pub monotone: bool,
}

/// `m(λ)`: the even-level limit of `P_full(σ > C/2) - P_empty(σ > C/2)`.
pub fn m_of_lambda_scan(b: u32, c: u32, lambda_grid: &[f64], opts: &CriticalOptions) -> Result<MScan> {
    if c % 2 != 0 {
        return Err(Error::Precondition("m(λ) is defined for even C".into()));
    }
    if lambda_grid.is_empty() {
        return Err(Error::InvalidParameter("empty lambda grid".into()));
    }
    let base = ModelParams::new(b, c, 1.0)?;
    let k = (c / 2 + 1) as usize;
    let mut points = lambda_grid
        .par_iter()
        .map(|&l| -> Result<MPoint> {
            let lim = parity_limits(&base.with_lambda(l)?, &opts.limits)?;
            // Odd levels of the empty trajectory are even levels of the full one.
            let m = lim.odd.ccdf(k) - lim.even.ccdf(k);
            Ok(MPoint { lambda: l, m: m.max(0.0), determined: lim.converged })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap());
    let mut jump_location = None;
    let mut jump_size = 0.0;
    for w in points.windows(2) {
        let d = w[1].m - w[0].m;
        if d > jump_size {
            jump_size = d;
            jump_location = Some((w[0].lambda, w[1].lambda));
        }
    }
    let monotone = points.windows(2).all(|w| w[1].m >= w[0].m - opts.gap_tol);
    Ok(MScan { points, jump_location, jump_size, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guard_applies() {
        let err = asymptotic_window(100, 3, &WindowGuard::default(), &CriticalOptions::default());
        assert!(matches!(err, Err(Error::AsymptoticGuard { b: 100, min: 1000 })));
        assert!(err.unwrap_err().to_string().contains("b below asymptotic guard"));
    }

    #[test]
    fn probe_formulas() {
        let p = window_probes(10_000, 3);
        assert!((p[0].1 - (2.5f64 / 1e4).sqrt()).abs() < 1e-15);
        assert!((p[1].1 - (3.2f64 / 1e4).sqrt()).abs() < 1e-15);
        let p = window_probes(100_000, 2);
        let lb = (1e5f64).ln() / 1e5;
        assert!((p[0].1 - (0.15 * lb).sqrt()).abs() < 1e-15);
        assert!((p[1].1 - (0.5 * lb).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn m_scan_c2_b2() {
        let grid: Vec<f64> = (0..9).map(|k| 6.8 + 0.1 * k as f64).collect();
        let scan = m_of_lambda_scan(2, 2, &grid, &CriticalOptions::default()).unwrap();
        assert!(scan.monotone);
        assert!(scan.points[0].m < 1e-8);
        assert!(scan.points.last().unwrap().m > 0.0);
        let (lo, hi) = scan.jump_location.unwrap();
        assert!(lo < 7.2753875 && 7.2753875 < hi);
        assert!(m_of_lambda_scan(2, 3, &grid, &CriticalOptions::default()).is_err());
    }
}
