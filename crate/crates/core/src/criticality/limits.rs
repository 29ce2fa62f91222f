//! Even and odd limits of the level recursion.
//!
//! The recursion is run in log-odds coordinates `z(i) = ln p(i) - ln p(0)`,
//! `i = 1..=C`, where one level reads
//! `z'(i) = i ln λ - b ln(P(σ ≤ C) / P(σ ≤ C-i))`.
//! Started from the empty boundary, even levels increase and odd levels
//! decrease (stochastically). Odd levels of the empty trajectory are the even
//! levels of the full one, so one trajectory yields both limits.
//!
//! Near a transition the two-step map `F` has a fixed point with derivative
//! close to 1 and plain iteration needs millions of steps. Every few hundred
//! steps the solver tries Newton's method on `F(z) = z` and accepts the
//! result only when it is the limit that iteration would reach: the candidate
//! lies on the side the subsequence is moving towards, `F` moves every point
//! of the segment between the iterate and the candidate in that direction,
//! and the candidate is not repelling.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::RootLaw;
use crate::logspace::log_add_exp;
use crate::model::ModelParams;
use crate::recursion::law_step;

/// Options for [`parity_limits`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitOptions {
    /// Convergence tolerance on laws (sup norm).
    pub tol: f64,
    /// Cap on double steps.
    pub max_two_steps: u64,
    /// Try certified Newton steps.
    pub accelerate: bool,
}

impl Default for LimitOptions {
    fn default() -> Self {
        LimitOptions { tol: 1e-12, max_two_steps: 1_000_000, accelerate: true }
    }
}

/// Even- and odd-level limits of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityLimits {
    pub even: RootLaw,
    pub odd: RootLaw,
    pub two_steps: u64,
    pub converged: bool,
    pub accelerated: bool,
}

const NEWTON_EVERY: u64 = 256;
const NEWTON_FIRST: u64 = 16;
const SEGMENT_POINTS: usize = 64;
const DOMINANCE_SLACK: f64 = 1e-13;
const RESIDUAL_TOL: f64 = 1e-13;
const SPECTRAL_SLACK: f64 = 1e-9;

/// One level of the recursion in log-odds coordinates.
#[derive(Debug, Clone, Copy)]
pub(crate) struct OddsMap {
    c: usize,
    b: f64,
    ln_l: f64,
}

impl OddsMap {
    pub(crate) fn new(params: &ModelParams) -> Self {
        OddsMap { c: params.capacity() as usize, b: params.b() as f64, ln_l: params.ln_lambda() }
    }

    fn full(&self, z: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.c + 1);
        v.push(0.0);
        v.extend_from_slice(z);
        v
    }

    /// `(pre, suf)` with `pre[m] = ln Σ_{k≤m}`, `suf[m] = ln Σ_{k≥m}`.
    fn prefix_suffix(v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = v.len();
        let mut pre = vec![f64::NEG_INFINITY; n];
        let mut suf = vec![f64::NEG_INFINITY; n + 1];
        let mut acc = f64::NEG_INFINITY;
        for k in 0..n {
            acc = log_add_exp(acc, v[k]);
            pre[k] = acc;
        }
        let mut acc = f64::NEG_INFINITY;
        for k in (0..n).rev() {
            acc = log_add_exp(acc, v[k]);
            suf[k] = acc;
        }
        (pre, suf)
    }

    pub(crate) fn step(&self, z: &[f64]) -> Vec<f64> {
        self.step_inner(z, false).0
    }

    fn step_inner(&self, z: &[f64], jac: bool) -> (Vec<f64>, Option<DMatrix<f64>>) {
        let c = self.c;
        let v = self.full(z);
        let (pre, suf) = Self::prefix_suffix(&v);
        // ln(P(σ ≤ C) / P(σ ≤ m)), evaluated through the tail above m.
        let gap = |m: usize| if m == c { 0.0 } else { log_add_exp(0.0, suf[m + 1] - pre[m]) };
        let out: Vec<f64> = (1..=c).map(|i| i as f64 * self.ln_l - self.b * gap(c - i)).collect();
        if !jac {
            return (out, None);
        }
        let mut m = DMatrix::zeros(c, c);
        for i in 1..=c {
            for k in 1..=c {
                let w_all = (v[k] - pre[c]).exp();
                let w_part = if k <= c - i { (v[k] - pre[c - i]).exp() } else { 0.0 };
                m[(i - 1, k - 1)] = self.b * (w_part - w_all);
            }
        }
        (out, Some(m))
    }

    pub(crate) fn two(&self, z: &[f64]) -> Vec<f64> {
        self.step(&self.step(z))
    }

    fn two_jac(&self, z: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let (y, j1) = self.step_inner(z, true);
        let (w, j2) = self.step_inner(&y, true);
        (w, j2.unwrap() * j1.unwrap())
    }
}

pub(crate) fn law_of(z: &[f64], level: u32) -> RootLaw {
    let mut w = Vec::with_capacity(z.len() + 1);
    w.push(0.0);
    w.extend_from_slice(z);
    RootLaw::from_log_weights(w, level).expect("finite log-odds give a valid law")
}

pub(crate) fn odds_of(law: &RootLaw) -> Option<Vec<f64>> {
    let lp = law.log_probs();
    let z: Vec<f64> = lp[1..].iter().map(|x| x - lp[0]).collect();
    z.iter().all(|x| x.is_finite()).then_some(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Up,
    Down,
}

fn ordered(lower: &RootLaw, upper: &RootLaw) -> bool {
    lower.dominated_by(upper, DOMINANCE_SLACK)
}

fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.clone().complex_eigenvalues().iter().map(|e| e.norm()).fold(0.0, f64::max)
}

/// Newton's method on `F(z) = z` from `z0`, returning the root only if it
/// passes the acceptance checks described in the module docs.
fn certified_newton(map: &OddsMap, z0: &[f64], dir: Direction) -> Option<Vec<f64>> {
    let c = z0.len();
    let mut z = z0.to_vec();
    let mut best = f64::INFINITY;
    let mut stalls = 0;
    for _ in 0..80 {
        let (fz, j) = map.two_jac(&z);
        let r = DVector::from_iterator(c, fz.iter().zip(&z).map(|(a, b)| a - b));
        let size = z.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        let norm = r.amax();
        if !norm.is_finite() {
            return None;
        }
        if norm <= 4.0 * f64::EPSILON * size {
            break;
        }
        if norm < 0.5 * best {
            best = norm;
            stalls = 0;
        } else {
            stalls += 1;
            if stalls > 4 {
                break;
            }
        }
        let a = j - DMatrix::identity(c, c);
        let delta = a.lu().solve(&(-r))?;
        for (zi, d) in z.iter_mut().zip(delta.iter()) {
            *zi += d;
        }
        if z.iter().any(|x| !x.is_finite()) {
            return None;
        }
    }
    let q = law_of(&z, 0);
    if q.sup_distance(&law_of(&map.two(&z), 0)) > RESIDUAL_TOL {
        return None;
    }
    let start = law_of(z0, 0);
    let side_ok = match dir {
        Direction::Up => ordered(&start, &q),
        Direction::Down => ordered(&q, &start),
    };
    if !side_ok {
        return None;
    }
    for t in 1..SEGMENT_POINTS {
        let s = t as f64 / SEGMENT_POINTS as f64;
        let x: Vec<f64> = z0.iter().zip(&z).map(|(a, b)| a + s * (b - a)).collect();
        let (lx, lf) = (law_of(&x, 0), law_of(&map.two(&x), 0));
        let moves = match dir {
            Direction::Up => ordered(&lx, &lf),
            Direction::Down => ordered(&lf, &lx),
        };
        if !moves {
            return None;
        }
    }
    let (_, jq) = map.two_jac(&z);
    if spectral_radius(&jq) > 1.0 + SPECTRAL_SLACK {
        return None;
    }
    Some(z)
}

struct Subsequence {
    z: Vec<f64>,
    diffs: [f64; 2],
    done: bool,
    dir: Direction,
}

impl Subsequence {
    fn advance(&mut self, map: &OddsMap, tol: f64) {
        let next = map.two(&self.z);
        let d = law_of(&next, 0).sup_distance(&law_of(&self.z, 0));
        self.z = next;
        let before = self.diffs[1];
        self.diffs = [before, d];
        if d == 0.0 {
            self.done = true;
        } else if d < tol && before > 0.0 {
            let r = d / before;
            self.done = r < 1.0 && d * r / (1.0 - r) < tol;
        }
    }
}

/// Limits of the even and odd levels of the empty-boundary trajectory.
///
/// `odd` is also the even-level limit of the full-boundary trajectory.
pub fn parity_limits(params: &ModelParams, opts: &LimitOptions) -> Result<ParityLimits> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let map = OddsMap::new(params);
    let c = params.capacity() as usize;
    // Level 1 has p(i) ∝ λ^i; level 2 is one step further.
    let odd_start: Vec<f64> = (1..=c).map(|i| i as f64 * params.ln_lambda()).collect();
    let even_start = map.step(&odd_start);
    let mut subs = [
        Subsequence { z: even_start, diffs: [f64::NAN; 2], done: false, dir: Direction::Up },
        Subsequence { z: odd_start, diffs: [f64::NAN; 2], done: false, dir: Direction::Down },
    ];
    let mut accelerated = false;
    let mut steps = 0;
    while steps < opts.max_two_steps && !subs.iter().all(|s| s.done) {
        steps += 1;
        for s in subs.iter_mut().filter(|s| !s.done) {
            s.advance(&map, opts.tol);
        }
        if opts.accelerate && (steps == NEWTON_FIRST || steps % NEWTON_EVERY == 0) {
            for s in subs.iter_mut().filter(|s| !s.done) {
                if let Some(q) = certified_newton(&map, &s.z, s.dir) {
                    s.z = q;
                    s.done = true;
                    accelerated = true;
                }
            }
        }
    }
    let converged = subs.iter().all(|s| s.done);
    let even_level = 2 * steps as u32 + 2;
    Ok(ParityLimits {
        even: law_of(&subs[0].z, even_level),
        odd: law_of(&subs[1].z, even_level - 1),
        two_steps: steps,
        converged,
        accelerated,
    })
}

/// Even and odd limits from a constant boundary spin, by plain iteration.
pub fn constant_seed_limits(params: &ModelParams, spin: u32, opts: &LimitOptions) -> Result<ParityLimits> {
    let c = params.capacity();
    if spin > c {
        return Err(Error::InvalidBoundary(format!("boundary spin {spin} exceeds C = {c}")));
    }
    // Two steps from a point mass give a law of full support.
    let seed = RootLaw::delta(spin as u8, c, 0);
    let l1 = law_step(&seed, params)?;
    let l2 = law_step(&l1, params)?;
    let l3 = law_step(&l2, params)?;
    let map = OddsMap::new(params);
    let mut subs = [
        Subsequence { z: odds_of(&l2).ok_or(Error::DegenerateLaw)?, diffs: [f64::NAN; 2], done: false, dir: Direction::Up },
        Subsequence { z: odds_of(&l3).ok_or(Error::DegenerateLaw)?, diffs: [f64::NAN; 2], done: false, dir: Direction::Down },
    ];
    let mut steps = 0;
    while steps < opts.max_two_steps && !subs.iter().all(|s| s.done) {
        steps += 1;
        for s in subs.iter_mut().filter(|s| !s.done) {
            s.advance(&map, opts.tol);
        }
    }
    let even_level = 2 * steps as u32 + 2;
    Ok(ParityLimits {
        even: law_of(&subs[0].z, even_level),
        odd: law_of(&subs[1].z, even_level + 1),
        two_steps: steps,
        converged: subs.iter().all(|s| s.done),
        accelerated: false,
    })
}
