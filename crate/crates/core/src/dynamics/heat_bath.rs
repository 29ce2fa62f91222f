//! Monotone heat-bath dynamics on a finite tree.
//!
//! Three replicas run under the empty boundary, a boundary `τ` and the full
//! boundary. A site update computes, for each replica, the largest spin the
//! neighbours allow, draws one uniform `u` and sets every replica to the
//! inverse CDF of `λ^i` on `{0..max}` at `u`. The inverse CDF is monotone in
//! `max`, so the alternating order between replicas is preserved.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::RootLaw;
use crate::logspace::log_add_exp;
use crate::model::{feasible, partial_order_leq, BoundaryCondition, ModelParams, Spin, TreeConfig, TreeShape};

/// Largest state space [`random_site_kernel`] will enumerate.
pub const KERNEL_STATE_LIMIT: usize = 200;

/// `cdf[m][i] = Σ_{k≤i} λ^k / Σ_{k≤m} λ^k`.
#[derive(Debug, Clone)]
struct CdfTable {
    cdf: Vec<Vec<f64>>,
}

impl CdfTable {
    fn new(params: &ModelParams) -> Self {
        let c = params.capacity() as usize;
        let ln_l = params.ln_lambda();
        let mut log_s = Vec::with_capacity(c + 1);
        let mut acc = f64::NEG_INFINITY;
        for i in 0..=c {
            acc = log_add_exp(acc, i as f64 * ln_l);
            log_s.push(acc);
        }
        let cdf = (0..=c)
            .map(|m| {
                let mut row: Vec<f64> = (0..=m).map(|i| (log_s[i] - log_s[m]).exp()).collect();
                row[m] = 1.0;
                row
            })
            .collect();
        CdfTable { cdf }
    }

    fn draw(&self, max: Spin, u: f64) -> Spin {
        let row = &self.cdf[max as usize];
        row.iter().position(|&f| u < f).unwrap_or(row.len() - 1) as Spin
    }

    fn prob(&self, max: Spin, i: Spin) -> f64 {
        let row = &self.cdf[max as usize];
        match i {
            0 => row[0],
            _ if i > max => 0.0,
            _ => row[i as usize] - row[i as usize - 1],
        }
    }
}

/// Largest spin allowed at `(level, pos)` given the neighbours in `config`
/// and the boundary `bc` below the leaves.
fn max_allowed(config: &TreeConfig, bc: &BoundaryCondition, level: u32, pos: usize, c: u32) -> Spin {
    let shape = config.shape();
    let b = shape.b as usize;
    let mut worst = if level > 0 { config.get(level - 1, pos / b) } else { 0 };
    if level < shape.depth {
        for ch in pos * b..pos * b + b {
            worst = worst.max(config.get(level + 1, ch));
        }
    } else {
        worst = worst.max(bc.max_child_spin(pos, shape.b, c));
    }
    (c - worst as u32) as Spin
}

/// Three coupled replicas on one tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TripleState {
    pub sigma0: TreeConfig,
    pub sigma_tau: TreeConfig,
    pub sigma_c: TreeConfig,
    pub rng_seed: u64,
    #[serde(skip, default = "default_rng")]
    rng: ChaCha8Rng,
}

fn default_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

impl TripleState {
    /// All replicas start from the all-zero configuration.
    pub fn new(shape: TreeShape, seed: u64) -> Result<Self> {
        let z = TreeConfig::zeros(shape)?;
        Ok(TripleState {
            sigma0: z.clone(),
            sigma_tau: z.clone(),
            sigma_c: z,
            rng_seed: seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// `σ⁰ ≼ σ^τ ≼ σ^C` when the boundary sits at even distance from the
    /// root, the reverse chain otherwise.
    pub fn ordered(&self) -> bool {
        let chain = |a: &TreeConfig, b: &TreeConfig| partial_order_leq(a, b).unwrap_or(false);
        if self.sigma0.shape().boundary_distance() % 2 == 0 {
            chain(&self.sigma0, &self.sigma_tau) && chain(&self.sigma_tau, &self.sigma_c)
        } else {
            chain(&self.sigma_c, &self.sigma_tau) && chain(&self.sigma_tau, &self.sigma0)
        }
    }

    /// Feasibility of all replicas with respect to their boundaries.
    pub fn feasible(&self, params: &ModelParams, bc_tau: &BoundaryCondition) -> bool {
        let c = params.capacity();
        feasible(&self.sigma0, params)
            && feasible(&self.sigma_tau, params)
            && feasible(&self.sigma_c, params)
            && self.sigma0.compatible_with_boundary(&BoundaryCondition::Empty, c)
            && self.sigma_tau.compatible_with_boundary(bc_tau, c)
            && self.sigma_c.compatible_with_boundary(&BoundaryCondition::Full, c)
    }
}

/// Prepared update rule for one `(params, τ)` pair.
#[derive(Debug, Clone)]
pub struct CoupledSampler {
    params: ModelParams,
    bc_tau: BoundaryCondition,
    table: CdfTable,
}

impl CoupledSampler {
    pub fn new(params: &ModelParams, bc_tau: &BoundaryCondition) -> Self {
        CoupledSampler { params: params.clone(), bc_tau: bc_tau.clone(), table: CdfTable::new(params) }
    }

    fn check(&self, state: &TripleState) -> Result<()> {
        let shape = state.sigma0.shape();
        if shape.b != self.params.b() {
            return Err(Error::ShapeMismatch(format!("tree has b = {}, model has b = {}", shape.b, self.params.b())));
        }
        self.bc_tau.validate(&shape, self.params.capacity())
    }

    /// Resamples the site `(level, pos)` in all three replicas with one uniform.
    pub fn update_site(&self, state: &mut TripleState, level: u32, pos: usize) {
        let c = self.params.capacity();
        let u: f64 = state.rng.random();
        let m0 = max_allowed(&state.sigma0, &BoundaryCondition::Empty, level, pos, c);
        let mt = max_allowed(&state.sigma_tau, &self.bc_tau, level, pos, c);
        let mc = max_allowed(&state.sigma_c, &BoundaryCondition::Full, level, pos, c);
        state.sigma0.set(level, pos, self.table.draw(m0, u));
        state.sigma_tau.set(level, pos, self.table.draw(mt, u));
        state.sigma_c.set(level, pos, self.table.draw(mc, u));
    }

    /// One systematic sweep, root to leaves, level by level.
    pub fn sweep(&self, state: &mut TripleState) -> Result<()> {
        self.check(state)?;
        let shape = state.sigma0.shape();
        for level in 0..=shape.depth {
            for pos in 0..shape.level_size(level).unwrap() as usize {
                self.update_site(state, level, pos);
            }
        }
        debug_assert!(state.ordered(), "replica order broken");
        Ok(())
    }

    /// One update at a uniformly chosen site.
    pub fn random_site_step(&self, state: &mut TripleState) -> Result<()> {
        self.check(state)?;
        let shape = state.sigma0.shape();
        let n = shape.vertex_count().unwrap() as usize;
        let v = state.rng.random_range(0..n);
        let (level, pos) = locate(&shape, v);
        self.update_site(state, level, pos);
        Ok(())
    }
}

/// `(level, pos)` of the `v`-th vertex in level order.
fn locate(shape: &TreeShape, mut v: usize) -> (u32, usize) {
    let mut level = 0;
    loop {
        let size = shape.level_size(level).unwrap() as usize;
        if v < size {
            return (level, v);
        }
        v -= size;
        level += 1;
    }
}

/// One sweep of the coupled dynamics.
pub fn heat_bath_sweep(mut state: TripleState, params: &ModelParams, bc_tau: &BoundaryCondition) -> Result<TripleState> {
    CoupledSampler::new(params, bc_tau).sweep(&mut state)?;
    Ok(state)
}

/// Empirical root law with batch-means standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEstimate {
    /// Root law of the `τ` replica.
    pub law: RootLaw,
    pub std_errors: Vec<f64>,
    /// Empirical root laws of the empty, `τ` and full replicas.
    pub replica_laws: [Vec<f64>; 3],
    pub samples: u64,
    pub sweeps: u64,
    pub burn_in: u64,
    pub seed: u64,
}

const BATCHES: usize = 32;

/// Runs `sweeps` sweeps from all-zero replicas and records the root spins
/// after the first `burn_in`. The ordering of the replicas is asserted after
/// every sweep.
pub fn sample_root_marginal(
    shape: &TreeShape,
    bc: &BoundaryCondition,
    params: &ModelParams,
    sweeps: u64,
    burn_in: u64,
    seed: u64,
) -> Result<SampleEstimate> {
    if sweeps <= burn_in {
        return Err(Error::NoSamples);
    }
    let c = params.capacity() as usize;
    let sampler = CoupledSampler::new(params, bc);
    let mut state = TripleState::new(*shape, seed)?;
    let n = (sweeps - burn_in) as usize;
    let batch_len = n.div_ceil(BATCHES);
    let mut counts = [vec![0u64; c + 1], vec![0u64; c + 1], vec![0u64; c + 1]];
    let mut batch_counts: Vec<Vec<u64>> = Vec::new();
    for s in 0..sweeps {
        sampler.sweep(&mut state)?;
        if !state.ordered() {
            return Err(Error::GuardViolation(format!("replica order broken at sweep {s}")));
        }
        if s < burn_in {
            continue;
        }
        let k = (s - burn_in) as usize;
        if k % batch_len == 0 {
            batch_counts.push(vec![0; c + 1]);
        }
        let roots = [state.sigma0.root(), state.sigma_tau.root(), state.sigma_c.root()];
        for (r, cnt) in roots.iter().zip(counts.iter_mut()) {
            cnt[*r as usize] += 1;
        }
        batch_counts.last_mut().unwrap()[roots[1] as usize] += 1;
    }
    let freq = |cnt: &[u64]| -> Vec<f64> { cnt.iter().map(|&x| x as f64 / n as f64).collect() };
    let probs = freq(&counts[1]);
    let std_errors = batch_standard_errors(&batch_counts, batch_len, n);
    let total: f64 = probs.iter().sum();
    let law = RootLaw::from_log_weights(probs.iter().map(|p| (p / total).ln()).collect(), shape.boundary_distance())?;
    Ok(SampleEstimate {
        law,
        std_errors,
        replica_laws: [freq(&counts[0]), probs, freq(&counts[2])],
        samples: n as u64,
        sweeps,
        burn_in,
        seed,
    })
}

fn batch_standard_errors(batches: &[Vec<u64>], batch_len: usize, n: usize) -> Vec<f64> {
    let k = batches[0].len();
    let full: Vec<&Vec<u64>> = batches
        .iter()
        .enumerate()
        .filter(|(i, _)| (i + 1) * batch_len <= n)
        .map(|(_, b)| b)
        .collect();
    if full.len() < 2 {
        return vec![f64::NAN; k];
    }
    let nb = full.len() as f64;
    (0..k)
        .map(|i| {
            let means: Vec<f64> = full.iter().map(|b| b[i] as f64 / batch_len as f64).collect();
            let mu = means.iter().sum::<f64>() / nb;
            let var = means.iter().map(|m| (m - mu) * (m - mu)).sum::<f64>() / (nb - 1.0);
            (var / nb).sqrt()
        })
        .collect()
}

/// All configurations compatible with `bc`, by level-order enumeration.
fn feasible_configs(shape: &TreeShape, bc: &BoundaryCondition, params: &ModelParams, limit: usize) -> Result<Vec<TreeConfig>> {
    let c = params.capacity();
    let n = shape.vertex_count().unwrap_or(u64::MAX);
    if n > 24 {
        return Err(Error::OracleGuard { vertices: n, limit: 24 });
    }
    let mut out = Vec::new();
    let mut cfg = TreeConfig::zeros(*shape)?;
    fn rec(
        v: usize,
        n: usize,
        cfg: &mut TreeConfig,
        bc: &BoundaryCondition,
        c: u32,
        limit: usize,
        out: &mut Vec<TreeConfig>,
    ) -> Result<()> {
        if v == n {
            if out.len() == limit {
                return Err(Error::GuardViolation(format!("more than {limit} feasible states")));
            }
            out.push(cfg.clone());
            return Ok(());
        }
        let shape = cfg.shape();
        let (level, pos) = locate(&shape, v);
        let above = if level > 0 { cfg.get(level - 1, pos / shape.b as usize) as u32 } else { 0 };
        let below = if level == shape.depth { bc.max_child_spin(pos, shape.b, c) as u32 } else { 0 };
        for s in 0..=(c - above.max(below)) {
            cfg.set(level, pos, s as Spin);
            rec(v + 1, n, cfg, bc, c, limit, out)?;
        }
        cfg.set(level, pos, 0);
        Ok(())
    }
    rec(0, n as usize, &mut cfg, bc, c, limit, &mut out)?;
    Ok(out)
}

/// Transition matrix of the random-site heat-bath chain of one replica under
/// `bc`, over its feasible states (at most `max_states`).
pub fn random_site_kernel(
    shape: &TreeShape,
    bc: &BoundaryCondition,
    params: &ModelParams,
    max_states: usize,
) -> Result<(Vec<TreeConfig>, Vec<Vec<f64>>)> {
    bc.validate(shape, params.capacity())?;
    let states = feasible_configs(shape, bc, params, max_states)?;
    let index: std::collections::HashMap<&TreeConfig, usize> = states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let table = CdfTable::new(params);
    let n_sites = shape.vertex_count().unwrap() as usize;
    let mut kernel = vec![vec![0.0; states.len()]; states.len()];
    for (i, s) in states.iter().enumerate() {
        for v in 0..n_sites {
            let (level, pos) = locate(shape, v);
            let max = max_allowed(s, bc, level, pos, params.capacity());
            let mut t = s.clone();
            for spin in 0..=max {
                t.set(level, pos, spin);
                kernel[i][index[&t]] += table.prob(max, spin) / n_sites as f64;
            }
        }
    }
    Ok((states, kernel))
}
