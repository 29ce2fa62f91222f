//! Continuous-time loss network on a small graph.
//!
//! Calls arrive at every node at rate `λ`. An arrival at `v` is accepted iff
//! `calls[v] + 1 + calls[u] ≤ C` for every neighbour `u`. A busy node loses
//! one call at total rate 1, whatever its occupancy, so the stationary law is
//! `∝ λ^{Σ calls}` on feasible occupancy vectors.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest graph the simulator and the product-form enumeration accept.
pub const GRAPH_VERTEX_LIMIT: usize = 12;

/// Undirected simple graph as adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
}

impl Graph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("graph has no vertices".into()));
        }
        if n > GRAPH_VERTEX_LIMIT {
            return Err(Error::GuardViolation(format!("{n} vertices exceeds the limit of {GRAPH_VERTEX_LIMIT}")));
        }
        let mut adj = vec![Vec::new(); n];
        for &(x, y) in edges {
            if x >= n || y >= n || x == y {
                return Err(Error::InvalidParameter(format!("bad edge ({x}, {y})")));
            }
            if !adj[x].contains(&y) {
                adj[x].push(y);
                adj[y].push(x);
            }
        }
        Ok(Graph { adj })
    }

    /// `n` isolated vertices.
    pub fn empty(n: usize) -> Result<Self> {
        Self::from_edges(n, &[])
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Self::from_edges(n, &edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj.iter().enumerate().flat_map(|(x, ns)| ns.iter().filter(move |&&y| y > x).map(move |&y| (x, y)))
    }

    /// `calls[x] + calls[y] ≤ C` on every edge and `calls[v] ≤ C` everywhere.
    pub fn admits(&self, calls: &[u8], c: u32) -> bool {
        calls.iter().all(|&k| k as u32 <= c) && self.edges().all(|(x, y)| calls[x] as u32 + calls[y] as u32 <= c)
    }
}

/// Running state of one simulation.
#[derive(Debug, Clone)]
pub struct NetworkState {
    pub graph: Graph,
    pub calls: Vec<u8>,
    pub clock: f64,
    pub stats: NetworkStats,
}

/// Accumulated statistics of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    /// Time spent in each occupancy vector, normalized by the horizon.
    pub occupancy: BTreeMap<Vec<u8>, f64>,
    pub arrivals: Vec<u64>,
    pub blocked: Vec<u64>,
    /// Jump counts between occupancy vectors.
    pub transitions: BTreeMap<(Vec<u8>, Vec<u8>), u64>,
    pub events: u64,
    pub horizon: f64,
    pub seed: u64,
}

impl NetworkStats {
    /// Fraction of arrivals at each node that were blocked.
    pub fn blocking_per_node(&self) -> Vec<f64> {
        self.arrivals
            .iter()
            .zip(&self.blocked)
            .map(|(&a, &b)| if a == 0 { 0.0 } else { b as f64 / a as f64 })
            .collect()
    }

    /// Fraction of all arrivals that were blocked.
    pub fn blocking_overall(&self) -> f64 {
        let a: u64 = self.arrivals.iter().sum();
        if a == 0 {
            0.0
        } else {
            self.blocked.iter().sum::<u64>() as f64 / a as f64
        }
    }

    /// Largest `|n(s→t) - n(t→s)| / sqrt(n(s→t) + n(t→s))` over state pairs,
    /// a z-score for the flux balance of a reversible chain.
    pub fn max_flux_imbalance(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for ((s, t), &n) in &self.transitions {
            if s < t {
                let back = self.transitions.get(&(t.clone(), s.clone())).copied().unwrap_or(0);
                let tot = (n + back) as f64;
                if tot > 0.0 {
                    worst = worst.max((n as f64 - back as f64).abs() / tot.sqrt());
                }
            }
        }
        worst
    }
}

impl NetworkState {
    pub fn new(graph: Graph, seed: u64) -> Self {
        let n = graph.vertex_count();
        NetworkState {
            calls: vec![0; n],
            clock: 0.0,
            stats: NetworkStats {
                occupancy: BTreeMap::new(),
                arrivals: vec![0; n],
                blocked: vec![0; n],
                transitions: BTreeMap::new(),
                events: 0,
                horizon: 0.0,
                seed,
            },
            graph,
        }
    }

    fn accepts(&self, v: usize, c: u32) -> bool {
        let k = self.calls[v] as u32 + 1;
        k <= c && self.graph.neighbors(v).iter().all(|&u| k + self.calls[u] as u32 <= c)
    }

    /// Runs the chain until `clock` reaches `horizon`.
    fn run(&mut self, c: u32, lambda: f64, horizon: f64, rng: &mut ChaCha8Rng) {
        let n = self.graph.vertex_count();
        while self.clock < horizon {
            let busy: Vec<usize> = (0..n).filter(|&v| self.calls[v] > 0).collect();
            let rate = lambda * n as f64 + busy.len() as f64;
            let dt: f64 = rng.sample::<f64, _>(Exp1) / rate;
            let stay = dt.min(horizon - self.clock);
            *self.stats.occupancy.entry(self.calls.clone()).or_insert(0.0) += stay;
            self.clock += dt;
            if self.clock >= horizon {
                break;
            }
            self.stats.events += 1;
            let before = self.calls.clone();
            let x = rng.random::<f64>() * rate;
            if x < lambda * n as f64 {
                let v = ((x / lambda) as usize).min(n - 1);
                self.stats.arrivals[v] += 1;
                if self.accepts(v, c) {
                    self.calls[v] += 1;
                } else {
                    self.stats.blocked[v] += 1;
                    continue;
                }
            } else {
                let k = (((x - lambda * n as f64) as usize).min(busy.len() - 1)) as usize;
                self.calls[busy[k]] -= 1;
            }
            debug_assert!(self.graph.admits(&self.calls, c));
            *self.stats.transitions.entry((before, self.calls.clone())).or_insert(0) += 1;
        }
        self.clock = horizon;
        self.stats.horizon = horizon;
        for t in self.stats.occupancy.values_mut() {
            *t /= horizon;
        }
    }
}

/// Simulates the loss network from the empty state for `horizon` time units.
pub fn simulate_loss_network(graph: &Graph, c: u32, lambda: f64, horizon: f64, seed: u64) -> Result<NetworkStats> {
    if c == 0 || c > u8::MAX as u32 {
        return Err(Error::InvalidParameter(format!("C must lie in 1..=255 (got {c})")));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("λ must be positive and finite (got {lambda})")));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be positive (got {horizon})")));
    }
    if graph.vertex_count() > GRAPH_VERTEX_LIMIT {
        return Err(Error::GuardViolation(format!(
            "{} vertices exceeds the limit of {GRAPH_VERTEX_LIMIT}",
            graph.vertex_count()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = NetworkState::new(graph.clone(), seed);
    state.run(c, lambda, horizon, &mut rng);
    Ok(state.stats)
}

/// Normalized `λ^{Σ calls}` over all feasible occupancy vectors.
pub fn product_form_law(graph: &Graph, c: u32, lambda: f64) -> Result<BTreeMap<Vec<u8>, f64>> {
    let n = graph.vertex_count();
    if n > GRAPH_VERTEX_LIMIT {
        return Err(Error::GuardViolation(format!("{n} vertices exceeds the limit of {GRAPH_VERTEX_LIMIT}")));
    }
    if c == 0 || c > u8::MAX as u32 || !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("bad C = {c} or λ = {lambda}")));
    }
    fn rec(v: usize, g: &Graph, c: u32, ln_l: f64, calls: &mut Vec<u8>, out: &mut Vec<(Vec<u8>, f64)>) {
        if v == g.vertex_count() {
            let s: u32 = calls.iter().map(|&k| k as u32).sum();
            out.push((calls.clone(), s as f64 * ln_l));
            return;
        }
        let used = g.neighbors(v).iter().filter(|&&u| u < v).map(|&u| calls[u] as u32).max().unwrap_or(0);
        for k in 0..=(c - used) {
            calls[v] = k as u8;
            rec(v + 1, g, c, ln_l, calls, out);
        }
        calls[v] = 0;
    }
    let mut weights = Vec::new();
    rec(0, graph, c, lambda.ln(), &mut vec![0; n], &mut weights);
    let lw: Vec<f64> = weights.iter().map(|(_, w)| *w).collect();
    let z = crate::logspace::log_sum_exp(&lw);
    Ok(weights.into_iter().map(|(s, w)| (s, (w - z).exp())).collect())
}

/// Total-variation distance between two laws on occupancy vectors.
pub fn occupancy_tv(p: &BTreeMap<Vec<u8>, f64>, q: &BTreeMap<Vec<u8>, f64>) -> f64 {
    let mut sum = 0.0;
    for (s, &a) in p {
        sum += (a - q.get(s).copied().unwrap_or(0.0)).abs();
    }
    for (s, &b) in q {
        if !p.contains_key(s) {
            sum += b;
        }
    }
    0.5 * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_vertex_birth_death() {
        let g = Graph::empty(1).unwrap();
        let lambda = 0.8;
        let stats = simulate_loss_network(&g, 1, lambda, 1e5, 3).unwrap();
        let p1 = stats.occupancy.get(&vec![1u8]).copied().unwrap_or(0.0);
        assert!((p1 - lambda / (1.0 + lambda)).abs() < 0.01, "{p1}");
        assert!((stats.blocking_overall() - p1).abs() < 0.01);
    }

    #[test]
    fn k2_uniform_law() {
        let g = Graph::complete(2).unwrap();
        let exact = product_form_law(&g, 1, 1.0).unwrap();
        assert_eq!(exact.len(), 3);
        for p in exact.values() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let stats = simulate_loss_network(&g, 1, 1.0, 1e5, 5).unwrap();
        assert!(occupancy_tv(&stats.occupancy, &exact) < 0.02);
        assert!(stats.max_flux_imbalance() < 4.0);
    }

    #[test]
    fn path3_product_form() {
        let g = Graph::path(3).unwrap();
        let exact = product_form_law(&g, 2, 0.7).unwrap();
        let total: f64 = exact.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for s in exact.keys() {
            assert!(g.admits(s, 2));
        }
        let stats = simulate_loss_network(&g, 2, 0.7, 1e5, 9).unwrap();
        assert!(occupancy_tv(&stats.occupancy, &exact) < 0.02);
        for s in stats.occupancy.keys() {
            assert!(g.admits(s, 2));
        }
    }

    #[test]
    fn guards() {
        assert!(matches!(Graph::path(13), Err(Error::GuardViolation(_))));
        let g = Graph::path(2).unwrap();
        assert!(simulate_loss_network(&g, 0, 1.0, 1.0, 0).is_err());
        assert!(simulate_loss_network(&g, 1, 1.0, 0.0, 0).is_err());
        assert!(Graph::from_edges(2, &[(0, 0)]).is_err());
    }

    #[test]
    fn reproducible() {
        let g = Graph::path(3).unwrap();
        let a = simulate_loss_network(&g, 2, 1.2, 100.0, 42).unwrap();
        let b = simulate_loss_network(&g, 2, 1.2, 100.0, 42).unwrap();
        assert_eq!(a, b);
    }
}
