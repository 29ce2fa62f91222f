use hardcore_tree::dynamics::{
    occupancy_tv, product_form_law, random_site_kernel, sample_root_marginal, simulate_loss_network, CoupledSampler,
    Graph, TripleState,
};
use hardcore_tree::exact::{root_marginal, tv_distance};
use hardcore_tree::model::weight;
use hardcore_tree::{BoundaryCondition, ModelParams, TreeShape};

#[test]
fn sampler_matches_dp_on_depth3() {
    let shape = TreeShape::new(2, 3).unwrap();
    let params = ModelParams::new(2, 2, 1.0).unwrap();
    let bc = BoundaryCondition::Full;
    let est = sample_root_marginal(&shape, &bc, &params, 40_000, 500, 2024).unwrap();
    let exact = root_marginal(&shape, &bc, &params).unwrap();
    assert!(tv_distance(&est.law, &exact).unwrap() < 0.01);
    assert_eq!(est.seed, 2024);
}

#[test]
fn replicas_are_sandwiched_at_stationarity() {
    // Boundary at odd distance: σ^C ≼ σ^τ ≼ σ⁰, so at the root P(σ ≥ k)
    // is ordered the same way.
    let shape = TreeShape::new(2, 2).unwrap();
    let params = ModelParams::new(2, 3, 2.0).unwrap();
    let est = sample_root_marginal(&shape, &BoundaryCondition::Constant(1), &params, 5_000, 100, 3).unwrap();
    let tail = |p: &[f64], k: usize| p[k..].iter().sum::<f64>();
    for k in 1..=3 {
        let [e, t, f] = &est.replica_laws;
        assert!(tail(f, k) <= tail(t, k) + 1e-15 && tail(t, k) <= tail(e, k) + 1e-15);
    }
}

#[test]
fn random_site_updates_keep_order() {
    let shape = TreeShape::new(3, 2).unwrap();
    let params = ModelParams::new(3, 2, 1.5).unwrap();
    let bc = BoundaryCondition::PerVertex((0..27).map(|i| (i % 3) as u8).collect());
    let sampler = CoupledSampler::new(&params, &bc);
    let mut state = TripleState::new(shape, 17).unwrap();
    for _ in 0..20_000 {
        sampler.random_site_step(&mut state).unwrap();
        assert!(state.ordered());
    }
    assert!(state.feasible(&params, &bc));
}

#[test]
fn kernel_stationary_law_is_gibbs() {
    let shape = TreeShape::new(2, 1).unwrap();
    let params = ModelParams::new(2, 3, 0.7).unwrap();
    let bc = BoundaryCondition::Constant(1);
    let (states, k) = random_site_kernel(&shape, &bc, &params, 200).unwrap();
    let w: Vec<f64> = states.iter().map(|s| weight(s, &params).unwrap()).collect();
    let z: f64 = w.iter().sum();
    let mu: Vec<f64> = w.iter().map(|x| x / z).collect();
    for j in 0..states.len() {
        let flow: f64 = (0..states.len()).map(|i| mu[i] * k[i][j]).sum();
        assert!((flow - mu[j]).abs() < 1e-12);
    }
}

#[test]
fn loss_network_product_form_and_flux() {
    for (g, c, lambda) in [(Graph::complete(2).unwrap(), 1, 1.0), (Graph::path(3).unwrap(), 2, 0.7)] {
        let stats = simulate_loss_network(&g, c, lambda, 1e5, 77).unwrap();
        let exact = product_form_law(&g, c, lambda).unwrap();
        assert!(occupancy_tv(&stats.occupancy, &exact) < 0.02);
        assert!(stats.max_flux_imbalance() < 5.0);
        assert_eq!(stats.seed, 77);
    }
}

#[test]
fn blocking_matches_product_form() {
    // With C=1 an arrival at the centre of a 3-star is accepted only when all
    // four nodes are idle; Poisson arrivals see time averages.
    let g = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
    let law = product_form_law(&g, 1, 0.5).unwrap();
    let accept: f64 = law.iter().filter(|(s, _)| s.iter().all(|&k| k == 0)).map(|(_, p)| p).sum();
    let stats = simulate_loss_network(&g, 1, 0.5, 2e5, 5).unwrap();
    let blocked = stats.blocking_per_node()[0];
    assert!((blocked - (1.0 - accept)).abs() < 0.01, "{blocked} vs {}", 1.0 - accept);
}
