use hardcore_tree::exact::{brute_force_marginal, dp_partition, root_marginal, tv_distance};
use hardcore_tree::recursion::{iterate, law_step, seed_law};
use hardcore_tree::{BoundaryCondition, ModelParams, RootLaw, TreeShape};

fn boundaries(c: u32) -> Vec<BoundaryCondition> {
    vec![BoundaryCondition::Empty, BoundaryCondition::Full, BoundaryCondition::Constant(1.min(c) as u8)]
}

#[test]
fn dp_matches_enumeration_on_small_grid() {
    let mut cases = 0;
    for b in 2..=3 {
        for depth in 0..=2 {
            let shape = TreeShape::new(b, depth).unwrap();
            if shape.vertex_count().unwrap() > 22 {
                continue;
            }
            for c in 1..=3 {
                for lambda in [0.3, 1.0, 2.5] {
                    let params = ModelParams::new(b, c, lambda).unwrap();
                    for bc in boundaries(c) {
                        let dp = root_marginal(&shape, &bc, &params).unwrap();
                        let bf = brute_force_marginal(&shape, &bc, &params).unwrap();
                        let err = dp.sup_distance(&bf);
                        assert!(err < 1e-12, "b={b} depth={depth} C={c} λ={lambda} {bc:?}: {err}");
                        cases += 1;
                    }
                }
            }
        }
    }
    assert!(cases >= 100);
}

/// Independent oracle: the root law of a depth-`d` tree is the law of a root
/// whose `b` children are roots of depth-`d-1` trees.
fn nested_law(b: u32, c: u32, lambda: f64, depth: i32, bc: &BoundaryCondition) -> Vec<f64> {
    if depth < 0 {
        return (0..=c).map(|i| if i as u8 == bc.constant_spin(c).unwrap() { 1.0 } else { 0.0 }).collect();
    }
    let child = nested_law(b, c, lambda, depth - 1, bc);
    let w: Vec<f64> = (0..=c)
        .map(|i| lambda.powi(i as i32) * child[..=(c - i) as usize].iter().sum::<f64>().powi(b as i32))
        .collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

#[test]
fn recursion_matches_dp_by_depth() {
    for b in 2..=4 {
        for c in 1..=3 {
            let params = ModelParams::new(b, c, 1.7).unwrap();
            for bc in [BoundaryCondition::Empty, BoundaryCondition::Full] {
                let mut law = seed_law(&bc, c).unwrap();
                for depth in 0..=8 {
                    law = law_step(&law, &params).unwrap();
                    let dp = root_marginal(&TreeShape::new(b, depth).unwrap(), &bc, &params).unwrap();
                    assert!(law.sup_distance(&dp) < 1e-10, "b={b} C={c} depth={depth}");
                    if depth <= 4 {
                        let nested = RootLaw::from_probs(&nested_law(b, c, 1.7, depth as i32, &bc), depth + 1).unwrap();
                        assert!(dp.sup_distance(&nested) < 1e-12, "{:?} vs {:?}", dp.probs(), nested.probs());
                    }
                }
            }
        }
    }
}

#[test]
fn trajectory_laws_are_depth_marginals() {
    let params = ModelParams::new(3, 2, 0.9).unwrap();
    let t = iterate(&seed_law(&BoundaryCondition::Empty, 2).unwrap(), &params, 1e-12, 4).unwrap();
    for (n, law) in t.laws.iter().enumerate().skip(1).take(8) {
        let dp = root_marginal(&TreeShape::new(3, n as u32 - 1).unwrap(), &BoundaryCondition::Empty, &params).unwrap();
        assert!(tv_distance(law, &dp).unwrap() < 1e-10);
    }
}

#[test]
fn partition_vector_is_consistent_with_marginal() {
    let shape = TreeShape::new(3, 2).unwrap();
    let params = ModelParams::new(3, 3, 0.4).unwrap();
    let pv = dp_partition(&shape, &BoundaryCondition::Constant(2), &params).unwrap();
    let law = RootLaw::from_log_weights(pv.log_z.clone(), pv.level).unwrap();
    let direct = root_marginal(&shape, &BoundaryCondition::Constant(2), &params).unwrap();
    assert!(law.sup_distance(&direct) < 1e-14);
    assert_eq!(pv.level, 3);
}
