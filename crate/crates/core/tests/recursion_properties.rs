use hardcore_tree::recursion::{c2_two_step, envelope_maps, C2State, envelope_scalar, iterate, law_step, seed_law, tracked_scalar};
use hardcore_tree::{BoundaryCondition, ModelParams, RootLaw};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn envelopes_sandwich_two_steps(weights in prop::collection::vec(0.01f64..1.0, 4), steps in 0usize..6) {
        let params = ModelParams::new(50, 3, 0.3).unwrap();
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut law = RootLaw::from_probs(&probs, 0).unwrap();
        for _ in 0..steps {
            law = law_step(&law, &params).unwrap();
        }
        let two = law_step(&law_step(&law, &params).unwrap(), &params).unwrap();
        for j in 1..=3 {
            let (lo, hi) = envelope_maps(j, &params).unwrap();
            let x = envelope_scalar(&law, j);
            let y = envelope_scalar(&two, j);
            let slack = 1e-12 * (1.0 + y);
            prop_assert!(lo.eval(x) <= y + slack, "j={} lower {} > {}", j, lo.eval(x), y);
            prop_assert!(y <= hi.eval(x) + slack, "j={} upper {} < {}", j, hi.eval(x), y);
        }
    }

    #[test]
    fn even_levels_move_monotonically(b in 2u32..6, c in 1u32..5, lambda in 0.2f64..12.0) {
        let params = ModelParams::new(b, c, lambda).unwrap();
        for bc in [BoundaryCondition::Empty, BoundaryCondition::Full] {
            let t = iterate(&seed_law(&bc, c).unwrap(), &params, 1e-13, 40).unwrap();
            let even: Vec<f64> = t.laws.iter().step_by(2).map(|l| l.ccdf(1)).collect();
            let up = even.windows(2).all(|w| w[1] >= w[0] - 1e-13);
            let down = even.windows(2).all(|w| w[1] <= w[0] + 1e-13);
            prop_assert!(up || down, "{:?}", even);
        }
    }

    #[test]
    fn empty_and_full_interleave(b in 2u32..6, c in 1u32..5, lambda in 0.2f64..12.0) {
        // Empty at even depth sits below Full at even depth, which is the
        // Empty trajectory shifted by one level.
        let params = ModelParams::new(b, c, lambda).unwrap();
        let e = iterate(&seed_law(&BoundaryCondition::Empty, c).unwrap(), &params, 1e-13, 30).unwrap();
        let f = iterate(&seed_law(&BoundaryCondition::Full, c).unwrap(), &params, 1e-13, 30).unwrap();
        let n = e.laws.len().min(f.laws.len());
        for k in (0..n).step_by(2) {
            prop_assert!(e.laws[k].dominated_by(&f.laws[k], 1e-12) || f.laws[k].dominated_by(&e.laws[k], 1e-12));
        }
        for k in 0..n - 1 {
            prop_assert!(f.laws[k + 1].sup_distance(&e.laws[k]) < 1e-12);
        }
    }
}

#[test]
fn law_recursion_reproduces_c2_scalar_recursion() {
    let params = ModelParams::new(3, 2, 2.0).unwrap();
    let mut laws = vec![seed_law(&BoundaryCondition::Empty, 2).unwrap()];
    for _ in 0..12 {
        laws.push(law_step(laws.last().unwrap(), &params).unwrap());
    }
    let mut state = C2State::new(laws[0].r(1), laws[1].r(1)).unwrap();
    for k in 2..laws.len() {
        state = c2_two_step(state, &params).unwrap();
        let y = laws[k].r(1);
        assert!((state.y_curr() - y).abs() < 1e-12 * y, "level {k}");
        assert!((tracked_scalar(&laws[k], &params) - (y - 1.0)).abs() < 1e-12);
    }
}
