mod common;

use congested_ot_core::linear::{count_upper_bound, solve_linear};
use congested_ot_core::oracle::{enumerate_integer_plans, DEFAULT_ENUMERATION_CAP};
use congested_ot_core::{fixtures, Matrix, ModelKind, PenalizedInstance, ProblemInstance};
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::Rng;

fn random_linear(seed: u64, n: usize, l: usize, max_mass: u64) -> ProblemInstance {
    let mut rng = common::rng(seed);
    let m = rng.gen_range(n.max(l) as u64..=max_mass.max(n.max(l) as u64));
    let (mu, nu) = common::integer_marginals(&mut rng, n, l, m);
    let c = Matrix::from_fn(n, l, |_, _| rng.gen_range(0..20) as f64);
    ProblemInstance::linear(c, mu, nu)
}

#[test]
fn appendix_a_linear_objective() {
    let inst = fixtures::appendix_a_linear();
    let sol = solve_linear(&inst).unwrap();
    let c = &inst.linear_cost;
    let want = inst.total_fixed_cost() + 50.0 * (c[(0, 3)] + c[(1, 2)] + c[(2, 0)] + c[(3, 1)]);
    assert_eq!(sol.plan.objective, want);
    assert_eq!(sol.plan.positive_cells(0.0), 4);
}

#[test]
fn random_three_by_three_matches_enumeration() {
    for seed in 0..40 {
        let inst = random_linear(seed, 3, 3, 4);
        let sol = solve_linear(&inst).unwrap();
        let brute = enumerate_integer_plans(
            &PenalizedInstance::unpenalized(inst.clone()),
            ModelKind::Linear,
            DEFAULT_ENUMERATION_CAP,
        )
        .unwrap();
        let best = brute.best.unwrap();
        assert!((sol.plan.objective - best.objective).abs() < 1e-9, "seed {seed}");
    }
}

#[test]
fn counting_example_two_by_two() {
    let inst = ProblemInstance::linear(Matrix::zeros(2, 2), vec![2.0; 2], vec![2.0; 2]);
    let bounds = count_upper_bound(&inst).unwrap();
    let count = enumerate_integer_plans(&PenalizedInstance::unpenalized(inst), ModelKind::Linear, 12)
        .unwrap()
        .count;
    assert!(BigUint::from(count) <= bounds.product_bound);
    assert!(bounds.product_bound <= bounds.power_bound);
    assert_eq!(bounds.power_bound, BigUint::from(16u32));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vertex_duality_and_feasibility(seed in any::<u64>(), n in 1usize..6, l in 1usize..6) {
        let inst = random_linear(seed, n, l, 30);
        let sol = solve_linear(&inst).unwrap();
        prop_assert_eq!(sol.basis.cells.len(), n + l - 1);
        prop_assert!(sol.plan.positive_cells(0.0) < n + l);
        prop_assert!(sol.basis.reduced_costs(&inst.linear_cost).min() >= -1e-9);
        for &(i, j) in &sol.basis.cells {
            let r = inst.linear_cost[(i, j)] - sol.basis.u[i] - sol.basis.v[j];
            prop_assert!(r.abs() <= 1e-12);
        }
        let primal: f64 = sol.plan.pi.as_slice().iter().zip(inst.linear_cost.as_slice()).map(|(p, c)| p * c).sum();
        let dual = sol.basis.dual_objective(&inst.supply, &inst.capacity);
        prop_assert!((primal - dual).abs() <= 1e-8 * primal.abs().max(1.0));
        for (r, m) in sol.plan.row_sums().iter().zip(&inst.supply) {
            prop_assert!((r - m).abs() <= 1e-9);
        }
        for (c, v) in sol.plan.col_sums().iter().zip(&inst.capacity) {
            prop_assert!((c - v).abs() <= 1e-9);
        }
        prop_assert!(sol.plan.pi.min() >= 0.0);
    }

    #[test]
    fn enumeration_respects_counting_bounds(seed in any::<u64>(), n in 1usize..4, l in 1usize..4) {
        let inst = random_linear(seed, n, l, 10);
        let bounds = count_upper_bound(&inst).unwrap();
        let count = enumerate_integer_plans(&PenalizedInstance::unpenalized(inst), ModelKind::Linear, 12).unwrap().count;
        prop_assert!(BigUint::from(count) <= bounds.product_bound);
        prop_assert!(bounds.product_bound <= bounds.power_bound);
    }
}
