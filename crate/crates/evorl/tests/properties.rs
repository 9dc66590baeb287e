//! Property-based invariant checks.

use evorl::evo::{inversion_mutation, tsp_crossover, ALL_OPERATORS};
use evorl::ppo::{compute_gae, returns_to_go};
use evorl::problems::{
    generate_knapsack_instance, parse_instance, repair_knapsack, save_instance, ProblemInstance,
};
use evorl::rng::{self, ctx};
use proptest::prelude::*;

fn perm_strategy(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<usize>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Every crossover operator yields a permutation over the same genes.
    #[test]
    fn crossover_children_are_permutations(
        p1 in perm_strategy(9),
        p2 in perm_strategy(9),
        op_idx in 0..7usize,
        seed in 0..u64::MAX,
    ) {
        let mut r = rng::stream(seed, &[ctx::EVAL]);
        let child = tsp_crossover(ALL_OPERATORS[op_idx], &p1, &p2, &mut r).unwrap();
        let mut sorted = child.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..9).collect::<Vec<usize>>());
    }

    /// Inversion mutation preserves the gene multiset.
    #[test]
    fn inversion_preserves_genes(p in perm_strategy(11), seed in 0..u64::MAX) {
        let mut r = rng::stream(seed, &[ctx::EVAL]);
        let m = inversion_mutation(&p, 1.0, &mut r);
        let mut sorted = m.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..11).collect::<Vec<usize>>());
    }

    /// Repair always yields a feasible subset of the input selection and is
    /// idempotent on its own output.
    #[test]
    fn repair_feasible_subset_idempotent(
        bits in prop::collection::vec(0u8..2, 10),
        w_max in 0.2f64..2.0,
        seed in 0..u64::MAX,
    ) {
        let mut r = rng::stream(seed, &[ctx::INSTANCE]);
        let inst = generate_knapsack_instance(10, w_max, seed, &mut r).unwrap();
        let fixed = repair_knapsack(&bits, &inst, &mut r);
        prop_assert!(inst.is_feasible(&fixed));
        for (a, b) in fixed.iter().zip(&bits) {
            prop_assert!(a <= b);
        }
        let again = repair_knapsack(&fixed, &inst, &mut r);
        prop_assert_eq!(again, fixed);
    }

    /// Instance files round-trip bit-exactly.
    #[test]
    fn knapsack_instance_round_trips(n in 1usize..20, seed in 0..u64::MAX) {
        let mut r = rng::stream(seed, &[ctx::INSTANCE]);
        let inst = ProblemInstance::Knapsack(
            generate_knapsack_instance(n, 1.0, seed, &mut r).unwrap(),
        );
        prop_assert_eq!(parse_instance(&save_instance(&inst)).unwrap(), inst);
    }

    /// GAE with lambda = 1 and a zero critic equals the discounted
    /// returns-to-go.
    #[test]
    fn gae_lambda_one_matches_returns(
        rewards in prop::collection::vec(-2.0f64..2.0, 1..40),
        gamma in 0.0f64..1.0,
    ) {
        let values = vec![0.0; rewards.len()];
        let adv = compute_gae(&rewards, &values, gamma, 1.0).unwrap();
        let rets = returns_to_go(&rewards, gamma);
        for (a, b) in adv.iter().zip(&rets) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
