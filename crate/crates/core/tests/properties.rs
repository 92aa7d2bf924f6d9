use mvap::eval::{average_precision, detection_score};
use mvap::io::{pattern_from_str, pattern_to_string};
use mvap::trainer::postprocess_and_blend;
use mvap::{match_approx, match_exact, Arg, AttributeSchema, Pattern, PatternF64};
use proptest::prelude::*;

fn arg_strategy(max_nodes: usize) -> impl Strategy<Value = Arg<f64>> {
    (1..=max_nodes).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 2), n),
            prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 1), n * n),
        )
            .prop_map(move |(unary, pairs)| {
                let schema = AttributeSchema::new(vec![2], vec![1]).unwrap();
                let unary = unary.into_iter().map(|u| vec![u]).collect();
                Arg::from_fn("g", schema, unary, |s, t| vec![pairs[s * n + t].clone()]).unwrap()
            })
    })
}

/// A pattern built from the first nodes of a source ARG.
fn pattern_strategy() -> impl Strategy<Value = PatternF64> {
    (arg_strategy(4), 1usize..=4).prop_map(|(src, k)| {
        let nodes: Vec<usize> = (0..k.min(src.n_nodes())).collect();
        Pattern::from_arg_nodes("p", &src, &nodes).unwrap()
    })
}

proptest! {
    #[test]
    fn blended_weights_stay_on_the_simplex(
        raw in prop::collection::vec(-10.0..10.0f64, 1..8),
        lambda in 0.0..=1.0f64,
    ) {
        let prev = vec![1.0 / raw.len() as f64; raw.len()];
        let w = postprocess_and_blend(&raw, &prev, lambda);
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ap_is_bounded_and_rank_invariant(
        pos in prop::collection::vec(-100.0..100.0f64, 1..12),
        neg in prop::collection::vec(-100.0..100.0f64, 1..12),
        scale in 0.01..100.0f64,
        shift in -50.0..50.0f64,
    ) {
        let ap = average_precision(&pos, &neg).unwrap();
        prop_assert!(ap > 0.0 && ap <= 1.0);
        let f = |v: &[f64]| v.iter().map(|x| x * scale + shift).collect::<Vec<_>>();
        let moved = average_precision(&f(&pos), &f(&neg)).unwrap();
        prop_assert!((moved - ap).abs() < 1e-12);
    }

    #[test]
    fn detection_score_grows_with_zeta(p in pattern_strategy(), g in arg_strategy(5), z in 0.0..20.0f64, dz in 0.0..20.0f64) {
        let m = match_exact(&p, &g).unwrap();
        let lo = detection_score(&p, &g, &m.assignment, z).unwrap();
        let hi = detection_score(&p, &g, &m.assignment, z + dz).unwrap();
        prop_assert!(hi >= lo);
    }

    #[test]
    fn matches_are_injective(p in pattern_strategy(), g in arg_strategy(5), seed in 0u64..1000) {
        let exact = match_exact(&p, &g).unwrap();
        let approx = match_approx(&p, &g, 3, seed).unwrap();
        prop_assert!(exact.assignment.is_injective());
        prop_assert!(approx.assignment.is_injective());
        prop_assert!(exact.energy <= approx.energy, "{} > {}", exact.energy, approx.energy);
    }

    #[test]
    fn patterns_round_trip_through_json(p in pattern_strategy()) {
        let back: PatternF64 = pattern_from_str(&pattern_to_string(&p)).unwrap();
        prop_assert_eq!(back, p);
    }
}
