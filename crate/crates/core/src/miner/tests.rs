use super::*;
use crate::model::AttributeSchema;
use crate::synth::{generate, SyntheticSpec};

fn schema() -> AttributeSchema {
    AttributeSchema::new(vec![1], vec![1]).unwrap()
}

/// ARG with scalar unary attributes and pairwise attributes from `pw`.
fn arg(id: &str, unary: &[f64], pw: impl Fn(usize, usize) -> f64) -> Arg<f64> {
    Arg::from_fn(id, schema(), unary.iter().map(|&u| vec![vec![u]]).collect(), |s, t| {
        vec![vec![pw(s, t)]]
    })
    .unwrap()
}

fn identity(arg_id: &str, n: usize) -> Assignment {
    let mut a = Assignment::new(arg_id);
    for s in 0..n {
        a.map.insert(s as NodeId, Label::Node(s));
    }
    a
}

fn zero_pattern(n: usize) -> Pattern<f64> {
    let g = arg("z", &vec![0.0; n], |_, _| 0.0);
    Pattern::from_arg_nodes("p", &g, &(0..n).collect::<Vec<_>>()).unwrap()
}

#[test]
fn attributes_are_means_of_matched_counterparts() {
    let g1 = arg("a", &[1.0, 2.0], |s, t| (s * 2 + t) as f64);
    let g2 = arg("b", &[3.0, 5.0], |s, t| (s * 2 + t) as f64 + 10.0);
    let p = zero_pattern(2);
    let mut a2 = identity("b", 2);
    a2.map.insert(1, Label::None);
    let est = estimate_attributes(&p, &[&g1, &g2], &[identity("a", 2), a2]).unwrap();
    assert_eq!(est.unary(0).unwrap(), &[vec![2.0]]);
    assert_eq!(est.unary(1).unwrap(), &[vec![2.0]]);
    assert_eq!(est.pairwise(0, 1).unwrap(), &[vec![1.0]]);
    assert_eq!(est.pairwise(1, 0).unwrap(), &[vec![2.0]]);

    // A node never matched keeps its attributes.
    let mut none = identity("a", 2);
    none.map.insert(0, Label::None);
    let est = estimate_attributes(&p, &[&g1], &[none]).unwrap();
    assert_eq!(est.unary(0).unwrap(), &[vec![0.0]]);
    assert_eq!(est.pairwise(0, 1).unwrap(), &[vec![0.0]]);
    assert!(estimate_attributes(&p, &[&g1], &[]).is_err());
}

#[test]
fn tentative_edges_follow_q_rank() {
    let q = [0.0f64, 5.0, 1.0, 3.0];
    let g = arg("g", &[0.0; 4], |s, t| if s == 0 { q[t].sqrt() } else { 0.0 });
    let mut p = zero_pattern(4);
    p.params.set_weights(&[0.5, 0.5]);
    let a = identity("g", 4);
    let e = tentative_edge_set(&p, 0, &[&g], std::slice::from_ref(&a), MinDegree::Finite(2)).unwrap();
    assert_eq!(e, vec![2, 3]);
    let all = tentative_edge_set(&p, 0, &[&g], std::slice::from_ref(&a), MinDegree::Unbounded).unwrap();
    assert_eq!(all, vec![2, 3, 1]);
    let single = zero_pattern(1);
    let e = tentative_edge_set(&single, 0, &[&g], &[identity("g", 1)], MinDegree::Finite(2)).unwrap();
    assert!(e.is_empty());
}

#[test]
fn deletion_removes_the_worst_node_only() {
    let g = arg("g", &[2f64.sqrt(), 5f64.sqrt(), 2.0], |_, _| 0.0);
    let mut p = zero_pattern(3);
    p.params.set_weights(&[1.0, 0.0]);
    let state = MiningState::new(p, vec![identity("g", 3)]);
    let (next, del) = delete_worst_node(&state, &[&g], 3.0, MinDegree::Finite(2)).unwrap();
    let del = del.unwrap();
    assert_eq!(del.node, 1);
    assert!((del.mean_energy - 5.0).abs() < 1e-12);
    assert_eq!(next.pattern.node_ids().collect::<Vec<_>>(), vec![0, 2]);
    assert!(next.pattern.edges().iter().all(|&(s, t)| s != 1 && t != 1));
    assert!(next.assignments[0].get(1).is_err());

    let (same, del) = delete_worst_node(&state, &[&g], 6.0, MinDegree::Finite(2)).unwrap();
    assert!(del.is_none());
    assert_eq!(same, state);

    // The last node is never removed.
    let lone = MiningState::new(zero_pattern(1), vec![identity("g", 1)]);
    let g1 = arg("g", &[100.0], |_, _| 0.0);
    assert!(delete_worst_node(&lone, &[&g1], 0.0, MinDegree::Finite(2)).unwrap().1.is_none());
}

#[test]
fn fill_edges_boundaries() {
    let g = arg("g", &[0.5, 0.0, 0.0], |s, t| (s + t) as f64);
    let mut p = zero_pattern(3);
    p.params.set_weights(&[0.5, 0.5]);
    let state = MiningState::new(p, vec![identity("g", 3)]);
    let full = fill_edges(&state, &[&g], f64::INFINITY).unwrap();
    assert_eq!(full.pattern.edges().len(), 6);
    // Unary energy of node 0 is 0.125, so a smaller tau leaves it edgeless.
    let none = fill_edges(&state, &[&g], 0.125).unwrap();
    assert_eq!(none.pattern.out_degree(0), 0);
}

#[test]
fn none_penalties_interpolate_matched_means() {
    let pos = arg("p", &[1.0, 0.0], |_, _| 0.0);
    let neg = arg("n", &[3.0, 2.0], |_, _| 2.0);
    let mut p = zero_pattern(2);
    p.params.set_weights(&[0.5, 0.5]);
    let mut pos_a = identity("p", 2);
    pos_a.map.insert(1, Label::None);
    let neg_a = identity("n", 2);
    // P̄⁺ = 0.5 over the one matched node; P̄⁻ = (4.5 + 2) / 2.
    // Q̄⁺ = 0 (its only target is occluded); Q̄⁻ = 2 per node.
    let params = update_none_penalties(&p, &[&pos], &[&neg], &[pos_a.clone()], &[neg_a.clone()], 0.5).unwrap();
    assert!((params.p_none.value() - (0.5 + 0.5 * (3.25 - 0.5))).abs() < 1e-12);
    assert!((params.q_none.value() - 1.0).abs() < 1e-12);

    // Nothing matched on the positive side: penalties are kept.
    let mut all_none = pos_a;
    all_none.map.insert(0, Label::None);
    let params = update_none_penalties(&p, &[&pos], &[&neg], &[all_none], &[neg_a], 0.5).unwrap();
    assert!(params.p_none.is_infinite() && params.q_none.is_infinite());
}

fn planted(size: usize, n_pos: usize) -> (Vec<Arg<f64>>, crate::synth::GroundTruth<f64>) {
    let spec = SyntheticSpec {
        schema: AttributeSchema::new(vec![2], vec![2]).unwrap(),
        pattern_size: size,
        n_background: 4,
        n_positive: n_pos,
        n_negative: 0,
        noise_sigma: 0.0,
        occlusion_prob: 0.0,
        attr_range: (0.0, 10.0),
        rng_seed: 3,
        init_plant_nodes: None,
        init_background_nodes: None,
    };
    let data = generate::<f64>(&spec).unwrap();
    (data.pos, data.truth)
}

#[test]
fn discovery_finds_the_missing_planted_node() {
    for n_pos in [2, 4] {
        let (pos, truth) = planted(4, n_pos);
        let args: Vec<&Arg<f64>> = pos.iter().collect();
        let mut partial = truth.plant.clone();
        partial.remove_node(3).unwrap();
        let assignments: Vec<Assignment> = (0..n_pos)
            .map(|k| {
                let mut a = Assignment::new(pos[k].id());
                for p in 0..3 {
                    a.map.insert(p, Label::Node(truth.correspondences[k][&p].unwrap()));
                }
                a
            })
            .collect();
        let state = MiningState::new(partial, assignments);
        let cfg = MiningConfig {
            tau: 1.0,
            ..MiningConfig::default()
        };
        let (next, added) = discover_node(&state, &args, &cfg).unwrap();
        let added = added.unwrap();
        assert_eq!(added.mean_energy, 0.0);
        for k in 0..n_pos {
            assert_eq!(
                next.assignments[k].get(added.node).unwrap(),
                Label::Node(truth.correspondences[k][&3].unwrap())
            );
        }
        assert_eq!(next.pattern.out_degree(added.node), 2);

        // A strict gate: the same proposal is rejected at tau = 0.
        let cfg = MiningConfig { tau: 0.0, ..cfg };
        let (same, added) = discover_node(&state, &args, &cfg).unwrap();
        assert!(added.is_none());
        assert_eq!(same, state);
    }
}

#[test]
fn single_arg_discovery_ties_to_lowest_free_node() {
    // With one ARG, y's attributes are copied from its label, so every free node fits
    // perfectly and the lowest index wins.
    let (pos, truth) = planted(3, 1);
    let mut partial = truth.plant.clone();
    partial.remove_node(2).unwrap();
    let mut a = Assignment::new(pos[0].id());
    for p in 0..2 {
        a.map.insert(p, Label::Node(truth.correspondences[0][&p].unwrap()));
    }
    let used = a.used_nodes();
    let lowest_free = (0..pos[0].n_nodes()).find(|x| !used.contains(x)).unwrap();
    let prop = propose_node(&partial, &[&pos[0]], &[a], &MiningConfig::default()).unwrap().unwrap();
    assert_eq!(prop.labels, vec![Label::Node(lowest_free)]);
    assert_eq!(prop.mean_energy, 0.0);
}

#[test]
fn zero_iterations_return_the_template() {
    let (pos, truth) = planted(3, 2);
    let cfg = MiningConfig {
        max_iters: 0,
        ..MiningConfig::default()
    };
    let out = mine(&truth.plant, &pos, &[], &cfg).unwrap();
    assert!(!out.converged);
    assert_eq!(out.pattern, truth.plant);
    assert!(out.state.history.is_empty());
}

#[test]
fn mining_a_clean_plant_grows_and_converges() {
    let (pos, truth) = planted(4, 3);
    let mut init = truth.plant.clone();
    init.remove_node(3).unwrap();
    init.remove_node(2).unwrap();
    let cfg = MiningConfig {
        tau: 1.0,
        ..MiningConfig::default()
    };
    let out = mine(&init, &pos, &[], &cfg).unwrap();
    assert!(out.converged);
    assert_eq!(out.pattern.len(), 4);
    for r in &out.state.history {
        if let Some(g) = r.add_gain {
            assert!(g < 0.0);
        }
    }
}
