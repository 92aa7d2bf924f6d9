//! Pattern-to-ARG matching: the quadratic assignment of pattern nodes to ARG nodes or
//! the occlusion label, minimizing the total match energy.

use rayon::prelude::*;

use crate::energy::{check_schema, pair_dist_raw, unary_raw};
use crate::error::{Error, Result};
use crate::model::{Arg, Assignment, Label, MiningConfig, NodeId, Pattern, SolverKind};
use crate::solver::{LabelingProblem, Solution};
use crate::Scalar;

/// Exhaustive search is refused above this many joint states.
pub const EXACT_STATE_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult<T> {
    pub assignment: Assignment,
    pub energy: T,
    pub iterations: usize,
    pub exact: bool,
}

/// Builds the labeling problem: variables are pattern nodes in id order, labels are
/// ARG nodes `0..n` followed by the occlusion label at index `n`. Real labels are
/// exclusive, so every solution is injective.
pub(crate) fn build_problem<T: Scalar>(pattern: &Pattern<T>, arg: &Arg<T>) -> (Vec<NodeId>, LabelingProblem<T>) {
    let nodes: Vec<NodeId> = pattern.node_ids().collect();
    let n = arg.n_nodes();
    let index_of = |s: NodeId| nodes.binary_search(&s).expect("pattern node");
    let unary = nodes
        .iter()
        .map(|&s| {
            (0..n)
                .map(|x| unary_raw(pattern, s, arg, Label::Node(x)))
                .chain(std::iter::once(pattern.params.p_none.value()))
                .collect()
        })
        .collect();
    let mut problem = LabelingProblem::new(unary);
    let q_none = pattern.params.q_none.value();
    for &s in &nodes {
        let targets: Vec<NodeId> = pattern.out_targets(s).collect();
        let norm = T::of(targets.len() as f64);
        for t in targets {
            let mut costs = Vec::with_capacity((n + 1) * (n + 1));
            for xs in 0..=n {
                for xt in 0..=n {
                    costs.push(if xs == n || xt == n {
                        q_none / norm
                    } else if xs == xt {
                        T::infinity()
                    } else {
                        pair_dist_raw(pattern, s, t, arg, xs, xt) / norm
                    });
                }
            }
            problem.add_pair(index_of(s), index_of(t), costs);
        }
    }
    let resources = vec![(0..n).map(Some).chain(std::iter::once(None)).collect(); nodes.len()];
    (nodes, problem.with_resources(resources))
}

fn to_result<T: Scalar>(nodes: &[NodeId], arg: &Arg<T>, sol: Solution<T>) -> MatchResult<T> {
    let n = arg.n_nodes();
    let mut assignment = Assignment::new(arg.id());
    for (&s, &l) in nodes.iter().zip(&sol.labels) {
        assignment
            .map
            .insert(s, if l == n { Label::None } else { Label::Node(l) });
    }
    MatchResult {
        assignment,
        energy: sol.energy,
        iterations: sol.iterations,
        exact: sol.exact,
    }
}

/// Globally optimal match. Ties go to the lexicographically first assignment in node
/// id order, with lower ARG indices first and the occlusion label last.
pub fn match_exact<T: Scalar>(pattern: &Pattern<T>, arg: &Arg<T>) -> Result<MatchResult<T>> {
    match_exact_with_limit(pattern, arg, EXACT_STATE_LIMIT)
}

pub fn match_exact_with_limit<T: Scalar>(
    pattern: &Pattern<T>,
    arg: &Arg<T>,
    limit: f64,
) -> Result<MatchResult<T>> {
    check_schema(pattern, arg)?;
    let (nodes, problem) = build_problem(pattern, arg);
    let sol = problem.solve_exact(limit)?;
    Ok(to_result(&nodes, arg, sol))
}

/// Coordinate descent with `restarts` starting points (plus anchored greedy starts).
pub fn match_approx<T: Scalar>(
    pattern: &Pattern<T>,
    arg: &Arg<T>,
    restarts: usize,
    seed: u64,
) -> Result<MatchResult<T>> {
    check_schema(pattern, arg)?;
    if restarts == 0 {
        return Err(Error::Parameter("restarts must be >= 1".into()));
    }
    let (nodes, problem) = build_problem(pattern, arg);
    let sol = problem.solve_approx(restarts, seed, true)?;
    Ok(to_result(&nodes, arg, sol))
}

/// Matches with the configured solver: exhaustive when the instance fits
/// `cfg.exact_limit` (and the exact solver is selected), approximate otherwise.
pub fn match_one<T: Scalar>(pattern: &Pattern<T>, arg: &Arg<T>, cfg: &MiningConfig) -> Result<MatchResult<T>> {
    check_schema(pattern, arg)?;
    let (nodes, problem) = build_problem(pattern, arg);
    let sol = if cfg.solver == SolverKind::Exact && problem.state_count() <= cfg.exact_limit {
        problem.solve_exact(cfg.exact_limit)?
    } else {
        problem.solve_approx(cfg.restarts, cfg.rng_seed, true)?
    };
    Ok(to_result(&nodes, arg, sol))
}

/// Matches every ARG independently (in parallel); results keep input order.
pub fn match_many<T: Scalar>(
    pattern: &Pattern<T>,
    args: &[&Arg<T>],
    cfg: &MiningConfig,
) -> Result<Vec<MatchResult<T>>> {
    args.par_iter().map(|g| match_one(pattern, g, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::total_match_energy;
    use crate::model::{AttributeSchema, Penalty};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_arg(rng: &mut ChaCha8Rng, n: usize, id: &str) -> Arg<f64> {
        let schema = AttributeSchema::new(vec![2], vec![2]).unwrap();
        let unary = (0..n)
            .map(|_| vec![vec![rng.random(), rng.random()]])
            .collect();
        let pw: Vec<Vec<f64>> = (0..n * n).map(|_| vec![rng.random(), rng.random()]).collect();
        Arg::from_fn(id, schema, unary, |s, t| vec![pw[s * n + t].clone()]).unwrap()
    }

    #[test]
    fn single_node_picks_unary_argmin() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_arg(&mut rng, 6, "g");
        let other = random_arg(&mut rng, 1, "h");
        let p = Pattern::from_arg_nodes("p", &other, &[0]).unwrap();
        let r = match_exact(&p, &g).unwrap();
        let best = (0..6)
            .min_by(|&a, &b| {
                let ea = unary_raw(&p, 0, &g, Label::Node(a));
                let eb = unary_raw(&p, 0, &g, Label::Node(b));
                ea.partial_cmp(&eb).unwrap()
            })
            .unwrap();
        assert_eq!(r.assignment.get(0).unwrap(), Label::Node(best));
    }

    #[test]
    fn exact_copy_is_recovered_with_zero_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_arg(&mut rng, 6, "g");
        let p = Pattern::from_arg_nodes("p", &g, &[4, 1, 3]).unwrap();
        let r = match_exact(&p, &g).unwrap();
        assert_eq!(r.energy, 0.0);
        let got: Vec<_> = r.assignment.map.values().copied().collect();
        assert_eq!(got, vec![Label::Node(4), Label::Node(1), Label::Node(3)]);
        let a = match_approx(&p, &g, 20, 9).unwrap();
        assert_eq!(a.energy, 0.0);
    }

    #[test]
    fn energy_agrees_with_energy_module() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..30 {
            let g = random_arg(&mut rng, 5, "g");
            let src = random_arg(&mut rng, 4, "src");
            let mut p = Pattern::from_arg_nodes("p", &src, &[0, 1, 2]).unwrap();
            p.params.p_none = Penalty::Finite(0.3);
            p.params.q_none = Penalty::Finite(0.2);
            p.set_out_edges(1, &[]).unwrap();
            for r in [match_exact(&p, &g).unwrap(), match_approx(&p, &g, 3, i).unwrap()] {
                assert!(r.assignment.is_injective());
                let e = total_match_energy(&p, &g, &r.assignment).unwrap();
                assert!((e - r.energy).abs() <= 1e-9 * e.abs().max(1.0));
            }
        }
    }

    #[test]
    fn infinite_penalties_exclude_none() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_arg(&mut rng, 4, "g");
        let src = random_arg(&mut rng, 4, "src");
        let p = Pattern::from_arg_nodes("p", &src, &[0, 1, 2, 3]).unwrap();
        for r in [match_exact(&p, &g).unwrap(), match_approx(&p, &g, 4, 0).unwrap()] {
            assert_eq!(r.assignment.matched_count(), 4);
            assert!(r.energy.is_finite());
        }
    }

    #[test]
    fn approx_rejects_zero_restarts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_arg(&mut rng, 3, "g");
        let p = Pattern::from_arg_nodes("p", &g, &[0]).unwrap();
        assert!(matches!(match_approx(&p, &g, 0, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn exact_guard() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = random_arg(&mut rng, 30, "g");
        let p = Pattern::from_arg_nodes("p", &g, &[0, 1, 2, 3, 4]).unwrap();
        assert!(matches!(match_exact(&p, &g), Err(Error::InstanceTooLarge { .. })));
    }

    #[test]
    fn many_preserves_order_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_arg(&mut rng, 9, "g");
        let h = random_arg(&mut rng, 9, "h");
        let p = Pattern::from_arg_nodes("p", &g, &[0, 2, 4, 6, 8]).unwrap();
        let cfg = MiningConfig {
            solver: SolverKind::Approximate,
            ..MiningConfig::default()
        };
        assert!(match_many(&p, &[], &cfg).unwrap().is_empty());
        let res = match_many(&p, &[&g, &h, &g], &cfg).unwrap();
        assert_eq!(res[0], res[2]);
        assert_eq!(res[1].assignment.arg_id, "h");
        let sequential: Vec<_> = [&g, &h, &g].iter().map(|a| match_one(&p, a, &cfg).unwrap()).collect();
        assert_eq!(res, sequential);
    }
}
