//! Node discovery: find one missing pattern node `y` by jointly choosing its
//! correspondence in every positive ARG.
//!
//! The correspondences form an MRF with one variable per ARG whose labels are the ARG
//! nodes not used by the current assignment. It is solved twice: first with the
//! conservative potentials that pick the `d₂` most favourable targets per ARG pair, then
//! with potentials restricted to a fixed edge set `E_y`.

use std::collections::BTreeMap;

use super::{check_counts, mean_pair_attrs, mean_unary_attrs, MiningState};
use crate::energy::{node_energy_with_targets, pairwise_raw};
use crate::error::Result;
use crate::model::{Arg, Assignment, Attrs, Label, MiningConfig, NodeId, Pattern, SolverKind};
use crate::scalar::weighted_sq_dist;
use crate::solver::{derive_seed, LabelingProblem, Solution};
use crate::Scalar;

/// Intermediate and final results of one discovery attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeProposal<T: Scalar> {
    /// Labels minimizing the conservative potentials, one per ARG.
    pub initial_labels: Vec<Label>,
    pub initial_energy: T,
    /// Outgoing targets of `y`, ranked from the initial labels.
    pub targets: Vec<NodeId>,
    /// Labels minimizing the potentials restricted to `targets`.
    pub labels: Vec<Label>,
    pub refined_energy: T,
    /// Enlarged pattern with `y` re-estimated from `labels` and edges `targets`.
    pub pattern: Pattern<T>,
    pub node: NodeId,
    /// Mean energy of `y` over the ARGs.
    pub mean_energy: T,
    /// Whether both MRFs were solved exhaustively.
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Addition<T> {
    pub node: NodeId,
    pub mean_energy: T,
    /// `E_y − τ`, negative.
    pub gain: T,
}

/// Potential tables of the discovery MRF for a fixed pattern and assignment set.
pub struct DiscoveryPotentials<'a, T: Scalar> {
    pattern: &'a Pattern<T>,
    args: &'a [&'a Arg<T>],
    /// Candidate labels per ARG; a single `None` when the ARG has no free node.
    labels: Vec<Vec<Label>>,
    /// `x_t^k` for every pattern node `t` (rows) and ARG `k`.
    matched: Vec<Vec<Label>>,
    /// `Σ_j δ(x_t^j)` per pattern node.
    counts: Vec<usize>,
    nodes: Vec<NodeId>,
    d2: usize,
}

impl<'a, T: Scalar> DiscoveryPotentials<'a, T> {
    pub fn new(pattern: &'a Pattern<T>, args: &'a [&'a Arg<T>], assignments: &[Assignment], d2: usize) -> Result<Self> {
        check_counts(args, assignments)?;
        let nodes: Vec<NodeId> = pattern.node_ids().collect();
        let matched: Vec<Vec<Label>> = nodes
            .iter()
            .map(|&t| assignments.iter().map(|a| a.get(t)).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        let counts = matched.iter().map(|row| row.iter().filter(|l| l.is_matched()).count()).collect();
        let labels = args
            .iter()
            .zip(assignments)
            .map(|(g, a)| {
                let used = a.used_nodes();
                let free: Vec<Label> = (0..g.n_nodes()).filter(|x| !used.contains(x)).map(Label::Node).collect();
                if free.is_empty() {
                    vec![Label::None]
                } else {
                    free
                }
            })
            .collect();
        Ok(Self {
            pattern,
            args,
            labels,
            matched,
            counts,
            nodes,
            d2,
        })
    }

    pub fn labels(&self) -> &[Vec<Label>] {
        &self.labels
    }

    fn n(&self) -> T {
        T::of(self.args.len() as f64)
    }

    /// `m^{kl}_t(a, b)` for the pattern node at position `ti`.
    fn m(&self, k: usize, l: usize, a: usize, b: usize, ti: usize) -> T {
        let n = self.n();
        let d2 = T::of(self.d2 as f64);
        let count = T::of(self.counts[ti] as f64);
        match (self.matched[ti][k], self.matched[ti][l]) {
            (Label::Node(xk), Label::Node(xl)) => {
                let (gk, gl) = (self.args[k], self.args[l]);
                // y's label never coincides with a matched node, so both pairs exist.
                let dist = weighted_sq_dist(&self.pattern.params.w_pairwise, gk.pairwise(a, xk), gl.pairwise(b, xl));
                dist / (T::of(2.0) * d2 * n * count)
            }
            _ => self.pattern.params.q_none.value() / (d2 * n * (n + count)),
        }
    }

    fn unary_part(&self, k: usize, l: usize, a: usize, b: usize) -> T {
        let n = self.n();
        weighted_sq_dist(&self.pattern.params.w_unary, self.args[k].unary(a), self.args[l].unary(b)) / (T::of(2.0) * n * n)
    }

    /// `M̃_kl(a, b)`: the unary term plus the `d₂` smallest `m_t`.
    pub fn conservative(&self, k: usize, l: usize, a: Label, b: Label) -> T {
        let (Label::Node(a), Label::Node(b)) = (a, b) else {
            return T::zero();
        };
        let mut m: Vec<T> = (0..self.nodes.len()).map(|ti| self.m(k, l, a, b, ti)).collect();
        m.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        self.unary_part(k, l, a, b) + m.into_iter().take(self.d2).sum()
    }

    /// `M_kl(a, b)` with the outgoing targets of `y` fixed.
    pub fn restricted(&self, k: usize, l: usize, a: Label, b: Label, targets: &[NodeId]) -> T {
        let (Label::Node(a), Label::Node(b)) = (a, b) else {
            return T::zero();
        };
        let m: T = targets
            .iter()
            .map(|t| self.m(k, l, a, b, self.nodes.binary_search(t).expect("pattern node")))
            .sum();
        self.unary_part(k, l, a, b) + m
    }

    /// Builds the MRF `Σ_{k,l} M_kl(x_k, x_l)`: diagonal terms become unaries and each
    /// unordered pair carries `M_kl + M_lk`.
    fn problem(&self, potential: impl Fn(usize, usize, Label, Label) -> T) -> LabelingProblem<T> {
        let n = self.args.len();
        let unary = (0..n)
            .map(|k| self.labels[k].iter().map(|&a| potential(k, k, a, a)).collect())
            .collect();
        let mut problem = LabelingProblem::new(unary);
        for k in 0..n {
            for l in k + 1..n {
                let mut costs = Vec::with_capacity(self.labels[k].len() * self.labels[l].len());
                for &a in &self.labels[k] {
                    for &b in &self.labels[l] {
                        costs.push(potential(k, l, a, b) + potential(l, k, b, a));
                    }
                }
                problem.add_pair(k, l, costs);
            }
        }
        problem
    }
}

fn solve<T: Scalar>(problem: &LabelingProblem<T>, cfg: &MiningConfig, tag: u64) -> Result<Solution<T>> {
    if cfg.solver == SolverKind::Exact && problem.state_count() <= cfg.exact_limit {
        problem.solve_exact(cfg.exact_limit)
    } else {
        problem.solve_approx(cfg.restarts, derive_seed(cfg.rng_seed, tag), true)
    }
}

/// Pattern enlarged by `y`, whose attributes are averaged from its labels. Pairs that
/// never co-occur fall back to zero vectors.
fn enlarge<T: Scalar>(
    pattern: &Pattern<T>,
    args: &[&Arg<T>],
    assignments: &[Assignment],
    labels: &[Label],
) -> Result<Option<(Pattern<T>, NodeId)>> {
    let Some(unary) = mean_unary_attrs(args, labels.iter().copied()) else {
        return Ok(None);
    };
    let zeros: Attrs<T> = pattern.schema().pairwise_dims.iter().map(|&d| vec![T::zero(); d]).collect();
    let mut outgoing = BTreeMap::new();
    let mut incoming = BTreeMap::new();
    for t in pattern.node_ids() {
        let lt: Vec<Label> = assignments.iter().map(|a| a.get(t)).collect::<Result<_>>()?;
        let out = mean_pair_attrs(args, labels.iter().copied(), lt.iter().copied());
        let inc = mean_pair_attrs(args, lt.iter().copied(), labels.iter().copied());
        outgoing.insert(t, out.unwrap_or_else(|| zeros.clone()));
        incoming.insert(t, inc.unwrap_or_else(|| zeros.clone()));
    }
    let mut enlarged = pattern.clone();
    let y = enlarged.add_node(unary, outgoing, incoming)?;
    Ok(Some((enlarged, y)))
}

fn with_label(assignments: &[Assignment], y: NodeId, labels: &[Label]) -> Vec<Assignment> {
    assignments
        .iter()
        .zip(labels)
        .map(|(a, &l)| {
            let mut a = a.clone();
            a.map.insert(y, l);
            a
        })
        .collect()
}

/// The `d₂` targets with the smallest summed `Q_yt`, ties by node id.
fn rank_targets<T: Scalar>(
    enlarged: &Pattern<T>,
    y: NodeId,
    args: &[&Arg<T>],
    assignments: &[Assignment],
    d2: usize,
) -> Result<Vec<NodeId>> {
    let mut scored = Vec::new();
    for t in enlarged.node_ids().filter(|&t| t != y) {
        let mut sum = T::zero();
        for (g, a) in args.iter().zip(assignments) {
            sum = sum + pairwise_raw(enlarged, y, t, g, a.get(y)?, a.get(t)?, d2);
        }
        scored.push((t, sum));
    }
    scored.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().take(d2).map(|(t, _)| t).collect())
}

/// Mean energy of `y` with the given labels and targets, after re-estimating `y`.
fn evaluate<T: Scalar>(
    pattern: &Pattern<T>,
    args: &[&Arg<T>],
    assignments: &[Assignment],
    labels: &[Label],
    targets: &[NodeId],
) -> Result<Option<(Pattern<T>, NodeId, T)>> {
    let Some((mut enlarged, y)) = enlarge(pattern, args, assignments, labels)? else {
        return Ok(None);
    };
    enlarged.set_out_edges(y, targets)?;
    let extended = with_label(assignments, y, labels);
    let mut sum = T::zero();
    for (g, a) in args.iter().zip(&extended) {
        sum = sum + node_energy_with_targets(&enlarged, y, g, a, targets)?.total;
    }
    let mean = sum / T::of(args.len() as f64);
    Ok(Some((enlarged, y, mean)))
}

/// Edge set of `y` for given labels: rank targets using attributes averaged from them.
fn targets_for<T: Scalar>(
    pattern: &Pattern<T>,
    args: &[&Arg<T>],
    assignments: &[Assignment],
    labels: &[Label],
    d2: usize,
) -> Result<Option<Vec<NodeId>>> {
    let Some((enlarged, y)) = enlarge(pattern, args, assignments, labels)? else {
        return Ok(None);
    };
    let extended = with_label(assignments, y, labels);
    rank_targets(&enlarged, y, args, &extended, d2).map(Some)
}

/// Runs the discovery procedure without deciding whether `y` is accepted. Returns
/// `None` when no ARG offers a candidate node.
pub fn propose_node<T: Scalar>(
    pattern: &Pattern<T>,
    args: &[&Arg<T>],
    assignments: &[Assignment],
    cfg: &MiningConfig,
) -> Result<Option<NodeProposal<T>>> {
    check_counts(args, assignments)?;
    if args.is_empty() || pattern.is_empty() {
        return Ok(None);
    }
    let d2 = cfg.d.cap(pattern.len());
    let pot = DiscoveryPotentials::new(pattern, args, assignments, d2)?;
    if pot.labels().iter().all(|ls| ls == &[Label::None]) {
        return Ok(None);
    }

    if args.len() == 1 {
        // No pairwise terms: score every candidate by its final energy directly.
        let mut best: Option<(Label, Vec<NodeId>, Pattern<T>, NodeId, T)> = None;
        for &a in &pot.labels()[0] {
            let Some(targets) = targets_for(pattern, args, assignments, &[a], d2)? else {
                continue;
            };
            let Some((enlarged, y, e)) = evaluate(pattern, args, assignments, &[a], &targets)? else {
                continue;
            };
            if best.as_ref().is_none_or(|b| e < b.4) {
                best = Some((a, targets, enlarged, y, e));
            }
        }
        let Some((label, targets, enlarged, y, e)) = best else {
            return Ok(None);
        };
        let unary = pot.conservative(0, 0, label, label);
        let refined = pot.restricted(0, 0, label, label, &targets);
        return Ok(Some(NodeProposal {
            initial_labels: vec![label],
            initial_energy: unary,
            targets,
            labels: vec![label],
            refined_energy: refined,
            pattern: enlarged,
            node: y,
            mean_energy: e,
            exact: true,
        }));
    }

    let decode = |sol: &Solution<T>| -> Vec<Label> {
        sol.labels.iter().enumerate().map(|(k, &i)| pot.labels()[k][i]).collect()
    };
    let first = solve(&pot.problem(|k, l, a, b| pot.conservative(k, l, a, b)), cfg, 1)?;
    let initial_labels = decode(&first);
    let Some(targets) = targets_for(pattern, args, assignments, &initial_labels, d2)? else {
        return Ok(None);
    };
    let second = solve(&pot.problem(|k, l, a, b| pot.restricted(k, l, a, b, &targets)), cfg, 2)?;
    let labels = decode(&second);
    let Some((enlarged, y, mean_energy)) = evaluate(pattern, args, assignments, &labels, &targets)? else {
        return Ok(None);
    };
    Ok(Some(NodeProposal {
        initial_labels,
        initial_energy: first.energy,
        targets,
        labels,
        refined_energy: second.energy,
        pattern: enlarged,
        node: y,
        mean_energy,
        exact: first.exact && second.exact,
    }))
}

/// Adds the proposed node when its mean energy is below `τ`.
pub fn discover_node<T: Scalar>(
    state: &MiningState<T>,
    args: &[&Arg<T>],
    cfg: &MiningConfig,
) -> Result<(MiningState<T>, Option<Addition<T>>)> {
    let tau: T = cfg.tau_as();
    let Some(proposal) = propose_node(&state.pattern, args, &state.assignments, cfg)? else {
        return Ok((state.clone(), None));
    };
    if !(proposal.mean_energy < tau) {
        return Ok((state.clone(), None));
    }
    let mut next = state.clone();
    next.assignments = with_label(&state.assignments, proposal.node, &proposal.labels);
    next.pattern = proposal.pattern;
    Ok((
        next,
        Some(Addition {
            node: proposal.node,
            mean_energy: proposal.mean_energy,
            gain: proposal.mean_energy - tau,
        }),
    ))
}
