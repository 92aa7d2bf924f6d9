//! Matching energy of a pattern against an ARG.
//!
//! A pattern node `s` mapped to ARG node `x` pays the unary penalty
//! `P_s = Σ_i w^P_i ‖F_i^s − F_i^x‖²` (or `p_none` when unmatched), and every outgoing
//! edge `(s,t)` pays `Q_st = Σ_j w^Q_j ‖F_j^{st} − F_j^{x_s x_t}‖² / |E_s|`, with
//! `q_none/|E_s|` when either end is unmatched and `+inf` when both ends share one
//! ARG node. All penalties are nonnegative; `+inf` is absorbing.

use crate::error::{Error, Result};
use crate::model::{Arg, Assignment, Label, NodeId, Pattern};
use crate::scalar::{mean, weighted_sq_dist};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeEnergyBreakdown<T> {
    pub unary: T,
    pub pairwise: T,
    pub total: T,
}

pub(crate) fn check_schema<T: Scalar>(pattern: &Pattern<T>, arg: &Arg<T>) -> Result<()> {
    if pattern.schema() != arg.schema() {
        return Err(Error::Schema(format!(
            "pattern {:?} and ARG {:?} use different attribute schemas",
            pattern.id,
            arg.id()
        )));
    }
    Ok(())
}

fn check_target<T: Scalar>(arg: &Arg<T>, label: Label) -> Result<()> {
    match label {
        Label::Node(x) if x >= arg.n_nodes() => Err(Error::Validation(format!(
            "ARG {:?} has no node {x}",
            arg.id()
        ))),
        _ => Ok(()),
    }
}

/// Unary penalty without schema checks. `s` must be a pattern node.
#[inline]
pub(crate) fn unary_raw<T: Scalar>(pattern: &Pattern<T>, s: NodeId, arg: &Arg<T>, target: Label) -> T {
    match target {
        Label::Node(x) => weighted_sq_dist(
            &pattern.params.w_unary,
            pattern.unary(s).expect("pattern node"),
            arg.unary(x),
        ),
        Label::None => pattern.params.p_none.value(),
    }
}

/// Weighted pairwise distance of pattern pair `(s,t)` to ARG pair `(xs,xt)`, without
/// the `1/|E_s|` factor. `xs != xt`.
#[inline]
pub(crate) fn pair_dist_raw<T: Scalar>(
    pattern: &Pattern<T>,
    s: NodeId,
    t: NodeId,
    arg: &Arg<T>,
    xs: usize,
    xt: usize,
) -> T {
    weighted_sq_dist(
        &pattern.params.w_pairwise,
        pattern.pairwise(s, t).expect("pattern pair"),
        arg.pairwise(xs, xt),
    )
}

/// Pairwise penalty without checks; `norm` is the `|E_s|` normalizer (> 0).
#[inline]
pub(crate) fn pairwise_raw<T: Scalar>(
    pattern: &Pattern<T>,
    s: NodeId,
    t: NodeId,
    arg: &Arg<T>,
    xs: Label,
    xt: Label,
    norm: usize,
) -> T {
    let norm = T::of(norm as f64);
    match (xs, xt) {
        (Label::Node(a), Label::Node(b)) if a == b => T::infinity(),
        (Label::Node(a), Label::Node(b)) => pair_dist_raw(pattern, s, t, arg, a, b) / norm,
        _ => pattern.params.q_none.value() / norm,
    }
}

pub fn unary_penalty<T: Scalar>(
    pattern: &Pattern<T>,
    s: NodeId,
    arg: &Arg<T>,
    target: Label,
) -> Result<T> {
    check_schema(pattern, arg)?;
    if !pattern.contains(s) {
        return Err(Error::UnknownNode(s));
    }
    check_target(arg, target)?;
    Ok(unary_raw(pattern, s, arg, target))
}

/// `Q_st` for the ordered pattern pair `(s,t)` normalized by `out_degree_s`. The pair
/// does not have to be an edge of the pattern; tentative edge sets are scored this way.
pub fn pairwise_penalty<T: Scalar>(
    pattern: &Pattern<T>,
    (s, t): (NodeId, NodeId),
    arg: &Arg<T>,
    xs: Label,
    xt: Label,
    out_degree_s: usize,
) -> Result<T> {
    check_schema(pattern, arg)?;
    for n in [s, t] {
        if !pattern.contains(n) {
            return Err(Error::UnknownNode(n));
        }
    }
    if s == t {
        return Err(Error::Validation(format!("({s},{t}) is a self pair")));
    }
    if out_degree_s == 0 {
        return Err(Error::ZeroOutDegree(s));
    }
    check_target(arg, xs)?;
    check_target(arg, xt)?;
    Ok(pairwise_raw(pattern, s, t, arg, xs, xt, out_degree_s))
}

/// Energy of node `s` with an explicit outgoing target set (normalized by its size).
pub fn node_energy_with_targets<T: Scalar>(
    pattern: &Pattern<T>,
    s: NodeId,
    arg: &Arg<T>,
    assignment: &Assignment,
    targets: &[NodeId],
) -> Result<NodeEnergyBreakdown<T>> {
    check_schema(pattern, arg)?;
    if !pattern.contains(s) {
        return Err(Error::UnknownNode(s));
    }
    let xs = assignment.get(s)?;
    check_target(arg, xs)?;
    let unary = unary_raw(pattern, s, arg, xs);
    let mut pairwise = T::zero();
    for &t in targets {
        if !pattern.contains(t) || t == s {
            return Err(Error::UnknownNode(t));
        }
        let xt = assignment.get(t)?;
        check_target(arg, xt)?;
        pairwise = pairwise + pairwise_raw(pattern, s, t, arg, xs, xt, targets.len());
    }
    Ok(NodeEnergyBreakdown {
        unary,
        pairwise,
        total: unary + pairwise,
    })
}

/// `E_s^k = P_s + Σ_{(s,t)∈E_s} Q_st` with the pattern's own edge set.
pub fn node_energy<T: Scalar>(
    pattern: &Pattern<T>,
    s: NodeId,
    arg: &Arg<T>,
    assignment: &Assignment,
) -> Result<NodeEnergyBreakdown<T>> {
    let targets: Vec<NodeId> = pattern.out_targets(s).collect();
    node_energy_with_targets(pattern, s, arg, assignment, &targets)
}

fn check_counts<T>(args: &[&Arg<T>], assignments: &[Assignment]) -> Result<()> {
    if args.is_empty() {
        return Err(Error::Empty("ARG list"));
    }
    if args.len() != assignments.len() {
        return Err(Error::CountMismatch(args.len(), assignments.len()));
    }
    Ok(())
}

/// Mean of `node_energy(s)` over the ARGs.
pub fn mean_node_energy<T: Scalar>(
    pattern: &Pattern<T>,
    s: NodeId,
    args: &[&Arg<T>],
    assignments: &[Assignment],
) -> Result<T> {
    check_counts(args, assignments)?;
    let totals = args
        .iter()
        .zip(assignments)
        .map(|(g, a)| node_energy(pattern, s, g, a).map(|e| e.total))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean(totals).expect("nonempty"))
}

/// `Σ_{s∈V} (mean_node_energy(s) − τ)`.
pub fn pattern_objective<T: Scalar>(
    pattern: &Pattern<T>,
    args: &[&Arg<T>],
    assignments: &[Assignment],
    tau: T,
) -> Result<T> {
    pattern
        .node_ids()
        .map(|s| mean_node_energy(pattern, s, args, assignments).map(|e| e - tau))
        .sum()
}

/// `Σ_{s∈V} E_s^k`, the energy of one match.
pub fn total_match_energy<T: Scalar>(
    pattern: &Pattern<T>,
    arg: &Arg<T>,
    assignment: &Assignment,
) -> Result<T> {
    pattern
        .node_ids()
        .map(|s| node_energy(pattern, s, arg, assignment).map(|e| e.total))
        .sum()
}
