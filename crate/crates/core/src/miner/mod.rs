//! The mining loop: starting from a rough template, alternate matching, attribute
//! estimation, node deletion, node discovery, edge filling and parameter training
//! until the pattern stops changing.

mod discovery;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use discovery::{discover_node, propose_node, Addition, DiscoveryPotentials, NodeProposal};

use crate::energy::{check_schema, node_energy_with_targets, pairwise_raw, pattern_objective, unary_raw};
use crate::error::{Error, Result};
use crate::matcher::match_many;
use crate::model::{Arg, Assignment, Attrs, Label, MatchParams, MinDegree, MiningConfig, NodeId, Pattern, Penalty};
use crate::serde_ext::{ext_float, ext_float_opt};
use crate::trainer::{extract_features, postprocess_and_blend, train};
use crate::Scalar;

/// One line of the mining history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub n_nodes: usize,
    pub n_edges: usize,
    /// Positive ARGs that survived the quality filters.
    pub active_args: usize,
    #[serde(with = "ext_float")]
    pub objective: f64,
    pub deleted: Option<NodeId>,
    /// Objective change of the deletion (negative when a node was removed).
    #[serde(with = "ext_float_opt")]
    pub delete_gain: Option<f64>,
    pub added: Option<NodeId>,
    #[serde(with = "ext_float_opt")]
    pub add_gain: Option<f64>,
    pub weights: Vec<f64>,
    #[serde(with = "ext_float")]
    pub p_none: f64,
    #[serde(with = "ext_float")]
    pub q_none: f64,
    pub svm_bias: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiningState<T: Scalar> {
    pub pattern: Pattern<T>,
    /// One assignment per active positive ARG.
    pub assignments: Vec<Assignment>,
    pub iteration: usize,
    pub history: Vec<IterationRecord>,
}

impl<T: Scalar> MiningState<T> {
    pub fn new(pattern: Pattern<T>, assignments: Vec<Assignment>) -> Self {
        Self {
            pattern,
            assignments,
            iteration: 0,
            history: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deletion<T> {
    pub node: NodeId,
    pub mean_energy: T,
    /// `τ − E_s`, negative.
    pub gain: T,
}

#[derive(Debug, Clone)]
pub struct MiningOutcome<T: Scalar> {
    pub pattern: Pattern<T>,
    pub state: MiningState<T>,
    /// True when the loop reached a fixpoint before `max_iters`.
    pub converged: bool,
}

fn check_counts<T>(args: &[&Arg<T>], assignments: &[Assignment]) -> Result<()> {
    if args.len() != assignments.len() {
        return Err(Error::CountMismatch(args.len(), assignments.len()));
    }
    Ok(())
}

fn mean_attrs<'a, T: Scalar + 'a>(items: impl Iterator<Item = &'a [Vec<T>]>) -> Option<Attrs<T>> {
    let mut acc: Option<Attrs<T>> = None;
    let mut n = 0usize;
    for a in items {
        n += 1;
        match &mut acc {
            None => acc = Some(a.to_vec()),
            Some(acc) => {
                for (dst, src) in acc.iter_mut().zip(a) {
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d = *d + s;
                    }
                }
            }
        }
    }
    let denom = T::of(n as f64);
    acc.map(|mut a| {
        a.iter_mut().flatten().for_each(|x| *x = *x / denom);
        a
    })
}

/// Pairwise attributes of ARG pairs `(x_s^k, x_t^k)` averaged over ARGs where both ends
/// are matched to distinct nodes.
pub(crate) fn mean_pair_attrs<T: Scalar>(
    args: &[&Arg<T>],
    labels_s: impl Iterator<Item = Label>,
    labels_t: impl Iterator<Item = Label>,
) -> Option<Attrs<T>> {
    let pairs: Vec<(usize, usize, usize)> = labels_s
        .zip(labels_t)
        .enumerate()
        .filter_map(|(k, (a, b))| match (a, b) {
            (Label::Node(x), Label::Node(y)) if x != y => Some((k, x, y)),
            _ => None,
        })
        .collect();
    mean_attrs(pairs.iter().map(|&(k, x, y)| args[k].pairwise(x, y)))
}

pub(crate) fn mean_unary_attrs<T: Scalar>(args: &[&Arg<T>], labels: impl Iterator<Item = Label>) -> Option<Attrs<T>> {
    let items: Vec<(usize, usize)> = labels
        .enumerate()
        .filter_map(|(k, l)| l.node().map(|x| (k, x)))
        .collect();
    mean_attrs(items.iter().map(|&(k, x)| args[k].unary(x)))
}

/// Sets every pattern attribute to the mean of its matched ARG counterparts. Attributes
/// with no matched counterpart keep their value.
pub fn estimate_attributes<T: Scalar>(
    pattern: &Pattern<T>,
    args: &[&Arg<T>],
    assignments: &[Assignment],
) -> Result<Pattern<T>> {
    check_counts(args, assignments)?;
    let mut out = pattern.clone();
    let labels = |s: NodeId| -> Result<Vec<Label>> { assignments.iter().map(|a| a.get(s)).collect() };
    let nodes: Vec<NodeId> = pattern.node_ids().collect();
    let all: Vec<Vec<Label>> = nodes.iter().map(|&s| labels(s)).collect::<Result<_>>()?;
    for (i, &s) in nodes.iter().enumerate() {
        if let Some(m) = mean_unary_attrs(args, all[i].iter().copied()) {
            *out.unary_mut(s).unwrap() = m;
        }
        for (j, &t) in nodes.iter().enumerate() {
            if s == t {
                continue;
            }
            if let Some(m) = mean_pair_attrs(args, all[i].iter().copied(), all[j].iter().copied()) {
                *out.pairwise_mut(s, t).unwrap() = m;
            }
        }
    }
    Ok(out)
}

/// `Σ_k Q_st(x_s^k, x_t^k)` with normalizer `norm` for every candidate target `t != s`,
/// sorted ascending with ties broken by node id.
fn ranked_targets<T: Scalar>(
    pattern: &Pattern<T>,
    s: NodeId,
    args: &[&Arg<T>],
    assignments: &[Assignment],
    norm: usize,
) -> Result<Vec<(NodeId, T)>> {
    let mut scored = Vec::with_capacity(pattern.len());
    for t in pattern.node_ids().filter(|&t| t != s) {
        let mut sum = T::zero();
        for (g, a) in args.iter().zip(assignments) {
            sum = sum + pairwise_raw(pattern, s, t, g, a.get(s)?, a.get(t)?, norm);
        }
        scored.push((t, sum));
    }
    scored.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    Ok(scored)
}

/// Mean over ARGs of the energy of `s` with outgoing targets `targets`.
pub fn mean_energy_with_targets<T: Scalar>(
    pattern: &Pattern<T>,
    s: NodeId,
    args: &[&Arg<T>],
    assignments: &[Assignment],
    targets: &[NodeId],
) -> Result<T> {
    check_counts(args, assignments)?;
    if args.is_empty() {
        return Err(Error::Empty("ARG list"));
    }
    let mut sum = T::zero();
    for (g, a) in args.iter().zip(assignments) {
        sum = sum + node_energy_with_targets(pattern, s, g, a, targets)?.total;
    }
    Ok(sum / T::of(args.len() as f64))
}

/// The `min(d, |V|−1)` targets with the smallest summed pairwise penalty.
pub fn tentative_edge_set<T: Scalar>(
    pattern: &Pattern<T>,
    s: NodeId,
    args: &[&Arg<T>],
    assignments: &[Assignment],
    d: MinDegree,
) -> Result<Vec<NodeId>> {
    check_counts(args, assignments)?;
    if !pattern.contains(s) {
        return Err(Error::UnknownNode(s));
    }
    let d1 = d.cap(pattern.len() - 1);
    if d1 == 0 {
        return Ok(Vec::new());
    }
    let ranked = ranked_targets(pattern, s, args, assignments, d1)?;
    Ok(ranked.into_iter().take(d1).map(|(t, _)| t).collect())
}

/// Removes the node with the most negative deletion gain `τ − E_s`, where `E_s` is
/// evaluated on its tentative edge set. Never removes the last node.
pub fn delete_worst_node<T: Scalar>(
    state: &MiningState<T>,
    args: &[&Arg<T>],
    tau: T,
    d: MinDegree,
) -> Result<(MiningState<T>, Option<Deletion<T>>)> {
    let pattern = &state.pattern;
    check_counts(args, &state.assignments)?;
    if pattern.len() < 2 || args.is_empty() {
        return Ok((state.clone(), None));
    }
    let mut worst: Option<Deletion<T>> = None;
    for s in pattern.node_ids() {
        let targets = tentative_edge_set(pattern, s, args, &state.assignments, d)?;
        let e = mean_energy_with_targets(pattern, s, args, &state.assignments, &targets)?;
        let gain = tau - e;
        if worst.as_ref().is_none_or(|w| gain < w.gain) {
            worst = Some(Deletion {
                node: s,
                mean_energy: e,
                gain,
            });
        }
    }
    let worst = worst.expect("nonempty pattern");
    if !(worst.gain < T::zero()) {
        return Ok((state.clone(), None));
    }
    let mut next = state.clone();
    next.pattern.remove_node(worst.node)?;
    for a in &mut next.assignments {
        a.map.remove(&worst.node);
    }
    Ok((next, Some(worst)))
}

/// Rebuilds every node's outgoing edge set greedily: targets are taken in increasing
/// order of summed pairwise penalty while the node's mean energy stays below `τ`.
pub fn fill_edges<T: Scalar>(state: &MiningState<T>, args: &[&Arg<T>], tau: T) -> Result<MiningState<T>> {
    check_counts(args, &state.assignments)?;
    let mut next = state.clone();
    if args.is_empty() {
        return Ok(next);
    }
    let pattern = &state.pattern;
    for s in pattern.node_ids() {
        let ranked = ranked_targets(pattern, s, args, &state.assignments, 1)?;
        let mut kept: Vec<NodeId> = Vec::new();
        for &(t, _) in &ranked {
            kept.push(t);
            let e = mean_energy_with_targets(pattern, s, args, &state.assignments, &kept)?;
            if !(e < tau) {
                kept.pop();
                break;
            }
        }
        next.pattern.set_out_edges(s, &kept)?;
    }
    Ok(next)
}

/// Mean unary and per-node pairwise penalty over matched instances.
fn mean_penalties<T: Scalar>(
    pattern: &Pattern<T>,
    args: &[&Arg<T>],
    assignments: &[Assignment],
) -> Result<(Option<T>, Option<T>)> {
    let (mut p_sum, mut q_sum, mut n) = (T::zero(), T::zero(), 0usize);
    for (g, a) in args.iter().zip(assignments) {
        for s in pattern.node_ids() {
            let Label::Node(xs) = a.get(s)? else { continue };
            n += 1;
            p_sum = p_sum + unary_raw(pattern, s, g, Label::Node(xs));
            let degree = pattern.out_degree(s);
            for t in pattern.out_targets(s) {
                let xt = a.get(t)?;
                if xt.is_matched() {
                    q_sum = q_sum + pairwise_raw(pattern, s, t, g, Label::Node(xs), xt, degree);
                }
            }
        }
    }
    if n == 0 {
        return Ok((None, None));
    }
    let n = T::of(n as f64);
    Ok((Some(p_sum / n), Some(q_sum / n)))
}

/// Interpolates each occlusion penalty between the mean positive and negative matched
/// penalties: `P̄⁺ + α(P̄⁻ − P̄⁺)`. Penalties whose update is undefined (no matched
/// instances) or not positive keep their previous value.
pub fn update_none_penalties<T: Scalar>(
    pattern: &Pattern<T>,
    pos_args: &[&Arg<T>],
    neg_args: &[&Arg<T>],
    assignments: &[Assignment],
    neg_assignments: &[Assignment],
    alpha: T,
) -> Result<MatchParams<T>> {
    check_counts(pos_args, assignments)?;
    check_counts(neg_args, neg_assignments)?;
    let (p_pos, q_pos) = mean_penalties(pattern, pos_args, assignments)?;
    let (p_neg, q_neg) = mean_penalties(pattern, neg_args, neg_assignments)?;
    let mut params = pattern.params.clone();
    let blend = |pos: Option<T>, neg: Option<T>, old: Penalty<T>| match (pos, neg) {
        (Some(p), Some(n)) => {
            let v = p + alpha * (n - p);
            if v > T::zero() && v.is_finite() {
                Penalty::Finite(v)
            } else {
                old
            }
        }
        _ => old,
    };
    params.p_none = blend(p_pos, p_neg, params.p_none);
    params.q_none = blend(q_pos, q_neg, params.q_none);
    Ok(params)
}

/// Trains the attribute weights against negative matches and refreshes the occlusion
/// penalties. Returns the updated parameters and the SVM offset, if training ran.
pub fn train_parameters<T: Scalar>(
    pattern: &Pattern<T>,
    pos_args: &[&Arg<T>],
    assignments: &[Assignment],
    neg_args: &[&Arg<T>],
    cfg: &MiningConfig,
) -> Result<(MatchParams<T>, Option<T>)> {
    check_counts(pos_args, assignments)?;
    if neg_args.is_empty() {
        return Ok((pattern.params.clone(), None));
    }
    // Negative matches are computed with occlusion forbidden.
    let mut probe = pattern.clone();
    probe.params = pattern.params.with_infinite_penalties();
    let neg_assignments: Vec<Assignment> = match_many(&probe, neg_args, cfg)?
        .into_iter()
        .map(|r| r.assignment)
        .collect();
    let features = |args: &[&Arg<T>], assignments: &[Assignment]| -> Result<Vec<Vec<T>>> {
        let mut out = Vec::new();
        for (g, a) in args.iter().zip(assignments) {
            match extract_features(pattern, g, a) {
                Ok(f) => out.push(f),
                Err(Error::DegenerateSample) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    };
    let pos = features(pos_args, assignments)?;
    let neg = features(neg_args, &neg_assignments)?;
    let mut trained = pattern.clone();
    let mut bias = None;
    if !pos.is_empty() && !neg.is_empty() {
        let outcome = train(&pos, &neg, T::of(cfg.c_svm))?;
        if !outcome.converged {
            log::warn!("weight training stopped at the iteration budget");
        }
        let w = postprocess_and_blend(&outcome.w, &pattern.params.weights(), T::of(cfg.lambda));
        trained.params.set_weights(&w);
        trained.params.trained = true;
        bias = Some(outcome.b);
    }
    let params = update_none_penalties(
        &trained,
        pos_args,
        neg_args,
        assignments,
        &neg_assignments,
        T::of(cfg.alpha),
    )?;
    Ok((params, bias))
}

/// Keeps ARGs whose match covers at least `min_match_fraction` of the pattern, then the
/// `top_fraction` of those with the lowest energies. Returns indices in input order.
fn quality_filter<T: Scalar>(
    coverage_and_energy: &[(f64, T)],
    cfg: &MiningConfig,
) -> Vec<usize> {
    let mut kept: Vec<usize> = (0..coverage_and_energy.len())
        .filter(|&k| coverage_and_energy[k].0 >= cfg.min_match_fraction)
        .collect();
    if cfg.top_fraction < 1.0 && !kept.is_empty() {
        let keep = ((cfg.top_fraction * kept.len() as f64).ceil() as usize).max(1);
        kept.sort_by(|&a, &b| {
            coverage_and_energy[a]
                .1
                .partial_cmp(&coverage_and_energy[b].1)
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        kept.truncate(keep);
        kept.sort_unstable();
    }
    kept
}

fn improvement<T: Scalar>(prev: T, cur: T) -> T {
    if prev == cur {
        T::zero()
    } else {
        (prev - cur).abs()
    }
}

/// Runs the mining loop from template `init`.
pub fn mine<T: Scalar>(
    init: &Pattern<T>,
    pos: &[Arg<T>],
    neg: &[Arg<T>],
    cfg: &MiningConfig,
) -> Result<MiningOutcome<T>> {
    cfg.validate()?;
    init.validate()?;
    if pos.is_empty() {
        return Err(Error::Empty("positive ARG set"));
    }
    for g in pos.iter().chain(neg) {
        check_schema(init, g)?;
    }
    let tau: T = cfg.tau_as();
    let pos_refs: Vec<&Arg<T>> = pos.iter().collect();
    let neg_refs: Vec<&Arg<T>> = neg.iter().collect();
    let mut state = MiningState::new(init.clone(), Vec::new());
    let mut prev_objective: Option<T> = None;
    let mut converged = false;

    while state.iteration < cfg.max_iters {
        let started = Instant::now();
        let iteration = state.iteration + 1;
        let nodes_before: BTreeSet<NodeId> = state.pattern.node_ids().collect();

        // Op 1: match and filter.
        let results = match_many(&state.pattern, &pos_refs, cfg)?;
        let size = state.pattern.len() as f64;
        let stats: Vec<(f64, T)> = results
            .iter()
            .map(|r| (r.assignment.matched_count() as f64 / size, r.energy))
            .collect();
        let kept = quality_filter(&stats, cfg);
        if kept.is_empty() {
            return Err(Error::AllFiltered(iteration));
        }
        let active: Vec<&Arg<T>> = kept.iter().map(|&k| pos_refs[k]).collect();
        let mut results = results;
        state.assignments = kept
            .iter()
            .map(|&k| std::mem::replace(&mut results[k].assignment, Assignment::new("")))
            .collect();

        // Op 2.
        state.pattern = estimate_attributes(&state.pattern, &active, &state.assignments)?;
        // Op 3.
        let (next, deletion) = delete_worst_node(&state, &active, tau, cfg.d)?;
        state = next;
        // Op 4.
        let (next, addition) = discover_node(&state, &active, cfg)?;
        state = next;
        // Op 5.
        state = fill_edges(&state, &active, tau)?;
        // Op 6.
        let (params, bias) = train_parameters(&state.pattern, &active, &state.assignments, &neg_refs, cfg)?;
        state.pattern.params = params;

        let objective = pattern_objective(&state.pattern, &active, &state.assignments, tau)?;
        let record = IterationRecord {
            iteration,
            n_nodes: state.pattern.len(),
            n_edges: state.pattern.edges().len(),
            active_args: active.len(),
            objective: objective.to_f64_lossy(),
            deleted: deletion.as_ref().map(|d| d.node),
            delete_gain: deletion.as_ref().map(|d| d.gain.to_f64_lossy()),
            added: addition.as_ref().map(|a| a.node),
            add_gain: addition.as_ref().map(|a| a.gain.to_f64_lossy()),
            weights: state.pattern.params.weights().iter().map(|w| w.to_f64_lossy()).collect(),
            p_none: state.pattern.params.p_none.value().to_f64_lossy(),
            q_none: state.pattern.params.q_none.value().to_f64_lossy(),
            svm_bias: bias.map(|b| b.to_f64_lossy()),
        };
        log::info!(
            target: "mvap::history",
            "iteration={} nodes={} edges={} objective={} added={} deleted={} wall_time_s={:.3}",
            record.iteration,
            record.n_nodes,
            record.n_edges,
            record.objective,
            record.added.map_or("-".to_string(), |n| n.to_string()),
            record.deleted.map_or("-".to_string(), |n| n.to_string()),
            started.elapsed().as_secs_f64()
        );
        state.history.push(record);
        state.iteration = iteration;

        let nodes_after: BTreeSet<NodeId> = state.pattern.node_ids().collect();
        let stable = nodes_before == nodes_after;
        let settled = prev_objective.is_some_and(|p| improvement(p, objective) < T::of(cfg.energy_tol));
        prev_objective = Some(objective);
        if stable && settled {
            converged = true;
            break;
        }
    }
    Ok(MiningOutcome {
        pattern: state.pattern.clone(),
        state,
        converged,
    })
}

#[cfg(test)]
mod tests;
