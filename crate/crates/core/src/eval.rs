//! Pattern quality metrics: fuzziness, positive/negative energy ratio, detection
//! average precision and edge density.

use std::cmp::Ordering;

use serde::Serialize;

use crate::energy::{mean_node_energy, total_match_energy};
use crate::error::{Error, Result};
use crate::matcher::match_many;
use crate::model::{Arg, Assignment, MiningConfig, Pattern};
use crate::Scalar;

/// Mean over pattern nodes of their mean node energy.
pub fn pattern_fuzziness<T: Scalar>(pattern: &Pattern<T>, args: &[&Arg<T>], assignments: &[Assignment]) -> Result<T> {
    if pattern.is_empty() {
        return Err(Error::Empty("pattern"));
    }
    let mut sum = T::zero();
    for s in pattern.node_ids() {
        sum = sum + mean_node_energy(pattern, s, args, assignments)?;
    }
    Ok(sum / T::of(pattern.len() as f64))
}

/// `mean(pos) / mean(neg)`; `0/0` is 0 and `x/0` is `+∞`.
pub fn energy_ratio_of<T: Scalar>(pos: &[T], neg: &[T]) -> Result<T> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let mean = |v: &[T]| v.iter().copied().sum::<T>() / T::of(v.len() as f64);
    let (p, n) = (mean(pos), mean(neg));
    if n == T::zero() {
        if p == T::zero() {
            return Ok(T::zero());
        }
        log::warn!("negative matches have zero mean energy; energy ratio is infinite");
        return Ok(T::infinity());
    }
    Ok(p / n)
}

/// Mean positive match energy over mean negative match energy (lower is better).
pub fn energy_ratio<T: Scalar>(
    pattern: &Pattern<T>,
    pos_test: &[&Arg<T>],
    neg_test: &[&Arg<T>],
    cfg: &MiningConfig,
) -> Result<T> {
    if pos_test.is_empty() || neg_test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let energies = |args: &[&Arg<T>]| -> Result<Vec<T>> {
        Ok(match_many(pattern, args, cfg)?.into_iter().map(|r| r.energy).collect())
    };
    energy_ratio_of(&energies(pos_test)?, &energies(neg_test)?)
}

/// `−(E − ζ·coverage)`: higher means more pattern-like.
pub fn detection_score<T: Scalar>(pattern: &Pattern<T>, arg: &Arg<T>, assignment: &Assignment, zeta: T) -> Result<T> {
    if pattern.is_empty() {
        return Err(Error::Empty("pattern"));
    }
    let e = total_match_energy(pattern, arg, assignment)?;
    let coverage = T::of(assignment.matched_count() as f64) / T::of(pattern.len() as f64);
    Ok(-(e - zeta * coverage))
}

/// Precision averaged over the ranks of the positives in the descending-score order.
/// Tied scores rank negatives first.
pub fn average_precision<T: Scalar>(scores_pos: &[T], scores_neg: &[T]) -> Result<f64> {
    if scores_pos.is_empty() || scores_neg.is_empty() {
        return Err(Error::Empty("score list"));
    }
    if scores_pos.iter().chain(scores_neg).any(|s| s.is_nan()) {
        return Err(Error::Value("NaN detection score".into()));
    }
    let mut ranked: Vec<(T, bool)> = scores_pos
        .iter()
        .map(|&s| (s, true))
        .chain(scores_neg.iter().map(|&s| (s, false)))
        .collect();
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank, &(_, positive)) in ranked.iter().enumerate() {
        if positive {
            hits += 1;
            total += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(total / scores_pos.len() as f64)
}

pub fn mean_out_degree<T: Scalar>(pattern: &Pattern<T>) -> Result<f64> {
    if pattern.is_empty() {
        return Err(Error::Empty("pattern"));
    }
    Ok(pattern.edges().len() as f64 / pattern.len() as f64)
}

/// All metrics of one pattern on a test split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub pattern_size: usize,
    pub mean_out_degree: f64,
    pub fuzziness: f64,
    pub energy_ratio: f64,
    pub ap: f64,
}

pub fn evaluate<T: Scalar>(
    pattern: &Pattern<T>,
    pos_test: &[&Arg<T>],
    neg_test: &[&Arg<T>],
    cfg: &MiningConfig,
) -> Result<Metrics> {
    if pos_test.is_empty() || neg_test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let pos = match_many(pattern, pos_test, cfg)?;
    let neg = match_many(pattern, neg_test, cfg)?;
    let pos_assign: Vec<Assignment> = pos.iter().map(|r| r.assignment.clone()).collect();
    let zeta = T::of(cfg.zeta);
    let score = |args: &[&Arg<T>], results: &[crate::MatchResult<T>]| -> Result<Vec<T>> {
        args.iter()
            .zip(results)
            .map(|(g, r)| detection_score(pattern, g, &r.assignment, zeta))
            .collect()
    };
    let energies = |results: &[crate::MatchResult<T>]| results.iter().map(|r| r.energy).collect::<Vec<_>>();
    Ok(Metrics {
        pattern_size: pattern.len(),
        mean_out_degree: mean_out_degree(pattern)?,
        fuzziness: pattern_fuzziness(pattern, pos_test, &pos_assign)?.to_f64_lossy(),
        energy_ratio: energy_ratio_of(&energies(&pos), &energies(&neg))?.to_f64_lossy(),
        ap: average_precision(&score(pos_test, &pos)?, &score(neg_test, &neg)?)?,
    })
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub tau: f64,
    pub d: String,
    pub pattern_size: usize,
    pub mean_out_degree: f64,
    pub fuzziness: f64,
    pub energy_ratio: f64,
    pub ap: f64,
    pub wall_time_s: f64,
}

impl MetricsRow {
    pub fn new(cfg: &MiningConfig, metrics: &Metrics, wall_time_s: f64) -> Self {
        Self {
            tau: cfg.tau,
            d: cfg.d.to_string(),
            pattern_size: metrics.pattern_size,
            mean_out_degree: metrics.mean_out_degree,
            fuzziness: metrics.fuzziness,
            energy_ratio: metrics.energy_ratio,
            ap: metrics.ap,
            wall_time_s,
        }
    }
}
