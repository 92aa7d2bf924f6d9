//! Attribute weight learning: a linear max-margin separation of positive (pattern)
//! matches from negative (background) matches in the space of per-type mean
//! attribute dissimilarities.

use crate::error::{Error, Result};
use crate::model::{Arg, Assignment, Label, Pattern};
use crate::scalar::{mean, sq_dist};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleLabel {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginSample<T> {
    pub features: Vec<T>,
    pub label: SampleLabel,
}

/// Per-type mean squared attribute differences of one match, `[a^P.., a^Q..]`.
///
/// `a^P_i` averages over matched nodes. `a^Q_j` averages, over matched nodes having at
/// least one outgoing edge to a matched node, the per-node mean over those edges; it is
/// 0 when no node qualifies.
pub fn extract_features<T: Scalar>(
    pattern: &Pattern<T>,
    arg: &Arg<T>,
    assignment: &Assignment,
) -> Result<Vec<T>> {
    crate::energy::check_schema(pattern, arg)?;
    let schema = pattern.schema();
    let matched: Vec<_> = pattern
        .node_ids()
        .map(|s| assignment.get(s).map(|l| (s, l)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter_map(|(s, l)| l.node().map(|x| (s, x)))
        .collect();
    if matched.is_empty() {
        return Err(Error::DegenerateSample);
    }
    let mut features = Vec::with_capacity(schema.n_types());
    for i in 0..schema.n_unary() {
        let m = mean(
            matched
                .iter()
                .map(|&(s, x)| sq_dist(&pattern.unary(s).unwrap()[i], &arg.unary(x)[i])),
        );
        features.push(m.expect("nonempty"));
    }
    for j in 0..schema.n_pairwise() {
        let per_node = matched.iter().filter_map(|&(s, xs)| {
            mean(pattern.out_targets(s).filter_map(|t| match assignment.map.get(&t) {
                Some(Label::Node(xt)) if *xt != xs => Some(sq_dist(
                    &pattern.pairwise(s, t).unwrap()[j],
                    &arg.pairwise(xs, *xt)[j],
                )),
                _ => None,
            }))
        });
        features.push(mean(per_node).unwrap_or_else(T::zero));
    }
    Ok(features)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<T> {
    /// Raw hyperplane normal, one entry per attribute type.
    pub w: Vec<T>,
    /// Offset in `w·a − b`.
    pub b: T,
    /// Primal objective `‖w‖² + (C/N⁺)Σξ⁺ + (C/N⁻)Σξ⁻`.
    pub objective: T,
    pub iterations: usize,
    /// False when the iteration budget ran out before the optimality gap closed.
    pub converged: bool,
}

pub const MAX_ITERATIONS: usize = 100_000;
const KKT_TOLERANCE: f64 = 1e-7;

/// Primal objective for a given hyperplane. Positives should satisfy `w·a − b ≤ −1`,
/// negatives `w·a − b ≥ 1`.
pub fn primal_objective<T: Scalar>(pos: &[Vec<T>], neg: &[Vec<T>], c: T, w: &[T], b: T) -> T {
    let dot = |a: &[T]| a.iter().zip(w).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
    let hinge = |m: T| (T::one() - m).max(T::zero());
    let reg: T = w.iter().map(|&x| x * x).sum();
    let lp: T = pos.iter().map(|a| hinge(-(dot(a) - b))).sum();
    let ln: T = neg.iter().map(|a| hinge(dot(a) - b)).sum();
    reg + c / T::of(pos.len() as f64) * lp + c / T::of(neg.len() as f64) * ln
}

/// Solves the class-balanced soft-margin problem with sequential minimal optimization
/// on its dual (linear kernel, second-order working set selection).
pub fn train<T: Scalar>(pos: &[Vec<T>], neg: &[Vec<T>], c: T) -> Result<TrainOutcome<T>> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Empty("training needs at least one sample per class"));
    }
    if !(c > T::zero()) {
        return Err(Error::Parameter("C must be positive".into()));
    }
    let dim = pos[0].len();
    if pos.iter().chain(neg).any(|a| a.len() != dim) {
        return Err(Error::Validation("feature vectors differ in length".into()));
    }
    // ‖w‖² + Σ c_i ξ_i is twice the standard ½‖w‖² + Σ (c_i/2) ξ_i, so the dual box is
    // [0, c_i/2]. Positives carry y = −1.
    let samples: Vec<(&[T], T, T)> = pos
        .iter()
        .map(|a| (a.as_slice(), -T::one(), c / T::of(2.0 * pos.len() as f64)))
        .chain(
            neg.iter()
                .map(|a| (a.as_slice(), T::one(), c / T::of(2.0 * neg.len() as f64))),
        )
        .collect();
    let n = samples.len();
    let kernel: Vec<T> = (0..n * n)
        .map(|i| {
            let (a, b) = (samples[i / n].0, samples[i % n].0);
            a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
        })
        .collect();
    let k = |i: usize, j: usize| kernel[i * n + j];
    let y: Vec<T> = samples.iter().map(|s| s.1).collect();
    let upper: Vec<T> = samples.iter().map(|s| s.2).collect();
    let mut alpha = vec![T::zero(); n];
    // Gradient of ½αᵀQα − eᵀα, with Q_ij = y_i y_j K_ij.
    let mut grad = vec![-T::one(); n];
    let eps = T::of(KKT_TOLERANCE);
    let tiny = T::of(1e-12);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERATIONS {
        let in_up = |t: usize, alpha: &[T]| {
            (y[t] > T::zero() && alpha[t] < upper[t]) || (y[t] < T::zero() && alpha[t] > T::zero())
        };
        let in_low = |t: usize, alpha: &[T]| {
            (y[t] < T::zero() && alpha[t] < upper[t]) || (y[t] > T::zero() && alpha[t] > T::zero())
        };
        let mut i = None;
        let mut g_max = T::neg_infinity();
        for t in 0..n {
            if in_up(t, &alpha) && -y[t] * grad[t] >= g_max {
                g_max = -y[t] * grad[t];
                i = Some(t);
            }
        }
        let mut j = None;
        let mut g_min = T::infinity();
        let mut obj_min = T::infinity();
        if let Some(i) = i {
            for t in 0..n {
                if !in_low(t, &alpha) {
                    continue;
                }
                let v = -y[t] * grad[t];
                g_min = g_min.min(v);
                let b_it = g_max - v;
                if b_it > T::zero() {
                    let mut a_it = k(i, i) + k(t, t) - T::of(2.0) * k(i, t);
                    if a_it <= T::zero() {
                        a_it = tiny;
                    }
                    let o = -(b_it * b_it) / a_it;
                    if o <= obj_min {
                        obj_min = o;
                        j = Some(t);
                    }
                }
            }
        }
        if g_max - g_min < eps {
            converged = true;
            break;
        }
        let (Some(i), Some(j)) = (i, j) else {
            converged = true;
            break;
        };
        iterations += 1;

        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let (ci, cj) = (upper[i], upper[j]);
        let mut quad = k(i, i) + k(j, j) - T::of(2.0) * k(i, j);
        if quad <= T::zero() {
            quad = tiny;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] = alpha[i] + delta;
            alpha[j] = alpha[j] + delta;
            if diff > T::zero() {
                if alpha[j] < T::zero() {
                    alpha[j] = T::zero();
                    alpha[i] = diff;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] = alpha[i] - delta;
            alpha[j] = alpha[j] + delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < T::zero() {
                alpha[j] = T::zero();
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = sum;
            }
        }
        let (dai, daj) = (alpha[i] - old_ai, alpha[j] - old_aj);
        for t in 0..n {
            grad[t] = grad[t] + y[t] * (y[i] * k(t, i) * dai + y[j] * k(t, j) * daj);
        }
    }

    // Offset: average over free multipliers, else the midpoint of the feasible range.
    let (mut ub, mut lb) = (T::infinity(), T::neg_infinity());
    let (mut sum_free, mut n_free) = (T::zero(), 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= upper[t] {
            if y[t] < T::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= T::zero() {
            if y[t] > T::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            sum_free = sum_free + yg;
            n_free += 1;
        }
    }
    // Decision value Σα_i y_i K(x_i, ·) − rho, so rho is exactly our offset b.
    let b = if n_free > 0 {
        sum_free / T::of(n_free as f64)
    } else {
        (ub + lb) / T::of(2.0)
    };
    let mut w = vec![T::zero(); dim];
    for (t, (a, yt, _)) in samples.iter().enumerate() {
        for (wd, &x) in w.iter_mut().zip(a.iter()) {
            *wd = *wd + alpha[t] * *yt * x;
        }
    }
    let objective = primal_objective(pos, neg, c, &w, b);
    Ok(TrainOutcome {
        w,
        b,
        objective,
        iterations,
        converged,
    })
}

/// Clips negative entries, L1-normalizes and blends with the previous weights:
/// `λ·w + (1−λ)·w_prev`, renormalized onto the simplex. An all-zero clipped vector
/// leaves `w_prev` unchanged.
pub fn postprocess_and_blend<T: Scalar>(w_raw: &[T], w_prev: &[T], lambda: T) -> Vec<T> {
    assert_eq!(w_raw.len(), w_prev.len());
    let clipped: Vec<T> = w_raw.iter().map(|&x| x.max(T::zero())).collect();
    let l1: T = clipped.iter().copied().sum();
    if !(l1 > T::zero()) || !l1.is_finite() {
        return w_prev.to_vec();
    }
    let blended: Vec<T> = clipped
        .iter()
        .zip(w_prev)
        .map(|(&w, &p)| lambda * (w / l1) + (T::one() - lambda) * p)
        .collect();
    let total: T = blended.iter().copied().sum();
    blended.into_iter().map(|x| x / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AttributeSchema, NodeId};

    #[test]
    fn worked_blend_example() {
        let out = postprocess_and_blend(&[-1.0, 3.0], &[0.5, 0.5], 0.5);
        assert_eq!(out, vec![0.25, 0.75]);
    }

    #[test]
    fn blend_endpoints() {
        let prev = [0.2, 0.3, 0.5];
        assert_eq!(postprocess_and_blend(&[1.0, 5.0, 2.0], &prev, 0.0), prev.to_vec());
        let raw = [0.1, 0.6, 0.3];
        let out: Vec<f64> = postprocess_and_blend(&raw, &prev, 1.0);
        for (a, b) in out.iter().zip(raw) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(postprocess_and_blend(&[-1.0, 0.0, -2.0], &prev, 0.5), prev.to_vec());
    }

    #[test]
    fn separable_one_dimensional() {
        let pos = vec![vec![0.0f64]; 3];
        let neg = vec![vec![10.0]; 2];
        let r = train(&pos, &neg, 1.0).unwrap();
        assert!(r.converged);
        // Optimal: w = 0.2, b = 1, zero slack.
        assert!((r.w[0] - 0.2).abs() < 1e-6, "{r:?}");
        assert!((r.b - 1.0).abs() < 1e-6);
        assert!((r.objective - 0.04).abs() < 1e-6);
    }

    #[test]
    fn identical_classes() {
        let pos = vec![vec![1.0f64, 2.0]; 2];
        let neg = vec![vec![1.0, 2.0]; 3];
        let r = train(&pos, &neg, 2.0).unwrap();
        // w = 0 and any b in [-1, 1] gives slack 1 per sample: objective C/N⁺·N⁺ + C/N⁻·N⁻ = 2C.
        assert!(r.w.iter().all(|x| x.abs() < 1e-6));
        assert!((r.objective - 4.0).abs() < 1e-6);
    }

    #[test]
    fn duplicated_dataset_gives_same_solution() {
        let pos = vec![vec![0.1, 0.5], vec![0.3, 0.2], vec![0.7, 0.9]];
        let neg = vec![vec![0.8, 0.4], vec![0.6, 1.2]];
        let a = train(&pos, &neg, 3.0).unwrap();
        let dup = |v: &Vec<Vec<f64>>| v.iter().chain(v.iter()).cloned().collect::<Vec<_>>();
        let b = train(&dup(&pos), &dup(&neg), 3.0).unwrap();
        for (x, y) in a.w.iter().zip(&b.w) {
            assert!((x - y).abs() < 1e-5);
        }
        assert!((a.objective - b.objective).abs() < 1e-6);
    }

    #[test]
    fn empty_class_is_an_error() {
        assert!(train::<f64>(&[], &[vec![1.0]], 1.0).is_err());
    }

    fn fixture() -> (Pattern<f64>, Arg<f64>) {
        let schema = AttributeSchema::new(vec![1], vec![1]).unwrap();
        let g = Arg::from_fn(
            "g",
            schema,
            vec![vec![vec![0.0]], vec![vec![1.0]], vec![vec![5.0]]],
            |s, t| vec![vec![(s * 3 + t) as f64]],
        )
        .unwrap();
        let p = Pattern::from_arg_nodes("p", &g, &[0, 1]).unwrap();
        (p, g)
    }

    fn assign(pairs: &[(NodeId, Label)]) -> Assignment {
        let mut a = Assignment::new("g");
        a.map.extend(pairs.iter().copied());
        a
    }

    #[test]
    fn feature_examples() {
        let (p, g) = fixture();
        let perfect = assign(&[(0, Label::Node(0)), (1, Label::Node(1))]);
        assert_eq!(extract_features(&p, &g, &perfect).unwrap(), vec![0.0, 0.0]);

        // Node 1 mapped to ARG node 2: unary diffs {0, 16} -> 8; pair (0,1)->(0,2): (1-2)^2=1,
        // pair (1,0)->(2,0): (3-6)^2 = 9 -> per-node means {1, 9} -> 5.
        let off = assign(&[(0, Label::Node(0)), (1, Label::Node(2))]);
        assert_eq!(extract_features(&p, &g, &off).unwrap(), vec![8.0, 5.0]);

        // One matched node: its edge target is unmatched, so a^Q falls back to 0.
        let single = assign(&[(0, Label::None), (1, Label::Node(2))]);
        assert_eq!(extract_features(&p, &g, &single).unwrap(), vec![16.0, 0.0]);

        let none = assign(&[(0, Label::None), (1, Label::None)]);
        assert!(matches!(extract_features(&p, &g, &none), Err(Error::DegenerateSample)));
    }

    #[test]
    fn edgeless_pattern_has_zero_pairwise_features() {
        let (mut p, g) = fixture();
        p.set_out_edges(0, &[]).unwrap();
        p.set_out_edges(1, &[]).unwrap();
        let a = assign(&[(0, Label::Node(2)), (1, Label::Node(1))]);
        assert_eq!(extract_features(&p, &g, &a).unwrap(), vec![12.5, 0.0]);
    }
}
