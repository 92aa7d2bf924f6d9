//! Discrete pairwise energy minimization over labelings.
//!
//! A [`LabelingProblem`] has one variable per site, a per-variable label set with unary
//! costs, and pairwise cost tables between variable pairs. Optionally labels are
//! tagged with an exclusive resource so that no two variables may take the same
//! resource (one-to-one matching). All costs must be nonnegative; `+inf` is allowed.
//!
//! Two solvers are provided: exhaustive depth-first branch-and-bound (globally optimal,
//! lexicographically first among ties) and coordinate descent with swap moves from
//! several starting points.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone)]
struct PairTerm<T> {
    a: usize,
    b: usize,
    // costs[la * n_labels(b) + lb]
    costs: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct LabelingProblem<T> {
    unary: Vec<Vec<T>>,
    terms: Vec<PairTerm<T>>,
    // (term index, variable is the term's `a` side)
    incident: Vec<Vec<(usize, bool)>>,
    resources: Option<Vec<Vec<Option<usize>>>>,
    n_resources: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub labels: Vec<usize>,
    pub energy: T,
    /// Leaves visited (exact) or descent sweeps performed (approximate).
    pub iterations: usize,
    pub exact: bool,
}

impl<T: Scalar> LabelingProblem<T> {
    /// `unary[v][l]` is the cost of giving variable `v` label `l`.
    pub fn new(unary: Vec<Vec<T>>) -> Self {
        let n = unary.len();
        Self {
            unary,
            terms: Vec::new(),
            incident: vec![Vec::new(); n],
            resources: None,
            n_resources: 0,
        }
    }

    /// Tags labels with exclusive resources: `resources[v][l] = Some(r)` means label `l`
    /// of `v` consumes `r`, and no two variables may consume the same resource.
    pub fn with_resources(mut self, resources: Vec<Vec<Option<usize>>>) -> Self {
        assert_eq!(resources.len(), self.unary.len());
        for (r, u) in resources.iter().zip(&self.unary) {
            assert_eq!(r.len(), u.len());
        }
        self.n_resources = resources
            .iter()
            .flatten()
            .flatten()
            .map(|&r| r + 1)
            .max()
            .unwrap_or(0);
        self.resources = Some(resources);
        self
    }

    /// Adds a pairwise table between `a` and `b` (`a != b`), laid out row-major as
    /// `costs[la * n_labels(b) + lb]`.
    pub fn add_pair(&mut self, a: usize, b: usize, costs: Vec<T>) {
        assert_ne!(a, b);
        assert_eq!(costs.len(), self.unary[a].len() * self.unary[b].len());
        let idx = self.terms.len();
        self.terms.push(PairTerm { a, b, costs });
        self.incident[a].push((idx, true));
        self.incident[b].push((idx, false));
    }

    pub fn n_vars(&self) -> usize {
        self.unary.len()
    }

    pub fn n_labels(&self, v: usize) -> usize {
        self.unary[v].len()
    }

    /// Number of joint labelings, saturating in `f64`.
    pub fn state_count(&self) -> f64 {
        self.unary.iter().map(|u| u.len() as f64).product()
    }

    #[inline]
    fn term_cost(&self, term: usize, la: usize, lb: usize) -> T {
        let t = &self.terms[term];
        t.costs[la * self.unary[t.b].len() + lb]
    }

    #[inline]
    fn resource(&self, v: usize, l: usize) -> Option<usize> {
        self.resources.as_ref().and_then(|r| r[v][l])
    }

    /// Total energy of a complete labeling.
    pub fn energy(&self, labels: &[usize]) -> T {
        let unary = self
            .unary
            .iter()
            .zip(labels)
            .fold(T::zero(), |acc, (u, &l)| acc + u[l]);
        self.terms
            .iter()
            .enumerate()
            .fold(unary, |acc, (i, t)| acc + self.term_cost(i, labels[t.a], labels[t.b]))
    }

    /// True when the labeling respects resource exclusivity.
    pub fn is_feasible(&self, labels: &[usize]) -> bool {
        let mut used = vec![false; self.n_resources];
        for (v, &l) in labels.iter().enumerate() {
            if let Some(r) = self.resource(v, l) {
                if std::mem::replace(&mut used[r], true) {
                    return false;
                }
            }
        }
        true
    }

    /// Cost of `v` taking `l` given the other variables' labels.
    #[inline]
    fn conditional(&self, v: usize, l: usize, labels: &[usize]) -> T {
        self.incident[v]
            .iter()
            .fold(self.unary[v][l], |acc, &(term, is_a)| {
                let t = &self.terms[term];
                acc + if is_a {
                    self.term_cost(term, l, labels[t.b])
                } else {
                    self.term_cost(term, labels[t.a], l)
                }
            })
    }

    /// Globally optimal labeling by depth-first branch-and-bound. Variables are
    /// assigned in index order and labels tried in index order, so the returned
    /// labeling is the lexicographically first among the minimizers.
    pub fn solve_exact(&self, limit: f64) -> Result<Solution<T>> {
        let states = self.state_count();
        if states > limit {
            return Err(Error::InstanceTooLarge { states, limit });
        }
        let n = self.n_vars();
        if n == 0 {
            return Ok(Solution {
                labels: Vec::new(),
                energy: T::zero(),
                iterations: 1,
                exact: true,
            });
        }
        if self.unary.iter().any(Vec::is_empty) {
            return Err(Error::Validation("a variable has an empty label set".into()));
        }
        // Suffix sums of per-variable minimum unary cost: an admissible bound because
        // every cost is nonnegative.
        let mut bound = vec![T::zero(); n + 1];
        for v in (0..n).rev() {
            let m = self.unary[v].iter().copied().fold(T::infinity(), T::min);
            bound[v] = bound[v + 1] + m;
        }
        // Pair terms are charged when their later variable is assigned.
        let mut closing: Vec<Vec<(usize, usize, bool)>> = vec![Vec::new(); n];
        for (i, t) in self.terms.iter().enumerate() {
            if t.a > t.b {
                closing[t.a].push((i, t.b, true));
            } else {
                closing[t.b].push((i, t.a, false));
            }
        }
        let mut search = Search {
            problem: self,
            closing,
            bound,
            labels: vec![0; n],
            used: vec![false; self.n_resources],
            best: None,
            leaves: 0,
        };
        search.descend(0, T::zero());
        let (labels, _) = search.best.expect("at least one feasible labeling");
        // Re-summed so exact and approximate energies share one summation order.
        let energy = self.energy(&labels);
        Ok(Solution {
            labels,
            energy,
            iterations: search.leaves,
            exact: true,
        })
    }

    /// Coordinate descent from `restarts` starting labelings: the greedy labeling, then
    /// random feasible labelings drawn from a generator seeded with `seed`. When
    /// `anchored` is set, additional starts fix one variable to each of its labels and
    /// complete the rest greedily. Returns the best local minimum (earliest on ties).
    pub fn solve_approx(&self, restarts: usize, seed: u64, anchored: bool) -> Result<Solution<T>> {
        if restarts == 0 {
            return Err(Error::Parameter("restarts must be >= 1".into()));
        }
        if self.unary.iter().any(Vec::is_empty) {
            return Err(Error::Validation("a variable has an empty label set".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: Option<(Vec<usize>, T)> = None;
        let mut sweeps = 0;
        let mut consider = |start: Vec<usize>, sweeps: &mut usize| {
            let (labels, energy, s) = self.descend(start);
            *sweeps += s;
            if best.as_ref().is_none_or(|(_, e)| energy < *e) {
                best = Some((labels, energy));
            }
        };
        consider(self.greedy_start(None), &mut sweeps);
        for _ in 1..restarts {
            let start = self.random_start(&mut rng);
            consider(start, &mut sweeps);
        }
        if anchored {
            for v in 0..self.n_vars() {
                for l in 0..self.n_labels(v) {
                    if self.unary[v][l].is_finite() {
                        consider(self.greedy_start(Some((v, l))), &mut sweeps);
                    }
                }
            }
        }
        let (labels, energy) = best.expect("at least one restart");
        Ok(Solution {
            labels,
            energy,
            iterations: sweeps,
            exact: false,
        })
    }

    /// Assigns variables in order, each taking the free label of least cost given the
    /// variables already assigned. `anchor` pins one variable first.
    fn greedy_start(&self, anchor: Option<(usize, usize)>) -> Vec<usize> {
        let n = self.n_vars();
        let mut labels = vec![usize::MAX; n];
        let mut used = vec![false; self.n_resources];
        if let Some((v, l)) = anchor {
            labels[v] = l;
            if let Some(r) = self.resource(v, l) {
                used[r] = true;
            }
        }
        for v in 0..n {
            if labels[v] != usize::MAX {
                continue;
            }
            let mut choice: Option<(usize, T)> = None;
            for l in 0..self.n_labels(v) {
                if self.resource(v, l).is_some_and(|r| used[r]) {
                    continue;
                }
                let mut c = self.unary[v][l];
                for &(term, is_a) in &self.incident[v] {
                    let t = &self.terms[term];
                    let other = if is_a { t.b } else { t.a };
                    if labels[other] == usize::MAX {
                        continue;
                    }
                    c = c + if is_a {
                        self.term_cost(term, l, labels[other])
                    } else {
                        self.term_cost(term, labels[other], l)
                    };
                }
                if choice.is_none_or(|(_, best)| c < best) {
                    choice = Some((l, c));
                }
            }
            let l = self.fallback_label(v, choice.map(|(l, _)| l));
            if let Some(r) = self.resource(v, l) {
                used[r] = true;
            }
            labels[v] = l;
        }
        labels
    }

    // A variable whose every label is taken keeps a resource-free label if one exists.
    fn fallback_label(&self, v: usize, choice: Option<usize>) -> usize {
        choice
            .or_else(|| (0..self.n_labels(v)).find(|&l| self.resource(v, l).is_none()))
            .unwrap_or(0)
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let n = self.n_vars();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut labels = vec![0; n];
        let mut used = vec![false; self.n_resources];
        for v in order {
            let free: Vec<usize> = (0..self.n_labels(v))
                .filter(|&l| !self.resource(v, l).is_some_and(|r| used[r]))
                .collect();
            let finite: Vec<usize> = free
                .iter()
                .copied()
                .filter(|&l| self.unary[v][l].is_finite())
                .collect();
            let pool = if finite.is_empty() { &free } else { &finite };
            let l = if pool.is_empty() {
                self.fallback_label(v, None)
            } else {
                pool[rng.random_range(0..pool.len())]
            };
            if let Some(r) = self.resource(v, l) {
                used[r] = true;
            }
            labels[v] = l;
        }
        labels
    }

    /// Single-variable moves and pairwise label swaps until no move strictly lowers the
    /// energy. Returns the local minimum, its energy and the number of sweeps.
    fn descend(&self, mut labels: Vec<usize>) -> (Vec<usize>, T, usize) {
        let n = self.n_vars();
        let mut used = vec![0u32; self.n_resources];
        for (v, &l) in labels.iter().enumerate() {
            if let Some(r) = self.resource(v, l) {
                used[r] += 1;
            }
        }
        let mut sweeps = 0;
        loop {
            sweeps += 1;
            let mut changed = false;
            for v in 0..n {
                let cur = labels[v];
                let cur_cost = self.conditional(v, cur, &labels);
                let mut best = (cur, cur_cost);
                for l in 0..self.n_labels(v) {
                    if l == cur || self.resource(v, l).is_some_and(|r| used[r] > 0) {
                        continue;
                    }
                    let c = self.conditional(v, l, &labels);
                    if c < best.1 {
                        best = (l, c);
                    }
                }
                if best.0 != cur {
                    if let Some(r) = self.resource(v, cur) {
                        used[r] -= 1;
                    }
                    if let Some(r) = self.resource(v, best.0) {
                        used[r] += 1;
                    }
                    labels[v] = best.0;
                    changed = true;
                }
            }
            if self.resources.is_some() {
                changed |= self.swap_pass(&mut labels);
            }
            if !changed {
                break;
            }
        }
        let energy = self.energy(&labels);
        (labels, energy, sweeps)
    }

    // Swaps are only meaningful when variables share a label space.
    fn swap_pass(&self, labels: &mut [usize]) -> bool {
        let n = self.n_vars();
        let mut changed = false;
        for u in 0..n {
            for v in (u + 1)..n {
                let (lu, lv) = (labels[u], labels[v]);
                if lu == lv || lv >= self.n_labels(u) || lu >= self.n_labels(v) {
                    continue;
                }
                let before = self.local_energy(u, v, labels);
                labels[u] = lv;
                labels[v] = lu;
                let after = self.local_energy(u, v, labels);
                if after < before {
                    changed = true;
                } else {
                    labels[u] = lu;
                    labels[v] = lv;
                }
            }
        }
        changed
    }

    // Energy of all terms touching u or v (terms between u and v counted once).
    fn local_energy(&self, u: usize, v: usize, labels: &[usize]) -> T {
        let mut e = self.conditional(u, labels[u], labels) + self.unary[v][labels[v]];
        for &(term, is_a) in &self.incident[v] {
            let t = &self.terms[term];
            let other = if is_a { t.b } else { t.a };
            if other == u {
                continue;
            }
            e = e + self.term_cost(term, labels[t.a], labels[t.b]);
        }
        e
    }
}

struct Search<'a, T> {
    problem: &'a LabelingProblem<T>,
    closing: Vec<Vec<(usize, usize, bool)>>,
    bound: Vec<T>,
    labels: Vec<usize>,
    used: Vec<bool>,
    best: Option<(Vec<usize>, T)>,
    leaves: usize,
}

impl<T: Scalar> Search<'_, T> {
    fn descend(&mut self, v: usize, partial: T) {
        let p = self.problem;
        if v == p.n_vars() {
            self.leaves += 1;
            if self.best.as_ref().is_none_or(|(_, e)| partial < *e) {
                self.best = Some((self.labels.clone(), partial));
            }
            return;
        }
        for l in 0..p.n_labels(v) {
            let res = p.resource(v, l);
            if res.is_some_and(|r| self.used[r]) {
                continue;
            }
            let mut cost = partial + p.unary[v][l];
            for &(term, other, v_is_a) in &self.closing[v] {
                let lo = self.labels[other];
                cost = cost
                    + if v_is_a {
                        p.term_cost(term, l, lo)
                    } else {
                        p.term_cost(term, lo, l)
                    };
            }
            if let Some((_, best)) = &self.best {
                if cost + self.bound[v + 1] >= *best {
                    continue;
                }
            }
            self.labels[v] = l;
            if let Some(r) = res {
                self.used[r] = true;
            }
            self.descend(v + 1, cost);
            if let Some(r) = res {
                self.used[r] = false;
            }
        }
    }
}

/// Seed for an independent stream derived from a base seed and a tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_problem(rng: &mut ChaCha8Rng, vars: usize, labels: usize, exclusive: bool) -> LabelingProblem<f64> {
        let unary = (0..vars)
            .map(|_| (0..labels).map(|_| rng.random::<f64>()).collect())
            .collect();
        let mut p = LabelingProblem::new(unary);
        for a in 0..vars {
            for b in 0..vars {
                if a != b && rng.random_bool(0.6) {
                    p.add_pair(a, b, (0..labels * labels).map(|_| rng.random::<f64>()).collect());
                }
            }
        }
        if exclusive {
            p = p.with_resources(vec![(0..labels).map(Some).collect(); vars]);
        }
        p
    }

    fn brute_force(p: &LabelingProblem<f64>) -> (Vec<usize>, f64) {
        let n = p.n_vars();
        let mut labels = vec![0usize; n];
        let mut best: Option<(Vec<usize>, f64)> = None;
        loop {
            if p.is_feasible(&labels) {
                let e = p.energy(&labels);
                if best.as_ref().is_none_or(|(_, b)| e < *b) {
                    best = Some((labels.clone(), e));
                }
            }
            // Lexicographic increment, last variable fastest.
            let mut i = n;
            loop {
                if i == 0 {
                    return best.unwrap();
                }
                i -= 1;
                labels[i] += 1;
                if labels[i] < p.n_labels(i) {
                    break;
                }
                labels[i] = 0;
            }
        }
    }

    #[test]
    fn exact_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..200 {
            let p = random_problem(&mut rng, 1 + trial % 4, 2 + trial % 4, trial % 2 == 0);
            let sol = p.solve_exact(1e7).unwrap();
            let (labels, e) = brute_force(&p);
            assert_eq!(sol.labels, labels, "trial {trial}");
            assert!((sol.energy - e).abs() <= 1e-12 * e.abs().max(1.0));
        }
    }

    #[test]
    fn approx_never_beats_exact_and_respects_exclusivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..100 {
            let p = random_problem(&mut rng, 2 + trial % 3, 3 + trial % 3, true);
            let exact = p.solve_exact(1e7).unwrap();
            let approx = p.solve_approx(5, trial as u64, false).unwrap();
            assert!(p.is_feasible(&approx.labels));
            assert!(approx.energy >= exact.energy - 1e-12);
            assert_eq!(approx.energy, p.energy(&approx.labels));
        }
    }

    #[test]
    fn approx_is_deterministic_and_monotone_in_restarts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_problem(&mut rng, 5, 6, true);
        let a = p.solve_approx(10, 42, false).unwrap();
        assert_eq!(a, p.solve_approx(10, 42, false).unwrap());
        let mut prev = f64::INFINITY;
        for r in 1..15 {
            let e = p.solve_approx(r, 42, false).unwrap().energy;
            assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn guard_and_parameter_errors() {
        let p = LabelingProblem::<f64>::new(vec![vec![0.0; 10]; 8]);
        assert!(matches!(p.solve_exact(1e7), Err(Error::InstanceTooLarge { .. })));
        assert!(matches!(p.solve_approx(0, 0, false), Err(Error::Parameter(_))));
    }

    #[test]
    fn infinite_costs_still_yield_a_labeling() {
        // Two variables, one shared resource and a resource-free label of infinite cost.
        let inf = f64::INFINITY;
        let p = LabelingProblem::new(vec![vec![1.0, inf], vec![2.0, inf]])
            .with_resources(vec![vec![Some(0), None]; 2]);
        let sol = p.solve_exact(1e7).unwrap();
        assert_eq!(sol.labels, vec![0, 1]);
        assert_eq!(sol.energy, inf);
        let approx = p.solve_approx(3, 1, false).unwrap();
        assert!(p.is_feasible(&approx.labels));
    }
}
