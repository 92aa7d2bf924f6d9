//! Synthetic ARG sets with a planted pattern, for verifying mining without images.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{pattern_from_json, pattern_to_json, read_json, write_json};
use crate::model::{Arg, Assignment, AttributeSchema, Attrs, Label, NodeId, Pattern};
use crate::solver::derive_seed;
use crate::Scalar;

const PROTOTYPE_TAG: u64 = 0;
const POSITIVE_TAG: u64 = 1 << 32;
const NEGATIVE_TAG: u64 = 2 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub schema: AttributeSchema,
    pub pattern_size: usize,
    pub n_background: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    /// Standard deviation of the Gaussian noise added to every planted attribute
    /// component.
    pub noise_sigma: f64,
    /// Probability that a planted node is missing from a positive ARG.
    pub occlusion_prob: f64,
    /// Range `[lo, hi)` of the uniform prototype and background attributes.
    pub attr_range: (f64, f64),
    pub rng_seed: u64,
    /// Planted nodes in the initial template (default `min(3, pattern_size)`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_plant_nodes: Option<usize>,
    /// Background nodes in the initial template (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_background_nodes: Option<usize>,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        let fail = |m: &str| Err(Error::Validation(m.to_string()));
        if self.pattern_size == 0 {
            return fail("pattern_size must be >= 1");
        }
        if self.pattern_size + self.n_background < 2 {
            return fail("pattern_size + n_background must be >= 2");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail("noise_sigma must be finite and >= 0");
        }
        if !(0.0..1.0).contains(&self.occlusion_prob) {
            return fail("occlusion_prob must lie in [0, 1)");
        }
        let (lo, hi) = self.attr_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return fail("attr_range must be a finite interval with lo < hi");
        }
        Ok(())
    }
}

/// The noise-free prototype and, per positive ARG, where each planted node went.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth<T: Scalar> {
    pub plant: Pattern<T>,
    pub arg_ids: Vec<String>,
    /// Per positive ARG: plant node → ARG node index, `None` when occluded.
    pub correspondences: Vec<BTreeMap<NodeId, Option<usize>>>,
}

impl<T: Scalar> GroundTruth<T> {
    /// ARG nodes holding planted nodes in positive ARG `k`.
    pub fn plant_nodes(&self, k: usize) -> BTreeSet<usize> {
        self.correspondences[k].values().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData<T: Scalar> {
    pub pos: Vec<Arg<T>>,
    pub neg: Vec<Arg<T>>,
    pub truth: GroundTruth<T>,
}

fn uniform_attrs<T: Scalar>(rng: &mut ChaCha8Rng, dims: &[usize], (lo, hi): (f64, f64)) -> Attrs<T> {
    dims.iter()
        .map(|&d| (0..d).map(|_| T::of(rng.random_range(lo..hi))).collect())
        .collect()
}

fn perturb<T: Scalar>(rng: &mut ChaCha8Rng, noise: &Normal<f64>, attrs: &[Vec<T>]) -> Attrs<T> {
    attrs
        .iter()
        .map(|v| v.iter().map(|&x| x + T::of(noise.sample(rng))).collect())
        .collect()
}

/// Generates positives, negatives and the ground truth. Each ARG draws from its own
/// seed derived from `(rng_seed, index)`.
pub fn generate<T: Scalar>(spec: &SyntheticSpec) -> Result<SyntheticData<T>> {
    spec.validate()?;
    let schema = &spec.schema;
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Validation(e.to_string()))?;
    let m = spec.pattern_size;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.rng_seed, PROTOTYPE_TAG));
    let proto_unary: Vec<Attrs<T>> = (0..m)
        .map(|_| uniform_attrs(&mut rng, &schema.unary_dims, spec.attr_range))
        .collect();
    let proto_pair: Vec<Attrs<T>> = (0..m * m)
        .map(|_| uniform_attrs(&mut rng, &schema.pairwise_dims, spec.attr_range))
        .collect();
    let proto = Arg::from_fn("plant", schema.clone(), proto_unary.clone(), |s, t| {
        proto_pair[s * m + t].clone()
    })?;
    let plant = Pattern::from_arg_nodes("plant", &proto, &(0..m).collect::<Vec<_>>())?;

    let mut pos = Vec::with_capacity(spec.n_positive);
    let mut correspondences = Vec::with_capacity(spec.n_positive);
    for k in 0..spec.n_positive {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.rng_seed, POSITIVE_TAG + k as u64));
        let surviving: Vec<usize> = (0..m).filter(|_| !rng.random_bool(spec.occlusion_prob)).collect();
        // Slot i < surviving.len() holds plant node surviving[i]; the rest is background.
        let n = surviving.len() + spec.n_background;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut slot_unary: Vec<Attrs<T>> = surviving
            .iter()
            .map(|&p| perturb(&mut rng, &noise, &proto_unary[p]))
            .collect();
        slot_unary.extend((0..spec.n_background).map(|_| uniform_attrs(&mut rng, &schema.unary_dims, spec.attr_range)));
        let mut slot_pair: Vec<Attrs<T>> = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                slot_pair.push(if i == j {
                    Vec::new()
                } else if i < surviving.len() && j < surviving.len() {
                    perturb(&mut rng, &noise, &proto_pair[surviving[i] * m + surviving[j]])
                } else {
                    uniform_attrs(&mut rng, &schema.pairwise_dims, spec.attr_range)
                });
            }
        }
        // order[i] is the ARG index of slot i.
        let mut slot_of = vec![0; n];
        for (slot, &x) in order.iter().enumerate() {
            slot_of[x] = slot;
        }
        let unary = (0..n).map(|x| slot_unary[slot_of[x]].clone()).collect();
        let id = format!("pos_{k:04}");
        pos.push(Arg::from_fn(id, schema.clone(), unary, |a, b| {
            slot_pair[slot_of[a] * n + slot_of[b]].clone()
        })?);
        let mut corr: BTreeMap<NodeId, Option<usize>> = (0..m as NodeId).map(|p| (p, None)).collect();
        for (slot, &p) in surviving.iter().enumerate() {
            corr.insert(p as NodeId, Some(order[slot]));
        }
        correspondences.push(corr);
    }

    let mut neg = Vec::with_capacity(spec.n_negative);
    let n = m + spec.n_background;
    for k in 0..spec.n_negative {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.rng_seed, NEGATIVE_TAG + k as u64));
        let unary = (0..n)
            .map(|_| uniform_attrs(&mut rng, &schema.unary_dims, spec.attr_range))
            .collect();
        let pairs: Vec<Attrs<T>> = (0..n * n)
            .map(|_| uniform_attrs(&mut rng, &schema.pairwise_dims, spec.attr_range))
            .collect();
        neg.push(Arg::from_fn(format!("neg_{k:04}"), schema.clone(), unary, |a, b| {
            pairs[a * n + b].clone()
        })?);
    }

    let arg_ids = pos.iter().map(|g| g.id().to_string()).collect();
    Ok(SyntheticData {
        pos,
        neg,
        truth: GroundTruth {
            plant,
            arg_ids,
            correspondences,
        },
    })
}

/// Rough initial template cut from the first positive ARG: the first surviving planted
/// nodes (by plant id) followed by background nodes (by ARG index). Pattern nodes
/// `0..p` are planted, the rest background.
pub fn initial_template<T: Scalar>(spec: &SyntheticSpec, data: &SyntheticData<T>) -> Result<Pattern<T>> {
    let first = data.pos.first().ok_or(Error::Empty("positive ARG set"))?;
    let plant_count = spec.init_plant_nodes.unwrap_or(spec.pattern_size.min(3));
    let background_count = spec.init_background_nodes.unwrap_or(1);
    let plant_nodes = data.truth.plant_nodes(0);
    let mut nodes: Vec<usize> = data.truth.correspondences[0]
        .values()
        .flatten()
        .copied()
        .take(plant_count)
        .collect();
    nodes.extend(
        (0..first.n_nodes())
            .filter(|x| !plant_nodes.contains(x))
            .take(background_count),
    );
    if nodes.len() != plant_count + background_count {
        return Err(Error::Validation(format!(
            "the first positive ARG cannot supply {plant_count} planted and {background_count} background nodes"
        )));
    }
    Pattern::from_arg_nodes("init", first, &nodes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    /// Fraction of real matches (over mined nodes and ARGs) landing on planted nodes.
    pub precision: f64,
    /// Fraction of planted nodes that are the majority correspondence of a mined node.
    pub recall: f64,
    /// `|V_mined| − pattern_size`.
    pub size_error: i64,
    /// Majority planted node per mined node.
    pub node_map: BTreeMap<NodeId, Option<NodeId>>,
}

/// Compares a mined pattern with the plant. Assignments are matched to ground truth by
/// ARG id, so they may cover any subset of the positives.
pub fn score_recovery<T: Scalar>(
    mined: &Pattern<T>,
    assignments: &[Assignment],
    truth: &GroundTruth<T>,
) -> Result<RecoveryReport> {
    let index: BTreeMap<&str, usize> = truth.arg_ids.iter().enumerate().map(|(k, id)| (id.as_str(), k)).collect();
    // Reverse maps: ARG node → plant node, per positive.
    let mut reverse = Vec::with_capacity(assignments.len());
    for a in assignments {
        let &k = index
            .get(a.arg_id.as_str())
            .ok_or_else(|| Error::Validation(format!("ARG {} has no ground truth", a.arg_id)))?;
        let rev: BTreeMap<usize, NodeId> = truth.correspondences[k]
            .iter()
            .filter_map(|(&p, &x)| x.map(|x| (x, p)))
            .collect();
        reverse.push(rev);
    }
    let (mut real, mut hits) = (0usize, 0usize);
    let mut node_map = BTreeMap::new();
    for s in mined.node_ids() {
        let mut votes: BTreeMap<NodeId, usize> = BTreeMap::new();
        for (a, rev) in assignments.iter().zip(&reverse) {
            if let Label::Node(x) = a.get(s)? {
                real += 1;
                if let Some(&p) = rev.get(&x) {
                    hits += 1;
                    *votes.entry(p).or_default() += 1;
                }
            }
        }
        // Highest count wins; ties go to the lowest plant id.
        let best = votes.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(&p, _)| p);
        node_map.insert(s, best);
    }
    let covered: BTreeSet<NodeId> = node_map.values().flatten().copied().collect();
    let size = truth.plant.len();
    Ok(RecoveryReport {
        precision: if real == 0 { 0.0 } else { hits as f64 / real as f64 },
        recall: covered.len() as f64 / size as f64,
        size_error: mined.len() as i64 - size as i64,
        node_map,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthFile {
    plant: serde_json::Value,
    arg_ids: Vec<String>,
    correspondences: Vec<BTreeMap<NodeId, Option<usize>>>,
}

pub fn save_ground_truth<T: Scalar>(truth: &GroundTruth<T>, path: impl AsRef<Path>) -> Result<()> {
    write_json(
        path,
        &TruthFile {
            plant: pattern_to_json(&truth.plant),
            arg_ids: truth.arg_ids.clone(),
            correspondences: truth.correspondences.clone(),
        },
    )
}

pub fn load_ground_truth<T: Scalar>(path: impl AsRef<Path>) -> Result<GroundTruth<T>> {
    let file: TruthFile = read_json(path)?;
    if file.arg_ids.len() != file.correspondences.len() {
        return Err(Error::CountMismatch(file.arg_ids.len(), file.correspondences.len()));
    }
    Ok(GroundTruth {
        plant: pattern_from_json(file.plant)?,
        arg_ids: file.arg_ids,
        correspondences: file.correspondences,
    })
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<SyntheticSpec> {
    let spec: SyntheticSpec = read_json(path)?;
    spec.validate()?;
    Ok(spec)
}
