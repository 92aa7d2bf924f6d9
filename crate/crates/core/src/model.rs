//! Attributed relational graphs, patterns, matching parameters and assignments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::serde_ext::{ext_float, parse_token};
use crate::Scalar;

/// Stable pattern node id. Ids are issued by a per-pattern counter and never reused.
pub type NodeId = u32;

/// One attribute vector per attribute type.
pub type Attrs<T> = Vec<Vec<T>>;

/// Dimensions of the unary (per node) and pairwise (per ordered pair) attribute types.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSchema {
    pub unary_dims: Vec<usize>,
    pub pairwise_dims: Vec<usize>,
}

impl AttributeSchema {
    pub fn new(unary_dims: Vec<usize>, pairwise_dims: Vec<usize>) -> Result<Self> {
        let schema = Self {
            unary_dims,
            pairwise_dims,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.unary_dims.is_empty() || self.pairwise_dims.is_empty() {
            return Err(Error::Schema(
                "at least one unary and one pairwise attribute type is required".into(),
            ));
        }
        if self.unary_dims.iter().chain(&self.pairwise_dims).any(|&d| d == 0) {
            return Err(Error::Schema("attribute dimensions must be >= 1".into()));
        }
        Ok(())
    }

    pub fn n_unary(&self) -> usize {
        self.unary_dims.len()
    }

    pub fn n_pairwise(&self) -> usize {
        self.pairwise_dims.len()
    }

    /// Total number of attribute types, the length of the weight vector.
    pub fn n_types(&self) -> usize {
        self.n_unary() + self.n_pairwise()
    }

    pub(crate) fn check_unary<T: Scalar>(&self, attrs: &[Vec<T>], what: &str) -> Result<()> {
        check_attrs(&self.unary_dims, attrs, what)
    }

    pub(crate) fn check_pairwise<T: Scalar>(&self, attrs: &[Vec<T>], what: &str) -> Result<()> {
        check_attrs(&self.pairwise_dims, attrs, what)
    }
}

fn check_attrs<T: Scalar>(dims: &[usize], attrs: &[Vec<T>], what: &str) -> Result<()> {
    if attrs.len() != dims.len() {
        return Err(Error::Schema(format!(
            "{what}: expected {} attribute types, found {}",
            dims.len(),
            attrs.len()
        )));
    }
    for (i, (v, &d)) in attrs.iter().zip(dims).enumerate() {
        if v.len() != d {
            return Err(Error::Schema(format!(
                "{what}: attribute type {i} has dimension {}, schema says {d}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Value(format!("{what}: non-finite value in attribute type {i}")));
        }
    }
    Ok(())
}

/// A complete attributed relational graph. Pairwise attributes are stored densely for
/// every ordered pair `(x1, x2)`, `x1 != x2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Arg<T> {
    id: String,
    schema: AttributeSchema,
    unary: Vec<Attrs<T>>,
    // Row-major n*n; the diagonal holds empty vectors.
    pairwise: Vec<Attrs<T>>,
}

impl<T: Scalar> Arg<T> {
    /// Builds an ARG from per-node unary attributes and a pairwise attribute function
    /// evaluated for every ordered pair.
    pub fn from_fn(
        id: impl Into<String>,
        schema: AttributeSchema,
        unary: Vec<Attrs<T>>,
        mut pairwise: impl FnMut(usize, usize) -> Attrs<T>,
    ) -> Result<Self> {
        let n = unary.len();
        let mut dense = Vec::with_capacity(n * n);
        for s in 0..n {
            for t in 0..n {
                dense.push(if s == t { Vec::new() } else { pairwise(s, t) });
            }
        }
        Self::from_dense(id.into(), schema, unary, dense)
    }

    /// Builds an ARG from a list of ordered-pair records. Every ordered pair must appear
    /// exactly once.
    pub fn from_records(
        id: impl Into<String>,
        schema: AttributeSchema,
        unary: Vec<Attrs<T>>,
        records: Vec<((usize, usize), Attrs<T>)>,
    ) -> Result<Self> {
        let n = unary.len();
        let mut dense: Vec<Option<Attrs<T>>> = vec![None; n * n];
        for ((s, t), attrs) in records {
            if s >= n || t >= n {
                return Err(Error::Schema(format!(
                    "pair ({s},{t}) references a node outside 0..{n}"
                )));
            }
            if s == t {
                return Err(Error::Schema(format!("self pair ({s},{t}) is not allowed")));
            }
            if dense[s * n + t].replace(attrs).is_some() {
                return Err(Error::Schema(format!("pair ({s},{t}) listed twice")));
            }
        }
        let mut out = Vec::with_capacity(n * n);
        for (i, slot) in dense.into_iter().enumerate() {
            let (s, t) = (i / n, i % n);
            match slot {
                Some(a) => out.push(a),
                None if s == t => out.push(Vec::new()),
                None => {
                    return Err(Error::Schema(format!("missing pairwise record for ({s},{t})")))
                }
            }
        }
        Self::from_dense(id.into(), schema, unary, out)
    }

    fn from_dense(
        id: String,
        schema: AttributeSchema,
        unary: Vec<Attrs<T>>,
        pairwise: Vec<Attrs<T>>,
    ) -> Result<Self> {
        schema.validate()?;
        if unary.is_empty() {
            return Err(Error::Schema(format!("ARG {id:?} has no nodes")));
        }
        let n = unary.len();
        for (x, attrs) in unary.iter().enumerate() {
            schema.check_unary(attrs, &format!("ARG {id:?} node {x}"))?;
        }
        for (i, attrs) in pairwise.iter().enumerate() {
            let (s, t) = (i / n, i % n);
            if s != t {
                schema.check_pairwise(attrs, &format!("ARG {id:?} pair ({s},{t})"))?;
            }
        }
        Ok(Self {
            id,
            schema,
            unary,
            pairwise,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn n_nodes(&self) -> usize {
        self.unary.len()
    }

    pub fn unary(&self, x: usize) -> &[Vec<T>] {
        &self.unary[x]
    }

    /// Pairwise attributes of the ordered pair `(x1, x2)`; `x1 != x2`.
    pub fn pairwise(&self, x1: usize, x2: usize) -> &[Vec<T>] {
        debug_assert_ne!(x1, x2);
        &self.pairwise[x1 * self.n_nodes() + x2]
    }

    /// Ordered-pair records in row-major order, `n(n-1)` of them.
    pub fn pair_records(&self) -> impl Iterator<Item = ((usize, usize), &[Vec<T>])> {
        let n = self.n_nodes();
        (0..n).flat_map(move |s| {
            (0..n)
                .filter(move |&t| t != s)
                .map(move |t| ((s, t), self.pairwise(s, t)))
        })
    }
}

/// Occlusion penalty: a finite positive constant or the distinguished infinite value
/// that forbids the `NONE` label outright.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty<T> {
    Finite(T),
    Infinite,
}

impl<T: Scalar> Penalty<T> {
    pub fn value(self) -> T {
        match self {
            Penalty::Finite(v) => v,
            Penalty::Infinite => T::infinity(),
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Penalty::Infinite)
    }

    /// Accepts any value in `(0, +inf]`.
    pub fn from_value(v: T) -> Result<Self> {
        if v.is_nan() || v <= T::zero() {
            return Err(Error::Value(format!("occlusion penalty must be in (0, inf], got {v}")));
        }
        Ok(if v.is_infinite() {
            Penalty::Infinite
        } else {
            Penalty::Finite(v)
        })
    }
}

impl<T: Scalar> Serialize for Penalty<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ext_float::serialize(&self.value(), s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Penalty<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v: T = ext_float::deserialize(d)?;
        Penalty::from_value(v).map_err(serde::de::Error::custom)
    }
}

/// Attribute weights and occlusion penalties of a pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct MatchParams<T: Scalar> {
    pub w_unary: Vec<T>,
    pub w_pairwise: Vec<T>,
    pub p_none: Penalty<T>,
    pub q_none: Penalty<T>,
    /// Set once weights have gone through a training step; from then on they must lie
    /// on the probability simplex.
    #[serde(default)]
    pub trained: bool,
}

impl<T: Scalar> MatchParams<T> {
    /// Uniform weights `1/(N_P+N_Q)` and infinite occlusion penalties.
    pub fn initial(schema: &AttributeSchema) -> Self {
        let w = T::one() / T::of(schema.n_types() as f64);
        Self {
            w_unary: vec![w; schema.n_unary()],
            w_pairwise: vec![w; schema.n_pairwise()],
            p_none: Penalty::Infinite,
            q_none: Penalty::Infinite,
            trained: false,
        }
    }

    /// Concatenated weight vector `[w_unary.., w_pairwise..]`.
    pub fn weights(&self) -> Vec<T> {
        self.w_unary.iter().chain(&self.w_pairwise).copied().collect()
    }

    pub fn set_weights(&mut self, w: &[T]) {
        let np = self.w_unary.len();
        self.w_unary.copy_from_slice(&w[..np]);
        self.w_pairwise.copy_from_slice(&w[np..]);
    }

    /// Copy with both occlusion penalties forced to infinity.
    pub fn with_infinite_penalties(&self) -> Self {
        Self {
            p_none: Penalty::Infinite,
            q_none: Penalty::Infinite,
            ..self.clone()
        }
    }

    pub fn validate(&self, schema: &AttributeSchema) -> Result<()> {
        if self.w_unary.len() != schema.n_unary() || self.w_pairwise.len() != schema.n_pairwise() {
            return Err(Error::Schema("weight vector length does not match the schema".into()));
        }
        let w = self.weights();
        if w.iter().any(|x| !x.is_finite() || *x < T::zero()) {
            return Err(Error::Validation("weights must be finite and nonnegative".into()));
        }
        if self.trained {
            let sum: T = w.iter().copied().sum();
            if (sum - T::one()).abs() > T::of(1e-6) {
                return Err(Error::Validation(format!(
                    "trained weights must sum to 1, found {sum}"
                )));
            }
        }
        Ok(())
    }
}

/// The evolving pattern: node set, directed edge set, unary and pairwise attributes and
/// matching parameters.
///
/// Pairwise attributes are kept for every ordered pair of pattern nodes, not only for
/// edges, because edge selection ranks candidate pairs that are not (yet) edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern<T: Scalar> {
    pub id: String,
    schema: AttributeSchema,
    unary: BTreeMap<NodeId, Attrs<T>>,
    pairwise: BTreeMap<(NodeId, NodeId), Attrs<T>>,
    edges: BTreeSet<(NodeId, NodeId)>,
    pub params: MatchParams<T>,
    next_id: NodeId,
}

impl<T: Scalar> Pattern<T> {
    /// Assembles and validates a pattern.
    pub fn from_parts(
        id: impl Into<String>,
        schema: AttributeSchema,
        unary: BTreeMap<NodeId, Attrs<T>>,
        pairwise: BTreeMap<(NodeId, NodeId), Attrs<T>>,
        edges: BTreeSet<(NodeId, NodeId)>,
        params: MatchParams<T>,
        next_id: NodeId,
    ) -> Result<Self> {
        let p = Self {
            id: id.into(),
            schema,
            unary,
            pairwise,
            edges,
            params,
            next_id,
        };
        p.validate()?;
        Ok(p)
    }

    /// Template built from a fragment of an ARG: the listed ARG nodes become pattern
    /// nodes `0..k` (in list order) connected as a complete directed graph, with
    /// attributes copied from the ARG and initial matching parameters.
    pub fn from_arg_nodes(id: impl Into<String>, arg: &Arg<T>, nodes: &[usize]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Empty("template node list"));
        }
        let distinct: BTreeSet<_> = nodes.iter().collect();
        if distinct.len() != nodes.len() || nodes.iter().any(|&x| x >= arg.n_nodes()) {
            return Err(Error::Validation(
                "template nodes must be distinct ARG node indices".into(),
            ));
        }
        let mut unary = BTreeMap::new();
        let mut pairwise = BTreeMap::new();
        let mut edges = BTreeSet::new();
        for (s, &xs) in nodes.iter().enumerate() {
            unary.insert(s as NodeId, arg.unary(xs).to_vec());
            for (t, &xt) in nodes.iter().enumerate() {
                if s != t {
                    pairwise.insert((s as NodeId, t as NodeId), arg.pairwise(xs, xt).to_vec());
                    edges.insert((s as NodeId, t as NodeId));
                }
            }
        }
        let schema = arg.schema().clone();
        let params = MatchParams::initial(&schema);
        Self::from_parts(id, schema, unary, pairwise, edges, params, nodes.len() as NodeId)
    }

    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        if self.unary.is_empty() {
            return Err(Error::Validation("pattern has no nodes".into()));
        }
        if let Some(&max) = self.unary.keys().next_back() {
            if max >= self.next_id {
                return Err(Error::Validation(format!(
                    "node id {max} not below the id counter {}",
                    self.next_id
                )));
            }
        }
        for (s, a) in &self.unary {
            self.schema.check_unary(a, &format!("pattern node {s}"))?;
        }
        for &s in self.unary.keys() {
            for &t in self.unary.keys() {
                if s == t {
                    continue;
                }
                let a = self.pairwise.get(&(s, t)).ok_or_else(|| {
                    Error::Schema(format!("pattern has no pairwise attributes for ({s},{t})"))
                })?;
                self.schema.check_pairwise(a, &format!("pattern pair ({s},{t})"))?;
            }
        }
        let n = self.unary.len();
        if self.pairwise.len() != n * (n - 1) {
            return Err(Error::Schema(
                "pattern pairwise attributes reference unknown nodes".into(),
            ));
        }
        for &(s, t) in &self.edges {
            if s == t {
                return Err(Error::Validation(format!("self-loop ({s},{s})")));
            }
            if !self.unary.contains_key(&s) || !self.unary.contains_key(&t) {
                return Err(Error::Validation(format!(
                    "edge ({s},{t}) has an endpoint outside the node set"
                )));
            }
        }
        self.params.validate(&self.schema)
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.unary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unary.is_empty()
    }

    pub fn next_id(&self) -> NodeId {
        self.next_id
    }

    /// Node ids in increasing order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.unary.keys().copied()
    }

    pub fn contains(&self, s: NodeId) -> bool {
        self.unary.contains_key(&s)
    }

    pub fn unary(&self, s: NodeId) -> Option<&[Vec<T>]> {
        self.unary.get(&s).map(Vec::as_slice)
    }

    pub fn pairwise(&self, s: NodeId, t: NodeId) -> Option<&[Vec<T>]> {
        self.pairwise.get(&(s, t)).map(Vec::as_slice)
    }

    pub fn edges(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.edges
    }

    pub fn has_edge(&self, s: NodeId, t: NodeId) -> bool {
        self.edges.contains(&(s, t))
    }

    /// Targets of the outgoing edge set `E_s`, increasing.
    pub fn out_targets(&self, s: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.edges.range((s, 0)..=(s, NodeId::MAX)).map(|&(_, t)| t)
    }

    pub fn out_degree(&self, s: NodeId) -> usize {
        self.out_targets(s).count()
    }

    pub(crate) fn unary_mut(&mut self, s: NodeId) -> Option<&mut Attrs<T>> {
        self.unary.get_mut(&s)
    }

    pub(crate) fn pairwise_mut(&mut self, s: NodeId, t: NodeId) -> Option<&mut Attrs<T>> {
        self.pairwise.get_mut(&(s, t))
    }

    pub(crate) fn pairwise_entries(&self) -> impl Iterator<Item = (&(NodeId, NodeId), &Attrs<T>)> {
        self.pairwise.iter()
    }

    /// Adds a node with the given attributes. `outgoing[t]`/`incoming[t]` must cover
    /// every existing node `t`. Returns the freshly issued id; no edges are added.
    pub fn add_node(
        &mut self,
        unary: Attrs<T>,
        outgoing: BTreeMap<NodeId, Attrs<T>>,
        incoming: BTreeMap<NodeId, Attrs<T>>,
    ) -> Result<NodeId> {
        self.schema.check_unary(&unary, "new pattern node")?;
        for t in self.unary.keys() {
            let out = outgoing
                .get(t)
                .ok_or_else(|| Error::Schema(format!("missing outgoing attributes to {t}")))?;
            let inc = incoming
                .get(t)
                .ok_or_else(|| Error::Schema(format!("missing incoming attributes from {t}")))?;
            self.schema.check_pairwise(out, "new pattern pair")?;
            self.schema.check_pairwise(inc, "new pattern pair")?;
        }
        let y = self.next_id;
        self.next_id += 1;
        for (t, a) in outgoing {
            if self.unary.contains_key(&t) {
                self.pairwise.insert((y, t), a);
            }
        }
        for (t, a) in incoming {
            if self.unary.contains_key(&t) {
                self.pairwise.insert((t, y), a);
            }
        }
        self.unary.insert(y, unary);
        Ok(y)
    }

    /// Removes a node with all incident edges and pairwise attributes. The id is retired.
    pub fn remove_node(&mut self, s: NodeId) -> Result<()> {
        if self.unary.remove(&s).is_none() {
            return Err(Error::UnknownNode(s));
        }
        self.pairwise.retain(|&(a, b), _| a != s && b != s);
        self.edges.retain(|&(a, b)| a != s && b != s);
        Ok(())
    }

    /// Replaces `E_s` with edges to the listed targets.
    pub fn set_out_edges(&mut self, s: NodeId, targets: &[NodeId]) -> Result<()> {
        if !self.contains(s) {
            return Err(Error::UnknownNode(s));
        }
        for &t in targets {
            if t == s || !self.contains(t) {
                return Err(Error::Validation(format!("invalid edge target {t} for node {s}")));
            }
        }
        self.edges.retain(|&(a, _)| a != s);
        self.edges.extend(targets.iter().map(|&t| (s, t)));
        Ok(())
    }
}

/// Target of a pattern node in one ARG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Node(usize),
    /// The dummy occlusion label.
    None,
}

impl Label {
    pub fn node(self) -> Option<usize> {
        match self {
            Label::Node(x) => Some(x),
            Label::None => None,
        }
    }

    pub fn is_matched(self) -> bool {
        matches!(self, Label::Node(_))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Node(x) => write!(f, "{x}"),
            Label::None => f.write_str("none"),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.node().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(Option::<usize>::deserialize(d)?.map_or(Label::None, Label::Node))
    }
}

/// Correspondence from pattern nodes to the nodes of one ARG.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub arg_id: String,
    pub map: BTreeMap<NodeId, Label>,
}

impl Assignment {
    pub fn new(arg_id: impl Into<String>) -> Self {
        Self {
            arg_id: arg_id.into(),
            map: BTreeMap::new(),
        }
    }

    pub fn get(&self, s: NodeId) -> Result<Label> {
        self.map.get(&s).copied().ok_or(Error::MissingAssignment(s))
    }

    /// True when no two pattern nodes share a real ARG node.
    pub fn is_injective(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.map
            .values()
            .filter_map(|l| l.node())
            .all(|x| seen.insert(x))
    }

    pub fn matched_count(&self) -> usize {
        self.map.values().filter(|l| l.is_matched()).count()
    }

    /// ARG nodes used by this assignment.
    pub fn used_nodes(&self) -> BTreeSet<usize> {
        self.map.values().filter_map(|l| l.node()).collect()
    }
}

/// Minimum out-degree `d`: a positive integer or unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinDegree {
    Finite(usize),
    Unbounded,
}

impl MinDegree {
    /// `min(d, n)`.
    pub fn cap(self, n: usize) -> usize {
        match self {
            MinDegree::Finite(d) => d.min(n),
            MinDegree::Unbounded => n,
        }
    }
}

impl fmt::Display for MinDegree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MinDegree::Finite(d) => write!(f, "{d}"),
            MinDegree::Unbounded => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for MinDegree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "+inf" => Ok(MinDegree::Unbounded),
            t => match t.parse::<usize>() {
                Ok(d) if d >= 1 => Ok(MinDegree::Finite(d)),
                _ => Err(Error::Parameter(format!("d must be a positive integer or inf, got {s:?}"))),
            },
        }
    }
}

impl Serialize for MinDegree {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MinDegree::Finite(d) => s.serialize_u64(*d as u64),
            MinDegree::Unbounded => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for MinDegree {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Token(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(0) => Err(serde::de::Error::custom("d must be >= 1")),
            Raw::Int(v) => Ok(MinDegree::Finite(v as usize)),
            Raw::Token(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Exhaustive branch-and-bound whenever the instance fits the state limit,
    /// otherwise falls back to the approximate solver.
    Exact,
    Approximate,
}

/// Mining and evaluation settings. Serialized as a flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MiningConfig {
    /// Fuzziness threshold.
    #[serde(with = "ext_float")]
    pub tau: f64,
    /// Minimum out-degree.
    pub d: MinDegree,
    pub c_svm: f64,
    /// Blend factor for weight updates.
    pub lambda: f64,
    /// Interpolation factor for the occlusion penalties.
    pub alpha: f64,
    /// Coverage bonus in the detection score.
    pub zeta: f64,
    pub max_iters: usize,
    pub energy_tol: f64,
    pub min_match_fraction: f64,
    pub top_fraction: f64,
    pub rng_seed: u64,
    pub solver: SolverKind,
    pub restarts: usize,
    /// Largest joint state count searched exhaustively.
    pub exact_limit: f64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            d: MinDegree::Finite(2),
            c_svm: 10.0,
            lambda: 0.5,
            alpha: 1.0,
            zeta: 10.0,
            max_iters: 20,
            energy_tol: 1e-6,
            min_match_fraction: 0.0,
            top_fraction: 1.0,
            rng_seed: 0,
            solver: SolverKind::Exact,
            restarts: 20,
            exact_limit: 1e7,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Validation(format!("config: {what}")));
        if self.tau.is_nan() || self.tau < 0.0 {
            return bad("tau must be >= 0");
        }
        if self.d == MinDegree::Finite(0) {
            return bad("d must be >= 1");
        }
        if !(self.c_svm > 0.0 && self.c_svm.is_finite()) {
            return bad("c_svm must be > 0");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must be in [0, 1]");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be > 0");
        }
        if !self.zeta.is_finite() {
            return bad("zeta must be finite");
        }
        if !(self.energy_tol >= 0.0) {
            return bad("energy_tol must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.min_match_fraction) {
            return bad("min_match_fraction must be in [0, 1]");
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return bad("top_fraction must be in (0, 1]");
        }
        if self.restarts == 0 {
            return bad("restarts must be >= 1");
        }
        if !(self.exact_limit >= 1.0) {
            return bad("exact_limit must be >= 1");
        }
        Ok(())
    }

    pub(crate) fn tau_as<T: Scalar>(&self) -> T {
        if self.tau.is_infinite() {
            T::infinity()
        } else {
            T::of(self.tau)
        }
    }
}

/// Parses a scalar that may be given as `inf`.
pub fn parse_ext_float(s: &str) -> Result<f64> {
    parse_token::<f64>(s.trim())
        .or_else(|| s.trim().parse().ok())
        .ok_or_else(|| Error::Parameter(format!("not a number: {s:?}")))
}
