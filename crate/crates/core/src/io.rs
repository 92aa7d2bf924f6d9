//! JSON file formats for ARGs, patterns and configs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Arg, AttributeSchema, Attrs, MatchParams, MiningConfig, NodeId, Pattern};
use crate::Scalar;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
struct NodeRecord<T> {
    unary: Attrs<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
struct PairRecord<T> {
    s: usize,
    t: usize,
    attrs: Attrs<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
struct ArgFile<T> {
    id: String,
    schema: AttributeSchema,
    nodes: Vec<NodeRecord<T>>,
    pairwise: Vec<PairRecord<T>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
struct PatternFile<T: Scalar> {
    id: String,
    schema: AttributeSchema,
    nodes: Vec<NodeId>,
    next_id: NodeId,
    unary_attrs: Vec<Attrs<T>>,
    pairwise_attrs: Vec<PairRecord<T>>,
    edges: Vec<(NodeId, NodeId)>,
    params: MatchParams<T>,
}

fn classify(e: serde_json::Error, path: &Path) -> Error {
    use serde_json::error::Category;
    let msg = format!("{}: {e}", path.display());
    match e.classify() {
        Category::Data => {
            if e.to_string().contains("penalty") || e.to_string().contains("token") {
                Error::Value(msg)
            } else {
                Error::Schema(msg)
            }
        }
        Category::Syntax if e.to_string().contains("out of range") => Error::Value(msg),
        Category::Syntax | Category::Eof => Error::Parse(msg),
        Category::Io => Error::io(path, std::io::Error::other(e)),
    }
}

pub fn read_json<V: DeserializeOwned>(path: impl AsRef<Path>) -> Result<V> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| classify(e, path))
}

pub fn write_json<V: Serialize>(path: impl AsRef<Path>, value: &V) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Value(format!("{}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn arg_to_json<T: Scalar>(arg: &Arg<T>) -> serde_json::Value {
    serde_json::to_value(arg_file(arg)).expect("ARG serializes")
}

fn arg_file<T: Scalar>(arg: &Arg<T>) -> ArgFile<T> {
    ArgFile {
        id: arg.id().to_owned(),
        schema: arg.schema().clone(),
        nodes: (0..arg.n_nodes())
            .map(|x| NodeRecord {
                unary: arg.unary(x).to_vec(),
            })
            .collect(),
        pairwise: arg
            .pair_records()
            .map(|((s, t), a)| PairRecord {
                s,
                t,
                attrs: a.to_vec(),
            })
            .collect(),
    }
}

pub fn load_arg<T: Scalar>(path: impl AsRef<Path>) -> Result<Arg<T>> {
    let file: ArgFile<T> = read_json(path)?;
    Arg::from_records(
        file.id,
        file.schema,
        file.nodes.into_iter().map(|n| n.unary).collect(),
        file.pairwise
            .into_iter()
            .map(|p| ((p.s, p.t), p.attrs))
            .collect(),
    )
}

pub fn save_arg<T: Scalar>(arg: &Arg<T>, path: impl AsRef<Path>) -> Result<()> {
    write_json(path, &arg_file(arg))
}

fn pattern_file<T: Scalar>(p: &Pattern<T>) -> PatternFile<T> {
    PatternFile {
        id: p.id.clone(),
        schema: p.schema().clone(),
        nodes: p.node_ids().collect(),
        next_id: p.next_id(),
        unary_attrs: p.node_ids().map(|s| p.unary(s).unwrap().to_vec()).collect(),
        pairwise_attrs: p
            .pairwise_entries()
            .map(|(&(s, t), a)| PairRecord {
                s: s as usize,
                t: t as usize,
                attrs: a.clone(),
            })
            .collect(),
        edges: p.edges().iter().copied().collect(),
        params: p.params.clone(),
    }
}

fn pattern_from_file<T: Scalar>(file: PatternFile<T>) -> Result<Pattern<T>> {
    if file.nodes.len() != file.unary_attrs.len() {
        return Err(Error::Schema(format!(
            "{} nodes but {} unary attribute records",
            file.nodes.len(),
            file.unary_attrs.len()
        )));
    }
    let mut unary = BTreeMap::new();
    for (s, a) in file.nodes.into_iter().zip(file.unary_attrs) {
        if unary.insert(s, a).is_some() {
            return Err(Error::Schema(format!("node {s} listed twice")));
        }
    }
    let mut pairwise = BTreeMap::new();
    for r in file.pairwise_attrs {
        let key = (r.s as NodeId, r.t as NodeId);
        if !unary.contains_key(&key.0) || !unary.contains_key(&key.1) || key.0 == key.1 {
            return Err(Error::Schema(format!("pairwise record ({},{}) is invalid", r.s, r.t)));
        }
        if pairwise.insert(key, r.attrs).is_some() {
            return Err(Error::Schema(format!("pairwise record ({},{}) listed twice", r.s, r.t)));
        }
    }
    let edges: BTreeSet<_> = file.edges.into_iter().collect();
    Pattern::from_parts(
        file.id,
        file.schema,
        unary,
        pairwise,
        edges,
        file.params,
        file.next_id,
    )
}

pub fn pattern_to_json<T: Scalar>(p: &Pattern<T>) -> serde_json::Value {
    serde_json::to_value(pattern_file(p)).expect("pattern serializes")
}

pub fn pattern_from_json<T: Scalar>(value: serde_json::Value) -> Result<Pattern<T>> {
    let file: PatternFile<T> =
        serde_json::from_value(value).map_err(|e| classify(e, Path::new("<value>")))?;
    pattern_from_file(file)
}

pub fn pattern_to_string<T: Scalar>(p: &Pattern<T>) -> String {
    serde_json::to_string_pretty(&pattern_file(p)).expect("pattern serializes")
}

pub fn pattern_from_str<T: Scalar>(text: &str) -> Result<Pattern<T>> {
    let file: PatternFile<T> =
        serde_json::from_str(text).map_err(|e| classify(e, Path::new("<string>")))?;
    pattern_from_file(file)
}

pub fn load_pattern<T: Scalar>(path: impl AsRef<Path>) -> Result<Pattern<T>> {
    pattern_from_file(read_json(path)?)
}

pub fn save_pattern<T: Scalar>(p: &Pattern<T>, path: impl AsRef<Path>) -> Result<()> {
    write_json(path, &pattern_file(p))
}

pub fn load_config(path: impl AsRef<Path>) -> Result<MiningConfig> {
    let cfg: MiningConfig = read_json(path)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn save_config(cfg: &MiningConfig, path: impl AsRef<Path>) -> Result<()> {
    write_json(path, cfg)
}

/// Loads every `*.json` ARG in a directory, sorted by file name.
pub fn load_arg_dir<T: Scalar>(dir: impl AsRef<Path>) -> Result<Vec<Arg<T>>> {
    json_files(dir)?.into_iter().map(load_arg).collect()
}

pub(crate) fn json_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}
