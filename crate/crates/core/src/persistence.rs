//! Document formats: spec trees (plain and extended form), expert models,
//! session logs, and chain-layout exports.
//!
//! Plain form is a nested JSON object mapping each prompt to its children,
//! leaves being empty objects. Extended form lists nodes explicitly with
//! scales, rules and gates:
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "kind": "spec",
//!   "metadata": {},
//!   "scales": { "binary": ["no", "yes"] },
//!   "root": "q0",
//!   "nodes": [
//!     { "id": "q0", "prompt": "Go?", "scale": "binary", "aggregation": { "rule": "max" },
//!       "children": ["q1"] },
//!     { "id": "q1", "prompt": "Ready?", "scale": "binary" }
//!   ]
//! }
//! ```
//!
//! Saving is canonical: pretty JSON with two-space indents, nodes in
//! preorder, scales sorted by name, and a trailing newline.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::aggregation::{AggregationBinding, TiePolicy};
use crate::elicitation::{ElicitedFunction, LogRecord, Provenance};
use crate::hierarchy::{
    validate_spec, ExpertModel, FactorNode, HierarchyError, IssueKind, Metadata, ModelSpecTree, ValidationReport,
};
use crate::lattice::{Point, ValueScale};
use crate::monotone::TotalMonotoneFn;
use crate::scheduler::{ChainPartition, SchedulerError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PersistenceError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("document has no root question")]
    EmptyTree,
    #[error("document has {0} top-level questions; exactly one root is required")]
    MultipleRoots(usize),
    #[error("plain form cannot hold: {}", .0.join("; "))]
    Lossy(Vec<String>),
    #[error("unsupported format_version {0}")]
    UnsupportedVersion(u32),
    #[error("expected a {expected} document, found {found}")]
    WrongKind { expected: &'static str, found: String },
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("node {0:?} is not bound to an elicited table")]
    NotTable(String),
    #[error("node {0:?} needs binary children and a binary scale for a chain layout")]
    NotBinary(String),
    #[error("log line {line}: {message}")]
    Log { line: usize, message: String },
}

fn syntax(e: serde_json::Error) -> PersistenceError {
    PersistenceError::Syntax { line: e.line(), column: e.column(), message: e.to_string() }
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> PersistenceError {
    PersistenceError::Schema { path: path.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecForm {
    Plain,
    Extended,
}

impl std::str::FromStr for SpecForm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" => Ok(SpecForm::Plain),
            "extended" => Ok(SpecForm::Extended),
            other => Err(format!("unknown form {other:?} (expected plain or extended)")),
        }
    }
}

// ---- plain form ----

/// Ordered prompt -> children map that rejects repeated prompts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct PlainNode(Vec<(String, PlainNode)>);

impl<'de> Deserialize<'de> for PlainNode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = PlainNode;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object mapping prompts to child objects")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<PlainNode, A::Error> {
                let mut entries: Vec<(String, PlainNode)> = Vec::new();
                while let Some(key) = map.next_key::<String>()? {
                    if entries.iter().any(|(k, _)| *k == key) {
                        return Err(de::Error::custom(format!("duplicate prompt {key:?} at one level")));
                    }
                    let child = map.next_value::<PlainNode>()?;
                    entries.push((key, child));
                }
                Ok(PlainNode(entries))
            }
        }
        d.deserialize_map(V)
    }
}

impl Serialize for PlainNode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

fn plain_to_node(prompt: String, children: PlainNode, next_id: &mut usize) -> FactorNode {
    let id = format!("q{next_id}");
    *next_id += 1;
    let kids = children.0.into_iter().map(|(p, c)| plain_to_node(p, c, next_id)).collect();
    FactorNode::new(id, prompt).with_children(kids)
}

fn node_to_plain(node: &FactorNode) -> PlainNode {
    PlainNode(node.children.iter().map(|c| (c.prompt.clone(), node_to_plain(c))).collect())
}

/// Parses the plain nested form. Ids are assigned in preorder: `q0` for the
/// root, then `q1`, `q2`, ... Every node gets the binary scale and no rule.
pub fn parse_plain(bytes: &[u8]) -> Result<ModelSpecTree, PersistenceError> {
    let doc: PlainNode = serde_json::from_slice(bytes).map_err(syntax)?;
    let mut entries = doc.0;
    match entries.len() {
        0 => return Err(PersistenceError::EmptyTree),
        1 => {}
        n => return Err(PersistenceError::MultipleRoots(n)),
    }
    let (prompt, children) = entries.remove(0);
    let mut next = 0;
    Ok(ModelSpecTree::new(plain_to_node(prompt, children, &mut next), Metadata::default())?)
}

fn plain_losses(tree: &ModelSpecTree) -> Vec<String> {
    let mut out = Vec::new();
    if *tree.metadata() != Metadata::default() {
        out.push("metadata".into());
    }
    for n in tree.nodes() {
        if n.scale != ValueScale::binary() {
            out.push(format!("{}: non-binary scale", n.id));
        }
        if n.reversed {
            out.push(format!("{}: reversed flag", n.id));
        }
        if n.aggregation.is_some() {
            out.push(format!("{}: aggregation rule", n.id));
        }
        if n.gate.is_some() || n.short_circuit.is_some() {
            out.push(format!("{}: gate", n.id));
        }
    }
    out
}

fn canonical_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("document types always serialize");
    out.push(b'\n');
    out
}

/// Plain-form bytes. Node ids are not stored; everything else that plain
/// form cannot represent is an error.
pub fn save_plain(tree: &ModelSpecTree) -> Result<Vec<u8>, PersistenceError> {
    let losses = plain_losses(tree);
    if !losses.is_empty() {
        return Err(PersistenceError::Lossy(losses));
    }
    let root = tree.root();
    Ok(canonical_json(&PlainNode(vec![(root.prompt.clone(), node_to_plain(root))])))
}

// ---- extended form ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentKind {
    Spec,
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtendedDoc {
    format_version: u32,
    kind: DocumentKind,
    #[serde(default)]
    metadata: Metadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expert: Option<String>,
    scales: BTreeMap<String, Vec<String>>,
    root: String,
    nodes: Vec<NodeDoc>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: String,
    prompt: String,
    scale: String,
    #[serde(default, skip_serializing_if = "is_false")]
    reversed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    aggregation: Option<AggregationDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    short_circuit: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
enum AggregationDoc {
    Majority {
        #[serde(default)]
        tie: TiePolicy,
    },
    Weighted {
        weights: Vec<f64>,
        threshold: f64,
    },
    Critical {
        critical: Vec<String>,
        fallback: Box<AggregationDoc>,
    },
    Max,
    Table {
        values: Vec<usize>,
        provenance: Provenance,
    },
}

fn binding_to_doc(b: &AggregationBinding) -> AggregationDoc {
    match b {
        AggregationBinding::Majority { tie } => AggregationDoc::Majority { tie: *tie },
        AggregationBinding::Weighted { weights, threshold } => {
            AggregationDoc::Weighted { weights: weights.clone(), threshold: *threshold }
        }
        AggregationBinding::CriticalThreshold { critical, fallback } => {
            AggregationDoc::Critical { critical: critical.clone(), fallback: Box::new(binding_to_doc(fallback)) }
        }
        AggregationBinding::Max => AggregationDoc::Max,
        AggregationBinding::Table(t) => {
            AggregationDoc::Table { values: t.function.values(), provenance: t.provenance.clone() }
        }
    }
}

fn doc_to_binding(doc: AggregationDoc, node: &FactorNode, path: &str) -> Result<AggregationBinding, PersistenceError> {
    Ok(match doc {
        AggregationDoc::Majority { tie } => AggregationBinding::Majority { tie },
        AggregationDoc::Weighted { weights, threshold } => AggregationBinding::Weighted { weights, threshold },
        AggregationDoc::Critical { critical, fallback } => AggregationBinding::CriticalThreshold {
            critical,
            fallback: Box::new(doc_to_binding(*fallback, node, &format!("{path}.fallback"))?),
        },
        AggregationDoc::Max => AggregationBinding::Max,
        AggregationDoc::Table { values, provenance } => {
            let lattice = node.child_lattice().map_err(|e| schema(path, e.to_string()))?;
            let function = TotalMonotoneFn::try_new(lattice, node.scale.clone(), values)
                .map_err(|e| schema(format!("{path}.values"), e.to_string()))?;
            AggregationBinding::Table(ElicitedFunction { function, provenance })
        }
    })
}

/// Canonical name for a declared label list.
fn scale_name(labels: &[String]) -> String {
    if labels == ValueScale::binary().labels() {
        "binary".to_string()
    } else {
        labels.join("_")
    }
}

fn tree_to_doc(tree: &ModelSpecTree, kind: DocumentKind, expert: Option<&str>) -> ExtendedDoc {
    let mut scales: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut nodes = Vec::new();
    for n in tree.nodes() {
        let declared = if n.reversed { n.scale.reversed() } else { n.scale.clone() };
        let labels = declared.labels().to_vec();
        let base = scale_name(&labels);
        let mut name = base.clone();
        let mut k = 2;
        while scales.get(&name).is_some_and(|l| *l != labels) {
            name = format!("{base}~{k}");
            k += 1;
        }
        scales.insert(name.clone(), labels);
        nodes.push(NodeDoc {
            id: n.id.clone(),
            prompt: n.prompt.clone(),
            scale: name,
            reversed: n.reversed,
            aggregation: n.aggregation.as_ref().map(binding_to_doc),
            gate: n.gate.and_then(|g| n.scale.label(g).map(str::to_string)),
            short_circuit: n.short_circuit.clone(),
            children: n.children.iter().map(|c| c.id.clone()).collect(),
        });
    }
    ExtendedDoc {
        format_version: FORMAT_VERSION,
        kind,
        metadata: tree.metadata().clone(),
        expert: expert.map(str::to_string),
        scales,
        root: tree.root().id.clone(),
        nodes,
    }
}

fn doc_to_tree(doc: ExtendedDoc) -> Result<ModelSpecTree, PersistenceError> {
    if doc.format_version != FORMAT_VERSION {
        return Err(PersistenceError::UnsupportedVersion(doc.format_version));
    }
    let mut scales = HashMap::new();
    for (name, labels) in &doc.scales {
        let s = ValueScale::new(labels.iter().cloned()).map_err(|e| schema(format!("scales.{name}"), e.to_string()))?;
        scales.insert(name.as_str(), s);
    }
    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, n) in doc.nodes.iter().enumerate() {
        if index.insert(n.id.clone(), i).is_some() {
            return Err(schema(format!("nodes[{i}].id"), format!("duplicate id {:?}", n.id)));
        }
    }
    let mut parent: HashMap<String, String> = HashMap::new();
    for (i, n) in doc.nodes.iter().enumerate() {
        for (j, c) in n.children.iter().enumerate() {
            let path = format!("nodes[{i}].children[{j}]");
            if !index.contains_key(c) {
                return Err(schema(path, format!("unknown node {c:?}")));
            }
            if let Some(prev) = parent.insert(c.clone(), n.id.clone()) {
                return Err(schema(path, format!("node {c:?} is listed under both {prev:?} and {:?}", n.id)));
            }
        }
    }
    let root = *index.get(&doc.root).ok_or_else(|| schema("root", format!("unknown node {:?}", doc.root)))?;
    if parent.contains_key(&doc.root) {
        return Err(schema("root", "the root cannot be a child"));
    }

    let mut visiting = HashSet::new();
    let mut built = 0usize;
    let mut slots: Vec<Option<NodeDoc>> = doc.nodes.into_iter().map(Some).collect();
    let root_node = build_node(root, &index, &mut slots, &scales, &mut visiting, &mut built)?;
    if built != slots.len() {
        let orphan = slots.iter().position(Option::is_some).unwrap_or(0);
        return Err(schema(format!("nodes[{orphan}]"), "node is not reachable from the root"));
    }
    Ok(ModelSpecTree::new(root_node, doc.metadata)?)
}

fn build_node(
    i: usize,
    index: &HashMap<String, usize>,
    slots: &mut [Option<NodeDoc>],
    scales: &HashMap<&str, ValueScale>,
    visiting: &mut HashSet<usize>,
    built: &mut usize,
) -> Result<FactorNode, PersistenceError> {
    let path = format!("nodes[{i}]");
    if !visiting.insert(i) {
        return Err(schema(path, "cycle in children"));
    }
    let doc = slots[i].take().ok_or_else(|| schema(path.clone(), "cycle in children"))?;
    *built += 1;
    let declared =
        scales.get(doc.scale.as_str()).ok_or_else(|| schema(format!("{path}.scale"), format!("undefined scale {:?}", doc.scale)))?;
    let scale = if doc.reversed { declared.reversed() } else { declared.clone() };
    let children = doc
        .children
        .iter()
        .map(|c| build_node(index[c], index, slots, scales, visiting, built))
        .collect::<Result<Vec<_>, _>>()?;
    let mut node = FactorNode::new(doc.id, doc.prompt).with_scale(scale).with_children(children);
    node.reversed = doc.reversed;
    node.short_circuit = doc.short_circuit;
    if let Some(g) = doc.gate {
        node.gate = Some(
            node.scale.parse_value(&g).ok_or_else(|| schema(format!("{path}.gate"), format!("unknown label {g:?}")))?,
        );
    }
    if let Some(a) = doc.aggregation {
        node.aggregation = Some(doc_to_binding(a, &node, &format!("{path}.aggregation"))?);
    }
    Ok(node)
}

fn parse_extended(bytes: &[u8]) -> Result<ExtendedDoc, PersistenceError> {
    serde_json::from_slice(bytes).map_err(syntax)
}

pub fn save_extended(tree: &ModelSpecTree) -> Vec<u8> {
    canonical_json(&tree_to_doc(tree, DocumentKind::Spec, None))
}

pub fn save_model(model: &ExpertModel) -> Vec<u8> {
    canonical_json(&tree_to_doc(model.tree(), DocumentKind::Model, Some(model.expert())))
}

pub fn save_spec(tree: &ModelSpecTree, form: SpecForm) -> Result<Vec<u8>, PersistenceError> {
    match form {
        SpecForm::Plain => save_plain(tree),
        SpecForm::Extended => Ok(save_extended(tree)),
    }
}

/// A parsed document of either form.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDocument {
    pub tree: ModelSpecTree,
    pub form: SpecForm,
    pub kind: DocumentKind,
    pub expert: Option<String>,
}

fn is_extended(bytes: &[u8]) -> Result<bool, PersistenceError> {
    let v: serde_json::Value = serde_json::from_slice(bytes).map_err(syntax)?;
    Ok(v.get("format_version").is_some_and(|f| !f.is_object()))
}

pub fn load_document(bytes: &[u8]) -> Result<LoadedDocument, PersistenceError> {
    if is_extended(bytes)? {
        let doc = parse_extended(bytes)?;
        let kind = doc.kind;
        let expert = doc.expert.clone();
        if kind == DocumentKind::Model && expert.is_none() {
            return Err(schema("expert", "model documents need an expert id"));
        }
        Ok(LoadedDocument { tree: doc_to_tree(doc)?, form: SpecForm::Extended, kind, expert })
    } else {
        Ok(LoadedDocument { tree: parse_plain(bytes)?, form: SpecForm::Plain, kind: DocumentKind::Spec, expert: None })
    }
}

/// Parses either form into a spec tree.
pub fn load_spec(bytes: &[u8]) -> Result<ModelSpecTree, PersistenceError> {
    Ok(load_document(bytes)?.tree)
}

/// Parses a model document; every internal node must carry a rule.
pub fn load_model(bytes: &[u8]) -> Result<ExpertModel, PersistenceError> {
    let doc = load_document(bytes)?;
    if doc.kind != DocumentKind::Model {
        return Err(PersistenceError::WrongKind { expected: "model", found: "spec".into() });
    }
    let expert = doc.expert.unwrap_or_default();
    Ok(ExpertModel::new(doc.tree, expert)?)
}

/// Parse errors become a one-issue error report; parsed trees get the
/// structural report.
pub fn validate_document(bytes: &[u8]) -> ValidationReport {
    match load_spec(bytes) {
        Ok(tree) => validate_spec(&tree),
        Err(PersistenceError::EmptyTree) => {
            ValidationReport::error(IssueKind::EmptyTree, PersistenceError::EmptyTree.to_string())
        }
        Err(e) => ValidationReport::error(IssueKind::Malformed, e.to_string()),
    }
}

// ---- session logs ----

/// One JSON object per line.
pub fn log_line(record: &LogRecord) -> String {
    let mut s = serde_json::to_string(record).expect("log records always serialize");
    s.push('\n');
    s
}

pub fn write_log(records: &[LogRecord]) -> String {
    records.iter().map(log_line).collect()
}

/// Parses a log; blank lines are skipped and sequence numbers must
/// increase.
pub fn parse_log(text: &str) -> Result<Vec<LogRecord>, PersistenceError> {
    let mut out: Vec<LogRecord> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let r: LogRecord =
            serde_json::from_str(line).map_err(|e| PersistenceError::Log { line: line_no, message: e.to_string() })?;
        if let Some(prev) = out.last() {
            if r.seq <= prev.seq {
                return Err(PersistenceError::Log {
                    line: line_no,
                    message: format!("sequence {} does not follow {}", r.seq, prev.seq),
                });
            }
        }
        out.push(r);
    }
    Ok(out)
}

// ---- chain layout ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainElement {
    pub point: Point,
    pub value: usize,
    pub chain: usize,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainLayout {
    pub format_version: u32,
    pub node_id: String,
    pub dimension: usize,
    pub chains: Vec<Vec<ChainElement>>,
}

/// Chains of a binary table in scheduler order, with each scenario's value.
pub fn export_chain_layout(model: &ExpertModel, node_id: &str) -> Result<ChainLayout, PersistenceError> {
    let node = model.tree().find(node_id).ok_or_else(|| PersistenceError::UnknownNode(node_id.to_string()))?;
    let Some(AggregationBinding::Table(table)) = &node.aggregation else {
        return Err(PersistenceError::NotTable(node_id.to_string()));
    };
    chain_layout_of(node_id, &table.function)
}

pub fn chain_layout_of(node_id: &str, f: &TotalMonotoneFn) -> Result<ChainLayout, PersistenceError> {
    if !f.lattice().is_binary() || !f.out_scale().is_binary() {
        return Err(PersistenceError::NotBinary(node_id.to_string()));
    }
    let part = ChainPartition::new(f.lattice().dim())?;
    let chains = part
        .chain_indices()
        .iter()
        .enumerate()
        .map(|(ci, chain)| {
            chain
                .iter()
                .enumerate()
                .map(|(pos, &idx)| ChainElement {
                    point: part.point(idx),
                    value: f.value_at(idx as usize),
                    chain: ci,
                    position: pos,
                })
                .collect()
        })
        .collect();
    Ok(ChainLayout { format_version: FORMAT_VERSION, node_id: node_id.to_string(), dimension: part.dim(), chains })
}

/// Rect grid: one column per chain, black for 1 and white for 0.
pub fn render_svg(layout: &ChainLayout) -> String {
    const CELL: usize = 8;
    const GAP: usize = 2;
    let rows = layout.chains.iter().map(Vec::len).max().unwrap_or(0);
    let width = layout.chains.len() * (CELL + GAP) + GAP;
    let height = rows * CELL + 2 * GAP;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    );
    for (ci, chain) in layout.chains.iter().enumerate() {
        let x = GAP + ci * (CELL + GAP);
        for e in chain {
            let y = height - GAP - (e.position + 1) * CELL;
            let fill = if e.value == 1 { "black" } else { "white" };
            svg.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{fill}\" stroke=\"gray\" stroke-width=\"0.5\"/>\n"
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}
