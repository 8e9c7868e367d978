//! Decision-model spec trees: construction, validation, evaluation with
//! early exit, and explanation traces.
//!
//! Evaluation runs bottom-up over answered leaves. Under
//! [`EvalPolicy::StrictGate`] two shortcuts apply:
//!
//! * a gated internal node whose generalized answer is supplied directly and
//!   sits at or below its gate is not drilled into; its subtree is pruned;
//! * when a gated child in a short-circuit group resolves at or below its
//!   gate, the parent resolves to its lowest value and the child's later
//!   siblings in the same group are pruned.
//!
//! Gates only fire where the spec author declared them, so a single "no"
//! stops evaluation only when that was asked for.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::{AggregationBinding, AggregationError};
use crate::lattice::{Lattice, LatticeError, ValueScale};

/// Children above this count draw a fan-out warning.
pub const MAX_FAN_OUT: usize = 5;

/// Values supplied per node id. Leaves need one when reached; internal
/// nodes may carry a generalized answer used by gates.
pub type LeafAnswers = BTreeMap<String, usize>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HierarchyError {
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("duplicate node id {0:?}")]
    DuplicateId(String),
    #[error("duplicate prompt {prompt:?} under {parent:?}")]
    DuplicatePrompt { parent: String, prompt: String },
    #[error("node {0:?} has no aggregation rule")]
    Unresolved(String),
    #[error("missing answer for leaf {0:?}")]
    MissingAnswer(String),
    #[error("answer {value} for {node:?} is outside its scale of size {size}")]
    AnswerOutOfRange { node: String, value: usize, size: usize },
    #[error("gate {gate} on {node:?} is outside its scale of size {size}")]
    GateOutOfRange { node: String, gate: usize, size: usize },
    #[error("explanation depth {depth} exceeds tree height {height}")]
    InvalidDepth { depth: usize, height: usize },
    #[error("node {node:?}: {source}")]
    Aggregation { node: String, source: AggregationError },
    #[error("model is not evaluable: {0}")]
    Invalid(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// One factor (question) of the decision model.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorNode {
    pub id: String,
    pub prompt: String,
    /// Labels in ascending favorability (already reversed when `reversed`).
    pub scale: ValueScale,
    /// The source document lists this factor's labels most-favorable first.
    pub reversed: bool,
    pub children: Vec<FactorNode>,
    /// `None` means unresolved.
    pub aggregation: Option<AggregationBinding>,
    pub gate: Option<usize>,
    pub short_circuit: Option<String>,
}

impl FactorNode {
    /// Binary leaf.
    pub fn new(id: impl Into<String>, prompt: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            prompt: prompt.into(),
            scale: ValueScale::binary(),
            reversed: false,
            children: Vec::new(),
            aggregation: None,
            gate: None,
            short_circuit: None,
        }
    }

    pub fn with_scale(mut self, scale: ValueScale) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_children(mut self, children: Vec<FactorNode>) -> Self {
        self.children = children;
        self
    }

    pub fn with_aggregation(mut self, binding: AggregationBinding) -> Self {
        self.aggregation = Some(binding);
        self
    }

    pub fn with_gate(mut self, gate: usize, group: Option<&str>) -> Self {
        self.gate = Some(gate);
        self.short_circuit = group.map(str::to_string);
        self
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Scenario space of this node: the product of its children's scales.
    pub fn child_lattice(&self) -> Result<Lattice, LatticeError> {
        Lattice::new(self.children.iter().map(|c| c.scale.clone()).collect())
    }

    /// Preorder walk of this subtree.
    pub fn walk(&self) -> Vec<&FactorNode> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.walk());
        }
        out
    }

    fn find(&self, id: &str) -> Option<&FactorNode> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(id))
    }

    fn find_mut(&mut self, id: &str) -> Option<&mut FactorNode> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter_mut().find_map(|c| c.find_mut(id))
    }

    fn height(&self) -> usize {
        self.children.iter().map(|c| c.height() + 1).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
}

/// A rooted tree of factors with unique ids and unique prompts per level.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpecTree {
    root: FactorNode,
    metadata: Metadata,
}

fn check_structure(root: &FactorNode) -> Result<(), HierarchyError> {
    let mut ids = HashSet::new();
    for n in root.walk() {
        if !ids.insert(n.id.as_str()) {
            return Err(HierarchyError::DuplicateId(n.id.clone()));
        }
        let mut prompts = HashSet::new();
        for c in &n.children {
            if !prompts.insert(c.prompt.as_str()) {
                return Err(HierarchyError::DuplicatePrompt { parent: n.id.clone(), prompt: c.prompt.clone() });
            }
        }
    }
    Ok(())
}

impl ModelSpecTree {
    pub fn new(root: FactorNode, metadata: Metadata) -> Result<Self, HierarchyError> {
        check_structure(&root)?;
        Ok(Self { root, metadata })
    }

    pub fn root(&self) -> &FactorNode {
        &self.root
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    pub fn metadata_mut(&mut self) -> &mut Metadata {
        &mut self.metadata
    }

    pub fn find(&self, id: &str) -> Option<&FactorNode> {
        self.root.find(id)
    }

    pub fn nodes(&self) -> Vec<&FactorNode> {
        self.root.walk()
    }

    pub fn leaves(&self) -> Vec<&FactorNode> {
        self.nodes().into_iter().filter(|n| n.is_leaf()).collect()
    }

    /// Internal nodes other than the root.
    pub fn branches(&self) -> Vec<&FactorNode> {
        self.nodes().into_iter().skip(1).filter(|n| !n.is_leaf()).collect()
    }

    /// Longest root-to-leaf edge count.
    pub fn height(&self) -> usize {
        self.root.height()
    }

    pub fn parent_of(&self, id: &str) -> Option<&FactorNode> {
        self.nodes().into_iter().find(|n| n.children.iter().any(|c| c.id == id))
    }

    /// Appends `node` (with any subtree) under `parent_id`.
    pub fn add_factor(&mut self, parent_id: &str, node: FactorNode) -> Result<(), HierarchyError> {
        let existing: HashSet<String> = self.nodes().iter().map(|n| n.id.clone()).collect();
        if let Some(dup) = node.walk().into_iter().find(|n| existing.contains(&n.id)) {
            return Err(HierarchyError::DuplicateId(dup.id.clone()));
        }
        check_structure(&node)?;
        let parent =
            self.root.find_mut(parent_id).ok_or_else(|| HierarchyError::UnknownNode(parent_id.to_string()))?;
        if parent.children.iter().any(|c| c.prompt == node.prompt) {
            return Err(HierarchyError::DuplicatePrompt { parent: parent_id.to_string(), prompt: node.prompt });
        }
        parent.children.push(node);
        Ok(())
    }

    pub fn bind(&mut self, id: &str, binding: Option<AggregationBinding>) -> Result<(), HierarchyError> {
        let node = self.root.find_mut(id).ok_or_else(|| HierarchyError::UnknownNode(id.to_string()))?;
        node.aggregation = binding;
        Ok(())
    }

    pub fn set_gate(&mut self, id: &str, gate: Option<usize>, group: Option<String>) -> Result<(), HierarchyError> {
        let node = self.root.find_mut(id).ok_or_else(|| HierarchyError::UnknownNode(id.to_string()))?;
        if let Some(g) = gate {
            if g >= node.scale.size() {
                return Err(HierarchyError::GateOutOfRange { node: id.to_string(), gate: g, size: node.scale.size() });
            }
        }
        node.gate = gate;
        node.short_circuit = group;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    Malformed,
    EmptyTree,
    Unresolved,
    FanOut,
    ScaleMismatch,
    LeafAggregation,
    GateOutOfRange,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub kind: IssueKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.issues.iter().any(|i| i.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }

    pub fn of_kind(&self, kind: IssueKind) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(move |i| i.kind == kind)
    }

    fn push(&mut self, severity: Severity, kind: IssueKind, node: Option<&str>, message: String) {
        self.issues.push(Issue { severity, kind, node: node.map(str::to_string), message });
    }

    pub(crate) fn error(kind: IssueKind, message: String) -> Self {
        let mut r = Self::default();
        r.push(Severity::Error, kind, None, message);
        r
    }
}

/// Reports unresolved rules, wide nodes, and rule/scale mismatches.
pub fn validate_spec(tree: &ModelSpecTree) -> ValidationReport {
    let mut report = ValidationReport::default();
    for n in tree.nodes() {
        let id = Some(n.id.as_str());
        if n.children.len() > MAX_FAN_OUT {
            report.push(
                Severity::Warning,
                IssueKind::FanOut,
                id,
                format!("{} children (more than {MAX_FAN_OUT}); consider an intermediate question", n.children.len()),
            );
        }
        if let Some(g) = n.gate {
            if g >= n.scale.size() {
                report.push(
                    Severity::Error,
                    IssueKind::GateOutOfRange,
                    id,
                    format!("gate {g} outside scale of size {}", n.scale.size()),
                );
            }
        }
        match (&n.aggregation, n.is_leaf()) {
            (None, false) => report.push(
                Severity::Warning,
                IssueKind::Unresolved,
                id,
                "no aggregation rule; elicit a table or bind a rule".into(),
            ),
            (Some(_), true) => report.push(
                Severity::Warning,
                IssueKind::LeafAggregation,
                id,
                "leaf carries an aggregation rule that is never used".into(),
            ),
            (Some(b), false) => {
                if let Err(e) = b.validate(n) {
                    report.push(Severity::Error, IssueKind::ScaleMismatch, id, e.to_string());
                }
            }
            (None, true) => {}
        }
    }
    report
}

/// A spec tree whose every internal node has a working rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertModel {
    tree: ModelSpecTree,
    expert: String,
}

impl ExpertModel {
    pub fn new(tree: ModelSpecTree, expert: impl Into<String>) -> Result<Self, HierarchyError> {
        let report = validate_spec(&tree);
        if let Some(issue) = report.issues.iter().find(|i| {
            i.severity == Severity::Error || i.kind == IssueKind::Unresolved
        }) {
            return Err(HierarchyError::Invalid(format!(
                "{}: {}",
                issue.node.as_deref().unwrap_or("-"),
                issue.message
            )));
        }
        Ok(Self { tree, expert: expert.into() })
    }

    pub fn tree(&self) -> &ModelSpecTree {
        &self.tree
    }

    pub fn expert(&self) -> &str {
        &self.expert
    }

    pub fn into_tree(self) -> ModelSpecTree {
        self.tree
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalPolicy {
    StrictGate,
    #[default]
    Full,
}

impl std::str::FromStr for EvalPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict-gate" => Ok(EvalPolicy::StrictGate),
            "full" => Ok(EvalPolicy::Full),
            other => Err(format!("unknown policy {other:?} (expected strict-gate or full)")),
        }
    }
}

/// Where a traced value came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueSource {
    Leaf,
    Rule { rule: String },
    /// Generalized answer at or below the gate; children were not drilled.
    Gated { gate: usize },
    /// A gated child in a short-circuit group stopped this node.
    ShortCircuit { by: String, group: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrunedNode {
    pub node: String,
    pub prompt: String,
    pub gated_by: String,
    pub gating_value: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceNode {
    pub node: String,
    pub prompt: String,
    pub value: usize,
    pub label: String,
    pub source: ValueSource,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<TraceNode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pruned: Vec<PrunedNode>,
}

impl TraceNode {
    fn collect_visited<'a>(&'a self, out: &mut Vec<&'a str>) {
        out.push(&self.node);
        for c in &self.children {
            c.collect_visited(out);
        }
    }

    fn truncate(&mut self, depth: usize) {
        if depth == 0 {
            self.children.clear();
            self.pruned.clear();
        } else {
            for c in &mut self.children {
                c.truncate(depth - 1);
            }
        }
    }
}

/// Explanation of a decision: which nodes were visited, their values, and
/// which rule produced each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationTrace {
    pub root: TraceNode,
}

impl ExplanationTrace {
    pub fn value(&self) -> usize {
        self.root.value
    }

    /// Visited node ids, preorder.
    pub fn visited(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.root.collect_visited(&mut out);
        out
    }

    pub fn pruned(&self) -> Vec<&PrunedNode> {
        fn walk<'a>(n: &'a TraceNode, out: &mut Vec<&'a PrunedNode>) {
            out.extend(n.pruned.iter());
            for c in &n.children {
                walk(c, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    /// Keeps `depth` levels below the root.
    pub fn truncated(&self, depth: usize) -> ExplanationTrace {
        let mut t = self.clone();
        t.root.truncate(depth);
        t
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: usize,
    pub label: String,
    pub trace: ExplanationTrace,
}

fn label_of(node: &FactorNode, value: usize) -> String {
    node.scale.label(value).unwrap_or("?").to_string()
}

fn supplied(node: &FactorNode, answers: &LeafAnswers) -> Result<Option<usize>, HierarchyError> {
    match answers.get(&node.id) {
        Some(&v) if v >= node.scale.size() => {
            Err(HierarchyError::AnswerOutOfRange { node: node.id.clone(), value: v, size: node.scale.size() })
        }
        other => Ok(other.copied()),
    }
}

fn prune(node: &FactorNode, by: &str, value: usize) -> PrunedNode {
    PrunedNode { node: node.id.clone(), prompt: node.prompt.clone(), gated_by: by.to_string(), gating_value: value }
}

fn gate_fired(node: &FactorNode, value: usize) -> bool {
    node.gate.is_some_and(|g| value <= g)
}

fn eval_node(node: &FactorNode, answers: &LeafAnswers, policy: EvalPolicy) -> Result<TraceNode, HierarchyError> {
    let make = |value: usize, source: ValueSource, children, pruned| TraceNode {
        node: node.id.clone(),
        prompt: node.prompt.clone(),
        value,
        label: label_of(node, value),
        source,
        children,
        pruned,
    };
    if node.is_leaf() {
        let value = supplied(node, answers)?.ok_or_else(|| HierarchyError::MissingAnswer(node.id.clone()))?;
        return Ok(make(value, ValueSource::Leaf, Vec::new(), Vec::new()));
    }
    let strict = policy == EvalPolicy::StrictGate;
    if strict {
        if let (Some(gate), Some(value)) = (node.gate, supplied(node, answers)?) {
            if value <= gate {
                let pruned = node.children.iter().map(|c| prune(c, &node.id, value)).collect();
                return Ok(make(value, ValueSource::Gated { gate }, Vec::new(), pruned));
            }
        }
    }
    let binding = node.aggregation.as_ref().ok_or_else(|| HierarchyError::Unresolved(node.id.clone()))?;

    let mut traced = Vec::with_capacity(node.children.len());
    let mut pruned = Vec::new();
    let mut stopped: Option<(String, String, usize)> = None;
    for child in &node.children {
        if let Some((by, group, v)) = &stopped {
            if child.short_circuit.as_deref() == Some(group.as_str()) {
                pruned.push(prune(child, by, *v));
                continue;
            }
        }
        let t = eval_node(child, answers, policy)?;
        if strict && stopped.is_none() && gate_fired(child, t.value) {
            if let Some(group) = &child.short_circuit {
                stopped = Some((child.id.clone(), group.clone(), t.value));
            }
        }
        traced.push(t);
    }
    if let Some((by, group, _)) = stopped {
        return Ok(make(0, ValueSource::ShortCircuit { by, group }, traced, pruned));
    }
    let inputs: Vec<usize> = traced.iter().map(|t| t.value).collect();
    let value = binding
        .evaluate(node, &inputs)
        .map_err(|source| HierarchyError::Aggregation { node: node.id.clone(), source })?;
    Ok(make(value, ValueSource::Rule { rule: binding.describe() }, traced, pruned))
}

/// Evaluates the model bottom-up on the supplied answers.
pub fn evaluate(model: &ExpertModel, answers: &LeafAnswers, policy: EvalPolicy) -> Result<Evaluation, HierarchyError> {
    let root = eval_node(model.tree.root(), answers, policy)?;
    Ok(Evaluation { value: root.value, label: root.label.clone(), trace: ExplanationTrace { root } })
}

/// Evaluation trace cut to `depth` levels; 0 is the root value alone.
pub fn explain(
    model: &ExpertModel,
    answers: &LeafAnswers,
    policy: EvalPolicy,
    depth: usize,
) -> Result<ExplanationTrace, HierarchyError> {
    let height = model.tree.height();
    if depth > height {
        return Err(HierarchyError::InvalidDepth { depth, height });
    }
    Ok(evaluate(model, answers, policy)?.trace.truncated(depth))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_leaf_tree() -> ModelSpecTree {
        let root = FactorNode::new("root", "Go?")
            .with_children(vec![
                FactorNode::new("a", "A?"),
                FactorNode::new("b", "B?"),
                FactorNode::new("c", "C?"),
            ])
            .with_aggregation(AggregationBinding::majority());
        ModelSpecTree::new(root, Metadata::default()).unwrap()
    }

    fn answers(pairs: &[(&str, usize)]) -> LeafAnswers {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn single_leaf_tree() {
        let tree = ModelSpecTree::new(FactorNode::new("q", "Q?"), Metadata::default()).unwrap();
        let model = ExpertModel::new(tree, "e").unwrap();
        let ev = evaluate(&model, &answers(&[("q", 1)]), EvalPolicy::Full).unwrap();
        assert_eq!(ev.value, 1);
        assert_eq!(ev.trace.visited(), vec!["q"]);
    }

    #[test]
    fn add_factor_errors() {
        let mut t = three_leaf_tree();
        t.add_factor("a", FactorNode::new("a1", "A1?")).unwrap();
        assert_eq!(t.find("a").unwrap().children.len(), 1);
        assert_eq!(t.add_factor("zz", FactorNode::new("x", "X?")), Err(HierarchyError::UnknownNode("zz".into())));
        assert_eq!(t.add_factor("root", FactorNode::new("b", "B2?")), Err(HierarchyError::DuplicateId("b".into())));
        assert!(matches!(
            t.add_factor("root", FactorNode::new("d", "A?")),
            Err(HierarchyError::DuplicatePrompt { .. })
        ));
    }

    #[test]
    fn fan_out_warning() {
        let kids = (0..6).map(|i| FactorNode::new(format!("c{i}"), format!("C{i}?"))).collect();
        let tree = ModelSpecTree::new(FactorNode::new("r", "R?").with_children(kids), Metadata::default()).unwrap();
        let report = validate_spec(&tree);
        assert_eq!(report.of_kind(IssueKind::FanOut).count(), 1);
        assert!(!report.has_errors());
    }

    #[test]
    fn unresolved_model_is_rejected() {
        let mut t = three_leaf_tree();
        t.bind("root", None).unwrap();
        assert!(matches!(ExpertModel::new(t, "e"), Err(HierarchyError::Invalid(_))));
    }

    #[test]
    fn missing_leaf_answer() {
        let model = ExpertModel::new(three_leaf_tree(), "e").unwrap();
        let err = evaluate(&model, &answers(&[("a", 1), ("b", 1)]), EvalPolicy::Full).unwrap_err();
        assert_eq!(err, HierarchyError::MissingAnswer("c".into()));
    }

    #[test]
    fn explain_depths() {
        let model = ExpertModel::new(three_leaf_tree(), "e").unwrap();
        let a = answers(&[("a", 1), ("b", 0), ("c", 1)]);
        let t0 = explain(&model, &a, EvalPolicy::Full, 0).unwrap();
        assert!(t0.root.children.is_empty());
        assert_eq!(t0.value(), 1);
        let t1 = explain(&model, &a, EvalPolicy::Full, 1).unwrap();
        assert_eq!(t1.root.children.len(), 3);
        assert!(matches!(explain(&model, &a, EvalPolicy::Full, 2), Err(HierarchyError::InvalidDepth { .. })));
    }

    #[test]
    fn generalized_no_prunes_details() {
        let aligned = FactorNode::new("g", "Aligned?")
            .with_children(vec![FactorNode::new("d1", "D1?"), FactorNode::new("d2", "D2?")])
            .with_aggregation(AggregationBinding::majority())
            .with_gate(0, None);
        let root = FactorNode::new("root", "Respond?")
            .with_children(vec![aligned, FactorNode::new("fee", "Fee?")])
            .with_aggregation(AggregationBinding::Max);
        let model = ExpertModel::new(ModelSpecTree::new(root, Metadata::default()).unwrap(), "e").unwrap();
        let a = answers(&[("g", 0), ("fee", 1)]);
        let ev = evaluate(&model, &a, EvalPolicy::StrictGate).unwrap();
        assert_eq!(ev.trace.visited(), vec!["root", "g", "fee"]);
        assert_eq!(ev.trace.pruned().len(), 2);
        assert_eq!(ev.value, 1);
        // Full policy needs the detail answers.
        assert!(evaluate(&model, &a, EvalPolicy::Full).is_err());
    }

    #[test]
    fn short_circuit_group_stops_parent() {
        let gated = |id: &str| FactorNode::new(id, format!("{id}?")).with_gate(0, Some("stop"));
        let root = FactorNode::new("root", "Go?")
            .with_children(vec![gated("a"), gated("b"), FactorNode::new("c", "c?")])
            .with_aggregation(AggregationBinding::Max);
        let model = ExpertModel::new(ModelSpecTree::new(root, Metadata::default()).unwrap(), "e").unwrap();
        let ev = evaluate(&model, &answers(&[("a", 0), ("c", 1)]), EvalPolicy::StrictGate).unwrap();
        assert_eq!(ev.value, 0);
        assert_eq!(ev.trace.visited(), vec!["root", "a", "c"]);
        assert_eq!(ev.trace.pruned()[0].node, "b");
        let full = evaluate(&model, &answers(&[("a", 0), ("b", 0), ("c", 1)]), EvalPolicy::Full).unwrap();
        assert_eq!(full.value, 1);
    }
}
