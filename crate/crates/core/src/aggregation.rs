//! Aggregation rules that turn children's values into a parent value, plus
//! group-of-experts aggregation and model comparison.
//!
//! Every rule here is monotone in each argument: majority, weighted
//! threshold with non-negative weights, critical threshold over a monotone
//! fallback, max, and elicited monotone tables.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elicitation::ElicitedFunction;
use crate::hierarchy::{evaluate, EvalPolicy, ExpertModel, FactorNode, HierarchyError, LeafAnswers};
use crate::lattice::{Point, ValueScale};

/// Tolerance for weight sums and score-vs-threshold comparisons.
pub const WEIGHT_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregationError {
    #[error("no inputs to aggregate")]
    Empty,
    #[error("input {position} has value {value}; this rule needs binary inputs")]
    NotBinary { position: usize, value: usize },
    #[error("rule expects {expected} inputs, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("threshold {0} is outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("unknown child {0:?} in critical set")]
    UnknownChild(String),
    #[error("a critical-threshold fallback cannot itself be a critical-threshold rule")]
    NestedCritical,
    #[error("critical set covers every child; nothing is left for the fallback")]
    NoFallbackInputs,
    #[error("scale mismatch: {0}")]
    ScaleMismatch(String),
    #[error("value {value} is outside a scale of size {size}")]
    ValueOutOfRange { value: usize, size: usize },
    #[error("table lookup failed: {0}")]
    Table(String),
    #[error("models differ in shape: {0}")]
    ShapeMismatch(String),
    #[error("node {0:?} is not bound to an elicited table in both models")]
    NotTable(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error(transparent)]
    Evaluation(Box<HierarchyError>),
}

impl From<HierarchyError> for AggregationError {
    fn from(e: HierarchyError) -> Self {
        AggregationError::Evaluation(Box::new(e))
    }
}

/// What a majority vote returns on an exact split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Lower value.
    #[default]
    Pessimistic,
    /// Higher value.
    Optimistic,
}

/// How a node's value is computed from its children.
#[derive(Debug, Clone, PartialEq)]
pub enum AggregationBinding {
    Majority { tie: TiePolicy },
    Weighted { weights: Vec<f64>, threshold: f64 },
    /// Lowest value if any critical child is at its lowest; otherwise the
    /// fallback over the remaining children, in order.
    CriticalThreshold { critical: Vec<String>, fallback: Box<AggregationBinding> },
    Max,
    Table(ElicitedFunction),
}

fn check_binary(answers: &[usize]) -> Result<(), AggregationError> {
    if answers.is_empty() {
        return Err(AggregationError::Empty);
    }
    match answers.iter().position(|&v| v > 1) {
        Some(position) => Err(AggregationError::NotBinary { position, value: answers[position] }),
        None => Ok(()),
    }
}

/// `1` iff yes-votes outnumber no-votes; splits go to `tie`.
pub fn eval_majority(answers: &[usize], tie: TiePolicy) -> Result<usize, AggregationError> {
    check_binary(answers)?;
    let yes = answers.iter().filter(|&&v| v == 1).count();
    let no = answers.len() - yes;
    Ok(match yes.cmp(&no) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => 0,
        std::cmp::Ordering::Equal => match tie {
            TiePolicy::Pessimistic => 0,
            TiePolicy::Optimistic => 1,
        },
    })
}

pub fn check_weights(weights: &[f64], threshold: f64) -> Result<(), AggregationError> {
    if weights.is_empty() {
        return Err(AggregationError::InvalidWeights("no weights".into()));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(AggregationError::InvalidWeights(format!("weight {w} is negative or not finite")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_EPSILON {
        return Err(AggregationError::InvalidWeights(format!("weights sum to {sum}, not 1.0")));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(AggregationError::InvalidThreshold(threshold));
    }
    Ok(())
}

/// Weighted score of yes-answers.
pub fn weighted_score(answers: &[usize], weights: &[f64]) -> Result<f64, AggregationError> {
    check_binary(answers)?;
    if answers.len() != weights.len() {
        return Err(AggregationError::LengthMismatch { expected: weights.len(), got: answers.len() });
    }
    Ok(answers.iter().zip(weights).map(|(&a, &w)| a as f64 * w).sum())
}

/// `1` iff the weighted score reaches `threshold` (inclusive).
pub fn eval_weighted(answers: &[usize], weights: &[f64], threshold: f64) -> Result<usize, AggregationError> {
    check_weights(weights, threshold)?;
    let score = weighted_score(answers, weights)?;
    Ok(usize::from(score >= threshold - WEIGHT_EPSILON))
}

/// Critical-threshold rule over positional inputs. `critical` holds input
/// positions; the fallback sees the non-critical inputs in order.
pub fn eval_critical(
    answers: &[usize],
    critical: &[usize],
    fallback: impl FnOnce(&[usize]) -> Result<usize, AggregationError>,
) -> Result<usize, AggregationError> {
    if answers.is_empty() {
        return Err(AggregationError::Empty);
    }
    if let Some(&bad) = critical.iter().find(|&&i| i >= answers.len()) {
        return Err(AggregationError::UnknownChild(format!("#{bad}")));
    }
    if critical.iter().any(|&i| answers[i] == 0) {
        return Ok(0);
    }
    let rest: Vec<usize> =
        answers.iter().enumerate().filter(|(i, _)| !critical.contains(i)).map(|(_, &v)| v).collect();
    if rest.is_empty() {
        return Err(AggregationError::NoFallbackInputs);
    }
    fallback(&rest)
}

pub fn eval_max(answers: &[usize]) -> Result<usize, AggregationError> {
    answers.iter().copied().max().ok_or(AggregationError::Empty)
}

pub fn eval_table(table: &ElicitedFunction, scenario: &Point) -> Result<usize, AggregationError> {
    table.function.value(scenario).map_err(|e| AggregationError::Table(e.to_string()))
}

impl AggregationBinding {
    pub fn majority() -> Self {
        AggregationBinding::Majority { tie: TiePolicy::Pessimistic }
    }

    pub fn weighted(weights: Vec<f64>, threshold: f64) -> Result<Self, AggregationError> {
        check_weights(&weights, threshold)?;
        Ok(AggregationBinding::Weighted { weights, threshold })
    }

    pub fn critical(critical: Vec<String>, fallback: AggregationBinding) -> Result<Self, AggregationError> {
        if matches!(fallback, AggregationBinding::CriticalThreshold { .. }) {
            return Err(AggregationError::NestedCritical);
        }
        Ok(AggregationBinding::CriticalThreshold { critical, fallback: Box::new(fallback) })
    }

    pub fn rule_name(&self) -> &'static str {
        match self {
            AggregationBinding::Majority { .. } => "majority",
            AggregationBinding::Weighted { .. } => "weighted",
            AggregationBinding::CriticalThreshold { .. } => "critical",
            AggregationBinding::Max => "max",
            AggregationBinding::Table(_) => "table",
        }
    }

    /// Short human-readable citation of the rule, used in explanations.
    pub fn describe(&self) -> String {
        match self {
            AggregationBinding::Majority { tie } => format!("majority (ties {tie:?})").to_lowercase(),
            AggregationBinding::Weighted { weights, threshold } => {
                let w: Vec<String> = weights.iter().map(|w| format!("{w}")).collect();
                format!("weighted [{}] >= {threshold}", w.join(", "))
            }
            AggregationBinding::CriticalThreshold { critical, fallback } => {
                format!("critical [{}] else {}", critical.join(", "), fallback.describe())
            }
            AggregationBinding::Max => "max".into(),
            AggregationBinding::Table(t) => {
                format!("elicited table (expert {}, session {})", t.provenance.expert, t.provenance.session_id)
            }
        }
    }

    /// Checks this binding against the node it is attached to.
    pub fn validate(&self, node: &FactorNode) -> Result<(), AggregationError> {
        let scales: Vec<&ValueScale> = node.children.iter().map(|c| &c.scale).collect();
        self.validate_inputs(node, &scales)
    }

    fn validate_inputs(&self, node: &FactorNode, inputs: &[&ValueScale]) -> Result<(), AggregationError> {
        if inputs.is_empty() {
            return Err(AggregationError::Empty);
        }
        let binary_inputs = || {
            if let Some(i) = inputs.iter().position(|s| !s.is_binary()) {
                return Err(AggregationError::ScaleMismatch(format!(
                    "{} rule needs binary inputs; input {i} has {} values",
                    self.rule_name(),
                    inputs[i].size()
                )));
            }
            if !node.scale.is_binary() {
                return Err(AggregationError::ScaleMismatch(format!(
                    "{} rule produces a binary value but node {:?} has {} values",
                    self.rule_name(),
                    node.id,
                    node.scale.size()
                )));
            }
            Ok(())
        };
        match self {
            AggregationBinding::Majority { .. } => binary_inputs(),
            AggregationBinding::Weighted { weights, threshold } => {
                binary_inputs()?;
                check_weights(weights, *threshold)?;
                if weights.len() != inputs.len() {
                    return Err(AggregationError::LengthMismatch { expected: inputs.len(), got: weights.len() });
                }
                Ok(())
            }
            AggregationBinding::CriticalThreshold { critical, fallback } => {
                if matches!(**fallback, AggregationBinding::CriticalThreshold { .. }) {
                    return Err(AggregationError::NestedCritical);
                }
                let positions = critical_positions(node, critical)?;
                let rest: Vec<&ValueScale> = inputs
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !positions.contains(i))
                    .map(|(_, s)| *s)
                    .collect();
                if rest.is_empty() {
                    return Err(AggregationError::NoFallbackInputs);
                }
                fallback.validate_inputs(node, &rest)
            }
            AggregationBinding::Max => {
                if let Some(s) = inputs.iter().find(|s| s.labels() != node.scale.labels()) {
                    return Err(AggregationError::ScaleMismatch(format!(
                        "max needs every child on the node's scale {:?}, found {:?}",
                        node.scale.labels(),
                        s.labels()
                    )));
                }
                Ok(())
            }
            AggregationBinding::Table(t) => {
                let dims = t.function.lattice().dims();
                let same_inputs = dims.len() == inputs.len()
                    && dims.iter().zip(inputs).all(|(a, b)| a.labels() == b.labels());
                if !same_inputs {
                    return Err(AggregationError::ScaleMismatch(format!(
                        "table lattice does not match the children of {:?}",
                        node.id
                    )));
                }
                if t.function.out_scale().labels() != node.scale.labels() {
                    return Err(AggregationError::ScaleMismatch(format!(
                        "table output scale does not match the scale of {:?}",
                        node.id
                    )));
                }
                Ok(())
            }
        }
    }

    /// Evaluates the rule on the node's children values (in child order).
    pub fn evaluate(&self, node: &FactorNode, inputs: &[usize]) -> Result<usize, AggregationError> {
        if inputs.len() != node.children.len() {
            return Err(AggregationError::LengthMismatch { expected: node.children.len(), got: inputs.len() });
        }
        for (c, &v) in node.children.iter().zip(inputs) {
            if v >= c.scale.size() {
                return Err(AggregationError::ValueOutOfRange { value: v, size: c.scale.size() });
            }
        }
        self.evaluate_inputs(node, inputs)
    }

    fn evaluate_inputs(&self, node: &FactorNode, inputs: &[usize]) -> Result<usize, AggregationError> {
        match self {
            AggregationBinding::Majority { tie } => eval_majority(inputs, *tie),
            AggregationBinding::Weighted { weights, threshold } => eval_weighted(inputs, weights, *threshold),
            AggregationBinding::CriticalThreshold { critical, fallback } => {
                let positions = critical_positions(node, critical)?;
                eval_critical(inputs, &positions, |rest| fallback.evaluate_inputs(node, rest))
            }
            AggregationBinding::Max => eval_max(inputs),
            AggregationBinding::Table(t) => eval_table(t, &Point::new(inputs.to_vec())),
        }
    }
}

fn critical_positions(node: &FactorNode, critical: &[String]) -> Result<Vec<usize>, AggregationError> {
    critical
        .iter()
        .map(|id| {
            node.children
                .iter()
                .position(|c| &c.id == id)
                .ok_or_else(|| AggregationError::UnknownChild(id.clone()))
        })
        .collect()
}

/// Scenarios whose stated response disagrees with the rule; returns their
/// positions in `scenarios`.
pub fn inconsistent_scenarios(
    binding: &AggregationBinding,
    node: &FactorNode,
    scenarios: &[(Vec<usize>, usize)],
) -> Result<Vec<usize>, AggregationError> {
    let mut out = Vec::new();
    for (i, (inputs, stated)) in scenarios.iter().enumerate() {
        if binding.evaluate(node, inputs)? != *stated {
            out.push(i);
        }
    }
    Ok(out)
}

/// How team members' numbers are combined into one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    Mean,
    Median,
}

fn combine(values: &mut [f64], how: Combine) -> f64 {
    match how {
        Combine::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Combine::Median => {
            values.sort_by(f64::total_cmp);
            let n = values.len();
            if n % 2 == 1 {
                values[n / 2]
            } else {
                (values[n / 2 - 1] + values[n / 2]) / 2.0
            }
        }
    }
}

/// Scales raw importance scores (any non-negative scale) to sum to 1.
pub fn normalize_weights(raw: &[f64]) -> Result<Vec<f64>, AggregationError> {
    if raw.is_empty() {
        return Err(AggregationError::InvalidWeights("no weights".into()));
    }
    if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(AggregationError::InvalidWeights("weights must be non-negative".into()));
    }
    let sum: f64 = raw.iter().sum();
    if sum <= 0.0 {
        return Err(AggregationError::InvalidWeights("weights sum to zero".into()));
    }
    Ok(raw.iter().map(|w| w / sum).collect())
}

/// Combines per-member weight vectors position by position, then
/// renormalizes.
pub fn combine_weights(members: &[Vec<f64>], how: Combine) -> Result<Vec<f64>, AggregationError> {
    let first = members.first().ok_or(AggregationError::Empty)?;
    if let Some(m) = members.iter().find(|m| m.len() != first.len()) {
        return Err(AggregationError::LengthMismatch { expected: first.len(), got: m.len() });
    }
    let combined: Vec<f64> = (0..first.len())
        .map(|i| {
            let mut column: Vec<f64> = members.iter().map(|m| m[i]).collect();
            combine(&mut column, how)
        })
        .collect();
    normalize_weights(&combined)
}

pub fn combine_thresholds(members: &[f64], how: Combine) -> Result<f64, AggregationError> {
    if members.is_empty() {
        return Err(AggregationError::Empty);
    }
    let mut v = members.to_vec();
    Ok(combine(&mut v, how))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupRule {
    /// Strict majority of experts; no value held by more than half is a tie.
    Majority,
    /// A value holds only as far as every expert grants it (the minimum).
    Unanimity,
}

impl std::str::FromStr for GroupRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "majority" => Ok(GroupRule::Majority),
            "unanimity" => Ok(GroupRule::Unanimity),
            other => Err(format!("unknown group rule {other:?} (expected majority or unanimity)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertValue {
    pub expert: String,
    pub value: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupVerdict {
    pub per_expert: Vec<ExpertValue>,
    pub aggregate: Option<usize>,
    pub disagreement: bool,
    pub tie: bool,
}

/// Combines already-computed expert values.
pub fn combine_expert_values(per_expert: Vec<ExpertValue>, rule: GroupRule) -> GroupVerdict {
    let values: Vec<usize> = per_expert.iter().map(|e| e.value).collect();
    let disagreement = values.windows(2).any(|w| w[0] != w[1]);
    let (aggregate, tie) = match rule {
        GroupRule::Majority => {
            let winner = values
                .iter()
                .copied()
                .find(|&v| values.iter().filter(|&&w| w == v).count() * 2 > values.len());
            (winner, winner.is_none())
        }
        GroupRule::Unanimity => (values.iter().copied().min(), false),
    };
    GroupVerdict { per_expert, aggregate, disagreement, tie }
}

fn check_same_shape(a: &FactorNode, b: &FactorNode) -> Result<(), AggregationError> {
    if a.id != b.id || a.scale.labels() != b.scale.labels() || a.children.len() != b.children.len() {
        return Err(AggregationError::ShapeMismatch(format!("node {:?} vs {:?}", a.id, b.id)));
    }
    a.children.iter().zip(&b.children).try_for_each(|(x, y)| check_same_shape(x, y))
}

/// Evaluates each expert's model on one scenario and combines the root
/// values.
pub fn group_aggregate(
    models: &[ExpertModel],
    answers: &LeafAnswers,
    rule: GroupRule,
) -> Result<GroupVerdict, AggregationError> {
    let first = models.first().ok_or(AggregationError::Empty)?;
    for m in &models[1..] {
        check_same_shape(first.tree().root(), m.tree().root())?;
    }
    let per_expert = models
        .iter()
        .map(|m| {
            let value = evaluate(m, answers, EvalPolicy::Full)?.value;
            Ok(ExpertValue { expert: m.expert().to_string(), value })
        })
        .collect::<Result<Vec<_>, AggregationError>>()?;
    Ok(combine_expert_values(per_expert, rule))
}

/// Scenarios where two experts' elicited tables for one node disagree.
pub fn disagreement_points(a: &ExpertModel, b: &ExpertModel, node_id: &str) -> Result<Vec<Point>, AggregationError> {
    let table = |m: &ExpertModel| -> Result<ElicitedFunction, AggregationError> {
        let node = m.tree().find(node_id).ok_or_else(|| AggregationError::UnknownNode(node_id.into()))?;
        match &node.aggregation {
            Some(AggregationBinding::Table(t)) => Ok(t.clone()),
            _ => Err(AggregationError::NotTable(node_id.into())),
        }
    };
    let (ta, tb) = (table(a)?, table(b)?);
    if ta.function.lattice() != tb.function.lattice() {
        return Err(AggregationError::ShapeMismatch(format!("tables at {node_id:?} use different lattices")));
    }
    Ok(ta.function.differing_points(&tb.function))
}
