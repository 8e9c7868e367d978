//! Security-categorization preset: impact levels combine by maximum.
//!
//! Impact values are stored as scale indices `low = 0`, `medium = 1`,
//! `high = 2`. The conventional numeric codes are one higher; see
//! [`code_of`] and [`from_code`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::AggregationBinding;
use crate::hierarchy::{ExpertModel, FactorNode, LeafAnswers, Metadata, ModelSpecTree};
use crate::lattice::{Lattice, ValueScale};

pub const EXPERT: &str = "fisma-doctrine";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FismaError {
    #[error("no items to combine")]
    Empty,
    #[error("impact code {0} is outside 1..=3")]
    BadCode(usize),
    #[error("objective level {0} is outside 0..=3")]
    BadLevel(usize),
}

pub fn impact_scale() -> ValueScale {
    ValueScale::new(["low", "medium", "high"]).expect("static labels")
}

/// Objective levels including "not applicable".
pub fn objective_scale() -> ValueScale {
    ValueScale::new(["NA", "LOW", "MODERATE", "HIGH"]).expect("static labels")
}

pub fn code_of(value: usize) -> usize {
    value + 1
}

pub fn from_code(code: usize) -> Result<usize, FismaError> {
    match code {
        1..=3 => Ok(code - 1),
        other => Err(FismaError::BadCode(other)),
    }
}

fn leaf(id: &str, prompt: &str) -> FactorNode {
    FactorNode::new(id, prompt).with_scale(impact_scale())
}

fn branch(id: &str, prompt: &str, children: Vec<FactorNode>) -> FactorNode {
    leaf(id, prompt).with_children(children).with_aggregation(AggregationBinding::Max)
}

/// Spec tree `F1(G1(x11, x12), G2(x21, x22), x3)` with max at every
/// internal node.
pub fn fisma_spec() -> ModelSpecTree {
    let root = branch(
        "F1",
        "What is the overall security impact level of the system?",
        vec![
            branch(
                "G1",
                "How confidential is the system's data?",
                vec![
                    leaf("x11", "Are there secrets or private information that you need to protect?"),
                    leaf(
                        "x12",
                        "Is there personal identifiable information (PII), contract data, or other special kinds of data?",
                    ),
                ],
            ),
            branch(
                "G2",
                "What is the importance of the system's integrity?",
                vec![
                    leaf("x21", "What would be the impacts of the system getting defaced?"),
                    leaf("x22", "What could happen if the data was altered?"),
                ],
            ),
            leaf("x3", "How important is the availability of the data?"),
        ],
    );
    let metadata = Metadata {
        title: Some("Security impact categorization".into()),
        author: None,
        version: Some("1".into()),
    };
    ModelSpecTree::new(root, metadata).expect("preset ids are unique")
}

pub fn build_fisma_model() -> ExpertModel {
    ExpertModel::new(fisma_spec(), EXPERT).expect("preset is fully bound")
}

/// Leaf ids in the order the preset lists them.
pub const LEAVES: [&str; 5] = ["x11", "x12", "x21", "x22", "x3"];

/// Leaf answers from impact codes (1..=3) in [`LEAVES`] order.
pub fn answers_from_codes(codes: [usize; 5]) -> Result<LeafAnswers, FismaError> {
    LEAVES.iter().zip(codes).map(|(id, c)| Ok((id.to_string(), from_code(c)?))).collect()
}

/// Leaf scenarios of the preset: one per combination of the five answers.
pub fn leaf_space() -> Lattice {
    Lattice::new(vec![impact_scale(); LEAVES.len()]).expect("static lattice")
}

/// Scenario count when the two groups and the availability answer are
/// elicited as unconstrained tables: every (children, value) pair of a
/// group is a scenario, so 27 * 27 * 3.
pub fn table_model_combinations() -> u64 {
    let k = impact_scale().size() as u64;
    let group = k * k * k;
    group * group * k
}

/// Levels of the three security objectives, on [`objective_scale`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityObjectiveTriple {
    pub confidentiality: usize,
    pub integrity: usize,
    pub availability: usize,
}

impl SecurityObjectiveTriple {
    pub fn new(confidentiality: usize, integrity: usize, availability: usize) -> Result<Self, FismaError> {
        for v in [confidentiality, integrity, availability] {
            if v > 3 {
                return Err(FismaError::BadLevel(v));
            }
        }
        Ok(Self { confidentiality, integrity, availability })
    }

    /// The item's impact: the highest of its three levels.
    pub fn impact(&self) -> usize {
        self.confidentiality.max(self.integrity).max(self.availability)
    }
}

/// Highest item impact.
pub fn total_impact(items: &[SecurityObjectiveTriple]) -> Result<usize, FismaError> {
    items.iter().map(SecurityObjectiveTriple::impact).max().ok_or(FismaError::Empty)
}

/// Named information types with their objective levels.
pub fn classification_fixture() -> Vec<(&'static str, SecurityObjectiveTriple)> {
    let t = |c, i, a| SecurityObjectiveTriple::new(c, i, a).expect("fixture levels are in range");
    vec![
        ("public information", t(0, 2, 2)),
        ("investigative information", t(3, 2, 2)),
        ("administrative information", t(1, 1, 1)),
    ]
}

/// One item of the scripted impact dialog: factor presence levels and the
/// impact the expert stated, all as codes (1..=3).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogItem {
    pub item: String,
    pub factors: Vec<String>,
    pub levels: Vec<usize>,
    pub stated_impact: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactDialog {
    pub items: Vec<DialogItem>,
    pub stated_total: usize,
}

pub fn impact_dialog() -> ImpactDialog {
    let item = |name: &str, factors: &[&str], levels: &[usize], stated: usize| DialogItem {
        item: name.into(),
        factors: factors.iter().map(|f| f.to_string()).collect(),
        levels: levels.to_vec(),
        stated_impact: stated,
    };
    ImpactDialog {
        items: vec![
            item("A", &["y1", "y2"], &[2, 1], 2),
            item("B", &["y3", "y4"], &[3, 2], 2),
            item("C", &["y5", "y6", "y7", "y8"], &[1, 1, 3, 3], 3),
        ],
        stated_total: 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{evaluate, EvalPolicy};

    #[test]
    fn worked_example_is_high() {
        let model = build_fisma_model();
        let ev = evaluate(&model, &answers_from_codes([1, 2, 3, 1, 2]).unwrap(), EvalPolicy::Full).unwrap();
        assert_eq!(code_of(ev.value), 3);
        assert_eq!(ev.label, "high");
        let low = evaluate(&model, &answers_from_codes([1; 5]).unwrap(), EvalPolicy::Full).unwrap();
        assert_eq!(code_of(low.value), 1);
    }

    #[test]
    fn counts() {
        assert_eq!(leaf_space().point_count(), 243);
        assert_eq!(table_model_combinations(), 2187);
    }

    #[test]
    fn objective_impacts() {
        let fx = classification_fixture();
        assert_eq!(fx[0].1.impact(), 2);
        assert_eq!(fx[2].1.impact(), 1);
        assert_eq!(total_impact(&fx.iter().map(|f| f.1).collect::<Vec<_>>()), Ok(3));
        assert_eq!(total_impact(&[]), Err(FismaError::Empty));
        assert_eq!(SecurityObjectiveTriple::new(4, 0, 0), Err(FismaError::BadLevel(4)));
    }

    #[test]
    fn dialog_total_is_max_of_items() {
        let d = impact_dialog();
        let stated: Vec<usize> = d.items.iter().map(|i| i.stated_impact).collect();
        assert_eq!(stated, vec![2, 2, 3]);
        assert_eq!(stated.iter().max().copied(), Some(d.stated_total));
    }
}
