mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{all_points, monotone_functions, point};
use emm_core::aggregation::{
    disagreement_points, group_aggregate, AggregationBinding, GroupRule, TiePolicy,
};
use emm_core::elicitation::{start_session, CompletionPolicy};
use emm_core::hierarchy::{
    evaluate, explain, validate_spec, EvalPolicy, ExpertModel, FactorNode, HierarchyError, IssueKind,
    LeafAnswers, Metadata, ModelSpecTree, TraceNode, ValueSource,
};
use emm_core::oracle::{run_session, ScriptedOracle};
use emm_core::persistence::{load_model, load_spec};
use emm_core::scheduler::Strategy;

const RFP_SPEC: &[u8] = include_bytes!("../assets/fixtures/rfp_spec.json");
const GROUP: [&[u8]; 3] = [
    include_bytes!("../assets/fixtures/group_e1.json"),
    include_bytes!("../assets/fixtures/group_e2.json"),
    include_bytes!("../assets/fixtures/group_e3.json"),
];

fn rfp_model() -> ExpertModel {
    let mut tree = load_spec(RFP_SPEC).unwrap();
    let internal: Vec<String> = tree.nodes().iter().filter(|n| !n.is_leaf()).map(|n| n.id.clone()).collect();
    for id in internal {
        tree.bind(&id, Some(AggregationBinding::majority())).unwrap();
    }
    ExpertModel::new(tree, "E").unwrap()
}

#[test]
fn rfp_fixture_validates_with_only_unresolved_warnings() {
    let tree = load_spec(RFP_SPEC).unwrap();
    assert_eq!(tree.nodes().len(), 18);
    assert_eq!(tree.leaves().len(), 13);
    assert_eq!(tree.branches().len(), 4);
    let report = validate_spec(&tree);
    assert!(!report.has_errors());
    assert_eq!(report.warnings().count(), 5);
    assert!(report.warnings().all(|i| i.kind == IssueKind::Unresolved));
    assert!(ExpertModel::new(tree, "E").is_err());
}

#[test]
fn rfp_explain_depth_one() {
    let model = rfp_model();
    let answers: LeafAnswers = model.tree().leaves().iter().map(|l| (l.id.clone(), 1)).collect();
    let t = explain(&model, &answers, EvalPolicy::Full, 1).unwrap();
    assert_eq!(t.value(), 1);
    let branch_ids: Vec<&str> = model.tree().branches().iter().map(|b| b.id.as_str()).collect();
    let shown: Vec<&str> = t.root.children.iter().map(|c| c.node.as_str()).collect();
    assert_eq!(&shown[..4], &branch_ids[..]);
    assert!(t.root.children.iter().all(|c| c.children.is_empty()));
    assert_eq!(t.visited().len(), 1 + model.tree().root().children.len());
    assert!(matches!(
        explain(&model, &answers, EvalPolicy::Full, 3),
        Err(HierarchyError::InvalidDepth { depth: 3, height: 2 })
    ));
    assert_eq!(explain(&model, &answers, EvalPolicy::Full, 0).unwrap().visited().len(), 1);
}

#[test]
fn add_partnership_factor() {
    let mut tree = load_spec(RFP_SPEC).unwrap();
    tree.add_factor(&tree.root().id.clone(), FactorNode::new("partners", "Do we have partners?")).unwrap();
    tree.add_factor("partners", FactorNode::new("p1", "Have you established a relationship with the potential partners?"))
        .unwrap();
    assert_eq!(tree.find("partners").unwrap().children.len(), 1);
    assert!(matches!(
        tree.add_factor("partners", FactorNode::new("p2", "Have you established a relationship with the potential partners?")),
        Err(HierarchyError::DuplicatePrompt { .. })
    ));
    assert!(matches!(tree.add_factor("nope", FactorNode::new("p3", "?")), Err(HierarchyError::UnknownNode(_))));
}

#[test]
fn random_adds_keep_a_tree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut tree = ModelSpecTree::new(FactorNode::new("root", "Root?"), Metadata::default()).unwrap();
    for i in 0..1000 {
        let ids: Vec<String> = tree.nodes().iter().map(|n| n.id.clone()).collect();
        let parent = &ids[rng.random_range(0..ids.len())];
        let id = if rng.random_bool(0.05) { ids[rng.random_range(0..ids.len())].clone() } else { format!("n{i}") };
        let before = tree.nodes().len();
        match tree.add_factor(parent, FactorNode::new(id.clone(), format!("Q{i}?"))) {
            Ok(()) => assert_eq!(tree.nodes().len(), before + 1),
            Err(HierarchyError::DuplicateId(_)) => assert!(ids.contains(&id)),
            Err(e) => panic!("{e}"),
        }
        if i % 100 != 99 {
            continue;
        }
        let nodes = tree.nodes();
        let mut seen = std::collections::HashSet::new();
        assert!(nodes.iter().all(|n| seen.insert(n.id.as_str())));
        for n in &nodes {
            if n.id != "root" {
                assert!(tree.parent_of(&n.id).is_some());
            }
        }
    }
    assert!(!validate_spec(&tree).has_errors());
    assert!(validate_spec(&tree).of_kind(IssueKind::FanOut).count() > 0);
}

#[test]
fn six_children_trigger_fan_out_warning() {
    let root = FactorNode::new("r", "R?")
        .with_children((0..6).map(|i| FactorNode::new(format!("c{i}"), format!("C{i}?"))).collect())
        .with_aggregation(AggregationBinding::majority());
    let tree = ModelSpecTree::new(root, Metadata::default()).unwrap();
    let report = validate_spec(&tree);
    assert!(!report.has_errors());
    assert_eq!(report.of_kind(IssueKind::FanOut).count(), 1);
    ExpertModel::new(tree, "E").unwrap();
}

/// Two-level tree with gates on every group node.
fn gated_model(groups: usize, per_group: usize, short_circuit: bool) -> ExpertModel {
    let kids = (0..groups)
        .map(|g| {
            let leaves = (0..per_group).map(|j| FactorNode::new(format!("g{g}l{j}"), format!("Leaf {g}.{j}?"))).collect();
            FactorNode::new(format!("g{g}"), format!("Group {g}?"))
                .with_children(leaves)
                .with_aggregation(AggregationBinding::Max)
                .with_gate(0, short_circuit.then_some("sc"))
        })
        .collect();
    let root = FactorNode::new("root", "Go?").with_children(kids).with_aggregation(AggregationBinding::majority());
    ExpertModel::new(ModelSpecTree::new(root, Metadata::default()).unwrap(), "E").unwrap()
}

fn leaf_answers(model: &ExpertModel, bits: usize) -> LeafAnswers {
    model.tree().leaves().iter().enumerate().map(|(i, l)| (l.id.clone(), (bits >> i) & 1)).collect()
}

#[test]
fn strict_and_full_agree_without_direct_gate_answers() {
    let model = gated_model(3, 3, false);
    for bits in 0..(1 << 9) {
        let answers = leaf_answers(&model, bits);
        let full = evaluate(&model, &answers, EvalPolicy::Full).unwrap();
        let strict = evaluate(&model, &answers, EvalPolicy::StrictGate).unwrap();
        assert_eq!(full, strict);
    }
}

#[test]
fn generalized_no_prunes_detail_leaves() {
    let model = gated_model(2, 2, false);
    let mut answers = leaf_answers(&model, 0b1111);
    answers.insert("g0".into(), 0);
    let strict = evaluate(&model, &answers, EvalPolicy::StrictGate).unwrap();
    let visited = strict.trace.visited();
    assert!(!visited.contains(&"g0l0") && !visited.contains(&"g0l1"));
    assert!(visited.contains(&"g1l0"));
    let pruned: Vec<&str> = strict.trace.pruned().iter().map(|p| p.node.as_str()).collect();
    assert_eq!(pruned, ["g0l0", "g0l1"]);
    // Leaves are still required only where drilled.
    answers.remove("g0l0");
    assert!(evaluate(&model, &answers, EvalPolicy::StrictGate).is_ok());
    assert!(matches!(evaluate(&model, &answers, EvalPolicy::Full), Err(HierarchyError::MissingAnswer(_))));
}

#[test]
fn short_circuit_stops_later_siblings() {
    let model = gated_model(3, 1, true);
    let mut answers = leaf_answers(&model, 0b111);
    answers.insert("g0l0".into(), 0);
    let strict = evaluate(&model, &answers, EvalPolicy::StrictGate).unwrap();
    assert_eq!(strict.value, 0);
    assert!(matches!(strict.trace.root.source, ValueSource::ShortCircuit { ref by, .. } if by == "g0"));
    assert_eq!(strict.trace.pruned().len(), 2);
    assert_eq!(evaluate(&model, &answers, EvalPolicy::Full).unwrap().value, 1);
}

fn check_trace(model: &ExpertModel, t: &TraceNode) {
    let node = model.tree().find(&t.node).unwrap();
    assert_eq!(node.scale.label(t.value).unwrap(), t.label);
    if let ValueSource::Rule { .. } = t.source {
        let inputs: Vec<usize> = t.children.iter().map(|c| c.value).collect();
        let v = node.aggregation.as_ref().unwrap().evaluate(node, &inputs).unwrap();
        assert_eq!(v, t.value, "node {}", t.node);
    }
    for c in &t.children {
        check_trace(model, c);
    }
}

#[test]
fn traces_recompute_from_children() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = rfp_model();
    for _ in 0..200 {
        let answers: LeafAnswers = model.tree().leaves().iter().map(|l| (l.id.clone(), rng.random_range(0..2))).collect();
        let e = evaluate(&model, &answers, EvalPolicy::Full).unwrap();
        check_trace(&model, &e.trace.root);
    }
    let gated = gated_model(3, 2, true);
    for bits in 0..(1 << 6) {
        let e = evaluate(&gated, &leaf_answers(&gated, bits), EvalPolicy::StrictGate).unwrap();
        check_trace(&gated, &e.trace.root);
    }
}

#[test]
fn group_fixtures_give_majority_yes() {
    let models: Vec<ExpertModel> = GROUP.iter().map(|b| load_model(b).unwrap()).collect();
    let answers: LeafAnswers = [("a", 1), ("b", 0), ("c", 1)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let verdict = group_aggregate(&models, &answers, GroupRule::Majority).unwrap();
    let values: Vec<usize> = verdict.per_expert.iter().map(|e| e.value).collect();
    assert_eq!(values, [1, 0, 1]);
    assert_eq!(verdict.aggregate, Some(1));
    assert!(verdict.disagreement && !verdict.tie);
    let unanimous = group_aggregate(&models, &answers, GroupRule::Unanimity).unwrap();
    assert_eq!(unanimous.aggregate, Some(0));
    let split = group_aggregate(&models[..2], &answers, GroupRule::Majority).unwrap();
    assert!(split.tie && split.aggregate.is_none());
}

/// Majority with a tie policy, checked against counting on every 2^n input.
#[test]
fn majority_against_counting() {
    for n in 1..=5 {
        for code in 0..(1usize << n) {
            let xs: Vec<usize> = (0..n).map(|i| (code >> i) & 1).collect();
            let ones = xs.iter().sum::<usize>();
            for tie in [TiePolicy::Pessimistic, TiePolicy::Optimistic] {
                let want = match (2 * ones).cmp(&n) {
                    std::cmp::Ordering::Greater => 1,
                    std::cmp::Ordering::Less => 0,
                    std::cmp::Ordering::Equal => usize::from(tie == TiePolicy::Optimistic),
                };
                assert_eq!(emm_core::aggregation::eval_majority(&xs, tie).unwrap(), want);
            }
        }
    }
}

fn elicit_table(target: &[usize]) -> ExpertModel {
    let node = FactorNode::new("r", "R?").with_children(
        (0..3).map(|i| FactorNode::new(format!("c{i}"), format!("C{i}?"))).collect(),
    );
    let pts = all_points(&[2, 2, 2]);
    let mut s = start_session(&node, Strategy::Hansel, "E").unwrap();
    let mut oracle = ScriptedOracle::table(pts.iter().zip(target).map(|(p, &v)| (point(p), v)));
    run_session(&mut s, &mut oracle, None, |_, _, _| {}).unwrap();
    let table = s.finalize(CompletionPolicy::RequireComplete).unwrap();
    let tree = ModelSpecTree::new(node.with_aggregation(AggregationBinding::Table(table)), Metadata::default()).unwrap();
    ExpertModel::new(tree, "E").unwrap()
}

#[test]
fn elicited_tables_read_back_and_diff() {
    let pts = all_points(&[2, 2, 2]);
    for target in monotone_functions(&[2, 2, 2], 2) {
        let model = elicit_table(&target);
        for (p, &want) in pts.iter().zip(&target) {
            let answers: LeafAnswers = (0..3).map(|i| (format!("c{i}"), p[i])).collect();
            assert_eq!(evaluate(&model, &answers, EvalPolicy::Full).unwrap().value, want);
        }
    }
    // f = 1 iff the first factor holds, and a variant differing only at (1,0,0).
    let first: Vec<usize> = pts.iter().map(|p| p[0]).collect();
    let mut other = first.clone();
    let at = pts.iter().position(|p| p == &vec![1, 0, 0]).unwrap();
    other[at] = 0;
    let a = elicit_table(&first);
    let b = elicit_table(&other);
    assert_eq!(disagreement_points(&a, &b, "r").unwrap(), vec![point(&[1, 0, 0])]);
    assert!(disagreement_points(&a, &a, "r").unwrap().is_empty());
}
