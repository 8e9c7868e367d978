use std::path::Path;

use serde_json::json;

use emm_core::aggregation::{disagreement_points, group_aggregate, GroupRule};
use emm_core::fisma::{self, answers_from_codes, build_fisma_model, code_of};
use emm_core::hierarchy::{evaluate, explain, EvalPolicy, ExpertModel};
use emm_core::oracle::{llm_generate_factors, llm_generate_hierarchy, parse_factor_list, LlmBinding};
use emm_core::persistence::{export_chain_layout, render_svg, save_spec, SpecForm};
use emm_core::Error;

use crate::io::{load_model_file, parse_answers, print_json, print_trace, read, write};
use crate::{DiffArgs, EvalArgs, GroupArgs, VizArgs};

pub fn eval(a: EvalArgs, json: bool) -> Result<(), Error> {
    let model = load_model_file(&a.model)?;
    let answers = parse_answers(&a.answers, model.tree())?;
    let ev = evaluate(&model, &answers, a.policy)?;
    let trace = match a.explain_depth {
        Some(d) => Some(explain(&model, &answers, a.policy, d)?),
        None => None,
    };
    if json {
        print_json(&json!({ "value": ev.value, "label": ev.label, "trace": trace }));
    } else {
        println!("{}: {}", model.tree().root().prompt, ev.label);
        if let Some(t) = trace {
            print_trace(&t.root, 2);
        }
    }
    Ok(())
}

pub fn group(a: GroupArgs, json: bool) -> Result<(), Error> {
    let rule: GroupRule = a.rule.parse().map_err(Error::Usage)?;
    let models = a.models.iter().map(|p| load_model_file(p)).collect::<Result<Vec<_>, _>>()?;
    let answers = parse_answers(&a.answers, models[0].tree())?;
    let verdict = group_aggregate(&models, &answers, rule)?;
    let root = models[0].tree().root();
    let label = |v: usize| root.scale.label(v).unwrap_or("?").to_string();
    if json {
        print_json(&json!({
            "per_expert": verdict.per_expert.iter().map(|e| json!({
                "expert": e.expert, "value": e.value, "label": label(e.value),
            })).collect::<Vec<_>>(),
            "aggregate": verdict.aggregate,
            "label": verdict.aggregate.map(label),
            "disagreement": verdict.disagreement,
            "tie": verdict.tie,
        }));
    } else {
        for e in &verdict.per_expert {
            println!("{}: {}", e.expert, label(e.value));
        }
        match verdict.aggregate {
            Some(v) => println!("aggregate: {}", label(v)),
            None => println!("aggregate: tie"),
        }
        if verdict.disagreement {
            println!("experts disagree");
        }
    }
    Ok(())
}

pub fn diff(a: DiffArgs, json: bool) -> Result<(), Error> {
    let x = load_model_file(&a.models[0])?;
    let y = load_model_file(&a.models[1])?;
    let points = disagreement_points(&x, &y, &a.node)?;
    let node = x.tree().find(&a.node).expect("disagreement_points checked the node");
    if json {
        print_json(&json!({ "node_id": a.node, "count": points.len(), "points": points }));
        return Ok(());
    }
    println!("{} vs {} on {:?}: {} scenario(s) differ", x.expert(), y.expert(), node.prompt, points.len());
    for p in &points {
        let parts: Vec<String> = node
            .children
            .iter()
            .zip(p.coords())
            .map(|(c, &v)| format!("{}={}", c.id, c.scale.label(v).unwrap_or("?")))
            .collect();
        println!("  {p}  {}", parts.join(", "));
    }
    Ok(())
}

pub fn viz(a: VizArgs, json: bool) -> Result<(), Error> {
    let model = load_model_file(&a.model)?;
    let layout = export_chain_layout(&model, &a.node)?;
    write(&a.out, render_svg(&layout).as_bytes())?;
    if json {
        print_json(&json!({ "written": a.out, "chains": layout.chains.len(), "dimension": layout.dimension }));
    } else {
        println!("wrote {} ({} chains over {} factors)", a.out.display(), layout.chains.len(), layout.dimension);
    }
    Ok(())
}

const DEMO_CODES: [usize; 5] = [1, 2, 3, 1, 2];

pub fn fisma_demo(json: bool) -> Result<(), Error> {
    let model: ExpertModel = build_fisma_model();
    let answers = answers_from_codes(DEMO_CODES)?;
    let ev = evaluate(&model, &answers, EvalPolicy::Full)?;
    let classified: Vec<_> = fisma::classification_fixture()
        .into_iter()
        .map(|(name, t)| json!({ "item": name, "levels": t, "impact": t.impact() }))
        .collect();
    if json {
        print_json(&json!({
            "answers": fisma::LEAVES.iter().zip(DEMO_CODES).map(|(l, c)| (l.to_string(), c)).collect::<std::collections::BTreeMap<_, _>>(),
            "value": ev.value,
            "code": code_of(ev.value),
            "label": ev.label,
            "trace": ev.trace,
            "classification": classified,
        }));
        return Ok(());
    }
    let given: Vec<String> = fisma::LEAVES.iter().zip(DEMO_CODES).map(|(l, c)| format!("{l}={c}")).collect();
    println!("answers (codes 1..3): {}", given.join(" "));
    print_trace(&ev.trace.root, 0);
    println!("result: {} (code {})", ev.label, code_of(ev.value));
    Ok(())
}

pub fn llm_factors(decision: &str, binding: &LlmBinding, json: bool) -> Result<(), Error> {
    let factors = llm_generate_factors(binding, None, decision)?;
    if json {
        print_json(&json!({ "decision": decision, "factors": factors }));
    } else {
        for f in &factors {
            println!("{f}");
        }
    }
    Ok(())
}

fn load_factors(path: &Path) -> Result<Vec<String>, Error> {
    let bytes = read(path)?;
    if let Ok(list) = serde_json::from_slice::<Vec<String>>(&bytes) {
        return Ok(list);
    }
    Ok(parse_factor_list(&String::from_utf8_lossy(&bytes))?)
}

pub fn llm_hierarchy(factors: &Path, out: Option<&Path>, binding: &LlmBinding, json: bool) -> Result<(), Error> {
    let factors = load_factors(factors)?;
    let draft = llm_generate_hierarchy(binding, None, &factors)?;
    let bytes = save_spec(&draft.tree, SpecForm::Plain)?;
    for w in draft.report.warnings() {
        eprintln!("warning: {}", w.message);
    }
    match out {
        Some(p) => {
            write(p, &bytes)?;
            if json {
                print_json(&json!({ "written": p, "nodes": draft.tree.nodes().len(), "report": draft.report }));
            } else {
                println!("wrote {} ({} nodes); review it before eliciting", p.display(), draft.tree.nodes().len());
            }
        }
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(())
}
