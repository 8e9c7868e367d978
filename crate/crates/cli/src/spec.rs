use std::collections::VecDeque;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::json;

use emm_core::aggregation::{AggregationBinding, TiePolicy};
use emm_core::hierarchy::{ExpertModel, FactorNode, Metadata, ModelSpecTree, Severity, MAX_FAN_OUT};
use emm_core::lattice::ValueScale;
use emm_core::persistence::{save_model, save_spec, validate_document, SpecForm};
use emm_core::Error;

use crate::io::{load_doc, print_json, read, write};

#[derive(Args)]
pub struct NewArgs {
    /// Root question.
    #[arg(long, required_unless_present = "interactive")]
    root: Option<String>,
    /// Question under the root (repeatable).
    #[arg(long = "child")]
    children: Vec<String>,
    #[arg(long)]
    title: Option<String>,
    /// Read the tree breadth-first from stdin: the root, then each node's
    /// children one per line, a blank line ending each list.
    #[arg(long)]
    interactive: bool,
    #[arg(long, default_value = "plain", value_parser = crate::parse_form)]
    form: SpecForm,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct AddArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Parent node id.
    #[arg(long)]
    parent: String,
    #[arg(long)]
    prompt: String,
    /// New node id (default: next free qN).
    #[arg(long)]
    id: Option<String>,
    /// Comma-separated value labels, lowest first (default: no,yes).
    #[arg(long)]
    scale: Option<String>,
    /// Output file (default: rewrite the input).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BindArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    node: String,
    /// `majority[:optimistic|pessimistic]`, `max`, `weighted:<w1,w2,..>@<threshold>`,
    /// `critical:<id,..>[/<fallback rule>]` or `none`.
    #[arg(long)]
    rule: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct FreezeArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    expert: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct ValidateArgs {
    file: PathBuf,
}

fn emit(tree: &ModelSpecTree, form: SpecForm, out: Option<&Path>, json: bool) -> Result<(), Error> {
    let bytes = save_spec(tree, form).map_err(|e| match e {
        emm_core::persistence::PersistenceError::Lossy(what) => {
            Error::Usage(format!("plain form cannot hold {}; use --form extended", what.join(", ")))
        }
        other => other.into(),
    })?;
    match out {
        Some(p) => {
            write(p, &bytes)?;
            if json {
                print_json(&json!({ "written": p, "nodes": tree.nodes().len() }));
            } else {
                println!("wrote {} ({} nodes)", p.display(), tree.nodes().len());
            }
        }
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(())
}

fn next_id(tree: &ModelSpecTree) -> String {
    (tree.nodes().len()..).map(|i| format!("q{i}")).find(|id| tree.find(id).is_none()).expect("unbounded ids")
}

pub fn new(a: NewArgs, json: bool) -> Result<(), Error> {
    let tree = if a.interactive {
        interactive(std::io::stdin().lock(), a.title)?
    } else {
        let root = a.root.expect("clap requires --root");
        let mut tree = ModelSpecTree::new(FactorNode::new("q0", root), Metadata { title: a.title, ..Default::default() })?;
        for prompt in a.children {
            let id = next_id(&tree);
            tree.add_factor("q0", FactorNode::new(id, prompt))?;
        }
        tree
    };
    emit(&tree, a.form, a.out.as_deref(), json)
}

fn interactive(input: impl BufRead, title: Option<String>) -> Result<ModelSpecTree, Error> {
    let mut lines = input.lines();
    let mut next = || -> Result<Option<String>, Error> {
        match lines.next() {
            Some(l) => Ok(Some(l.map_err(|e| Error::Io(e.to_string()))?.trim().to_string())),
            None => Ok(None),
        }
    };
    eprintln!("Root question:");
    let root = next()?.filter(|s| !s.is_empty()).ok_or_else(|| Error::Usage("no root question given".into()))?;
    let mut tree = ModelSpecTree::new(FactorNode::new("q0", root), Metadata { title, ..Default::default() })?;
    let mut queue = VecDeque::from(["q0".to_string()]);
    'outer: while let Some(parent) = queue.pop_front() {
        let prompt = tree.find(&parent).expect("queued ids exist").prompt.clone();
        eprintln!("Questions under {prompt:?} (blank line to finish):");
        let mut count = 0;
        loop {
            let Some(line) = next()? else { break 'outer };
            if line.is_empty() {
                break;
            }
            let id = next_id(&tree);
            tree.add_factor(&parent, FactorNode::new(id.clone(), line))?;
            queue.push_back(id);
            count += 1;
            if count == MAX_FAN_OUT + 1 {
                eprintln!("note: more than {MAX_FAN_OUT} questions here; consider grouping them");
            }
        }
    }
    Ok(tree)
}

pub fn add(a: AddArgs, json: bool) -> Result<(), Error> {
    let doc = load_doc(&a.spec)?;
    let mut tree = doc.tree;
    let mut node = FactorNode::new(a.id.unwrap_or_else(|| next_id(&tree)), a.prompt);
    if let Some(s) = a.scale {
        node = node.with_scale(ValueScale::new(s.split(',').map(str::trim))?);
    }
    tree.add_factor(&a.parent, node)?;
    emit(&tree, doc.form, Some(a.out.as_deref().unwrap_or(&a.spec)), json)
}

pub fn parse_rule(s: &str) -> Result<Option<AggregationBinding>, Error> {
    let bad = |why: &str| Error::Usage(format!("rule {s:?}: {why}"));
    let (head, arg) = s.split_once(':').map_or((s, None), |(h, a)| (h, Some(a)));
    Ok(Some(match (head, arg) {
        ("none", None) => return Ok(None),
        ("max", None) => AggregationBinding::Max,
        ("majority", None | Some("pessimistic")) => AggregationBinding::Majority { tie: TiePolicy::Pessimistic },
        ("majority", Some("optimistic")) => AggregationBinding::Majority { tie: TiePolicy::Optimistic },
        ("weighted", Some(rest)) => {
            let (ws, t) = rest.split_once('@').ok_or_else(|| bad("expected weights@threshold"))?;
            let weights = ws
                .split(',')
                .map(|w| w.trim().parse::<f64>().map_err(|_| bad("weights must be numbers")))
                .collect::<Result<Vec<_>, _>>()?;
            let threshold = t.trim().parse::<f64>().map_err(|_| bad("threshold must be a number"))?;
            AggregationBinding::weighted(weights, threshold)?
        }
        ("critical", Some(rest)) => {
            let (ids, fallback) = rest.split_once('/').map_or((rest, None), |(i, f)| (i, Some(f)));
            let fallback = match fallback {
                Some(f) => parse_rule(f)?.ok_or_else(|| bad("fallback cannot be none"))?,
                None => AggregationBinding::majority(),
            };
            AggregationBinding::critical(ids.split(',').map(|i| i.trim().to_string()).collect(), fallback)?
        }
        _ => return Err(bad("unknown rule")),
    }))
}

pub fn bind(a: BindArgs, json: bool) -> Result<(), Error> {
    let doc = load_doc(&a.spec)?;
    let mut tree = doc.tree;
    let binding = parse_rule(&a.rule)?;
    if let Some(b) = &binding {
        let node = tree.find(&a.node).ok_or_else(|| Error::NotFound(format!("no node {:?}", a.node)))?;
        b.validate(node)?;
    }
    tree.bind(&a.node, binding)?;
    // Bindings need the extended form.
    emit(&tree, SpecForm::Extended, Some(a.out.as_deref().unwrap_or(&a.spec)), json)
}

pub fn freeze(a: FreezeArgs, json: bool) -> Result<(), Error> {
    let tree = load_doc(&a.spec)?.tree;
    let model = ExpertModel::new(tree, a.expert)?;
    write(&a.out, &save_model(&model))?;
    if json {
        print_json(&json!({ "written": a.out, "expert": model.expert() }));
    } else {
        println!("wrote model for {} to {}", model.expert(), a.out.display());
    }
    Ok(())
}

pub fn validate(a: ValidateArgs, json: bool) -> Result<(), Error> {
    let bytes = read(&a.file)?;
    let report = validate_document(&bytes);
    if json {
        print_json(&serde_json::to_value(&report).expect("reports serialize"));
    } else {
        for i in &report.issues {
            let sev = match i.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            let at = i.node.as_deref().map(|n| format!(" [{n}]")).unwrap_or_default();
            println!("{sev}{at}: {}", i.message);
        }
        let (e, w) = (report.errors().count(), report.warnings().count());
        println!("{}: {e} error(s), {w} warning(s)", a.file.display());
    }
    if report.has_errors() {
        return Err(Error::Persistence(emm_core::persistence::PersistenceError::Schema {
            path: a.file.display().to_string(),
            message: format!("{} validation error(s)", report.errors().count()),
        }));
    }
    Ok(())
}
