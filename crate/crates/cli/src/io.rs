use std::path::Path;

use serde_json::Value;

use emm_core::hierarchy::{ExpertModel, LeafAnswers, ModelSpecTree, TraceNode, ValueSource};
use emm_core::persistence::{load_document, load_model, LoadedDocument};
use emm_core::Error;

pub fn read(path: &Path) -> Result<Vec<u8>, Error> {
    std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    std::fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn located(path: &Path, e: impl Into<Error>) -> Error {
    match e.into() {
        Error::Persistence(p) => Error::Persistence(match p {
            emm_core::persistence::PersistenceError::Schema { path: at, message } => {
                emm_core::persistence::PersistenceError::Schema { path: format!("{}: {at}", path.display()), message }
            }
            other => other,
        }),
        other => other,
    }
}

pub fn load_doc(path: &Path) -> Result<LoadedDocument, Error> {
    load_document(&read(path)?).map_err(|e| located(path, e))
}

pub fn load_model_file(path: &Path) -> Result<ExpertModel, Error> {
    load_model(&read(path)?).map_err(|e| located(path, e))
}

pub fn print_json(value: &Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("values serialize"));
}

/// Leaf answers from a JSON file, an inline JSON object, or
/// `leaf=value,...`. Values may be labels or indices.
pub fn parse_answers(input: &str, tree: &ModelSpecTree) -> Result<LeafAnswers, Error> {
    let path = Path::new(input);
    let raw: Vec<(String, String)> = if path.is_file() {
        pairs_from_json(&read(path)?)?
    } else if input.trim_start().starts_with('{') {
        pairs_from_json(input.as_bytes())?
    } else {
        input
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|kv| {
                kv.split_once('=')
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                    .ok_or_else(|| Error::Usage(format!("answer {kv:?} is not leaf=value")))
            })
            .collect::<Result<_, _>>()?
    };
    let mut out = LeafAnswers::new();
    for (id, value) in raw {
        let node = tree.find(&id).ok_or_else(|| Error::NotFound(format!("answers: unknown node {id:?}")))?;
        let v = node.scale.parse_value(&value).ok_or_else(|| {
            Error::Usage(format!("answers: {value:?} is not a value of {id:?} (one of {:?})", node.scale.labels()))
        })?;
        out.insert(id, v);
    }
    Ok(out)
}

fn pairs_from_json(bytes: &[u8]) -> Result<Vec<(String, String)>, Error> {
    let v: serde_json::Map<String, Value> =
        serde_json::from_slice(bytes).map_err(|e| Error::Usage(format!("answers: {e}")))?;
    v.into_iter()
        .map(|(k, v)| match v {
            Value::String(s) => Ok((k, s)),
            Value::Number(n) => Ok((k, n.to_string())),
            other => Err(Error::Usage(format!("answers: {k:?} has non-scalar value {other}"))),
        })
        .collect()
}

pub fn print_trace(node: &TraceNode, indent: usize) {
    let source = match &node.source {
        ValueSource::Leaf => "answer".to_string(),
        ValueSource::Rule { rule } => rule.clone(),
        ValueSource::Gated { gate } => format!("gated at {gate}, details skipped"),
        ValueSource::ShortCircuit { by, group } => format!("stopped by {by} ({group})"),
    };
    println!("{:indent$}{} [{}] = {}  ({source})", "", node.prompt, node.node, node.label);
    for c in &node.children {
        print_trace(c, indent + 2);
    }
    for p in &node.pruned {
        println!("{:w$}{} [{}] skipped: {} answered {}", "", p.prompt, p.node, p.gated_by, p.gating_value, w = indent + 2);
    }
}
