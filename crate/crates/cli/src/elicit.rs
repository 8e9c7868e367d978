use std::io::{BufRead, Write};

use serde_json::json;

use emm_core::aggregation::AggregationBinding;
use emm_core::elicitation::{start_session, Counts, ResolveStrategy, Session, SessionError, SessionStatus};
use emm_core::hierarchy::ExpertModel;
use emm_core::oracle::{run_session, HttpTransport, HumanOracle, LlmOracle, Oracle, RunError, ScriptedOracle};
use emm_core::persistence::{save_extended, save_model, write_log, DocumentKind};
use emm_core::scheduler::Strategy;
use emm_core::Error;

use crate::io::{load_doc, print_json, read, write};
use crate::ElicitArgs;

enum OracleChoice {
    Scripted(ScriptedOracle),
    Human,
    Llm,
}

fn choose(spec: &str) -> Result<OracleChoice, Error> {
    match spec.split_once(':') {
        Some(("scripted", arg)) => {
            let path = std::path::Path::new(arg);
            let oracle = if path.is_file() { ScriptedOracle::from_json(&read(path)?)? } else { arg.parse()? };
            Ok(OracleChoice::Scripted(oracle))
        }
        None if spec == "human" => Ok(OracleChoice::Human),
        None if spec == "llm" => Ok(OracleChoice::Llm),
        _ => Err(Error::Usage(format!("unknown oracle {spec:?} (expected scripted:<file|rule>, human or llm)"))),
    }
}

fn progress(c: &Counts) -> String {
    format!("asked {}, inferred {}, remaining {}", c.asked, c.inferred, c.remaining)
}

/// Asks the person at the terminal how to settle a contradiction.
fn ask_resolution(session: &Session) -> Result<ResolveStrategy, Error> {
    let conflict = session.conflict().expect("conflicted sessions carry a conflict");
    let mut err = std::io::stderr();
    let mut input = std::io::stdin().lock();
    loop {
        write!(err, "{conflict}\nkeep the earlier answers (reject) or the new one (revise)? [reject/revise] > ")?;
        err.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Err(Error::Session(SessionError::Conflict(conflict.clone())));
        }
        if let Ok(s) = line.trim().parse() {
            return Ok(s);
        }
    }
}

pub fn run(a: ElicitArgs, json: bool) -> Result<(), Error> {
    let doc = load_doc(&a.spec)?;
    let node = doc.tree.find(&a.node).ok_or_else(|| Error::NotFound(format!("no node {:?}", a.node)))?;
    let strategy = match a.strategy {
        Some(s) => s,
        None if node.children.iter().all(|c| c.scale.is_binary()) && node.scale.is_binary() => Strategy::Hansel,
        None => Strategy::Greedy,
    };
    let mut session = start_session(node, strategy, &a.expert)?;

    let choice = choose(&a.oracle)?;
    let interactive = matches!(choice, OracleChoice::Human);
    let binding = match choice {
        OracleChoice::Llm => Some(emm_core::oracle::LlmBinding { answer_scenarios: true, ..a.llm.binding()? }),
        _ => None,
    };
    let transport = binding.as_ref().map(HttpTransport::new);
    let mut oracle: Box<dyn Oracle + '_> = match choice {
        OracleChoice::Scripted(s) => Box::new(s),
        OracleChoice::Human => Box::new(HumanOracle::new(std::io::stdin().lock(), std::io::stderr())),
        OracleChoice::Llm => Box::new(LlmOracle::new(
            binding.clone().expect("set for llm"),
            transport.as_ref().expect("set for llm"),
        )),
    };

    let mut budget = a.max_questions;
    loop {
        let before = session.counts().asked;
        let result = run_session(&mut session, oracle.as_mut(), budget, |_, _, c| eprintln!("{}", progress(c)));
        if let Some(b) = budget.as_mut() {
            *b = b.saturating_sub(session.counts().asked.saturating_sub(before));
        }
        match result {
            Ok(_) => break,
            Err(RunError::Session(SessionError::Conflict(_))) if interactive => {
                let strategy = ask_resolution(&session)?;
                session.resolve_conflict(strategy)?;
            }
            Err(e) => {
                if let Some(path) = &a.log {
                    write(path, write_log(session.log()).as_bytes())?;
                }
                return Err(e.into());
            }
        }
    }

    let finished = session.finalize(a.policy);
    if let Some(path) = &a.log {
        write(path, write_log(session.log()).as_bytes())?;
    }
    let table = finished?;
    let counts = session.counts();

    let mut written = None;
    if let Some(out) = &a.out {
        let mut tree = doc.tree.clone();
        tree.bind(&a.node, Some(AggregationBinding::Table(table)))?;
        let bytes = match ExpertModel::new(tree.clone(), a.expert.clone()) {
            Ok(model) if doc.kind == DocumentKind::Model || doc.expert.is_some() => save_model(&model),
            _ => save_extended(&tree),
        };
        write(out, &bytes)?;
        written = Some(out.clone());
    }

    if json {
        print_json(&json!({
            "session_id": session.id(),
            "node_id": a.node,
            "strategy": strategy,
            "status": session.status(),
            "asked": counts.asked,
            "inferred": counts.inferred,
            "remaining": counts.remaining,
            "total": counts.total,
            "written": written,
        }));
    } else {
        let status = match session.status() {
            SessionStatus::Complete => "complete".to_string(),
            other => format!("{other}, filled by policy"),
        };
        println!("{} ({} scenarios, {status})", progress(&counts), counts.total);
        if let Some(p) = written {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}
