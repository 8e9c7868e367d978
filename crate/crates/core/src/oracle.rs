//! Answer sources for elicitation (scripted fixtures, a person at a
//! terminal, an LLM) and LLM drafting of factor lists and hierarchies.
//!
//! LLM output is treated as an untrusted draft: factor lists are parsed
//! leniently, hierarchy drafts must cover every input factor exactly once as
//! a leaf, and offline mode answers from bundled fixtures without touching
//! the network.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elicitation::{Counts, Question, Session, SessionError, SessionStatus};
use crate::hierarchy::{validate_spec, ModelSpecTree, ValidationReport};
use crate::lattice::Point;
use crate::persistence::{parse_plain, PersistenceError};

pub const FACTORS_TEMPLATE_ID: &str = "factors.v1";
pub const HIERARCHY_TEMPLATE_ID: &str = "hierarchy.v1";
pub const SCENARIO_TEMPLATE_ID: &str = "scenario.v1";

/// Environment variable holding the LLM API key.
pub const API_KEY_ENV: &str = "EMM_LLM_API_KEY";

const FACTORS_TEMPLATE: &str = include_str!("../assets/prompts/factors.v1.txt");
const HIERARCHY_TEMPLATE: &str = include_str!("../assets/prompts/hierarchy.v1.txt");
const SCENARIO_TEMPLATE: &str = include_str!("../assets/prompts/scenario.v1.txt");
const OFFLINE_FACTORS: &str = include_str!("../assets/offline/factors_response.txt");
const OFFLINE_HIERARCHY: &str = include_str!("../assets/offline/hierarchy_response.json");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("no scripted answer for scenario {0}")]
    FixtureGap(Point),
    #[error("oracle answer {value} is outside the scale of size {size}")]
    OutOfRange { value: usize, size: usize },
    #[error("unknown scripted oracle {0:?}")]
    UnknownScript(String),
    #[error("invalid answer table: {0}")]
    BadTable(String),
    #[error("answering was aborted")]
    Aborted,
    #[error("i/o: {0}")]
    Io(String),
    #[error("decision text is empty")]
    EmptyDecision,
    #[error("at least two factors are needed, got {0}")]
    TooFewFactors(usize),
    #[error("unknown prompt template {0:?}")]
    UnknownTemplate(String),
    #[error("LLM transport: {0}")]
    Transport(String),
    #[error("could not parse LLM response ({message}); raw response: {raw}")]
    Unparseable { message: String, raw: String },
    #[error("draft does not cover the factors: {}", .0.join("; "))]
    Coverage(Vec<String>),
    #[error("LLM answering of scenario questions is disabled")]
    Disabled,
}

/// Anything that can answer a scenario question.
pub trait Oracle {
    fn answer(&mut self, question: &Question) -> Result<usize, OracleError>;
}

/// Closed-form answer rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClosedForm {
    Constant { value: usize },
    Max,
    Min,
    /// Binary: yes iff more than half the factors are yes.
    Majority,
    Projection { index: usize },
}

impl std::str::FromStr for ClosedForm {
    type Err = OracleError;

    /// `constant:<v>`, `max`, `min`, `majority` or `projection:<i>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || OracleError::UnknownScript(s.to_string());
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a.parse::<usize>().map_err(|_| bad())?)),
            None => (s, None),
        };
        match (head, arg) {
            ("constant", Some(value)) => Ok(ClosedForm::Constant { value }),
            ("max", None) => Ok(ClosedForm::Max),
            ("min", None) => Ok(ClosedForm::Min),
            ("majority", None) => Ok(ClosedForm::Majority),
            ("projection", Some(index)) => Ok(ClosedForm::Projection { index }),
            _ => Err(bad()),
        }
    }
}

impl ClosedForm {
    pub fn apply(&self, p: &Point) -> Option<usize> {
        let c = p.coords();
        match self {
            ClosedForm::Constant { value } => Some(*value),
            ClosedForm::Max => c.iter().copied().max(),
            ClosedForm::Min => c.iter().copied().min(),
            ClosedForm::Majority => Some(usize::from(c.iter().filter(|&&v| v > 0).count() * 2 > c.len())),
            ClosedForm::Projection { index } => c.get(*index).copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableEntry {
    pub point: Point,
    pub value: usize,
}

/// Answers from a fixed table or a closed-form rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptedOracle {
    Table(HashMap<Point, usize>),
    ClosedForm(ClosedForm),
}

impl ScriptedOracle {
    pub fn constant(value: usize) -> Self {
        ScriptedOracle::ClosedForm(ClosedForm::Constant { value })
    }

    pub fn table(entries: impl IntoIterator<Item = (Point, usize)>) -> Self {
        ScriptedOracle::Table(entries.into_iter().collect())
    }

    /// A JSON table (`[{"point": [..], "value": v}, ..]`) or an object
    /// `{"closed_form": "<tag>"}`.
    pub fn from_json(bytes: &[u8]) -> Result<Self, OracleError> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Doc {
            Table(Vec<TableEntry>),
            Closed { closed_form: String },
        }
        match serde_json::from_slice::<Doc>(bytes).map_err(|e| OracleError::BadTable(e.to_string()))? {
            Doc::Table(entries) => Ok(Self::table(entries.into_iter().map(|e| (e.point, e.value)))),
            Doc::Closed { closed_form } => Ok(ScriptedOracle::ClosedForm(closed_form.parse()?)),
        }
    }

    pub fn value_at(&self, p: &Point) -> Result<usize, OracleError> {
        match self {
            ScriptedOracle::Table(t) => t.get(p).copied(),
            ScriptedOracle::ClosedForm(f) => f.apply(p),
        }
        .ok_or_else(|| OracleError::FixtureGap(p.clone()))
    }
}

impl std::str::FromStr for ScriptedOracle {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(ScriptedOracle::ClosedForm(s.parse()?))
    }
}

impl Oracle for ScriptedOracle {
    fn answer(&mut self, q: &Question) -> Result<usize, OracleError> {
        let v = self.value_at(&q.point)?;
        if v >= q.options.len() {
            return Err(OracleError::OutOfRange { value: v, size: q.options.len() });
        }
        Ok(v)
    }
}

/// A person answering on a text stream. Accepts a label (preferred) or a
/// numeric index; `q` or end of input aborts.
pub struct HumanOracle<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead, W: Write> HumanOracle<R, W> {
    pub fn new(input: R, output: W) -> Self {
        Self { input, output }
    }

    pub fn into_output(self) -> W {
        self.output
    }
}

pub fn render_question(q: &Question) -> String {
    let mut s = format!("{}\n", q.prompt);
    for c in &q.scenario {
        s.push_str(&format!("  - {}: {}\n", c.prompt, c.label));
    }
    s.push_str(&format!("[{}] > ", q.options.join("/")));
    s
}

impl<R: BufRead, W: Write> Oracle for HumanOracle<R, W> {
    fn answer(&mut self, q: &Question) -> Result<usize, OracleError> {
        let io = |e: std::io::Error| OracleError::Io(e.to_string());
        let scale = crate::lattice::ValueScale::new(q.options.iter().cloned())
            .map_err(|e| OracleError::BadTable(e.to_string()))?;
        loop {
            write!(self.output, "{}", render_question(q)).map_err(io)?;
            self.output.flush().map_err(io)?;
            let mut line = String::new();
            if self.input.read_line(&mut line).map_err(io)? == 0 {
                return Err(OracleError::Aborted);
            }
            let line = line.trim();
            if line == "q" || line == "quit" {
                return Err(OracleError::Aborted);
            }
            match scale.parse_value(line) {
                Some(v) => return Ok(v),
                None => writeln!(self.output, "please answer one of: {}", q.options.join(", ")).map_err(io)?,
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Session(#[from] SessionError),
}

/// Asks pending questions until the session leaves the active state or
/// `max_questions` have been asked. `on_answer` sees the counts after each
/// answer.
pub fn run_session(
    session: &mut Session,
    oracle: &mut dyn Oracle,
    max_questions: Option<usize>,
    mut on_answer: impl FnMut(&Question, usize, &Counts),
) -> Result<Counts, RunError> {
    let mut asked = 0;
    while session.status() == SessionStatus::Active && max_questions.is_none_or(|m| asked < m) {
        let Some(q) = session.question() else { break };
        let v = oracle.answer(&q)?;
        let counts = session.step(v)?;
        asked += 1;
        on_answer(&q, v, &counts);
    }
    Ok(session.counts())
}

// ---- LLM ----

/// Where and how to reach a chat-completion endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmBinding {
    pub endpoint: String,
    pub model: String,
    /// Overrides the default template of the operation when set.
    #[serde(default)]
    pub template_id: Option<String>,
    /// Answer from bundled fixtures; never touches the network.
    #[serde(default)]
    pub offline: bool,
    /// Let the LLM answer scenario questions (off by default).
    #[serde(default)]
    pub answer_scenarios: bool,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    60
}

impl LlmBinding {
    pub fn offline() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            template_id: None,
            offline: true,
            answer_scenarios: false,
            timeout_secs: default_timeout_secs(),
        }
    }

    pub fn online(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self { endpoint: endpoint.into(), model: model.into(), offline: false, ..Self::offline() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
}

/// Sends a chat request and returns the first choice's content.
pub trait ChatTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, OracleError>;
}

/// JSON over HTTP POST with an optional bearer key from [`API_KEY_ENV`].
pub struct HttpTransport {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(binding: &LlmBinding) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(binding.timeout_secs)))
            .build()
            .into();
        Self { endpoint: binding.endpoint.clone(), api_key: std::env::var(API_KEY_ENV).ok(), agent }
    }
}

/// Pulls `choices[0].message.content` out of a response body.
pub fn parse_chat_response(body: &str) -> Result<String, OracleError> {
    #[derive(Deserialize)]
    struct Msg {
        content: String,
    }
    #[derive(Deserialize)]
    struct Choice {
        message: Msg,
    }
    #[derive(Deserialize)]
    struct Resp {
        choices: Vec<Choice>,
    }
    let resp: Resp = serde_json::from_str(body)
        .map_err(|e| OracleError::Unparseable { message: e.to_string(), raw: body.to_string() })?;
    resp.choices
        .into_iter()
        .next()
        .map(|c| c.message.content)
        .ok_or_else(|| OracleError::Unparseable { message: "no choices".into(), raw: body.to_string() })
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, OracleError> {
        let body = serde_json::to_string(request).expect("chat requests always serialize");
        let mut req = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send(body).map_err(|e| OracleError::Transport(e.to_string()))?;
        let text = resp.body_mut().read_to_string().map_err(|e| OracleError::Transport(e.to_string()))?;
        parse_chat_response(&text)
    }
}

pub fn template(id: &str) -> Result<&'static str, OracleError> {
    match id {
        FACTORS_TEMPLATE_ID => Ok(FACTORS_TEMPLATE),
        HIERARCHY_TEMPLATE_ID => Ok(HIERARCHY_TEMPLATE),
        SCENARIO_TEMPLATE_ID => Ok(SCENARIO_TEMPLATE),
        other => Err(OracleError::UnknownTemplate(other.to_string())),
    }
}

fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    vars.iter().fold(template.to_string(), |t, (k, v)| t.replace(&format!("{{{k}}}"), v))
}

fn ask(
    binding: &LlmBinding,
    transport: &dyn ChatTransport,
    default_template: &str,
    vars: &[(&str, &str)],
) -> Result<String, OracleError> {
    let tpl = template(binding.template_id.as_deref().unwrap_or(default_template))?;
    let request = ChatRequest {
        model: binding.model.clone(),
        messages: vec![ChatMessage { role: "user".into(), content: fill(tpl, vars) }],
    };
    transport.complete(&request)
}

fn strip_list_marker(line: &str) -> Option<&str> {
    let mut s = line.trim();
    let mut marked = false;
    if let Some(rest) = s.strip_prefix(['-', '*', '•']).filter(|r| r.starts_with(' ')) {
        s = rest.trim_start();
        marked = true;
    }
    let digits = s.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        if let Some(rest) = s[digits..].strip_prefix(['.', ')']) {
            s = rest.trim_start();
            marked = true;
        }
    }
    marked.then_some(s)
}

/// Parses a factor list: a JSON array of strings, a JSON object with a
/// `factors` or `questions` array, or numbered / bulleted lines (markdown
/// emphasis is dropped, unmarked lines ignored).
pub fn parse_factor_list(text: &str) -> Result<Vec<String>, OracleError> {
    let trimmed = strip_fences(text);
    if let Ok(list) = serde_json::from_str::<Vec<String>>(trimmed) {
        return non_empty(list, text);
    }
    if let Ok(map) = serde_json::from_str::<BTreeMap<String, Vec<String>>>(trimmed) {
        if let Some(list) = map.get("factors").or_else(|| map.get("questions")) {
            return non_empty(list.clone(), text);
        }
    }
    let items = text
        .lines()
        .filter_map(strip_list_marker)
        .map(|s| s.replace("**", "").trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    non_empty(items, text)
}

fn non_empty(items: Vec<String>, raw: &str) -> Result<Vec<String>, OracleError> {
    let items: Vec<String> = items.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(OracleError::Unparseable { message: "no list items found".into(), raw: raw.to_string() });
    }
    Ok(items)
}

fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else { return t };
    let rest = rest.split_once('\n').map(|(_, r)| r).unwrap_or("");
    rest.trim_end().strip_suffix("```").unwrap_or(rest).trim()
}

/// Candidate factor questions for a decision.
pub fn llm_generate_factors(
    binding: &LlmBinding,
    transport: Option<&dyn ChatTransport>,
    decision: &str,
) -> Result<Vec<String>, OracleError> {
    if decision.trim().is_empty() {
        return Err(OracleError::EmptyDecision);
    }
    let raw = if binding.offline {
        OFFLINE_FACTORS.to_string()
    } else {
        let default = HttpTransport::new(binding);
        let transport = transport.unwrap_or(&default);
        ask(binding, transport, FACTORS_TEMPLATE_ID, &[("decision", decision.trim())])?
    };
    parse_factor_list(&raw)
}

/// Lowercase alphanumeric words, for comparing question wording.
pub fn normalize_prompt(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect::<String>()
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Problems with a draft: every factor must be a leaf exactly once, leaves
/// must all be factors, and no internal node may reuse a factor.
pub fn coverage_issues(tree: &ModelSpecTree, factors: &[String]) -> Vec<String> {
    let mut want: BTreeMap<String, isize> = BTreeMap::new();
    for f in factors {
        *want.entry(normalize_prompt(f)).or_default() += 1;
    }
    let mut issues = Vec::new();
    let mut got: BTreeMap<String, isize> = BTreeMap::new();
    for n in tree.nodes() {
        let key = normalize_prompt(&n.prompt);
        if n.is_leaf() {
            *got.entry(key).or_default() += 1;
        } else if want.contains_key(&key) {
            issues.push(format!("factor {:?} is used as a grouping node", n.prompt));
        }
    }
    for (k, &w) in &want {
        let g = got.get(k).copied().unwrap_or(0);
        if g < w {
            issues.push(format!("missing factor {k:?}"));
        } else if g > w {
            issues.push(format!("factor {k:?} appears {g} times"));
        }
    }
    for k in got.keys().filter(|k| !want.contains_key(*k)) {
        issues.push(format!("leaf {k:?} is not one of the factors"));
    }
    issues
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyDraft {
    pub tree: ModelSpecTree,
    pub report: ValidationReport,
}

/// Extracts the outermost JSON object from a response.
fn json_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    (end > start).then(|| &text[start..=end])
}

/// Checks a drafted tree (plain JSON form) against the factor list.
pub fn check_hierarchy_draft(raw: &str, factors: &[String]) -> Result<HierarchyDraft, OracleError> {
    let body = json_object(raw)
        .ok_or_else(|| OracleError::Unparseable { message: "no JSON object found".into(), raw: raw.to_string() })?;
    let tree = parse_plain(body.as_bytes()).map_err(|e: PersistenceError| OracleError::Unparseable {
        message: e.to_string(),
        raw: raw.to_string(),
    })?;
    let issues = coverage_issues(&tree, factors);
    if !issues.is_empty() {
        return Err(OracleError::Coverage(issues));
    }
    let report = validate_spec(&tree);
    Ok(HierarchyDraft { tree, report })
}

/// Drafts a question hierarchy over `factors`.
pub fn llm_generate_hierarchy(
    binding: &LlmBinding,
    transport: Option<&dyn ChatTransport>,
    factors: &[String],
) -> Result<HierarchyDraft, OracleError> {
    if factors.len() < 2 {
        return Err(OracleError::TooFewFactors(factors.len()));
    }
    let raw = if binding.offline {
        OFFLINE_HIERARCHY.to_string()
    } else {
        let list: String = factors.iter().enumerate().map(|(i, f)| format!("{}. {f}\n", i + 1)).collect();
        let default = HttpTransport::new(binding);
        let transport = transport.unwrap_or(&default);
        ask(binding, transport, HIERARCHY_TEMPLATE_ID, &[("factors", list.trim_end())])?
    };
    check_hierarchy_draft(&raw, factors)
}

/// The bundled offline factor list.
pub fn offline_factors() -> Vec<String> {
    parse_factor_list(OFFLINE_FACTORS).expect("bundled fixture parses")
}

/// Scenario answers from an LLM; refuses unless the binding enables it.
pub struct LlmOracle<'a> {
    binding: LlmBinding,
    transport: &'a dyn ChatTransport,
}

impl<'a> LlmOracle<'a> {
    pub fn new(binding: LlmBinding, transport: &'a dyn ChatTransport) -> Self {
        Self { binding, transport }
    }
}

impl Oracle for LlmOracle<'_> {
    fn answer(&mut self, q: &Question) -> Result<usize, OracleError> {
        if !self.binding.answer_scenarios || self.binding.offline {
            return Err(OracleError::Disabled);
        }
        let scenario: String = q.scenario.iter().map(|c| format!("- {}: {}\n", c.prompt, c.label)).collect();
        let options = q.options.join(", ");
        let raw = ask(
            &self.binding,
            self.transport,
            SCENARIO_TEMPLATE_ID,
            &[("prompt", &q.prompt), ("scenario", scenario.trim_end()), ("options", &options)],
        )?;
        let word = normalize_prompt(&raw);
        q.options
            .iter()
            .position(|o| normalize_prompt(o) == word)
            .ok_or(OracleError::Unparseable { message: "answer is not one of the options".into(), raw })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let p = Point::new(vec![2, 3, 2]);
        assert_eq!("max".parse::<ClosedForm>().unwrap().apply(&p), Some(3));
        assert_eq!("min".parse::<ClosedForm>().unwrap().apply(&p), Some(2));
        assert_eq!("constant:1".parse::<ClosedForm>().unwrap().apply(&p), Some(1));
        assert_eq!("projection:1".parse::<ClosedForm>().unwrap().apply(&p), Some(3));
        assert_eq!("majority".parse::<ClosedForm>().unwrap().apply(&Point::new(vec![1, 0, 1])), Some(1));
        assert!("bogus".parse::<ClosedForm>().is_err());
        assert!("constant".parse::<ClosedForm>().is_err());
    }

    #[test]
    fn table_gap() {
        let o = ScriptedOracle::table([(Point::new(vec![0]), 1)]);
        assert_eq!(o.value_at(&Point::new(vec![0])), Ok(1));
        assert_eq!(o.value_at(&Point::new(vec![1])), Err(OracleError::FixtureGap(Point::new(vec![1]))));
        let parsed = ScriptedOracle::from_json(br#"[{"point":[0,1],"value":1}]"#).unwrap();
        assert_eq!(parsed.value_at(&Point::new(vec![0, 1])), Ok(1));
        let closed = ScriptedOracle::from_json(br#"{"closed_form":"max"}"#).unwrap();
        assert_eq!(closed, ScriptedOracle::ClosedForm(ClosedForm::Max));
    }

    #[test]
    fn list_parser_shapes() {
        let numbered = "Here you go:\n1. First?\n2) Second?\n3. **Third?**\nThanks.";
        assert_eq!(parse_factor_list(numbered).unwrap(), vec!["First?", "Second?", "Third?"]);
        let bullets = "- A?\n* B?\n- 3. C?**";
        assert_eq!(parse_factor_list(bullets).unwrap(), vec!["A?", "B?", "C?"]);
        assert_eq!(parse_factor_list(r#"["x?", "y?"]"#).unwrap(), vec!["x?", "y?"]);
        assert_eq!(parse_factor_list("```json\n{\"factors\": [\"x?\"]}\n```").unwrap(), vec!["x?"]);
        let err = parse_factor_list("no list here").unwrap_err();
        assert!(matches!(err, OracleError::Unparseable { ref raw, .. } if raw == "no list here"));
    }

    #[test]
    fn negative_numbers_are_not_list_items() {
        assert_eq!(strip_list_marker("-5 degrees"), None);
        assert_eq!(strip_list_marker("2024 was a year"), None);
    }

    struct Canned(String);

    impl ChatTransport for Canned {
        fn complete(&self, request: &ChatRequest) -> Result<String, OracleError> {
            assert_eq!(request.messages.len(), 1);
            Ok(self.0.clone())
        }
    }

    #[test]
    fn online_path_uses_transport() {
        let binding = LlmBinding::online("http://unused.invalid", "m");
        let t = Canned("1. A?\n2. B?\n".into());
        assert_eq!(llm_generate_factors(&binding, Some(&t), "Go?").unwrap(), vec!["A?", "B?"]);
        let tree = Canned("Sure:\n```json\n{\"Go?\": {\"A?\": {}, \"B?\": {}}}\n```".into());
        let factors = vec!["A?".to_string(), "B?".to_string()];
        let draft = llm_generate_hierarchy(&binding, Some(&tree), &factors).unwrap();
        assert_eq!(draft.tree.leaves().len(), 2);
    }

    #[test]
    fn chat_response_shape() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}]}"#;
        assert_eq!(parse_chat_response(body).unwrap(), "hi");
        assert!(parse_chat_response(r#"{"choices":[]}"#).is_err());
    }
}
