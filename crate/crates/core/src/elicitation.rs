//! Elicitation sessions: a scheduler, a partial monotone function and an
//! answer log wired into a small state machine.
//!
//! Every state change is an event appended to the session log, and
//! [`Session::from_log`] rebuilds a session by applying the same events, so
//! a saved log is enough to resume.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::FactorNode;
use crate::lattice::{Lattice, Point, ValueScale};
use crate::monotone::{Answer, Conflict, MonotoneError, PartialMonotoneFn, TotalMonotoneFn};
use crate::scheduler::{QuestionPlan, SchedulerError, Strategy};

/// Version stamped on every session log record.
pub const LOG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error(transparent)]
    Monotone(#[from] MonotoneError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error("conflict: {0}")]
    Conflict(Conflict),
    #[error("node {0:?} has no children to elicit over")]
    LeafNode(String),
    #[error("session is {0}, expected {1}")]
    WrongStatus(SessionStatus, &'static str),
    #[error("no pending question")]
    NoPendingQuestion,
    #[error("session has {remaining} undetermined scenarios; policy requires completion")]
    Incomplete { remaining: usize },
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error("session log: {0}")]
    Log(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Conflicted,
    Complete,
    Aborted,
}

impl std::fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SessionStatus::Active => "active",
            SessionStatus::Conflicted => "conflicted",
            SessionStatus::Complete => "complete",
            SessionStatus::Aborted => "aborted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolveStrategy {
    /// Drop the new answer; the question is asked again.
    Reject,
    /// Withdraw the earlier answers it contradicts and keep the new one.
    Revise,
}

impl std::str::FromStr for ResolveStrategy {
    type Err = SessionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reject" => Ok(ResolveStrategy::Reject),
            "revise" => Ok(ResolveStrategy::Revise),
            other => Err(SessionError::UnknownStrategy(other.to_string())),
        }
    }
}

/// How undetermined scenarios are filled when a session stops early.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompletionPolicy {
    #[default]
    Min,
    Max,
    RequireComplete,
}

impl std::str::FromStr for CompletionPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "min" => Ok(CompletionPolicy::Min),
            "max" => Ok(CompletionPolicy::Max),
            "require-complete" => Ok(CompletionPolicy::RequireComplete),
            other => Err(format!("unknown policy {other:?} (expected min, max or require-complete)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChildFactor {
    pub id: String,
    pub prompt: String,
    pub scale: ValueScale,
}

/// The node being elicited, copied into the session so a log is
/// self-contained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionTarget {
    pub node_id: String,
    pub prompt: String,
    pub scale: ValueScale,
    pub children: Vec<ChildFactor>,
}

impl SessionTarget {
    pub fn from_node(node: &FactorNode) -> Result<Self, SessionError> {
        if node.children.is_empty() {
            return Err(SessionError::LeafNode(node.id.clone()));
        }
        Ok(Self {
            node_id: node.id.clone(),
            prompt: node.prompt.clone(),
            scale: node.scale.clone(),
            children: node
                .children
                .iter()
                .map(|c| ChildFactor { id: c.id.clone(), prompt: c.prompt.clone(), scale: c.scale.clone() })
                .collect(),
        })
    }

    pub fn lattice(&self) -> Result<Lattice, SessionError> {
        Ok(Lattice::new(self.children.iter().map(|c| c.scale.clone()).collect()).map_err(MonotoneError::from)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub asked: usize,
    pub inferred: usize,
    pub remaining: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SessionEvent {
    Start { session_id: String, target: SessionTarget, strategy: Strategy, expert: String },
    QuestionPosed { point: Point },
    Answer { point: Point, value: usize },
    Conflict { conflict: Conflict },
    Resolution { strategy: ResolveStrategy, removed: Vec<Answer> },
    Finalize { policy: CompletionPolicy },
    Abort,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub format_version: u32,
    pub seq: u64,
    /// Unix time in milliseconds.
    pub ts: u64,
    pub event: SessionEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub expert: String,
    pub session_id: String,
    pub node_id: String,
    pub policy: CompletionPolicy,
}

/// A finished table for one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElicitedFunction {
    pub function: TotalMonotoneFn,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChildValue {
    pub id: String,
    pub prompt: String,
    pub value: usize,
    pub label: String,
}

/// A scenario question rendered for an oracle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub node_id: String,
    pub prompt: String,
    pub point: Point,
    pub scenario: Vec<ChildValue>,
    pub options: Vec<String>,
    /// Allowed answer range given earlier answers.
    pub lo: usize,
    pub hi: usize,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn fresh_id() -> String {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    format!("s{}-{}", now_ms(), COUNTER.fetch_add(1, Ordering::Relaxed))
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    target: SessionTarget,
    expert: String,
    f: PartialMonotoneFn,
    plan: QuestionPlan,
    status: SessionStatus,
    pending: Option<Point>,
    conflict: Option<Conflict>,
    finalized: Option<CompletionPolicy>,
    log: Vec<LogRecord>,
}

/// Opens a session on `node` with a generated id.
pub fn start_session(node: &FactorNode, strategy: Strategy, expert: &str) -> Result<Session, SessionError> {
    Session::start(fresh_id(), SessionTarget::from_node(node)?, strategy, expert)
}

impl Session {
    pub fn start(
        id: impl Into<String>,
        target: SessionTarget,
        strategy: Strategy,
        expert: impl Into<String>,
    ) -> Result<Self, SessionError> {
        let event = SessionEvent::Start { session_id: id.into(), target, strategy, expert: expert.into() };
        let mut s = Self::from_start(&event)?;
        s.push(event);
        s.advance()?;
        Ok(s)
    }

    fn from_start(event: &SessionEvent) -> Result<Self, SessionError> {
        let SessionEvent::Start { session_id, target, strategy, expert } = event else {
            return Err(SessionError::Log("first record must be a start event".into()));
        };
        if target.children.is_empty() {
            return Err(SessionError::LeafNode(target.node_id.clone()));
        }
        let f = PartialMonotoneFn::new(target.lattice()?, target.scale.clone())?;
        let plan = QuestionPlan::new(*strategy, &f)?;
        let status = if f.is_complete() { SessionStatus::Complete } else { SessionStatus::Active };
        Ok(Self {
            id: session_id.clone(),
            target: target.clone(),
            expert: expert.clone(),
            f,
            plan,
            status,
            pending: None,
            conflict: None,
            finalized: None,
            log: Vec::new(),
        })
    }

    /// Rebuilds a session from its log.
    pub fn from_log(records: &[LogRecord]) -> Result<Self, SessionError> {
        let first = records.first().ok_or_else(|| SessionError::Log("empty log".into()))?;
        let mut s = Self::from_start(&first.event)?;
        s.log.push(first.clone());
        for r in &records[1..] {
            if r.format_version != LOG_FORMAT_VERSION {
                return Err(SessionError::Log(format!("unsupported format_version {}", r.format_version)));
            }
            let last = s.log.last().map(|l| l.seq).unwrap_or(0);
            if r.seq <= last {
                return Err(SessionError::Log(format!("sequence {} does not follow {last}", r.seq)));
            }
            s.apply(&r.event).map_err(|e| SessionError::Log(format!("record {}: {e}", r.seq)))?;
            s.log.push(r.clone());
        }
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn target(&self) -> &SessionTarget {
        &self.target
    }

    pub fn expert(&self) -> &str {
        &self.expert
    }

    pub fn strategy(&self) -> Strategy {
        self.plan.strategy()
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn function(&self) -> &PartialMonotoneFn {
        &self.f
    }

    pub fn pending(&self) -> Option<&Point> {
        self.pending.as_ref()
    }

    pub fn conflict(&self) -> Option<&Conflict> {
        self.conflict.as_ref()
    }

    pub fn finalized(&self) -> Option<CompletionPolicy> {
        self.finalized
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    /// Sequence number of the latest log record; clients echo it back to
    /// detect stale submissions.
    pub fn version(&self) -> u64 {
        self.log.last().map(|r| r.seq).unwrap_or(0)
    }

    pub fn counts(&self) -> Counts {
        let total = self.f.point_count();
        let determined = self.f.determined_count();
        let asked = self.f.answers().len();
        Counts { asked, inferred: determined - asked, remaining: total - determined, total }
    }

    /// The pending question with scenario labels.
    pub fn question(&self) -> Option<Question> {
        let point = self.pending.clone()?;
        Some(self.render(point))
    }

    pub fn render(&self, point: Point) -> Question {
        let (lo, hi) = self.f.bounds(&point).unwrap_or((0, self.target.scale.top()));
        let scenario = self
            .target
            .children
            .iter()
            .zip(point.coords())
            .map(|(c, &value)| ChildValue {
                id: c.id.clone(),
                prompt: c.prompt.clone(),
                value,
                label: c.scale.label(value).unwrap_or("?").to_string(),
            })
            .collect();
        Question {
            node_id: self.target.node_id.clone(),
            prompt: self.target.prompt.clone(),
            point,
            scenario,
            options: self.target.scale.labels().to_vec(),
            lo,
            hi,
        }
    }

    fn push(&mut self, event: SessionEvent) {
        let seq = self.log.last().map(|r| r.seq + 1).unwrap_or(0);
        self.log.push(LogRecord { format_version: LOG_FORMAT_VERSION, seq, ts: now_ms(), event });
    }

    fn emit(&mut self, event: SessionEvent) -> Result<(), SessionError> {
        self.apply(&event)?;
        self.push(event);
        Ok(())
    }

    fn refresh_status(&mut self) {
        self.status = if self.f.is_complete() { SessionStatus::Complete } else { SessionStatus::Active };
    }

    fn apply(&mut self, event: &SessionEvent) -> Result<(), SessionError> {
        match event {
            SessionEvent::Start { .. } => return Err(SessionError::Log("duplicate start event".into())),
            SessionEvent::QuestionPosed { point } => {
                self.require(SessionStatus::Active, "active")?;
                if self.f.is_determined(point)? {
                    return Err(SessionError::Log(format!("question {point} is already determined")));
                }
                self.pending = Some(point.clone());
            }
            SessionEvent::Answer { point, value } => {
                self.require(SessionStatus::Active, "active")?;
                self.f.record(point, *value).map_err(|e| match e {
                    MonotoneError::Conflict(c) => SessionError::Conflict(c),
                    other => other.into(),
                })?;
                if self.pending.as_ref().is_some_and(|p| self.f.is_determined(p).unwrap_or(true)) {
                    self.pending = None;
                }
                self.refresh_status();
            }
            SessionEvent::Conflict { conflict } => {
                self.require(SessionStatus::Active, "active")?;
                self.status = SessionStatus::Conflicted;
                self.conflict = Some(conflict.clone());
            }
            SessionEvent::Resolution { strategy, removed } => {
                self.require(SessionStatus::Conflicted, "conflicted")?;
                let conflict = self.conflict.take().ok_or(SessionError::NoPendingQuestion)?;
                if *strategy == ResolveStrategy::Revise {
                    let keep = self
                        .f
                        .answers()
                        .iter()
                        .filter(|a| !removed.iter().any(|r| r.point == a.point && r.value == a.value))
                        .map(|a| (a.point.clone(), a.value))
                        .chain(std::iter::once((conflict.point.clone(), conflict.value)));
                    self.f = PartialMonotoneFn::replay(self.f.lattice().clone(), self.f.out_scale().clone(), keep)?;
                    self.plan.reset();
                    self.pending = None;
                }
                self.refresh_status();
            }
            SessionEvent::Finalize { policy } => {
                if !matches!(self.status, SessionStatus::Active | SessionStatus::Complete) {
                    return Err(SessionError::WrongStatus(self.status, "active or complete"));
                }
                if *policy == CompletionPolicy::RequireComplete && !self.f.is_complete() {
                    return Err(SessionError::Incomplete { remaining: self.counts().remaining });
                }
                self.finalized = Some(*policy);
            }
            SessionEvent::Abort => {
                self.status = SessionStatus::Aborted;
                self.pending = None;
            }
        }
        Ok(())
    }

    fn require(&self, want: SessionStatus, name: &'static str) -> Result<(), SessionError> {
        if self.status == want {
            Ok(())
        } else {
            Err(SessionError::WrongStatus(self.status, name))
        }
    }

    /// Poses the next question if none is pending.
    fn advance(&mut self) -> Result<(), SessionError> {
        if self.status != SessionStatus::Active || self.pending.is_some() {
            return Ok(());
        }
        match self.plan.next_question(&self.f) {
            Some(point) => self.emit(SessionEvent::QuestionPosed { point }),
            None => {
                self.refresh_status();
                Ok(())
            }
        }
    }

    fn answer_point(&mut self, point: Point, value: usize) -> Result<Counts, SessionError> {
        self.require(SessionStatus::Active, "active")?;
        match self.f.check(&point, value) {
            Ok(()) => {}
            Err(MonotoneError::Conflict(conflict)) => {
                self.emit(SessionEvent::Conflict { conflict: conflict.clone() })?;
                return Err(SessionError::Conflict(conflict));
            }
            Err(e) => return Err(e.into()),
        }
        if !self.f.is_determined(&point)? {
            self.emit(SessionEvent::Answer { point, value })?;
        }
        self.advance()?;
        Ok(self.counts())
    }

    /// Answers the pending question.
    pub fn step(&mut self, value: usize) -> Result<Counts, SessionError> {
        self.require(SessionStatus::Active, "active")?;
        let point = self.pending.clone().ok_or(SessionError::NoPendingQuestion)?;
        self.answer_point(point, value)
    }

    /// Records an answer for any scenario, asked or not. An answer that
    /// repeats what closure already implies is accepted without logging.
    pub fn submit(&mut self, point: Point, value: usize) -> Result<Counts, SessionError> {
        self.answer_point(point, value)
    }

    pub fn resolve_conflict(&mut self, strategy: ResolveStrategy) -> Result<Counts, SessionError> {
        self.require(SessionStatus::Conflicted, "conflicted")?;
        let removed = match strategy {
            ResolveStrategy::Reject => Vec::new(),
            ResolveStrategy::Revise => self.conflict.as_ref().map(|c| c.culprits.clone()).unwrap_or_default(),
        };
        self.emit(SessionEvent::Resolution { strategy, removed })?;
        self.advance()?;
        Ok(self.counts())
    }

    /// Produces the table. Complete sessions ignore `policy`.
    pub fn finalize(&mut self, policy: CompletionPolicy) -> Result<ElicitedFunction, SessionError> {
        self.emit(SessionEvent::Finalize { policy })?;
        let function = match policy {
            CompletionPolicy::Max => self.f.max_extension(),
            CompletionPolicy::Min | CompletionPolicy::RequireComplete => self.f.min_extension(),
        };
        Ok(ElicitedFunction {
            function,
            provenance: Provenance {
                expert: self.expert.clone(),
                session_id: self.id.clone(),
                node_id: self.target.node_id.clone(),
                policy,
            },
        })
    }

    pub fn abort(&mut self) -> Result<(), SessionError> {
        if self.status == SessionStatus::Aborted {
            return Err(SessionError::WrongStatus(self.status, "not aborted"));
        }
        self.emit(SessionEvent::Abort)
    }
}
