//! Sessions: one dialogue manager and one live world per session, with an
//! ordered event stream for transports and programmatic clients.

use std::collections::HashMap;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discourse::PendingAction;
use crate::dm::{report_text, DialogueManager, DialogueMove};
use crate::interpreter::{
    execute, EffectorNotice, ExecutionOutcome, ExecutionStatus, Hold, InterpretError, Interrupt, Pacing,
    SimulatedEffectors,
};
use crate::lingform::ParseError;
use crate::meta::MetaOutput;
use crate::script::Script;
use crate::world::{ConfigError, DoorStatus, EntityId, Report, World, WorldModel, WorldState, DEFAULT_CONFIG};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ServiceError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error("invalid config at `{path}`: {detail}")]
    InvalidConfig { path: String, detail: String },
}

/// Wire form of an error: `{error, detail}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownSession(_) => "unknown_session",
            ServiceError::EmptyUtterance => "empty_utterance",
            ServiceError::InvalidConfig { .. } => "invalid_config",
        }
    }

    pub fn body(&self) -> ErrorBody {
        let detail = match self {
            ServiceError::InvalidConfig { path, .. } => path.clone(),
            other => other.to_string(),
        };
        ErrorBody { error: self.code().to_string(), detail }
    }
}

impl From<ConfigError> for ServiceError {
    fn from(e: ConfigError) -> Self {
        ServiceError::InvalidConfig { path: e.path, detail: e.detail }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Running,
    Idle,
    Interrupted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum ServerEvent {
    SystemUtterance { text: String },
    RobotMoved { position: f64, location: EntityId, label: String, arrived: bool, destination: EntityId },
    DoorChanged { door: EntityId, status: DoorStatus },
    ReportIssued { report: Report },
    TraceRecord { stage: String, summary: String, meta: Vec<MetaOutput> },
    ExecutionStatus { status: RunState },
}

/// A server event with its per-session sequence number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    #[serde(flatten)]
    pub event: ServerEvent,
    pub seq: u64,
}

#[derive(Default)]
struct EventBus {
    log: Mutex<Vec<EventRecord>>,
    subscribers: Mutex<Vec<Sender<EventRecord>>>,
}

impl EventBus {
    fn emit(&self, event: ServerEvent) {
        let mut log = self.log.lock().unwrap();
        let record = EventRecord { event, seq: log.len() as u64 + 1 };
        self.subscribers.lock().unwrap().retain(|s| s.send(record.clone()).is_ok());
        log.push(record);
    }

    fn len(&self) -> usize {
        self.log.lock().unwrap().len()
    }

    fn since(&self, start: usize) -> Vec<EventRecord> {
        self.log.lock().unwrap()[start..].to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Running,
    Paused,
    Finished,
}

#[derive(Default)]
struct PhaseSignal(Mutex<Option<Phase>>, Condvar);

impl PhaseSignal {
    fn set(&self, phase: Phase) {
        *self.0.lock().unwrap() = Some(phase);
        self.1.notify_all();
    }

    fn get(&self) -> Option<Phase> {
        *self.0.lock().unwrap()
    }

    /// Waits while running; returns the phase reached.
    fn settle(&self, timeout: Option<Duration>) -> Option<Phase> {
        let guard = self.0.lock().unwrap();
        let running = |p: &mut Option<Phase>| *p == Some(Phase::Running);
        match timeout {
            Some(t) => *self.1.wait_timeout_while(guard, t, running).unwrap().0,
            None => *self.1.wait_while(guard, running).unwrap(),
        }
    }
}

struct Worker {
    handle: JoinHandle<Result<ExecutionOutcome, InterpretError>>,
    interrupt: Interrupt,
    phase: Arc<PhaseSignal>,
}

struct SessionInner {
    dm: DialogueManager,
    worker: Option<Worker>,
    last_status: RunState,
}

impl Drop for SessionInner {
    fn drop(&mut self) {
        if let Some(worker) = self.worker.take() {
            worker.interrupt.raise();
            let _ = worker.handle.join();
        }
    }
}

/// Pending move as reported by `get_state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingSummary {
    pub kind: String,
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session: String,
    pub world: WorldState,
    pub location_label: String,
    pub execution: RunState,
    pub pending: Option<PendingSummary>,
    pub salience: Vec<EntityId>,
    pub visited_trail: Vec<EntityId>,
    pub pacing: Pacing,
}

pub struct Session {
    id: String,
    model: Arc<WorldModel>,
    world: Arc<Mutex<World>>,
    holds: Arc<Mutex<Vec<Hold>>>,
    pacing: Pacing,
    bus: Arc<EventBus>,
    inner: Mutex<SessionInner>,
}

impl Session {
    fn new(id: String, model: Arc<WorldModel>, pacing: Pacing) -> Session {
        Session {
            id,
            world: Arc::new(Mutex::new(World::new(model.clone()))),
            holds: Arc::new(Mutex::new(Vec::new())),
            pacing,
            bus: Arc::new(EventBus::default()),
            inner: Mutex::new(SessionInner {
                dm: DialogueManager::new(model.clone()),
                worker: None,
                last_status: RunState::Idle,
            }),
            model,
        }
    }

    /// Joins a finished worker, or interrupts and joins a live one.
    fn reap(&self, inner: &mut SessionInner, preempt: bool) {
        let Some(worker) = inner.worker.take() else { return };
        if worker.phase.get() != Some(Phase::Finished) {
            if !preempt {
                inner.worker = Some(worker);
                return;
            }
            worker.interrupt.raise();
        }
        match worker.handle.join() {
            Ok(Ok(outcome)) => {
                inner.dm.record_arrivals(&outcome.arrivals);
                inner.last_status = match outcome.status {
                    ExecutionStatus::Completed => RunState::Idle,
                    ExecutionStatus::Interrupted { .. } => RunState::Interrupted,
                };
            }
            _ => inner.last_status = RunState::Idle,
        }
    }

    fn spawn(&self, script: Script) -> Worker {
        let interrupt = Interrupt::new();
        let phase = Arc::new(PhaseSignal::default());
        phase.set(Phase::Running);
        self.bus.emit(ServerEvent::ExecutionStatus { status: RunState::Running });
        let bus = self.bus.clone();
        let model = self.model.clone();
        let sink_phase = phase.clone();
        let sink = move |notice: EffectorNotice| match notice {
            EffectorNotice::Moved { position, location, arrived, destination } => {
                let label = model.label(&location).to_string();
                bus.emit(ServerEvent::RobotMoved { position, location, label, arrived, destination });
            }
            EffectorNotice::DoorChanged { door, status } => bus.emit(ServerEvent::DoorChanged { door, status }),
            EffectorNotice::Report(report) => {
                let text = report_text(&report, &model);
                bus.emit(ServerEvent::ReportIssued { report });
                bus.emit(ServerEvent::SystemUtterance { text });
            }
            EffectorNotice::Paused => sink_phase.set(Phase::Paused),
        };
        let effectors = SimulatedEffectors::new(self.world.clone(), self.pacing)
            .with_holds(self.holds.clone())
            .with_sink(Box::new(sink));
        let bus = self.bus.clone();
        let signal = interrupt.clone();
        let done = phase.clone();
        let handle = std::thread::spawn(move || {
            let mut effectors = effectors;
            let result = execute(&script, &mut effectors, &signal);
            let status = match &result {
                Ok(ExecutionOutcome { status: ExecutionStatus::Interrupted { .. }, .. }) => RunState::Interrupted,
                Ok(_) => RunState::Idle,
                Err(e) => {
                    bus.emit(ServerEvent::TraceRecord {
                        stage: "execute".into(),
                        summary: e.to_string(),
                        meta: Vec::new(),
                    });
                    RunState::Idle
                }
            };
            bus.emit(ServerEvent::ExecutionStatus { status });
            done.set(Phase::Finished);
            result
        });
        Worker { handle, interrupt, phase }
    }

    fn post(&self, text: &str) -> Result<Vec<EventRecord>, ServiceError> {
        if text.trim().is_empty() {
            return Err(ServiceError::EmptyUtterance);
        }
        let mut inner = self.inner.lock().unwrap();
        let start = self.bus.len();
        self.reap(&mut inner, true);
        let state = self.world.lock().unwrap().snapshot();
        let result = inner.dm.turn(text, &state).map_err(|e| match e {
            ParseError::EmptyUtterance | ParseError::OutOfGrammar { .. } => ServiceError::EmptyUtterance,
        })?;
        for t in &result.trace {
            self.bus.emit(ServerEvent::TraceRecord {
                stage: t.stage.clone(),
                summary: t.summary.clone(),
                meta: t.meta.clone(),
            });
        }
        if let DialogueMove::Report { reports, .. } = &result.dialogue_move {
            for report in reports {
                self.bus.emit(ServerEvent::ReportIssued { report: report.clone() });
            }
        }
        if let Some(text) = &result.utterance {
            self.bus.emit(ServerEvent::SystemUtterance { text: text.clone() });
        }
        if let Some(script) = result.execute {
            let worker = self.spawn(script);
            let phase = worker.phase.clone();
            inner.worker = Some(worker);
            if self.pacing == Pacing::Instant && phase.settle(None) == Some(Phase::Finished) {
                self.reap(&mut inner, false);
            }
        }
        Ok(self.bus.since(start))
    }

    fn state(&self) -> SessionState {
        let inner = self.inner.lock().unwrap();
        let world = self.world.lock().unwrap().snapshot();
        let ctx = inner.dm.context();
        let execution = match inner.worker.as_ref().and_then(|w| w.phase.get()) {
            Some(Phase::Running) | Some(Phase::Paused) => RunState::Running,
            _ => inner.last_status,
        };
        let pending = ctx.pending.as_ref().map(|p| match p {
            PendingAction::Confirm { paraphrase, .. } => {
                PendingSummary { kind: "confirm".into(), text: Some(paraphrase.clone()) }
            }
            PendingAction::Clarify { expects, .. } => {
                PendingSummary { kind: "clarify".into(), text: expects.map(|s| s.to_string()) }
            }
        });
        SessionState {
            session: self.id.clone(),
            location_label: self.model.label(&world.nearest).to_string(),
            world,
            execution,
            pending,
            salience: ctx.salience.iter().map(|e| e.entity.clone()).collect(),
            visited_trail: ctx.visited_trail.clone(),
            pacing: self.pacing,
        }
    }
}

/// Owns every live session.
pub struct SessionManager {
    config: String,
    pacing: Option<Pacing>,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
}

impl Default for SessionManager {
    fn default() -> Self {
        SessionManager::new()
    }
}

impl SessionManager {
    /// Sessions use the shipped world configuration.
    pub fn new() -> SessionManager {
        SessionManager { config: DEFAULT_CONFIG.to_string(), pacing: None, sessions: Mutex::new(HashMap::new()) }
    }

    /// Sessions default to `config` (TOML), which is validated up front.
    pub fn with_config(config: &str) -> Result<SessionManager, ServiceError> {
        WorldModel::from_toml(config)?;
        Ok(SessionManager { config: config.to_string(), ..SessionManager::new() })
    }

    /// Overrides the pacing named in the configuration.
    pub fn with_pacing(mut self, pacing: Pacing) -> SessionManager {
        self.pacing = Some(pacing);
        self
    }

    fn session(&self, id: &str) -> Result<Arc<Session>, ServiceError> {
        self.sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    /// A fresh session on the default configuration.
    pub fn create_session(&self) -> Result<String, ServiceError> {
        self.create_session_with(None)
    }

    /// A fresh session, optionally on its own configuration (TOML).
    pub fn create_session_with(&self, config: Option<&str>) -> Result<String, ServiceError> {
        let model = Arc::new(WorldModel::from_toml(config.unwrap_or(&self.config))?);
        let pacing = match self.pacing {
            Some(p) => p,
            None => match model.pacing.as_deref() {
                Some(p) => Pacing::parse(p).map_err(|e| ServiceError::InvalidConfig {
                    path: "session.pacing".into(),
                    detail: e.to_string(),
                })?,
                None => Pacing::Instant,
            },
        };
        let id = uuid::Uuid::new_v4().to_string();
        self.sessions.lock().unwrap().insert(id.clone(), Arc::new(Session::new(id.clone(), model, pacing)));
        Ok(id)
    }

    /// Processes one utterance and returns the events it produced. With
    /// instant pacing, the events of any execution it started are included.
    /// A running execution is interrupted before the utterance is handled.
    pub fn post_utterance(&self, id: &str, text: &str) -> Result<Vec<EventRecord>, ServiceError> {
        self.session(id)?.post(text)
    }

    pub fn get_state(&self, id: &str) -> Result<SessionState, ServiceError> {
        Ok(self.session(id)?.state())
    }

    /// Events emitted from now on.
    pub fn subscribe(&self, id: &str) -> Result<Receiver<EventRecord>, ServiceError> {
        let session = self.session(id)?;
        let (tx, rx) = channel();
        session.bus.subscribers.lock().unwrap().push(tx);
        Ok(rx)
    }

    /// Every event the session has emitted.
    pub fn events(&self, id: &str) -> Result<Vec<EventRecord>, ServiceError> {
        Ok(self.session(id)?.bus.since(0))
    }

    /// Arms a travel breakpoint for the next execution.
    pub fn arm_hold(&self, id: &str, hold: Hold) -> Result<(), ServiceError> {
        self.session(id)?.holds.lock().unwrap().push(hold);
        Ok(())
    }

    /// Waits up to `timeout` for a running execution to end; returns
    /// whether the session is idle.
    pub fn wait_idle(&self, id: &str, timeout: Duration) -> Result<bool, ServiceError> {
        let session = self.session(id)?;
        let phase = {
            let inner = session.inner.lock().unwrap();
            inner.worker.as_ref().map(|w| w.phase.clone())
        };
        let idle = match phase {
            Some(p) => p.settle(Some(timeout)) == Some(Phase::Finished),
            None => true,
        };
        if idle {
            let mut inner = session.inner.lock().unwrap();
            session.reap(&mut inner, false);
        }
        Ok(idle)
    }

    pub fn close_session(&self, id: &str) -> Result<(), ServiceError> {
        self.sessions.lock().unwrap().remove(id).map(|_| ()).ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }
}
