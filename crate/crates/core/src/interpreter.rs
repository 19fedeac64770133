//! One script interpreter, parameterized by execution type.
//!
//! Both modes walk the same [`ProcedureRule`] table. `evaluate` threads a
//! copy of the world state and collects meta-outputs; `execute` sends the
//! primitives to an [`Effectors`] implementation and observes an
//! [`Interrupt`] between primitives and during travel.

use std::fmt;
use std::sync::{Arc, Condvar, Mutex, OnceLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meta::{MetaOutput, PresupFailure};
use crate::script::{Action, Attribute, Effect, FailureTemplate, Script, StatusTest, Term};
use crate::world::{
    DoorStatus, EffectorEvent, EntityId, Report, ReportSource, ReportTime, Seconds, Sensor, TimeRef, World,
    WorldError, WorldModel, WorldState,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpretError {
    #[error("no rule for action `{0}`")]
    UnknownAction(String),
    #[error("unbound variable `${0}`")]
    UnboundVariable(String),
    #[error("expected {expected}, found `{found}`")]
    IllTyped { expected: &'static str, found: String },
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    Evaluate,
    Execute,
}

impl fmt::Display for ExecutionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExecutionMode::Evaluate => "evaluate",
            ExecutionMode::Execute => "execute",
        })
    }
}

// ---------------------------------------------------------------------------
// Rule table

#[derive(Debug, Clone, PartialEq)]
pub struct ProcedureRule {
    pub head: &'static str,
    pub params: Vec<&'static str>,
    pub body: Script,
}

impl ProcedureRule {
    /// The body with each parameter replaced by the action's argument.
    pub fn instantiate(&self, action: &Action) -> Script {
        self.params
            .iter()
            .zip(action.args())
            .fold(self.body.clone(), |body, (param, arg)| body.substitute(param, &arg))
    }
}

fn door_rule(head: &'static str, goal: DoorStatus) -> ProcedureRule {
    let d = || Term::var("D");
    ProcedureRule {
        head,
        params: vec!["D"],
        body: Script::IfThenElse {
            test: StatusTest { entity: d(), attribute: Attribute::OpenClosed, value: goal },
            then: Box::new(Script::PresupFail(FailureTemplate::AlreadyInState { door: d(), state: goal })),
            otherwise: Box::new(Script::ChangeStatus { entity: d(), attribute: Attribute::OpenClosed, value: goal }),
        },
    }
}

/// The procedural semantics shared by both execution modes.
pub fn rules() -> &'static [ProcedureRule] {
    static RULES: OnceLock<Vec<ProcedureRule>> = OnceLock::new();
    RULES.get_or_init(|| {
        vec![
            ProcedureRule {
                head: "go_to",
                params: vec!["L"],
                body: Script::Effect(Effect::Travel { to: Term::var("L") }),
            },
            ProcedureRule {
                head: "return_to",
                params: vec!["L"],
                body: Script::Effect(Effect::Travel { to: Term::var("L") }),
            },
            door_rule("open_door", DoorStatus::Open),
            door_rule("close_door", DoorStatus::Closed),
            ProcedureRule {
                head: "measure",
                params: vec!["S"],
                body: Script::Effect(Effect::Sense { sensor: Term::var("S") }),
            },
            ProcedureRule {
                head: "query_history",
                params: vec!["S", "L", "T"],
                body: Script::Effect(Effect::Recall {
                    sensor: Term::var("S"),
                    location: Term::var("L"),
                    time: Term::var("T"),
                }),
            },
            ProcedureRule { head: "halt", params: vec![], body: Script::Effect(Effect::Halt) },
        ]
    })
}

pub fn lookup_rule(action: &Action) -> Result<&'static ProcedureRule, InterpretError> {
    lookup_in(rules(), action)
}

pub fn lookup_in<'r>(table: &'r [ProcedureRule], action: &Action) -> Result<&'r ProcedureRule, InterpretError> {
    table
        .iter()
        .find(|r| r.head == action.name())
        .ok_or_else(|| InterpretError::UnknownAction(action.name().to_string()))
}

// ---------------------------------------------------------------------------
// Interrupts and pacing

/// A latch raised from the input side and observed by the executor.
#[derive(Debug, Clone, Default)]
pub struct Interrupt(Arc<(Mutex<bool>, Condvar)>);

impl Interrupt {
    pub fn new() -> Interrupt {
        Interrupt::default()
    }

    pub fn raise(&self) {
        let (flag, cv) = &*self.0;
        *flag.lock().unwrap() = true;
        cv.notify_all();
    }

    pub fn is_raised(&self) -> bool {
        *self.0 .0.lock().unwrap()
    }

    /// Blocks until raised.
    pub fn wait(&self) {
        let (flag, cv) = &*self.0;
        let _guard = cv.wait_while(flag.lock().unwrap(), |raised| !*raised).unwrap();
    }

    /// Waits at most `timeout`; returns whether the interrupt is raised.
    pub fn wait_timeout(&self, timeout: Duration) -> bool {
        let (flag, cv) = &*self.0;
        let (guard, _) = cv.wait_timeout_while(flag.lock().unwrap(), timeout, |raised| !*raised).unwrap();
        *guard
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "rate", rename_all = "snake_case")]
pub enum Pacing {
    /// Effects complete without real-time delay.
    Instant,
    /// Simulated seconds elapsed per real second.
    Scaled(f64),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid pacing `{0}`: expected `instant` or `scaled:<rate>`")]
pub struct PacingError(pub String);

impl Pacing {
    pub fn parse(s: &str) -> Result<Pacing, PacingError> {
        let s = s.trim();
        if s == "instant" {
            return Ok(Pacing::Instant);
        }
        let rate = s
            .strip_prefix("scaled:")
            .and_then(|r| r.parse::<f64>().ok())
            .filter(|r| r.is_finite() && *r > 0.0)
            .ok_or_else(|| PacingError(s.to_string()))?;
        Ok(Pacing::Scaled(rate))
    }
}

impl fmt::Display for Pacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pacing::Instant => f.write_str("instant"),
            Pacing::Scaled(r) => write!(f, "scaled:{r}"),
        }
    }
}

/// Breakpoint for deterministic runs: travel toward `destination` pauses
/// after `after_secs` simulated seconds until the interrupt is raised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hold {
    pub destination: EntityId,
    pub after_secs: Seconds,
}

// ---------------------------------------------------------------------------
// Effectors

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TravelOutcome {
    Arrived,
    Interrupted,
}

/// The execute-mode backend.
pub trait Effectors {
    /// Current live state, used for status tests.
    fn observe(&self) -> WorldState;
    fn travel(&mut self, to: &EntityId, interrupt: &Interrupt) -> Result<TravelOutcome, InterpretError>;
    fn set_door(&mut self, door: &EntityId, status: DoorStatus) -> Result<(), InterpretError>;
    fn sense(&mut self, sensor: Sensor) -> Result<Report, InterpretError>;
    /// `None` means the current clock.
    fn recall(&mut self, sensor: Sensor, location: &EntityId, time: Option<TimeRef>) -> Result<Report, WorldError>;
    fn halt(&mut self) {}
    /// Effector events applied so far, oldest first.
    fn take_events(&mut self) -> Vec<EffectorEvent>;
}

/// What the simulated effectors tell their owner as they act.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "notice", rename_all = "snake_case")]
pub enum EffectorNotice {
    Moved { position: f64, location: EntityId, arrived: bool, destination: EntityId },
    DoorChanged { door: EntityId, status: DoorStatus },
    Report(Report),
    /// Travel stopped at a hold and is waiting for the interrupt.
    Paused,
}

pub type NoticeSink = Box<dyn FnMut(EffectorNotice) + Send>;

const TICK: Duration = Duration::from_millis(20);

/// Effectors acting on a shared simulated [`World`].
pub struct SimulatedEffectors {
    world: Arc<Mutex<World>>,
    pacing: Pacing,
    holds: Arc<Mutex<Vec<Hold>>>,
    sink: NoticeSink,
    events: Vec<EffectorEvent>,
}

impl SimulatedEffectors {
    pub fn new(world: Arc<Mutex<World>>, pacing: Pacing) -> SimulatedEffectors {
        SimulatedEffectors {
            world,
            pacing,
            holds: Arc::new(Mutex::new(Vec::new())),
            sink: Box::new(|_| {}),
            events: Vec::new(),
        }
    }

    pub fn with_holds(mut self, holds: Arc<Mutex<Vec<Hold>>>) -> SimulatedEffectors {
        self.holds = holds;
        self
    }

    pub fn with_sink(mut self, sink: NoticeSink) -> SimulatedEffectors {
        self.sink = sink;
        self
    }

    fn apply(&mut self, event: EffectorEvent) -> Result<WorldState, InterpretError> {
        let state = {
            let mut world = self.world.lock().unwrap();
            world.apply(&event)?;
            world.snapshot()
        };
        self.events.push(event);
        Ok(state)
    }

    fn moved(&mut self, state: &WorldState, to: &EntityId, arrived: bool) {
        (self.sink)(EffectorNotice::Moved {
            position: state.position,
            location: state.nearest.clone(),
            arrived,
            destination: to.clone(),
        });
    }

    fn take_hold(&self, to: &EntityId) -> Option<Hold> {
        let mut holds = self.holds.lock().unwrap();
        let i = holds.iter().position(|h| &h.destination == to)?;
        Some(holds.remove(i))
    }

    fn remaining(&self, to: &EntityId) -> Result<Seconds, InterpretError> {
        let world = self.world.lock().unwrap();
        let target = world.model().coordinate(to).ok_or_else(|| WorldError::UnknownLocation(to.to_string()))?;
        Ok(world.model().travel_cost(world.state().position, target))
    }

    fn pause(&self, seconds: Seconds) {
        if let Pacing::Scaled(rate) = self.pacing {
            std::thread::sleep(Duration::from_secs_f64(seconds / rate));
        }
    }
}

impl Effectors for SimulatedEffectors {
    fn observe(&self) -> WorldState {
        self.world.lock().unwrap().snapshot()
    }

    fn travel(&mut self, to: &EntityId, interrupt: &Interrupt) -> Result<TravelOutcome, InterpretError> {
        if let Some(hold) = self.take_hold(to) {
            if hold.after_secs < self.remaining(to)? {
                let state = self.apply(EffectorEvent::MoveToward { to: to.clone(), seconds: hold.after_secs })?;
                self.moved(&state, to, false);
                (self.sink)(EffectorNotice::Paused);
                interrupt.wait();
                return Ok(TravelOutcome::Interrupted);
            }
        }
        match self.pacing {
            Pacing::Instant => {
                let state = self.apply(EffectorEvent::Move { to: to.clone() })?;
                self.moved(&state, to, true);
                Ok(TravelOutcome::Arrived)
            }
            Pacing::Scaled(rate) => {
                let mut last = Instant::now();
                loop {
                    let remaining = self.remaining(to)?;
                    if remaining <= 0.0 {
                        let state = self.apply(EffectorEvent::Move { to: to.clone() })?;
                        self.moved(&state, to, true);
                        return Ok(TravelOutcome::Arrived);
                    }
                    let raised = interrupt.wait_timeout(TICK.min(Duration::from_secs_f64(remaining / rate)));
                    let now = Instant::now();
                    let step = (now - last).as_secs_f64() * rate;
                    last = now;
                    let arriving = step >= remaining;
                    let event = if arriving {
                        EffectorEvent::Move { to: to.clone() }
                    } else {
                        EffectorEvent::MoveToward { to: to.clone(), seconds: step }
                    };
                    let state = self.apply(event)?;
                    self.moved(&state, to, arriving);
                    if arriving {
                        return Ok(TravelOutcome::Arrived);
                    }
                    if raised {
                        return Ok(TravelOutcome::Interrupted);
                    }
                }
            }
        }
    }

    fn set_door(&mut self, door: &EntityId, status: DoorStatus) -> Result<(), InterpretError> {
        let seconds = self.world.lock().unwrap().model().durations.door;
        self.pause(seconds);
        self.apply(EffectorEvent::SetDoor { door: door.clone(), status })?;
        (self.sink)(EffectorNotice::DoorChanged { door: door.clone(), status });
        Ok(())
    }

    fn sense(&mut self, sensor: Sensor) -> Result<Report, InterpretError> {
        let (seconds, location, value) = {
            let world = self.world.lock().unwrap();
            let state = world.state();
            let value = state.read_sensor(sensor, state.nearest.as_str())?;
            (world.model().durations.measure, state.nearest.clone(), value)
        };
        self.pause(seconds);
        self.apply(EffectorEvent::AdvanceClock { seconds })?;
        let report = Report { sensor, location, time: ReportTime::Now, value, source: ReportSource::Mobile };
        (self.sink)(EffectorNotice::Report(report.clone()));
        Ok(report)
    }

    fn recall(&mut self, sensor: Sensor, location: &EntityId, time: Option<TimeRef>) -> Result<Report, WorldError> {
        let (seconds, t, value) = {
            let world = self.world.lock().unwrap();
            let t = time.unwrap_or_else(|| world.state().time());
            (world.model().durations.history_query, t, world.read_history(sensor, location.as_str(), t)?)
        };
        self.pause(seconds);
        self.apply(EffectorEvent::AdvanceClock { seconds }).map_err(|e| match e {
            InterpretError::World(w) => w,
            other => WorldError::UnknownLocation(other.to_string()),
        })?;
        let report = Report {
            sensor,
            location: location.clone(),
            time: ReportTime::At(t),
            value,
            source: ReportSource::Fixed,
        };
        (self.sink)(EffectorNotice::Report(report.clone()));
        Ok(report)
    }

    fn take_events(&mut self) -> Vec<EffectorEvent> {
        std::mem::take(&mut self.events)
    }
}

// ---------------------------------------------------------------------------
// Results

/// What one rule application changed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StateDelta {
    pub seconds: Seconds,
    pub position: Option<f64>,
    pub door: Option<(EntityId, DoorStatus)>,
    pub report: Option<Report>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub mode: ExecutionMode,
    pub action: Action,
    pub delta: StateDelta,
    pub meta: Vec<MetaOutput>,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} (+{}s", self.mode, self.action, self.delta.seconds)?;
        if let Some(p) = self.delta.position {
            write!(f, ", position {p}")?;
        }
        if let Some((door, status)) = &self.delta.door {
            write!(f, ", {door} {status}")?;
        }
        f.write_str(")")?;
        for m in &self.meta {
            write!(f, " {m}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub final_state: WorldState,
    /// Presupposition failures in plan order, then `Cost(total)`.
    pub meta: Vec<MetaOutput>,
    pub predicted_reports: Vec<Report>,
    pub cost_seconds: Seconds,
    pub arrivals: Vec<EntityId>,
    pub trace: Vec<TraceRecord>,
}

impl EvalResult {
    pub fn failures(&self) -> impl Iterator<Item = &PresupFailure> {
        self.meta.iter().filter_map(MetaOutput::failure)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExecutionStatus {
    Completed,
    Interrupted { position: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub events: Vec<EffectorEvent>,
    pub reports: Vec<Report>,
    pub status: ExecutionStatus,
    pub arrivals: Vec<EntityId>,
    pub meta: Vec<MetaOutput>,
    pub trace: Vec<TraceRecord>,
}

pub enum Mode<'a> {
    Evaluate { model: &'a WorldModel, state: WorldState },
    Execute { effectors: &'a mut dyn Effectors, interrupt: &'a Interrupt },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunResult {
    Evaluated(EvalResult),
    Executed(ExecutionOutcome),
}

/// Runs `script` in the given mode.
pub fn run(script: &Script, mode: Mode<'_>) -> Result<RunResult, InterpretError> {
    run_with(rules(), script, mode)
}

/// Like [`run`] with an explicit rule table.
pub fn run_with(table: &[ProcedureRule], script: &Script, mode: Mode<'_>) -> Result<RunResult, InterpretError> {
    match mode {
        Mode::Evaluate { model, state } => {
            let mut r = Runner::new(table, Backend::Eval { model, state });
            r.node(script)?;
            let cost = r.cost;
            r.meta.push(MetaOutput::Cost(cost));
            let Backend::Eval { state, .. } = r.backend else { unreachable!() };
            Ok(RunResult::Evaluated(EvalResult {
                final_state: state,
                meta: r.meta,
                predicted_reports: r.reports,
                cost_seconds: cost,
                arrivals: r.arrivals,
                trace: r.trace,
            }))
        }
        Mode::Execute { effectors, interrupt } => {
            let mut r = Runner::new(table, Backend::Exec { effectors, interrupt });
            r.node(script)?;
            let interrupted = r.interrupted;
            let Backend::Exec { effectors, .. } = r.backend else { unreachable!() };
            let status = if interrupted {
                ExecutionStatus::Interrupted { position: effectors.observe().position }
            } else {
                ExecutionStatus::Completed
            };
            Ok(RunResult::Executed(ExecutionOutcome {
                events: effectors.take_events(),
                reports: r.reports,
                status,
                arrivals: r.arrivals,
                meta: r.meta,
                trace: r.trace,
            }))
        }
    }
}

pub fn evaluate(script: &Script, model: &WorldModel, state: &WorldState) -> Result<EvalResult, InterpretError> {
    match run(script, Mode::Evaluate { model, state: state.clone() })? {
        RunResult::Evaluated(r) => Ok(r),
        RunResult::Executed(_) => unreachable!(),
    }
}

pub fn execute(
    script: &Script,
    effectors: &mut dyn Effectors,
    interrupt: &Interrupt,
) -> Result<ExecutionOutcome, InterpretError> {
    match run(script, Mode::Execute { effectors, interrupt })? {
        RunResult::Executed(o) => Ok(o),
        RunResult::Evaluated(_) => unreachable!(),
    }
}

// ---------------------------------------------------------------------------
// The walker

enum Backend<'a> {
    Eval { model: &'a WorldModel, state: WorldState },
    Exec { effectors: &'a mut dyn Effectors, interrupt: &'a Interrupt },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Flow {
    Continue,
    Stop,
}

struct Runner<'a> {
    table: &'a [ProcedureRule],
    backend: Backend<'a>,
    meta: Vec<MetaOutput>,
    reports: Vec<Report>,
    arrivals: Vec<EntityId>,
    trace: Vec<TraceRecord>,
    delta: StateDelta,
    cost: Seconds,
    interrupted: bool,
}

fn entity(t: &Term) -> Result<EntityId, InterpretError> {
    match t {
        Term::Entity(e) => Ok(e.clone()),
        Term::Var(v) => Err(InterpretError::UnboundVariable(v.clone())),
        other => Err(InterpretError::IllTyped { expected: "entity", found: other.to_string() }),
    }
}

fn sensor(t: &Term) -> Result<Sensor, InterpretError> {
    match t {
        Term::Sensor(s) => Ok(*s),
        Term::Var(v) => Err(InterpretError::UnboundVariable(v.clone())),
        other => Err(InterpretError::IllTyped { expected: "sensor", found: other.to_string() }),
    }
}

fn time(t: &Term) -> Result<Option<TimeRef>, InterpretError> {
    match t {
        Term::Time(t) => Ok(Some(*t)),
        Term::Now => Ok(None),
        Term::Var(v) => Err(InterpretError::UnboundVariable(v.clone())),
        other => Err(InterpretError::IllTyped { expected: "time", found: other.to_string() }),
    }
}

fn no_reading(e: WorldError, sensor: Sensor, location: &EntityId, t: TimeRef) -> Result<MetaOutput, InterpretError> {
    match e {
        WorldError::NoHistory { .. } | WorldError::FutureTime { .. } => Ok(MetaOutput::PresupFailure(
            PresupFailure::NoReading { sensor, location: location.clone(), time: t },
        )),
        other => Err(other.into()),
    }
}

impl<'a> Runner<'a> {
    fn new(table: &'a [ProcedureRule], backend: Backend<'a>) -> Runner<'a> {
        Runner {
            table,
            backend,
            meta: Vec::new(),
            reports: Vec::new(),
            arrivals: Vec::new(),
            trace: Vec::new(),
            delta: StateDelta::default(),
            cost: 0.0,
            interrupted: false,
        }
    }

    fn mode(&self) -> ExecutionMode {
        match self.backend {
            Backend::Eval { .. } => ExecutionMode::Evaluate,
            Backend::Exec { .. } => ExecutionMode::Execute,
        }
    }

    fn interrupt_raised(&mut self) -> bool {
        if let Backend::Exec { interrupt, .. } = &self.backend {
            if interrupt.is_raised() {
                self.interrupted = true;
            }
        }
        self.interrupted
    }

    fn clock(&self) -> Seconds {
        match &self.backend {
            Backend::Eval { state, .. } => state.clock,
            Backend::Exec { effectors, .. } => effectors.observe().clock,
        }
    }

    fn node(&mut self, s: &Script) -> Result<Flow, InterpretError> {
        match s {
            Script::Seq(items) => {
                for item in items {
                    if self.node(item)? == Flow::Stop {
                        return Ok(Flow::Stop);
                    }
                }
                Ok(Flow::Continue)
            }
            Script::Foreach { var, values, body } => {
                for v in values {
                    if self.node(&body.substitute(var, &Term::Entity(v.clone())))? == Flow::Stop {
                        return Ok(Flow::Stop);
                    }
                }
                Ok(Flow::Continue)
            }
            Script::Prim(action) => self.prim(action),
            Script::IfThenElse { test, then, otherwise } => {
                let door = entity(&test.entity)?;
                let status = match &self.backend {
                    Backend::Eval { state, .. } => state.door(&door),
                    Backend::Exec { effectors, .. } => effectors.observe().door(&door),
                }
                .ok_or_else(|| WorldError::UnknownDoor(door.to_string()))?;
                self.node(if status == test.value { then } else { otherwise })
            }
            Script::PresupFail(FailureTemplate::AlreadyInState { door, state }) => {
                let door = entity(door)?;
                self.meta.push(MetaOutput::PresupFailure(PresupFailure::AlreadyInState { door, state: *state }));
                Ok(Flow::Continue)
            }
            Script::ChangeStatus { entity: door, value, .. } => {
                let door = entity(door)?;
                match &mut self.backend {
                    Backend::Eval { model, state } => {
                        let slot =
                            state.doors.get_mut(&door).ok_or_else(|| WorldError::UnknownDoor(door.to_string()))?;
                        *slot = *value;
                        state.clock += model.durations.door;
                        self.cost += model.durations.door;
                    }
                    Backend::Exec { effectors, .. } => effectors.set_door(&door, *value)?,
                }
                self.delta.door = Some((door, *value));
                Ok(Flow::Continue)
            }
            Script::Effect(effect) => self.effect(effect),
        }
    }

    fn prim(&mut self, action: &Action) -> Result<Flow, InterpretError> {
        if self.interrupt_raised() {
            return Ok(Flow::Stop);
        }
        let rule = lookup_in(self.table, action)?;
        let body = rule.instantiate(action);
        let meta_start = self.meta.len();
        let clock_start = self.clock();
        self.delta = StateDelta::default();
        let flow = self.node(&body)?;
        let mut delta = std::mem::take(&mut self.delta);
        delta.seconds = self.clock() - clock_start;
        self.trace.push(TraceRecord {
            mode: self.mode(),
            action: action.clone(),
            delta,
            meta: self.meta[meta_start..].to_vec(),
        });
        Ok(flow)
    }

    fn effect(&mut self, effect: &Effect) -> Result<Flow, InterpretError> {
        match effect {
            Effect::Travel { to } => {
                let to = entity(to)?;
                match &mut self.backend {
                    Backend::Eval { model, state } => {
                        let target =
                            model.coordinate(&to).ok_or_else(|| WorldError::UnknownLocation(to.to_string()))?;
                        let seconds = model.travel_cost(state.position, target);
                        state.position = target;
                        state.nearest = to.clone();
                        state.clock += seconds;
                        self.cost += seconds;
                        self.delta.position = Some(target);
                    }
                    Backend::Exec { effectors, interrupt } => {
                        let outcome = effectors.travel(&to, interrupt)?;
                        self.delta.position = Some(effectors.observe().position);
                        if outcome == TravelOutcome::Interrupted {
                            self.interrupted = true;
                            return Ok(Flow::Stop);
                        }
                    }
                }
                self.arrivals.push(to);
                Ok(Flow::Continue)
            }
            Effect::Sense { sensor: s } => {
                let s = sensor(s)?;
                let report = match &mut self.backend {
                    Backend::Eval { model, state } => {
                        let value = state.read_sensor(s, state.nearest.as_str())?;
                        state.clock += model.durations.measure;
                        self.cost += model.durations.measure;
                        Report {
                            sensor: s,
                            location: state.nearest.clone(),
                            time: ReportTime::Now,
                            value,
                            source: ReportSource::Mobile,
                        }
                    }
                    Backend::Exec { effectors, .. } => effectors.sense(s)?,
                };
                self.delta.report = Some(report.clone());
                self.reports.push(report);
                Ok(Flow::Continue)
            }
            Effect::Recall { sensor: s, location, time: t } => {
                let s = sensor(s)?;
                let location = entity(location)?;
                let t = time(t)?;
                let result = match &mut self.backend {
                    Backend::Eval { model, state } => {
                        let at = t.unwrap_or_else(|| state.time());
                        let result = model.read_history(s, &location, at, state.clock).map(|value| Report {
                            sensor: s,
                            location: location.clone(),
                            time: ReportTime::At(at),
                            value,
                            source: ReportSource::Fixed,
                        });
                        if result.is_ok() {
                            state.clock += model.durations.history_query;
                            self.cost += model.durations.history_query;
                        }
                        result.map_err(|e| (e, at))
                    }
                    Backend::Exec { effectors, .. } => {
                        let at = t.unwrap_or_else(|| effectors.observe().time());
                        effectors.recall(s, &location, t).map_err(|e| (e, at))
                    }
                };
                match result {
                    Ok(report) => {
                        self.delta.report = Some(report.clone());
                        self.reports.push(report);
                    }
                    Err((e, at)) => self.meta.push(no_reading(e, s, &location, at)?),
                }
                Ok(Flow::Continue)
            }
            Effect::Halt => {
                if let Backend::Exec { effectors, .. } = &mut self.backend {
                    effectors.halt();
                }
                Ok(Flow::Stop)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> Arc<WorldModel> {
        Arc::new(WorldModel::default_shuttle())
    }

    fn e(id: &str) -> Term {
        Term::Entity(id.into())
    }

    fn decks_co2() -> Script {
        Script::Foreach {
            var: "x".into(),
            values: vec!["flight_deck".into(), "mid_deck".into(), "lower_deck".into()],
            body: Box::new(Script::Seq(vec![
                Script::Prim(Action::GoTo { location: Term::var("x") }),
                Script::Prim(Action::MeasureHere { sensor: Sensor::Co2 }),
            ])),
        }
    }

    #[test]
    fn open_door_rule_is_the_status_test() {
        let rule = lookup_rule(&Action::OpenDoor { door: e("crew_hatch") }).unwrap();
        assert_eq!(rule.params, vec!["D"]);
        let body = rule.instantiate(&Action::OpenDoor { door: e("crew_hatch") });
        assert_eq!(
            body.to_string(),
            "if status(crew_hatch, open_closed, open)\n  presupposition_failure already_open crew_hatch\nelse\n  change_status crew_hatch open_closed open\nendif\n"
        );
    }

    #[test]
    fn every_action_has_exactly_one_rule() {
        let actions = [
            Action::GoTo { location: e("mid_deck") },
            Action::ReturnTo { location: e("mid_deck") },
            Action::OpenDoor { door: e("mid_hatch") },
            Action::CloseDoor { door: e("mid_hatch") },
            Action::MeasureHere { sensor: Sensor::Co2 },
            Action::QueryHistory { sensor: Sensor::Co2, location: e("mid_deck"), time: Term::Now },
            Action::Halt,
        ];
        for a in actions {
            assert_eq!(rules().iter().filter(|r| r.head == a.name()).count(), 1, "{a}");
        }
        assert_eq!(
            lookup_in(&[], &Action::Halt),
            Err(InterpretError::UnknownAction("halt".into()))
        );
    }

    #[test]
    fn evaluate_open_door_already_open() {
        let m = model();
        let state = m.initial_state();
        let s = Script::Seq(vec![Script::Prim(Action::OpenDoor { door: e("crew_hatch") })]);
        let r = evaluate(&s, &m, &state).unwrap();
        assert_eq!(
            r.meta,
            vec![
                MetaOutput::PresupFailure(PresupFailure::AlreadyInState {
                    door: "crew_hatch".into(),
                    state: DoorStatus::Open
                }),
                MetaOutput::Cost(0.0)
            ]
        );
        assert_eq!(r.final_state, state);
    }

    #[test]
    fn evaluate_three_decks_costs_105() {
        let m = model();
        let r = evaluate(&decks_co2(), &m, &m.initial_state()).unwrap();
        assert_eq!(r.cost_seconds, 105.0);
        assert_eq!(r.predicted_reports.len(), 3);
        assert_eq!(r.meta.last(), Some(&MetaOutput::Cost(105.0)));
        assert_eq!(r.trace.len(), 6);
    }

    #[test]
    fn execute_empty_seq() {
        let world = Arc::new(Mutex::new(World::new(model())));
        let mut eff = SimulatedEffectors::new(world, Pacing::Instant);
        let o = execute(&Script::Seq(vec![]), &mut eff, &Interrupt::new()).unwrap();
        assert_eq!(o.status, ExecutionStatus::Completed);
        assert!(o.events.is_empty() && o.reports.is_empty());
    }

    #[test]
    fn execute_matches_evaluate() {
        let m = model();
        let world = Arc::new(Mutex::new(World::new(m.clone())));
        let predicted = evaluate(&decks_co2(), &m, &m.initial_state()).unwrap();
        let mut eff = SimulatedEffectors::new(world.clone(), Pacing::Instant);
        let o = execute(&decks_co2(), &mut eff, &Interrupt::new()).unwrap();
        assert_eq!(&predicted.final_state, world.lock().unwrap().state());
        assert_eq!(o.reports, predicted.predicted_reports);
        assert_eq!(o.events.len(), 6);
    }

    #[test]
    fn hold_pauses_until_interrupted() {
        let m = model();
        let world = Arc::new(Mutex::new(World::new(m.clone())));
        let holds = Arc::new(Mutex::new(vec![Hold { destination: "commander_seat".into(), after_secs: 12.0 }]));
        let interrupt = Interrupt::new();
        let (tx, rx) = std::sync::mpsc::channel();
        let mut eff = SimulatedEffectors::new(world.clone(), Pacing::Instant)
            .with_holds(holds)
            .with_sink(Box::new(move |n| tx.send(n).unwrap()));
        let signal = interrupt.clone();
        let handle = std::thread::spawn(move || {
            let s = Script::Seq(vec![
                Script::Prim(Action::GoTo { location: e("commander_seat") }),
                Script::Prim(Action::MeasureHere { sensor: Sensor::Co2 }),
            ]);
            execute(&s, &mut eff, &signal).unwrap()
        });
        loop {
            if rx.recv().unwrap() == EffectorNotice::Paused {
                break;
            }
        }
        interrupt.raise();
        let outcome = handle.join().unwrap();
        // 12 s at 30 s per unit is 0.4 units from the crew hatch.
        assert!(matches!(outcome.status, ExecutionStatus::Interrupted { position } if (position - 0.4).abs() < 1e-9));
        assert!(outcome.reports.is_empty());
    }

    #[test]
    fn scaled_travel_stops_mid_way() {
        let m = model();
        let world = Arc::new(Mutex::new(World::new(m.clone())));
        let interrupt = Interrupt::new();
        let signal = interrupt.clone();
        let w = world.clone();
        let handle = std::thread::spawn(move || {
            let mut eff = SimulatedEffectors::new(w, Pacing::Scaled(100.0));
            let s = Script::Seq(vec![Script::Prim(Action::GoTo { location: e("storage_lockers") })]);
            execute(&s, &mut eff, &signal).unwrap()
        });
        std::thread::sleep(Duration::from_millis(150));
        interrupt.raise();
        let outcome = handle.join().unwrap();
        let ExecutionStatus::Interrupted { position } = outcome.status else { panic!("{outcome:?}") };
        assert!(position > 0.0 && position < 3.5);
    }

    #[test]
    fn pacing_parses() {
        assert_eq!(Pacing::parse("instant"), Ok(Pacing::Instant));
        assert_eq!(Pacing::parse("scaled:4"), Ok(Pacing::Scaled(4.0)));
        assert!(Pacing::parse("scaled:-1").is_err());
        assert!(Pacing::parse("fast").is_err());
    }

    #[test]
    fn missing_history_is_a_meta_output() {
        let m = model();
        let s = Script::Prim(Action::QueryHistory {
            sensor: Sensor::Co2,
            location: e("mid_deck"),
            time: Term::Time(TimeRef::new(9, 0).unwrap()),
        });
        let r = evaluate(&s, &m, &m.initial_state()).unwrap();
        assert!(matches!(r.meta[0], MetaOutput::PresupFailure(PresupFailure::NoReading { .. })));
    }

    #[test]
    fn unbound_variable_is_an_error() {
        let m = model();
        let s = Script::Prim(Action::GoTo { location: Term::var("y") });
        assert_eq!(evaluate(&s, &m, &m.initial_state()), Err(InterpretError::UnboundVariable("y".into())));
    }
}
