//! Dialogue manager: runs the pipeline, ranks interpretations by their
//! meta-outputs, chooses a dialogue move and realizes it as text.

use std::sync::Arc;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::discourse::{
    normalize, resolve, update_context, DialogueContext, Expects, PendingAction, Place, ResolvedForm, ResolvedFrame,
    Slot, TurnOutcome,
};
use crate::interpreter::{self, EvalResult};
use crate::lingform::{detect_dubious, parse, tokenize, LinguisticForm, ParseError, Polarity, Lexicon};
use crate::meta::{MetaOutput, PresupFailure, Severity, SlotKind};
use crate::script::{compile, optimize, Action, Script};
use crate::words::{number_word, time_words};
use crate::world::{EntityId, Report, ReportSource, ReportTime, Seconds, Sensor, WorldModel, WorldState};

pub const MISHEARD: &str = "I'm sorry, I think I misheard you.";
pub const ACKNOWLEDGED: &str = "Okay.";

/// One candidate reading of a turn with everything the pipeline learned
/// about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpretation {
    pub form: ResolvedForm,
    /// Compiled and optimized; `None` if the form did not compile.
    pub script: Option<Script>,
    pub eval: Option<EvalResult>,
    /// Meta-outputs of every stage, in stage order.
    pub meta: Vec<MetaOutput>,
    pub cost: Option<Seconds>,
}

impl Interpretation {
    fn unscripted(form: ResolvedForm, meta: Vec<MetaOutput>) -> Interpretation {
        Interpretation { form, script: None, eval: None, meta, cost: None }
    }

    /// Severity of a single meta-output in this candidate's context. A plan
    /// failure on an entity the recency default picked outranks the
    /// referential failures, so an explicit clarification wins over it.
    pub fn severity_of(&self, m: &MetaOutput) -> Severity {
        match m {
            MetaOutput::PresupFailure(PresupFailure::AlreadyInState { door, .. }) if self.defaulted(door) => {
                Severity::DefaultedPlanFailure
            }
            other => other.severity(),
        }
    }

    fn defaulted(&self, entity: &EntityId) -> bool {
        self.meta
            .iter()
            .filter_map(MetaOutput::note)
            .any(|n| n.kind.is_default_binding() && n.entities.contains(entity))
    }

    /// The severity of the worst meta-output.
    pub fn rank(&self) -> Severity {
        self.meta.iter().map(|m| self.severity_of(m)).max().unwrap_or(Severity::Cost)
    }

    /// The first failure of the worst severity.
    pub fn worst_failure(&self) -> Option<&PresupFailure> {
        let rank = self.rank();
        self.meta.iter().find(|m| m.failure().is_some() && self.severity_of(m) == rank).and_then(MetaOutput::failure)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "move", rename_all = "snake_case")]
pub enum DialogueMove {
    ExecuteNow { script: Script },
    ConfirmThenExecute { script: Script, paraphrase: String },
    Clarify { question: String, failure: PresupFailure, expects: Option<Expects> },
    Inform { text: String, failure: Option<PresupFailure> },
    RejectMisheard,
    Report { reports: Vec<Report>, text: String },
}

impl DialogueMove {
    pub fn name(&self) -> &'static str {
        match self {
            DialogueMove::ExecuteNow { .. } => "execute_now",
            DialogueMove::ConfirmThenExecute { .. } => "confirm_then_execute",
            DialogueMove::Clarify { .. } => "clarify",
            DialogueMove::Inform { .. } => "inform",
            DialogueMove::RejectMisheard => "reject_misheard",
            DialogueMove::Report { .. } => "report",
        }
    }
}

/// Text the system says for `m`; execution without comment says nothing.
pub fn realize(m: &DialogueMove) -> Option<String> {
    match m {
        DialogueMove::ExecuteNow { .. } => None,
        DialogueMove::ConfirmThenExecute { paraphrase, .. } => Some(paraphrase.clone()),
        DialogueMove::Clarify { question, .. } => Some(question.clone()),
        DialogueMove::Inform { text, .. } => Some(text.clone()),
        DialogueMove::RejectMisheard => Some(MISHEARD.to_string()),
        DialogueMove::Report { text, .. } => Some(text.clone()),
    }
}

// ---------------------------------------------------------------------------
// Pipeline

/// A trace line for one pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub stage: String,
    pub summary: String,
    pub meta: Vec<MetaOutput>,
}

impl StageTrace {
    fn new(stage: &str, summary: impl Into<String>, meta: Vec<MetaOutput>) -> StageTrace {
        StageTrace { stage: stage.to_string(), summary: summary.into(), meta }
    }
}

/// Runs the full pipeline on `raw`. Out-of-grammar input yields one
/// interpretation carrying `DubiousLf(out_of_grammar)`.
pub fn interpret_turn(
    raw: &str,
    ctx: &DialogueContext,
    model: &WorldModel,
    lexicon: &Lexicon,
    state: &WorldState,
) -> Result<Vec<Interpretation>, ParseError> {
    let mut trace = Vec::new();
    let utterance = tokenize(raw)?;
    Ok(match parse(&utterance, lexicon) {
        Ok(lf) => interpret_form(&lf, ctx, model, state, &mut trace),
        Err(_) => vec![out_of_grammar()],
    })
}

fn dubious(pattern: &str) -> Interpretation {
    Interpretation::unscripted(
        ResolvedForm { frames: Vec::new(), articles: Default::default() },
        vec![MetaOutput::PresupFailure(PresupFailure::DubiousLf { pattern: pattern.into() })],
    )
}

fn out_of_grammar() -> Interpretation {
    dubious("out_of_grammar")
}

fn interpret_form(
    lf: &LinguisticForm,
    ctx: &DialogueContext,
    model: &WorldModel,
    state: &WorldState,
    trace: &mut Vec<StageTrace>,
) -> Vec<Interpretation> {
    let dubious = detect_dubious(lf);
    trace.push(StageTrace::new("parse", serde_json::to_string(lf).unwrap_or_default(), dubious.clone()));
    let df = normalize(lf);
    let candidates = resolve(&df, ctx, model, state);
    let mut out = Vec::with_capacity(candidates.len());
    for (i, candidate) in candidates.into_iter().enumerate() {
        trace.push(StageTrace::new("resolve", format!("#{i} {}", summarize(&candidate.form, &candidate.meta)), candidate.meta.clone()));
        let mut meta = dubious.clone();
        meta.extend(candidate.meta);
        let Ok(compiled) = compile(&candidate.form) else {
            out.push(Interpretation::unscripted(candidate.form, meta));
            continue;
        };
        let optimized = optimize(&compiled, model, state).map(|(s, _)| s);
        let Ok(script) = optimized else {
            out.push(Interpretation::unscripted(candidate.form, meta));
            continue;
        };
        trace.push(StageTrace::new("script", format!("#{i} {}", one_line(&script)), Vec::new()));
        match interpreter::evaluate(&script, model, state) {
            Ok(eval) => {
                trace.push(StageTrace::new(
                    "evaluate",
                    format!("#{i} cost {}s, {} report(s)", eval.cost_seconds, eval.predicted_reports.len()),
                    eval.meta.clone(),
                ));
                meta.extend(eval.meta.iter().cloned());
                out.push(Interpretation {
                    form: candidate.form,
                    cost: Some(eval.cost_seconds),
                    script: Some(script),
                    eval: Some(eval),
                    meta,
                });
            }
            Err(_) => out.push(Interpretation::unscripted(candidate.form, meta)),
        }
    }
    out
}

fn one_line(s: &Script) -> String {
    s.to_string().lines().map(str::trim).collect::<Vec<_>>().join("; ")
}

fn ids(v: &[EntityId]) -> String {
    v.iter().map(EntityId::as_str).join(",")
}

fn summarize(form: &ResolvedForm, meta: &[MetaOutput]) -> String {
    fn slot(s: &Slot<Vec<EntityId>>) -> String {
        match s {
            Slot::Bound(v) => ids(v),
            Slot::Unresolved { expects: Some(sort) } => format!("?{sort}"),
            Slot::Unresolved { expects: None } => "?".to_string(),
        }
    }
    let frames = form
        .frames
        .iter()
        .map(|f| match f {
            ResolvedFrame::Goto { targets } => format!("go_to({})", slot(targets)),
            ResolvedFrame::Measure { sensor, location, time, source } => {
                let place = match location {
                    Slot::Bound(Place::Here) => "here".to_string(),
                    Slot::Bound(Place::At(v)) => ids(v),
                    Slot::Unresolved { .. } => "?".to_string(),
                };
                let when = time.map(|t| format!(",{t}")).unwrap_or_default();
                let fixed = if *source == ReportSource::Fixed { ",fixed" } else { "" };
                format!("measure({sensor}@{place}{when}{fixed})")
            }
            ResolvedFrame::SetDoor { doors, goal } => format!("set_door({},{goal})", slot(doors)),
            ResolvedFrame::Stop => "stop".to_string(),
            ResolvedFrame::GoBack { target: Slot::Bound(t) } => format!("go_back({t})"),
            ResolvedFrame::GoBack { .. } => "go_back(?)".to_string(),
            ResolvedFrame::Answer { polarity } => format!("answer({polarity:?})").to_lowercase(),
            ResolvedFrame::Missing => "?".to_string(),
        })
        .join("; ");
    let notes = meta
        .iter()
        .filter_map(MetaOutput::note)
        .map(|n| format!("{} [{}]", ids(&n.entities), n.kind.name()))
        .join(", ");
    if notes.is_empty() {
        frames
    } else {
        format!("{frames} | {notes}")
    }
}

/// Chooses the candidate whose worst meta-output is least severe; ties go
/// to the earliest candidate, which is the resolution default.
pub fn select(interps: &[Interpretation]) -> Option<usize> {
    interps.iter().position_min_by_key(|i| i.rank())
}

/// Picks the move for the selected interpretation. Only the most severe
/// meta-output is ever realized.
pub fn choose_move(best: &Interpretation, model: &WorldModel) -> DialogueMove {
    if let Some(failure) = best.worst_failure() {
        return move_for_failure(failure, best, model);
    }
    let (Some(script), Some(eval)) = (&best.script, &best.eval) else {
        return DialogueMove::RejectMisheard;
    };
    if best.form.is_hazard_command() {
        return DialogueMove::ExecuteNow { script: script.clone() };
    }
    if eval.cost_seconds < model.confirm_threshold {
        let actions = script.actions();
        if !actions.is_empty() && actions.iter().all(|a| matches!(a, Action::QueryHistory { .. })) {
            let text = eval.predicted_reports.iter().map(|r| report_text(r, model)).join(" ");
            return DialogueMove::Report { reports: eval.predicted_reports.clone(), text };
        }
        return DialogueMove::ExecuteNow { script: script.clone() };
    }
    DialogueMove::ConfirmThenExecute { script: script.clone(), paraphrase: paraphrase(script, &best.form, model) }
}

fn move_for_failure(failure: &PresupFailure, best: &Interpretation, model: &WorldModel) -> DialogueMove {
    let clarify = |question: String| DialogueMove::Clarify {
        question,
        failure: failure.clone(),
        expects: best.form.first_hole(),
    };
    let inform = |text: String| DialogueMove::Inform { text, failure: Some(failure.clone()) };
    match failure {
        PresupFailure::DubiousLf { .. } => DialogueMove::RejectMisheard,
        PresupFailure::IncorrectSizeOfSet { actual, .. } => {
            inform(format!("There are in fact {} of them.", number_word(*actual as u32)))
        }
        PresupFailure::UnderspecifiedDefinite { sort } => clarify(format!("Which {sort} do you mean?")),
        PresupFailure::UnresolvedPronoun { word } => clarify(format!("What do you mean by '{word}'?")),
        PresupFailure::MissingArgument { slot: SlotKind::Location } => clarify("Where do you mean?".to_string()),
        PresupFailure::MissingArgument { slot: SlotKind::Command } => {
            clarify("What do you want me to do?".to_string())
        }
        PresupFailure::AlreadyInState { door, state } => {
            inform(format!("The {} is already {state}.", model.label(door)))
        }
        PresupFailure::SortMismatch { entity, expected } => {
            inform(format!("The {} is not a {expected}.", model.label(entity)))
        }
        PresupFailure::NoReading { sensor, location, time } => inform(format!(
            "I have no {} reading for the {} at {}.",
            sensor_phrase(*sensor),
            model.label(location),
            time_words(*time)
        )),
    }
}

// ---------------------------------------------------------------------------
// Templates

pub fn sensor_phrase(sensor: Sensor) -> &'static str {
    match sensor {
        Sensor::Co2 => "carbon dioxide level",
        Sensor::Temperature => "temperature",
        Sensor::Pressure => "pressure",
    }
}

pub fn sensor_value(sensor: Sensor, value: f64) -> String {
    match sensor {
        Sensor::Co2 if value.fract() == 0.0 && (0.0..100.0).contains(&value) => {
            format!("{} percent", number_word(value as u32))
        }
        Sensor::Co2 => format!("{value} percent"),
        Sensor::Temperature => format!("{value:.1} degrees Celsius"),
        Sensor::Pressure => format!("{value} kilopascals"),
    }
}

pub fn report_text(r: &Report, model: &WorldModel) -> String {
    let phrase = sensor_phrase(r.sensor);
    let label = model.label(&r.location);
    let value = sensor_value(r.sensor, r.value);
    match (&r.source, &r.time) {
        (ReportSource::Fixed, ReportTime::At(t)) => format!(
            "According to the fixed sensors, at {} the {phrase} at the {label} was {value}.",
            time_words(*t)
        ),
        _ => format!("The {phrase} at the {label} is {value}."),
    }
}

fn name(id: &EntityId, form: &ResolvedForm, model: &WorldModel) -> String {
    if form.articles.contains(id) {
        format!("the {}", model.label(id))
    } else {
        model.label(id).to_string()
    }
}

/// "A", "A and then B", "A, B and then C".
fn itinerary(names: &[String]) -> String {
    match names {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and then {last}", init.join(", ")),
    }
}

/// "A", "A and B", "A, B and C".
fn conjunction(names: &[String]) -> String {
    match names {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn action_clause(a: &Action, next: Option<&Script>, form: &ResolvedForm, model: &WorldModel) -> String {
    let term = |t: &crate::script::Term| match t {
        crate::script::Term::Entity(e) => name(e, form, model),
        other => other.to_string(),
    };
    match a {
        Action::GoTo { location } => {
            let measuring = matches!(next, Some(Script::Prim(Action::MeasureHere { .. })));
            format!("{} {}", if measuring { "move to" } else { "go to" }, term(location))
        }
        Action::ReturnTo { location } => format!("return to {}", term(location)),
        Action::OpenDoor { door } => format!("open {}", term(door)),
        Action::CloseDoor { door } => format!("close {}", term(door)),
        Action::MeasureHere { sensor } => format!("measure {}", sensor_phrase(*sensor)),
        Action::QueryHistory { sensor, location, time } => {
            let when = match time {
                crate::script::Term::Time(t) => format!(" at {}", time_words(*t)),
                _ => String::new(),
            };
            format!("look up the {} at {}{when}", sensor_phrase(*sensor), term(location))
        }
        Action::Halt => "stop".to_string(),
    }
}

fn items(s: &Script) -> Vec<&Script> {
    match s {
        Script::Seq(items) => items.iter().collect(),
        other => vec![other],
    }
}

/// The confirmation question for `script`: "I will ... and I will ..., okay?".
pub fn paraphrase(script: &Script, form: &ResolvedForm, model: &WorldModel) -> String {
    let mut clauses = Vec::new();
    let top = items(script);
    for (i, item) in top.iter().enumerate() {
        match item {
            Script::Prim(a) => clauses.push(action_clause(a, top.get(i + 1).copied(), form, model)),
            Script::Foreach { var, values, body } => {
                let names: Vec<String> = values.iter().map(|v| name(v, form, model)).collect();
                let body = items(body);
                let is_var = |t: &crate::script::Term| matches!(t, crate::script::Term::Var(v) if v == var);
                for (j, b) in body.iter().enumerate() {
                    let Script::Prim(a) = b else { continue };
                    let clause = match a {
                        Action::GoTo { location } if is_var(location) => {
                            let measuring = body[j + 1..]
                                .iter()
                                .any(|s| matches!(s, Script::Prim(Action::MeasureHere { .. })));
                            format!("{} {}", if measuring { "move to" } else { "go to" }, itinerary(&names))
                        }
                        Action::OpenDoor { door } if is_var(door) => format!("open {}", conjunction(&names)),
                        Action::CloseDoor { door } if is_var(door) => format!("close {}", conjunction(&names)),
                        Action::QueryHistory { sensor, location, .. } if is_var(location) => {
                            format!("look up the {} at {}", sensor_phrase(*sensor), conjunction(&names))
                        }
                        other => action_clause(other, body.get(j + 1).copied(), form, model),
                    };
                    clauses.push(clause);
                }
            }
            _ => {}
        }
    }
    format!("I will {}, okay?", clauses.join(" and I will "))
}

// ---------------------------------------------------------------------------
// Turn driver

/// Everything one turn produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResult {
    pub interpretations: Vec<Interpretation>,
    pub chosen: Option<usize>,
    pub dialogue_move: DialogueMove,
    pub utterance: Option<String>,
    /// Script to execute now, if any.
    pub execute: Option<Script>,
    pub trace: Vec<StageTrace>,
}

/// One dialogue: the context plus the pipeline configuration.
#[derive(Debug, Clone)]
pub struct DialogueManager {
    model: Arc<WorldModel>,
    lexicon: Lexicon,
    ctx: DialogueContext,
}

impl DialogueManager {
    pub fn new(model: Arc<WorldModel>) -> DialogueManager {
        let lexicon = Lexicon::from_world(&model);
        let ctx = DialogueContext::new(model.start());
        DialogueManager { model, lexicon, ctx }
    }

    pub fn context(&self) -> &DialogueContext {
        &self.ctx
    }

    pub fn model(&self) -> &Arc<WorldModel> {
        &self.model
    }

    /// Locations the robot reached while executing.
    pub fn record_arrivals(&mut self, arrivals: &[EntityId]) {
        self.ctx.record_arrivals(arrivals);
    }

    fn update(&mut self, form: &ResolvedForm, outcome: TurnOutcome) {
        let ctx = std::mem::take(&mut self.ctx);
        self.ctx = update_context(ctx, form, outcome, &self.model);
    }

    /// Processes one user utterance against the current world state.
    pub fn turn(&mut self, raw: &str, state: &WorldState) -> Result<TurnResult, ParseError> {
        let utterance = tokenize(raw)?;
        let mut trace = Vec::new();
        let interpretations = match parse(&utterance, &self.lexicon) {
            Ok(LinguisticForm::Answer(polarity)) => {
                trace.push(StageTrace::new("parse", format!("answer({polarity:?})").to_lowercase(), Vec::new()));
                return Ok(self.handle_answer(polarity, trace));
            }
            Ok(lf) => interpret_form(&lf, &self.ctx, &self.model, state, &mut trace),
            Err(e) => {
                let interp = out_of_grammar();
                trace.push(StageTrace::new("parse", e.to_string(), interp.meta.clone()));
                vec![interp]
            }
        };
        let chosen = select(&interpretations).expect("pipeline yields at least one interpretation");
        let best = &interpretations[chosen];
        trace.push(StageTrace::new(
            "select",
            format!("#{chosen} of {} ({:?})", interpretations.len(), best.rank()).to_lowercase(),
            best.worst_failure().cloned().map(MetaOutput::PresupFailure).into_iter().collect(),
        ));
        let dialogue_move = choose_move(best, &self.model);
        let form = best.form.clone();
        let mut execute = None;
        match &dialogue_move {
            DialogueMove::RejectMisheard => self.update(&form, TurnOutcome::Rejected),
            DialogueMove::Inform { .. } => self.update(&form, TurnOutcome::Informed),
            DialogueMove::Clarify { expects, .. } => match expects {
                Some(expects) => self.update(&form, TurnOutcome::ClarificationPending { expects: *expects }),
                None => self.update(&form, TurnOutcome::Informed),
            },
            DialogueMove::ConfirmThenExecute { script, paraphrase } => self.update(
                &form,
                TurnOutcome::ConfirmationPending { script: script.clone(), paraphrase: paraphrase.clone() },
            ),
            DialogueMove::ExecuteNow { script } => {
                execute = Some(script.clone());
                self.update(&form, TurnOutcome::Executed { arrivals: Vec::new() });
            }
            DialogueMove::Report { .. } => self.update(&form, TurnOutcome::Executed { arrivals: Vec::new() }),
        }
        trace.push(StageTrace::new("move", dialogue_move.name(), best.cost.map(MetaOutput::Cost).into_iter().collect()));
        Ok(TurnResult {
            utterance: realize(&dialogue_move),
            interpretations,
            chosen: Some(chosen),
            dialogue_move,
            execute,
            trace,
        })
    }

    /// Yes executes the pending script verbatim; no discards it. An answer
    /// with nothing to confirm is treated as misheard.
    pub fn handle_answer(&mut self, polarity: Polarity, mut trace: Vec<StageTrace>) -> TurnResult {
        let pending = self.ctx.pending.clone();
        let mut interpretations = Vec::new();
        let (dialogue_move, execute) = match (pending, polarity) {
            (Some(PendingAction::Confirm { script, form, .. }), Polarity::Positive) => {
                self.update(&form, TurnOutcome::Executed { arrivals: Vec::new() });
                (DialogueMove::ExecuteNow { script: script.clone() }, Some(script))
            }
            (Some(PendingAction::Confirm { form, .. }), Polarity::Negative) => {
                self.update(&form, TurnOutcome::Rejected);
                (DialogueMove::Inform { text: ACKNOWLEDGED.to_string(), failure: None }, None)
            }
            // Nothing was asked, so a yes or no is most likely misrecognized.
            _ => {
                let interp = dubious("unexpected_answer");
                trace.push(StageTrace::new("select", "#0 of 1 (dubious)", interp.meta.clone()));
                self.update(&interp.form, TurnOutcome::Rejected);
                interpretations.push(interp);
                (DialogueMove::RejectMisheard, None)
            }
        };
        trace.push(StageTrace::new("move", dialogue_move.name(), Vec::new()));
        TurnResult {
            utterance: realize(&dialogue_move),
            chosen: (!interpretations.is_empty()).then_some(0),
            interpretations,
            dialogue_move,
            execute,
            trace,
        }
    }
}
