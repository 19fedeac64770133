//! Executable scripts: compilation from resolved forms, plan optimization by
//! evaluated cost, and a pretty-printer in the shell-like surface syntax.

use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discourse::{Place, ResolvedForm, ResolvedFrame, Slot};
use crate::interpreter::{self, InterpretError};
use crate::meta::MetaOutput;
use crate::world::{DoorStatus, EntityId, ReportSource, Sensor, TimeRef, WorldModel, WorldState};

/// Lists longer than this are left in the user's order.
pub const MAX_OPTIMIZED_LIST: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "term", content = "value", rename_all = "snake_case")]
pub enum Term {
    Var(String),
    Entity(EntityId),
    Sensor(Sensor),
    Time(TimeRef),
    /// The simulated clock at the moment the action runs.
    Now,
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    fn substitute(&self, var: &str, value: &Term) -> Term {
        match self {
            Term::Var(v) if v == var => value.clone(),
            other => other.clone(),
        }
    }
}

impl From<&EntityId> for Term {
    fn from(id: &EntityId) -> Term {
        Term::Entity(id.clone())
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "${v}"),
            Term::Entity(e) => write!(f, "{e}"),
            Term::Sensor(s) => write!(f, "{s}"),
            Term::Time(t) => write!(f, "{t}"),
            Term::Now => f.write_str("now"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    GoTo { location: Term },
    ReturnTo { location: Term },
    OpenDoor { door: Term },
    CloseDoor { door: Term },
    MeasureHere { sensor: Sensor },
    QueryHistory { sensor: Sensor, location: Term, time: Term },
    Halt,
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::GoTo { .. } => "go_to",
            Action::ReturnTo { .. } => "return_to",
            Action::OpenDoor { .. } => "open_door",
            Action::CloseDoor { .. } => "close_door",
            Action::MeasureHere { .. } => "measure",
            Action::QueryHistory { .. } => "query_history",
            Action::Halt => "halt",
        }
    }

    /// Arguments in rule-parameter order.
    pub fn args(&self) -> Vec<Term> {
        match self {
            Action::GoTo { location } | Action::ReturnTo { location } => vec![location.clone()],
            Action::OpenDoor { door } | Action::CloseDoor { door } => vec![door.clone()],
            Action::MeasureHere { sensor } => vec![Term::Sensor(*sensor)],
            Action::QueryHistory { sensor, location, time } => {
                vec![Term::Sensor(*sensor), location.clone(), time.clone()]
            }
            Action::Halt => Vec::new(),
        }
    }

    fn map_terms(&self, f: impl Fn(&Term) -> Term) -> Action {
        match self {
            Action::GoTo { location } => Action::GoTo { location: f(location) },
            Action::ReturnTo { location } => Action::ReturnTo { location: f(location) },
            Action::OpenDoor { door } => Action::OpenDoor { door: f(door) },
            Action::CloseDoor { door } => Action::CloseDoor { door: f(door) },
            Action::MeasureHere { sensor } => Action::MeasureHere { sensor: *sensor },
            Action::QueryHistory { sensor, location, time } => {
                Action::QueryHistory { sensor: *sensor, location: f(location), time: f(time) }
            }
            Action::Halt => Action::Halt,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.args().iter().map(Term::to_string).collect();
        if args.is_empty() {
            f.write_str(self.name())
        } else {
            write!(f, "{} {}", self.name(), args.join(" "))
        }
    }
}

/// The only attribute in this domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    OpenClosed,
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("open_closed")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusTest {
    pub entity: Term,
    pub attribute: Attribute,
    pub value: DoorStatus,
}

/// Payload of a `PresupFail` node, with its door still a term.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "failure", rename_all = "snake_case")]
pub enum FailureTemplate {
    AlreadyInState { door: Term, state: DoorStatus },
}

/// Effector primitives that rule bodies bottom out in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum Effect {
    Travel { to: Term },
    Sense { sensor: Term },
    Recall { sensor: Term, location: Term, time: Term },
    Halt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Script {
    Seq(Vec<Script>),
    Foreach { var: String, values: Vec<EntityId>, body: Box<Script> },
    IfThenElse { test: StatusTest, then: Box<Script>, otherwise: Box<Script> },
    Prim(Action),
    PresupFail(FailureTemplate),
    ChangeStatus { entity: Term, attribute: Attribute, value: DoorStatus },
    Effect(Effect),
}

impl Script {
    /// Replaces free occurrences of `var`.
    pub fn substitute(&self, var: &str, value: &Term) -> Script {
        let sub = |t: &Term| t.substitute(var, value);
        match self {
            Script::Seq(items) => Script::Seq(items.iter().map(|s| s.substitute(var, value)).collect()),
            Script::Foreach { var: inner, values, body } => Script::Foreach {
                var: inner.clone(),
                values: values.clone(),
                body: if inner == var { body.clone() } else { Box::new(body.substitute(var, value)) },
            },
            Script::IfThenElse { test, then, otherwise } => Script::IfThenElse {
                test: StatusTest { entity: sub(&test.entity), attribute: test.attribute, value: test.value },
                then: Box::new(then.substitute(var, value)),
                otherwise: Box::new(otherwise.substitute(var, value)),
            },
            Script::Prim(a) => Script::Prim(a.map_terms(sub)),
            Script::PresupFail(FailureTemplate::AlreadyInState { door, state }) => {
                Script::PresupFail(FailureTemplate::AlreadyInState { door: sub(door), state: *state })
            }
            Script::ChangeStatus { entity, attribute, value: v } => {
                Script::ChangeStatus { entity: sub(entity), attribute: *attribute, value: *v }
            }
            Script::Effect(e) => Script::Effect(match e {
                Effect::Travel { to } => Effect::Travel { to: sub(to) },
                Effect::Sense { sensor } => Effect::Sense { sensor: sub(sensor) },
                Effect::Recall { sensor, location, time } => {
                    Effect::Recall { sensor: sub(sensor), location: sub(location), time: sub(time) }
                }
                Effect::Halt => Effect::Halt,
            }),
        }
    }

    /// Primitive actions in execution order, with Foreach unrolled.
    pub fn actions(&self) -> Vec<Action> {
        let mut out = Vec::new();
        self.collect_actions(&mut out);
        out
    }

    fn collect_actions(&self, out: &mut Vec<Action>) {
        match self {
            Script::Seq(items) => items.iter().for_each(|s| s.collect_actions(out)),
            Script::Foreach { var, values, body } => {
                for v in values {
                    body.substitute(var, &Term::Entity(v.clone())).collect_actions(out);
                }
            }
            Script::IfThenElse { then, otherwise, .. } => {
                then.collect_actions(out);
                otherwise.collect_actions(out);
            }
            Script::Prim(a) => out.push(a.clone()),
            _ => {}
        }
    }

    /// Free variables not bound by an enclosing Foreach.
    pub fn free_vars(&self) -> Vec<String> {
        fn term(t: &Term, bound: &[String], out: &mut Vec<String>) {
            if let Term::Var(v) = t {
                if !bound.contains(v) && !out.contains(v) {
                    out.push(v.clone());
                }
            }
        }
        fn walk(s: &Script, bound: &mut Vec<String>, out: &mut Vec<String>) {
            match s {
                Script::Seq(items) => items.iter().for_each(|i| walk(i, bound, out)),
                Script::Foreach { var, body, .. } => {
                    bound.push(var.clone());
                    walk(body, bound, out);
                    bound.pop();
                }
                Script::IfThenElse { test, then, otherwise } => {
                    term(&test.entity, bound, out);
                    walk(then, bound, out);
                    walk(otherwise, bound, out);
                }
                Script::Prim(a) => a.args().iter().for_each(|t| term(t, bound, out)),
                Script::PresupFail(FailureTemplate::AlreadyInState { door, .. }) => term(door, bound, out),
                Script::ChangeStatus { entity, .. } => term(entity, bound, out),
                Script::Effect(e) => match e {
                    Effect::Travel { to } => term(to, bound, out),
                    Effect::Sense { sensor } => term(sensor, bound, out),
                    Effect::Recall { sensor, location, time } => {
                        for t in [sensor, location, time] {
                            term(t, bound, out);
                        }
                    }
                    Effect::Halt => {}
                },
            }
        }
        let mut out = Vec::new();
        walk(self, &mut Vec::new(), &mut out);
        out
    }

    /// The first Foreach in pre-order, if any.
    pub fn first_foreach(&self) -> Option<&Script> {
        match self {
            Script::Foreach { .. } => Some(self),
            Script::Seq(items) => items.iter().find_map(Script::first_foreach),
            _ => None,
        }
    }

    fn first_foreach_mut(&mut self) -> Option<&mut Vec<EntityId>> {
        match self {
            Script::Foreach { values, .. } => Some(values),
            Script::Seq(items) => items.iter_mut().find_map(Script::first_foreach_mut),
            _ => None,
        }
    }

    fn pretty(&self, f: &mut fmt::Formatter<'_>, indent: usize) -> fmt::Result {
        let pad = "  ".repeat(indent);
        match self {
            Script::Seq(items) => items.iter().try_for_each(|s| s.pretty(f, indent)),
            Script::Foreach { var, values, body } => {
                let list: Vec<&str> = values.iter().map(EntityId::as_str).collect();
                writeln!(f, "{pad}foreach {var} ({})", list.join(" "))?;
                body.pretty(f, indent + 1)?;
                writeln!(f, "{pad}end")
            }
            Script::IfThenElse { test, then, otherwise } => {
                writeln!(f, "{pad}if status({}, {}, {})", test.entity, test.attribute, test.value)?;
                then.pretty(f, indent + 1)?;
                writeln!(f, "{pad}else")?;
                otherwise.pretty(f, indent + 1)?;
                writeln!(f, "{pad}endif")
            }
            Script::Prim(a) => writeln!(f, "{pad}{a}"),
            Script::PresupFail(FailureTemplate::AlreadyInState { door, state }) => {
                writeln!(f, "{pad}presupposition_failure already_{state} {door}")
            }
            Script::ChangeStatus { entity, attribute, value } => {
                writeln!(f, "{pad}change_status {entity} {attribute} {value}")
            }
            Script::Effect(e) => match e {
                Effect::Travel { to } => writeln!(f, "{pad}travel {to}"),
                Effect::Sense { sensor } => writeln!(f, "{pad}sense {sensor}"),
                Effect::Recall { sensor, location, time } => writeln!(f, "{pad}recall {sensor} {location} {time}"),
                Effect::Halt => writeln!(f, "{pad}halt"),
            },
        }
    }
}

/// Multi-line surface syntax: `foreach x (a b)` ... `end`.
impl fmt::Display for Script {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.pretty(f, 0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("form has unresolved slots")]
    UncompilableForm,
    #[error("answers do not compile to scripts")]
    NotACommand,
}

const LOOP_VAR: &str = "x";

/// Compiles a fully resolved form. A location set followed by further
/// actions becomes a Foreach whose body holds the GoTo and every later
/// action.
pub fn compile(rf: &ResolvedForm) -> Result<Script, CompileError> {
    if !rf.is_resolved() {
        return Err(CompileError::UncompilableForm);
    }
    if rf.answer().is_some() || rf.frames.is_empty() {
        return Err(CompileError::NotACommand);
    }
    let items = compile_frames(&rf.frames)?;
    Ok(match <[Script; 1]>::try_from(items) {
        Ok([foreach @ Script::Foreach { .. }]) => foreach,
        Ok([single]) => Script::Seq(vec![single]),
        Err(items) => Script::Seq(items),
    })
}

fn compile_frames(frames: &[ResolvedFrame]) -> Result<Vec<Script>, CompileError> {
    let mut out = Vec::new();
    for (i, frame) in frames.iter().enumerate() {
        match frame {
            ResolvedFrame::Goto { targets: Slot::Bound(targets) } => {
                if let [single] = targets.as_slice() {
                    out.push(Script::Prim(Action::GoTo { location: single.into() }));
                    continue;
                }
                let mut body = vec![Script::Prim(Action::GoTo { location: Term::var(LOOP_VAR) })];
                body.extend(compile_frames(&frames[i + 1..])?);
                out.push(foreach(targets, body));
                return Ok(out);
            }
            ResolvedFrame::Measure { sensor, location: Slot::Bound(place), time, source } => {
                let historical = *source == ReportSource::Fixed || time.is_some();
                let time = time.map(Term::Time).unwrap_or(Term::Now);
                match place {
                    Place::Here => out.push(Script::Prim(Action::MeasureHere { sensor: *sensor })),
                    Place::At(locs) => {
                        let per_location = |loc: Term| -> Vec<Script> {
                            if historical {
                                vec![Script::Prim(Action::QueryHistory {
                                    sensor: *sensor,
                                    location: loc,
                                    time: time.clone(),
                                })]
                            } else {
                                vec![
                                    Script::Prim(Action::GoTo { location: loc }),
                                    Script::Prim(Action::MeasureHere { sensor: *sensor }),
                                ]
                            }
                        };
                        if let [single] = locs.as_slice() {
                            out.extend(per_location(single.into()));
                        } else {
                            out.push(foreach(locs, per_location(Term::var(LOOP_VAR))));
                        }
                    }
                }
            }
            ResolvedFrame::SetDoor { doors: Slot::Bound(doors), goal } => {
                let action = |door: Term| match goal {
                    DoorStatus::Open => Script::Prim(Action::OpenDoor { door }),
                    DoorStatus::Closed => Script::Prim(Action::CloseDoor { door }),
                };
                if let [single] = doors.as_slice() {
                    out.push(action(single.into()));
                } else {
                    out.push(foreach(doors, vec![action(Term::var(LOOP_VAR))]));
                }
            }
            ResolvedFrame::Stop => out.push(Script::Prim(Action::Halt)),
            ResolvedFrame::GoBack { target: Slot::Bound(target) } => {
                out.push(Script::Prim(Action::ReturnTo { location: target.into() }))
            }
            ResolvedFrame::Answer { .. } => return Err(CompileError::NotACommand),
            _ => return Err(CompileError::UncompilableForm),
        }
    }
    Ok(out)
}

fn foreach(values: &[EntityId], mut body: Vec<Script>) -> Script {
    let body = if body.len() == 1 { body.pop().unwrap() } else { Script::Seq(body) };
    Script::Foreach { var: LOOP_VAR.to_string(), values: values.to_vec(), body: Box::new(body) }
}

/// Picks the ordering of the first Foreach's value list with the least
/// evaluated cost from `start`. Ties keep the earliest permutation in
/// lexicographic index order, so the user's own order wins a tie.
pub fn optimize(
    s: &Script,
    model: &WorldModel,
    start: &WorldState,
) -> Result<(Script, Vec<MetaOutput>), InterpretError> {
    let cost = |script: &Script| interpreter::evaluate(script, model, start).map(|r| r.cost_seconds);
    let original = match s.first_foreach() {
        Some(Script::Foreach { values, .. }) if values.len() > 1 && values.len() <= MAX_OPTIMIZED_LIST => {
            values.clone()
        }
        _ => {
            let c = cost(s)?;
            return Ok((s.clone(), vec![MetaOutput::Cost(c)]));
        }
    };
    let mut best: Option<(Script, f64)> = None;
    for order in original.iter().cloned().permutations(original.len()) {
        let mut candidate = s.clone();
        *candidate.first_foreach_mut().expect("foreach present") = order;
        let c = cost(&candidate)?;
        if best.as_ref().is_none_or(|(_, b)| c < *b) {
            best = Some((candidate, c));
        }
    }
    let (script, c) = best.expect("at least one permutation");
    Ok((script, vec![MetaOutput::Cost(c)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discourse::{normalize, resolve, DialogueContext};
    use crate::lingform::{parse, tokenize, Lexicon};

    fn form(text: &str) -> ResolvedForm {
        let model = WorldModel::default_shuttle();
        let lf = parse(&tokenize(text).unwrap(), &Lexicon::from_world(&model)).unwrap();
        let state = model.initial_state();
        resolve(&normalize(&lf), &DialogueContext::new(model.start()), &model, &state).remove(0).form
    }

    fn ids(v: &[&str]) -> Vec<EntityId> {
        v.iter().map(|s| EntityId::from(*s)).collect()
    }

    #[test]
    fn goto_set_plus_measure_gets_wide_scope() {
        let s = compile(&form("go to flight deck and lower deck and measure pressure")).unwrap();
        assert_eq!(
            s,
            Script::Foreach {
                var: "x".into(),
                values: ids(&["flight_deck", "lower_deck"]),
                body: Box::new(Script::Seq(vec![
                    Script::Prim(Action::GoTo { location: Term::var("x") }),
                    Script::Prim(Action::MeasureHere { sensor: Sensor::Pressure }),
                ])),
            }
        );
        assert!(s.free_vars().is_empty());
        assert_eq!(s.to_string(), "foreach x (flight_deck lower_deck)\n  go_to $x\n  measure pressure\nend\n");
    }

    #[test]
    fn single_door_action() {
        assert_eq!(
            compile(&form("close crew hatch")).unwrap(),
            Script::Seq(vec![Script::Prim(Action::CloseDoor { door: Term::Entity("crew_hatch".into()) })])
        );
    }

    #[test]
    fn history_query_compiles_to_query_history() {
        let s = compile(&form("what was the carbon dioxide level at the pilot's seat at fifteen oh five")).unwrap();
        assert_eq!(
            s,
            Script::Seq(vec![Script::Prim(Action::QueryHistory {
                sensor: Sensor::Co2,
                location: Term::Entity("pilot_seat".into()),
                time: Term::Time(TimeRef::new(15, 5).unwrap()),
            })])
        );
    }

    #[test]
    fn unresolved_forms_do_not_compile() {
        assert_eq!(compile(&form("close both doors")), Err(CompileError::UncompilableForm));
        assert_eq!(compile(&form("yes")), Err(CompileError::NotACommand));
    }

    #[test]
    fn optimizer_reorders_from_crew_hatch() {
        let model = WorldModel::default_shuttle();
        let s = compile(&form("move to storage lockers, commander's seat and flight deck and measure temperature"))
            .unwrap();
        let (best, meta) = optimize(&s, &model, &model.initial_state()).unwrap();
        let Some(Script::Foreach { values, .. }) = best.first_foreach() else { panic!() };
        assert_eq!(values, &ids(&["flight_deck", "commander_seat", "storage_lockers"]));
        // 3.5 units of travel at 30 s plus three 5 s measurements.
        assert_eq!(meta, vec![MetaOutput::Cost(3.5 * 30.0 + 15.0)]);
    }

    #[test]
    fn optimizer_from_storage_lockers() {
        let model = WorldModel::default_shuttle();
        let s = compile(&form("move to storage lockers, commander's seat and flight deck and measure temperature"))
            .unwrap();
        let mut start = model.initial_state();
        start.position = 3.5;
        start.nearest = "storage_lockers".into();
        let (best, _) = optimize(&s, &model, &start).unwrap();
        let Some(Script::Foreach { values, .. }) = best.first_foreach() else { panic!() };
        assert_eq!(values, &ids(&["storage_lockers", "commander_seat", "flight_deck"]));
    }

    #[test]
    fn singleton_and_plain_scripts_unchanged() {
        let model = WorldModel::default_shuttle();
        let s = compile(&form("go to mid deck")).unwrap();
        let (best, meta) = optimize(&s, &model, &model.initial_state()).unwrap();
        assert_eq!(best, s);
        assert_eq!(meta, vec![MetaOutput::Cost(60.0)]);
    }

    #[test]
    fn ties_keep_user_order() {
        let model = WorldModel::default_shuttle();
        // Door actions involve no travel, so every order costs the same.
        let s = Script::Foreach {
            var: "x".into(),
            values: ids(&["mid_hatch", "crew_hatch"]),
            body: Box::new(Script::Prim(Action::CloseDoor { door: Term::var("x") })),
        };
        let (best, _) = optimize(&s, &model, &model.initial_state()).unwrap();
        assert_eq!(best, s);
    }
}
