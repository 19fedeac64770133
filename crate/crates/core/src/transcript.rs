//! Transcript files and the batch runner that replays them.
//!
//! Format, one item per line:
//!
//! ```text
//! # comment
//! USER: Close both doors.
//! PSA: There are in fact three of them.
//! [PSA moves to crew hatch and closes it]
//! ```
//!
//! `PSA:` lines are compared byte-exact. Bracketed annotations are compared
//! after canonicalization against the session's events:
//!
//! | annotation                                | event                                        |
//! |-------------------------------------------|----------------------------------------------|
//! | `[PSA moves to X]`, `[PSA returns to X]`  | `RobotMoved` arriving at X                   |
//! | `[PSA moves to X, Y and Z in that order]` | one arrival per location, in order           |
//! | `[PSA opens X]`, `[PSA closes X]`         | `DoorChanged` on X                           |
//! | `[PSA moves to X and closes it]`          | arrival at X, then `DoorChanged` on X        |
//! | `[PSA starts moving to X]`                | departure toward X with no arrival that turn |
//! | `[PSA stops]`                             | `ExecutionStatus(interrupted)`               |
//!
//! When a turn's expectations end with `starts moving to X`, the runner arms
//! a travel hold on X so that the next utterance finds the robot mid-route.

use std::fmt;
use std::time::{Duration, Instant};

use similar::TextDiff;
use thiserror::Error;

use crate::interpreter::{Hold, Pacing};
use crate::service::{EventRecord, RunState, ServerEvent, ServiceError, SessionManager};
use crate::world::{DoorStatus, EntityId, WorldModel, DEFAULT_CONFIG};

/// How far along its route the robot is held for `starts moving to`.
pub const HOLD_AFTER_SECS: f64 = 10.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TranscriptError {
    #[error("line {line}: {detail}")]
    Syntax { line: usize, detail: String },
    #[error("line {line}: unknown location `{label}`")]
    UnknownLabel { line: usize, label: String },
    #[error(transparent)]
    Service(#[from] ServiceError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineKind {
    User(String),
    Psa(String),
    Action(String),
    Comment,
    Blank,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line {
    pub number: usize,
    pub raw: String,
    pub kind: LineKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub lines: Vec<Line>,
    trailing_newline: bool,
}

/// One user turn and the lines expected after it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub user: String,
    pub expected: Vec<Line>,
}

impl Transcript {
    pub fn parse(text: &str) -> Result<Transcript, TranscriptError> {
        let mut lines = Vec::new();
        let mut seen_user = false;
        for (i, raw) in text.lines().enumerate() {
            let number = i + 1;
            let trimmed = raw.trim();
            let kind = if trimmed.is_empty() {
                LineKind::Blank
            } else if trimmed.starts_with('#') {
                LineKind::Comment
            } else if let Some(rest) = trimmed.strip_prefix("USER:") {
                seen_user = true;
                LineKind::User(rest.trim().to_string())
            } else if let Some(rest) = trimmed.strip_prefix("PSA:") {
                LineKind::Psa(rest.trim().to_string())
            } else if let Some(inner) = trimmed.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
                LineKind::Action(inner.trim().to_string())
            } else {
                return Err(TranscriptError::Syntax { line: number, detail: format!("unrecognized line `{trimmed}`") });
            };
            if matches!(kind, LineKind::Psa(_) | LineKind::Action(_)) && !seen_user {
                return Err(TranscriptError::Syntax { line: number, detail: "expectation before any USER line".into() });
            }
            lines.push(Line { number, raw: raw.to_string(), kind });
        }
        Ok(Transcript { lines, trailing_newline: text.ends_with('\n') })
    }

    /// The source text, reproduced exactly.
    pub fn render(&self) -> String {
        let mut out = self.lines.iter().map(|l| l.raw.as_str()).collect::<Vec<_>>().join("\n");
        if self.trailing_newline {
            out.push('\n');
        }
        out
    }

    pub fn turns(&self) -> Vec<Turn> {
        let mut turns: Vec<Turn> = Vec::new();
        for line in &self.lines {
            match &line.kind {
                LineKind::User(text) => turns.push(Turn { user: text.clone(), expected: Vec::new() }),
                LineKind::Psa(_) | LineKind::Action(_) => {
                    if let Some(turn) = turns.last_mut() {
                        turn.expected.push(line.clone());
                    }
                }
                LineKind::Comment | LineKind::Blank => {}
            }
        }
        turns
    }
}

/// A world action in canonical form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WorldAction {
    Arrive(String),
    Door(String, DoorStatus),
    Depart(String),
    Stop,
}

impl fmt::Display for WorldAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorldAction::Arrive(l) => write!(f, "[PSA moves to {l}]"),
            WorldAction::Door(l, DoorStatus::Open) => write!(f, "[PSA opens {l}]"),
            WorldAction::Door(l, DoorStatus::Closed) => write!(f, "[PSA closes {l}]"),
            WorldAction::Depart(l) => write!(f, "[PSA starts moving to {l}]"),
            WorldAction::Stop => write!(f, "[PSA stops]"),
        }
    }
}

fn strip_article(s: &str) -> &str {
    s.strip_prefix("the ").unwrap_or(s)
}

fn split_list(s: &str) -> Vec<String> {
    let s = s.strip_suffix(" in that order").unwrap_or(s);
    s.split(", ")
        .flat_map(|part| part.split(" and "))
        .map(|p| strip_article(p.trim()).to_string())
        .filter(|p| !p.is_empty())
        .collect()
}

/// Canonical actions for one annotation (without brackets).
pub fn canonicalize(annotation: &str) -> Option<Vec<WorldAction>> {
    let body = annotation.strip_prefix("PSA ")?.trim();
    if body == "stops" {
        return Some(vec![WorldAction::Stop]);
    }
    if let Some(rest) = body.strip_prefix("starts moving to ") {
        return Some(vec![WorldAction::Depart(strip_article(rest).to_string())]);
    }
    for (verb, status) in [("closes ", DoorStatus::Closed), ("opens ", DoorStatus::Open)] {
        if let Some(rest) = body.strip_prefix(verb) {
            return Some(split_list(rest).into_iter().map(|d| WorldAction::Door(d, status)).collect());
        }
    }
    let rest = body.strip_prefix("moves to ").or_else(|| body.strip_prefix("returns to "))?;
    for (suffix, status) in [(" and closes it", DoorStatus::Closed), (" and opens it", DoorStatus::Open)] {
        if let Some(place) = rest.strip_suffix(suffix) {
            let mut actions: Vec<WorldAction> = split_list(place).into_iter().map(WorldAction::Arrive).collect();
            let last = match actions.last()? {
                WorldAction::Arrive(l) => l.clone(),
                _ => return None,
            };
            actions.push(WorldAction::Door(last, status));
            return Some(actions);
        }
    }
    Some(split_list(rest).into_iter().map(WorldAction::Arrive).collect())
}

/// Expected lines of a turn, canonicalized.
fn expected_lines(turn: &Turn) -> Result<Vec<String>, TranscriptError> {
    let mut out = Vec::new();
    for line in &turn.expected {
        match &line.kind {
            LineKind::Psa(text) => out.push(format!("PSA: {text}")),
            LineKind::Action(a) => {
                let actions = canonicalize(a).ok_or_else(|| TranscriptError::Syntax {
                    line: line.number,
                    detail: format!("unknown annotation `[{a}]`"),
                })?;
                out.extend(actions.iter().map(|a| a.to_string()));
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Canonical lines for the events of one turn.
pub fn observed_lines(events: &[EventRecord], model: &WorldModel) -> Vec<String> {
    let mut out = Vec::new();
    let mut departure: Option<(usize, String)> = None;
    for record in events {
        match &record.event {
            ServerEvent::SystemUtterance { text } => out.push(format!("PSA: {text}")),
            ServerEvent::RobotMoved { arrived: true, label, .. } => {
                departure = None;
                out.push(WorldAction::Arrive(label.clone()).to_string());
            }
            ServerEvent::RobotMoved { arrived: false, destination, .. } => {
                if departure.is_none() {
                    departure = Some((out.len(), model.label(destination).to_string()));
                }
            }
            ServerEvent::DoorChanged { door, status } => {
                out.push(WorldAction::Door(model.label(door).to_string(), *status).to_string())
            }
            ServerEvent::ExecutionStatus { status: RunState::Interrupted } => out.push(WorldAction::Stop.to_string()),
            _ => {}
        }
    }
    if let Some((at, dest)) = departure {
        out.insert(at, WorldAction::Depart(dest).to_string());
    }
    out
}

/// Result of replaying a transcript.
#[derive(Debug, Clone)]
pub struct TranscriptReport {
    pub expected: String,
    pub observed: String,
    pub elapsed: Duration,
}

impl TranscriptReport {
    pub fn passed(&self) -> bool {
        self.expected == self.observed
    }

    /// Unified diff from expected to observed; empty when they agree.
    pub fn diff(&self) -> String {
        if self.passed() {
            return String::new();
        }
        TextDiff::from_lines(&self.expected, &self.observed)
            .unified_diff()
            .header("expected", "observed")
            .to_string()
    }
}

fn find_location(model: &WorldModel, label: &str) -> Option<EntityId> {
    model.locations().iter().map(|l| &l.id).find(|id| model.label(id) == label).cloned()
}

/// Replays `transcript` in a fresh instant-paced session on `config`
/// (TOML; the shipped world when `None`).
pub fn run_transcript(transcript: &Transcript, config: Option<&str>) -> Result<TranscriptReport, TranscriptError> {
    let config = config.unwrap_or(DEFAULT_CONFIG);
    let model = WorldModel::from_toml(config).map_err(ServiceError::from)?;
    let manager = SessionManager::with_config(config)?.with_pacing(Pacing::Instant);
    let session = manager.create_session()?;
    let started = Instant::now();
    let mut expected = String::new();
    let mut observed = String::new();
    for turn in transcript.turns() {
        let lines = expected_lines(&turn)?;
        let hold = turn.expected.iter().rev().find_map(|l| match &l.kind {
            LineKind::Action(a) => Some((l.number, canonicalize(a))),
            LineKind::Psa(_) => Some((l.number, None)),
            _ => None,
        });
        if let Some((line, Some(actions))) = hold {
            if let Some(WorldAction::Depart(label)) = actions.last() {
                let destination = find_location(&model, label)
                    .ok_or_else(|| TranscriptError::UnknownLabel { line, label: label.clone() })?;
                manager.arm_hold(&session, Hold { destination, after_secs: HOLD_AFTER_SECS })?;
            }
        }
        let header = format!("USER: {}\n", turn.user);
        expected.push_str(&header);
        observed.push_str(&header);
        for l in lines {
            expected.push_str(&l);
            expected.push('\n');
        }
        let events = match manager.post_utterance(&session, &turn.user) {
            Ok(events) => events,
            Err(ServiceError::EmptyUtterance) => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        for l in observed_lines(&events, &model) {
            observed.push_str(&l);
            observed.push('\n');
        }
    }
    Ok(TranscriptReport { expected, observed, elapsed: started.elapsed() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_is_lossless() {
        let text = "# intro\n\nUSER:  Close both doors.\nPSA: There are in fact three of them.\n  [PSA stops]\n";
        let t = Transcript::parse(text).unwrap();
        assert_eq!(t.render(), text);
        assert_eq!(t.turns().len(), 1);
        assert_eq!(t.turns()[0].user, "Close both doors.");
        let no_newline = "USER: hi";
        assert_eq!(Transcript::parse(no_newline).unwrap().render(), no_newline);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(Transcript::parse("PSA: hello\n"), Err(TranscriptError::Syntax { line: 1, .. })));
        assert!(matches!(Transcript::parse("USER: a\nrobot: b\n"), Err(TranscriptError::Syntax { line: 2, .. })));
    }

    #[test]
    fn annotations_canonicalize() {
        let lines = |a: &str| canonicalize(a).unwrap().iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert_eq!(lines("PSA moves to crew hatch and closes it"), ["[PSA moves to crew hatch]", "[PSA closes crew hatch]"]);
        assert_eq!(
            lines("PSA moves to flight deck, commander's seat and storage lockers in that order"),
            ["[PSA moves to flight deck]", "[PSA moves to commander's seat]", "[PSA moves to storage lockers]"]
        );
        assert_eq!(lines("PSA returns to storage lockers"), ["[PSA moves to storage lockers]"]);
        assert_eq!(lines("PSA moves to the pilot's seat"), ["[PSA moves to pilot's seat]"]);
        assert_eq!(lines("PSA starts moving to commander's seat"), ["[PSA starts moving to commander's seat]"]);
        assert_eq!(lines("PSA stops"), ["[PSA stops]"]);
        assert_eq!(canonicalize("PSA dances"), None);
        assert_eq!(canonicalize("robot moves to mid deck"), None);
    }

    #[test]
    fn departure_without_arrival() {
        let record = |event| EventRecord { event, seq: 0 };
        let events = vec![
            record(ServerEvent::RobotMoved {
                position: 0.0,
                location: "storage_lockers".into(),
                label: "storage lockers".into(),
                arrived: false,
                destination: "commander_seat".into(),
            }),
            record(ServerEvent::SystemUtterance { text: "x".into() }),
        ];
        let model = WorldModel::default_shuttle();
        assert_eq!(observed_lines(&events, &model), ["[PSA starts moving to commander's seat]", "PSA: x"]);
    }

    #[test]
    fn short_run_matches() {
        let t = Transcript::parse(
            "USER: Close both doors.\nPSA: There are in fact three of them.\nUSER: Close crew hatch.\n[PSA closes crew hatch]\n",
        )
        .unwrap();
        let report = run_transcript(&t, None).unwrap();
        assert!(report.passed(), "{}", report.diff());
        assert_eq!(report.diff(), "");
    }

    #[test]
    fn mismatch_produces_diff() {
        let t = Transcript::parse("USER: Close both doors.\nPSA: There are two.\n").unwrap();
        let report = run_transcript(&t, None).unwrap();
        assert!(!report.passed());
        let diff = report.diff();
        assert!(diff.contains("-PSA: There are two."));
        assert!(diff.contains("+PSA: There are in fact three of them."));
    }
}
