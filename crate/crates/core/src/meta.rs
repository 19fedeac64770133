//! Meta-outputs: the side channel every translation step writes to.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::world::{DoorStatus, EntityId, Seconds, Sensor, Sort, TimeRef};

/// An argument position resolution could not fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    /// Where a reading was taken or where to go.
    Location,
    /// A bare noun phrase with no command to attach it to.
    Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PresupFailure {
    AlreadyInState { door: EntityId, state: DoorStatus },
    IncorrectSizeOfSet { claimed: usize, actual: usize, sort: Sort },
    UnderspecifiedDefinite { sort: Sort },
    UnresolvedPronoun { word: String },
    DubiousLf { pattern: String },
    MissingArgument { slot: SlotKind },
    SortMismatch { entity: EntityId, expected: Sort },
    NoReading { sensor: Sensor, location: EntityId, time: TimeRef },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoteKind {
    PronounBound,
    DefiniteBound,
    EllipsisFilled,
    DefaultLocationFilled,
    SetExpanded,
}

impl NoteKind {
    pub fn name(self) -> &'static str {
        match self {
            NoteKind::PronounBound => "pronoun_bound",
            NoteKind::DefiniteBound => "definite_bound",
            NoteKind::EllipsisFilled => "ellipsis_filled",
            NoteKind::DefaultLocationFilled => "default_location_filled",
            NoteKind::SetExpanded => "set_expanded",
        }
    }

    /// Bindings chosen by the recency default rather than by the user.
    pub fn is_default_binding(self) -> bool {
        matches!(self, NoteKind::PronounBound | NoteKind::DefiniteBound | NoteKind::DefaultLocationFilled)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionNote {
    pub kind: NoteKind,
    /// The words that were resolved.
    pub phrase: String,
    pub entities: Vec<EntityId>,
}

impl fmt::Display for ResolutionNote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<&str> = self.entities.iter().map(|e| e.as_str()).collect();
        write!(f, "{} \u{2192} {} [{}]", self.phrase, ids.join(", "), self.kind.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum MetaOutput {
    PresupFailure(PresupFailure),
    Cost(Seconds),
    Resolution(ResolutionNote),
}

/// Most severe last, so `Ord` picks the worst item with `max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Cost,
    Note,
    PlanFailure,
    Referential,
    /// A plan failure on a binding the recency default chose. Ranks above
    /// the referential failures so that an explicit clarification wins.
    DefaultedPlanFailure,
    SetSize,
    Dubious,
}

impl MetaOutput {
    pub fn severity(&self) -> Severity {
        match self {
            MetaOutput::Cost(_) => Severity::Cost,
            MetaOutput::Resolution(_) => Severity::Note,
            MetaOutput::PresupFailure(f) => f.severity(),
        }
    }

    pub fn failure(&self) -> Option<&PresupFailure> {
        match self {
            MetaOutput::PresupFailure(f) => Some(f),
            _ => None,
        }
    }

    pub fn note(&self) -> Option<&ResolutionNote> {
        match self {
            MetaOutput::Resolution(n) => Some(n),
            _ => None,
        }
    }

    pub fn cost(&self) -> Option<Seconds> {
        match self {
            MetaOutput::Cost(c) => Some(*c),
            _ => None,
        }
    }

    pub fn note_of(kind: NoteKind, phrase: impl Into<String>, entities: Vec<EntityId>) -> MetaOutput {
        MetaOutput::Resolution(ResolutionNote { kind, phrase: phrase.into(), entities })
    }
}

impl PresupFailure {
    pub fn severity(&self) -> Severity {
        match self {
            PresupFailure::DubiousLf { .. } => Severity::Dubious,
            PresupFailure::IncorrectSizeOfSet { .. } => Severity::SetSize,
            PresupFailure::UnderspecifiedDefinite { .. }
            | PresupFailure::UnresolvedPronoun { .. }
            | PresupFailure::MissingArgument { .. } => Severity::Referential,
            PresupFailure::AlreadyInState { .. }
            | PresupFailure::SortMismatch { .. }
            | PresupFailure::NoReading { .. } => Severity::PlanFailure,
        }
    }

    /// Failures raised while evaluating the plan (as opposed to while
    /// interpreting the utterance).
    pub fn is_plan_level(&self) -> bool {
        matches!(self, PresupFailure::AlreadyInState { .. } | PresupFailure::NoReading { .. })
    }
}

impl fmt::Display for PresupFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PresupFailure::AlreadyInState { door, state } => write!(f, "already_{state}({door})"),
            PresupFailure::IncorrectSizeOfSet { claimed, actual, .. } => {
                write!(f, "incorrect_size_of_set({claimed},{actual})")
            }
            PresupFailure::UnderspecifiedDefinite { sort } => write!(f, "underspecified_definite({sort})"),
            PresupFailure::UnresolvedPronoun { word } => write!(f, "unresolved_pronoun({word})"),
            PresupFailure::DubiousLf { pattern } => write!(f, "dubious_lf({pattern})"),
            PresupFailure::MissingArgument { slot } => {
                let slot = match slot {
                    SlotKind::Location => "location",
                    SlotKind::Command => "command",
                };
                write!(f, "missing_argument({slot})")
            }
            PresupFailure::SortMismatch { entity, expected } => write!(f, "sort_mismatch({entity},{expected})"),
            PresupFailure::NoReading { sensor, location, time } => {
                write!(f, "no_reading({sensor},{location},{time})")
            }
        }
    }
}

impl fmt::Display for MetaOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetaOutput::PresupFailure(p) => write!(f, "presupposition_failure({p})"),
            MetaOutput::Cost(c) => write!(f, "cost({c})"),
            MetaOutput::Resolution(n) => {
                let ids: Vec<&str> = n.entities.iter().map(EntityId::as_str).collect();
                write!(f, "resolution({}({}))", n.kind.name(), ids.join(","))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn severity_order() {
        let dubious = PresupFailure::DubiousLf { pattern: "x".into() }.severity();
        let size = PresupFailure::IncorrectSizeOfSet { claimed: 2, actual: 3, sort: Sort::Door }.severity();
        let under = PresupFailure::UnderspecifiedDefinite { sort: Sort::Door }.severity();
        let pron = PresupFailure::UnresolvedPronoun { word: "it".into() }.severity();
        let already =
            PresupFailure::AlreadyInState { door: "crew_hatch".into(), state: DoorStatus::Open }.severity();
        let note = MetaOutput::note_of(NoteKind::PronounBound, "it", vec![]).severity();
        let cost = MetaOutput::Cost(3.0).severity();
        assert!(dubious > size && size > under && under == pron && pron > already);
        assert!(already > note && note > cost);
    }

    #[test]
    fn note_display() {
        let MetaOutput::Resolution(note) = MetaOutput::note_of(NoteKind::PronounBound, "it", vec!["crew_hatch".into()])
        else {
            unreachable!()
        };
        assert_eq!(note.to_string(), "it \u{2192} crew_hatch [pronoun_bound]");
    }

    #[test]
    fn term_syntax() {
        let m = MetaOutput::PresupFailure(PresupFailure::AlreadyInState {
            door: "crew_hatch".into(),
            state: DoorStatus::Open,
        });
        assert_eq!(m.to_string(), "presupposition_failure(already_open(crew_hatch))");
        let m = MetaOutput::PresupFailure(PresupFailure::IncorrectSizeOfSet {
            claimed: 2,
            actual: 3,
            sort: Sort::Deck,
        });
        assert_eq!(m.to_string(), "presupposition_failure(incorrect_size_of_set(2,3))");
        assert_eq!(MetaOutput::Cost(105.0).to_string(), "cost(105)");
    }
}
