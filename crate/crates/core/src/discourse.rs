//! Discourse level: surface normalization, context-dependent resolution of
//! anaphora, ellipsis and definite descriptions, and the dialogue context.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::lingform::{Clause, LinguisticForm, NounPhrase, Polarity, Tense};
use crate::meta::{MetaOutput, NoteKind, PresupFailure, SlotKind};
use crate::script::Script;
use crate::world::{DoorStatus, EntityId, ReportSource, Sensor, Sort, TimeRef, WorldModel, WorldState};

/// Upper bound on the number of candidates one utterance can produce.
pub const MAX_CANDIDATES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "frame", rename_all = "snake_case")]
pub enum Frame {
    Goto { targets: NounPhrase },
    Measure { sensor: Sensor, location: Option<NounPhrase>, time: Option<TimeRef>, source: ReportSource },
    SetDoor { doors: NounPhrase, goal: DoorStatus },
    Stop,
    GoBack,
    DoAgain,
    DoSameFor { target: NounPhrase },
    BareNp { np: NounPhrase },
    Answer { polarity: Polarity },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscourseForm {
    pub frames: Vec<Frame>,
}

/// Collapses surface variants: "move to" and "go to" are the same frame, as
/// are "measure X" and "what is X".
pub fn normalize(lf: &LinguisticForm) -> DiscourseForm {
    let frames = match lf {
        LinguisticForm::Answer(polarity) => vec![Frame::Answer { polarity: *polarity }],
        LinguisticForm::Fragment(np) => vec![Frame::BareNp { np: np.clone() }],
        LinguisticForm::Command(clauses) | LinguisticForm::Query(clauses) => {
            clauses.iter().map(normalize_clause).collect()
        }
    };
    DiscourseForm { frames }
}

fn normalize_clause(clause: &Clause) -> Frame {
    match clause {
        Clause::GoTo { target, .. } => Frame::Goto { targets: target.clone() },
        Clause::Measure { sensor, location, time, fixed_sensors, tense } => {
            // Past readings only exist in the fixed-sensor history.
            let historical = *fixed_sensors || time.is_some() || (*tense == Tense::Past && location.is_some());
            Frame::Measure {
                sensor: *sensor,
                location: location.clone(),
                time: *time,
                source: if historical { ReportSource::Fixed } else { ReportSource::Mobile },
            }
        }
        Clause::Open { target } => Frame::SetDoor { doors: target.clone(), goal: DoorStatus::Open },
        Clause::Close { target } => Frame::SetDoor { doors: target.clone(), goal: DoorStatus::Closed },
        Clause::Stop => Frame::Stop,
        Clause::GoBack => Frame::GoBack,
        Clause::DoAgain => Frame::DoAgain,
        Clause::DoSameFor { target } => Frame::DoSameFor { target: target.clone() },
    }
}

// ---------------------------------------------------------------------------
// Resolved forms

/// What an unfilled slot accepts: a specific sort, or any physical place.
pub type Expects = Option<Sort>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "slot", content = "value", rename_all = "snake_case")]
pub enum Slot<T> {
    Bound(T),
    Unresolved { expects: Expects },
}

impl<T> Slot<T> {
    pub fn bound(&self) -> Option<&T> {
        match self {
            Slot::Bound(v) => Some(v),
            Slot::Unresolved { .. } => None,
        }
    }

    pub fn is_bound(&self) -> bool {
        matches!(self, Slot::Bound(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "place", content = "at", rename_all = "snake_case")]
pub enum Place {
    /// Wherever the robot is when the action runs.
    Here,
    At(Vec<EntityId>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "frame", rename_all = "snake_case")]
pub enum ResolvedFrame {
    Goto { targets: Slot<Vec<EntityId>> },
    Measure { sensor: Sensor, location: Slot<Place>, time: Option<TimeRef>, source: ReportSource },
    SetDoor { doors: Slot<Vec<EntityId>>, goal: DoorStatus },
    Stop,
    GoBack { target: Slot<EntityId> },
    Answer { polarity: Polarity },
    /// A whole command that could not be recovered from context.
    Missing,
}

impl ResolvedFrame {
    fn entities(&self) -> Vec<EntityId> {
        match self {
            ResolvedFrame::Goto { targets: Slot::Bound(ids) } | ResolvedFrame::SetDoor { doors: Slot::Bound(ids), .. } => {
                ids.clone()
            }
            ResolvedFrame::Measure { location: Slot::Bound(Place::At(ids)), .. } => ids.clone(),
            ResolvedFrame::GoBack { target: Slot::Bound(id) } => vec![id.clone()],
            _ => Vec::new(),
        }
    }

    fn is_resolved(&self) -> bool {
        match self {
            ResolvedFrame::Goto { targets } => targets.is_bound(),
            ResolvedFrame::Measure { location, .. } => location.is_bound(),
            ResolvedFrame::SetDoor { doors, .. } => doors.is_bound(),
            ResolvedFrame::GoBack { target } => target.is_bound(),
            ResolvedFrame::Missing => false,
            ResolvedFrame::Stop | ResolvedFrame::Answer { .. } => true,
        }
    }

    fn hole(&self) -> Option<Expects> {
        match self {
            ResolvedFrame::Goto { targets: Slot::Unresolved { expects } }
            | ResolvedFrame::Measure { location: Slot::Unresolved { expects }, .. }
            | ResolvedFrame::SetDoor { doors: Slot::Unresolved { expects }, .. }
            | ResolvedFrame::GoBack { target: Slot::Unresolved { expects } } => Some(*expects),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedForm {
    pub frames: Vec<ResolvedFrame>,
    /// Entities the user named with a determiner ("the pilot's seat");
    /// paraphrases echo the determiner.
    pub articles: BTreeSet<EntityId>,
}

impl ResolvedForm {
    pub fn is_resolved(&self) -> bool {
        self.frames.iter().all(ResolvedFrame::is_resolved)
    }

    /// Every entity bound anywhere in the form, in frame order.
    pub fn entities(&self) -> Vec<EntityId> {
        self.frames.iter().flat_map(ResolvedFrame::entities).collect()
    }

    /// The first unfilled slot's expectation, if any.
    pub fn first_hole(&self) -> Option<Expects> {
        self.frames.iter().find_map(ResolvedFrame::hole)
    }

    pub fn answer(&self) -> Option<Polarity> {
        match self.frames.as_slice() {
            [ResolvedFrame::Answer { polarity }] => Some(*polarity),
            _ => None,
        }
    }

    /// Stop and go-back commands bypass confirmation.
    pub fn is_hazard_command(&self) -> bool {
        self.frames.iter().any(|f| matches!(f, ResolvedFrame::Stop | ResolvedFrame::GoBack { .. }))
    }

    /// A full command worth remembering for "do that again".
    pub fn is_repeatable(&self) -> bool {
        !self.frames.is_empty()
            && self.is_resolved()
            && self.frames.iter().all(|f| {
                matches!(f, ResolvedFrame::Goto { .. } | ResolvedFrame::Measure { .. } | ResolvedFrame::SetDoor { .. })
            })
    }
}

/// One resolution candidate with the meta-outputs its construction produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub form: ResolvedForm,
    pub meta: Vec<MetaOutput>,
}

// ---------------------------------------------------------------------------
// Dialogue context

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SalienceEntry {
    pub entity: EntityId,
    pub sort: Sort,
    pub turn: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pending", rename_all = "snake_case")]
pub enum PendingAction {
    Confirm { script: Script, form: ResolvedForm, paraphrase: String },
    Clarify { held: ResolvedForm, expects: Expects },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DialogueContext {
    /// Most recent first; one entry per entity.
    pub salience: Vec<SalienceEntry>,
    pub last_command: Option<ResolvedForm>,
    pub pending: Option<PendingAction>,
    pub visited_trail: Vec<EntityId>,
    pub turn: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TurnOutcome {
    Executed { arrivals: Vec<EntityId> },
    ConfirmationPending { script: Script, paraphrase: String },
    ClarificationPending { expects: Expects },
    Informed,
    Rejected,
}

impl DialogueContext {
    pub fn new(start: &EntityId) -> DialogueContext {
        DialogueContext { visited_trail: vec![start.clone()], ..DialogueContext::default() }
    }

    pub fn mention(&mut self, entity: &EntityId, model: &WorldModel) {
        let Some(sort) = model.sort_of(entity) else { return };
        self.salience.retain(|e| &e.entity != entity);
        self.salience.insert(0, SalienceEntry { entity: entity.clone(), sort, turn: self.turn });
    }

    pub fn record_arrivals(&mut self, arrivals: &[EntityId]) {
        for a in arrivals {
            if self.visited_trail.last() != Some(a) {
                self.visited_trail.push(a.clone());
            }
        }
    }

    fn salient_ids(&self) -> Vec<EntityId> {
        self.salience.iter().map(|e| e.entity.clone()).collect()
    }
}

/// Folds the outcome of a turn into the context.
pub fn update_context(
    mut ctx: DialogueContext,
    resolved: &ResolvedForm,
    outcome: TurnOutcome,
    model: &WorldModel,
) -> DialogueContext {
    if outcome != TurnOutcome::Rejected {
        for e in resolved.entities() {
            ctx.mention(&e, model);
        }
    }
    ctx.pending = None;
    match outcome {
        TurnOutcome::Executed { arrivals } => {
            if resolved.is_repeatable() {
                ctx.last_command = Some(resolved.clone());
            }
            ctx.record_arrivals(&arrivals);
        }
        TurnOutcome::ConfirmationPending { script, paraphrase } => {
            ctx.pending = Some(PendingAction::Confirm { script, form: resolved.clone(), paraphrase });
        }
        TurnOutcome::ClarificationPending { expects } => {
            ctx.pending = Some(PendingAction::Clarify { held: resolved.clone(), expects });
        }
        TurnOutcome::Informed | TurnOutcome::Rejected => {}
    }
    ctx.turn += 1;
    ctx
}

// ---------------------------------------------------------------------------
// Resolution

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Door,
    Place,
}

impl Role {
    fn accepts(self, sort: Sort) -> bool {
        match self {
            Role::Door => sort == Sort::Door,
            Role::Place => true,
        }
    }

    fn expects(self) -> Expects {
        match self {
            Role::Door => Some(Sort::Door),
            Role::Place => None,
        }
    }

    fn for_expects(expects: Expects) -> Role {
        if expects == Some(Sort::Door) {
            Role::Door
        } else {
            Role::Place
        }
    }
}

/// One way of resolving a noun phrase.
#[derive(Debug, Clone)]
struct NpOption {
    bound: Slot<Vec<EntityId>>,
    meta: Vec<MetaOutput>,
    articles: Vec<EntityId>,
}

impl NpOption {
    fn bound(ids: Vec<EntityId>, note: Option<(NoteKind, String)>) -> NpOption {
        let meta = note.map(|(k, phrase)| MetaOutput::note_of(k, phrase, ids.clone())).into_iter().collect();
        NpOption { bound: Slot::Bound(ids), meta, articles: Vec::new() }
    }

    fn unresolved(expects: Expects, failure: PresupFailure) -> NpOption {
        NpOption {
            bound: Slot::Unresolved { expects },
            meta: vec![MetaOutput::PresupFailure(failure)],
            articles: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
struct Partial {
    frames: Vec<ResolvedFrame>,
    meta: Vec<MetaOutput>,
    salience: Vec<EntityId>,
    articles: BTreeSet<EntityId>,
}

impl Partial {
    fn with(&self, frames: Vec<ResolvedFrame>, opt_meta: &[MetaOutput], articles: &[EntityId]) -> Partial {
        let mut next = self.clone();
        for frame in frames {
            for e in frame.entities() {
                next.salience.retain(|s| s != &e);
                next.salience.insert(0, e);
            }
            next.frames.push(frame);
        }
        next.meta.extend_from_slice(opt_meta);
        next.articles.extend(articles.iter().cloned());
        next
    }
}

struct Resolver<'a> {
    ctx: &'a DialogueContext,
    model: &'a WorldModel,
    state: &'a WorldState,
}

/// Resolves `df` against the dialogue context and the world. Candidates are
/// ordered by the default strategy: most recent sortally appropriate
/// antecedent first, unresolved alternatives last.
pub fn resolve(df: &DiscourseForm, ctx: &DialogueContext, model: &WorldModel, state: &WorldState) -> Vec<Candidate> {
    let r = Resolver { ctx, model, state };
    let mut partials = vec![Partial {
        frames: Vec::new(),
        meta: Vec::new(),
        salience: ctx.salient_ids(),
        articles: BTreeSet::new(),
    }];
    for frame in &df.frames {
        let mut next = Vec::new();
        for p in &partials {
            for (frames, meta, articles) in r.frame(frame, p) {
                if next.len() < MAX_CANDIDATES {
                    next.push(p.with(frames, &meta, &articles));
                }
            }
        }
        partials = next;
    }
    partials
        .into_iter()
        .map(|p| Candidate { form: ResolvedForm { frames: p.frames, articles: p.articles }, meta: p.meta })
        .collect()
}

type FrameOption = (Vec<ResolvedFrame>, Vec<MetaOutput>, Vec<EntityId>);

impl<'a> Resolver<'a> {
    fn frame(&self, frame: &Frame, p: &Partial) -> Vec<FrameOption> {
        match frame {
            Frame::Goto { targets } => self
                .np(targets, Role::Place, &p.salience)
                .into_iter()
                .map(|o| (vec![ResolvedFrame::Goto { targets: o.bound }], o.meta, o.articles))
                .collect(),
            Frame::SetDoor { doors, goal } => self
                .np(doors, Role::Door, &p.salience)
                .into_iter()
                .map(|o| (vec![ResolvedFrame::SetDoor { doors: o.bound, goal: *goal }], o.meta, o.articles))
                .collect(),
            Frame::Measure { sensor, location, time, source } => {
                let options = match location {
                    Some(np) => self.np(np, Role::Place, &p.salience),
                    None if *source == ReportSource::Mobile && time.is_none() => {
                        let frame = ResolvedFrame::Measure {
                            sensor: *sensor,
                            location: Slot::Bound(Place::Here),
                            time: None,
                            source: source.clone(),
                        };
                        return vec![(vec![frame], Vec::new(), Vec::new())];
                    }
                    None => vec![self.default_location(&p.salience)],
                };
                options
                    .into_iter()
                    .map(|o| {
                        let location = match o.bound {
                            Slot::Bound(ids) => Slot::Bound(Place::At(ids)),
                            Slot::Unresolved { expects } => Slot::Unresolved { expects },
                        };
                        let frame =
                            ResolvedFrame::Measure { sensor: *sensor, location, time: *time, source: source.clone() };
                        (vec![frame], o.meta, o.articles)
                    })
                    .collect()
            }
            Frame::Stop => vec![(vec![ResolvedFrame::Stop], Vec::new(), Vec::new())],
            Frame::GoBack => {
                let back = self
                    .ctx
                    .visited_trail
                    .iter()
                    .rev()
                    .find(|e| self.model.coordinate(e) != Some(self.state.position))
                    .cloned();
                match back {
                    Some(e) => vec![(vec![ResolvedFrame::GoBack { target: Slot::Bound(e) }], Vec::new(), Vec::new())],
                    None => vec![(
                        vec![ResolvedFrame::GoBack { target: Slot::Unresolved { expects: None } }],
                        vec![MetaOutput::PresupFailure(PresupFailure::MissingArgument { slot: SlotKind::Location })],
                        Vec::new(),
                    )],
                }
            }
            Frame::Answer { polarity } => {
                vec![(vec![ResolvedFrame::Answer { polarity: *polarity }], Vec::new(), Vec::new())]
            }
            Frame::DoAgain => match &self.ctx.last_command {
                Some(last) => {
                    let note = MetaOutput::note_of(NoteKind::EllipsisFilled, "that", last.entities());
                    vec![(last.frames.clone(), vec![note], last.articles.iter().cloned().collect())]
                }
                None => vec![missing_command(PresupFailure::UnresolvedPronoun { word: "that".into() })],
            },
            Frame::DoSameFor { target } => match &self.ctx.last_command {
                Some(last) => self.substitute(last, target, Role::Place, &p.salience),
                None => vec![missing_command(PresupFailure::UnresolvedPronoun { word: "the same".into() })],
            },
            Frame::BareNp { np } => {
                if let Some(PendingAction::Clarify { held, expects }) = &self.ctx.pending {
                    let role = Role::for_expects(*expects);
                    let options = self.np(np, role, &p.salience);
                    if options.iter().all(|o| o.bound.is_bound()) {
                        return options
                            .into_iter()
                            .map(|o| {
                                let ids = o.bound.bound().cloned().unwrap_or_default();
                                let filled = fill_first_hole(held, &ids);
                                let mut meta = o.meta;
                                meta.push(MetaOutput::note_of(NoteKind::EllipsisFilled, np.to_string(), ids));
                                let mut articles: Vec<EntityId> = held.articles.iter().cloned().collect();
                                articles.extend(o.articles);
                                (filled.frames, meta, articles)
                            })
                            .collect();
                    }
                }
                match &self.ctx.last_command {
                    Some(last) => {
                        let role = if self.np_is_door(np) && last.frames.iter().any(|f| matches!(f, ResolvedFrame::SetDoor { .. })) {
                            Role::Door
                        } else {
                            Role::Place
                        };
                        self.substitute(last, np, role, &p.salience)
                    }
                    None => vec![missing_command(PresupFailure::MissingArgument { slot: SlotKind::Command })],
                }
            }
        }
    }

    fn np_is_door(&self, np: &NounPhrase) -> bool {
        np.conjuncts().iter().all(|c| match c {
            NounPhrase::Name(e) | NounPhrase::Bare(e) => self.model.sort_of(e) == Some(Sort::Door),
            NounPhrase::Definite(s) | NounPhrase::Quantified { sort: s, .. } => *s == Sort::Door,
            _ => false,
        })
    }

    /// Replaces the first slot `role` fills in `last` with `np`.
    fn substitute(&self, last: &ResolvedForm, np: &NounPhrase, role: Role, salience: &[EntityId]) -> Vec<FrameOption> {
        self.np(np, role, salience)
            .into_iter()
            .map(|o| {
                let Slot::Bound(ids) = &o.bound else {
                    return (vec![ResolvedFrame::Missing], o.meta, o.articles);
                };
                let mut frames = last.frames.clone();
                let mut replaced: Vec<EntityId> = Vec::new();
                if let Some(slot) = frames.iter_mut().find_map(|f| match (role, f) {
                    (Role::Door, ResolvedFrame::SetDoor { doors, .. }) => Some(doors),
                    (Role::Place, ResolvedFrame::Goto { targets }) => Some(targets),
                    _ => None,
                }) {
                    replaced = slot.bound().cloned().unwrap_or_default();
                    *slot = Slot::Bound(ids.clone());
                } else if let Some(loc) = frames.iter_mut().find_map(|f| match (role, f) {
                    (Role::Place, ResolvedFrame::Measure { location: loc @ Slot::Bound(Place::At(_)), .. }) => Some(loc),
                    _ => None,
                }) {
                    if let Slot::Bound(Place::At(old)) = loc {
                        replaced = old.clone();
                    }
                    *loc = Slot::Bound(Place::At(ids.clone()));
                } else {
                    return (vec![ResolvedFrame::Missing], vec![MetaOutput::PresupFailure(
                        PresupFailure::MissingArgument { slot: SlotKind::Command },
                    )], Vec::new());
                }
                let mut articles: Vec<EntityId> =
                    last.articles.iter().filter(|a| !replaced.contains(a)).cloned().collect();
                articles.extend(o.articles);
                let mut meta = o.meta;
                meta.push(MetaOutput::note_of(NoteKind::EllipsisFilled, np.to_string(), ids.clone()));
                (frames, meta, articles)
            })
            .collect()
    }

    fn default_location(&self, salience: &[EntityId]) -> NpOption {
        match salience.iter().find(|e| self.model.contains(e)) {
            Some(e) => NpOption::bound(vec![e.clone()], Some((NoteKind::DefaultLocationFilled, "(location)".into()))),
            None => NpOption::unresolved(None, PresupFailure::MissingArgument { slot: SlotKind::Location }),
        }
    }

    fn np(&self, np: &NounPhrase, role: Role, salience: &[EntityId]) -> Vec<NpOption> {
        match np {
            NounPhrase::Name(e) | NounPhrase::Bare(e) => {
                let sort = self.model.sort_of(e).expect("lexicon entities exist in the world");
                if !role.accepts(sort) {
                    return vec![NpOption::unresolved(
                        role.expects(),
                        PresupFailure::SortMismatch { entity: e.clone(), expected: Sort::Door },
                    )];
                }
                let mut o = NpOption::bound(vec![e.clone()], None);
                if matches!(np, NounPhrase::Name(_)) {
                    o.articles.push(e.clone());
                }
                vec![o]
            }
            NounPhrase::Pronoun(word) => {
                let viable: Vec<&EntityId> = salience
                    .iter()
                    .filter(|e| self.model.sort_of(e).is_some_and(|s| role.accepts(s)))
                    .collect();
                let mut out: Vec<NpOption> = viable
                    .iter()
                    .map(|e| NpOption::bound(vec![(*e).clone()], Some((NoteKind::PronounBound, np.to_string()))))
                    .collect();
                if viable.len() != 1 {
                    out.push(NpOption::unresolved(role.expects(), PresupFailure::UnresolvedPronoun { word: word.clone() }));
                }
                out
            }
            NounPhrase::Definite(sort) => {
                if !role.accepts(*sort) {
                    return vec![NpOption::unresolved(
                        role.expects(),
                        PresupFailure::UnderspecifiedDefinite { sort: Sort::Door },
                    )];
                }
                let extension = self.model.extension(*sort);
                if extension.len() == 1 {
                    return vec![NpOption::bound(extension.to_vec(), Some((NoteKind::DefiniteBound, np.to_string())))];
                }
                let mut out: Vec<NpOption> = salience
                    .iter()
                    .filter(|e| self.model.sort_of(e) == Some(*sort))
                    .map(|e| NpOption::bound(vec![e.clone()], Some((NoteKind::DefiniteBound, np.to_string()))))
                    .collect();
                out.push(NpOption::unresolved(Some(*sort), PresupFailure::UnderspecifiedDefinite { sort: *sort }));
                out
            }
            NounPhrase::Quantified { claim, sort } => {
                let extension = self.model.extension(*sort);
                if !role.accepts(*sort) {
                    return vec![NpOption::unresolved(
                        role.expects(),
                        PresupFailure::UnderspecifiedDefinite { sort: Sort::Door },
                    )];
                }
                if *claim == extension.len() {
                    vec![NpOption::bound(extension.to_vec(), Some((NoteKind::SetExpanded, np.to_string())))]
                } else {
                    vec![NpOption::unresolved(
                        Some(*sort),
                        PresupFailure::IncorrectSizeOfSet { claimed: *claim, actual: extension.len(), sort: *sort },
                    )]
                }
            }
            NounPhrase::Conjunction(items) => {
                let mut combos: Vec<NpOption> =
                    vec![NpOption { bound: Slot::Bound(Vec::new()), meta: Vec::new(), articles: Vec::new() }];
                for item in items {
                    let mut next = Vec::new();
                    for acc in &combos {
                        for o in self.np(item, role, salience) {
                            if next.len() >= MAX_CANDIDATES {
                                break;
                            }
                            let bound = match (&acc.bound, o.bound) {
                                (Slot::Bound(a), Slot::Bound(b)) => {
                                    let mut ids = a.clone();
                                    for id in b {
                                        if !ids.contains(&id) {
                                            ids.push(id);
                                        }
                                    }
                                    Slot::Bound(ids)
                                }
                                (Slot::Unresolved { expects }, _) => Slot::Unresolved { expects: *expects },
                                (_, Slot::Unresolved { expects }) => Slot::Unresolved { expects },
                            };
                            let mut meta = acc.meta.clone();
                            meta.extend(o.meta);
                            let mut articles = acc.articles.clone();
                            articles.extend(o.articles);
                            next.push(NpOption { bound, meta, articles });
                        }
                    }
                    combos = next;
                }
                combos
            }
        }
    }
}

fn missing_command(failure: PresupFailure) -> FrameOption {
    (vec![ResolvedFrame::Missing], vec![MetaOutput::PresupFailure(failure)], Vec::new())
}

fn fill_first_hole(held: &ResolvedForm, ids: &[EntityId]) -> ResolvedForm {
    let mut form = held.clone();
    for frame in &mut form.frames {
        let filled = match frame {
            ResolvedFrame::Goto { targets: slot @ Slot::Unresolved { .. } }
            | ResolvedFrame::SetDoor { doors: slot @ Slot::Unresolved { .. }, .. } => {
                *slot = Slot::Bound(ids.to_vec());
                true
            }
            ResolvedFrame::Measure { location: slot @ Slot::Unresolved { .. }, .. } => {
                *slot = Slot::Bound(Place::At(ids.to_vec()));
                true
            }
            ResolvedFrame::GoBack { target: slot @ Slot::Unresolved { .. } } => match ids.first() {
                Some(id) => {
                    *slot = Slot::Bound(id.clone());
                    true
                }
                None => false,
            },
            _ => false,
        };
        if filled {
            break;
        }
    }
    form
}
