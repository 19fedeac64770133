//! Linguistic level: tokenization, the fixed command grammar, and the
//! misrecognition pattern table.
//!
//! The grammar is deliberately small and unambiguous. Wherever `and` could
//! join either two clauses or two noun phrases, it joins clauses: a clause
//! verb after `and` always starts a new clause. See `docs/grammar.md`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meta::{MetaOutput, PresupFailure};
use crate::words;
use crate::world::{EntityId, Sensor, Sort, TimeRef, WorldModel};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("empty utterance")]
    EmptyUtterance,
    #[error("out of grammar at token {position}")]
    OutOfGrammar { position: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub raw: String,
    pub tokens: Vec<String>,
}

/// Lowercases and splits `raw` into word tokens. Punctuation separates
/// words, except apostrophes inside a word ("pilot's").
pub fn tokenize(raw: &str) -> Result<Utterance, ParseError> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in raw.chars() {
        let c = if c == '\u{2019}' { '\'' } else { c };
        if c.is_alphanumeric() || c == '\'' {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    let tokens: Vec<String> = tokens
        .into_iter()
        .map(|t| t.trim_matches('\'').to_string())
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.is_empty() {
        return Err(ParseError::EmptyUtterance);
    }
    Ok(Utterance { raw: raw.to_string(), tokens })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "np", content = "value", rename_all = "snake_case")]
pub enum NounPhrase {
    /// "it", "that"
    Pronoun(String),
    /// "the door"
    Definite(Sort),
    /// "both doors" claims 2, "all three decks" claims 3.
    Quantified { claim: usize, sort: Sort },
    /// A named entity with a determiner: "the pilot's seat".
    Name(EntityId),
    /// A named entity without a determiner: "crew hatch".
    Bare(EntityId),
    /// Two or more conjoined or listed noun phrases.
    Conjunction(Vec<NounPhrase>),
}

impl fmt::Display for NounPhrase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NounPhrase::Pronoun(w) => f.write_str(w),
            NounPhrase::Definite(sort) => write!(f, "the {sort}"),
            NounPhrase::Quantified { claim: 2, sort } => write!(f, "both {sort}s"),
            NounPhrase::Quantified { claim, sort } => write!(f, "all {} {sort}s", words::number_word(*claim as u32)),
            NounPhrase::Name(e) => write!(f, "the {e}"),
            NounPhrase::Bare(e) => write!(f, "{e}"),
            NounPhrase::Conjunction(items) => {
                let parts: Vec<String> = items.iter().map(|i| i.to_string()).collect();
                f.write_str(&parts.join(" and "))
            }
        }
    }
}

impl NounPhrase {
    fn list(mut items: Vec<NounPhrase>) -> NounPhrase {
        if items.len() == 1 {
            items.pop().unwrap()
        } else {
            NounPhrase::Conjunction(items)
        }
    }

    /// The conjuncts of a conjunction, or the phrase itself.
    pub fn conjuncts(&self) -> &[NounPhrase] {
        match self {
            NounPhrase::Conjunction(items) => items,
            other => std::slice::from_ref(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionVerb {
    Go,
    Move,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tense {
    Present,
    Past,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "clause", rename_all = "snake_case")]
pub enum Clause {
    GoTo { verb: MotionVerb, target: NounPhrase },
    Measure {
        sensor: Sensor,
        location: Option<NounPhrase>,
        time: Option<TimeRef>,
        fixed_sensors: bool,
        tense: Tense,
    },
    Open { target: NounPhrase },
    Close { target: NounPhrase },
    Stop,
    GoBack,
    DoAgain,
    DoSameFor { target: NounPhrase },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormKind {
    Command,
    Query,
    Answer,
    Fragment,
}

/// Surface-faithful parse of one utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body", rename_all = "snake_case")]
pub enum LinguisticForm {
    Command(Vec<Clause>),
    Query(Vec<Clause>),
    Answer(Polarity),
    /// A bare noun phrase: an answer to a clarification question or an
    /// elliptical command ("lower deck").
    Fragment(NounPhrase),
}

impl LinguisticForm {
    pub fn kind(&self) -> FormKind {
        match self {
            LinguisticForm::Command(_) => FormKind::Command,
            LinguisticForm::Query(_) => FormKind::Query,
            LinguisticForm::Answer(_) => FormKind::Answer,
            LinguisticForm::Fragment(_) => FormKind::Fragment,
        }
    }

    pub fn clauses(&self) -> &[Clause] {
        match self {
            LinguisticForm::Command(c) | LinguisticForm::Query(c) => c,
            _ => &[],
        }
    }

    /// Every noun phrase in the form, outermost first.
    pub fn noun_phrases(&self) -> Vec<&NounPhrase> {
        let mut out = Vec::new();
        match self {
            LinguisticForm::Fragment(np) => out.push(np),
            LinguisticForm::Answer(_) => {}
            LinguisticForm::Command(clauses) | LinguisticForm::Query(clauses) => {
                for clause in clauses {
                    match clause {
                        Clause::GoTo { target, .. }
                        | Clause::Open { target }
                        | Clause::Close { target }
                        | Clause::DoSameFor { target } => out.push(target),
                        Clause::Measure { location: Some(np), .. } => out.push(np),
                        _ => {}
                    }
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Lexicon

const CLAUSE_STARTS: [&str; 8] = ["go", "move", "measure", "open", "close", "stop", "halt", "do"];
const AFFIRMATIVES: [&str; 5] = ["okay", "yes", "yeah", "right", "sure"];
const NEGATIVES: [&str; 2] = ["no", "cancel"];

fn sensor_words() -> [(&'static [&'static str], Sensor); 4] {
    [
        (&["carbon", "dioxide"], Sensor::Co2),
        (&["co2"], Sensor::Co2),
        (&["temperature"], Sensor::Temperature),
        (&["pressure"], Sensor::Pressure),
    ]
}

/// Entity names, taken from the world configuration.
#[derive(Debug, Clone)]
pub struct Lexicon {
    names: Vec<(Vec<String>, EntityId)>,
}

impl Lexicon {
    pub fn from_world(model: &WorldModel) -> Lexicon {
        let mut names = Vec::new();
        for loc in model.locations() {
            for phrase in std::iter::once(&loc.label).chain(loc.aliases.iter()) {
                if let Ok(u) = tokenize(phrase) {
                    names.push((u.tokens, loc.id.clone()));
                }
            }
        }
        // Longest match first.
        names.sort_by(|a, b| b.0.len().cmp(&a.0.len()));
        Lexicon { names }
    }

    fn match_name(&self, tokens: &[String]) -> Option<(EntityId, usize)> {
        self.names
            .iter()
            .find(|(words, _)| tokens.len() >= words.len() && tokens[..words.len()] == words[..])
            .map(|(words, id)| (id.clone(), words.len()))
    }
}

fn sort_singular(word: &str) -> Option<Sort> {
    Sort::ALL.into_iter().find(|s| s.name() == word)
}

fn sort_plural(word: &str) -> Option<Sort> {
    Sort::ALL.into_iter().find(|s| s.plural() == word)
}

// ---------------------------------------------------------------------------
// Parser

pub fn parse(u: &Utterance, lexicon: &Lexicon) -> Result<LinguisticForm, ParseError> {
    let mut p = Parser { toks: &u.tokens, pos: 0, lex: lexicon };
    let form = p.utterance()?;
    if p.pos != p.toks.len() {
        return Err(p.error());
    }
    Ok(form)
}

struct Parser<'a> {
    toks: &'a [String],
    pos: usize,
    lex: &'a Lexicon,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).map(String::as_str)
    }

    fn peek_at(&self, offset: usize) -> Option<&'a str> {
        self.toks.get(self.pos + offset).map(String::as_str)
    }

    fn error(&self) -> ParseError {
        ParseError::OutOfGrammar { position: self.pos }
    }

    fn eat(&mut self, word: &str) -> bool {
        if self.peek() == Some(word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, word: &str) -> Result<(), ParseError> {
        if self.eat(word) {
            Ok(())
        } else {
            Err(self.error())
        }
    }

    fn eat_seq(&mut self, words: &[&str]) -> bool {
        let matches = words.iter().enumerate().all(|(i, w)| self.peek_at(i) == Some(*w));
        if matches {
            self.pos += words.len();
        }
        matches
    }

    fn utterance(&mut self) -> Result<LinguisticForm, ParseError> {
        let first = self.peek().ok_or(ParseError::EmptyUtterance)?;
        if self.toks.len() == 1 {
            if AFFIRMATIVES.contains(&first) {
                self.pos += 1;
                return Ok(LinguisticForm::Answer(Polarity::Positive));
            }
            if NEGATIVES.contains(&first) {
                self.pos += 1;
                return Ok(LinguisticForm::Answer(Polarity::Negative));
            }
        }
        if first == "what" || first == "what's" {
            return Ok(LinguisticForm::Query(vec![self.query()?]));
        }
        if CLAUSE_STARTS.contains(&first) {
            let mut clauses = vec![self.clause()?];
            while self.peek() == Some("and") && self.peek_at(1).is_some_and(|w| CLAUSE_STARTS.contains(&w)) {
                self.pos += 1;
                clauses.push(self.clause()?);
            }
            return Ok(LinguisticForm::Command(clauses));
        }
        Ok(LinguisticForm::Fragment(self.np_list()?))
    }

    fn clause(&mut self) -> Result<Clause, ParseError> {
        let verb = self.peek().ok_or_else(|| self.error())?;
        self.pos += 1;
        match verb {
            "go" if self.eat("back") => Ok(Clause::GoBack),
            "go" | "move" => {
                self.expect("to")?;
                let verb = if verb == "go" { MotionVerb::Go } else { MotionVerb::Move };
                Ok(Clause::GoTo { verb, target: self.np_list()? })
            }
            "measure" => {
                let sensor = self.sensor_phrase()?;
                self.measure_modifiers(sensor, Tense::Present)
            }
            "open" => Ok(Clause::Open { target: self.np_list()? }),
            "close" => Ok(Clause::Close { target: self.np_list()? }),
            "stop" | "halt" => Ok(Clause::Stop),
            "do" => {
                if (self.eat("that") || self.eat("it")) && self.eat("again") {
                    Ok(Clause::DoAgain)
                } else if self.eat_seq(&["the", "same", "for"]) {
                    Ok(Clause::DoSameFor { target: self.np()? })
                } else {
                    Err(self.error())
                }
            }
            _ => {
                self.pos -= 1;
                Err(self.error())
            }
        }
    }

    fn query(&mut self) -> Result<Clause, ParseError> {
        let tense = if self.eat("what's") {
            Tense::Present
        } else {
            self.expect("what")?;
            if self.eat("is") {
                Tense::Present
            } else if self.eat("was") {
                Tense::Past
            } else {
                return Err(self.error());
            }
        };
        let sensor = self.sensor_phrase()?;
        self.measure_modifiers(sensor, tense)
    }

    fn sensor_phrase(&mut self) -> Result<Sensor, ParseError> {
        let start = self.pos;
        self.eat("the");
        for (words, sensor) in sensor_words() {
            if self.eat_seq(words) {
                self.eat("level");
                return Ok(sensor);
            }
        }
        self.pos = start;
        Err(self.error())
    }

    fn measure_modifiers(&mut self, sensor: Sensor, tense: Tense) -> Result<Clause, ParseError> {
        let mut location = None;
        let mut time = None;
        let mut fixed_sensors = false;
        loop {
            if self.peek() == Some("at") {
                if self.peek_at(1).is_some_and(words::is_number_word) && time.is_none() {
                    self.pos += 1;
                    let (t, used) = words::read_time(&self.toks[self.pos..]).ok_or_else(|| self.error())?;
                    self.pos += used;
                    time = Some(t);
                    continue;
                }
                if location.is_none() {
                    self.pos += 1;
                    location = Some(self.np_list()?);
                    continue;
                }
                return Err(self.error());
            }
            if !fixed_sensors && self.eat_seq(&["according", "to", "the", "fixed", "sensors"]) {
                fixed_sensors = true;
                continue;
            }
            break;
        }
        Ok(Clause::Measure { sensor, location, time, fixed_sensors, tense })
    }

    fn starts_np(&self, offset: usize) -> bool {
        let Some(word) = self.peek_at(offset) else { return false };
        matches!(word, "it" | "that" | "the" | "both" | "all")
            || self.lex.match_name(&self.toks[self.pos + offset..]).is_some()
    }

    /// One or more noun phrases, listed by juxtaposition (commas are
    /// dropped by the tokenizer) or joined by `and`.
    fn np_list(&mut self) -> Result<NounPhrase, ParseError> {
        let mut items = vec![self.np()?];
        loop {
            if self.peek() == Some("and") {
                let clause_next = self.peek_at(1).is_some_and(|w| CLAUSE_STARTS.contains(&w));
                if !clause_next && self.starts_np(1) {
                    self.pos += 1;
                    items.push(self.np()?);
                    continue;
                }
                break;
            }
            if self.starts_np(0) && self.peek() != Some("that") {
                items.push(self.np()?);
                continue;
            }
            break;
        }
        Ok(NounPhrase::list(items))
    }

    fn np(&mut self) -> Result<NounPhrase, ParseError> {
        let word = self.peek().ok_or_else(|| self.error())?;
        match word {
            "it" | "that" => {
                self.pos += 1;
                Ok(NounPhrase::Pronoun(word.to_string()))
            }
            "both" => {
                self.pos += 1;
                let sort = self.peek().and_then(sort_plural).ok_or_else(|| self.error())?;
                self.pos += 1;
                Ok(NounPhrase::Quantified { claim: 2, sort })
            }
            "all" => {
                self.pos += 1;
                self.eat("the");
                let (claim, used) = words::read_number(&self.toks[self.pos..]).ok_or_else(|| self.error())?;
                self.pos += used;
                let sort = self.peek().and_then(sort_plural).ok_or_else(|| self.error())?;
                self.pos += 1;
                Ok(NounPhrase::Quantified { claim: claim as usize, sort })
            }
            "the" => {
                self.pos += 1;
                if let Some((id, used)) = self.lex.match_name(&self.toks[self.pos..]) {
                    self.pos += used;
                    return Ok(NounPhrase::Name(id));
                }
                let sort = self.peek().and_then(sort_singular).ok_or_else(|| self.error())?;
                self.pos += 1;
                Ok(NounPhrase::Definite(sort))
            }
            _ => {
                let (id, used) = self.lex.match_name(&self.toks[self.pos..]).ok_or_else(|| self.error())?;
                self.pos += used;
                Ok(NounPhrase::Bare(id))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Misrecognition patterns

/// A syntactic shape that usually indicates the recognizer misheard.
pub struct MisrecognitionPattern {
    pub name: &'static str,
    pub matches: fn(&LinguisticForm) -> bool,
}

pub const PATTERNS: &[MisrecognitionPattern] =
    &[MisrecognitionPattern { name: "pronoun_conjunction", matches: pronoun_in_conjunction }];

fn pronoun_in_conjunction(lf: &LinguisticForm) -> bool {
    fn visit(np: &NounPhrase) -> bool {
        match np {
            NounPhrase::Conjunction(items) => {
                items.iter().any(|i| matches!(i, NounPhrase::Pronoun(_))) || items.iter().any(visit)
            }
            _ => false,
        }
    }
    lf.noun_phrases().into_iter().any(visit)
}

/// One `DubiousLf` meta-output per matching pattern in `PATTERNS`.
pub fn detect_dubious(lf: &LinguisticForm) -> Vec<MetaOutput> {
    detect_with(PATTERNS, lf)
}

pub fn detect_with(patterns: &[MisrecognitionPattern], lf: &LinguisticForm) -> Vec<MetaOutput> {
    patterns
        .iter()
        .filter(|p| (p.matches)(lf))
        .map(|p| MetaOutput::PresupFailure(PresupFailure::DubiousLf { pattern: p.name.to_string() }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex() -> Lexicon {
        Lexicon::from_world(&WorldModel::default_shuttle())
    }

    fn p(s: &str) -> Result<LinguisticForm, ParseError> {
        parse(&tokenize(s)?, &lex())
    }

    fn bare(id: &str) -> NounPhrase {
        NounPhrase::Bare(id.into())
    }

    #[test]
    fn tokenizes_commands() {
        assert_eq!(
            tokenize("Go to crew hatch and close it.").unwrap().tokens,
            ["go", "to", "crew", "hatch", "and", "close", "it"]
        );
        assert_eq!(tokenize("Stop.").unwrap().tokens, ["stop"]);
        assert_eq!(tokenize("   "), Err(ParseError::EmptyUtterance));
        assert_eq!(tokenize("?!").unwrap_err(), ParseError::EmptyUtterance);
        assert_eq!(tokenize("the pilot's seat?").unwrap().tokens, ["the", "pilot's", "seat"]);
        assert_eq!(tokenize("the pilot\u{2019}s seat").unwrap().tokens, ["the", "pilot's", "seat"]);
    }

    #[test]
    fn parses_quantified_goto_and_measure() {
        let lf = p("Go to all three decks and measure carbon dioxide.").unwrap();
        assert_eq!(
            lf,
            LinguisticForm::Command(vec![
                Clause::GoTo {
                    verb: MotionVerb::Go,
                    target: NounPhrase::Quantified { claim: 3, sort: Sort::Deck }
                },
                Clause::Measure {
                    sensor: Sensor::Co2,
                    location: None,
                    time: None,
                    fixed_sensors: false,
                    tense: Tense::Present
                },
            ])
        );
    }

    #[test]
    fn parses_what_is_query() {
        assert_eq!(
            p("what is the pressure?").unwrap(),
            LinguisticForm::Query(vec![Clause::Measure {
                sensor: Sensor::Pressure,
                location: None,
                time: None,
                fixed_sensors: false,
                tense: Tense::Present
            }])
        );
    }

    #[test]
    fn parses_fixed_sensor_history_query() {
        let lf = p("What was the carbon dioxide level at fifteen oh five according to the fixed sensors?").unwrap();
        assert_eq!(
            lf,
            LinguisticForm::Query(vec![Clause::Measure {
                sensor: Sensor::Co2,
                location: None,
                time: TimeRef::new(15, 5),
                fixed_sensors: true,
                tense: Tense::Past
            }])
        );
    }

    #[test]
    fn rejects_unknown_words() {
        assert_eq!(p("frobnicate the deck"), Err(ParseError::OutOfGrammar { position: 0 }));
        assert_eq!(p("go to the cargo bay"), Err(ParseError::OutOfGrammar { position: 3 }));
        assert!(p("close").is_err());
    }

    #[test]
    fn and_prefers_clause_conjunction() {
        let lf = p("Go to crew hatch and close it.").unwrap();
        assert_eq!(
            lf,
            LinguisticForm::Command(vec![
                Clause::GoTo { verb: MotionVerb::Go, target: bare("crew_hatch") },
                Clause::Close { target: NounPhrase::Pronoun("it".into()) },
            ])
        );
    }

    #[test]
    fn lists_by_juxtaposition_and_conjunction() {
        let lf = p("Move to storage lockers, commander's seat and flight deck and measure temperature.").unwrap();
        let LinguisticForm::Command(clauses) = lf else { panic!() };
        assert_eq!(clauses.len(), 2);
        assert_eq!(
            clauses[0],
            Clause::GoTo {
                verb: MotionVerb::Move,
                target: NounPhrase::Conjunction(vec![
                    bare("storage_lockers"),
                    bare("commander_seat"),
                    bare("flight_deck")
                ])
            }
        );
    }

    #[test]
    fn parses_every_dialogue_turn() {
        for line in [
            "Go to all three decks and measure carbon dioxide.",
            "Okay.",
            "Do the same for the pilot's seat.",
            "Right.",
            "What was the carbon dioxide level at fifteen oh five according to the fixed sensors?",
            "Close both doors.",
            "Go to crew hatch and close it.",
            "Yeah.",
            "Close the door.",
            "The crew hatch.",
            "Move to storage lockers, commander's seat and flight deck and measure temperature.",
            "Sure.",
            "Do that again.",
            "Yes.",
            "Stop.",
            "Go back.",
            "measure temperature at flight deck",
            "lower deck",
            "go to the flight deck and lower deck and measure pressure",
            "move to the crew hatch",
            "open it",
            "it and flight deck",
        ] {
            assert!(p(line).is_ok(), "{line}: {:?}", p(line));
        }
    }

    #[test]
    fn fragments_and_answers() {
        assert_eq!(p("The crew hatch.").unwrap(), LinguisticForm::Fragment(NounPhrase::Name("crew_hatch".into())));
        assert_eq!(p("Okay.").unwrap(), LinguisticForm::Answer(Polarity::Positive));
        assert_eq!(p("cancel").unwrap(), LinguisticForm::Answer(Polarity::Negative));
        assert_eq!(p("Close the door.").unwrap(), LinguisticForm::Command(vec![Clause::Close {
            target: NounPhrase::Definite(Sort::Door)
        }]));
    }

    #[test]
    fn dubious_pronoun_conjunction() {
        let lf = p("it and flight deck").unwrap();
        let meta = detect_dubious(&lf);
        assert_eq!(
            meta,
            vec![MetaOutput::PresupFailure(PresupFailure::DubiousLf { pattern: "pronoun_conjunction".into() })]
        );
        assert!(detect_dubious(&p("go to crew hatch and close it").unwrap()).is_empty());
        // Hand-matched: `open` takes a noun phrase list; "it and it" is a
        // conjunction whose conjuncts are pronouns.
        let lf = p("open it and it").unwrap();
        assert_eq!(
            lf,
            LinguisticForm::Command(vec![Clause::Open {
                target: NounPhrase::Conjunction(vec![
                    NounPhrase::Pronoun("it".into()),
                    NounPhrase::Pronoun("it".into())
                ])
            }])
        );
        assert_eq!(detect_dubious(&lf).len(), 1);
    }

    #[test]
    fn detect_dubious_leaves_form_alone() {
        let lf = p("it and flight deck").unwrap();
        let before = lf.clone();
        let _ = detect_dubious(&lf);
        assert_eq!(lf, before);
    }

    #[test]
    fn pattern_table_is_extensible() {
        const EXTRA: &[MisrecognitionPattern] = &[
            MisrecognitionPattern { name: "pronoun_conjunction", matches: pronoun_in_conjunction },
            MisrecognitionPattern {
                name: "stop_and_more",
                matches: |lf| lf.clauses().len() > 1 && lf.clauses().contains(&Clause::Stop),
            },
        ];
        assert_eq!(detect_with(EXTRA, &p("stop and go back").unwrap()).len(), 1);
    }
}
