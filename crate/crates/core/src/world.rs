//! Deterministic simulated Shuttle.
//!
//! [`WorldModel`] is the validated, immutable description loaded from the
//! world configuration file: topology on a 1-D line, sorts, door inventory,
//! sensor fields, fixed-sensor history, durations and thresholds.
//! [`WorldState`] is the state vector the interpreter threads through
//! evaluation; it has value semantics. [`World`] owns the live state and is
//! the effector target in execute mode.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The configuration shipped with the repository.
pub const DEFAULT_CONFIG: &str = include_str!("../../../config/shuttle.toml");

/// Simulated seconds.
pub type Seconds = f64;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        EntityId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sort {
    Deck,
    Door,
    Seat,
    Location,
}

impl Sort {
    pub const ALL: [Sort; 4] = [Sort::Deck, Sort::Door, Sort::Seat, Sort::Location];

    pub fn name(self) -> &'static str {
        match self {
            Sort::Deck => "deck",
            Sort::Door => "door",
            Sort::Seat => "seat",
            Sort::Location => "location",
        }
    }

    pub fn plural(self) -> &'static str {
        match self {
            Sort::Deck => "decks",
            Sort::Door => "doors",
            Sort::Seat => "seats",
            Sort::Location => "locations",
        }
    }

    pub fn parse(s: &str) -> Option<Sort> {
        Sort::ALL.into_iter().find(|sort| sort.name() == s)
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sensor {
    Co2,
    Temperature,
    Pressure,
}

impl Sensor {
    pub const ALL: [Sensor; 3] = [Sensor::Co2, Sensor::Temperature, Sensor::Pressure];

    pub fn name(self) -> &'static str {
        match self {
            Sensor::Co2 => "co2",
            Sensor::Temperature => "temperature",
            Sensor::Pressure => "pressure",
        }
    }

    pub fn parse(s: &str) -> Result<Sensor, WorldError> {
        Sensor::ALL
            .into_iter()
            .find(|sensor| sensor.name() == s)
            .ok_or_else(|| WorldError::UnknownSensor(s.to_string()))
    }
}

impl fmt::Display for Sensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoorStatus {
    Open,
    Closed,
}

impl DoorStatus {
    pub fn name(self) -> &'static str {
        match self {
            DoorStatus::Open => "open",
            DoorStatus::Closed => "closed",
        }
    }
}

impl fmt::Display for DoorStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A clock time of day, minute resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeRef {
    pub hour: u8,
    pub minute: u8,
}

impl TimeRef {
    pub fn new(hour: u8, minute: u8) -> Option<TimeRef> {
        (hour < 24 && minute < 60).then_some(TimeRef { hour, minute })
    }

    /// Parses `HH:MM`.
    pub fn parse(s: &str) -> Option<TimeRef> {
        let (h, m) = s.trim().split_once(':')?;
        TimeRef::new(h.parse().ok()?, m.parse().ok()?)
    }

    pub fn minute_of_day(self) -> u32 {
        self.hour as u32 * 60 + self.minute as u32
    }

    pub fn from_minute_of_day(m: u32) -> TimeRef {
        let m = m % (24 * 60);
        TimeRef { hour: (m / 60) as u8, minute: (m % 60) as u8 }
    }

    pub fn seconds(self) -> Seconds {
        self.minute_of_day() as f64 * 60.0
    }

    /// The minute containing `clock` (seconds since midnight).
    pub fn from_clock(clock: Seconds) -> TimeRef {
        TimeRef::from_minute_of_day((clock.max(0.0) / 60.0).floor() as u32)
    }
}

impl fmt::Display for TimeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.hour, self.minute)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportSource {
    Mobile,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "time")]
pub enum ReportTime {
    Now,
    At(TimeRef),
}

/// A sensor reading the robot tells the user about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub sensor: Sensor,
    pub location: EntityId,
    pub time: ReportTime,
    pub value: f64,
    pub source: ReportSource,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("unknown location `{0}`")]
    UnknownLocation(String),
    #[error("unknown sensor `{0}`")]
    UnknownSensor(String),
    #[error("unknown door `{0}`")]
    UnknownDoor(String),
    #[error("no {sensor} record for {location} at or before {time}")]
    NoHistory { sensor: Sensor, location: EntityId, time: TimeRef },
    #[error("{time} is later than the simulated clock")]
    FutureTime { time: TimeRef },
    #[error("door {door} is already {status}")]
    DoorAlreadyInState { door: EntityId, status: DoorStatus },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid config at `{path}`: {detail}")]
pub struct ConfigError {
    pub path: String,
    pub detail: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, detail: impl Into<String>) -> Self {
        ConfigError { path: path.into(), detail: detail.into() }
    }
}

// ---------------------------------------------------------------------------
// Configuration file

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub robot: RobotConfig,
    pub durations: Durations,
    pub thresholds: Thresholds,
    #[serde(default)]
    pub session: SessionConfig,
    pub locations: Vec<LocationConfig>,
    #[serde(default)]
    pub extensions: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub doors: BTreeMap<String, DoorStatus>,
    pub sensors: BTreeMap<String, SensorConfig>,
    #[serde(default)]
    pub history: HistoryConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    pub start: String,
    pub clock: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Durations {
    pub travel_per_unit: Seconds,
    pub measure: Seconds,
    pub door: Seconds,
    pub history_query: Seconds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub confirm_seconds: Seconds,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    #[serde(default)]
    pub pacing: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationConfig {
    pub id: String,
    pub label: String,
    pub sort: String,
    pub coordinate: f64,
    #[serde(default)]
    pub aliases: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub default: f64,
    #[serde(default)]
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryConfig {
    #[serde(default)]
    pub start: Option<String>,
    #[serde(default)]
    pub interval_minutes: Option<u32>,
    #[serde(default)]
    pub records: Vec<HistoryRecordConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryRecordConfig {
    pub sensor: String,
    pub location: String,
    pub time: String,
    pub value: f64,
}

const REQUIRED_SECTIONS: [&str; 5] = ["robot", "durations", "thresholds", "locations", "sensors"];

impl WorldConfig {
    pub fn from_toml(text: &str) -> Result<WorldConfig, ConfigError> {
        let table: toml::Table =
            toml::from_str(text).map_err(|e| ConfigError::new("<document>", e.message()))?;
        if let Some(missing) = REQUIRED_SECTIONS.iter().find(|key| !table.contains_key(**key)) {
            return Err(ConfigError::new(*missing, "required section is missing"));
        }
        toml::from_str(text).map_err(|e| {
            let path = e
                .span()
                .map(|span| locate_key(text, span.start))
                .unwrap_or_else(|| "<document>".to_string());
            ConfigError::new(path, e.message())
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("world config serializes")
    }

    pub fn default_shuttle() -> WorldConfig {
        WorldConfig::from_toml(DEFAULT_CONFIG).expect("shipped config parses")
    }
}

/// Best-effort path for a deserialization error: the nearest preceding
/// table header plus the key on the offending line.
fn locate_key(text: &str, offset: usize) -> String {
    let head = &text[..offset.min(text.len())];
    let section = head
        .lines()
        .rev()
        .find_map(|line| {
            let line = line.trim();
            line.starts_with('[').then(|| line.trim_matches(|c| c == '[' || c == ']').to_string())
        })
        .unwrap_or_default();
    let line = head.lines().last().unwrap_or("");
    let key = line.split('=').next().unwrap_or("").trim();
    match (section.is_empty(), key.is_empty() || key.starts_with('[')) {
        (true, _) => key.to_string(),
        (false, true) => section,
        (false, false) => format!("{section}.{key}"),
    }
}

// ---------------------------------------------------------------------------
// Validated model

#[derive(Debug, Clone, PartialEq)]
pub struct Location {
    pub id: EntityId,
    pub label: String,
    pub sort: Sort,
    pub coordinate: f64,
    pub aliases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    locations: Vec<Location>,
    index: HashMap<EntityId, usize>,
    extensions: BTreeMap<Sort, Vec<EntityId>>,
    initial_doors: BTreeMap<EntityId, DoorStatus>,
    initial_sensors: BTreeMap<Sensor, BTreeMap<EntityId, f64>>,
    history: BTreeMap<(Sensor, EntityId), Vec<(u32, f64)>>,
    pub durations: Durations,
    pub confirm_threshold: Seconds,
    start: EntityId,
    start_clock: TimeRef,
    pub pacing: Option<String>,
}

impl WorldModel {
    pub fn from_config(config: &WorldConfig) -> Result<WorldModel, ConfigError> {
        if config.locations.is_empty() {
            return Err(ConfigError::new("locations", "at least one location is required"));
        }
        let mut locations = Vec::with_capacity(config.locations.len());
        let mut index = HashMap::new();
        for (i, loc) in config.locations.iter().enumerate() {
            let path = format!("locations[{i}]");
            let sort = Sort::parse(&loc.sort)
                .ok_or_else(|| ConfigError::new(format!("{path}.sort"), format!("unknown sort `{}`", loc.sort)))?;
            if !loc.coordinate.is_finite() {
                return Err(ConfigError::new(format!("{path}.coordinate"), "coordinate must be finite"));
            }
            if loc.label.trim().is_empty() {
                return Err(ConfigError::new(format!("{path}.label"), "label must not be empty"));
            }
            let id = EntityId::new(loc.id.clone());
            if index.insert(id.clone(), i).is_some() {
                return Err(ConfigError::new(format!("{path}.id"), format!("duplicate location `{}`", loc.id)));
            }
            locations.push(Location {
                id,
                label: loc.label.clone(),
                sort,
                coordinate: loc.coordinate,
                aliases: loc.aliases.clone(),
            });
        }

        let known = |path: String, id: &str| -> Result<EntityId, ConfigError> {
            let id = EntityId::new(id);
            if index.contains_key(&id) {
                Ok(id)
            } else {
                Err(ConfigError::new(path, format!("dangling location reference `{id}`")))
            }
        };

        let start = known("robot.start".into(), &config.robot.start)?;
        let start_clock = TimeRef::parse(&config.robot.clock)
            .ok_or_else(|| ConfigError::new("robot.clock", "expected HH:MM"))?;

        let d = &config.durations;
        for (name, v) in [
            ("travel_per_unit", d.travel_per_unit),
            ("measure", d.measure),
            ("door", d.door),
            ("history_query", d.history_query),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::new(format!("durations.{name}"), "must be a finite non-negative number"));
            }
        }

        let mut extensions: BTreeMap<Sort, Vec<EntityId>> = BTreeMap::new();
        for sort in Sort::ALL {
            let default: Vec<EntityId> =
                locations.iter().filter(|l| l.sort == sort).map(|l| l.id.clone()).collect();
            extensions.insert(sort, default);
        }
        for (sort_name, ids) in &config.extensions {
            let sort = Sort::parse(sort_name).ok_or_else(|| {
                ConfigError::new(format!("extensions.{sort_name}"), "unknown sort")
            })?;
            let mut ordered = Vec::new();
            for (i, id) in ids.iter().enumerate() {
                let path = format!("extensions.{sort_name}[{i}]");
                let id = known(path.clone(), id)?;
                if locations[index[&id]].sort != sort {
                    return Err(ConfigError::new(path, format!("`{id}` is not of sort {sort}")));
                }
                ordered.push(id);
            }
            let full = &extensions[&sort];
            if ordered.len() != full.len() || full.iter().any(|id| !ordered.contains(id)) {
                return Err(ConfigError::new(
                    format!("extensions.{sort_name}"),
                    "must list every entity of the sort exactly once",
                ));
            }
            extensions.insert(sort, ordered);
        }

        let mut initial_doors = BTreeMap::new();
        for (door, status) in &config.doors {
            let id = known(format!("doors.{door}"), door)?;
            if locations[index[&id]].sort != Sort::Door {
                return Err(ConfigError::new(format!("doors.{door}"), "not a location of sort door"));
            }
            initial_doors.insert(id, *status);
        }
        for loc in locations.iter().filter(|l| l.sort == Sort::Door) {
            if !initial_doors.contains_key(&loc.id) {
                return Err(ConfigError::new(format!("doors.{}", loc.id), "door has no initial status"));
            }
        }

        let mut initial_sensors = BTreeMap::new();
        for (name, cfg) in &config.sensors {
            let sensor = Sensor::parse(name)
                .map_err(|_| ConfigError::new(format!("sensors.{name}"), "unknown sensor"))?;
            let mut field: BTreeMap<EntityId, f64> =
                locations.iter().map(|l| (l.id.clone(), cfg.default)).collect();
            for (loc, value) in &cfg.values {
                let id = known(format!("sensors.{name}.values.{loc}"), loc)?;
                field.insert(id, *value);
            }
            initial_sensors.insert(sensor, field);
        }

        let mut history: BTreeMap<(Sensor, EntityId), Vec<(u32, f64)>> = BTreeMap::new();
        if let Some(start) = &config.history.start {
            let first = TimeRef::parse(start)
                .ok_or_else(|| ConfigError::new("history.start", "expected HH:MM"))?;
            let step = config.history.interval_minutes.unwrap_or(5);
            if step == 0 {
                return Err(ConfigError::new("history.interval_minutes", "must be positive"));
            }
            let mut t = first.minute_of_day();
            while t <= start_clock.minute_of_day() {
                for (sensor, field) in &initial_sensors {
                    for (loc, value) in field {
                        history.entry((*sensor, loc.clone())).or_default().push((t, *value));
                    }
                }
                t += step;
            }
        }
        for (i, rec) in config.history.records.iter().enumerate() {
            let path = format!("history.records[{i}]");
            let sensor = Sensor::parse(&rec.sensor)
                .map_err(|_| ConfigError::new(format!("{path}.sensor"), "unknown sensor"))?;
            let loc = known(format!("{path}.location"), &rec.location)?;
            let time = TimeRef::parse(&rec.time)
                .ok_or_else(|| ConfigError::new(format!("{path}.time"), "expected HH:MM"))?;
            let series = history.entry((sensor, loc)).or_default();
            series.retain(|(t, _)| *t != time.minute_of_day());
            series.push((time.minute_of_day(), rec.value));
        }
        for series in history.values_mut() {
            series.sort_by_key(|(t, _)| *t);
        }

        Ok(WorldModel {
            locations,
            index,
            extensions,
            initial_doors,
            initial_sensors,
            history,
            durations: config.durations,
            confirm_threshold: config.thresholds.confirm_seconds,
            start,
            start_clock,
            pacing: config.session.pacing.clone(),
        })
    }

    pub fn from_toml(text: &str) -> Result<WorldModel, ConfigError> {
        WorldModel::from_config(&WorldConfig::from_toml(text)?)
    }

    pub fn default_shuttle() -> WorldModel {
        WorldModel::from_toml(DEFAULT_CONFIG).expect("shipped config validates")
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn location(&self, id: &EntityId) -> Option<&Location> {
        self.index.get(id).map(|&i| &self.locations[i])
    }

    pub fn require(&self, id: &str) -> Result<&Location, WorldError> {
        self.location(&EntityId::new(id)).ok_or_else(|| WorldError::UnknownLocation(id.to_string()))
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        self.index.contains_key(id)
    }

    pub fn sort_of(&self, id: &EntityId) -> Option<Sort> {
        self.location(id).map(|l| l.sort)
    }

    pub fn label<'a>(&'a self, id: &'a EntityId) -> &'a str {
        self.location(id).map(|l| l.label.as_str()).unwrap_or(id.as_str())
    }

    pub fn coordinate(&self, id: &EntityId) -> Option<f64> {
        self.location(id).map(|l| l.coordinate)
    }

    /// Every entity of `sort`, in the configured expansion order.
    pub fn extension(&self, sort: Sort) -> &[EntityId] {
        self.extensions.get(&sort).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn doors(&self) -> impl Iterator<Item = &EntityId> {
        self.initial_doors.keys()
    }

    pub fn start(&self) -> &EntityId {
        &self.start
    }

    pub fn start_clock(&self) -> TimeRef {
        self.start_clock
    }

    pub fn travel_cost(&self, from: f64, to: f64) -> Seconds {
        travel_cost(self.durations.travel_per_unit, from, to)
    }

    /// The named location closest to `position`; ties go to the earlier
    /// configured location.
    pub fn nearest(&self, position: f64) -> &EntityId {
        let mut best = &self.locations[0];
        for loc in &self.locations[1..] {
            if (loc.coordinate - position).abs() < (best.coordinate - position).abs() {
                best = loc;
            }
        }
        &best.id
    }

    /// The latest fixed-sensor record at or before `t`.
    pub fn read_history(
        &self,
        sensor: Sensor,
        location: &EntityId,
        t: TimeRef,
        clock: Seconds,
    ) -> Result<f64, WorldError> {
        if !self.contains(location) {
            return Err(WorldError::UnknownLocation(location.0.clone()));
        }
        if t.seconds() > clock {
            return Err(WorldError::FutureTime { time: t });
        }
        self.history
            .get(&(sensor, location.clone()))
            .and_then(|series| series.iter().rev().find(|(at, _)| *at <= t.minute_of_day()))
            .map(|(_, v)| *v)
            .ok_or_else(|| WorldError::NoHistory { sensor, location: location.clone(), time: t })
    }

    pub fn initial_state(&self) -> WorldState {
        let position = self.coordinate(&self.start).expect("validated start");
        WorldState {
            position,
            nearest: self.start.clone(),
            doors: self.initial_doors.clone(),
            sensors: self.initial_sensors.clone(),
            clock: self.start_clock.seconds(),
        }
    }
}

/// Travel time between two coordinates.
pub fn travel_cost(per_unit: Seconds, from: f64, to: f64) -> Seconds {
    per_unit * (from - to).abs()
}

// ---------------------------------------------------------------------------
// State vector

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub position: f64,
    pub nearest: EntityId,
    pub doors: BTreeMap<EntityId, DoorStatus>,
    pub sensors: BTreeMap<Sensor, BTreeMap<EntityId, f64>>,
    /// Seconds since midnight.
    pub clock: Seconds,
}

impl WorldState {
    pub fn door(&self, door: &EntityId) -> Option<DoorStatus> {
        self.doors.get(door).copied()
    }

    pub fn read_sensor(&self, sensor: Sensor, location: &str) -> Result<f64, WorldError> {
        self.sensors
            .get(&sensor)
            .ok_or_else(|| WorldError::UnknownSensor(sensor.to_string()))?
            .get(&EntityId::new(location))
            .copied()
            .ok_or_else(|| WorldError::UnknownLocation(location.to_string()))
    }

    pub fn time(&self) -> TimeRef {
        TimeRef::from_clock(self.clock)
    }

    /// Whether the robot sits exactly on `location`.
    pub fn is_at(&self, model: &WorldModel, location: &EntityId) -> bool {
        model.coordinate(location) == Some(self.position)
    }
}

/// Commands the effector layer applies to the live world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EffectorEvent {
    Move { to: EntityId },
    /// Travel toward `to` for at most `seconds`, stopping early on arrival.
    MoveToward { to: EntityId, seconds: Seconds },
    SetDoor { door: EntityId, status: DoorStatus },
    AdvanceClock { seconds: Seconds },
}

/// The live simulated world.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    model: Arc<WorldModel>,
    state: WorldState,
}

impl World {
    pub fn new(model: Arc<WorldModel>) -> World {
        let state = model.initial_state();
        World { model, state }
    }

    pub fn model(&self) -> &Arc<WorldModel> {
        &self.model
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn snapshot(&self) -> WorldState {
        self.state.clone()
    }

    pub fn read_sensor(&self, sensor: Sensor, location: &str) -> Result<f64, WorldError> {
        self.state.read_sensor(sensor, location)
    }

    pub fn read_history(&self, sensor: Sensor, location: &str, t: TimeRef) -> Result<f64, WorldError> {
        self.model.read_history(sensor, &EntityId::new(location), t, self.state.clock)
    }

    pub fn apply(&mut self, event: &EffectorEvent) -> Result<(), WorldError> {
        match event {
            EffectorEvent::Move { to } => {
                let target = self
                    .model
                    .coordinate(to)
                    .ok_or_else(|| WorldError::UnknownLocation(to.0.clone()))?;
                self.state.clock += self.model.travel_cost(self.state.position, target);
                self.state.position = target;
                self.state.nearest = to.clone();
            }
            EffectorEvent::MoveToward { to, seconds } => {
                let target = self
                    .model
                    .coordinate(to)
                    .ok_or_else(|| WorldError::UnknownLocation(to.0.clone()))?;
                let remaining = self.model.travel_cost(self.state.position, target);
                if *seconds >= remaining {
                    return self.apply(&EffectorEvent::Move { to: to.clone() });
                }
                let per_unit = self.model.durations.travel_per_unit;
                let step = if per_unit > 0.0 { seconds / per_unit } else { 0.0 };
                let direction = (target - self.state.position).signum();
                self.state.position += direction * step;
                self.state.clock += seconds;
                self.state.nearest = self.model.nearest(self.state.position).clone();
            }
            EffectorEvent::SetDoor { door, status } => {
                let current = self
                    .state
                    .doors
                    .get_mut(door)
                    .ok_or_else(|| WorldError::UnknownDoor(door.0.clone()))?;
                if *current == *status {
                    return Err(WorldError::DoorAlreadyInState { door: door.clone(), status: *status });
                }
                *current = *status;
                self.state.clock += self.model.durations.door;
            }
            EffectorEvent::AdvanceClock { seconds } => {
                self.state.clock += seconds.max(0.0);
            }
        }
        Ok(())
    }
}
