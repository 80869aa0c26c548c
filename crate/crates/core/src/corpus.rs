//! Corpus data model: domains, turns, dialogs, JSONL storage and structural
//! validation.
//!
//! A corpus file is JSONL with one dialog object per line. When the corpus
//! carries provenance metadata it is written as a first header line of the
//! form `{"provenance": {...}}`; readers recognise it by the absence of an
//! `id` key. Unknown fields on dialogs, turns and scenarios are kept in
//! `extra` and written back unchanged.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::disfluency::DisfluencySpan;

/// Turn counts allowed for generated dialogs.
pub const TURN_LENGTHS: [usize; 5] = [6, 8, 10, 12, 14];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainTag {
    Navigation,
    MaintenanceDiagnostics,
    SafetyEmergency,
    Entertainment,
    LocalAttractions,
    CarFunctions,
    Weather,
}

impl DomainTag {
    pub const ALL: [DomainTag; 7] = [
        DomainTag::Navigation,
        DomainTag::MaintenanceDiagnostics,
        DomainTag::SafetyEmergency,
        DomainTag::Entertainment,
        DomainTag::LocalAttractions,
        DomainTag::CarFunctions,
        DomainTag::Weather,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DomainTag::Navigation => "navigation",
            DomainTag::MaintenanceDiagnostics => "maintenance_diagnostics",
            DomainTag::SafetyEmergency => "safety_emergency",
            DomainTag::Entertainment => "entertainment",
            DomainTag::LocalAttractions => "local_attractions",
            DomainTag::CarFunctions => "car_functions",
            DomainTag::Weather => "weather",
        }
    }

    /// Human-readable domain name used inside prompts.
    pub fn display_name(self) -> &'static str {
        match self {
            DomainTag::Navigation => "Navigation",
            DomainTag::MaintenanceDiagnostics => "Car Maintenance and Diagnostics",
            DomainTag::SafetyEmergency => "Safety and Emergency Assistance",
            DomainTag::Entertainment => "Entertainment",
            DomainTag::LocalAttractions => "Local and On-Route Attractions and Activities",
            DomainTag::CarFunctions => "Car Functions",
            DomainTag::Weather => "Weather",
        }
    }
}

impl fmt::Display for DomainTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown domain `{0}`")]
pub struct UnknownDomain(pub String);

impl FromStr for DomainTag {
    type Err = UnknownDomain;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DomainTag::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| UnknownDomain(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Driver,
    CarAi,
}

impl Speaker {
    pub fn label(self) -> &'static str {
        match self {
            Speaker::Driver => "Driver",
            Speaker::CarAi => "Car AI",
        }
    }

    pub fn other(self) -> Speaker {
        match self {
            Speaker::Driver => Speaker::CarAi,
            Speaker::CarAi => Speaker::Driver,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    #[serde(default)]
    pub disfluency_spans: Vec<DisfluencySpan>,
    pub turn_index: usize,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Turn {
    pub fn new(turn_index: usize, speaker: Speaker, text: impl Into<String>) -> Self {
        Turn {
            speaker,
            text: text.into(),
            disfluency_spans: Vec::new(),
            turn_index,
            extra: Map::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub domain: DomainTag,
    pub text: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Scenario {
    pub fn new(id: impl Into<String>, domain: DomainTag, text: impl Into<String>) -> Self {
        Scenario {
            id: id.into(),
            domain,
            text: text.into(),
            extra: Map::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dialog {
    pub id: String,
    pub domain: DomainTag,
    pub scenario: Scenario,
    pub turns: Vec<Turn>,
    pub num_turns: usize,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Dialog {
    pub fn new(id: impl Into<String>, scenario: Scenario, turns: Vec<Turn>) -> Self {
        Dialog {
            id: id.into(),
            domain: scenario.domain,
            num_turns: turns.len(),
            scenario,
            turns,
            extra: Map::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub dialogs: Vec<Dialog>,
    pub provenance: Map<String, Value>,
}

impl Corpus {
    pub fn new(dialogs: Vec<Dialog>) -> Self {
        Corpus {
            dialogs,
            provenance: Map::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.dialogs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dialogs.is_empty()
    }

    /// First id that occurs twice, if any.
    pub fn duplicate_id(&self) -> Option<&str> {
        let mut seen = HashSet::new();
        self.dialogs
            .iter()
            .map(|d| d.id.as_str())
            .find(|id| !seen.insert(*id))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate dialog id `{0}`")]
    DuplicateId(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses a JSONL corpus from a reader. Line numbers in errors are 1-based.
pub fn parse_corpus(reader: impl BufRead) -> Result<Corpus, CorpusError> {
    let mut corpus = Corpus::default();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if corpus.dialogs.is_empty() && is_header(&value) {
            if let Some(Value::Object(p)) = value.get("provenance") {
                corpus.provenance = p.clone();
            }
            continue;
        }
        let dialog: Dialog = serde_json::from_value(value).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if !seen.insert(dialog.id.clone()) {
            return Err(CorpusError::DuplicateId(dialog.id));
        }
        corpus.dialogs.push(dialog);
    }
    Ok(corpus)
}

fn is_header(value: &Value) -> bool {
    value
        .as_object()
        .is_some_and(|o| o.contains_key("provenance") && !o.contains_key("id"))
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(io_err(path))?;
    parse_corpus(BufReader::new(file))
}

/// Serializes a corpus to JSONL bytes.
pub fn corpus_to_jsonl(corpus: &Corpus) -> Result<Vec<u8>, CorpusError> {
    if let Some(id) = corpus.duplicate_id() {
        return Err(CorpusError::DuplicateId(id.to_string()));
    }
    let mut out = Vec::new();
    if !corpus.provenance.is_empty() {
        let header = serde_json::json!({ "provenance": corpus.provenance });
        out.extend(serde_json::to_vec(&header).expect("json values serialize"));
        out.push(b'\n');
    }
    for dialog in &corpus.dialogs {
        out.extend(serde_json::to_vec(dialog).expect("dialogs serialize"));
        out.push(b'\n');
    }
    Ok(out)
}

pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let bytes = corpus_to_jsonl(corpus)?;
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    EmptyDialog,
    EmptyText,
    SpanBounds,
    SpanOverlap,
    TurnIndex,
    FirstSpeaker,
    Alternation,
    LastSpeaker,
    TurnCount,
    TurnLength,
    EmptyScenario,
    ScenarioDomain,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::EmptyDialog => "EMPTY_DIALOG",
            ViolationCode::EmptyText => "EMPTY_TEXT",
            ViolationCode::SpanBounds => "SPAN_BOUNDS",
            ViolationCode::SpanOverlap => "SPAN_OVERLAP",
            ViolationCode::TurnIndex => "TURN_INDEX",
            ViolationCode::FirstSpeaker => "FIRST_SPEAKER",
            ViolationCode::Alternation => "ALTERNATION",
            ViolationCode::LastSpeaker => "LAST_SPEAKER",
            ViolationCode::TurnCount => "TURN_COUNT",
            ViolationCode::TurnLength => "TURN_LENGTH",
            ViolationCode::EmptyScenario => "EMPTY_SCENARIO",
            ViolationCode::ScenarioDomain => "SCENARIO_DOMAIN",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub severity: Severity,
    /// Turn index the violation points at; `None` for dialog-level issues.
    pub turn: Option<usize>,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub dialog_id: String,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    /// No error-severity violations (warnings allowed).
    pub fn is_clean(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.severity == Severity::Warning)
    }

    pub fn has(&self, code: ViolationCode, turn: Option<usize>) -> bool {
        self.violations
            .iter()
            .any(|v| v.code == code && v.turn == turn)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationPolicy {
    /// When false the turn-length rule is reported as a warning, for
    /// ingesting external corpora whose lengths vary.
    pub strict_lengths: bool,
}

impl ValidationPolicy {
    pub const STRICT: ValidationPolicy = ValidationPolicy {
        strict_lengths: true,
    };
    pub const LENIENT: ValidationPolicy = ValidationPolicy {
        strict_lengths: false,
    };
}

impl Default for ValidationPolicy {
    fn default() -> Self {
        Self::STRICT
    }
}

/// Structural checks on a turn sequence: text, spans, indices, and the
/// driver-first / alternating / car-AI-final shape.
pub fn validate_turns(turns: &[Turn], policy: ValidationPolicy) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |code, severity, turn, message: String| {
        out.push(Violation {
            code,
            severity,
            turn,
            message,
        })
    };

    if turns.is_empty() {
        push(
            ViolationCode::EmptyDialog,
            Severity::Error,
            None,
            "dialog has no turns".into(),
        );
        return out;
    }

    for (i, turn) in turns.iter().enumerate() {
        if turn.turn_index != i {
            push(
                ViolationCode::TurnIndex,
                Severity::Error,
                Some(i),
                format!("turn_index is {}, expected {i}", turn.turn_index),
            );
        }
        if turn.text.trim().is_empty() {
            push(
                ViolationCode::EmptyText,
                Severity::Error,
                Some(i),
                "turn text is empty".into(),
            );
        }
        let len = turn.text.chars().count();
        let mut prev_end = 0;
        for (k, span) in turn.disfluency_spans.iter().enumerate() {
            if span.start >= span.end || span.end > len {
                push(
                    ViolationCode::SpanBounds,
                    Severity::Error,
                    Some(i),
                    format!("span {}..{} outside text of length {len}", span.start, span.end),
                );
            } else if k > 0 && span.start < prev_end {
                push(
                    ViolationCode::SpanOverlap,
                    Severity::Error,
                    Some(i),
                    format!("span {}..{} overlaps or is out of order", span.start, span.end),
                );
            }
            prev_end = prev_end.max(span.end);
        }
        if i == 0 && turn.speaker != Speaker::Driver {
            push(
                ViolationCode::FirstSpeaker,
                Severity::Error,
                Some(0),
                "first turn must be spoken by the driver".into(),
            );
        }
        if i > 0 && turn.speaker == turns[i - 1].speaker {
            push(
                ViolationCode::Alternation,
                Severity::Error,
                Some(i),
                format!("two consecutive {} turns", turn.speaker.label()),
            );
        }
    }

    let last = turns.len() - 1;
    if turns[last].speaker != Speaker::CarAi {
        push(
            ViolationCode::LastSpeaker,
            Severity::Error,
            Some(last),
            "final turn must be spoken by the car AI".into(),
        );
    }
    if !TURN_LENGTHS.contains(&turns.len()) {
        let severity = if policy.strict_lengths {
            Severity::Error
        } else {
            Severity::Warning
        };
        push(
            ViolationCode::TurnLength,
            severity,
            None,
            format!("{} turns, expected one of {:?}", turns.len(), TURN_LENGTHS),
        );
    }
    out
}

pub fn validate_dialog(dialog: &Dialog, policy: ValidationPolicy) -> ValidationReport {
    let mut violations = validate_turns(&dialog.turns, policy);
    if dialog.num_turns != dialog.turns.len() {
        violations.push(Violation {
            code: ViolationCode::TurnCount,
            severity: Severity::Error,
            turn: None,
            message: format!(
                "num_turns is {} but the dialog has {} turns",
                dialog.num_turns,
                dialog.turns.len()
            ),
        });
    }
    if dialog.scenario.text.trim().is_empty() {
        violations.push(Violation {
            code: ViolationCode::EmptyScenario,
            severity: Severity::Error,
            turn: None,
            message: "scenario text is empty".into(),
        });
    }
    if dialog.scenario.domain != dialog.domain {
        violations.push(Violation {
            code: ViolationCode::ScenarioDomain,
            severity: Severity::Error,
            turn: None,
            message: format!(
                "scenario domain {} differs from dialog domain {}",
                dialog.scenario.domain, dialog.domain
            ),
        });
    }
    ValidationReport {
        dialog_id: dialog.id.clone(),
        violations,
    }
}

pub fn validate_corpus(corpus: &Corpus, policy: ValidationPolicy) -> Vec<ValidationReport> {
    corpus
        .dialogs
        .iter()
        .map(|d| validate_dialog(d, policy))
        .collect()
}
