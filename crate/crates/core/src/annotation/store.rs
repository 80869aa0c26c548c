use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use parking_lot::{Mutex, RwLock};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::forms::{form_spec, metric_names, FormSpec};
use super::{AnnotationError, EvalMode};
use crate::corpus::{Dialog, Speaker};
use crate::disfluency::DisfluencySpan;
use crate::eval::{
    aggregate_pairwise, likert_stats, pairwise_majority, AggregationParams, Choice, EvalError, LikertSummary,
    MajorityCounts, RatingRecord, RatingValue,
};
use crate::rng::{derive_seed, seeded};

pub const SESSIONS_DIR: &str = "sessions";
pub const RATINGS_FILE: &str = "ratings.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SessionItem {
    Dialog {
        id: String,
        dialog: Dialog,
    },
    /// `a` and `b` are the displayed sides; `swapped` means `a` came from
    /// the second source.
    Pair {
        id: String,
        a: Dialog,
        b: Dialog,
        swapped: bool,
    },
}

impl SessionItem {
    pub fn id(&self) -> &str {
        match self {
            SessionItem::Dialog { id, .. } | SessionItem::Pair { id, .. } => id,
        }
    }
}

/// Body of a create-session request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub mode: EvalMode,
    pub items: Vec<SessionItem>,
    pub evaluators: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    /// Names of the two compared sources, pairwise only.
    #[serde(default)]
    pub sources: Option<[String; 2]>,
    #[serde(default)]
    pub id: Option<String>,
}

/// A persisted session manifest. Never modified after creation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub mode: EvalMode,
    pub items: Vec<SessionItem>,
    pub evaluators: Vec<String>,
    pub seed: u64,
    pub sources: [String; 2],
    /// Item indices in presentation order, per evaluator.
    pub orders: BTreeMap<String, Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct LogEntry {
    session_id: String,
    #[serde(flatten)]
    record: RatingRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TurnView {
    pub speaker: Speaker,
    pub text: String,
    pub disfluency_spans: Vec<DisfluencySpan>,
}

/// A transcript stripped of identifiers and provenance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DialogView {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dialog_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub turns: Vec<TurnView>,
}

impl DialogView {
    fn of(d: &Dialog, reveal: bool) -> Self {
        DialogView {
            dialog_id: reveal.then(|| d.id.clone()),
            scenario: reveal.then(|| d.scenario.text.clone()),
            turns: d
                .turns
                .iter()
                .map(|t| TurnView { speaker: t.speaker, text: t.text.clone(), disfluency_spans: t.disfluency_spans.clone() })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairView {
    pub a: DialogView,
    pub b: DialogView,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ItemPayload {
    pub session_id: String,
    pub item_id: String,
    /// 0-based position in this evaluator's order.
    pub position: usize,
    pub total: usize,
    pub form: FormSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dialog: Option<DialogView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair: Option<PairView>,
    /// Metrics of this item the evaluator already submitted.
    pub rated_metrics: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextItem {
    Item(Box<ItemPayload>),
    Done { session_id: String, evaluator: String },
}

/// Session manifest plus its accepted ratings in log order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionState {
    pub session: Session,
    pub ratings: Vec<RatingRecord>,
    /// Fully rated items per evaluator.
    pub completed: BTreeMap<String, usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SourceCounts {
    pub first: usize,
    pub second: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairwiseSummary {
    pub sources: [String; 2],
    /// Per-evaluator choices, unblinded.
    pub raw: BTreeMap<String, SourceCounts>,
    /// One vote per pair, unblinded.
    pub majority: BTreeMap<String, MajorityCounts>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub mode: EvalMode,
    /// Items times evaluators.
    pub total_judgments: usize,
    pub completed_judgments: usize,
    pub completion: f64,
    pub likert: BTreeMap<String, LikertSummary>,
    pub likert_rendered: BTreeMap<String, String>,
    /// Metrics with fewer than two values, and how many they have.
    pub insufficient: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairwise: Option<PairwiseSummary>,
}

#[derive(Default)]
struct State {
    sessions: BTreeMap<String, Session>,
    ratings: BTreeMap<String, Vec<RatingRecord>>,
    keys: HashSet<(String, String, String, String)>,
    next_seq: u64,
}

impl State {
    fn accept(&mut self, session_id: &str, record: RatingRecord) -> bool {
        let key = (
            session_id.to_string(),
            record.evaluator_id.clone(),
            record.item_id.clone(),
            record.metric.clone(),
        );
        if !self.keys.insert(key) {
            return false;
        }
        self.next_seq = self.next_seq.max(record.seq.map_or(0, |s| s + 1));
        self.ratings.entry(session_id.to_string()).or_default().push(record);
        true
    }

    fn rated(&self, session: &str, evaluator: &str, item: &str) -> Vec<String> {
        self.ratings
            .get(session)
            .into_iter()
            .flatten()
            .filter(|r| r.evaluator_id == evaluator && r.item_id == item)
            .map(|r| r.metric.clone())
            .collect()
    }
}

/// File-backed session store. Ratings are appended by a single writer;
/// readers clone snapshots under a shared lock.
pub struct AnnotationStore {
    root: PathBuf,
    state: RwLock<State>,
    log: Mutex<File>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AnnotationError + '_ {
    move |source| AnnotationError::Io { path: path.display().to_string(), source }
}

impl AnnotationStore {
    /// Opens (or creates) a store rooted at `root` and replays its log.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, AnnotationError> {
        let root = root.into();
        let sessions_dir = root.join(SESSIONS_DIR);
        fs::create_dir_all(&sessions_dir).map_err(io_err(&sessions_dir))?;
        let mut state = State::default();

        let mut manifests: Vec<PathBuf> = fs::read_dir(&sessions_dir)
            .map_err(io_err(&sessions_dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        manifests.sort();
        for path in manifests {
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let s: Session = serde_json::from_str(&text).map_err(|e| AnnotationError::Corrupt {
                path: path.display().to_string(),
                line: e.line(),
                message: e.to_string(),
            })?;
            state.sessions.insert(s.id.clone(), s);
        }

        let log_path = root.join(RATINGS_FILE);
        let mut log = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&log_path)
            .map_err(io_err(&log_path))?;
        let mut raw = String::new();
        log.read_to_string(&mut raw).map_err(io_err(&log_path))?;
        let complete = raw.is_empty() || raw.ends_with('\n');
        let lines: Vec<&str> = raw.lines().collect();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<LogEntry>(line) {
                Ok(e) => {
                    state.accept(&e.session_id, e.record);
                }
                // A torn final write from a crash: the record was never acknowledged.
                Err(_) if !complete && i + 1 == lines.len() => {
                    tracing::warn!(line = i + 1, "ignoring incomplete trailing rating record");
                }
                Err(e) => {
                    return Err(AnnotationError::Corrupt {
                        path: log_path.display().to_string(),
                        line: i + 1,
                        message: e.to_string(),
                    })
                }
            }
        }
        if !complete {
            // Drop the torn bytes so the next append starts on a fresh line.
            let keep = raw.rfind('\n').map_or(0, |i| i + 1);
            log.set_len(keep as u64).map_err(io_err(&log_path))?;
        }
        log.seek(SeekFrom::End(0)).map_err(io_err(&log_path))?;
        Ok(AnnotationStore { root, state: RwLock::new(state), log: Mutex::new(log) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn create_session(&self, spec: SessionSpec) -> Result<Session, AnnotationError> {
        let arg = |m: String| Err(AnnotationError::Argument(m));
        if spec.items.is_empty() {
            return arg("manifest is empty".into());
        }
        if spec.evaluators.is_empty() {
            return arg("at least one evaluator is required".into());
        }
        let mut seen = HashSet::new();
        for e in &spec.evaluators {
            if e.trim().is_empty() {
                return arg("evaluator ids must be non-empty".into());
            }
            if !seen.insert(e.as_str()) {
                return arg(format!("duplicate evaluator id `{e}`"));
            }
        }
        let mut ids = HashSet::new();
        for item in &spec.items {
            if !ids.insert(item.id()) {
                return arg(format!("duplicate item id `{}`", item.id()));
            }
            let is_pair = matches!(item, SessionItem::Pair { .. });
            if is_pair != (spec.mode == EvalMode::Pairwise) {
                return arg(format!("item `{}` does not fit a {} session", item.id(), spec.mode.as_str()));
            }
        }
        let mut state = self.state.write();
        let id = match spec.id {
            Some(id) => {
                if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                    return arg(format!("session id `{id}` must be [A-Za-z0-9_-]+"));
                }
                if state.sessions.contains_key(&id) {
                    return Err(AnnotationError::Conflict(format!("session `{id}` already exists")));
                }
                id
            }
            None => {
                let mut n = state.sessions.len() + 1;
                while state.sessions.contains_key(&format!("session-{n:04}")) {
                    n += 1;
                }
                format!("session-{n:04}")
            }
        };
        let orders = spec
            .evaluators
            .iter()
            .map(|e| {
                let mut order: Vec<usize> = (0..spec.items.len()).collect();
                order.shuffle(&mut seeded(derive_seed(spec.seed, &format!("order/{e}"))));
                (e.clone(), order)
            })
            .collect();
        let session = Session {
            id: id.clone(),
            mode: spec.mode,
            items: spec.items,
            evaluators: spec.evaluators,
            seed: spec.seed,
            sources: spec.sources.unwrap_or_else(|| ["first".into(), "second".into()]),
            orders,
        };
        let dir = self.root.join(SESSIONS_DIR);
        let tmp = dir.join(format!(".{id}.json.tmp"));
        let path = dir.join(format!("{id}.json"));
        let body = serde_json::to_vec_pretty(&session).expect("session serializes");
        fs::write(&tmp, body).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        state.sessions.insert(id, session.clone());
        Ok(session)
    }

    pub fn session(&self, id: &str) -> Result<Session, AnnotationError> {
        self.state
            .read()
            .sessions
            .get(id)
            .cloned()
            .ok_or_else(|| AnnotationError::NotFound(format!("session `{id}`")))
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.state.read().sessions.keys().cloned().collect()
    }

    pub fn next_item(&self, session_id: &str, evaluator: &str) -> Result<NextItem, AnnotationError> {
        let state = self.state.read();
        let session = state
            .sessions
            .get(session_id)
            .ok_or_else(|| AnnotationError::NotFound(format!("session `{session_id}`")))?;
        let order = session
            .orders
            .get(evaluator)
            .ok_or_else(|| AnnotationError::NotFound(format!("evaluator `{evaluator}` in session `{session_id}`")))?;
        let metrics = metric_names(session.mode);
        for (position, &idx) in order.iter().enumerate() {
            let item = &session.items[idx];
            let rated = state.rated(session_id, evaluator, item.id());
            if metrics.iter().all(|m| rated.iter().any(|r| r == m)) {
                continue;
            }
            let (dialog, pair) = match item {
                SessionItem::Dialog { dialog, .. } => (Some(DialogView::of(dialog, true)), None),
                SessionItem::Pair { a, b, .. } => {
                    (None, Some(PairView { a: DialogView::of(a, false), b: DialogView::of(b, false) }))
                }
            };
            return Ok(NextItem::Item(Box::new(ItemPayload {
                session_id: session_id.to_string(),
                item_id: item.id().to_string(),
                position,
                total: order.len(),
                form: form_spec(session.mode),
                dialog,
                pair,
                rated_metrics: rated,
            })));
        }
        Ok(NextItem::Done { session_id: session_id.to_string(), evaluator: evaluator.to_string() })
    }

    /// Validates and appends one rating. Returns it with its log sequence
    /// number.
    pub fn submit_rating(&self, session_id: &str, mut record: RatingRecord) -> Result<RatingRecord, AnnotationError> {
        let mut state = self.state.write();
        let session = state
            .sessions
            .get(session_id)
            .ok_or_else(|| AnnotationError::NotFound(format!("session `{session_id}`")))?;
        let invalid = |m: String| Err(AnnotationError::Validation(m));
        if !session.orders.contains_key(&record.evaluator_id) {
            return invalid(format!("evaluator `{}` is not enrolled", record.evaluator_id));
        }
        if !session.items.iter().any(|i| i.id() == record.item_id) {
            return invalid(format!("item `{}` is not in this session", record.item_id));
        }
        if !metric_names(session.mode).contains(&record.metric.as_str()) {
            return invalid(format!("metric `{}` is not registered for {} sessions", record.metric, session.mode.as_str()));
        }
        match (session.mode, record.value) {
            (EvalMode::Pairwise, RatingValue::Choice(_)) => {}
            (EvalMode::Pairwise, RatingValue::Likert(_)) => return invalid("pairwise ratings take \"A\" or \"B\"".into()),
            (_, RatingValue::Likert(v)) if (1..=5).contains(&v) => {}
            (_, RatingValue::Likert(v)) => return invalid(format!("Likert value {v} is outside 1..=5")),
            (_, RatingValue::Choice(_)) => return invalid("this session takes Likert values 1..=5".into()),
        }
        let key = (
            session_id.to_string(),
            record.evaluator_id.clone(),
            record.item_id.clone(),
            record.metric.clone(),
        );
        if state.keys.contains(&key) {
            return Err(AnnotationError::Conflict(format!(
                "`{}` already rated `{}` on item `{}`",
                record.evaluator_id, record.metric, record.item_id
            )));
        }
        record.seq = Some(state.next_seq);
        let entry = LogEntry { session_id: session_id.to_string(), record: record.clone() };
        let mut line = serde_json::to_vec(&entry).expect("rating serializes");
        line.push(b'\n');
        let log_path = self.root.join(RATINGS_FILE);
        {
            let mut log = self.log.lock();
            log.write_all(&line).map_err(io_err(&log_path))?;
            log.flush().map_err(io_err(&log_path))?;
        }
        state.accept(session_id, record.clone());
        Ok(record)
    }

    pub fn ratings(&self, session_id: &str) -> Vec<RatingRecord> {
        self.state.read().ratings.get(session_id).cloned().unwrap_or_default()
    }

    pub fn state(&self, session_id: &str) -> Result<SessionState, AnnotationError> {
        let session = self.session(session_id)?;
        let state = self.state.read();
        let ratings = state.ratings.get(session_id).cloned().unwrap_or_default();
        let metrics = metric_names(session.mode);
        let completed = session
            .evaluators
            .iter()
            .map(|e| {
                let n = session
                    .items
                    .iter()
                    .filter(|i| {
                        let rated = state.rated(session_id, e, i.id());
                        metrics.iter().all(|m| rated.iter().any(|r| r == m))
                    })
                    .count();
                (e.clone(), n)
            })
            .collect();
        Ok(SessionState { session, ratings, completed })
    }

    pub fn summary(&self, session_id: &str, params: &AggregationParams) -> Result<SessionSummary, AnnotationError> {
        let st = self.state(session_id)?;
        let session = &st.session;
        let total = session.items.len() * session.evaluators.len();
        let done: usize = st.completed.values().sum();
        let mut likert = BTreeMap::new();
        let mut insufficient = BTreeMap::new();
        let mut by_metric: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for r in &st.ratings {
            if let RatingValue::Likert(v) = r.value {
                by_metric.entry(&r.metric).or_default().push(f64::from(v));
            }
        }
        for (m, vals) in by_metric {
            match likert_stats(&vals, params) {
                Ok(s) => {
                    likert.insert(m.to_string(), s);
                }
                Err(EvalError::InsufficientData { count, .. }) => {
                    insufficient.insert(m.to_string(), count);
                }
                Err(e) => return Err(AnnotationError::Argument(e.to_string())),
            }
        }
        let pairwise = (session.mode == EvalMode::Pairwise).then(|| {
            let swapped: BTreeMap<&str, bool> = session
                .items
                .iter()
                .filter_map(|i| match i {
                    SessionItem::Pair { id, swapped, .. } => Some((id.as_str(), *swapped)),
                    SessionItem::Dialog { .. } => None,
                })
                .collect();
            // In source space "A" means the first source.
            let unblinded: Vec<RatingRecord> = st
                .ratings
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    if let RatingValue::Choice(c) = r.value {
                        if swapped.get(r.item_id.as_str()).copied().unwrap_or(false) {
                            r.value = RatingValue::Choice(if c == Choice::A { Choice::B } else { Choice::A });
                        }
                    }
                    r
                })
                .collect();
            PairwiseSummary {
                sources: session.sources.clone(),
                raw: aggregate_pairwise(&unblinded)
                    .into_iter()
                    .map(|(m, c)| (m, SourceCounts { first: c.a, second: c.b }))
                    .collect(),
                majority: pairwise_majority(&unblinded),
            }
        });
        Ok(SessionSummary {
            session_id: session.id.clone(),
            mode: session.mode,
            total_judgments: total,
            completed_judgments: done,
            completion: if total == 0 { 0.0 } else { done as f64 / total as f64 },
            likert_rendered: likert.iter().map(|(k, v)| (k.clone(), v.to_string())).collect(),
            likert,
            insufficient,
            pairwise,
        })
    }
}

/// Reads every rating record from a log file, for offline aggregation.
pub fn read_rating_log(path: &Path) -> Result<Vec<(String, RatingRecord)>, AnnotationError> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let e: LogEntry = serde_json::from_str(&line).map_err(|e| AnnotationError::Corrupt {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((e.session_id, e.record));
    }
    Ok(out)
}
