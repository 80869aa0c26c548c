//! Turn-by-turn driver / car-AI simulation.

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::backend::{Backend, BackendError, ChatMessage, ChatRequest};
use crate::corpus::{Corpus, Dialog, DomainTag, Scenario, Speaker, Turn, TURN_LENGTHS};
use crate::disfluency::{tag_disfluencies, LexiconSet};
use crate::rng::{derive_seed, digest64, mix64, stream_rng};

pub const DEFAULT_HISTORY_WINDOW: usize = 6;

/// The four role prompts, kept verbatim.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplates {
    pub driver_regular: String,
    pub driver_concluding: String,
    pub ai_regular: String,
    pub ai_concluding: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            driver_regular: include_str!("../../../data/prompts/driver_regular.txt").into(),
            driver_concluding: include_str!("../../../data/prompts/driver_concluding.txt").into(),
            ai_regular: include_str!("../../../data/prompts/ai_regular.txt").into(),
            ai_concluding: include_str!("../../../data/prompts/ai_concluding.txt").into(),
        }
    }
}

impl PromptTemplates {
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let read = |name: &str| std::fs::read_to_string(dir.join(format!("{name}.txt")));
        Ok(PromptTemplates {
            driver_regular: read("driver_regular")?,
            driver_concluding: read("driver_concluding")?,
            ai_regular: read("ai_regular")?,
            ai_concluding: read("ai_concluding")?,
        })
    }

    /// Content hash, recorded in provenance.
    pub fn version(&self) -> String {
        let all = [
            &self.driver_regular,
            &self.driver_concluding,
            &self.ai_regular,
            &self.ai_concluding,
        ]
        .map(String::as_str)
        .join("\u{0}");
        format!("{:016x}", digest64(all.as_bytes()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStage {
    Opening,
    Regular,
    Concluding,
}

/// Stage for turn `index` of a `num_turns` dialog: the final driver turn
/// and the final car-AI turn conclude; turn 0 opens.
pub fn stage_for(index: usize, num_turns: usize) -> PromptStage {
    if index + 2 >= num_turns {
        PromptStage::Concluding
    } else if index == 0 {
        PromptStage::Opening
    } else {
        PromptStage::Regular
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub num_turns: usize,
    pub history_window: usize,
    pub driver_temperature: f64,
    pub ai_temperature: f64,
    pub max_tokens: u32,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            num_turns: 6,
            history_window: DEFAULT_HISTORY_WINDOW,
            driver_temperature: 0.9,
            ai_temperature: 0.7,
            max_tokens: 256,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !TURN_LENGTHS.contains(&self.num_turns) {
            return Err(SimError::Config(format!(
                "num_turns must be one of {TURN_LENGTHS:?}, got {}",
                self.num_turns
            )));
        }
        if self.history_window == 0 {
            return Err(SimError::Config("history_window must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("simulation config: {0}")]
    Config(String),
    #[error("scenario `{scenario}` aborted at turn {turn}: {source}")]
    Aborted {
        scenario: String,
        turn: usize,
        /// Turns completed before the failure.
        partial: Vec<Turn>,
        #[source]
        source: BackendError,
    },
}

/// The last `min(k, len)` turns.
pub fn window_history(history: &[Turn], k: usize) -> &[Turn] {
    &history[history.len().saturating_sub(k)..]
}

/// One `Label: text` line per turn.
pub fn render_history(turns: &[Turn]) -> String {
    turns
        .iter()
        .map(|t| {
            let flat = t.text.split_whitespace().collect::<Vec<_>>().join(" ");
            format!("{}: {flat}", t.speaker.label())
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn conversation_block(history: &[Turn], window: usize) -> String {
    format!("Conversation so far:\n{}", render_history(window_history(history, window)))
}

pub fn assemble_driver_prompt(
    templates: &PromptTemplates,
    config: &SimulationConfig,
    scenario: &Scenario,
    history: &[Turn],
    stage: PromptStage,
) -> ChatRequest {
    let system = match stage {
        PromptStage::Concluding => &templates.driver_concluding,
        _ => &templates.driver_regular,
    };
    let mut parts = Vec::new();
    if stage == PromptStage::Opening {
        parts.push(format!("Scenario: {}", scenario.text));
    }
    if !history.is_empty() {
        parts.push(conversation_block(history, config.history_window));
    }
    parts.push(
        match stage {
            PromptStage::Opening => "Write the driver's opening request to the car AI.",
            PromptStage::Regular => "Write the driver's next line.",
            PromptStage::Concluding => "Write the driver's final line.",
        }
        .to_string(),
    );
    request(system, parts, config.driver_temperature, config)
}

pub fn assemble_ai_prompt(
    templates: &PromptTemplates,
    config: &SimulationConfig,
    history: &[Turn],
    stage: PromptStage,
) -> ChatRequest {
    let system = match stage {
        PromptStage::Concluding => &templates.ai_concluding,
        _ => &templates.ai_regular,
    };
    let mut parts = Vec::new();
    if history.is_empty() {
        parts.push("The driver has not said anything yet.".to_string());
    } else {
        parts.push(conversation_block(history, config.history_window));
    }
    parts.push("Write the car AI's reply.".to_string());
    request(system, parts, config.ai_temperature, config)
}

fn request(system: &str, parts: Vec<String>, temperature: f64, config: &SimulationConfig) -> ChatRequest {
    let mut req = ChatRequest::new(
        vec![ChatMessage::system(system.trim_end()), ChatMessage::user(parts.join("\n\n"))],
        temperature,
    );
    req.max_tokens = config.max_tokens;
    req
}

/// Drops a leading speaker label some models echo back and flattens
/// newlines.
fn clean_completion(text: &str) -> String {
    let mut t = text.trim();
    for label in ["Driver:", "Car AI:"] {
        if let Some(rest) = t.strip_prefix(label) {
            t = rest.trim_start();
        }
    }
    t.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Simulates one dialog, strictly sequentially. Driver turns are tagged
/// with the rule-based tagger.
pub fn simulate_dialog(
    backend: &dyn Backend,
    templates: &PromptTemplates,
    lexicons: &LexiconSet,
    config: &SimulationConfig,
    scenario: &Scenario,
) -> Result<Dialog, SimError> {
    config.validate()?;
    let mut turns: Vec<Turn> = Vec::with_capacity(config.num_turns);
    for i in 0..config.num_turns {
        let speaker = if i % 2 == 0 { Speaker::Driver } else { Speaker::CarAi };
        let stage = stage_for(i, config.num_turns);
        let mut req = match speaker {
            Speaker::Driver => assemble_driver_prompt(templates, config, scenario, &turns, stage),
            Speaker::CarAi => assemble_ai_prompt(templates, config, &turns, stage),
        };
        let turn_seed = derive_seed(config.seed, &format!("turn/{i}"));
        req.seed = Some(turn_seed);
        let text = match backend.complete(&req) {
            Err(BackendError::EmptyOutput) => {
                req.seed = Some(mix64(turn_seed));
                backend.complete(&req)
            }
            other => other,
        }
        .and_then(|t| {
            let c = clean_completion(&t);
            if c.is_empty() {
                Err(BackendError::EmptyOutput)
            } else {
                Ok(c)
            }
        });
        let text = match text {
            Ok(t) => t,
            Err(source) => {
                return Err(SimError::Aborted {
                    scenario: scenario.id.clone(),
                    turn: i,
                    partial: turns,
                    source,
                })
            }
        };
        let mut turn = Turn::new(i, speaker, text);
        if speaker == Speaker::Driver {
            turn.disfluency_spans = tag_disfluencies(&turn.text, lexicons);
        }
        turns.push(turn);
    }
    let mut dialog = Dialog::new(format!("dlg-{}", scenario.id), scenario.clone(), turns);
    dialog.extra.insert("sim_seed".into(), json!(config.seed));
    Ok(dialog)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "lengths", rename_all = "snake_case")]
pub enum LengthSchedule {
    /// Equal counts per length within each domain, in seeded order.
    #[default]
    Stratified,
    /// Independent uniform draw per scenario.
    Uniform,
    /// The same length for every scenario.
    Fixed(usize),
}

/// Turn counts for `scenarios`, in order.
pub fn assign_lengths(scenarios: &[Scenario], schedule: &LengthSchedule, seed: u64) -> Vec<usize> {
    match schedule {
        LengthSchedule::Fixed(n) => vec![*n; scenarios.len()],
        LengthSchedule::Uniform => {
            let mut rng = stream_rng(seed, derive_seed(0, "lengths"));
            scenarios.iter().map(|_| *TURN_LENGTHS.choose(&mut rng).expect("non-empty")).collect()
        }
        LengthSchedule::Stratified => {
            let mut out = vec![0; scenarios.len()];
            for domain in DomainTag::ALL {
                let idx: Vec<usize> = (0..scenarios.len()).filter(|&i| scenarios[i].domain == domain).collect();
                let mut lengths: Vec<usize> = (0..idx.len()).map(|k| TURN_LENGTHS[k % TURN_LENGTHS.len()]).collect();
                let mut rng = stream_rng(seed, derive_seed(0, &format!("lengths/{}", domain.as_str())));
                lengths.shuffle(&mut rng);
                for (i, l) in idx.into_iter().zip(lengths) {
                    out[i] = l;
                }
            }
            out
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationPlan {
    pub seed: u64,
    pub lengths: LengthSchedule,
    pub history_window: usize,
    pub driver_temperature: f64,
    pub ai_temperature: f64,
    pub max_tokens: u32,
}

impl Default for GenerationPlan {
    fn default() -> Self {
        let s = SimulationConfig::default();
        GenerationPlan {
            seed: 0,
            lengths: LengthSchedule::Stratified,
            history_window: s.history_window,
            driver_temperature: s.driver_temperature,
            ai_temperature: s.ai_temperature,
            max_tokens: s.max_tokens,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimFailure {
    pub scenario_id: String,
    pub turn: usize,
    pub message: String,
    pub partial: Vec<Turn>,
}

#[derive(Debug)]
pub struct GenerationOutcome {
    pub corpus: Corpus,
    pub failures: Vec<SimFailure>,
}

/// One dialog per scenario, simulated in parallel. Failed scenarios are
/// listed and left out of the corpus.
pub fn generate_corpus(
    backend: &dyn Backend,
    templates: &PromptTemplates,
    lexicons: &LexiconSet,
    scenarios: &[Scenario],
    plan: &GenerationPlan,
) -> Result<GenerationOutcome, SimError> {
    let lengths = assign_lengths(scenarios, &plan.lengths, plan.seed);
    if let Some(bad) = lengths.iter().find(|l| !TURN_LENGTHS.contains(l)) {
        return Err(SimError::Config(format!("turn length {bad} is not allowed")));
    }
    if plan.history_window == 0 {
        return Err(SimError::Config("history_window must be at least 1".into()));
    }
    let results: Vec<Result<Dialog, SimError>> = scenarios
        .par_iter()
        .zip(lengths.par_iter())
        .enumerate()
        .map(|(i, (scenario, &num_turns))| {
            let config = SimulationConfig {
                num_turns,
                history_window: plan.history_window,
                driver_temperature: plan.driver_temperature,
                ai_temperature: plan.ai_temperature,
                max_tokens: plan.max_tokens,
                seed: derive_seed(plan.seed, &format!("dialog/{i}/{}", scenario.id)),
            };
            simulate_dialog(backend, templates, lexicons, &config, scenario)
        })
        .collect();
    let mut dialogs = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(d) => dialogs.push(d),
            Err(SimError::Aborted { scenario, turn, partial, source }) => failures.push(SimFailure {
                scenario_id: scenario,
                turn,
                message: source.to_string(),
                partial,
            }),
            Err(e) => return Err(e),
        }
    }
    let mut corpus = Corpus::new(dialogs);
    let mut prov = Map::new();
    prov.insert("generator".into(), json!(concat!("disco ", env!("CARGO_PKG_VERSION"))));
    prov.insert("seed".into(), json!(plan.seed));
    prov.insert("backend".into(), json!(backend.id()));
    prov.insert("templates".into(), json!(templates.version()));
    prov.insert("plan".into(), serde_json::to_value(plan).unwrap_or(Value::Null));
    if !failures.is_empty() {
        prov.insert(
            "failures".into(),
            json!(failures.iter().map(|f| json!({"scenario": f.scenario_id, "turn": f.turn, "error": f.message})).collect::<Vec<_>>()),
        );
    }
    corpus.provenance = prov;
    Ok(GenerationOutcome { corpus, failures })
}
