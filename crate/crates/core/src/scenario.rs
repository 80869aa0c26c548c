//! Few-shot scenario generation with near-duplicate filtering.

use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendError, ChatMessage, ChatRequest};
use crate::corpus::{DomainTag, Scenario};
use crate::rng::derive_seed;

pub const SCENARIO_TEMPLATE: &str = include_str!("../../../data/prompts/scenario.txt");
pub const MAX_BATCH: usize = 25;
pub const DEFAULT_BATCH: usize = 10;
/// Jaccard similarity above which two scenarios count as duplicates.
pub const JACCARD_THRESHOLD: f64 = 0.8;
/// Batches requested concurrently per round.
const WAVE: usize = 4;

const BUNDLED_BANKS: [(DomainTag, &str); 7] = [
    (DomainTag::Navigation, include_str!("../../../data/fewshot/navigation.json")),
    (
        DomainTag::MaintenanceDiagnostics,
        include_str!("../../../data/fewshot/maintenance_diagnostics.json"),
    ),
    (DomainTag::SafetyEmergency, include_str!("../../../data/fewshot/safety_emergency.json")),
    (DomainTag::Entertainment, include_str!("../../../data/fewshot/entertainment.json")),
    (DomainTag::LocalAttractions, include_str!("../../../data/fewshot/local_attractions.json")),
    (DomainTag::CarFunctions, include_str!("../../../data/fewshot/car_functions.json")),
    (DomainTag::Weather, include_str!("../../../data/fewshot/weather.json")),
];

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("few-shot bank for {domain}: {message}")]
    Bank { domain: String, message: String },
    #[error("invalid arguments: {0}")]
    Argument(String),
    #[error("no scenarios could be parsed from: {raw:?}")]
    Parse { raw: String },
    #[error("only {obtained} unique scenarios of {target} requested for {domain} before the candidate budget ran out")]
    InsufficientDiversity { domain: DomainTag, obtained: usize, target: usize },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Human-written example scenarios for one domain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FewShotBank {
    domain: DomainTag,
    examples: Vec<String>,
}

#[derive(Deserialize)]
struct RawBank {
    domain: DomainTag,
    examples: Vec<String>,
}

impl<'de> Deserialize<'de> for FewShotBank {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawBank::deserialize(d)?;
        FewShotBank::new(raw.domain, raw.examples).map_err(serde::de::Error::custom)
    }
}

impl FewShotBank {
    pub fn new(domain: DomainTag, examples: Vec<String>) -> Result<Self, ScenarioError> {
        let err = |message: String| ScenarioError::Bank { domain: domain.to_string(), message };
        if !(10..=20).contains(&examples.len()) {
            return Err(err(format!("needs 10 to 20 examples, got {}", examples.len())));
        }
        if examples.iter().any(|e| e.trim().is_empty()) {
            return Err(err("examples must be non-empty".into()));
        }
        let unique: HashSet<&str> = examples.iter().map(String::as_str).collect();
        if unique.len() != examples.len() {
            return Err(err("examples must be distinct".into()));
        }
        Ok(FewShotBank { domain, examples })
    }

    pub fn domain(&self) -> DomainTag {
        self.domain
    }

    pub fn examples(&self) -> &[String] {
        &self.examples
    }

    pub fn bundled(domain: DomainTag) -> FewShotBank {
        let (_, src) = BUNDLED_BANKS.iter().find(|(d, _)| *d == domain).expect("every domain has a bank");
        serde_json::from_str(src).expect("bundled few-shot bank is valid")
    }

    /// Reads `<dir>/<domain>.json`.
    pub fn load(dir: &Path, domain: DomainTag) -> Result<FewShotBank, ScenarioError> {
        let path = dir.join(format!("{}.json", domain.as_str()));
        let text = std::fs::read_to_string(&path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        let bank: FewShotBank = serde_json::from_str(&text).map_err(|e| ScenarioError::Bank {
            domain: domain.to_string(),
            message: e.to_string(),
        })?;
        if bank.domain != domain {
            return Err(ScenarioError::Bank {
                domain: domain.to_string(),
                message: format!("{} declares domain {}", path.display(), bank.domain),
            });
        }
        Ok(bank)
    }
}

pub fn build_scenario_prompt(bank: &FewShotBank, batch_size: usize) -> Result<ChatRequest, ScenarioError> {
    build_scenario_prompt_with(SCENARIO_TEMPLATE, bank, batch_size)
}

pub fn build_scenario_prompt_with(
    template: &str,
    bank: &FewShotBank,
    batch_size: usize,
) -> Result<ChatRequest, ScenarioError> {
    if !(1..=MAX_BATCH).contains(&batch_size) {
        return Err(ScenarioError::Argument(format!(
            "batch size must be 1..={MAX_BATCH}, got {batch_size}"
        )));
    }
    let examples: Vec<String> = bank.examples.iter().map(|e| format!("- {e}")).collect();
    let system = template
        .replace("{domain}", bank.domain.display_name())
        .replace("{examples}", &examples.join("\n"))
        .replace("{count}", &batch_size.to_string());
    let user = format!(
        "Write {batch_size} new {} scenarios.",
        bank.domain.display_name()
    );
    Ok(ChatRequest::new(vec![ChatMessage::system(system.trim_end()), ChatMessage::user(user)], 1.0))
}

fn strip_number(line: &str) -> Option<&str> {
    let digits = line.len() - line.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return None;
    }
    let rest = &line[digits..];
    let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
    rest.starts_with(char::is_whitespace).then(|| rest.trim())
}

fn strip_bullet(line: &str) -> Option<&str> {
    ["- ", "* ", "• "].iter().find_map(|b| line.strip_prefix(b)).map(str::trim)
}

fn collect_items(lines: &[&str], marker: fn(&str) -> Option<&str>) -> Vec<String> {
    let mut items: Vec<String> = Vec::new();
    let mut open = false;
    for line in lines {
        if let Some(body) = marker(line) {
            items.push(body.to_string());
            open = true;
        } else if line.is_empty() {
            open = false;
        } else if open {
            let last = items.last_mut().expect("open item");
            last.push(' ');
            last.push_str(line);
        }
    }
    items
}

/// Splits a numbered list (falling back to bullets, then to one item per
/// line) into scenarios with ids `<domain>-<n>`.
pub fn parse_scenarios(text: &str, domain: DomainTag) -> Result<Vec<Scenario>, ScenarioError> {
    let lines: Vec<&str> = text.lines().map(str::trim).collect();
    let mut items = collect_items(&lines, strip_number);
    if items.is_empty() {
        items = collect_items(&lines, strip_bullet);
    }
    if items.is_empty() {
        items = lines.iter().filter(|l| !l.is_empty()).map(|l| l.to_string()).collect();
    }
    let items: Vec<String> = items
        .into_iter()
        .map(|s| s.trim().trim_matches('"').trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(ScenarioError::Parse { raw: text.to_string() });
    }
    Ok(items
        .into_iter()
        .enumerate()
        .map(|(i, t)| Scenario::new(format!("{}-{i:04}", domain.as_str()), domain, t))
        .collect())
}

/// Case-folded text with punctuation removed and whitespace collapsed.
pub fn dedup_key(text: &str) -> String {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn jaccard(a: &str, b: &str) -> f64 {
    let sa: HashSet<&str> = a.split_whitespace().collect();
    let sb: HashSet<&str> = b.split_whitespace().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

pub fn is_duplicate(a: &str, b: &str) -> bool {
    let (ka, kb) = (dedup_key(a), dedup_key(b));
    ka == kb || jaccard(&ka, &kb) > JACCARD_THRESHOLD
}

/// Requests batches until `target` unique scenarios exist or
/// `10 * target` candidates have been seen.
pub fn generate_scenarios(
    backend: &dyn Backend,
    bank: &FewShotBank,
    target: usize,
    seed: u64,
    batch_size: usize,
) -> Result<Vec<Scenario>, ScenarioError> {
    if target == 0 {
        return Ok(Vec::new());
    }
    let base = build_scenario_prompt(bank, batch_size)?;
    let budget = target * 10;
    let mut kept: Vec<(String, String)> = Vec::with_capacity(target);
    let mut seen = 0usize;
    let mut batch = 0u64;
    loop {
        let wave: Vec<u64> = (batch..batch + WAVE as u64).collect();
        batch += WAVE as u64;
        let outputs: Vec<Result<String, BackendError>> = wave
            .par_iter()
            .map(|&b| {
                let mut req = base.clone();
                req.seed = Some(derive_seed(seed, &format!("{}/{b}", bank.domain.as_str())));
                backend.complete(&req)
            })
            .collect();
        for out in outputs {
            let text = out?;
            let items = match parse_scenarios(&text, bank.domain) {
                Ok(items) => items,
                Err(_) => continue,
            };
            for s in items {
                if seen >= budget {
                    return Err(ScenarioError::InsufficientDiversity {
                        domain: bank.domain,
                        obtained: kept.len(),
                        target,
                    });
                }
                seen += 1;
                let key = dedup_key(&s.text);
                let dup = kept.iter().any(|(_, k)| *k == key || jaccard(k, &key) > JACCARD_THRESHOLD);
                if !dup {
                    kept.push((s.text, key));
                    if kept.len() == target {
                        return Ok(kept
                            .into_iter()
                            .enumerate()
                            .map(|(i, (t, _))| Scenario::new(format!("{}-{i:04}", bank.domain.as_str()), bank.domain, t))
                            .collect());
                    }
                }
            }
        }
    }
}
