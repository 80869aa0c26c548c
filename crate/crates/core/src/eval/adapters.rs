//! Read-only converters for external task-oriented dialog datasets.
//!
//! * KVRET: one JSON array of `{"dialogue": [{"turn": "driver"|"assistant",
//!   "data": {"utterance": ..}}], "scenario": {"task": {"intent": ..}}}`.
//!   The intent (navigate, schedule, weather) becomes the service label.
//! * MultiWOZ 2.2 and SGD share a layout: JSON arrays of
//!   `{"dialogue_id", "services": [..], "turns": [{"speaker": "USER"|"SYSTEM",
//!   "utterance": ..}]}`, either one file or a directory of `*.json` files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{normalize_service, EvalError};
use crate::corpus::{Dialog, DomainTag, Scenario, Speaker, Turn};

/// An external dialog with its service labels kept beside the transcript.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDialog {
    pub id: String,
    pub services: Vec<String>,
    pub turns: Vec<Turn>,
}

/// Closest in-car domain for a service label.
pub fn service_domain(service: &str) -> DomainTag {
    match normalize_service(service).as_str() {
        "weather" => DomainTag::Weather,
        "navigate" | "navigation" | "taxi" | "train" | "bus" | "flight" | "rentalcar" => DomainTag::Navigation,
        "restaurant" | "hotel" | "attraction" | "event" | "movie" | "travel" => DomainTag::LocalAttractions,
        "music" | "media" => DomainTag::Entertainment,
        _ => DomainTag::CarFunctions,
    }
}

impl LabeledDialog {
    /// Converts into the corpus model. The first service picks the domain;
    /// all labels go to `extra.services`.
    pub fn to_dialog(&self) -> Dialog {
        let domain = self.services.first().map_or(DomainTag::CarFunctions, |s| service_domain(s));
        let mut scenario = Scenario::new(format!("{}-scenario", self.id), domain, self.services.join(", "));
        scenario.extra.insert("external".into(), Value::Bool(true));
        let mut d = Dialog::new(self.id.clone(), scenario, self.turns.clone());
        d.extra.insert("services".into(), serde_json::json!(self.services));
        d
    }
}

fn adapter_err(path: &Path, message: impl Into<String>) -> EvalError {
    EvalError::Adapter { path: path.display().to_string(), message: message.into() }
}

fn read_json(path: &Path) -> Result<Value, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| adapter_err(path, e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| adapter_err(path, e.to_string()))
}

fn json_files(path: &Path) -> Result<Vec<std::path::PathBuf>, EvalError> {
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .map_err(|e| adapter_err(path, e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json") && !p.ends_with("schema.json"))
            .collect();
        files.sort();
        Ok(files)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

pub fn read_kvret(path: &Path) -> Result<Vec<LabeledDialog>, EvalError> {
    let v = read_json(path)?;
    let arr = v.as_array().ok_or_else(|| adapter_err(path, "expected a JSON array"))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("kvret");
    arr.iter()
        .enumerate()
        .map(|(i, d)| {
            let intent = d.pointer("/scenario/task/intent").and_then(Value::as_str);
            let turns = d
                .get("dialogue")
                .and_then(Value::as_array)
                .ok_or_else(|| adapter_err(path, format!("dialog {i} has no `dialogue` array")))?
                .iter()
                .enumerate()
                .map(|(t, turn)| {
                    let speaker = match turn.get("turn").and_then(Value::as_str) {
                        Some("driver") => Speaker::Driver,
                        _ => Speaker::CarAi,
                    };
                    let text = turn.pointer("/data/utterance").and_then(Value::as_str).unwrap_or("");
                    Turn::new(t, speaker, text)
                })
                .collect();
            Ok(LabeledDialog {
                id: format!("{stem}-{i:05}"),
                services: intent.map(|s| vec![s.to_string()]).unwrap_or_default(),
                turns,
            })
        })
        .collect()
}

/// MultiWOZ 2.2 or SGD dialogs.
pub fn read_schema_guided(path: &Path) -> Result<Vec<LabeledDialog>, EvalError> {
    let mut out = Vec::new();
    for file in json_files(path)? {
        let v = read_json(&file)?;
        let arr = v.as_array().ok_or_else(|| adapter_err(&file, "expected a JSON array"))?;
        for (i, d) in arr.iter().enumerate() {
            let id = d
                .get("dialogue_id")
                .and_then(Value::as_str)
                .ok_or_else(|| adapter_err(&file, format!("dialog {i} has no dialogue_id")))?;
            let services = d
                .get("services")
                .and_then(Value::as_array)
                .map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect())
                .unwrap_or_default();
            let turns = d
                .get("turns")
                .and_then(Value::as_array)
                .map(|ts| {
                    ts.iter()
                        .enumerate()
                        .map(|(t, turn)| {
                            let speaker = match turn.get("speaker").and_then(Value::as_str) {
                                Some("USER") => Speaker::Driver,
                                _ => Speaker::CarAi,
                            };
                            Turn::new(t, speaker, turn.get("utterance").and_then(Value::as_str).unwrap_or(""))
                        })
                        .collect()
                })
                .unwrap_or_default();
            out.push(LabeledDialog { id: id.to_string(), services, turns });
        }
    }
    Ok(out)
}
