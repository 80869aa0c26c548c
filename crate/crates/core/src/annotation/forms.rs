use serde::{Deserialize, Serialize};

use super::EvalMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Integer 1..=5.
    Likert,
    /// "A" or "B".
    Choice,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MetricSpec {
    pub name: &'static str,
    pub label: &'static str,
    pub kind: MetricKind,
    /// What 1 and 5 mean (Likert) or the question asked (choice).
    pub low: &'static str,
    pub high: &'static str,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FormSpec {
    pub mode: EvalMode,
    pub metrics: Vec<MetricSpec>,
}

const fn likert(name: &'static str, label: &'static str, low: &'static str, high: &'static str) -> MetricSpec {
    MetricSpec { name, label, kind: MetricKind::Likert, low, high }
}

const fn choice(name: &'static str, label: &'static str, question: &'static str) -> MetricSpec {
    MetricSpec { name, label, kind: MetricKind::Choice, low: question, high: question }
}

const INTRINSIC: [MetricSpec; 6] = [
    likert("naturalness", "Naturalness", "robotic/artificial", "completely natural"),
    likert("coherence", "Coherence", "disjointed", "fully coherent"),
    likert("engagement", "Engagement", "dull", "highly engaging"),
    likert("consistency", "Consistency", "contradictory", "fully consistent"),
    likert("on_topic", "On-topic relevance", "off topic", "fully on topic"),
    likert("disfluency_realism", "Disfluency realism", "forced or unnatural", "indistinguishable from real speech"),
];

const COMPARATIVE: [MetricSpec; 5] = [
    choice("overall", "Overall quality", "Which dialog is better overall?"),
    choice("naturalness", "Naturalness", "Which dialog sounds more natural?"),
    choice("task_effectiveness", "Task effectiveness", "Which dialog accomplishes the driver's task better?"),
    choice("human_likeness", "Human-likeness", "Which dialog sounds more like real people?"),
    choice("engagement", "Engagement", "Which dialog is more engaging?"),
];

const INTEGRATION: [MetricSpec; 3] = [
    likert("naturalness", "Naturalness", "robotic/artificial", "completely natural"),
    likert("appropriateness", "Appropriateness", "disfluencies feel out of place", "disfluencies fit the context"),
    likert("clarity", "Clarity", "hard to follow", "perfectly clear"),
];

pub fn form_spec(mode: EvalMode) -> FormSpec {
    let metrics = match mode {
        EvalMode::Intrinsic => INTRINSIC.to_vec(),
        EvalMode::Pairwise => COMPARATIVE.to_vec(),
        EvalMode::DisfluencyIntegration => INTEGRATION.to_vec(),
    };
    FormSpec { mode, metrics }
}

pub fn metric_names(mode: EvalMode) -> Vec<&'static str> {
    form_spec(mode).metrics.iter().map(|m| m.name).collect()
}
