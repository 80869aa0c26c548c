use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{finish, Backend, BackendError, ChatRequest};
use crate::corpus::DomainTag;
use crate::rng::{digest64, seeded};

pub const MOCK_BANK_JSON: &str = include_str!("../../../../data/mock_bank.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockRole {
    DriverRegular,
    DriverConcluding,
    AiRegular,
    AiConcluding,
    Scenario,
}

/// Scripted responses keyed by role, with `{slot}` placeholders.
#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct MockBank {
    pub version: String,
    pub driver_regular: Vec<String>,
    pub driver_concluding: Vec<String>,
    pub ai_regular: Vec<String>,
    pub ai_concluding: Vec<String>,
    pub scenario: Vec<String>,
    pub scenario_goals: BTreeMap<String, Vec<String>>,
    pub slots: BTreeMap<String, Vec<String>>,
}

impl MockBank {
    pub fn bundled() -> &'static MockBank {
        static BANK: OnceLock<MockBank> = OnceLock::new();
        BANK.get_or_init(|| serde_json::from_str(MOCK_BANK_JSON).expect("bundled mock bank parses"))
    }

    pub fn templates(&self, role: MockRole) -> &[String] {
        match role {
            MockRole::DriverRegular => &self.driver_regular,
            MockRole::DriverConcluding => &self.driver_concluding,
            MockRole::AiRegular => &self.ai_regular,
            MockRole::AiConcluding => &self.ai_concluding,
            MockRole::Scenario => &self.scenario,
        }
    }

    fn fill<R: Rng>(&self, template: &str, extra: &[(&str, &[String])], rng: &mut R) -> String {
        let mut out = String::with_capacity(template.len() + 32);
        let mut rest = template;
        while let Some(open) = rest.find('{') {
            let Some(close) = rest[open..].find('}') else { break };
            let name = &rest[open + 1..open + close];
            out.push_str(&rest[..open]);
            let choices = extra
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, v)| *v)
                .or_else(|| self.slots.get(name).map(Vec::as_slice));
            match choices.and_then(|c| c.choose(rng)) {
                Some(v) => out.push_str(v),
                None => out.push_str(&rest[open..=open + close]),
            }
            rest = &rest[open + close + 1..];
        }
        out.push_str(rest);
        out
    }
}

/// Guesses which prompt family a request belongs to from its system prompt.
pub fn detect_role(request: &ChatRequest) -> MockRole {
    let sys = request.system_prompt().to_lowercase();
    if sys.contains("conversation scenarios") {
        MockRole::Scenario
    } else if sys.contains("human driver") {
        if sys.contains("wrap up") {
            MockRole::DriverConcluding
        } else {
            MockRole::DriverRegular
        }
    } else if sys.contains("concludes the conversation") || sys.contains("acknowledgment") {
        MockRole::AiConcluding
    } else {
        MockRole::AiRegular
    }
}

fn scenario_domain(sys: &str) -> Option<DomainTag> {
    let line = sys.lines().find_map(|l| l.trim().strip_prefix("Domain:"))?.trim();
    DomainTag::ALL
        .into_iter()
        .find(|d| d.display_name().eq_ignore_ascii_case(line) || d.as_str() == line)
}

fn scenario_count(sys: &str) -> usize {
    sys.split("Generate ")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .and_then(|n| n.parse().ok())
        .unwrap_or(1)
}

/// Deterministic completion: a pure function of `seed` and the canonical
/// JSON form of `request`.
pub fn mock_complete(seed: u64, request: &ChatRequest) -> String {
    let bank = MockBank::bundled();
    let canonical = serde_json::to_vec(request).expect("request serializes");
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(&canonical);
    let mut rng = seeded(digest64(&bytes));
    let role = detect_role(request);
    let templates = bank.templates(role);
    if role != MockRole::Scenario {
        let t = templates.choose(&mut rng).expect("bank has templates");
        return bank.fill(t, &[], &mut rng);
    }
    let sys = request.system_prompt();
    let all_goals: Vec<String>;
    let goals: &[String] = match scenario_domain(sys).and_then(|d| bank.scenario_goals.get(d.as_str())) {
        Some(g) => g,
        None => {
            all_goals = bank.scenario_goals.values().flatten().cloned().collect();
            &all_goals
        }
    };
    (1..=scenario_count(sys))
        .map(|i| {
            let t = templates.choose(&mut rng).expect("bank has scenario templates");
            format!("{i}. {}", bank.fill(t, &[("goal", goals)], &mut rng))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Clone, Copy, Debug)]
pub struct MockBackend {
    seed: u64,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        MockBackend { seed }
    }
}

impl Backend for MockBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        request.validate()?;
        finish(&mock_complete(self.seed, request))
    }

    fn id(&self) -> String {
        format!("mock:{}:seed={}", MockBank::bundled().version, self.seed)
    }
}
