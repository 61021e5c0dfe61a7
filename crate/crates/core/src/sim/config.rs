//! Probabilistic automaton configuration.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::act;

pub const CONFIG_VERSION: u32 = 1;
const TOLERANCE: f64 = 1e-9;

/// Decision points of the two agents and the acts each may choose.
pub const PHASES: &[(&str, &[&str])] = &[
    ("user_offer", &[act::SELECT, act::REQUEST_ALTS, act::REQUEST]),
    ("user_confirm", &[act::AFFIRM, act::NEGATE]),
    ("user_close", &[act::THANK_YOU, act::GOODBYE]),
    ("system_results", &[act::OFFER, act::INFORM_COUNT]),
    ("system_transact", &[act::CONFIRM, act::NOTIFY_SUCCESS]),
    ("system_after_select", &[act::OFFER_INTENT, act::REQ_MORE]),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_max_intents")]
    pub max_intents: usize,
    /// Weight of drawing 1, 2, 3, ... services per dialogue.
    pub services_per_dialogue: Vec<f64>,
    /// Probability that a search item is followed by a transaction on the
    /// same service.
    pub follow_up: f64,
    /// Probability of constraining each optional slot.
    pub optional_constraint: f64,
    /// Probability of reusing a value from an earlier service.
    pub carryover: f64,
    /// Probability that an item starts with a constraint no entity meets.
    #[serde(default)]
    pub decoy: f64,
    /// Pairs of slot names treated as the same quantity across services.
    #[serde(default)]
    pub slot_aliases: Vec<[String; 2]>,
}

fn default_max_intents() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    /// Distribution of extra slots informed alongside INFORM_INTENT.
    pub begin_informs: Vec<f64>,
    /// Distribution of unrequested slots volunteered when answering a REQUEST.
    pub answer_extra_informs: Vec<f64>,
    /// Distribution of extra slots shown with each OFFER.
    pub offer_slots: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutomatonConfig {
    pub config_version: u32,
    pub max_turns: usize,
    /// Cap on REQUEST_ALTS, user REQUEST and NEGATE rounds per item.
    pub max_repeats: usize,
    pub scenario: ScenarioConfig,
    pub parameters: Parameters,
    pub transitions: BTreeMap<String, BTreeMap<String, f64>>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("unsupported config_version {0}")]
    Version(u32),
    #[error("{0}")]
    Invalid(String),
}

fn check_distribution(name: &str, weights: &[f64]) -> Result<(), ConfigError> {
    if weights.is_empty() {
        return Err(ConfigError::Invalid(format!("{name} is empty")));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(ConfigError::Invalid(format!("{name} has a negative or non-finite weight")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > TOLERANCE {
        return Err(ConfigError::Invalid(format!("{name} sums to {total}, expected 1")));
    }
    Ok(())
}

fn check_probability(name: &str, p: f64) -> Result<(), ConfigError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ConfigError::Invalid(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

impl AutomatonConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.config_version != CONFIG_VERSION {
            return Err(ConfigError::Version(self.config_version));
        }
        if self.max_turns < 2 {
            return Err(ConfigError::Invalid("max_turns must be at least 2".into()));
        }
        if self.scenario.max_intents == 0 {
            return Err(ConfigError::Invalid("scenario.max_intents must be at least 1".into()));
        }
        check_distribution("scenario.services_per_dialogue", &self.scenario.services_per_dialogue)?;
        check_probability("scenario.follow_up", self.scenario.follow_up)?;
        check_probability("scenario.optional_constraint", self.scenario.optional_constraint)?;
        check_probability("scenario.carryover", self.scenario.carryover)?;
        check_probability("scenario.decoy", self.scenario.decoy)?;
        check_distribution("parameters.begin_informs", &self.parameters.begin_informs)?;
        check_distribution("parameters.answer_extra_informs", &self.parameters.answer_extra_informs)?;
        check_distribution("parameters.offer_slots", &self.parameters.offer_slots)?;
        for phase in self.transitions.keys() {
            if !PHASES.iter().any(|(p, _)| p == phase) {
                return Err(ConfigError::Invalid(format!("unknown phase `{phase}`")));
            }
        }
        for (phase, outcomes) in PHASES {
            let table = self
                .transitions
                .get(*phase)
                .ok_or_else(|| ConfigError::Invalid(format!("missing transitions.{phase}")))?;
            for act in table.keys() {
                if !outcomes.contains(&act.as_str()) {
                    return Err(ConfigError::Invalid(format!(
                        "transitions.{phase}: `{act}` is not a choice of this phase"
                    )));
                }
            }
            let weights: Vec<f64> = table.values().copied().collect();
            check_distribution(&format!("transitions.{phase}"), &weights)?;
        }
        Ok(())
    }

    /// Probability of `act` in `phase`, zero when unlisted.
    pub fn weight(&self, phase: &str, act: &str) -> f64 {
        self.transitions
            .get(phase)
            .and_then(|t| t.get(act))
            .copied()
            .unwrap_or(0.0)
    }

    /// Partner slot of `slot` under the alias pairs, if any.
    pub fn aliases_of<'a>(&'a self, slot: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        std::iter::once(slot).chain(self.scenario.slot_aliases.iter().filter_map(move |[a, b]| {
            if a == slot {
                Some(b.as_str())
            } else if b == slot {
                Some(a.as_str())
            } else {
                None
            }
        }))
    }
}
