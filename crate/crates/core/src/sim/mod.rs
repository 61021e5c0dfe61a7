//! Synthetic dialogue generation: scenarios, the two-agent automaton,
//! template realization and corpus assembly with flow deduplication.

use thiserror::Error;

use crate::engine::CallError;

mod agents;
pub mod config;
mod generate;
pub mod rng;
mod scenario;
mod templates;

pub use agents::{generate_outline, single_item_scenario};
pub use config::{AutomatonConfig, ConfigError};
pub use generate::{
    flow_signature, generate_corpus, write_corpus, CorpusManifest, CorpusOptions, FlowSignature, GeneratedCorpus,
    ShardInfo, SHARD_SIZE,
};
pub use scenario::{sample_scenario, Scenario, ScenarioItem};
pub use templates::{humanize_intent, humanize_slot, realize, Template, TemplateError, TemplateSet};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("no services to simulate")]
    NoServices,
    #[error("no entity table for service `{0}`")]
    NoTable(String),
    #[error("entity table for `{0}` has no rows")]
    EmptyTable(String),
    #[error("unknown service `{0}`")]
    UnknownService(String),
    #[error("service `{service}` has no intent `{intent}`")]
    UnknownIntent { service: String, intent: String },
    #[error("scenario has no items")]
    EmptyScenario,
    #[error("{service}.{intent}: required slot `{slot}` is neither a table column nor categorical")]
    UncoverableSlot {
        service: String,
        intent: String,
        slot: String,
    },
    #[error("automaton deadlock: no legal act in state `{0}`")]
    Deadlock(String),
    #[error("dialogue exceeded {0} turns")]
    TurnLimit(usize),
    #[error("service call failed: {0}")]
    Call(#[from] CallError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}
