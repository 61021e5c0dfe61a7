use std::collections::{BTreeMap, HashMap};
use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::agents::generate_outline;
use super::config::AutomatonConfig;
use super::rng::SimRng;
use super::scenario::sample_with;
use super::templates::{realize, TemplateSet};
use super::SimError;
use crate::corpus::{serialize_dialogues, Dialogue, INTENT_SLOT};
use crate::engine::EntityTable;
use crate::json::to_pretty_bytes;
use crate::schema::{serialize_schemas, SchemaSet};

pub const SHARD_SIZE: usize = 128;

/// SHA-256 of a dialogue's delexicalized act sequence: speaker, service,
/// act and slot of every act; intent names are kept, other values dropped.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowSignature(pub String);

pub fn flow_signature(d: &Dialogue) -> FlowSignature {
    let mut hasher = Sha256::new();
    for turn in &d.turns {
        for frame in &turn.frames {
            for a in &frame.actions {
                let slot = a.slot_name().unwrap_or("");
                let intent = if slot == INTENT_SLOT {
                    a.values.join(",")
                } else {
                    String::new()
                };
                hasher.update(format!("{}\t{}\t{}\t{}\t{}\n", turn.speaker, frame.service, a.act, slot, intent));
            }
        }
        hasher.update(b"--\n");
    }
    FlowSignature(hex::encode(hasher.finalize()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusOptions {
    /// How many dialogues may share one flow signature.
    pub duplicate_quota: usize,
    /// Attempts allowed per requested dialogue.
    pub attempts_per_dialogue: usize,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        Self {
            duplicate_quota: 1,
            attempts_per_dialogue: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCorpus {
    pub dialogues: Vec<Dialogue>,
    pub seed: u64,
    pub requested: usize,
    pub attempts: usize,
    pub duplicate_rejections: usize,
    pub failed_attempts: usize,
    pub options: CorpusOptions,
    pub config_hashes: BTreeMap<String, String>,
}

impl GeneratedCorpus {
    /// Number of requested dialogues that could not be produced.
    pub fn shortfall(&self) -> usize {
        self.requested.saturating_sub(self.dialogues.len())
    }
}

fn digest_json<T: Serialize + ?Sized>(value: &T) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(value).expect("in-memory values always serialize")))
}

fn attempt(
    index: u64,
    seed: u64,
    schemas: &SchemaSet,
    tables: &BTreeMap<String, EntityTable>,
    automaton: &AutomatonConfig,
    templates: &TemplateSet,
) -> Result<Option<Dialogue>, SimError> {
    let mut rng = SimRng::derive(seed, index);
    let scenario = sample_with(&mut rng, schemas, tables, automaton)?;
    let outline_seed = rng.next_u64();
    let realize_seed = rng.next_u64();
    match generate_outline(&scenario, schemas, tables, automaton, outline_seed) {
        Ok(outline) => realize(&outline, schemas, templates, realize_seed).map(Some),
        Err(SimError::TurnLimit(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Generates up to `n` dialogues. Attempt `i` depends only on `(seed, i)`
/// and attempts are accepted in index order, so the result does not depend
/// on the size of the rayon pool it runs in.
pub fn generate_corpus(
    schemas: &SchemaSet,
    tables: &BTreeMap<String, EntityTable>,
    automaton: &AutomatonConfig,
    templates: &TemplateSet,
    n: usize,
    seed: u64,
    options: CorpusOptions,
) -> Result<GeneratedCorpus, SimError> {
    let budget = n.saturating_mul(options.attempts_per_dialogue.max(1));
    let mut corpus = GeneratedCorpus {
        dialogues: Vec::new(),
        seed,
        requested: n,
        attempts: 0,
        duplicate_rejections: 0,
        failed_attempts: 0,
        options,
        config_hashes: BTreeMap::from([
            ("automaton".to_string(), digest_json(automaton)),
            ("entities".to_string(), digest_json(tables)),
            ("schemas".to_string(), digest_json(schemas.services())),
            ("templates".to_string(), digest_json(templates)),
        ]),
    };
    let mut seen: HashMap<FlowSignature, usize> = HashMap::new();
    let mut next = 0usize;
    while corpus.dialogues.len() < n && next < budget {
        let batch = (n - corpus.dialogues.len()).max(32).min(budget - next);
        let results: Vec<Result<Option<Dialogue>, SimError>> = (next..next + batch)
            .into_par_iter()
            .map(|i| attempt(i as u64, seed, schemas, tables, automaton, templates))
            .collect();
        for result in results {
            if corpus.dialogues.len() == n {
                break;
            }
            corpus.attempts += 1;
            let Some(mut d) = result? else {
                corpus.failed_attempts += 1;
                continue;
            };
            let count = seen.entry(flow_signature(&d)).or_insert(0);
            if *count >= options.duplicate_quota {
                corpus.duplicate_rejections += 1;
                continue;
            }
            *count += 1;
            d.dialogue_id = format!("sim_{:05}", corpus.dialogues.len());
            corpus.dialogues.push(d);
        }
        next += batch;
    }
    Ok(corpus)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardInfo {
    pub file: String,
    pub dialogues: usize,
    pub sha256: String,
}

/// Contents of `manifest.json`. Contains no timestamps, so it is identical
/// across reruns with the same seed and inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub generator: String,
    pub seed: u64,
    pub requested: usize,
    pub generated: usize,
    pub shortfall: usize,
    pub attempts: usize,
    pub duplicate_rejections: usize,
    pub failed_attempts: usize,
    pub duplicate_quota: usize,
    pub config_hashes: BTreeMap<String, String>,
    pub schema_file: String,
    pub shards: Vec<ShardInfo>,
}

/// Writes `dialogues_NNN.json` shards, `schema.json` and `manifest.json`.
pub fn write_corpus(dir: &Path, corpus: &GeneratedCorpus, schemas: &SchemaSet) -> io::Result<CorpusManifest> {
    std::fs::create_dir_all(dir)?;
    let mut shards = Vec::new();
    for (i, chunk) in corpus.dialogues.chunks(SHARD_SIZE).enumerate() {
        let file = format!("dialogues_{:03}.json", i + 1);
        let bytes = serialize_dialogues(chunk);
        std::fs::write(dir.join(&file), &bytes)?;
        shards.push(ShardInfo {
            file,
            dialogues: chunk.len(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
    }
    let schema_bytes =
        serialize_schemas(schemas.services()).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
    std::fs::write(dir.join("schema.json"), schema_bytes)?;
    let manifest = CorpusManifest {
        generator: format!("sgd-core {}", env!("CARGO_PKG_VERSION")),
        seed: corpus.seed,
        requested: corpus.requested,
        generated: corpus.dialogues.len(),
        shortfall: corpus.shortfall(),
        attempts: corpus.attempts,
        duplicate_rejections: corpus.duplicate_rejections,
        failed_attempts: corpus.failed_attempts,
        duplicate_quota: corpus.options.duplicate_quota,
        config_hashes: corpus.config_hashes.clone(),
        schema_file: "schema.json".into(),
        shards,
    };
    std::fs::write(dir.join("manifest.json"), to_pretty_bytes(&manifest))?;
    Ok(manifest)
}
