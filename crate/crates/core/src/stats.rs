//! Corpus statistics: sizes, vocabulary, dialogue lengths, act counts and
//! per-domain tallies.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Dialogue;
use crate::schema::SchemaSet;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("corpus has no dialogues")]
    EmptyCorpus,
    #[error("dialogue `{dialogue_id}` uses service `{service}` which has no schema")]
    UnknownService { dialogue_id: String, service: String },
}

/// Domain of a service: the map entry if present, else the name up to the
/// first underscore (`Hotels_2` -> `Hotels`).
pub fn domain_of(service: &str, domains: &BTreeMap<String, String>) -> String {
    domains
        .get(service)
        .cloned()
        .unwrap_or_else(|| service.split('_').next().unwrap_or(service).to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DomainStats {
    pub intents: usize,
    pub services: usize,
    /// Dialogues touching the domain; multi-domain dialogues count once per
    /// domain.
    pub dialogues: usize,
}

/// Dialogue length (turns) -> number of dialogues.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LengthHistograms {
    pub single_domain: BTreeMap<usize, usize>,
    pub multi_domain: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub num_domains: usize,
    pub num_services: usize,
    pub num_dialogues: usize,
    pub total_turns: usize,
    pub avg_turns_per_dialogue: f64,
    pub total_tokens: usize,
    pub avg_tokens_per_turn: f64,
    pub total_unique_tokens: usize,
    /// Slots defined by the services the corpus uses.
    pub num_slots: usize,
    /// Distinct (slot, value) pairs in dialogue states, over all variants.
    pub num_slot_values: usize,
    /// Distinct (service, slot, value) triples, the finer alternative count.
    pub num_service_slot_values: usize,
    pub length_histograms: LengthHistograms,
    pub act_histogram: BTreeMap<String, usize>,
    pub per_domain: BTreeMap<String, DomainStats>,
    pub seen_services: Option<Vec<String>>,
    /// Fraction of turns with a frame for a service outside `seen_services`.
    pub unseen_turn_fraction: Option<f64>,
    pub unseen_turns: Option<usize>,
}

/// Tokens are whitespace-separated; the unique-token count lowercases them.
pub fn compute_stats(
    corpus: &[Dialogue],
    schemas: &SchemaSet,
    seen_services: Option<&BTreeSet<String>>,
    domains: &BTreeMap<String, String>,
) -> Result<StatsReport, StatsError> {
    if corpus.is_empty() {
        return Err(StatsError::EmptyCorpus);
    }
    let mut total_turns = 0;
    let mut total_tokens = 0;
    let mut vocabulary = BTreeSet::new();
    let mut slot_values = BTreeSet::new();
    let mut service_slot_values = BTreeSet::new();
    let mut services = BTreeSet::new();
    let mut lengths = LengthHistograms::default();
    let mut acts: BTreeMap<String, usize> = BTreeMap::new();
    let mut domain_dialogues: BTreeMap<String, usize> = BTreeMap::new();
    let mut unseen_turns = 0;

    for d in corpus {
        let mut dialogue_domains = BTreeSet::new();
        for turn in &d.turns {
            total_turns += 1;
            for token in turn.utterance.split_whitespace() {
                total_tokens += 1;
                vocabulary.insert(token.to_lowercase());
            }
            let mut unseen = false;
            for frame in &turn.frames {
                if schemas.get(&frame.service).is_none() {
                    return Err(StatsError::UnknownService {
                        dialogue_id: d.dialogue_id.clone(),
                        service: frame.service.clone(),
                    });
                }
                services.insert(frame.service.clone());
                dialogue_domains.insert(domain_of(&frame.service, domains));
                if seen_services.is_some_and(|s| !s.contains(&frame.service)) {
                    unseen = true;
                }
                for a in &frame.actions {
                    *acts.entry(a.act.clone()).or_default() += 1;
                }
                if let Some(state) = &frame.state {
                    for (slot, variants) in &state.slot_values {
                        for v in variants {
                            slot_values.insert((slot.clone(), v.clone()));
                            service_slot_values.insert((frame.service.clone(), slot.clone(), v.clone()));
                        }
                    }
                }
            }
            unseen_turns += usize::from(unseen);
        }
        let hist = if dialogue_domains.len() > 1 {
            &mut lengths.multi_domain
        } else {
            &mut lengths.single_domain
        };
        *hist.entry(d.turns.len()).or_default() += 1;
        for dom in dialogue_domains {
            *domain_dialogues.entry(dom).or_default() += 1;
        }
    }

    let mut per_domain: BTreeMap<String, DomainStats> = BTreeMap::new();
    let mut num_slots = 0;
    for service in &services {
        let schema = schemas.get(service).expect("checked above");
        num_slots += schema.slots.len();
        let entry = per_domain.entry(domain_of(service, domains)).or_default();
        entry.services += 1;
        entry.intents += schema.intents.len();
    }
    for (dom, n) in domain_dialogues {
        per_domain.entry(dom).or_default().dialogues = n;
    }

    let fraction = |n: usize| (total_turns > 0).then(|| n as f64 / total_turns as f64);
    Ok(StatsReport {
        num_domains: per_domain.len(),
        num_services: services.len(),
        num_dialogues: corpus.len(),
        total_turns,
        avg_turns_per_dialogue: total_turns as f64 / corpus.len() as f64,
        total_tokens,
        avg_tokens_per_turn: fraction(total_tokens).unwrap_or(0.0),
        total_unique_tokens: vocabulary.len(),
        num_slots,
        num_slot_values: slot_values.len(),
        num_service_slot_values: service_slot_values.len(),
        length_histograms: lengths,
        act_histogram: acts,
        per_domain,
        seen_services: seen_services.map(|s| s.iter().cloned().collect()),
        unseen_turn_fraction: seen_services.and_then(|_| fraction(unseen_turns)),
        unseen_turns: seen_services.map(|_| unseen_turns),
    })
}

/// Plot-ready CSV tables as `(file name, contents)`: one row per distinct
/// dialogue length, and one row per act.
pub fn render_histograms(report: &StatsReport) -> Vec<(String, String)> {
    let mut lengths = csv::Writer::from_writer(Vec::new());
    let h = &report.length_histograms;
    let bins: BTreeSet<usize> = h.single_domain.keys().chain(h.multi_domain.keys()).copied().collect();
    lengths
        .write_record(["turns", "single_domain", "multi_domain"])
        .expect("writing to memory");
    for bin in bins {
        let count = |m: &BTreeMap<usize, usize>| m.get(&bin).copied().unwrap_or(0).to_string();
        lengths
            .write_record([bin.to_string(), count(&h.single_domain), count(&h.multi_domain)])
            .expect("writing to memory");
    }
    let mut acts = csv::Writer::from_writer(Vec::new());
    acts.write_record(["act", "count"]).expect("writing to memory");
    for (a, n) in &report.act_histogram {
        acts.write_record([a.as_str(), &n.to_string()]).expect("writing to memory");
    }
    let text = |w: csv::Writer<Vec<u8>>| String::from_utf8(w.into_inner().expect("flushing memory")).expect("utf-8");
    vec![
        ("dialogue_lengths.csv".to_string(), text(lengths)),
        ("dialogue_acts.csv".to_string(), text(acts)),
    ]
}
