//! Rule-based state tracker. Reads utterances, schemas, entity tables and
//! the system's own dialogue acts; never reads user states, spans or user
//! acts.

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{act, Dialogue, Frame, Speaker, INTENT_SLOT, NONE_INTENT};
use crate::engine::EntityTable;
use crate::metrics::{empty_hypothesis, HypothesisDialogue, HypothesisFrame, HypothesisState};
use crate::schema::{SchemaSet, ServiceSchema, DONTCARE};

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "of", "in", "at", "to", "for", "by", "on", "with", "and", "or", "is", "be", "i", "want",
    "that", "this", "it", "please", "what", "which", "given",
];
const INTERROGATIVES: &[&str] = &[
    "what", "which", "where", "when", "how", "who", "is", "are", "does", "do", "can", "could",
];
const AFFIRM_CUES: &[&str] = &["yes", "sure", "ok", "okay", "good", "great", "works"];
const NEGATE_CUES: &[&str] = &["no", "not", "nope"];

/// Lowercase alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Splits `FindRestaurants` into `find restaurants`.
fn name_tokens(name: &str) -> Vec<String> {
    let mut spaced = String::new();
    let mut prev_lower = false;
    for c in name.chars() {
        if c.is_uppercase() && prev_lower {
            spaced.push(' ');
        }
        prev_lower = c.is_lowercase() || c.is_ascii_digit();
        spaced.push(c);
    }
    tokenize(&spaced)
}

fn keywords(text: &str) -> BTreeSet<String> {
    tokenize(text).into_iter().filter(|t| !STOPWORDS.contains(&t.as_str())).collect()
}

fn find_sub(hay: &[String], needle: &[String], from: usize) -> Option<usize> {
    if needle.is_empty() || needle.len() > hay.len() {
        return None;
    }
    (from..=hay.len() - needle.len()).find(|&i| hay[i..i + needle.len()] == *needle)
}

/// Per-service state carried across turns.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrackerState {
    pub active_intent: String,
    pub slot_values: IndexMap<String, String>,
    /// Values from the last system OFFER and CONFIRM acts for the service.
    pub pending_offers: IndexMap<String, String>,
    pub pending_confirms: IndexMap<String, String>,
    pub offered_intent: Option<String>,
}

struct Candidate {
    tokens: Vec<String>,
    value: String,
    slots: Vec<String>,
}

/// Precomputed lexicon for one service.
struct ServiceLexicon<'a> {
    schema: &'a ServiceSchema,
    /// Tokens unique to one intent's name and description.
    intent_keywords: Vec<(String, BTreeSet<String>)>,
    slot_keywords: BTreeMap<String, Vec<String>>,
    /// Candidate values, longest first.
    candidates: Vec<Candidate>,
}

impl<'a> ServiceLexicon<'a> {
    fn new(schema: &'a ServiceSchema, table: Option<&EntityTable>) -> Self {
        let all: Vec<(String, BTreeSet<String>)> = schema
            .intents
            .iter()
            .map(|i| {
                let mut k = keywords(&i.description);
                k.extend(name_tokens(&i.name).into_iter().filter(|t| !STOPWORDS.contains(&t.as_str())));
                (i.name.clone(), k)
            })
            .collect();
        let intent_keywords = all
            .iter()
            .map(|(name, k)| {
                let unique = k
                    .iter()
                    .filter(|t| all.iter().filter(|(_, o)| o.contains(*t)).count() == 1)
                    .cloned()
                    .collect();
                (name.clone(), unique)
            })
            .collect();
        let slot_keywords = schema
            .slots
            .iter()
            .map(|s| (s.name.clone(), tokenize(&s.name.replace('_', " "))))
            .collect();

        let mut by_value: BTreeMap<String, (String, Vec<String>)> = BTreeMap::new();
        let mut add = |value: &str, slot: &str| {
            let entry = by_value
                .entry(tokenize(value).join(" "))
                .or_insert_with(|| (value.to_string(), Vec::new()));
            if !entry.1.iter().any(|s| s == slot) {
                entry.1.push(slot.to_string());
            }
        };
        for slot in &schema.slots {
            if slot.is_categorical {
                for v in slot.possible_values.iter().map(String::as_str).chain([DONTCARE]) {
                    add(v, &slot.name);
                }
            } else if let Some(col) = table.and_then(|t| t.column_index(&slot.name)) {
                for row in &table.expect("column implies table").rows {
                    add(&row[col], &slot.name);
                }
            }
        }
        let mut candidates: Vec<Candidate> = by_value
            .into_iter()
            .filter(|(k, _)| !k.is_empty())
            .map(|(k, (value, slots))| Candidate {
                tokens: k.split(' ').map(str::to_string).collect(),
                value,
                slots,
            })
            .collect();
        candidates.sort_by(|a, b| b.tokens.len().cmp(&a.tokens.len()).then(a.tokens.cmp(&b.tokens)));
        Self {
            schema,
            intent_keywords,
            slot_keywords,
            candidates,
        }
    }

    fn detect_intent(&self, tokens: &BTreeSet<String>) -> Option<String> {
        let mut best: Option<(usize, &String)> = None;
        for (name, k) in &self.intent_keywords {
            let score = k.iter().filter(|t| tokens.contains(*t)).count();
            if score > 0 && best.is_none_or(|(b, _)| score > b) {
                best = Some((score, name));
            }
        }
        best.map(|(_, n)| n.clone())
    }

    fn mentions_slot(&self, slot: &str, tokens: &[String]) -> bool {
        self.slot_keywords
            .get(slot)
            .is_some_and(|k| find_sub(tokens, k, 0).is_some())
    }

    /// Resolves which slot a matched value belongs to.
    fn pick_slot<'c>(
        &self,
        slots: &'c [String],
        tokens: &[String],
        system_requested: &[String],
        intent: &str,
    ) -> &'c String {
        if let Some(s) = slots.iter().find(|s| self.mentions_slot(s, tokens)) {
            return s;
        }
        if let Some(s) = slots.iter().find(|s| system_requested.contains(s)) {
            return s;
        }
        if let Some(i) = self.schema.intent(intent) {
            if let Some(s) = slots.iter().find(|s| i.accepts_argument(s)) {
                return s;
            }
        }
        &slots[0]
    }

    /// Longest non-overlapping value mentions, in utterance order.
    fn extract_values(&self, tokens: &[String], system_requested: &[String], intent: &str) -> Vec<(String, String)> {
        let mut taken = vec![false; tokens.len()];
        let mut found = Vec::new();
        for c in &self.candidates {
            let mut from = 0;
            while let Some(at) = find_sub(tokens, &c.tokens, from) {
                let end = at + c.tokens.len();
                if !taken[at..end].iter().any(|&t| t) {
                    taken[at..end].iter_mut().for_each(|t| *t = true);
                    let slot = self.pick_slot(&c.slots, tokens, system_requested, intent);
                    found.push((at, slot.clone(), c.value.clone()));
                }
                from = at + 1;
            }
        }
        found.sort_by_key(|(at, _, _)| *at);
        found.into_iter().map(|(_, s, v)| (s, v)).collect()
    }

    fn requested(&self, tokens: &[String], raw: &str) -> Vec<String> {
        let interrogative = raw.contains('?') || tokens.first().is_some_and(|t| INTERROGATIVES.contains(&t.as_str()));
        if !interrogative {
            return Vec::new();
        }
        let hits: Vec<&String> = self
            .schema
            .slots
            .iter()
            .map(|s| &s.name)
            .filter(|s| self.mentions_slot(s, tokens))
            .collect();
        // Drop slots whose name is contained in a longer matched name.
        hits.iter()
            .filter(|s| {
                let k = &self.slot_keywords[s.as_str()];
                !hits.iter().any(|o| {
                    let ok = &self.slot_keywords[o.as_str()];
                    ok.len() > k.len() && find_sub(ok, k, 0).is_some()
                })
            })
            .map(|s| (*s).clone())
            .collect()
    }
}

fn system_acts_for<'d>(d: &'d Dialogue, user_turn: usize, service: &str) -> Option<&'d Frame> {
    let prev = user_turn.checked_sub(1)?;
    let turn = d.turns.get(prev)?;
    (turn.speaker == Speaker::System).then(|| turn.frame(service)).flatten()
}

fn track_dialogue(
    d: &Dialogue,
    lexicons: &BTreeMap<&str, ServiceLexicon<'_>>,
) -> HypothesisDialogue {
    let mut out = empty_hypothesis(d);
    let mut states: BTreeMap<String, TrackerState> = BTreeMap::new();
    for (t, turn) in d.turns.iter().enumerate() {
        if turn.speaker != Speaker::User {
            continue;
        }
        let tokens = tokenize(&turn.utterance);
        let token_set: BTreeSet<String> = tokens.iter().cloned().collect();
        let affirm = AFFIRM_CUES.iter().any(|c| token_set.contains(*c));
        let negate = NEGATE_CUES.iter().any(|c| token_set.contains(*c));
        for frame in &turn.frames {
            let Some(lex) = lexicons.get(frame.service.as_str()) else {
                continue;
            };
            let state = states.entry(frame.service.clone()).or_insert_with(|| TrackerState {
                active_intent: NONE_INTENT.to_string(),
                ..TrackerState::default()
            });
            state.pending_offers.clear();
            state.pending_confirms.clear();
            state.offered_intent = None;
            let mut system_requested = Vec::new();
            if let Some(sys) = system_acts_for(d, t, &frame.service) {
                for a in &sys.actions {
                    let (Some(slot), Some(value)) = (a.slot_name(), a.values.first()) else {
                        if a.act == act::REQUEST {
                            system_requested.extend(a.slot_name().map(str::to_string));
                        }
                        continue;
                    };
                    match a.act.as_str() {
                        act::OFFER_INTENT if slot == INTENT_SLOT => state.offered_intent = Some(value.clone()),
                        act::OFFER if slot != INTENT_SLOT => {
                            state.pending_offers.insert(slot.to_string(), value.clone());
                        }
                        act::CONFIRM => {
                            state.pending_confirms.insert(slot.to_string(), value.clone());
                        }
                        act::REQUEST => system_requested.push(slot.to_string()),
                        _ => {}
                    }
                }
            }

            if !tokens.is_empty() {
                if let Some(intent) = lex.detect_intent(&token_set) {
                    state.active_intent = intent;
                } else if affirm && !negate {
                    if let Some(intent) = state.offered_intent.clone() {
                        state.active_intent = intent;
                    }
                }
                if affirm && !negate {
                    for (s, v) in state.pending_confirms.clone() {
                        state.slot_values.insert(s, v);
                    }
                    for (s, v) in state.pending_offers.clone() {
                        if find_sub(&tokens, &tokenize(&v), 0).is_some() {
                            state.slot_values.insert(s, v);
                        }
                    }
                }
                for (s, v) in lex.extract_values(&tokens, &system_requested, &state.active_intent) {
                    state.slot_values.insert(s, v);
                }
            }
            let requested_slots = lex.requested(&tokens, &turn.utterance);
            out.turns[t].frames.push(HypothesisFrame {
                service: frame.service.clone(),
                state: Some(HypothesisState {
                    active_intent: state.active_intent.clone(),
                    requested_slots,
                    slot_values: state.slot_values.clone(),
                }),
            });
        }
    }
    out
}

/// Tracks every dialogue. User frames must name their service; any states,
/// spans or user acts present are ignored.
pub fn track_corpus(
    dialogues: &[Dialogue],
    schemas: &SchemaSet,
    tables: &BTreeMap<String, EntityTable>,
) -> Vec<HypothesisDialogue> {
    let lexicons: BTreeMap<&str, ServiceLexicon<'_>> = schemas
        .services()
        .iter()
        .map(|s| (s.service_name.as_str(), ServiceLexicon::new(s, tables.get(&s.service_name))))
        .collect();
    dialogues.par_iter().map(|d| track_dialogue(d, &lexicons)).collect()
}

/// Copies reference states, keeping the first variant of each slot value.
pub fn oracle_track(dialogues: &[Dialogue]) -> Vec<HypothesisDialogue> {
    dialogues
        .iter()
        .map(|d| {
            let mut out = empty_hypothesis(d);
            for (t, turn) in d.turns.iter().enumerate() {
                for f in &turn.frames {
                    let Some(state) = &f.state else { continue };
                    out.turns[t].frames.push(HypothesisFrame {
                        service: f.service.clone(),
                        state: Some(HypothesisState {
                            active_intent: state.active_intent.clone(),
                            requested_slots: state.requested_slots.clone(),
                            slot_values: state
                                .slot_values
                                .iter()
                                .filter_map(|(s, v)| Some((s.clone(), v.first()?.clone())))
                                .collect(),
                        }),
                    });
                }
            }
            out
        })
        .collect()
}

/// Emits every user frame with intent NONE and no slots.
pub fn empty_track(dialogues: &[Dialogue]) -> Vec<HypothesisDialogue> {
    dialogues
        .iter()
        .map(|d| {
            let mut out = empty_hypothesis(d);
            for (t, turn) in d.turns.iter().enumerate() {
                if turn.speaker != Speaker::User {
                    continue;
                }
                for f in &turn.frames {
                    out.turns[t].frames.push(HypothesisFrame {
                        service: f.service.clone(),
                        state: Some(HypothesisState {
                            active_intent: NONE_INTENT.to_string(),
                            ..HypothesisState::default()
                        }),
                    });
                }
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::corpus::{DialogueAct, Turn};

    fn turn(speaker: Speaker, utterance: &str, service: &str, actions: Vec<DialogueAct>) -> Turn {
        let mut f = Frame::new(service);
        f.actions = actions;
        Turn {
            frames: vec![f],
            speaker,
            utterance: utterance.to_string(),
        }
    }

    fn run(turns: Vec<Turn>) -> HypothesisDialogue {
        let schemas = bundled::simulation_schemas();
        let tables = bundled::simulation_tables(&schemas).unwrap();
        let d = Dialogue {
            dialogue_id: "t".into(),
            services: vec!["Restaurants_1".into()],
            turns,
        };
        track_corpus(&[d], &schemas, &tables).remove(0)
    }

    fn state(h: &HypothesisDialogue, t: usize) -> &HypothesisState {
        h.turns[t].frames[0].state.as_ref().unwrap()
    }

    #[test]
    fn categorical_and_table_values() {
        let h = run(vec![turn(Speaker::User, "I want Italian food in Oakland", "Restaurants_1", vec![])]);
        let s = state(&h, 0);
        assert_eq!(s.slot_values.get("cuisine").map(String::as_str), Some("Italian"));
        assert_eq!(s.slot_values.get("city").map(String::as_str), Some("Oakland"));
    }

    #[test]
    fn empty_utterance_changes_nothing() {
        let h = run(vec![turn(Speaker::User, "", "Restaurants_1", vec![])]);
        let s = state(&h, 0);
        assert_eq!(s.active_intent, NONE_INTENT);
        assert!(s.slot_values.is_empty());
    }

    #[test]
    fn affirm_adopts_confirmed_value() {
        let h = run(vec![
            turn(Speaker::User, "I want to reserve restaurant.", "Restaurants_1", vec![]),
            turn(
                Speaker::System,
                "Please confirm the time is 6 pm.",
                "Restaurants_1",
                vec![DialogueAct::with_value(act::CONFIRM, "time", "6 pm")],
            ),
            turn(Speaker::User, "Yes, that is right.", "Restaurants_1", vec![]),
        ]);
        assert_eq!(state(&h, 0).active_intent, "ReserveRestaurant");
        assert_eq!(state(&h, 2).slot_values.get("time").map(String::as_str), Some("6 pm"));
    }

    #[test]
    fn slot_name_disambiguates_numbers() {
        let h = run(vec![turn(
            Speaker::User,
            "I want the number of seats to be 3.",
            "Restaurants_1",
            vec![],
        )]);
        assert_eq!(state(&h, 0).slot_values.get("number_of_seats").map(String::as_str), Some("3"));
    }

    #[test]
    fn questions_request_slots() {
        let h = run(vec![turn(Speaker::User, "What is the street address?", "Restaurants_1", vec![])]);
        assert_eq!(state(&h, 0).requested_slots, vec!["street_address".to_string()]);
    }

    #[test]
    fn camel_case_split() {
        assert_eq!(name_tokens("FindRestaurants"), vec!["find", "restaurants"]);
    }
}
