//! Annotated dialogues in the released dialogue-file layout.
//!
//! A dialogue is a list of turns alternating USER/SYSTEM. Each turn holds one
//! frame per service it concerns. User frames carry the cumulative dialogue
//! state for that service; every frame may carry dialogue acts and slot
//! spans. Span offsets count Unicode scalar values, not bytes.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::json::{self, ParseError, Parsed, Shape, Strictness};
use crate::schema::{SchemaSet, ServiceSchema};
use crate::validation::ValidationReport;

/// Distinguished active-intent value for "no intent yet".
pub const NONE_INTENT: &str = "NONE";
/// Pseudo-slot carried by intent acts (INFORM_INTENT, OFFER_INTENT, ...).
pub const INTENT_SLOT: &str = "intent";
/// Pseudo-slot carried by INFORM_COUNT.
pub const COUNT_SLOT: &str = "count";

pub mod act {
    pub const INFORM_INTENT: &str = "INFORM_INTENT";
    pub const NEGATE_INTENT: &str = "NEGATE_INTENT";
    pub const AFFIRM_INTENT: &str = "AFFIRM_INTENT";
    pub const INFORM: &str = "INFORM";
    pub const REQUEST: &str = "REQUEST";
    pub const AFFIRM: &str = "AFFIRM";
    pub const NEGATE: &str = "NEGATE";
    pub const SELECT: &str = "SELECT";
    pub const REQUEST_ALTS: &str = "REQUEST_ALTS";
    pub const THANK_YOU: &str = "THANK_YOU";
    pub const GOODBYE: &str = "GOODBYE";
    pub const CONFIRM: &str = "CONFIRM";
    pub const OFFER: &str = "OFFER";
    pub const NOTIFY_SUCCESS: &str = "NOTIFY_SUCCESS";
    pub const NOTIFY_FAILURE: &str = "NOTIFY_FAILURE";
    pub const INFORM_COUNT: &str = "INFORM_COUNT";
    pub const OFFER_INTENT: &str = "OFFER_INTENT";
    pub const REQ_MORE: &str = "REQ_MORE";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Speaker {
    User,
    System,
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Speaker::User => "USER",
            Speaker::System => "SYSTEM",
        })
    }
}

/// Dialogue-act tags accepted per speaker. Defaults to the standard set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActVocabulary {
    pub user: Vec<String>,
    pub system: Vec<String>,
}

impl Default for ActVocabulary {
    fn default() -> Self {
        use act::*;
        let own = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        Self {
            user: own(&[
                INFORM_INTENT,
                NEGATE_INTENT,
                AFFIRM_INTENT,
                INFORM,
                REQUEST,
                AFFIRM,
                NEGATE,
                SELECT,
                REQUEST_ALTS,
                THANK_YOU,
                GOODBYE,
            ]),
            system: own(&[
                INFORM,
                REQUEST,
                CONFIRM,
                OFFER,
                NOTIFY_SUCCESS,
                NOTIFY_FAILURE,
                INFORM_COUNT,
                OFFER_INTENT,
                REQ_MORE,
                GOODBYE,
            ]),
        }
    }
}

impl ActVocabulary {
    pub fn for_speaker(&self, speaker: Speaker) -> &[String] {
        match speaker {
            Speaker::User => &self.user,
            Speaker::System => &self.system,
        }
    }

    pub fn allows(&self, speaker: Speaker, tag: &str) -> bool {
        self.for_speaker(speaker).iter().any(|a| a == tag)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueAct {
    pub act: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_values: Option<Vec<String>>,
    /// Serialized as `""` when absent, as in the released files.
    #[serde(default, with = "empty_as_none")]
    pub slot: Option<String>,
    #[serde(default)]
    pub values: Vec<String>,
}

impl DialogueAct {
    pub fn bare(act: &str) -> Self {
        Self {
            act: act.to_string(),
            canonical_values: None,
            slot: None,
            values: Vec::new(),
        }
    }

    pub fn with_slot(act: &str, slot: &str) -> Self {
        Self {
            slot: Some(slot.to_string()),
            ..Self::bare(act)
        }
    }

    pub fn with_value(act: &str, slot: &str, value: &str) -> Self {
        Self {
            slot: Some(slot.to_string()),
            values: vec![value.to_string()],
            ..Self::bare(act)
        }
    }

    pub fn slot_name(&self) -> Option<&str> {
        self.slot.as_deref()
    }
}

mod empty_as_none {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<String>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(v.as_deref().unwrap_or(""))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
        let raw = Option::<String>::deserialize(d)?;
        Ok(raw.filter(|s| !s.is_empty()))
    }
}

/// A character-offset span `[start, exclusive_end)` in the turn's utterance.
/// `value` is optional on disk; when present it must equal the covered text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpan {
    pub exclusive_end: usize,
    pub slot: String,
    pub start: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

impl SlotSpan {
    /// The covered text, if the offsets are in range.
    pub fn text<'a>(&self, utterance: &'a str) -> Option<&'a str> {
        char_slice(utterance, self.start, self.exclusive_end)
    }
}

/// Slice by Unicode scalar offsets.
pub fn char_slice(s: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = s.char_indices().map(|(i, _)| i).chain(std::iter::once(s.len()));
    let from = indices.nth(start)?;
    let to = if end == start {
        from
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&s[from..to])
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FrameState {
    pub active_intent: String,
    #[serde(default)]
    pub requested_slots: Vec<String>,
    #[serde(default)]
    pub slot_values: IndexMap<String, Vec<String>>,
}

impl FrameState {
    pub fn none() -> Self {
        Self {
            active_intent: NONE_INTENT.to_string(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceCall {
    pub method: String,
    #[serde(default)]
    pub parameters: IndexMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    #[serde(default)]
    pub actions: Vec<DialogueAct>,
    pub service: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_call: Option<ServiceCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_results: Option<Vec<IndexMap<String, String>>>,
    #[serde(default)]
    pub slots: Vec<SlotSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<FrameState>,
}

impl Frame {
    pub fn new(service: &str) -> Self {
        Self {
            actions: Vec::new(),
            service: service.to_string(),
            service_call: None,
            service_results: None,
            slots: Vec::new(),
            state: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub frames: Vec<Frame>,
    pub speaker: Speaker,
    #[serde(default)]
    pub utterance: String,
}

impl Turn {
    pub fn frame(&self, service: &str) -> Option<&Frame> {
        self.frames.iter().find(|f| f.service == service)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub dialogue_id: String,
    #[serde(default)]
    pub services: Vec<String>,
    pub turns: Vec<Turn>,
}

static ACT_SHAPE: Shape = Shape::Record(&[
    ("act", Shape::Any),
    ("canonical_values", Shape::Any),
    ("slot", Shape::Any),
    ("values", Shape::Any),
]);
static SPAN_SHAPE: Shape = Shape::Record(&[
    ("exclusive_end", Shape::Any),
    ("slot", Shape::Any),
    ("start", Shape::Any),
    ("value", Shape::Any),
]);
static FRAME_SHAPE: Shape = Shape::Record(&[
    ("actions", Shape::List(&ACT_SHAPE)),
    ("service", Shape::Any),
    (
        "service_call",
        Shape::Record(&[("method", Shape::Any), ("parameters", Shape::Any)]),
    ),
    ("service_results", Shape::Any),
    ("slots", Shape::List(&SPAN_SHAPE)),
    (
        "state",
        Shape::Record(&[
            ("active_intent", Shape::Any),
            ("requested_slots", Shape::Any),
            ("slot_values", Shape::Any),
        ]),
    ),
]);
static TURN_SHAPE: Shape = Shape::Record(&[
    ("frames", Shape::List(&FRAME_SHAPE)),
    ("speaker", Shape::Any),
    ("utterance", Shape::Any),
]);
static DIALOGUE_SHAPE: Shape = Shape::Record(&[
    ("dialogue_id", Shape::Any),
    ("services", Shape::Any),
    ("turns", Shape::List(&TURN_SHAPE)),
]);
static CORPUS_SHAPE: Shape = Shape::List(&DIALOGUE_SHAPE);

pub fn parse_dialogues(bytes: &[u8]) -> Result<Vec<Dialogue>, ParseError> {
    parse_dialogues_with(bytes, Strictness::Strict).map(|p| p.value)
}

pub fn parse_dialogues_with(
    bytes: &[u8],
    strictness: Strictness,
) -> Result<Parsed<Vec<Dialogue>>, ParseError> {
    json::parse_with_shape(bytes, &CORPUS_SHAPE, strictness)
}

pub fn serialize_dialogues(dialogues: &[Dialogue]) -> Vec<u8> {
    json::to_pretty_bytes(dialogues)
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("parse error in {path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("no dialogue files found under {0}")]
    NoFiles(String),
    #[error("turn {turn} of dialogue {dialogue_id} is not a user turn")]
    NotUserTurn { dialogue_id: String, turn: usize },
    #[error("dialogue {dialogue_id} has no turn {turn}")]
    NoSuchTurn { dialogue_id: String, turn: usize },
}

/// Lists `dialogues_*.json` files under `dir`, sorted by name.
pub fn dialogue_files(dir: &Path) -> Result<Vec<std::path::PathBuf>, CorpusError> {
    let entries = std::fs::read_dir(dir).map_err(|source| CorpusError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut files: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("dialogues_") && n.ends_with(".json"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CorpusError::NoFiles(dir.display().to_string()));
    }
    Ok(files)
}

/// Loads a dialogue file, or every `dialogues_*.json` in a directory.
pub fn load_dialogues(path: &Path, strictness: Strictness) -> Result<Parsed<Vec<Dialogue>>, CorpusError> {
    let files = if path.is_dir() {
        dialogue_files(path)?
    } else {
        vec![path.to_path_buf()]
    };
    let mut value = Vec::new();
    let mut warnings = Vec::new();
    for file in files {
        let bytes = std::fs::read(&file).map_err(|source| CorpusError::Io {
            path: file.display().to_string(),
            source,
        })?;
        let parsed = parse_dialogues_with(&bytes, strictness).map_err(|source| CorpusError::Parse {
            path: file.display().to_string(),
            source,
        })?;
        value.extend(parsed.value);
        warnings.extend(parsed.warnings);
    }
    Ok(Parsed { value, warnings })
}

/// Checks a dialogue against its schemas with the default act vocabulary.
pub fn validate_dialogue(dialogue: &Dialogue, schemas: &SchemaSet) -> ValidationReport {
    validate_dialogue_with(dialogue, schemas, &ActVocabulary::default())
}

pub fn validate_dialogue_with(
    dialogue: &Dialogue,
    schemas: &SchemaSet,
    vocabulary: &ActVocabulary,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    if dialogue.turns.is_empty() {
        report.error("turns", "dialogue has no turns");
    }
    let declared: HashSet<&str> = dialogue.services.iter().map(String::as_str).collect();
    for (t, turn) in dialogue.turns.iter().enumerate() {
        let at = format!("turns[{t}]");
        let expected = if t % 2 == 0 { Speaker::User } else { Speaker::System };
        if turn.speaker != expected {
            report.error(
                format!("{at}.speaker"),
                format!("expected {expected}, found {} (turns alternate starting with USER)", turn.speaker),
            );
        }
        if turn.frames.is_empty() {
            report.error(format!("{at}.frames"), "turn has no frames");
        }
        let utterance_len = turn.utterance.chars().count();
        let mut seen_services: HashMap<&str, usize> = HashMap::new();
        for (f, frame) in turn.frames.iter().enumerate() {
            let fat = format!("{at}.frames[{f}]");
            if let Some(prev) = seen_services.insert(&frame.service, f) {
                report.error(
                    format!("{fat}.service"),
                    format!("service `{}` already has frame {prev} in this turn", frame.service),
                );
            }
            if !declared.contains(frame.service.as_str()) {
                report.error(
                    format!("{fat}.service"),
                    format!("service `{}` is not listed in the dialogue's services", frame.service),
                );
            }
            let Some(schema) = schemas.get(&frame.service) else {
                report.error(format!("{fat}.service"), format!("unknown service `{}`", frame.service));
                continue;
            };
            match (turn.speaker, &frame.state) {
                (Speaker::User, None) => report.error(format!("{fat}.state"), "user frame has no state"),
                (Speaker::System, Some(_)) => {
                    report.error(format!("{fat}.state"), "system frame must not carry a state")
                }
                (Speaker::User, Some(state)) => {
                    validate_state(state, schema, &format!("{fat}.state"), &mut report)
                }
                (Speaker::System, None) => {}
            }
            for (a, action) in frame.actions.iter().enumerate() {
                validate_act(
                    action,
                    turn.speaker,
                    schema,
                    vocabulary,
                    &format!("{fat}.actions[{a}]"),
                    &mut report,
                );
            }
            for (s, span) in frame.slots.iter().enumerate() {
                let sat = format!("{fat}.slots[{s}]");
                if schema.slot(&span.slot).is_none() {
                    report.error(format!("{sat}.slot"), format!("unknown slot `{}`", span.slot));
                }
                if span.start >= span.exclusive_end || span.exclusive_end > utterance_len {
                    report.error(
                        sat,
                        format!(
                            "span [{}, {}) out of bounds for utterance of length {utterance_len}",
                            span.start, span.exclusive_end
                        ),
                    );
                } else if let Some(value) = &span.value {
                    let text = span.text(&turn.utterance).unwrap_or_default();
                    if text != value {
                        report.error(
                            format!("{sat}.value"),
                            format!("span covers `{text}` but records `{value}`"),
                        );
                    }
                }
            }
        }
    }
    report
}

fn validate_state(state: &FrameState, schema: &ServiceSchema, at: &str, report: &mut ValidationReport) {
    if state.active_intent != NONE_INTENT && schema.intent(&state.active_intent).is_none() {
        report.error(
            format!("{at}.active_intent"),
            format!("unknown intent `{}`", state.active_intent),
        );
    }
    for (i, slot) in state.requested_slots.iter().enumerate() {
        if schema.slot(slot).is_none() {
            report.error(format!("{at}.requested_slots[{i}]"), format!("unknown slot `{slot}`"));
        }
    }
    for (slot, values) in &state.slot_values {
        let sat = format!("{at}.slot_values.{slot}");
        let Some(def) = schema.slot(slot) else {
            report.error(sat, format!("unknown slot `{slot}`"));
            continue;
        };
        if values.is_empty() {
            report.error(sat.clone(), "slot value list is empty");
        }
        let mut seen = HashSet::new();
        for (k, v) in values.iter().enumerate() {
            if !seen.insert(v) {
                report.error(format!("{sat}[{k}]"), format!("duplicate value variant `{v}`"));
            }
            if !def.accepts(v) {
                report.error(
                    format!("{sat}[{k}]"),
                    format!("`{v}` is not a possible value of categorical slot `{slot}`"),
                );
            }
        }
    }
}

fn validate_act(
    action: &DialogueAct,
    speaker: Speaker,
    schema: &ServiceSchema,
    vocabulary: &ActVocabulary,
    at: &str,
    report: &mut ValidationReport,
) {
    if !vocabulary.allows(speaker, &action.act) {
        report.error(
            format!("{at}.act"),
            format!("act `{}` is not in the {speaker} vocabulary", action.act),
        );
    }
    match action.slot_name() {
        None if !action.values.is_empty() => {
            report.error(format!("{at}.slot"), "act has values but no slot");
        }
        None => {}
        Some(INTENT_SLOT) => {
            for (k, v) in action.values.iter().enumerate() {
                if schema.intent(v).is_none() {
                    report.error(format!("{at}.values[{k}]"), format!("unknown intent `{v}`"));
                }
            }
        }
        Some(COUNT_SLOT) => {}
        Some(slot) => match schema.slot(slot) {
            None => report.error(format!("{at}.slot"), format!("unknown slot `{slot}`")),
            Some(def) => {
                for (k, v) in action.values.iter().enumerate() {
                    if !def.accepts(v) {
                        report.error(
                            format!("{at}.values[{k}]"),
                            format!("`{v}` is not a possible value of categorical slot `{slot}`"),
                        );
                    }
                }
            }
        },
    }
}

/// The frames annotated on a user turn, as (service, state) pairs. Services
/// whose task was completed earlier are absent because their frames are no
/// longer emitted.
pub fn pertinent_frames(dialogue: &Dialogue, turn_index: usize) -> Result<Vec<(&str, &FrameState)>, CorpusError> {
    let turn = dialogue.turns.get(turn_index).ok_or_else(|| CorpusError::NoSuchTurn {
        dialogue_id: dialogue.dialogue_id.clone(),
        turn: turn_index,
    })?;
    if turn.speaker != Speaker::User {
        return Err(CorpusError::NotUserTurn {
            dialogue_id: dialogue.dialogue_id.clone(),
            turn: turn_index,
        });
    }
    Ok(turn
        .frames
        .iter()
        .filter_map(|f| f.state.as_ref().map(|s| (f.service.as_str(), s)))
        .collect())
}

/// Removes user states and spans, keeping utterances and acts.
pub fn strip_annotations(dialogues: &[Dialogue]) -> Vec<Dialogue> {
    dialogues
        .iter()
        .map(|d| Dialogue {
            turns: d
                .turns
                .iter()
                .map(|t| Turn {
                    frames: t
                        .frames
                        .iter()
                        .map(|f| Frame {
                            state: None,
                            slots: Vec::new(),
                            actions: if t.speaker == Speaker::System {
                                f.actions.clone()
                            } else {
                                Vec::new()
                            },
                            ..f.clone()
                        })
                        .collect(),
                    ..t.clone()
                })
                .collect(),
            ..d.clone()
        })
        .collect()
}

/// Services named by any frame, in order of first appearance.
pub fn services_in_order(dialogue: &Dialogue) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for frame in dialogue.turns.iter().flat_map(|t| &t.frames) {
        if seen.insert(frame.service.clone()) {
            out.push(frame.service.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{IntentDef, SlotDef};

    fn schema() -> SchemaSet {
        SchemaSet::new(vec![ServiceSchema {
            service_name: "Restaurants_1".into(),
            description: "Restaurants".into(),
            slots: vec![
                SlotDef {
                    name: "city".into(),
                    description: "City".into(),
                    is_categorical: false,
                    possible_values: vec![],
                },
                SlotDef {
                    name: "price_range".into(),
                    description: "Price".into(),
                    is_categorical: true,
                    possible_values: vec!["cheap".into(), "pricey".into()],
                },
            ],
            intents: vec![IntentDef {
                name: "FindRestaurants".into(),
                description: "Find".into(),
                is_transactional: false,
                required_slots: vec!["city".into()],
                optional_slots: IndexMap::new(),
                result_slots: vec!["city".into()],
            }],
        }])
    }

    fn two_turns() -> Dialogue {
        let mut user = Frame::new("Restaurants_1");
        user.actions.push(DialogueAct::with_value(act::INFORM, "city", "San Jose"));
        user.slots.push(SlotSpan {
            slot: "city".into(),
            start: 13,
            exclusive_end: 21,
            value: None,
        });
        user.state = Some(FrameState {
            active_intent: "FindRestaurants".into(),
            requested_slots: vec![],
            slot_values: IndexMap::from([("city".to_string(), vec!["San Jose".to_string()])]),
        });
        let mut system = Frame::new("Restaurants_1");
        system.actions.push(DialogueAct::bare(act::REQ_MORE));
        Dialogue {
            dialogue_id: "d1".into(),
            services: vec!["Restaurants_1".into()],
            turns: vec![
                Turn {
                    frames: vec![user],
                    speaker: Speaker::User,
                    utterance: "Something in San Jose.".into(),
                },
                Turn {
                    frames: vec![system],
                    speaker: Speaker::System,
                    utterance: "Anything else?".into(),
                },
            ],
        }
    }

    #[test]
    fn two_turn_round_trip() {
        let d = vec![two_turns()];
        let bytes = serialize_dialogues(&d);
        assert_eq!(parse_dialogues(&bytes).unwrap(), d);
    }

    #[test]
    fn valid_dialogue_has_no_errors() {
        let r = validate_dialogue(&two_turns(), &schema());
        assert!(r.is_ok(), "{r}");
    }

    #[test]
    fn system_first_is_an_alternation_error() {
        let mut d = two_turns();
        d.turns.swap(0, 1);
        let r = validate_dialogue(&d, &schema());
        assert!(r.errors.iter().any(|e| e.path == "turns[0].speaker"), "{r}");
    }

    #[test]
    fn span_past_end_is_one_error() {
        let mut d = two_turns();
        d.turns[0].frames[0].slots[0].exclusive_end = 99;
        let r = validate_dialogue(&d, &schema());
        assert_eq!(r.errors.len(), 1, "{r}");
    }

    #[test]
    fn span_value_mismatch_is_reported() {
        let mut d = two_turns();
        d.turns[0].frames[0].slots[0].value = Some("Oakland".into());
        assert_eq!(validate_dialogue(&d, &schema()).errors.len(), 1);
        d.turns[0].frames[0].slots[0].value = Some("San Jose".into());
        assert!(validate_dialogue(&d, &schema()).is_ok());
    }

    #[test]
    fn categorical_value_outside_possible_values_is_one_error() {
        let mut d = two_turns();
        d.turns[0].frames[0]
            .state
            .as_mut()
            .unwrap()
            .slot_values
            .insert("price_range".into(), vec!["moderate".into()]);
        let r = validate_dialogue(&d, &schema());
        assert_eq!(r.errors.len(), 1, "{r}");
        assert_eq!(r.errors[0].path, "turns[0].frames[0].state.slot_values.price_range[0]");
    }

    #[test]
    fn unknown_service_is_a_single_error() {
        let mut d = two_turns();
        d.services.push("Nope_1".into());
        d.turns[0].frames[0].service = "Nope_1".into();
        d.turns[0].frames[0].actions[0].slot = Some("bogus".into());
        let r = validate_dialogue(&d, &schema());
        assert_eq!(r.errors.len(), 1, "{r}");
    }

    #[test]
    fn char_offsets_are_scalar_values() {
        let s = "Café in Zürich";
        assert_eq!(char_slice(s, 8, 14), Some("Zürich"));
        assert_eq!(char_slice(s, 0, 4), Some("Café"));
        assert_eq!(char_slice(s, 8, 15), None);
    }

    #[test]
    fn empty_slot_round_trips_as_empty_string() {
        let doc = br#"{"act": "REQ_MORE", "slot": "", "values": []}"#;
        let a: DialogueAct = serde_json::from_slice(doc).unwrap();
        assert_eq!(a.slot, None);
        let back = serde_json::to_string(&a).unwrap();
        assert!(back.contains(r#""slot":"""#));
    }

    #[test]
    fn pertinent_frames_rejects_system_turns() {
        let d = two_turns();
        assert_eq!(pertinent_frames(&d, 0).unwrap().len(), 1);
        assert!(matches!(pertinent_frames(&d, 1), Err(CorpusError::NotUserTurn { .. })));
    }

    #[test]
    fn pertinent_frames_returns_both_frames_of_a_multi_service_turn() {
        let mut d = two_turns();
        let mut second = d.turns[0].frames[0].clone();
        second.service = "Hotels_1".into();
        d.turns[0].frames.push(second);
        let got: Vec<&str> = pertinent_frames(&d, 0).unwrap().into_iter().map(|(s, _)| s).collect();
        assert_eq!(got, vec!["Restaurants_1", "Hotels_1"]);
    }

    #[test]
    fn strict_dialogue_parse_rejects_unknown_turn_field() {
        let doc = br#"[{"dialogue_id": "x", "services": [], "turns": [{"speaker": "USER", "utterance": "", "frames": [], "mood": 1}]}]"#;
        assert!(matches!(parse_dialogues(doc), Err(ParseError::UnknownField { .. })));
    }
}
