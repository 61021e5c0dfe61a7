//! Tracker output: the dialogue layout with each user frame's state reduced
//! to one value per slot.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusError, Dialogue, Speaker};
use crate::json::{self, ParseError, Parsed, Shape, Strictness};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HypothesisState {
    pub active_intent: String,
    #[serde(default)]
    pub requested_slots: Vec<String>,
    #[serde(default)]
    pub slot_values: IndexMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisFrame {
    pub service: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<HypothesisState>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisTurn {
    pub frames: Vec<HypothesisFrame>,
    pub speaker: Speaker,
    #[serde(default)]
    pub utterance: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisDialogue {
    pub dialogue_id: String,
    #[serde(default)]
    pub services: Vec<String>,
    pub turns: Vec<HypothesisTurn>,
}

static FRAME_SHAPE: Shape = Shape::Record(&[
    ("service", Shape::Any),
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

pub fn parse_hypotheses(bytes: &[u8], strictness: Strictness) -> Result<Parsed<Vec<HypothesisDialogue>>, ParseError> {
    json::parse_with_shape(bytes, &CORPUS_SHAPE, strictness)
}

pub fn serialize_hypotheses(dialogues: &[HypothesisDialogue]) -> Vec<u8> {
    json::to_pretty_bytes(dialogues)
}

/// Loads a hypothesis file, or every `dialogues_*.json` in a directory.
pub fn load_hypotheses(path: &Path, strictness: Strictness) -> Result<Parsed<Vec<HypothesisDialogue>>, CorpusError> {
    let files = if path.is_dir() {
        crate::corpus::dialogue_files(path)?
    } else {
        vec![path.to_path_buf()]
    };
    let mut value = Vec::new();
    let mut warnings = Vec::new();
    for file in files {
        let shown = file.display().to_string();
        let bytes = std::fs::read(&file).map_err(|source| CorpusError::Io {
            path: shown.clone(),
            source,
        })?;
        let parsed = parse_hypotheses(&bytes, strictness).map_err(|source| CorpusError::Parse { path: shown, source })?;
        value.extend(parsed.value);
        warnings.extend(parsed.warnings);
    }
    Ok(Parsed { value, warnings })
}

/// Skeleton of `d` with no states, ready for a tracker to fill.
pub fn empty_hypothesis(d: &Dialogue) -> HypothesisDialogue {
    HypothesisDialogue {
        dialogue_id: d.dialogue_id.clone(),
        services: d.services.clone(),
        turns: d
            .turns
            .iter()
            .map(|t| HypothesisTurn {
                frames: Vec::new(),
                speaker: t.speaker,
                utterance: t.utterance.clone(),
            })
            .collect(),
    }
}
