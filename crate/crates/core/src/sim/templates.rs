//! Template-based surface realization. Each dialogue act becomes one
//! sentence; a turn's utterance is its sentences joined by single spaces.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::rng::SimRng;
use super::SimError;
use crate::corpus::{act, ActVocabulary, Dialogue, DialogueAct, SlotSpan, Speaker, INTENT_SLOT};
use crate::schema::SchemaSet;

pub const TEMPLATE_VERSION: u32 = 1;

/// Acts whose templates must render the act's value.
const VALUE_ACTS: &[&str] = &[
    act::INFORM_INTENT,
    act::OFFER_INTENT,
    act::INFORM,
    act::CONFIRM,
    act::OFFER,
    act::SELECT,
    act::INFORM_COUNT,
];
/// Acts that name a slot but carry no value.
const SLOT_ACTS: &[&str] = &[act::REQUEST];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    pub speaker: Speaker,
    pub act: String,
    #[serde(default)]
    pub slot: Option<String>,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSet {
    pub config_version: u32,
    pub templates: Vec<Template>,
}

#[derive(Debug, Error, PartialEq)]
pub enum TemplateError {
    #[error("cannot parse templates: {0}")]
    Parse(String),
    #[error("unsupported config_version {0}")]
    Version(u32),
    #[error("template {index} ({act}): {message}")]
    Invalid {
        index: usize,
        act: String,
        message: String,
    },
    #[error("no {speaker} template for act {act} covers every slot")]
    Uncovered { speaker: Speaker, act: String },
    #[error("no template for ({act}, {})", slot.as_deref().unwrap_or("-"))]
    Missing { act: String, slot: Option<String> },
    #[error("{act} needs a value to realize")]
    MissingValue { act: String },
    #[error("realization check failed: {0}")]
    Postcondition(String),
}

enum Piece<'a> {
    Text(&'a str),
    Value,
    Slot,
}

fn pieces(text: &str) -> Result<Vec<Piece<'_>>, String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            out.push(Piece::Text(&rest[..open]));
        }
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| format!("unclosed placeholder in `{text}`"))?
            + open;
        out.push(match &rest[open + 1..close] {
            "value" => Piece::Value,
            "slot" => Piece::Slot,
            other => return Err(format!("unknown placeholder `{{{other}}}`")),
        });
        rest = &rest[close + 1..];
    }
    if rest.contains('}') {
        return Err(format!("stray `}}` in `{text}`"));
    }
    if !rest.is_empty() {
        out.push(Piece::Text(rest));
    }
    Ok(out)
}

/// `FindRestaurants` → `find restaurants`.
pub fn humanize_intent(name: &str) -> String {
    let mut out = String::new();
    for (i, c) in name.chars().enumerate() {
        if c.is_uppercase() && i > 0 {
            out.push(' ');
        }
        out.extend(c.to_lowercase());
    }
    out
}

/// `number_of_seats` → `number of seats`.
pub fn humanize_slot(name: &str) -> String {
    name.replace('_', " ")
}

impl TemplateSet {
    pub fn from_toml(text: &str) -> Result<Self, TemplateError> {
        let set: Self = toml::from_str(text).map_err(|e| TemplateError::Parse(e.to_string()))?;
        set.validate(&ActVocabulary::default())?;
        Ok(set)
    }

    /// Checks placeholder arity and that every act of the vocabulary has a
    /// template usable for any slot.
    pub fn validate(&self, vocabulary: &ActVocabulary) -> Result<(), TemplateError> {
        if self.config_version != TEMPLATE_VERSION {
            return Err(TemplateError::Version(self.config_version));
        }
        for (index, t) in self.templates.iter().enumerate() {
            let invalid = |message: String| TemplateError::Invalid {
                index,
                act: t.act.clone(),
                message,
            };
            if t.texts.is_empty() {
                return Err(invalid("no texts".into()));
            }
            let needs_value = VALUE_ACTS.contains(&t.act.as_str());
            let takes_slot = needs_value || SLOT_ACTS.contains(&t.act.as_str());
            for text in &t.texts {
                let parts = pieces(text).map_err(invalid)?;
                let values = parts.iter().filter(|p| matches!(p, Piece::Value)).count();
                let slots = parts.iter().filter(|p| matches!(p, Piece::Slot)).count();
                if needs_value && values != 1 {
                    return Err(invalid(format!("`{text}` must contain {{value}} exactly once")));
                }
                if !needs_value && values > 0 {
                    return Err(invalid(format!("`{text}` must not contain {{value}}")));
                }
                if !takes_slot && slots > 0 {
                    return Err(invalid(format!("`{text}` must not contain {{slot}}")));
                }
            }
        }
        for speaker in [Speaker::User, Speaker::System] {
            for tag in vocabulary.for_speaker(speaker) {
                let generic = self
                    .templates
                    .iter()
                    .any(|t| t.speaker == speaker && &t.act == tag && t.slot.is_none());
                if !generic {
                    return Err(TemplateError::Uncovered {
                        speaker,
                        act: tag.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Texts for `(speaker, act, slot)`, falling back to the slot-less entry.
    pub fn lookup(&self, speaker: Speaker, act: &str, slot: Option<&str>) -> Option<&[String]> {
        let exact = slot.and_then(|s| {
            self.templates
                .iter()
                .find(|t| t.speaker == speaker && t.act == act && t.slot.as_deref() == Some(s))
        });
        exact
            .or_else(|| {
                self.templates
                    .iter()
                    .find(|t| t.speaker == speaker && t.act == act && t.slot.is_none())
            })
            .map(|t| t.texts.as_slice())
    }

    /// Renders one act; returns the sentence and the char offset of the
    /// value within it, if rendered.
    fn render(
        &self,
        speaker: Speaker,
        a: &DialogueAct,
        rng: &mut SimRng,
    ) -> Result<(String, Option<usize>), TemplateError> {
        let slot = a.slot_name();
        let texts = self.lookup(speaker, &a.act, slot).ok_or_else(|| TemplateError::Missing {
            act: a.act.clone(),
            slot: slot.map(str::to_string),
        })?;
        let text = rng.pick(texts);
        let parts = pieces(text).map_err(|message| TemplateError::Invalid {
            index: 0,
            act: a.act.clone(),
            message,
        })?;
        let mut out = String::new();
        let mut offset = None;
        for part in parts {
            match part {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot => out.push_str(&humanize_slot(slot.unwrap_or_default())),
                Piece::Value => {
                    let raw = a
                        .values
                        .first()
                        .ok_or_else(|| TemplateError::MissingValue { act: a.act.clone() })?;
                    offset = Some(out.chars().count());
                    if slot == Some(INTENT_SLOT) {
                        out.push_str(&humanize_intent(raw));
                    } else {
                        out.push_str(raw);
                    }
                }
            }
        }
        Ok((out, offset))
    }
}

/// Fills utterances and slot spans of an outline. Acts and states are left
/// untouched.
pub fn realize(
    outline: &Dialogue,
    schemas: &SchemaSet,
    templates: &TemplateSet,
    seed: u64,
) -> Result<Dialogue, SimError> {
    let mut rng = SimRng::new(seed);
    let mut out = outline.clone();
    for turn in &mut out.turns {
        let mut sentences: Vec<String> = Vec::new();
        let mut length = 0usize;
        for frame in &mut turn.frames {
            let schema = schemas.get(&frame.service);
            frame.slots.clear();
            for a in &frame.actions {
                let (sentence, offset) = templates.render(turn.speaker, a, &mut rng)?;
                if !sentences.is_empty() {
                    length += 1;
                }
                if let (Some(offset), Some(slot), Some(schema)) = (offset, a.slot_name(), schema) {
                    let spans_value = schema.slot(slot).is_some_and(|d| !d.is_categorical);
                    let value = &a.values[0];
                    let seen = frame.slots.iter().any(|s| s.slot == slot && s.value.as_deref() == Some(value.as_str()));
                    if spans_value && !seen {
                        let start = length + offset;
                        frame.slots.push(SlotSpan {
                            exclusive_end: start + value.chars().count(),
                            slot: slot.to_string(),
                            start,
                            value: Some(value.clone()),
                        });
                    }
                }
                length += sentence.chars().count();
                sentences.push(sentence);
            }
        }
        turn.utterance = sentences.join(" ");
        for frame in &mut turn.frames {
            for span in &mut frame.slots {
                let value = span.value.take();
                if span.text(&turn.utterance) != value.as_deref() {
                    return Err(TemplateError::Postcondition(format!(
                        "span for `{}` does not cover its value",
                        span.slot
                    ))
                    .into());
                }
            }
        }
    }
    check_values_mentioned(&out, schemas)?;
    Ok(out)
}

/// Every non-categorical state value must have been said by someone.
fn check_values_mentioned(d: &Dialogue, schemas: &SchemaSet) -> Result<(), TemplateError> {
    let mut said = String::new();
    for turn in &d.turns {
        said.push_str(&turn.utterance);
        said.push('\n');
        for frame in &turn.frames {
            let (Some(state), Some(schema)) = (&frame.state, schemas.get(&frame.service)) else {
                continue;
            };
            for (slot, values) in &state.slot_values {
                let open = schema.slot(slot).is_some_and(|s| !s.is_categorical);
                if open && !values.iter().any(|v| said.contains(v.as_str())) {
                    return Err(TemplateError::Postcondition(format!(
                        "value `{}` of `{slot}` never appears in an utterance",
                        values[0]
                    )));
                }
            }
        }
    }
    Ok(())
}
