//! Service schemas: the intents and slots a service exposes, each carrying a
//! natural-language description.
//!
//! The on-disk form is the released dataset's `schema.json`: a top-level
//! array of service objects. Field order here follows that file so that
//! `serialize_schemas(parse_schemas(x))` reproduces `x` modulo whitespace.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::json::{self, ParseError, Parsed, Shape, Strictness};
use crate::validation::ValidationReport;

/// Special value meaning the user has no preference. Always legal for
/// categorical slots even though schemas never list it.
pub const DONTCARE: &str = "dontcare";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotDef {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub is_categorical: bool,
    #[serde(default)]
    pub possible_values: Vec<String>,
}

impl SlotDef {
    /// Whether `value` may fill this slot. Open-valued slots accept anything.
    pub fn accepts(&self, value: &str) -> bool {
        !self.is_categorical || value == DONTCARE || self.possible_values.iter().any(|v| v == value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentDef {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub is_transactional: bool,
    #[serde(default)]
    pub required_slots: Vec<String>,
    #[serde(default)]
    pub optional_slots: IndexMap<String, String>,
    #[serde(default)]
    pub result_slots: Vec<String>,
}

impl IntentDef {
    /// Whether `slot` may be passed as an argument when calling this intent.
    pub fn accepts_argument(&self, slot: &str) -> bool {
        self.required_slots.iter().any(|s| s == slot) || self.optional_slots.contains_key(slot)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceSchema {
    pub service_name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub slots: Vec<SlotDef>,
    #[serde(default)]
    pub intents: Vec<IntentDef>,
}

impl ServiceSchema {
    pub fn slot(&self, name: &str) -> Option<&SlotDef> {
        self.slots.iter().find(|s| s.name == name)
    }

    pub fn intent(&self, name: &str) -> Option<&IntentDef> {
        self.intents.iter().find(|i| i.name == name)
    }

    pub fn is_categorical(&self, slot: &str) -> bool {
        self.slot(slot).is_some_and(|s| s.is_categorical)
    }
}

static SLOT_SHAPE: Shape = Shape::Record(&[
    ("name", Shape::Any),
    ("description", Shape::Any),
    ("is_categorical", Shape::Any),
    ("possible_values", Shape::Any),
]);

static INTENT_SHAPE: Shape = Shape::Record(&[
    ("name", Shape::Any),
    ("description", Shape::Any),
    ("is_transactional", Shape::Any),
    ("required_slots", Shape::Any),
    ("optional_slots", Shape::Any),
    ("result_slots", Shape::Any),
]);

static SERVICE_SHAPE: Shape = Shape::Record(&[
    ("service_name", Shape::Any),
    ("description", Shape::Any),
    ("slots", Shape::List(&SLOT_SHAPE)),
    ("intents", Shape::List(&INTENT_SHAPE)),
]);

static COLLECTION_SHAPE: Shape = Shape::List(&SERVICE_SHAPE);

/// Parses a schema document in strict mode.
pub fn parse_schemas(bytes: &[u8]) -> Result<Vec<ServiceSchema>, ParseError> {
    parse_schemas_with(bytes, Strictness::Strict).map(|p| p.value)
}

pub fn parse_schemas_with(
    bytes: &[u8],
    strictness: Strictness,
) -> Result<Parsed<Vec<ServiceSchema>>, ParseError> {
    json::parse_with_shape(bytes, &COLLECTION_SHAPE, strictness)
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("parse error in {path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("schema collection failed validation:\n{0}")]
    Invalid(ValidationReport),
}

/// Serializes a validated collection. Refuses (returning the report) when
/// any schema has validation errors.
pub fn serialize_schemas(schemas: &[ServiceSchema]) -> Result<Vec<u8>, SchemaError> {
    let report = validate_collection(schemas);
    if !report.is_ok() {
        return Err(SchemaError::Invalid(report));
    }
    Ok(json::to_pretty_bytes(schemas))
}

/// Checks every schema invariant, reporting violations in document order.
pub fn validate_schema(schema: &ServiceSchema) -> ValidationReport {
    let mut report = ValidationReport::default();
    if schema.service_name.is_empty() {
        report.error("service_name", "service name is empty");
    }
    if schema.description.trim().is_empty() {
        report.warning("description", "service has no description");
    }
    if schema.slots.is_empty() {
        report.error("slots", "service defines no slots");
    }
    if schema.intents.is_empty() {
        report.error("intents", "service defines no intents");
    }

    let mut first_slot: HashMap<&str, usize> = HashMap::new();
    for (i, slot) in schema.slots.iter().enumerate() {
        let at = format!("slots[{i}]");
        if slot.name.is_empty() {
            report.error(format!("{at}.name"), "slot name is empty");
        } else if let Some(&first) = first_slot.get(slot.name.as_str()) {
            report.error(
                format!("{at}.name"),
                format!("duplicate slot name `{}` at slots[{first}] and slots[{i}]", slot.name),
            );
        } else {
            first_slot.insert(&slot.name, i);
        }
        if slot.is_categorical {
            if slot.possible_values.is_empty() {
                report.error(
                    format!("{at}.possible_values"),
                    "categorical slot has no possible values",
                );
            }
            let mut seen: HashMap<&str, usize> = HashMap::new();
            for (k, value) in slot.possible_values.iter().enumerate() {
                if let Some(&first) = seen.get(value.as_str()) {
                    report.error(
                        format!("{at}.possible_values[{k}]"),
                        format!("duplicate possible value `{value}` (first at index {first})"),
                    );
                } else {
                    seen.insert(value, k);
                }
            }
        } else if !slot.possible_values.is_empty() {
            report.error(
                format!("{at}.possible_values"),
                "non-categorical slot must not list possible values",
            );
        }
    }

    let mut first_intent: HashMap<&str, usize> = HashMap::new();
    for (j, intent) in schema.intents.iter().enumerate() {
        let at = format!("intents[{j}]");
        if intent.name.is_empty() {
            report.error(format!("{at}.name"), "intent name is empty");
        } else if let Some(&first) = first_intent.get(intent.name.as_str()) {
            report.error(
                format!("{at}.name"),
                format!(
                    "duplicate intent name `{}` at intents[{first}] and intents[{j}]",
                    intent.name
                ),
            );
        } else {
            first_intent.insert(&intent.name, j);
        }
        for (k, name) in intent.required_slots.iter().enumerate() {
            if schema.slot(name).is_none() {
                report.error(
                    format!("{at}.required_slots[{k}]"),
                    format!("unknown slot `{name}`"),
                );
            }
        }
        for (name, default) in &intent.optional_slots {
            let path = format!("{at}.optional_slots.{name}");
            match schema.slot(name) {
                None => report.error(path, format!("unknown slot `{name}`")),
                Some(slot) => {
                    if intent.required_slots.contains(name) {
                        report.error(path, format!("slot `{name}` is both required and optional"));
                    } else if !slot.accepts(default) {
                        report.error(
                            path,
                            format!("default `{default}` is not a possible value of `{name}`"),
                        );
                    }
                }
            }
        }
        for (k, name) in intent.result_slots.iter().enumerate() {
            if schema.slot(name).is_none() {
                report.error(
                    format!("{at}.result_slots[{k}]"),
                    format!("unknown slot `{name}`"),
                );
            }
        }
    }
    report
}

/// Validates every schema plus the collection-level rule that service
/// names are unique. Paths are prefixed with the service's index.
pub fn validate_collection(schemas: &[ServiceSchema]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut first: HashMap<&str, usize> = HashMap::new();
    for (i, schema) in schemas.iter().enumerate() {
        if let Some(&prev) = first.get(schema.service_name.as_str()) {
            report.error(
                format!("[{i}].service_name"),
                format!(
                    "duplicate service name `{}` at [{prev}] and [{i}]",
                    schema.service_name
                ),
            );
        } else {
            first.insert(&schema.service_name, i);
        }
        report.extend_prefixed(&format!("[{i}]"), validate_schema(schema));
    }
    report
}

/// An indexed, immutable collection of schemas.
#[derive(Debug, Clone, Default)]
pub struct SchemaSet {
    services: Vec<ServiceSchema>,
    index: BTreeMap<String, usize>,
}

impl SchemaSet {
    pub fn new(services: Vec<ServiceSchema>) -> Self {
        let mut index = BTreeMap::new();
        for (i, s) in services.iter().enumerate() {
            index.entry(s.service_name.clone()).or_insert(i);
        }
        Self { services, index }
    }

    pub fn get(&self, service: &str) -> Option<&ServiceSchema> {
        self.index.get(service).map(|&i| &self.services[i])
    }

    pub fn services(&self) -> &[ServiceSchema] {
        &self.services
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.services.iter().map(|s| s.service_name.as_str())
    }

    pub fn len(&self) -> usize {
        self.services.len()
    }

    pub fn is_empty(&self) -> bool {
        self.services.is_empty()
    }

    pub fn merge(mut self, more: Vec<ServiceSchema>) -> Self {
        self.services.extend(more);
        Self::new(self.services)
    }
}

impl From<Vec<ServiceSchema>> for SchemaSet {
    fn from(v: Vec<ServiceSchema>) -> Self {
        Self::new(v)
    }
}

/// Loads schemas from a file, or from `schema.json` inside a directory.
pub fn load_schemas(path: &Path, strictness: Strictness) -> Result<Parsed<Vec<ServiceSchema>>, SchemaError> {
    let file = if path.is_dir() {
        path.join("schema.json")
    } else {
        path.to_path_buf()
    };
    let bytes = std::fs::read(&file).map_err(|source| SchemaError::Io {
        path: file.display().to_string(),
        source,
    })?;
    parse_schemas_with(&bytes, strictness).map_err(|source| SchemaError::Parse {
        path: file.display().to_string(),
        source,
    })
}
