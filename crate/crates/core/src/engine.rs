//! In-memory service backends: one entity table per service plus the intent
//! call semantics (required slots, optional defaults, search vs transaction).

use std::collections::BTreeMap;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{SchemaSet, ServiceSchema, DONTCARE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityTable {
    pub service: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl EntityTable {
    pub fn column_index(&self, slot: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == slot)
    }

    pub fn has_column(&self, slot: &str) -> bool {
        self.column_index(slot).is_some()
    }

    pub fn cell(&self, row: usize, slot: &str) -> Option<&str> {
        let col = self.column_index(slot)?;
        self.rows.get(row).map(|r| r[col].as_str())
    }

    pub fn row_map(&self, row: usize) -> IndexMap<String, String> {
        self.columns
            .iter()
            .cloned()
            .zip(self.rows[row].iter().cloned())
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum EntityError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: empty entity table")]
    Empty { path: String },
    #[error("{path}: no schema for service `{service}`")]
    UnknownService { path: String, service: String },
    #[error("{path}: column `{column}` is not a slot of {service}")]
    UnknownColumn {
        path: String,
        service: String,
        column: String,
    },
    #[error("{path}: duplicate column `{column}`")]
    DuplicateColumn { path: String, column: String },
    #[error("{path}: row {row}: `{value}` is not a possible value of `{column}`")]
    InvalidValue {
        path: String,
        row: usize,
        column: String,
        value: String,
    },
    #[error("{path}: no entity tables found")]
    NoTables { path: String },
}

/// Parses one CSV table. The header row names slots of `schema`; `row`
/// indices in errors count data rows from 0.
pub fn parse_entity_table(
    bytes: &[u8],
    schema: &ServiceSchema,
    path: &str,
) -> Result<EntityTable, EntityError> {
    let csv_err = |source| EntityError::Csv {
        path: path.to_string(),
        source,
    };
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Err(EntityError::Empty {
            path: path.to_string(),
        });
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let columns: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    for (i, column) in columns.iter().enumerate() {
        if schema.slot(column).is_none() {
            return Err(EntityError::UnknownColumn {
                path: path.to_string(),
                service: schema.service_name.clone(),
                column: column.clone(),
            });
        }
        if columns[..i].contains(column) {
            return Err(EntityError::DuplicateColumn {
                path: path.to_string(),
                column: column.clone(),
            });
        }
    }
    let mut rows = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let cells: Vec<String> = record.iter().map(str::to_string).collect();
        for (column, value) in columns.iter().zip(&cells) {
            let def = schema.slot(column).expect("checked above");
            if def.is_categorical && !def.possible_values.contains(value) {
                return Err(EntityError::InvalidValue {
                    path: path.to_string(),
                    row,
                    column: column.clone(),
                    value: value.clone(),
                });
            }
        }
        rows.push(cells);
    }
    Ok(EntityTable {
        service: schema.service_name.clone(),
        columns,
        rows,
    })
}

/// Loads `<Service>.csv` tables from a directory, or a single CSV file whose
/// stem names the service.
pub fn load_entities(path: &Path, schemas: &SchemaSet) -> Result<BTreeMap<String, EntityTable>, EntityError> {
    let io_err = |p: &Path, source| EntityError::Io {
        path: p.display().to_string(),
        source,
    };
    let files = if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .map_err(|e| io_err(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(EntityError::NoTables {
            path: path.display().to_string(),
        });
    }
    let mut tables = BTreeMap::new();
    for file in files {
        let shown = file.display().to_string();
        let service = file
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let schema = schemas.get(&service).ok_or_else(|| EntityError::UnknownService {
            path: shown.clone(),
            service: service.clone(),
        })?;
        let bytes = std::fs::read(&file).map_err(|e| io_err(&file, e))?;
        tables.insert(service, parse_entity_table(&bytes, schema, &shown)?);
    }
    Ok(tables)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentCall {
    pub intent: String,
    pub arguments: IndexMap<String, String>,
}

impl IntentCall {
    pub fn new(intent: &str) -> Self {
        Self {
            intent: intent.to_string(),
            arguments: IndexMap::new(),
        }
    }

    pub fn arg(mut self, slot: &str, value: &str) -> Self {
        self.arguments.insert(slot.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CallStatus {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallResult {
    pub status: CallStatus,
    /// Matching rows for a search; the committed row for a transaction.
    pub matches: Vec<IndexMap<String, String>>,
    /// Table indices of the matching rows, in table order.
    pub rows: Vec<usize>,
    pub count: usize,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CallError {
    #[error("unknown intent `{0}`")]
    UnknownIntent(String),
    #[error("intent `{intent}` does not take slot `{slot}`")]
    UnknownArgument { intent: String, slot: String },
    #[error("required slot `{0}` is missing")]
    RequiredSlotMissing(String),
}

/// Arguments with absent optional slots filled from their defaults.
pub fn effective_arguments(
    schema: &ServiceSchema,
    c: &IntentCall,
) -> Result<IndexMap<String, String>, CallError> {
    let intent = schema
        .intent(&c.intent)
        .ok_or_else(|| CallError::UnknownIntent(c.intent.clone()))?;
    if let Some(slot) = c.arguments.keys().find(|s| !intent.accepts_argument(s)) {
        return Err(CallError::UnknownArgument {
            intent: c.intent.clone(),
            slot: slot.clone(),
        });
    }
    if let Some(slot) = intent.required_slots.iter().find(|s| !c.arguments.contains_key(*s)) {
        return Err(CallError::RequiredSlotMissing(slot.clone()));
    }
    let mut args = c.arguments.clone();
    for (slot, default) in &intent.optional_slots {
        args.entry(slot.clone()).or_insert_with(|| default.clone());
    }
    Ok(args)
}

/// Indices of rows equal to every constraint on a table column. Constraints
/// on slots the table lacks, and `dontcare` values, do not filter.
pub fn matching_rows(table: &EntityTable, constraints: &IndexMap<String, String>) -> Vec<usize> {
    let filters: Vec<(usize, &str)> = constraints
        .iter()
        .filter(|(_, v)| v.as_str() != DONTCARE)
        .filter_map(|(slot, v)| table.column_index(slot).map(|c| (c, v.as_str())))
        .collect();
    (0..table.rows.len())
        .filter(|&r| filters.iter().all(|&(c, v)| table.rows[r][c] == v))
        .collect()
}

/// Executes an intent call against a table. Tables are never mutated.
pub fn call(table: &EntityTable, schema: &ServiceSchema, c: &IntentCall) -> Result<CallResult, CallError> {
    let args = effective_arguments(schema, c)?;
    let transactional = schema.intent(&c.intent).is_some_and(|i| i.is_transactional);
    let rows = matching_rows(table, &args);
    let failure = CallResult {
        status: CallStatus::Failure,
        matches: Vec::new(),
        rows: Vec::new(),
        count: 0,
    };
    if rows.is_empty() {
        return Ok(failure);
    }
    if transactional {
        let mut committed = table.row_map(rows[0]);
        for (slot, value) in &args {
            if !committed.contains_key(slot) {
                committed.insert(slot.clone(), value.clone());
            }
        }
        return Ok(CallResult {
            status: CallStatus::Success,
            matches: vec![committed],
            rows: vec![rows[0]],
            count: 1,
        });
    }
    Ok(CallResult {
        status: CallStatus::Success,
        matches: rows.iter().map(|&r| table.row_map(r)).collect(),
        count: rows.len(),
        rows,
    })
}
