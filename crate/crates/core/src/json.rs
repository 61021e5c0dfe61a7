//! Shared JSON plumbing: positioned parse errors and the unknown-field scan
//! behind strict/lenient loading.

use serde::de::DeserializeOwned;
use serde_json::Value;
use thiserror::Error;

use crate::validation::Issue;

/// How unknown fields in an input document are treated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Strictness {
    /// Unknown fields are errors.
    #[default]
    Strict,
    /// Unknown fields are reported as warnings and otherwise ignored.
    Lenient,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown field `{field}` at {path}")]
    UnknownField { path: String, field: String },
}

impl From<serde_json::Error> for ParseError {
    fn from(err: serde_json::Error) -> Self {
        ParseError::Syntax {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

/// A parsed value plus the warnings collected while parsing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<Issue>,
}

/// Expected key layout of a document, used to find fields the typed model
/// does not know about.
pub(crate) enum Shape {
    Any,
    List(&'static Shape),
    Record(&'static [(&'static str, Shape)]),
}

fn scan(value: &Value, shape: &Shape, path: &str, out: &mut Vec<Issue>) {
    match (shape, value) {
        (Shape::Any, _) => {}
        (Shape::List(inner), Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                scan(item, inner, &format!("{path}[{i}]"), out);
            }
        }
        (Shape::Record(fields), Value::Object(map)) => {
            for (key, item) in map {
                match fields.iter().find(|(name, _)| name == key) {
                    Some((_, inner)) => scan(item, inner, &join(path, key), out),
                    None => out.push(Issue::new(join(path, key), format!("unknown field `{key}`"))),
                }
            }
        }
        // Type mismatches are reported by the typed deserializer.
        _ => {}
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// Deserializes `bytes` into `T`, then checks the raw document against
/// `shape` for unknown fields.
pub(crate) fn parse_with_shape<T: DeserializeOwned>(
    bytes: &[u8],
    shape: &Shape,
    strictness: Strictness,
) -> Result<Parsed<T>, ParseError> {
    let value: T = serde_json::from_slice(bytes)?;
    let raw: Value = serde_json::from_slice(bytes)?;
    let mut unknown = Vec::new();
    scan(&raw, shape, "", &mut unknown);
    match strictness {
        Strictness::Strict => match unknown.into_iter().next() {
            Some(issue) => {
                let field = issue
                    .path
                    .rsplit('.')
                    .next()
                    .unwrap_or(&issue.path)
                    .to_string();
                Err(ParseError::UnknownField {
                    path: issue.path,
                    field,
                })
            }
            None => Ok(Parsed {
                value,
                warnings: Vec::new(),
            }),
        },
        Strictness::Lenient => Ok(Parsed {
            value,
            warnings: unknown,
        }),
    }
}

/// Two-space indented JSON with a trailing newline.
pub(crate) fn to_pretty_bytes<T: serde::Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("in-memory values always serialize");
    out.push(b'\n');
    out
}
