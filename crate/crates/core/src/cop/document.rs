//! Canonical text form of an instance (one JSON object per file).
//!
//! Field order is fixed: `id`, `objective`, `dimension`, `lower`, `upper`,
//! `epsilon`, `constraints`. Unknown fields are accepted and reported.

use serde::{Deserialize, Serialize};

use super::{Constraint, CopInstance, ObjectiveTag, SearchSpace};
use crate::error::{Error, Result};

const KNOWN_FIELDS: [&str; 7] = ["id", "objective", "dimension", "lower", "upper", "epsilon", "constraints"];

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    id: String,
    objective: ObjectiveTag,
    dimension: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    epsilon: f64,
    constraints: Vec<Constraint>,
}

pub fn to_document(instance: &CopInstance) -> String {
    let doc = InstanceDoc {
        id: instance.id.clone(),
        objective: instance.objective.tag,
        dimension: instance.dimension(),
        lower: instance.space.lower.clone(),
        upper: instance.space.upper.clone(),
        epsilon: instance.epsilon,
        constraints: instance.constraints.clone(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("instance documents always serialize");
    text.push('\n');
    text
}

/// Parses a document, logging a warning for each unknown field.
pub fn from_document(text: &str) -> Result<CopInstance> {
    let (instance, unknown) = from_document_lenient(text)?;
    for field in unknown {
        log::warn!("instance document: ignoring unknown field `{field}`");
    }
    Ok(instance)
}

/// Parses a document and returns the names of unknown top-level fields.
pub fn from_document_lenient(text: &str) -> Result<(CopInstance, Vec<String>)> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(json_error)?;
    let unknown = match serde_json::from_str::<serde_json::Value>(text) {
        Ok(serde_json::Value::Object(map)) => {
            map.keys().filter(|k| !KNOWN_FIELDS.contains(&k.as_str())).cloned().collect()
        }
        _ => Vec::new(),
    };
    if doc.lower.len() != doc.dimension {
        return Err(field_error("lower", format!("expected {} entries, found {}", doc.dimension, doc.lower.len())));
    }
    if doc.upper.len() != doc.dimension {
        return Err(field_error("upper", format!("expected {} entries, found {}", doc.dimension, doc.upper.len())));
    }
    let space = SearchSpace::new(doc.lower, doc.upper).map_err(|e| field_error("lower", e.to_string()))?;
    let instance = CopInstance::new(doc.id, doc.objective, doc.constraints, space, doc.epsilon)
        .map_err(|e| field_error("constraints", e.to_string()))?;
    Ok((instance, unknown))
}

fn field_error(field: &str, message: String) -> Error {
    Error::Parse { line: 0, field: field.to_string(), message }
}

fn json_error(e: serde_json::Error) -> Error {
    let message = e.to_string();
    // serde reports the offending field between backticks, e.g. "missing field `epsilon`".
    let field = message.split('`').nth(1).unwrap_or("").to_string();
    Error::Parse { line: e.line(), field, message }
}
