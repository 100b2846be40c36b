//! Privacy audit of outgoing and incoming payloads.
//!
//! Payloads may carry schema and tree documents only. Anything that looks
//! like an outcome field or a raw row matrix is a violation.

use serde::Serialize;
use serde_json::Value;

use crate::envelope::{Envelope, MsgType};

/// Field names that would carry individual-level outcomes or rows.
pub const FORBIDDEN_FIELDS: &[&str] = &["time", "event", "outcome", "outcomes", "rows"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Sent,
    Received,
}

/// What was exchanged, never the payload itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditEntry {
    pub direction: Direction,
    pub msg_type: MsgType,
    pub client_id: String,
    pub payload_keys: Vec<String>,
    pub bytes: usize,
}

impl AuditEntry {
    pub fn of(direction: Direction, env: &Envelope) -> Self {
        let payload_keys = env
            .payload
            .as_object()
            .map(|m| m.keys().cloned().collect())
            .unwrap_or_default();
        Self {
            direction,
            msg_type: env.msg_type,
            client_id: env.client_id.clone(),
            payload_keys,
            bytes: env.to_bytes().len(),
        }
    }
}

fn is_matrix(items: &[Value]) -> bool {
    !items.is_empty()
        && items.iter().all(|row| {
            row.as_array()
                .is_some_and(|r| !r.is_empty() && r.iter().all(Value::is_number))
        })
}

/// JSON path of the first violation, if any.
pub fn find_violation(value: &Value) -> Option<String> {
    fn walk(v: &Value, path: &mut String) -> Option<String> {
        match v {
            Value::Object(m) => {
                for (k, child) in m {
                    if FORBIDDEN_FIELDS.contains(&k.to_ascii_lowercase().as_str()) {
                        return Some(format!("{path}.{k}"));
                    }
                    let len = path.len();
                    path.push('.');
                    path.push_str(k);
                    let hit = walk(child, path);
                    path.truncate(len);
                    if hit.is_some() {
                        return hit;
                    }
                }
                None
            }
            Value::Array(items) => {
                if is_matrix(items) {
                    return Some(format!("{path} (numeric matrix)"));
                }
                items.iter().enumerate().find_map(|(i, child)| {
                    let len = path.len();
                    path.push_str(&format!("[{i}]"));
                    let hit = walk(child, path);
                    path.truncate(len);
                    hit
                })
            }
            _ => None,
        }
    }
    walk(value, &mut String::from("payload"))
}
