use serde::{Deserialize, Serialize};

use super::{IngestError, Metadata, WorkflowSpec};
use crate::model::{Dependency, ResourcePool, Task, Vm, Workflow};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NativeDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    family: Option<String>,
    tasks: Vec<Task>,
    #[serde(default)]
    deps: Vec<Dependency>,
    vms: Vec<Vm>,
    rates: Vec<Vec<f64>>,
}

/// Parses the native document: `tasks`, `deps`, `vms` and a row-major `rates` matrix.
pub fn parse_native(bytes: &[u8]) -> Result<WorkflowSpec, IngestError> {
    let doc: NativeDoc = serde_json::from_slice(bytes).map_err(|e| IngestError::Schema {
        key: offending_key(&e.to_string()),
        message: e.to_string(),
    })?;

    let n = doc.vms.len();
    for (i, t) in doc.tasks.iter().enumerate() {
        if t.runtimes.len() != n {
            return Err(IngestError::Schema {
                key: format!("tasks[{i}].runtimes"),
                message: format!("expected {n} values (one per VM), found {}", t.runtimes.len()),
            });
        }
    }
    if doc.rates.len() != n {
        return Err(IngestError::Schema {
            key: "rates".into(),
            message: format!("expected {n} rows, found {}", doc.rates.len()),
        });
    }
    if let Some((i, row)) = doc.rates.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(IngestError::Schema {
            key: format!("rates[{i}]"),
            message: format!("expected {n} columns, found {}", row.len()),
        });
    }

    let size = doc.tasks.len();
    let metadata = Metadata {
        name: doc.name.unwrap_or_default(),
        family: doc.family.unwrap_or_default(),
        size,
    };
    WorkflowSpec::new(
        Workflow::new(doc.tasks, doc.deps),
        ResourcePool::new(doc.vms, doc.rates),
        metadata,
    )
}

/// Canonical pretty-printed document with a trailing newline.
pub fn emit_native(spec: &WorkflowSpec) -> String {
    let doc = NativeDoc {
        name: (!spec.metadata.name.is_empty()).then(|| spec.metadata.name.clone()),
        family: (!spec.metadata.family.is_empty()).then(|| spec.metadata.family.clone()),
        tasks: spec.workflow.tasks().to_vec(),
        deps: spec.workflow.deps().to_vec(),
        vms: spec.pool.vms().to_vec(),
        rates: spec.pool.rates().to_vec(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("native document serializes");
    out.push('\n');
    out
}

fn offending_key(msg: &str) -> String {
    // serde_json quotes field names with backticks
    msg.split('`').nth(1).unwrap_or("document").to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    const F1: &str = include_str!("../../tests/fixtures/f1.json");

    #[test]
    fn parses_fixture() {
        let spec = parse_native(F1.as_bytes()).unwrap();
        assert_eq!(spec.workflow.len(), 3);
        assert_eq!(spec.pool.len(), 2);
        assert_eq!(spec.workflow.task(0).mean_runtime(), 2.5);
        assert_eq!(spec.metadata.size, 3);
    }

    #[test]
    fn emit_is_byte_identical_on_canonical_input() {
        let spec = parse_native(F1.as_bytes()).unwrap();
        assert_eq!(emit_native(&spec), F1);
    }

    #[test]
    fn row_length_mismatch_is_schema_error() {
        let bad = F1.replacen("2.0,\n        3.0", "2.0,\n        3.0,\n        1.0", 1);
        assert_ne!(bad, F1);
        match parse_native(bad.as_bytes()) {
            Err(IngestError::Schema { key, .. }) => assert_eq!(key, "tasks[0].runtimes"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_key_is_named() {
        match parse_native(br#"{"tasks": [], "deps": [], "vms": []}"#) {
            Err(IngestError::Schema { key, .. }) => assert_eq!(key, "rates"),
            other => panic!("unexpected {other:?}"),
        }
        match parse_native(br#"{"tasks": [], "vms": [], "rates": [], "extra": 1}"#) {
            Err(IngestError::Schema { key, .. }) => assert_eq!(key, "extra"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
