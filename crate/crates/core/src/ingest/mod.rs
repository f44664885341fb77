//! Workflow ingestion: the native JSON document, a DAX XML subset, and
//! synthetic family generators.

mod dax;
mod generate;
mod native;

use thiserror::Error;

use crate::model::{validate, ResourcePool, ValidationReport, Workflow};

pub use dax::{default_resources, parse_dax, parse_sidecar, ResourceSidecar, SidecarVm};
pub use generate::{generate, Family, GeneratorConfig};
pub use native::{emit_native, parse_native};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed XML at line {line}: {message}")]
    Xml { line: u32, message: String },
    #[error("line {line}: {message}")]
    Semantic { line: u32, message: String },
    #[error("schema error at `{key}`: {message}")]
    Schema { key: String, message: String },
    #[error("invalid workflow: {0}")]
    Invalid(ValidationReport),
    #[error("unknown workflow family `{0}`")]
    UnknownFamily(String),
}

/// Name, family and size carried alongside a workflow.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Metadata {
    pub name: String,
    pub family: String,
    pub size: usize,
}

/// A validated workflow together with the pool it runs on.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkflowSpec {
    pub workflow: Workflow,
    pub pool: ResourcePool,
    pub metadata: Metadata,
}

impl WorkflowSpec {
    /// Builds a spec, rejecting any pair that does not validate.
    pub fn new(workflow: Workflow, pool: ResourcePool, metadata: Metadata) -> Result<Self, IngestError> {
        let report = validate(&workflow, &pool);
        if !report.ok {
            return Err(IngestError::Invalid(report));
        }
        Ok(WorkflowSpec {
            workflow,
            pool,
            metadata,
        })
    }
}

/// Parses either format, sniffing for a leading `<`.
pub fn parse_any(bytes: &[u8], resources: &ResourceSidecar) -> Result<WorkflowSpec, IngestError> {
    let first = bytes.iter().find(|b| !b.is_ascii_whitespace());
    if first == Some(&b'<') {
        parse_dax(bytes, resources)
    } else {
        parse_native(bytes)
    }
}
