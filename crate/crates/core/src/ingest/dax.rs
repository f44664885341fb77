use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{IngestError, Metadata, WorkflowSpec};
use crate::model::{Dependency, ResourcePool, Task, Vm, Workflow};

/// Per-VM speed factors and transfer rates that accompany a DAX file.
///
/// A DAX job carries a single runtime; its runtime on VM `i` is that value
/// multiplied by `vms[i].speed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceSidecar {
    pub vms: Vec<SidecarVm>,
    pub rates: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarVm {
    pub id: String,
    #[serde(default)]
    pub reliable: bool,
    #[serde(default = "unit_speed")]
    pub speed: f64,
}

fn unit_speed() -> f64 {
    1.0
}

impl ResourceSidecar {
    pub fn pool(&self) -> ResourcePool {
        ResourcePool::new(
            self.vms
                .iter()
                .map(|v| Vm {
                    id: v.id.clone(),
                    reliable: v.reliable,
                })
                .collect(),
            self.rates.clone(),
        )
    }
}

/// `vm_count` VMs with speed factors drawn from U[0.5, 1.5), unit rates,
/// and the first `reliable` VMs marked reliable.
pub fn default_resources(vm_count: usize, reliable: usize, seed: u64) -> ResourceSidecar {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vms = (0..vm_count)
        .map(|i| SidecarVm {
            id: format!("v{}", i + 1),
            reliable: i < reliable,
            speed: rng.random_range(0.5..1.5),
        })
        .collect();
    ResourceSidecar {
        vms,
        rates: vec![vec![1.0; vm_count]; vm_count],
    }
}

pub fn parse_sidecar(bytes: &[u8]) -> Result<ResourceSidecar, IngestError> {
    let side: ResourceSidecar = serde_json::from_slice(bytes).map_err(|e| IngestError::Schema {
        key: "resources".into(),
        message: e.to_string(),
    })?;
    let n = side.vms.len();
    if side.rates.len() != n || side.rates.iter().any(|r| r.len() != n) {
        return Err(IngestError::Schema {
            key: "rates".into(),
            message: format!("expected a {n}x{n} matrix"),
        });
    }
    Ok(side)
}

struct Job {
    id: String,
    runtime: f64,
    inputs: HashMap<String, f64>,
    outputs: HashMap<String, f64>,
}

/// Parses the DAX subset: `job` (id, runtime), nested `uses` (file, link, size)
/// and `child`/`parent` references. Dependency volume is the total size of the
/// files the parent writes and the child reads.
pub fn parse_dax(bytes: &[u8], resources: &ResourceSidecar) -> Result<WorkflowSpec, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|e| IngestError::Xml {
        line: 1,
        message: e.to_string(),
    })?;
    let doc = roxmltree::Document::parse(text).map_err(|e| IngestError::Xml {
        line: e.pos().row,
        message: e.to_string(),
    })?;
    let line_of = |node: roxmltree::Node| doc.text_pos_at(node.range().start).row;

    let mut jobs: Vec<Job> = Vec::new();
    let mut job_index: HashMap<String, usize> = HashMap::new();
    let mut edges: Vec<(String, String, u32)> = Vec::new();
    let mut ignored = BTreeSet::new();

    for node in doc.root_element().children().filter(|n| n.is_element()) {
        match node.tag_name().name() {
            "job" => {
                let id = required(node, "id", line_of(node))?;
                let runtime = number(node, "runtime", line_of(node))?;
                let mut job = Job {
                    id: id.to_string(),
                    runtime,
                    inputs: HashMap::new(),
                    outputs: HashMap::new(),
                };
                for u in node.children().filter(|n| n.is_element()) {
                    if u.tag_name().name() != "uses" {
                        ignored.insert(u.tag_name().name().to_string());
                        continue;
                    }
                    let file = required(u, "file", line_of(u))?.to_string();
                    let size = match u.attribute("size") {
                        Some(_) => number(u, "size", line_of(u))?,
                        None => 0.0,
                    };
                    match u.attribute("link") {
                        Some("output") => {
                            job.outputs.insert(file, size);
                        }
                        _ => {
                            job.inputs.insert(file, size);
                        }
                    }
                }
                if job_index.insert(job.id.clone(), jobs.len()).is_some() {
                    return Err(IngestError::Semantic {
                        line: line_of(node),
                        message: format!("duplicate job id {}", job.id),
                    });
                }
                jobs.push(job);
            }
            "child" => {
                let child = required(node, "ref", line_of(node))?.to_string();
                for p in node.children().filter(|n| n.is_element()) {
                    if p.tag_name().name() != "parent" {
                        ignored.insert(p.tag_name().name().to_string());
                        continue;
                    }
                    let parent = required(p, "ref", line_of(p))?.to_string();
                    edges.push((parent, child.clone(), line_of(p)));
                }
            }
            other => {
                ignored.insert(other.to_string());
            }
        }
    }
    for name in &ignored {
        log::warn!("DAX element <{name}> is not supported and was ignored");
    }

    let mut deps = Vec::with_capacity(edges.len());
    for (parent, child, line) in edges {
        let (Some(&p), Some(&c)) = (job_index.get(&parent), job_index.get(&child)) else {
            let missing = if job_index.contains_key(&parent) { child } else { parent };
            return Err(IngestError::Semantic {
                line,
                message: format!("reference to undeclared job {missing}"),
            });
        };
        let data: f64 = jobs[p]
            .outputs
            .iter()
            .filter_map(|(f, size)| jobs[c].inputs.contains_key(f).then_some(*size))
            .sum();
        deps.push(Dependency::new(parent, child, data));
    }

    let tasks = jobs
        .iter()
        .map(|j| {
            Task::new(
                j.id.clone(),
                resources.vms.iter().map(|v| j.runtime * v.speed).collect(),
            )
        })
        .collect::<Vec<_>>();
    let metadata = Metadata {
        name: doc.root_element().attribute("name").unwrap_or("dax").to_string(),
        family: "dax".into(),
        size: tasks.len(),
    };
    WorkflowSpec::new(Workflow::new(tasks, deps), resources.pool(), metadata)
}

fn required<'a>(node: roxmltree::Node<'a, '_>, attr: &str, line: u32) -> Result<&'a str, IngestError> {
    node.attribute(attr).ok_or_else(|| IngestError::Semantic {
        line,
        message: format!("<{}> is missing attribute `{attr}`", node.tag_name().name()),
    })
}

fn number(node: roxmltree::Node, attr: &str, line: u32) -> Result<f64, IngestError> {
    let raw = required(node, attr, line)?;
    raw.trim().parse().map_err(|_| IngestError::Semantic {
        line,
        message: format!("attribute `{attr}` is not a number: {raw}"),
    })
}
