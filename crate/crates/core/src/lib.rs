//! Workflow scheduling with learned task replication and checkpointed
//! resubmission, plus a discrete-event simulator for unreliable VM pools.

pub mod clusterrep;
pub mod experiment;
pub mod faults;
pub mod features;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod scheduler;
pub mod simruntime;
