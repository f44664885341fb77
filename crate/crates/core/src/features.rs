//! Per-task feature matrix used to learn replication counts.

use std::io::Write;

use crate::ingest::WorkflowSpec;

pub const FEATURE_NAMES: [&str; 5] = [
    "mean_runtime",
    "max_parent_transfer",
    "priority",
    "parents",
    "children",
];

/// Row-major matrix, one row per task in workflow order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<f64>>) -> Self {
        FeatureMatrix { columns, rows }
    }

    /// Builds a matrix from columns of equal length.
    pub fn from_columns(names: &[&str], cols: &[Vec<f64>]) -> Self {
        let n = cols.first().map_or(0, Vec::len);
        let rows = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        FeatureMatrix {
            columns: names.iter().map(|s| s.to_string()).collect(),
            rows,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn write_csv<W: Write>(&self, ids: &[String], mut out: W) -> std::io::Result<()> {
        writeln!(out, "task,{}", self.columns.join(","))?;
        for (id, row) in ids.iter().zip(&self.rows) {
            let vals: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            writeln!(out, "{id},{}", vals.join(","))?;
        }
        Ok(())
    }
}

/// Five features per task: mean runtime, the largest mean transfer time from
/// any parent (zero for entry tasks), priority, parent count and child count.
pub fn extract(spec: &WorkflowSpec) -> FeatureMatrix {
    let w = &spec.workflow;
    let rows = (0..w.len())
        .map(|i| {
            let task = w.task(i);
            let max_transfer = w
                .parents(i)
                .iter()
                .map(|e| spec.pool.mean_transfer(e.data))
                .fold(0.0, f64::max);
            vec![
                task.mean_runtime(),
                max_transfer,
                task.priority as f64,
                w.parents(i).len() as f64,
                w.children(i).len() as f64,
            ]
        })
        .collect();
    FeatureMatrix {
        columns: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        rows,
    }
}

/// Z-scores every column with the population standard deviation.
/// Zero-variance columns become all zeros.
pub fn standardize(m: &FeatureMatrix) -> FeatureMatrix {
    let n = m.n_rows();
    let mut out = m.clone();
    if n == 0 {
        return out;
    }
    for j in 0..m.n_cols() {
        let col = m.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        let constant = sd <= 1e-12 * mean.abs().max(1.0);
        for (row, x) in out.rows.iter_mut().zip(&col) {
            row[j] = if constant { 0.0 } else { (x - mean) / sd };
        }
    }
    out
}
