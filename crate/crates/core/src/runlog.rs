//! Append-only history of every genome scored during a run.

use serde::{Deserialize, Serialize};

use crate::pulse_codec::{Encoding, Genome};

/// One population member scored in one generation.
///
/// `cached` records that the fitness came from the evaluation cache rather
/// than the backend. Records with `cached == false` are exactly the backend
/// calls of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub generation: usize,
    pub genome: Genome,
    pub fitness: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default)]
    pub cached: bool,
}

/// Run-level facts needed to interpret the records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogHeader {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoding: Option<Encoding>,
    pub genes: usize,
    /// Number of generations the run was configured for.
    pub generations: usize,
    pub population_size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub header: RunLogHeader,
    pub records: Vec<LogRecord>,
}

impl RunLog {
    pub fn new(header: RunLogHeader) -> Self {
        Self {
            header,
            records: Vec::new(),
        }
    }

    /// Records that cost a backend call.
    pub fn evaluations(&self) -> impl Iterator<Item = &LogRecord> {
        self.records.iter().filter(|r| !r.cached)
    }

    pub fn backend_calls(&self) -> usize {
        self.evaluations().count()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }
}
