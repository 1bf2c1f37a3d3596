//! Diagnostics computed from a [`RunLog`]: convergence curves, the spread of
//! explored gene values, the variance of near-optimal solutions, and the
//! efficiency-versus-width fit.
//!
//! Everything here is a pure function of its inputs.

mod fit;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ga::GenerationRecord;
use crate::pulse_codec::Genome;
use crate::runlog::{LogRecord, RunLog};

pub use fit::{bandwidth_fit, bandwidth_model, BandwidthFit};

/// Histogram bins used when none are requested.
pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("run log is empty")]
    EmptyLog,
    #[error("record {index} has {found} genes, expected {expected}")]
    MixedEncodings { index: usize, expected: usize, found: usize },
    #[error("generation index decreases at record {0}")]
    Unordered(usize),
    #[error("fraction must be in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("histogram needs at least one bin")]
    NoBins,
    #[error("all widths are identical; the fit is rank deficient")]
    RankDeficient,
    #[error("fit failed: {0}")]
    Fit(String),
}

fn check_log(log: &RunLog) -> Result<usize, AnalysisError> {
    let first = log.records.first().ok_or(AnalysisError::EmptyLog)?;
    let genes = first.genome.len();
    for (index, pair) in log.records.windows(2).enumerate() {
        if pair[1].generation < pair[0].generation {
            return Err(AnalysisError::Unordered(index + 1));
        }
    }
    for (index, r) in log.records.iter().enumerate() {
        if r.genome.len() != genes {
            return Err(AnalysisError::MixedEncodings {
                index,
                expected: genes,
                found: r.genome.len(),
            });
        }
    }
    Ok(genes)
}

/// First occurrence of every distinct genome, in log order.
fn unique_records(log: &RunLog) -> Vec<&LogRecord> {
    let mut seen: HashSet<&Genome> = HashSet::new();
    log.records.iter().filter(|r| seen.insert(&r.genome)).collect()
}

/// Best-so-far fitness and first-seen genome count for each generation.
pub fn convergence_report(log: &RunLog) -> Result<Vec<GenerationRecord>, AnalysisError> {
    check_log(log)?;
    let mut seen: HashSet<&Genome> = HashSet::new();
    let mut report: Vec<GenerationRecord> = Vec::new();
    let mut best: Option<&LogRecord> = None;
    for r in &log.records {
        if report.last().is_none_or(|g| g.generation != r.generation) {
            report.push(GenerationRecord {
                generation: r.generation,
                best_fitness: f64::NEG_INFINITY,
                new_evaluations: 0,
                best_genome: r.genome.clone(),
            });
        }
        let entry = report.last_mut().expect("pushed above");
        entry.new_evaluations += seen.insert(&r.genome) as usize;
        if best.is_none_or(|b| r.fitness > b.fitness) {
            best = Some(r);
        }
        let b = best.expect("set above");
        entry.best_fitness = b.fitness;
        entry.best_genome = b.genome.clone();
    }
    Ok(report)
}

/// Whether repeated genomes count once or once per log record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[default]
    Unique,
    Evaluations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.counts.len()).map(|i| self.lo + (i as f64 + 0.5) * w).collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Summary of the values one gene took over a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneDistribution {
    /// Zero-based gene index.
    pub gene: usize,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub histogram: Histogram,
}

/// Quantile by linear interpolation between order statistics.
/// `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Equal-width bins over `[min, max]`; the top edge is closed. A
/// zero-width range is widened to `value ± 0.5`.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram, AnalysisError> {
    if bins == 0 {
        return Err(AnalysisError::NoBins);
    }
    let (mut lo, mut hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if values.is_empty() {
        (lo, hi) = (0.0, 1.0);
    } else if lo == hi {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let mut counts = vec![0; bins];
    let width = (hi - lo) / bins as f64;
    for &v in values {
        let bin = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[bin] += 1;
    }
    Ok(Histogram { lo, hi, counts })
}

/// Per-gene distribution of explored values.
pub fn gene_distributions(
    log: &RunLog,
    weighting: Weighting,
    bins: usize,
) -> Result<Vec<GeneDistribution>, AnalysisError> {
    let genes = check_log(log)?;
    let records: Vec<&LogRecord> = match weighting {
        Weighting::Unique => unique_records(log),
        Weighting::Evaluations => log.records.iter().collect(),
    };
    (0..genes)
        .map(|gene| {
            let mut values: Vec<f64> = records.iter().map(|r| r.genome.genes()[gene]).collect();
            values.sort_by(f64::total_cmp);
            Ok(GeneDistribution {
                gene,
                count: values.len(),
                min: values[0],
                max: values[values.len() - 1],
                q1: quantile(&values, 0.25),
                median: quantile(&values, 0.5),
                q3: quantile(&values, 0.75),
                histogram: histogram(&values, bins)?,
            })
        })
        .collect()
}

/// Per-gene population variance over the near-optimal unique genomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub fraction: f64,
    pub best_fitness: f64,
    /// Minimum fitness for a genome to be included.
    pub threshold: f64,
    pub subset_size: usize,
    pub variances: Vec<f64>,
}

/// Variance of each gene over the unique genomes whose fitness is at least
/// `fraction` of the best. For a negative best fitness the threshold is
/// `best − (1 − fraction)·|best|`, which keeps the same relative distance.
pub fn top_fraction_variance(log: &RunLog, fraction: f64) -> Result<VarianceReport, AnalysisError> {
    let genes = check_log(log)?;
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(AnalysisError::BadFraction(fraction));
    }
    let unique = unique_records(log);
    let best = unique.iter().map(|r| r.fitness).fold(f64::NEG_INFINITY, f64::max);
    let threshold = best - (1.0 - fraction) * best.abs();
    let subset: Vec<&LogRecord> = unique.into_iter().filter(|r| r.fitness >= threshold).collect();
    let n = subset.len() as f64;
    let variances = (0..genes)
        .map(|gene| {
            let mean = subset.iter().map(|r| r.genome.genes()[gene]).sum::<f64>() / n;
            subset
                .iter()
                .map(|r| {
                    let d = r.genome.genes()[gene] - mean;
                    d * d
                })
                .sum::<f64>()
                / n
        })
        .collect();
    Ok(VarianceReport {
        fraction,
        best_fitness: best,
        threshold,
        subset_size: subset.len(),
        variances,
    })
}
