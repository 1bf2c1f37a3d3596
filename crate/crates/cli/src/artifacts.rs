//! On-disk layout of a run.
//!
//! ```text
//! <dir>/config.toml      resolved configuration; rerunning it reproduces the run
//! <dir>/runlog.jsonl     header line, then one line per scored population member
//! <dir>/generations.csv  generation,best_fitness,new_evaluations,best_genome
//! <dir>/best.json        best genome and how it performed
//! <dir>/trace_best.csv   time,input_intensity,output_intensity (simulator only)
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use pulse_memory::ga::GenerationRecord;
use pulse_memory::pulse_codec::{Encoding, Genome};
use pulse_memory::runlog::{LogRecord, RunLog, RunLogHeader};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CONFIG_FILE: &str = "config.toml";
pub const RUNLOG_FILE: &str = "runlog.jsonl";
pub const GENERATIONS_FILE: &str = "generations.csv";
pub const BEST_FILE: &str = "best.json";
pub const TRACE_FILE: &str = "trace_best.csv";
pub const WIDTH_SUMMARY_FILE: &str = "summary_width.csv";
pub const ENERGY_SUMMARY_FILE: &str = "summary_energy.csv";
pub const PLOTS_DIR: &str = "plots";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub runlog: PathBuf,
    pub generations: PathBuf,
    pub best: PathBuf,
    pub trace: Option<PathBuf>,
}

impl RunArtifacts {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            config: dir.join(CONFIG_FILE),
            runlog: dir.join(RUNLOG_FILE),
            generations: dir.join(GENERATIONS_FILE),
            best: dir.join(BEST_FILE),
            trace: None,
        }
    }
}

/// One line of `runlog.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LogLine {
    Header(RunLogHeader),
    Record(LogRecord),
}

/// Appends log lines and flushes after every batch.
pub struct RunLogWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl RunLogWriter {
    pub fn create(path: &Path, header: &RunLogHeader) -> Result<Self, CliError> {
        let file = File::create(path).map_err(CliError::io(path))?;
        let mut writer = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        writer.write_line(&LogLine::Header(header.clone()))?;
        writer.flush()?;
        Ok(writer)
    }

    fn write_line(&mut self, line: &LogLine) -> Result<(), CliError> {
        serde_json::to_writer(&mut self.out, line).map_err(|e| CliError::io(&self.path)(e.into()))?;
        self.out.write_all(b"\n").map_err(CliError::io(&self.path))
    }

    pub fn append(&mut self, records: &[LogRecord]) -> Result<(), CliError> {
        for r in records {
            self.write_line(&LogLine::Record(r.clone()))?;
        }
        self.flush()
    }

    fn flush(&mut self) -> Result<(), CliError> {
        self.out.flush().map_err(CliError::io(&self.path))
    }
}

pub fn read_runlog(path: &Path) -> Result<RunLog, CliError> {
    let file = File::open(path).map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
    let mut header = None;
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(CliError::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LogLine = serde_json::from_str(&line)
            .map_err(|e| CliError::Input(format!("{}:{}: {e}", path.display(), n + 1)))?;
        match parsed {
            LogLine::Header(h) if header.is_none() && records.is_empty() => header = Some(h),
            LogLine::Header(_) => {
                return Err(CliError::Input(format!("{}:{}: unexpected header", path.display(), n + 1)));
            }
            LogLine::Record(r) => records.push(r),
        }
    }
    let header = header.ok_or_else(|| CliError::Input(format!("{}: missing header line", path.display())))?;
    Ok(RunLog { header, records })
}

/// Result of one optimisation, stored as `best.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSummary {
    pub encoding: Encoding,
    /// Genome as it sits in the population.
    pub genome: Genome,
    pub fitness: f64,
    /// Renormalisation factor when an energy budget was active.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Genome that was actually decoded and scored (`genome / beta`).
    pub evaluated_genome: Genome,
    /// Area of the evaluated waveform (ns).
    pub area: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_int: Option<f64>,
    pub generations: usize,
    pub backend_calls: usize,
    #[serde(default)]
    pub has_trace: bool,
}

impl BestSummary {
    /// Efficiency when the simulator produced one, otherwise the fitness.
    pub fn efficiency(&self) -> f64 {
        self.eta_int.unwrap_or(self.fitness)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path)(e.into()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(CliError::io(path))
}

pub fn read_best(dir: &Path) -> Result<BestSummary, CliError> {
    let path = dir.join(BEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| {
        CliError::Input(format!(
            "no reference result at {} ({e}); run `pulse-memory optimize` first and pass its output directory",
            path.display()
        ))
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Writes a CSV file with a header row.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let io_err = |e: csv::Error| CliError::io(path)(e.into());
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut out = csv::Writer::from_writer(BufWriter::new(file));
    out.write_record(header).map_err(io_err)?;
    for row in rows {
        out.write_record(&row).map_err(io_err)?;
    }
    out.flush().map_err(CliError::io(path))
}

/// Reads a CSV file written by [`write_csv`]: header and string rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let header = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((header, rows))
}

pub fn genome_cell(genome: &Genome) -> String {
    genome.genes().iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

pub fn write_generations(path: &Path, history: &[GenerationRecord]) -> Result<(), CliError> {
    write_csv(
        path,
        &["generation", "best_fitness", "new_evaluations", "best_genome"],
        history.iter().map(|r| {
            vec![
                r.generation.to_string(),
                r.best_fitness.to_string(),
                r.new_evaluations.to_string(),
                genome_cell(&r.best_genome),
            ]
        }),
    )
}
