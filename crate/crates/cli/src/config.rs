//! TOML run configuration.
//!
//! Only `encoding` is required. Missing GA and decode settings take the
//! defaults of the chosen encoding; [`RunConfig::resolve`] writes them out so
//! the snapshot stored with a run is fully explicit.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use pulse_memory::analysis::{Weighting, DEFAULT_BINS};
use pulse_memory::ga::GaConfig;
use pulse_memory::memory_sim::{
    ExperimentTiming, InstrumentModel, SignalSpec, SimBackend, SimError, SimParams, STABILITY_LIMIT,
};
use pulse_memory::pulse_codec::{DecodeContext, Encoding, TimeWindow};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Maxwell–Bloch memory simulator.
    #[default]
    Sim,
    /// Closed-form test objective.
    Toy,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parents_mating: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tournament_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elitism_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation_probability: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stall_generations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_end: Option<f64>,
    #[serde(default = "one")]
    pub dt_sample: f64,
    #[serde(default)]
    pub smoothing: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for DecodeSection {
    fn default() -> Self {
        Self {
            window_start: None,
            window_end: None,
            dt_sample: 1.0,
            smoothing: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Signal FWHMs for `sweep-width` (ns).
    #[serde(default)]
    pub widths: Vec<f64>,
    /// Energy fractions for `sweep-energy`.
    #[serde(default)]
    pub alphas: Vec<f64>,
    /// Encodings optimised at each width.
    #[serde(default = "both_encodings")]
    pub encodings: Vec<Encoding>,
}

fn both_encodings() -> Vec<Encoding> {
    vec![Encoding::Gaussian, Encoding::Freeform]
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            widths: Vec::new(),
            alphas: Vec::new(),
            encodings: both_encodings(),
        }
    }
}

/// Target of the toy backend: Gaussian genes `(a, f, d)`. Gaussian genomes
/// score `−(a−a*)² − (f−f*)²/6400 − (d−d*)²/3600`; free-form genomes score
/// how well their waveform matches the decoded target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToySection {
    pub target: [f64; 3],
}

impl Default for ToySection {
    fn default() -> Self {
        Self {
            target: [37.0 / 49.0, 42.0, -23.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Fraction of the best fitness that counts as near-optimal.
    pub fraction: f64,
    pub bins: usize,
    pub weighting: Weighting,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            fraction: 0.9,
            bins: DEFAULT_BINS,
            weighting: Weighting::Unique,
        }
    }
}

/// Energy budget applied during `optimize`: `area ≤ alpha · i_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    pub i_max: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub encoding: Encoding,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub backend: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub ga: GaSection,
    #[serde(default)]
    pub decode: DecodeSection,
    #[serde(default)]
    pub sim: SimParams,
    #[serde(default)]
    pub instrument: InstrumentModel,
    #[serde(default)]
    pub timing: ExperimentTiming,
    #[serde(default)]
    pub signal: SignalSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergySection>,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub toy: ToySection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

fn invalid(field: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {message}"))
}

impl RunConfig {
    /// Default configuration for an encoding.
    pub fn new(encoding: Encoding) -> Self {
        Self {
            encoding,
            seed: 0,
            backend: BackendKind::Sim,
            output_dir: None,
            ga: GaSection::default(),
            decode: DecodeSection::default(),
            sim: SimParams::default(),
            instrument: InstrumentModel::default(),
            timing: ExperimentTiming::default(),
            signal: SignalSpec::default(),
            energy: None,
            sweep: SweepSection::default(),
            toy: ToySection::default(),
            analysis: AnalysisSection::default(),
        }
    }

    /// Parses and validates a configuration. Encoding defaults are not filled
    /// in, so the result can still be re-targeted with [`Self::for_encoding`].
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.clone().resolve()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serialises")
    }

    /// The same settings for another encoding, with that encoding's defaults.
    pub fn for_encoding(&self, encoding: Encoding) -> Result<Self, CliError> {
        Self {
            encoding,
            ..self.clone()
        }
        .resolve()
    }

    /// Fills encoding defaults and validates every section.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let defaults = match self.encoding {
            Encoding::Gaussian => GaConfig::gaussian(self.seed),
            Encoding::Freeform => GaConfig::freeform(self.seed),
        };
        let ga = &mut self.ga;
        ga.generations.get_or_insert(defaults.generations);
        ga.population_size.get_or_insert(defaults.population_size);
        ga.parents_mating.get_or_insert(defaults.parents_mating);
        ga.tournament_size.get_or_insert(defaults.tournament_size);
        ga.elitism_size.get_or_insert(defaults.elitism_size);
        ga.mutation_probability.get_or_insert(defaults.mutation_probability);
        let window = self.encoding.default_window();
        self.decode.window_start.get_or_insert(window.start);
        self.decode.window_end.get_or_insert(window.end);
        self.validate()?;
        Ok(self)
    }

    pub fn ga_config(&self) -> GaConfig {
        let ga = &self.ga;
        let fallback = GaConfig::gaussian(self.seed);
        GaConfig {
            genes: self.encoding.gene_count(),
            generations: ga.generations.unwrap_or(fallback.generations),
            population_size: ga.population_size.unwrap_or(fallback.population_size),
            parents_mating: ga.parents_mating.unwrap_or(fallback.parents_mating),
            tournament_size: ga.tournament_size.unwrap_or(fallback.tournament_size),
            elitism_size: ga.elitism_size.unwrap_or(fallback.elitism_size),
            mutation_probability: ga.mutation_probability.unwrap_or(fallback.mutation_probability),
            rng_seed: self.seed,
            stall_generations: ga.stall_generations,
        }
    }

    pub fn decode_context(&self) -> Result<DecodeContext, CliError> {
        let window = self.encoding.default_window();
        let start = self.decode.window_start.unwrap_or(window.start);
        let end = self.decode.window_end.unwrap_or(window.end);
        Ok(DecodeContext {
            encoding: self.encoding,
            window: TimeWindow::new(start, end).map_err(|e| invalid("decode.window_start", e))?,
            dt_sample: self.decode.dt_sample,
            smoothing: self.decode.smoothing,
        })
    }

    pub fn sim_backend(&self) -> Result<SimBackend, CliError> {
        let mut backend = SimBackend::new(self.decode_context()?);
        backend.signal = self.signal;
        backend.timing = self.timing;
        backend.params = self.sim;
        backend.instrument = self.instrument;
        Ok(backend)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.ga_config().validate().map_err(|e| invalid("ga", e))?;

        let d = &self.decode;
        if !(d.dt_sample > 0.0 && d.dt_sample.is_finite()) {
            return Err(invalid("decode.dt_sample", format!("must be positive, got {}", d.dt_sample)));
        }
        if !(d.smoothing >= 0.0 && d.smoothing.is_finite()) {
            return Err(invalid("decode.smoothing", format!("must be non-negative, got {}", d.smoothing)));
        }
        let ctx = self.decode_context()?;
        if ctx.window.duration() < d.dt_sample {
            return Err(invalid("decode.window_end", "window shorter than two samples"));
        }

        let sim_field = |section: &str, e: SimError| match e {
            SimError::InvalidParameter { name, value, reason } => {
                invalid(&format!("{section}.{name}"), format!("{reason} (got {value})"))
            }
            other => invalid(section, other),
        };
        self.sim.validate().map_err(|e| sim_field("sim", e))?;
        self.timing.validate().map_err(|e| sim_field("timing", e))?;
        self.signal.validate().map_err(|e| sim_field("signal", e))?;
        let inst = &self.instrument;
        if !(inst.rise_time >= 0.0 && inst.rise_time.is_finite()) {
            return Err(invalid("instrument.rise_time", format!("must be non-negative, got {}", inst.rise_time)));
        }
        if !(inst.omega_max >= 0.0 && inst.omega_max.is_finite()) {
            return Err(invalid("instrument.omega_max", format!("must be non-negative, got {}", inst.omega_max)));
        }
        // drive amplitudes never exceed 1, so omega_max bounds the Rabi frequency
        let p = &self.sim;
        let rho = p.gamma + p.detuning.abs() + p.optical_depth * p.gamma + inst.omega_max + p.gamma_s;
        if p.dt_int * rho > STABILITY_LIMIT {
            return Err(invalid(
                "sim.dt_int",
                format!(
                    "{} is too large for these rates; use at most {:.4}",
                    p.dt_int,
                    STABILITY_LIMIT / rho
                ),
            ));
        }

        if let Some(energy) = &self.energy {
            if !(energy.i_max > 0.0 && energy.i_max.is_finite()) {
                return Err(invalid("energy.i_max", format!("must be positive, got {}", energy.i_max)));
            }
            if !(energy.alpha > 0.0 && energy.alpha <= 1.0) {
                return Err(invalid("energy.alpha", format!("must be in (0, 1], got {}", energy.alpha)));
            }
        }
        if let Some(w) = self.sweep.widths.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(invalid("sweep.widths", format!("widths must be positive, got {w}")));
        }
        if let Some(a) = self.sweep.alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return Err(invalid("sweep.alphas", format!("alphas must be in (0, 1], got {a}")));
        }
        if self.sweep.encodings.is_empty() {
            return Err(invalid("sweep.encodings", "must not be empty"));
        }
        let toy = self.toy.target;
        if !((0.0..=1.0).contains(&toy[0]) && toy[1] > 0.0 && toy.iter().all(|x| x.is_finite())) {
            return Err(invalid("toy.target", format!("expected a in [0, 1] and f > 0, got {toy:?}")));
        }
        let a = &self.analysis;
        if !(a.fraction > 0.0 && a.fraction <= 1.0) {
            return Err(invalid("analysis.fraction", format!("must be in (0, 1], got {}", a.fraction)));
        }
        if a.bins == 0 {
            return Err(invalid("analysis.bins", "must be at least 1"));
        }
        Ok(())
    }
}

/// Values in first-seen order without repeats, and the repeats dropped.
pub fn dedup_values(values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut seen = HashSet::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for &v in values {
        if seen.insert(v.to_bits()) {
            kept.push(v);
        } else {
            dropped.push(v);
        }
    }
    (kept, dropped)
}
