use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::{info, warn};
use pulse_memory::analysis::{
    bandwidth_fit, convergence_report, gene_distributions, top_fraction_variance, BandwidthFit, Weighting,
};
use pulse_memory::fitness::{
    internal_efficiency, EnergyConstrainedBackend, EnergyConstraint, FitnessBackend, FnBackend, WaveformMatchBackend,
};
use pulse_memory::ga::{self, RunFailure};
use pulse_memory::pulse_codec::{DecodeContext, Encoding, GaussianGenome};
use pulse_memory::runlog::RunLogHeader;
use sha2::{Digest, Sha256};

use crate::artifacts::{
    self, genome_cell, read_best, read_csv, read_runlog, write_csv, write_generations, write_json, BestSummary,
    RunArtifacts, RunLogWriter, ENERGY_SUMMARY_FILE, PLOTS_DIR, TRACE_FILE, WIDTH_SUMMARY_FILE,
};
use crate::config::{dedup_values, BackendKind, EnergySection, RunConfig};
use crate::error::CliError;

/// Objective selected by the configuration.
fn objective(config: &RunConfig, decode: DecodeContext) -> Result<Box<dyn FitnessBackend>, CliError> {
    Ok(match (config.backend, config.encoding) {
        (BackendKind::Sim, _) => Box::new(config.sim_backend()?),
        (BackendKind::Toy, Encoding::Gaussian) => {
            let [a, f, d] = config.toy.target;
            Box::new(FnBackend(move |g: &[f64]| {
                -(g[0] - a).powi(2) - (g[1] - f).powi(2) / 6400.0 - (g[2] - d).powi(2) / 3600.0
            }))
        }
        (BackendKind::Toy, Encoding::Freeform) => {
            let [a, f, d] = config.toy.target;
            let target = GaussianGenome {
                amplitude: a,
                fwhm: f,
                delay: d,
            };
            let wf = pulse_memory::pulse_codec::decode_gaussian(&target, &decode.window, decode.dt_sample)
                .map_err(|e| CliError::Config(format!("toy.target: {e}")))?;
            Box::new(WaveformMatchBackend::new(decode, wf).map_err(|e| CliError::Config(format!("toy.target: {e}")))?)
        }
    })
}

fn output_dir(config: &RunConfig, out: Option<&Path>) -> Result<PathBuf, CliError> {
    out.map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| CliError::Config("output_dir: not set; pass --out or set output_dir".into()))
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub artifacts: RunArtifacts,
    pub summary: BestSummary,
}

/// Runs one optimisation and writes its artifacts to `out` (or the
/// configured `output_dir`).
pub fn optimize(config: &RunConfig, out: Option<&Path>) -> Result<OptimizeOutcome, CliError> {
    let config = config.clone().resolve()?;
    let dir = output_dir(&config, out)?;
    std::fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    let mut artifacts = RunArtifacts::in_dir(&dir);
    std::fs::write(&artifacts.config, config.to_toml()).map_err(CliError::io(&artifacts.config))?;

    let decode = config.decode_context()?;
    let space = config.encoding.space();
    let ga_config = config.ga_config();
    let inner = objective(&config, decode)?;
    let constraint = config
        .energy
        .map(|e| EnergyConstraint::new(e.i_max, e.alpha))
        .transpose()
        .map_err(|e| CliError::Config(format!("energy: {e}")))?;
    let constrained = constraint.map(|constraint| EnergyConstrainedBackend {
        inner: inner.as_ref(),
        constraint,
        decode,
    });
    let backend: &dyn FitnessBackend = match &constrained {
        Some(c) => c,
        None => inner.as_ref(),
    };

    let header = RunLogHeader {
        encoding: Some(config.encoding),
        genes: ga_config.genes,
        generations: ga_config.generations,
        population_size: ga_config.population_size,
        seed: ga_config.rng_seed,
    };
    let mut writer = RunLogWriter::create(&artifacts.runlog, &header)?;
    let mut written = 0;
    let mut write_error = None;
    let result = ga::run_with_observer(&space, backend, &ga_config, |record, records| {
        info!("generation {} best {} new {}", record.generation, record.best_fitness, record.new_evaluations);
        written += records.len();
        writer.append(records).map_err(|e| {
            let io = std::io::Error::other(e.to_string());
            write_error = Some(e);
            io
        })
    });

    let outcome = match result {
        Ok(outcome) => outcome,
        Err(RunFailure::Backend {
            generation,
            source,
            history,
            log,
        }) => {
            writer.append(&log.records[written..])?;
            write_generations(&artifacts.generations, &history)?;
            return Err(CliError::Backend(format!(
                "generation {generation}: {source} (partial log kept in {})",
                artifacts.runlog.display()
            )));
        }
        Err(RunFailure::Observer(..)) => return Err(write_error.expect("observer failures come from the writer")),
        Err(RunFailure::Config(e)) => return Err(CliError::Config(format!("ga: {e}"))),
    };
    write_generations(&artifacts.generations, &outcome.history)?;

    let best = &outcome.best;
    let fitness = best.fitness.expect("best individual is evaluated");
    let beta = outcome
        .log
        .records
        .iter()
        .find(|r| r.genome == best.genome)
        .and_then(|r| r.beta);
    let evaluated = match beta {
        Some(beta) => config.encoding.scale_amplitude(&best.genome, beta),
        None => best.genome.clone(),
    };
    let area = decode.area(&evaluated).map_err(|e| CliError::Backend(e.to_string()))?;

    let mut eta_int = None;
    if config.backend == BackendKind::Sim {
        let sim = config.sim_backend()?;
        let trace = sim.simulate(&evaluated).map_err(|e| CliError::Backend(e.to_string()))?;
        eta_int = Some(
            internal_efficiency(&trace, &sim.timing)
                .map_err(|e| CliError::Backend(e.to_string()))?
                .eta_int,
        );
        let path = dir.join(TRACE_FILE);
        let file = File::create(&path).map_err(CliError::io(&path))?;
        trace.write_csv(BufWriter::new(file)).map_err(CliError::io(&path))?;
        artifacts.trace = Some(path);
    }

    let summary = BestSummary {
        encoding: config.encoding,
        genome: best.genome.clone(),
        fitness,
        beta,
        evaluated_genome: evaluated,
        area,
        eta_int,
        generations: outcome.history.len(),
        backend_calls: outcome.backend_calls,
        has_trace: artifacts.trace.is_some(),
    };
    write_json(&artifacts.best, &summary)?;
    Ok(OptimizeOutcome { artifacts, summary })
}

/// `root + H(key, value, encoding)`, where `H` is the first eight bytes of
/// a SHA-256 digest. Each sweep entry gets its own reproducible seed.
pub fn sweep_seed(root: u64, key: &str, value: f64, encoding: Encoding) -> u64 {
    let digest = Sha256::digest(format!("{key}={value}:{encoding}").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    root.wrapping_add(u64::from_le_bytes(bytes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WidthRow {
    pub fwhm: f64,
    /// One entry per configured encoding; `None` when that run failed.
    pub eta: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome<R> {
    pub dir: PathBuf,
    pub rows: Vec<R>,
    pub failed: usize,
    pub total: usize,
}

fn finish_sweep<R>(outcome: SweepOutcome<R>) -> Result<SweepOutcome<R>, CliError> {
    if outcome.failed > 0 {
        return Err(CliError::PartialSweep {
            failed: outcome.failed,
            total: outcome.total,
        });
    }
    Ok(outcome)
}

/// Optimises every configured encoding at every signal width and writes
/// `summary_width.csv`. Failed runs are logged and left blank.
pub fn sweep_width(config: &RunConfig, out: Option<&Path>) -> Result<SweepOutcome<WidthRow>, CliError> {
    config.clone().resolve()?;
    let dir = output_dir(config, out)?;
    if config.sweep.widths.is_empty() {
        return Err(CliError::Config("sweep.widths: must not be empty for sweep-width".into()));
    }
    let (widths, dropped) = dedup_values(&config.sweep.widths);
    if !dropped.is_empty() {
        warn!("ignoring duplicate widths {dropped:?}");
    }
    std::fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;

    let encodings = config.sweep.encodings.clone();
    let mut rows = Vec::new();
    let mut failed = 0;
    for &fwhm in &widths {
        let mut eta = Vec::new();
        for &encoding in &encodings {
            let mut run = config.for_encoding(encoding)?;
            run.signal.fwhm = fwhm;
            run.seed = sweep_seed(config.seed, "fwhm", fwhm, encoding);
            let run_dir = dir.join(format!("fwhm_{fwhm}")).join(encoding.name());
            match optimize(&run, Some(&run_dir)) {
                Ok(o) => {
                    info!("fwhm {fwhm} {encoding}: eta {}", o.summary.efficiency());
                    eta.push(Some(o.summary.efficiency()));
                }
                Err(e) => {
                    log::error!("fwhm {fwhm} {encoding}: {e}");
                    failed += 1;
                    eta.push(None);
                }
            }
        }
        rows.push(WidthRow { fwhm, eta });
    }

    let mut header = vec!["fwhm".to_string()];
    header.extend(encodings.iter().map(|e| format!("eta_{e}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        &dir.join(WIDTH_SUMMARY_FILE),
        &header,
        rows.iter().map(|r| {
            std::iter::once(r.fwhm.to_string())
                .chain(r.eta.iter().map(|e| e.map_or(String::new(), |v| v.to_string())))
                .collect()
        }),
    )?;
    finish_sweep(SweepOutcome {
        dir,
        rows,
        failed,
        total: widths.len() * encodings.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRow {
    pub alpha: f64,
    pub eta: Option<f64>,
    pub area: Option<f64>,
    pub area_ratio: Option<f64>,
    pub beta: Option<f64>,
}

/// Re-optimises under the budget `alpha · i_max` for each configured alpha,
/// where `i_max` is the area of the best waveform stored in `reference`.
pub fn sweep_energy(config: &RunConfig, reference: &Path, out: Option<&Path>) -> Result<SweepOutcome<EnergyRow>, CliError> {
    let config = config.clone().resolve()?;
    let dir = output_dir(&config, out)?;
    if config.sweep.alphas.is_empty() {
        return Err(CliError::Config("sweep.alphas: must not be empty for sweep-energy".into()));
    }
    let best = read_best(reference)?;
    if best.encoding != config.encoding {
        return Err(CliError::Config(format!(
            "encoding: reference run used {} but the config asks for {}",
            best.encoding, config.encoding
        )));
    }
    let i_max = config
        .decode_context()?
        .area(&best.evaluated_genome)
        .map_err(|e| CliError::Input(format!("reference genome: {e}")))?;
    if i_max <= 0.0 {
        return Err(CliError::Input("reference waveform has zero area".into()));
    }
    let (alphas, dropped) = dedup_values(&config.sweep.alphas);
    if !dropped.is_empty() {
        warn!("ignoring duplicate alphas {dropped:?}");
    }
    std::fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    write_json(
        &dir.join("reference.json"),
        &serde_json::json!({ "reference": reference, "i_max": i_max, "encoding": config.encoding }),
    )?;

    let mut rows = Vec::new();
    let mut failed = 0;
    for &alpha in &alphas {
        let mut run = config.clone();
        run.energy = Some(EnergySection { i_max, alpha });
        run.seed = sweep_seed(config.seed, "alpha", alpha, config.encoding);
        let run_dir = dir.join(format!("alpha_{alpha}"));
        match optimize(&run, Some(&run_dir)) {
            Ok(o) => {
                info!("alpha {alpha}: eta {}", o.summary.efficiency());
                rows.push(EnergyRow {
                    alpha,
                    eta: Some(o.summary.efficiency()),
                    area: Some(o.summary.area),
                    area_ratio: Some(o.summary.area / i_max),
                    beta: o.summary.beta,
                });
            }
            Err(e) => {
                log::error!("alpha {alpha}: {e}");
                failed += 1;
                rows.push(EnergyRow {
                    alpha,
                    eta: None,
                    area: None,
                    area_ratio: None,
                    beta: None,
                });
            }
        }
    }
    let cell = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    write_csv(
        &dir.join(ENERGY_SUMMARY_FILE),
        &["alpha", "eta", "area", "area_ratio", "beta"],
        rows.iter()
            .map(|r| vec![r.alpha.to_string(), cell(r.eta), cell(r.area), cell(r.area_ratio), cell(r.beta)]),
    )?;
    let total = alphas.len();
    finish_sweep(SweepOutcome { dir, rows, failed, total })
}

/// Knobs of the log analyses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub fraction: f64,
    pub bins: usize,
    pub weighting: Weighting,
}

impl AnalysisOptions {
    /// Settings from the run's config snapshot, or the defaults.
    pub fn for_dir(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(artifacts::CONFIG_FILE);
        let section = if path.exists() {
            RunConfig::load(&path)?.analysis
        } else {
            Default::default()
        };
        Ok(Self {
            fraction: section.fraction,
            bins: section.bins,
            weighting: section.weighting,
        })
    }
}

/// `(encoding, fit)` for every encoding column of a width summary.
fn width_fits(path: &Path) -> Result<Vec<(String, Result<BandwidthFit, String>)>, CliError> {
    let (header, rows) = read_csv(path)?;
    let parse = |s: &str| -> Result<Option<f64>, CliError> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse()
            .map(Some)
            .map_err(|e| CliError::Input(format!("{}: bad number `{s}`: {e}", path.display())))
    };
    let mut fits = Vec::new();
    for (col, name) in header.iter().enumerate().skip(1) {
        let mut points = Vec::new();
        for row in &rows {
            let fwhm = parse(&row[0])?;
            if let (Some(fwhm), Some(eta)) = (fwhm, parse(&row[col])?) {
                points.push((fwhm, eta));
            }
        }
        let encoding = name.strip_prefix("eta_").unwrap_or(name).to_string();
        fits.push((encoding, bandwidth_fit(&points).map_err(|e| e.to_string())));
    }
    Ok(fits)
}

/// Human-readable report on a run or width-sweep directory.
pub fn analyze(dir: &Path, options: &AnalysisOptions) -> Result<String, CliError> {
    use std::fmt::Write;
    let mut report = String::new();
    let runlog = dir.join(artifacts::RUNLOG_FILE);
    let summary = dir.join(WIDTH_SUMMARY_FILE);
    if !runlog.exists() && !summary.exists() {
        return Err(CliError::Input(format!(
            "{} holds neither {} nor {}",
            dir.display(),
            artifacts::RUNLOG_FILE,
            WIDTH_SUMMARY_FILE
        )));
    }
    let analysis_err = |e: pulse_memory::analysis::AnalysisError| CliError::Input(format!("{}: {e}", runlog.display()));
    if runlog.exists() {
        let log = read_runlog(&runlog)?;
        let curve = convergence_report(&log).map_err(analysis_err)?;
        let last = curve.last().expect("non-empty log");
        writeln!(report, "generations: {}", curve.len()).ok();
        writeln!(report, "backend calls: {}", log.backend_calls()).ok();
        writeln!(report, "best fitness: {}", last.best_fitness).ok();
        writeln!(report, "best genome: {}", genome_cell(&last.best_genome)).ok();
        let variance = top_fraction_variance(&log, options.fraction).map_err(analysis_err)?;
        writeln!(
            report,
            "solutions within {} of best: {} (threshold {})",
            options.fraction, variance.subset_size, variance.threshold
        )
        .ok();
        let dists = gene_distributions(&log, options.weighting, options.bins).map_err(analysis_err)?;
        writeln!(report, "gene  variance  min  q1  median  q3  max").ok();
        for (d, v) in dists.iter().zip(&variance.variances) {
            writeln!(
                report,
                "{}  {v:.6}  {:.4}  {:.4}  {:.4}  {:.4}  {:.4}",
                d.gene + 1,
                d.min,
                d.q1,
                d.median,
                d.q3,
                d.max
            )
            .ok();
        }
    }
    if summary.exists() {
        for (encoding, fit) in width_fits(&summary)? {
            match fit {
                Ok(f) => writeln!(
                    report,
                    "{encoding}: eta0 {:.4}, bandwidth {:.4} /ns, residual {:.3e}",
                    f.eta0, f.gamma_fit, f.residual_norm
                ),
                Err(e) => writeln!(report, "{encoding}: no fit ({e})"),
            }
            .ok();
        }
    }
    Ok(report)
}

/// Writes plot-ready CSVs into `<dir>/plots`. Returns the files written.
/// Everything that can be produced is written before missing inputs are
/// reported together.
pub fn emit_plots(dir: &Path, options: &AnalysisOptions) -> Result<Vec<PathBuf>, CliError> {
    let plots = dir.join(PLOTS_DIR);
    let runlog = dir.join(artifacts::RUNLOG_FILE);
    let summary = dir.join(WIDTH_SUMMARY_FILE);
    let mut written = Vec::new();
    let mut problems = Vec::new();

    if !runlog.exists() && !summary.exists() {
        return Err(CliError::Input(format!(
            "missing inputs in {}: {} (run) or {} (width sweep)",
            dir.display(),
            artifacts::RUNLOG_FILE,
            WIDTH_SUMMARY_FILE
        )));
    }
    std::fs::create_dir_all(&plots).map_err(CliError::io(&plots))?;

    if runlog.exists() {
        let log = read_runlog(&runlog)?;
        let err = |e: pulse_memory::analysis::AnalysisError| CliError::Input(format!("{}: {e}", runlog.display()));

        let path = plots.join("convergence.csv");
        let curve = convergence_report(&log).map_err(err)?;
        write_csv(
            &path,
            &["generation", "best_fitness", "new_evaluations"],
            curve.iter().map(|r| {
                vec![r.generation.to_string(), r.best_fitness.to_string(), r.new_evaluations.to_string()]
            }),
        )?;
        written.push(path);

        let dists = gene_distributions(&log, options.weighting, options.bins).map_err(err)?;
        let path = plots.join("violin.csv");
        write_csv(
            &path,
            &["gene", "bin_center", "count"],
            dists.iter().flat_map(|d| {
                d.histogram
                    .bin_centers()
                    .into_iter()
                    .zip(d.histogram.counts.clone())
                    .map(move |(c, n)| vec![(d.gene + 1).to_string(), c.to_string(), n.to_string()])
            }),
        )?;
        written.push(path);

        let path = plots.join("distribution.csv");
        write_csv(
            &path,
            &["gene", "count", "min", "q1", "median", "q3", "max"],
            dists.iter().map(|d| {
                vec![
                    (d.gene + 1).to_string(),
                    d.count.to_string(),
                    d.min.to_string(),
                    d.q1.to_string(),
                    d.median.to_string(),
                    d.q3.to_string(),
                    d.max.to_string(),
                ]
            }),
        )?;
        written.push(path);

        let variance = top_fraction_variance(&log, options.fraction).map_err(err)?;
        let path = plots.join("variance.csv");
        write_csv(
            &path,
            &["gene", "variance", "subset_size", "threshold", "best_fitness"],
            variance.variances.iter().enumerate().map(|(g, v)| {
                vec![
                    (g + 1).to_string(),
                    v.to_string(),
                    variance.subset_size.to_string(),
                    variance.threshold.to_string(),
                    variance.best_fitness.to_string(),
                ]
            }),
        )?;
        written.push(path);

        let wants_trace = read_best(dir).map(|b| b.has_trace).unwrap_or(true);
        let trace = dir.join(TRACE_FILE);
        if trace.exists() {
            let path = plots.join("traces.csv");
            std::fs::copy(&trace, &path).map_err(CliError::io(&path))?;
            written.push(path);
        } else if wants_trace {
            problems.push(trace.display().to_string());
        }
    }

    if summary.exists() {
        let path = plots.join("bandwidth_fit.csv");
        let fits = width_fits(&summary)?;
        write_csv(
            &path,
            &["encoding", "eta0", "gamma_fit", "residual_norm", "points", "error"],
            fits.iter().map(|(encoding, fit)| match fit {
                Ok(f) => vec![
                    encoding.clone(),
                    f.eta0.to_string(),
                    f.gamma_fit.to_string(),
                    f.residual_norm.to_string(),
                    f.points.len().to_string(),
                    String::new(),
                ],
                Err(e) => vec![encoding.clone(), String::new(), String::new(), String::new(), String::new(), e.clone()],
            }),
        )?;
        written.push(path);
    }

    if !problems.is_empty() {
        return Err(CliError::Input(format!("missing files: {}", problems.join(", "))));
    }
    Ok(written)
}
