use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pulse_memory::analysis::Weighting;
use pulse_memory_cli::artifacts::genome_cell;
use pulse_memory_cli::{analyze, emit_plots, optimize, sweep_energy, sweep_width, AnalysisOptions, BackendKind, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "pulse-memory", version, about = "Optimise quantum-memory write pulses with a genetic algorithm")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Fitness backend (overrides `backend` in the config).
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut config = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(backend) = self.backend {
            config.backend = backend;
        }
        Ok(config)
    }
}

#[derive(Args)]
struct AnalysisArgs {
    /// Run or sweep directory.
    dir: PathBuf,
    /// Near-optimal threshold as a fraction of the best fitness.
    #[arg(long)]
    fraction: Option<f64>,
    /// Histogram bins per gene.
    #[arg(long)]
    bins: Option<usize>,
    /// Count repeated genomes once (`unique`) or per evaluation.
    #[arg(long, value_parser = parse_weighting)]
    weighting: Option<Weighting>,
}

fn parse_weighting(s: &str) -> Result<Weighting, String> {
    match s {
        "unique" => Ok(Weighting::Unique),
        "evaluations" => Ok(Weighting::Evaluations),
        other => Err(format!("expected unique or evaluations, got `{other}`")),
    }
}

impl AnalysisArgs {
    fn options(&self) -> Result<AnalysisOptions, CliError> {
        let mut options = AnalysisOptions::for_dir(&self.dir)?;
        if let Some(f) = self.fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(CliError::Config(format!("--fraction must be in (0, 1], got {f}")));
            }
            options.fraction = f;
        }
        if let Some(b) = self.bins {
            if b == 0 {
                return Err(CliError::Config("--bins must be at least 1".into()));
            }
            options.bins = b;
        }
        if let Some(w) = self.weighting {
            options.weighting = w;
        }
        Ok(options)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimisation.
    Optimize(RunArgs),
    /// Optimise each encoding at every signal width in `sweep.widths`.
    SweepWidth(RunArgs),
    /// Re-optimise under energy budgets `sweep.alphas` relative to a reference run.
    SweepEnergy {
        #[command(flatten)]
        run: RunArgs,
        /// Directory of a finished `optimize` run.
        #[arg(long)]
        reference: PathBuf,
    },
    /// Print convergence, variance and gene statistics.
    Analyze(AnalysisArgs),
    /// Write plot-ready CSVs into `<dir>/plots`.
    EmitPlots(AnalysisArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Optimize(args) => {
            let o = optimize(&args.load()?, args.out.as_deref())?;
            println!("best fitness: {}", o.summary.fitness);
            println!("best genome: {}", genome_cell(&o.summary.genome));
            if let Some(eta) = o.summary.eta_int {
                println!("efficiency: {eta}");
            }
            println!("backend calls: {}", o.summary.backend_calls);
            println!("artifacts: {}", o.artifacts.dir.display());
        }
        Command::SweepWidth(args) => {
            let s = sweep_width(&args.load()?, args.out.as_deref())?;
            println!("{} widths written to {}", s.rows.len(), s.dir.display());
        }
        Command::SweepEnergy { run, reference } => {
            let s = sweep_energy(&run.load()?, &reference, run.out.as_deref())?;
            println!("{} budgets written to {}", s.rows.len(), s.dir.display());
        }
        Command::Analyze(args) => print!("{}", analyze(&args.dir, &args.options()?)?),
        Command::EmitPlots(args) => {
            for path in emit_plots(&args.dir, &args.options()?)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
