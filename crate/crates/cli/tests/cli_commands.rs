use std::path::Path;
use std::process::Command;

use pulse_memory::pulse_codec::{DecodeContext, Encoding};
use pulse_memory_cli::artifacts::{read_best, read_csv, read_runlog, ENERGY_SUMMARY_FILE, WIDTH_SUMMARY_FILE};
use pulse_memory_cli::commands::{optimize, sweep_energy, sweep_width};
use pulse_memory_cli::{analyze, emit_plots, AnalysisOptions, CliError, RunConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pulse-memory"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn toy(encoding: &str, extra: &str) -> RunConfig {
    RunConfig::from_toml(&format!("encoding = \"{encoding}\"\nbackend = \"toy\"\n{extra}")).unwrap()
}

#[test]
fn gaussian_defaults_stay_within_call_budget() {
    let dir = tempfile::tempdir().unwrap();
    let o = optimize(&toy("gaussian", ""), Some(dir.path())).unwrap();
    assert_eq!(o.summary.generations, 25);
    assert!(o.summary.backend_calls <= 60 + 55 * 24);
    let log = read_runlog(&o.artifacts.runlog).unwrap();
    assert_eq!(log.backend_calls(), o.summary.backend_calls);
    let (_, rows) = read_csv(&o.artifacts.generations).unwrap();
    assert_eq!(rows.len(), 25);
}

#[test]
fn freeform_defaults_record_fifty_generations() {
    let dir = tempfile::tempdir().unwrap();
    let o = optimize(&toy("freeform", ""), Some(dir.path())).unwrap();
    let (header, rows) = read_csv(&o.artifacts.generations).unwrap();
    assert_eq!(header, ["generation", "best_fitness", "new_evaluations", "best_genome"]);
    assert_eq!(rows.len(), 50);
}

#[test]
fn repeated_runs_write_identical_logs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let config = toy("gaussian", "seed = 12\n[ga]\ngenerations = 6");
    optimize(&config, Some(a.path())).unwrap();
    // rerun from the stored snapshot rather than the original config
    let snapshot = RunConfig::load(&a.path().join("config.toml")).unwrap();
    optimize(&snapshot, Some(b.path())).unwrap();
    for file in ["runlog.jsonl", "generations.csv", "best.json", "config.toml"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file} differs");
    }
}

#[test]
fn simulator_run_writes_trace_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig::from_toml(
        "encoding = \"freeform\"\n[ga]\ngenerations = 2\npopulation_size = 6\nparents_mating = 2\ntournament_size = 2\nelitism_size = 1",
    )
    .unwrap();
    let o = optimize(&config, Some(dir.path())).unwrap();
    let eta = o.summary.eta_int.unwrap();
    assert!((0.0..=1.0).contains(&eta));
    assert!((eta - o.summary.fitness).abs() < 1e-12);
    let trace = o.artifacts.trace.unwrap();
    let (header, rows) = read_csv(&trace).unwrap();
    assert_eq!(header, ["time", "input_intensity", "output_intensity"]);
    assert!(rows.len() > 1000);

    let options = AnalysisOptions::for_dir(dir.path()).unwrap();
    let files = emit_plots(dir.path(), &options).unwrap();
    let names: Vec<_> = files.iter().map(|p| p.file_name().unwrap().to_str().unwrap()).collect();
    assert_eq!(names, ["convergence.csv", "violin.csv", "distribution.csv", "variance.csv", "traces.csv"]);

    let (_, convergence) = read_csv(&dir.path().join("plots/convergence.csv")).unwrap();
    assert_eq!(convergence.len(), 2);
    let (_, violin) = read_csv(&dir.path().join("plots/violin.csv")).unwrap();
    let genes: std::collections::BTreeSet<usize> = violin.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(genes, (1..=16).collect());

    let before: Vec<_> = files.iter().map(|p| std::fs::read(p).unwrap()).collect();
    emit_plots(dir.path(), &options).unwrap();
    let after: Vec<_> = files.iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert_eq!(before, after);

    let report = analyze(dir.path(), &options).unwrap();
    assert!(report.contains("generations: 2"), "{report}");
}

#[test]
fn width_sweep_summarises_each_width_once() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy(
        "gaussian",
        "[ga]\ngenerations = 3\npopulation_size = 10\nparents_mating = 4\ntournament_size = 3\nelitism_size = 2\n[sweep]\nwidths = [3.8, 8.9, 18.0, 31.0, 41.0, 43.0, 18.0]",
    );
    let s = sweep_width(&config, Some(dir.path())).unwrap();
    assert_eq!(s.total, 12);
    let (header, rows) = read_csv(&dir.path().join(WIDTH_SUMMARY_FILE)).unwrap();
    assert_eq!(header, ["fwhm", "eta_gaussian", "eta_freeform"]);
    assert_eq!(rows.len(), 6);
    assert!(dir.path().join("fwhm_3.8/freeform/runlog.jsonl").exists());

    // per-run seeds differ between entries
    let a = read_runlog(&dir.path().join("fwhm_3.8/gaussian/runlog.jsonl")).unwrap();
    let b = read_runlog(&dir.path().join("fwhm_8.9/gaussian/runlog.jsonl")).unwrap();
    assert_ne!(a.header.seed, b.header.seed);

    let files = emit_plots(dir.path(), &AnalysisOptions::for_dir(dir.path()).unwrap()).unwrap();
    assert!(files.iter().any(|p| p.ends_with("bandwidth_fit.csv")));
}

#[test]
fn single_width_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy("gaussian", "[ga]\ngenerations = 2\n[sweep]\nwidths = [18.0]\nencodings = [\"gaussian\"]");
    sweep_width(&config, Some(dir.path())).unwrap();
    let (header, rows) = read_csv(&dir.path().join(WIDTH_SUMMARY_FILE)).unwrap();
    assert_eq!(header, ["fwhm", "eta_gaussian"]);
    assert_eq!(rows.len(), 1);
}

#[test]
fn energy_sweep_respects_every_budget() {
    let reference = tempfile::tempdir().unwrap();
    let sweep = tempfile::tempdir().unwrap();
    let config = toy(
        "freeform",
        "[ga]\ngenerations = 4\npopulation_size = 12\nparents_mating = 4\ntournament_size = 3\nelitism_size = 2\n[sweep]\nalphas = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]",
    );
    optimize(&config, Some(reference.path())).unwrap();
    let s = sweep_energy(&config, reference.path(), Some(sweep.path())).unwrap();
    assert_eq!(s.rows.len(), 7);

    let best = read_best(reference.path()).unwrap();
    let decode = DecodeContext::new(Encoding::Freeform);
    let i_max = decode.area(&best.evaluated_genome).unwrap();
    let (_, rows) = read_csv(&sweep.path().join(ENERGY_SUMMARY_FILE)).unwrap();
    for row in rows {
        let alpha: f64 = row[0].parse().unwrap();
        let area: f64 = row[2].parse().unwrap();
        assert!(area <= alpha * i_max * (1.0 + 1e-6), "alpha {alpha}: {area}");
    }
}

#[test]
fn energy_sweep_needs_a_reference_run() {
    let empty = tempfile::tempdir().unwrap();
    let config = toy("gaussian", "[sweep]\nalphas = [0.5]");
    let err = sweep_energy(&config, empty.path(), Some(empty.path())).unwrap_err();
    assert!(matches!(err, CliError::Input(_)));
    assert!(err.to_string().contains("optimize"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let good = write_config(dir.path(), "good.toml", "encoding = \"gaussian\"\nbackend = \"toy\"\n[ga]\ngenerations = 2\n[sweep]\nalphas = [0.5]");
    let status = bin().args(["optimize", "--config"]).arg(&good).arg("--out").arg(dir.path().join("ok")).status().unwrap();
    assert_eq!(status.code(), Some(0));

    let bad = write_config(dir.path(), "bad.toml", "encoding = \"gaussian\"\n[ga]\npopulaton_size = 3");
    let output = bin().args(["optimize", "--config"]).arg(&bad).arg("--out").arg(dir.path().join("bad")).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("populaton_size"));

    // a dark signal makes every efficiency undefined
    let dark = write_config(
        dir.path(),
        "dark.toml",
        "encoding = \"gaussian\"\n[signal]\namplitude = 0.0\n[ga]\ngenerations = 2\npopulation_size = 4\nparents_mating = 2\ntournament_size = 2\nelitism_size = 1",
    );
    let out = dir.path().join("dark");
    let status = bin().args(["optimize", "--config"]).arg(&dark).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(read_runlog(&out.join("runlog.jsonl")).is_ok());

    let sweep = write_config(
        dir.path(),
        "sweep.toml",
        "encoding = \"gaussian\"\n[signal]\namplitude = 0.0\n[ga]\ngenerations = 2\npopulation_size = 4\nparents_mating = 2\ntournament_size = 2\nelitism_size = 1\n[sweep]\nwidths = [10.0]\nencodings = [\"gaussian\"]",
    );
    let status = bin().args(["sweep-width", "--config"]).arg(&sweep).arg("--out").arg(dir.path().join("sw")).status().unwrap();
    assert_eq!(status.code(), Some(3));

    let output = bin().args(["sweep-energy", "--config"]).arg(&good).arg("--reference").arg(dir.path().join("nowhere")).arg("--out").arg(dir.path().join("se")).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("pulse-memory optimize"));

    let output = bin().args(["emit-plots"]).arg(dir.path().join("nowhere")).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", "encoding = \"gaussian\"\nbackend = \"toy\"\nseed = 1\n[ga]\ngenerations = 2");
    let out = dir.path().join("run");
    let status = bin()
        .args(["optimize", "--seed", "99", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(read_runlog(&out.join("runlog.jsonl")).unwrap().header.seed, 99);
    let snapshot = RunConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(snapshot.seed, 99);
}
