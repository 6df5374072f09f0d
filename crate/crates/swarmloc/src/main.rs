use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swarmloc::bench::{run_geometry_benchmark, run_stepsize_benchmark, GeometryBenchConfig, StepsizeBenchConfig};
use swarmloc::config::{preset, ScenarioConfig, PRESET_NAMES};
use swarmloc::engine::{build_channel, run_scenario};
use swarmloc::output::{
    channel_rows, ensure_dir, write_channel_csv, write_geometry_csv, write_json, write_metrics_csv,
    write_reputation_csv, write_stepsize_csv, RunManifest, Summary,
};
use swarmloc::sweep::{run_sweep, write_sweep, SweepSpec};
use swarmloc_core::channel::default_grid;

/// Multi-UAV mutual localization simulator.
#[derive(Parser)]
#[command(name = "swarmloc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write metrics, summary and manifest.
    Run(RunArgs),
    /// Run the cross product of swept fields and write per-cell and aggregate results.
    Sweep(SweepArgs),
    /// Write distance, mean RSSI, one sampled RSSI and sigma_d per distance.
    ExportChannel(ScenarioArgs),
    /// Run the solver-geometry or step-size benchmark.
    Bench(BenchArgs),
    /// List the built-in presets.
    Presets,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario TOML file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario (see `swarmloc presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; the SWARMLOC_OUT environment variable takes precedence.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Repetition count override.
    #[arg(long)]
    reps: Option<u32>,
    /// Also write the per-tick reputation trace.
    #[arg(long)]
    trace_reputation: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// `field=v1,v2,...` (repeatable), or a TOML file mapping field paths to value arrays.
    #[arg(long, required = true)]
    sweep: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchKind {
    Geometry,
    Stepsize,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(value_enum)]
    kind: BenchKind,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<u32>,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Output directory; the SWARMLOC_OUT environment variable takes precedence.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    std::env::var_os("SWARMLOC_OUT")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .or(flag)
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn load_scenario(args: &ScenarioArgs) -> Result<ScenarioConfig> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ScenarioConfig::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))?
        }
        (None, Some(name)) => match preset(name) {
            Some(cfg) => cfg,
            None => bail!("unknown preset `{name}`; available: {}", PRESET_NAMES.join(", ")),
        },
        (None, None) => bail!("one of --config or --preset is required"),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn load_run(args: &RunArgs) -> Result<ScenarioConfig> {
    let mut cfg = load_scenario(&args.scenario)?;
    if let Some(reps) = args.reps {
        cfg.repetitions = reps;
    }
    cfg.validate().context("invalid scenario")?;
    Ok(cfg)
}

fn write_config(out: &Path, cfg: &ScenarioConfig) -> Result<PathBuf> {
    let path = out.join("config.toml");
    std::fs::write(&path, cfg.to_toml()).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn finish(out: &Path, cfg: &ScenarioConfig, mut outputs: Vec<PathBuf>, started: Instant) -> Result<()> {
    outputs.push(write_config(out, cfg)?);
    let manifest = RunManifest::new(cfg, outputs, started.elapsed().as_secs_f64());
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = load_run(&args)?;
    let out = out_dir(args.scenario.out.clone());
    ensure_dir(&out)?;
    let result = run_scenario(&cfg, 0, args.parallel, args.trace_reputation)?;
    let mut outputs = vec![out.join("metrics.csv"), out.join("summary.json")];
    write_metrics_csv(&outputs[0], &result.records)?;
    let summary = Summary::from_records(&cfg.name, cfg.repetitions, &result.records);
    write_json(&outputs[1], &summary)?;
    if args.trace_reputation {
        let path = out.join("reputation.csv");
        write_reputation_csv(&path, &result.reputation_trace)?;
        outputs.push(path);
    }
    println!("{}: mean error {:.3} m over {} records", cfg.name, summary.mean_err_m, summary.records);
    finish(&out, &cfg, outputs, started)
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = load_run(&args.run)?;
    let spec = match args.sweep.as_slice() {
        [one] if !one.contains('=') => {
            let text = std::fs::read_to_string(one).with_context(|| format!("reading sweep file {one}"))?;
            SweepSpec::from_toml(&text)?
        }
        many => SweepSpec::parse_args(many)?,
    };
    let out = out_dir(args.run.scenario.out.clone());
    ensure_dir(&out)?;
    let results = run_sweep(&cfg, &spec, args.run.parallel, args.run.trace_reputation)?;
    let outputs = write_sweep(&out, &spec, &results)?;
    for r in &results {
        let label: Vec<String> = r.cell.assignments.iter().map(|(f, v)| format!("{f}={v}")).collect();
        println!("cell {:03} [{}]: mean error {:.3} m", r.cell.index, label.join(" "), r.summary.mean_err_m);
    }
    finish(&out, &cfg, outputs, started)
}

fn cmd_export_channel(args: ScenarioArgs) -> Result<()> {
    let cfg = if args.config.is_none() && args.preset.is_none() {
        preset("setup2").expect("built-in preset")
    } else {
        load_scenario(&args)?
    };
    let out = out_dir(args.out);
    ensure_dir(&out)?;
    let channel = build_channel(&cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rows = channel_rows(&channel, &default_grid(), &mut rng)?;
    let path = out.join("channel.csv");
    write_channel_csv(&path, &rows)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let out = out_dir(args.out);
    ensure_dir(&out)?;
    let path = swarmloc::engine::with_parallelism(args.parallel, || -> Result<PathBuf> {
        match args.kind {
            BenchKind::Geometry => {
                let mut cfg = GeometryBenchConfig::default();
                cfg.seed = args.seed.unwrap_or(cfg.seed);
                cfg.repetitions = args.reps.unwrap_or(cfg.repetitions);
                let rows = run_geometry_benchmark(&cfg)?;
                let path = out.join("geometry.csv");
                write_geometry_csv(&path, &rows)?;
                for r in &rows {
                    println!("z ±{:5.2} m: LS {:.3}  L1 {:.3}  GD {:.3}", r.half_z, r.ls, r.l1, r.gd);
                }
                Ok(path)
            }
            BenchKind::Stepsize => {
                let mut cfg = StepsizeBenchConfig::default();
                cfg.scenario.seed = args.seed.unwrap_or(cfg.scenario.seed);
                cfg.scenario.repetitions = args.reps.unwrap_or(cfg.scenario.repetitions);
                let table = run_stepsize_benchmark(&cfg)?;
                let path = out.join("stepsize.csv");
                write_stepsize_csv(&path, &table)?;
                let (alpha, best) = table.best_fixed();
                println!("MAGD mean {:.3} m; best fixed step {alpha} mean {best:.3} m", table.magd_mean());
                Ok(path)
            }
        }
    })?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::ExportChannel(args) => cmd_export_channel(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Presets => {
            PRESET_NAMES.iter().for_each(|name| println!("{name}"));
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
