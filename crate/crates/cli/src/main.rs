//! Command-line front end: `train`, `eval`, `sweep`, `export`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sramnet::harness::report::{read_file, weights_from_text, weights_to_text, write_file};
use sramnet::harness::sweep::{self, Table};
use sramnet::harness::{experiment::run_training, load_dataset, normalize_split, RunReport};
use sramnet::{load_config, Network, SimConfig};

#[derive(Parser, Debug)]
#[command(name = "sramnet", version, about = "SRAM in-memory analog training simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train on a dataset and write run.json, metrics.csv, ledger.csv, weights.txt.
    Train(TrainArgs),
    /// Load a weight snapshot and report accuracy on the seeded test split.
    Eval(EvalArgs),
    /// Parameter sweep written to sweep.csv.
    Sweep(SweepArgs),
    /// Convert a run.json into plot-ready CSV files.
    Export(ExportArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// key = value configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "data/iris.csv")]
    dataset: PathBuf,
    /// Overrides rng_seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Ideal multiplier (exact product, no range limit).
    #[arg(long)]
    ideal: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// weights.txt written by `train`.
    #[arg(long)]
    weights: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SweepKind {
    /// Multiplier worst-case error against A (plus accuracy with --accuracy).
    #[value(name = "A")]
    A,
    /// Functional-read deviation against alpha_nl.
    AlphaNl,
    /// Training outcome against the learning rate.
    Eta,
    /// Functional-read energy for every weight code.
    FrEnergy,
    /// ADC transfer staircase.
    Adc,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    sweep: SweepKind,
    /// Comma-separated sweep values; each sweep has a default set.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// A sweep only: also train at every A and report accuracies.
    #[arg(long)]
    accuracy: bool,
    #[arg(long)]
    epochs: Option<usize>,
    /// Number of input points for the ADC sweep.
    #[arg(long, default_value_t = 601)]
    points: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExportArgs {
    /// run.json written by `train`.
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// Conflicting or inapplicable options; exits with the usage status.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

macro_rules! usage {
    ($($t:tt)*) => {
        return Err(Usage(format!($($t)*)).into())
    };
}

fn config(c: &Common) -> Result<SimConfig> {
    let mut cfg = match &c.config {
        Some(p) => load_config(p)?,
        None => SimConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.rng_seed = s;
    }
    if c.ideal {
        cfg.ideal = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).with_context(|| format!("cannot create output directory {}", p.display()))
}

fn train(a: &TrainArgs) -> Result<()> {
    let cfg = config(&a.common)?;
    let records = load_dataset(&a.common.dataset)?;
    let epochs = a.epochs.unwrap_or(cfg.epochs);
    let start = Instant::now();
    let run = run_training(&cfg, &a.common.dataset.display().to_string(), &records, epochs)?;
    let wall = start.elapsed().as_secs_f64();
    out_dir(&a.out)?;
    let r = &run.report;
    write_file(&a.out.join("run.json"), &r.to_json()?)?;
    write_file(&a.out.join("metrics.csv"), &r.metrics_csv()?)?;
    write_file(&a.out.join("ledger.csv"), &run.network.ledger().to_csv())?;
    let codes = run.network.codes()?;
    write_file(&a.out.join("weights.txt"), &weights_to_text(run.network.topology(), &codes))?;
    let t = &r.training;
    println!(
        "epochs {} (early stop: {}), train accuracy {:.4}, test accuracy {:.4}, after write-back {:.4}/{:.4}",
        t.epochs_run,
        t.stopped_early,
        t.train_accuracy,
        t.test_accuracy,
        t.quantized_train_accuracy,
        t.quantized_test_accuracy
    );
    // wall-clock stays out of the artifacts so they remain reproducible
    eprintln!("wall-clock {wall:.3} s");
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let mut cfg = config(&a.common)?;
    let (topo, codes) = weights_from_text(&read_file(&a.weights)?)?;
    if a.common.config.is_some() && (cfg.layers != topo.layer_sizes() || cfg.bias != topo.bias()) {
        usage!(
            "topology in {} ({:?}, bias {}) conflicts with the config ({:?}, bias {})",
            a.weights.display(),
            topo.layer_sizes(),
            topo.bias(),
            cfg.layers,
            cfg.bias
        );
    }
    cfg.layers = topo.layer_sizes().to_vec();
    cfg.bias = topo.bias();
    let split = normalize_split(&load_dataset(&a.common.dataset)?, cfg.rng_seed)?;
    let net = Network::build_with_codes(&cfg, topo, &codes)?;
    println!("train_accuracy {}", net.accuracy(&split.train)?);
    println!("test_accuracy {}", net.accuracy(&split.test)?);
    Ok(())
}

fn sweep(a: &SweepArgs) -> Result<()> {
    let cfg = config(&a.common)?;
    let epochs = a.epochs.unwrap_or(cfg.epochs);
    let name = a.common.dataset.display().to_string();
    if a.accuracy && a.sweep != SweepKind::A {
        usage!("--accuracy only applies to --sweep A");
    }
    if a.values.is_some() && matches!(a.sweep, SweepKind::FrEnergy | SweepKind::Adc) {
        usage!("--values does not apply to this sweep; it runs over every weight code or --points inputs");
    }
    if a.common.ideal && a.sweep == SweepKind::A {
        usage!("--ideal conflicts with --sweep A: the A sweep needs the non-ideal multiplier");
    }
    let table: Table = match a.sweep {
        SweepKind::A => {
            let v = a.values.clone().unwrap_or(sweep::DEFAULT_A.to_vec());
            let recs = if a.accuracy { Some(load_dataset(&a.common.dataset)?) } else { None };
            sweep::sweep_a(&cfg, &v, recs.as_deref().map(|r| (name.as_str(), r)), epochs)?
        }
        SweepKind::AlphaNl => sweep::sweep_alpha_nl(&cfg, &a.values.clone().unwrap_or_else(sweep::default_alpha_nl)),
        SweepKind::Eta => {
            let v = a.values.clone().unwrap_or(sweep::DEFAULT_ETA.to_vec());
            sweep::sweep_eta(&cfg, &v, &name, &load_dataset(&a.common.dataset)?, epochs)?
        }
        SweepKind::FrEnergy => sweep::sweep_fr_energy(&cfg)?,
        SweepKind::Adc => sweep::sweep_adc(&cfg, a.points),
    };
    out_dir(&a.out)?;
    let path = a.out.join("sweep.csv");
    write_file(&path, &table.to_csv()?)?;
    println!("{} rows written to {}", table.rows.len(), path.display());
    Ok(())
}

fn export(a: &ExportArgs) -> Result<()> {
    let r = RunReport::from_json(&read_file(&a.report)?)
        .with_context(|| format!("{} is not a run report", a.report.display()))?;
    out_dir(&a.out)?;
    write_file(&a.out.join("metrics.csv"), &r.metrics_csv()?)?;
    write_file(&a.out.join("ledger.csv"), &r.ledger.entries.to_csv())?;
    let mut phases = String::from("phase,energy_J,delay_s,count\n");
    for p in &r.ledger.phases {
        phases.push_str(&format!("{},{:e},{:e},{}\n", p.phase, p.energy, p.delay, p.count));
    }
    write_file(&a.out.join("phases.csv"), &phases)?;
    println!("exported metrics.csv, ledger.csv, phases.csv to {}", a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match &cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Export(a) => export(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Usage>() {
                eprintln!("\nFor more information, try '--help'.");
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
