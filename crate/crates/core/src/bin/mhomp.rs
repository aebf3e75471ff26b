use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mhomp::experiments::{self, ExperimentConfig, MetricRow};
use mhomp::Error;

#[derive(Parser)]
#[command(name = "mhomp", version, about = "Hierarchical OMP experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the trial realizations as JSON lines.
    GenDataset(Common),
    /// Single-path delay estimation sweep (MAE).
    RunDelayEst(Common),
    /// 1-D multipath channel estimation sweep (NMSE).
    #[command(name = "run-nmse-1d")]
    RunNmse1d(Common),
    /// 3-D multipath channel estimation sweep (NMSE).
    #[command(name = "run-nmse-3d")]
    RunNmse3d(Common),
    /// Predicted selection multiplications per iteration for each sweep point.
    PredictComplexity(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the per-iteration selection multiplication ceiling.
    #[arg(long)]
    budget: Option<u128>,
}

impl Common {
    fn load(&self) -> mhomp::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::from_path(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(budget) = self.budget {
            cfg.budget = budget;
        }
        Ok(cfg)
    }

    fn writer(&self) -> mhomp::Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn run_sweep<F>(name: &str, args: &Common, f: F) -> mhomp::Result<()>
where
    F: FnOnce(&ExperimentConfig) -> mhomp::Result<Vec<MetricRow>>,
{
    let cfg = args.load()?;
    let (rows, manifest) = experiments::with_manifest(name, &cfg, f)?;
    experiments::write_rows_csv(args.writer()?, &rows)?;
    if let Some(out) = &args.out {
        let path = manifest_path(out);
        serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), &manifest)?;
        eprintln!(
            "{} rows in {:.2} s -> {} ({})",
            rows.len(),
            manifest.wall_time_s,
            out.display(),
            path.display()
        );
    }
    Ok(())
}

fn run(cli: Cli) -> mhomp::Result<()> {
    match cli.command {
        Command::GenDataset(args) => {
            let records = experiments::gen_dataset(&args.load()?)?;
            experiments::write_dataset(args.writer()?, &records)
        }
        Command::RunDelayEst(args) => {
            run_sweep("run-delay-est", &args, experiments::run_delay_estimation)
        }
        Command::RunNmse1d(args) => run_sweep("run-nmse-1d", &args, experiments::run_nmse_1d),
        Command::RunNmse3d(args) => run_sweep("run-nmse-3d", &args, experiments::run_nmse_3d),
        Command::PredictComplexity(args) => {
            let rows = experiments::predict_complexity(&args.load()?)?;
            let mut w = csv::Writer::from_writer(args.writer()?);
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::BudgetExceeded { .. } => 3,
        Error::InvalidConfig(_)
        | Error::InvalidGrid(_)
        | Error::EmptyDomain { .. }
        | Error::InvalidSearch(_)
        | Error::ArityMismatch(_)
        | Error::Json(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
