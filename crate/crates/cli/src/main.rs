//! Command-line front end for the MLHY experiment harness.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use mlhy::sim::{
    calibrate, capacity_sweep, construction_from_json, construction_hash, construction_to_json,
    rate_loss_sweep, rcu_sweep, run_fer, CsvTable, ExperimentConfig, Metadata,
};
use mlhy::shaping::MlhyCode;

#[derive(Debug, Parser)]
#[command(name = "mlhy", version, about = "Multilevel polar-coded modulation with Honda-Yamamoto shaping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed from the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores when omitted
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct WithCode {
    #[command(flatten)]
    common: Common,
    /// Construction JSON from `construct`; built on the fly when omitted
    #[arg(long)]
    construction: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate bitchannels and write the construction JSON
    Construct(Common),
    /// Frame error rate over the configured SNR sweep
    Fer(WithCode),
    /// Shaping-only rate loss of MLHY and CCDM over block lengths
    RateLoss(Common),
    /// Mutual information and threshold SNRs
    Capacity(Common),
    /// RCU bound for the encoder-realized distribution
    Rcu(WithCode),
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)
        .with_context(|| format!("reading config {}", common.config.display()))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_code(cfg: &ExperimentConfig, path: Option<&Path>) -> Result<(MlhyCode, String)> {
    let cons = match path {
        Some(p) => construction_from_json(
            &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => cfg.construct()?,
    };
    let hash = construction_hash(&cons)?;
    Ok((cfg.code_for(cons)?, hash))
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n.max(1));
    }
    builder.build()?.install(f)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Construct(common) => {
            let cfg = load(&common)?;
            let cons = with_pool(common.workers, || Ok(cfg.construct()?))?;
            if cons.stats.low_trial_warning {
                eprintln!("warning: {} construction trials is below the reliable minimum", cons.stats.trials);
            }
            emit(common.out.as_deref(), &construction_to_json(&cons)?)
        }
        Command::Fer(args) => {
            let cfg = load(&args.common)?;
            let csv = with_pool(args.common.workers, || {
                let (code, hash) = load_code(&cfg, args.construction.as_deref())?;
                let frames = cfg.rcu.as_ref().map_or(1000, |r| r.calibration_frames);
                let cal = calibrate(&cfg, &code, frames)?;
                let records = run_fer(&cfg, &code, &cal)?;
                let mut meta = Metadata::for_config(&cfg)?;
                meta.push("construction_hash", hash);
                meta.push("payload_bits", code.payload_len());
                meta.push("data_bits", code.construction().sizes.data);
                meta.push("dm_bits", code.construction().sizes.dm);
                meta.push("signal_energy", cal.energy);
                meta.push("realized_entropy_bits", cal.realized.entropy_bits());
                Ok(CsvTable::fer(meta, &records).render())
            })?;
            emit(args.common.out.as_deref(), &csv)
        }
        Command::RateLoss(common) => {
            let cfg = load(&common)?;
            let csv = with_pool(common.workers, || {
                let rows = rate_loss_sweep(&cfg)?;
                Ok(CsvTable::rate_loss(Metadata::for_config(&cfg)?, &rows).render())
            })?;
            emit(common.out.as_deref(), &csv)
        }
        Command::Capacity(common) => {
            let cfg = load(&common)?;
            let csv = with_pool(common.workers, || {
                let report = capacity_sweep(&cfg)?;
                Ok(CsvTable::capacity(Metadata::for_config(&cfg)?, &report).render())
            })?;
            emit(common.out.as_deref(), &csv)
        }
        Command::Rcu(args) => {
            let cfg = load(&args.common)?;
            let csv = with_pool(args.common.workers, || {
                let (code, hash) = load_code(&cfg, args.construction.as_deref())?;
                let rc = cfg.rcu.clone().unwrap_or_default();
                let cal = calibrate(&cfg, &code, rc.calibration_frames)?;
                let rows = rcu_sweep(&cfg, &cal)?;
                let mut meta = Metadata::for_config(&cfg)?;
                meta.push("construction_hash", hash);
                meta.push("rate", format!("{} (CRC overhead not deducted)", cfg.code.rate));
                meta.push("distribution", "encoder-realized");
                meta.push("grid_step_bits", rc.grid_step);
                Ok(CsvTable::rcu(meta, &rows).render())
            })?;
            emit(args.common.out.as_deref(), &csv)
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
