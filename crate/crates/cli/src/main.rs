use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use noisepair::degrade::{generate_dataset, prepare_source, replay, DatasetRequest, DegradationPlan, DegradeConfig};
use noisepair::stats::{estimate_noise_stats, psnr, ssim};
use noisepair::{load_png, save_png};
use scflow::{parameter_count, Scunet, ScunetConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "noisepair", version, about = "Paired noisy/clean training data synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a paired dataset from a directory of PNG images.
    Generate(GenerateArgs),
    /// Re-execute a manifest on its source image.
    Replay {
        #[arg(long)]
        hq: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Pretty-print a manifest after validating it.
    Inspect {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Fidelity metrics and residual statistics of a pair, as JSON.
    Stats {
        #[arg(long)]
        noisy: PathBuf,
        #[arg(long)]
        clean: PathBuf,
    },
    /// Run the untrained network forward, or print its parameter count.
    Scflow(ScflowArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    pairs_per_image: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct ScflowArgs {
    #[arg(long, required_unless_present = "params")]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, required_unless_present = "params")]
    output: Option<PathBuf>,
    #[arg(long)]
    params: bool,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn generate(args: GenerateArgs) -> Result<()> {
    if args.pairs_per_image == 0 {
        bail!("--pairs-per-image must be at least 1");
    }
    let config = match &args.config {
        Some(path) => DegradeConfig::load(path)?,
        None => DegradeConfig::default(),
    };
    let summary = generate_dataset(&DatasetRequest {
        input_dir: args.input,
        output_dir: args.output,
        master_seed: args.seed,
        pairs_per_image: args.pairs_per_image,
        config,
        workers: args.workers,
    })?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn run_replay(hq: &Path, manifest: &Path, output: &Path) -> Result<()> {
    let bytes = read(manifest)?;
    let plan = DegradationPlan::from_json(&bytes)?;
    let source = prepare_source(load_png(hq)?, &plan)?;
    let pair = replay(&source, &bytes)?;
    std::fs::create_dir_all(output).with_context(|| format!("creating {}", output.display()))?;
    save_png(&pair.noisy, output.join("noisy.png"))?;
    save_png(&pair.clean, output.join("clean.png"))?;
    Ok(())
}

fn stats(noisy: &Path, clean: &Path) -> Result<()> {
    let noisy = load_png(noisy)?;
    let clean = load_png(clean)?;
    let residual = match estimate_noise_stats(&noisy, &clean) {
        Ok(s) => serde_json::to_value(s)?,
        Err(e) => {
            log::warn!("residual statistics unavailable: {e}");
            serde_json::Value::Null
        }
    };
    let ssim = ssim(&noisy, &clean).ok();
    let report = json!({
        "psnr_db": psnr(&noisy, &clean)?,
        "ssim": ssim,
        "residual": residual,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn run_scflow(args: ScflowArgs) -> Result<()> {
    let config = ScunetConfig {
        weight_seed: args.seed,
        ..ScunetConfig::default()
    };
    if args.params {
        println!("{}", parameter_count(&config));
        return Ok(());
    }
    let (Some(input), Some(output)) = (args.input, args.output) else {
        bail!("--input and --output are required without --params");
    };
    let img = load_png(&input)?;
    let img = if img.channels() == 1 { img.gray_to_rgb()? } else { img };
    let out = Scunet::new(config)?.forward(&img)?;
    save_png(&out, &output)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Replay { hq, manifest, output } => run_replay(&hq, &manifest, &output),
        Command::Inspect { manifest } => {
            let plan = DegradationPlan::from_json(&read(&manifest)?)?;
            println!("{}", plan.to_json());
            Ok(())
        }
        Command::Stats { noisy, clean } => stats(&noisy, &clean),
        Command::Scflow(args) => run_scflow(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
