use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sphinv_cli::config::RunConfig;
use sphinv_cli::{artifacts, exit_code, report, run, UsageError};
use sphinv_core::io::{load_pointcloud, NativeCloud};
use sphinv_model::checkpoint::{Checkpoint, PairRole};
use sphinv_model::inversion::{invert, AblationMode, InversionConfig};

#[derive(Parser)]
#[command(name = "sphinv", version, about = "Point-cloud GAN inversion: training, inversion and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Adversarially train the generator and discriminator.
    TrainGan {
        #[command(flatten)]
        common: Common,
        /// Resume from this checkpoint; iteration numbering continues.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Fit the encoder variants (Step 1) against a trained generator.
    TrainEncoders {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Variants to train; defaults to the config's `training.encoders`.
        #[arg(long = "encoder", value_parser = parse_role)]
        encoders: Vec<PairRole>,
        /// Start each encoder from the same-role encoder in this checkpoint
        /// instead of random weights.
        #[arg(long)]
        init_encoders: Option<PathBuf>,
    },
    /// Invert one target cloud (xyz, ply or pinv).
    Invert {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, value_parser = parse_mode, default_value = "full")]
        mode: AblationMode,
    },
    /// Invert the test split under each mode and tabulate the metrics.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long = "mode", value_parser = parse_mode)]
        modes: Vec<AblationMode>,
        #[arg(long, value_enum, default_value = "cd")]
        metric: Metric,
    },
    /// Step-1 reconstruction quality of the graph-conv and discriminator-backed encoders.
    CompareEncoders {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// All stages in sequence: train-gan, train-encoders, evaluate, compare-encoders.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long = "mode", value_parser = parse_mode)]
        modes: Vec<AblationMode>,
        #[arg(long, value_enum, default_value = "cd")]
        metric: Metric,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed of the stage being run.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Cd,
    Emd,
    Both,
}

fn parse_mode(s: &str) -> Result<AblationMode, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_role(s: &str) -> Result<PairRole, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { sphinv_cli::EXIT_USAGE as u8 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    match &common.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    }
}

fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.is_file() {
        return Err(UsageError(format!("checkpoint {} does not exist", path.display())).into());
    }
    Checkpoint::read(path).with_context(|| format!("reading checkpoint {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn default_modes(modes: Vec<AblationMode>) -> Vec<AblationMode> {
    if modes.is_empty() {
        AblationMode::ALL.to_vec()
    } else {
        modes
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::TrainGan { common, checkpoint } => {
            let mut cfg = load_config(&common)?;
            if let Some(seed) = common.seed {
                cfg.gan.seed = seed;
            }
            let resume = checkpoint.as_deref().map(read_checkpoint).transpose()?;
            train_gan(&cfg, &common.out, resume.as_ref()).map(|_| ())
        }
        Command::TrainEncoders { common, checkpoint, encoders, init_encoders } => {
            let mut cfg = load_config(&common)?;
            if let Some(seed) = common.seed {
                cfg.training.encoder_seed = seed;
                cfg.inversion.seed = seed;
            }
            let mut ck = read_checkpoint(&checkpoint)?;
            let roles = if encoders.is_empty() { cfg.training.encoders.clone() } else { encoders };
            let init = init_encoders.as_deref().map(read_checkpoint).transpose()?;
            train_encoders(&cfg, &common.out, &mut ck, &roles, init.as_ref())
        }
        Command::Invert { common, checkpoint, target, mode } => {
            let mut cfg = load_config(&common)?;
            if let Some(seed) = common.seed {
                cfg.inversion.seed = seed;
            }
            let ck = read_checkpoint(&checkpoint)?;
            if !target.is_file() {
                return Err(UsageError(format!("target {} does not exist", target.display())).into());
            }
            let raw = load_pointcloud(&target).with_context(|| format!("reading target {}", target.display()))?;
            let (cloud, transform) = raw.normalize()?;
            let models = ck.models();
            run::require_models(&models, mode)?;
            let inv = InversionConfig { ablation_mode: mode, ..cfg.inversion.clone() };
            let result = invert(&cloud, &models, &inv)?;
            let native = NativeCloud { cloud, latent_dim: ck.generator.config().latent_dim, transform };
            artifacts::write_inversion(&common.out, "", &native, &result, &inv)?;
            println!("{mode}: initial cd {:.6e}, final cd {:.6e}", result.initial_loss, result.final_loss);
            Ok(())
        }
        Command::Evaluate { common, checkpoint, modes, metric } => {
            let mut cfg = load_config(&common)?;
            if let Some(seed) = common.seed {
                cfg.inversion.seed = seed;
            }
            let ck = read_checkpoint(&checkpoint)?;
            evaluate(&cfg, &common.out, &ck, &default_modes(modes), metric)
        }
        Command::CompareEncoders { common, checkpoint } => {
            let cfg = load_config(&common)?;
            let ck = read_checkpoint(&checkpoint)?;
            compare(&cfg, &common.out, &ck)
        }
        Command::Experiment { common, modes, metric } => {
            let mut cfg = load_config(&common)?;
            if let Some(seed) = common.seed {
                cfg.gan.seed = seed;
                cfg.training.encoder_seed = seed;
                cfg.inversion.seed = seed;
            }
            let mut ck = train_gan(&cfg, &common.out, None)?;
            let roles = cfg.training.encoders.clone();
            train_encoders(&cfg, &common.out, &mut ck, &roles, None)?;
            evaluate(&cfg, &common.out, &ck, &default_modes(modes), metric)?;
            if ck.pair(PairRole::Global).is_some() && ck.pair(PairRole::Discriminator).is_some() {
                compare(&cfg, &common.out, &ck)?;
            }
            Ok(())
        }
    }
}

fn train_gan(cfg: &RunConfig, out: &Path, resume: Option<&Checkpoint>) -> Result<Checkpoint> {
    prepare_out(out)?;
    let corpus = run::load_corpus(cfg)?;
    let model_path = out.join("model.pinv");
    let ck = run::train_gan_stage(cfg, &corpus.train(), resume, |ck| {
        ck.write(&model_path)?;
        Ok(())
    })?;
    ck.write(&model_path)?;
    let history = ck.training.as_ref().map(|t| t.history.as_slice()).unwrap_or_default();
    write(&out.join("gan_loss.csv"), &report::gan_loss_csv(history))?;
    println!("trained {} iterations; checkpoint {}", history.len(), model_path.display());
    Ok(ck)
}

fn train_encoders(
    cfg: &RunConfig,
    out: &Path,
    ck: &mut Checkpoint,
    roles: &[PairRole],
    init: Option<&Checkpoint>,
) -> Result<()> {
    prepare_out(out)?;
    let corpus = run::load_corpus(cfg)?;
    let histories = run::train_encoder_stage(cfg, &corpus.train(), ck, roles, init)?;
    let model_path = out.join("model.pinv");
    ck.write(&model_path)?;
    for (role, hist) in histories {
        write(&out.join(format!("step1_{}.csv", role.name())), &report::loss_csv(&hist))?;
        println!("{} encoder: final training cd {:.4e}", role.name(), hist.last().copied().unwrap_or(f64::NAN));
    }
    Ok(())
}

fn evaluate(cfg: &RunConfig, out: &Path, ck: &Checkpoint, modes: &[AblationMode], metric: Metric) -> Result<()> {
    prepare_out(out)?;
    let corpus = run::load_corpus(cfg)?;
    let targets = run::test_items(&corpus);
    let with_emd = matches!(metric, Metric::Emd | Metric::Both);
    let evals = run::evaluate(&run::corpus_class(&corpus), &cfg.inversion, &targets, &ck.models(), modes, with_emd)?;
    let items_dir = out.join("items");
    let latent_dim = ck.generator.config().latent_dim;
    for e in &evals {
        let target = NativeCloud { latent_dim, ..NativeCloud::plain(corpus.items[e.item].clone()) };
        let inv = InversionConfig { ablation_mode: e.mode, ..cfg.inversion.clone() };
        artifacts::write_inversion(&items_dir, &format!("{}_{:04}_", e.mode, e.item), &target, &e.result, &inv)?;
    }
    // CD is always reported, so the column layout does not depend on --metric.
    write(&out.join("evaluation.csv"), &report::evaluation_csv(&evals))?;
    let text = report::summary_text(&report::summarize(&evals));
    write(&out.join("evaluation.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn compare(cfg: &RunConfig, out: &Path, ck: &Checkpoint) -> Result<()> {
    prepare_out(out)?;
    let corpus = run::load_corpus(cfg)?;
    let evals = run::compare_encoders(&run::test_items(&corpus), ck)?;
    write(&out.join("encoders.csv"), &report::encoder_csv(&evals))?;
    let text = report::encoder_text(&evals);
    write(&out.join("encoders.txt"), &text)?;
    print!("{text}");
    Ok(())
}
