use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use shapefill::config::{ExperimentConfig, Preset};
use shapefill::experiment::{self, AeKind, Run, CONFIG_FILE};
use shapefill::gan::{GanLossKind, TrainingMode};
use shapefill::{Error, Result};

/// Environment variable naming the worker thread count.
const THREADS_VAR: &str = "SHAPEFILL_THREADS";

#[derive(Parser, Debug)]
#[command(name = "shapefill", version, about = "Unpaired point-cloud completion")]
struct Cli {
    /// Run directory holding the config, data, checkpoints and reports.
    #[arg(long, global = true, default_value = "run")]
    run_dir: PathBuf,

    /// Experiment config (.json or .toml).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Named preset: paper-scale, desk-scale or toy-chairs.
    #[arg(long, global = true)]
    preset: Option<Preset>,

    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Adversarial loss for GAN training.
    #[arg(long, global = true, value_enum)]
    gan_loss: Option<LossArg>,

    /// Progress on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LossArg {
    Ls,
    Log,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the procedural dataset.
    Synth,
    /// Train an autoencoder.
    TrainAe {
        #[arg(long, default_value = "clean")]
        kind: AeKind,
    },
    /// Train the latent GAN for one mode (default: the config's mode).
    TrainGan {
        #[arg(long)]
        mode: Option<TrainingMode>,
    },
    /// Complete every cloud in a directory.
    Complete {
        #[arg(long)]
        mode: Option<TrainingMode>,
        /// Defaults to the partial test split.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Defaults to completions/<mode>.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score completions against ground truth paired by file name.
    Eval {
        #[arg(long)]
        mode: Option<TrainingMode>,
        #[arg(long)]
        completions: Option<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// F1 of the pipeline and the plain autoencoder across incompleteness levels.
    Sweep {
        #[arg(long)]
        mode: Option<TrainingMode>,
    },
    /// Train and score every training mode.
    Ablate,
}

fn check_threads() -> Result<()> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(()),
            _ => Err(Error::Config(format!("{THREADS_VAR} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(()),
    }
}

fn resolve_config(cli: &Cli) -> Result<Option<ExperimentConfig>> {
    let base = if let Some(path) = &cli.config {
        Some(ExperimentConfig::load(path)?)
    } else if let Some(p) = cli.preset {
        Some(ExperimentConfig::preset(p))
    } else if cli.seed.is_some() || cli.gan_loss.is_some() {
        Some(ExperimentConfig::load(&cli.run_dir.join(CONFIG_FILE))?)
    } else {
        None
    };
    Ok(base.map(|mut c| {
        if let Some(seed) = cli.seed {
            c = c.with_seed(seed);
        }
        match cli.gan_loss {
            Some(LossArg::Ls) => c.gan.train.loss = GanLossKind::LeastSquares,
            Some(LossArg::Log) => c.gan.train.loss = GanLossKind::Log,
            None => {}
        }
        c
    }))
}

fn or_default(p: &Option<PathBuf>, default: impl FnOnce() -> PathBuf) -> PathBuf {
    p.clone().unwrap_or_else(default)
}

fn show(path: &Path) -> String {
    path.display().to_string()
}

fn run(cli: Cli) -> Result<()> {
    check_threads()?;
    let mut run = Run::open(&cli.run_dir, resolve_config(&cli)?)?;
    run.verbose = cli.verbose;
    let default_mode = run.config.gan.mode;
    match &cli.command {
        Command::Synth => {
            let ds = experiment::cmd_synth(&run)?;
            println!(
                "wrote {} clean and {} partial clouds to {}",
                ds.clean_train.len() + ds.clean_test.len(),
                ds.partial_train.len() + ds.partial_test.len(),
                show(&run.data_dir())
            );
        }
        Command::TrainAe { kind } => {
            let s = experiment::cmd_train_ae(&run, *kind)?;
            println!(
                "{} ae: {} epochs, loss {:.6} -> {:.6}, held-out EMD {:.6}",
                kind.name(),
                s.epochs,
                s.first_loss,
                s.final_loss,
                s.heldout_emd
            );
        }
        Command::TrainGan { mode } => {
            let s = experiment::cmd_train_gan(&run, mode.unwrap_or(default_mode))?;
            println!(
                "{}: {} epochs, L_F {:.6}, L_G {:.6}, HL {:.6}",
                s.mode, s.epochs, s.final_loss_f, s.final_loss_g, s.final_hard_hl
            );
        }
        Command::Complete { mode, input, output } => {
            let mode = mode.unwrap_or(default_mode);
            let input = or_default(input, || run.data_dir().join("partial_test"));
            let output = or_default(output, || run.completions_dir(mode));
            let n = experiment::cmd_complete(&run, mode, &input, &output)?;
            println!("completed {n} clouds into {}", show(&output));
        }
        Command::Eval { mode, completions, gt, output } => {
            let mode = mode.unwrap_or(default_mode);
            let completions = or_default(completions, || run.completions_dir(mode));
            let gt = or_default(gt, || run.data_dir().join("partial_test_gt"));
            let output = or_default(output, || run.eval_dir(mode));
            let r = experiment::cmd_eval(&run, &completions, &gt, &output)?;
            println!(
                "{} shapes: accuracy {:.2}, completeness {:.2}, F1 {:.2}, EMD {:.5}, JSD {:.4} (reference {:.4})",
                r.rows.len(),
                r.mean.accuracy,
                r.mean.completeness,
                r.mean.f1,
                r.mean.emd,
                r.jsd.unwrap_or(f64::NAN),
                r.jsd_reference.unwrap_or(f64::NAN)
            );
        }
        Command::Sweep { mode } => {
            let rows = experiment::cmd_sweep(&run, mode.unwrap_or(default_mode))?;
            print!("{}", shapefill::eval::sweep_csv(&rows));
        }
        Command::Ablate => {
            let rows = experiment::cmd_ablate(&run)?;
            print!("{}", experiment::ablation_csv(&rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
