//! Command-line front end for the attack toolkit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bss_core::bss::TargetLengthMode;
use bss_core::error::{Error, Result};
use bss_core::harness::{
    run_ablation, run_single_method, run_sweep, saliency_dump, train_models, ExperimentConfig,
    RunReport,
};
use bss_core::io::{write_delta, write_png};
use bss_core::model::{load_checkpoint, load_dataset};
use bss_core::rng::RngStream;
use bss_core::transforms::GradMode;

#[derive(Parser)]
#[command(name = "bss", version, about = "Block stretch-and-shrink attack toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured surrogate and target models and write checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Attack the evaluation samples with one method and write results.
    Attack {
        #[command(flatten)]
        common: Common,
        /// Method label (none, bss, 1d-bss, 2d-bss-rp, 1d-bss-rp,
        /// scale-ensemble, resize-pad, block-shuffle-rotate).
        #[arg(long, default_value = "bss")]
        method: String,
        /// Number of transformed images per input.
        #[arg(long)]
        number_scale: Option<usize>,
        /// Save the first K adversarial images as PNG plus exact perturbation
        /// dumps.
        #[arg(long, default_value_t = 0)]
        save_images: usize,
    },
    /// Run the full (method x number scale) sweep from the config.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Run the operator ablation grid at one fixed number scale.
    Ablate {
        #[command(flatten)]
        common: Common,
    },
    /// Write transformed variants of one input for visual inspection.
    TransformPreview {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "bss")]
        method: String,
        /// How many variants to render.
        #[arg(long, default_value_t = 8)]
        count: usize,
        /// PNG to transform instead of a dataset sample.
        #[arg(long)]
        image: Option<PathBuf>,
    },
    /// Write an input-gradient saliency map for one evaluation sample.
    Saliency {
        #[command(flatten)]
        common: Common,
        /// Index into the evaluation slice.
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    threads: Option<usize>,
    /// How gradients cross the input transform.
    #[arg(long, value_enum)]
    grad_mode: Option<GradModeArg>,
    /// Target-length convention of the stretch schedule.
    #[arg(long, value_enum)]
    target_length_mode: Option<TargetLengthModeArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GradModeArg {
    Exact,
    ImageSpace,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetLengthModeArg {
    Total,
    Literal,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::from_path(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.experiment.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.experiment.output_dir = out.clone();
        }
        if let Some(threads) = self.threads {
            cfg.experiment.threads = threads;
        }
        if let Some(mode) = self.grad_mode {
            cfg.attack.grad_mode = match mode {
                GradModeArg::Exact => GradMode::Exact,
                GradModeArg::ImageSpace => GradMode::ImageSpace,
            };
        }
        if let Some(mode) = self.target_length_mode {
            cfg.bss.target_length_mode = match mode {
                TargetLengthModeArg::Total => TargetLengthMode::TotalShare,
                TargetLengthModeArg::Literal => TargetLengthMode::PerBlockLiteral,
            };
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let common = match &cli.command {
        Command::Train { common }
        | Command::Attack { common, .. }
        | Command::Sweep { common }
        | Command::Ablate { common }
        | Command::TransformPreview { common, .. }
        | Command::Saliency { common, .. } => common,
    };
    let cfg = common.load()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.experiment.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&cli.command, &cfg))
}

fn dispatch(command: &Command, cfg: &ExperimentConfig) -> Result<()> {
    match command {
        Command::Train { .. } => train(cfg),
        Command::Attack {
            method,
            number_scale,
            save_images,
            ..
        } => attack(cfg, method, *number_scale, *save_images),
        Command::Sweep { .. } => {
            let report = run_sweep(cfg)?;
            print_report(&report);
            println!(
                "wrote {} and results.json",
                cfg.experiment.output_dir.join("results.csv").display()
            );
            Ok(())
        }
        Command::Ablate { .. } => {
            let report = run_ablation(cfg)?;
            print_report(&report);
            println!(
                "wrote {} and results.json",
                cfg.experiment.output_dir.join("results.csv").display()
            );
            Ok(())
        }
        Command::TransformPreview {
            method,
            count,
            image,
            ..
        } => transform_preview(cfg, method, *count, image.as_deref()),
        Command::Saliency { index, .. } => saliency(cfg, *index),
    }
}

fn train(cfg: &ExperimentConfig) -> Result<()> {
    let results = train_models(cfg)?;
    println!("{:<12} {:>10} {:>10}  path", "model", "train", "held-out");
    for model in &results {
        println!(
            "{:<12} {:>9.1}% {:>9.1}%  {}",
            model.name,
            100.0 * model.train_report.train_accuracy,
            100.0 * model.held_out_accuracy,
            model.path.display()
        );
    }
    std::fs::create_dir_all(&cfg.experiment.output_dir)?;
    let report_path = cfg.experiment.output_dir.join("training_report.json");
    std::fs::write(
        &report_path,
        serde_json::to_string_pretty(&results).expect("json serialization"),
    )?;
    println!("wrote {}", report_path.display());
    Ok(())
}

fn attack(
    cfg: &ExperimentConfig,
    method: &str,
    number_scale: Option<usize>,
    save_images: usize,
) -> Result<()> {
    let n = number_scale.unwrap_or(cfg.ablation.number_scale);
    let report = run_single_method(cfg, method, n)?;
    print_report(&report);
    let cell = &report.cells[0];
    if save_images > 0 {
        let dir = cfg.experiment.output_dir.join("adversarial");
        std::fs::create_dir_all(&dir)?;
        for (i, (img, _)) in cell.adversarials.iter().take(save_images).enumerate() {
            write_png(img, &dir.join(format!("adv_{i:04}.png")))?;
            write_delta(&cell.deltas[i], &dir.join(format!("delta_{i:04}.bin")))?;
        }
        println!("wrote {} adversarial images to {}", save_images.min(cell.adversarials.len()), dir.display());
    }
    println!(
        "wrote {} and results.json",
        cfg.experiment.output_dir.join("results.csv").display()
    );
    Ok(())
}

fn transform_preview(
    cfg: &ExperimentConfig,
    method_name: &str,
    count: usize,
    image: Option<&std::path::Path>,
) -> Result<()> {
    let source = match image {
        Some(path) => bss_core::io::read_png(path)?,
        None => {
            let data = load_dataset(&cfg.dataset_spec()?, cfg.experiment.resolution)?;
            let idx = cfg.training.train_samples.min(data.len().saturating_sub(1));
            data[idx].image.clone()
        }
    };
    let method = cfg.build_method(method_name)?.with_number_scale(count.max(1));
    let stream = RngStream::from_seed(cfg.experiment.seed);
    let variants = method.apply(&source, stream)?;
    let dir = cfg.experiment.output_dir.join("preview");
    std::fs::create_dir_all(&dir)?;
    let original = dir.join("original.png");
    write_png(&source, &original)?;
    for (k, variant) in variants.iter().enumerate() {
        write_png(&variant.image, &dir.join(format!("{method_name}_{k:02}.png")))?;
    }
    println!("wrote {} variants to {}", variants.len(), dir.display());
    Ok(())
}

fn saliency(cfg: &ExperimentConfig, index: usize) -> Result<()> {
    let data = load_dataset(&cfg.dataset_spec()?, cfg.experiment.resolution)?;
    let start = cfg.training.train_samples;
    let sample = data
        .get(start + index)
        .ok_or_else(|| Error::Argument(format!("sample index {index} out of range")))?;
    let surrogate = load_checkpoint(&cfg.surrogate().path)?;
    std::fs::create_dir_all(&cfg.experiment.output_dir)?;
    let path = cfg
        .experiment
        .output_dir
        .join(format!("saliency_{index:04}.png"));
    saliency_dump(&surrogate, &sample.image, sample.label, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn print_report(report: &RunReport) {
    println!(
        "{:<20} {:>4} {:<14} {:>9} {:>10} {:>9}",
        "method", "N", "model", "success%", "evals", "wall_ms"
    );
    for cell in &report.cells {
        for row in &cell.success {
            let model = if row.white_box {
                format!("{}*", row.model)
            } else {
                row.model.clone()
            };
            println!(
                "{:<20} {:>4} {:<14} {:>8.2} {:>10} {:>9}",
                cell.method, cell.number_scale, model, row.success_rate_pct, cell.evals, cell.wall_ms
            );
        }
    }
}
