//! Experiment orchestration: unified number-scale sweeps, the ablation grid,
//! model training, result tables, and saliency diagnostics.
//!
//! Randomness flows from the master seed through a fixed substream hierarchy
//! (experiment -> cell -> sample -> iteration -> transform), and per-sample
//! results are reduced in index order, so repeated runs and different thread
//! counts produce identical tables.

mod config;
mod report;

pub use config::{
    AblationSection, AttackSection, BaselineSection, BssSection, ExperimentConfig,
    ExperimentSection, ModelRole, ModelSection, SweepSection, TrainingSection,
};
pub use report::{write_outputs, ResultRow};

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rayon::prelude::*;

use crate::attack::{evaluate_success, run_attack, AttackConfig, ModelEntry, SuccessRow};
use crate::error::{Error, Result};
use crate::io::write_png;
use crate::model::{
    accuracy, load_checkpoint, load_dataset, save_checkpoint, Classifier, ConvNetConfig,
    LabeledImage, TinyConvNet, TrainConfig, TrainReport,
};
use crate::rng::RngStream;
use crate::segmentation::SegmentationConfig;
use crate::tensor::ImageTensor;
use crate::transforms::{GradMode, TransformMethod};

/// Rescales border and pairwise distances from `base_res` to `target_res`
/// proportionally: `d' = max(1, round(d * target_res / base_res))`.
pub fn scale_parameters(
    border_margin: u32,
    min_point_distance: u32,
    base_res: u32,
    target_res: u32,
) -> Result<(u32, u32)> {
    if target_res < 8 {
        return Err(Error::Argument(format!(
            "target resolution {target_res} below minimum 8"
        )));
    }
    if base_res == 0 {
        return Err(Error::Argument("base resolution must be >= 1".into()));
    }
    let scale = |d: u32| -> u32 {
        ((d as f64 * target_res as f64 / base_res as f64).round() as u32).max(1)
    };
    Ok((scale(border_margin), scale(min_point_distance)))
}

/// [`scale_parameters`] applied to a whole segmentation config, with
/// feasibility rechecked at the target resolution.
pub fn scale_segmentation(
    cfg: &SegmentationConfig,
    base_res: u32,
    target_res: u32,
) -> Result<SegmentationConfig> {
    let (border_margin, min_point_distance) =
        scale_parameters(cfg.border_margin, cfg.min_point_distance, base_res, target_res)?;
    let scaled = SegmentationConfig {
        points: cfg.points,
        border_margin,
        min_point_distance,
        constrained: cfg.constrained,
    };
    scaled.check_feasible(target_res)?;
    Ok(scaled)
}

/// Writes `|d loss / d input|`, max-reduced over channels and normalized by
/// its peak, as a grayscale PNG.
pub fn saliency_dump(
    model: &dyn Classifier,
    img: &ImageTensor,
    label: usize,
    path: &Path,
) -> Result<()> {
    let (_, grad) = model.loss_and_input_grad(img, label)?;
    let (c, h, w) = grad.shape();
    let mut saliency = ImageTensor::zeros(1, h, w);
    for y in 0..h {
        for x in 0..w {
            let mut m = 0.0f32;
            for ch in 0..c {
                m = m.max(grad.get(ch, y, x).abs());
            }
            saliency.set(0, y, x, m);
        }
    }
    let peak = saliency.max_value();
    if peak > 0.0 {
        saliency = saliency.scale(1.0 / peak);
    }
    write_png(&saliency, path)
}

// ---------------------------------------------------------------------------
// Model evaluation counting.
// ---------------------------------------------------------------------------

/// Wraps a classifier and counts gradient evaluations, the unit of the
/// number-scale cost model.
struct CountingClassifier<'a> {
    inner: &'a dyn Classifier,
    grad_evals: AtomicU64,
}

impl<'a> CountingClassifier<'a> {
    fn new(inner: &'a dyn Classifier) -> Self {
        Self {
            inner,
            grad_evals: AtomicU64::new(0),
        }
    }

    fn count(&self) -> u64 {
        self.grad_evals.load(Ordering::Relaxed)
    }
}

impl Classifier for CountingClassifier<'_> {
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    fn input_shape(&self) -> (usize, usize, usize) {
        self.inner.input_shape()
    }

    fn forward(&self, img: &ImageTensor) -> Result<Vec<f32>> {
        self.inner.forward(img)
    }

    fn loss_and_input_grad(&self, img: &ImageTensor, label: usize) -> Result<(f32, ImageTensor)> {
        self.grad_evals.fetch_add(1, Ordering::Relaxed);
        self.inner.loss_and_input_grad(img, label)
    }
}

// ---------------------------------------------------------------------------
// Prepared experiment state.
// ---------------------------------------------------------------------------

/// Checkpoints loaded, dataset split, and samples selected; everything a cell
/// run needs.
pub struct PreparedExperiment {
    pub surrogate_name: String,
    pub surrogate: TinyConvNet,
    pub targets: Vec<(String, TinyConvNet)>,
    pub attack_samples: Vec<LabeledImage>,
}

impl PreparedExperiment {
    fn model_entries(&self) -> Vec<ModelEntry<'_>> {
        let mut entries = vec![ModelEntry {
            name: self.surrogate_name.clone(),
            classifier: &self.surrogate,
            white_box: true,
        }];
        for (name, net) in &self.targets {
            entries.push(ModelEntry {
                name: name.clone(),
                classifier: net,
                white_box: false,
            });
        }
        entries
    }
}

/// Loads checkpoints and the evaluation slice; fails fast on missing files or
/// an infeasible transform configuration, before any attack runs.
pub fn prepare(cfg: &ExperimentConfig) -> Result<PreparedExperiment> {
    cfg.validate()?;
    // Surface infeasible segmentation at the dataset resolution immediately.
    cfg.scaled_segmentation(true)?;

    for model in &cfg.models {
        if !model.path.exists() {
            return Err(Error::Config(format!(
                "checkpoint {} not found; run `bss train` first",
                model.path.display()
            )));
        }
    }
    let surrogate_section = cfg.surrogate();
    let surrogate = load_checkpoint(&surrogate_section.path)?;
    let targets = cfg
        .targets()
        .map(|section| Ok((section.name.clone(), load_checkpoint(&section.path)?)))
        .collect::<Result<Vec<_>>>()?;

    let attack_samples = held_out_slice(cfg)?;
    for sample in &attack_samples {
        if sample.image.shape() != surrogate.input_shape() {
            return Err(Error::Config(format!(
                "sample shape {:?} does not match surrogate input {:?}",
                sample.image.shape(),
                surrogate.input_shape()
            )));
        }
    }
    Ok(PreparedExperiment {
        surrogate_name: surrogate_section.name.clone(),
        surrogate,
        targets,
        attack_samples,
    })
}

/// The evaluation slice: the first `attack_samples` of the held-out split.
fn held_out_slice(cfg: &ExperimentConfig) -> Result<Vec<LabeledImage>> {
    let data = load_dataset(&cfg.dataset_spec()?, cfg.experiment.resolution)?;
    let start = cfg.training.train_samples;
    let end = start + cfg.training.held_out_samples;
    if data.len() < end {
        return Err(Error::Config(format!(
            "dataset has {} samples; training split needs {end}",
            data.len()
        )));
    }
    if cfg.experiment.attack_samples > cfg.training.held_out_samples {
        return Err(Error::Config(format!(
            "attack_samples {} exceeds held-out split {}",
            cfg.experiment.attack_samples, cfg.training.held_out_samples
        )));
    }
    Ok(data[start..start + cfg.experiment.attack_samples].to_vec())
}

// ---------------------------------------------------------------------------
// Cells and runs.
// ---------------------------------------------------------------------------

/// One (method, number scale) cell of a run.
#[derive(Clone, Debug)]
pub struct CellSpec {
    pub method: TransformMethod,
    pub requested_scale: usize,
    /// Set when the method could not reach the requested unified scale.
    pub unified_warning: bool,
}

/// Results of one cell: per-model success rates plus cost accounting.
pub struct CellResult {
    pub method: String,
    pub requested_scale: usize,
    pub number_scale: usize,
    pub unified_warning: bool,
    /// Instrumented surrogate gradient evaluations.
    pub evals: u64,
    pub wall_ms: u64,
    pub max_delta_linf: f32,
    pub clean_misclassified: usize,
    pub success: Vec<SuccessRow>,
    /// Adversarial images with their true labels, in sample order.
    pub adversarials: Vec<(ImageTensor, usize)>,
    /// Final perturbations, in sample order.
    pub deltas: Vec<ImageTensor>,
}

/// A finished sweep/ablation/attack run.
pub struct RunReport {
    pub kind: &'static str,
    pub cells: Vec<CellResult>,
}

impl RunReport {
    /// Flattened (method, N, model) rows in deterministic order.
    pub fn rows(&self) -> Vec<ResultRow> {
        self.cells
            .iter()
            .flat_map(|cell| {
                cell.success.iter().map(move |row| ResultRow {
                    method: cell.method.clone(),
                    number_scale: cell.number_scale,
                    model: row.model.clone(),
                    white_box: row.white_box,
                    success_rate_pct: row.success_rate_pct,
                    evals: cell.evals,
                    wall_ms: cell.wall_ms,
                })
            })
            .collect()
    }
}

fn run_cell(
    prep: &PreparedExperiment,
    spec: &CellSpec,
    attack_cfg: &AttackConfig,
    grad_mode: GradMode,
    cell_stream: RngStream,
) -> Result<CellResult> {
    let counting = CountingClassifier::new(&prep.surrogate);
    let started = Instant::now();
    let outcomes: Vec<crate::attack::AttackOutcome> = prep
        .attack_samples
        .par_iter()
        .enumerate()
        .map(|(i, sample)| {
            run_attack(
                &counting,
                sample,
                &spec.method,
                attack_cfg,
                grad_mode,
                cell_stream.child(i as u64),
            )
        })
        .collect::<Result<_>>()?;
    let wall_ms = started.elapsed().as_millis() as u64;

    let adversarials: Vec<(ImageTensor, usize)> = outcomes
        .iter()
        .zip(&prep.attack_samples)
        .map(|(o, s)| (o.adversarial.clone(), s.label))
        .collect();
    let max_delta_linf = outcomes.iter().fold(0.0f32, |m, o| m.max(o.max_delta_linf));
    let clean_misclassified = outcomes.iter().filter(|o| !o.clean_correct).count();
    let success = evaluate_success(&prep.model_entries(), &adversarials)?;
    let deltas = outcomes.into_iter().map(|o| o.delta).collect();

    Ok(CellResult {
        method: spec.method.label(),
        requested_scale: spec.requested_scale,
        number_scale: spec.method.number_scale(),
        unified_warning: spec.unified_warning,
        evals: counting.count(),
        wall_ms,
        max_delta_linf,
        clean_misclassified,
        success,
        adversarials,
        deltas,
    })
}

fn run_cells(
    cfg: &ExperimentConfig,
    prep: &PreparedExperiment,
    specs: Vec<CellSpec>,
    kind: &'static str,
) -> Result<RunReport> {
    let attack_cfg = cfg.attack.to_attack_config();
    let grad_mode = cfg.attack.grad_mode;
    let root = RngStream::from_seed(cfg.experiment.seed);
    let cells = specs
        .iter()
        .enumerate()
        .map(|(idx, spec)| {
            let cell = run_cell(prep, spec, &attack_cfg, grad_mode, root.child(idx as u64))?;
            if spec.unified_warning {
                eprintln!(
                    "warning: method {} cannot expand to unified number scale {}; kept N = {}",
                    cell.method, spec.requested_scale, cell.number_scale
                );
            }
            Ok(cell)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunReport { kind, cells })
}

/// Builds the (method x number scale) grid from the sweep section; every
/// method in a cell is forced to the cell's unified scale.
fn sweep_cells(cfg: &ExperimentConfig) -> Result<Vec<CellSpec>> {
    let mut specs = Vec::new();
    for &n in &cfg.sweep.number_scales {
        if n == 0 {
            return Err(Error::Config("number scale 0 in sweep".into()));
        }
        for name in &cfg.sweep.methods {
            let base = cfg.build_method(name)?;
            let fixed = matches!(base, TransformMethod::None);
            if fixed && n != 1 && !cfg.sweep.allow_unified_scale_exceptions {
                return Err(Error::Config(format!(
                    "method {name} cannot reach unified number scale {n}"
                )));
            }
            let method = base.with_number_scale(n);
            specs.push(CellSpec {
                unified_warning: fixed && n != 1,
                requested_scale: n,
                method,
            });
        }
    }
    Ok(specs)
}

/// Runs the full unified number-scale sweep and writes `results.csv` and
/// `results.json` into the configured output directory.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<RunReport> {
    let prep = prepare(cfg)?;
    let report = run_cells(cfg, &prep, sweep_cells(cfg)?, "sweep")?;
    write_outputs(&report, cfg, &cfg.experiment.output_dir)?;
    Ok(report)
}

/// Ablation grid: plain momentum baseline plus the four operator variants at
/// one fixed number scale.
pub fn run_ablation(cfg: &ExperimentConfig) -> Result<RunReport> {
    let prep = prepare(cfg)?;
    let n = cfg.ablation.number_scale;
    let mut specs = Vec::new();
    for name in ["none", "1d-bss-rp", "1d-bss", "2d-bss-rp", "bss"] {
        let base = cfg.build_method(name)?;
        let fixed = matches!(base, TransformMethod::None);
        specs.push(CellSpec {
            unified_warning: fixed && n != 1,
            requested_scale: n,
            method: base.with_number_scale(n),
        });
    }
    let report = run_cells(cfg, &prep, specs, "ablation")?;
    write_outputs(&report, cfg, &cfg.experiment.output_dir)?;
    Ok(report)
}

/// Attacks the sample set with a single method at one number scale; used by
/// the `attack` subcommand.
pub fn run_single_method(
    cfg: &ExperimentConfig,
    method_name: &str,
    number_scale: usize,
) -> Result<RunReport> {
    let prep = prepare(cfg)?;
    let base = cfg.build_method(method_name)?;
    let fixed = matches!(base, TransformMethod::None);
    let specs = vec![CellSpec {
        unified_warning: fixed && number_scale != 1,
        requested_scale: number_scale,
        method: base.with_number_scale(number_scale),
    }];
    let report = run_cells(cfg, &prep, specs, "attack")?;
    write_outputs(&report, cfg, &cfg.experiment.output_dir)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Training.
// ---------------------------------------------------------------------------

/// Outcome of training one configured model.
#[derive(Clone, Debug, serde::Serialize)]
pub struct TrainedModel {
    pub name: String,
    pub path: PathBuf,
    pub train_report: TrainReport,
    pub held_out_accuracy: f64,
}

/// Trains every configured model on its slice of the training split and
/// writes the checkpoints. Each model draws initialization and batching from
/// its own seed, so models differ while runs stay reproducible.
pub fn train_models(cfg: &ExperimentConfig) -> Result<Vec<TrainedModel>> {
    cfg.validate()?;
    let data = load_dataset(&cfg.dataset_spec()?, cfg.experiment.resolution)?;
    let train_end = cfg.training.train_samples;
    let held_end = train_end + cfg.training.held_out_samples;
    if data.len() < held_end {
        return Err(Error::Config(format!(
            "dataset has {} samples; training needs {held_end}",
            data.len()
        )));
    }
    let train_data = &data[..train_end];
    let held_out = &data[train_end..held_end];
    let (channels, height, width) = data[0].image.shape();
    let num_classes = data
        .iter()
        .map(|s| s.label)
        .max()
        .expect("non-empty dataset")
        + 1;

    let slice_len = train_data.len() / cfg.models.len();
    let train_cfg = TrainConfig {
        epochs: cfg.training.epochs,
        learning_rate: cfg.training.learning_rate,
        batch_size: cfg.training.batch_size,
        stretch_augment: cfg.training.stretch_augment,
    };

    let mut results = Vec::with_capacity(cfg.models.len());
    for (i, section) in cfg.models.iter().enumerate() {
        let slice = if cfg.training.disjoint_training {
            &train_data[i * slice_len..(i + 1) * slice_len]
        } else {
            train_data
        };
        let arch = ConvNetConfig {
            in_channels: channels,
            height,
            width,
            conv1_channels: section.conv1_channels,
            conv2_channels: section.conv2_channels,
            num_classes,
        };
        let stream = RngStream::from_seed(section.seed);
        let mut net = TinyConvNet::new(arch, &mut stream.child(0).rng())?;
        let train_report = net.train(slice, &train_cfg, &mut stream.child(1).rng())?;
        let held_out_accuracy = accuracy(&net, held_out)?;
        if let Some(parent) = section.path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        save_checkpoint(&net, &section.path)?;
        results.push(TrainedModel {
            name: section.name.clone(),
            path: section.path.clone(),
            train_report,
            held_out_accuracy,
        });
    }
    Ok(results)
}
