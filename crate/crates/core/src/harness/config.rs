//! Experiment configuration: a flat `key = value` sections file (TOML) that is
//! checked into the repository for every shipped experiment, so runs are
//! citable and diffable.

use std::path::{Path, PathBuf};

use crate::bss::{AxesMode, BssConfig, TargetLengthMode};
use crate::error::{Error, Result};
use crate::harness::scale_segmentation;
use crate::model::DatasetSpec;
use crate::segmentation::SegmentationConfig;
use crate::transforms::{GradMode, TransformMethod};

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default)]
    pub bss: BssSection,
    #[serde(default)]
    pub baselines: BaselineSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub ablation: AblationSection,
    #[serde(default)]
    pub training: TrainingSection,
    pub models: Vec<ModelSection>,
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub seed: u64,
    pub dataset: String,
    /// Synthetic rendering resolution; also the model input resolution.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// How many held-out samples to attack.
    #[serde(default = "default_attack_samples")]
    pub attack_samples: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// 0 means the rayon default.
    #[serde(default)]
    pub threads: usize,
}

fn default_resolution() -> usize {
    32
}

fn default_attack_samples() -> usize {
    200
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    pub epsilon: f32,
    pub iterations: usize,
    /// Defaults to `epsilon / iterations` when omitted.
    #[serde(default)]
    pub step_size: Option<f32>,
    pub decay: f32,
    #[serde(default = "default_grad_mode")]
    pub grad_mode: GradMode,
}

fn default_grad_mode() -> GradMode {
    GradMode::Exact
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            epsilon: 16.0 / 255.0,
            iterations: 10,
            step_size: None,
            decay: 1.0,
            grad_mode: GradMode::Exact,
        }
    }
}

impl AttackSection {
    pub fn to_attack_config(&self) -> crate::attack::AttackConfig {
        let mut cfg = crate::attack::AttackConfig::new(self.epsilon, self.iterations);
        if let Some(step) = self.step_size {
            cfg.step_size = step;
        }
        cfg.decay = self.decay;
        cfg
    }
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BssSection {
    pub points: usize,
    /// Minimum point-to-border distance at `base_resolution`.
    pub border_margin: u32,
    /// Minimum pairwise coordinate distance at `base_resolution`.
    pub min_point_distance: u32,
    /// Resolution the distances above are stated for; they are rescaled
    /// proportionally to the dataset resolution.
    pub base_resolution: u32,
    pub ratio: f64,
    #[serde(default = "default_target_length_mode")]
    pub target_length_mode: TargetLengthMode,
}

fn default_target_length_mode() -> TargetLengthMode {
    TargetLengthMode::TotalShare
}

impl Default for BssSection {
    fn default() -> Self {
        Self {
            points: 2,
            border_margin: 35,
            min_point_distance: 40,
            base_resolution: 224,
            ratio: 1.0,
            target_length_mode: TargetLengthMode::TotalShare,
        }
    }
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    pub resize_pad_min_scale: f64,
    pub shuffle_grid: usize,
    pub shuffle_max_angle_deg: f64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            resize_pad_min_scale: 0.85,
            shuffle_grid: 2,
            shuffle_max_angle_deg: 24.0,
        }
    }
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub methods: Vec<String>,
    pub number_scales: Vec<usize>,
    /// Allow mixing methods that cannot reach the requested number scale
    /// (plain momentum stays at N = 1); such rows carry a warning flag.
    #[serde(default = "default_true")]
    pub allow_unified_scale_exceptions: bool,
}

fn default_true() -> bool {
    true
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            methods: vec!["none".into(), "bss".into()],
            number_scales: vec![1, 5, 10, 20],
            allow_unified_scale_exceptions: true,
        }
    }
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSection {
    pub number_scale: usize,
}

impl Default for AblationSection {
    fn default() -> Self {
        Self { number_scale: 10 }
    }
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub train_samples: usize,
    pub held_out_samples: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Give each model its own disjoint slice of the training samples, which
    /// keeps the surrogate and the targets from converging to near-identical
    /// decision boundaries.
    pub disjoint_training: bool,
    /// Probability of stretch-augmenting a training sample; see
    /// [`crate::model::TrainConfig::stretch_augment`].
    #[serde(default = "default_stretch_augment")]
    pub stretch_augment: f64,
}

fn default_stretch_augment() -> f64 {
    0.5
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            train_samples: 2400,
            held_out_samples: 400,
            epochs: 8,
            learning_rate: 0.05,
            batch_size: 16,
            disjoint_training: true,
            stretch_augment: 0.5,
        }
    }
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    pub path: PathBuf,
    pub role: ModelRole,
    pub seed: u64,
    pub conv1_channels: usize,
    pub conv2_channels: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelRole {
    Surrogate,
    Target,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset_spec()?;
        if self.models.is_empty() {
            return Err(Error::Config("no [[models]] entries".into()));
        }
        let surrogates = self
            .models
            .iter()
            .filter(|m| m.role == ModelRole::Surrogate)
            .count();
        if surrogates != 1 {
            return Err(Error::Config(format!(
                "expected exactly one surrogate model, found {surrogates}"
            )));
        }
        if self.experiment.attack_samples == 0 {
            return Err(Error::Config("attack_samples must be >= 1".into()));
        }
        Ok(())
    }

    pub fn dataset_spec(&self) -> Result<DatasetSpec> {
        self.experiment.dataset.parse()
    }

    pub fn surrogate(&self) -> &ModelSection {
        self.models
            .iter()
            .find(|m| m.role == ModelRole::Surrogate)
            .expect("validated config has a surrogate")
    }

    pub fn targets(&self) -> impl Iterator<Item = &ModelSection> {
        self.models.iter().filter(|m| m.role == ModelRole::Target)
    }

    /// Segmentation parameters rescaled from the stated base resolution to the
    /// dataset resolution, with feasibility rechecked.
    pub fn scaled_segmentation(&self, constrained: bool) -> Result<SegmentationConfig> {
        let base = SegmentationConfig {
            points: self.bss.points,
            border_margin: self.bss.border_margin,
            min_point_distance: self.bss.min_point_distance,
            constrained,
        };
        scale_segmentation(
            &base,
            self.bss.base_resolution,
            self.experiment.resolution as u32,
        )
    }

    fn bss_config(&self, axes_mode: AxesMode, constrained: bool) -> Result<BssConfig> {
        Ok(BssConfig {
            seg: self.scaled_segmentation(constrained)?,
            ratio: self.bss.ratio,
            number_scale: 1,
            axes_mode,
            target_length_mode: self.bss.target_length_mode,
        })
    }

    /// Builds a transform method by its table label; number scale starts at 1
    /// (or the method's natural minimum) and is forced per sweep cell.
    pub fn build_method(&self, name: &str) -> Result<TransformMethod> {
        match name {
            "none" => Ok(TransformMethod::None),
            "bss" => Ok(TransformMethod::Bss(self.bss_config(AxesMode::TwoAxis, true)?)),
            "1d-bss" => Ok(TransformMethod::Bss(self.bss_config(AxesMode::OneAxis, true)?)),
            "2d-bss-rp" => Ok(TransformMethod::Bss(
                self.bss_config(AxesMode::TwoAxis, false)?,
            )),
            "1d-bss-rp" => Ok(TransformMethod::Bss(
                self.bss_config(AxesMode::OneAxis, false)?,
            )),
            "scale-ensemble" => Ok(TransformMethod::ScaleEnsemble { depth: 1 }),
            "resize-pad" => Ok(TransformMethod::ResizePad {
                number_scale: 1,
                min_scale: self.baselines.resize_pad_min_scale,
            }),
            "block-shuffle-rotate" => Ok(TransformMethod::BlockShuffleRotate {
                number_scale: 1,
                grid: self.baselines.shuffle_grid,
                max_angle_deg: self.baselines.shuffle_max_angle_deg,
            }),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"
[experiment]
seed = 42
dataset = "synthetic:7:120"
resolution = 32
attack_samples = 8
output_dir = "out"

[attack]
epsilon = 0.0627451
iterations = 10
decay = 1.0
grad_mode = "exact"

[bss]
points = 2
border_margin = 35
min_point_distance = 40
base_resolution = 224
ratio = 1.0
target_length_mode = "total"

[sweep]
methods = ["none", "bss"]
number_scales = [1, 5]

[training]
train_samples = 96
held_out_samples = 24
epochs = 2
learning_rate = 0.05
batch_size = 8
disjoint_training = true

[[models]]
name = "surrogate"
path = "checkpoints/surrogate.ckpt"
role = "surrogate"
seed = 101
conv1_channels = 8
conv2_channels = 16

[[models]]
name = "target_a"
path = "checkpoints/target_a.ckpt"
role = "target"
seed = 202
conv1_channels = 6
conv2_channels = 12
"#;

    #[test]
    fn parses_and_validates() {
        let cfg: ExperimentConfig = toml::from_str(SAMPLE).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.experiment.seed, 42);
        assert_eq!(cfg.surrogate().name, "surrogate");
        assert_eq!(cfg.targets().count(), 1);
        assert_eq!(cfg.attack.grad_mode, GradMode::Exact);
        assert_eq!(cfg.bss.target_length_mode, TargetLengthMode::TotalShare);
    }

    #[test]
    fn scaled_segmentation_shrinks_distances() {
        let cfg: ExperimentConfig = toml::from_str(SAMPLE).unwrap();
        let seg = cfg.scaled_segmentation(true).unwrap();
        assert_eq!(seg.border_margin, 5);
        assert_eq!(seg.min_point_distance, 6);
    }

    #[test]
    fn unknown_method_is_rejected() {
        let cfg: ExperimentConfig = toml::from_str(SAMPLE).unwrap();
        assert!(matches!(cfg.build_method("dim"), Err(Error::Config(_))));
    }

    #[test]
    fn two_surrogates_fail_validation() {
        let bad = SAMPLE.replace("role = \"target\"", "role = \"surrogate\"");
        let cfg: ExperimentConfig = toml::from_str(&bad).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
