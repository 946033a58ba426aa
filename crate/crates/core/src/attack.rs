//! Momentum iterative sign-gradient perturbation optimization over transform
//! ensembles, plus success-rate evaluation.
//!
//! Each iteration averages the loss gradient over the method's transformed
//! variants of `clamp01(x + delta)`, folds it into an L1-normalized momentum
//! accumulator, and takes a signed step clipped to the L-infinity budget.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Classifier, LabeledImage};
use crate::rng::RngStream;
use crate::tensor::ImageTensor;
use crate::transforms::{GradMode, TransformMethod};

/// Attack hyperparameters. The step size defaults to `epsilon / iterations`.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct AttackConfig {
    /// L-infinity budget in image units.
    pub epsilon: f32,
    /// Iteration count `T`.
    pub iterations: usize,
    /// Per-step size.
    pub step_size: f32,
    /// Momentum decay factor.
    pub decay: f32,
}

impl AttackConfig {
    /// Budget and iteration count with the tied step size `epsilon / T`.
    pub fn new(epsilon: f32, iterations: usize) -> Self {
        Self {
            epsilon,
            iterations,
            step_size: epsilon / iterations.max(1) as f32,
            decay: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Argument(format!(
                "epsilon {} outside (0, 1]",
                self.epsilon
            )));
        }
        if self.step_size <= 0.0 {
            return Err(Error::Argument("step_size must be > 0".into()));
        }
        Ok(())
    }
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self::new(16.0 / 255.0, 10)
    }
}

/// Mutable optimization state: the perturbation, the momentum accumulator,
/// and the step counter.
#[derive(Clone, Debug)]
pub struct AttackState {
    pub delta: ImageTensor,
    pub momentum: ImageTensor,
    pub step: usize,
}

impl AttackState {
    /// Zero-initialized state for an input of the given shape.
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            delta: ImageTensor::zeros(channels, height, width),
            momentum: ImageTensor::zeros(channels, height, width),
            step: 0,
        }
    }
}

/// A transform-averaged gradient and the mean loss that produced it.
#[derive(Clone, Debug)]
pub struct GradientEstimate {
    pub grad: ImageTensor,
    pub mean_loss: f32,
}

/// Averages `d loss / d delta` over the method's transforms of
/// `clamp01(x + delta)`. Per-variant gradients may be evaluated in parallel;
/// the reduction always folds in index order, so the result is independent of
/// scheduling.
pub fn ensemble_gradient(
    model: &dyn Classifier,
    x: &ImageTensor,
    delta: &ImageTensor,
    label: usize,
    method: &TransformMethod,
    grad_mode: GradMode,
    stream: RngStream,
) -> Result<GradientEstimate> {
    let evaluated = x.add(delta)?.clamp01();
    let variants = method.apply(&evaluated, stream)?;
    let per_variant: Vec<(f32, ImageTensor)> = variants
        .par_iter()
        .map(|variant| {
            let (loss, model_grad) = model.loss_and_input_grad(&variant.image, label)?;
            let grad = match grad_mode {
                GradMode::Exact => variant.grad_to_input(&model_grad)?,
                GradMode::ImageSpace => model_grad,
            };
            Ok((loss, grad))
        })
        .collect::<Result<_>>()?;

    let n = per_variant.len() as f32;
    let mut grad_sum = ImageTensor::zeros(x.channels(), x.height(), x.width());
    let mut loss_sum = 0.0f32;
    for (loss, grad) in &per_variant {
        grad_sum = grad_sum.add(grad)?;
        loss_sum += loss;
    }
    Ok(GradientEstimate {
        grad: grad_sum.scale(1.0 / n),
        mean_loss: loss_sum / n,
    })
}

/// One momentum update: `g <- decay * g + grad / |grad|_1` followed by
/// `delta <- clip(delta + step_size * sign(g), -epsilon, epsilon)`.
/// `sign(0) = 0`; a zero gradient skips the normalization term so only the
/// momentum decays.
pub fn mifgsm_step(state: &mut AttackState, grad: &ImageTensor, cfg: &AttackConfig) -> Result<()> {
    if !grad.is_finite() {
        return Err(Error::Numeric("non-finite gradient in attack step".into()));
    }
    if grad.shape() != state.delta.shape() {
        return Err(Error::Shape(format!(
            "gradient {:?} vs state {:?}",
            grad.shape(),
            state.delta.shape()
        )));
    }
    let l1 = grad.l1_norm();
    let g = state.momentum.data_mut();
    if l1 > 0.0 {
        for (gi, &di) in g.iter_mut().zip(grad.data()) {
            *gi = cfg.decay * *gi + di / l1;
        }
    } else {
        for gi in g.iter_mut() {
            *gi *= cfg.decay;
        }
    }
    let eps = cfg.epsilon;
    for (d, &gi) in state.delta.data_mut().iter_mut().zip(state.momentum.data()) {
        let sign = if gi > 0.0 {
            1.0
        } else if gi < 0.0 {
            -1.0
        } else {
            0.0
        };
        *d = (*d + cfg.step_size * sign).clamp(-eps, eps);
    }
    state.step += 1;
    Ok(())
}

/// Everything a finished attack reports.
#[derive(Clone, Debug)]
pub struct AttackOutcome {
    /// `clamp01(x + delta_T)`.
    pub adversarial: ImageTensor,
    /// Final perturbation (kept inside the budget box, not image-clamped).
    pub delta: ImageTensor,
    /// Mean ensemble loss per iteration.
    pub losses: Vec<f32>,
    /// Largest `|delta|_inf` observed after any step.
    pub max_delta_linf: f32,
    /// Whether the model classified the clean input correctly.
    pub clean_correct: bool,
    /// Model gradient evaluations consumed (`iterations * number_scale`).
    pub evals: u64,
}

/// Runs the full attack from `delta = 0`, `g = 0`. Iteration `t` consumes
/// child stream `t`; within it, transform `k` consumes child stream `k`.
pub fn run_attack(
    model: &dyn Classifier,
    sample: &LabeledImage,
    method: &TransformMethod,
    cfg: &AttackConfig,
    grad_mode: GradMode,
    stream: RngStream,
) -> Result<AttackOutcome> {
    cfg.validate()?;
    let (c, h, w) = sample.image.shape();
    if model.input_shape() != (c, h, w) {
        return Err(Error::Shape(format!(
            "sample {:?} does not match model input {:?}",
            (c, h, w),
            model.input_shape()
        )));
    }
    let clean_correct = model.predict(&sample.image)? == sample.label;
    let mut state = AttackState::new(c, h, w);
    let mut losses = Vec::with_capacity(cfg.iterations);
    let mut max_delta_linf = 0.0f32;
    for t in 0..cfg.iterations {
        let estimate = ensemble_gradient(
            model,
            &sample.image,
            &state.delta,
            sample.label,
            method,
            grad_mode,
            stream.child(t as u64),
        )?;
        mifgsm_step(&mut state, &estimate.grad, cfg)?;
        losses.push(estimate.mean_loss);
        let linf = state.delta.linf_norm();
        max_delta_linf = max_delta_linf.max(linf);
        debug_assert!(linf <= cfg.epsilon);
    }
    let adversarial = sample.image.add(&state.delta)?.clamp01();
    Ok(AttackOutcome {
        adversarial,
        delta: state.delta,
        losses,
        max_delta_linf,
        clean_correct,
        evals: (cfg.iterations * method.number_scale()) as u64,
    })
}

/// A named model participating in the evaluation.
pub struct ModelEntry<'a> {
    pub name: String,
    pub classifier: &'a dyn Classifier,
    /// True when this model generated the perturbations being scored.
    pub white_box: bool,
}

/// One row of the success table.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SuccessRow {
    pub model: String,
    pub white_box: bool,
    /// Percentage of adversarial images the model misclassifies.
    pub success_rate_pct: f64,
}

/// Fraction of adversarial images each model gets wrong, in percent.
pub fn evaluate_success(
    models: &[ModelEntry<'_>],
    adversarials: &[(ImageTensor, usize)],
) -> Result<Vec<SuccessRow>> {
    if adversarials.is_empty() {
        return Err(Error::Argument("no adversarial images to evaluate".into()));
    }
    models
        .iter()
        .map(|entry| {
            let mut fooled = 0usize;
            for (img, label) in adversarials {
                if entry.classifier.predict(img)? != *label {
                    fooled += 1;
                }
            }
            Ok(SuccessRow {
                model: entry.name.clone(),
                white_box: entry.white_box,
                success_rate_pct: 100.0 * fooled as f64 / adversarials.len() as f64,
            })
        })
        .collect()
}
