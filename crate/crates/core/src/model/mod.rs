//! Differentiable classifier abstraction, a small built-in convolutional
//! network, and dataset ingestion.

mod checkpoint;
mod convnet;
mod dataset;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use convnet::{ConvNetConfig, TinyConvNet, TrainConfig, TrainReport};
pub use dataset::{load_dataset, DatasetSpec, SYNTHETIC_CLASSES};

use num_traits::Float;

use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

/// An image paired with its class index.
#[derive(Clone, Debug)]
pub struct LabeledImage {
    pub image: ImageTensor,
    pub label: usize,
}

/// A deterministic differentiable classifier. `forward` has no attack-time
/// stochasticity and `loss_and_input_grad` returns a gradient with the same
/// shape as the input.
pub trait Classifier: Sync {
    fn num_classes(&self) -> usize;

    /// (channels, height, width) accepted by `forward`.
    fn input_shape(&self) -> (usize, usize, usize);

    /// Raw class scores; finite, length `num_classes`.
    fn forward(&self, img: &ImageTensor) -> Result<Vec<f32>>;

    /// Softmax cross-entropy of the true class and its exact gradient with
    /// respect to the input pixels.
    fn loss_and_input_grad(&self, img: &ImageTensor, label: usize) -> Result<(f32, ImageTensor)>;

    /// Predicted class index.
    fn predict(&self, img: &ImageTensor) -> Result<usize> {
        let logits = self.forward(img)?;
        Ok(argmax(&logits))
    }
}

pub(crate) fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Fraction of samples the model classifies correctly.
pub fn accuracy(model: &dyn Classifier, data: &[LabeledImage]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Argument("accuracy over an empty dataset".into()));
    }
    let mut hits = 0usize;
    for sample in data {
        if model.predict(&sample.image)? == sample.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Numerically stable softmax cross-entropy: returns the loss and
/// `d loss / d logits` (softmax minus one-hot).
pub(crate) fn softmax_cross_entropy<T: Float + std::iter::Sum>(
    logits: &[T],
    label: usize,
) -> (T, Vec<T>) {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    let loss = sum.ln() - (logits[label] - max);
    let grad = exps
        .iter()
        .enumerate()
        .map(|(k, &e)| {
            let p = e / sum;
            if k == label {
                p - T::one()
            } else {
                p
            }
        })
        .collect();
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_loss_is_ln_c() {
        for c in [2usize, 4, 10] {
            let logits = vec![0.7f64; c];
            let (loss, _) = softmax_cross_entropy(&logits, 0);
            assert!((loss - (c as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn logit_translation_leaves_loss_and_grad_unchanged() {
        let logits = [1.25f64, -0.5, 3.0, 0.1];
        let shifted: Vec<f64> = logits.iter().map(|z| z + 41.5).collect();
        let (l0, g0) = softmax_cross_entropy(&logits, 2);
        let (l1, g1) = softmax_cross_entropy(&shifted, 2);
        assert!((l0 - l1).abs() < 1e-6);
        for (a, b) in g0.iter().zip(&g1) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn grad_sums_to_zero() {
        let logits = [0.3f64, 1.7, -2.0];
        let (_, g) = softmax_cross_entropy(&logits, 1);
        let sum: f64 = g.iter().sum();
        assert!(sum.abs() < 1e-12);
    }
}
