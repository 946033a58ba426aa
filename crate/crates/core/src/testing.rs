//! Closed-form reference models used by the test suites. Not part of the
//! public API surface.

use rand::Rng;

use crate::error::Result;
use crate::model::{softmax_cross_entropy, Classifier};
use crate::rng::RngStream;
use crate::tensor::ImageTensor;

/// A bias-free linear softmax classifier: `logits = W x`. Its loss gradient
/// with respect to the input has the closed form `W^T (softmax - onehot)`,
/// which makes attack trajectories analytically checkable.
pub struct LinearSoftmax {
    channels: usize,
    height: usize,
    width: usize,
    classes: usize,
    /// Row-major `[classes][channels * height * width]`.
    weights: Vec<f32>,
}

impl LinearSoftmax {
    pub fn new(channels: usize, height: usize, width: usize, classes: usize, weights: Vec<f32>) -> Self {
        assert_eq!(weights.len(), classes * channels * height * width);
        Self {
            channels,
            height,
            width,
            classes,
            weights,
        }
    }

    /// Dense random weights, deterministic per seed.
    pub fn seeded(channels: usize, height: usize, width: usize, classes: usize, seed: u64) -> Self {
        let dim = channels * height * width;
        let mut rng = RngStream::from_seed(seed).rng();
        let scale = 1.0 / (dim as f32).sqrt();
        let weights = (0..classes * dim)
            .map(|_| rng.gen_range(-1.0f32..1.0) * scale)
            .collect();
        Self::new(channels, height, width, classes, weights)
    }
}

impl Classifier for LinearSoftmax {
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn input_shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    fn forward(&self, img: &ImageTensor) -> Result<Vec<f32>> {
        let dim = self.channels * self.height * self.width;
        Ok((0..self.classes)
            .map(|k| {
                self.weights[k * dim..(k + 1) * dim]
                    .iter()
                    .zip(img.data())
                    .map(|(w, v)| w * v)
                    .sum()
            })
            .collect())
    }

    fn loss_and_input_grad(&self, img: &ImageTensor, label: usize) -> Result<(f32, ImageTensor)> {
        let logits = self.forward(img)?;
        let (loss, dlogits) = softmax_cross_entropy(&logits, label);
        let dim = self.channels * self.height * self.width;
        let mut grad = vec![0.0f32; dim];
        for (k, &dl) in dlogits.iter().enumerate() {
            for (g, w) in grad.iter_mut().zip(&self.weights[k * dim..(k + 1) * dim]) {
                *g += w * dl;
            }
        }
        Ok((
            loss,
            ImageTensor::from_vec(self.channels, self.height, self.width, grad)?,
        ))
    }
}

/// A model whose loss is the fixed linear functional `<pattern, x>`, so the
/// input gradient is exactly `pattern` at every point.
pub struct ConstantGradientModel {
    pattern: ImageTensor,
    classes: usize,
}

impl ConstantGradientModel {
    pub fn new(pattern: ImageTensor, classes: usize) -> Self {
        Self { pattern, classes }
    }
}

impl Classifier for ConstantGradientModel {
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn input_shape(&self) -> (usize, usize, usize) {
        self.pattern.shape()
    }

    fn forward(&self, _img: &ImageTensor) -> Result<Vec<f32>> {
        Ok(vec![0.0; self.classes])
    }

    fn loss_and_input_grad(&self, img: &ImageTensor, _label: usize) -> Result<(f32, ImageTensor)> {
        let loss = self
            .pattern
            .data()
            .iter()
            .zip(img.data())
            .map(|(p, v)| p * v)
            .sum();
        Ok((loss, self.pattern.clone()))
    }
}
