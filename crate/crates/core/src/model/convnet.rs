//! A small convolutional classifier with a hand-written backward pass.
//!
//! Two 3x3 stride-1 zero-padded convolutions, each followed by a rectifier
//! and 2x2 average pooling, then one fully connected layer. Average pooling
//! keeps gradients smooth, which makes finite-difference verification tight
//! everywhere. All math is generic over the float width: the attack pipeline
//! runs `f32`, gradient verification runs a 64-bit shadow of the same code.

use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{softmax_cross_entropy, Classifier, LabeledImage};
use crate::tensor::ImageTensor;

/// Architecture of a [`TinyConvNet`]. Height and width must be divisible by 4
/// (two pooling stages).
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConvNetConfig {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub conv1_channels: usize,
    pub conv2_channels: usize,
    pub num_classes: usize,
}

impl ConvNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0
            || self.conv1_channels == 0
            || self.conv2_channels == 0
            || self.num_classes == 0
        {
            return Err(Error::Argument("all channel counts must be >= 1".into()));
        }
        if self.height % 4 != 0 || self.width % 4 != 0 || self.height == 0 || self.width == 0 {
            return Err(Error::Argument(format!(
                "input {}x{} must be divisible by 4 for two pooling stages",
                self.height, self.width
            )));
        }
        Ok(())
    }

    fn flat_len(&self) -> usize {
        self.conv2_channels * (self.height / 4) * (self.width / 4)
    }

    /// Total number of parameters.
    pub fn param_count(&self) -> usize {
        let w1 = self.conv1_channels * self.in_channels * 9;
        let w2 = self.conv2_channels * self.conv1_channels * 9;
        let wf = self.num_classes * self.flat_len();
        w1 + self.conv1_channels + w2 + self.conv2_channels + wf + self.num_classes
    }

    /// Slice offsets of each parameter block inside the flat vector.
    fn layout(&self) -> Layout {
        let w1_len = self.conv1_channels * self.in_channels * 9;
        let w2_len = self.conv2_channels * self.conv1_channels * 9;
        let wf_len = self.num_classes * self.flat_len();
        let b1 = w1_len;
        let w2 = b1 + self.conv1_channels;
        let b2 = w2 + w2_len;
        let wf = b2 + self.conv2_channels;
        let bf = wf + wf_len;
        Layout {
            w1: 0..w1_len,
            b1: b1..w2,
            w2: w2..b2,
            b2: b2..wf,
            wf: wf..bf,
            bf: bf..bf + self.num_classes,
        }
    }
}

struct Layout {
    w1: std::ops::Range<usize>,
    b1: std::ops::Range<usize>,
    w2: std::ops::Range<usize>,
    b2: std::ops::Range<usize>,
    wf: std::ops::Range<usize>,
    bf: std::ops::Range<usize>,
}

/// The built-in surrogate/target network.
#[derive(Clone, Debug)]
pub struct TinyConvNet {
    cfg: ConvNetConfig,
    params: Vec<f32>,
}

impl TinyConvNet {
    /// Fresh network with uniform He-style initialization drawn from `rng`.
    pub fn new(cfg: ConvNetConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        let layout = cfg.layout();
        let mut params = vec![0.0f32; cfg.param_count()];
        let mut init = |range: std::ops::Range<usize>, fan_in: usize, params: &mut Vec<f32>| {
            let limit = (6.0 / fan_in as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.gen_range(-limit..limit) as f32;
            }
        };
        init(layout.w1.clone(), cfg.in_channels * 9, &mut params);
        init(layout.w2.clone(), cfg.conv1_channels * 9, &mut params);
        init(layout.wf.clone(), cfg.flat_len(), &mut params);
        Ok(Self { cfg, params })
    }

    /// All-zero parameters; useful as a degenerate reference.
    pub fn zeroed(cfg: ConvNetConfig) -> Result<Self> {
        cfg.validate()?;
        let params = vec![0.0f32; cfg.param_count()];
        Ok(Self { cfg, params })
    }

    /// Rebuilds a network from a flat parameter vector.
    pub fn from_params(cfg: ConvNetConfig, params: Vec<f32>) -> Result<Self> {
        cfg.validate()?;
        if params.len() != cfg.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                cfg.param_count(),
                params.len()
            )));
        }
        Ok(Self { cfg, params })
    }

    pub fn config(&self) -> &ConvNetConfig {
        &self.cfg
    }

    pub fn params(&self) -> &[f32] {
        &self.params
    }

    fn check_input(&self, img: &ImageTensor) -> Result<()> {
        let expected = (self.cfg.in_channels, self.cfg.height, self.cfg.width);
        if img.shape() != expected {
            return Err(Error::Shape(format!(
                "input {:?} does not match model input {:?}",
                img.shape(),
                expected
            )));
        }
        Ok(())
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.cfg.num_classes {
            return Err(Error::Argument(format!(
                "label {label} outside {} classes",
                self.cfg.num_classes
            )));
        }
        Ok(())
    }

    /// 64-bit shadow of the loss, for independent gradient verification.
    pub fn loss_f64(&self, img: &ImageTensor, label: usize) -> Result<f64> {
        self.check_input(img)?;
        self.check_label(label)?;
        let params: Vec<f64> = self.params.iter().map(|&p| p as f64).collect();
        let input: Vec<f64> = img.data().iter().map(|&v| v as f64).collect();
        let cache = forward_cache(&self.cfg, &params, &input)?;
        let (loss, _) = softmax_cross_entropy(&cache.logits, label);
        Ok(loss)
    }

    /// 64-bit shadow of the analytic input gradient.
    pub fn input_grad_f64(&self, img: &ImageTensor, label: usize) -> Result<Vec<f64>> {
        self.check_input(img)?;
        self.check_label(label)?;
        let params: Vec<f64> = self.params.iter().map(|&p| p as f64).collect();
        let input: Vec<f64> = img.data().iter().map(|&v| v as f64).collect();
        let cache = forward_cache(&self.cfg, &params, &input)?;
        let (_, dlogits) = softmax_cross_entropy(&cache.logits, label);
        Ok(input_grad(&self.cfg, &params, &cache, &dlogits))
    }

    /// Minibatch SGD over `data`. Deterministic given the generator; errors if
    /// the loss goes non-finite.
    pub fn train(
        &mut self,
        data: &[LabeledImage],
        cfg: &TrainConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<TrainReport> {
        if data.is_empty() {
            return Err(Error::Argument("training on an empty dataset".into()));
        }
        if cfg.batch_size == 0 {
            return Err(Error::Argument("batch_size must be >= 1".into()));
        }
        for sample in data {
            self.check_input(&sample.image)?;
            self.check_label(sample.label)?;
        }
        let augment_cfg = crate::bss::BssConfig {
            seg: crate::segmentation::SegmentationConfig {
                points: 2,
                border_margin: (self.cfg.height.min(self.cfg.width) / 6).max(2) as u32,
                min_point_distance: 2,
                constrained: true,
            },
            ratio: 1.0,
            number_scale: 1,
            axes_mode: crate::bss::AxesMode::TwoAxis,
            target_length_mode: crate::bss::TargetLengthMode::TotalShare,
        };
        let param_count = self.cfg.param_count();
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut grad = vec![0.0f32; param_count];
        let mut epoch_losses = Vec::with_capacity(cfg.epochs);
        for _ in 0..cfg.epochs {
            shuffle(&mut order, rng);
            let mut epoch_loss = 0.0f64;
            for batch in order.chunks(cfg.batch_size) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                let mut batch_loss = 0.0f64;
                for &idx in batch {
                    let sample = &data[idx];
                    let image = if cfg.stretch_augment > 0.0 && rng.gen::<f64>() < cfg.stretch_augment
                    {
                        crate::bss::bss_transform(&sample.image, &augment_cfg, rng)?
                    } else {
                        sample.image.clone()
                    };
                    let cache = forward_cache(&self.cfg, &self.params, image.data())?;
                    let (loss, dlogits) = softmax_cross_entropy(&cache.logits, sample.label);
                    if !loss.is_finite() {
                        return Err(Error::Training(format!("non-finite loss {loss}")));
                    }
                    batch_loss += loss as f64;
                    param_grad(
                        &self.cfg,
                        &self.params,
                        image.data(),
                        &cache,
                        &dlogits,
                        &mut grad,
                    );
                }
                let scale = cfg.learning_rate as f32 / batch.len() as f32;
                for (p, g) in self.params.iter_mut().zip(&grad) {
                    *p -= scale * g;
                }
                epoch_loss += batch_loss;
            }
            epoch_losses.push(epoch_loss / data.len() as f64);
        }
        let mut hits = 0usize;
        for sample in data {
            if self.predict(&sample.image)? == sample.label {
                hits += 1;
            }
        }
        Ok(TrainReport {
            epoch_losses,
            train_accuracy: hits as f64 / data.len() as f64,
        })
    }
}

/// Fisher-Yates shuffle driven by the training generator.
fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
}

impl Classifier for TinyConvNet {
    fn num_classes(&self) -> usize {
        self.cfg.num_classes
    }

    fn input_shape(&self) -> (usize, usize, usize) {
        (self.cfg.in_channels, self.cfg.height, self.cfg.width)
    }

    fn forward(&self, img: &ImageTensor) -> Result<Vec<f32>> {
        self.check_input(img)?;
        Ok(forward_cache(&self.cfg, &self.params, img.data())?.logits)
    }

    fn loss_and_input_grad(&self, img: &ImageTensor, label: usize) -> Result<(f32, ImageTensor)> {
        self.check_input(img)?;
        self.check_label(label)?;
        let cache = forward_cache(&self.cfg, &self.params, img.data())?;
        let (loss, dlogits) = softmax_cross_entropy(&cache.logits, label);
        let grad = input_grad(&self.cfg, &self.params, &cache, &dlogits);
        let grad = ImageTensor::from_vec(self.cfg.in_channels, self.cfg.height, self.cfg.width, grad)?;
        Ok((loss, grad))
    }
}

/// Training hyperparameters for [`TinyConvNet::train`].
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Probability of replacing a training sample with a mildly
    /// stretch-augmented copy, the desk-scale counterpart of the usual
    /// scale/aspect augmentation. Geometry-tolerant models are a
    /// precondition for warping transforms to preserve what the model sees.
    pub stretch_augment: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 8,
            learning_rate: 0.05,
            batch_size: 16,
            stretch_augment: 0.0,
        }
    }
}

/// What a training run produced.
#[derive(Clone, Debug, serde::Serialize)]
pub struct TrainReport {
    /// Mean loss per epoch, in order.
    pub epoch_losses: Vec<f64>,
    /// Accuracy over the training set after the final epoch.
    pub train_accuracy: f64,
}

// ---------------------------------------------------------------------------
// Width-generic network math.
// ---------------------------------------------------------------------------

trait Scalar: Float + std::ops::AddAssign + std::iter::Sum {}
impl<T: Float + std::ops::AddAssign + std::iter::Sum> Scalar for T {}

struct Cache<T> {
    pre1: Vec<T>,
    pool1: Vec<T>,
    pre2: Vec<T>,
    pool2: Vec<T>,
    logits: Vec<T>,
}

fn forward_cache<T: Scalar>(cfg: &ConvNetConfig, params: &[T], input: &[T]) -> Result<Cache<T>> {
    let layout = cfg.layout();
    let (h, w) = (cfg.height, cfg.width);
    let (h2, w2) = (h / 2, w / 2);

    let pre1 = conv3x3(
        input,
        cfg.in_channels,
        h,
        w,
        &params[layout.w1],
        &params[layout.b1],
        cfg.conv1_channels,
    );
    let act1 = relu(&pre1);
    let pool1 = avgpool2(&act1, cfg.conv1_channels, h, w);

    let pre2 = conv3x3(
        &pool1,
        cfg.conv1_channels,
        h2,
        w2,
        &params[layout.w2],
        &params[layout.b2],
        cfg.conv2_channels,
    );
    let act2 = relu(&pre2);
    let pool2 = avgpool2(&act2, cfg.conv2_channels, h2, w2);

    let flat_len = cfg.flat_len();
    let wf = &params[layout.wf];
    let bf = &params[layout.bf];
    let mut logits = Vec::with_capacity(cfg.num_classes);
    for k in 0..cfg.num_classes {
        let row = &wf[k * flat_len..(k + 1) * flat_len];
        let mut acc = bf[k];
        for (w, v) in row.iter().zip(&pool2) {
            acc += *w * *v;
        }
        if !acc.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite logit for class {k}"
            )));
        }
        logits.push(acc);
    }
    Ok(Cache {
        pre1,
        pool1,
        pre2,
        pool2,
        logits,
    })
}

/// Exact gradient of the loss with respect to the input pixels.
fn input_grad<T: Scalar>(cfg: &ConvNetConfig, params: &[T], cache: &Cache<T>, dlogits: &[T]) -> Vec<T> {
    let layout = cfg.layout();
    let (h, w) = (cfg.height, cfg.width);
    let (h2, w2) = (h / 2, w / 2);
    let flat_len = cfg.flat_len();

    // Fully connected transpose.
    let wf = &params[layout.wf];
    let mut dpool2 = vec![T::zero(); flat_len];
    for (k, &dl) in dlogits.iter().enumerate() {
        let row = &wf[k * flat_len..(k + 1) * flat_len];
        for (d, w) in dpool2.iter_mut().zip(row) {
            *d += *w * dl;
        }
    }

    // Second stage: unpool, rectifier mask, convolution transpose.
    let dact2 = avgpool2_grad(&dpool2, cfg.conv2_channels, h2, w2);
    let dpre2 = relu_grad(&cache.pre2, &dact2);
    let dpool1 = conv3x3_input_grad(&dpre2, cfg.conv1_channels, h2, w2, &params[layout.w2], cfg.conv2_channels);

    // First stage.
    let dact1 = avgpool2_grad(&dpool1, cfg.conv1_channels, h, w);
    let dpre1 = relu_grad(&cache.pre1, &dact1);
    conv3x3_input_grad(&dpre1, cfg.in_channels, h, w, &params[layout.w1], cfg.conv1_channels)
}

/// Accumulates the parameter gradient for one sample into `out`.
fn param_grad<T: Scalar>(
    cfg: &ConvNetConfig,
    params: &[T],
    input: &[T],
    cache: &Cache<T>,
    dlogits: &[T],
    out: &mut [T],
) {
    let layout = cfg.layout();
    let (h, w) = (cfg.height, cfg.width);
    let (h2, w2) = (h / 2, w / 2);
    let flat_len = cfg.flat_len();

    let wf = &params[layout.wf.clone()];
    let mut dpool2 = vec![T::zero(); flat_len];
    {
        let (dwf, dbf) = {
            let (head, tail) = out.split_at_mut(layout.bf.start);
            (&mut head[layout.wf.clone()], tail)
        };
        for (k, &dl) in dlogits.iter().enumerate() {
            dbf[k] += dl;
            let wrow = &wf[k * flat_len..(k + 1) * flat_len];
            let drow = &mut dwf[k * flat_len..(k + 1) * flat_len];
            for j in 0..flat_len {
                drow[j] += dl * cache.pool2[j];
                dpool2[j] += wrow[j] * dl;
            }
        }
    }

    let dact2 = avgpool2_grad(&dpool2, cfg.conv2_channels, h2, w2);
    let dpre2 = relu_grad(&cache.pre2, &dact2);
    conv3x3_param_grad(
        &cache.pool1,
        &dpre2,
        cfg.conv1_channels,
        h2,
        w2,
        cfg.conv2_channels,
        &mut out[layout.w2.clone()],
    );
    accumulate_bias(&dpre2, h2 * w2, &mut out[layout.b2.clone()]);
    let dpool1 = conv3x3_input_grad(&dpre2, cfg.conv1_channels, h2, w2, &params[layout.w2], cfg.conv2_channels);

    let dact1 = avgpool2_grad(&dpool1, cfg.conv1_channels, h, w);
    let dpre1 = relu_grad(&cache.pre1, &dact1);
    conv3x3_param_grad(
        input,
        &dpre1,
        cfg.in_channels,
        h,
        w,
        cfg.conv1_channels,
        &mut out[layout.w1.clone()],
    );
    accumulate_bias(&dpre1, h * w, &mut out[layout.b1.clone()]);
}

/// 3x3 convolution, stride 1, zero padding 1. Weights are laid out as
/// `[out_c][in_c][ky][kx]`.
fn conv3x3<T: Scalar>(
    input: &[T],
    in_c: usize,
    h: usize,
    w: usize,
    weights: &[T],
    bias: &[T],
    out_c: usize,
) -> Vec<T> {
    let mut out = vec![T::zero(); out_c * h * w];
    for oc in 0..out_c {
        let out_plane = &mut out[oc * h * w..(oc + 1) * h * w];
        out_plane.iter_mut().for_each(|v| *v = bias[oc]);
        for ic in 0..in_c {
            let in_plane = &input[ic * h * w..(ic + 1) * h * w];
            let kernel = &weights[(oc * in_c + ic) * 9..(oc * in_c + ic + 1) * 9];
            for (ky, krow) in kernel.chunks_exact(3).enumerate() {
                for (kx, &kval) in krow.iter().enumerate() {
                    // Output rows/cols whose sample (y + ky - 1, x + kx - 1)
                    // falls inside the input.
                    let y_start = 1usize.saturating_sub(ky);
                    let y_end = (h + 1 - ky).min(h);
                    let x_start = 1usize.saturating_sub(kx);
                    let x_end = (w + 1 - kx).min(w);
                    for y in y_start..y_end {
                        let src = (y + ky - 1) * w;
                        let dst = y * w;
                        for x in x_start..x_end {
                            out_plane[dst + x] += kval * in_plane[src + x + kx - 1];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Transpose of [`conv3x3`] with respect to its input.
fn conv3x3_input_grad<T: Scalar>(
    dout: &[T],
    in_c: usize,
    h: usize,
    w: usize,
    weights: &[T],
    out_c: usize,
) -> Vec<T> {
    let mut dinput = vec![T::zero(); in_c * h * w];
    for oc in 0..out_c {
        let dplane = &dout[oc * h * w..(oc + 1) * h * w];
        for ic in 0..in_c {
            let din_plane = &mut dinput[ic * h * w..(ic + 1) * h * w];
            let kernel = &weights[(oc * in_c + ic) * 9..(oc * in_c + ic + 1) * 9];
            for (ky, krow) in kernel.chunks_exact(3).enumerate() {
                for (kx, &kval) in krow.iter().enumerate() {
                    let y_start = 1usize.saturating_sub(ky);
                    let y_end = (h + 1 - ky).min(h);
                    let x_start = 1usize.saturating_sub(kx);
                    let x_end = (w + 1 - kx).min(w);
                    for y in y_start..y_end {
                        let src = y * w;
                        let dst = (y + ky - 1) * w;
                        for x in x_start..x_end {
                            din_plane[dst + x + kx - 1] += kval * dplane[src + x];
                        }
                    }
                }
            }
        }
    }
    dinput
}

/// Gradient of [`conv3x3`] with respect to its weights.
fn conv3x3_param_grad<T: Scalar>(
    input: &[T],
    dout: &[T],
    in_c: usize,
    h: usize,
    w: usize,
    out_c: usize,
    dweights: &mut [T],
) {
    for oc in 0..out_c {
        let dplane = &dout[oc * h * w..(oc + 1) * h * w];
        for ic in 0..in_c {
            let in_plane = &input[ic * h * w..(ic + 1) * h * w];
            let dkernel = &mut dweights[(oc * in_c + ic) * 9..(oc * in_c + ic + 1) * 9];
            for ky in 0..3 {
                for kx in 0..3 {
                    let y_start = 1usize.saturating_sub(ky);
                    let y_end = (h + 1 - ky).min(h);
                    let x_start = 1usize.saturating_sub(kx);
                    let x_end = (w + 1 - kx).min(w);
                    let mut acc = T::zero();
                    for y in y_start..y_end {
                        let src = (y + ky - 1) * w;
                        let dst = y * w;
                        for x in x_start..x_end {
                            acc += dplane[dst + x] * in_plane[src + x + kx - 1];
                        }
                    }
                    dkernel[ky * 3 + kx] += acc;
                }
            }
        }
    }
}

fn accumulate_bias<T: Scalar>(dout: &[T], plane: usize, dbias: &mut [T]) {
    for (c, db) in dbias.iter_mut().enumerate() {
        for &d in &dout[c * plane..(c + 1) * plane] {
            *db += d;
        }
    }
}

fn relu<T: Scalar>(pre: &[T]) -> Vec<T> {
    pre.iter().map(|&v| v.max(T::zero())).collect()
}

/// Rectifier mask: passes gradient where the pre-activation is positive.
fn relu_grad<T: Scalar>(pre: &[T], dact: &[T]) -> Vec<T> {
    pre.iter()
        .zip(dact)
        .map(|(&p, &d)| if p > T::zero() { d } else { T::zero() })
        .collect()
}

/// 2x2 average pooling with stride 2.
fn avgpool2<T: Scalar>(input: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let (oh, ow) = (h / 2, w / 2);
    let quarter = T::from(0.25).expect("constant");
    let mut out = vec![T::zero(); c * oh * ow];
    for ch in 0..c {
        let plane = &input[ch * h * w..(ch + 1) * h * w];
        let out_plane = &mut out[ch * oh * ow..(ch + 1) * oh * ow];
        for y in 0..oh {
            for x in 0..ow {
                let base = 2 * y * w + 2 * x;
                out_plane[y * ow + x] =
                    (plane[base] + plane[base + 1] + plane[base + w] + plane[base + w + 1]) * quarter;
            }
        }
    }
    out
}

/// Transpose of [`avgpool2`]: spreads each gradient over its 2x2 window.
fn avgpool2_grad<T: Scalar>(dout: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let (oh, ow) = (h / 2, w / 2);
    let quarter = T::from(0.25).expect("constant");
    let mut dinput = vec![T::zero(); c * h * w];
    for ch in 0..c {
        let dplane = &dout[ch * oh * ow..(ch + 1) * oh * ow];
        let din_plane = &mut dinput[ch * h * w..(ch + 1) * h * w];
        for y in 0..oh {
            for x in 0..ow {
                let d = dplane[y * ow + x] * quarter;
                let base = 2 * y * w + 2 * x;
                din_plane[base] = d;
                din_plane[base + 1] = d;
                din_plane[base + w] = d;
                din_plane[base + w + 1] = d;
            }
        }
    }
    dinput
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn small_cfg() -> ConvNetConfig {
        ConvNetConfig {
            in_channels: 1,
            height: 8,
            width: 8,
            conv1_channels: 3,
            conv2_channels: 4,
            num_classes: 4,
        }
    }

    fn random_image(cfg: &ConvNetConfig, seed: u64) -> ImageTensor {
        let mut rng = RngStream::from_seed(seed).rng();
        let data = (0..cfg.in_channels * cfg.height * cfg.width)
            .map(|_| rng.gen_range(0.0..1.0))
            .collect();
        ImageTensor::from_vec(cfg.in_channels, cfg.height, cfg.width, data).unwrap()
    }

    #[test]
    fn zero_net_gives_zero_logits() {
        let net = TinyConvNet::zeroed(small_cfg()).unwrap();
        let img = ImageTensor::zeros(1, 8, 8);
        let logits = net.forward(&img).unwrap();
        assert_eq!(logits, vec![0.0; 4]);
    }

    #[test]
    fn forward_length_matches_classes() {
        let cfg = small_cfg();
        let net = TinyConvNet::new(cfg, &mut RngStream::from_seed(1).rng()).unwrap();
        let logits = net.forward(&random_image(&cfg, 2)).unwrap();
        assert_eq!(logits.len(), cfg.num_classes);
        assert!(logits.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn forward_rejects_wrong_shape() {
        let net = TinyConvNet::new(small_cfg(), &mut RngStream::from_seed(1).rng()).unwrap();
        let img = ImageTensor::zeros(1, 8, 12);
        assert!(matches!(net.forward(&img), Err(Error::Shape(_))));
    }

    #[test]
    fn input_gradient_matches_central_differences() {
        let cfg = small_cfg();
        let net = TinyConvNet::new(cfg, &mut RngStream::from_seed(3).rng()).unwrap();
        let img = random_image(&cfg, 4);
        let label = 1;
        let analytic = net.input_grad_f64(&img, label).unwrap();

        let mut rng = RngStream::from_seed(5).rng();
        let h = 1e-4f64;
        for _ in 0..120 {
            let idx = rng.gen_range(0..analytic.len());
            let mut plus64 = img.data().iter().map(|&v| v as f64).collect::<Vec<_>>();
            plus64[idx] += h;
            let mut minus64 = img.data().iter().map(|&v| v as f64).collect::<Vec<_>>();
            minus64[idx] -= h;
            let loss_plus = net_loss_f64_at(&net, &plus64, label);
            let loss_minus = net_loss_f64_at(&net, &minus64, label);
            let fd = (loss_plus - loss_minus) / (2.0 * h);
            let denom = analytic[idx].abs().max(fd.abs()).max(1e-10);
            assert!(
                (analytic[idx] - fd).abs() / denom < 1e-4,
                "coordinate {idx}: analytic {} vs fd {fd}",
                analytic[idx]
            );
        }
    }

    fn net_loss_f64_at(net: &TinyConvNet, input: &[f64], label: usize) -> f64 {
        let params: Vec<f64> = net.params().iter().map(|&p| p as f64).collect();
        let cache = forward_cache(net.config(), &params, input).unwrap();
        softmax_cross_entropy(&cache.logits, label).0
    }

    #[test]
    fn f32_and_f64_paths_agree() {
        let cfg = small_cfg();
        let net = TinyConvNet::new(cfg, &mut RngStream::from_seed(9).rng()).unwrap();
        let img = random_image(&cfg, 10);
        let (loss32, grad32) = net.loss_and_input_grad(&img, 2).unwrap();
        let loss64 = net.loss_f64(&img, 2).unwrap();
        let grad64 = net.input_grad_f64(&img, 2).unwrap();
        assert!((loss32 as f64 - loss64).abs() < 1e-4);
        for (a, b) in grad32.data().iter().zip(&grad64) {
            assert!((*a as f64 - b).abs() < 1e-4);
        }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let cfg = small_cfg();
        let mut net = TinyConvNet::new(cfg, &mut RngStream::from_seed(11).rng()).unwrap();
        let before = net.params().to_vec();
        let data: Vec<LabeledImage> = (0..10)
            .map(|i| LabeledImage {
                image: random_image(&cfg, 100 + i),
                label: (i as usize) % 4,
            })
            .collect();
        let cfg_train = TrainConfig {
            epochs: 1,
            learning_rate: 0.0,
            batch_size: 4,
            ..TrainConfig::default()
        };
        net.train(&data, &cfg_train, &mut RngStream::from_seed(12).rng())
            .unwrap();
        assert_eq!(net.params(), &before[..]);
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let cfg = small_cfg();
        let data: Vec<LabeledImage> = (0..16)
            .map(|i| LabeledImage {
                image: random_image(&cfg, 200 + i),
                label: (i as usize) % 4,
            })
            .collect();
        let run = |seed: u64| {
            let mut net = TinyConvNet::new(cfg, &mut RngStream::from_seed(seed).rng()).unwrap();
            net.train(
                &data,
                &TrainConfig {
                    epochs: 2,
                    learning_rate: 0.05,
                    batch_size: 4,
                    ..TrainConfig::default()
                },
                &mut RngStream::from_seed(seed ^ 0xdead).rng(),
            )
            .unwrap();
            net.params().to_vec()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn batched_duplicates_leave_mean_gradient_unchanged() {
        // Mean reduction over identical samples equals the single-sample
        // parameter gradient, so one step with lr > 0 matches.
        let cfg = small_cfg();
        let img = random_image(&cfg, 77);
        let sample = LabeledImage { image: img, label: 3 };
        let train_once = |copies: usize| {
            let mut net = TinyConvNet::new(cfg, &mut RngStream::from_seed(5).rng()).unwrap();
            let data = vec![sample.clone(); copies];
            net.train(
                &data,
                &TrainConfig {
                    epochs: 1,
                    learning_rate: 0.1,
                    batch_size: copies,
                    ..TrainConfig::default()
                },
                &mut RngStream::from_seed(6).rng(),
            )
            .unwrap();
            net.params().to_vec()
        };
        let one = train_once(1);
        let four = train_once(4);
        for (a, b) in one.iter().zip(&four) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}
