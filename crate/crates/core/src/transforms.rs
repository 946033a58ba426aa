//! The transform interface shared by every attack method, plus the lightweight
//! comparison baselines: a scale ensemble, random resize-and-pad, and block
//! shuffle-with-rotation.
//!
//! Every method maps `x` to exactly `number_scale` images of the original
//! shape. Each transformed image carries a trace so the loss gradient can be
//! pulled back through the (linear) transform exactly; `GradMode::ImageSpace`
//! skips that and treats the transformed image as the differentiation
//! variable, matching common reference implementations.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bss::{bss_transform_traced, BssConfig, BssTrace};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::{Axis, ImageTensor};

/// How gradients cross the input transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradMode {
    /// Backpropagate through the transform via its exact transpose.
    Exact,
    /// Use the model gradient at the transformed image directly.
    ImageSpace,
}

/// An input transformation method together with its parameters.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum TransformMethod {
    /// Plain momentum attack: the single identity "transform".
    None,
    /// Block stretch and shrink in any of its variants.
    Bss(BssConfig),
    /// Pixel-value scale ensemble: variant `k` is `x / 2^k`.
    ScaleEnsemble { depth: usize },
    /// Random downscale to a fraction of the original size, zero-padded back
    /// at a random offset.
    ResizePad { number_scale: usize, min_scale: f64 },
    /// Grid shuffle with a small random rotation per block.
    BlockShuffleRotate {
        number_scale: usize,
        grid: usize,
        max_angle_deg: f64,
    },
}

impl TransformMethod {
    /// Number of transformed images generated per input.
    pub fn number_scale(&self) -> usize {
        match self {
            TransformMethod::None => 1,
            TransformMethod::Bss(cfg) => cfg.number_scale,
            TransformMethod::ScaleEnsemble { depth } => *depth,
            TransformMethod::ResizePad { number_scale, .. } => *number_scale,
            TransformMethod::BlockShuffleRotate { number_scale, .. } => *number_scale,
        }
    }

    /// Forces the method to a unified number scale. `None` cannot expand and
    /// is returned unchanged.
    pub fn with_number_scale(mut self, n: usize) -> Self {
        match &mut self {
            TransformMethod::None => {}
            TransformMethod::Bss(cfg) => cfg.number_scale = n,
            TransformMethod::ScaleEnsemble { depth } => *depth = n,
            TransformMethod::ResizePad { number_scale, .. } => *number_scale = n,
            TransformMethod::BlockShuffleRotate { number_scale, .. } => *number_scale = n,
        }
        self
    }

    /// Stable label used in result tables.
    pub fn label(&self) -> String {
        match self {
            TransformMethod::None => "none".into(),
            TransformMethod::Bss(cfg) => {
                use crate::bss::AxesMode;
                match (cfg.axes_mode, cfg.seg.constrained) {
                    (AxesMode::TwoAxis, true) => "bss".into(),
                    (AxesMode::TwoAxis, false) => "2d-bss-rp".into(),
                    (AxesMode::OneAxis, true) => "1d-bss".into(),
                    (AxesMode::OneAxis, false) => "1d-bss-rp".into(),
                }
            }
            TransformMethod::ScaleEnsemble { .. } => "scale-ensemble".into(),
            TransformMethod::ResizePad { .. } => "resize-pad".into(),
            TransformMethod::BlockShuffleRotate { .. } => "block-shuffle-rotate".into(),
        }
    }

    /// Applies the method: variant `k` consumes child stream `k`, so outputs
    /// are independent of evaluation order. Every output has `x`'s shape.
    pub fn apply(&self, x: &ImageTensor, stream: RngStream) -> Result<Vec<TransformedImage>> {
        match self {
            TransformMethod::None => Ok(vec![TransformedImage {
                image: x.clone(),
                trace: Trace::Identity,
            }]),
            TransformMethod::Bss(cfg) => (0..cfg.number_scale)
                .map(|k| {
                    let (image, trace) =
                        bss_transform_traced(x, cfg, &mut stream.child(k as u64).rng())?;
                    Ok(TransformedImage {
                        image,
                        trace: Trace::Bss(trace),
                    })
                })
                .collect(),
            TransformMethod::ScaleEnsemble { depth } => {
                if *depth == 0 {
                    return Err(Error::Argument("scale ensemble depth must be >= 1".into()));
                }
                Ok((0..*depth)
                    .map(|k| {
                        let factor = 0.5f32.powi(k as i32);
                        TransformedImage {
                            image: x.scale(factor),
                            trace: Trace::Scale { factor },
                        }
                    })
                    .collect())
            }
            TransformMethod::ResizePad {
                number_scale,
                min_scale,
            } => {
                if !(0.0 < *min_scale && *min_scale <= 1.0) {
                    return Err(Error::Argument(format!(
                        "resize-pad min_scale {min_scale} outside (0, 1]"
                    )));
                }
                (0..*number_scale)
                    .map(|k| resize_pad(x, *min_scale, &mut stream.child(k as u64).rng()))
                    .collect()
            }
            TransformMethod::BlockShuffleRotate {
                number_scale,
                grid,
                max_angle_deg,
            } => {
                if *grid == 0 || x.height() < *grid || x.width() < *grid {
                    return Err(Error::Argument(format!(
                        "grid {grid} does not fit a {}x{} image",
                        x.height(),
                        x.width()
                    )));
                }
                (0..*number_scale)
                    .map(|k| {
                        shuffle_rotate(x, *grid, *max_angle_deg, &mut stream.child(k as u64).rng())
                    })
                    .collect()
            }
        }
    }
}

/// One transformed variant plus what is needed to transpose the transform.
#[derive(Clone, Debug)]
pub struct TransformedImage {
    pub image: ImageTensor,
    trace: Trace,
}

#[derive(Clone, Debug)]
enum Trace {
    Identity,
    Bss(BssTrace),
    Scale { factor: f32 },
    ResizePad(ResizePadTrace),
    ShuffleRotate(ShuffleRotateTrace),
}

impl TransformedImage {
    /// Pulls a gradient over the transformed image back to the input via the
    /// transform's exact transpose.
    pub fn grad_to_input(&self, grad: &ImageTensor) -> Result<ImageTensor> {
        if grad.shape() != self.image.shape() {
            return Err(Error::Shape(format!(
                "gradient {:?} does not match transformed image {:?}",
                grad.shape(),
                self.image.shape()
            )));
        }
        match &self.trace {
            Trace::Identity => Ok(grad.clone()),
            Trace::Bss(trace) => trace.grad_to_input(grad),
            Trace::Scale { factor } => Ok(grad.scale(*factor)),
            Trace::ResizePad(trace) => trace.grad_to_input(grad),
            Trace::ShuffleRotate(trace) => trace.grad_to_input(grad),
        }
    }
}

// ---------------------------------------------------------------------------
// Resize-and-pad baseline.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct ResizePadTrace {
    full: (usize, usize),
    resized: (usize, usize),
    offset: (usize, usize),
}

fn resize_pad(x: &ImageTensor, min_scale: f64, rng: &mut ChaCha8Rng) -> Result<TransformedImage> {
    let (c, h, w) = x.shape();
    let scale: f64 = rng.gen_range(min_scale..=1.0);
    let nh = ((h as f64 * scale).round() as usize).clamp(1, h);
    let nw = ((w as f64 * scale).round() as usize).clamp(1, w);
    let resized = x
        .resize_axis_bilinear(nh, Axis::Height)?
        .resize_axis_bilinear(nw, Axis::Width)?;
    let top = rng.gen_range(0..=h - nh);
    let left = rng.gen_range(0..=w - nw);
    let mut out = ImageTensor::zeros(c, h, w);
    for ch in 0..c {
        for y in 0..nh {
            for xx in 0..nw {
                out.set(ch, top + y, left + xx, resized.get(ch, y, xx));
            }
        }
    }
    Ok(TransformedImage {
        image: out,
        trace: Trace::ResizePad(ResizePadTrace {
            full: (h, w),
            resized: (nh, nw),
            offset: (top, left),
        }),
    })
}

impl ResizePadTrace {
    fn grad_to_input(&self, grad: &ImageTensor) -> Result<ImageTensor> {
        let (h, w) = self.full;
        let (nh, nw) = self.resized;
        let (top, left) = self.offset;
        // Transpose of zero padding is the crop, then the two resizes are
        // transposed innermost-first.
        let cropped = grad
            .slice_axis(top, top + nh, Axis::Height)?
            .slice_axis(left, left + nw, Axis::Width)?;
        cropped
            .resize_axis_bilinear_transpose(w, Axis::Width)?
            .resize_axis_bilinear_transpose(h, Axis::Height)
    }
}

// ---------------------------------------------------------------------------
// Block shuffle + rotate baseline.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct ShuffleRotateTrace {
    /// Heights of the horizontal strips, in original order.
    strip_heights: Vec<usize>,
    /// `strip_order[s]` = original strip placed at output position `s`.
    strip_order: Vec<usize>,
    /// Per output strip position: block widths in original order, the block
    /// permutation, and the rotation angle (radians) applied at each output
    /// block position.
    strips: Vec<StripTrace>,
}

#[derive(Clone, Debug)]
struct StripTrace {
    block_widths: Vec<usize>,
    block_order: Vec<usize>,
    angles: Vec<f64>,
}

fn grid_bounds(len: usize, grid: usize) -> Vec<usize> {
    (0..=grid).map(|i| i * len / grid).collect()
}

fn permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    order
}

fn shuffle_rotate(
    x: &ImageTensor,
    grid: usize,
    max_angle_deg: f64,
    rng: &mut ChaCha8Rng,
) -> Result<TransformedImage> {
    let h_bounds = grid_bounds(x.height(), grid);
    let strip_heights: Vec<usize> = h_bounds.windows(2).map(|w| w[1] - w[0]).collect();
    let strip_order = permutation(grid, rng);

    let mut strips_out = Vec::with_capacity(grid);
    let mut strip_traces = Vec::with_capacity(grid);
    for &src_strip in &strip_order {
        let strip = x.slice_axis(h_bounds[src_strip], h_bounds[src_strip + 1], Axis::Height)?;
        let w_bounds = grid_bounds(strip.width(), grid);
        let block_widths: Vec<usize> = w_bounds.windows(2).map(|w| w[1] - w[0]).collect();
        let block_order = permutation(grid, rng);
        let mut blocks = Vec::with_capacity(grid);
        let mut angles = Vec::with_capacity(grid);
        for &src_block in &block_order {
            let block = strip.slice_axis(w_bounds[src_block], w_bounds[src_block + 1], Axis::Width)?;
            let angle = if max_angle_deg > 0.0 {
                rng.gen_range(-max_angle_deg..=max_angle_deg).to_radians()
            } else {
                0.0
            };
            blocks.push(rotate(&block, angle, RotateDirection::Forward));
            angles.push(angle);
        }
        strips_out.push(ImageTensor::concat_axis(&blocks, Axis::Width)?);
        strip_traces.push(StripTrace {
            block_widths,
            block_order,
            angles,
        });
    }
    Ok(TransformedImage {
        image: ImageTensor::concat_axis(&strips_out, Axis::Height)?,
        trace: Trace::ShuffleRotate(ShuffleRotateTrace {
            strip_heights,
            strip_order,
            strips: strip_traces,
        }),
    })
}

impl ShuffleRotateTrace {
    fn grad_to_input(&self, grad: &ImageTensor) -> Result<ImageTensor> {
        let grid = self.strip_order.len();
        // Split the gradient by the permuted strip heights.
        let mut offset = 0usize;
        let mut strip_grads: Vec<Option<ImageTensor>> = vec![None; grid];
        for (pos, &src_strip) in self.strip_order.iter().enumerate() {
            let height = self.strip_heights[src_strip];
            let strip_grad = grad.slice_axis(offset, offset + height, Axis::Height)?;
            offset += height;

            let trace = &self.strips[pos];
            let mut block_grads: Vec<Option<ImageTensor>> = vec![None; grid];
            let mut x_off = 0usize;
            for (bpos, &src_block) in trace.block_order.iter().enumerate() {
                let width = trace.block_widths[src_block];
                let block_grad = strip_grad.slice_axis(x_off, x_off + width, Axis::Width)?;
                x_off += width;
                block_grads[src_block] = Some(rotate(
                    &block_grad,
                    trace.angles[bpos],
                    RotateDirection::Transpose,
                ));
            }
            let blocks: Vec<ImageTensor> = block_grads.into_iter().map(Option::unwrap).collect();
            strip_grads[src_strip] = Some(ImageTensor::concat_axis(&blocks, Axis::Width)?);
        }
        let strips: Vec<ImageTensor> = strip_grads.into_iter().map(Option::unwrap).collect();
        ImageTensor::concat_axis(&strips, Axis::Height)
    }
}

enum RotateDirection {
    Forward,
    Transpose,
}

/// Rotation about the block center with bilinear sampling; samples outside the
/// block contribute zero. `Transpose` scatters with the same taps, giving the
/// exact adjoint of `Forward`.
fn rotate(block: &ImageTensor, angle: f64, direction: RotateDirection) -> ImageTensor {
    let (c, h, w) = block.shape();
    if angle == 0.0 {
        return block.clone();
    }
    let mut out = ImageTensor::zeros(c, h, w);
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let (sin, cos) = angle.sin_cos();
    for y in 0..h {
        for x in 0..w {
            let dy = y as f64 - cy;
            let dx = x as f64 - cx;
            let sx = cx + dx * cos + dy * sin;
            let sy = cy - dx * sin + dy * cos;
            let x0 = sx.floor() as i64;
            let y0 = sy.floor() as i64;
            let fx = (sx - x0 as f64) as f32;
            let fy = (sy - y0 as f64) as f32;
            for (yy, wy) in [(y0, 1.0 - fy), (y0 + 1, fy)] {
                if yy < 0 || yy >= h as i64 || wy == 0.0 {
                    continue;
                }
                for (xx, wx) in [(x0, 1.0 - fx), (x0 + 1, fx)] {
                    if xx < 0 || xx >= w as i64 || wx == 0.0 {
                        continue;
                    }
                    let weight = wy * wx;
                    for ch in 0..c {
                        match direction {
                            RotateDirection::Forward => {
                                let v = block.get(ch, yy as usize, xx as usize);
                                let cur = out.get(ch, y, x);
                                out.set(ch, y, x, cur + weight * v);
                            }
                            RotateDirection::Transpose => {
                                let g = block.get(ch, y, x);
                                let cur = out.get(ch, yy as usize, xx as usize);
                                out.set(ch, yy as usize, xx as usize, cur + weight * g);
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bss::{AxesMode, TargetLengthMode};
    use crate::segmentation::SegmentationConfig;

    fn probe(h: usize, w: usize) -> ImageTensor {
        let data = (0..h * w).map(|i| ((i * 13) % 89) as f32 / 88.0).collect();
        ImageTensor::from_vec(1, h, w, data).unwrap()
    }

    fn small_bss(number_scale: usize) -> BssConfig {
        BssConfig {
            seg: SegmentationConfig {
                points: 2,
                border_margin: 2,
                min_point_distance: 2,
                constrained: true,
            },
            ratio: 1.0,
            number_scale,
            axes_mode: AxesMode::TwoAxis,
            target_length_mode: TargetLengthMode::TotalShare,
        }
    }

    #[test]
    fn every_method_reports_and_produces_its_number_scale() {
        let img = probe(16, 16);
        let methods = [
            TransformMethod::None,
            TransformMethod::Bss(small_bss(3)),
            TransformMethod::ScaleEnsemble { depth: 3 },
            TransformMethod::ResizePad {
                number_scale: 3,
                min_scale: 0.85,
            },
            TransformMethod::BlockShuffleRotate {
                number_scale: 3,
                grid: 2,
                max_angle_deg: 10.0,
            },
        ];
        for method in methods {
            let outs = method.apply(&img, RngStream::from_seed(3)).unwrap();
            assert_eq!(outs.len(), method.number_scale(), "{}", method.label());
            for out in &outs {
                assert_eq!(out.image.shape(), img.shape(), "{}", method.label());
            }
        }
    }

    #[test]
    fn unified_number_scale_override() {
        let m = TransformMethod::ScaleEnsemble { depth: 2 }.with_number_scale(7);
        assert_eq!(m.number_scale(), 7);
        let m = TransformMethod::None.with_number_scale(7);
        assert_eq!(m.number_scale(), 1);
        let m = TransformMethod::Bss(small_bss(1)).with_number_scale(9);
        assert_eq!(m.number_scale(), 9);
    }

    #[test]
    fn labels_distinguish_ablation_variants() {
        let mut cfg = small_bss(1);
        assert_eq!(TransformMethod::Bss(cfg).label(), "bss");
        cfg.axes_mode = AxesMode::OneAxis;
        assert_eq!(TransformMethod::Bss(cfg).label(), "1d-bss");
        cfg.seg.constrained = false;
        assert_eq!(TransformMethod::Bss(cfg).label(), "1d-bss-rp");
        cfg.axes_mode = AxesMode::TwoAxis;
        assert_eq!(TransformMethod::Bss(cfg).label(), "2d-bss-rp");
    }

    #[test]
    fn scale_ensemble_halves_values() {
        let img = probe(8, 8);
        let outs = TransformMethod::ScaleEnsemble { depth: 3 }
            .apply(&img, RngStream::from_seed(0))
            .unwrap();
        for (k, out) in outs.iter().enumerate() {
            let factor = 0.5f32.powi(k as i32);
            for (a, b) in out.image.data().iter().zip(img.data()) {
                assert_eq!(*a, b * factor);
            }
        }
    }

    #[test]
    fn resize_pad_transpose_is_adjoint() {
        // <T x, g> == <x, T^t g> for random x and g.
        let img = probe(12, 10);
        let method = TransformMethod::ResizePad {
            number_scale: 4,
            min_scale: 0.7,
        };
        let outs = method.apply(&img, RngStream::from_seed(5)).unwrap();
        for (k, out) in outs.iter().enumerate() {
            let mut rng = RngStream::from_seed(900 + k as u64).rng();
            let mut cograd = ImageTensor::zeros(1, 12, 10);
            for v in cograd.data_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let back = out.grad_to_input(&cograd).unwrap();
            let lhs: f64 = out
                .image
                .data()
                .iter()
                .zip(cograd.data())
                .map(|(a, b)| (*a as f64) * (*b as f64))
                .sum();
            let rhs: f64 = img
                .data()
                .iter()
                .zip(back.data())
                .map(|(a, b)| (*a as f64) * (*b as f64))
                .sum();
            assert!((lhs - rhs).abs() < 1e-4, "variant {k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn shuffle_rotate_transpose_is_adjoint() {
        let img = probe(11, 13);
        let method = TransformMethod::BlockShuffleRotate {
            number_scale: 4,
            grid: 3,
            max_angle_deg: 20.0,
        };
        let outs = method.apply(&img, RngStream::from_seed(6)).unwrap();
        for (k, out) in outs.iter().enumerate() {
            let mut rng = RngStream::from_seed(700 + k as u64).rng();
            let mut cograd = ImageTensor::zeros(1, 11, 13);
            for v in cograd.data_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let back = out.grad_to_input(&cograd).unwrap();
            let lhs: f64 = out
                .image
                .data()
                .iter()
                .zip(cograd.data())
                .map(|(a, b)| (*a as f64) * (*b as f64))
                .sum();
            let rhs: f64 = img
                .data()
                .iter()
                .zip(back.data())
                .map(|(a, b)| (*a as f64) * (*b as f64))
                .sum();
            assert!((lhs - rhs).abs() < 1e-4, "variant {k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn zero_angle_single_cell_grid_is_identity() {
        let img = probe(9, 9);
        let method = TransformMethod::BlockShuffleRotate {
            number_scale: 1,
            grid: 1,
            max_angle_deg: 0.0,
        };
        let outs = method.apply(&img, RngStream::from_seed(0)).unwrap();
        assert_eq!(outs[0].image, img);
    }

    #[test]
    fn bss_variants_are_schedule_independent() {
        let img = probe(16, 16);
        let method = TransformMethod::Bss(small_bss(4));
        let a = method.apply(&img, RngStream::from_seed(8)).unwrap();
        let b = method.apply(&img, RngStream::from_seed(8)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.image, y.image);
        }
    }
}
