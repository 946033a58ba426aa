//! Dense image tensors and the handful of axis operations every transform is
//! built from: slicing, concatenation, 1-D bilinear resampling, and clamping.
//!
//! Pixels are `f32` in channel-major, row-major order (`[c][y][x]`). Clean
//! images live in `[0, 1]`; perturbed intermediates may transiently leave that
//! range until [`ImageTensor::clamp01`] is applied.

use crate::error::{Error, Result};

/// One of the two spatial axes of an image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Axis {
    /// Indexes rows.
    Height,
    /// Indexes columns.
    Width,
}

impl Axis {
    /// The other spatial axis.
    pub fn orthogonal(self) -> Axis {
        match self {
            Axis::Height => Axis::Width,
            Axis::Width => Axis::Height,
        }
    }
}

/// A channels × height × width image with `f32` samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    /// All-zero image of the given shape.
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    /// Builds an image from raw channel-major data.
    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "data length {} does not match {channels}x{height}x{width} = {expected}",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// (channels, height, width)
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    /// Extent along a spatial axis.
    pub fn extent(&self, axis: Axis) -> usize {
        match axis {
            Axis::Height => self.height,
            Axis::Width => self.width,
        }
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    fn idx(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.idx(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, value: f32) {
        let i = self.idx(c, y, x);
        self.data[i] = value;
    }

    /// Contiguous block `[start, end)` along `axis`; other dimensions are
    /// copied verbatim.
    pub fn slice_axis(&self, start: usize, end: usize, axis: Axis) -> Result<ImageTensor> {
        let extent = self.extent(axis);
        if start >= end || end > extent {
            return Err(Error::Range { start, end, extent });
        }
        let len = end - start;
        let mut out = match axis {
            Axis::Height => ImageTensor::zeros(self.channels, len, self.width),
            Axis::Width => ImageTensor::zeros(self.channels, self.height, len),
        };
        match axis {
            Axis::Height => {
                for c in 0..self.channels {
                    for y in 0..len {
                        let src = self.idx(c, start + y, 0);
                        let dst = out.idx(c, y, 0);
                        out.data[dst..dst + self.width]
                            .copy_from_slice(&self.data[src..src + self.width]);
                    }
                }
            }
            Axis::Width => {
                for c in 0..self.channels {
                    for y in 0..self.height {
                        let src = self.idx(c, y, start);
                        let dst = out.idx(c, y, 0);
                        out.data[dst..dst + len].copy_from_slice(&self.data[src..src + len]);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Concatenates blocks along `axis`. All blocks must agree on channels and
    /// on the orthogonal spatial extent; order is preserved.
    pub fn concat_axis(blocks: &[ImageTensor], axis: Axis) -> Result<ImageTensor> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::Argument("concat of an empty block sequence".into()))?;
        let off_axis = first.extent(axis.orthogonal());
        for (i, b) in blocks.iter().enumerate() {
            if b.channels != first.channels || b.extent(axis.orthogonal()) != off_axis {
                return Err(Error::Shape(format!(
                    "block {i} is {:?}, expected channels {} and {:?} extent {}",
                    b.shape(),
                    first.channels,
                    axis.orthogonal(),
                    off_axis
                )));
            }
        }
        let total: usize = blocks.iter().map(|b| b.extent(axis)).sum();
        let mut out = match axis {
            Axis::Height => ImageTensor::zeros(first.channels, total, off_axis),
            Axis::Width => ImageTensor::zeros(first.channels, off_axis, total),
        };
        let mut offset = 0;
        for b in blocks {
            let len = b.extent(axis);
            match axis {
                Axis::Height => {
                    for c in 0..out.channels {
                        for y in 0..len {
                            let src = b.idx(c, y, 0);
                            let dst = out.idx(c, offset + y, 0);
                            out.data[dst..dst + out.width]
                                .copy_from_slice(&b.data[src..src + out.width]);
                        }
                    }
                }
                Axis::Width => {
                    for c in 0..out.channels {
                        for y in 0..out.height {
                            let src = b.idx(c, y, 0);
                            let dst = out.idx(c, y, offset);
                            out.data[dst..dst + len].copy_from_slice(&b.data[src..src + len]);
                        }
                    }
                }
            }
            offset += len;
        }
        Ok(out)
    }

    /// 1-D linear resampling along `axis` with align-corners-false sample
    /// mapping: source coordinate of output index `i` is
    /// `(i + 0.5) * src_len / new_len - 0.5`, clamped to `[0, src_len - 1]`.
    /// Each interpolated value is pinned to the envelope of its two source
    /// samples, so constants survive exactly and output never leaves the
    /// source range. The orthogonal axis and channels are untouched.
    pub fn resize_axis_bilinear(&self, new_len: usize, axis: Axis) -> Result<ImageTensor> {
        if new_len == 0 {
            return Err(Error::Argument("resize target length must be >= 1".into()));
        }
        let src_len = self.extent(axis);
        if src_len == 0 {
            return Err(Error::Argument("resize source length must be >= 1".into()));
        }
        let taps = line_samples(src_len, new_len);
        let mut out = match axis {
            Axis::Height => ImageTensor::zeros(self.channels, new_len, self.width),
            Axis::Width => ImageTensor::zeros(self.channels, self.height, new_len),
        };
        match axis {
            Axis::Width => {
                for c in 0..self.channels {
                    for y in 0..self.height {
                        let row = self.idx(c, y, 0);
                        let dst = out.idx(c, y, 0);
                        for (i, &(i0, i1, frac)) in taps.iter().enumerate() {
                            let a = self.data[row + i0];
                            let b = self.data[row + i1];
                            out.data[dst + i] = lerp_bounded(a, b, frac);
                        }
                    }
                }
            }
            Axis::Height => {
                for c in 0..self.channels {
                    for (i, &(i0, i1, frac)) in taps.iter().enumerate() {
                        let src0 = self.idx(c, i0, 0);
                        let src1 = self.idx(c, i1, 0);
                        let dst = out.idx(c, i, 0);
                        for x in 0..self.width {
                            let a = self.data[src0 + x];
                            let b = self.data[src1 + x];
                            out.data[dst + x] = lerp_bounded(a, b, frac);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Transpose of [`resize_axis_bilinear`](Self::resize_axis_bilinear):
    /// scatters a gradient over an output of length `extent(axis)` back onto a
    /// source of length `src_len` using the same interpolation weights. This is
    /// the exact adjoint of the (linear) forward resampling.
    pub fn resize_axis_bilinear_transpose(&self, src_len: usize, axis: Axis) -> Result<ImageTensor> {
        if src_len == 0 {
            return Err(Error::Argument("transpose source length must be >= 1".into()));
        }
        let new_len = self.extent(axis);
        let taps = line_samples(src_len, new_len);
        let mut out = match axis {
            Axis::Height => ImageTensor::zeros(self.channels, src_len, self.width),
            Axis::Width => ImageTensor::zeros(self.channels, self.height, src_len),
        };
        match axis {
            Axis::Width => {
                for c in 0..self.channels {
                    for y in 0..self.height {
                        let row = self.idx(c, y, 0);
                        let dst = out.idx(c, y, 0);
                        for (i, &(i0, i1, frac)) in taps.iter().enumerate() {
                            let g = self.data[row + i];
                            out.data[dst + i0] += (1.0 - frac) * g;
                            out.data[dst + i1] += frac * g;
                        }
                    }
                }
            }
            Axis::Height => {
                for c in 0..self.channels {
                    for (i, &(i0, i1, frac)) in taps.iter().enumerate() {
                        let src = self.idx(c, i, 0);
                        let dst0 = out.idx(c, i0, 0);
                        let dst1 = out.idx(c, i1, 0);
                        for x in 0..self.width {
                            let g = self.data[src + x];
                            out.data[dst0 + x] += (1.0 - frac) * g;
                            out.data[dst1 + x] += frac * g;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Clips every element into `[0, 1]`.
    pub fn clamp01(&self) -> ImageTensor {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = v.clamp(0.0, 1.0);
        }
        out
    }

    /// Element-wise sum; shapes must match.
    pub fn add(&self, other: &ImageTensor) -> Result<ImageTensor> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "add: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = self.clone();
        for (o, v) in out.data.iter_mut().zip(&other.data) {
            *o += v;
        }
        Ok(out)
    }

    /// Element-wise scaling by a constant.
    pub fn scale(&self, factor: f32) -> ImageTensor {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= factor;
        }
        out
    }

    /// Sum of absolute values over all elements, accumulated in index order.
    pub fn l1_norm(&self) -> f32 {
        let mut acc = 0.0f32;
        for v in &self.data {
            acc += v.abs();
        }
        acc
    }

    /// Largest absolute value over all elements.
    pub fn linf_norm(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f32 {
        self.data.iter().copied().fold(f32::INFINITY, f32::min)
    }

    pub fn max_value(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    /// True when every element is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Linear interpolation pinned to the envelope of its two samples. The pin
/// keeps constants bit-exact and guarantees outputs never leave
/// `[min(a, b), max(a, b)]` even under `f32` rounding.
#[inline]
fn lerp_bounded(a: f32, b: f32, frac: f32) -> f32 {
    let v = (1.0 - frac) * a + frac * b;
    v.clamp(a.min(b), a.max(b))
}

/// Per-output-index sample taps `(i0, i1, frac)` for a 1-D resize from
/// `src_len` to `new_len` under the align-corners-false convention.
fn line_samples(src_len: usize, new_len: usize) -> Vec<(usize, usize, f32)> {
    let ratio = src_len as f64 / new_len as f64;
    (0..new_len)
        .map(|i| {
            let src = ((i as f64 + 0.5) * ratio - 0.5).clamp(0.0, (src_len - 1) as f64);
            let i0 = src.floor() as usize;
            let i1 = (i0 + 1).min(src_len - 1);
            (i0, i1, (src - i0 as f64) as f32)
        })
        .collect()
}
