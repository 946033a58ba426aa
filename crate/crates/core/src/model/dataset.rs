//! Dataset ingestion: a procedurally rendered shape-classification set for
//! desk-scale experiments, and a reader for IDX image/label files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::LabeledImage;
use crate::rng::RngStream;
use crate::tensor::ImageTensor;

/// Classes rendered by the synthetic generator: horizontal, vertical,
/// rising, and falling bars, filled ellipse, elliptical ring, filled
/// rectangle, and rectangular frame. Every class cue (orientation, slope
/// sign, hollowness, edge spanning) survives axis-aligned stretching, and
/// several pairs are deliberately confusable so decision boundaries stay
/// tight.
pub const SYNTHETIC_CLASSES: usize = 8;

/// Where samples come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DatasetSpec {
    /// `synthetic:<seed>:<count>`
    Synthetic { seed: u64, count: usize },
    /// `idx:<images_path>:<labels_path>`
    Idx { images: PathBuf, labels: PathBuf },
}

impl FromStr for DatasetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.splitn(3, ':').collect();
        match parts.as_slice() {
            ["synthetic", seed, count] => Ok(DatasetSpec::Synthetic {
                seed: seed
                    .parse()
                    .map_err(|_| Error::Argument(format!("bad synthetic seed {seed:?}")))?,
                count: count
                    .parse()
                    .map_err(|_| Error::Argument(format!("bad synthetic count {count:?}")))?,
            }),
            ["idx", images, labels] => Ok(DatasetSpec::Idx {
                images: PathBuf::from(images),
                labels: PathBuf::from(labels),
            }),
            _ => Err(Error::Argument(format!(
                "dataset spec {s:?}; expected synthetic:<seed>:<count> or idx:<images>:<labels>"
            ))),
        }
    }
}

impl fmt::Display for DatasetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetSpec::Synthetic { seed, count } => write!(f, "synthetic:{seed}:{count}"),
            DatasetSpec::Idx { images, labels } => {
                write!(f, "idx:{}:{}", images.display(), labels.display())
            }
        }
    }
}

/// Loads a dataset. `resolution` applies to the synthetic generator only; IDX
/// files carry their own dimensions.
pub fn load_dataset(spec: &DatasetSpec, resolution: usize) -> Result<Vec<LabeledImage>> {
    match spec {
        DatasetSpec::Synthetic { seed, count } => synthetic(*seed, *count, resolution),
        DatasetSpec::Idx { images, labels } => read_idx_pair(images, labels),
    }
}

/// Renders `count` grayscale samples at `resolution x resolution`, cycling
/// through the four classes. Sample `i` is drawn entirely from substream `i`
/// of the seed, so any prefix of the set is stable.
fn synthetic(seed: u64, count: usize, resolution: usize) -> Result<Vec<LabeledImage>> {
    if resolution < 8 {
        return Err(Error::Argument(format!(
            "synthetic resolution {resolution} below minimum 8"
        )));
    }
    let root = RngStream::from_seed(seed);
    Ok((0..count)
        .map(|i| render_sample(root.child(i as u64), i % SYNTHETIC_CLASSES, resolution))
        .collect())
}

fn render_sample(stream: RngStream, label: usize, res: usize) -> LabeledImage {
    let mut rng = stream.rng();
    // The figure-ground gap is a small multiple of the usual perturbation
    // budgets, so classifiers are accurate on clean images yet attackable.
    // Fainter distractor shapes of random classes make the decision genuinely
    // multi-cue: the label is the highest-contrast shape.
    let background: f32 = rng.gen_range(0.25..0.40);
    let contrast: f32 = rng.gen_range(0.18..0.32);
    let noise_amp: f32 = rng.gen_range(0.015..0.045);

    let mut img = ImageTensor::zeros(1, res, res);
    for v in img.data_mut() {
        *v = background;
    }
    // Faint bar distractors keep the decision multi-cue without hiding the
    // hollow/filled distinction of the blob classes.
    let distractors = rng.gen_range(1..=2);
    for _ in 0..distractors {
        let class = rng.gen_range(0..4);
        let strength = contrast * rng.gen_range(0.30..0.45);
        paint_shape(&mut img, class, background + strength, background, res, &mut rng);
    }
    paint_shape(&mut img, label, background + contrast, background, res, &mut rng);
    for v in img.data_mut() {
        *v += rng.gen_range(-noise_amp..noise_amp);
    }
    LabeledImage {
        image: img.clamp01(),
        label,
    }
}

fn paint_shape(
    img: &mut ImageTensor,
    class: usize,
    foreground: f32,
    background: f32,
    res: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) {
    match class {
        0 => {
            // Horizontal bar spanning the full width.
            let thickness = rng.gen_range(res / 8..=res / 4).max(1);
            let y0 = rng.gen_range(0..=res - thickness);
            paint_rect(img, y0, 0, thickness, res, foreground);
        }
        1 => {
            // Vertical bar spanning the full height.
            let thickness = rng.gen_range(res / 8..=res / 4).max(1);
            let x0 = rng.gen_range(0..=res - thickness);
            paint_rect(img, 0, x0, res, thickness, foreground);
        }
        2 | 3 => {
            // Sloped bar; the slope sign is the class cue and survives
            // anisotropic stretching.
            let magnitude: f64 = rng.gen_range(0.5..2.0);
            let slope = if class == 2 { magnitude } else { -magnitude };
            let center: f64 = rng.gen_range(0.25..0.75) * res as f64;
            let half: f64 = rng.gen_range(res as f64 / 10.0..res as f64 / 5.0).max(1.5);
            for y in 0..res {
                for x in 0..res {
                    let line_y = center + slope * (x as f64 - res as f64 / 2.0);
                    if (y as f64 - line_y).abs() <= half {
                        img.set(0, y, x, foreground);
                    }
                }
            }
        }
        4 | 5 => {
            // Filled ellipse / elliptical ring.
            let ry = rng.gen_range(res / 6..=res / 3).max(3);
            let rx = rng.gen_range(res / 6..=res / 3).max(3);
            let cy = rng.gen_range(ry..res - ry);
            let cx = rng.gen_range(rx..res - rx);
            let hollow: f64 = if class == 5 {
                rng.gen_range(0.45..0.72)
            } else {
                0.0
            };
            for y in 0..res {
                for x in 0..res {
                    let dy = (y as f64 - cy as f64) / ry as f64;
                    let dx = (x as f64 - cx as f64) / rx as f64;
                    let d2 = dy * dy + dx * dx;
                    if d2 <= 1.0 && d2 >= hollow * hollow {
                        img.set(0, y, x, foreground);
                    }
                }
            }
        }
        6 => {
            // Filled interior rectangle; never touches the border, which
            // separates it from the spanning bars.
            let h = rng.gen_range(res / 3..=2 * res / 3).max(2);
            let w = rng.gen_range(res / 3..=2 * res / 3).max(2);
            let y0 = rng.gen_range(2..=res - h - 2);
            let x0 = rng.gen_range(2..=res - w - 2);
            paint_rect(img, y0, x0, h, w, foreground);
        }
        _ => {
            // Rectangular frame.
            let h = rng.gen_range(res / 2..=res - 6).max(6);
            let w = rng.gen_range(res / 2..=res - 6).max(6);
            let y0 = rng.gen_range(2..=res - h - 2);
            let x0 = rng.gen_range(2..=res - w - 2);
            let border = rng.gen_range(2..=4);
            paint_rect(img, y0, x0, h, w, foreground);
            let inner_h = h.saturating_sub(2 * border);
            let inner_w = w.saturating_sub(2 * border);
            if inner_h > 0 && inner_w > 0 {
                paint_rect(img, y0 + border, x0 + border, inner_h, inner_w, background);
            }
        }
    }
}

fn paint_rect(img: &mut ImageTensor, y0: usize, x0: usize, h: usize, w: usize, value: f32) {
    for y in y0..(y0 + h).min(img.height()) {
        for x in x0..(x0 + w).min(img.width()) {
            img.set(0, y, x, value);
        }
    }
}

// ---------------------------------------------------------------------------
// IDX format (big-endian magic 0x00000803 images / 0x00000801 labels).
// ---------------------------------------------------------------------------

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

struct IdxReader<'a> {
    path: &'a Path,
    bytes: Vec<u8>,
    pos: usize,
}

impl<'a> IdxReader<'a> {
    fn open(path: &'a Path) -> Result<Self> {
        Ok(Self {
            path,
            bytes: fs::read(path)?,
            pos: 0,
        })
    }

    fn fail(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.display().to_string(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn read_u32(&mut self, what: &str) -> Result<u32> {
        if self.pos + 4 > self.bytes.len() {
            return Err(self.fail(self.bytes.len(), format!("truncated while reading {what}")));
        }
        let v = u32::from_be_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        Ok(v)
    }

    fn take(&mut self, len: usize, what: &str) -> Result<&[u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(self.fail(
                self.bytes.len(),
                format!(
                    "truncated {what}: need {} bytes, file ends after {}",
                    self.pos + len,
                    self.bytes.len()
                ),
            ));
        }
        let slice = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice)
    }
}

fn read_idx_pair(images_path: &Path, labels_path: &Path) -> Result<Vec<LabeledImage>> {
    let mut images = IdxReader::open(images_path)?;
    let magic = images.read_u32("image magic")?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(images.fail(0, format!("bad image magic {magic:#010x}, expected {IDX_IMAGE_MAGIC:#010x}")));
    }
    let count = images.read_u32("image count")? as usize;
    let rows = images.read_u32("row count")? as usize;
    let cols = images.read_u32("column count")? as usize;
    if rows == 0 || cols == 0 {
        return Err(images.fail(8, format!("degenerate image size {rows}x{cols}")));
    }
    let pixel_bytes = images.take(count * rows * cols, "pixel data")?.to_vec();

    let mut labels = IdxReader::open(labels_path)?;
    let magic = labels.read_u32("label magic")?;
    if magic != IDX_LABEL_MAGIC {
        return Err(labels.fail(0, format!("bad label magic {magic:#010x}, expected {IDX_LABEL_MAGIC:#010x}")));
    }
    let label_count = labels.read_u32("label count")? as usize;
    if label_count != count {
        return Err(labels.fail(4, format!("{label_count} labels for {count} images")));
    }
    let label_bytes = labels.take(count, "label data")?.to_vec();

    Ok((0..count)
        .map(|i| {
            let start = i * rows * cols;
            let data = pixel_bytes[start..start + rows * cols]
                .iter()
                .map(|&b| b as f32 / 255.0)
                .collect();
            LabeledImage {
                image: ImageTensor::from_vec(1, rows, cols, data).expect("sized buffer"),
                label: label_bytes[i] as usize,
            }
        })
        .collect())
}
