//! Constrained random segmentation: sampling point pairs under border and
//! pairwise-distance constraints, and turning them into per-axis block
//! boundaries and lengths.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Axis, ImageTensor};

/// Rejection-sampling retry budget per transform.
const RETRY_BUDGET: usize = 10_000;

/// How segmentation points are sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SegmentationConfig {
    /// Number of point pairs to sample.
    pub points: usize,
    /// Minimum distance from any coordinate to the image border, in pixels.
    pub border_margin: u32,
    /// Minimum pairwise distance among same-axis coordinates, in pixels.
    pub min_point_distance: u32,
    /// `false` drops the border/pairwise constraints and keeps only duplicate
    /// rejection (the "random points" ablation mode).
    pub constrained: bool,
}

impl SegmentationConfig {
    /// Checks that `points` pairs can exist along an axis of length `len`.
    /// Constrained mode needs `(points - 1) * min_point_distance` to fit in
    /// the interior `[border_margin, len - border_margin]`; both modes need
    /// enough distinct interior coordinates.
    pub fn check_feasible(&self, len: u32) -> Result<()> {
        if self.points == 0 {
            return Ok(());
        }
        let (lo, hi) = self.sample_range(len)?;
        let interior = (hi - lo + 1) as u64;
        if (self.points as u64) > interior {
            return Err(Error::Config(format!(
                "{} distinct coordinates cannot fit in [{lo}, {hi}]",
                self.points
            )));
        }
        if self.constrained {
            let needed = (self.points as u64 - 1) * self.min_point_distance as u64;
            let available = (len as i64) - 2 * self.border_margin as i64;
            if available < 0 || needed > available as u64 {
                return Err(Error::Config(format!(
                    "(points - 1) * min_point_distance = {needed} exceeds \
                     len - 2 * border_margin = {available} for axis length {len}"
                )));
            }
        }
        Ok(())
    }

    /// Inclusive coordinate range points are drawn from. Constrained mode
    /// respects the border margin; both modes stay strictly inside `(0, len)`
    /// so every boundary produces a block of length >= 1.
    fn sample_range(&self, len: u32) -> Result<(u32, u32)> {
        let margin = if self.constrained {
            self.border_margin.max(1)
        } else {
            1
        };
        if len < 2 * margin {
            return Err(Error::Config(format!(
                "axis length {len} leaves no room inside a border margin of {margin}"
            )));
        }
        Ok((margin, len - margin))
    }
}

/// Sampled segmentation point pairs; the first component of each pair is a
/// width coordinate, the second a height coordinate. The same set serves both
/// axes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointSet {
    pairs: Vec<(u32, u32)>,
}

impl PointSet {
    /// Wraps explicit `(width, height)` coordinate pairs, bypassing sampling.
    pub fn from_pairs(pairs: Vec<(u32, u32)>) -> Self {
        Self { pairs }
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Coordinates relevant to one axis: width uses the first pair component,
    /// height the second.
    pub fn axis_coords(&self, axis: Axis) -> Vec<u32> {
        self.pairs
            .iter()
            .map(|&(w, h)| match axis {
                Axis::Width => w,
                Axis::Height => h,
            })
            .collect()
    }
}

/// Draws point pairs for a `width x height` image. Whole candidate pairs are
/// rejection-sampled: a pair is kept only if its width coordinate clears every
/// accepted width coordinate and its height coordinate clears every accepted
/// height coordinate. Deterministic given the generator state.
pub fn sample_points<R: Rng>(
    cfg: &SegmentationConfig,
    width: u32,
    height: u32,
    rng: &mut R,
) -> Result<PointSet> {
    if cfg.points == 0 {
        return Ok(PointSet { pairs: Vec::new() });
    }
    cfg.check_feasible(width)?;
    cfg.check_feasible(height)?;
    let (w_lo, w_hi) = cfg.sample_range(width)?;
    let (h_lo, h_hi) = cfg.sample_range(height)?;
    // Duplicates are always rejected so that every coordinate becomes a
    // distinct block boundary.
    let min_dist = if cfg.constrained {
        cfg.min_point_distance.max(1)
    } else {
        1
    };

    let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(cfg.points);
    let mut draws = 0usize;
    let mut last_rejected = Axis::Width;
    while pairs.len() < cfg.points {
        if draws >= RETRY_BUDGET {
            return Err(Error::Sampling {
                axis: last_rejected,
                attempts: draws,
            });
        }
        draws += 1;
        let w = rng.gen_range(w_lo..=w_hi);
        let h = rng.gen_range(h_lo..=h_hi);
        if !pairs.iter().all(|&(pw, _)| pw.abs_diff(w) >= min_dist) {
            last_rejected = Axis::Width;
            continue;
        }
        if !pairs.iter().all(|&(_, ph)| ph.abs_diff(h) >= min_dist) {
            last_rejected = Axis::Height;
            continue;
        }
        pairs.push((w, h));
    }
    Ok(PointSet { pairs })
}

/// Sorted block boundaries and lengths along one axis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentationPlan {
    axis: Axis,
    /// `0 = b_0 < b_1 < ... < b_{M+1} = len`
    boundaries: Vec<u32>,
    /// `lengths[i] = boundaries[i + 1] - boundaries[i]`
    lengths: Vec<u32>,
}

impl SegmentationPlan {
    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn boundaries(&self) -> &[u32] {
        &self.boundaries
    }

    pub fn lengths(&self) -> &[u32] {
        &self.lengths
    }

    /// Axis extent the plan was built for.
    pub fn total_len(&self) -> u32 {
        *self.boundaries.last().expect("plan has >= 2 boundaries")
    }

    pub fn block_count(&self) -> usize {
        self.lengths.len()
    }
}

/// Builds the sorted boundary list `{0} U coords U {len}` for one axis from a
/// shared [`PointSet`]. Coordinates must be strictly inside `(0, len)` and
/// pairwise distinct.
pub fn plan_from_points(points: &PointSet, axis: Axis, len: u32) -> Result<SegmentationPlan> {
    let mut coords = points.axis_coords(axis);
    for &c in &coords {
        if c == 0 || c >= len {
            return Err(Error::Range {
                start: c as usize,
                end: c as usize,
                extent: len as usize,
            });
        }
    }
    coords.sort_unstable();
    if coords.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::DegeneratePlan(format!(
            "duplicate {axis:?} coordinate in {coords:?}"
        )));
    }
    let mut boundaries = Vec::with_capacity(coords.len() + 2);
    boundaries.push(0);
    boundaries.extend(coords);
    boundaries.push(len);
    let lengths = boundaries.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(SegmentationPlan {
        axis,
        boundaries,
        lengths,
    })
}

/// Slices an image into the plan's blocks along the plan's axis.
pub fn split(img: &ImageTensor, plan: &SegmentationPlan) -> Result<Vec<ImageTensor>> {
    let extent = img.extent(plan.axis) as u32;
    if extent != plan.total_len() {
        return Err(Error::Shape(format!(
            "plan built for {:?} extent {} applied to image extent {}",
            plan.axis,
            plan.total_len(),
            extent
        )));
    }
    plan.boundaries
        .windows(2)
        .map(|w| img.slice_axis(w[0] as usize, w[1] as usize, plan.axis))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn paper_cfg() -> SegmentationConfig {
        SegmentationConfig {
            points: 2,
            border_margin: 35,
            min_point_distance: 40,
            constrained: true,
        }
    }

    #[test]
    fn zero_points_is_empty() {
        let cfg = SegmentationConfig {
            points: 0,
            ..paper_cfg()
        };
        let mut rng = RngStream::from_seed(1).rng();
        let points = sample_points(&cfg, 224, 224, &mut rng).unwrap();
        assert!(points.is_empty());
    }

    #[test]
    fn constrained_sampling_honors_margins_and_distances() {
        let cfg = paper_cfg();
        for seed in 0..64 {
            let mut rng = RngStream::from_seed(seed).rng();
            let points = sample_points(&cfg, 224, 224, &mut rng).unwrap();
            assert_eq!(points.len(), 2);
            for axis in [Axis::Width, Axis::Height] {
                let coords = points.axis_coords(axis);
                for &c in &coords {
                    assert!((35..=189).contains(&c), "coordinate {c} out of range");
                }
                assert!(coords[0].abs_diff(coords[1]) >= 40);
            }
        }
    }

    #[test]
    fn infeasible_config_fails_before_sampling() {
        let cfg = SegmentationConfig {
            points: 5,
            border_margin: 35,
            min_point_distance: 60,
            constrained: true,
        };
        // 4 * 60 = 240 > 224 - 70 = 154.
        assert!(matches!(cfg.check_feasible(224), Err(Error::Config(_))));
        let mut rng = RngStream::from_seed(0).rng();
        assert!(matches!(
            sample_points(&cfg, 224, 224, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let cfg = paper_cfg();
        let a = sample_points(&cfg, 224, 224, &mut RngStream::from_seed(7).rng()).unwrap();
        let b = sample_points(&cfg, 224, 224, &mut RngStream::from_seed(7).rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unconstrained_mode_covers_every_decile() {
        let cfg = SegmentationConfig {
            points: 2,
            border_margin: 0,
            min_point_distance: 0,
            constrained: false,
        };
        let mut histogram = [0usize; 10];
        let mut rng = RngStream::from_seed(11).rng();
        for _ in 0..5_000 {
            let points = sample_points(&cfg, 224, 224, &mut rng).unwrap();
            for &(w, h) in points.pairs() {
                for c in [w, h] {
                    // Coordinates live in [1, 223].
                    let decile = ((c - 1) as usize * 10 / 223).min(9);
                    histogram[decile] += 1;
                }
            }
        }
        assert!(
            histogram.iter().all(|&n| n > 0),
            "empty decile in {histogram:?}"
        );
    }

    #[test]
    fn plan_sorts_and_differences() {
        let points = PointSet {
            pairs: vec![(150, 40), (60, 90)],
        };
        let plan = plan_from_points(&points, Axis::Width, 224).unwrap();
        assert_eq!(plan.boundaries(), &[0, 60, 150, 224]);
        assert_eq!(plan.lengths(), &[60, 90, 74]);

        let plan_h = plan_from_points(&points, Axis::Height, 224).unwrap();
        assert_eq!(plan_h.boundaries(), &[0, 40, 90, 224]);
    }

    #[test]
    fn empty_point_set_yields_single_block() {
        let points = PointSet { pairs: Vec::new() };
        let plan = plan_from_points(&points, Axis::Height, 224).unwrap();
        assert_eq!(plan.boundaries(), &[0, 224]);
        assert_eq!(plan.lengths(), &[224]);
    }

    #[test]
    fn duplicate_coordinates_are_degenerate() {
        let points = PointSet {
            pairs: vec![(100, 10), (100, 20)],
        };
        assert!(matches!(
            plan_from_points(&points, Axis::Width, 224),
            Err(Error::DegeneratePlan(_))
        ));
    }

    #[test]
    fn split_follows_plan_lengths() {
        let img = ImageTensor::zeros(1, 8, 224);
        let points = PointSet {
            pairs: vec![(150, 1), (60, 2)],
        };
        let plan = plan_from_points(&points, Axis::Width, 224).unwrap();
        let blocks = split(&img, &plan).unwrap();
        let widths: Vec<usize> = blocks.iter().map(|b| b.width()).collect();
        assert_eq!(widths, vec![60, 90, 74]);

        let single = plan_from_points(&PointSet { pairs: vec![] }, Axis::Width, 224).unwrap();
        let blocks = split(&img, &single).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0], img);
    }

    #[test]
    fn split_rejects_extent_mismatch() {
        let img = ImageTensor::zeros(1, 8, 300);
        let plan = plan_from_points(&PointSet { pairs: vec![] }, Axis::Width, 224).unwrap();
        assert!(matches!(split(&img, &plan), Err(Error::Shape(_))));
    }
}
