use rayon::prelude::*;

use super::path_length_via;
use crate::error::{Error, Result};
use crate::geometry::{AnchorConfig, BuildingModel, Point3};

/// Bin width of the path-difference histogram, in meters.
pub const PATHDIFF_BIN_WIDTH: f64 = 0.01;

/// Upper and lower diffraction path lengths for one grid node and anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathDiffSample {
    pub floor: usize,
    pub x: f64,
    pub y: f64,
    pub anchor_index: usize,
    pub upper: f64,
    pub lower: f64,
}

impl PathDiffSample {
    pub fn diff(&self) -> f64 {
        (self.upper - self.lower).abs()
    }
}

/// Histogram of `|upper - lower|` over a node grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathDiffHistogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub max: f64,
    pub evaluated: u64,
    /// Grid points where either edge has no diffraction point.
    pub skipped: u64,
}

impl PathDiffHistogram {
    fn empty() -> Self {
        Self {
            bin_width: PATHDIFF_BIN_WIDTH,
            ..Default::default()
        }
    }

    fn push(&mut self, diff: f64) {
        let bin = (diff / self.bin_width).floor() as usize;
        if bin >= self.counts.len() {
            self.counts.resize(bin + 1, 0);
        }
        self.counts[bin] += 1;
        self.max = self.max.max(diff);
        self.evaluated += 1;
    }

    /// Associative merge of two partial histograms.
    pub fn merge(mut self, other: Self) -> Self {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.max = self.max.max(other.max);
        self.evaluated += other.evaluated;
        self.skipped += other.skipped;
        self
    }

    /// `(bin upper edge, cumulative fraction)` pairs.
    pub fn cdf(&self) -> Vec<(f64, f64)> {
        let total = self.evaluated.max(1) as f64;
        let mut acc = 0u64;
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                acc += c;
                ((i + 1) as f64 * self.bin_width, acc as f64 / total)
            })
            .collect()
    }
}

fn grid_axis(extent: f64, spacing: f64, include_zero: bool) -> Vec<f64> {
    let n = (extent / spacing + 1e-9).floor() as usize;
    let start = if include_zero { 0 } else { 1 };
    (start..=n)
        .map(|k| (k as f64 * spacing).min(extent))
        .collect()
}

fn check_spacing(spacing: f64) -> Result<()> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "grid spacing must be positive, got {spacing}"
        )));
    }
    Ok(())
}

fn sample_column(
    building: &BuildingModel,
    anchors: &[Point3],
    floor: usize,
    x: f64,
    ys: &[f64],
    mut visit: impl FnMut(Option<PathDiffSample>),
) {
    let (upper, lower) = building
        .edges_for_floor(floor)
        .expect("floor index from 1..=N");
    let z = building.node_z_unchecked(floor);
    for &y in ys {
        let node = Point3::new(x, y, z);
        for (j, anchor) in anchors.iter().enumerate() {
            let up = path_length_via(anchor, &node, &upper);
            let lo = path_length_via(anchor, &node, &lower);
            match (up, lo) {
                (Ok((u, _)), Ok((l, _))) => visit(Some(PathDiffSample {
                    floor,
                    x,
                    y,
                    anchor_index: j,
                    upper: u,
                    lower: l,
                })),
                _ => visit(None),
            }
        }
    }
}

/// Evaluates both path lengths on a uniform `(x, y, floor)` grid for every
/// anchor and histograms the absolute difference. Columns are processed in
/// parallel and merged.
pub fn path_difference_scan(
    building: &BuildingModel,
    anchors: &AnchorConfig,
    spacing: f64,
) -> Result<PathDiffHistogram> {
    check_spacing(spacing)?;
    let xs = grid_axis(building.length(), spacing, true);
    let ys = grid_axis(building.breadth(), spacing, false);
    let columns: Vec<(usize, f64)> = (1..=building.num_floors())
        .flat_map(|f| xs.iter().map(move |&x| (f, x)))
        .collect();
    let hist = columns
        .par_iter()
        .fold(PathDiffHistogram::empty, |mut h, &(floor, x)| {
            sample_column(building, anchors.as_slice(), floor, x, &ys, |s| match s {
                Some(s) => h.push(s.diff()),
                None => h.skipped += 1,
            });
            h
        })
        .reduce(PathDiffHistogram::empty, PathDiffHistogram::merge);
    Ok(hist)
}

/// Sequential visit of every grid sample in `(floor, x, y, anchor)` order.
/// Returns the number of skipped grid points.
pub fn for_each_pathdiff_sample(
    building: &BuildingModel,
    anchors: &AnchorConfig,
    spacing: f64,
    mut visit: impl FnMut(&PathDiffSample) -> Result<()>,
) -> Result<u64> {
    check_spacing(spacing)?;
    let xs = grid_axis(building.length(), spacing, true);
    let ys = grid_axis(building.breadth(), spacing, false);
    let mut skipped = 0u64;
    let mut failure = None;
    for floor in 1..=building.num_floors() {
        for &x in &xs {
            sample_column(building, anchors.as_slice(), floor, x, &ys, |s| match s {
                Some(s) if failure.is_none() => {
                    if let Err(e) = visit(&s) {
                        failure = Some(e);
                    }
                }
                Some(_) => {}
                None => skipped += 1,
            });
            if let Some(e) = failure.take() {
                return Err(e);
            }
        }
    }
    Ok(skipped)
}
