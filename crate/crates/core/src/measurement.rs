//! Time-of-flight range simulation with the upper/lower edge ambiguity.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::diffraction::path_length;
use crate::error::{Error, Result};
use crate::geometry::{AnchorConfig, BuildingModel, EdgeKind, NodePosition};

/// Zero-mean Gaussian ranging noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise sigma must be >= 0, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    pub fn noiseless() -> Self {
        Self { sigma: 0.0 }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// One noise draw. Always consumes exactly one normal variate so the
    /// random stream does not depend on sigma.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.sigma * z
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { sigma: 0.1 }
    }
}

/// Ground truth for a simulated measurement. Only the scoring side of the
/// harness reads it.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub node: NodePosition,
    pub edge_choices: Vec<EdgeKind>,
}

/// Noisy ranges from one hidden node to every anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeVector {
    ranges: Vec<f64>,
    truth: GroundTruth,
}

impl RangeVector {
    /// What an estimator gets to see.
    pub fn ranges(&self) -> &[f64] {
        &self.ranges
    }

    pub fn ground_truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }
}

/// Floor uniform over `1..=N`, position uniform over the footprint with `y > 0`.
pub fn sample_node<R: Rng + ?Sized>(building: &BuildingModel, rng: &mut R) -> NodePosition {
    let floor = rng.random_range(1..=building.num_floors());
    let x = rng.random::<f64>() * building.length();
    let y = (1.0 - rng.random::<f64>()) * building.breadth();
    NodePosition::new(x, y, floor)
}

/// Simulates one range per anchor. Each anchor independently follows the
/// upper edge with probability `edge_prob` (otherwise the lower edge); if the
/// chosen edge has no diffraction point the other edge is used.
pub fn generate_measurements<R: Rng + ?Sized>(
    node: &NodePosition,
    anchors: &AnchorConfig,
    building: &BuildingModel,
    noise: &NoiseModel,
    edge_prob: f64,
    rng: &mut R,
) -> Result<RangeVector> {
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::InvalidConfig(format!(
            "edge_prob must be in [0, 1], got {edge_prob}"
        )));
    }
    building.check_floor(node.floor)?;
    let mut ranges = Vec::with_capacity(anchors.len());
    let mut edge_choices = Vec::with_capacity(anchors.len());
    for (j, anchor) in anchors.iter().enumerate() {
        let u: f64 = rng.random();
        let noise_draw = noise.draw(rng);
        let preferred = if u < edge_prob {
            EdgeKind::Upper
        } else {
            EdgeKind::Lower
        };
        let (kind, p) = match path_length(anchor, node, preferred, building) {
            Ok(p) => (preferred, p),
            Err(Error::NoEdgeDiffraction { .. }) => {
                match path_length(anchor, node, preferred.other(), building) {
                    Ok(p) => (preferred.other(), p),
                    Err(Error::NoEdgeDiffraction { .. }) => {
                        return Err(Error::MeasurementUnavailable { anchor: j })
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(e) => return Err(e),
        };
        let r = p + noise_draw;
        if r <= 0.0 {
            return Err(Error::MeasurementUnavailable { anchor: j });
        }
        ranges.push(r);
        edge_choices.push(kind);
    }
    Ok(RangeVector {
        ranges,
        truth: GroundTruth {
            node: *node,
            edge_choices,
        },
    })
}

/// Writer for the optional per-trial measurement dump
/// (`trial_id,floor,x_n,y_n,anchor_index,edge_choice,range_m`).
pub struct TrialDumpWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TrialDumpWriter<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(writer);
        inner.write_record([
            "trial_id",
            "floor",
            "x_n",
            "y_n",
            "anchor_index",
            "edge_choice",
            "range_m",
        ])?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, trial_id: u64, rv: &RangeVector) -> Result<()> {
        let t = rv.ground_truth();
        for (j, (r, e)) in rv.ranges().iter().zip(&t.edge_choices).enumerate() {
            self.inner.write_record([
                trial_id.to_string(),
                t.node.floor.to_string(),
                t.node.x.to_string(),
                t.node.y.to_string(),
                j.to_string(),
                e.as_str().to_string(),
                r.to_string(),
            ])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}
