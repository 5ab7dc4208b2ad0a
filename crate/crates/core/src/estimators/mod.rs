//! Positioning algorithms: linear least squares baseline, the per-floor
//! projection estimators with NLOS-bias corrections, and per-floor
//! Gauss-Newton on the diffraction path model. The floor-resolving
//! estimators run one 2D estimator per floor and keep the floor with the
//! smallest residual.

mod ippa;
mod lls;
mod nls;

use std::fmt;
use std::str::FromStr;

pub use ippa::{
    bias_corrections, ippa_estimate, ippa_estimate_with_corrections, ippa_floor_estimate,
    ActiveSet, DistanceMode, IppaOptions, IppaVariant, ResidualForm,
};
pub use lls::{lls_estimate, lls_solve};
pub use nls::{
    jacobian_row, nls_estimate, nls_floor_estimate, nls_jacobian, stationary_gradient,
    NEAR_SINGULAR_EPS,
};

use crate::error::{Error, Result};
use crate::geometry::BuildingModel;

/// Outcome of one per-floor estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloorCandidate {
    pub floor: usize,
    pub x: f64,
    pub y: f64,
    /// `+inf` when the floor estimator failed.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionEstimate {
    pub x: f64,
    pub y: f64,
    pub floor: usize,
    pub z: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when `x` or `y` had to be clamped into the footprint.
    pub clamped: bool,
    /// Per-floor diagnostics, in floor order. Empty for the LLS baseline.
    pub candidates: Vec<FloorCandidate>,
}

/// Starting point of the per-floor iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitMode {
    FloorCentroid,
    Custom { x: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Stop threshold, meters.
    pub delta: f64,
    pub max_iterations: usize,
    pub init_mode: InitMode,
    /// Initial Levenberg damping for Gauss-Newton.
    pub damping: f64,
    pub ippa: IppaOptions,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            delta: 1e-4,
            max_iterations: 1000,
            init_mode: InitMode::FloorCentroid,
            damping: 0.0,
            ippa: IppaOptions::default(),
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidConfig("delta must be positive".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return Err(Error::InvalidConfig("damping must be >= 0".into()));
        }
        Ok(())
    }

    pub(crate) fn initial_point(&self, building: &BuildingModel) -> (f64, f64) {
        match self.init_mode {
            InitMode::FloorCentroid => (0.5 * building.length(), 0.5 * building.breadth()),
            InitMode::Custom { x, y } => (x, y),
        }
    }
}

/// Index of the candidate with the smallest finite residual; ties go to the
/// lowest floor.
pub fn select_floor(candidates: &[FloorCandidate]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if !c.residual.is_finite() {
            continue;
        }
        match best {
            Some(b) if candidates[b].residual <= c.residual => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Builds the final estimate from the selected floor, clamping the planar
/// position into the footprint.
pub(crate) fn finalize(
    building: &BuildingModel,
    candidates: Vec<FloorCandidate>,
    chosen: usize,
) -> PositionEstimate {
    let c = candidates[chosen];
    let (x, y, clamped) = clamp_to_footprint(building, c.x, c.y);
    PositionEstimate {
        x,
        y,
        floor: c.floor,
        z: building.node_z_unchecked(c.floor),
        residual: c.residual,
        iterations: c.iterations,
        converged: c.converged,
        clamped,
        candidates,
    }
}

pub(crate) fn clamp_to_footprint(building: &BuildingModel, x: f64, y: f64) -> (f64, f64, bool) {
    let cx = x.clamp(0.0, building.length());
    let cy = y.clamp(0.0, building.breadth());
    (cx, cy, cx != x || cy != y)
}

/// Estimators run by the evaluation harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Lls,
    IppaId,
    IppaIdMin,
    IppaIdMean,
    Nls,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::Lls,
        EstimatorKind::IppaId,
        EstimatorKind::IppaIdMin,
        EstimatorKind::IppaIdMean,
        EstimatorKind::Nls,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Lls => "lls",
            EstimatorKind::IppaId => "ippa-id",
            EstimatorKind::IppaIdMin => "ippa-idmin",
            EstimatorKind::IppaIdMean => "ippa-idmean",
            EstimatorKind::Nls => "nls",
        }
    }

    pub fn ippa_variant(self) -> Option<IppaVariant> {
        match self {
            EstimatorKind::IppaId => Some(IppaVariant::Id),
            EstimatorKind::IppaIdMin => Some(IppaVariant::IdMin),
            EstimatorKind::IppaIdMean => Some(IppaVariant::IdMean),
            _ => None,
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['_', ':', ','], "-");
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown estimator '{s}'")))
    }
}
