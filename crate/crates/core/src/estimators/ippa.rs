use super::{finalize, select_floor, FloorCandidate, PositionEstimate, SolverSettings};
use crate::bias::{BiasStatistic, BiasTable};
use crate::error::{Error, Result};
use crate::geometry::{AnchorConfig, BuildingModel, Point3};

/// Amount of a-priori NLOS information folded into the range correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IppaVariant {
    /// NLOS identification only: no correction.
    Id,
    /// Subtract the minimum of the bias distribution.
    IdMin,
    /// Subtract the mean of the bias distribution.
    IdMean,
}

/// Floor residual used for convergence and floor selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualForm {
    /// `mean_j |(r_j - rb_j) - d_j|`.
    #[default]
    AbsoluteMismatch,
    /// `mean_j (r_j - rb_j) * d_j`, kept for comparison only.
    PrintedProduct,
}

/// How anchor-to-estimate distances are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMode {
    /// Estimate lifted to the floor's node height; 3D distances.
    #[default]
    Lifted3D,
    /// Anchors projected onto the floor plane; 2D distances.
    Projected2D,
}

/// Which anchors contribute a projection in an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActiveSet {
    /// Only anchors whose corrected range ball does not contain the estimate.
    OutsideBall,
    /// Only anchors whose corrected range ball contains the estimate.
    #[default]
    InsideBall,
    /// Every anchor (projection onto the range spheres).
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IppaOptions {
    pub residual: ResidualForm,
    pub distance: DistanceMode,
    pub active_set: ActiveSet,
}

struct AnchorGeometry {
    distance: f64,
    /// Planar components of the unit vector from the anchor to the estimate.
    ux: f64,
    uy: f64,
}

fn anchor_geometry(
    alpha: (f64, f64),
    z: f64,
    anchor: &Point3,
    mode: DistanceMode,
) -> AnchorGeometry {
    let dx = alpha.0 - anchor.x;
    let dy = alpha.1 - anchor.y;
    let dz = match mode {
        DistanceMode::Lifted3D => z - anchor.z,
        DistanceMode::Projected2D => 0.0,
    };
    let distance = (dx * dx + dy * dy + dz * dz).sqrt();
    if distance > 0.0 {
        AnchorGeometry {
            distance,
            ux: dx / distance,
            uy: dy / distance,
        }
    } else {
        AnchorGeometry {
            distance,
            ux: 0.0,
            uy: 0.0,
        }
    }
}

fn floor_residual(corrected: &[f64], geo: &[AnchorGeometry], form: ResidualForm) -> f64 {
    let m = corrected.len() as f64;
    match form {
        ResidualForm::AbsoluteMismatch => {
            corrected
                .iter()
                .zip(geo)
                .map(|(rho, g)| (rho - g.distance).abs())
                .sum::<f64>()
                / m
        }
        ResidualForm::PrintedProduct => {
            corrected
                .iter()
                .zip(geo)
                .map(|(rho, g)| rho * g.distance)
                .sum::<f64>()
                / m
        }
    }
}

/// Projection iterations for one floor hypothesis.
///
/// Each anchor in the active set projects the current estimate onto its
/// corrected ranging sphere, `beta_j = alpha + (rho_j - d_j) * u_j`, with
/// `u_j` the planar part of the unit vector from the anchor to the estimate.
/// The new estimate is the average of the projections. Iteration stops when
/// the floor residual changes by less than `delta`.
pub fn ippa_floor_estimate(
    ranges: &[f64],
    anchors: &AnchorConfig,
    building: &BuildingModel,
    floor: usize,
    bias_corrections: &[f64],
    settings: &SolverSettings,
) -> Result<FloorCandidate> {
    let m = anchors.len();
    if ranges.len() != m || bias_corrections.len() != m {
        return Err(Error::InvalidConfig(format!(
            "{} ranges and {} corrections for {} anchors",
            ranges.len(),
            bias_corrections.len(),
            m
        )));
    }
    let z = building.node_z(floor)?;
    let opts = settings.ippa;
    let corrected: Vec<f64> = ranges
        .iter()
        .zip(bias_corrections)
        .map(|(r, b)| r - b)
        .collect();

    let geometry = |alpha: (f64, f64)| -> Vec<AnchorGeometry> {
        anchors
            .iter()
            .map(|a| anchor_geometry(alpha, z, a, opts.distance))
            .collect()
    };

    let mut alpha = settings.initial_point(building);
    let mut geo = geometry(alpha);
    let mut phi = floor_residual(&corrected, &geo, opts.residual);
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=settings.max_iterations {
        iterations = k;
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for (rho, g) in corrected.iter().zip(&geo) {
            let active = match opts.active_set {
                ActiveSet::OutsideBall => *rho <= g.distance,
                ActiveSet::InsideBall => *rho >= g.distance,
                ActiveSet::All => true,
            };
            if !active || g.distance == 0.0 {
                continue;
            }
            let step = rho - g.distance;
            sx += alpha.0 + step * g.ux;
            sy += alpha.1 + step * g.uy;
            n += 1;
        }
        // Empty active set: the estimate already lies in every ball.
        if n > 0 {
            alpha = (sx / n as f64, sy / n as f64);
        }
        geo = geometry(alpha);
        let next = floor_residual(&corrected, &geo, opts.residual);
        let change = (next - phi).abs();
        phi = next;
        if change < settings.delta {
            converged = true;
            break;
        }
    }

    let residual = if phi.is_finite() {
        phi.abs()
    } else {
        f64::INFINITY
    };
    Ok(FloorCandidate {
        floor,
        x: alpha.0,
        y: alpha.1,
        residual,
        iterations,
        converged,
    })
}

/// Per-anchor range corrections for `floor` under `variant`.
pub fn bias_corrections(
    table: &BiasTable,
    variant: IppaVariant,
    floor: usize,
    num_anchors: usize,
) -> Result<Vec<f64>> {
    let stat = match variant {
        IppaVariant::Id => return Ok(vec![0.0; num_anchors]),
        IppaVariant::IdMin => BiasStatistic::Min,
        IppaVariant::IdMean => BiasStatistic::Mean,
    };
    (0..num_anchors)
        .map(|j| {
            table.statistic(j, floor, stat).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "bias table has no entry for anchor {j}, floor {floor}"
                ))
            })
        })
        .collect()
}

/// Runs the projection estimator on every floor with caller-supplied
/// corrections and keeps the floor with the smallest residual.
pub fn ippa_estimate_with_corrections(
    ranges: &[f64],
    anchors: &AnchorConfig,
    building: &BuildingModel,
    mut corrections: impl FnMut(usize) -> Result<Vec<f64>>,
    settings: &SolverSettings,
) -> Result<PositionEstimate> {
    settings.validate()?;
    let mut candidates = Vec::with_capacity(building.num_floors());
    for floor in 1..=building.num_floors() {
        let rb = corrections(floor)?;
        candidates.push(ippa_floor_estimate(
            ranges, anchors, building, floor, &rb, settings,
        )?);
    }
    let chosen = select_floor(&candidates)
        .ok_or_else(|| Error::EstimationFailure("no floor produced a finite residual".into()))?;
    Ok(finalize(building, candidates, chosen))
}

pub fn ippa_estimate(
    ranges: &[f64],
    anchors: &AnchorConfig,
    building: &BuildingModel,
    bias_table: &BiasTable,
    variant: IppaVariant,
    settings: &SolverSettings,
) -> Result<PositionEstimate> {
    ippa_estimate_with_corrections(
        ranges,
        anchors,
        building,
        |floor| bias_corrections(bias_table, variant, floor, anchors.len()),
        settings,
    )
}
