use nalgebra::{DMatrix, DVector};

use super::{clamp_to_footprint, PositionEstimate};
use crate::error::{Error, Result};
use crate::geometry::{AnchorConfig, BuildingModel, Point3};

const RANK_TOL: f64 = 1e-9;

/// Linearised multilateration: squared-range equations differenced against
/// the first anchor. When the anchors are coplanar (the usual case of
/// anchors lined up along one facade) the differenced system only fixes
/// the in-plane coordinates; the out-of-plane offset is then recovered from
/// the ranges and placed on the building side (larger y).
pub fn lls_solve(ranges: &[f64], anchors: &AnchorConfig) -> Result<Point3> {
    let m = anchors.len();
    if ranges.len() != m {
        return Err(Error::InvalidConfig(format!(
            "{} ranges for {} anchors",
            ranges.len(),
            m
        )));
    }
    if m < 3 {
        return Err(Error::SingularGeometry("need at least 3 anchors".into()));
    }
    let pts = anchors.as_slice();
    let x0 = pts[0];
    let a = DMatrix::from_fn(m - 1, 3, |i, k| {
        let d = pts[i + 1] - x0;
        2.0 * [d.x, d.y, d.z][k]
    });
    let rhs = DVector::from_fn(m - 1, |i, _| {
        let xj = pts[i + 1];
        ranges[0].powi(2) - ranges[i + 1].powi(2) + xj.dot(&xj) - x0.dot(&x0)
    });

    let svd = a.svd(true, true);
    let sigma_max = svd.singular_values.max();
    if sigma_max.is_nan() || sigma_max <= 0.0 {
        return Err(Error::SingularGeometry("anchors coincide".into()));
    }
    let tol = RANK_TOL * sigma_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let p0 = svd
        .solve(&rhs, tol)
        .map_err(|e| Error::SingularGeometry(e.to_string()))?;
    let p0 = Point3::new(p0[0], p0[1], p0[2]);
    match rank {
        3 => Ok(p0),
        2 => {
            let v_t = svd.v_t.as_ref().expect("requested V^T");
            // Null direction: right singular vector of the dropped singular value,
            // or the cross product of the two retained ones for 2-row systems.
            let normal = if v_t.nrows() == 3 {
                let (k, _) = svd
                    .singular_values
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .expect("three singular values");
                Point3::new(v_t[(k, 0)], v_t[(k, 1)], v_t[(k, 2)])
            } else {
                let r0 = Point3::new(v_t[(0, 0)], v_t[(0, 1)], v_t[(0, 2)]);
                let r1 = Point3::new(v_t[(1, 0)], v_t[(1, 1)], v_t[(1, 2)]);
                cross(&r0, &r1)
            };
            let normal = (1.0 / normal.norm()) * normal;
            let beta = normal.dot(&(p0 - x0));
            let gamma = pts
                .iter()
                .zip(ranges)
                .map(|(xj, r)| (p0 - *xj).dot(&(p0 - *xj)) - r * r)
                .sum::<f64>()
                / m as f64;
            let disc = (beta * beta - gamma).max(0.0).sqrt();
            let candidates = [-beta + disc, -beta - disc].map(|t| p0 + t * normal);
            Ok(if candidates[0].y >= candidates[1].y {
                candidates[0]
            } else {
                candidates[1]
            })
        }
        _ => Err(Error::SingularGeometry(format!(
            "anchor differences have rank {rank}; anchors are collinear"
        ))),
    }
}

fn cross(a: &Point3, b: &Point3) -> Point3 {
    Point3::new(
        a.y * b.z - a.z * b.y,
        a.z * b.x - a.x * b.z,
        a.x * b.y - a.y * b.x,
    )
}

/// LLS baseline as a [`PositionEstimate`]. The height is left unconstrained;
/// `floor` is the floor containing the estimated height.
pub fn lls_estimate(
    ranges: &[f64],
    anchors: &AnchorConfig,
    building: &BuildingModel,
) -> Result<PositionEstimate> {
    let p = lls_solve(ranges, anchors)?;
    if !p.is_finite() {
        return Err(Error::EstimationFailure(
            "LLS produced a non-finite position".into(),
        ));
    }
    let residual = (anchors
        .iter()
        .zip(ranges)
        .map(|(a, r)| (r - a.distance(&p)).powi(2))
        .sum::<f64>()
        / ranges.len() as f64)
        .sqrt();
    let (x, y, clamped) = clamp_to_footprint(building, p.x, p.y);
    Ok(PositionEstimate {
        x,
        y,
        floor: building.nearest_floor(p.z),
        z: p.z,
        residual,
        iterations: 0,
        converged: true,
        clamped,
        candidates: Vec::new(),
    })
}
