use nalgebra::{Matrix2, Vector2};

use super::{finalize, select_floor, FloorCandidate, PositionEstimate, SolverSettings};
use crate::diffraction::{path_length_via, DiffractionSolution};
use crate::error::{Error, Result};
use crate::geometry::{AnchorConfig, BuildingModel, Edge, EdgeKind, Point3};

/// `|b^2 - 4ac| < NEAR_SINGULAR_EPS * b^2` marks a near-double root, where
/// the closed-form derivative of the root loses all precision.
pub const NEAR_SINGULAR_EPS: f64 = 1e-10;

/// Below this `|a| / |b|` the `1/a` form of the root derivative cancels
/// badly; the implicit-function form is used instead.
const SMALL_LEADING_COEFF: f64 = 1e-6;

const MAX_CONDITION: f64 = 1e12;
const MAX_DAMPING: f64 = 1e6;
const FIRST_DAMPING: f64 = 1e-3;

/// Partial derivatives of the upper-edge path length with respect to the
/// node's `(x, y)`, given the diffraction solution at that node.
///
/// The diffraction point moves with the node, so the derivative of the
/// accepted quadratic root (same sign branch) enters through the chain rule.
pub fn jacobian_row(anchor: &Point3, node: &Point3, edge: &Edge) -> Result<[f64; 2]> {
    let (_, sol) = path_length_via(anchor, node, edge)?;
    jacobian_row_from(anchor, node, edge, &sol)
}

fn jacobian_row_from(
    anchor: &Point3,
    node: &Point3,
    edge: &Edge,
    sol: &DiffractionSolution,
) -> Result<[f64; 2]> {
    let (x1, x2, z1) = (edge.endpoint_1.x, edge.endpoint_2.x, edge.z());
    let (xa, ya, za) = (anchor.x, anchor.y, anchor.z);
    let (xn, yn, zn) = (node.x, node.y, node.z);
    let dx = x1 - x2;
    let coeffs = sol.coefficients;
    let (a, b, c) = (coeffs.a, coeffs.b, coeffs.c);
    let disc = coeffs.discriminant();
    if disc.abs() < NEAR_SINGULAR_EPS * b * b || disc <= 0.0 {
        return Err(Error::NearSingularDerivative { discriminant: disc });
    }
    let s = disc.sqrt();
    let anchor_term = (z1 - za).powi(2) + ya * ya;

    let da = [0.0, 2.0 * yn * dx * dx];
    let db = [2.0 * dx * anchor_term, 4.0 * yn * dx * (x2 - xa)];
    let dc = [2.0 * (x2 - xn) * anchor_term, 2.0 * yn * (x2 - xa).powi(2)];

    let pm = sol.branch;
    let lambda = sol.lambda;
    let dq = |k: usize| -> f64 {
        if a.abs() >= SMALL_LEADING_COEFF * b.abs() {
            dx / (2.0 * a)
                * (da[k] * (b - pm * s) / a
                    + (-db[k] + pm * (b * db[k] - 2.0 * c * da[k] - 2.0 * a * dc[k]) / s))
        } else {
            // Implicit differentiation of a*l^2 + b*l + c = 0.
            let dl = -(da[k] * lambda * lambda + db[k] * lambda + dc[k]) / (2.0 * a * lambda + b);
            dx * dl
        }
    };
    let (dq_dx, dq_dy) = (dq(0), dq(1));

    let q = sol.point;
    let first = ((q.x - xa).powi(2) + ya * ya + (za - q.z).powi(2)).sqrt();
    let second = ((xn - q.x).powi(2) + yn * yn + (zn - q.z).powi(2)).sqrt();
    let dp_dx = (q.x - xa) * dq_dx / first + (xn - q.x) * (1.0 - dq_dx) / second;
    let dp_dy = (q.x - xa) * dq_dy / first + ((q.x - xn) * dq_dy + yn) / second;
    Ok([dp_dx, dp_dy])
}

/// Gradient of the path length using stationarity of the diffraction point:
/// the terms multiplying the root derivative cancel, leaving only the
/// explicit dependence of the second leg on the node.
pub fn stationary_gradient(node: &Point3, sol: &DiffractionSolution) -> [f64; 2] {
    let q = sol.point;
    let second = ((node.x - q.x).powi(2) + node.y.powi(2) + (node.z - q.z).powi(2)).sqrt();
    [(node.x - q.x) / second, node.y / second]
}

/// `M x 2` Jacobian of the upper-edge path lengths of `floor` at `alpha`.
pub fn nls_jacobian(
    alpha: (f64, f64),
    floor: usize,
    anchors: &AnchorConfig,
    building: &BuildingModel,
) -> Result<Vec<[f64; 2]>> {
    let edge = building.edge(floor, EdgeKind::Upper)?;
    let node = Point3::new(alpha.0, alpha.1, building.node_z(floor)?);
    anchors
        .iter()
        .map(|a| jacobian_row(a, &node, &edge))
        .collect()
}

struct Linearisation {
    /// `(residual r - p, jacobian row)` for anchors with a diffraction point.
    rows: Vec<(f64, [f64; 2])>,
    /// Sum of squared mismatches over the kept rows, scaled to all anchors.
    cost: f64,
    /// Every anchor has a diffraction point.
    complete: bool,
}

impl Linearisation {
    /// Floor residual: the plain sum of squares, `+inf` if a row is missing.
    fn residual(&self) -> f64 {
        if self.complete {
            self.cost
        } else {
            f64::INFINITY
        }
    }
}

fn linearise(
    ranges: &[f64],
    anchors: &AnchorConfig,
    edge: &Edge,
    node: &Point3,
) -> Result<Linearisation> {
    let mut rows = Vec::with_capacity(ranges.len());
    for (anchor, r) in anchors.iter().zip(ranges) {
        match path_length_via(anchor, node, edge) {
            Ok((p, sol)) => {
                let row = match jacobian_row_from(anchor, node, edge, &sol) {
                    Ok(row) => row,
                    Err(Error::NearSingularDerivative { .. }) => stationary_gradient(node, &sol),
                    Err(e) => return Err(e),
                };
                rows.push((r - p, row));
            }
            Err(Error::NoEdgeDiffraction { .. }) | Err(Error::RootSelection { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let cost = if rows.len() >= 2 {
        rows.iter().map(|(e, _)| e * e).sum::<f64>() * ranges.len() as f64 / rows.len() as f64
    } else {
        f64::INFINITY
    };
    Ok(Linearisation {
        complete: rows.len() == ranges.len(),
        rows,
        cost,
    })
}

fn condition_number(m: &Matrix2<f64>) -> f64 {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    let hi = 0.5 * tr + disc;
    let lo = 0.5 * tr - disc;
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Gauss-Newton with Levenberg damping on one floor hypothesis. Returns the
/// final position and the sum of squared range mismatches (`+inf` on failure).
pub fn nls_floor_estimate(
    ranges: &[f64],
    anchors: &AnchorConfig,
    floor: usize,
    building: &BuildingModel,
    settings: &SolverSettings,
) -> Result<FloorCandidate> {
    if ranges.len() != anchors.len() {
        return Err(Error::InvalidConfig(format!(
            "{} ranges for {} anchors",
            ranges.len(),
            anchors.len()
        )));
    }
    if anchors.len() < 2 {
        return Err(Error::InvalidConfig(
            "need at least 2 anchors per floor".into(),
        ));
    }
    let edge = building.edge(floor, EdgeKind::Upper)?;
    let z = building.node_z(floor)?;
    let at = |alpha: (f64, f64)| Point3::new(alpha.0, alpha.1, z);

    let failed = |alpha: (f64, f64), iterations| FloorCandidate {
        floor,
        x: alpha.0,
        y: alpha.1,
        residual: f64::INFINITY,
        iterations,
        converged: false,
    };

    let mut alpha = settings.initial_point(building);
    let mut lin = linearise(ranges, anchors, &edge, &at(alpha))?;
    if !lin.cost.is_finite() {
        return Ok(failed(alpha, 0));
    }
    let mut mu = settings.damping;
    let mut converged = false;
    let mut iterations = 0;

    'outer: for k in 1..=settings.max_iterations {
        iterations = k;
        let mut hth = Matrix2::zeros();
        let mut g = Vector2::zeros();
        for (e, row) in &lin.rows {
            let h = Vector2::new(row[0], row[1]);
            hth += h * h.transpose();
            g += h * *e;
        }
        if condition_number(&hth) > MAX_CONDITION && mu == 0.0 {
            mu = FIRST_DAMPING;
        }
        loop {
            let lhs = hth + Matrix2::identity() * mu;
            let step = match lhs.try_inverse() {
                Some(inv) if condition_number(&lhs) <= MAX_CONDITION => inv * g,
                _ => {
                    mu = if mu == 0.0 { FIRST_DAMPING } else { mu * 10.0 };
                    if mu > MAX_DAMPING {
                        return Ok(failed(alpha, iterations));
                    }
                    continue;
                }
            };
            // The path model is even in y; stay on the building side.
            let trial = (alpha.0 + step[0], (alpha.1 + step[1]).abs());
            let trial_lin = linearise(ranges, anchors, &edge, &at(trial))?;
            if trial_lin.cost <= lin.cost {
                let moved = ((trial.0 - alpha.0).powi(2) + (trial.1 - alpha.1).powi(2)).sqrt();
                alpha = trial;
                lin = trial_lin;
                mu = if mu < 1e-12 { 0.0 } else { mu / 10.0 };
                if moved < settings.delta {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            mu = if mu == 0.0 { FIRST_DAMPING } else { mu * 10.0 };
            if mu > MAX_DAMPING {
                // No descent left at machine precision: a local minimum.
                converged = true;
                break 'outer;
            }
        }
    }

    Ok(FloorCandidate {
        floor,
        x: alpha.0,
        y: alpha.1,
        residual: lin.residual(),
        iterations,
        converged: converged && lin.complete,
    })
}

/// Gauss-Newton on every floor; the floor with the smallest finite residual
/// gives the height.
pub fn nls_estimate(
    ranges: &[f64],
    anchors: &AnchorConfig,
    building: &BuildingModel,
    settings: &SolverSettings,
) -> Result<PositionEstimate> {
    settings.validate()?;
    let candidates = (1..=building.num_floors())
        .map(|floor| nls_floor_estimate(ranges, anchors, floor, building, settings))
        .collect::<Result<Vec<_>>>()?;
    if !candidates.iter().any(|c| c.converged) {
        return Err(Error::EstimationFailure(
            "no floor estimator converged".into(),
        ));
    }
    let chosen = select_floor(&candidates)
        .ok_or_else(|| Error::EstimationFailure("no floor produced a finite residual".into()))?;
    Ok(finalize(building, candidates, chosen))
}
