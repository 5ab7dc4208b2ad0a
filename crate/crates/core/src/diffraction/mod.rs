//! Edge diffraction point and NLOS path length.
//!
//! For a horizontal edge `X1 -> X2` in the facade plane the diffraction point
//! is `Q = lambda * X1 + (1 - lambda) * X2`. Squaring the law of diffraction
//! gives a quadratic in `lambda`. Its two roots correspond to
//! `(q - x_a) / |AQ| = +/- (x_n - q) / |QB|`; only the `+` branch is the
//! forward Keller-cone ray, so root selection uses the signed cosines.

mod scan;

pub use scan::{
    for_each_pathdiff_sample, path_difference_scan, PathDiffHistogram, PathDiffSample,
    PATHDIFF_BIN_WIDTH,
};

use crate::error::{Error, Result};
use crate::geometry::{BuildingModel, Edge, EdgeKind, NodePosition, Point3};

/// Maximum signed-cosine mismatch for a root to count as satisfying the law.
pub const LAW_TOLERANCE: f64 = 1e-6;

/// Slack on `lambda` in `[0, 1]` to absorb roundoff at the edge extremities.
const LAMBDA_SLACK: f64 = 1e-12;

/// Relative slack for clamping a slightly negative discriminant to zero.
const DISCRIMINANT_CLAMP: f64 = 1e-9;

/// Coefficients of `a * lambda^2 + b * lambda + c = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadraticCoefficients {
    pub fn discriminant(&self) -> f64 {
        self.b * self.b - 4.0 * self.a * self.c
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        (self.a * lambda + self.b) * lambda + self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffractionSolution {
    pub lambda: f64,
    /// Diffraction point on the edge.
    pub point: Point3,
    /// `| |u_inc . e| - |u_diff . e| |`, the unsigned law of diffraction.
    pub law_residual: f64,
    /// `|u_inc . e - u_diff . e|`, the signed (forward cone) form used for root selection.
    pub cone_residual: f64,
    /// Sign of the square-root term of the accepted root, `+1` or `-1`.
    pub branch: f64,
    pub coefficients: QuadraticCoefficients,
}

/// Quadratic coefficients for the diffraction parameter of `edge` between
/// `anchor` and the lifted node position `node`.
pub fn quadratic_coefficients(
    anchor: &Point3,
    node: &Point3,
    edge: &Edge,
) -> Result<QuadraticCoefficients> {
    let x1 = edge.endpoint_1.x;
    let x2 = edge.endpoint_2.x;
    if x1 == x2 {
        return Err(Error::DegenerateEdge);
    }
    let z1 = edge.z();
    let (xa, ya, za) = (anchor.x, anchor.y, anchor.z);
    let (xn, yn, zn) = (node.x, node.y, node.z);
    let dx = x1 - x2;

    let node_term = (z1 - zn).powi(2) + yn * yn;
    let anchor_term = (z1 - za).powi(2) + ya * ya;

    let a = dx * dx * ((yn * yn - ya * ya) + (zn * zn - za * za) + 2.0 * z1 * (za - zn));
    let b = 2.0 * dx * ((x2 - xa) * node_term - (x2 - xn) * anchor_term);
    let c = (x2 - xa).powi(2) * node_term - (x2 - xn).powi(2) * anchor_term;
    Ok(QuadraticCoefficients { a, b, c })
}

/// Unsigned and signed law-of-diffraction residuals at `point`.
pub fn law_residuals(anchor: &Point3, node: &Point3, edge: &Edge, point: &Point3) -> (f64, f64) {
    let e = edge.endpoint_2 - edge.endpoint_1;
    let e = (1.0 / e.norm()) * e;
    let inc = *point - *anchor;
    let diff = *node - *point;
    let cos_inc = inc.dot(&e) / inc.norm();
    let cos_diff = diff.dot(&e) / diff.norm();
    (
        (cos_inc.abs() - cos_diff.abs()).abs(),
        (cos_inc - cos_diff).abs(),
    )
}

/// Newton steps on the signed law `cos_inc - cos_diff`, which is strictly
/// monotone along the edge. Recovers the digits the quadratic loses near a
/// double root.
fn polish(anchor: &Point3, node: &Point3, edge: &Edge, mut lambda: f64) -> f64 {
    let d = edge.endpoint_2 - edge.endpoint_1;
    let e = (1.0 / d.norm()) * d;
    // Rate of travel along `e` per unit lambda.
    let len = (edge.point_at(1.0) - edge.point_at(0.0)).dot(&e);
    let signed = |l: f64| {
        let p = edge.point_at(l);
        let inc = p - *anchor;
        let diff = *node - p;
        let (ni, nd) = (inc.norm(), diff.norm());
        let (ci, cd) = (inc.dot(&e), diff.dot(&e));
        let slope =
            len * ((ni * ni - ci * ci) / (ni * ni * ni) + (nd * nd - cd * cd) / (nd * nd * nd));
        (ci / ni - cd / nd, slope)
    };
    let (mut g, mut slope) = signed(lambda);
    for _ in 0..4 {
        if g == 0.0 || slope == 0.0 || !slope.is_finite() {
            break;
        }
        let next = lambda - g / slope;
        let (gn, sn) = signed(next);
        if gn.abs() >= g.abs() || gn.is_nan() {
            break;
        }
        (lambda, g, slope) = (next, gn, sn);
    }
    lambda
}

/// Finds the diffraction point on `edge` for the path `anchor -> Q -> node`.
pub fn solve_diffraction_point(
    anchor: &Point3,
    node: &Point3,
    edge: &Edge,
) -> Result<DiffractionSolution> {
    let coefficients = quadratic_coefficients(anchor, node, edge)?;
    let QuadraticCoefficients { a, b, c } = coefficients;

    let mut disc = coefficients.discriminant();
    if disc < 0.0 {
        if disc >= -DISCRIMINANT_CLAMP * b * b {
            disc = 0.0;
        } else {
            return Err(Error::RootSelection {
                residual: f64::INFINITY,
            });
        }
    }
    let sqrt_disc = disc.sqrt();

    // Cancellation-free pair: q / a and c / q.
    let sign_b = if b >= 0.0 { 1.0 } else { -1.0 };
    let q = -0.5 * (b + sign_b * sqrt_disc);
    let mut candidates: [(f64, f64); 2] = [(f64::NAN, 0.0); 2];
    if a != 0.0 {
        // (-b - sign(b) * s) / 2a: root on the -sign(b) branch
        candidates[0] = (q / a, -sign_b);
    }
    if q != 0.0 {
        candidates[1] = (c / q, sign_b);
    } else if a != 0.0 {
        candidates[1] = (0.0, sign_b);
    }

    let mut best: Option<DiffractionSolution> = None;
    let mut best_outside: Option<f64> = None;
    let mut best_any = f64::INFINITY;
    for &(lambda, branch) in candidates.iter().filter(|(l, _)| l.is_finite()) {
        let lambda = polish(anchor, node, edge, lambda);
        let point = edge.point_at(lambda);
        let (law_residual, cone_residual) = law_residuals(anchor, node, edge, &point);
        if !cone_residual.is_finite() {
            continue;
        }
        best_any = best_any.min(cone_residual);
        if cone_residual >= LAW_TOLERANCE {
            continue;
        }
        if !(-LAMBDA_SLACK..=1.0 + LAMBDA_SLACK).contains(&lambda) {
            best_outside = Some(lambda);
            continue;
        }
        let lambda = lambda.clamp(0.0, 1.0);
        let sol = DiffractionSolution {
            lambda,
            point: edge.point_at(lambda),
            law_residual,
            cone_residual,
            branch,
            coefficients,
        };
        if best.is_none_or(|b| sol.cone_residual < b.cone_residual) {
            best = Some(sol);
        }
    }
    match (best, best_outside) {
        (Some(sol), _) => Ok(sol),
        (None, Some(lambda)) => Err(Error::NoEdgeDiffraction { lambda }),
        (None, None) => Err(Error::RootSelection { residual: best_any }),
    }
}

/// Two-leg length `|A - Q| + |Q - B|` through a point on the edge.
pub fn two_leg_length(anchor: &Point3, node: &Point3, point: &Point3) -> f64 {
    anchor.distance(point) + node.distance(point)
}

/// Diffracted path length from `anchor` to the lifted node via `edge`.
pub fn path_length_via(
    anchor: &Point3,
    node: &Point3,
    edge: &Edge,
) -> Result<(f64, DiffractionSolution)> {
    let sol = solve_diffraction_point(anchor, node, edge)?;
    let q = sol.point;
    let first = ((anchor.x - q.x).powi(2) + anchor.y.powi(2) + (anchor.z - q.z).powi(2)).sqrt();
    let second = ((node.x - q.x).powi(2) + node.y.powi(2) + (node.z - q.z).powi(2)).sqrt();
    Ok((first + second, sol))
}

/// Path length between `anchor` and `node` diffracted by the chosen window
/// edge of the node's floor.
pub fn path_length(
    anchor: &Point3,
    node: &NodePosition,
    edge_kind: EdgeKind,
    building: &BuildingModel,
) -> Result<f64> {
    let edge = building.edge(node.floor, edge_kind)?;
    path_length_via(anchor, &node.to_point(building), &edge).map(|(p, _)| p)
}

/// Fermat-principle oracle: the uniform-grid minimiser of the two-leg
/// length on `[0, 1]`, refined by one golden-section pass over the
/// neighbouring grid cells.
///
/// The two-leg length is a sum of norms of affine functions of `lambda` and
/// hence convex, so the grid minimiser is located by a discrete ternary
/// search instead of evaluating every grid point.
pub fn fermat_oracle(anchor: &Point3, node: &Point3, edge: &Edge, resolution: f64) -> f64 {
    let n = grid_size(resolution);
    let f = |k: usize| two_leg_length(anchor, node, &edge.point_at(k as f64 / n as f64));
    let (mut lo, mut hi) = (0usize, n);
    while hi - lo > 3 {
        let m1 = lo + (hi - lo) / 3;
        let m2 = hi - (hi - lo) / 3;
        let (f1, f2) = (f(m1), f(m2));
        if f1 < f2 {
            hi = m2;
        } else if f1 > f2 {
            lo = m1;
        } else {
            lo = m1;
            hi = m2;
        }
    }
    let k = (lo..=hi)
        .min_by(|&i, &j| f(i).total_cmp(&f(j)))
        .unwrap_or(lo);
    refine_grid_minimum(anchor, node, edge, k, n)
}

/// Same contract as [`fermat_oracle`] but evaluates every grid point.
pub fn fermat_oracle_exhaustive(
    anchor: &Point3,
    node: &Point3,
    edge: &Edge,
    resolution: f64,
) -> f64 {
    let n = grid_size(resolution);
    let k = (0..=n)
        .map(|k| {
            (
                k,
                two_leg_length(anchor, node, &edge.point_at(k as f64 / n as f64)),
            )
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    refine_grid_minimum(anchor, node, edge, k, n)
}

fn grid_size(resolution: f64) -> usize {
    let r = if resolution.is_finite() && resolution > 0.0 {
        resolution.min(1e-3)
    } else {
        1e-3
    };
    (1.0 / r).ceil() as usize
}

fn refine_grid_minimum(anchor: &Point3, node: &Point3, edge: &Edge, k: usize, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let f = |l: f64| two_leg_length(anchor, node, &edge.point_at(l));
    let grid_lambda = k as f64 * h;
    let (mut lo, mut hi) = ((grid_lambda - h).max(0.0), (grid_lambda + h).min(1.0));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let refined = 0.5 * (lo + hi);
    if f(refined) < f(grid_lambda) {
        refined
    } else {
        grid_lambda
    }
}
