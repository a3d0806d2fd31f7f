//! Execution-time least-squares plane `z = αx + βy + γ` through the path
//! nodes that have already been contacted, and the per-node offsets that
//! move the commanded heights onto it.

use serde::{Deserialize, Serialize};

use crate::spline::TrajectoryState;

/// Relative threshold on the smaller singular value of the centered x–y
/// design below which the inputs count as collinear.
pub const COLLINEAR_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneFit {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub valid: bool,
    pub point_count: usize,
}

impl PlaneFit {
    pub fn invalid(point_count: usize) -> Self {
        Self { alpha: 0.0, beta: 0.0, gamma: 0.0, valid: false, point_count }
    }

    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        self.alpha * x + self.beta * y + self.gamma
    }

    /// Sum of squared vertical residuals over `points`.
    pub fn sum_squared_residuals(&self, points: &[[f64; 3]]) -> f64 {
        points.iter().map(|&[x, y, z]| (z - self.height_at(x, y)).powi(2)).sum()
    }
}

/// Least-squares plane through `points`.
///
/// Solved on mean-centered coordinates: the slopes come from the 2×2
/// covariance system of x and y, and the intercept from the centroid. Fewer
/// than three points, or points whose x–y projection is (numerically)
/// collinear, yield an invalid fit.
pub fn fit_plane(points: &[[f64; 3]]) -> PlaneFit {
    let count = points.len();
    if count < 3 {
        return PlaneFit::invalid(count);
    }
    let inv = 1.0 / count as f64;
    let (mut mx, mut my, mut mz) = (0.0, 0.0, 0.0);
    for &[x, y, z] in points {
        mx += x;
        my += y;
        mz += z;
    }
    mx *= inv;
    my *= inv;
    mz *= inv;

    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &[x, y, z] in points {
        let (dx, dy, dz) = (x - mx, y - my, z - mz);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        sxz += dx * dz;
        syz += dy * dz;
    }

    // Eigenvalues of the scatter matrix are the squared singular values of
    // the centered design.
    let det = sxx * syy - sxy * sxy;
    let half_trace = 0.5 * (sxx + syy);
    let lambda_max = half_trace + (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();
    if !(lambda_max > 0.0) || !det.is_finite() {
        return PlaneFit::invalid(count);
    }
    let lambda_min = (det / lambda_max).max(0.0);
    if lambda_min.sqrt() < COLLINEAR_RTOL * lambda_max.sqrt() {
        return PlaneFit::invalid(count);
    }

    let alpha = (sxz * syy - syz * sxy) / det;
    let beta = (syz * sxx - sxz * sxy) / det;
    let gamma = mz - alpha * mx - beta * my;
    PlaneFit { alpha, beta, gamma, valid: true, point_count: count }
}

/// Per-node offset `plane(x_i, y_i) − z_i`; all zeros for an invalid fit.
pub fn plane_offsets(fit: &PlaneFit, trajectory: &TrajectoryState) -> Vec<f64> {
    trajectory
        .points()
        .iter()
        .map(|p| if fit.valid { fit.height_at(p.x, p.y) - p.z } else { 0.0 })
        .collect()
}

/// Nodes whose completion estimate is nonzero, as `[x, y, z]`.
pub fn contacted_points(trajectory: &TrajectoryState, completion: &[f64]) -> Vec<[f64; 3]> {
    trajectory
        .points()
        .iter()
        .zip(completion)
        .filter(|(_, &c)| c != 0.0)
        .map(|(p, _)| [p.x, p.y, p.z])
        .collect()
}
