//! Circular drill path in cylindrical coordinates and the constrained
//! periodic cubic spline through its nodes.
//!
//! The path is a circle of constant radius in the x–y plane; only the z
//! coordinate of each node changes while drilling. Interpolation happens in
//! the (phi, z) plane. Node derivatives are chosen so that every segment stays
//! inside the band spanned by its two endpoint values: the derivative is the
//! harmonic mean of the adjacent secant slopes when they agree in sign and
//! zero otherwise. The last segment wraps from the final node to the first
//! node shifted by 2π.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Convert a Cartesian x–y position to `(rho, phi)` with `phi` in `(-π, π]`.
pub fn to_cylindrical(x: f64, y: f64) -> Result<(f64, f64)> {
    if x == 0.0 && y == 0.0 {
        return Err(SimError::OnAxis { x, y });
    }
    let rho = x.hypot(y);
    let mut phi = y.atan2(x);
    // atan2(-0.0, x<0) yields -π; the canonical range excludes it.
    if phi <= -PI {
        phi = PI;
    }
    Ok((rho, phi))
}

/// Angle of node `k` on the canonical `n`-node circle, in `(-π, π]`.
pub fn node_angle(k: usize, n: usize) -> f64 {
    if k + 1 == n {
        PI
    } else {
        -PI + (k + 1) as f64 * (TAU / n as f64)
    }
}

/// One discretized node of the drill path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// Zero-based position along the path after canonical sorting.
    pub index: usize,
    pub x: f64,
    pub y: f64,
    /// Commanded tip height at this node.
    pub z: f64,
    pub rho: f64,
    pub phi: f64,
}

/// The `n` nodes of the circular drill path, sorted by increasing angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState {
    points: Vec<TrajectoryPoint>,
    diameter: f64,
}

impl TrajectoryState {
    /// Equally spaced circle of `n` nodes at height `z0`. Node angles are
    /// `-π + (k + 1)·2π/n`, so the last node sits exactly at `π`.
    pub fn circle(n: usize, diameter: f64, z0: f64) -> Result<Self> {
        if n < 3 {
            return Err(SimError::InvalidInput(format!(
                "a closed path needs at least 3 nodes, got {n}"
            )));
        }
        if !(diameter > 0.0 && diameter.is_finite()) {
            return Err(SimError::InvalidInput(format!(
                "diameter must be positive, got {diameter}"
            )));
        }
        let rho = diameter / 2.0;
        let points = (0..n)
            .map(|k| {
                let phi = node_angle(k, n);
                TrajectoryPoint {
                    index: k,
                    x: rho * phi.cos(),
                    y: rho * phi.sin(),
                    z: z0,
                    rho,
                    phi,
                }
            })
            .collect();
        Ok(Self { points, diameter })
    }

    /// Build from arbitrary Cartesian nodes. Nodes are sorted by angle and
    /// must form an equally spaced constant-radius circle.
    pub fn from_xyz(nodes: &[[f64; 3]]) -> Result<Self> {
        let n = nodes.len();
        if n < 3 {
            return Err(SimError::InvalidInput(format!(
                "a closed path needs at least 3 nodes, got {n}"
            )));
        }
        let mut points = nodes
            .iter()
            .map(|&[x, y, z]| {
                let (rho, phi) = to_cylindrical(x, y)?;
                Ok(TrajectoryPoint { index: 0, x, y, z, rho, phi })
            })
            .collect::<Result<Vec<_>>>()?;
        points.sort_by(|a, b| a.phi.total_cmp(&b.phi));
        for (k, p) in points.iter_mut().enumerate() {
            p.index = k;
        }

        let rho = points[0].rho;
        let step = TAU / n as f64;
        let tol = 1e-6;
        for p in &points {
            if (p.rho - rho).abs() > tol * rho {
                return Err(SimError::InvalidInput(format!(
                    "node {} has radius {} but the path radius is {rho}",
                    p.index, p.rho
                )));
            }
        }
        for w in points.windows(2) {
            let gap = w[1].phi - w[0].phi;
            if (gap - step).abs() > tol * step {
                return Err(SimError::InvalidInput(format!(
                    "nodes {} and {} are {gap} rad apart, expected {step}",
                    w[0].index, w[1].index
                )));
            }
        }
        Ok(Self { points, diameter: 2.0 * rho })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn points(&self) -> &[TrajectoryPoint] {
        &self.points
    }

    pub fn phis(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.phi).collect()
    }

    pub fn zs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.z).collect()
    }

    /// Angular node spacing.
    pub fn spacing(&self) -> f64 {
        TAU / self.points.len() as f64
    }

    pub fn set_z(&mut self, index: usize, z: f64) {
        self.points[index].z = z;
    }

    /// Index of the node closest to `phi` (any real angle).
    pub fn nearest_index(&self, phi: f64) -> usize {
        let n = self.points.len();
        let first = self.points[0].phi;
        let k = ((phi - first).rem_euclid(TAU) / self.spacing()).round() as usize;
        k % n
    }
}

/// Cubic on `[phi_l, phi_r]`, stored about its left node:
/// `s(phi) = a + b·u + c·u² + d·u³` with `u = phi − phi_l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplineSegment {
    pub phi_l: f64,
    pub phi_r: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl SplineSegment {
    pub fn eval(&self, phi: f64) -> f64 {
        let u = phi - self.phi_l;
        self.a + u * (self.b + u * (self.c + u * self.d))
    }

    pub fn derivative(&self, phi: f64) -> f64 {
        let u = phi - self.phi_l;
        self.b + u * (2.0 * self.c + 3.0 * u * self.d)
    }

    pub fn width(&self) -> f64 {
        self.phi_r - self.phi_l
    }
}

/// First derivatives at every node of a closed path.
///
/// `t_i = (z_{i+1} − z_i)(z_i − z_{i−1})`; when `t_i > 0` the derivative is
/// `2 / (Δφ_right/Δz_right + Δφ_left/Δz_left)`, otherwise 0. Neighbours of
/// the first and last node wrap around with the angle shifted by ∓2π.
pub fn node_derivatives(z: &[f64], phi: &[f64]) -> Result<Vec<f64>> {
    let n = z.len();
    if phi.len() != n {
        return Err(SimError::LengthMismatch { expected: n, got: phi.len() });
    }
    check_angles(phi)?;

    Ok((0..n).map(|i| derivative_at(n, i, |k| z[k], |k| phi[k])).collect())
}

fn derivative_at(n: usize, i: usize, z: impl Fn(usize) -> f64, phi: impl Fn(usize) -> f64) -> f64 {
    let (phi_left, z_left) = if i == 0 { (phi(n - 1) - TAU, z(n - 1)) } else { (phi(i - 1), z(i - 1)) };
    let (phi_right, z_right) = if i + 1 == n { (phi(0) + TAU, z(0)) } else { (phi(i + 1), z(i + 1)) };
    let dz_right = z_right - z(i);
    let dz_left = z(i) - z_left;
    if dz_right * dz_left > 0.0 {
        2.0 / ((phi_right - phi(i)) / dz_right + (phi(i) - phi_left) / dz_left)
    } else {
        0.0
    }
}

fn check_angles(phi: &[f64]) -> Result<()> {
    if phi.len() < 3 {
        return Err(SimError::InvalidInput(format!(
            "a closed path needs at least 3 nodes, got {}",
            phi.len()
        )));
    }
    if phi.iter().any(|p| !p.is_finite()) {
        return Err(SimError::InvalidInput("node angles must be finite".into()));
    }
    if phi.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SimError::InvalidInput("node angles must strictly increase".into()));
    }
    if phi[phi.len() - 1] - phi[0] >= TAU {
        return Err(SimError::InvalidInput("node angles must span less than 2π".into()));
    }
    Ok(())
}

/// Cubic matching value and first derivative at both ends of `[phi_l, phi_r]`.
///
/// The 4×4 interpolation system is solved directly (in the segment-local
/// variable) instead of forming its inverse.
pub fn fit_segment(
    phi_l: f64,
    z_l: f64,
    dz_l: f64,
    phi_r: f64,
    z_r: f64,
    dz_r: f64,
) -> Result<SplineSegment> {
    let h = phi_r - phi_l;
    if !(h > 0.0 && h.is_finite()) {
        return Err(SimError::DegenerateSegment { phi_l, phi_r });
    }
    let system = segment_system(h);
    let rhs = [z_l, dz_l, z_r, dz_r];
    let [a, b, c, d] = solve4(system, rhs).ok_or(SimError::DegenerateSegment { phi_l, phi_r })?;
    Ok(SplineSegment { phi_l, phi_r, a, b, c, d })
}

/// Rows: value at left, slope at left, value at right, slope at right, for
/// the monomial basis `1, u, u², u³` on `[0, h]`.
pub(crate) fn segment_system(h: f64) -> [[f64; 4]; 4] {
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [1.0, h, h * h, h * h * h],
        [0.0, 1.0, 2.0 * h, 3.0 * h * h],
    ]
}

/// Gaussian elimination in row order. The first two pivots are exact unit
/// rows, so the left value and slope come out unrounded.
fn solve4(mut m: [[f64; 4]; 4], mut rhs: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        if m[col][col] == 0.0 {
            return None;
        }
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            if f != 0.0 {
                for k in col..4 {
                    m[row][k] -= f * m[col][k];
                }
                rhs[row] -= f * rhs[col];
            }
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let tail: f64 = (row + 1..4).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - tail) / m[row][row];
    }
    Some(x)
}

/// The closed constrained spline: one segment per node, the last one
/// spanning `[φ_n, φ_1 + 2π]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineCurve {
    segments: Vec<SplineSegment>,
    node_derivatives: Vec<f64>,
}

impl SplineCurve {
    /// Spline through `(phi_i, z_i)` on a closed path.
    pub fn through(phi: &[f64], z: &[f64]) -> Result<Self> {
        let dz = node_derivatives(z, phi)?;
        let n = z.len();
        let segments = (0..n)
            .map(|i| {
                let (j, phi_r) = if i + 1 == n { (0, phi[0] + TAU) } else { (i + 1, phi[i + 1]) };
                fit_segment(phi[i], z[i], dz[i], phi_r, z[j], dz[j])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { segments, node_derivatives: dz })
    }

    pub fn segments(&self) -> &[SplineSegment] {
        &self.segments
    }

    pub fn node_derivatives(&self) -> &[f64] {
        &self.node_derivatives
    }

    /// Segment covering `phi` after reduction into `[φ_1, φ_1 + 2π)`.
    pub fn segment_at(&self, phi: f64) -> (&SplineSegment, f64) {
        let start = self.segments[0].phi_l;
        let phi = if (start..start + TAU).contains(&phi) {
            phi
        } else {
            start + (phi - start).rem_euclid(TAU)
        };
        let k = self.segments.partition_point(|s| s.phi_l <= phi).max(1) - 1;
        (&self.segments[k], phi)
    }

    pub fn eval(&self, phi: f64) -> f64 {
        let (seg, phi) = self.segment_at(phi);
        seg.eval(phi)
    }

    pub fn derivative(&self, phi: f64) -> f64 {
        let (seg, phi) = self.segment_at(phi);
        seg.derivative(phi)
    }
}

/// Spline through the current nodes of `trajectory`.
pub fn build_spline(trajectory: &TrajectoryState) -> Result<SplineCurve> {
    SplineCurve::through(&trajectory.phis(), &trajectory.zs())
}

/// The segment of `build_spline(trajectory)` that covers `phi`, fitted on
/// its own, with `phi` reduced into that segment's domain.
pub fn local_segment(trajectory: &TrajectoryState, phi: f64) -> Result<(SplineSegment, f64)> {
    let n = trajectory.len();
    let pts = trajectory.points();
    if n < 3 {
        return Err(SimError::InvalidInput(format!("a closed path needs at least 3 nodes, got {n}")));
    }
    let start = pts[0].phi;
    let reduced = if (start..start + TAU).contains(&phi) { phi } else { start + (phi - start).rem_euclid(TAU) };
    let i = pts.partition_point(|p| p.phi <= reduced).max(1) - 1;
    let (j, phi_r) = if i + 1 == n { (0, pts[0].phi + TAU) } else { (i + 1, pts[i + 1].phi) };
    let deriv = |k| derivative_at(n, k, |m| pts[m].z, |m| pts[m].phi);
    Ok((fit_segment(pts[i].phi, pts[i].z, deriv(i), phi_r, pts[j].z, deriv(j))?, reduced))
}

/// Value of `curve` at any finite angle.
pub fn eval_spline(curve: &SplineCurve, phi: f64) -> f64 {
    curve.eval(phi)
}
