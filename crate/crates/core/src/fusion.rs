//! Bringing the image-based and force-based completion estimates onto the
//! common path grid and combining them.
//!
//! The image recognizer reports `m` evenly spaced samples around the circle;
//! they are upsampled to the `n` path nodes by periodic linear interpolation.
//! The force recognizer reports `K` samples for the next `K / f` seconds,
//! which at the nominal turn rate cover the `K` nodes ahead of the drill; the
//! rest of the force vector (and of its weight vector) is zero.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Per-node completion levels, every element in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionVector(Vec<f64>);

impl CompletionVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(SimError::InvalidInput(format!(
                "completion level {v} at index {i} is outside [0, 1]"
            )));
        }
        Ok(Self(values))
    }

    /// Clamps every element into `[0, 1]`; NaN becomes 0.
    pub fn clamped(values: Vec<f64>) -> Self {
        Self(values.into_iter().map(clamp_unit).collect())
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

impl std::ops::Index<usize> for CompletionVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub(crate) fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Linear accuracy law of the force recognizer: `acc(Δt) = a·Δt + b` in
/// percent, for predictions `Δt` seconds ahead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyModel {
    /// Slope, percent per second.
    pub a: f64,
    /// Intercept, percent.
    pub b: f64,
    /// Force sample rate, Hz.
    pub f: f64,
    /// Samples per prediction window.
    pub k: usize,
    /// Absolute completion error that still counts as accurate.
    pub tolerance: f64,
}

impl AccuracyModel {
    pub const EGG: AccuracyModel = AccuracyModel { a: -7.94, b: 81.43, f: 20.0, k: 80, tolerance: 0.05 };
    pub const MOUSE: AccuracyModel = AccuracyModel { a: -7.07, b: 74.01, f: 20.0, k: 80, tolerance: 0.05 };

    /// Raw accuracy in percent; may leave `[0, 100]` for large `Δt`.
    pub fn accuracy(&self, dt: f64) -> f64 {
        self.a * dt + self.b
    }

    /// Accuracy clamped to `[0, 100]` and scaled to `[0, 1]`.
    pub fn weight(&self, dt: f64) -> f64 {
        self.accuracy(dt).clamp(0.0, 100.0) / 100.0
    }

    /// Lead time of window sample `j`.
    pub fn lead(&self, j: usize) -> f64 {
        j as f64 / self.f
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f > 0.0) || self.k == 0 {
            return Err(SimError::Config(format!(
                "force window needs f > 0 and K > 0, got f = {}, K = {}",
                self.f, self.k
            )));
        }
        if !(self.tolerance > 0.0) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(SimError::Config("accuracy law parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Force weights on the `n`-node grid: node `current_index + j` (cyclic)
/// carries `acc(j / f) / 100` for `j < K`; every other node carries 0.
pub fn accuracy_weights(model: &AccuracyModel, current_index: usize, n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    for j in 0..model.k.min(n) {
        w[(current_index + j) % n] = model.weight(model.lead(j));
    }
    w
}

/// Place the `K` force samples on the `n`-node grid starting at
/// `current_index`; all other nodes are 0.
pub fn pad_force(c_force: &[f64], current_index: usize, n: usize) -> Result<Vec<f64>> {
    if c_force.len() > n {
        return Err(SimError::InvalidInput(format!(
            "force window of {} samples does not fit on {n} nodes",
            c_force.len()
        )));
    }
    let mut out = vec![0.0; n];
    for (j, &v) in c_force.iter().enumerate() {
        out[(current_index + j) % n] = v;
    }
    Ok(out)
}

/// Periodic linear interpolation of `m` evenly spaced samples onto `n`
/// nodes. Sample `k` lands on node `k·n/m`.
pub fn upsample_image(c_image: &[f64], n: usize) -> Result<Vec<f64>> {
    let m = c_image.len();
    if m == 0 || m > n {
        return Err(SimError::InvalidInput(format!("cannot upsample {m} samples to {n} nodes")));
    }
    if n % m != 0 {
        return Err(SimError::InvalidInput(format!("{m} samples do not divide {n} nodes")));
    }
    let factor = n / m;
    Ok((0..n)
        .map(|i| {
            let k = i / factor;
            let r = i % factor;
            if r == 0 {
                c_image[k]
            } else {
                let frac = r as f64 / factor as f64;
                (1.0 - frac) * c_image[k] + frac * c_image[(k + 1) % m]
            }
        })
        .collect())
}

/// `c = (1 − w2)⊙c_image + w2⊙c_force`, clamped to `[0, 1]`.
pub fn fuse(c_image_up: &[f64], c_force_pad: &[f64], w2: &[f64]) -> Result<CompletionVector> {
    let n = c_image_up.len();
    for len in [c_force_pad.len(), w2.len()] {
        if len != n {
            return Err(SimError::LengthMismatch { expected: n, got: len });
        }
    }
    if let Some(w) = w2.iter().find(|w| !(0.0..=1.0).contains(*w)) {
        return Err(SimError::InvalidInput(format!("fusion weight {w} is outside [0, 1]")));
    }
    Ok(CompletionVector(
        c_image_up
            .iter()
            .zip(c_force_pad)
            .zip(w2)
            .map(|((&ci, &cf), &w)| if w == 0.0 { ci } else { clamp_unit((1.0 - w) * ci + w * cf) })
            .collect(),
    ))
}

/// Elementwise maximum: completion never decreases.
pub fn update_progress(previous: &CompletionVector, new: &CompletionVector) -> Result<CompletionVector> {
    if previous.len() != new.len() {
        return Err(SimError::LengthMismatch { expected: previous.len(), got: new.len() });
    }
    Ok(CompletionVector(previous.0.iter().zip(&new.0).map(|(&p, &q)| p.max(q)).collect()))
}
