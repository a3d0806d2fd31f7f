//! Stochastic stand-ins for the image-based and force-based completion
//! recognizers.
//!
//! Both models are calibrated to published recognizer statistics rather than
//! trained: the image model to a target mean absolute percentage error, the
//! force model to the linear accuracy law `acc(Δt)`. Each is exposed twice:
//! as a pure function of the ground truth plus explicit noise draws, and as
//! a stateful [`Recognizer`] that owns its random stream so the closed loop
//! can swap in a different recognizer without touching the planner.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fusion::{clamp_unit, AccuracyModel, CompletionVector};
use crate::spline::node_angle;
use crate::surface::angular_distance;

/// What a recognizer gets to see each cycle.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    /// Ground-truth completion on the full path grid.
    pub truth: &'a CompletionVector,
    pub drill_angle: f64,
    /// Path node under the drill.
    pub current_index: usize,
    /// Seconds since the previous observation.
    pub dt: f64,
}

/// A completion recognizer. Image recognizers return their `m` samples
/// around the circle; force recognizers return `K` samples for the nodes
/// starting at `current_index`.
pub trait Recognizer: Send {
    fn recognize(&mut self, obs: &Observation<'_>) -> Vec<f64>;
}

// ---------------------------------------------------------------------------
// Image

/// Truth levels over which the image error is calibrated: uniform on
/// `[CALIBRATION_LOW, CALIBRATION_HIGH]`.
pub const CALIBRATION_LOW: f64 = 0.05;
pub const CALIBRATION_HIGH: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageSensorConfig {
    /// Samples around the circle.
    pub m: usize,
    /// Mean absolute percentage error, percent.
    pub target_mape: f64,
    /// Angular half-width of the region hidden by the drill, radians.
    pub occlusion_halfwidth: f64,
    /// Correlation time of the per-sample error, seconds. `None` keeps one
    /// error per sample for the whole trial.
    pub noise_correlation_time: Option<f64>,
}

impl ImageSensorConfig {
    pub const EGG_MAPE: f64 = 15.05;
    pub const MOUSE_MAPE: f64 = 24.32;

    pub fn egg() -> Self {
        Self {
            m: 32,
            target_mape: Self::EGG_MAPE,
            // Drill footprint (2 nodes) plus one node of shadow on a 320-node path.
            occlusion_halfwidth: 3.0 * std::f64::consts::TAU / 320.0,
            noise_correlation_time: None,
        }
    }

    pub fn mouse() -> Self {
        Self { target_mape: Self::MOUSE_MAPE, ..Self::egg() }
    }

    /// Noise-free and unoccluded.
    pub fn exact() -> Self {
        Self { target_mape: 0.0, occlusion_halfwidth: 0.0, ..Self::egg() }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.m == 0 || self.m > n || n % self.m != 0 {
            return Err(SimError::Config(format!("image samples m = {} must divide n = {n}", self.m)));
        }
        if !(self.target_mape >= 0.0 && self.target_mape.is_finite()) {
            return Err(SimError::Config(format!("target MAPE must be >= 0, got {}", self.target_mape)));
        }
        if !(self.occlusion_halfwidth >= 0.0) {
            return Err(SimError::Config("occlusion half-width must be >= 0".into()));
        }
        if self.noise_correlation_time.is_some_and(|tc| !(tc > 0.0)) {
            return Err(SimError::Config("noise correlation time must be positive".into()));
        }
        Ok(())
    }

    /// Log-odds noise scale that yields `target_mape`, see [`odds_sigma_for_mape`].
    pub fn noise_sigma(&self) -> f64 {
        odds_sigma_for_mape(self.target_mape)
    }
}

impl Default for ImageSensorConfig {
    fn default() -> Self {
        Self::egg()
    }
}

/// Noisy image reading of a completion level.
///
/// The error is a lognormal factor on the completion odds `c / (1 − c)`:
/// for small `c` this is a plain multiplicative error, while untouched
/// (`c = 0`) and penetrated (`c = 1`) regions are always recognized as such.
pub fn perturb_odds(truth: f64, sigma: f64, z: f64) -> f64 {
    if truth <= 0.0 {
        return 0.0;
    }
    if truth >= 1.0 {
        return 1.0;
    }
    if sigma * z == 0.0 {
        return truth;
    }
    let logit = (truth / (1.0 - truth)).ln() + sigma * z;
    1.0 / (1.0 + (-logit).exp())
}

/// Expected MAPE (percent) of [`perturb_odds`] with scale `sigma` over the
/// calibration truth range, by quadrature.
pub fn expected_mape(sigma: f64) -> f64 {
    const TRUTH_NODES: usize = 90;
    const Z_NODES: usize = 241;
    const Z_MAX: f64 = 7.0;
    let dz = 2.0 * Z_MAX / (Z_NODES - 1) as f64;
    let zs: Vec<(f64, f64)> = (0..Z_NODES)
        .map(|k| {
            let z = -Z_MAX + k as f64 * dz;
            (z, (-0.5 * z * z).exp())
        })
        .collect();
    let norm: f64 = zs.iter().map(|(_, w)| w).sum();
    let width = CALIBRATION_HIGH - CALIBRATION_LOW;
    let mut total = 0.0;
    for i in 0..TRUTH_NODES {
        let t = CALIBRATION_LOW + (i as f64 + 0.5) * width / TRUTH_NODES as f64;
        let e: f64 = zs.iter().map(|&(z, w)| w * (perturb_odds(t, sigma, z) - t).abs()).sum();
        total += e / norm / t;
    }
    100.0 * total / TRUTH_NODES as f64
}

/// Log-odds noise scale whose [`expected_mape`] equals `target` percent.
/// Results are memoized per target.
pub fn odds_sigma_for_mape(target: f64) -> f64 {
    if target <= 0.0 {
        return 0.0;
    }
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&s) = cache.lock().unwrap().get(&target.to_bits()) {
        return s;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while expected_mape(hi) < target && hi < 64.0 {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if expected_mape(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let sigma = 0.5 * (lo + hi);
    cache.lock().unwrap().insert(target.to_bits(), sigma);
    sigma
}

/// Point-sample `c_true` at the `m` nodes `k·n/m`.
pub fn downsample(c_true: &[f64], m: usize) -> Result<Vec<f64>> {
    let n = c_true.len();
    if m == 0 || m > n || n % m != 0 {
        return Err(SimError::InvalidInput(format!("cannot downsample {n} nodes to {m} samples")));
    }
    let step = n / m;
    Ok((0..m).map(|k| c_true[k * step]).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageReading {
    pub values: Vec<f64>,
    pub occluded: Vec<bool>,
}

/// One image reading.
///
/// `previous` holds the last reported values (used where the drill hides
/// the shell) and `noise` one standard-normal draw per sample.
pub fn image_recognize(
    c_true: &CompletionVector,
    drill_angle: f64,
    cfg: &ImageSensorConfig,
    previous: &[f64],
    noise: &[f64],
) -> Result<ImageReading> {
    let n = c_true.len();
    cfg.validate(n)?;
    let m = cfg.m;
    for len in [previous.len(), noise.len()] {
        if len != m {
            return Err(SimError::LengthMismatch { expected: m, got: len });
        }
    }
    let truth = downsample(c_true.values(), m)?;
    let sigma = cfg.noise_sigma();
    let step = n / m;
    let mut values = Vec::with_capacity(m);
    let mut occluded = Vec::with_capacity(m);
    for k in 0..m {
        let hidden = angular_distance(node_angle(k * step, n), drill_angle) <= cfg.occlusion_halfwidth;
        occluded.push(hidden);
        values.push(if hidden { previous[k] } else { perturb_odds(truth[k], sigma, noise[k]) });
    }
    Ok(ImageReading { values, occluded })
}

/// Image recognizer with its own noise stream.
///
/// Per-sample errors follow a stationary AR(1) process in standard-normal
/// units with the configured correlation time.
#[derive(Debug, Clone)]
pub struct ImageSensor {
    cfg: ImageSensorConfig,
    rng: ChaCha8Rng,
    noise: Vec<f64>,
    last: Vec<f64>,
    last_occluded: Vec<bool>,
}

impl ImageSensor {
    pub fn new(cfg: ImageSensorConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = (0..cfg.m).map(|_| rng.sample(StandardNormal)).collect();
        Self { cfg, rng, noise, last: vec![0.0; cfg.m], last_occluded: vec![false; cfg.m] }
    }

    pub fn config(&self) -> &ImageSensorConfig {
        &self.cfg
    }

    pub fn last_occluded(&self) -> &[bool] {
        &self.last_occluded
    }

    fn advance_noise(&mut self, dt: f64) {
        let Some(tc) = self.cfg.noise_correlation_time else { return };
        if dt <= 0.0 {
            return;
        }
        let rho = (-dt / tc).exp();
        let innov = (1.0 - rho * rho).sqrt();
        for z in &mut self.noise {
            let e: f64 = self.rng.sample(StandardNormal);
            *z = rho * *z + innov * e;
        }
    }
}

impl Recognizer for ImageSensor {
    fn recognize(&mut self, obs: &Observation<'_>) -> Vec<f64> {
        self.advance_noise(obs.dt);
        match image_recognize(obs.truth, obs.drill_angle, &self.cfg, &self.last, &self.noise) {
            Ok(r) => {
                self.last.clone_from(&r.values);
                self.last_occluded = r.occluded;
                r.values
            }
            // Configuration is validated before a trial starts.
            Err(_) => self.last.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Force

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForceNoiseSharing {
    /// Fresh draws on every call.
    Independent,
    /// One draw per node each time it enters the prediction window, reused
    /// while it stays there.
    PerVisit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForceSensorConfig {
    pub accuracy: AccuracyModel,
    /// Half-width of the uniform error of an inaccurate prediction.
    pub miss_band: f64,
    pub sharing: ForceNoiseSharing,
    /// Report the truth exactly.
    pub exact: bool,
}

impl ForceSensorConfig {
    pub fn egg() -> Self {
        Self { accuracy: AccuracyModel::EGG, miss_band: 0.3, sharing: ForceNoiseSharing::PerVisit, exact: false }
    }

    pub fn mouse() -> Self {
        Self { accuracy: AccuracyModel::MOUSE, ..Self::egg() }
    }

    pub fn validate(&self) -> Result<()> {
        self.accuracy.validate()?;
        if !(self.miss_band >= 0.0 && self.miss_band.is_finite()) {
            return Err(SimError::Config(format!("miss band must be >= 0, got {}", self.miss_band)));
        }
        Ok(())
    }

    /// Probability of drawing from the accurate band at lead `dt`, chosen so
    /// that the overall fraction of predictions within tolerance (including
    /// misses that land within it by chance) equals `acc(dt)`.
    pub fn hit_probability(&self, dt: f64) -> f64 {
        let target = self.accuracy.weight(dt);
        let tol = self.accuracy.tolerance;
        if self.miss_band <= tol {
            return target;
        }
        let chance = tol / self.miss_band;
        ((target - chance) / (1.0 - chance)).clamp(0.0, 1.0)
    }
}

impl Default for ForceSensorConfig {
    fn default() -> Self {
        Self::egg()
    }
}

/// Random inputs behind one force prediction sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceDraw {
    /// Uniform on `[0, 1)`; the sample is accurate when below the hit
    /// probability.
    pub u: f64,
    /// Uniform on `[-1, 1]`, scaled by the tolerance.
    pub hit: f64,
    /// Uniform on `[-1, 1]`, scaled by the miss band.
    pub miss: f64,
}

impl ForceDraw {
    pub fn sample(rng: &mut impl Rng) -> Self {
        Self { u: rng.gen(), hit: rng.gen_range(-1.0..=1.0), miss: rng.gen_range(-1.0..=1.0) }
    }
}

/// Force prediction for the next `K` nodes given their true completion and
/// explicit draws. Sample `j` has lead `j / f`.
pub fn force_predict(c_true_window: &[f64], cfg: &ForceSensorConfig, draws: &[ForceDraw]) -> Result<Vec<f64>> {
    if draws.len() != c_true_window.len() {
        return Err(SimError::LengthMismatch { expected: c_true_window.len(), got: draws.len() });
    }
    if cfg.exact {
        return Ok(c_true_window.to_vec());
    }
    let tol = cfg.accuracy.tolerance;
    Ok(c_true_window
        .iter()
        .zip(draws)
        .enumerate()
        .map(|(j, (&truth, d))| {
            let p_hit = cfg.hit_probability(cfg.accuracy.lead(j));
            let err = if d.u < p_hit { d.hit * tol } else { d.miss * cfg.miss_band };
            clamp_unit(truth + err)
        })
        .collect())
}

/// Force prediction with independent draws from `rng`.
pub fn force_recognize(c_true_window: &[f64], cfg: &ForceSensorConfig, rng: &mut impl Rng) -> Vec<f64> {
    let draws: Vec<ForceDraw> = c_true_window.iter().map(|_| ForceDraw::sample(rng)).collect();
    force_predict(c_true_window, cfg, &draws).expect("one draw per sample")
}

/// Force recognizer with its own noise stream.
#[derive(Debug, Clone)]
pub struct ForceSensor {
    cfg: ForceSensorConfig,
    rng: ChaCha8Rng,
    /// Draw held by each path node while it is inside the window.
    held: Vec<Option<ForceDraw>>,
    in_window: Vec<bool>,
}

impl ForceSensor {
    pub fn new(cfg: ForceSensorConfig, n: usize, seed: u64) -> Self {
        Self { cfg, rng: ChaCha8Rng::seed_from_u64(seed), held: vec![None; n], in_window: vec![false; n] }
    }

    pub fn config(&self) -> &ForceSensorConfig {
        &self.cfg
    }

    fn draws_for(&mut self, start: usize) -> Vec<ForceDraw> {
        let n = self.held.len();
        let k = self.cfg.accuracy.k.min(n);
        match self.cfg.sharing {
            ForceNoiseSharing::Independent => (0..k).map(|_| ForceDraw::sample(&mut self.rng)).collect(),
            ForceNoiseSharing::PerVisit => {
                let mut now = vec![false; n];
                for j in 0..k {
                    now[(start + j) % n] = true;
                }
                for i in 0..n {
                    if !now[i] {
                        self.held[i] = None;
                    }
                }
                self.in_window = now;
                (0..k)
                    .map(|j| {
                        let i = (start + j) % n;
                        *self.held[i].get_or_insert_with(|| ForceDraw::sample(&mut self.rng))
                    })
                    .collect()
            }
        }
    }
}

impl Recognizer for ForceSensor {
    fn recognize(&mut self, obs: &Observation<'_>) -> Vec<f64> {
        let n = obs.truth.len();
        let k = self.cfg.accuracy.k.min(n);
        let window: Vec<f64> = (0..k).map(|j| obs.truth[(obs.current_index + j) % n]).collect();
        let draws = self.draws_for(obs.current_index);
        force_predict(&window, &self.cfg, &draws).expect("one draw per sample")
    }
}
