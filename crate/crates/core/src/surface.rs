//! Synthetic drillable shell: a tilted, gently curved top surface with a
//! spatially varying thickness and a membrane underneath.
//!
//! Heights and thicknesses are closed-form sums of plane waves whose
//! parameters are drawn once from the seed, so any `(x, y)` can be queried
//! and the same seed always reproduces the same shell.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fusion::CompletionVector;
use crate::spline::TrajectoryState;

pub const MAX_TILT_DEG: f64 = 15.0;

/// Shell generation knobs. Tilt is drawn uniformly from
/// `[tilt_deg_min, tilt_deg_max]` with a uniform random direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    pub tilt_deg_min: f64,
    pub tilt_deg_max: f64,
    /// Peak height deviation from the tilted plane, meters.
    pub perturbation_amplitude: f64,
    /// Mean shell thickness, meters.
    pub nominal_thickness: f64,
    /// Peak relative thickness deviation, in `[0, 1)`.
    pub thickness_variation: f64,
    /// Shortest wavelength of the thickness variation, meters.
    pub thickness_wavelength_min: f64,
    /// Depth beyond the shell at which the membrane tears, meters.
    pub rupture_margin: f64,
    /// Drill footprint half-width in path nodes.
    pub footprint_nodes: usize,
}

impl SurfaceConfig {
    pub fn egg() -> Self {
        Self {
            tilt_deg_min: 3.0,
            tilt_deg_max: 12.0,
            perturbation_amplitude: 30e-6,
            nominal_thickness: 350e-6,
            thickness_variation: 0.15,
            thickness_wavelength_min: 2.5e-3,
            rupture_margin: 20e-6,
            footprint_nodes: 2,
        }
    }

    pub fn mouse() -> Self {
        Self {
            tilt_deg_min: 3.0,
            tilt_deg_max: 12.0,
            perturbation_amplitude: 40e-6,
            nominal_thickness: 300e-6,
            thickness_variation: 0.30,
            ..Self::egg()
        }
    }

    /// Flat, level shell of uniform thickness.
    pub fn flat(thickness: f64) -> Self {
        Self {
            tilt_deg_min: 0.0,
            tilt_deg_max: 0.0,
            perturbation_amplitude: 0.0,
            nominal_thickness: thickness,
            thickness_variation: 0.0,
            ..Self::egg()
        }
    }

    pub fn with_tilt(mut self, tilt_deg: f64) -> Self {
        self.tilt_deg_min = tilt_deg;
        self.tilt_deg_max = tilt_deg;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let tilt_ok = |t: f64| (0.0..=MAX_TILT_DEG).contains(&t);
        if !tilt_ok(self.tilt_deg_min) || !tilt_ok(self.tilt_deg_max) || self.tilt_deg_min > self.tilt_deg_max {
            return Err(SimError::Config(format!(
                "tilt range [{}, {}] must lie within [0, {MAX_TILT_DEG}] degrees",
                self.tilt_deg_min, self.tilt_deg_max
            )));
        }
        if !(self.nominal_thickness > 0.0 && self.nominal_thickness.is_finite()) {
            return Err(SimError::Config(format!(
                "nominal thickness must be positive, got {}",
                self.nominal_thickness
            )));
        }
        if !(0.0..1.0).contains(&self.thickness_variation) {
            return Err(SimError::Config(format!(
                "thickness variation must be in [0, 1), got {}",
                self.thickness_variation
            )));
        }
        if !(self.perturbation_amplitude >= 0.0 && self.perturbation_amplitude.is_finite()) {
            return Err(SimError::Config("perturbation amplitude must be non-negative".into()));
        }
        if !(self.thickness_wavelength_min > 0.0) {
            return Err(SimError::Config("thickness wavelength must be positive".into()));
        }
        if !(self.rupture_margin >= 0.0) {
            return Err(SimError::Config("rupture margin must be non-negative".into()));
        }
        Ok(())
    }
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self::egg()
    }
}

/// One plane wave `amplitude · cos(kx·x + ky·y + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Wave {
    amplitude: f64,
    kx: f64,
    ky: f64,
    phase: f64,
}

impl Wave {
    fn at(&self, x: f64, y: f64) -> f64 {
        self.amplitude * (self.kx * x + self.ky * y + self.phase).cos()
    }

    fn random(rng: &mut impl Rng, amplitude: f64, wavelength: f64) -> Self {
        let dir = rng.gen_range(0.0..TAU);
        let k = TAU / wavelength;
        Self { amplitude, kx: k * dir.cos(), ky: k * dir.sin(), phase: rng.gen_range(0.0..TAU) }
    }
}

/// Random set of waves whose amplitudes sum to `total`.
fn wave_set(rng: &mut impl Rng, count: usize, total: f64, wavelengths: (f64, f64)) -> Vec<Wave> {
    let raw: Vec<f64> = (0..count).map(|_| rng.gen_range(0.5..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter()
        .map(|r| {
            let wl = rng.gen_range(wavelengths.0..=wavelengths.1);
            Wave::random(rng, total * r / sum, wl)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellSurface {
    pub config: SurfaceConfig,
    pub seed: u64,
    pub tilt_deg: f64,
    /// Direction of steepest ascent in the x–y plane, radians.
    pub tilt_direction: f64,
    height_waves: Vec<Wave>,
    thickness_waves: Vec<Wave>,
}

impl ShellSurface {
    /// Top-surface height at `(x, y)`; the shell is centered at height 0.
    pub fn height(&self, x: f64, y: f64) -> f64 {
        let slope = self.tilt_deg.to_radians().tan();
        let plane = slope * (x * self.tilt_direction.cos() + y * self.tilt_direction.sin());
        plane + self.height_waves.iter().map(|w| w.at(x, y)).sum::<f64>()
    }

    /// Shell thickness at `(x, y)`; always positive.
    pub fn thickness(&self, x: f64, y: f64) -> f64 {
        let dev: f64 = self.thickness_waves.iter().map(|w| w.at(x, y)).sum();
        self.config.nominal_thickness * (1.0 + self.config.thickness_variation * dev)
    }

    /// Heights and thicknesses at every path node.
    pub fn sample(&self, trajectory: &TrajectoryState) -> SurfaceGrid {
        let pts = trajectory.points();
        SurfaceGrid {
            phi: pts.iter().map(|p| p.phi).collect(),
            x: pts.iter().map(|p| p.x).collect(),
            y: pts.iter().map(|p| p.y).collect(),
            height: pts.iter().map(|p| self.height(p.x, p.y)).collect(),
            thickness: pts.iter().map(|p| self.thickness(p.x, p.y)).collect(),
            footprint_halfwidth: self.config.footprint_nodes as f64 * trajectory.spacing(),
            rupture_margin: self.config.rupture_margin,
        }
    }
}

/// Deterministic shell for `(config, seed)`.
pub fn generate_surface(config: &SurfaceConfig, seed: u64) -> Result<ShellSurface> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tilt_deg = if config.tilt_deg_max > config.tilt_deg_min {
        rng.gen_range(config.tilt_deg_min..=config.tilt_deg_max)
    } else {
        config.tilt_deg_min
    };
    let tilt_direction = rng.gen_range(-PI..PI);
    // Low-frequency curvature of the top surface: wavelengths well above the
    // path diameter.
    let height_waves = wave_set(&mut rng, 3, config.perturbation_amplitude, (12e-3, 30e-3));
    // Thickness varies on shorter scales, from the configured minimum up to
    // a few path diameters.
    let thickness_waves = wave_set(&mut rng, 4, 1.0, (config.thickness_wavelength_min, 16e-3));
    Ok(ShellSurface { config: *config, seed, tilt_deg, tilt_direction, height_waves, thickness_waves })
}

/// A shell sampled at the path nodes, plus drill geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    pub phi: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub height: Vec<f64>,
    pub thickness: Vec<f64>,
    /// Angular half-width of the drill footprint.
    pub footprint_halfwidth: f64,
    pub rupture_margin: f64,
}

impl SurfaceGrid {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Write `index,phi,x,y,height,thickness` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "phi_rad", "x_m", "y_m", "height_m", "thickness_m"])?;
        for i in 0..self.len() {
            w.write_record(&[
                i.to_string(),
                self.phi[i].to_string(),
                self.x[i].to_string(),
                self.y[i].to_string(),
                self.height[i].to_string(),
                self.thickness[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Angular distance on the circle.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Material removed so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellState {
    /// Depth below the local top surface reached at each node.
    pub drilled_depth: Vec<f64>,
    pub ruptured: bool,
    /// First node at which the membrane tore.
    pub rupture_index: Option<usize>,
}

impl ShellState {
    pub fn untouched(n: usize) -> Self {
        Self { drilled_depth: vec![0.0; n], ruptured: false, rupture_index: None }
    }
}

/// Remove material under the drill: every node within the footprint around
/// `drill_angle` is cut down to `tip_z`. Removal is instantaneous, so `dt`
/// only has to be positive.
pub fn apply_drill(
    state: &mut ShellState,
    grid: &SurfaceGrid,
    tip_z: f64,
    drill_angle: f64,
    dt: f64,
) -> Result<()> {
    if !(dt > 0.0) {
        return Err(SimError::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    if state.drilled_depth.len() != grid.len() {
        return Err(SimError::LengthMismatch { expected: grid.len(), got: state.drilled_depth.len() });
    }
    for i in 0..grid.len() {
        if angular_distance(grid.phi[i], drill_angle) > grid.footprint_halfwidth + 1e-12 {
            continue;
        }
        let cut = (grid.height[i] - tip_z).max(0.0);
        if cut > state.drilled_depth[i] {
            state.drilled_depth[i] = cut;
        }
        if !state.ruptured && state.drilled_depth[i] > grid.thickness[i] + grid.rupture_margin {
            state.ruptured = true;
            state.rupture_index = Some(i);
        }
    }
    Ok(())
}

/// True completion `clamp(depth / thickness, 0, 1)` at every node.
pub fn ground_truth_completion(state: &ShellState, grid: &SurfaceGrid) -> CompletionVector {
    CompletionVector::clamped(
        state.drilled_depth.iter().zip(&grid.thickness).map(|(d, t)| d / t).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path() -> TrajectoryState {
        TrajectoryState::circle(320, 8e-3, 0.0).unwrap()
    }

    #[test]
    fn flat_surface() {
        let s = generate_surface(&SurfaceConfig::flat(300e-6), 7).unwrap();
        let g = s.sample(&path());
        assert!(g.height.iter().all(|&h| h == 0.0));
        assert!(g.thickness.iter().all(|&t| t == 300e-6));
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SurfaceConfig::mouse();
        let a = generate_surface(&cfg, 42).unwrap().sample(&path());
        let b = generate_surface(&cfg, 42).unwrap().sample(&path());
        assert_eq!(a, b);
        let c = generate_surface(&cfg, 43).unwrap().sample(&path());
        assert_ne!(a.height, c.height);
    }

    #[test]
    fn tilt_height_span() {
        let cfg = SurfaceConfig { perturbation_amplitude: 0.0, ..SurfaceConfig::flat(350e-6) }.with_tilt(5.0);
        let s = generate_surface(&cfg, 3).unwrap();
        // Span along the steepest direction across the full diameter.
        let (c, d) = (s.tilt_direction.cos(), s.tilt_direction.sin());
        let span = s.height(4e-3 * c, 4e-3 * d) - s.height(-4e-3 * c, -4e-3 * d);
        assert!((span - 8e-3 * 5f64.to_radians().tan()).abs() < 1e-15);
        assert!((span - 7.0e-4).abs() < 1e-5);
    }

    #[test]
    fn thickness_stays_positive() {
        let cfg = SurfaceConfig { thickness_variation: 0.9, ..SurfaceConfig::mouse() };
        for seed in 0..20 {
            let g = generate_surface(&cfg, seed).unwrap().sample(&path());
            assert!(g.thickness.iter().all(|&t| t > 0.0));
        }
    }

    #[test]
    fn rejects_bad_config() {
        assert!(generate_surface(&SurfaceConfig::egg().with_tilt(20.0), 0).is_err());
        assert!(generate_surface(&SurfaceConfig::flat(0.0), 0).is_err());
        let inverted = SurfaceConfig { tilt_deg_min: 5.0, tilt_deg_max: 2.0, ..SurfaceConfig::egg() };
        assert!(generate_surface(&inverted, 0).is_err());
    }

    #[test]
    fn drill_above_surface_changes_nothing() {
        let g = generate_surface(&SurfaceConfig::flat(300e-6), 0).unwrap().sample(&path());
        let mut st = ShellState::untouched(g.len());
        apply_drill(&mut st, &g, 1e-6, 0.0, 1.0 / 30.0).unwrap();
        assert!(st.drilled_depth.iter().all(|&d| d == 0.0));
        assert!(!st.ruptured);
    }

    #[test]
    fn half_depth_cut() {
        let g = generate_surface(&SurfaceConfig::flat(300e-6), 0).unwrap().sample(&path());
        let mut st = ShellState::untouched(g.len());
        let angle = g.phi[100];
        apply_drill(&mut st, &g, -150e-6, angle, 1.0 / 30.0).unwrap();
        assert!((st.drilled_depth[100] - 150e-6).abs() < 1e-18);
        // Footprint covers ±2 nodes exactly.
        let touched: Vec<usize> = (0..g.len()).filter(|&i| st.drilled_depth[i] > 0.0).collect();
        assert_eq!(touched, vec![98, 99, 100, 101, 102]);
        let c = ground_truth_completion(&st, &g);
        assert!((c[100] - 0.5).abs() < 1e-12);
        assert_eq!(c[0], 0.0);
        // A shallower pass never undoes a deeper cut.
        apply_drill(&mut st, &g, -50e-6, angle, 1.0 / 30.0).unwrap();
        assert!((st.drilled_depth[100] - 150e-6).abs() < 1e-18);
    }

    #[test]
    fn rupture_beyond_margin() {
        let g = generate_surface(&SurfaceConfig::flat(300e-6), 0).unwrap().sample(&path());
        let mut st = ShellState::untouched(g.len());
        apply_drill(&mut st, &g, -315e-6, g.phi[5], 0.01).unwrap();
        assert!(!st.ruptured);
        assert_eq!(ground_truth_completion(&st, &g)[5], 1.0);
        apply_drill(&mut st, &g, -321e-6, g.phi[5], 0.01).unwrap();
        assert!(st.ruptured);
        assert_eq!(st.rupture_index, Some(3));
    }

    #[test]
    fn drill_rejects_bad_step() {
        let g = generate_surface(&SurfaceConfig::flat(300e-6), 0).unwrap().sample(&path());
        let mut st = ShellState::untouched(g.len());
        assert!(apply_drill(&mut st, &g, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn csv_dump() {
        let g = generate_surface(&SurfaceConfig::egg(), 1).unwrap().sample(&path());
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 321);
        assert!(text.starts_with("index,phi_rad,x_m,y_m,height_m,thickness_m"));
    }
}
