//! The closed drilling loop.
//!
//! Every cycle the recognizers look at the shell, their estimates are fused
//! into a completion vector, the commanded heights descend with a velocity
//! damped by that vector (optionally snapped towards a plane fitted through
//! the contacted nodes), and the drill tip follows the spline through the
//! commanded heights around the circle.

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fusion::{accuracy_weights, fuse, pad_force, update_progress, upsample_image, CompletionVector};
use crate::plane::{contacted_points, fit_plane, plane_offsets, PlaneFit};
use crate::sensors::{ForceSensor, ForceSensorConfig, ImageSensor, ImageSensorConfig, Observation, Recognizer};
use crate::spline::{build_spline, local_segment, SplineCurve, TrajectoryState};
use crate::surface::{apply_drill, generate_surface, ground_truth_completion, ShellState, ShellSurface, SurfaceConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    /// Nominal descent velocity, m/s (negative).
    pub v_z: f64,
    /// Path diameter, m.
    pub diameter: f64,
    /// Path nodes.
    pub n: usize,
    /// Trajectory update rate, Hz.
    pub update_rate: f64,
    /// Seconds per revolution of the drill.
    pub turn_period: f64,
    pub criterion_fraction: f64,
    pub criterion_level: f64,
    /// The patch comes out when this fraction of nodes is truly drilled to
    /// `removable_level`.
    pub removable_fraction: f64,
    pub removable_level: f64,
    /// Simulated seconds before giving up.
    pub timeout_s: f64,
    /// Revolutions the drill completes after the criterion is met.
    pub finish_turns: f64,
    /// Apply plane offsets to contacted nodes too, not just untouched ones.
    pub offsets_all_points: bool,
    /// Start height above the highest surface point, m.
    pub start_clearance: f64,
}

impl ControlConfig {
    pub fn period(&self) -> f64 {
        1.0 / self.update_rate
    }

    pub fn angular_speed(&self) -> f64 {
        TAU / self.turn_period
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::Config(msg));
        if !(self.v_z < 0.0 && self.v_z.is_finite()) {
            return bad(format!("v_z must be negative, got {}", self.v_z));
        }
        if !(self.diameter > 0.0 && self.diameter.is_finite()) {
            return bad(format!("diameter must be positive, got {}", self.diameter));
        }
        if self.n < 3 {
            return bad(format!("need at least 3 path nodes, got {}", self.n));
        }
        if !(self.update_rate > 0.0 && self.turn_period > 0.0 && self.timeout_s > 0.0) {
            return bad("update rate, turn period and timeout must be positive".into());
        }
        for (name, v) in [
            ("criterion fraction", self.criterion_fraction),
            ("criterion level", self.criterion_level),
            ("removable fraction", self.removable_fraction),
            ("removable level", self.removable_level),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} must be in (0, 1], got {v}"));
            }
        }
        if !(self.finish_turns >= 0.0 && self.start_clearance >= 0.0) {
            return bad("finish turns and start clearance must be non-negative".into());
        }
        Ok(())
    }
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            v_z: -6e-6,
            diameter: 8e-3,
            n: 320,
            update_rate: 30.0,
            turn_period: 16.0,
            criterion_fraction: 0.80,
            criterion_level: 0.85,
            removable_fraction: 0.95,
            removable_level: 0.85,
            timeout_s: 40.0 * 60.0,
            finish_turns: 3.0,
            offsets_all_points: false,
            start_clearance: 0.0,
        }
    }
}

/// Ablation arm: which of force fusion and plane fitting are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Baseline,
    Force,
    Plane,
    Full,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::Baseline, Arm::Force, Arm::Plane, Arm::Full];

    pub fn uses_force(self) -> bool {
        matches!(self, Arm::Force | Arm::Full)
    }

    pub fn uses_plane(self) -> bool {
        matches!(self, Arm::Plane | Arm::Full)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Baseline => "baseline",
            Arm::Force => "force",
            Arm::Plane => "plane",
            Arm::Full => "full",
        }
    }
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arm {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        Arm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| SimError::Config(format!("unknown arm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Success,
    UnderDrill,
    OverDrillModel,
    OverDrillIntervened,
}

impl Classification {
    pub const ALL: [Classification; 4] = [
        Classification::Success,
        Classification::UnderDrill,
        Classification::OverDrillModel,
        Classification::OverDrillIntervened,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Success => "success",
            Classification::UnderDrill => "under_drill",
            Classification::OverDrillModel => "over_drill_model",
            Classification::OverDrillIntervened => "over_drill_intervened",
        }
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Criterion met and the finishing revolution completed.
    Criterion,
    Rupture,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub cycle: u64,
    pub sim_time_s: f64,
    pub drill_angle_rad: f64,
    pub tip_z: f64,
    pub min_c: f64,
    pub mean_c: f64,
    pub criterion_met: bool,
    pub ruptured: bool,
    pub plane: Option<PlaneFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub classification: Classification,
    pub termination: Termination,
    /// Simulated drilling time, minutes.
    pub drilling_time_min: f64,
    /// When the criterion was first met, seconds.
    pub criterion_time_s: Option<f64>,
    pub criterion_met: bool,
    pub ruptured: bool,
    pub removable: bool,
    pub cycles: u64,
    /// Final fused estimate.
    pub final_completion: Vec<f64>,
    /// Final drilled depth over local thickness (not clamped).
    pub final_depth_ratio: Vec<f64>,
    pub trace: Vec<TraceRecord>,
}

impl RunOutcome {
    /// Time to criterion, or the whole run when it was never met.
    pub fn time_to_criterion_s(&self) -> f64 {
        self.criterion_time_s.unwrap_or(self.drilling_time_min * 60.0)
    }

    /// Write the per-cycle trace as CSV.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cycle", "sim_time_s", "drill_angle_rad", "min_c", "mean_c", "criterion_met", "ruptured"])?;
        for r in &self.trace {
            w.write_record(&[
                r.cycle.to_string(),
                r.sim_time_s.to_string(),
                r.drill_angle_rad.to_string(),
                r.min_c.to_string(),
                r.mean_c.to_string(),
                r.criterion_met.to_string(),
                r.ruptured.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `v_i = (1 − c_i)·v_z`.
pub fn damped_velocities(c: &CompletionVector, v_z: f64) -> Vec<f64> {
    c.values().iter().map(|&ci| (1.0 - ci) * v_z).collect()
}

/// One planner step: `p_i ← p_i + v_i·T + o_i`.
///
/// Offsets only ever lower a node, and unless `offsets_all_points` is set
/// they apply only to nodes with zero completion.
pub fn advance_plan(
    trajectory: &mut TrajectoryState,
    c: &CompletionVector,
    offsets: &[f64],
    cfg: &ControlConfig,
) -> Result<()> {
    let n = trajectory.len();
    for len in [c.len(), offsets.len()] {
        if len != n {
            return Err(SimError::LengthMismatch { expected: n, got: len });
        }
    }
    let dt = cfg.period();
    let v = damped_velocities(c, cfg.v_z);
    for i in 0..n {
        let o = if cfg.offsets_all_points || c[i] == 0.0 { offsets[i].min(0.0) } else { 0.0 };
        let z = trajectory.points()[i].z + v[i] * dt + o;
        trajectory.set_z(i, z);
    }
    Ok(())
}

/// [`advance_plan`] followed by a full spline rebuild.
pub fn advance_and_rebuild(
    trajectory: &mut TrajectoryState,
    c: &CompletionVector,
    offsets: &[f64],
    cfg: &ControlConfig,
) -> Result<SplineCurve> {
    advance_plan(trajectory, c, offsets, cfg)?;
    build_spline(trajectory)
}

/// At least `fraction·n` nodes at `level` or above.
pub fn completion_criterion(c: &CompletionVector, fraction: f64, level: f64) -> bool {
    let needed = (fraction * c.len() as f64 - 1e-9).ceil().max(0.0) as usize;
    c.values().iter().filter(|&&v| v >= level).count() >= needed
}

pub fn classify_outcome(criterion_met: bool, ruptured: bool, removable: bool) -> Classification {
    match (criterion_met, ruptured) {
        (true, true) => Classification::OverDrillModel,
        (false, true) => Classification::OverDrillIntervened,
        (true, false) if removable => Classification::Success,
        _ => Classification::UnderDrill,
    }
}

/// Everything that defines one trial apart from its seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub arm: Arm,
    pub control: ControlConfig,
    pub surface: SurfaceConfig,
    pub image: ImageSensorConfig,
    pub force: ForceSensorConfig,
    pub record_trace: bool,
}

impl TrialConfig {
    pub fn egg(arm: Arm) -> Self {
        Self {
            arm,
            control: ControlConfig::default(),
            surface: SurfaceConfig::egg(),
            image: ImageSensorConfig::egg(),
            force: ForceSensorConfig::egg(),
            record_trace: false,
        }
    }

    pub fn mouse(arm: Arm) -> Self {
        Self {
            surface: SurfaceConfig::mouse(),
            image: ImageSensorConfig::mouse(),
            force: ForceSensorConfig::mouse(),
            ..Self::egg(arm)
        }
    }

    /// Noise-free, unoccluded recognizers.
    pub fn with_perfect_sensors(mut self) -> Self {
        self.image = ImageSensorConfig { m: self.image.m, ..ImageSensorConfig::exact() };
        self.force.exact = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.control.validate()?;
        self.surface.validate()?;
        self.image.validate(self.control.n)?;
        self.force.validate()?;
        if self.force.accuracy.k > self.control.n {
            return Err(SimError::Config("force window longer than the path".into()));
        }
        Ok(())
    }
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self::egg(Arm::Full)
    }
}

/// Independent random streams of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSeeds {
    pub surface: u64,
    pub image: u64,
    pub force: u64,
}

/// Run one trial with the stock recognizers.
pub fn run_trial(cfg: &TrialConfig, seeds: TrialSeeds) -> Result<RunOutcome> {
    cfg.validate()?;
    let surface = generate_surface(&cfg.surface, seeds.surface)?;
    let mut image = ImageSensor::new(cfg.image, seeds.image);
    let mut force = ForceSensor::new(cfg.force, cfg.control.n, seeds.force);
    simulate(cfg, &surface, &mut image, &mut force)
}

fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// Run the loop on a given shell with the given recognizers. `force` is
/// consulted only when the arm fuses force estimates.
pub fn simulate(
    cfg: &TrialConfig,
    surface: &ShellSurface,
    image: &mut dyn Recognizer,
    force: &mut dyn Recognizer,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let ctl = &cfg.control;
    let n = ctl.n;
    let dt = ctl.period();
    let omega = ctl.angular_speed();

    let mut traj = TrajectoryState::circle(n, ctl.diameter, 0.0)?;
    let grid = surface.sample(&traj);
    let (top, z_top) = grid
        .height
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, h)| if h > acc.1 { (i, h) } else { acc });
    let z0 = z_top + ctl.start_clearance;
    for i in 0..n {
        traj.set_z(i, z0);
    }
    let start_angle = grid.phi[top];

    let mut shell = ShellState::untouched(n);
    let mut image_progress = CompletionVector::zeros(n);
    let mut c = CompletionVector::zeros(n);
    let zero_w = vec![0.0; n];
    let zero_offsets = vec![0.0; n];
    let mut trace = Vec::new();
    let mut criterion_time: Option<f64> = None;
    let mut finish_at = f64::INFINITY;
    let mut cycle: u64 = 0;
    let mut t = 0.0;

    let termination = loop {
        if t >= ctl.timeout_s - 1e-9 {
            break Termination::Timeout;
        }
        let angle = wrap_angle(start_angle + omega * t);
        let current = traj.nearest_index(angle);
        let truth = ground_truth_completion(&shell, &grid);
        let obs = Observation { truth: &truth, drill_angle: angle, current_index: current, dt };

        let img = image.recognize(&obs);
        image_progress = update_progress(&image_progress, &CompletionVector::clamped(upsample_image(&img, n)?))?;
        c = if cfg.arm.uses_force() {
            let cf = force.recognize(&obs);
            let w2 = accuracy_weights(&cfg.force.accuracy, current, n);
            fuse(image_progress.values(), &pad_force(&cf, current, n)?, &w2)?
        } else {
            fuse(image_progress.values(), &zero_w, &zero_w)?
        };

        let met = completion_criterion(&c, ctl.criterion_fraction, ctl.criterion_level);
        if met && criterion_time.is_none() {
            criterion_time = Some(t);
            finish_at = t + ctl.finish_turns * ctl.turn_period;
        }

        let fit = if cfg.arm.uses_plane() {
            Some(fit_plane(&contacted_points(&traj, c.values())))
        } else {
            None
        };
        match &fit {
            Some(f) if f.valid => {
                let offsets = plane_offsets(f, &traj);
                advance_plan(&mut traj, &c, &offsets, ctl)?
            }
            _ => advance_plan(&mut traj, &c, &zero_offsets, ctl)?,
        }

        t = (cycle + 1) as f64 * dt;
        let next_angle = wrap_angle(start_angle + omega * t);
        let (segment, reduced) = local_segment(&traj, next_angle)?;
        let tip_z = segment.eval(reduced);
        apply_drill(&mut shell, &grid, tip_z, next_angle, dt)?;
        cycle += 1;

        if cfg.record_trace {
            trace.push(TraceRecord {
                cycle,
                sim_time_s: t,
                drill_angle_rad: next_angle,
                tip_z,
                min_c: c.min(),
                mean_c: c.mean(),
                criterion_met: criterion_time.is_some(),
                ruptured: shell.ruptured,
                plane: fit,
            });
        }

        if shell.ruptured {
            break Termination::Rupture;
        }
        if t >= finish_at - 1e-9 {
            break Termination::Criterion;
        }
    };

    let truth = ground_truth_completion(&shell, &grid);
    let needed = (ctl.removable_fraction * n as f64 - 1e-9).ceil() as usize;
    let removable = truth.values().iter().filter(|&&v| v >= ctl.removable_level).count() >= needed;
    let criterion_met = criterion_time.is_some();
    Ok(RunOutcome {
        classification: classify_outcome(criterion_met, shell.ruptured, removable),
        termination,
        drilling_time_min: t / 60.0,
        criterion_time_s: criterion_time,
        criterion_met,
        ruptured: shell.ruptured,
        removable,
        cycles: cycle,
        final_completion: c.into_inner(),
        final_depth_ratio: shell.drilled_depth.iter().zip(&grid.thickness).map(|(d, th)| d / th).collect(),
        trace,
    })
}
