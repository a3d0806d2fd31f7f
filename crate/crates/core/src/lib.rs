//! Deterministic closed-loop simulator of completion-level-driven drilling
//! along a circular path.
//!
//! The planner descends a ring of commanded heights with a velocity damped
//! by per-node completion estimates, optionally snaps untouched nodes onto a
//! least-squares plane through contacted ones, and interpolates the ring
//! with an overshoot-free periodic cubic spline. Completion estimates fuse a
//! coarse image-based recognizer with a short-horizon force-based one.

pub mod control;
pub mod error;
pub mod fusion;
pub mod harness;
pub mod plane;
pub mod sensors;
pub mod spline;
pub mod surface;

pub use control::{
    advance_plan, classify_outcome, completion_criterion, damped_velocities, run_trial, simulate, Arm,
    Classification, ControlConfig, RunOutcome, Termination, TraceRecord, TrialConfig, TrialSeeds,
};
pub use error::{Result, SimError};
pub use fusion::{accuracy_weights, fuse, update_progress, upsample_image, AccuracyModel, CompletionVector};
pub use harness::{ablation_suite, run_batch, BatchSummary, ExperimentConfig, Profile};
pub use plane::{fit_plane, plane_offsets, PlaneFit};
pub use sensors::{force_recognize, image_recognize, ForceSensorConfig, ImageSensorConfig, Observation, Recognizer};
pub use spline::{build_spline, eval_spline, fit_segment, node_derivatives, to_cylindrical, SplineCurve, SplineSegment, TrajectoryState};
pub use surface::{apply_drill, generate_surface, ground_truth_completion, ShellState, ShellSurface, SurfaceConfig};
