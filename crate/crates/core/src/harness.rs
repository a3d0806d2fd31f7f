//! Batch runs, ablation presets and their reports.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::control::{run_trial, Arm, Classification, RunOutcome, TrialConfig, TrialSeeds};
use crate::error::{Result, SimError};
use crate::spline::TrajectoryState;
use crate::surface::generate_surface;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Egg,
    Mouse,
}

impl Profile {
    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Egg => "egg",
            Profile::Mouse => "mouse",
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "egg" => Ok(Profile::Egg),
            "mouse" => Ok(Profile::Mouse),
            _ => Err(SimError::Config(format!("unknown profile {s:?}"))),
        }
    }
}

/// A batch experiment. Every field has a default, so `{}` is a valid
/// document. The `control`, `surface`, `image` and `force` objects override
/// individual fields of the profile's presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub arm: Arm,
    pub trials: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Replace both recognizers with exact ones.
    pub perfect_sensors: bool,
    /// Write one trace CSV per trial.
    pub write_traces: bool,
    /// Write the sampled shell of each trial.
    pub dump_surface: bool,
    pub control: Option<Value>,
    pub surface: Option<Value>,
    pub image: Option<Value>,
    pub force: Option<Value>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            profile: Profile::Egg,
            arm: Arm::Full,
            trials: 20,
            seed: 0,
            output_dir: PathBuf::from("drillsim-out"),
            perfect_sensors: false,
            write_traces: false,
            dump_surface: false,
            control: None,
            surface: None,
            image: None,
            force: None,
        }
    }
}

fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, p) => *slot = p.clone(),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(SimError::Config("trials must be at least 1".into()));
        }
        self.trial_config(self.arm)?.validate()
    }

    /// Per-trial settings for `arm`: profile presets plus overrides.
    pub fn trial_config(&self, arm: Arm) -> Result<TrialConfig> {
        let preset = match self.profile {
            Profile::Egg => TrialConfig::egg(arm),
            Profile::Mouse => TrialConfig::mouse(arm),
        };
        let mut value = serde_json::to_value(preset)?;
        for (key, patch) in [("control", &self.control), ("surface", &self.surface), ("image", &self.image), ("force", &self.force)] {
            if let Some(p) = patch {
                merge(&mut value[key], p);
            }
        }
        value["record_trace"] = Value::Bool(self.write_traces);
        let mut cfg: TrialConfig = serde_json::from_value(value).map_err(|e| SimError::Config(e.to_string()))?;
        if self.perfect_sensors {
            cfg = cfg.with_perfect_sensors();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(trial as u64)
    }
}

/// Independent surface, image and force streams derived from one seed.
pub fn split_seed(seed: u64) -> TrialSeeds {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TrialSeeds { surface: rng.next_u64(), image: rng.next_u64(), force: rng.next_u64() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub arm: Arm,
    pub classification: Classification,
    pub time_min: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: Arm,
    pub trials: usize,
    pub success_pct: f64,
    pub under_drill_pct: f64,
    pub over_drill_model_pct: f64,
    pub over_drill_intervened_pct: f64,
    /// Mean drilling time of successful trials; `None` without successes.
    pub mean_time_min: Option<f64>,
}

impl ArmSummary {
    pub fn from_records(arm: Arm, records: &[TrialRecord]) -> Self {
        let rows: Vec<&TrialRecord> = records.iter().filter(|r| r.arm == arm).collect();
        let total = rows.len();
        let pct = |c: Classification| {
            if total == 0 {
                0.0
            } else {
                100.0 * rows.iter().filter(|r| r.classification == c).count() as f64 / total as f64
            }
        };
        let times: Vec<f64> = rows
            .iter()
            .filter(|r| r.classification == Classification::Success)
            .map(|r| r.time_min)
            .collect();
        Self {
            arm,
            trials: total,
            success_pct: pct(Classification::Success),
            under_drill_pct: pct(Classification::UnderDrill),
            over_drill_model_pct: pct(Classification::OverDrillModel),
            over_drill_intervened_pct: pct(Classification::OverDrillIntervened),
            mean_time_min: (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64),
        }
    }

    pub fn rate(&self, c: Classification) -> f64 {
        match c {
            Classification::Success => self.success_pct,
            Classification::UnderDrill => self.under_drill_pct,
            Classification::OverDrillModel => self.over_drill_model_pct,
            Classification::OverDrillIntervened => self.over_drill_intervened_pct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub profile: Profile,
    pub base_seed: u64,
    pub trials_per_arm: usize,
    pub arms: Vec<ArmSummary>,
}

impl BatchSummary {
    pub fn arm(&self, arm: Arm) -> Option<&ArmSummary> {
        self.arms.iter().find(|a| a.arm == arm)
    }
}

/// Records, outcomes and summary of one or more arms.
#[derive(Debug, Clone)]
pub struct BatchRun {
    pub summary: BatchSummary,
    pub records: Vec<TrialRecord>,
    pub outcomes: Vec<RunOutcome>,
}

fn run_arms(cfg: &ExperimentConfig, arms: &[Arm]) -> Result<BatchRun> {
    if cfg.trials == 0 {
        return Err(SimError::Config("trials must be at least 1".into()));
    }
    let configs = arms.iter().map(|&a| cfg.trial_config(a)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..arms.len()).flat_map(|a| (0..cfg.trials).map(move |i| (a, i))).collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(a, i)| run_trial(&configs[a], split_seed(cfg.trial_seed(i))))
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<TrialRecord> = jobs
        .iter()
        .zip(&outcomes)
        .map(|(&(a, i), o)| TrialRecord {
            trial: i,
            arm: arms[a],
            classification: o.classification,
            time_min: o.drilling_time_min,
            seed: cfg.trial_seed(i),
        })
        .collect();
    let summary = BatchSummary {
        profile: cfg.profile,
        base_seed: cfg.seed,
        trials_per_arm: cfg.trials,
        arms: arms.iter().map(|&a| ArmSummary::from_records(a, &records)).collect(),
    };
    Ok(BatchRun { summary, records, outcomes })
}

/// Run `cfg.trials` trials of `cfg.arm`; trial `i` uses seed `cfg.seed + i`.
pub fn run_batch(cfg: &ExperimentConfig) -> Result<BatchRun> {
    run_arms(cfg, &[cfg.arm])
}

/// All four arms on the same per-trial seeds.
pub fn ablation_suite(cfg: &ExperimentConfig) -> Result<BatchRun> {
    run_arms(cfg, &Arm::ALL)
}

/// Write `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| SimError::InvalidInput(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn trials_csv(records: &[TrialRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["trial", "arm", "classification", "time_min", "seed"])?;
    for r in records {
        w.write_record(&[
            r.trial.to_string(),
            r.arm.to_string(),
            r.classification.to_string(),
            format!("{:.6}", r.time_min),
            r.seed.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| SimError::Io(e.into_error()))
}

/// Parse a `trials.csv` document back into records.
pub fn read_trials_csv(bytes: &[u8]) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_reader(bytes);
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let bad = |what: &str| SimError::InvalidInput(format!("bad {what} in trials CSV"));
        let classification = Classification::ALL
            .into_iter()
            .find(|c| c.as_str() == field(2))
            .ok_or_else(|| bad("classification"))?;
        out.push(TrialRecord {
            trial: field(0).parse().map_err(|_| bad("trial"))?,
            arm: field(1).parse()?,
            classification,
            time_min: field(3).parse().map_err(|_| bad("time"))?,
            seed: field(4).parse().map_err(|_| bad("seed"))?,
        });
    }
    Ok(out)
}

/// Write `trials.csv`, `summary.json` and the optional traces and shells
/// into `cfg.output_dir`.
pub fn write_outputs(cfg: &ExperimentConfig, run: &BatchRun) -> Result<()> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join("trials.csv"), &trials_csv(&run.records)?)?;
    let mut json = serde_json::to_vec_pretty(&run.summary)?;
    json.push(b'\n');
    write_atomic(&dir.join("summary.json"), &json)?;

    if cfg.write_traces {
        let traces = dir.join("traces");
        fs::create_dir_all(&traces)?;
        for (r, o) in run.records.iter().zip(&run.outcomes) {
            let mut buf = Vec::new();
            o.write_trace_csv(&mut buf)?;
            write_atomic(&traces.join(format!("{}_{:04}.csv", r.arm, r.trial)), &buf)?;
        }
    }
    if cfg.dump_surface {
        let shells = dir.join("surfaces");
        fs::create_dir_all(&shells)?;
        let base = cfg.trial_config(cfg.arm)?;
        let path = TrajectoryState::circle(base.control.n, base.control.diameter, 0.0)?;
        for i in 0..cfg.trials {
            let surface = generate_surface(&base.surface, split_seed(cfg.trial_seed(i)).surface)?;
            let mut buf = Vec::new();
            surface.sample(&path).write_csv(&mut buf)?;
            write_atomic(&shells.join(format!("surface_{i:04}.csv")), &buf)?;
        }
    }
    Ok(())
}
