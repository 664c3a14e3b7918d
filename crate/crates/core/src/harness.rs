//! Experiment protocol: rollouts × trials of every policy on every object,
//! with deterministic per-trial seeds, sliding-window smoothing, aggregation
//! and CSV output.
//!
//! Output is a pure function of the config. Trials may run on any number of
//! threads; each owns its policy, random stream and trace, and results are
//! gathered in a fixed order before any aggregation.

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{diameter, diameter_bound, optimal_average_reward};
use crate::mdp::{ObjectSpec, RemovalFloors, SpecError, TransitionCause};
use crate::policies::{PolicyError, PolicySpec};
use crate::synth::{gen_prior, gen_random_object, gen_sensitivity_object, RandomObjectParams, SensitivityParams, SynthError};
use crate::SimRng;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("traces have different horizons ({0} vs {1})")]
    MixedHorizons(usize, usize),
    #[error("reading {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("writing csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

// ---------------------------------------------------------------------------
// Seeds

const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(SPLITMIX_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `master` with SplitMix64:
/// `h₀ = splitmix64(master)`, `hᵢ₊₁ = splitmix64(hᵢ ⊕ partᵢ)`.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |h, &p| splitmix64(h ^ p))
}

/// 64-bit FNV-1a, used to turn names into seed components.
pub fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

const OBJECT_STREAM: u64 = 0x6f626a;
const PRIOR_STREAM: u64 = 0x707269;

/// Seed of trial `(rollout, trial)` of `policy` on config object `object`.
pub fn trial_seed(master: u64, object: usize, policy: &str, rollout: usize, trial: usize) -> u64 {
    derive_seed(master, &[object as u64, fnv1a(policy), rollout as u64, trial as u64])
}

// ---------------------------------------------------------------------------
// Traces

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub pose: usize,
    pub grasp: usize,
    pub reward: u8,
    pub cause: TransitionCause,
}

/// One trial: the pose, grasp and reward at every timestep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub object: String,
    pub policy: String,
    pub rollout: usize,
    pub trial: usize,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
}

impl TraceRecord {
    pub fn rewards(&self) -> Vec<u8> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }
}

/// Runs `policy` on `spec` for `horizon` steps from a pose drawn from the
/// landing distribution.
pub fn run_trial(
    spec: &ObjectSpec,
    policy: &PolicySpec,
    horizon: usize,
    seed: u64,
) -> Result<TraceRecord, HarnessError> {
    if horizon == 0 {
        return Err(HarnessError::InvalidConfig("horizon must be at least 1".into()));
    }
    let mut rng = SimRng::seed_from_u64(seed);
    let mut learner = policy.build(spec)?;
    let mut pose = spec.sample_landing(&mut rng);
    let mut steps = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let grasp = learner.decide(pose, t, &mut rng);
        let out = spec.step(pose, grasp, &mut rng)?;
        learner.update(pose, grasp, out.reward, out.next_pose);
        steps.push(StepRecord {
            pose,
            grasp,
            reward: out.reward,
            cause: out.cause,
        });
        pose = out.next_pose;
    }
    Ok(TraceRecord {
        object: spec.label().to_string(),
        policy: policy.to_string(),
        rollout: 0,
        trial: 0,
        seed,
        steps,
    })
}

/// Left-truncated moving average: entry `t` averages `rewards[t+1-window..=t]`
/// (fewer entries near the start).
pub fn smooth(rewards: &[u8], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    let mut sum = 0u64;
    (0..rewards.len())
        .map(|t| {
            sum += u64::from(rewards[t]);
            if t >= window {
                sum -= u64::from(rewards[t - window]);
            }
            sum as f64 / (t + 1).min(window) as f64
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Aggregation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveStats {
    pub mean: Vec<f64>,
    /// Sample standard deviation across curves (zero for a single curve).
    pub std: Vec<f64>,
    pub n_curves: usize,
    /// Time-averaged mean curve.
    pub auc: f64,
    /// Standard error of the per-curve time averages.
    pub auc_se: f64,
    /// Time average of each input curve, in input order.
    pub curve_aucs: Vec<f64>,
}

impl CurveStats {
    /// Mean of the mean curve over its last `window` timesteps.
    pub fn final_window_mean(&self, window: usize) -> f64 {
        let w = window.clamp(1, self.mean.len());
        self.mean[self.mean.len() - w..].iter().sum::<f64>() / w as f64
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Pointwise mean and standard deviation of equally long curves.
pub fn aggregate_curves(curves: &[Vec<f64>]) -> Result<CurveStats, HarnessError> {
    let first = curves
        .first()
        .ok_or_else(|| HarnessError::InvalidConfig("no curves to aggregate".into()))?;
    let len = first.len();
    if let Some(bad) = curves.iter().find(|c| c.len() != len) {
        return Err(HarnessError::MixedHorizons(len, bad.len()));
    }
    let n = curves.len() as f64;
    let mut mean = vec![0.0; len];
    for curve in curves {
        for (m, v) in mean.iter_mut().zip(curve) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut std = vec![0.0; len];
    if curves.len() > 1 {
        for curve in curves {
            for ((s, v), m) in std.iter_mut().zip(curve).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        std.iter_mut().for_each(|s| *s = (*s / (n - 1.0)).sqrt());
    }
    let curve_aucs: Vec<f64> = curves
        .iter()
        .map(|c| c.iter().sum::<f64>() / len.max(1) as f64)
        .collect();
    let (_, auc_se) = mean_and_se(&curve_aucs);
    Ok(CurveStats {
        auc: mean.iter().sum::<f64>() / len.max(1) as f64,
        mean,
        std,
        n_curves: curves.len(),
        auc_se,
        curve_aucs,
    })
}

/// Smoothed-curve statistics per `(object, policy)`, in order of first
/// appearance.
pub fn aggregate(
    traces: &[TraceRecord],
    window: usize,
) -> Result<Vec<((String, String), CurveStats)>, HarnessError> {
    if let Some(first) = traces.first() {
        if let Some(bad) = traces.iter().find(|t| t.horizon() != first.horizon()) {
            return Err(HarnessError::MixedHorizons(first.horizon(), bad.horizon()));
        }
    }
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: HashMap<(String, String), Vec<Vec<f64>>> = HashMap::new();
    for trace in traces {
        let key = (trace.object.clone(), trace.policy.clone());
        let curves = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        curves.push(smooth(&trace.rewards(), window));
    }
    order
        .into_iter()
        .map(|key| {
            let stats = aggregate_curves(&groups[&key])?;
            Ok((key, stats))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Configuration

/// Where an experiment's object comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectSource {
    /// Object file in the JSON object format; fixed across trials.
    File {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prior_fidelity: Option<f64>,
    },
    /// Object given in full; fixed across trials.
    Inline {
        spec: ObjectSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prior_fidelity: Option<f64>,
    },
    /// Sensitivity-family object, regenerated for every trial.
    Sensitivity {
        params: SensitivityParams,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prior_fidelity: Option<f64>,
    },
    /// Random object, regenerated for every trial.
    Random {
        params: RandomObjectParams,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prior_fidelity: Option<f64>,
    },
}

impl ObjectSource {
    fn label_override(&self) -> Option<&str> {
        match self {
            ObjectSource::File { label, .. }
            | ObjectSource::Inline { label, .. }
            | ObjectSource::Sensitivity { label, .. }
            | ObjectSource::Random { label, .. } => label.as_deref(),
        }
    }

    fn prior_fidelity(&self) -> Option<f64> {
        match self {
            ObjectSource::File { prior_fidelity, .. }
            | ObjectSource::Inline { prior_fidelity, .. }
            | ObjectSource::Sensitivity { prior_fidelity, .. }
            | ObjectSource::Random { prior_fidelity, .. } => *prior_fidelity,
        }
    }

    fn is_generated(&self) -> bool {
        matches!(self, ObjectSource::Sensitivity { .. } | ObjectSource::Random { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRemoval {
    pub enabled: bool,
    #[serde(flatten)]
    pub floors: RemovalFloors,
}

impl Default for PoseRemoval {
    fn default() -> Self {
        Self {
            enabled: true,
            floors: RemovalFloors::default(),
        }
    }
}

fn default_horizon() -> usize {
    10_000
}
fn default_ten() -> usize {
    10
}
fn default_window() -> usize {
    20
}
fn default_final_window() -> usize {
    500
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub objects: Vec<ObjectSource>,
    pub policies: Vec<PolicySpec>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_ten")]
    pub rollouts: usize,
    #[serde(default = "default_ten")]
    pub trials: usize,
    /// Smoothing window.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Trailing timesteps averaged for the summary's final-window reward.
    #[serde(default = "default_final_window")]
    pub final_window: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_true")]
    pub toppling_enabled: bool,
    #[serde(default)]
    pub pose_removal: PoseRemoval,
}

impl ExperimentConfig {
    pub fn new(objects: Vec<ObjectSource>, policies: Vec<PolicySpec>) -> Self {
        Self {
            objects,
            policies,
            horizon: default_horizon(),
            rollouts: default_ten(),
            trials: default_ten(),
            window: default_window(),
            final_window: default_final_window(),
            master_seed: 0,
            toppling_enabled: true,
            pose_removal: PoseRemoval::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.into()));
        if self.objects.is_empty() || self.policies.is_empty() {
            return bad("need at least one object and one policy");
        }
        if self.window == 0 || self.horizon < self.window {
            return bad("need horizon >= window >= 1");
        }
        if self.rollouts == 0 || self.trials == 0 {
            return bad("rollouts and trials must be at least 1");
        }
        if self.final_window == 0 {
            return bad("final_window must be at least 1");
        }
        for source in &self.objects {
            if let Some(f) = source.prior_fidelity() {
                if !(0.0..=1.0).contains(&f) {
                    return bad("prior_fidelity must lie in [0, 1]");
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Running

/// Analysis scalars of one object realization (`None` when undefined, e.g.
/// for objects with sink poses).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectScalars {
    pub j_star: Option<f64>,
    pub diameter: Option<f64>,
    pub diameter_bound: Option<f64>,
    pub assumption4_violation: f64,
    pub epsilon: f64,
    pub lambda_min: f64,
}

impl ObjectScalars {
    pub fn of(spec: &ObjectSpec) -> Self {
        let report = spec.assumption_report();
        Self {
            j_star: optimal_average_reward(spec).ok().map(|o| o.j_star),
            diameter: diameter(spec).ok(),
            diameter_bound: diameter_bound(spec).ok(),
            assumption4_violation: report.assumption4_violation,
            epsilon: report.epsilon,
            lambda_min: report.lambda_min,
        }
    }

    /// Field-wise mean; an optional field is defined only if defined everywhere.
    fn mean(all: &[ObjectScalars]) -> ObjectScalars {
        let n = all.len() as f64;
        let opt = |f: fn(&ObjectScalars) -> Option<f64>| {
            all.iter()
                .map(f)
                .collect::<Option<Vec<f64>>>()
                .map(|v| v.iter().sum::<f64>() / n)
        };
        let avg = |f: fn(&ObjectScalars) -> f64| all.iter().map(f).sum::<f64>() / n;
        ObjectScalars {
            j_star: opt(|s| s.j_star),
            diameter: opt(|s| s.diameter),
            diameter_bound: opt(|s| s.diameter_bound),
            assumption4_violation: avg(|s| s.assumption4_violation),
            epsilon: avg(|s| s.epsilon),
            lambda_min: avg(|s| s.lambda_min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub object: String,
    pub policy: String,
    pub stats: CurveStats,
    pub final_window_mean: f64,
    /// Mean analysis scalars over the object realizations used by the cell.
    pub scalars: ObjectScalars,
    pub rollouts: usize,
    pub trials: usize,
}

impl CellResult {
    /// Time-averaged reward of each rollout (averaged over its trials).
    pub fn rollout_aucs(&self) -> Vec<f64> {
        self.stats
            .curve_aucs
            .chunks(self.trials)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub object: String,
    pub policy: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentResult {
    pub cells: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
    /// Every trace, when requested through [`RunOptions::keep_traces`].
    pub traces: Vec<TraceRecord>,
}

impl ExperimentResult {
    pub fn cell(&self, object: &str, policy: &str) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.object == object && c.policy == policy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 0 uses rayon's default.
    pub jobs: usize,
    pub keep_traces: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            jobs: 0,
            keep_traces: false,
        }
    }
}

struct Realization {
    spec: ObjectSpec,
    scalars: ObjectScalars,
}

fn load_source(source: &ObjectSource) -> Result<Option<ObjectSpec>, HarnessError> {
    match source {
        ObjectSource::File { path, .. } => {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            Ok(Some(ObjectSpec::from_json(&text)?))
        }
        ObjectSource::Inline { spec, .. } => Ok(Some(spec.clone())),
        _ => Ok(None),
    }
}

fn realize(
    cfg: &ExperimentConfig,
    index: usize,
    source: &ObjectSource,
    fixed: Option<&ObjectSpec>,
    rollout: usize,
    trial: usize,
) -> Result<Realization, HarnessError> {
    let mut spec = match (source, fixed) {
        (_, Some(spec)) => {
            let mut spec = spec.clone();
            if let Some(f) = source.prior_fidelity() {
                let mut rng = SimRng::seed_from_u64(derive_seed(cfg.master_seed, &[index as u64, PRIOR_STREAM]));
                spec = spec.with_prior(gen_prior(&spec, f, &mut rng))?;
            }
            spec
        }
        (_, None) => {
            let seed = derive_seed(
                cfg.master_seed,
                &[index as u64, OBJECT_STREAM, rollout as u64, trial as u64],
            );
            let mut rng = SimRng::seed_from_u64(seed);
            let spec = match source {
                ObjectSource::Random { params, .. } => gen_random_object(params, &mut rng)?,
                ObjectSource::Sensitivity { params, .. } => gen_sensitivity_object(params, &mut rng)?,
                _ => unreachable!("fixed sources are loaded up front"),
            };
            match source.prior_fidelity() {
                Some(f) => spec.with_prior(gen_prior(&spec, f, &mut rng))?,
                None => spec,
            }
        }
    };
    if !cfg.toppling_enabled {
        spec = spec.without_toppling();
    }
    if cfg.pose_removal.enabled {
        spec = spec.remove_dead_poses(cfg.pose_removal.floors)?.0;
    }
    let scalars = ObjectScalars::of(&spec);
    Ok(Realization { spec, scalars })
}

/// The object that trial `(rollout, trial)` of config object `index` runs
/// on, after the config's preprocessing.
pub fn object_realization(
    cfg: &ExperimentConfig,
    index: usize,
    rollout: usize,
    trial: usize,
) -> Result<ObjectSpec, HarnessError> {
    let source = cfg
        .objects
        .get(index)
        .ok_or_else(|| HarnessError::InvalidConfig(format!("no object {index}")))?;
    let fixed = load_source(source)?;
    let (r, t) = if source.is_generated() { (rollout, trial) } else { (0, 0) };
    Ok(realize(cfg, index, source, fixed.as_ref(), r, t)?.spec)
}

/// Runs every `(object, policy, rollout, trial)` of the config.
///
/// Failures are reported per cell; other cells still run.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<ExperimentResult, HarnessError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
    pool.install(|| run_in_pool(cfg, opts))
}

fn run_in_pool(cfg: &ExperimentConfig, opts: RunOptions) -> Result<ExperimentResult, HarnessError> {
    let mut result = ExperimentResult::default();
    let mut labels: Vec<String> = Vec::new();
    let grid: Vec<(usize, usize)> = (0..cfg.rollouts)
        .flat_map(|r| (0..cfg.trials).map(move |t| (r, t)))
        .collect();

    for (index, source) in cfg.objects.iter().enumerate() {
        let fail_all = |result: &mut ExperimentResult, label: &str, message: String| {
            for policy in &cfg.policies {
                result.failures.push(CellFailure {
                    object: label.to_string(),
                    policy: policy.to_string(),
                    message: message.clone(),
                });
            }
        };
        let fixed = match load_source(source) {
            Ok(f) => f,
            Err(e) => {
                let label = source.label_override().map_or_else(|| format!("object{index}"), str::to_string);
                fail_all(&mut result, &label, e.to_string());
                continue;
            }
        };
        let realizations: Result<Vec<Realization>, HarnessError> = if source.is_generated() {
            grid.par_iter()
                .map(|&(r, t)| realize(cfg, index, source, None, r, t))
                .collect()
        } else {
            realize(cfg, index, source, fixed.as_ref(), 0, 0).map(|one| vec![one])
        };
        let base_label = source
            .label_override()
            .map(str::to_string)
            .or_else(|| fixed.as_ref().map(|s| s.label().to_string()))
            .or_else(|| realizations.as_ref().ok().map(|r| r[0].spec.label().to_string()))
            .unwrap_or_else(|| format!("object{index}"));
        let label = if base_label.is_empty() || labels.contains(&base_label) {
            format!("{base_label}#{index}")
        } else {
            base_label
        };
        labels.push(label.clone());
        let realizations = match realizations {
            Ok(r) => r,
            Err(e) => {
                fail_all(&mut result, &label, e.to_string());
                continue;
            }
        };
        let scalars = ObjectScalars::mean(&realizations.iter().map(|r| r.scalars).collect::<Vec<_>>());

        for policy in &cfg.policies {
            let name = policy.to_string();
            let outcomes: Vec<Result<(Vec<f64>, Option<TraceRecord>), HarnessError>> = grid
                .par_iter()
                .enumerate()
                .map(|(i, &(rollout, trial))| {
                    let realization = &realizations[if realizations.len() == 1 { 0 } else { i }];
                    let seed = trial_seed(cfg.master_seed, index, &name, rollout, trial);
                    let mut trace = run_trial(&realization.spec, policy, cfg.horizon, seed)?;
                    let curve = smooth(&trace.rewards(), cfg.window);
                    trace.object = label.clone();
                    trace.rollout = rollout;
                    trace.trial = trial;
                    Ok((curve, opts.keep_traces.then_some(trace)))
                })
                .collect();
            let mut curves = Vec::with_capacity(outcomes.len());
            let mut failure = None;
            for outcome in outcomes {
                match outcome {
                    Ok((curve, trace)) => {
                        curves.push(curve);
                        result.traces.extend(trace);
                    }
                    Err(e) => {
                        failure.get_or_insert(e.to_string());
                    }
                }
            }
            if let Some(message) = failure {
                result.failures.push(CellFailure {
                    object: label.clone(),
                    policy: name,
                    message,
                });
                continue;
            }
            let stats = aggregate_curves(&curves)?;
            result.cells.push(CellResult {
                object: label.clone(),
                policy: name,
                final_window_mean: stats.final_window_mean(cfg.final_window),
                stats,
                scalars,
                rollouts: cfg.rollouts,
                trials: cfg.trials,
            });
        }
    }
    Ok(result)
}

// ---------------------------------------------------------------------------
// Sweeps

/// Cartesian grid over the sensitivity family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub epsilon: Vec<f64>,
    pub lambda_min: Vec<f64>,
    pub grasps_per_pose: Vec<usize>,
    pub n_poses: usize,
    #[serde(default)]
    pub topple_strength: f64,
}

impl SweepGrid {
    pub fn is_empty(&self) -> bool {
        self.epsilon.is_empty() || self.lambda_min.is_empty() || self.grasps_per_pose.is_empty()
    }

    /// One sensitivity object per grid cell, ordered `lambda_min`, then
    /// `epsilon`, then `grasps_per_pose`.
    pub fn objects(&self) -> Vec<ObjectSource> {
        let mut out = Vec::new();
        for &lambda_min in &self.lambda_min {
            for &epsilon in &self.epsilon {
                for &k in &self.grasps_per_pose {
                    out.push(ObjectSource::Sensitivity {
                        params: SensitivityParams {
                            n_poses: self.n_poses,
                            grasps_per_pose: k,
                            epsilon,
                            lambda_min,
                            topple_strength: self.topple_strength,
                        },
                        label: None,
                        prior_fidelity: None,
                    });
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// CSV output

pub const CURVES_HEADER: [&str; 6] = ["object", "policy", "t", "mean_reward", "std_reward", "n_curves"];
pub const SUMMARY_HEADER: [&str; 12] = [
    "object",
    "policy",
    "n_curves",
    "auc",
    "auc_se",
    "final_window_mean",
    "j_star",
    "diameter",
    "diameter_bound",
    "assumption4_violation",
    "epsilon",
    "lambda_min",
];

/// One row per `(object, policy, t)`, `t` counted from 1.
pub fn write_curves_csv<W: Write>(result: &ExperimentResult, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVES_HEADER)?;
    for cell in &result.cells {
        let n = cell.stats.n_curves.to_string();
        for (t, (m, s)) in cell.stats.mean.iter().zip(&cell.stats.std).enumerate() {
            w.write_record([
                cell.object.as_str(),
                cell.policy.as_str(),
                &(t + 1).to_string(),
                &m.to_string(),
                &s.to_string(),
                &n,
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_summary_csv<W: Write>(result: &ExperimentResult, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for cell in &result.cells {
        let s = &cell.scalars;
        w.write_record([
            cell.object.clone(),
            cell.policy.clone(),
            cell.stats.n_curves.to_string(),
            cell.stats.auc.to_string(),
            cell.stats.auc_se.to_string(),
            cell.final_window_mean.to_string(),
            opt(s.j_star),
            opt(s.diameter),
            opt(s.diameter_bound),
            s.assumption4_violation.to_string(),
            s.epsilon.to_string(),
            s.lambda_min.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
