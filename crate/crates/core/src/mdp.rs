//! Object ground truth and the grasp MDP environment.
//!
//! An object rests in one of `N` distinguishable stable poses. In each pose the
//! robot may attempt one of `K` grasps. Grasp `a` in pose `s` succeeds with
//! probability `φ[s][a]`; a success earns reward 1 and the object is released
//! and lands in pose `s'` with probability `λ[s']`. A failure earns nothing and
//! the object topples according to row `s` of the topple matrix `δ`.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense row-major matrix.
pub type Matrix = Vec<Vec<f64>>;

/// Sums closer than this to 1 are accepted untouched.
const SIMPLEX_EXACT_TOL: f64 = 1e-9;
/// Sums within this of 1 are renormalized silently; anything further is rejected.
const SIMPLEX_INGEST_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("{what} row {row} is not a probability distribution (sum {sum}, min entry {min})")]
    NonStochasticRow {
        what: &'static str,
        row: usize,
        sum: f64,
        min: f64,
    },
    #[error("{what}[{pose}][{grasp}] = {value} is outside [0, 1]")]
    OutOfRangeQuality {
        what: &'static str,
        pose: usize,
        grasp: usize,
        value: f64,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },
    #[error("every pose was removed by the dead-pose filter")]
    AllPosesRemoved,
    #[error("object file: {0}")]
    Format(String),
}

/// Object spec exactly as it appears on disk, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawObjectSpec {
    #[serde(default)]
    pub label: String,
    pub landing_probs: Vec<f64>,
    pub grasp_quality: Matrix,
    pub topple_matrix: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_quality: Option<Matrix>,
}

/// Validated, immutable ground truth for one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawObjectSpec", into = "RawObjectSpec")]
pub struct ObjectSpec {
    label: String,
    landing_probs: Vec<f64>,
    grasp_quality: Matrix,
    topple_matrix: Matrix,
    prior_quality: Option<Matrix>,
    landing_cdf: Vec<f64>,
    topple_cdf: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionCause {
    GraspedAndReleased,
    Toppled,
    Stayed,
}

/// Result of one grasp attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionOutcome {
    pub reward: u8,
    pub next_pose: usize,
    pub cause: TransitionCause,
}

/// Floors used by [`ObjectSpec::remove_dead_poses`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemovalFloors {
    /// Poses whose best grasp is below this quality are dropped.
    pub quality_floor: f64,
    /// Poses landed in with probability below this are dropped.
    pub mass_floor: f64,
}

impl Default for RemovalFloors {
    fn default() -> Self {
        Self {
            quality_floor: 1e-9,
            mass_floor: 1e-3,
        }
    }
}

/// Diagnostics for the structural assumptions the analysis relies on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// Smallest best-grasp quality over poses.
    pub epsilon: f64,
    pub lambda_min: f64,
    /// `max_{s≠s'} δ[s][s'] − ε·λ[s']`; non-positive when toppling never
    /// beats grasp-and-release at reaching another pose. Zero for a single pose.
    pub assumption4_violation: f64,
    /// Poses from which some other pose is unreachable under the best-grasp
    /// policy plus toppling. Empty exactly when that chain is irreducible.
    pub sink_poses: Vec<usize>,
}

pub fn validate_object(raw: RawObjectSpec) -> Result<ObjectSpec, SpecError> {
    let RawObjectSpec {
        label,
        mut landing_probs,
        grasp_quality,
        mut topple_matrix,
        prior_quality,
    } = raw;

    let n = landing_probs.len();
    if n == 0 {
        return Err(SpecError::DimensionMismatch(
            "object must have at least one pose".into(),
        ));
    }
    if grasp_quality.len() != n {
        return Err(SpecError::DimensionMismatch(format!(
            "grasp_quality has {} rows, expected {n}",
            grasp_quality.len()
        )));
    }
    let k = grasp_quality[0].len();
    if k == 0 {
        return Err(SpecError::DimensionMismatch(
            "poses must have at least one grasp".into(),
        ));
    }
    check_quality("grasp_quality", &grasp_quality, n, k)?;
    if let Some(prior) = &prior_quality {
        if prior.len() != n {
            return Err(SpecError::DimensionMismatch(format!(
                "prior_quality has {} rows, expected {n}",
                prior.len()
            )));
        }
        check_quality("prior_quality", prior, n, k)?;
    }
    if topple_matrix.len() != n || topple_matrix.iter().any(|r| r.len() != n) {
        return Err(SpecError::DimensionMismatch(format!(
            "topple_matrix must be {n}x{n}"
        )));
    }

    normalize_simplex("landing_probs", 0, &mut landing_probs)?;
    for (row, probs) in topple_matrix.iter_mut().enumerate() {
        normalize_simplex("topple_matrix", row, probs)?;
    }

    let landing_cdf = cumulative(&landing_probs);
    let topple_cdf = topple_matrix.iter().map(|r| cumulative(r)).collect();
    Ok(ObjectSpec {
        label,
        landing_probs,
        grasp_quality,
        topple_matrix,
        prior_quality,
        landing_cdf,
        topple_cdf,
    })
}

fn check_quality(what: &'static str, m: &Matrix, n: usize, k: usize) -> Result<(), SpecError> {
    for (pose, row) in m.iter().enumerate().take(n) {
        if row.len() != k {
            return Err(SpecError::DimensionMismatch(format!(
                "{what} row {pose} has {} grasps, expected {k}",
                row.len()
            )));
        }
        for (grasp, &value) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(SpecError::OutOfRangeQuality {
                    what,
                    pose,
                    grasp,
                    value,
                });
            }
        }
    }
    Ok(())
}

fn normalize_simplex(what: &'static str, row: usize, probs: &mut [f64]) -> Result<(), SpecError> {
    let sum: f64 = probs.iter().sum();
    let min = probs.iter().copied().fold(f64::INFINITY, f64::min);
    let bad = || SpecError::NonStochasticRow { what, row, sum, min };
    if !sum.is_finite() || probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(bad());
    }
    let gap = (sum - 1.0).abs();
    if gap > SIMPLEX_INGEST_TOL {
        return Err(bad());
    }
    if gap > SIMPLEX_EXACT_TOL {
        probs.iter_mut().for_each(|p| *p /= sum);
    }
    Ok(())
}

/// Cumulative table whose entries from the last positive-mass index onward are
/// exactly 1, so a uniform draw in `[0, 1)` can never land on a zero-mass entry.
fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    if let Some(last) = probs.iter().rposition(|&p| p > 0.0) {
        cdf[last..].iter_mut().for_each(|c| *c = 1.0);
    }
    cdf
}

fn sample_cdf<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    cdf.partition_point(|&c| c <= u)
}

impl TryFrom<RawObjectSpec> for ObjectSpec {
    type Error = SpecError;

    fn try_from(raw: RawObjectSpec) -> Result<Self, Self::Error> {
        validate_object(raw)
    }
}

impl From<ObjectSpec> for RawObjectSpec {
    fn from(spec: ObjectSpec) -> Self {
        RawObjectSpec {
            label: spec.label,
            landing_probs: spec.landing_probs,
            grasp_quality: spec.grasp_quality,
            topple_matrix: spec.topple_matrix,
            prior_quality: spec.prior_quality,
        }
    }
}

impl ObjectSpec {
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        serde_json::from_str(text).map_err(|e| SpecError::Format(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("object spec serializes")
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n_poses(&self) -> usize {
        self.landing_probs.len()
    }

    pub fn grasps_per_pose(&self) -> usize {
        self.grasp_quality[0].len()
    }

    pub fn landing_probs(&self) -> &[f64] {
        &self.landing_probs
    }

    pub fn grasp_quality(&self) -> &Matrix {
        &self.grasp_quality
    }

    pub fn quality(&self, pose: usize, grasp: usize) -> f64 {
        self.grasp_quality[pose][grasp]
    }

    pub fn topple_matrix(&self) -> &Matrix {
        &self.topple_matrix
    }

    pub fn prior_quality(&self) -> Option<&Matrix> {
        self.prior_quality.as_ref()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Returns a copy carrying the given planner-prior qualities.
    pub fn with_prior(&self, prior: Matrix) -> Result<ObjectSpec, SpecError> {
        let mut raw = RawObjectSpec::from(self.clone());
        raw.prior_quality = Some(prior);
        validate_object(raw)
    }

    /// Returns a copy in which failed grasps never move the object.
    pub fn without_toppling(&self) -> ObjectSpec {
        let n = self.n_poses();
        let mut raw = RawObjectSpec::from(self.clone());
        raw.topple_matrix = identity(n);
        validate_object(raw).expect("identity topple matrix is stochastic")
    }

    /// Highest quality available in `pose`.
    pub fn best_quality(&self, pose: usize) -> f64 {
        self.grasp_quality[pose]
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    /// Best grasp per pose, lowest index on ties.
    pub fn greedy_policy(&self) -> Vec<usize> {
        self.grasp_quality.iter().map(|row| first_argmax(row)).collect()
    }

    pub fn sample_landing<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_cdf(&self.landing_cdf, rng)
    }

    /// Attempts `grasp` in `pose` and samples the resulting transition.
    pub fn step<R: Rng + ?Sized>(
        &self,
        pose: usize,
        grasp: usize,
        rng: &mut R,
    ) -> Result<TransitionOutcome, SpecError> {
        self.check_pose(pose)?;
        if grasp >= self.grasps_per_pose() {
            return Err(SpecError::IndexOutOfRange {
                what: "grasp",
                index: grasp,
                limit: self.grasps_per_pose(),
            });
        }
        let success = rng.random::<f64>() < self.grasp_quality[pose][grasp];
        Ok(if success {
            TransitionOutcome {
                reward: 1,
                next_pose: sample_cdf(&self.landing_cdf, rng),
                cause: TransitionCause::GraspedAndReleased,
            }
        } else {
            let next_pose = sample_cdf(&self.topple_cdf[pose], rng);
            TransitionOutcome {
                reward: 0,
                next_pose,
                cause: if next_pose == pose {
                    TransitionCause::Stayed
                } else {
                    TransitionCause::Toppled
                },
            }
        })
    }

    /// Next-pose distribution when a grasp of success probability `quality` is
    /// attempted in `pose`: `quality·λ + (1 − quality)·δ[pose]`.
    pub fn transition_row(&self, pose: usize, quality: f64) -> Vec<f64> {
        self.landing_probs
            .iter()
            .zip(&self.topple_matrix[pose])
            .map(|(l, d)| quality * l + (1.0 - quality) * d)
            .collect()
    }

    /// Pose-to-pose Markov chain under a stationary deterministic policy.
    pub fn induced_chain(&self, policy: &[usize]) -> Result<Matrix, SpecError> {
        if policy.len() != self.n_poses() {
            return Err(SpecError::DimensionMismatch(format!(
                "policy covers {} poses, object has {}",
                policy.len(),
                self.n_poses()
            )));
        }
        policy
            .iter()
            .enumerate()
            .map(|(pose, &grasp)| {
                if grasp >= self.grasps_per_pose() {
                    return Err(SpecError::IndexOutOfRange {
                        what: "grasp",
                        index: grasp,
                        limit: self.grasps_per_pose(),
                    });
                }
                Ok(self.transition_row(pose, self.grasp_quality[pose][grasp]))
            })
            .collect()
    }

    /// Drops poses that cannot be grasped or are (almost) never landed in, and
    /// renormalizes the remaining landing and topple distributions. Topple mass
    /// that pointed at removed poses is redistributed proportionally; a row
    /// left with no mass becomes a self-loop. The second element lists removed
    /// pose indices in the original numbering.
    pub fn remove_dead_poses(
        &self,
        floors: RemovalFloors,
    ) -> Result<(ObjectSpec, Vec<usize>), SpecError> {
        let n = self.n_poses();
        let (keep, removed): (Vec<usize>, Vec<usize>) = (0..n).partition(|&s| {
            self.best_quality(s) >= floors.quality_floor
                && self.landing_probs[s] >= floors.mass_floor
        });
        if removed.is_empty() {
            return Ok((self.clone(), removed));
        }
        if keep.is_empty() {
            return Err(SpecError::AllPosesRemoved);
        }

        let kept_mass: f64 = keep.iter().map(|&s| self.landing_probs[s]).sum();
        let landing_probs = keep
            .iter()
            .map(|&s| self.landing_probs[s] / kept_mass)
            .collect();
        let topple_matrix = keep
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let row: Vec<f64> = keep.iter().map(|&u| self.topple_matrix[s][u]).collect();
                let mass: f64 = row.iter().sum();
                if mass > 0.0 {
                    row.into_iter().map(|p| p / mass).collect()
                } else {
                    one_hot(keep.len(), i)
                }
            })
            .collect();
        let select = |m: &Matrix| keep.iter().map(|&s| m[s].clone()).collect::<Matrix>();
        let raw = RawObjectSpec {
            label: self.label.clone(),
            landing_probs,
            grasp_quality: select(&self.grasp_quality),
            topple_matrix,
            prior_quality: self.prior_quality.as_ref().map(select),
        };
        Ok((validate_object(raw)?, removed))
    }

    pub fn assumption_report(&self) -> AssumptionReport {
        let n = self.n_poses();
        let epsilon = (0..n)
            .map(|s| self.best_quality(s))
            .fold(f64::INFINITY, f64::min);
        let lambda_min = self
            .landing_probs
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let mut violation = f64::NEG_INFINITY;
        for s in 0..n {
            for t in (0..n).filter(|&t| t != s) {
                violation = violation.max(self.topple_matrix[s][t] - epsilon * self.landing_probs[t]);
            }
        }
        if n == 1 {
            violation = 0.0;
        }

        let chain = self
            .induced_chain(&self.greedy_policy())
            .expect("greedy policy is in range");
        let support: Vec<Vec<usize>> = (0..n)
            .map(|s| {
                (0..n)
                    .filter(|&t| t != s && (chain[s][t] > 0.0 || self.topple_matrix[s][t] > 0.0))
                    .collect()
            })
            .collect();
        let sink_poses = (0..n)
            .filter(|&s| reachable_from(&support, s).iter().any(|r| !r))
            .collect();

        AssumptionReport {
            epsilon,
            lambda_min,
            assumption4_violation: violation,
            sink_poses,
        }
    }

    fn check_pose(&self, pose: usize) -> Result<(), SpecError> {
        if pose >= self.n_poses() {
            return Err(SpecError::IndexOutOfRange {
                what: "pose",
                index: pose,
                limit: self.n_poses(),
            });
        }
        Ok(())
    }
}

/// Breadth-first reachability over an adjacency list; `start` is reachable.
pub(crate) fn reachable_from(adjacency: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adjacency.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        for &t in &adjacency[s] {
            if !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    seen
}

pub(crate) fn first_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn identity(n: usize) -> Matrix {
    (0..n).map(|i| one_hot(n, i)).collect()
}

fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut row = vec![0.0; n];
    row[i] = 1.0;
    row
}
