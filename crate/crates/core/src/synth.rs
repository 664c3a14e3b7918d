//! Synthetic objects: the ε/λ sensitivity family, random benchmark objects
//! and planner-prior quality matrices of adjustable fidelity.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{identity, validate_object, Matrix, ObjectSpec, RawObjectSpec, SpecError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

fn invalid(msg: impl Into<String>) -> SynthError {
    SynthError::InvalidParams(msg.into())
}

/// One grasp of quality ε per pose, one pose landed in with probability
/// `lambda_min`, everything else uniform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityParams {
    pub n_poses: usize,
    pub grasps_per_pose: usize,
    pub epsilon: f64,
    pub lambda_min: f64,
    /// Probability that a failed grasp topples, spread uniformly over the
    /// other poses. Zero disables toppling.
    #[serde(default)]
    pub topple_strength: f64,
}

impl SensitivityParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_poses == 0 || self.grasps_per_pose == 0 {
            return Err(invalid("n_poses and grasps_per_pose must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(invalid(format!("epsilon {} not in (0, 1]", self.epsilon)));
        }
        let n = self.n_poses as f64;
        if !(self.lambda_min > 0.0 && self.lambda_min <= 1.0 / n) {
            return Err(invalid(format!(
                "lambda_min {} not in (0, 1/{}]",
                self.lambda_min, self.n_poses
            )));
        }
        if self.n_poses == 1 && self.lambda_min != 1.0 {
            return Err(invalid("a single-pose object needs lambda_min = 1"));
        }
        if !(0.0..1.0).contains(&self.topple_strength) {
            return Err(invalid("topple_strength must lie in [0, 1)"));
        }
        Ok(())
    }
}

pub fn gen_sensitivity_object<R: Rng + ?Sized>(
    p: &SensitivityParams,
    rng: &mut R,
) -> Result<ObjectSpec, SynthError> {
    p.validate()?;
    let n = p.n_poses;
    let rare = rng.random_range(0..n);
    let rest = if n > 1 {
        ((1.0 - p.lambda_min) / (n - 1) as f64).max(p.lambda_min)
    } else {
        p.lambda_min
    };
    let landing_probs = (0..n)
        .map(|s| if s == rare { p.lambda_min } else { rest })
        .collect();
    let grasp_quality = (0..n)
        .map(|_| {
            let mut row = vec![0.0; p.grasps_per_pose];
            row[rng.random_range(0..p.grasps_per_pose)] = p.epsilon;
            row
        })
        .collect();
    let topple_matrix = if p.topple_strength > 0.0 && n > 1 {
        let spill = p.topple_strength / (n - 1) as f64;
        (0..n)
            .map(|s| {
                (0..n)
                    .map(|t| if s == t { 1.0 - p.topple_strength } else { spill })
                    .collect()
            })
            .collect()
    } else {
        identity(n)
    };
    Ok(validate_object(RawObjectSpec {
        label: format!(
            "sensitivity-n{}-k{}-eps{}-lam{}",
            n, p.grasps_per_pose, p.epsilon, p.lambda_min
        ),
        landing_probs,
        grasp_quality,
        topple_matrix,
        prior_quality: None,
    })?)
}

/// Random benchmark objects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomObjectParams {
    pub n_poses: usize,
    pub grasps_per_pose: usize,
    /// Symmetric Dirichlet concentration of the landing distribution.
    #[serde(default = "default_dirichlet")]
    pub dirichlet_alpha: f64,
    /// Grasp qualities are drawn from `Beta(quality_alpha, quality_beta)`.
    #[serde(default = "default_quality_alpha")]
    pub quality_alpha: f64,
    #[serde(default = "default_quality_beta")]
    pub quality_beta: f64,
    /// Every pose gets at least one grasp of at least this quality.
    #[serde(default = "default_epsilon_floor")]
    pub epsilon_floor: f64,
    /// Number of other poses a failed grasp may topple into.
    #[serde(default)]
    pub topple_density: usize,
    /// Probability that a failed grasp topples at all.
    #[serde(default)]
    pub topple_mass: f64,
}

fn default_dirichlet() -> f64 {
    1.0
}
fn default_quality_alpha() -> f64 {
    0.3
}
fn default_quality_beta() -> f64 {
    3.0
}
fn default_epsilon_floor() -> f64 {
    0.1
}

impl RandomObjectParams {
    pub fn new(n_poses: usize, grasps_per_pose: usize) -> Self {
        Self {
            n_poses,
            grasps_per_pose,
            dirichlet_alpha: default_dirichlet(),
            quality_alpha: default_quality_alpha(),
            quality_beta: default_quality_beta(),
            epsilon_floor: default_epsilon_floor(),
            topple_density: 0,
            topple_mass: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_poses == 0 || self.grasps_per_pose == 0 {
            return Err(invalid("n_poses and grasps_per_pose must be positive"));
        }
        if !(self.dirichlet_alpha > 0.0 && self.quality_alpha > 0.0 && self.quality_beta > 0.0) {
            return Err(invalid("distribution parameters must be positive"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_floor) {
            return Err(invalid("epsilon_floor must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.topple_mass) {
            return Err(invalid("topple_mass must lie in [0, 1)"));
        }
        if self.topple_mass > 0.0 && self.topple_density == 0 && self.n_poses > 1 {
            return Err(invalid("toppling needs topple_density >= 1"));
        }
        Ok(())
    }
}

/// Symmetric Dirichlet sample via normalized Gamma draws.
fn dirichlet<R: Rng + ?Sized>(alpha: f64, dim: usize, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha > 0");
    loop {
        let draws: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return draws.into_iter().map(|g| g / total).collect();
        }
    }
}

pub fn gen_random_object<R: Rng + ?Sized>(
    p: &RandomObjectParams,
    rng: &mut R,
) -> Result<ObjectSpec, SynthError> {
    p.validate()?;
    let n = p.n_poses;
    let k = p.grasps_per_pose;
    let landing_probs = dirichlet(p.dirichlet_alpha, n, rng);
    let quality = Beta::new(p.quality_alpha, p.quality_beta).expect("validated");
    let grasp_quality = (0..n)
        .map(|_| {
            let mut row: Vec<f64> = (0..k).map(|_| quality.sample(rng)).collect();
            if row.iter().all(|&q| q < p.epsilon_floor) {
                let lucky = rng.random_range(0..k);
                row[lucky] = rng.random_range(p.epsilon_floor..=1.0);
            }
            row
        })
        .collect();
    let topple_matrix = (0..n)
        .map(|s| {
            let mut row = vec![0.0; n];
            row[s] = 1.0 - p.topple_mass;
            let targets = p.topple_density.min(n - 1);
            if p.topple_mass > 0.0 && targets > 0 {
                let picks = sample(rng, n - 1, targets);
                let weights = dirichlet(1.0, targets, rng);
                for (i, w) in picks.iter().zip(weights) {
                    let t = if i >= s { i + 1 } else { i };
                    row[t] += p.topple_mass * w;
                }
            } else {
                row[s] = 1.0;
            }
            row
        })
        .collect();
    Ok(validate_object(RawObjectSpec {
        label: format!("random-n{n}-k{k}"),
        landing_probs,
        grasp_quality,
        topple_matrix,
        prior_quality: None,
    })?)
}

/// Planner-prior qualities `ρ·φ + (1 − ρ)·u`, `u ~ U[0, 1]` i.i.d.
pub fn gen_prior<R: Rng + ?Sized>(spec: &ObjectSpec, fidelity: f64, rng: &mut R) -> Matrix {
    spec.grasp_quality()
        .iter()
        .map(|row| {
            row.iter()
                .map(|&phi| {
                    let noise: f64 = rng.random();
                    (fidelity * phi + (1.0 - fidelity) * noise).clamp(0.0, 1.0)
                })
                .collect()
        })
        .collect()
}
