//! Exact and bound-based quantities for the grasp MDP: stationary
//! distributions, expected hitting times, the diameter and its closed-form
//! bound, the optimal average reward, regret curves and pose cover time.
//!
//! Transition rows and expected rewards are both affine in the quality of the
//! attempted grasp, so any optimum over a pose's grasps is attained at its
//! lowest- or highest-quality grasp. The solvers below only consider those two.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{smooth, TraceRecord};
use crate::linalg::{solve, stationary_distribution};
use crate::mdp::{first_argmax, reachable_from, Matrix, ObjectSpec, SpecError};
use crate::policies::{PolicyError, PolicySpec};
use crate::SimRng;

/// Span tolerance for relative value iteration.
pub const RVI_TOLERANCE: f64 = 1e-9;
pub const RVI_ITERATION_CAP: usize = 1_000_000;
/// Self-loop weight of the aperiodicity transform used by relative value iteration.
const RVI_APERIODICITY: f64 = 0.5;
/// Gains closer than this are considered equal when comparing solvers.
const GAIN_TIE: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("linear system is singular")]
    SingularSystem,
    #[error("pose {to} is unreachable from pose {from}")]
    Unreachable { from: usize, to: usize },
    #[error("bound is infinite: {0}")]
    DegenerateBound(String),
    #[error("value iteration did not converge in {iterations} iterations (span {span})")]
    NonConvergence { iterations: usize, span: f64 },
    #[error("cover-time episode exceeded the cap of {cap} steps")]
    EpisodeCap { cap: u64 },
    #[error("empty trace")]
    EmptyTrace,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

/// Stationary distribution and pairwise hitting times of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainAnalysis {
    pub stationary: Vec<f64>,
    /// `hitting_times[s][t]`: expected steps from `s` to first reach `t`;
    /// infinite when `t` is not reached almost surely.
    pub hitting_times: Matrix,
}

pub fn analyze_chain(p: &Matrix) -> Result<ChainAnalysis, AnalysisError> {
    Ok(ChainAnalysis {
        stationary: stationary_distribution(p).ok_or(AnalysisError::SingularSystem)?,
        hitting_times: hitting_times(p)?,
    })
}

fn support(p: &Matrix) -> Vec<Vec<usize>> {
    p.iter()
        .map(|row| (0..row.len()).filter(|&t| row[t] > 0.0).collect())
        .collect()
}

fn reverse(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut rev = vec![Vec::new(); adjacency.len()];
    for (s, outs) in adjacency.iter().enumerate() {
        for &t in outs {
            rev[t].push(s);
        }
    }
    rev
}

/// Expected hitting times of a row-stochastic matrix.
///
/// For each target `t`, solves `h_s = 1 + Σ_{u≠t} P[s][u]·h_u` over the states
/// that reach `t` with probability one. Every other pair is reported as
/// `f64::INFINITY`. Diagonal entries are zero.
pub fn hitting_times(p: &Matrix) -> Result<Matrix, AnalysisError> {
    let n = p.len();
    let forward = support(p);
    let backward = reverse(&forward);
    let mut times = vec![vec![f64::INFINITY; n]; n];
    for target in 0..n {
        times[target][target] = 0.0;
        let reaches = reachable_from(&backward, target);
        // states that can drift into a region which never reaches the target
        let mut lost = vec![false; n];
        let mut stack: Vec<usize> = (0..n).filter(|&s| !reaches[s]).collect();
        for &s in &stack {
            lost[s] = true;
        }
        while let Some(s) = stack.pop() {
            for &u in &backward[s] {
                if u != target && !lost[u] {
                    lost[u] = true;
                    stack.push(u);
                }
            }
        }
        let finite: Vec<usize> = (0..n).filter(|&s| s != target && !lost[s]).collect();
        if finite.is_empty() {
            continue;
        }
        let a: Matrix = finite
            .iter()
            .map(|&s| {
                finite
                    .iter()
                    .map(|&u| f64::from(u8::from(s == u)) - p[s][u])
                    .collect()
            })
            .collect();
        let h = solve(a, vec![1.0; finite.len()]).ok_or(AnalysisError::SingularSystem)?;
        for (&s, value) in finite.iter().zip(h) {
            times[s][target] = value;
        }
    }
    Ok(times)
}

/// Lowest- and highest-quality grasp qualities per pose.
fn extreme_qualities(spec: &ObjectSpec) -> Vec<[f64; 2]> {
    spec.grasp_quality()
        .iter()
        .map(|row| {
            let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            [lo, hi]
        })
        .collect()
}

/// Minimum over policies of the expected time to reach `target` from every
/// pose, by policy iteration on the stochastic shortest path problem.
pub fn min_hitting_times_to(spec: &ObjectSpec, target: usize) -> Result<Vec<f64>, AnalysisError> {
    let n = spec.n_poses();
    let extremes = extreme_qualities(spec);
    let rows: Vec<[Vec<f64>; 2]> = (0..n)
        .map(|s| extremes[s].map(|q| spec.transition_row(s, q)))
        .collect();

    // Breadth-first layers toward the target give an initial proper policy.
    let mut layer = vec![usize::MAX; n];
    let mut choice = vec![1usize; n];
    layer[target] = 0;
    let mut frontier = vec![target];
    let mut depth = 0;
    while !frontier.is_empty() {
        depth += 1;
        let mut next = Vec::new();
        for s in 0..n {
            if layer[s] != usize::MAX {
                continue;
            }
            if let Some(a) = (0..2).rev().find(|&a| frontier.iter().any(|&u| rows[s][a][u] > 0.0)) {
                layer[s] = depth;
                choice[s] = a;
                next.push(s);
            }
        }
        frontier = next;
    }
    if let Some(from) = (0..n).find(|&s| layer[s] == usize::MAX) {
        return Err(AnalysisError::Unreachable { from, to: target });
    }

    let others: Vec<usize> = (0..n).filter(|&s| s != target).collect();
    let mut h = vec![0.0; n];
    for _ in 0..=4 * n + 8 {
        let a: Matrix = others
            .iter()
            .map(|&s| {
                others
                    .iter()
                    .map(|&u| f64::from(u8::from(s == u)) - rows[s][choice[s]][u])
                    .collect()
            })
            .collect();
        let values = solve(a, vec![1.0; others.len()]).ok_or(AnalysisError::SingularSystem)?;
        for (&s, v) in others.iter().zip(values) {
            h[s] = v;
        }
        let mut changed = false;
        for &s in &others {
            let cost = |a: usize| 1.0 + rows[s][a].iter().zip(&h).map(|(p, v)| p * v).sum::<f64>();
            let current = cost(choice[s]);
            let alternative = cost(1 - choice[s]);
            if alternative < current - 1e-12 * (1.0 + current.abs()) {
                choice[s] = 1 - choice[s];
                changed = true;
            }
        }
        if !changed {
            return Ok(h);
        }
    }
    Err(AnalysisError::NonConvergence {
        iterations: 4 * n + 8,
        span: f64::NAN,
    })
}

/// MDP diameter: the largest, over ordered pose pairs, of the smallest
/// expected travel time any policy achieves. Zero for a single pose.
pub fn diameter(spec: &ObjectSpec) -> Result<f64, AnalysisError> {
    let mut worst: f64 = 0.0;
    for target in 0..spec.n_poses() {
        let h = min_hitting_times_to(spec, target)?;
        worst = worst.max(h.into_iter().fold(0.0, f64::max));
    }
    Ok(worst)
}

/// Closed-form diameter bound `1 / (ε·λ_min)`.
pub fn diameter_bound(spec: &ObjectSpec) -> Result<f64, AnalysisError> {
    let report = spec.assumption_report();
    if report.epsilon <= 0.0 || report.lambda_min <= 0.0 {
        return Err(AnalysisError::DegenerateBound(format!(
            "epsilon {} and lambda_min {} must be positive",
            report.epsilon, report.lambda_min
        )));
    }
    Ok(1.0 / (report.epsilon * report.lambda_min))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalReward {
    pub j_star: f64,
    /// Grasp per pose achieving `j_star`.
    pub policy: Vec<usize>,
    /// Stationary distribution of the chain induced by `policy`.
    pub stationary: Vec<f64>,
    pub greedy_gain: f64,
    /// Set when relative value iteration was run (toppling can beat grasping).
    pub value_iteration_gain: Option<f64>,
    /// False when relative value iteration found a strictly better policy.
    pub greedy_is_optimal: bool,
}

/// Average reward of a stationary policy, from its induced chain.
pub fn policy_gain(spec: &ObjectSpec, policy: &[usize]) -> Result<(f64, Vec<f64>), AnalysisError> {
    let chain = spec.induced_chain(policy)?;
    let stationary = stationary_distribution(&chain).ok_or(AnalysisError::SingularSystem)?;
    let gain = stationary
        .iter()
        .zip(policy)
        .enumerate()
        .map(|(s, (pi, &a))| pi * spec.quality(s, a))
        .sum();
    Ok((gain, stationary))
}

/// Optimal gain and policy by relative value iteration over the full MDP.
pub fn relative_value_iteration(spec: &ObjectSpec) -> Result<(f64, Vec<usize>), AnalysisError> {
    let n = spec.n_poses();
    let extremes = extreme_qualities(spec);
    let rows: Vec<[Vec<f64>; 2]> = (0..n)
        .map(|s| {
            extremes[s].map(|q| {
                let mut row = spec.transition_row(s, q);
                row.iter_mut().for_each(|p| *p *= RVI_APERIODICITY);
                row[s] += 1.0 - RVI_APERIODICITY;
                row
            })
        })
        .collect();
    let mut h = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut pick = vec![1usize; n];
    let mut span = f64::INFINITY;
    for _ in 0..RVI_ITERATION_CAP {
        for s in 0..n {
            let q = [0, 1].map(|a| {
                extremes[s][a] + rows[s][a].iter().zip(&h).map(|(p, v)| p * v).sum::<f64>()
            });
            pick[s] = usize::from(q[1] >= q[0]);
            next[s] = q[pick[s]];
        }
        let (lo, hi) = next
            .iter()
            .zip(&h)
            .map(|(a, b)| a - b)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        span = hi - lo;
        let anchor = next[0];
        for (hv, nv) in h.iter_mut().zip(&next) {
            *hv = nv - anchor;
        }
        if span < RVI_TOLERANCE {
            let policy = (0..n)
                .map(|s| {
                    let row = &spec.grasp_quality()[s];
                    if pick[s] == 1 {
                        first_argmax(row)
                    } else {
                        first_argmin(row)
                    }
                })
                .collect();
            return Ok((0.5 * (lo + hi), policy));
        }
    }
    Err(AnalysisError::NonConvergence {
        iterations: RVI_ITERATION_CAP,
        span,
    })
}

fn first_argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Limit average reward of the optimal policy.
///
/// The greedy (best grasp per pose) policy is optimal whenever toppling never
/// reaches another pose more readily than grasp-and-release. If that condition
/// fails, relative value iteration over the full MDP is run as well and the
/// better of the two is returned.
pub fn optimal_average_reward(spec: &ObjectSpec) -> Result<OptimalReward, AnalysisError> {
    let report = spec.assumption_report();
    if let Some(&from) = report.sink_poses.first() {
        let reach = reachable_from(&support(&spec.induced_chain(&spec.greedy_policy())?), from);
        let to = reach.iter().position(|r| !r).unwrap_or(from);
        return Err(AnalysisError::Unreachable { from, to });
    }
    let greedy = spec.greedy_policy();
    let (greedy_gain, greedy_stationary) = policy_gain(spec, &greedy)?;
    let mut result = OptimalReward {
        j_star: greedy_gain,
        policy: greedy,
        stationary: greedy_stationary,
        greedy_gain,
        value_iteration_gain: None,
        greedy_is_optimal: true,
    };
    if report.assumption4_violation > 0.0 {
        let (vi_gain, vi_policy) = relative_value_iteration(spec)?;
        result.value_iteration_gain = Some(vi_gain);
        if vi_gain > greedy_gain + GAIN_TIE {
            let (gain, stationary) = policy_gain(spec, &vi_policy)?;
            result.j_star = gain;
            result.policy = vi_policy;
            result.stationary = stationary;
            result.greedy_is_optimal = false;
        }
    }
    Ok(result)
}

/// Per-pose terms of the per-pose bandit regret decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRegret {
    pub pose: usize,
    /// Fraction of trace timesteps spent in this pose.
    pub occupancy: f64,
    /// Mean reward of grasps attempted in this pose (0 if never visited).
    pub pose_reward: f64,
    /// Stationary probability of this pose under the optimal policy.
    pub optimal_occupancy: f64,
    /// Success probability of the optimal grasp in this pose.
    pub optimal_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretCurve {
    pub optimal_avg_reward: f64,
    /// `J* −` windowed average reward at each timestep.
    pub per_timestep_regret: Vec<f64>,
    /// `J* −` running average reward over timesteps `0..=t`.
    pub cumulative_regret: Vec<f64>,
    pub borges_decomposition: Vec<PoseRegret>,
    /// `Σ p*(s)·g*(s) − Σ p(s)·g(s)` from the decomposition.
    pub borges_regret: f64,
}

pub fn regret_curve(
    trace: &TraceRecord,
    spec: &ObjectSpec,
    window: usize,
) -> Result<RegretCurve, AnalysisError> {
    if trace.steps.is_empty() {
        return Err(AnalysisError::EmptyTrace);
    }
    let optimal = optimal_average_reward(spec)?;
    let j_star = optimal.j_star;
    let rewards = trace.rewards();
    let per_timestep_regret = smooth(&rewards, window.max(1))
        .into_iter()
        .map(|r| j_star - r)
        .collect();
    let mut total = 0.0;
    let cumulative_regret = rewards
        .iter()
        .enumerate()
        .map(|(t, &r)| {
            total += f64::from(r);
            j_star - total / (t + 1) as f64
        })
        .collect();

    let n = spec.n_poses();
    let mut visits = vec![0u64; n];
    let mut successes = vec![0u64; n];
    for step in &trace.steps {
        visits[step.pose] += 1;
        successes[step.pose] += u64::from(step.reward);
    }
    let len = trace.steps.len() as f64;
    let borges_decomposition: Vec<PoseRegret> = (0..n)
        .map(|s| PoseRegret {
            pose: s,
            occupancy: visits[s] as f64 / len,
            pose_reward: if visits[s] == 0 {
                0.0
            } else {
                successes[s] as f64 / visits[s] as f64
            },
            optimal_occupancy: optimal.stationary[s],
            optimal_reward: spec.quality(s, optimal.policy[s]),
        })
        .collect();
    let borges_regret = borges_decomposition
        .iter()
        .map(|p| p.optimal_occupancy * p.optimal_reward - p.occupancy * p.pose_reward)
        .sum();
    Ok(RegretCurve {
        optimal_avg_reward: j_star,
        per_timestep_regret,
        cumulative_regret,
        borges_decomposition,
        borges_regret,
    })
}

/// Upper bound on the expected number of grasps until every pose is visited,
/// `(K/ε)·Σ_j 1 / (1 − Σ_{i<j} λ↓_i)` with landing probabilities sorted
/// from most to least likely.
pub fn cover_time_bound(landing_probs: &[f64], k: usize, epsilon: f64) -> Result<f64, AnalysisError> {
    if epsilon <= 0.0 {
        return Err(AnalysisError::DegenerateBound("epsilon must be positive".into()));
    }
    if landing_probs.iter().any(|&l| l <= 0.0) {
        return Err(AnalysisError::DegenerateBound(
            "every landing probability must be positive".into(),
        ));
    }
    let mut sorted = landing_probs.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut seen = 0.0;
    let mut drops = 0.0;
    for l in sorted {
        drops += 1.0 / (1.0 - seen);
        seen += l;
    }
    Ok(k as f64 / epsilon * drops)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverTimeEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub episodes: usize,
}

/// Default per-episode step cap for [`cover_time_mc`].
pub const COVER_EPISODE_CAP: u64 = 100_000_000;

/// Steps until every pose has been occupied, counting the initial landing as
/// step 1. A fresh policy instance is built for each episode.
pub fn cover_time_episode(
    spec: &ObjectSpec,
    policy: &PolicySpec,
    cap: u64,
    rng: &mut SimRng,
) -> Result<u64, AnalysisError> {
    let n = spec.n_poses();
    let mut learner = policy.build(spec)?;
    let mut seen = vec![false; n];
    let mut pose = spec.sample_landing(rng);
    seen[pose] = true;
    let mut remaining = n - 1;
    let mut steps = 1u64;
    while remaining > 0 {
        if steps >= cap {
            return Err(AnalysisError::EpisodeCap { cap });
        }
        let grasp = learner.decide(pose, steps as usize - 1, rng);
        let out = spec.step(pose, grasp, rng)?;
        learner.update(pose, grasp, out.reward, out.next_pose);
        pose = out.next_pose;
        steps += 1;
        if !seen[pose] {
            seen[pose] = true;
            remaining -= 1;
        }
    }
    Ok(steps)
}

/// Monte Carlo cover time: sample mean and standard error over `episodes`.
/// Episode `i` runs on its own stream seeded from `seed` and `i`.
pub fn cover_time_mc(
    spec: &ObjectSpec,
    policy: &PolicySpec,
    episodes: usize,
    seed: u64,
    cap: u64,
) -> Result<CoverTimeEstimate, AnalysisError> {
    if !spec.assumption_report().sink_poses.is_empty() {
        let report = spec.assumption_report();
        return Err(AnalysisError::Unreachable {
            from: report.sink_poses[0],
            to: report.sink_poses[0],
        });
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for episode in 0..episodes {
        let mut rng = SimRng::seed_from_u64(crate::harness::derive_seed(seed, &[episode as u64]));
        let steps = cover_time_episode(spec, policy, cap, &mut rng)? as f64;
        sum += steps;
        sum_sq += steps * steps;
    }
    let n = episodes as f64;
    let mean = sum / n;
    let variance = if episodes > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(CoverTimeEstimate {
        mean,
        std_error: (variance / n).sqrt(),
        episodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{identity, validate_object, RawObjectSpec};

    fn spec(landing: Vec<f64>, quality: Matrix, topple: Matrix) -> ObjectSpec {
        validate_object(RawObjectSpec {
            label: "a".into(),
            landing_probs: landing,
            grasp_quality: quality,
            topple_matrix: topple,
            prior_quality: None,
        })
        .unwrap()
    }

    #[test]
    fn fair_coin_chain_hits_in_two() {
        let h = hitting_times(&vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!((h[0][1] - 2.0).abs() < 1e-12);
        assert_eq!(h[0][0], 0.0);
    }

    #[test]
    fn absorbing_source_never_hits() {
        let p = vec![vec![1.0, 0.0, 0.0], vec![0.5, 0.0, 0.5], vec![0.5, 0.5, 0.0]];
        let h = hitting_times(&p).unwrap();
        assert!(h[0][1].is_infinite());
        // pose 2 can leak into the absorbing pose 0 before reaching 1
        assert!(h[2][1].is_infinite());
        // h1 = 1 + h2/2, h2 = 1 + h1/2
        assert!((h[1][0] - 2.0).abs() < 1e-12);
        assert!((h[2][0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_pose_has_zero_diameter() {
        let s = spec(vec![1.0], vec![vec![0.3]], vec![vec![1.0]]);
        assert_eq!(diameter(&s).unwrap(), 0.0);
    }

    #[test]
    fn equality_construction_meets_the_bound() {
        let eps = 0.5;
        let landing = vec![0.1, 0.3, 0.6];
        let q = vec![vec![0.0, eps, 0.0], vec![eps, 0.0, 0.0], vec![0.0, 0.0, eps]];
        let s = spec(landing, q, identity(3));
        let d = diameter(&s).unwrap();
        let b = diameter_bound(&s).unwrap();
        assert!((b - 20.0).abs() < 1e-12);
        assert!((d - b).abs() < 1e-6 * b, "{d} vs {b}");
    }

    #[test]
    fn sink_makes_diameter_unreachable() {
        let s = spec(vec![0.5, 0.5], vec![vec![0.5], vec![0.0]], identity(2));
        assert!(matches!(diameter(&s), Err(AnalysisError::Unreachable { from: 1, .. })));
        assert!(matches!(optimal_average_reward(&s), Err(AnalysisError::Unreachable { .. })));
    }

    #[test]
    fn bound_arithmetic() {
        let s = spec(vec![0.25, 0.75], vec![vec![0.5], vec![0.9]], identity(2));
        assert!((diameter_bound(&s).unwrap() - 8.0).abs() < 1e-12);
        let one = spec(vec![1.0], vec![vec![1.0]], vec![vec![1.0]]);
        assert_eq!(diameter_bound(&one).unwrap(), 1.0);
        let zero = spec(vec![0.5, 0.5], vec![vec![0.0], vec![1.0]], identity(2));
        assert!(matches!(diameter_bound(&zero), Err(AnalysisError::DegenerateBound(_))));
    }

    #[test]
    fn single_pose_gain_is_best_quality() {
        let s = spec(vec![1.0], vec![vec![0.2, 0.7, 0.1]], vec![vec![1.0]]);
        let opt = optimal_average_reward(&s).unwrap();
        assert!((opt.j_star - 0.7).abs() < 1e-12);
        assert_eq!(opt.policy, vec![1]);
    }

    #[test]
    fn constant_best_quality_gives_epsilon() {
        let s = spec(
            vec![0.2, 0.5, 0.3],
            vec![vec![0.4, 0.1], vec![0.0, 0.4], vec![0.4, 0.4]],
            identity(3),
        );
        assert!((optimal_average_reward(&s).unwrap().j_star - 0.4).abs() < 1e-12);
    }

    #[test]
    fn value_iteration_runs_when_toppling_dominates() {
        // Failed grasps in pose 0 topple straight into the excellent pose 1,
        // far more readily than grasp-and-release reaches it.
        let s = spec(
            vec![0.99, 0.01],
            vec![vec![0.0, 0.1], vec![1.0, 1.0]],
            vec![vec![0.0, 1.0], vec![0.0, 1.0]],
        );
        assert!(s.assumption_report().assumption4_violation > 0.0);
        let opt = optimal_average_reward(&s).unwrap();
        let vi = opt.value_iteration_gain.expect("value iteration ran");
        // each success lands afresh, so no pose is worth more than one extra
        // reward over a fresh landing and greedy stays optimal
        assert!(opt.greedy_is_optimal);
        assert!((vi - opt.greedy_gain).abs() < 1e-7);
        let (fail_gain, _) = policy_gain(&s, &[0, 0]).unwrap();
        assert!((fail_gain - 1.0 / 1.99).abs() < 1e-9);
        assert!(opt.j_star > fail_gain);
    }

    #[test]
    fn cover_bound_arithmetic() {
        let b = cover_time_bound(&[0.3, 0.7], 10, 0.5).unwrap();
        assert!((b - 20.0 * (1.0 + 10.0 / 3.0)).abs() < 1e-9);
        assert_eq!(cover_time_bound(&[1.0], 7, 0.5).unwrap(), 14.0);
        assert!(cover_time_bound(&[1.0], 7, 0.0).is_err());
        assert!(cover_time_bound(&[1.0, 0.0], 7, 0.5).is_err());
    }

    #[test]
    fn single_pose_covers_immediately() {
        let s = spec(vec![1.0], vec![vec![0.3, 0.0]], vec![vec![1.0]]);
        let est = cover_time_mc(&s, &PolicySpec::Uniform, 50, 3, COVER_EPISODE_CAP).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn cover_time_cap_is_reported() {
        let s = spec(vec![0.999, 0.001], vec![vec![0.01], vec![0.01]], identity(2));
        let err = cover_time_mc(&s, &PolicySpec::Oracle, 5, 1, 10).unwrap_err();
        assert_eq!(err, AnalysisError::EpisodeCap { cap: 10 });
    }
}
