//! UCRL2: optimistic tabular RL over the full grasp MDP.
//!
//! Episodes are planned by extended value iteration over the set of MDPs
//! consistent with the observed counts; an episode ends once some state-action
//! pair has doubled its visit count. Poses enter the state space only when they
//! are first observed, and confidence sets range over discovered poses only.

use std::collections::HashMap;

use rand::Rng;
use thiserror::Error;

use crate::policies::{argmax_random_ties, Policy};
use crate::SimRng;

pub const DEFAULT_CONFIDENCE_DELTA: f64 = 0.05;
pub const EVI_SWEEP_CAP: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Ucrl2Error {
    #[error("extended value iteration did not converge in {sweeps} sweeps (span {span})")]
    NonConvergence { sweeps: usize, span: f64 },
}

/// Optimistic model for one state-action pair: point estimates plus radii.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionModel {
    pub reward: f64,
    pub reward_radius: f64,
    /// Empirical next-state distribution (all zeros when unvisited).
    pub transition: Vec<f64>,
    /// L1 radius around `transition`.
    pub transition_radius: f64,
}

/// Plausible-MDP confidence set, indexed `[state][action]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSet {
    pub actions: Vec<Vec<ActionModel>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EviSolution {
    pub policy: Vec<usize>,
    /// Optimistic average reward (midpoint of the last Bellman increment).
    pub gain: f64,
    pub sweeps: usize,
}

/// Transition in the L1 ball around `p_hat` maximizing `p · u`, where
/// `order` lists states by decreasing `u`.
fn optimistic_transition(p_hat: &[f64], radius: f64, order: &[usize]) -> Vec<f64> {
    let mut p = p_hat.to_vec();
    let top = order[0];
    p[top] = (p_hat[top] + radius / 2.0).min(1.0);
    let mut excess: f64 = p.iter().sum::<f64>() - 1.0;
    for &s in order.iter().rev() {
        if excess <= 0.0 {
            break;
        }
        if s == top {
            continue;
        }
        let cut = excess.min(p[s]);
        p[s] -= cut;
        excess -= cut;
    }
    p
}

/// Extended value iteration: iterates the optimistic Bellman operator until
/// the span of successive differences drops below `stop`.
pub fn extended_value_iteration(
    set: &ConfidenceSet,
    stop: f64,
    cap: usize,
    rng: &mut SimRng,
) -> Result<EviSolution, Ucrl2Error> {
    let n = set.actions.len();
    let mut u = vec![0.0f64; n];
    let mut next = vec![0.0; n];
    let mut q: Vec<Vec<f64>> = set.actions.iter().map(|a| vec![0.0; a.len()]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut span = f64::INFINITY;
    for sweep in 1..=cap {
        order.sort_by(|&a, &b| u[b].total_cmp(&u[a]).then(a.cmp(&b)));
        for s in 0..n {
            for (a, model) in set.actions[s].iter().enumerate() {
                let r = (model.reward + model.reward_radius).min(1.0);
                let p = optimistic_transition(&model.transition, model.transition_radius, &order);
                q[s][a] = r + p.iter().zip(&u).map(|(pi, ui)| pi * ui).sum::<f64>();
            }
            next[s] = q[s].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        let (lo, hi) = next
            .iter()
            .zip(&u)
            .map(|(a, b)| a - b)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        span = hi - lo;
        let base = next.iter().copied().fold(f64::INFINITY, f64::min);
        for (ui, ni) in u.iter_mut().zip(&next) {
            *ui = ni - base;
        }
        if span < stop {
            let policy = q
                .iter()
                .map(|row| argmax_random_ties(row.iter().copied(), rng))
                .collect();
            return Ok(EviSolution {
                policy,
                gain: 0.5 * (lo + hi),
                sweeps: sweep,
            });
        }
    }
    Err(Ucrl2Error::NonConvergence { sweeps: cap, span })
}

/// UCRL2 learner state with lazily discovered poses.
#[derive(Debug, Clone)]
pub struct Ucrl2 {
    name: String,
    k: usize,
    delta: f64,
    /// Pose label of each internal state, in discovery order.
    poses: Vec<usize>,
    index: HashMap<usize, usize>,
    /// Visit counts accumulated before the current episode.
    prior_counts: Vec<Vec<u64>>,
    /// Visit counts within the current episode.
    episode_counts: Vec<Vec<u64>>,
    reward_sums: Vec<Vec<f64>>,
    /// `[state][action][next state]`, columns grow with discovery.
    transition_counts: Vec<Vec<Vec<u64>>>,
    episode_policy: Vec<Option<usize>>,
    total_steps: u64,
    needs_plan: bool,
    episodes: usize,
    failed_plans: usize,
}

impl Ucrl2 {
    pub fn new(k: usize, delta: f64) -> Self {
        let name = if delta == DEFAULT_CONFIDENCE_DELTA {
            "ucrl2".to_string()
        } else {
            format!("ucrl2:{delta}")
        };
        Self {
            name,
            k,
            delta,
            poses: Vec::new(),
            index: HashMap::new(),
            prior_counts: Vec::new(),
            episode_counts: Vec::new(),
            reward_sums: Vec::new(),
            transition_counts: Vec::new(),
            episode_policy: Vec::new(),
            total_steps: 0,
            needs_plan: true,
            episodes: 0,
            failed_plans: 0,
        }
    }

    fn state_of(&mut self, pose: usize) -> usize {
        if let Some(&s) = self.index.get(&pose) {
            return s;
        }
        let s = self.poses.len();
        self.poses.push(pose);
        self.index.insert(pose, s);
        for rows in &mut self.transition_counts {
            for row in rows.iter_mut() {
                row.push(0);
            }
        }
        self.prior_counts.push(vec![0; self.k]);
        self.episode_counts.push(vec![0; self.k]);
        self.reward_sums.push(vec![0.0; self.k]);
        self.transition_counts.push(vec![vec![0; s + 1]; self.k]);
        self.episode_policy.push(None);
        self.needs_plan = true;
        s
    }

    pub fn known_poses(&self) -> &[usize] {
        &self.poses
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }

    pub fn failed_plans(&self) -> usize {
        self.failed_plans
    }

    /// Total visits of `(pose, grasp)` (previous episodes plus current).
    pub fn visits(&self, pose: usize, grasp: usize) -> u64 {
        self.index
            .get(&pose)
            .map_or(0, |&s| self.prior_counts[s][grasp] + self.episode_counts[s][grasp])
    }

    pub fn reward_sum(&self, pose: usize, grasp: usize) -> f64 {
        self.index.get(&pose).map_or(0.0, |&s| self.reward_sums[s][grasp])
    }

    /// Observed transitions out of `(pose, grasp)` keyed by next pose.
    pub fn transitions(&self, pose: usize, grasp: usize) -> HashMap<usize, u64> {
        let Some(&s) = self.index.get(&pose) else {
            return HashMap::new();
        };
        self.transition_counts[s][grasp]
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(t, &c)| (self.poses[t], c))
            .collect()
    }

    /// Current episode's grasp for `pose`, if planned.
    pub fn episode_action(&self, pose: usize) -> Option<usize> {
        self.index.get(&pose).and_then(|&s| self.episode_policy[s])
    }

    /// Confidence set from the pre-episode counts over discovered poses.
    pub fn confidence_set(&self) -> ConfidenceSet {
        let states = self.poses.len() as f64;
        let actions = self.k as f64;
        let t = self.total_steps.max(1) as f64;
        let reward_log = (2.0 * states * actions * t / self.delta).ln();
        let transition_log = (2.0 * actions * t / self.delta).ln();
        let actions = (0..self.poses.len())
            .map(|s| {
                (0..self.k)
                    .map(|a| {
                        let visits = self.prior_counts[s][a];
                        let n = visits.max(1) as f64;
                        let transition = if visits == 0 {
                            vec![0.0; self.poses.len()]
                        } else {
                            self.transition_counts[s][a]
                                .iter()
                                .map(|&c| c as f64 / n)
                                .collect()
                        };
                        ActionModel {
                            reward: if visits == 0 { 0.0 } else { self.reward_sums[s][a] / n },
                            reward_radius: (7.0 * reward_log / (2.0 * n)).sqrt(),
                            transition,
                            transition_radius: (14.0 * states * transition_log / n).sqrt(),
                        }
                    })
                    .collect()
            })
            .collect();
        ConfidenceSet { actions }
    }

    /// Plans a new episode policy over the discovered poses, keyed by pose.
    pub fn plan_episode(&self, rng: &mut SimRng) -> Result<HashMap<usize, usize>, Ucrl2Error> {
        let stop = 1.0 / (self.total_steps.max(1) as f64).sqrt();
        let solution = extended_value_iteration(&self.confidence_set(), stop, EVI_SWEEP_CAP, rng)?;
        Ok(self.poses.iter().copied().zip(solution.policy).collect())
    }

    fn start_episode(&mut self, rng: &mut SimRng) {
        for (prior, current) in self.prior_counts.iter_mut().zip(&mut self.episode_counts) {
            for (p, c) in prior.iter_mut().zip(current.iter_mut()) {
                *p += *c;
                *c = 0;
            }
        }
        match self.plan_episode(rng) {
            Ok(plan) => {
                for (pose, grasp) in plan {
                    self.episode_policy[self.index[&pose]] = Some(grasp);
                }
            }
            // keep the previous episode's choices
            Err(_) => self.failed_plans += 1,
        }
        self.episodes += 1;
        self.needs_plan = false;
    }

    /// Records one transition. Returns true when the doubling criterion ends
    /// the episode (the next decision replans).
    pub fn ucrl2_step(&mut self, pose: usize, grasp: usize, reward: u8, next_pose: usize) -> bool {
        let s = self.state_of(pose);
        let next = self.state_of(next_pose);
        self.total_steps += 1;
        self.episode_counts[s][grasp] += 1;
        self.reward_sums[s][grasp] += f64::from(reward);
        self.transition_counts[s][grasp][next] += 1;
        if self.episode_counts[s][grasp] >= self.prior_counts[s][grasp].max(1) {
            self.needs_plan = true;
        }
        self.needs_plan
    }
}

impl Policy for Ucrl2 {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&mut self, pose: usize, _t: usize, rng: &mut SimRng) -> usize {
        let s = self.state_of(pose);
        if self.needs_plan {
            self.start_episode(rng);
        }
        match self.episode_policy[s] {
            Some(a) => a,
            None => rng.random_range(0..self.k),
        }
    }

    fn update(&mut self, pose: usize, grasp: usize, reward: u8, next_pose: usize) {
        self.ucrl2_step(pose, grasp, reward, next_pose);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> SimRng {
        SimRng::seed_from_u64(11)
    }

    #[test]
    fn optimistic_transition_shifts_mass_to_best_state() {
        let p = optimistic_transition(&[0.5, 0.3, 0.2], 0.4, &[2, 0, 1]);
        assert!((p[2] - 0.4).abs() < 1e-12);
        assert!((p[1] - 0.1).abs() < 1e-12);
        assert!((p[0] - 0.5).abs() < 1e-12);
        let vacuous = optimistic_transition(&[0.0, 0.0], 10.0, &[1, 0]);
        assert_eq!(vacuous, vec![0.0, 1.0]);
    }

    #[test]
    fn single_pose_prefers_higher_empirical_mean() {
        let mut learner = Ucrl2::new(2, DEFAULT_CONFIDENCE_DELTA);
        for i in 0..100u32 {
            learner.ucrl2_step(0, 0, u8::from(i < 90), 0);
            learner.ucrl2_step(0, 1, u8::from(i < 10), 0);
        }
        let mut r = rng();
        learner.start_episode(&mut r);
        assert_eq!(learner.episode_action(0), Some(0));
    }

    #[test]
    fn no_data_is_fully_optimistic() {
        let mut learner = Ucrl2::new(4, DEFAULT_CONFIDENCE_DELTA);
        let mut r = rng();
        learner.decide(0, 0, &mut r);
        let set = learner.confidence_set();
        for model in &set.actions[0] {
            assert_eq!((model.reward + model.reward_radius).min(1.0), 1.0);
        }
        let mut seen = [false; 4];
        for seed in 0..64 {
            let mut fresh = Ucrl2::new(4, DEFAULT_CONFIDENCE_DELTA);
            seen[fresh.decide(0, 0, &mut SimRng::seed_from_u64(seed))] = true;
        }
        assert!(seen.iter().all(|&s| s), "every arm admissible: {seen:?}");
    }

    #[test]
    fn doubling_criterion() {
        let mut learner = Ucrl2::new(2, DEFAULT_CONFIDENCE_DELTA);
        let mut r = rng();
        learner.decide(0, 0, &mut r);
        assert!(learner.ucrl2_step(0, 0, 1, 0), "fresh pair ends the episode at once");
        for _ in 0..7 {
            learner.ucrl2_step(0, 0, 1, 0);
        }
        learner.decide(0, 8, &mut r);
        assert_eq!(learner.prior_counts[0][0], 8);
        for i in 0..7 {
            assert!(!learner.ucrl2_step(0, 0, 1, 0), "step {i}");
        }
        assert!(learner.ucrl2_step(0, 0, 1, 0));
    }

    #[test]
    fn counts_are_conserved() {
        let mut learner = Ucrl2::new(3, DEFAULT_CONFIDENCE_DELTA);
        let mut r = rng();
        let mut pose = 0;
        for t in 0..2000 {
            let a = learner.decide(pose, t, &mut r);
            let next = r.random_range(0..4);
            learner.update(pose, a, u8::from(r.random::<f64>() < 0.3), next);
            pose = next;
            for &p in learner.known_poses() {
                for g in 0..3 {
                    let moved: u64 = learner.transitions(p, g).values().sum();
                    assert_eq!(moved, learner.visits(p, g));
                    assert!(learner.reward_sum(p, g) <= learner.visits(p, g) as f64);
                }
            }
        }
        assert_eq!(learner.known_poses().len(), 4);
    }
}
