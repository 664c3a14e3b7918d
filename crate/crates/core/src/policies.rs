//! Grasp selection policies behind one decide/update contract.
//!
//! The per-pose bandit meta-policy ([`Borges`]) keeps one independent bandit per
//! stable pose and only creates it the first time the pose is encountered.
//! Baselines: planner-prior greedy, uniform random, ground-truth oracle and
//! UCRL2 (see [`crate::ucrl2`]).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{first_argmax, ObjectSpec};
use crate::ucrl2::{Ucrl2, DEFAULT_CONFIDENCE_DELTA};
use crate::SimRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("policy `{0}` needs prior grasp qualities but the object has none")]
    MissingPrior(String),
    #[error("unknown policy `{0}` (expected ucb, ts, ts-prior:<strength>, prior-greedy:<p>, uniform, oracle, ucrl2[:delta])")]
    Unknown(String),
    #[error("bad parameter for policy `{name}`: {reason}")]
    BadParameter { name: String, reason: String },
}

/// Uniform contract shared by every grasp policy.
///
/// `t` is the global timestep (0-based). Policies are exclusively owned by one
/// trial and must be deterministic given their state and the random stream.
pub trait Policy: Send {
    fn name(&self) -> &str;
    fn decide(&mut self, pose: usize, t: usize, rng: &mut SimRng) -> usize;
    fn update(&mut self, pose: usize, grasp: usize, reward: u8, next_pose: usize);
}

/// Index of a maximal value, ties broken uniformly at random.
///
/// Reservoir-samples among the maxima so the random stream is only touched when
/// a tie actually occurs.
pub fn argmax_random_ties<R: Rng + ?Sized>(
    values: impl IntoIterator<Item = f64>,
    rng: &mut R,
) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    let mut ties = 0u32;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_value {
            best = i;
            best_value = v;
            ties = 1;
        } else if v == best_value {
            ties += 1;
            if rng.random_range(0..ties) == 0 {
                best = i;
            }
        }
    }
    best
}

/// Beta posterior over one grasp's success probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaArm {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for BetaArm {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

impl BetaArm {
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn update(&mut self, reward: u8) {
        if reward > 0 {
            self.alpha += 1.0;
        } else {
            self.beta += 1.0;
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // inverse-CDF draws when one shape parameter is 1
        if self.alpha == 1.0 {
            let u: f64 = rng.random();
            return if self.beta == 1.0 { u } else { 1.0 - u.powf(1.0 / self.beta) };
        }
        if self.beta == 1.0 {
            return rng.random::<f64>().powf(1.0 / self.alpha);
        }
        Beta::new(self.alpha, self.beta)
            .expect("beta parameters stay positive")
            .sample(rng)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UcbArm {
    pub pulls: u64,
    pub successes: u64,
}

impl UcbArm {
    pub fn update(&mut self, reward: u8) {
        self.pulls += 1;
        self.successes += u64::from(reward > 0);
    }

    /// UCB1 index `mean + sqrt(2 ln t / pulls)`; only defined once pulled.
    pub fn index(&self, t_pose: u64) -> f64 {
        let n = self.pulls as f64;
        self.successes as f64 / n + (2.0 * (t_pose as f64).ln() / n).sqrt()
    }
}

/// UCB1 arm choice at pose-local time `t_pose` (1-based round number).
/// Unpulled arms come first.
pub fn ucb1_decide<R: Rng + ?Sized>(arms: &[UcbArm], t_pose: u64, rng: &mut R) -> usize {
    debug_assert!(t_pose >= 1);
    let unpulled = arms.iter().filter(|a| a.pulls == 0).count();
    if unpulled > 0 {
        let pick = rng.random_range(0..unpulled);
        return arms
            .iter()
            .enumerate()
            .filter(|(_, a)| a.pulls == 0)
            .nth(pick)
            .map(|(i, _)| i)
            .expect("pick < unpulled");
    }
    argmax_random_ties(arms.iter().map(|a| a.index(t_pose)), rng)
}

/// Thompson sampling: one posterior draw per arm, argmax wins.
pub fn thompson_decide<R: Rng + ?Sized>(arms: &[BetaArm], rng: &mut R) -> usize {
    let mut draws = Vec::with_capacity(arms.len());
    draws.extend(arms.iter().map(|a| a.sample(rng)));
    argmax_random_ties(draws, rng)
}

/// Beta arms seeded from prior qualities: `Beta(1 + s·q, 1 + s·(1 − q))`.
/// Zero strength recovers the uniform prior.
pub fn install_prior(prior_quality: &[f64], strength: f64) -> Vec<BetaArm> {
    prior_quality
        .iter()
        .map(|&q| BetaArm {
            alpha: 1.0 + strength * q,
            beta: 1.0 + strength * (1.0 - q),
        })
        .collect()
}

/// Greedy on prior quality with probability `1 − explore_prob`, otherwise a
/// uniformly random grasp.
pub fn prior_greedy_decide<R: Rng + ?Sized>(
    prior_quality: &[f64],
    explore_prob: f64,
    rng: &mut R,
) -> usize {
    if explore_prob > 0.0 && rng.random::<f64>() < explore_prob {
        rng.random_range(0..prior_quality.len())
    } else {
        argmax_random_ties(prior_quality.iter().copied(), rng)
    }
}

/// Best ground-truth grasp, lowest index on ties.
pub fn oracle_decide(spec: &ObjectSpec, pose: usize) -> usize {
    first_argmax(&spec.grasp_quality()[pose])
}

/// Learner for the grasps of a single pose.
pub trait PoseBandit: Send {
    fn select(&mut self, rng: &mut SimRng) -> usize;
    fn record(&mut self, grasp: usize, reward: u8);
}

#[derive(Debug, Clone)]
pub struct UcbPose {
    pub arms: Vec<UcbArm>,
    rounds: u64,
}

impl UcbPose {
    pub fn new(k: usize) -> Self {
        Self {
            arms: vec![UcbArm::default(); k],
            rounds: 0,
        }
    }
}

impl PoseBandit for UcbPose {
    fn select(&mut self, rng: &mut SimRng) -> usize {
        ucb1_decide(&self.arms, self.rounds + 1, rng)
    }

    fn record(&mut self, grasp: usize, reward: u8) {
        self.rounds += 1;
        self.arms[grasp].update(reward);
    }
}

#[derive(Debug, Clone)]
pub struct ThompsonPose {
    pub arms: Vec<BetaArm>,
}

impl PoseBandit for ThompsonPose {
    fn select(&mut self, rng: &mut SimRng) -> usize {
        thompson_decide(&self.arms, rng)
    }

    fn record(&mut self, grasp: usize, reward: u8) {
        self.arms[grasp].update(reward);
    }
}

type PoseFactory<B> = Box<dyn Fn(usize) -> B + Send>;

/// One independent bandit per pose, created lazily on first visit.
pub struct Borges<B> {
    name: String,
    factory: PoseFactory<B>,
    poses: HashMap<usize, B>,
}

impl<B: PoseBandit> Borges<B> {
    pub fn new(name: impl Into<String>, factory: impl Fn(usize) -> B + Send + 'static) -> Self {
        Self {
            name: name.into(),
            factory: Box::new(factory),
            poses: HashMap::new(),
        }
    }

    /// Bandit for `pose`, if the pose has been visited.
    pub fn pose_state(&self, pose: usize) -> Option<&B> {
        self.poses.get(&pose)
    }

    pub fn discovered_poses(&self) -> usize {
        self.poses.len()
    }
}

impl<B: PoseBandit> Policy for Borges<B> {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&mut self, pose: usize, _t: usize, rng: &mut SimRng) -> usize {
        let factory = &self.factory;
        self.poses
            .entry(pose)
            .or_insert_with(|| factory(pose))
            .select(rng)
    }

    fn update(&mut self, pose: usize, grasp: usize, reward: u8, _next_pose: usize) {
        if let Some(bandit) = self.poses.get_mut(&pose) {
            bandit.record(grasp, reward);
        }
    }
}

/// Planner-prior greedy with epsilon exploration. Never learns.
pub struct PriorGreedy {
    name: String,
    prior: Vec<Vec<f64>>,
    explore_prob: f64,
}

impl Policy for PriorGreedy {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&mut self, pose: usize, _t: usize, rng: &mut SimRng) -> usize {
        prior_greedy_decide(&self.prior[pose], self.explore_prob, rng)
    }

    fn update(&mut self, _: usize, _: usize, _: u8, _: usize) {}
}

pub struct UniformRandom {
    k: usize,
}

impl Policy for UniformRandom {
    fn name(&self) -> &str {
        "uniform"
    }

    fn decide(&mut self, _pose: usize, _t: usize, rng: &mut SimRng) -> usize {
        rng.random_range(0..self.k)
    }

    fn update(&mut self, _: usize, _: usize, _: u8, _: usize) {}
}

pub struct Oracle {
    best: Vec<usize>,
}

impl Oracle {
    pub fn new(spec: &ObjectSpec) -> Self {
        Self {
            best: (0..spec.n_poses()).map(|s| oracle_decide(spec, s)).collect(),
        }
    }
}

impl Policy for Oracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn decide(&mut self, pose: usize, _t: usize, _rng: &mut SimRng) -> usize {
        self.best[pose]
    }

    fn update(&mut self, _: usize, _: usize, _: u8, _: usize) {}
}

/// Policy selector as written in experiment configs and on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicySpec {
    Ucb,
    Thompson,
    ThompsonPrior { strength: f64 },
    PriorGreedy { explore_prob: f64 },
    Uniform,
    Oracle,
    Ucrl2 { delta: f64 },
}

impl PolicySpec {
    /// Fresh policy instance for one trial on `spec`.
    pub fn build(&self, spec: &ObjectSpec) -> Result<Box<dyn Policy>, PolicyError> {
        let k = spec.grasps_per_pose();
        let name = self.to_string();
        Ok(match *self {
            PolicySpec::Ucb => Box::new(Borges::new(name, move |_| UcbPose::new(k))),
            PolicySpec::Thompson => Box::new(Borges::new(name, move |_| ThompsonPose {
                arms: vec![BetaArm::default(); k],
            })),
            PolicySpec::ThompsonPrior { strength } => {
                let prior = spec
                    .prior_quality()
                    .ok_or_else(|| PolicyError::MissingPrior(name.clone()))?
                    .clone();
                Box::new(Borges::new(name, move |pose| ThompsonPose {
                    arms: install_prior(&prior[pose], strength),
                }))
            }
            PolicySpec::PriorGreedy { explore_prob } => {
                let prior = spec
                    .prior_quality()
                    .ok_or_else(|| PolicyError::MissingPrior(name.clone()))?
                    .clone();
                Box::new(PriorGreedy {
                    name,
                    prior,
                    explore_prob,
                })
            }
            PolicySpec::Uniform => Box::new(UniformRandom { k }),
            PolicySpec::Oracle => Box::new(Oracle::new(spec)),
            PolicySpec::Ucrl2 { delta } => Box::new(Ucrl2::new(k, delta)),
        })
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Ucb => write!(f, "ucb"),
            PolicySpec::Thompson => write!(f, "ts"),
            PolicySpec::ThompsonPrior { strength } => write!(f, "ts-prior:{strength}"),
            PolicySpec::PriorGreedy { explore_prob } => write!(f, "prior-greedy:{explore_prob}"),
            PolicySpec::Uniform => write!(f, "uniform"),
            PolicySpec::Oracle => write!(f, "oracle"),
            PolicySpec::Ucrl2 { delta } if *delta == DEFAULT_CONFIDENCE_DELTA => write!(f, "ucrl2"),
            PolicySpec::Ucrl2 { delta } => write!(f, "ucrl2:{delta}"),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let number = |lo: f64, hi: f64, lo_open: bool| -> Result<f64, PolicyError> {
            let raw = arg.ok_or_else(|| PolicyError::BadParameter {
                name: s.into(),
                reason: "missing `:<value>` suffix".into(),
            })?;
            let v: f64 = raw.parse().map_err(|_| PolicyError::BadParameter {
                name: s.into(),
                reason: format!("`{raw}` is not a number"),
            })?;
            let above = if lo_open { v > lo } else { v >= lo };
            if !(above && v <= hi) {
                return Err(PolicyError::BadParameter {
                    name: s.into(),
                    reason: format!("{v} out of range"),
                });
            }
            Ok(v)
        };
        let no_arg = |p: PolicySpec| match arg {
            None => Ok(p),
            Some(_) => Err(PolicyError::BadParameter {
                name: s.into(),
                reason: "takes no parameter".into(),
            }),
        };
        match head {
            "ucb" => no_arg(PolicySpec::Ucb),
            "ts" => no_arg(PolicySpec::Thompson),
            "uniform" => no_arg(PolicySpec::Uniform),
            "oracle" => no_arg(PolicySpec::Oracle),
            "ts-prior" => Ok(PolicySpec::ThompsonPrior {
                strength: number(0.0, f64::MAX, false)?,
            }),
            "prior-greedy" => Ok(PolicySpec::PriorGreedy {
                explore_prob: number(0.0, 1.0, false)?,
            }),
            "ucrl2" => Ok(PolicySpec::Ucrl2 {
                delta: match arg {
                    None => DEFAULT_CONFIDENCE_DELTA,
                    Some(_) => number(0.0, 1.0, true)?,
                },
            }),
            _ => Err(PolicyError::Unknown(s.into())),
        }
    }
}

impl Serialize for PolicySpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PolicySpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{identity, validate_object, RawObjectSpec};
    use rand::SeedableRng;

    fn rng(seed: u64) -> SimRng {
        SimRng::seed_from_u64(seed)
    }

    fn two_pose_spec(prior: Option<Vec<Vec<f64>>>) -> ObjectSpec {
        validate_object(RawObjectSpec {
            label: "p".into(),
            landing_probs: vec![0.5, 0.5],
            grasp_quality: vec![vec![0.2, 0.7, 0.7], vec![0.0, 0.0, 0.0]],
            topple_matrix: identity(2),
            prior_quality: prior,
        })
        .unwrap()
    }

    #[test]
    fn ucb_plays_unpulled_arms_uniformly_first() {
        let arms = vec![UcbArm::default(); 4];
        let mut r = rng(1);
        let mut counts = [0; 4];
        for _ in 0..4000 {
            counts[ucb1_decide(&arms, 1, &mut r)] += 1;
        }
        assert!(counts.iter().all(|&c| (850..1150).contains(&c)), "{counts:?}");
        let partly = [
            UcbArm { pulls: 3, successes: 3 },
            UcbArm::default(),
            UcbArm { pulls: 1, successes: 0 },
        ];
        assert_eq!(ucb1_decide(&partly, 5, &mut r), 1);
    }

    #[test]
    fn ucb_index_arithmetic() {
        let arms = [
            UcbArm { pulls: 1, successes: 1 },
            UcbArm { pulls: 1, successes: 0 },
        ];
        assert!((arms[0].index(3) - 2.482).abs() < 1e-3);
        assert!((arms[1].index(3) - 1.482).abs() < 1e-3);
        assert_eq!(ucb1_decide(&arms, 3, &mut rng(2)), 0);
    }

    #[test]
    fn ucb_ties_are_random() {
        let arms = [UcbArm { pulls: 2, successes: 1 }; 2];
        let mut r = rng(3);
        let zeros = (0..2000).filter(|_| ucb1_decide(&arms, 5, &mut r) == 0).count();
        assert!((850..1150).contains(&zeros));
    }

    #[test]
    fn ucb_learns_the_best_arm() {
        let phi = [0.9, 0.1, 0.0];
        let mut pose = UcbPose::new(3);
        let mut r = rng(4);
        let mut late_best = 0;
        for step in 0..10_000 {
            let a = pose.select(&mut r);
            let reward = u8::from(r.random::<f64>() < phi[a]);
            pose.record(a, reward);
            if step >= 9_000 && a == 0 {
                late_best += 1;
            }
        }
        assert!(late_best > 900, "best arm chosen {late_best}/1000");
    }

    #[test]
    fn thompson_single_arm_and_concentrated_posteriors() {
        let mut r = rng(5);
        assert_eq!(thompson_decide(&[BetaArm { alpha: 3.0, beta: 9.0 }], &mut r), 0);
        let arms = [
            BetaArm { alpha: 1000.0, beta: 1.0 },
            BetaArm { alpha: 1.0, beta: 1000.0 },
        ];
        let wins = (0..10_000).filter(|_| thompson_decide(&arms, &mut r) == 0).count();
        assert!(wins as f64 / 1e4 > 0.999);
    }

    #[test]
    fn conjugate_update() {
        let mut arm = BetaArm::default();
        arm.update(1);
        assert_eq!(arm, BetaArm { alpha: 2.0, beta: 1.0 });
        arm.update(0);
        assert_eq!(arm, BetaArm { alpha: 2.0, beta: 2.0 });
    }

    #[test]
    fn prior_installation() {
        assert_eq!(install_prior(&[0.5], 5.0), vec![BetaArm { alpha: 3.5, beta: 3.5 }]);
        assert_eq!(install_prior(&[0.3], 0.0), vec![BetaArm::default()]);
        let sure = install_prior(&[1.0], 5.0)[0];
        assert_eq!(sure, BetaArm { alpha: 6.0, beta: 1.0 });
        assert!((sure.mean() - 6.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn prior_greedy_extremes() {
        let q = [0.1, 0.9, 0.3];
        let mut r = rng(6);
        assert!((0..1000).all(|_| prior_greedy_decide(&q, 0.0, &mut r) == 1));
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[prior_greedy_decide(&q, 1.0, &mut r)] += 1;
        }
        let p = 1.0 / 3.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn oracle_tie_break_and_degenerate_pose() {
        let spec = two_pose_spec(None);
        assert_eq!(oracle_decide(&spec, 0), 1);
        assert_eq!(oracle_decide(&spec, 1), 0);
    }

    #[test]
    fn prior_policies_require_a_prior() {
        let spec = two_pose_spec(None);
        for p in ["ts-prior:5", "prior-greedy:0.05"] {
            let err = p.parse::<PolicySpec>().unwrap().build(&spec).err().unwrap();
            assert!(matches!(err, PolicyError::MissingPrior(_)));
        }
        let with = two_pose_spec(Some(vec![vec![0.0, 0.0, 1.0]; 2]));
        assert!("ts-prior:5".parse::<PolicySpec>().unwrap().build(&with).is_ok());
    }

    #[test]
    fn borges_allocates_pose_state_lazily_and_isolated() {
        let mut policy = Borges::new("ts", |_| ThompsonPose {
            arms: vec![BetaArm::default(); 3],
        });
        let mut r = rng(7);
        assert_eq!(policy.discovered_poses(), 0);
        let a = policy.decide(4, 0, &mut r);
        assert_eq!(policy.discovered_poses(), 1);
        for _ in 0..50 {
            policy.update(4, a, 1, 4);
        }
        assert!(policy.pose_state(2).is_none());
        policy.decide(2, 1, &mut r);
        assert_eq!(policy.pose_state(2).unwrap().arms, vec![BetaArm::default(); 3]);
    }

    #[test]
    fn decide_never_exceeds_k() {
        let spec = two_pose_spec(Some(vec![vec![0.3, 0.2, 0.1]; 2]));
        let mut r = rng(8);
        for name in ["ucb", "ts", "ts-prior:5", "prior-greedy:0.05", "uniform", "oracle", "ucrl2"] {
            let mut policy = name.parse::<PolicySpec>().unwrap().build(&spec).unwrap();
            let mut pose = 0;
            for t in 0..300 {
                let a = policy.decide(pose, t, &mut r);
                assert!(a < 3, "{name} returned {a}");
                let out = spec.step(pose, a, &mut r).unwrap();
                policy.update(pose, a, out.reward, out.next_pose);
                pose = out.next_pose;
            }
        }
    }

    #[test]
    fn policy_names_round_trip() {
        for name in ["ucb", "ts", "ts-prior:5", "prior-greedy:0.05", "uniform", "oracle", "ucrl2", "ucrl2:0.1"] {
            let spec: PolicySpec = name.parse().unwrap();
            assert_eq!(spec.to_string(), name);
        }
        assert!(matches!("bogus".parse::<PolicySpec>(), Err(PolicyError::Unknown(_))));
        assert!("prior-greedy:1.5".parse::<PolicySpec>().is_err());
        assert!("ts-prior".parse::<PolicySpec>().is_err());
        assert!("ts:3".parse::<PolicySpec>().is_err());
        assert!("ucrl2:0".parse::<PolicySpec>().is_err());
    }

    #[test]
    fn unit_shape_beta_draws_follow_the_beta_law() {
        use statrs::distribution::{Beta as BetaLaw, ContinuousCDF};
        let mut r = rng(11);
        for (a, b) in [(1.0, 7.0), (5.0, 1.0), (1.0, 1.0)] {
            let arm = BetaArm { alpha: a, beta: b };
            let law = BetaLaw::new(a, b).unwrap();
            let n = 20_000;
            let mut draws: Vec<f64> = (0..n).map(|_| arm.sample(&mut r)).collect();
            draws.sort_by(f64::total_cmp);
            let ks = draws
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = law.cdf(x);
                    (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
                })
                .fold(0.0, f64::max);
            // 0.1% critical value of the one-sample KS statistic
            assert!(ks < 1.95 / (n as f64).sqrt(), "Beta({a},{b}) ks {ks}");
        }
    }
}
