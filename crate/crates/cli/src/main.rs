//! `exgrasp` command-line entry point.
//!
//! Exit codes: 0 success, 1 runtime or domain failure, 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;

use exgrasp::analysis::{
    cover_time_bound, cover_time_mc, diameter, diameter_bound, optimal_average_reward, COVER_EPISODE_CAP,
};
use exgrasp::harness::{
    run_experiment, write_curves_csv, write_summary_csv, ExperimentConfig, ExperimentResult, ObjectSource,
    RunOptions, SweepGrid,
};
use exgrasp::synth::{gen_prior, gen_random_object, gen_sensitivity_object, RandomObjectParams, SensitivityParams};
use exgrasp::{ObjectSpec, PolicySpec, SimRng};

#[derive(Parser)]
#[command(name = "exgrasp", version, about = "Exploratory grasping experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic object file.
    GenObject(GenObjectArgs),
    /// Run policies on objects and write curve and summary CSVs.
    Run(RunArgs),
    /// Print structural quantities of an object.
    Analyze(AnalyzeArgs),
    /// Run the harness over a grid of sensitivity objects.
    Sweep(SweepArgs),
    /// Cover-time bound and Monte Carlo estimate.
    CoverTime(CoverTimeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Sensitivity,
    Random,
}

#[derive(Args)]
struct GenObjectArgs {
    #[arg(long, value_enum)]
    family: Family,
    /// Number of poses.
    #[arg(long)]
    n: usize,
    /// Grasps per pose.
    #[arg(long)]
    k: usize,
    /// Quality of the single good grasp per pose (sensitivity family).
    #[arg(long, required_if_eq("family", "sensitivity"))]
    eps: Option<f64>,
    /// Landing probability of the rare pose (sensitivity family).
    #[arg(long, required_if_eq("family", "sensitivity"))]
    lambda_min: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    topple_strength: f64,
    #[arg(long)]
    dirichlet_alpha: Option<f64>,
    #[arg(long)]
    quality_alpha: Option<f64>,
    #[arg(long)]
    quality_beta: Option<f64>,
    #[arg(long)]
    eps_floor: Option<f64>,
    #[arg(long)]
    topple_density: Option<usize>,
    #[arg(long)]
    topple_mass: Option<f64>,
    /// Attach a synthetic prior of this fidelity.
    #[arg(long)]
    prior_fidelity: Option<f64>,
    #[arg(long)]
    label: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HarnessFlags {
    /// Comma-separated policy names (ucb, ts, ts-prior:<s>, prior-greedy:<p>, uniform, oracle, ucrl2[:<delta>]).
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<PolicySpec>>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    rollouts: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    final_window: Option<usize>,
    /// Master seed; overrides the config's.
    #[arg(long)]
    seed: Option<u64>,
    /// Force the toppling matrix to the identity.
    #[arg(long)]
    no_toppling: bool,
    /// Skip dead-pose removal.
    #[arg(long)]
    keep_all_poses: bool,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Directory receiving curves.csv and summary.csv.
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
}

impl HarnessFlags {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(p) = &self.policies {
            cfg.policies = p.clone();
        }
        let set = |slot: &mut usize, v: Option<usize>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut cfg.horizon, self.horizon);
        set(&mut cfg.rollouts, self.rollouts);
        set(&mut cfg.trials, self.trials);
        set(&mut cfg.window, self.window);
        set(&mut cfg.final_window, self.final_window);
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if self.no_toppling {
            cfg.toppling_enabled = false;
        }
        if self.keep_all_poses {
            cfg.pose_removal.enabled = false;
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Object file (repeatable); adds to the config's objects.
    #[arg(long)]
    object: Vec<PathBuf>,
    /// Inline sensitivity object, e.g. `n=5,k=100,eps=0.5,lambda=0.1` (repeatable).
    #[arg(long)]
    sensitivity: Vec<String>,
    #[command(flatten)]
    harness: HarnessFlags,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    object: PathBuf,
    /// Fail when the object has sink poses.
    #[arg(long)]
    strict: bool,
    /// Emit JSON instead of `key: value` lines.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Grid such as `eps=0.1,0.25,lambda=0.01,0.1,k=100`.
    #[arg(long)]
    grid: String,
    /// Poses per sensitivity object.
    #[arg(long, default_value_t = 5)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    topple_strength: f64,
    #[command(flatten)]
    harness: HarnessFlags,
}

#[derive(Args)]
struct CoverTimeArgs {
    #[arg(long)]
    object: PathBuf,
    #[arg(long, default_value = "uniform")]
    policy: PolicySpec,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    episodes: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Give up on an episode after this many steps.
    #[arg(long, default_value_t = COVER_EPISODE_CAP)]
    cap: u64,
}

/// Failure split by exit code.
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GenObject(a) => gen_object(a),
        Command::Run(a) => run(a),
        Command::Analyze(a) => analyze(a),
        Command::Sweep(a) => sweep(a),
        Command::CoverTime(a) => cover_time(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn read_object(path: &Path) -> anyhow::Result<ObjectSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ObjectSpec::from_json(&text).with_context(|| format!("validating {}", path.display()))
}

fn gen_object(a: GenObjectArgs) -> Result<(), Failure> {
    let mut rng = SimRng::seed_from_u64(a.seed);
    let spec = match a.family {
        Family::Sensitivity => {
            let params = SensitivityParams {
                n_poses: a.n,
                grasps_per_pose: a.k,
                epsilon: a.eps.expect("required by clap"),
                lambda_min: a.lambda_min.expect("required by clap"),
                topple_strength: a.topple_strength,
            };
            gen_sensitivity_object(&params, &mut rng).map_err(anyhow::Error::from)?
        }
        Family::Random => {
            let mut params = RandomObjectParams::new(a.n, a.k);
            if let Some(v) = a.dirichlet_alpha {
                params.dirichlet_alpha = v;
            }
            if let Some(v) = a.quality_alpha {
                params.quality_alpha = v;
            }
            if let Some(v) = a.quality_beta {
                params.quality_beta = v;
            }
            if let Some(v) = a.eps_floor {
                params.epsilon_floor = v;
            }
            if let Some(v) = a.topple_density {
                params.topple_density = v;
            }
            if let Some(v) = a.topple_mass {
                params.topple_mass = v;
            }
            gen_random_object(&params, &mut rng).map_err(anyhow::Error::from)?
        }
    };
    let mut spec = match a.prior_fidelity {
        Some(f) if !(0.0..=1.0).contains(&f) => {
            return Err(Failure::Runtime(anyhow::anyhow!("prior fidelity must lie in [0, 1]")))
        }
        Some(f) => spec
            .with_prior(gen_prior(&spec, f, &mut rng))
            .map_err(anyhow::Error::from)?,
        None => spec,
    };
    if let Some(label) = a.label {
        spec = spec.with_label(label);
    }
    let json = spec.to_json();
    match a.out {
        Some(path) => fs::write(&path, json + "\n")
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{json}"),
    }
    Ok(())
}

/// Parses `n=5,k=100,eps=0.5,lambda=0.1[,topple=0.2]`.
fn parse_sensitivity(text: &str) -> Result<SensitivityParams, Failure> {
    let mut n = None;
    let mut k = None;
    let mut eps = None;
    let mut lambda = None;
    let mut topple = 0.0;
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("expected key=value in `{part}`")))?;
        let bad = || Failure::Usage(format!("bad value for {key}: `{value}`"));
        match key {
            "n" => n = Some(value.parse().map_err(|_| bad())?),
            "k" => k = Some(value.parse().map_err(|_| bad())?),
            "eps" => eps = Some(value.parse().map_err(|_| bad())?),
            "lambda" => lambda = Some(value.parse().map_err(|_| bad())?),
            "topple" => topple = value.parse().map_err(|_| bad())?,
            _ => return Err(Failure::Usage(format!("unknown sensitivity key `{key}`"))),
        }
    }
    match (n, k, eps, lambda) {
        (Some(n_poses), Some(grasps_per_pose), Some(epsilon), Some(lambda_min)) => Ok(SensitivityParams {
            n_poses,
            grasps_per_pose,
            epsilon,
            lambda_min,
            topple_strength: topple,
        }),
        _ => Err(Failure::Usage(format!("`{text}` needs n, k, eps and lambda"))),
    }
}

fn write_outputs(result: &ExperimentResult, dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let curves = dir.join("curves.csv");
    write_curves_csv(result, fs::File::create(&curves).with_context(|| format!("creating {}", curves.display()))?)?;
    let summary = dir.join("summary.csv");
    write_summary_csv(result, fs::File::create(&summary).with_context(|| format!("creating {}", summary.display()))?)?;
    Ok(())
}

fn execute(cfg: &ExperimentConfig, flags: &HarnessFlags) -> Result<(), Failure> {
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let result = run_experiment(
        cfg,
        RunOptions {
            jobs: flags.jobs,
            keep_traces: false,
        },
    )
    .map_err(anyhow::Error::from)?;
    write_outputs(&result, &flags.out_dir)?;
    for cell in &result.cells {
        eprintln!(
            "{} / {}: auc {:.4} ± {:.4}, final-window {:.4}",
            cell.object, cell.policy, cell.stats.auc, cell.stats.auc_se, cell.final_window_mean
        );
    }
    if result.failures.is_empty() {
        return Ok(());
    }
    for f in &result.failures {
        eprintln!("failed: {} / {}: {}", f.object, f.policy, f.message);
    }
    Err(Failure::Runtime(anyhow::anyhow!(
        "{} of {} cells failed",
        result.failures.len(),
        result.failures.len() + result.cells.len()
    )))
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_json(&text).map_err(|e| Failure::Usage(e.to_string()))?
        }
        None => ExperimentConfig::new(
            Vec::new(),
            ["ts", "ucb", "oracle"].iter().map(|p| p.parse().expect("builtin name")).collect(),
        ),
    };
    for path in &a.object {
        cfg.objects.push(ObjectSource::File {
            path: path.clone(),
            label: None,
            prior_fidelity: None,
        });
    }
    for text in &a.sensitivity {
        cfg.objects.push(ObjectSource::Sensitivity {
            params: parse_sensitivity(text)?,
            label: None,
            prior_fidelity: None,
        });
    }
    a.harness.apply(&mut cfg);
    execute(&cfg, &a.harness)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

fn analyze(a: AnalyzeArgs) -> Result<(), Failure> {
    let spec = read_object(&a.object)?;
    let report = spec.assumption_report();
    if a.strict && !report.sink_poses.is_empty() {
        return Err(Failure::Runtime(anyhow::anyhow!("sink poses {:?}", report.sink_poses)));
    }
    let optimal = optimal_average_reward(&spec).ok();
    let diam = diameter(&spec).ok();
    let bound = diameter_bound(&spec).ok();
    if a.json {
        let value = serde_json::json!({
            "label": spec.label(),
            "n_poses": spec.n_poses(),
            "grasps_per_pose": spec.grasps_per_pose(),
            "epsilon": report.epsilon,
            "lambda_min": report.lambda_min,
            "diameter": diam,
            "diameter_bound": bound,
            "j_star": optimal.as_ref().map(|o| o.j_star),
            "optimal_policy": optimal.as_ref().map(|o| o.policy.clone()),
            "greedy_is_optimal": optimal.as_ref().map(|o| o.greedy_is_optimal),
            "assumption4_violation": report.assumption4_violation,
            "sink_poses": report.sink_poses,
        });
        println!("{}", serde_json::to_string_pretty(&value).context("encoding report")?);
        return Ok(());
    }
    println!("label: {}", spec.label());
    println!("n_poses: {}", spec.n_poses());
    println!("grasps_per_pose: {}", spec.grasps_per_pose());
    println!("epsilon: {}", report.epsilon);
    println!("lambda_min: {}", report.lambda_min);
    println!("diameter: {}", fmt_opt(diam));
    println!("diameter_bound: {}", fmt_opt(bound));
    println!("j_star: {}", fmt_opt(optimal.as_ref().map(|o| o.j_star)));
    if let Some(o) = &optimal {
        println!("greedy_is_optimal: {}", o.greedy_is_optimal);
    }
    println!("assumption4_violation: {}", report.assumption4_violation);
    println!("sink_poses: {:?}", report.sink_poses);
    Ok(())
}

/// Parses `eps=0.1,0.25,lambda=0.01,k=100`; `;` also separates keys.
fn parse_grid(text: &str, n_poses: usize, topple_strength: f64) -> Result<SweepGrid, Failure> {
    let mut grid = SweepGrid {
        epsilon: Vec::new(),
        lambda_min: Vec::new(),
        grasps_per_pose: Vec::new(),
        n_poses,
        topple_strength,
    };
    let mut key: Option<String> = None;
    for token in text.split([',', ';']).map(str::trim).filter(|t| !t.is_empty()) {
        let value = match token.split_once('=') {
            Some((k, v)) => {
                key = Some(k.trim().to_string());
                v.trim()
            }
            None => token,
        };
        if value.is_empty() {
            continue;
        }
        let bad = || Failure::Usage(format!("bad grid value `{value}`"));
        match key.as_deref() {
            Some("eps") => grid.epsilon.push(value.parse().map_err(|_| bad())?),
            Some("lambda") => grid.lambda_min.push(value.parse().map_err(|_| bad())?),
            Some("k") => grid.grasps_per_pose.push(value.parse().map_err(|_| bad())?),
            Some(other) => return Err(Failure::Usage(format!("unknown grid key `{other}`"))),
            None => return Err(Failure::Usage(format!("grid value `{value}` has no key"))),
        }
    }
    if grid.grasps_per_pose.is_empty() && !grid.epsilon.is_empty() && !grid.lambda_min.is_empty() {
        grid.grasps_per_pose.push(100);
    }
    if grid.is_empty() {
        return Err(Failure::Usage("grid needs at least one eps and one lambda value".into()));
    }
    Ok(grid)
}

fn sweep(a: SweepArgs) -> Result<(), Failure> {
    let grid = parse_grid(&a.grid, a.n, a.topple_strength)?;
    let mut cfg = ExperimentConfig::new(grid.objects(), vec![PolicySpec::Thompson]);
    a.harness.apply(&mut cfg);
    execute(&cfg, &a.harness)
}

fn cover_time(a: CoverTimeArgs) -> Result<(), Failure> {
    Ok(cover_time_report(a)?)
}

fn cover_time_report(a: CoverTimeArgs) -> anyhow::Result<()> {
    let spec = read_object(&a.object)?;
    let report = spec.assumption_report();
    if !report.sink_poses.is_empty() {
        bail!("sink poses {:?}; cover time is infinite", report.sink_poses);
    }
    let bound = cover_time_bound(spec.landing_probs(), spec.grasps_per_pose(), report.epsilon)
?;
    let estimate = cover_time_mc(&spec, &a.policy, a.episodes as usize, a.seed, a.cap)?;
    println!("cover_time_bound: {bound}");
    println!("cover_time_mc_mean: {}", estimate.mean);
    println!("cover_time_mc_se: {}", estimate.std_error);
    println!("episodes: {}", estimate.episodes);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("eps=0.1,0.25,lambda=0.01,k=10,20", 5, 0.0).ok().unwrap();
        assert_eq!(g.epsilon, vec![0.1, 0.25]);
        assert_eq!(g.lambda_min, vec![0.01]);
        assert_eq!(g.grasps_per_pose, vec![10, 20]);
        let g = parse_grid("eps=0.5;lambda=0.1", 5, 0.0).ok().unwrap();
        assert_eq!(g.grasps_per_pose, vec![100]);
        assert!(matches!(parse_grid("", 5, 0.0), Err(Failure::Usage(_))));
        assert!(matches!(parse_grid("eps=,lambda=", 5, 0.0), Err(Failure::Usage(_))));
        assert!(matches!(parse_grid("mu=1", 5, 0.0), Err(Failure::Usage(_))));
    }

    #[test]
    fn sensitivity_flag_parsing() {
        let p = parse_sensitivity("n=5,k=100,eps=0.5,lambda=0.1").ok().unwrap();
        assert_eq!((p.n_poses, p.grasps_per_pose, p.epsilon, p.lambda_min), (5, 100, 0.5, 0.1));
        assert!(parse_sensitivity("n=5,k=100").is_err());
    }
}
