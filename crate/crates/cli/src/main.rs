mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use frameless_core::analysis::DEFAULT_PRUNE_THRESHOLD;
use frameless_core::optim::SEARCH_PRUNE_THRESHOLD;
use frameless_core::sim::PolicyMode;
use frameless_core::{
    intermediate_profile, multistart_optimize, run_adaptive, run_trials, unresolved_pmf,
    AdaptivePolicy, AnalysisOptions, EmpiricalPmf, OptimizationProblem, ReliabilityProfile,
    SlotClass, SystemConfig,
};

use output::{num, Manifest, OutDir};
use settings::{format_classes, parse_classes, parse_order, ConfigFile};

const DEFAULT_MAX_LEAK: f64 = 1e-6;
const DEFAULT_TRIALS: u64 = 100_000;
/// Half-width of the reported simulation intervals, in standard deviations.
const CI_Z: f64 = 3.0;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<frameless_core::Error> for CliError {
    fn from(e: frameless_core::Error) -> Self {
        match e {
            frameless_core::Error::StateSpaceTooLarge { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "frameless",
    version,
    about = "Reliability analysis, simulation and optimization of frameless ALOHA"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact pmf of unresolved users and the derived reliability metrics.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        system: System,
        /// Report F_t for this t.
        #[arg(long)]
        target: Option<usize>,
        /// State pruning threshold.
        #[arg(long)]
        prune: Option<f64>,
        /// Fail with exit code 3 if more mass than this is pruned.
        #[arg(long)]
        max_leak: Option<f64>,
    },
    /// Monte Carlo estimate of the pmf, static or adaptive.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        system: System,
        #[arg(long)]
        trials: Option<u64>,
        /// Master seed; drawn from entropy and recorded when absent.
        #[arg(long)]
        seed: Option<u64>,
        /// Single-class adaptive scheme anchored at this beta*.
        #[arg(long, value_name = "BETA_STAR")]
        adaptive: Option<f64>,
    },
    /// Multi-start search for the class parameters maximizing F_t.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        slots: Option<usize>,
        /// Number of slot classes.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        target: Option<usize>,
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Objective evaluations per start.
        #[arg(long)]
        budget: Option<usize>,
        /// Pruning threshold during the search.
        #[arg(long)]
        prune: Option<f64>,
        #[arg(long)]
        max_leak: Option<f64>,
    },
    /// Mean resolved users after every slot prefix.
    Profile {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        system: System,
        /// `batched` or comma-separated class indices, `H*N` repeating `H`.
        #[arg(long)]
        order: Option<String>,
        #[arg(long)]
        prune: Option<f64>,
        #[arg(long)]
        max_leak: Option<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// `key = value` file (or an earlier manifest.json); flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "FRAMELESS_OUT_DIR", default_value = ".")]
    out: PathBuf,
    /// Worker threads; 1 is the sequential reference mode.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct System {
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    slots: Option<usize>,
    /// Slot classes as `SLOTS:BETA,...`, e.g. `88:2.4,12:12.94`.
    #[arg(long)]
    classes: Option<String>,
}

fn check_keys(file: &ConfigFile, allowed: &[&str]) -> Result<(), CliError> {
    match file.keys().find(|k| !allowed.contains(k)) {
        Some(k) => Err(CliError::Usage(format!("{k}: unknown configuration key"))),
        None => Ok(()),
    }
}

fn jobs(file: &ConfigFile, common: &Common) -> Result<usize, CliError> {
    let jobs = file.pick("jobs", common.jobs)?.unwrap_or(1);
    if jobs == 0 {
        return Err(CliError::Usage("jobs: must be at least 1".into()));
    }
    Ok(jobs)
}

fn system_config(
    file: &ConfigFile,
    system: &System,
    manifest: &mut Manifest,
) -> Result<SystemConfig, CliError> {
    let users: usize = file.require("users", system.users)?;
    let slots: Option<usize> = file.pick("slots", system.slots)?;
    let spec: String = file.require("classes", system.classes.clone())?;
    let classes = parse_classes(&spec, slots)?;
    let config =
        SystemConfig::new(users, classes).map_err(|e| CliError::Usage(format!("classes: {e}")))?;
    manifest.set("users", users);
    manifest.set("slots", config.total_slots());
    manifest.set("classes", format_classes(config.classes()));
    Ok(config)
}

fn threshold(
    file: &ConfigFile,
    key: &str,
    flag: Option<f64>,
    default: f64,
) -> Result<f64, CliError> {
    let v = file.pick(key, flag)?.unwrap_or(default);
    if !(v >= 0.0 && v.is_finite()) {
        return Err(CliError::Usage(format!(
            "{key}: must be a nonnegative number"
        )));
    }
    Ok(v)
}

fn check_target(target: usize, users: usize) -> Result<(), CliError> {
    if target == 0 || target > users {
        return Err(CliError::Usage(format!(
            "target: {target} is outside 1..={users}"
        )));
    }
    Ok(())
}

fn check_leak(leaked: f64, max_leak: f64) -> Result<(), CliError> {
    if leaked > max_leak {
        return Err(CliError::Numerical(format!(
            "leaked mass {leaked:e} exceeds max-leak {max_leak:e}; lower --prune"
        )));
    }
    Ok(())
}

fn entropy_seed() -> u64 {
    rand::random()
}

#[derive(Serialize)]
struct AnalysisSummary<'a> {
    users: usize,
    slots: usize,
    classes: &'a [SlotClass],
    target: Option<usize>,
    f_target: Option<f64>,
    expected_per: f64,
    throughput: Option<f64>,
    mean_resolved: f64,
    leaked_mass: f64,
    pmf: &'a [f64],
    reliability: &'a [f64],
}

fn write_analysis(
    out: &mut OutDir,
    p: &ReliabilityProfile,
    target: Option<usize>,
) -> Result<(), CliError> {
    let n = p.users();
    out.csv(
        "pmf.csv",
        &["u", "P_u", "F_{n-u}"],
        (0..=n).map(|u| vec![u.to_string(), num(p.pmf[u]), num(p.f_t(n - u))]),
    )?;
    out.json(
        "summary.json",
        &AnalysisSummary {
            users: n,
            slots: p.config.total_slots(),
            classes: p.config.classes(),
            target,
            f_target: target.map(|t| p.f_t(t)),
            expected_per: p.expected_per,
            throughput: p.throughput,
            mean_resolved: p.mean_resolved(),
            leaked_mass: p.leaked_mass,
            pmf: &p.pmf,
            reliability: &p.reliability,
        },
    )
}

fn analyze(
    common: Common,
    system: System,
    target: Option<usize>,
    prune: Option<f64>,
    max_leak: Option<f64>,
) -> Result<(), CliError> {
    let start = Instant::now();
    let file = ConfigFile::load(common.config.as_deref())?;
    check_keys(
        &file,
        &[
            "users", "slots", "classes", "target", "prune", "max-leak", "jobs",
        ],
    )?;
    let mut manifest = Manifest::new("analyze");
    let config = system_config(&file, &system, &mut manifest)?;
    let target: Option<usize> = file.pick("target", target)?;
    if let Some(t) = target {
        check_target(t, config.users())?;
    }
    let prune = threshold(&file, "prune", prune, DEFAULT_PRUNE_THRESHOLD)?;
    let max_leak = threshold(&file, "max-leak", max_leak, DEFAULT_MAX_LEAK)?;
    let jobs = jobs(&file, &common)?;
    manifest.set("target", target);
    manifest.set("prune", prune);
    manifest.set("max-leak", max_leak);
    manifest.set("jobs", jobs);

    let p = unresolved_pmf(
        &config,
        AnalysisOptions {
            prune_threshold: prune,
            jobs,
        },
    )?;
    let mut out = OutDir::create(&common.out)?;
    write_analysis(&mut out, &p, target)?;
    manifest.leaked_mass = Some(p.leaked_mass);
    manifest.finish(&mut out, start.elapsed())?;

    if let Some(t) = target {
        println!("F_{t} = {:.7}", p.f_t(t));
    }
    println!("expected PER = {:.7e}", p.expected_per);
    if let Some(tp) = p.throughput {
        println!("throughput = {tp:.6}");
    }
    println!("leaked mass = {:.3e}", p.leaked_mass);
    check_leak(p.leaked_mass, max_leak)
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    users: usize,
    slots: usize,
    classes: Option<&'a [SlotClass]>,
    policy: Option<AdaptivePolicy>,
    trials: u64,
    seed: u64,
    failure_rate: f64,
    counts: &'a [u64],
    reliability: Vec<f64>,
}

fn simulate(
    common: Common,
    system: System,
    trials: Option<u64>,
    seed: Option<u64>,
    adaptive: Option<f64>,
) -> Result<(), CliError> {
    let start = Instant::now();
    let file = ConfigFile::load(common.config.as_deref())?;
    check_keys(
        &file,
        &[
            "users", "slots", "classes", "trials", "seed", "adaptive", "jobs",
        ],
    )?;
    let mut manifest = Manifest::new("simulate");
    let trials: u64 = file.pick("trials", trials)?.unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(CliError::Usage("trials: must be at least 1".into()));
    }
    let seed = file.pick("seed", seed)?.unwrap_or_else(entropy_seed);
    let jobs = jobs(&file, &common)?;
    let adaptive: Option<f64> = file.pick("adaptive", adaptive)?;

    let (empirical, config, policy) = match adaptive {
        Some(beta_star) => {
            if system.classes.is_some() || file.keys().any(|k| k == "classes") {
                return Err(CliError::Usage("classes: not used with --adaptive".into()));
            }
            let users: usize = file.require("users", system.users)?;
            let slots: usize = file.require("slots", system.slots)?;
            if !(beta_star > 0.0 && beta_star <= users as f64) {
                return Err(CliError::Usage(format!(
                    "adaptive: beta* {beta_star} is outside (0, {users}]"
                )));
            }
            manifest.set("users", users);
            manifest.set("slots", slots);
            manifest.set("adaptive", beta_star);
            let policy = AdaptivePolicy::adaptive(beta_star);
            (
                run_adaptive(users, slots, policy, trials, seed, jobs)?,
                None,
                Some(policy),
            )
        }
        None => {
            let config = system_config(&file, &system, &mut manifest)?;
            (run_trials(&config, trials, seed, jobs)?, Some(config), None)
        }
    };
    manifest.set("trials", trials);
    manifest.set("jobs", jobs);
    manifest.seed = Some(seed);
    manifest.trials = Some(trials);

    let mut out = OutDir::create(&common.out)?;
    write_simulation(&mut out, &empirical)?;
    let n = empirical.users;
    let slots = match (&config, adaptive) {
        (Some(c), _) => c.total_slots(),
        (None, _) => file.require("slots", system.slots)?,
    };
    out.json(
        "summary.json",
        &SimulationSummary {
            users: n,
            slots,
            classes: config.as_ref().map(|c| c.classes()),
            policy,
            trials,
            seed,
            failure_rate: empirical.failure_rate(),
            counts: &empirical.counts,
            reliability: (0..=n).map(|t| empirical.reliability(t)).collect(),
        },
    )?;
    manifest.finish(&mut out, start.elapsed())?;

    if policy.is_some_and(|p| p.mode == PolicyMode::Adaptive) {
        let failures = trials - empirical.counts[0];
        println!("failed periods = {failures} of {trials}");
    }
    println!("failure rate = {:.3e}", empirical.failure_rate());
    println!("seed = {seed}");
    Ok(())
}

fn write_simulation(out: &mut OutDir, e: &EmpiricalPmf) -> Result<(), CliError> {
    let n = e.users;
    out.csv(
        "pmf.csv",
        &["u", "P_u", "F_{n-u}", "stderr", "ci_low", "ci_high"],
        (0..=n).map(|u| {
            let (lo, hi) = e.interval(u, CI_Z);
            vec![
                u.to_string(),
                num(e.probability(u)),
                num(e.reliability(n - u)),
                num(e.std_error(u)),
                num(lo),
                num(hi),
            ]
        }),
    )
}

#[allow(clippy::too_many_arguments)]
fn optimize(
    common: Common,
    users: Option<usize>,
    slots: Option<usize>,
    k: Option<usize>,
    target: Option<usize>,
    starts: Option<usize>,
    seed: Option<u64>,
    budget: Option<usize>,
    prune: Option<f64>,
    max_leak: Option<f64>,
) -> Result<(), CliError> {
    let start = Instant::now();
    let file = ConfigFile::load(common.config.as_deref())?;
    check_keys(
        &file,
        &[
            "users", "slots", "k", "target", "starts", "seed", "budget", "prune", "max-leak",
            "jobs",
        ],
    )?;
    let users: usize = file.require("users", users)?;
    let slots: usize = file.require("slots", slots)?;
    let k: usize = file.pick("k", k)?.unwrap_or(1);
    let target: usize = file.require("target", target)?;
    if users == 0 {
        return Err(CliError::Usage("users: must be at least 1".into()));
    }
    if k == 0 {
        return Err(CliError::Usage("k: must be at least 1".into()));
    }
    check_target(target, users)?;
    let mut problem = OptimizationProblem::new(users, slots, k, target);
    problem.starts = file.pick("starts", starts)?.unwrap_or(problem.starts);
    if problem.starts == 0 {
        return Err(CliError::Usage("starts: must be at least 1".into()));
    }
    problem.max_evals = file.pick("budget", budget)?.unwrap_or(problem.max_evals);
    if problem.max_evals == 0 {
        return Err(CliError::Usage("budget: must be at least 1".into()));
    }
    problem.search_prune = threshold(&file, "prune", prune, SEARCH_PRUNE_THRESHOLD)?;
    problem.seed = file.pick("seed", seed)?.unwrap_or_else(entropy_seed);
    problem.jobs = jobs(&file, &common)?;
    let max_leak = threshold(&file, "max-leak", max_leak, DEFAULT_MAX_LEAK)?;

    let mut manifest = Manifest::new("optimize");
    manifest.set("users", users);
    manifest.set("slots", slots);
    manifest.set("k", k);
    manifest.set("target", target);
    manifest.set("starts", problem.starts);
    manifest.set("budget", problem.max_evals);
    manifest.set("prune", problem.search_prune);
    manifest.set("max-leak", max_leak);
    manifest.set("jobs", problem.jobs);
    manifest.seed = Some(problem.seed);

    let result = multistart_optimize(&problem)?;
    let best = result.best.to_config(users)?;
    let profile = unresolved_pmf(&best, AnalysisOptions::with_prune(problem.final_prune))?;
    let mut out = OutDir::create(&common.out)?;
    out.json("result.json", &result)?;
    write_analysis(&mut out, &profile, Some(target))?;
    manifest.leaked_mass = Some(result.leaked_mass);
    manifest.finish(&mut out, start.elapsed())?;

    println!("F_{target} = {:.7}", result.best_f_t);
    println!("classes = {}", format_classes(best.classes()));
    println!("seed = {}", problem.seed);
    check_leak(result.leaked_mass, max_leak)
}

#[derive(Serialize)]
struct ProfileSummary<'a> {
    users: usize,
    classes: &'a [SlotClass],
    order: &'a [usize],
    mean_resolved: &'a [f64],
}

fn profile(
    common: Common,
    system: System,
    order: Option<String>,
    prune: Option<f64>,
    max_leak: Option<f64>,
) -> Result<(), CliError> {
    let start = Instant::now();
    let file = ConfigFile::load(common.config.as_deref())?;
    check_keys(
        &file,
        &[
            "users", "slots", "classes", "order", "prune", "max-leak", "jobs",
        ],
    )?;
    let mut manifest = Manifest::new("profile");
    let config = system_config(&file, &system, &mut manifest)?;
    let spec: String = file
        .pick("order", order)?
        .unwrap_or_else(|| "batched".into());
    let slot_order = parse_order(&spec, config.classes())?;
    let prune = threshold(&file, "prune", prune, DEFAULT_PRUNE_THRESHOLD)?;
    let max_leak = threshold(&file, "max-leak", max_leak, DEFAULT_MAX_LEAK)?;
    let jobs = jobs(&file, &common)?;
    manifest.set("order", &spec);
    manifest.set("prune", prune);
    manifest.set("max-leak", max_leak);
    manifest.set("jobs", jobs);

    let opts = AnalysisOptions {
        prune_threshold: prune,
        jobs,
    };
    let nr = intermediate_profile(&config, &slot_order, opts)
        .map_err(|e| CliError::Usage(format!("order: {e}")))?;
    // The full-period leak bounds every prefix's leak.
    let leaked = unresolved_pmf(&config, opts)?.leaked_mass;
    let mut out = OutDir::create(&common.out)?;
    out.csv(
        "profile.csv",
        &["slot", "n_r"],
        nr.iter()
            .enumerate()
            .map(|(l, v)| vec![l.to_string(), num(*v)]),
    )?;
    out.json(
        "summary.json",
        &ProfileSummary {
            users: config.users(),
            classes: config.classes(),
            order: &slot_order,
            mean_resolved: &nr,
        },
    )?;
    manifest.leaked_mass = Some(leaked);
    manifest.finish(&mut out, start.elapsed())?;
    println!("n_r after {} slots = {:.6}", nr.len() - 1, nr[nr.len() - 1]);
    check_leak(leaked, max_leak)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze {
            common,
            system,
            target,
            prune,
            max_leak,
        } => analyze(common, system, target, prune, max_leak),
        Command::Simulate {
            common,
            system,
            trials,
            seed,
            adaptive,
        } => simulate(common, system, trials, seed, adaptive),
        Command::Optimize {
            common,
            users,
            slots,
            k,
            target,
            starts,
            seed,
            budget,
            prune,
            max_leak,
        } => optimize(
            common, users, slots, k, target, starts, seed, budget, prune, max_leak,
        ),
        Command::Profile {
            common,
            system,
            order,
            prune,
            max_leak,
        } => profile(common, system, order, prune, max_leak),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CliError::Usage(_) => 2,
                CliError::Numerical(_) => 3,
                CliError::Io(_) => 1,
            })
        }
    }
}
