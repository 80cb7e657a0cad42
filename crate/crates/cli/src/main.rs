//! `satinspect` command-line driver.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 runtime
//! failure, 64 usage error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use satinspect::config_io::{
    analysis_files, deputies_csv, eval_csv, load_config, parse_config, read_trials_csv, series_csv,
    series_path, trials_csv, write_results, ConfigError, ExperimentConfig,
};
use satinspect::guidance::{build_nmc_family, build_waypoint_ring, StrategyKind, StrategySpec};
use satinspect::mc_eval::{
    enumerate_passive_strategies, pareto_results, EvalResult, McEvaluator, RsoMode,
};
use satinspect::sensing::{aura_standin, load_ply};
use satinspect::validation::{Policy, ValEnv};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "satinspect",
    version,
    about = "Multi-agent satellite inspection experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML or JSON experiment config; defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every stage seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available cores. Never changes results.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Ph,
    Nmc,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte-Carlo evaluation of every passive strategy; writes eval.csv and pareto.json.
    McEval {
        /// Rotation samples per mode.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        kinds: Option<Vec<Kind>>,
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<RsoMode>>,
    },
    /// Picks the best PH and NMC strategies from an mc-eval output directory.
    SelectPareto {
        /// Directory holding pareto.json.
        #[arg(long)]
        input: PathBuf,
    },
    /// Validation campaign; writes trials.csv, deputies.csv and series/.
    Validate {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<RsoMode>>,
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<Policy>>,
        /// PLY point cloud replacing the built-in stand-in geometry.
        #[arg(long)]
        geometry: Option<PathBuf>,
    },
    /// Statistics tables from a trials.csv.
    Analyze {
        #[arg(long)]
        input: PathBuf,
    },
    /// One seeded trial with its full trace.
    Demo {
        #[arg(long, default_value = "StaticCWH")]
        mode: RsoMode,
        #[arg(long, default_value = "PH")]
        policy: Policy,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

type Files = Vec<(String, Vec<u8>)>;

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => load_config(p)?,
        None => parse_config("", Path::new("defaults.toml"), Path::new("."))?,
    };
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

/// Re-checks a config after command-line overrides.
fn revalidate(cfg: ExperimentConfig) -> Result<ExperimentConfig, Failure> {
    Ok(cfg.resolve(Path::new("."))?)
}

fn finish(cfg: &ExperimentConfig, out: &Path, seed: u64, mut files: Files) -> Result<(), Failure> {
    files.insert(0, ("config.json".into(), cfg.dump().into_bytes()));
    let m = write_results(out, &files, &cfg.hash(), seed)?;
    log::info!("wrote {} files to {}", m.files.len() + 1, out.display());
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ParetoEntry {
    label: String,
    mean_inspection_fraction: f64,
    mean_time_to_threshold: f64,
    mean_fuel: f64,
    strategy: StrategySpec,
}

fn mc_eval(
    mut cfg: ExperimentConfig,
    out: &Path,
    samples: Option<usize>,
    kinds: Option<Vec<Kind>>,
    modes: Option<Vec<RsoMode>>,
) -> Result<(), Failure> {
    if let Some(n) = samples {
        cfg.mc.n_samples = n;
    }
    if let Some(m) = modes {
        cfg.mc.rso_modes = m;
    }
    let cfg = revalidate(cfg)?;
    let kinds = kinds.unwrap_or(vec![Kind::Ph, Kind::Nmc]);
    let c = cfg.constants();
    let a = &cfg.actions;
    let n_deputies = cfg.val.ph_strategy.n_deputies();
    let mut action_kinds = Vec::new();
    let mut specs = Vec::new();
    for k in &kinds {
        let space = match k {
            Kind::Ph => build_waypoint_ring(a.n_actions, a.radius, &c),
            Kind::Nmc => build_nmc_family(a.n_actions, a.radius, a.nmc_samples, &c),
        }
        .map_err(runtime)?;
        action_kinds.push(space.kind);
        specs.extend(enumerate_passive_strategies(&space, n_deputies));
    }
    log::info!(
        "building capture tables for {} samples per mode",
        cfg.mc.n_samples
    );
    let ev = McEvaluator::new(&cfg.mc, a, &c, Some(&action_kinds)).map_err(runtime)?;
    log::info!("evaluating {} strategies", specs.len());
    let results = ev.evaluate_all(&specs).map_err(runtime)?;
    let mut pareto: BTreeMap<String, Vec<ParetoEntry>> = BTreeMap::new();
    for kind in [StrategyKind::PointHold, StrategyKind::NmcHold] {
        let subset: Vec<EvalResult> = results
            .iter()
            .filter(|r| r.strategy.kind == kind)
            .cloned()
            .collect();
        if subset.is_empty() {
            continue;
        }
        let front = pareto_results(&subset)
            .into_iter()
            .map(|i| {
                let r = &subset[i];
                ParetoEntry {
                    label: r.strategy.label(),
                    mean_inspection_fraction: r.mean_inspection_fraction,
                    mean_time_to_threshold: r.mean_time_to_threshold,
                    mean_fuel: r.mean_fuel,
                    strategy: r.strategy.clone(),
                }
            })
            .collect();
        pareto.insert(format!("{kind:?}"), front);
    }
    let mut json = serde_json::to_string_pretty(&pareto).expect("pareto sets always serialize");
    json.push('\n');
    let mut files = vec![
        ("eval.csv".into(), eval_csv(&results)),
        ("pareto.json".into(), json.into_bytes()),
    ];
    if cfg.mc.keep_samples {
        let mut s = serde_json::to_string(&results).expect("results always serialize");
        s.push('\n');
        files.push(("results.json".into(), s.into_bytes()));
    }
    finish(&cfg, out, cfg.mc.rng_seed, files)
}

/// Highest fraction, then shortest time, then least fuel, then label.
fn best(entries: &[ParetoEntry]) -> Option<&ParetoEntry> {
    entries.iter().min_by(|x, y| {
        y.mean_inspection_fraction
            .total_cmp(&x.mean_inspection_fraction)
            .then(
                x.mean_time_to_threshold
                    .total_cmp(&y.mean_time_to_threshold),
            )
            .then(x.mean_fuel.total_cmp(&y.mean_fuel))
            .then(x.label.cmp(&y.label))
    })
}

fn select_pareto(cfg: ExperimentConfig, out: &Path, input: &Path) -> Result<(), Failure> {
    let path = input.join("pareto.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let pareto: BTreeMap<String, Vec<ParetoEntry>> = serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut files = Vec::new();
    for (kind, name) in [
        (StrategyKind::PointHold, "ph.json"),
        (StrategyKind::NmcHold, "nmc.json"),
    ] {
        if let Some(e) = pareto.get(&format!("{kind:?}")).and_then(|v| best(v)) {
            log::info!(
                "{name}: {} ({:.4}, {} s)",
                e.label,
                e.mean_inspection_fraction,
                e.mean_time_to_threshold
            );
            let mut s = e.strategy.to_json();
            s.push('\n');
            files.push((name.to_string(), s.into_bytes()));
        }
    }
    if files.is_empty() {
        return Err(Failure::Config(format!(
            "{}: no strategies to select from",
            path.display()
        )));
    }
    finish(&cfg, out, cfg.mc.rng_seed, files)
}

fn environment(cfg: &ExperimentConfig, geometry: Option<&Path>) -> Result<ValEnv, Failure> {
    let cloud = match geometry {
        Some(p) => load_ply(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
        None => aura_standin(),
    };
    ValEnv::new(cfg.val.clone(), &cfg.actions, cfg.constants(), cloud).map_err(runtime)
}

fn validate(
    mut cfg: ExperimentConfig,
    out: &Path,
    trials: Option<usize>,
    modes: Option<Vec<RsoMode>>,
    policies: Option<Vec<Policy>>,
    geometry: Option<&Path>,
) -> Result<(), Failure> {
    if let Some(n) = trials {
        cfg.val.trials_per_cell = n;
    }
    if let Some(m) = modes {
        cfg.val.modes = m;
    }
    if let Some(p) = policies {
        cfg.val.policies = p;
    }
    let cfg = revalidate(cfg)?;
    let env = environment(&cfg, geometry)?;
    log::info!(
        "running {} trials",
        cfg.val.modes.len() * cfg.val.policies.len() * cfg.val.trials_per_cell
    );
    let records = env.run_campaign();
    let mut files: Files = vec![
        ("trials.csv".into(), trials_csv(&records)),
        ("deputies.csv".into(), deputies_csv(&records)),
    ];
    if cfg.val.keep_series {
        files.extend(
            records
                .iter()
                .map(|r| (series_path(r), series_csv(&r.series))),
        );
    }
    finish(&cfg, out, cfg.val.rng_seed, files)
}

fn analyze(cfg: ExperimentConfig, out: &Path, input: &Path) -> Result<(), Failure> {
    let bytes =
        std::fs::read(input).map_err(|e| Failure::Config(format!("{}: {e}", input.display())))?;
    let records = read_trials_csv(&bytes)
        .map_err(|e| Failure::Config(format!("{}: {e}", input.display())))?;
    let files = analysis_files(&records).map_err(runtime)?;
    finish(&cfg, out, cfg.val.rng_seed, files)
}

fn demo(
    mut cfg: ExperimentConfig,
    out: &Path,
    mode: RsoMode,
    policy: Policy,
    trial: usize,
) -> Result<(), Failure> {
    cfg.val.keep_series = true;
    let env = environment(&cfg, None)?;
    let record = env.run_trial(mode, policy, trial);
    let records = [record];
    let files = vec![
        ("trace.csv".into(), series_csv(&records[0].series)),
        ("trials.csv".into(), trials_csv(&records)),
        ("deputies.csv".into(), deputies_csv(&records)),
    ];
    finish(&cfg, out, cfg.val.rng_seed, files)
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(runtime)?;
    }
    let cfg = load(&cli.common)?;
    let out = cli
        .common
        .out
        .clone()
        .unwrap_or_else(|| cfg.out_dir.clone());
    match cli.command {
        Command::McEval {
            samples,
            kinds,
            modes,
        } => mc_eval(cfg, &out, samples, kinds, modes),
        Command::SelectPareto { input } => select_pareto(cfg, &out, &input),
        Command::Validate {
            trials,
            modes,
            policies,
            geometry,
        } => validate(cfg, &out, trials, modes, policies, geometry.as_deref()),
        Command::Analyze { input } => analyze(cfg, &out, &input),
        Command::Demo {
            mode,
            policy,
            trial,
        } => demo(cfg, &out, mode, policy, trial),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(label: &str, f: f64, t: f64, fuel: f64) -> ParetoEntry {
        ParetoEntry {
            label: label.into(),
            mean_inspection_fraction: f,
            mean_time_to_threshold: t,
            mean_fuel: fuel,
            strategy: StrategySpec::point_hold(&[0, 1, 2]),
        }
    }

    #[test]
    fn best_prefers_fraction_then_time_then_fuel() {
        let e = [
            entry("a", 0.8, 100.0, 1.0),
            entry("b", 0.9, 300.0, 1.0),
            entry("c", 0.9, 200.0, 2.0),
        ];
        assert_eq!(best(&e).unwrap().label, "c");
        let e = [entry("a", 0.9, 200.0, 3.0), entry("b", 0.9, 200.0, 2.0)];
        assert_eq!(best(&e).unwrap().label, "b");
        assert!(best(&[]).is_none());
    }

    #[test]
    fn argument_surface() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from([
            "satinspect",
            "validate",
            "--trials",
            "1",
            "--modes",
            "StaticCWH,StableTumble",
        ])
        .unwrap();
        assert!(matches!(
            cli.command,
            Command::Validate {
                trials: Some(1),
                ..
            }
        ));
        assert!(Cli::try_parse_from(["satinspect", "frobnicate"]).is_err());
        let cli = Cli::try_parse_from(["satinspect", "demo", "--seed", "7", "--out", "x"]).unwrap();
        assert_eq!(cli.common.seed, Some(7));
    }
}
