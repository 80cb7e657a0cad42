//! Experiment configuration and result serialization.
//!
//! Configs are TOML or JSON, strict about keys, and resolve to a single
//! self-contained [`ExperimentConfig`]. Results are CSV files with fixed
//! column orders plus a `manifest.json` of SHA-256 checksums.

use crate::dynamics::Constants;
use crate::guidance::{build_nmc_family, build_waypoint_ring, ActionSpaceConfig, StrategySpec};
use crate::llc::LlcError;
use crate::mc_eval::{EvalResult, McConfig, McError, RsoMode};
use crate::sensing::CaptureError;
use crate::stats::{
    anova_residuals, art_anova, art_ranks, levene_test, pairwise_contrasts_with, qq_data,
    summarize, two_way_anova, AnovaTable, Effect, FactorialData, StatsError, INTERACTION_ALPHA,
};
use crate::validation::{Policy, SeriesPoint, TrialRecord, ValConfig, ValError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Largest accepted gap between a supplied and the derived mean motion (rad/s).
pub const SIGMA_MU_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {msg}", file.display())]
    Parse { file: PathBuf, msg: String },
    #[error("{path}: {msg}")]
    Invalid { path: String, msg: String },
}

fn invalid(path: impl Into<String>, msg: impl Display) -> ConfigError {
    ConfigError::Invalid {
        path: path.into(),
        msg: msg.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsConfig {
    pub mu: f64,
    pub r0_orbit: f64,
    pub mass: f64,
    /// Optional cross-check; the resolved value is always derived.
    pub sigma_mu: Option<f64>,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        let c = Constants::default();
        Self {
            mu: c.mu(),
            r0_orbit: c.r0_orbit(),
            mass: c.mass(),
            sigma_mu: None,
        }
    }
}

/// Strategy files, relative to the config file. Loaded files replace the
/// corresponding inline strategies and the paths are then cleared.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyPaths {
    pub ph: Option<PathBuf>,
    pub nmc: Option<PathBuf>,
    pub rl: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub constants: ConstantsConfig,
    pub actions: ActionSpaceConfig,
    pub mc: McConfig,
    pub val: ValConfig,
    pub strategies: StrategyPaths,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            constants: ConstantsConfig::default(),
            actions: ActionSpaceConfig::default(),
            mc: McConfig::default(),
            val: ValConfig::default(),
            strategies: StrategyPaths::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn constants(&self) -> Constants {
        Constants::new(
            self.constants.mu,
            self.constants.r0_orbit,
            self.constants.mass,
        )
        .expect("resolved configs hold valid constants")
    }

    /// Sets both stage seeds.
    pub fn set_seed(&mut self, seed: u64) {
        self.mc.rng_seed = seed;
        self.val.rng_seed = seed;
    }

    /// Validates every field and fills derived values. `base` resolves
    /// strategy paths.
    pub fn resolve(mut self, base: &Path) -> Result<Self, ConfigError> {
        let k = &self.constants;
        let c = Constants::new(k.mu, k.r0_orbit, k.mass).map_err(|e| invalid("constants", e))?;
        if let Some(s) = k.sigma_mu {
            if (s - c.sigma_mu()).abs() > SIGMA_MU_TOL || s.is_nan() {
                return Err(invalid(
                    "constants.sigma_mu",
                    format!(
                        "{s} disagrees with sqrt(mu / r0_orbit^3) = {}",
                        c.sigma_mu()
                    ),
                ));
            }
        }
        self.constants.sigma_mu = Some(c.sigma_mu());

        let a = &self.actions;
        if a.n_actions < 2 {
            return Err(invalid(
                "actions.n_actions",
                format!("must be at least 2, got {}", a.n_actions),
            ));
        }
        if a.nmc_samples < 2 {
            return Err(invalid(
                "actions.nmc_samples",
                format!("must be at least 2, got {}", a.nmc_samples),
            ));
        }
        build_waypoint_ring(a.n_actions, a.radius, &c).map_err(|e| invalid("actions", e))?;
        build_nmc_family(a.n_actions, a.radius, a.nmc_samples, &c)
            .map_err(|e| invalid("actions", e))?;

        if self.mc.fov.is_nan() || self.mc.fov <= 0.0 {
            return Err(invalid(
                "mc.fov",
                format!("must be in (0, π], got {}", self.mc.fov),
            ));
        }
        self.mc.validate().map_err(|e| match e {
            McError::Config { field, msg } => invalid(format!("mc.{field}"), msg),
            other => invalid("mc", other),
        })?;
        if self.mc.n_agloc != a.n_actions {
            return Err(invalid(
                "mc.n_agloc",
                format!(
                    "must equal actions.n_actions ({}), got {}",
                    a.n_actions, self.mc.n_agloc
                ),
            ));
        }

        let slots = [
            (
                "strategies.ph",
                self.strategies.ph.take(),
                &mut self.val.ph_strategy,
            ),
            (
                "strategies.nmc",
                self.strategies.nmc.take(),
                &mut self.val.nmc_strategy,
            ),
            (
                "strategies.rl",
                self.strategies.rl.take(),
                &mut self.val.rl_strategy,
            ),
        ];
        for (key, path, slot) in slots {
            if let Some(p) = path {
                let full = base.join(&p);
                let text = fs::read_to_string(&full).map_err(|e| ConfigError::Io {
                    path: full.clone(),
                    source: e,
                })?;
                *slot = StrategySpec::from_json(&text)
                    .map_err(|e| invalid(key, format!("{}: {e}", p.display())))?;
            }
        }

        self.val.capture.validate().map_err(|e| match e {
            CaptureError::Range { field, msg } => invalid(format!("val.capture.{field}"), msg),
        })?;
        self.val.llc.validate().map_err(|e| match e {
            LlcError::Config { field, msg } => invalid(format!("val.llc.{field}"), msg),
            other => invalid("val.llc", other),
        })?;
        self.val.validate(a.n_actions).map_err(|e| match e {
            ValError::Config { field, msg } => invalid(format!("val.{field}"), msg),
            other => invalid("val", other),
        })?;
        Ok(self)
    }

    /// Canonical JSON of the resolved config with a note per key.
    pub fn dump(&self) -> String {
        let value = serde_json::json!({ "config": self, "notes": notes() });
        let mut s = serde_json::to_string_pretty(&value).expect("configs always serialize");
        s.push('\n');
        s
    }

    /// SHA-256 of the canonical config JSON.
    pub fn hash(&self) -> String {
        sha256_hex(
            serde_json::to_string(self)
                .expect("configs always serialize")
                .as_bytes(),
        )
    }
}

fn notes() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        (
            "constants.mu",
            "m^3/s^2, WGS-84 gravitational parameter by default",
        ),
        (
            "constants.r0_orbit",
            "m, chief orbit radius; 7,357,000 m gives a 6280 s period",
        ),
        ("constants.mass", "kg, deputy mass"),
        (
            "constants.sigma_mu",
            "rad/s, derived from mu and r0_orbit; a supplied value must agree to 1e-9",
        ),
        (
            "actions.n_actions",
            "ring waypoints and NMC phase offsets, 20 by default",
        ),
        ("actions.radius", "m, ring radius and NMC range"),
        (
            "actions.nmc_samples",
            "samples per NMC over one period, endpoints included",
        ),
        ("mc.n_samples", "rotation samples per mode, 1000 by default"),
        (
            "mc.omega_nominal",
            "rad/s body rate overriding every mode's nominal rate",
        ),
        (
            "mc.omega_bound_b",
            "proportional rate perturbation bound, 0.2 by default",
        ),
        (
            "mc.attitude_bound",
            "rad, largest attitude perturbation, π/6 by default",
        ),
        ("mc.n_key", "key points on the spherical stand-in"),
        (
            "mc.n_agloc",
            "candidate deputy locations, must equal actions.n_actions",
        ),
        ("mc.fov", "rad, camera half-angle"),
        ("mc.occ", "rad, sun-exclusion half-angle"),
        ("mc.horizon", "s, one orbital period by default"),
        ("mc.imaging_interval", "s between images"),
        ("mc.threshold", "coverage fraction counted as complete"),
        ("mc.rng_seed", "seed of every Monte-Carlo stream"),
        (
            "val.threshold_m",
            "coverage fraction that ends a trial, 0.85 by default",
        ),
        ("val.horizon_t", "s, trial horizon, 6280 by default"),
        (
            "val.capture",
            "camera and illumination model, Blinn-Phong with Earth shadow by default",
        ),
        (
            "val.spawn_shell",
            "m, inner and outer radius of the entrance spawn shell",
        ),
        ("val.keep_out", "m, keep-out sphere radius"),
        ("val.entrance_min_tof", "s, shortest entrance transfer"),
        (
            "val.trials_per_cell",
            "trials per mode and policy, 30 by default",
        ),
        ("val.rng_seed", "seed of every validation stream"),
        ("val.llc", "tracking controller limits"),
        ("strategies", "strategy files; cleared once loaded into val"),
        ("out_dir", "output directory used when --out is absent"),
    ])
}

fn parse_value(text: &str, file: &Path) -> Result<serde_json::Value, ConfigError> {
    let perr = |msg: String| ConfigError::Parse {
        file: file.to_path_buf(),
        msg,
    };
    let is_json = file
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let value = if text.trim().is_empty() {
        serde_json::Value::Object(Default::default())
    } else if is_json {
        serde_json::from_str(text).map_err(|e| perr(e.to_string()))?
    } else {
        let table: toml::Table = toml::from_str(text).map_err(|e| perr(e.to_string()))?;
        serde_json::to_value(table).map_err(|e| perr(e.to_string()))?
    };
    // A resolved dump reloads as its config.
    if let serde_json::Value::Object(map) = &value {
        if map.len() == 2 && map.contains_key("notes") {
            if let Some(cfg) = map.get("config") {
                return Ok(cfg.clone());
            }
        }
    }
    Ok(value)
}

/// Parses and resolves a config held in memory; `name` picks the format by
/// extension and `base` resolves strategy paths.
pub fn parse_config(text: &str, name: &Path, base: &Path) -> Result<ExperimentConfig, ConfigError> {
    let value = parse_value(text, name)?;
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        invalid(
            if path == "." { String::new() } else { path },
            e.into_inner(),
        )
    })?;
    cfg.resolve(base)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_config(&text, path, path.parent().unwrap_or(Path::new(".")))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// CSV with a header row and `\n` line endings.
fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory writes succeed");
    for r in rows {
        w.write_record(&r).expect("in-memory writes succeed");
    }
    w.into_inner().expect("in-memory writes succeed")
}

pub const EVAL_COLUMNS: [&str; 6] = [
    "strategy",
    "kind",
    "mean_inspection_fraction",
    "mean_time_to_threshold",
    "mean_fuel",
    "n_samples",
];

pub fn eval_csv(results: &[EvalResult]) -> Vec<u8> {
    csv_bytes(
        &EVAL_COLUMNS,
        results.iter().map(|r| {
            vec![
                r.strategy.label(),
                format!("{:?}", r.strategy.kind),
                num(r.mean_inspection_fraction),
                num(r.mean_time_to_threshold),
                num(r.mean_fuel),
                r.n_samples.to_string(),
            ]
        }),
    )
}

pub const TRIAL_COLUMNS: [&str; 9] = [
    "mode",
    "policy",
    "trial",
    "fuel_total",
    "inspection_fraction",
    "success",
    "tau",
    "end_time",
    "failure",
];

pub fn trials_csv(records: &[TrialRecord]) -> Vec<u8> {
    csv_bytes(
        &TRIAL_COLUMNS,
        records.iter().map(|r| {
            vec![
                r.mode.name().into(),
                r.policy.name().into(),
                r.trial.to_string(),
                num(r.fuel_total),
                num(r.inspection_fraction),
                r.success.to_string(),
                opt(r.tau),
                num(r.end_time),
                r.failure.clone().unwrap_or_default(),
            ]
        }),
    )
}

pub const DEPUTY_COLUMNS: [&str; 10] = [
    "mode",
    "policy",
    "trial",
    "deputy",
    "spawn_x",
    "spawn_y",
    "spawn_z",
    "entrance_fuel",
    "entrance_end",
    "fuel",
];

pub fn deputies_csv(records: &[TrialRecord]) -> Vec<u8> {
    csv_bytes(
        &DEPUTY_COLUMNS,
        records.iter().flat_map(|r| {
            r.deputies.iter().enumerate().map(move |(k, d)| {
                vec![
                    r.mode.name().into(),
                    r.policy.name().into(),
                    r.trial.to_string(),
                    k.to_string(),
                    num(d.spawn[0]),
                    num(d.spawn[1]),
                    num(d.spawn[2]),
                    num(d.entrance_fuel),
                    opt(d.entrance_end),
                    num(d.fuel),
                ]
            })
        }),
    )
}

pub const SERIES_COLUMNS: [&str; 3] = ["t", "fuel", "coverage"];

pub fn series_csv(series: &[SeriesPoint]) -> Vec<u8> {
    csv_bytes(
        &SERIES_COLUMNS,
        series
            .iter()
            .map(|p| vec![num(p.t), num(p.fuel), num(p.coverage)]),
    )
}

/// Relative path of a trial's series file.
pub fn series_path(r: &TrialRecord) -> String {
    format!(
        "series/{}_{}/{:03}.csv",
        r.mode.name(),
        r.policy.name(),
        r.trial
    )
}

/// Reads the leading columns of a trials CSV back into records without
/// deputies or series.
pub fn read_trials_csv(bytes: &[u8]) -> Result<Vec<TrialRecord>, ConfigError> {
    let file = PathBuf::from("trials.csv");
    let perr = |msg: String| ConfigError::Parse {
        file: file.clone(),
        msg,
    };
    let mut rd = csv::Reader::from_reader(bytes);
    let header = rd.headers().map_err(|e| perr(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != TRIAL_COLUMNS {
        return Err(perr(format!(
            "expected columns {}",
            TRIAL_COLUMNS.join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| perr(e.to_string()))?;
        let row = line + 2;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let f = |i: usize| -> Result<f64, ConfigError> {
            field(i)
                .parse()
                .map_err(|e| perr(format!("line {row}, {}: {e}", TRIAL_COLUMNS[i])))
        };
        let mode: RsoMode = field(0)
            .parse()
            .map_err(|e| perr(format!("line {row}: {e}")))?;
        let policy: Policy = field(1)
            .parse()
            .map_err(|e| perr(format!("line {row}: {e}")))?;
        out.push(TrialRecord {
            mode,
            policy,
            trial: field(2)
                .parse()
                .map_err(|e| perr(format!("line {row}, trial: {e}")))?,
            fuel_total: f(3)?,
            inspection_fraction: f(4)?,
            success: field(5)
                .parse()
                .map_err(|e| perr(format!("line {row}, success: {e}")))?,
            tau: if field(6).is_empty() {
                None
            } else {
                Some(f(6)?)
            },
            end_time: f(7)?,
            failure: Some(field(8).to_string()).filter(|s| !s.is_empty()),
            deputies: Vec::new(),
            series: Vec::new(),
        });
    }
    Ok(out)
}

/// Policy × mode data of one response.
pub fn factorial(records: &[TrialRecord], response: Response) -> Result<FactorialData, StatsError> {
    let a: Vec<&str> = records.iter().map(|r| r.policy.name()).collect();
    let b: Vec<&str> = records.iter().map(|r| r.mode.name()).collect();
    let y: Vec<f64> = records.iter().map(response).collect();
    FactorialData::from_labels(&a, &b, &y)
}

/// The analysed responses, in output order.
/// Extracts one response from a record.
pub type Response = fn(&TrialRecord) -> f64;

pub const RESPONSES: [(&str, Response); 2] = [
    ("fuel", |r| r.fuel_total),
    ("inspection_fraction", |r| r.inspection_fraction),
];

fn effect_label(e: &str) -> &str {
    match e {
        "A" => "policy",
        "B" => "mode",
        "A:B" => "policy:mode",
        other => other,
    }
}

fn interaction_significant(t: &AnovaTable) -> bool {
    t.row("A:B")
        .and_then(|r| r.p)
        .is_some_and(|p| p < INTERACTION_ALPHA)
}

/// Every analysis table as `(file name, CSV bytes)`.
pub fn analysis_files(records: &[TrialRecord]) -> Result<Vec<(String, Vec<u8>)>, StatsError> {
    let mut summary = Vec::new();
    let mut anova = Vec::new();
    let mut levene = Vec::new();
    let mut art = Vec::new();
    let mut contrasts = Vec::new();
    let mut qq = Vec::new();
    for (name, response) in RESPONSES {
        let d = factorial(records, response)?;
        for s in summarize(&d) {
            summary.push(vec![
                name.into(),
                s.a,
                s.b,
                s.n.to_string(),
                num(s.mean),
                num(s.sd),
            ]);
        }
        let table = two_way_anova(&d);
        for r in &table.rows {
            anova.push(vec![
                name.into(),
                effect_label(&r.effect).into(),
                num(r.df),
                num(r.sum_sq),
                num(r.mean_sq),
                opt(r.f),
                opt(r.p),
            ]);
        }
        let l = levene_test(&d);
        levene.push(vec![
            name.into(),
            num(l.statistic),
            num(l.df1),
            num(l.df2),
            num(l.p),
        ]);
        let art_rows = art_anova(&d);
        for r in &art_rows {
            art.push(vec![
                name.into(),
                effect_label(&r.effect).into(),
                num(r.df),
                num(r.df_res),
                num(r.sum_sq),
                num(r.sum_sq_res),
                opt(r.f),
                opt(r.p),
            ]);
        }
        let simple = interaction_significant(&table);
        let art_simple = art_rows[2].p.is_some_and(|p| p < INTERACTION_ALPHA);
        let ranked = art_ranks(&d, if art_simple { Effect::AB } else { Effect::A });
        for (scale, data, family) in [("anova", &d, simple), ("art", &ranked, art_simple)] {
            for c in pairwise_contrasts_with(data, family) {
                contrasts.push(vec![
                    name.into(),
                    scale.into(),
                    c.contrast,
                    num(c.estimate),
                    num(c.se),
                    num(c.df),
                    num(c.t),
                    num(c.p_raw),
                    num(c.p_adj),
                ]);
            }
        }
        for (x, y) in qq_data(&anova_residuals(&d)) {
            qq.push(vec![name.into(), num(x), num(y)]);
        }
    }
    Ok(vec![
        (
            "summary.csv".into(),
            csv_bytes(&["response", "policy", "mode", "n", "mean", "sd"], summary),
        ),
        (
            "anova.csv".into(),
            csv_bytes(
                &["response", "effect", "df", "sum_sq", "mean_sq", "f", "p"],
                anova,
            ),
        ),
        (
            "levene.csv".into(),
            csv_bytes(&["response", "statistic", "df1", "df2", "p"], levene),
        ),
        (
            "art.csv".into(),
            csv_bytes(
                &[
                    "response",
                    "effect",
                    "df",
                    "df_res",
                    "sum_sq",
                    "sum_sq_res",
                    "f",
                    "p",
                ],
                art,
            ),
        ),
        (
            "contrasts.csv".into(),
            csv_bytes(
                &[
                    "response", "scale", "contrast", "estimate", "se", "df", "t", "p_raw", "p_adj",
                ],
                contrasts,
            ),
        ),
        (
            "qq.csv".into(),
            csv_bytes(&["response", "theoretical", "sample"], qq),
        ),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    /// SHA-256 per relative path.
    pub files: BTreeMap<String, String>,
}

/// Writes each `(relative path, bytes)` under `dir` plus `manifest.json`.
pub fn write_results(
    dir: &Path,
    files: &[(String, Vec<u8>)],
    config_hash: &str,
    seed: u64,
) -> Result<Manifest, ConfigError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ConfigError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut manifest = Manifest {
        config_hash: config_hash.into(),
        seed,
        files: BTreeMap::new(),
    };
    for (name, bytes) in files {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, bytes).map_err(io_err(&path))?;
        manifest.files.insert(name.clone(), sha256_hex(bytes));
    }
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifests always serialize");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, name: &str) -> Result<ExperimentConfig, ConfigError> {
        parse_config(text, Path::new(name), Path::new("."))
    }

    fn path_of(e: ConfigError) -> String {
        match e {
            ConfigError::Invalid { path, .. } => path,
            other => panic!("expected a validation error, got {other}"),
        }
    }

    #[test]
    fn empty_file_gives_defaults() {
        for name in ["a.toml", "a.json"] {
            let cfg = parse("", name).unwrap();
            assert_eq!(cfg.constants.r0_orbit, 7_357_000.0);
            assert_eq!(cfg.val.threshold_m, 0.85);
            assert_eq!(cfg.val.horizon_t, 6280.0);
            assert_eq!(cfg.mc.n_samples, 1000);
            assert_eq!(cfg.val.rl_strategy.n_deputies(), 3);
            assert_eq!(cfg.val.ph_strategy.n_deputies(), 3);
            assert_eq!(cfg.constants.sigma_mu, Some(cfg.constants().sigma_mu()));
        }
    }

    #[test]
    fn errors_name_the_offending_key() {
        let e = parse("[val.capture]\nfov_half_angle = -1.0\n", "a.toml").unwrap_err();
        assert_eq!(path_of(e), "val.capture.fov_half_angle");
        let e = parse("[mc]\nn_sampels = 3\n", "a.toml").unwrap_err();
        assert!(path_of(e).starts_with("mc"));
        let e = parse(r#"{"val": {"trials_per_cell": 0}}"#, "a.json").unwrap_err();
        assert_eq!(path_of(e), "val.trials_per_cell");
        let e = parse("[mc]\nfov = 0.0\n", "a.toml").unwrap_err();
        assert_eq!(path_of(e), "mc.fov");
        let e = parse("[mc]\nn_agloc = 12\n", "a.toml").unwrap_err();
        assert_eq!(path_of(e), "mc.n_agloc");
        let e = parse("[val]\nhorizon_t = 0.0\n", "a.toml").unwrap_err();
        assert_eq!(path_of(e), "val.horizon_t");
        assert!(matches!(
            parse("[mc", "a.toml").unwrap_err(),
            ConfigError::Parse { .. }
        ));
    }

    #[test]
    fn sigma_mu_cross_check() {
        let derived = Constants::default().sigma_mu();
        assert!(parse(&format!("[constants]\nsigma_mu = {derived}\n"), "a.toml").is_ok());
        let off = derived + 1e-8;
        let e = parse(&format!("[constants]\nsigma_mu = {off}\n"), "a.toml").unwrap_err();
        assert_eq!(path_of(e), "constants.sigma_mu");
    }

    #[test]
    fn dump_is_a_fixed_point() {
        let cfg = parse(
            "[val]\ntrials_per_cell = 4\nmodes = [\"StaticCWH\"]\n",
            "a.toml",
        )
        .unwrap();
        let d1 = cfg.dump();
        let d2 = parse(&d1, "dump.json").unwrap().dump();
        assert_eq!(d1, d2);
        assert!(d1.contains("\"notes\""));
    }

    #[test]
    fn strategy_files_are_inlined() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("ph.json"),
            StrategySpec::point_hold(&[1, 2, 3]).to_json(),
        )
        .unwrap();
        fs::write(
            dir.path().join("exp.toml"),
            "[strategies]\nph = \"ph.json\"\n",
        )
        .unwrap();
        let cfg = load_config(&dir.path().join("exp.toml")).unwrap();
        assert_eq!(cfg.val.ph_strategy, StrategySpec::point_hold(&[1, 2, 3]));
        assert_eq!(cfg.strategies, StrategyPaths::default());
        fs::write(
            dir.path().join("bad.toml"),
            "[strategies]\nph = \"missing.json\"\n",
        )
        .unwrap();
        assert!(matches!(
            load_config(&dir.path().join("bad.toml")),
            Err(ConfigError::Io { .. })
        ));
    }

    #[test]
    fn empty_records_give_header_only_csv() {
        assert_eq!(
            trials_csv(&[]),
            format!("{}\n", TRIAL_COLUMNS.join(",")).into_bytes()
        );
        assert_eq!(
            eval_csv(&[]),
            format!("{}\n", EVAL_COLUMNS.join(",")).into_bytes()
        );
    }

    #[test]
    fn manifest_checksums_match_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = vec![
            ("a.csv".to_string(), b"x,y\n1,2\n".to_vec()),
            ("series/c/000.csv".to_string(), b"t\n0\n".to_vec()),
        ];
        let m = write_results(dir.path(), &files, "h", 9).unwrap();
        for (name, sum) in &m.files {
            assert_eq!(&sha256_hex(&fs::read(dir.path().join(name)).unwrap()), sum);
        }
        let again = write_results(dir.path(), &files, "h", 9).unwrap();
        assert_eq!(m, again);
        let text = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        assert_eq!(serde_json::from_str::<Manifest>(&text).unwrap(), m);
    }

    #[test]
    fn trials_round_trip() {
        let rec = |mode, policy, trial, fuel: f64, tau: Option<f64>| TrialRecord {
            mode,
            policy,
            trial,
            fuel_total: fuel,
            inspection_fraction: 0.1 * trial as f64 + 1.0 / 3.0,
            success: tau.is_some(),
            tau,
            end_time: 6280.0,
            failure: if trial == 1 {
                Some("thrust saturated, x".into())
            } else {
                None
            },
            deputies: Vec::new(),
            series: Vec::new(),
        };
        let records = vec![
            rec(RsoMode::StaticCwh, Policy::Ph, 0, 1.0 / 7.0, Some(300.0)),
            rec(RsoMode::StableTumble, Policy::Rl, 1, 2.5e-12, None),
        ];
        assert_eq!(read_trials_csv(&trials_csv(&records)).unwrap(), records);
        assert!(read_trials_csv(b"a,b\n1,2\n").is_err());
    }
}
