//! Monte-Carlo evaluation of passive strategies and Pareto selection.
//!
//! For every sampled initial rotation the evaluator images the spherical key
//! point cloud from each candidate location at each imaging instant, once.
//! A strategy's coverage is then the union of its deputies' bitsets, so all
//! strategies of a campaign share the expensive geometry.

use crate::attitude::{propagate_rotation, AttitudeError, InertiaDiag, RotState};
use crate::dynamics::{Constants, RelState6};
use crate::guidance::{
    build_nmc_family, build_waypoint_ring, tof_heuristic, ActionKind, ActionSpace,
    ActionSpaceConfig, GuidanceError, StrategyKind, StrategySpec,
};
use crate::llc::{hold_chain, LlcConfig, LlcError};
use crate::rng::{domain, stream};
use crate::sensing::{capture, sphere_cloud, sun_in_hill, CaptureConfig, PoiCloud};
use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("invalid Monte-Carlo setting {field}: {msg}")]
    Config { field: &'static str, msg: String },
    #[error("{0:?} is not a passive strategy")]
    NotPassive(StrategyKind),
    #[error(transparent)]
    Guidance(#[from] GuidanceError),
    #[error(transparent)]
    Llc(#[from] LlcError),
    #[error(transparent)]
    Attitude(#[from] AttitudeError),
}

/// Reference rotational behaviour of the inspected object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RsoMode {
    #[serde(rename = "StaticCWH")]
    StaticCwh,
    StableTumble,
}

impl RsoMode {
    pub const ALL: [RsoMode; 2] = [RsoMode::StaticCwh, RsoMode::StableTumble];

    /// Nominal body rate: one revolution per orbit, or a fast stable tumble.
    pub fn omega_nominal(self, c: &Constants) -> Vector3<f64> {
        let n = c.sigma_mu();
        match self {
            Self::StaticCwh => Vector3::new(0.0, 0.0, n),
            Self::StableTumble => Vector3::new(5.0 * n, 0.0, 50.0 * n),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::StaticCwh => "StaticCWH",
            Self::StableTumble => "StableTumble",
        }
    }

    /// Stable small integer used to separate random streams.
    pub fn stream_id(self) -> u64 {
        match self {
            Self::StaticCwh => 0,
            Self::StableTumble => 1,
        }
    }
}

impl fmt::Display for RsoMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RsoMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "StaticCWH" => Ok(Self::StaticCwh),
            "StableTumble" => Ok(Self::StableTumble),
            _ => Err(format!(
                "unknown RSO mode {s:?} (expected StaticCWH or StableTumble)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub n_samples: usize,
    /// Overrides every mode's nominal rate when set (rad/s, body frame).
    pub omega_nominal: Option<[f64; 3]>,
    /// Per-component proportional rate perturbation bound.
    pub omega_bound_b: f64,
    /// Largest attitude perturbation angle (rad).
    pub attitude_bound: f64,
    pub inertia: InertiaDiag,
    /// Nominal attitude, scalar first.
    pub q_nom: [f64; 4],
    /// Rotation integration step (s).
    pub dt: f64,
    /// Key points on the spherical stand-in.
    pub n_key: usize,
    /// Candidate deputy locations.
    pub n_agloc: usize,
    pub key_radius: f64,
    pub fov: f64,
    /// Sun-exclusion half-angle around the boresight (rad).
    pub occ: f64,
    pub horizon: f64,
    pub imaging_interval: f64,
    pub threshold: f64,
    pub rso_modes: Vec<RsoMode>,
    pub rng_seed: u64,
    /// Index of the first sample; lets a run be split into disjoint batches.
    pub sample_offset: u64,
    /// Keep per-sample records in every result.
    pub keep_samples: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            omega_nominal: None,
            omega_bound_b: 0.2,
            attitude_bound: PI / 6.0,
            inertia: InertiaDiag::default(),
            q_nom: [1.0, 0.0, 0.0, 0.0],
            dt: 1.0,
            n_key: 20,
            n_agloc: 20,
            key_radius: 10.0,
            fov: PI / 6.0,
            occ: PI / 6.0,
            horizon: 6280.0,
            imaging_interval: 100.0,
            threshold: 0.85,
            rso_modes: RsoMode::ALL.to_vec(),
            rng_seed: 0,
            sample_offset: 0,
            keep_samples: false,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<(), McError> {
        fn err(field: &'static str, msg: String) -> Result<(), McError> {
            Err(McError::Config { field, msg })
        }
        let positive = |field: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                err(field, format!("must be finite and positive, got {v}"))
            }
        };
        if self.n_samples == 0 {
            return err("n_samples", "must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.omega_bound_b) {
            return err(
                "omega_bound_b",
                format!("must be in [0, 1], got {}", self.omega_bound_b),
            );
        }
        if !(0.0..=PI).contains(&self.attitude_bound) {
            return err(
                "attitude_bound",
                format!("must be in [0, π], got {}", self.attitude_bound),
            );
        }
        if let Some(w) = self.omega_nominal {
            if !w.iter().all(|v| v.is_finite()) {
                return err("omega_nominal", "must be finite".into());
            }
        }
        let qn = self.q_nom.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !qn.is_finite() || (qn - 1.0).abs() > 1e-9 {
            return err("q_nom", format!("must be a unit quaternion, norm is {qn}"));
        }
        self.inertia.validate().map_err(|e| McError::Config {
            field: "inertia",
            msg: e.to_string(),
        })?;
        positive("dt", self.dt)?;
        positive("key_radius", self.key_radius)?;
        positive("horizon", self.horizon)?;
        positive("imaging_interval", self.imaging_interval)?;
        if self.n_key < 4 {
            return err("n_key", format!("must be at least 4, got {}", self.n_key));
        }
        if self.n_agloc < 2 {
            return err(
                "n_agloc",
                format!("must be at least 2, got {}", self.n_agloc),
            );
        }
        if !(0.0..=PI).contains(&self.fov) {
            return err("fov", format!("must be in [0, π], got {}", self.fov));
        }
        if !(0.0..=PI).contains(&self.occ) {
            return err("occ", format!("must be in [0, π], got {}", self.occ));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return err(
                "threshold",
                format!("must be in [0, 1], got {}", self.threshold),
            );
        }
        if self.rso_modes.is_empty() {
            return err("rso_modes", "needs at least one mode".into());
        }
        Ok(())
    }

    /// Imaging instants `0, t̄, 2t̄, …` up to the horizon.
    pub fn instants(&self) -> Vec<f64> {
        imaging_instants(self.imaging_interval, self.horizon)
    }

    fn q_nom(&self) -> UnitQuaternion<f64> {
        let [w, i, j, k] = self.q_nom;
        UnitQuaternion::new_normalize(nalgebra::Quaternion::new(w, i, j, k))
    }

    fn omega_for(&self, mode: RsoMode, c: &Constants) -> Vector3<f64> {
        self.omega_nominal
            .map(Vector3::from)
            .unwrap_or_else(|| mode.omega_nominal(c))
    }
}

/// `0, step, 2·step, …` while not past `horizon`.
pub fn imaging_instants(step: f64, horizon: f64) -> Vec<f64> {
    let n = (horizon / step + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

/// Perturbed initial rotation: each rate component scaled by
/// `1 + U[−b, b]`, attitude rotated by `U[0, θ_u]` about a uniform axis.
pub fn sample_initial_rotation<R: Rng>(
    q_nom: &UnitQuaternion<f64>,
    omega_nominal: &Vector3<f64>,
    b: f64,
    theta_u: f64,
    rng: &mut R,
) -> RotState {
    let mut omega = *omega_nominal;
    for k in 0..3 {
        omega[k] *= 1.0 + b * (2.0 * rng.random::<f64>() - 1.0);
    }
    let angle = theta_u * rng.random::<f64>();
    let z = 2.0 * rng.random::<f64>() - 1.0;
    let phi = 2.0 * PI * rng.random::<f64>();
    let s = (1.0 - z * z).max(0.0).sqrt();
    let axis = nalgebra::Unit::new_normalize(Vector3::new(s * phi.cos(), s * phi.sin(), z));
    let q = q_nom * UnitQuaternion::from_axis_angle(&axis, angle);
    RotState::new(q, omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub mode: RsoMode,
    pub sample: u64,
    /// Coverage at the horizon.
    pub fraction: f64,
    /// First imaging instant reaching the threshold, or the horizon if none.
    pub time: f64,
    pub reached: bool,
    /// Team ΔV over the horizon (m/s).
    pub fuel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub strategy: StrategySpec,
    pub mean_inspection_fraction: f64,
    pub mean_time_to_threshold: f64,
    pub mean_fuel: f64,
    /// Samples evaluated per mode.
    pub n_samples: usize,
    pub samples: Vec<SampleRecord>,
}

/// Captures of one mode: `caps[((sample·instants + k)·actions + a)·words + w]`.
struct ModeTable {
    mode: RsoMode,
    ring: Vec<u64>,
    nmc: Vec<u64>,
}

/// Shared precomputation for a set of passive strategies.
pub struct McEvaluator {
    cfg: McConfig,
    instants: Vec<f64>,
    n_poi: usize,
    words: usize,
    n_actions: usize,
    tables: Vec<ModeTable>,
    hold_fuel: Vec<f64>,
}

fn capture_config(cfg: &McConfig) -> CaptureConfig {
    CaptureConfig::binary(cfg.fov, Some(cfg.occ))
}

impl McEvaluator {
    /// Builds capture tables for the requested action kinds (both when `None`).
    pub fn new(
        cfg: &McConfig,
        space: &ActionSpaceConfig,
        c: &Constants,
        kinds: Option<&[ActionKind]>,
    ) -> Result<Self, McError> {
        cfg.validate()?;
        if space.n_actions != cfg.n_agloc {
            return Err(McError::Config {
                field: "n_agloc",
                msg: format!(
                    "{} differs from the action space size {}",
                    cfg.n_agloc, space.n_actions
                ),
            });
        }
        let wants = |k: ActionKind| kinds.is_none_or(|ks| ks.contains(&k));
        let ring = build_waypoint_ring(space.n_actions, space.radius, c)?;
        let nmc = build_nmc_family(space.n_actions, space.radius, space.nmc_samples, c)?;
        let cloud = sphere_cloud(cfg.n_key, cfg.key_radius);
        let instants = cfg.instants();
        let words = cfg.n_key.div_ceil(64);
        let cap_cfg = capture_config(cfg);

        let mut tables = Vec::with_capacity(cfg.rso_modes.len());
        for &mode in &cfg.rso_modes {
            let omega = cfg.omega_for(mode, c);
            let per_sample: Vec<(Vec<u64>, Vec<u64>)> = (0..cfg.n_samples as u64)
                .into_par_iter()
                .map(|s| {
                    let mut rng = stream(
                        cfg.rng_seed,
                        domain::MC_ROTATION,
                        mode.stream_id(),
                        cfg.sample_offset + s,
                    );
                    let rot0 = sample_initial_rotation(
                        &cfg.q_nom(),
                        &omega,
                        cfg.omega_bound_b,
                        cfg.attitude_bound,
                        &mut rng,
                    );
                    sample_tables(
                        &rot0, cfg, c, &instants, &cloud, &cap_cfg, words, &ring, &nmc, wants,
                    )
                })
                .collect::<Result<_, McError>>()?;
            let (mut r, mut n) = (Vec::new(), Vec::new());
            for (a, b) in per_sample {
                r.extend(a);
                n.extend(b);
            }
            tables.push(ModeTable {
                mode,
                ring: r,
                nmc: n,
            });
        }

        let mut hold_fuel = Vec::new();
        if wants(ActionKind::WaypointRing) {
            let llc = LlcConfig::default();
            hold_fuel = ring
                .waypoints
                .par_iter()
                .map(|w| {
                    let dwell = tof_heuristic(w, w, &ring, c)?;
                    let (_, dv) =
                        hold_chain(&RelState6::at_rest(*w), w, dwell, cfg.horizon, &llc, c)?;
                    Ok(dv)
                })
                .collect::<Result<_, McError>>()?;
        }

        Ok(Self {
            cfg: cfg.clone(),
            instants,
            n_poi: cfg.n_key,
            words,
            n_actions: space.n_actions,
            tables,
            hold_fuel,
        })
    }

    pub fn instants(&self) -> &[f64] {
        &self.instants
    }

    /// ΔV to hold each ring waypoint over the horizon.
    pub fn hold_fuel(&self) -> &[f64] {
        &self.hold_fuel
    }

    fn check(&self, spec: &StrategySpec) -> Result<(), McError> {
        if !spec.kind.is_passive() {
            return Err(McError::NotPassive(spec.kind));
        }
        spec.validate(self.n_actions)?;
        let empty = match spec.kind {
            StrategyKind::PointHold => self.hold_fuel.is_empty(),
            _ => self.tables.first().is_some_and(|t| t.nmc.is_empty()),
        };
        if empty {
            return Err(McError::Config {
                field: "kinds",
                msg: format!("evaluator was built without tables for {:?}", spec.kind),
            });
        }
        Ok(())
    }

    /// Covered POI count at every imaging instant for one sample.
    fn counts(
        &self,
        spec: &StrategySpec,
        table: &ModeTable,
        sample: usize,
        scratch: &mut [u64],
    ) -> Vec<usize> {
        let caps = match spec.kind {
            StrategyKind::PointHold => &table.ring,
            _ => &table.nmc,
        };
        let stride = self.n_actions * self.words;
        let base = sample * self.instants.len() * stride;
        scratch.fill(0);
        let mut out = Vec::with_capacity(self.instants.len());
        for k in 0..self.instants.len() {
            let row = base + k * stride;
            for a in &spec.assignments {
                let off = row + a[0] * self.words;
                for (w, s) in scratch.iter_mut().enumerate() {
                    *s |= caps[off + w];
                }
            }
            out.push(scratch.iter().map(|w| w.count_ones() as usize).sum());
        }
        out
    }

    /// Coverage fraction at every imaging instant for one sample of one mode.
    pub fn coverage_curve(
        &self,
        spec: &StrategySpec,
        mode_index: usize,
        sample: usize,
    ) -> Result<Vec<f64>, McError> {
        self.check(spec)?;
        let mut scratch = vec![0u64; self.words];
        Ok(self
            .counts(spec, &self.tables[mode_index], sample, &mut scratch)
            .into_iter()
            .map(|n| n as f64 / self.n_poi as f64)
            .collect())
    }

    pub fn evaluate(&self, spec: &StrategySpec) -> Result<EvalResult, McError> {
        self.check(spec)?;
        let fuel: f64 = match spec.kind {
            StrategyKind::PointHold => spec.assignments.iter().map(|a| self.hold_fuel[a[0]]).sum(),
            _ => 0.0,
        };
        let horizon = *self.instants.last().expect("at least the zero instant");
        let mut scratch = vec![0u64; self.words];
        let (mut sf, mut st, mut count) = (0.0, 0.0, 0usize);
        let mut samples = Vec::new();
        for table in &self.tables {
            for s in 0..self.cfg.n_samples {
                let counts = self.counts(spec, table, s, &mut scratch);
                let frac = |n: usize| n as f64 / self.n_poi as f64;
                let hit = counts.iter().position(|&n| frac(n) >= self.cfg.threshold);
                let fraction = frac(*counts.last().expect("at least one instant"));
                let time = hit.map_or(self.cfg.horizon.max(horizon), |k| self.instants[k]);
                sf += fraction;
                st += time;
                count += 1;
                if self.cfg.keep_samples {
                    samples.push(SampleRecord {
                        mode: table.mode,
                        sample: self.cfg.sample_offset + s as u64,
                        fraction,
                        time,
                        reached: hit.is_some(),
                        fuel,
                    });
                }
            }
        }
        Ok(EvalResult {
            strategy: spec.clone(),
            mean_inspection_fraction: sf / count as f64,
            mean_time_to_threshold: st / count as f64,
            mean_fuel: fuel,
            n_samples: self.cfg.n_samples,
            samples,
        })
    }

    /// Evaluates many strategies in parallel; output order follows input order.
    pub fn evaluate_all(&self, specs: &[StrategySpec]) -> Result<Vec<EvalResult>, McError> {
        specs.par_iter().map(|s| self.evaluate(s)).collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn sample_tables(
    rot0: &RotState,
    cfg: &McConfig,
    c: &Constants,
    instants: &[f64],
    cloud: &PoiCloud,
    cap_cfg: &CaptureConfig,
    words: usize,
    ring: &ActionSpace,
    nmc: &ActionSpace,
    wants: impl Fn(ActionKind) -> bool,
) -> Result<(Vec<u64>, Vec<u64>), McError> {
    let n = ring.cardinality();
    let mut ring_caps = Vec::new();
    let mut nmc_caps = Vec::new();
    let mut rot = *rot0;
    let mut t_prev = 0.0;
    let image = |rot: &RotState, v: &Vector3<f64>, t: f64, out: &mut Vec<u64>| {
        let phase = c.sigma_mu() * t;
        let ids = capture(cloud, rot, v, &sun_in_hill(phase), phase, cap_cfg);
        let start = out.len();
        out.resize(start + words, 0);
        for i in ids {
            out[start + i / 64] |= 1u64 << (i % 64);
        }
    };
    for &t in instants {
        rot = propagate_rotation(&rot, &cfg.inertia, t - t_prev, cfg.dt)?;
        t_prev = t;
        for a in 0..n {
            if wants(ActionKind::WaypointRing) {
                image(&rot, &ring.waypoints[a], t, &mut ring_caps);
            }
            if wants(ActionKind::NmcFamily) {
                image(&rot, &nmc.position(a, t, c), t, &mut nmc_caps);
            }
        }
    }
    Ok((ring_caps, nmc_caps))
}

/// Evaluates one passive strategy from scratch.
pub fn evaluate_strategy(
    spec: &StrategySpec,
    cfg: &McConfig,
    space: &ActionSpaceConfig,
    c: &Constants,
) -> Result<EvalResult, McError> {
    let kind = [spec.kind.action_kind()];
    let ev = McEvaluator::new(cfg, space, c, Some(&kind))?;
    ev.evaluate(spec)
}

/// Every multiset of `n_deputies` actions from `space`, in lexicographic order.
pub fn enumerate_passive_strategies(space: &ActionSpace, n_deputies: usize) -> Vec<StrategySpec> {
    let m = space.cardinality();
    let mut out = Vec::new();
    if n_deputies == 0 || m == 0 {
        return out;
    }
    let mut idx = vec![0usize; n_deputies];
    loop {
        out.push(match space.kind {
            ActionKind::WaypointRing => StrategySpec::point_hold(&idx),
            ActionKind::NmcFamily => StrategySpec::nmc_hold(&idx),
        });
        let Some(k) = (0..n_deputies).rev().find(|&k| idx[k] + 1 < m) else {
            return out;
        };
        idx[k] += 1;
        for j in k + 1..n_deputies {
            idx[j] = idx[k];
        }
    }
}

/// Indices of the points not dominated under (fraction ↑, time ↓), ascending.
/// Identical points are all kept.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, ta) = points[a];
        let (fb, tb) = points[b];
        ta.total_cmp(&tb).then(fb.total_cmp(&fa))
    });
    let mut keep = Vec::new();
    let mut best_before = f64::NEG_INFINITY;
    let mut g = 0;
    while g < order.len() {
        let t = points[order[g]].1;
        let mut end = g;
        while end < order.len() && points[order[end]].1 == t {
            end += 1;
        }
        // The group is sorted by fraction descending.
        let top = points[order[g]].0;
        if top > best_before {
            keep.extend(
                order[g..end]
                    .iter()
                    .copied()
                    .filter(|&i| points[i].0 == top),
            );
        }
        best_before = best_before.max(top);
        g = end;
    }
    keep.sort_unstable();
    keep
}

/// Pareto front of evaluation results on (mean fraction, mean time).
pub fn pareto_results(results: &[EvalResult]) -> Vec<usize> {
    let pts: Vec<(f64, f64)> = results
        .iter()
        .map(|r| (r.mean_inspection_fraction, r.mean_time_to_threshold))
        .collect();
    pareto_front(&pts)
}
