//! Validation campaigns: entrance manoeuvres, bounded-thrust tracking,
//! Blinn-Phong imaging of a general mesh, and first-hitting-time termination.
//!
//! Every trial flies three deputies from random spawn points onto their
//! strategy, steps the whole scene at 1 s and images every `imaging_interval`
//! seconds from `t = 0`. The trial stops at the first image that lifts
//! coverage to the threshold, or at the horizon.

use crate::attitude::{propagate_rotation, AttitudeError, InertiaDiag, RotState};
use crate::dynamics::{step_constant, Constants, RelState6};
use crate::guidance::{
    build_nmc_family, build_waypoint_ring, greedy_score, predicted_gain, tof_heuristic,
    transfer_delta_v, ActionSpace, ActionSpaceConfig, Directive, GuidanceError, StrategyKind,
    StrategyRuntime, StrategySpec,
};
use crate::llc::{closure_thrust, LlcConfig, LlcError, Tracker};
use crate::mc_eval::{imaging_instants, sample_initial_rotation, RsoMode};
use crate::rng::{domain, stream};
use crate::sensing::{
    aura_standin, capture, sun_in_hill, CaptureConfig, InspectionState, PoiCloud, PoiSet,
};
use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValError {
    #[error("invalid validation setting {field}: {msg}")]
    Config { field: &'static str, msg: String },
    #[error(transparent)]
    Guidance(#[from] GuidanceError),
    #[error(transparent)]
    Llc(#[from] LlcError),
    #[error(transparent)]
    Attitude(#[from] AttitudeError),
}

/// Policy factor of the campaign. `Rl` is flown by the greedy active policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Policy {
    #[serde(rename = "PH")]
    Ph,
    #[serde(rename = "NMC")]
    Nmc,
    #[serde(rename = "RL")]
    Rl,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Ph, Policy::Nmc, Policy::Rl];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ph => "PH",
            Self::Nmc => "NMC",
            Self::Rl => "RL",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "PH" => Ok(Self::Ph),
            "NMC" => Ok(Self::Nmc),
            "RL" => Ok(Self::Rl),
            _ => Err(format!("unknown policy {s:?} (expected PH, NMC or RL)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValConfig {
    pub threshold_m: f64,
    pub horizon_t: f64,
    pub capture: CaptureConfig,
    pub omega_bound_b: f64,
    pub attitude_bound: f64,
    pub inertia: InertiaDiag,
    /// Inner and outer radius of the spawn shell (m).
    pub spawn_shell: [f64; 2],
    pub keep_out: f64,
    /// Shortest entrance transfer (s).
    pub entrance_min_tof: f64,
    pub trials_per_cell: usize,
    pub modes: Vec<RsoMode>,
    pub policies: Vec<Policy>,
    pub rng_seed: u64,
    pub dt: f64,
    pub imaging_interval: f64,
    pub ph_strategy: StrategySpec,
    pub nmc_strategy: StrategySpec,
    pub rl_strategy: StrategySpec,
    pub llc: LlcConfig,
    /// Keep 1 s fuel and coverage series in every record.
    pub keep_series: bool,
}

impl Default for ValConfig {
    fn default() -> Self {
        Self {
            threshold_m: 0.85,
            horizon_t: 6280.0,
            capture: CaptureConfig::default(),
            omega_bound_b: 0.2,
            attitude_bound: PI / 6.0,
            inertia: InertiaDiag::default(),
            spawn_shell: [150.0, 400.0],
            keep_out: 50.0,
            entrance_min_tof: 300.0,
            trials_per_cell: 30,
            modes: RsoMode::ALL.to_vec(),
            policies: Policy::ALL.to_vec(),
            rng_seed: 0,
            dt: 1.0,
            imaging_interval: 100.0,
            ph_strategy: StrategySpec::point_hold(&[0, 7, 13]),
            nmc_strategy: StrategySpec::nmc_hold(&[0, 7, 13]),
            rl_strategy: StrategySpec::greedy(3),
            llc: LlcConfig::default(),
            keep_series: true,
        }
    }
}

impl ValConfig {
    pub fn validate(&self, n_actions: usize) -> Result<(), ValError> {
        fn err(field: &'static str, msg: String) -> Result<(), ValError> {
            Err(ValError::Config { field, msg })
        }
        if !(0.0..=1.0).contains(&self.threshold_m) {
            return err(
                "threshold_m",
                format!("must be in [0, 1], got {}", self.threshold_m),
            );
        }
        for (field, v) in [
            ("horizon_t", self.horizon_t),
            ("dt", self.dt),
            ("imaging_interval", self.imaging_interval),
            ("entrance_min_tof", self.entrance_min_tof),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return err(field, format!("must be finite and positive, got {v}"));
            }
        }
        if self.dt != 1.0 {
            return err("dt", format!("the campaign steps at 1 s, got {}", self.dt));
        }
        if (self.imaging_interval / self.dt).fract() != 0.0 {
            return err("imaging_interval", "must be a whole number of steps".into());
        }
        if self.trials_per_cell == 0 {
            return err("trials_per_cell", "must be at least 1".into());
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
        let [lo, hi] = self.spawn_shell;
        if !(lo.is_finite()
            && hi.is_finite()
            && self.keep_out <= lo
            && lo <= hi
            && self.keep_out >= 0.0)
        {
            return err(
                "spawn_shell",
                format!(
                    "need 0 ≤ keep_out ({}) ≤ inner ({lo}) ≤ outer ({hi})",
                    self.keep_out
                ),
            );
        }
        if self.modes.is_empty() {
            return err("modes", "needs at least one mode".into());
        }
        if self.policies.is_empty() {
            return err("policies", "needs at least one policy".into());
        }
        self.capture.validate().map_err(|e| ValError::Config {
            field: "capture",
            msg: e.to_string(),
        })?;
        self.inertia.validate().map_err(|e| ValError::Config {
            field: "inertia",
            msg: e.to_string(),
        })?;
        self.llc.validate()?;
        let kinds = [
            ("ph_strategy", &self.ph_strategy, StrategyKind::PointHold),
            ("nmc_strategy", &self.nmc_strategy, StrategyKind::NmcHold),
            ("rl_strategy", &self.rl_strategy, StrategyKind::GreedyActive),
        ];
        for (field, spec, kind) in kinds {
            if spec.kind != kind {
                return err(
                    field,
                    format!("must be a {kind:?} strategy, got {:?}", spec.kind),
                );
            }
            spec.validate(n_actions).map_err(|e| ValError::Config {
                field,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn strategy(&self, policy: Policy) -> &StrategySpec {
        match policy {
            Policy::Ph => &self.ph_strategy,
            Policy::Nmc => &self.nmc_strategy,
            Policy::Rl => &self.rl_strategy,
        }
    }
}

/// One row of the 1 s time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub fuel: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeputySummary {
    pub spawn: [f64; 3],
    /// ΔV until the strategy took hold, hold or orbit insertion included.
    pub entrance_fuel: f64,
    /// Time the strategy took hold, if it did.
    pub entrance_end: Option<f64>,
    pub fuel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub mode: RsoMode,
    pub policy: Policy,
    pub trial: usize,
    pub fuel_total: f64,
    pub inspection_fraction: f64,
    pub success: bool,
    pub tau: Option<f64>,
    /// Simulated time at termination.
    pub end_time: f64,
    pub failure: Option<String>,
    pub deputies: Vec<DeputySummary>,
    pub series: Vec<SeriesPoint>,
}

/// Where an entrance ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntranceTarget {
    /// Arrive at a point; the first hold leg absorbs the arrival velocity.
    Point(Vector3<f64>),
    /// Arrive at a point on an NMC and burn onto it.
    Nmc {
        pos: Vector3<f64>,
        vel: Vector3<f64>,
    },
}

/// Entrance trajectory at 1 s samples (`states[0]` is the spawn) and the
/// cumulative ΔV after each step.
#[derive(Debug, Clone, PartialEq)]
pub struct Entrance {
    pub states: Vec<RelState6>,
    pub fuel: Vec<f64>,
}

impl Entrance {
    pub fn total_fuel(&self) -> f64 {
        self.fuel.last().copied().unwrap_or(0.0)
    }
}

/// Whole-step version of a time of flight.
fn whole_steps(tof: f64, step: f64) -> f64 {
    (tof / step).round().max(1.0) * step
}

/// Flies `spawn` to `target` in `tof` (rounded to whole steps). NMC targets
/// add clipped closure burns until the orbit is drift-free.
pub fn entrance_maneuver(
    spawn: &RelState6,
    target: EntranceTarget,
    tof: f64,
    llc: &LlcConfig,
    c: &Constants,
) -> Result<Entrance, LlcError> {
    let pos = match target {
        EntranceTarget::Point(p) => p,
        EntranceTarget::Nmc { pos, .. } => pos,
    };
    let mut tracker = Tracker::new(pos, whole_steps(tof, llc.step), llc, c)?;
    let mut states = vec![*spawn];
    let mut fuel = vec![0.0];
    let mut x = *spawn;
    while !tracker.is_done() {
        x = tracker.step(&x, c)?.0;
        states.push(x);
        fuel.push(tracker.delta_v());
    }
    if let EntranceTarget::Nmc { vel, .. } = target {
        let mut run = 0;
        loop {
            let mut u = closure_thrust(&x, &vel, llc.step, c);
            let norm = u.norm();
            let clipped = norm > llc.u_max;
            if clipped {
                u *= llc.u_max / norm;
                run += 1;
                if run > llc.max_saturated_steps {
                    return Err(LlcError::TrackingFailure {
                        t: (states.len() - 1) as f64 * llc.step,
                        steps: run,
                    });
                }
            }
            x = step_constant(&x, &u, llc.step, c);
            states.push(x);
            fuel.push(fuel.last().unwrap() + u.norm() * llc.step / c.mass());
            if !clipped {
                break;
            }
        }
    }
    Ok(Entrance { states, fuel })
}

/// Uniform point in the spherical shell `[lo, hi]`, at rest.
fn spawn_point<R: Rng>(shell: [f64; 2], rng: &mut R) -> RelState6 {
    let [lo, hi] = shell;
    let u: f64 = rng.random();
    let r = (lo.powi(3) + u * (hi.powi(3) - lo.powi(3))).cbrt();
    let z = 2.0 * rng.random::<f64>() - 1.0;
    let phi = 2.0 * PI * rng.random::<f64>();
    let s = (1.0 - z * z).max(0.0).sqrt();
    RelState6::at_rest(Vector3::new(s * phi.cos(), s * phi.sin(), z) * r)
}

/// Shared, read-only campaign environment.
pub struct ValEnv {
    pub cfg: ValConfig,
    pub c: Constants,
    pub cloud: PoiCloud,
    pub ring: ActionSpace,
    pub nmc: ActionSpace,
}

enum Mode {
    Leg(Tracker),
    Coast,
    Idle,
}

struct Deputy {
    state: RelState6,
    fuel: f64,
    mode: Mode,
    /// Remaining entrance samples; the strategy starts when it runs out.
    entrance: std::vec::IntoIter<(RelState6, f64)>,
    entering: bool,
    summary: DeputySummary,
    hold_legs: usize,
}

impl ValEnv {
    pub fn new(
        cfg: ValConfig,
        space: &ActionSpaceConfig,
        c: Constants,
        cloud: PoiCloud,
    ) -> Result<Self, ValError> {
        let ring = build_waypoint_ring(space.n_actions, space.radius, &c)?;
        let nmc = build_nmc_family(space.n_actions, space.radius, space.nmc_samples, &c)?;
        cfg.validate(space.n_actions)?;
        if cloud.is_empty() {
            return Err(ValError::Config {
                field: "geometry",
                msg: "the point cloud is empty".into(),
            });
        }
        Ok(Self {
            cfg,
            c,
            cloud,
            ring,
            nmc,
        })
    }

    /// Default environment on the Aura stand-in.
    pub fn standard(cfg: ValConfig) -> Result<Self, ValError> {
        Self::new(
            cfg,
            &ActionSpaceConfig::default(),
            Constants::default(),
            aura_standin(),
        )
    }

    /// Initial RSO rotation of `(mode, trial)`; shared by every policy.
    pub fn initial_rotation(&self, mode: RsoMode, trial: usize) -> RotState {
        let mut rng = stream(
            self.cfg.rng_seed,
            domain::TRIAL_ROTATION,
            mode.stream_id(),
            trial as u64,
        );
        sample_initial_rotation(
            &UnitQuaternion::identity(),
            &mode.omega_nominal(&self.c),
            self.cfg.omega_bound_b,
            self.cfg.attitude_bound,
            &mut rng,
        )
    }

    /// Spawn states of `(mode, trial)`; shared by every policy.
    pub fn spawns(&self, mode: RsoMode, trial: usize, n: usize) -> Vec<RelState6> {
        let mut rng = stream(
            self.cfg.rng_seed,
            domain::TRIAL_SPAWN,
            mode.stream_id(),
            trial as u64,
        );
        (0..n)
            .map(|_| spawn_point(self.cfg.spawn_shell, &mut rng))
            .collect()
    }

    fn image(&self, rot: &RotState, viewpoint: &Vector3<f64>, t: f64) -> PoiSet {
        let phase = self.c.sigma_mu() * t;
        let ids = capture(
            &self.cloud,
            rot,
            viewpoint,
            &sun_in_hill(phase),
            phase,
            &self.cfg.capture,
        );
        PoiSet::from_ids(self.cloud.len(), &ids)
    }

    fn plan_entrance(
        &self,
        spec: &StrategySpec,
        deputy: usize,
        spawn: &RelState6,
    ) -> Result<Entrance, LlcError> {
        let c = &self.c;
        let min_tof = self.cfg.entrance_min_tof;
        let tof_to = |p: &Vector3<f64>| -> Result<f64, LlcError> {
            if (spawn.pos - p).norm() <= 1e-9 * p.norm() {
                return tof_heuristic(p, p, &self.ring, c).map_err(to_llc);
            }
            let t = tof_heuristic(&spawn.pos, p, &self.ring, c).map_err(to_llc)?;
            Ok(t.max(min_tof))
        };
        match spec.kind {
            StrategyKind::NmcHold => {
                let a = spec.assignments[deputy][0];
                let samples = &self.nmc.nmc_samples[a];
                let (k, _) = samples[..samples.len() - 1]
                    .iter()
                    .enumerate()
                    .map(|(k, (_, p))| (k, (p - spawn.pos).norm()))
                    .fold((0, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b });
                let s = self.nmc.nmcs[a].state_at(samples[k].0, c);
                entrance_maneuver(
                    spawn,
                    EntranceTarget::Nmc {
                        pos: s.pos,
                        vel: s.vel,
                    },
                    tof_to(&s.pos)?,
                    &self.cfg.llc,
                    c,
                )
            }
            _ => {
                let a = match spec.assignments[deputy].first() {
                    Some(&a) => a,
                    None => self.ring.nearest(&spawn.pos),
                };
                let w = self.ring.waypoints[a];
                entrance_maneuver(
                    spawn,
                    EntranceTarget::Point(w),
                    tof_to(&w)?,
                    &self.cfg.llc,
                    c,
                )
            }
        }
    }

    /// Leg tracker to ring waypoint `j` from the deputy's position.
    fn leg(&self, from: &Vector3<f64>, j: usize) -> Result<Tracker, LlcError> {
        let w = self.ring.waypoints[j];
        let tof = tof_heuristic(from, &w, &self.ring, &self.c).map_err(to_llc)?;
        let tof = if (from - w).norm() <= 0.5 {
            tof_heuristic(&w, &w, &self.ring, &self.c).map_err(to_llc)?
        } else {
            tof
        };
        Tracker::new(
            w,
            whole_steps(tof, self.cfg.llc.step),
            &self.cfg.llc,
            &self.c,
        )
    }

    /// Greedy scores of every ring action for a deputy at `state`, now at
    /// time `t`, against the team's seen set.
    fn greedy_scores(
        &self,
        state: &RelState6,
        t: f64,
        seen: &InspectionState,
        reward: &crate::guidance::RewardConfig,
        predicted: &mut dyn FnMut(usize, usize) -> PoiSet,
    ) -> Vec<f64> {
        let interval = self.cfg.imaging_interval;
        let n_instants = (self.cfg.horizon_t / interval + 1e-9).floor() as usize;
        (0..self.ring.cardinality())
            .map(|j| {
                let w = self.ring.waypoints[j];
                let (tof, dv) = if (state.pos - w).norm() <= 0.5 {
                    let dv = transfer_delta_v(&w, &w, &state.vel, &self.ring, &self.c)
                        .unwrap_or(f64::INFINITY);
                    (
                        tof_heuristic(&w, &w, &self.ring, &self.c).unwrap_or(f64::INFINITY),
                        dv,
                    )
                } else {
                    let tof =
                        tof_heuristic(&state.pos, &w, &self.ring, &self.c).unwrap_or(f64::INFINITY);
                    let dv = transfer_delta_v(&state.pos, &w, &state.vel, &self.ring, &self.c)
                        .unwrap_or(f64::INFINITY);
                    (tof, dv)
                };
                let arrival = t + whole_steps(tof, self.cfg.llc.step);
                let k = (arrival / interval).ceil() as usize;
                let gain = if k <= n_instants {
                    predicted_gain(seen, &[predicted(k, j)])
                } else {
                    0.0
                };
                greedy_score(gain, dv, reward)
            })
            .collect()
    }

    /// Runs one trial. Failures inside the trial are recorded, not returned.
    pub fn run_trial(&self, mode: RsoMode, policy: Policy, trial: usize) -> TrialRecord {
        let cfg = &self.cfg;
        let spec = cfg.strategy(policy).clone();
        let n_dep = spec.n_deputies();
        let mut runtime = StrategyRuntime::new(spec.clone());
        let interval_steps = (cfg.imaging_interval / cfg.dt).round() as usize;
        let instants = imaging_instants(cfg.imaging_interval, cfg.horizon_t);
        let n_steps = (cfg.horizon_t / cfg.dt + 1e-9).floor() as usize;

        // The RSO is torque-free, so its rotation at every imaging instant is known in advance.
        let mut rots = Vec::with_capacity(instants.len());
        let mut rot = self.initial_rotation(mode, trial);
        let mut failure: Option<String> = None;
        for (k, _) in instants.iter().enumerate() {
            if k > 0 {
                match propagate_rotation(&rot, &cfg.inertia, cfg.imaging_interval, cfg.dt) {
                    Ok(r) => rot = r,
                    Err(e) => {
                        failure = Some(e.to_string());
                        break;
                    }
                }
            }
            rots.push(rot);
        }

        let spawns = self.spawns(mode, trial, n_dep);
        let mut deputies: Vec<Deputy> = Vec::with_capacity(n_dep);
        for (d, spawn) in spawns.iter().enumerate() {
            let summary = DeputySummary {
                spawn: [spawn.pos.x, spawn.pos.y, spawn.pos.z],
                entrance_fuel: 0.0,
                entrance_end: None,
                fuel: 0.0,
            };
            let samples = match self.plan_entrance(&spec, d, spawn) {
                Ok(e) => e.states.into_iter().zip(e.fuel).skip(1).collect::<Vec<_>>(),
                Err(e) => {
                    failure.get_or_insert(format!("deputy {d} entrance: {e}"));
                    Vec::new()
                }
            };
            deputies.push(Deputy {
                state: *spawn,
                fuel: 0.0,
                mode: Mode::Idle,
                entrance: samples.into_iter(),
                entering: true,
                summary,
                hold_legs: 0,
            });
        }

        let mut seen = InspectionState::new(self.cloud.len());
        let mut cache: HashMap<(usize, usize), PoiSet> = HashMap::new();
        let mut series = Vec::new();
        let mut tau = None;
        let mut end_time = 0.0;

        for step in 0..=n_steps {
            let t = step as f64 * cfg.dt;
            end_time = t;
            if failure.is_some() {
                break;
            }
            if step % interval_steps == 0 {
                let k = step / interval_steps;
                for d in &deputies {
                    seen.merge(&self.image(&rots[k], &d.state.pos, t));
                }
            }
            let fuel: f64 = deputies.iter().map(|d| d.fuel).sum();
            if cfg.keep_series {
                series.push(SeriesPoint {
                    t,
                    fuel,
                    coverage: seen.fraction(),
                });
            }
            if seen.fraction() >= cfg.threshold_m {
                tau = Some(t);
                break;
            }
            if step == n_steps {
                break;
            }
            for d in 0..n_dep {
                if let Err(e) =
                    self.advance(&mut deputies, d, t, &mut runtime, &seen, &rots, &mut cache)
                {
                    failure = Some(format!("deputy {d} at t = {t} s: {e}"));
                    break;
                }
            }
        }

        let fuel_total = deputies.iter().map(|d| d.fuel).sum();
        let deputies = deputies
            .into_iter()
            .map(|d| DeputySummary {
                fuel: d.fuel,
                ..d.summary
            })
            .collect();
        TrialRecord {
            mode,
            policy,
            trial,
            fuel_total,
            inspection_fraction: seen.fraction(),
            success: tau.is_some_and(|t| t <= cfg.horizon_t),
            tau,
            end_time,
            failure,
            deputies,
            series,
        }
    }

    /// Moves deputy `d` from `t` to `t + dt`.
    #[allow(clippy::too_many_arguments)]
    fn advance(
        &self,
        deputies: &mut [Deputy],
        d: usize,
        t: f64,
        runtime: &mut StrategyRuntime,
        seen: &InspectionState,
        rots: &[RotState],
        cache: &mut HashMap<(usize, usize), PoiSet>,
    ) -> Result<(), LlcError> {
        let c = &self.c;
        let dep = &mut deputies[d];
        if dep.entering {
            if let Some((s, f)) = dep.entrance.next() {
                dep.state = s;
                dep.fuel = f;
                return Ok(());
            }
            dep.entering = false;
            if runtime.spec().kind == StrategyKind::NmcHold {
                dep.summary.entrance_fuel = dep.fuel;
                dep.summary.entrance_end = Some(t);
            }
        }
        if matches!(dep.mode, Mode::Idle) || matches!(&dep.mode, Mode::Leg(tr) if tr.is_done()) {
            if matches!(dep.mode, Mode::Leg(_)) && runtime.spec().kind == StrategyKind::PointHold {
                dep.hold_legs += 1;
                if dep.hold_legs == 1 {
                    dep.summary.entrance_fuel = dep.fuel;
                    dep.summary.entrance_end = Some(t);
                }
            }
            let directive = if runtime.spec().kind == StrategyKind::GreedyActive {
                if dep.summary.entrance_end.is_none() {
                    dep.summary.entrance_fuel = dep.fuel;
                    dep.summary.entrance_end = Some(t);
                }
                let reward = runtime.spec().reward.clone();
                let state = dep.state;
                let mut predicted = |k: usize, j: usize| {
                    cache
                        .entry((k, j))
                        .or_insert_with(|| {
                            self.image(
                                &rots[k],
                                &self.ring.waypoints[j],
                                k as f64 * self.cfg.imaging_interval,
                            )
                        })
                        .clone()
                };
                let scores = self.greedy_scores(&state, t, seen, &reward, &mut predicted);
                runtime.step(d, Some(&scores))
            } else {
                runtime.step(d, None)
            };
            let dep = &mut deputies[d];
            dep.mode = match directive {
                Directive::Target { action } => Mode::Leg(self.leg(&dep.state.pos, action)?),
                Directive::Coast => Mode::Coast,
                Directive::Complete => Mode::Idle,
            };
        }
        let dep = &mut deputies[d];
        match &mut dep.mode {
            Mode::Leg(tr) => {
                let before = tr.delta_v();
                let (next, _, _) = tr.step(&dep.state, c)?;
                dep.fuel += tr.delta_v() - before;
                dep.state = next;
            }
            Mode::Coast | Mode::Idle => {
                dep.state = step_constant(&dep.state, &Vector3::zeros(), self.cfg.dt, c);
            }
        }
        Ok(())
    }

    /// Full factorial campaign, ordered by mode, then policy, then trial.
    pub fn run_campaign(&self) -> Vec<TrialRecord> {
        let cells: Vec<(RsoMode, Policy, usize)> = self
            .cfg
            .modes
            .iter()
            .flat_map(|&m| {
                self.cfg
                    .policies
                    .iter()
                    .flat_map(move |&p| (0..self.cfg.trials_per_cell).map(move |k| (m, p, k)))
            })
            .collect();
        cells
            .par_iter()
            .map(|&(m, p, k)| self.run_trial(m, p, k))
            .collect()
    }
}

fn to_llc(e: GuidanceError) -> LlcError {
    match e {
        GuidanceError::Dynamics(d) => LlcError::Dynamics(d),
        other => LlcError::Config {
            field: "guidance",
            msg: other.to_string(),
        },
    }
}
