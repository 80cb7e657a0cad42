//! Low-level control: bounded-thrust tracking of CWH transfer arcs.
//!
//! At every control step the tracker picks the constant thrust which, held
//! for the step and followed by a coast, lands exactly on the target at the
//! arrival time. On the nominal arc that thrust is zero; off it, the tracker
//! re-plans from the measured state. Thrust is clipped to `u_max`, and a run
//! of more than `max_saturated_steps` clipped steps is a tracking failure.

use crate::dynamics::{
    condition_number, cw_input_response, cw_stm, step_constant, Constants, DynamicsError,
    RelState6, ThrustSample, TRANSFER_COND_LIMIT,
};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlcError {
    #[error("invalid controller setting {field}: {msg}")]
    Config { field: &'static str, msg: String },
    #[error("time of flight {0} s has no well-conditioned schedule within one period")]
    NoSafeTof(f64),
    #[error("thrust saturated for {steps} consecutive steps at t = {t} s")]
    TrackingFailure { t: f64, steps: usize },
    #[error("arrived {miss} m from the target (tolerance {tol} m)")]
    TerminalMiss { miss: f64, tol: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlcConfig {
    /// Thrust bound (N).
    pub u_max: f64,
    /// Consecutive clipped steps tolerated before failing.
    pub max_saturated_steps: usize,
    /// Allowed terminal position error (m).
    pub pos_tol: f64,
    /// Control step (s).
    pub step: f64,
    /// Per-step ΔV below which the thruster stays off (m/s).
    pub deadband: f64,
}

impl Default for LlcConfig {
    fn default() -> Self {
        Self {
            u_max: 1.0,
            max_saturated_steps: 60,
            pos_tol: 0.1,
            step: 1.0,
            deadband: 1e-9,
        }
    }
}

impl LlcConfig {
    pub fn validate(&self) -> Result<(), LlcError> {
        let positive = |field, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(LlcError::Config {
                    field,
                    msg: format!("must be finite and positive, got {v}"),
                })
            }
        };
        positive("u_max", self.u_max)?;
        positive("pos_tol", self.pos_tol)?;
        positive("step", self.step)?;
        if !(self.deadband.is_finite() && self.deadband >= 0.0) {
            return Err(LlcError::Config {
                field: "deadband",
                msg: format!("must be finite and non-negative, got {}", self.deadband),
            });
        }
        Ok(())
    }
}

/// Matrix mapping a constant acceleration over the next `h` seconds to the
/// position at arrival, `remaining` seconds from now.
fn gain(remaining: f64, h: f64, c: &Constants) -> Matrix3<f64> {
    let phi = cw_stm(remaining - h, c);
    let rr = phi.fixed_view::<3, 3>(0, 0).into_owned();
    let rv = phi.fixed_view::<3, 3>(0, 3).into_owned();
    let (gr, gv) = cw_input_response(h, c);
    rv * gv + rr * gr
}

fn schedule_is_safe(tof: f64, step: f64, c: &Constants) -> bool {
    let mut t = 0.0;
    while tof - t > 1e-9 {
        let remaining = tof - t;
        let h = step.min(remaining);
        if condition_number(&gain(remaining, h, c)) > TRANSFER_COND_LIMIT {
            return false;
        }
        t += h;
    }
    true
}

/// Closed-loop tracker for one transfer leg.
#[derive(Debug, Clone)]
pub struct Tracker {
    target: Vector3<f64>,
    tof: f64,
    elapsed: f64,
    cfg: LlcConfig,
    saturated_run: usize,
    delta_v: f64,
}

impl Tracker {
    /// Starts a leg to `target` arriving after `tof`. If some step of the
    /// schedule is ill-conditioned, `tof` is extended one step at a time.
    pub fn new(
        target: Vector3<f64>,
        tof: f64,
        cfg: &LlcConfig,
        c: &Constants,
    ) -> Result<Self, LlcError> {
        cfg.validate()?;
        if !target.iter().all(|v| v.is_finite()) {
            return Err(DynamicsError::NonFinite("target").into());
        }
        if !(tof.is_finite() && tof > 0.0) {
            return Err(DynamicsError::NonPositiveTof(tof).into());
        }
        let mut t = tof;
        while !schedule_is_safe(t, cfg.step, c) {
            t += cfg.step;
            if t > tof + c.period() {
                return Err(LlcError::NoSafeTof(tof));
            }
        }
        if t != tof {
            log::info!("re-timed transfer from {tof} s to {t} s");
        }
        Ok(Self {
            target,
            tof: t,
            elapsed: 0.0,
            cfg: cfg.clone(),
            saturated_run: 0,
            delta_v: 0.0,
        })
    }

    pub fn tof(&self) -> f64 {
        self.tof
    }

    pub fn target(&self) -> Vector3<f64> {
        self.target
    }

    pub fn remaining(&self) -> f64 {
        (self.tof - self.elapsed).max(0.0)
    }

    pub fn is_done(&self) -> bool {
        self.remaining() <= 1e-9
    }

    /// ΔV spent so far (m/s).
    pub fn delta_v(&self) -> f64 {
        self.delta_v
    }

    /// Commands and applies one control step from `state`, returning the new
    /// state, the thrust held and the step length.
    pub fn step(
        &mut self,
        state: &RelState6,
        c: &Constants,
    ) -> Result<(RelState6, Vector3<f64>, f64), LlcError> {
        let remaining = self.remaining();
        let h = self.cfg.step.min(remaining);
        let phi = cw_stm(remaining, c);
        let coast = phi.fixed_view::<3, 6>(0, 0) * state.to_vector();
        let rhs = self.target - coast;
        let w = gain(remaining, h, c)
            .lu()
            .solve(&rhs)
            .ok_or(DynamicsError::SingularTransfer {
                tof: remaining,
                cond: f64::INFINITY,
            })?;
        let mut u = w * c.mass();
        if w.norm() * h < self.cfg.deadband {
            u = Vector3::zeros();
        }
        let norm = u.norm();
        if norm > self.cfg.u_max {
            u *= self.cfg.u_max / norm;
            self.saturated_run += 1;
            if self.saturated_run > self.cfg.max_saturated_steps {
                return Err(LlcError::TrackingFailure {
                    t: self.elapsed,
                    steps: self.saturated_run,
                });
            }
        } else {
            self.saturated_run = 0;
        }
        let next = step_constant(state, &u, h, c);
        self.elapsed += h;
        self.delta_v += u.norm() * h / c.mass();
        if self.is_done() {
            let miss = (next.pos - self.target).norm();
            if miss > self.cfg.pos_tol {
                return Err(LlcError::TerminalMiss {
                    miss,
                    tol: self.cfg.pos_tol,
                });
            }
        }
        Ok((next, u, h))
    }
}

/// A completed leg.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    /// States at every control instant, start and arrival included.
    pub states: Vec<RelState6>,
    pub thrust: Vec<ThrustSample>,
    pub delta_v: f64,
    pub tof: f64,
}

/// Tracks a whole leg from `start` to `target`.
pub fn plan_and_track(
    start: &RelState6,
    target: &Vector3<f64>,
    tof: f64,
    cfg: &LlcConfig,
    c: &Constants,
) -> Result<Track, LlcError> {
    if !start.is_finite() {
        return Err(DynamicsError::NonFinite("state").into());
    }
    let mut tracker = Tracker::new(*target, tof, cfg, c)?;
    let mut states = vec![*start];
    let mut thrust = Vec::new();
    let mut t = 0.0;
    let mut x = *start;
    while !tracker.is_done() {
        let (next, u, h) = tracker.step(&x, c)?;
        thrust.push(ThrustSample { t, u });
        t += h;
        x = next;
        states.push(x);
    }
    Ok(Track {
        states,
        thrust,
        delta_v: tracker.delta_v(),
        tof: tracker.tof(),
    })
}

/// Holds position at `target` for `duration` by chaining dwell legs of
/// `dwell_tof`. Returns the final state and the ΔV spent.
pub fn hold_chain(
    start: &RelState6,
    target: &Vector3<f64>,
    dwell_tof: f64,
    duration: f64,
    cfg: &LlcConfig,
    c: &Constants,
) -> Result<(RelState6, f64), LlcError> {
    let mut x = *start;
    let mut dv = 0.0;
    let mut t = 0.0;
    while duration - t > 1e-9 {
        let leg = dwell_tof.min(duration - t);
        let track = plan_and_track(&x, target, leg, cfg, c)?;
        x = *track
            .states
            .last()
            .expect("a track has at least its start state");
        dv += track.delta_v;
        t += track.tof;
    }
    Ok((x, dv))
}

/// Unclipped thrust which, held for `h`, leaves the deputy on a drift-free
/// relative orbit with radial and cross-track velocity `v_target`.
pub fn closure_thrust(
    state: &RelState6,
    v_target: &Vector3<f64>,
    h: f64,
    c: &Constants,
) -> Vector3<f64> {
    let n = c.sigma_mu();
    let x = cw_stm(h, c) * state.to_vector();
    let (gr, gv) = cw_input_response(h, c);
    // Rows: v_x = target, v_y + 2n·x = 0, v_z = target.
    let a = Matrix3::from_rows(&[
        gv.row(0).into_owned(),
        gv.row(1) + gr.row(0) * (2.0 * n),
        gv.row(2).into_owned(),
    ]);
    let b = Vector3::new(
        v_target.x - x[3],
        -(x[4] + 2.0 * n * x[0]),
        v_target.z - x[5],
    );
    a.lu().solve(&b).unwrap_or_else(Vector3::zeros) * c.mass()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{hold_thrust, nmc_state_at_phase, propagate, solve_transfer};
    use crate::guidance::{build_waypoint_ring, tof_heuristic};
    use proptest::prelude::*;

    fn c() -> Constants {
        Constants::default()
    }

    #[test]
    fn on_arc_start_needs_no_thrust() {
        let c = c();
        let a = Vector3::new(200.0, 0.0, 0.0);
        let b = Vector3::new(0.0, 200.0, 0.0);
        let v0 = solve_transfer(&a, &b, 250.0, &c).unwrap();
        let track =
            plan_and_track(&RelState6::new(a, v0), &b, 250.0, &LlcConfig::default(), &c).unwrap();
        assert!(track.delta_v < 1e-6, "{}", track.delta_v);
        assert!((track.states.last().unwrap().pos - b).norm() < 1e-6);
    }

    #[test]
    fn nmc_coast_spends_nothing() {
        let c = c();
        let start = nmc_state_at_phase(100.0, 173.2, 0.3, &c);
        let target = nmc_state_at_phase(100.0, 173.2, 0.3 + c.sigma_mu() * 300.0, &c).pos;
        let track = plan_and_track(&start, &target, 300.0, &LlcConfig::default(), &c).unwrap();
        assert!(track.delta_v <= 1e-3);
        assert_eq!(track.delta_v, 0.0);
    }

    #[test]
    fn from_rest_matches_the_impulsive_transfer() {
        let c = c();
        let a = Vector3::new(200.0, 0.0, 0.0);
        let b = Vector3::new(-200.0, 0.0, 0.0);
        let tof = 499.75;
        let track =
            plan_and_track(&RelState6::at_rest(a), &b, tof, &LlcConfig::default(), &c).unwrap();
        let v0 = solve_transfer(&a, &b, tof, &c).unwrap();
        let vf = propagate(&RelState6::new(a, v0), &[], tof, &c).unwrap().vel;
        let arrival = track.states.last().unwrap();
        assert!((arrival.pos - b).norm() < 1e-6);
        assert!((arrival.vel - vf).norm() < 0.01 * vf.norm());
        assert!((track.delta_v - v0.norm()).abs() < 0.01 * v0.norm());
        for s in &track.thrust {
            assert!(s.u.norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn radial_hold_costs_the_equilibrium_thrust() {
        let c = c();
        let a = Vector3::new(200.0, 0.0, 0.0);
        let ring = build_waypoint_ring(20, 200.0, &c).unwrap();
        let dwell = tof_heuristic(&a, &a, &ring, &c).unwrap();
        let (end, dv) = hold_chain(
            &RelState6::at_rest(a),
            &a,
            dwell,
            c.period(),
            &LlcConfig::default(),
            &c,
        )
        .unwrap();
        let analytic = hold_thrust(&a, &c).norm() / c.mass() * c.period();
        assert!((analytic - 3.772).abs() < 0.002);
        assert!(
            (dv - analytic).abs() < 0.02 * analytic,
            "{dv} vs {analytic}"
        );
        assert!((end.pos - a).norm() < 0.1);
    }

    #[test]
    fn along_track_hold_is_free() {
        let c = c();
        let a = Vector3::new(0.0, 200.0, 0.0);
        let (_, dv) = hold_chain(
            &RelState6::at_rest(a),
            &a,
            25.0,
            1000.0,
            &LlcConfig::default(),
            &c,
        )
        .unwrap();
        assert!(dv < 1e-9);
    }

    #[test]
    fn starved_thruster_fails_loudly() {
        let c = c();
        let cfg = LlcConfig {
            u_max: 1e-4,
            ..LlcConfig::default()
        };
        let err = plan_and_track(
            &RelState6::at_rest(Vector3::new(200.0, 0.0, 0.0)),
            &Vector3::new(-200.0, 0.0, 0.0),
            300.0,
            &cfg,
            &c,
        )
        .unwrap_err();
        assert!(
            matches!(err, LlcError::TrackingFailure { steps: 61, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn full_period_dwell_is_tracked() {
        // The impulsive transfer is singular here; the stepwise gain is not.
        let c = c();
        let a = Vector3::new(200.0, 0.0, 0.0);
        assert!(solve_transfer(&a, &a, c.period(), &c).is_err());
        let t = Tracker::new(a, c.period(), &LlcConfig::default(), &c).unwrap();
        assert_eq!(t.tof(), c.period());
        let track = plan_and_track(
            &RelState6::at_rest(a),
            &a,
            c.period(),
            &LlcConfig::default(),
            &c,
        )
        .unwrap();
        assert!((track.states.last().unwrap().pos - a).norm() < 0.1);
    }

    #[test]
    fn closure_burn_makes_a_closed_orbit() {
        let c = c();
        let target = nmc_state_at_phase(100.0, 173.2, 1.0, &c);
        let start = RelState6::new(target.pos, target.vel + Vector3::new(0.05, -0.08, 0.03));
        let u = closure_thrust(&start, &target.vel, 1.0, &c);
        let after = step_constant(&start, &u, 1.0, &c);
        assert!((after.vel.y + 2.0 * c.sigma_mu() * after.pos.x).abs() < 1e-12);
        let later = propagate(&after, &[], c.period(), &c).unwrap();
        assert!((later.pos - after.pos).norm() < 1e-6);
    }

    #[test]
    fn config_validation() {
        let bad = LlcConfig {
            u_max: -1.0,
            ..LlcConfig::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(LlcError::Config { field: "u_max", .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn thrust_bounded_and_arrival_within_tolerance(
            i in 0usize..20,
            j in 0usize..20,
            dvx in -0.3f64..0.3,
            dvy in -0.3f64..0.3,
            dvz in -0.3f64..0.3,
        ) {
            let c = Constants::default();
            let ring = build_waypoint_ring(20, 200.0, &c).unwrap();
            let (a, b) = (ring.waypoints[i], ring.waypoints[j]);
            let tof = tof_heuristic(&a, &b, &ring, &c).unwrap().max(100.0);
            let cfg = LlcConfig::default();
            let start = RelState6::new(a, Vector3::new(dvx, dvy, dvz));
            let track = plan_and_track(&start, &b, tof, &cfg, &c).unwrap();
            for s in &track.thrust {
                prop_assert!(s.u.norm() <= cfg.u_max * (1.0 + 1e-12));
            }
            prop_assert!((track.states.last().unwrap().pos - b).norm() <= cfg.pos_tol);
        }
    }
}
