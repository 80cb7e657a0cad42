//! Hill-frame relative translational dynamics.
//!
//! Linearized Clohessy-Wiltshire-Hill (CWH) motion of a deputy about a chief in
//! a circular orbit. Frame convention: `x` radial (zenith), `y` along-track,
//! `z` along the orbit angular momentum.
//!
//! Everything here is closed form: the zero-input state transition matrix,
//! its integral for piecewise-constant thrust, closed natural-motion
//! circumnavigations, and two-point transfer targeting.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Earth gravitational parameter (m³/s², WGS-84).
pub const MU_EARTH: f64 = 3.986004418e14;
/// Orbital radius of the inspected object (m).
pub const DEFAULT_ORBIT_RADIUS: f64 = 7_357_000.0;
/// Deputy mass (kg). Unit mass makes impulse and ΔV numerically equal.
pub const DEFAULT_DEPUTY_MASS: f64 = 1.0;

/// Condition number above which a transfer is treated as singular.
pub const TRANSFER_COND_LIMIT: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("constant `{name}` must be finite and strictly positive (got {value})")]
    InvalidConstant { name: &'static str, value: f64 },
    #[error("negative duration {0} s")]
    NegativeDuration(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("degenerate NMC: radial offset x0 must be nonzero")]
    DegenerateNmc,
    #[error("time of flight must be positive (got {0} s)")]
    NonPositiveTof(f64),
    #[error("singular transfer: cond(Φrv({tof} s)) = {cond:.3e}")]
    SingularTransfer { tof: f64, cond: f64 },
    #[error("transfer endpoints are inconsistent with the rank-deficient Φrv({tof} s) (residual {residual:.3e} m)")]
    InconsistentTransfer { tof: f64, residual: f64 },
    #[error("thrust schedule invalid: {0}")]
    BadSchedule(String),
}

/// Physical constants of the relative-motion problem.
///
/// The mean motion is always derived from `mu` and `r0_orbit`; it is never
/// stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    mu: f64,
    r0_orbit: f64,
    mass: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            mu: MU_EARTH,
            r0_orbit: DEFAULT_ORBIT_RADIUS,
            mass: DEFAULT_DEPUTY_MASS,
        }
    }
}

impl Constants {
    pub fn new(mu: f64, r0_orbit: f64, mass: f64) -> Result<Self, DynamicsError> {
        for (name, value) in [("mu", mu), ("r0_orbit", r0_orbit), ("mass", mass)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(DynamicsError::InvalidConstant { name, value });
            }
        }
        Ok(Self { mu, r0_orbit, mass })
    }

    /// Builds constants whose derived mean motion equals `mean_motion`
    /// (up to rounding), by back-solving the gravitational parameter.
    pub fn with_mean_motion(
        mean_motion: f64,
        r0_orbit: f64,
        mass: f64,
    ) -> Result<Self, DynamicsError> {
        if !(mean_motion.is_finite() && mean_motion > 0.0) {
            return Err(DynamicsError::InvalidConstant {
                name: "sigma_mu",
                value: mean_motion,
            });
        }
        Self::new(mean_motion * mean_motion * r0_orbit.powi(3), r0_orbit, mass)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn r0_orbit(&self) -> f64 {
        self.r0_orbit
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Spatial gravity parameter σ_μ = sqrt(μ / r0³), i.e. the chief's mean motion (rad/s).
    pub fn sigma_mu(&self) -> f64 {
        (self.mu / self.r0_orbit.powi(3)).sqrt()
    }

    /// Chief orbital period 2π/σ_μ (s).
    pub fn period(&self) -> f64 {
        2.0 * PI / self.sigma_mu()
    }
}

/// Hill-frame relative position (m) and velocity (m/s) of one deputy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelState6 {
    pub pos: Vector3<f64>,
    pub vel: Vector3<f64>,
}

impl RelState6 {
    pub fn new(pos: Vector3<f64>, vel: Vector3<f64>) -> Self {
        Self { pos, vel }
    }

    pub fn at_rest(pos: Vector3<f64>) -> Self {
        Self {
            pos,
            vel: Vector3::zeros(),
        }
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            pos: Vector3::new(v[0], v[1], v[2]),
            vel: Vector3::new(v[3], v[4], v[5]),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.pos.x, self.pos.y, self.pos.z, self.vel.x, self.vel.y, self.vel.z,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.pos
            .iter()
            .chain(self.vel.iter())
            .all(|v| v.is_finite())
    }

    /// True when every position component lies in `[-r_max, r_max]`.
    pub fn within_box(&self, r_max: f64) -> bool {
        self.pos.iter().all(|c| c.abs() <= r_max)
    }
}

/// One segment of a piecewise-constant thrust schedule: force `u` (N)
/// applied from time `t` until the next sample (or the end of the horizon).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThrustSample {
    pub t: f64,
    pub u: Vector3<f64>,
}

/// Zero-input state transition matrix of the CWH equations.
pub fn cw_stm(dt: f64, c: &Constants) -> Matrix6<f64> {
    let n = c.sigma_mu();
    let nt = n * dt;
    let (s, co) = nt.sin_cos();
    #[rustfmt::skip]
    let m = Matrix6::new(
        4.0 - 3.0 * co,        0.0, 0.0,  s / n,               2.0 * (1.0 - co) / n,        0.0,
        6.0 * (s - nt),        1.0, 0.0, -2.0 * (1.0 - co) / n, (4.0 * s - 3.0 * nt) / n,   0.0,
        0.0,                   0.0, co,   0.0,                 0.0,                         s / n,
        3.0 * n * s,           0.0, 0.0,  co,                  2.0 * s,                     0.0,
        -6.0 * n * (1.0 - co), 0.0, 0.0, -2.0 * s,             4.0 * co - 3.0,              0.0,
        0.0,                   0.0, -n * s, 0.0,               0.0,                         co,
    );
    m
}

/// Input matrix of a constant acceleration held for `dt`:
/// `∫₀^dt Φ(τ) dτ · [0; I]`, a 6×3 block returned as (position rows, velocity rows).
pub fn cw_input_response(dt: f64, c: &Constants) -> (Matrix3<f64>, Matrix3<f64>) {
    let n = c.sigma_mu();
    let nt = n * dt;
    let (s, co) = nt.sin_cos();
    let n2 = n * n;
    #[rustfmt::skip]
    let pos = Matrix3::new(
        (1.0 - co) / n2,                2.0 * (dt - s / n) / n,                     0.0,
        -2.0 * (dt - s / n) / n,        4.0 * (1.0 - co) / n2 - 1.5 * dt * dt,      0.0,
        0.0,                            0.0,                                        (1.0 - co) / n2,
    );
    #[rustfmt::skip]
    let vel = Matrix3::new(
        s / n,                  2.0 * (1.0 - co) / n,   0.0,
        -2.0 * (1.0 - co) / n,  4.0 * s / n - 3.0 * dt, 0.0,
        0.0,                    0.0,                    s / n,
    );
    (pos, vel)
}

/// Right-hand side of the CWH equations with thrust `u` (N).
pub fn cw_derivative(state: &Vector6<f64>, u: &Vector3<f64>, c: &Constants) -> Vector6<f64> {
    let n = c.sigma_mu();
    let m = c.mass();
    Vector6::new(
        state[3],
        state[4],
        state[5],
        3.0 * n * n * state[0] + 2.0 * n * state[4] + u.x / m,
        -2.0 * n * state[3] + u.y / m,
        -n * n * state[2] + u.z / m,
    )
}

fn check_state(state: &RelState6) -> Result<(), DynamicsError> {
    if state.is_finite() {
        Ok(())
    } else {
        Err(DynamicsError::NonFinite("state"))
    }
}

/// Exact propagation over `dt` under a constant force `u`.
pub fn propagate_constant(
    state: &RelState6,
    u: &Vector3<f64>,
    dt: f64,
    c: &Constants,
) -> Result<RelState6, DynamicsError> {
    check_state(state)?;
    if !(dt.is_finite()) {
        return Err(DynamicsError::NonFinite("dt"));
    }
    if dt < 0.0 {
        return Err(DynamicsError::NegativeDuration(dt));
    }
    if !u.iter().all(|v| v.is_finite()) {
        return Err(DynamicsError::NonFinite("thrust"));
    }
    Ok(step_constant(state, u, dt, c))
}

/// Unchecked core of [`propagate_constant`], shared with the trackers.
pub(crate) fn step_constant(
    state: &RelState6,
    u: &Vector3<f64>,
    dt: f64,
    c: &Constants,
) -> RelState6 {
    let phi = cw_stm(dt, c);
    let mut x = phi * state.to_vector();
    if u.iter().any(|v| *v != 0.0) {
        let (gp, gv) = cw_input_response(dt, c);
        let w = u / c.mass();
        let dp = gp * w;
        let dv = gv * w;
        x[0] += dp.x;
        x[1] += dp.y;
        x[2] += dp.z;
        x[3] += dv.x;
        x[4] += dv.y;
        x[5] += dv.z;
    }
    RelState6::from_vector(&x)
}

/// Forward-integrated dynamics under a piecewise-constant thrust schedule.
///
/// Samples must be time-ordered; sample `k` applies on `[t_k, t_{k+1})`. The
/// first sample may start after zero, in which case the leading gap coasts.
/// An empty schedule is a pure coast.
pub fn propagate(
    state: &RelState6,
    thrust: &[ThrustSample],
    dt: f64,
    c: &Constants,
) -> Result<RelState6, DynamicsError> {
    check_state(state)?;
    if !dt.is_finite() {
        return Err(DynamicsError::NonFinite("dt"));
    }
    if dt < 0.0 {
        return Err(DynamicsError::NegativeDuration(dt));
    }
    for (k, s) in thrust.iter().enumerate() {
        if !s.t.is_finite() || !s.u.iter().all(|v| v.is_finite()) {
            return Err(DynamicsError::NonFinite("thrust"));
        }
        if s.t < 0.0 {
            return Err(DynamicsError::BadSchedule(format!(
                "sample {k} starts before zero"
            )));
        }
        if k > 0 && s.t < thrust[k - 1].t {
            return Err(DynamicsError::BadSchedule(format!(
                "sample {k} is out of order"
            )));
        }
    }

    let mut x = *state;
    let mut t = 0.0;
    let mut u = Vector3::zeros();
    for s in thrust {
        let seg_end = s.t.min(dt);
        if seg_end > t {
            x = step_constant(&x, &u, seg_end - t, c);
            t = seg_end;
        }
        u = s.u;
        if t >= dt {
            break;
        }
    }
    if dt > t {
        x = step_constant(&x, &u, dt - t, c);
    }
    Ok(x)
}

/// Closed NMC initial state: `(x0, 0, z0, 0, -2σx0, 0)`.
pub fn nmc_init(x0: f64, z0: f64, c: &Constants) -> Result<RelState6, DynamicsError> {
    if !(x0.is_finite() && z0.is_finite()) {
        return Err(DynamicsError::NonFinite("nmc amplitude"));
    }
    if x0 == 0.0 {
        return Err(DynamicsError::DegenerateNmc);
    }
    Ok(RelState6::new(
        Vector3::new(x0, 0.0, z0),
        Vector3::new(0.0, -2.0 * c.sigma_mu() * x0, 0.0),
    ))
}

/// State on the closed NMC of `nmc_init(x0, z0)` after advancing by phase `phase` (rad).
pub fn nmc_state_at_phase(x0: f64, z0: f64, phase: f64, c: &Constants) -> RelState6 {
    let n = c.sigma_mu();
    let (s, co) = phase.sin_cos();
    RelState6::new(
        Vector3::new(x0 * co, -2.0 * x0 * s, z0 * co),
        Vector3::new(-n * x0 * s, -2.0 * n * x0 * co, -n * z0 * s),
    )
}

fn blocks(phi: &Matrix6<f64>) -> (Matrix3<f64>, Matrix3<f64>, Matrix3<f64>, Matrix3<f64>) {
    (
        phi.fixed_view::<3, 3>(0, 0).into_owned(),
        phi.fixed_view::<3, 3>(0, 3).into_owned(),
        phi.fixed_view::<3, 3>(3, 0).into_owned(),
        phi.fixed_view::<3, 3>(3, 3).into_owned(),
    )
}

/// 2-norm condition number of a 3×3 matrix (∞ when singular).
pub fn condition_number(m: &Matrix3<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

fn check_transfer_inputs(
    a: &Vector3<f64>,
    a_hat: &Vector3<f64>,
    tof: f64,
) -> Result<(), DynamicsError> {
    if !a.iter().chain(a_hat.iter()).all(|v| v.is_finite()) {
        return Err(DynamicsError::NonFinite("transfer endpoint"));
    }
    if !(tof.is_finite() && tof > 0.0) {
        return Err(DynamicsError::NonPositiveTof(tof));
    }
    Ok(())
}

/// Initial velocity at `a` of the natural-motion arc reaching `a_hat` after `tof`.
///
/// Fails with [`DynamicsError::SingularTransfer`] when `cond(Φrv(tof))` exceeds
/// [`TRANSFER_COND_LIMIT`].
pub fn solve_transfer(
    a: &Vector3<f64>,
    a_hat: &Vector3<f64>,
    tof: f64,
    c: &Constants,
) -> Result<Vector3<f64>, DynamicsError> {
    check_transfer_inputs(a, a_hat, tof)?;
    let (rr, rv, _, _) = blocks(&cw_stm(tof, c));
    let cond = condition_number(&rv);
    if cond > TRANSFER_COND_LIMIT {
        return Err(DynamicsError::SingularTransfer { tof, cond });
    }
    rv.lu()
        .solve(&(a_hat - rr * a))
        .ok_or(DynamicsError::SingularTransfer { tof, cond })
}

/// Minimum-norm transfer velocity through the pseudo-inverse of `Φrv(tof)`.
///
/// Unlike [`solve_transfer`] this accepts rank-deficient `Φrv` (full-period and
/// half-period flights) as long as the endpoints are consistent with it, which
/// is the case for a closed NMC returning to its own start. Inconsistent
/// endpoints yield [`DynamicsError::InconsistentTransfer`].
pub fn solve_transfer_min_norm(
    a: &Vector3<f64>,
    a_hat: &Vector3<f64>,
    tof: f64,
    c: &Constants,
) -> Result<Vector3<f64>, DynamicsError> {
    check_transfer_inputs(a, a_hat, tof)?;
    let (rr, rv, _, _) = blocks(&cw_stm(tof, c));
    let rhs = a_hat - rr * a;
    let svd = rv.svd(true, true);
    let eps = svd.singular_values.max() * 1e-10;
    let v0 = svd
        .solve(&rhs, eps)
        .map_err(|_| DynamicsError::NonFinite("pseudo-inverse"))?;
    let residual = (rv * v0 - rhs).norm();
    if residual > 1e-6 * (1.0 + rhs.norm()) {
        return Err(DynamicsError::InconsistentTransfer { tof, residual });
    }
    Ok(v0)
}

/// Arrival velocity at `a_hat` of the transfer found by [`solve_transfer`].
pub fn final_velocity(
    a: &Vector3<f64>,
    a_hat: &Vector3<f64>,
    tof: f64,
    c: &Constants,
) -> Result<Vector3<f64>, DynamicsError> {
    let v0 = solve_transfer(a, a_hat, tof, c)?;
    let (_, _, vr, vv) = blocks(&cw_stm(tof, c));
    Ok(vr * a + vv * v0)
}

/// Arrival velocity of the minimum-norm transfer of [`solve_transfer_min_norm`].
pub fn final_velocity_min_norm(
    a: &Vector3<f64>,
    a_hat: &Vector3<f64>,
    tof: f64,
    c: &Constants,
) -> Result<Vector3<f64>, DynamicsError> {
    let v0 = solve_transfer_min_norm(a, a_hat, tof, c)?;
    let (_, _, vr, vv) = blocks(&cw_stm(tof, c));
    Ok(vr * a + vv * v0)
}

/// Constant force that holds a deputy at rest at `pos` (the CWH equilibrium thrust).
pub fn hold_thrust(pos: &Vector3<f64>, c: &Constants) -> Vector3<f64> {
    let n2 = c.sigma_mu().powi(2);
    Vector3::new(-3.0 * n2 * pos.x, 0.0, n2 * pos.z) * c.mass()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Fixed-step RK4 of the CWH ODE; test-only oracle.
    fn rk4(state: &RelState6, u: &Vector3<f64>, dt: f64, h: f64, c: &Constants) -> RelState6 {
        let mut x = state.to_vector();
        let steps = (dt / h).round() as usize;
        for _ in 0..steps {
            let k1 = cw_derivative(&x, u, c);
            let k2 = cw_derivative(&(x + k1 * (h / 2.0)), u, c);
            let k3 = cw_derivative(&(x + k2 * (h / 2.0)), u, c);
            let k4 = cw_derivative(&(x + k3 * h), u, c);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        RelState6::from_vector(&x)
    }

    fn spec_constants() -> Constants {
        Constants::with_mean_motion(1.000558e-3, DEFAULT_ORBIT_RADIUS, 1.0).unwrap()
    }

    #[test]
    fn stm_at_zero_is_identity() {
        let c = Constants::default();
        assert_eq!(cw_stm(0.0, &c), Matrix6::identity());
    }

    #[test]
    fn stm_matches_rk4_at_100s() {
        let c = spec_constants();
        let s0 = RelState6::new(
            Vector3::new(200.0, 0.0, 0.0),
            Vector3::new(0.0, -0.40022, 0.0),
        );
        let stm = RelState6::from_vector(&(cw_stm(100.0, &c) * s0.to_vector()));
        let oracle = rk4(&s0, &Vector3::zeros(), 100.0, 1e-3, &c);
        assert!((stm.pos - oracle.pos).norm() <= 1e-6);
    }

    #[test]
    fn input_response_matches_rk4() {
        let c = Constants::default();
        let s0 = RelState6::new(
            Vector3::new(50.0, -20.0, 10.0),
            Vector3::new(0.1, 0.02, -0.05),
        );
        let u = Vector3::new(0.01, -0.02, 0.005);
        let exact = propagate_constant(&s0, &u, 300.0, &c).unwrap();
        let oracle = rk4(&s0, &u, 300.0, 0.01, &c);
        assert!((exact.pos - oracle.pos).norm() < 1e-7);
        assert!((exact.vel - oracle.vel).norm() < 1e-9);
    }

    #[test]
    fn nmc_closes_after_one_period() {
        let c = Constants::default();
        let s0 = nmc_init(200.0, 0.0, &c).unwrap();
        let s1 = propagate(&s0, &[], c.period(), &c).unwrap();
        assert!((s1.pos - s0.pos).norm() <= 1e-6);
    }

    #[test]
    fn nmc_init_velocity() {
        let c = spec_constants();
        let s = nmc_init(200.0, 0.0, &c).unwrap();
        assert_relative_eq!(s.vel.y, -0.4002232, epsilon = 1e-6);
        let s = nmc_init(-200.0, 0.0, &c).unwrap();
        assert_relative_eq!(s.vel.y, 0.4002232, epsilon = 1e-6);
        assert_eq!(nmc_init(0.0, 5.0, &c), Err(DynamicsError::DegenerateNmc));
    }

    #[test]
    fn nmc_out_of_plane_is_harmonic() {
        let c = Constants::default();
        let s0 = nmc_init(200.0, 100.0, &c).unwrap();
        for k in 1..8 {
            let t = c.period() * k as f64 / 8.0;
            let s = propagate(&s0, &[], t, &c).unwrap();
            assert_relative_eq!(s.pos.z, 100.0 * (c.sigma_mu() * t).cos(), epsilon = 1e-9);
        }
    }

    #[test]
    fn nmc_phase_states_lie_on_the_orbit() {
        let c = Constants::default();
        let s0 = nmc_init(100.0, 50.0, &c).unwrap();
        let t = 1234.5;
        let s = propagate(&s0, &[], t, &c).unwrap();
        let p = nmc_state_at_phase(100.0, 50.0, c.sigma_mu() * t, &c);
        assert!((s.pos - p.pos).norm() < 1e-9);
        assert!((s.vel - p.vel).norm() < 1e-12);
    }

    #[test]
    fn equilibrium_thrust_holds_position() {
        let c = Constants::default();
        let s0 = RelState6::at_rest(Vector3::new(200.0, 0.0, 0.0));
        let u = hold_thrust(&s0.pos, &c);
        assert_relative_eq!(u.x, -3.0 * c.sigma_mu().powi(2) * 200.0);
        for dt in [1.0, 100.0, 5000.0] {
            let s = propagate(&s0, &[ThrustSample { t: 0.0, u }], dt, &c).unwrap();
            assert!((s.pos - s0.pos).norm() < 1e-9, "dt={dt}");
            assert!(s.vel.norm() < 1e-12);
        }
    }

    #[test]
    fn piecewise_schedule_equals_composition() {
        let c = Constants::default();
        let s0 = RelState6::new(Vector3::new(10.0, 20.0, -5.0), Vector3::new(0.0, 0.1, 0.0));
        let u1 = Vector3::new(0.01, 0.0, 0.0);
        let u2 = Vector3::new(0.0, -0.02, 0.01);
        let sched = [
            ThrustSample { t: 0.0, u: u1 },
            ThrustSample { t: 40.0, u: u2 },
        ];
        let direct = propagate(&s0, &sched, 100.0, &c).unwrap();
        let mid = propagate_constant(&s0, &u1, 40.0, &c).unwrap();
        let end = propagate_constant(&mid, &u2, 60.0, &c).unwrap();
        assert!((direct.pos - end.pos).norm() < 1e-12);
        // a schedule starting late coasts first
        let late = propagate(&s0, &[ThrustSample { t: 30.0, u: u1 }], 50.0, &c).unwrap();
        let coast = propagate(&s0, &[], 30.0, &c).unwrap();
        let burn = propagate_constant(&coast, &u1, 20.0, &c).unwrap();
        assert!((late.pos - burn.pos).norm() < 1e-12);
    }

    #[test]
    fn propagate_rejects_bad_input() {
        let c = Constants::default();
        let bad = RelState6::at_rest(Vector3::new(f64::NAN, 0.0, 0.0));
        assert!(matches!(
            propagate(&bad, &[], 1.0, &c),
            Err(DynamicsError::NonFinite(_))
        ));
        let ok = RelState6::at_rest(Vector3::new(1.0, 0.0, 0.0));
        assert!(matches!(
            propagate(&ok, &[], -1.0, &c),
            Err(DynamicsError::NegativeDuration(_))
        ));
        let sched = [ThrustSample {
            t: 0.0,
            u: Vector3::new(f64::INFINITY, 0.0, 0.0),
        }];
        assert!(propagate(&ok, &sched, 1.0, &c).is_err());
        let unordered = [
            ThrustSample {
                t: 5.0,
                u: Vector3::zeros(),
            },
            ThrustSample {
                t: 1.0,
                u: Vector3::zeros(),
            },
        ];
        assert!(matches!(
            propagate(&ok, &unordered, 10.0, &c),
            Err(DynamicsError::BadSchedule(_))
        ));
        assert_eq!(propagate(&ok, &[], 0.0, &c).unwrap(), ok);
    }

    #[test]
    fn transfer_lands_on_target() {
        let c = Constants::default();
        let a = Vector3::new(200.0, 0.0, 0.0);
        let b = Vector3::new(0.0, 200.0, 0.0);
        let tof = (PI / 2.0) / (2.0 * PI * c.sigma_mu());
        let v0 = solve_transfer(&a, &b, tof, &c).unwrap();
        let s = propagate(&RelState6::new(a, v0), &[], tof, &c).unwrap();
        assert!((s.pos - b).norm() <= 1e-6);
        let vf = final_velocity(&a, &b, tof, &c).unwrap();
        assert!((s.vel - vf).norm() < 1e-12);
    }

    #[test]
    fn half_and_full_period_transfers_are_singular() {
        let c = Constants::default();
        let a = Vector3::new(200.0, 0.0, 0.0);
        let b = Vector3::new(0.0, 200.0, 0.0);
        let half = PI / c.sigma_mu();
        assert!(matches!(
            solve_transfer(&a, &b, half, &c),
            Err(DynamicsError::SingularTransfer { .. })
        ));
        assert!(final_velocity(&a, &b, half, &c).is_err());
        assert!(solve_transfer(&a, &a, c.period(), &c).is_err());
        assert!(matches!(
            solve_transfer(&a, &b, 0.0, &c),
            Err(DynamicsError::NonPositiveTof(_))
        ));
    }

    #[test]
    fn closed_orbit_min_norm_transfer_is_the_nmc_velocity() {
        let c = Constants::default();
        let s = nmc_init(200.0, 0.0, &c).unwrap();
        let v0 = solve_transfer_min_norm(&s.pos, &s.pos, c.period(), &c).unwrap();
        assert!((v0 - s.vel).norm() < 1e-9);
        let vf = final_velocity_min_norm(&s.pos, &s.pos, c.period(), &c).unwrap();
        assert!((vf - s.vel).norm() < 1e-9);
        // a full period cannot reach a different point
        let other = Vector3::new(0.0, 200.0, 0.0);
        assert!(matches!(
            solve_transfer_min_norm(&s.pos, &other, c.period(), &c),
            Err(DynamicsError::InconsistentTransfer { .. })
        ));
    }

    #[test]
    fn period_matches_mission_horizon() {
        let c = Constants::default();
        assert!((c.period() - 6280.0).abs() <= 1.0);
    }

    #[test]
    fn constants_reject_nonpositive() {
        assert!(Constants::new(0.0, 1.0, 1.0).is_err());
        assert!(Constants::new(1.0, -1.0, 1.0).is_err());
        assert!(Constants::new(1.0, 1.0, f64::NAN).is_err());
    }
}
