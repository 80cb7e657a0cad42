//! Torque-free rigid-body rotation of the inspected object.
//!
//! Attitude is a Hamilton, scalar-first unit quaternion mapping body-frame
//! vectors into the inertial frame; `omega` is the body-frame angular rate.

use nalgebra::{Quaternion, UnitQuaternion, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttitudeError {
    #[error("principal moment `{name}` must be finite and positive (got {value})")]
    NonPositiveMoment { name: &'static str, value: f64 },
    #[error("principal moments violate the triangle inequality ({0}, {1}, {2})")]
    NotRealizable(f64, f64, f64),
    #[error("integration step must be positive (got {0})")]
    BadStep(f64),
    #[error("negative duration {0}")]
    NegativeDuration(f64),
}

/// Principal moments of inertia (kg·m²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertiaDiag {
    pub ixx: f64,
    pub iyy: f64,
    pub izz: f64,
}

impl InertiaDiag {
    pub fn new(ixx: f64, iyy: f64, izz: f64) -> Result<Self, AttitudeError> {
        let inertia = Self { ixx, iyy, izz };
        inertia.validate()?;
        Ok(inertia)
    }

    pub fn validate(&self) -> Result<(), AttitudeError> {
        for (name, value) in [("ixx", self.ixx), ("iyy", self.iyy), ("izz", self.izz)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(AttitudeError::NonPositiveMoment { name, value });
            }
        }
        let (a, b, c) = (self.ixx, self.iyy, self.izz);
        if a + b < c || a + c < b || b + c < a {
            return Err(AttitudeError::NotRealizable(a, b, c));
        }
        Ok(())
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.ixx, self.iyy, self.izz)
    }

    pub fn angular_momentum(&self, omega: &Vector3<f64>) -> Vector3<f64> {
        self.as_vector().component_mul(omega)
    }

    pub fn kinetic_energy(&self, omega: &Vector3<f64>) -> f64 {
        0.5 * omega.dot(&self.angular_momentum(omega))
    }
}

impl Default for InertiaDiag {
    fn default() -> Self {
        Self {
            ixx: 100.0,
            iyy: 70.0,
            izz: 50.0,
        }
    }
}

/// Attitude and body angular velocity of the inspected object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotState {
    pub q: UnitQuaternion<f64>,
    pub omega: Vector3<f64>,
}

impl RotState {
    pub fn new(q: UnitQuaternion<f64>, omega: Vector3<f64>) -> Self {
        Self { q, omega }
    }

    /// Scalar-first components `[w, x, y, z]`.
    pub fn q_wxyz(&self) -> [f64; 4] {
        let q = self.q.quaternion();
        [q.w, q.i, q.j, q.k]
    }
}

/// Torque-free Euler equations for principal axes.
pub fn euler_rates(omega: &Vector3<f64>, inertia: &InertiaDiag) -> Vector3<f64> {
    let InertiaDiag { ixx, iyy, izz } = *inertia;
    Vector3::new(
        (iyy - izz) / ixx * omega.y * omega.z,
        (izz - ixx) / iyy * omega.x * omega.z,
        (ixx - iyy) / izz * omega.x * omega.y,
    )
}

/// `q̇ = ½ q ⊗ [0, ω]`, returned scalar-first.
pub fn quat_derivative(state: &RotState) -> Vector4<f64> {
    quat_rate(state.q.quaternion(), &state.omega)
}

fn quat_rate(q: &Quaternion<f64>, omega: &Vector3<f64>) -> Vector4<f64> {
    let w = Quaternion::new(0.0, omega.x, omega.y, omega.z);
    let d = q * w * 0.5;
    Vector4::new(d.w, d.i, d.j, d.k)
}

#[derive(Clone, Copy)]
struct Packed {
    q: Vector4<f64>,
    w: Vector3<f64>,
}

impl Packed {
    fn quat(&self) -> Quaternion<f64> {
        Quaternion::new(self.q[0], self.q[1], self.q[2], self.q[3])
    }

    fn deriv(&self, inertia: &InertiaDiag) -> Packed {
        Packed {
            q: quat_rate(&self.quat(), &self.w),
            w: euler_rates(&self.w, inertia),
        }
    }

    fn axpy(&self, k: &Packed, h: f64) -> Packed {
        Packed {
            q: self.q + k.q * h,
            w: self.w + k.w * h,
        }
    }
}

fn rk4_step(x: Packed, inertia: &InertiaDiag, h: f64) -> Packed {
    let k1 = x.deriv(inertia);
    let k2 = x.axpy(&k1, h / 2.0).deriv(inertia);
    let k3 = x.axpy(&k2, h / 2.0).deriv(inertia);
    let k4 = x.axpy(&k3, h).deriv(inertia);
    let mut out = Packed {
        q: x.q + (k1.q + k2.q * 2.0 + k3.q * 2.0 + k4.q) * (h / 6.0),
        w: x.w + (k1.w + k2.w * 2.0 + k3.w * 2.0 + k4.w) * (h / 6.0),
    };
    out.q /= out.q.norm();
    out
}

fn unpack(x: Packed) -> RotState {
    RotState {
        q: UnitQuaternion::new_normalize(x.quat()),
        omega: x.w,
    }
}

fn pack(s: &RotState) -> Packed {
    let q = s.q.quaternion();
    Packed {
        q: Vector4::new(q.w, q.i, q.j, q.k),
        w: s.omega,
    }
}

/// Integrates the rotational state forward by `dt` with steps of `step`
/// (the final step is shortened to land exactly on `dt`). The quaternion is
/// renormalized after every step.
pub fn propagate_rotation(
    state: &RotState,
    inertia: &InertiaDiag,
    dt: f64,
    step: f64,
) -> Result<RotState, AttitudeError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(AttitudeError::BadStep(step));
    }
    if dt < 0.0 || !dt.is_finite() {
        return Err(AttitudeError::NegativeDuration(dt));
    }
    let mut x = pack(state);
    let mut t = 0.0;
    while dt - t > 1e-12 {
        let h = step.min(dt - t);
        x = rk4_step(x, inertia, h);
        t += h;
    }
    Ok(unpack(x))
}

/// Samples the rotation at every multiple of `step` over `[0, horizon]`:
/// element `k` is the state at `k·step`.
pub fn rotation_history(
    state: &RotState,
    inertia: &InertiaDiag,
    horizon: f64,
    step: f64,
) -> Result<Vec<RotState>, AttitudeError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(AttitudeError::BadStep(step));
    }
    let n = (horizon / step).floor() as usize;
    let mut out = Vec::with_capacity(n + 1);
    let mut s = *state;
    out.push(s);
    for _ in 0..n {
        s = propagate_rotation(&s, inertia, step, step)?;
        out.push(s);
    }
    Ok(out)
}
