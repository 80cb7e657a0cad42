//! Camera model: field of view, self-occlusion and illumination.
//!
//! Frames: the inertial frame coincides with Hill's frame at orbital phase 0
//! and the sun sits at +x inertial, so at phase θ the sun in Hill's frame is
//! `(cos θ, −sin θ, 0)` and the object is in Earth's shadow around θ = π.

use super::hpr::hidden_point_removal;
use super::PoiCloud;
use crate::attitude::RotState;
use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaptureError {
    #[error("`{field}` {msg}")]
    Range { field: &'static str, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IllumMode {
    Binary,
    BlinnPhongEarthShadow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaptureConfig {
    pub fov_half_angle: f64,
    /// Intensities at or above this are over-exposed.
    pub bright_max: f64,
    /// Intensities at or below this are too dark.
    pub dark_min: f64,
    pub illum_mode: IllumMode,
    pub ambient: f64,
    pub diffuse: f64,
    pub specular: f64,
    pub shininess: f64,
    /// Orbital-phase interval `[lo, hi]` (rad) in Earth's shadow.
    pub earth_angle: [f64; 2],
    /// No image is taken while the boresight is within this angle of the sun.
    pub sun_exclusion: Option<f64>,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        Self {
            fov_half_angle: PI / 6.0,
            bright_max: 0.9,
            dark_min: 0.1,
            illum_mode: IllumMode::BlinnPhongEarthShadow,
            ambient: 0.1,
            diffuse: 0.7,
            specular: 1.0,
            shininess: 1.0,
            earth_angle: [2.0 * PI / 3.0, 4.0 * PI / 3.0],
            sun_exclusion: None,
        }
    }
}

impl CaptureConfig {
    /// On/off illumination without Earth shadow.
    pub fn binary(fov_half_angle: f64, sun_exclusion: Option<f64>) -> Self {
        Self {
            fov_half_angle,
            illum_mode: IllumMode::Binary,
            sun_exclusion,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), CaptureError> {
        let range = |field, msg: String| Err(CaptureError::Range { field, msg });
        if !(self.fov_half_angle > 0.0 && self.fov_half_angle <= PI) {
            return range(
                "fov_half_angle",
                format!("must be in (0, π], got {}", self.fov_half_angle),
            );
        }
        if !(self.dark_min >= 0.0 && self.dark_min < self.bright_max) {
            return range(
                "dark_min",
                format!(
                    "must satisfy 0 ≤ dark_min < bright_max, got {} and {}",
                    self.dark_min, self.bright_max
                ),
            );
        }
        for (field, v) in [
            ("ambient", self.ambient),
            ("diffuse", self.diffuse),
            ("specular", self.specular),
            ("shininess", self.shininess),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return range(field, format!("must be finite and non-negative, got {v}"));
            }
        }
        let [lo, hi] = self.earth_angle;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && hi - lo <= 2.0 * PI) {
            return range(
                "earth_angle",
                format!("must be an interval of width ≤ 2π, got [{lo}, {hi}]"),
            );
        }
        if let Some(a) = self.sun_exclusion {
            if !(0.0..=PI).contains(&a) {
                return range("sun_exclusion", format!("must be in [0, π], got {a}"));
            }
        }
        Ok(())
    }
}

pub fn sun_in_hill(orbital_phase: f64) -> Vector3<f64> {
    Vector3::new(orbital_phase.cos(), -orbital_phase.sin(), 0.0)
}

/// Body-to-Hill attitude from the body-to-inertial one.
pub fn body_to_hill(
    q_body_to_inertial: &UnitQuaternion<f64>,
    orbital_phase: f64,
) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), -orbital_phase) * q_body_to_inertial
}

pub fn in_earth_shadow(orbital_phase: f64, earth_angle: [f64; 2]) -> bool {
    let [lo, hi] = earth_angle;
    if hi - lo >= 2.0 * PI {
        return true;
    }
    let tau = 2.0 * PI;
    let phi = (orbital_phase - lo).rem_euclid(tau);
    phi <= hi - lo
}

/// Light returned toward the viewer. `sun_dir` and `view_dir` are unit
/// vectors from the surface toward the sun and the camera.
pub fn illumination(
    normal: &Vector3<f64>,
    sun_dir: &Vector3<f64>,
    view_dir: &Vector3<f64>,
    cfg: &CaptureConfig,
    orbital_phase: f64,
) -> f64 {
    let ns = normal.dot(sun_dir);
    match cfg.illum_mode {
        IllumMode::Binary => {
            if ns > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        IllumMode::BlinnPhongEarthShadow => {
            if in_earth_shadow(orbital_phase, cfg.earth_angle) {
                return 0.0;
            }
            let half = sun_dir + view_dir;
            let nh = if half.norm() > 0.0 {
                normal.dot(&half.normalize()).max(0.0)
            } else {
                0.0
            };
            cfg.ambient + cfg.diffuse * ns.max(0.0) + cfg.specular * nh.powf(cfg.shininess)
        }
    }
}

fn accepted(intensity: f64, cfg: &CaptureConfig) -> bool {
    match cfg.illum_mode {
        IllumMode::Binary => intensity == 1.0,
        IllumMode::BlinnPhongEarthShadow => cfg.dark_min < intensity && intensity < cfg.bright_max,
    }
}

/// Captured ids from Hill-frame points and normals, ascending. Occlusion is
/// evaluated against the whole cloud. A degenerate cloud (hull failure) falls
/// back to a front-facing test.
pub fn capture_in_hill(
    points: &[Vector3<f64>],
    normals: &[Vector3<f64>],
    viewpoint: &Vector3<f64>,
    sun_dir: &Vector3<f64>,
    orbital_phase: f64,
    cfg: &CaptureConfig,
) -> Vec<usize> {
    let range = viewpoint.norm();
    if points.is_empty() || cfg.fov_half_angle <= 0.0 || range == 0.0 {
        return Vec::new();
    }
    let boresight = -viewpoint / range;
    if let Some(excl) = cfg.sun_exclusion {
        if boresight.dot(sun_dir) >= excl.cos() {
            return Vec::new();
        }
    }
    let cos_fov = cfg.fov_half_angle.cos();
    let candidates: Vec<usize> = (0..points.len())
        .filter(|&i| {
            let los = points[i] - viewpoint;
            let d = los.norm();
            if d == 0.0 {
                return false;
            }
            if boresight.dot(&los) / d < cos_fov {
                return false;
            }
            let view = -los / d;
            accepted(
                illumination(&normals[i], sun_dir, &view, cfg, orbital_phase),
                cfg,
            )
        })
        .collect();
    if candidates.is_empty() {
        return candidates;
    }
    match hidden_point_removal(points, viewpoint) {
        Ok(visible) => {
            let mut out = Vec::with_capacity(candidates.len());
            let mut vis = visible.iter().peekable();
            for c in candidates {
                while vis.next_if(|&&v| v < c).is_some() {}
                if vis.peek() == Some(&&c) {
                    out.push(c);
                }
            }
            out
        }
        Err(_) => candidates
            .into_iter()
            .filter(|&i| normals[i].dot(&(viewpoint - points[i])) > 0.0)
            .collect(),
    }
}

/// Ids captured in one image from `viewpoint` (Hill frame) of the object in
/// attitude `rso` (body to inertial).
pub fn capture(
    cloud: &PoiCloud,
    rso: &RotState,
    viewpoint: &Vector3<f64>,
    sun_dir: &Vector3<f64>,
    orbital_phase: f64,
    cfg: &CaptureConfig,
) -> Vec<usize> {
    let q = body_to_hill(&rso.q, orbital_phase);
    let points: Vec<Vector3<f64>> = cloud.points().iter().map(|p| q * p).collect();
    let normals: Vec<Vector3<f64>> = cloud.normals().iter().map(|n| q * n).collect();
    capture_in_hill(&points, &normals, viewpoint, sun_dir, orbital_phase, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::sphere_cloud;
    use proptest::prelude::*;

    fn still() -> RotState {
        RotState::new(UnitQuaternion::identity(), Vector3::zeros())
    }

    #[test]
    fn binary_examples() {
        let cfg = CaptureConfig::binary(PI / 6.0, None);
        let n = Vector3::z();
        assert_eq!(
            illumination(&n, &Vector3::x(), &Vector3::x(), &cfg, 0.0),
            0.0
        );
        assert_eq!(
            illumination(&n, &Vector3::z(), &Vector3::x(), &cfg, PI),
            1.0
        );
    }

    #[test]
    fn blinn_phong_head_on() {
        let cfg = CaptureConfig::default();
        let n = Vector3::x();
        let i = illumination(&n, &n, &n, &cfg, 0.0);
        assert!((i - 1.8).abs() < 1e-15);
        assert_eq!(illumination(&n, &n, &n, &cfg, PI), 0.0);
    }

    #[test]
    fn earth_shadow_interval() {
        let ea = [2.0 * PI / 3.0, 4.0 * PI / 3.0];
        assert!(in_earth_shadow(PI, ea));
        assert!(in_earth_shadow(PI + 2.0 * PI, ea));
        assert!(!in_earth_shadow(0.0, ea));
        assert!(!in_earth_shadow(2.0, ea));
        assert!(in_earth_shadow(2.1, ea));
        assert!(in_earth_shadow(0.3, [0.0, 2.0 * PI]));
    }

    /// Lit by a +x sun and facing the camera at `v`.
    fn front_cap(cloud: &PoiCloud, v: &Vector3<f64>) -> Vec<usize> {
        (0..cloud.len())
            .filter(|&i| {
                let n = cloud.normals()[i];
                n.x > 0.0 && n.dot(&(v - cloud.points()[i])) > 0.0
            })
            .collect()
    }

    #[test]
    fn front_cap_under_binary_light() {
        let cloud = sphere_cloud(20, 10.0);
        let v = Vector3::new(200.0, 0.0, 0.0);
        let cfg = CaptureConfig::binary(PI / 6.0, None);
        let got = capture(&cloud, &still(), &v, &Vector3::x(), 0.0, &cfg);
        assert_eq!(got, front_cap(&cloud, &v));
    }

    #[test]
    fn dense_front_cap_up_to_the_limb_band() {
        let cloud = sphere_cloud(8000, 10.0);
        let v = Vector3::new(200.0, 0.0, 0.0);
        let cfg = CaptureConfig::binary(PI / 6.0, None);
        let got = capture(&cloud, &still(), &v, &Vector3::x(), 0.0, &cfg);
        let oracle = front_cap(&cloud, &v);
        assert!(oracle.iter().all(|i| got.binary_search(i).is_ok()));
        for i in got.iter().filter(|i| oracle.binary_search(i).is_err()) {
            let n = cloud.normals()[*i];
            let e = n
                .dot(&(v - cloud.points()[*i]).normalize())
                .asin()
                .to_degrees();
            assert!(e > -2.0, "point {i} at {e}°");
        }
    }

    #[test]
    fn degenerate_scenes() {
        let cfg = CaptureConfig::default();
        let v = Vector3::new(200.0, 0.0, 0.0);
        assert!(capture(&PoiCloud::empty(), &still(), &v, &Vector3::x(), 0.0, &cfg).is_empty());
        let cloud = sphere_cloud(300, 10.0);
        let phase = PI;
        let got = capture(&cloud, &still(), &v, &sun_in_hill(phase), phase, &cfg);
        assert!(got.is_empty());
    }

    #[test]
    fn sun_exclusion_blinds_the_camera() {
        let cloud = sphere_cloud(100, 10.0);
        let v = Vector3::new(200.0, 0.0, 0.0);
        let cfg = CaptureConfig::binary(PI / 6.0, Some(PI / 6.0));
        // Boresight is −x; a sun at −x is straight ahead.
        let sun = Vector3::new(-1.0, 0.2, 0.0).normalize();
        assert!(capture(&cloud, &still(), &v, &sun, 0.0, &cfg).is_empty());
        let sun = Vector3::new(0.0, 1.0, 0.0);
        assert!(!capture(&cloud, &still(), &v, &sun, 0.0, &cfg).is_empty());
    }

    #[test]
    fn static_mode_is_fixed_in_hill_frame() {
        let n = 1e-3;
        for t in [0.0, 500.0, 3000.0] {
            let q = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), n * t);
            let q_hill = body_to_hill(&q, n * t);
            assert!(q_hill.angle() < 1e-12);
        }
        assert!((sun_in_hill(PI / 2.0) - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn validation_names_the_field() {
        let cfg = CaptureConfig {
            fov_half_angle: -1.0,
            ..CaptureConfig::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(CaptureError::Range {
                field: "fov_half_angle",
                ..
            })
        ));
        let cfg = CaptureConfig {
            dark_min: 0.95,
            ..CaptureConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(CaptureConfig::default().validate().is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn capture_is_monotone_in_fov(
            fov_a in 0.001f64..PI,
            fov_b in 0.001f64..PI,
            vx in -1.0f64..1.0, vy in -1.0f64..1.0, vz in -1.0f64..1.0,
            dist in 15.0f64..60.0,
            phase in 0.0f64..(2.0 * PI),
            blinn in any::<bool>(),
        ) {
            let dir = Vector3::new(vx, vy, vz);
            prop_assume!(dir.norm() > 0.1);
            let v = dir.normalize() * dist;
            let cloud = sphere_cloud(150, 10.0);
            let (lo, hi) = if fov_a < fov_b { (fov_a, fov_b) } else { (fov_b, fov_a) };
            let base = if blinn { CaptureConfig::default() } else { CaptureConfig::binary(lo, None) };
            let narrow = CaptureConfig { fov_half_angle: lo, ..base.clone() };
            let wide = CaptureConfig { fov_half_angle: hi, ..base };
            let sun = sun_in_hill(phase);
            let a = capture(&cloud, &still(), &v, &sun, phase, &narrow);
            let b = capture(&cloud, &still(), &v, &sun, phase, &wide);
            prop_assert!(a.iter().all(|i| b.contains(i)));
        }

        #[test]
        fn binary_lit_iff_diffuse_positive(
            nx in -1.0f64..1.0, ny in -1.0f64..1.0, nz in -1.0f64..1.0,
            sx in -1.0f64..1.0, sy in -1.0f64..1.0, sz in -1.0f64..1.0,
        ) {
            let n = Vector3::new(nx, ny, nz);
            let s = Vector3::new(sx, sy, sz);
            prop_assume!(n.norm() > 0.1 && s.norm() > 0.1);
            let (n, s) = (n.normalize(), s.normalize());
            let cfg = CaptureConfig::binary(1.0, None);
            let lit = illumination(&n, &s, &Vector3::x(), &cfg, 0.0) == 1.0;
            let phong = CaptureConfig { ambient: 0.0, specular: 0.0, ..CaptureConfig::default() };
            let diffuse = illumination(&n, &s, &Vector3::x(), &phong, 0.0);
            prop_assert_eq!(lit, diffuse > 0.0);
        }
    }
}
