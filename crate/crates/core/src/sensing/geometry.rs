//! Procedural POI clouds.

use super::PoiCloud;
use nalgebra::Vector3;

/// Fibonacci lattice on a sphere centered at the body origin, radial normals.
/// Panics if `n_points < 4` or `radius` is not positive.
pub fn sphere_cloud(n_points: usize, radius: f64) -> PoiCloud {
    assert!(n_points >= 4, "sphere cloud needs at least 4 points");
    assert!(
        radius.is_finite() && radius > 0.0,
        "sphere radius must be positive"
    );
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut points = Vec::with_capacity(n_points);
    let mut normals = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let z = 1.0 - (2 * i + 1) as f64 / n_points as f64;
        let r = (1.0 - z * z).sqrt();
        let phi = golden * i as f64;
        let n = Vector3::new(r * phi.cos(), r * phi.sin(), z);
        normals.push(n);
        points.push(n * radius);
    }
    PoiCloud::new(points, normals).expect("lattice normals are unit length")
}

/// Samples the outer faces of an axis-aligned box at cell centres no more
/// than `spacing` apart.
fn box_faces(
    lo: Vector3<f64>,
    hi: Vector3<f64>,
    spacing: f64,
    points: &mut Vec<Vector3<f64>>,
    normals: &mut Vec<Vector3<f64>>,
) {
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        let nu = ((hi[u] - lo[u]) / spacing).ceil().max(1.0) as usize;
        let nv = ((hi[v] - lo[v]) / spacing).ceil().max(1.0) as usize;
        for (side, coord) in [(-1.0, lo[axis]), (1.0, hi[axis])] {
            for i in 0..nu {
                for j in 0..nv {
                    let mut p = Vector3::zeros();
                    p[axis] = coord;
                    p[u] = lo[u] + (hi[u] - lo[u]) * (i as f64 + 0.5) / nu as f64;
                    p[v] = lo[v] + (hi[v] - lo[v]) * (j as f64 + 0.5) / nv as f64;
                    let mut n = Vector3::zeros();
                    n[axis] = side;
                    points.push(p);
                    normals.push(n);
                }
            }
        }
    }
}

/// Stand-in for an Earth-observation spacecraft: a 3×3×6 m bus with a single
/// 9×5 m solar wing offset along −y. Roughly 800 POIs at 0.5 m spacing.
pub fn aura_standin() -> PoiCloud {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    box_faces(
        Vector3::new(-1.5, -1.5, -3.0),
        Vector3::new(1.5, 1.5, 3.0),
        0.5,
        &mut points,
        &mut normals,
    );
    box_faces(
        Vector3::new(-0.1, -11.0, -2.5),
        Vector3::new(0.1, -2.0, 2.5),
        0.5,
        &mut points,
        &mut normals,
    );
    PoiCloud::new(points, normals).expect("axis normals are unit length")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_point_lattice_is_well_spread() {
        let c = sphere_cloud(20, 10.0);
        assert_eq!(c.len(), 20);
        let mut min_angle = f64::INFINITY;
        for i in 0..20 {
            for j in (i + 1)..20 {
                min_angle = min_angle.min(c.normals()[i].angle(&c.normals()[j]));
            }
        }
        assert!(min_angle > 0.4, "min pairwise angle {min_angle}");
    }

    #[test]
    fn normals_are_radial() {
        let c = sphere_cloud(300, 7.0);
        for (p, n) in c.points().iter().zip(c.normals()) {
            assert!((p / 7.0 - n).norm() < 1e-12);
            assert!((n.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn four_point_lattice_is_nearly_centred() {
        assert!(sphere_cloud(4, 1.0).centroid().norm() < 0.3);
    }

    #[test]
    fn standin_shape() {
        let c = aura_standin();
        assert!((700..=1200).contains(&c.len()), "{} POIs", c.len());
        let ext = |axis: usize| {
            let lo = c
                .points()
                .iter()
                .map(|p| p[axis])
                .fold(f64::INFINITY, f64::min);
            let hi = c
                .points()
                .iter()
                .map(|p| p[axis])
                .fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        };
        assert_eq!(ext(1), (-11.0, 1.5));
        assert_eq!(ext(2), (-3.0, 3.0));
    }
}
