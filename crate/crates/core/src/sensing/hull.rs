//! 3D convex hull by QuickHull.
//!
//! Only the set of hull vertices is needed downstream, but the facet list is
//! kept so callers and tests can check the hull directly.

use nalgebra::Vector3;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HullError {
    #[error("convex hull needs at least 4 points (got {0})")]
    TooFewPoints(usize),
    #[error("points are degenerate (collinear or coplanar); no 3D hull exists")]
    Degenerate,
    #[error("non-finite point at index {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone)]
pub struct Hull {
    /// Indices of input points that are hull vertices, ascending.
    pub vertices: Vec<usize>,
    /// Outward-oriented triangles (counter-clockwise seen from outside).
    pub faces: Vec<[usize; 3]>,
}

struct Face {
    v: [usize; 3],
    normal: Vector3<f64>,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(v: [usize; 3], pts: &[Vector3<f64>]) -> Self {
        let n = (pts[v[1]] - pts[v[0]]).cross(&(pts[v[2]] - pts[v[0]]));
        let len = n.norm();
        let normal = if len > 0.0 { n / len } else { n };
        Face {
            v,
            normal,
            offset: normal.dot(&pts[v[0]]),
            outside: Vec::new(),
            alive: true,
        }
    }

    #[inline]
    fn distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

struct Builder<'a> {
    pts: &'a [Vector3<f64>],
    faces: Vec<Face>,
    edges: HashMap<(usize, usize), usize>,
    eps: f64,
}

impl<'a> Builder<'a> {
    fn add_face(&mut self, v: [usize; 3]) -> usize {
        let id = self.faces.len();
        self.faces.push(Face::new(v, self.pts));
        for k in 0..3 {
            self.edges.insert((v[k], v[(k + 1) % 3]), id);
        }
        id
    }

    fn kill_face(&mut self, id: usize) {
        let v = self.faces[id].v;
        self.faces[id].alive = false;
        for k in 0..3 {
            let key = (v[k], v[(k + 1) % 3]);
            if self.edges.get(&key) == Some(&id) {
                self.edges.remove(&key);
            }
        }
    }

    fn assign(&mut self, candidates: &[usize], faces: &[usize]) {
        for &p in candidates {
            let mut best: Option<(usize, f64)> = None;
            for &f in faces {
                let d = self.faces[f].distance(&self.pts[p]);
                if d > self.eps && best.is_none_or(|(_, bd)| d > bd) {
                    best = Some((f, d));
                }
            }
            if let Some((f, _)) = best {
                self.faces[f].outside.push(p);
            }
        }
    }
}

fn initial_simplex(pts: &[Vector3<f64>], eps: f64) -> Result<[usize; 4], HullError> {
    let mut extremes = [0usize; 6];
    for (i, p) in pts.iter().enumerate() {
        for axis in 0..3 {
            if p[axis] < pts[extremes[2 * axis]][axis] {
                extremes[2 * axis] = i;
            }
            if p[axis] > pts[extremes[2 * axis + 1]][axis] {
                extremes[2 * axis + 1] = i;
            }
        }
    }
    let mut best = (0.0, 0, 0);
    for &a in &extremes {
        for &b in &extremes {
            let d = (pts[a] - pts[b]).norm_squared();
            if d > best.0 {
                best = (d, a, b);
            }
        }
    }
    let (_, i0, i1) = best;
    if best.0.sqrt() <= eps {
        return Err(HullError::Degenerate);
    }
    let axis = (pts[i1] - pts[i0]).normalize();
    let mut i2 = usize::MAX;
    let mut far = 0.0;
    for (i, p) in pts.iter().enumerate() {
        let d = (p - pts[i0]).cross(&axis).norm();
        if d > far {
            far = d;
            i2 = i;
        }
    }
    if far <= eps {
        return Err(HullError::Degenerate);
    }
    let normal = (pts[i1] - pts[i0]).cross(&(pts[i2] - pts[i0])).normalize();
    let mut i3 = usize::MAX;
    let mut far = 0.0;
    for (i, p) in pts.iter().enumerate() {
        let d = normal.dot(&(p - pts[i0])).abs();
        if d > far {
            far = d;
            i3 = i;
        }
    }
    if far <= eps {
        return Err(HullError::Degenerate);
    }
    Ok([i0, i1, i2, i3])
}

/// Computes the convex hull of `points`.
pub fn convex_hull(points: &[Vector3<f64>]) -> Result<Hull, HullError> {
    if points.len() < 4 {
        return Err(HullError::TooFewPoints(points.len()));
    }
    if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(HullError::NonFinite(i));
    }
    let scale = points
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, c| m.max(c.abs()));
    let eps = 1e-11 * scale.max(f64::MIN_POSITIVE);

    let simplex = initial_simplex(points, eps)?;
    let mut b = Builder {
        pts: points,
        faces: Vec::with_capacity(4 * points.len()),
        edges: HashMap::with_capacity(8 * points.len()),
        eps,
    };

    let [a, c, d, e] = simplex;
    let centroid = (points[a] + points[c] + points[d] + points[e]) / 4.0;
    let mut seed = Vec::with_capacity(4);
    for tri in [[a, c, d], [a, d, e], [a, e, c], [c, e, d]] {
        let f = Face::new(tri, points);
        let oriented = if f.distance(&centroid) > 0.0 {
            [tri[0], tri[2], tri[1]]
        } else {
            tri
        };
        seed.push(b.add_face(oriented));
    }
    let rest: Vec<usize> = (0..points.len()).filter(|i| !simplex.contains(i)).collect();
    b.assign(&rest, &seed);

    let mut stack: Vec<usize> = seed.clone();
    while let Some(fid) = stack.pop() {
        if !b.faces[fid].alive || b.faces[fid].outside.is_empty() {
            continue;
        }
        let apex = {
            let f = &b.faces[fid];
            let mut best = (f.outside[0], f64::NEG_INFINITY);
            for &p in &f.outside {
                let dist = f.distance(&points[p]);
                if dist > best.1 {
                    best = (p, dist);
                }
            }
            best.0
        };
        let ap = points[apex];

        // Flood the region of faces that see the apex.
        let mut visible = vec![fid];
        let mut mark: HashMap<usize, bool> = HashMap::new();
        mark.insert(fid, true);
        let mut horizon: Vec<(usize, usize)> = Vec::new();
        let mut k = 0;
        while k < visible.len() {
            let f = visible[k];
            k += 1;
            let v = b.faces[f].v;
            for e in 0..3 {
                let (u, w) = (v[e], v[(e + 1) % 3]);
                let Some(&nb) = b.edges.get(&(w, u)) else {
                    continue;
                };
                let seen = match mark.get(&nb) {
                    Some(&s) => s,
                    None => {
                        let s = b.faces[nb].distance(&ap) > eps;
                        mark.insert(nb, s);
                        if s {
                            visible.push(nb);
                        }
                        s
                    }
                };
                if !seen {
                    horizon.push((u, w));
                }
            }
        }

        let mut orphans = Vec::new();
        for &f in &visible {
            orphans.append(&mut b.faces[f].outside);
            b.kill_face(f);
        }
        let new_faces: Vec<usize> = horizon
            .iter()
            .map(|&(u, w)| b.add_face([u, w, apex]))
            .collect();
        orphans.retain(|&p| p != apex);
        b.assign(&orphans, &new_faces);
        stack.extend(
            new_faces
                .iter()
                .copied()
                .filter(|&f| !b.faces[f].outside.is_empty()),
        );
    }

    let faces: Vec<[usize; 3]> = b.faces.iter().filter(|f| f.alive).map(|f| f.v).collect();
    let mut vertices: Vec<usize> = faces.iter().flatten().copied().collect();
    vertices.sort_unstable();
    vertices.dedup();
    Ok(Hull { vertices, faces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// In general position, the hull vertices are exactly the corners of
    /// triangles whose plane has every input point on one side. O(n^4).
    fn brute_force_vertices(pts: &[Vector3<f64>]) -> Vec<usize> {
        let n = pts.len();
        let mut on_hull = vec![false; n];
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    let normal = (pts[j] - pts[i]).cross(&(pts[k] - pts[i]));
                    if normal.norm() < 1e-12 {
                        continue;
                    }
                    let d: Vec<f64> = pts.iter().map(|p| normal.dot(&(p - pts[i]))).collect();
                    let tol = 1e-9 * normal.norm();
                    let all_le = d.iter().all(|&x| x <= tol);
                    let all_ge = d.iter().all(|&x| x >= -tol);
                    if all_le || all_ge {
                        on_hull[i] = true;
                        on_hull[j] = true;
                        on_hull[k] = true;
                    }
                }
            }
        }
        (0..n).filter(|&i| on_hull[i]).collect()
    }

    #[test]
    fn cube_with_interior_points() {
        let mut pts = Vec::new();
        for x in [-1.0, 1.0] {
            for y in [-1.0, 1.0] {
                for z in [-1.0, 1.0] {
                    pts.push(Vector3::new(x, y, z));
                }
            }
        }
        pts.push(Vector3::new(0.1, 0.2, -0.3));
        pts.push(Vector3::zeros());
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(hull.vertices, (0..8).collect::<Vec<_>>());
        assert_eq!(hull.faces.len(), 12);
    }

    #[test]
    fn matches_brute_force_on_random_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.random_range(5..25);
            let pts: Vec<Vector3<f64>> = (0..n)
                .map(|_| {
                    Vector3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect();
            let hull = convex_hull(&pts).unwrap();
            assert_eq!(hull.vertices, brute_force_vertices(&pts));
        }
    }

    #[test]
    fn faces_are_outward_and_contain_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vector3<f64>> = (0..500)
            .map(|_| {
                let v = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                v.normalize() * rng.random_range(0.5..1.0)
            })
            .collect();
        let hull = convex_hull(&pts).unwrap();
        // Euler characteristic of a closed triangulated sphere.
        let v = hull.vertices.len() as i64;
        let f = hull.faces.len() as i64;
        assert_eq!(v - f / 2, 2);
        for tri in &hull.faces {
            let face = Face::new(*tri, &pts);
            for p in &pts {
                assert!(face.distance(p) <= 1e-9);
            }
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(
            convex_hull(&[Vector3::zeros(); 3]).unwrap_err(),
            HullError::TooFewPoints(3)
        );
        let flat: Vec<_> = (0..10)
            .map(|i| Vector3::new(i as f64, (i * i) as f64, 0.0))
            .collect();
        assert_eq!(convex_hull(&flat).unwrap_err(), HullError::Degenerate);
        let mut bad = flat.clone();
        bad[2].z = f64::NAN;
        assert_eq!(convex_hull(&bad).unwrap_err(), HullError::NonFinite(2));
    }
}
