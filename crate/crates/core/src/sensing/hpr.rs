//! Hidden point removal by spherical flipping.
//!
//! Each point is reflected through a sphere of radius `R` centred on the
//! viewpoint; a point is visible iff its image lies on the convex hull of all
//! images plus the viewpoint.

use super::hull::{convex_hull, HullError};
use nalgebra::Vector3;

/// Flip radius as a multiple of the farthest point's range.
pub const HPR_GAMMA: f64 = 10.0;

/// Ids of `points` visible from `viewpoint`, ascending. Points coinciding
/// with the viewpoint are never visible.
pub fn hidden_point_removal(
    points: &[Vector3<f64>],
    viewpoint: &Vector3<f64>,
) -> Result<Vec<usize>, HullError> {
    let max_range = points
        .iter()
        .map(|p| (p - viewpoint).norm())
        .fold(0.0f64, f64::max);
    let radius = HPR_GAMMA * max_range;
    let mut flipped = Vec::with_capacity(points.len() + 1);
    let mut ids = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let q = p - viewpoint;
        let d = q.norm();
        if d == 0.0 {
            continue;
        }
        flipped.push(viewpoint + q * ((2.0 * radius - d) / d));
        ids.push(i);
    }
    flipped.push(*viewpoint);
    let hull = convex_hull(&flipped)?;
    Ok(hull
        .vertices
        .into_iter()
        .filter(|&k| k < ids.len())
        .map(|k| ids[k])
        .collect())
}
