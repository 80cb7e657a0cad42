//! Points of interest on the inspected object and what a camera sees of them.

pub mod capture;
pub mod geometry;
pub mod hpr;
pub mod hull;
pub mod ply;

pub use capture::{
    body_to_hill, capture, illumination, sun_in_hill, CaptureConfig, CaptureError, IllumMode,
};
pub use geometry::{aura_standin, sphere_cloud};
pub use hpr::{hidden_point_removal, HPR_GAMMA};
pub use ply::{load_ply, parse_ply, write_ply, PlyEncoding, PlyError};

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CloudError {
    #[error("{points} points but {normals} normals")]
    LengthMismatch { points: usize, normals: usize },
    #[error("point {0} is not finite")]
    NonFinitePoint(usize),
    #[error("normal {0} has zero or non-finite length")]
    BadNormal(usize),
}

/// Body-frame POIs with unit outward normals. Ids are indices `0..len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoiCloud {
    points: Vec<Vector3<f64>>,
    normals: Vec<Vector3<f64>>,
}

impl PoiCloud {
    /// Normals are normalized on construction.
    pub fn new(points: Vec<Vector3<f64>>, normals: Vec<Vector3<f64>>) -> Result<Self, CloudError> {
        if points.len() != normals.len() {
            return Err(CloudError::LengthMismatch {
                points: points.len(),
                normals: normals.len(),
            });
        }
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(CloudError::NonFinitePoint(i));
        }
        let mut unit = Vec::with_capacity(normals.len());
        for (i, n) in normals.into_iter().enumerate() {
            let len = n.norm();
            if !(len.is_finite() && len > 0.0) {
                return Err(CloudError::BadNormal(i));
            }
            unit.push(n / len);
        }
        Ok(Self {
            points,
            normals: unit,
        })
    }

    pub fn empty() -> Self {
        Self {
            points: Vec::new(),
            normals: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn centroid(&self) -> Vector3<f64> {
        if self.points.is_empty() {
            return Vector3::zeros();
        }
        self.points.iter().sum::<Vector3<f64>>() / self.points.len() as f64
    }
}

/// Fixed-size bitset over POI ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PoiSet {
    words: Vec<u64>,
    n: usize,
}

impl PoiSet {
    pub fn new(n: usize) -> Self {
        Self {
            words: vec![0; n.div_ceil(64)],
            n,
        }
    }

    /// Panics on an id outside `0..n`.
    pub fn from_ids(n: usize, ids: &[usize]) -> Self {
        let mut s = Self::new(n);
        for &id in ids {
            s.insert(id);
        }
        s
    }

    pub fn universe(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, id: usize) {
        assert!(id < self.n, "POI id {id} outside 0..{}", self.n);
        self.words[id / 64] |= 1 << (id % 64);
    }

    pub fn contains(&self, id: usize) -> bool {
        id < self.n && self.words[id / 64] & (1 << (id % 64)) != 0
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn union_with(&mut self, other: &PoiSet) {
        assert_eq!(self.n, other.n, "POI sets over different clouds");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    /// Number of ids in `other` that are not already in `self`.
    pub fn count_new(&self, other: &PoiSet) -> usize {
        assert_eq!(self.n, other.n, "POI sets over different clouds");
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (b & !a).count_ones() as usize)
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&i| self.contains(i))
    }
}

/// Cumulative set of POIs seen by the whole team.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InspectionState {
    seen: PoiSet,
}

impl InspectionState {
    pub fn new(n_poi: usize) -> Self {
        Self {
            seen: PoiSet::new(n_poi),
        }
    }

    pub fn seen(&self) -> &PoiSet {
        &self.seen
    }

    /// `|seen| / N`; an empty cloud counts as fully inspected.
    pub fn fraction(&self) -> f64 {
        if self.seen.n == 0 {
            return 1.0;
        }
        self.seen.count() as f64 / self.seen.n as f64
    }

    pub fn merge(&mut self, ids: &PoiSet) {
        self.seen.union_with(ids);
    }
}

/// Union of `state` with `new_ids`. Panics on an id outside the cloud.
pub fn accumulate(mut state: InspectionState, new_ids: &[usize]) -> InspectionState {
    for &id in new_ids {
        state.seen.insert(id);
    }
    state
}
