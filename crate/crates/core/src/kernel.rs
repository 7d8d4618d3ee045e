//! Distance and nearest-centroid kernel used by the mappers.
//!
//! Distances are squared Euclidean in single precision; the argmin is the
//! same as for the rooted metric.

use crate::error::{Error, Result};
use crate::types::CentroidSet;

/// Σ (a_i − b_i)² in single precision.
pub fn squared_distance(a: &[f32], b: &[f32]) -> Result<f32> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!(
            "dimensionality mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(squared_distance_unchecked(a, b))
}

#[inline]
pub(crate) fn squared_distance_unchecked(a: &[f32], b: &[f32]) -> f32 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let diff = x - y;
            diff * diff
        })
        .sum()
}

/// Index of the closest centroid and its squared distance. Ties go to the
/// lowest index.
pub fn nearest_centroid(sample: &[f32], centroids: &CentroidSet) -> Result<(usize, f32)> {
    if sample.len() != centroids.d() {
        return Err(Error::Contract(format!(
            "sample has dimensionality {}, centroids {}",
            sample.len(),
            centroids.d()
        )));
    }
    Ok(nearest_unchecked(sample, centroids.as_slice()))
}

/// `centroids` is a non-empty centroid-major buffer with rows of `sample.len()`.
#[inline]
pub(crate) fn nearest_unchecked(sample: &[f32], centroids: &[f32]) -> (usize, f32) {
    let mut best = 0;
    let mut best_dist = f32::INFINITY;
    for (j, centroid) in centroids.chunks_exact(sample.len()).enumerate() {
        let dist = squared_distance_unchecked(sample, centroid);
        // strict comparison keeps the lowest index on ties
        if dist < best_dist {
            best_dist = dist;
            best = j;
        }
    }
    (best, best_dist)
}
