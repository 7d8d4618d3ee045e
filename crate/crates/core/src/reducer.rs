//! Reduce phase: merge the mappers' aggregates in mapper-ID order, move each
//! centroid to the mean of its members and test convergence.

use crate::error::{Error, Result};
use crate::types::{CentroidSet, PartialAggregate};

#[derive(Debug, Clone, PartialEq)]
pub struct ReduceResult {
    pub new_centroids: CentroidSet,
    pub total_distortion: f32,
    /// The `iteration_done` signal.
    pub converged: bool,
}

/// Element-wise sum of `parts`, accumulated in slice order.
pub fn merge_aggregates(parts: &[PartialAggregate]) -> Result<PartialAggregate> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Contract("no partial aggregates to merge".into()))?;
    let (k, d) = (first.k(), first.d());
    let mut merged = PartialAggregate::zeros(k, d);
    for (id, part) in parts.iter().enumerate() {
        if part.k() != k || part.d() != d {
            return Err(Error::Contract(format!(
                "aggregate {id} has shape k={} d={}, expected k={k} d={d}",
                part.k(),
                part.d()
            )));
        }
        for (acc, c) in merged.counts.iter_mut().zip(&part.counts) {
            *acc += c;
        }
        for (acc, s) in merged.sums.iter_mut().zip(&part.sums) {
            *acc += s;
        }
        merged.distortion += part.distortion;
    }
    Ok(merged)
}

/// New centroids as per-cluster means. A cluster without members keeps its
/// previous centroid.
pub fn update_centroids(merged: &PartialAggregate, previous: &CentroidSet) -> Result<CentroidSet> {
    let mut next = previous.clone();
    update_centroids_in_place(merged, &mut next)?;
    Ok(next)
}

pub fn update_centroids_in_place(merged: &PartialAggregate, centroids: &mut CentroidSet) -> Result<()> {
    if merged.k() != centroids.k() || merged.d() != centroids.d() {
        return Err(Error::Contract(format!(
            "aggregate shape k={} d={} does not match centroids k={} d={}",
            merged.k(),
            merged.d(),
            centroids.k(),
            centroids.d()
        )));
    }
    let d = centroids.d();
    for (j, row) in centroids.as_mut_slice().chunks_exact_mut(d).enumerate() {
        let count = merged.counts[j];
        if count == 0 {
            continue;
        }
        let count = count as f32;
        for (dst, sum) in row.iter_mut().zip(merged.sum_row(j)) {
            *dst = sum / count;
        }
    }
    Ok(())
}

/// True iff a previous distortion exists and `|prev − curr| ≤ epsilon`.
pub fn check_convergence(prev_distortion: Option<f32>, curr_distortion: f32, epsilon: f32) -> bool {
    match prev_distortion {
        Some(prev) => (prev - curr_distortion).abs() <= epsilon,
        None => false,
    }
}

/// Full reducer pass over the mappers' intermediate results.
pub fn reduce(
    parts: &[PartialAggregate],
    previous: &CentroidSet,
    prev_distortion: Option<f32>,
    epsilon: f32,
) -> Result<ReduceResult> {
    let merged = merge_aggregates(parts)?;
    let new_centroids = update_centroids(&merged, previous)?;
    Ok(ReduceResult {
        new_centroids,
        total_distortion: merged.distortion,
        converged: check_convergence(prev_distortion, merged.distortion, epsilon),
    })
}
