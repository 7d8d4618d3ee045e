//! Map phase: assign every sample of a partition to its nearest centroid and
//! accumulate per-cluster counts, coordinate sums and distortion locally, so
//! the reducer only ever sees `M` small aggregates instead of raw samples.

use crate::error::{Error, Result};
use crate::kernel::nearest_unchecked;
use crate::types::{CentroidSet, LabelVector, PartialAggregate};

/// One mapper's share of an iteration.
#[derive(Debug, Clone, Copy)]
pub struct MapperInput<'a> {
    /// Contiguous rows of the sample set, sample-major.
    pub partition: &'a [f32],
    pub d: usize,
    pub centroids: &'a CentroidSet,
    pub mapper_id: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapperOutput {
    /// Labels in partition order.
    pub labels: LabelVector,
    pub aggregate: PartialAggregate,
}

/// Running state of a mapper: counter, accumulator and distortion per
/// cluster, fed one sample at a time.
#[derive(Debug, Clone)]
pub struct MapAccumulator<'c> {
    centroids: &'c [f32],
    d: usize,
    aggregate: PartialAggregate,
}

impl<'c> MapAccumulator<'c> {
    pub fn new(centroids: &'c CentroidSet) -> Self {
        Self {
            centroids: centroids.as_slice(),
            d: centroids.d(),
            aggregate: PartialAggregate::zeros(centroids.k(), centroids.d()),
        }
    }

    /// Assigns `sample` and folds it into the aggregate. `sample` must have
    /// the centroid dimensionality.
    #[inline]
    pub fn push(&mut self, sample: &[f32]) -> u32 {
        debug_assert_eq!(sample.len(), self.d);
        let (label, dist) = nearest_unchecked(sample, self.centroids);
        self.aggregate.counts[label] += 1;
        let sum = &mut self.aggregate.sums[label * self.d..(label + 1) * self.d];
        for (acc, v) in sum.iter_mut().zip(sample) {
            *acc += v;
        }
        self.aggregate.distortion += dist;
        label as u32
    }

    pub fn finish(self) -> PartialAggregate {
        self.aggregate
    }
}

/// Runs one mapper over its partition, in partition order.
pub fn map_partition(input: MapperInput<'_>) -> Result<MapperOutput> {
    if input.d != input.centroids.d() {
        return Err(Error::config(
            "d",
            format!(
                "mapper {}: samples have dimensionality {}, centroids {}",
                input.mapper_id,
                input.d,
                input.centroids.d()
            ),
        ));
    }
    if input.d == 0 || input.partition.len() % input.d != 0 {
        return Err(Error::Contract(format!(
            "mapper {}: partition of {} values is not a whole number of samples",
            input.mapper_id,
            input.partition.len()
        )));
    }
    let mut acc = MapAccumulator::new(input.centroids);
    let labels = input
        .partition
        .chunks_exact(input.d)
        .map(|sample| acc.push(sample))
        .collect();
    Ok(MapperOutput {
        labels: LabelVector::from_raw(labels),
        aggregate: acc.finish(),
    })
}

/// Splits `n` samples into `m` contiguous `(offset, length)` partitions. The
/// first `n % m` partitions get one extra sample.
pub fn partition_bounds(n: usize, m: usize) -> Result<Vec<(usize, usize)>> {
    if m == 0 {
        return Err(Error::config("m", "mapper count must be at least 1"));
    }
    let base = n / m;
    let extra = n % m;
    let mut offset = 0;
    Ok((0..m)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let bounds = (offset, len);
            offset += len;
            bounds
        })
        .collect())
}
