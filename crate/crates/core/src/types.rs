//! Domain types shared by the mapper, reducer and engine.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` samples of `d` single-precision coordinates, stored sample-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    data: Vec<f32>,
    d: usize,
}

impl SampleSet {
    pub fn new(data: Vec<f32>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::config("d", "dimensionality must be at least 1"));
        }
        if data.is_empty() {
            return Err(Error::config("n", "sample set must contain at least one sample"));
        }
        if data.len() % d != 0 {
            return Err(Error::Contract(format!(
                "{} values do not divide into samples of dimensionality {d}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Contract(format!(
                "non-finite value {} in sample {}",
                data[pos],
                pos / d
            )));
        }
        Ok(Self { data, d })
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.d)
    }

    /// Rows `offset..offset + len` as one contiguous slice.
    pub fn range(&self, offset: usize, len: usize) -> &[f32] {
        &self.data[offset * self.d..(offset + len) * self.d]
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }
}

/// `k` centroids of dimensionality `d`, stored centroid-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet {
    data: Vec<f32>,
    d: usize,
}

impl CentroidSet {
    pub fn new(data: Vec<f32>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::config("d", "dimensionality must be at least 1"));
        }
        if data.is_empty() {
            return Err(Error::Contract("centroid set is empty".into()));
        }
        if data.len() % d != 0 {
            return Err(Error::Contract(format!(
                "{} values do not divide into centroids of dimensionality {d}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("non-finite centroid coordinate".into()));
        }
        Ok(Self { data, d })
    }

    pub fn k(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, j: usize) -> &[f32] {
        &self.data[j * self.d..(j + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.d)
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }
}

/// Cluster index per sample.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelVector(Vec<u32>);

impl LabelVector {
    /// Checks that every label lies in `0..k`.
    pub fn new(labels: Vec<u32>, k: usize) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|&&l| l as usize >= k) {
            return Err(Error::Contract(format!("label {bad} out of range for k={k}")));
        }
        Ok(Self(labels))
    }

    pub(crate) fn from_raw(labels: Vec<u32>) -> Self {
        Self(labels)
    }

    pub fn labels(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<u32> {
        self.0
    }
}

/// Intermediate result of one mapper: member count and coordinate sum per
/// cluster plus the partial distortion of its partition.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialAggregate {
    pub counts: Vec<u64>,
    pub sums: Vec<f32>,
    pub distortion: f32,
    d: usize,
}

impl PartialAggregate {
    pub fn zeros(k: usize, d: usize) -> Self {
        Self {
            counts: vec![0; k],
            sums: vec![0.0; k * d],
            distortion: 0.0,
            d,
        }
    }

    pub fn from_parts(counts: Vec<u64>, sums: Vec<f32>, distortion: f32, d: usize) -> Result<Self> {
        if d == 0 || sums.len() != counts.len() * d {
            return Err(Error::Contract(format!(
                "aggregate shape mismatch: {} counts, {} sums, d={d}",
                counts.len(),
                sums.len()
            )));
        }
        if !(distortion >= 0.0) {
            return Err(Error::Contract(format!("negative distortion {distortion}")));
        }
        Ok(Self {
            counts,
            sums,
            distortion,
            d,
        })
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn sum_row(&self, j: usize) -> &[f32] {
        &self.sums[j * self.d..(j + 1) * self.d]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    pub k: usize,
    /// Number of mappers.
    pub m: usize,
    /// Absolute threshold on the change of distortion between iterations.
    pub epsilon: f32,
    pub max_iterations: usize,
    pub seed: u64,
}

impl ClusteringConfig {
    pub const DEFAULT_EPSILON: f32 = 1e-3;

    pub fn new(k: usize) -> Self {
        Self {
            k,
            m: 1,
            epsilon: Self::DEFAULT_EPSILON,
            max_iterations: 100,
            seed: 0,
        }
    }

    pub fn with_mappers(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f32) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k", "cluster count must be at least 1"));
        }
        if self.m == 0 {
            return Err(Error::config("m", "mapper count must be at least 1"));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::config("epsilon", format!("must be non-negative, got {}", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations", "must be at least 1"));
        }
        Ok(())
    }
}
