//! Test-only reference implementations, independent of the library's
//! mapper/reducer code paths.

#![allow(dead_code)]

use mrkmeans::SampleSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Serial Lloyd iteration in double precision.
pub struct LloydTrace {
    pub labels: Vec<Vec<u32>>,
    pub distortions: Vec<f64>,
    pub centroids: Vec<f64>,
    pub converged: bool,
}

pub fn lloyd_f64(samples: &[f32], d: usize, init: &[f32], epsilon: f64, max_iterations: usize) -> LloydTrace {
    let x: Vec<f64> = samples.iter().map(|&v| v as f64).collect();
    let mut c: Vec<f64> = init.iter().map(|&v| v as f64).collect();
    let k = c.len() / d;
    let n = x.len() / d;
    let mut trace = LloydTrace {
        labels: Vec::new(),
        distortions: Vec::new(),
        centroids: Vec::new(),
        converged: false,
    };
    let mut prev: Option<f64> = None;
    for _ in 0..max_iterations {
        let mut labels = vec![0u32; n];
        let mut counts = vec![0usize; k];
        let mut sums = vec![0.0f64; k * d];
        let mut distortion = 0.0;
        for i in 0..n {
            let s = &x[i * d..(i + 1) * d];
            let mut best = 0;
            let mut best_dist = f64::INFINITY;
            for j in 0..k {
                let dist: f64 = (0..d).map(|t| (s[t] - c[j * d + t]).powi(2)).sum();
                if dist < best_dist {
                    best = j;
                    best_dist = dist;
                }
            }
            labels[i] = best as u32;
            counts[best] += 1;
            for t in 0..d {
                sums[best * d + t] += s[t];
            }
            distortion += best_dist;
        }
        for j in 0..k {
            if counts[j] > 0 {
                for t in 0..d {
                    c[j * d + t] = sums[j * d + t] / counts[j] as f64;
                }
            }
        }
        trace.labels.push(labels);
        trace.distortions.push(distortion);
        let done = prev.is_some_and(|p| (p - distortion).abs() <= epsilon);
        prev = Some(distortion);
        if done {
            trace.converged = true;
            break;
        }
    }
    trace.centroids = c;
    trace
}

/// Gaussian blobs with random centres; continuous values make exact ties
/// practically impossible.
pub fn blobs(rng: &mut ChaCha8Rng, n: usize, d: usize, components: usize, spread: f32) -> SampleSet {
    let centers: Vec<f32> = (0..components * d).map(|_| rng.random_range(-20.0..20.0)).collect();
    let noise = Normal::new(0.0f32, spread).unwrap();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let c = rng.random_range(0..components);
        for t in 0..d {
            data.push(centers[c * d + t] + noise.sample(rng));
        }
    }
    SampleSet::new(data, d).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest per-coordinate deviation relative to `max(|expected|, 1)`.
pub fn max_rel_err(got: &[f32], expected: &[f64]) -> f64 {
    got.iter()
        .zip(expected)
        .map(|(&g, &e)| (g as f64 - e).abs() / e.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// `E[t+1] ≤ E[t]·(1 + tol)` for every consecutive pair.
pub fn non_increasing(distortions: &[f32], tol: f32) -> bool {
    distortions.windows(2).all(|w| w[1] <= w[0] * (1.0 + tol))
}
