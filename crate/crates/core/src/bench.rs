//! Experiment harness: per-iteration throughput, map-phase share of the
//! runtime, and sweeps over the mapper count and the sample count.
//!
//! Throughput is `n · d · w / t` in bit/s where `t` is the mean wall time of
//! one iteration (map start to reduce done). Gbps figures use decimal units
//! (10⁹ bit/s). Staging and initialisation are excluded.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::engine::{Engine, IterationStats, RunResult};
use crate::error::{Error, Result};
use crate::ingest::{generate_synthetic, SyntheticSpec};
use crate::types::{ClusteringConfig, SampleSet};

/// Bits per stored coordinate.
pub const DEFAULT_BITS_PER_VALUE: u32 = 32;
pub const UNIT_CONVENTION: &str = "decimal (1 Gbps = 1e9 bit/s)";

/// `n · d · w / runtime_s` in bit/s.
pub fn throughput(n: u64, d: u64, w: u32, runtime_s: f64) -> Result<f64> {
    if n == 0 || d == 0 || w == 0 {
        return Err(Error::Measurement(format!("n, d and w must be positive (n={n}, d={d}, w={w})")));
    }
    if !(runtime_s > 0.0) || !runtime_s.is_finite() {
        return Err(Error::Measurement(format!("runtime must be positive and finite, got {runtime_s}")));
    }
    Ok(n as f64 * d as f64 * w as f64 / runtime_s)
}

pub fn to_gbps(bits_per_second: f64) -> f64 {
    bits_per_second / 1e9
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub source: String,
    pub n: usize,
    pub d: usize,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub dataset: DatasetDescriptor,
    pub m: usize,
    pub seed: u64,
    pub iterations_run: usize,
    pub converged: bool,
    pub history: Vec<IterationStats>,
    pub mean_iter_time_s: f64,
    pub throughput_bps: f64,
    pub throughput_gbps: f64,
    pub map_ratio: f64,
    pub bits_per_value: u32,
    pub unit_convention: String,
    /// Whether final labels equal those of the first run in the sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_match_first: Option<bool>,
}

/// Map time over map-plus-reduce time, summed across iterations.
pub fn map_ratio(history: &[IterationStats]) -> f64 {
    let map: f64 = history.iter().map(|s| s.map_time).sum();
    let reduce: f64 = history.iter().map(|s| s.reduce_time).sum();
    if map + reduce > 0.0 {
        map / (map + reduce)
    } else {
        0.0
    }
}

pub fn mean_iteration_time(history: &[IterationStats]) -> f64 {
    if history.is_empty() {
        return 0.0;
    }
    history.iter().map(|s| s.total_time).sum::<f64>() / history.len() as f64
}

impl BenchReport {
    pub fn from_run(dataset: DatasetDescriptor, config: &ClusteringConfig, run: &RunResult) -> Result<Self> {
        let mean = mean_iteration_time(&run.history);
        let bps = throughput(dataset.n as u64, dataset.d as u64, DEFAULT_BITS_PER_VALUE, mean)?;
        Ok(Self {
            m: config.m,
            seed: config.seed,
            iterations_run: run.iterations_run,
            converged: run.converged,
            history: run.history.clone(),
            mean_iter_time_s: mean,
            throughput_bps: bps,
            throughput_gbps: to_gbps(bps),
            map_ratio: map_ratio(&run.history),
            bits_per_value: DEFAULT_BITS_PER_VALUE,
            unit_convention: UNIT_CONVENTION.to_string(),
            labels_match_first: None,
            dataset,
        })
    }

    pub fn csv_row(&self) -> CsvRow {
        CsvRow {
            dataset: self.dataset.source.clone(),
            n: self.dataset.n,
            d: self.dataset.d,
            k: self.dataset.k,
            m: self.m,
            seed: self.seed,
            iterations: self.iterations_run,
            converged: self.converged,
            iter_time_s: self.mean_iter_time_s,
            throughput_bps: self.throughput_bps,
            map_ratio: self.map_ratio,
        }
    }
}

/// Clusters `samples` once and summarises the run.
pub fn bench_run(samples: &SampleSet, source: &str, config: &ClusteringConfig) -> Result<(BenchReport, RunResult)> {
    let run = Engine::new(config.clone())?.run(samples)?;
    let dataset = DatasetDescriptor {
        source: source.to_string(),
        n: samples.n(),
        d: samples.d(),
        k: config.k,
    };
    Ok((BenchReport::from_run(dataset, config, &run)?, run))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub reports: Vec<BenchReport>,
    /// Shape violations and label mismatches; never fatal.
    pub warnings: Vec<String>,
}

/// One run per mapper count on the same data and seed.
pub fn sweep_mappers(
    samples: &SampleSet,
    source: &str,
    config: &ClusteringConfig,
    m_values: &[usize],
) -> Result<Sweep> {
    if let Some(bad) = m_values.iter().find(|&&m| m == 0) {
        return Err(Error::config("m", format!("mapper count {bad} in sweep")));
    }
    let mut reports: Vec<BenchReport> = Vec::with_capacity(m_values.len());
    let mut warnings = Vec::new();
    let mut first_labels = None;
    for &m in m_values {
        let cfg = ClusteringConfig { m, ..config.clone() };
        let (mut report, run) = bench_run(samples, source, &cfg)?;
        match &first_labels {
            None => first_labels = Some(run.labels),
            Some(first) => {
                let same = *first == run.labels;
                if !same {
                    warnings.push(format!("labels for m={m} differ from m={}", m_values[0]));
                }
                report.labels_match_first = Some(same);
            }
        }
        if let Some(prev) = reports.last() {
            if report.throughput_bps < prev.throughput_bps {
                warnings.push(format!(
                    "throughput dropped from {:.4} Gbps at m={} to {:.4} Gbps at m={m}",
                    prev.throughput_gbps, prev.m, report.throughput_gbps
                ));
            }
        }
        reports.push(report);
    }
    Ok(Sweep { reports, warnings })
}

/// One synthetic dataset and run per sample count; everything but `n` comes
/// from `template`.
pub fn sweep_samples(template: &SyntheticSpec, config: &ClusteringConfig, n_values: &[usize]) -> Result<Sweep> {
    if let Some(bad) = n_values.iter().find(|&&n| n < config.k) {
        return Err(Error::config("n", format!("{bad} samples is fewer than k={}", config.k)));
    }
    let mut reports: Vec<BenchReport> = Vec::with_capacity(n_values.len());
    let mut warnings = Vec::new();
    for &n in n_values {
        let spec = SyntheticSpec { n, ..template.clone() };
        let samples = generate_synthetic(&spec)?;
        let source = format!("synthetic(k_true={},spread={},seed={})", spec.k_true, spec.spread, spec.seed);
        let (report, _) = bench_run(&samples, &source, config)?;
        if let Some(prev) = reports.last() {
            if report.map_ratio < prev.map_ratio {
                warnings.push(format!(
                    "map ratio fell from {:.3} at n={} to {:.3} at n={n}",
                    prev.map_ratio, prev.dataset.n, report.map_ratio
                ));
            }
        }
        reports.push(report);
    }
    Ok(Sweep { reports, warnings })
}

/// One CSV line per report:
/// `dataset,n,d,k,m,seed,iterations,converged,iter_time_s,throughput_bps,map_ratio`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub dataset: String,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub m: usize,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub iter_time_s: f64,
    pub throughput_bps: f64,
    pub map_ratio: f64,
}

pub fn write_csv<W: Write>(reports: &[BenchReport], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in reports {
        wtr.serialize(r.csv_row()).map_err(csv_err)?;
    }
    // header only, when there is nothing to report
    if reports.is_empty() {
        wtr.write_record(CSV_HEADER).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub const CSV_HEADER: [&str; 11] = [
    "dataset",
    "n",
    "d",
    "k",
    "m",
    "seed",
    "iterations",
    "converged",
    "iter_time_s",
    "throughput_bps",
    "map_ratio",
];

pub fn read_csv<R: Read>(r: R) -> Result<Vec<CsvRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Format(e.to_string()))
}

pub fn write_json<W: Write>(reports: &[BenchReport], w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, reports).map_err(|e| Error::Format(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}
