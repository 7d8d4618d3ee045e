//! Python bindings for `mrkmeans`.
//!
//! Matrices cross the boundary as lists of rows. Library errors map to
//! `ValueError` for bad input, `OSError` for I/O and `RuntimeError` for
//! controller or measurement failures.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use mrkmeans::bench;
use mrkmeans::ingest::{self, AttributeProjection, SyntheticSpec};
use mrkmeans::memplane;
use mrkmeans::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        Error::Measurement(_) | Error::Controller(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn flatten(rows: Vec<Vec<f32>>) -> PyResult<(Vec<f32>, usize)> {
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok((rows.into_iter().flatten().collect(), d))
}

fn to_rows<'a>(rows: impl Iterator<Item = &'a [f32]>) -> Vec<Vec<f32>> {
    rows.map(<[f32]>::to_vec).collect()
}

#[pyclass(name = "SampleSet", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySampleSet {
    inner: mrkmeans::SampleSet,
}

#[pymethods]
impl PySampleSet {
    #[new]
    fn new(rows: Vec<Vec<f32>>) -> PyResult<Self> {
        let (data, d) = flatten(rows)?;
        Self::from_flat(data, d)
    }

    #[staticmethod]
    fn from_flat(data: Vec<f32>, d: usize) -> PyResult<Self> {
        let inner = mrkmeans::SampleSet::new(data, d).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn row(&self, i: usize) -> PyResult<Vec<f32>> {
        if i >= self.inner.n() {
            return Err(PyValueError::new_err(format!("row {i} out of range")));
        }
        Ok(self.inner.row(i).to_vec())
    }

    fn to_list(&self) -> Vec<Vec<f32>> {
        to_rows(self.inner.rows())
    }

    fn __repr__(&self) -> String {
        format!("SampleSet(n={}, d={})", self.inner.n(), self.inner.d())
    }
}

#[pyclass(name = "ClusteringConfig", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyClusteringConfig {
    inner: mrkmeans::ClusteringConfig,
}

#[pymethods]
impl PyClusteringConfig {
    #[new]
    #[pyo3(signature = (k, m=1, epsilon=mrkmeans::ClusteringConfig::DEFAULT_EPSILON, max_iterations=100, seed=0))]
    fn new(k: usize, m: usize, epsilon: f32, max_iterations: usize, seed: u64) -> PyResult<Self> {
        let inner = mrkmeans::ClusteringConfig::new(k)
            .with_mappers(m)
            .with_epsilon(epsilon)
            .with_max_iterations(max_iterations)
            .with_seed(seed);
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn epsilon(&self) -> f32 {
        self.inner.epsilon
    }

    #[getter]
    fn max_iterations(&self) -> usize {
        self.inner.max_iterations
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "ClusteringConfig(k={}, m={}, epsilon={}, max_iterations={}, seed={})",
            c.k, c.m, c.epsilon, c.max_iterations, c.seed
        )
    }
}

/// Per-iteration timings in seconds plus the distortion after the reduce.
#[pyclass(name = "IterationStats", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyIterationStats {
    map_time: f64,
    reduce_time: f64,
    total_time: f64,
    distortion: f32,
}

impl From<mrkmeans::IterationStats> for PyIterationStats {
    fn from(s: mrkmeans::IterationStats) -> Self {
        Self {
            map_time: s.map_time,
            reduce_time: s.reduce_time,
            total_time: s.total_time,
            distortion: s.distortion,
        }
    }
}

#[pymethods]
impl PyIterationStats {
    fn __repr__(&self) -> String {
        format!(
            "IterationStats(map_time={}, reduce_time={}, distortion={})",
            self.map_time, self.reduce_time, self.distortion
        )
    }
}

#[pyclass(name = "RunResult", frozen)]
struct PyRunResult {
    inner: mrkmeans::RunResult,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn labels(&self) -> Vec<u32> {
        self.inner.labels.labels().to_vec()
    }

    #[getter]
    fn centroids(&self) -> Vec<Vec<f32>> {
        to_rows(self.inner.centroids.rows())
    }

    #[getter]
    fn distortions(&self) -> Vec<f32> {
        self.inner.distortions()
    }

    #[getter]
    fn history(&self) -> Vec<PyIterationStats> {
        self.inner.history.iter().copied().map(Into::into).collect()
    }

    #[getter]
    fn iterations_run(&self) -> usize {
        self.inner.iterations_run
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    /// Share of iteration time spent in the map phase.
    #[getter]
    fn map_ratio(&self) -> f64 {
        bench::map_ratio(&self.inner.history)
    }

    #[getter]
    fn mean_iteration_time(&self) -> f64 {
        bench::mean_iteration_time(&self.inner.history)
    }

    fn __repr__(&self) -> String {
        format!(
            "RunResult(iterations_run={}, converged={}, distortion={:?})",
            self.inner.iterations_run,
            self.inner.converged,
            self.inner.history.last().map(|s| s.distortion)
        )
    }
}

#[pyclass(name = "Engine")]
struct PyEngine {
    inner: mrkmeans::Engine,
}

#[pymethods]
impl PyEngine {
    #[new]
    #[pyo3(signature = (config, transfer_cap=None))]
    fn new(config: &PyClusteringConfig, transfer_cap: Option<u64>) -> PyResult<Self> {
        let mut inner = mrkmeans::Engine::new(config.inner.clone()).map_err(py_err)?;
        if let Some(cap) = transfer_cap {
            if cap == 0 {
                return Err(PyValueError::new_err("invalid transfer_cap: must be at least 1"));
            }
            inner = inner.with_transfer_cap(cap);
        }
        Ok(Self { inner })
    }

    /// Runs to convergence or the iteration cap. The GIL is released.
    fn run(&mut self, py: Python<'_>, samples: &PySampleSet) -> PyResult<PyRunResult> {
        let engine = &mut self.inner;
        let samples = &samples.inner;
        let inner = py.detach(|| engine.run(samples)).map_err(py_err)?;
        Ok(PyRunResult { inner })
    }

    /// One Map-Reduce job with explicit centroids. Returns
    /// `(labels, new_centroids, distortion, converged)`.
    fn run_iteration(
        &mut self,
        py: Python<'_>,
        samples: &PySampleSet,
        centroids: Vec<Vec<f32>>,
    ) -> PyResult<(Vec<u32>, Vec<Vec<f32>>, f32, bool)> {
        let (flat, d) = flatten(centroids)?;
        let centroids = mrkmeans::CentroidSet::new(flat, d).map_err(py_err)?;
        let engine = &mut self.inner;
        let samples = &samples.inner;
        let (labels, reduced, _) = py
            .detach(|| engine.run_iteration(samples, &centroids))
            .map_err(py_err)?;
        Ok((
            labels.into_vec(),
            to_rows(reduced.new_centroids.rows()),
            reduced.total_distortion,
            reduced.converged,
        ))
    }

    /// Controller events of the most recent run, as text.
    fn events(&self) -> Vec<String> {
        self.inner.events().iter().map(ToString::to_string).collect()
    }

    fn reset(&mut self) {
        self.inner.reset();
    }

    /// Layout report of the staged memory plane, if any.
    fn layout(&self) -> Option<String> {
        self.inner.plane().map(|p| p.layout().to_string())
    }
}

#[pyfunction]
fn squared_distance(a: Vec<f32>, b: Vec<f32>) -> PyResult<f32> {
    mrkmeans::squared_distance(&a, &b).map_err(py_err)
}

/// Returns `(index, squared_distance)` of the closest centroid.
#[pyfunction]
fn nearest_centroid(sample: Vec<f32>, centroids: Vec<Vec<f32>>) -> PyResult<(usize, f32)> {
    let (flat, d) = flatten(centroids)?;
    let centroids = mrkmeans::CentroidSet::new(flat, d).map_err(py_err)?;
    mrkmeans::nearest_centroid(&sample, &centroids).map_err(py_err)
}

/// `(offset, length)` of each mapper's partition.
#[pyfunction]
fn partition_bounds(n: usize, m: usize) -> PyResult<Vec<(usize, usize)>> {
    mrkmeans::partition_bounds(n, m).map_err(py_err)
}

/// Bits per second for `n` samples of `d` values of `w` bits.
#[pyfunction]
#[pyo3(signature = (n, d, runtime_s, w=bench::DEFAULT_BITS_PER_VALUE))]
fn throughput(n: u64, d: u64, runtime_s: f64, w: u32) -> PyResult<f64> {
    bench::throughput(n, d, w, runtime_s).map_err(py_err)
}

#[pyfunction]
fn block_address(base: u64, block_id: u64, length: u64) -> PyResult<u64> {
    memplane::block_address(base, block_id, length).map_err(py_err)
}

/// `(offset, length)` chunks for a transfer of `total_bytes`.
#[pyfunction]
#[pyo3(signature = (total_bytes, cap=memplane::SIMPLE_MODE_CAP))]
fn plan_transfer(total_bytes: u64, cap: u64) -> PyResult<Vec<(u64, u64)>> {
    Ok(memplane::plan_transfer(total_bytes, cap).map_err(py_err)?.chunks)
}

/// Text report of the memory layout for the given problem size.
#[pyfunction]
fn layout_report(n: usize, d: usize, k: usize, m: usize) -> PyResult<String> {
    let layout = memplane::build_layout(n, d, k, m, 4).map_err(py_err)?;
    Ok(layout.to_string())
}

#[pyfunction]
#[pyo3(signature = (n, d, k_true, spread=1.0, seed=0))]
fn generate_synthetic(n: usize, d: usize, k_true: usize, spread: f32, seed: u64) -> PyResult<PySampleSet> {
    let spec = SyntheticSpec {
        n,
        d,
        k_true,
        spread,
        seed,
    };
    let inner = ingest::generate_synthetic(&spec).map_err(py_err)?;
    Ok(PySampleSet { inner })
}

/// Parses the household power file. `projection` is `"power2d"` or `"power4d"`.
/// Returns `(samples, dropped_rows)`.
#[pyfunction]
#[pyo3(signature = (path, projection="power2d"))]
fn parse_uci(path: std::path::PathBuf, projection: &str) -> PyResult<(PySampleSet, usize)> {
    let proj = match projection {
        "power2d" => AttributeProjection::power2d(),
        "power4d" => AttributeProjection::power4d(),
        other => return Err(PyValueError::new_err(format!("unknown projection {other:?}"))),
    };
    let data = ingest::parse_uci(path, &proj).map_err(py_err)?;
    Ok((PySampleSet { inner: data.samples }, data.dropped))
}

#[pyfunction]
fn read_binary(path: std::path::PathBuf) -> PyResult<PySampleSet> {
    let inner = ingest::read_binary(path).map_err(py_err)?;
    Ok(PySampleSet { inner })
}

#[pyfunction]
fn write_binary(samples: &PySampleSet, path: std::path::PathBuf) -> PyResult<()> {
    ingest::write_binary(&samples.inner, path).map_err(py_err)
}

#[pyfunction]
fn read_labels(path: std::path::PathBuf) -> PyResult<Vec<u32>> {
    ingest::read_labels(path).map_err(py_err)
}

#[pyfunction]
fn write_labels(labels: Vec<u32>, path: std::path::PathBuf) -> PyResult<()> {
    ingest::write_labels(&labels, path).map_err(py_err)
}

/// Map-Reduce k-means over a simulated shared memory plane.
#[pymodule]
mod mrkmeans_py {
    #[pymodule_export]
    use super::{
        block_address, generate_synthetic, layout_report, nearest_centroid, parse_uci, partition_bounds,
        plan_transfer, read_binary, read_labels, squared_distance, throughput, write_binary, write_labels,
        PyClusteringConfig, PyEngine, PyIterationStats, PyRunResult, PySampleSet,
    };
}
