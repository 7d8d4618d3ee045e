//! Iteration controller.
//!
//! Each iteration is one Map-Reduce job:
//!
//! 1. `map_start`: the controller starts `M` mapper units, one thread each.
//!    A unit streams its sample block out of the memory plane, clusters and
//!    accumulates locally, streams its labels back and deposits its partial
//!    aggregate in its intermediate block.
//! 2. Every unit reports `map_done`. Only after all `M` have arrived does the
//!    controller raise `reduce_start`.
//! 3. The reducer streams the intermediate region, merges in mapper order,
//!    overwrites the centroid block and reports `reduce_done`, plus
//!    `iteration_done` when the distortion change is within `epsilon`.
//! 4. Otherwise the next iteration starts, up to `max_iterations`.

use std::fmt;
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapper::MapAccumulator;
use crate::memplane::{self, build_layout, MemoryPlane, SIMPLE_MODE_CAP};
use crate::reducer::{self, ReduceResult};
use crate::types::{CentroidSet, ClusteringConfig, LabelVector, PartialAggregate, SampleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    Mapping,
    Reducing,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllerState {
    pub phase: Phase,
    pub map_done_count: usize,
    pub iteration: usize,
    mappers: usize,
}

impl ControllerState {
    pub fn new(mappers: usize) -> Self {
        Self {
            phase: Phase::Idle,
            map_done_count: 0,
            iteration: 0,
            mappers,
        }
    }

    fn start_map(&mut self) -> Result<()> {
        match self.phase {
            Phase::Idle | Phase::Reducing => {
                self.phase = Phase::Mapping;
                self.map_done_count = 0;
                Ok(())
            }
            other => Err(Error::Controller(format!("map_start while {other:?}"))),
        }
    }

    fn map_done(&mut self) -> Result<()> {
        if self.phase != Phase::Mapping || self.map_done_count >= self.mappers {
            return Err(Error::Controller(format!(
                "unexpected map_done in {:?} with {} of {} received",
                self.phase, self.map_done_count, self.mappers
            )));
        }
        self.map_done_count += 1;
        Ok(())
    }

    fn start_reduce(&mut self) -> Result<()> {
        if self.phase != Phase::Mapping || self.map_done_count != self.mappers {
            return Err(Error::Controller(format!(
                "reduce_start in {:?} with {} of {} map_done signals",
                self.phase, self.map_done_count, self.mappers
            )));
        }
        self.phase = Phase::Reducing;
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        if self.phase != Phase::Reducing {
            return Err(Error::Controller(format!("finish while {:?}", self.phase)));
        }
        self.phase = Phase::Done;
        Ok(())
    }
}

/// Control signals, in the order the controller observed them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    MapStart { iteration: usize },
    MapDone { iteration: usize, mapper: usize },
    ReduceStart { iteration: usize },
    ReduceDone { iteration: usize },
    IterationDone { iteration: usize },
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::MapStart { iteration } => write!(f, "[{iteration}] map_start"),
            Event::MapDone { iteration, mapper } => write!(f, "[{iteration}] map_done({mapper})"),
            Event::ReduceStart { iteration } => write!(f, "[{iteration}] reduce_start"),
            Event::ReduceDone { iteration } => write!(f, "[{iteration}] reduce_done"),
            Event::IterationDone { iteration } => write!(f, "[{iteration}] iteration_done"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    /// Seconds from `map_start` to the last `map_done`.
    pub map_time: f64,
    /// Seconds from `reduce_start` to `reduce_done`.
    pub reduce_time: f64,
    /// Seconds from `map_start` to `reduce_done`.
    pub total_time: f64,
    pub distortion: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Labels from the final map phase.
    pub labels: LabelVector,
    pub centroids: CentroidSet,
    pub history: Vec<IterationStats>,
    pub iterations_run: usize,
    pub converged: bool,
    /// Labels of every iteration, only kept when enabled with
    /// [`Engine::with_label_history`].
    pub label_history: Vec<LabelVector>,
}

impl RunResult {
    pub fn distortions(&self) -> Vec<f32> {
        self.history.iter().map(|s| s.distortion).collect()
    }
}

/// Called in each mapper unit after its partition is processed and before
/// `map_done` is sent, with `(mapper_id, iteration)`. An error aborts the run.
pub type MapperHook = Arc<dyn Fn(usize, usize) -> Result<()> + Send + Sync>;

/// Forgy initialisation: `k` distinct samples chosen uniformly with a
/// generator seeded by `seed`.
pub fn init_centroids(samples: &SampleSet, k: usize, seed: u64) -> Result<CentroidSet> {
    if k == 0 {
        return Err(Error::config("k", "cluster count must be at least 1"));
    }
    if k > samples.n() {
        return Err(Error::config(
            "k",
            format!("{k} clusters requested but only {} samples", samples.n()),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, samples.n(), k);
    let mut data = Vec::with_capacity(k * samples.d());
    for i in picks.iter() {
        data.extend_from_slice(samples.row(i));
    }
    CentroidSet::new(data, samples.d())
}

pub struct Engine {
    config: ClusteringConfig,
    transfer_cap: u64,
    hook: Option<MapperHook>,
    record_labels: bool,
    state: ControllerState,
    events: Vec<Event>,
    plane: Option<MemoryPlane>,
    prev_distortion: Option<f32>,
}

impl fmt::Debug for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Engine")
            .field("config", &self.config)
            .field("transfer_cap", &self.transfer_cap)
            .field("state", &self.state)
            .field("events", &self.events.len())
            .finish()
    }
}

impl Engine {
    pub fn new(config: ClusteringConfig) -> Result<Self> {
        config.validate()?;
        let m = config.m;
        Ok(Self {
            config,
            transfer_cap: SIMPLE_MODE_CAP,
            hook: None,
            record_labels: false,
            state: ControllerState::new(m),
            events: Vec::new(),
            plane: None,
            prev_distortion: None,
        })
    }

    /// Per-transfer cap of the memory plane, 8 MiB by default.
    pub fn with_transfer_cap(mut self, cap: u64) -> Self {
        self.transfer_cap = cap;
        self
    }

    pub fn with_mapper_hook(mut self, hook: MapperHook) -> Self {
        self.hook = Some(hook);
        self
    }

    pub fn with_label_history(mut self, record: bool) -> Self {
        self.record_labels = record;
        self
    }

    pub fn config(&self) -> &ClusteringConfig {
        &self.config
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    /// Events of the most recent run (or run_iteration sequence).
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn plane(&self) -> Option<&MemoryPlane> {
        self.plane.as_ref()
    }

    /// Drops per-run state: events, controller phase, previous distortion.
    pub fn reset(&mut self) {
        self.state = ControllerState::new(self.config.m);
        self.events.clear();
        self.prev_distortion = None;
    }

    fn stage(&mut self, samples: &SampleSet, centroids: &CentroidSet) -> Result<()> {
        if centroids.d() != samples.d() {
            return Err(Error::config(
                "d",
                format!("centroids have dimensionality {}, samples {}", centroids.d(), samples.d()),
            ));
        }
        let row_bytes = samples.d() as u64 * 4;
        if self.transfer_cap < row_bytes {
            return Err(Error::config(
                "transfer_cap",
                format!("{} bytes cannot hold one {row_bytes}-byte sample", self.transfer_cap),
            ));
        }
        let layout = build_layout(samples.n(), samples.d(), centroids.k(), self.config.m, 4)?;
        let mut plane = MemoryPlane::new(layout, self.transfer_cap)?;
        plane.load_samples(samples)?;
        plane.write_centroids(centroids)?;
        self.plane = Some(plane);
        Ok(())
    }

    /// Clusters `samples` from a fresh Forgy initialisation until convergence
    /// or `max_iterations`.
    pub fn run(&mut self, samples: &SampleSet) -> Result<RunResult> {
        let centroids = init_centroids(samples, self.config.k, self.config.seed)?;
        self.reset();
        self.stage(samples, &centroids)?;

        let mut history = Vec::new();
        let mut label_history = Vec::new();
        let mut converged = false;
        while history.len() < self.config.max_iterations {
            let (result, stats) = self.iterate()?;
            history.push(stats);
            if self.record_labels {
                let plane = self.plane.as_ref().expect("staged above");
                label_history.push(LabelVector::new(plane.read_labels()?, self.config.k)?);
            }
            if result.converged {
                converged = true;
                break;
            }
        }
        if self.state.phase != Phase::Done {
            self.state.finish()?;
        }
        let plane = self.plane.as_ref().expect("staged above");
        Ok(RunResult {
            labels: LabelVector::new(plane.read_labels()?, self.config.k)?,
            centroids: plane.read_centroids()?,
            iterations_run: history.len(),
            history,
            converged,
            label_history,
        })
    }

    /// One Map-Reduce job with explicit centroids. The previous distortion
    /// carries over between calls on the same engine until [`Engine::reset`].
    pub fn run_iteration(
        &mut self,
        samples: &SampleSet,
        centroids: &CentroidSet,
    ) -> Result<(LabelVector, ReduceResult, IterationStats)> {
        if centroids.k() != self.config.k {
            return Err(Error::config(
                "k",
                format!("config has k={}, centroid set has {}", self.config.k, centroids.k()),
            ));
        }
        if self.state.phase == Phase::Done {
            self.reset();
        }
        self.stage(samples, centroids)?;
        let (result, stats) = self.iterate()?;
        let plane = self.plane.as_ref().expect("staged above");
        let labels = LabelVector::new(plane.read_labels()?, self.config.k)?;
        Ok((labels, result, stats))
    }

    fn iterate(&mut self) -> Result<(ReduceResult, IterationStats)> {
        let Engine {
            config,
            hook,
            state,
            events,
            plane,
            prev_distortion,
            ..
        } = self;
        let plane = plane.as_mut().ok_or_else(|| Error::Controller("no data staged".into()))?;
        let iteration = state.iteration;
        let m = config.m;
        let d = plane.layout().d;
        let n = plane.layout().n;
        let cap = plane.transfer_cap();

        state.start_map()?;
        events.push(Event::MapStart { iteration });
        let map_started = Instant::now();

        let views = plane.map_phase_views();
        // each unit caches the centroid block before streaming samples
        let snapshot = CentroidSet::new(decode_values(views.centroids), d)?;
        let mut first_error = None;
        thread::scope(|scope| {
            let (tx, rx) = mpsc::channel::<(usize, Result<()>)>();
            for (id, ((samples, labels), inter)) in views
                .samples
                .into_iter()
                .zip(views.labels)
                .zip(views.intermediates)
                .enumerate()
            {
                let tx = tx.clone();
                let snapshot = &snapshot;
                let hook = hook.clone();
                scope.spawn(move || {
                    let outcome = run_mapper_unit(samples, labels, inter, snapshot, cap)
                        .and_then(|()| hook.as_ref().map_or(Ok(()), |h| h(id, iteration)));
                    // receiver lives until every unit reported
                    let _ = tx.send((id, outcome));
                });
            }
            drop(tx);
            for (id, outcome) in rx.iter().take(m) {
                events.push(Event::MapDone { iteration, mapper: id });
                if let Err(e) = state.map_done() {
                    first_error.get_or_insert(e);
                }
                if let Err(e) = outcome {
                    first_error.get_or_insert(e);
                }
            }
        });
        let map_time = map_started.elapsed();
        if let Some(e) = first_error {
            *state = ControllerState::new(m);
            return Err(e);
        }

        state.start_reduce()?;
        events.push(Event::ReduceStart { iteration });
        let reduce_started = Instant::now();
        let parts = plane.read_intermediates()?;
        let processed: u64 = parts.iter().map(PartialAggregate::total_count).sum();
        if processed != n as u64 {
            return Err(Error::Contract(format!(
                "mappers accounted for {processed} samples, expected {n}"
            )));
        }
        let result = reducer::reduce(&parts, &snapshot, *prev_distortion, config.epsilon)?;
        plane.write_centroids(&result.new_centroids)?;
        let reduce_done = Instant::now();
        events.push(Event::ReduceDone { iteration });
        if result.converged {
            events.push(Event::IterationDone { iteration });
            state.finish()?;
        }

        *prev_distortion = Some(result.total_distortion);
        state.iteration += 1;
        let stats = IterationStats {
            map_time: map_time.as_secs_f64(),
            reduce_time: secs(reduce_done - reduce_started),
            total_time: secs(reduce_done - map_started),
            distortion: result.total_distortion,
        };
        Ok((result, stats))
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn decode_values(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|w| f32::from_le_bytes([w[0], w[1], w[2], w[3]]))
        .collect()
}

/// Work of one mapper unit against its own blocks of the plane.
fn run_mapper_unit(
    samples: &[u8],
    labels: &mut [u8],
    intermediate: &mut [u8],
    centroids: &CentroidSet,
    cap: u64,
) -> Result<()> {
    let d = centroids.d();
    let row_bytes = (d * 4) as u64;
    // chunks hold whole samples
    let stream_cap = cap - cap % row_bytes;
    let mut acc = MapAccumulator::new(centroids);
    let mut sample = vec![0.0f32; d];
    let mut label_buf = Vec::new();
    let mut label_offset = 0;
    for chunk in memplane::stream_chunks(samples, stream_cap)? {
        label_buf.clear();
        for row in chunk.chunks_exact(row_bytes as usize) {
            for (dst, w) in sample.iter_mut().zip(row.chunks_exact(4)) {
                *dst = f32::from_le_bytes([w[0], w[1], w[2], w[3]]);
            }
            label_buf.extend_from_slice(&acc.push(&sample).to_le_bytes());
        }
        let end = label_offset + label_buf.len();
        memplane::stream_copy(&mut labels[label_offset..end], &label_buf, cap)?;
        label_offset = end;
    }
    memplane::encode_aggregate(&acc.finish(), intermediate)
}
