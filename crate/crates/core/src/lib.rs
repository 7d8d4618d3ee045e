//! Data-parallel k-means organised as a Map-Reduce job per iteration.
//!
//! `M` mapper workers assign samples to their nearest centroid and accumulate
//! per-cluster counts, coordinate sums and partial distortion. A single
//! reducer merges those partial aggregates in mapper order, moves every
//! centroid to the mean of its members and decides convergence from the
//! change in distortion. An iteration controller sequences the phases and
//! records the `map_start` / `map_done` / `reduce_start` / `reduce_done` /
//! `iteration_done` signals, while all buffers live in a simulated contiguous
//! memory plane addressed by block ID.
//!
//! ```
//! use mrkmeans::{ClusteringConfig, Engine, SampleSet};
//!
//! let samples = SampleSet::new(vec![0.0, 0.0, 0.1, 0.0, 10.0, 0.0, 10.1, 0.0], 2).unwrap();
//! let config = ClusteringConfig::new(2).with_mappers(2).with_seed(3);
//! let result = Engine::new(config).unwrap().run(&samples).unwrap();
//! assert_eq!(result.labels.labels()[0], result.labels.labels()[1]);
//! assert_ne!(result.labels.labels()[0], result.labels.labels()[2]);
//! ```

pub mod bench;
pub mod engine;
pub mod error;
pub mod ingest;
pub mod kernel;
pub mod mapper;
pub mod memplane;
pub mod reducer;
pub mod types;

pub use engine::{ControllerState, Engine, Event, IterationStats, Phase, RunResult};
pub use error::{Error, Result};
pub use kernel::{nearest_centroid, squared_distance};
pub use mapper::{map_partition, partition_bounds, MapperInput, MapperOutput};
pub use memplane::{BlockLayout, MemoryPlane, Region, TransferPlan};
pub use reducer::{check_convergence, merge_aggregates, update_centroids, ReduceResult};
pub use types::{CentroidSet, ClusteringConfig, LabelVector, PartialAggregate, SampleSet};
