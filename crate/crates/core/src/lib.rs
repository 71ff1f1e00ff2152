//! Low-precision scalar quantization for nearest neighbor search.
//!
//! Embedding corpora tend to occupy a narrow band of the float range. This
//! crate fits a per-dimension clamped linear map from `f32` to signed 8-bit
//! codes, then runs the same search machinery on both representations so
//! that memory, throughput and recall can be compared directly:
//!
//! * [`store`] and [`vecs`]: datasets and the `fvecs`/`ivecs`/`bvecs`/`i8vecs` formats
//! * [`synthetic`]: seeded narrow-band Gaussian corpora
//! * [`quantizer`]: statistics, fitting, quantize/dequantize, params files
//! * [`distance`]: `f32` and `i8` kernels for inner product, L2 and angular
//! * [`exact`]: exhaustive top-k search and ground truth
//! * [`hnsw`]: HNSW graph index with byte-exact memory accounting
//! * [`bench`]: recall@k, single-thread QPS and fp32-vs-int8 sweeps

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod distance;
pub mod error;
pub mod exact;
pub mod hnsw;
pub mod quantizer;
pub mod store;
pub mod synthetic;
pub mod vecs;

pub use distance::Metric;
pub use error::{Error, Result};
pub use exact::{batch_ground_truth, exact_topk, FlatIndex, Neighbor, TopKResult};
pub use hnsw::{AnyIndex, HnswConfig, HnswIndex, MemoryReport, SearchParams};
pub use quantizer::{estimate_stats, fit, DimensionStats, Mode, QuantizerParams};
pub use store::{Dataset, DenseDataset, ElemKind, Element, GroundTruth};
