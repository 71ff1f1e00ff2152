use super::HnswIndex;
use crate::distance::Metric;
use crate::store::{ElemKind, Element};

/// Size of the fixed index file header in bytes.
pub const HEADER_BYTES: u64 = 6 + 4 + 4 + 8 + 4 + 4 + 8 + 4 + 4;

/// Byte accounting of an index, matching its serialized layout exactly:
/// `total` equals the size of the file written by `save_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryReport {
    pub header_bytes: u64,
    /// Level array plus every adjacency slot (4 bytes per slot and per
    /// per-layer degree header).
    pub graph_bytes: u64,
    pub vector_bytes: u64,
    /// Per-node norms, present for the angular metric only.
    pub norm_bytes: u64,
    pub total: u64,
}

impl MemoryReport {
    fn from_parts(n: u64, d: u64, m: u64, kind: ElemKind, metric: Metric, upper_layers: u64) -> Self {
        let level_bytes = 4 * n;
        let layer0 = n * 4 * (1 + 2 * m);
        let upper = upper_layers * 4 * (1 + m);
        let graph_bytes = level_bytes + layer0 + upper;
        let vector_bytes = n * d * kind.size() as u64;
        let norm_bytes = if metric.needs_norms() { 4 * n } else { 0 };
        Self {
            header_bytes: HEADER_BYTES,
            graph_bytes,
            vector_bytes,
            norm_bytes,
            total: HEADER_BYTES + graph_bytes + vector_bytes + norm_bytes,
        }
    }

    pub(super) fn for_index<T: Element>(index: &HnswIndex<T>) -> Self {
        let upper: u64 = index.levels().iter().map(|&l| l as u64).sum();
        Self::from_parts(
            index.len() as u64,
            index.dim() as u64,
            index.config().m as u64,
            T::KIND,
            index.metric(),
            upper,
        )
    }
}

/// Expected footprint of an index with the default level multiplier
/// `1/ln(M)`, under which a node has `1/(M-1)` upper layers on average.
pub fn estimate_memory(n: u64, d: u64, m: u64, kind: ElemKind, metric: Metric) -> MemoryReport {
    let upper = (n as f64 / (m as f64 - 1.0)).round() as u64;
    MemoryReport::from_parts(n, d, m, kind, metric, upper)
}
