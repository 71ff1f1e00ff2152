//! Hierarchical Navigable Small World graph index over `f32` or `i8`
//! vectors.
//!
//! The index owns a copy of its vectors. Construction exposes the usual
//! knobs: `M` (degree cap, doubled on layer 0), `EFC` (construction beam
//! width) and a seed for level assignment; search takes `EFS` (beam width)
//! and `k`.

mod build;
mod graph;
mod io;
mod memory;
mod visited;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rayon::prelude::*;

pub use io::{decode_index, encode_index, load_index, save_index, AnyIndex, INDEX_MAGIC, INDEX_VERSION};
pub use memory::{estimate_memory, MemoryReport, HEADER_BYTES};

use crate::distance::Metric;
use crate::error::{Error, Result};
use crate::exact::{query_norm, Neighbor, TopKResult};
use crate::store::{Dataset, ElemKind, Element};
use graph::Graph;
use visited::{with_visited, Visited};

/// Hints the cache to load `data`. Neighbor vectors are scattered across
/// the store, so issuing all loads before scoring hides most of the latency.
#[inline(always)]
fn prefetch<T>(data: &[T]) {
    #[cfg(target_arch = "x86_64")]
    {
        use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
        let ptr = data.as_ptr().cast::<i8>();
        for off in (0..std::mem::size_of_val(data)).step_by(64) {
            // SAFETY: prefetching never faults and the address lies inside `data`.
            unsafe { _mm_prefetch(ptr.add(off), _MM_HINT_T0) };
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HnswConfig {
    /// Degree cap on layers >= 1; layer 0 allows `2 * m`.
    pub m: usize,
    pub ef_construction: usize,
    pub seed: u64,
    /// Level multiplier for `floor(-ln(U) * level_mult)`.
    pub level_mult: f64,
}

impl HnswConfig {
    pub fn new(m: usize, ef_construction: usize, seed: u64) -> Self {
        Self { m, ef_construction, seed, level_mult: 1.0 / (m.max(2) as f64).ln() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::invalid(format!("M must be at least 2, got {}", self.m)));
        }
        if self.ef_construction < self.m {
            return Err(Error::invalid(format!(
                "EFC ({}) must be at least M ({})",
                self.ef_construction, self.m
            )));
        }
        if !(self.level_mult > 0.0 && self.level_mult.is_finite()) {
            return Err(Error::invalid(format!("level_mult must be positive, got {}", self.level_mult)));
        }
        Ok(())
    }
}

impl Default for HnswConfig {
    fn default() -> Self {
        Self::new(32, 300, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchParams {
    pub ef: usize,
    pub k: usize,
}

impl SearchParams {
    pub fn new(ef: usize, k: usize) -> Self {
        Self { ef, k }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if self.ef < self.k {
            return Err(Error::invalid(format!("EFS ({}) must be at least k ({})", self.ef, self.k)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HnswIndex<T> {
    metric: Metric,
    config: HnswConfig,
    /// Bit width of the codes for quantized indexes, 0 for float.
    bits: u8,
    d: usize,
    vectors: Vec<T>,
    norms: Vec<f32>,
    graph: Graph,
}

impl<T: Element> HnswIndex<T> {
    /// Single-threaded, deterministic build.
    pub fn build(corpus: &Dataset<T>, config: HnswConfig, metric: Metric) -> Result<Self> {
        build::build(corpus, config, metric, 1)
    }

    /// Build with up to `threads` workers. `threads <= 1` is the sequential
    /// build; larger values use batched insertion whose output depends only
    /// on the inputs, not on the thread count.
    pub fn build_with_threads(corpus: &Dataset<T>, config: HnswConfig, metric: Metric, threads: usize) -> Result<Self> {
        build::build(corpus, config, metric, threads)
    }

    /// Records the code bit width carried in the index header.
    pub fn with_bits(mut self, bits: u8) -> Self {
        self.bits = bits;
        self
    }

    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn config(&self) -> &HnswConfig {
        &self.config
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn elem_kind(&self) -> ElemKind {
        T::KIND
    }

    pub fn entry_point(&self) -> u32 {
        self.graph.entry
    }

    pub fn max_level(&self) -> u32 {
        self.graph.max_level
    }

    pub fn level(&self, node: usize) -> u32 {
        self.graph.levels[node]
    }

    pub fn levels(&self) -> &[u32] {
        &self.graph.levels
    }

    pub fn neighbors(&self, node: usize, layer: usize) -> &[u32] {
        self.graph.neighbors(node, layer)
    }

    pub fn vector(&self, node: usize) -> &[T] {
        &self.vectors[node * self.d..(node + 1) * self.d]
    }

    #[inline]
    fn score_to(&self, query: &[T], qnorm: f32, node: u32) -> f64 {
        let node = node as usize;
        let norm = if self.metric.needs_norms() { self.norms[node] } else { 0.0 };
        self.metric.score(query, self.vector(node), qnorm, norm)
    }

    #[inline]
    fn score_nodes(&self, a: u32, b: u32) -> f64 {
        let qn = if self.metric.needs_norms() { self.norms[a as usize] } else { 0.0 };
        self.score_to(self.vector(a as usize), qn, b)
    }

    /// Greedy walk on `layer` from `start` to a local minimum.
    fn greedy(&self, query: &[T], qnorm: f32, mut cur: Neighbor, layer: usize) -> Neighbor {
        loop {
            let mut changed = false;
            for &nb in self.graph.neighbors(cur.id as usize, layer) {
                let cand = Neighbor::new(nb, self.score_to(query, qnorm, nb));
                if cand < cur {
                    cur = cand;
                    changed = true;
                }
            }
            if !changed {
                return cur;
            }
        }
    }

    /// Descends from the entry point to `target_layer + 1` greedily.
    fn descend(&self, query: &[T], qnorm: f32, target_layer: u32) -> Neighbor {
        let ep = self.graph.entry;
        let mut cur = Neighbor::new(ep, self.score_to(query, qnorm, ep));
        let mut layer = self.graph.max_level;
        while layer > target_layer {
            cur = self.greedy(query, qnorm, cur, layer as usize);
            layer -= 1;
        }
        cur
    }

    /// Beam search on one layer. Returns up to `ef` neighbors sorted
    /// ascending by `(score, id)`.
    fn search_layer(
        &self,
        query: &[T],
        qnorm: f32,
        entry: &[Neighbor],
        ef: usize,
        layer: usize,
        visited: &mut Visited,
    ) -> Vec<Neighbor> {
        let mut candidates: BinaryHeap<Reverse<Neighbor>> = BinaryHeap::with_capacity(ef * 2);
        let mut results: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(ef + 1);
        for &ep in entry {
            if visited.insert(ep.id) {
                candidates.push(Reverse(ep));
                results.push(ep);
                if results.len() > ef {
                    results.pop();
                }
            }
        }
        let mut fresh = Vec::with_capacity(self.graph.cap(layer));
        while let Some(Reverse(cur)) = candidates.pop() {
            if results.len() >= ef && results.peek().is_some_and(|worst| cur > *worst) {
                break;
            }
            fresh.clear();
            for &nb in self.graph.neighbors(cur.id as usize, layer) {
                if visited.insert(nb) {
                    prefetch(self.vector(nb as usize));
                    fresh.push(nb);
                }
            }
            for &nb in &fresh {
                let cand = Neighbor::new(nb, self.score_to(query, qnorm, nb));
                if results.len() < ef || results.peek().is_some_and(|worst| cand < *worst) {
                    candidates.push(Reverse(cand));
                    results.push(cand);
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
        results.into_sorted_vec()
    }

    pub fn search(&self, query: &[T], params: SearchParams) -> Result<TopKResult> {
        params.validate()?;
        if query.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: query.len() });
        }
        let qnorm = query_norm(self.metric, query)?;
        let ep = self.descend(query, qnorm, 0);
        let mut found = with_visited(self.len(), |visited| {
            self.search_layer(query, qnorm, &[ep], params.ef, 0, visited)
        });
        found.truncate(params.k);
        Ok(found)
    }

    /// Searches every query, in parallel across queries.
    pub fn search_batch(&self, queries: &Dataset<T>, params: SearchParams) -> Result<Vec<TopKResult>> {
        queries.rows().collect::<Vec<_>>().into_par_iter().map(|q| self.search(q, params)).collect()
    }

    pub fn memory_report(&self) -> MemoryReport {
        MemoryReport::for_index(self)
    }

    /// Nodes reachable from the entry point on layer 0.
    pub fn reachable_from_entry(&self) -> usize {
        if self.is_empty() {
            return 0;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![self.graph.entry];
        seen[self.graph.entry as usize] = true;
        let mut count = 1;
        while let Some(node) = stack.pop() {
            for &nb in self.graph.neighbors(node as usize, 0) {
                if !seen[nb as usize] {
                    seen[nb as usize] = true;
                    count += 1;
                    stack.push(nb);
                }
            }
        }
        count
    }

    /// Checks the structural invariants: degree caps, valid targets, no
    /// self-edges, entry point on the top level.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.len();
        let top = self.graph.levels.iter().copied().max().unwrap_or(0);
        if top != self.graph.max_level || self.graph.levels[self.graph.entry as usize] != top {
            return Err(Error::Corrupt("entry point is not on the top level".into()));
        }
        for node in 0..n {
            for layer in 0..=self.graph.levels[node] as usize {
                let list = self.graph.neighbors(node, layer);
                if list.len() > self.graph.cap(layer) {
                    return Err(Error::Corrupt(format!("node {node} layer {layer} exceeds degree cap")));
                }
                for &nb in list {
                    if nb as usize >= n || nb as usize == node {
                        return Err(Error::Corrupt(format!("node {node} layer {layer} has bad edge to {nb}")));
                    }
                    if (self.graph.levels[nb as usize] as usize) < layer {
                        return Err(Error::Corrupt(format!("edge {node}->{nb} on layer {layer} above target level")));
                    }
                }
            }
        }
        Ok(())
    }
}
