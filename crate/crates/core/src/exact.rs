//! Exhaustive top-k search. Serves both as the flat-scan baseline and as the
//! ground-truth oracle for recall measurements.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::distance::{norm, Metric};
use crate::error::{Error, Result};
use crate::store::{Dataset, Element, GroundTruth};

/// A search hit. Ordered by `(score, id)`; smaller scores are closer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: u32,
    pub score: f64,
}

impl Neighbor {
    #[inline]
    pub fn new(id: u32, score: f64) -> Self {
        Self { id, score }
    }
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    #[inline]
    fn cmp(&self, other: &Self) -> Ordering {
        self.score.total_cmp(&other.score).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Neighbor {
    #[inline]
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Neighbors sorted ascending by `(score, id)`, at most `k` long.
pub type TopKResult = Vec<Neighbor>;

pub fn ids(result: &[Neighbor]) -> Vec<u32> {
    result.iter().map(|n| n.id).collect()
}

/// Keeps the `k` smallest neighbors seen so far.
pub(crate) struct BoundedMaxHeap {
    k: usize,
    heap: BinaryHeap<Neighbor>,
}

impl BoundedMaxHeap {
    pub(crate) fn new(k: usize) -> Self {
        Self { k, heap: BinaryHeap::with_capacity(k + 1) }
    }

    #[inline]
    pub(crate) fn push(&mut self, cand: Neighbor) {
        if self.heap.len() < self.k {
            self.heap.push(cand);
        } else if let Some(mut top) = self.heap.peek_mut() {
            if cand < *top {
                *top = cand;
            }
        }
    }

    pub(crate) fn into_sorted(self) -> TopKResult {
        self.heap.into_sorted_vec()
    }
}

pub(crate) fn corpus_norms<T: Element>(corpus: &Dataset<T>) -> Result<Vec<f32>> {
    corpus
        .rows()
        .enumerate()
        .map(|(id, row)| {
            let n = norm(row);
            if n > 0.0 {
                Ok(n)
            } else {
                Err(Error::ZeroNorm { id })
            }
        })
        .collect()
}

pub(crate) fn query_norm<T: Element>(metric: Metric, query: &[T]) -> Result<f32> {
    if !metric.needs_norms() {
        return Ok(0.0);
    }
    let n = norm(query);
    if n > 0.0 {
        Ok(n)
    } else {
        Err(Error::invalid("query vector has zero norm, angular distance is undefined"))
    }
}

/// Exhaustive scan over a borrowed corpus. Norms are computed once up front
/// for the angular metric.
pub struct FlatIndex<'a, T> {
    corpus: &'a Dataset<T>,
    metric: Metric,
    norms: Vec<f32>,
}

impl<'a, T: Element> FlatIndex<'a, T> {
    pub fn new(corpus: &'a Dataset<T>, metric: Metric) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let norms = if metric.needs_norms() { corpus_norms(corpus)? } else { Vec::new() };
        Ok(Self { corpus, metric, norms })
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn corpus(&self) -> &Dataset<T> {
        self.corpus
    }

    pub fn search(&self, query: &[T], k: usize) -> Result<TopKResult> {
        if query.len() != self.corpus.dim() {
            return Err(Error::DimensionMismatch { expected: self.corpus.dim(), found: query.len() });
        }
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        let qn = query_norm(self.metric, query)?;
        let mut best = BoundedMaxHeap::new(k);
        match self.metric {
            Metric::Angular => {
                for (id, row) in self.corpus.rows().enumerate() {
                    let s = self.metric.score(query, row, qn, self.norms[id]);
                    best.push(Neighbor::new(id as u32, s));
                }
            }
            metric => {
                for (id, row) in self.corpus.rows().enumerate() {
                    best.push(Neighbor::new(id as u32, metric.score(query, row, 0.0, 0.0)));
                }
            }
        }
        Ok(best.into_sorted())
    }

    /// Searches every query; parallel across queries.
    pub fn search_batch(&self, queries: &Dataset<T>, k: usize) -> Result<Vec<TopKResult>> {
        queries.rows().collect::<Vec<_>>().into_par_iter().map(|q| self.search(q, k)).collect()
    }
}

pub fn exact_topk<T: Element>(corpus: &Dataset<T>, query: &[T], k: usize, metric: Metric) -> Result<TopKResult> {
    FlatIndex::new(corpus, metric)?.search(query, k)
}

pub fn batch_ground_truth<T: Element>(
    corpus: &Dataset<T>,
    queries: &Dataset<T>,
    k: usize,
    metric: Metric,
) -> Result<GroundTruth> {
    let results = FlatIndex::new(corpus, metric)?.search_batch(queries, k)?;
    Ok(GroundTruth::new(results.iter().map(|r| ids(r)).collect()))
}
