//! Evaluation metrics and fp32-vs-int8 sweeps.
//!
//! * recall@k: `|S_E ∩ S_A| / |S_E|` against exact ground truth
//! * QPS: sequential single-thread execution, warmup excluded
//! * build time and byte-exact memory of both index variants

use std::collections::HashSet;
use std::fmt::Write as _;
use std::hint::black_box;
use std::io;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::distance::Metric;
use crate::error::{Error, Result};
use crate::exact::{ids, FlatIndex};
use crate::hnsw::{HnswConfig, HnswIndex, SearchParams};
use crate::quantizer::{fit_dataset, Mode, QuantizerParams};
use crate::store::{Dataset, ElemKind, Element, GroundTruth};

pub const DEFAULT_K: usize = 100;
pub const DEFAULT_WARMUP: usize = 10;
pub const DEFAULT_REPETITIONS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct RecallReport {
    pub k: usize,
    pub per_query: Vec<f64>,
    pub mean: f64,
    /// Sum of `|S_E|` over queries.
    pub expected_total: usize,
    /// Sum of `|S_E ∩ S_A|` over queries.
    pub intersection_total: usize,
}

/// Set overlap between the first `k` ids of each expected and actual list.
pub fn recall_at_k<A: AsRef<[u32]>>(expected: &GroundTruth, actual: &[A], k: usize) -> Result<RecallReport> {
    if expected.len() != actual.len() {
        return Err(Error::LengthMismatch { expected: expected.len(), found: actual.len() });
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if expected.depth() < k && !expected.is_empty() {
        return Err(Error::invalid(format!("ground truth depth {} is below k = {k}", expected.depth())));
    }
    let mut per_query = Vec::with_capacity(actual.len());
    let mut intersection_total = 0;
    for (want, got) in expected.lists().iter().zip(actual) {
        let truth: HashSet<u32> = want[..k].iter().copied().collect();
        let got = got.as_ref();
        let got: HashSet<u32> = got[..k.min(got.len())].iter().copied().collect();
        let hits = truth.intersection(&got).count();
        intersection_total += hits;
        per_query.push(hits as f64 / k as f64);
    }
    let mean = if per_query.is_empty() { 0.0 } else { per_query.iter().sum::<f64>() / per_query.len() as f64 };
    Ok(RecallReport { k, per_query, mean, expected_total: k * actual.len(), intersection_total })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputReport {
    pub queries: usize,
    pub wall: Duration,
    pub qps: f64,
    pub threads: usize,
}

impl ThroughputReport {
    pub fn from_timing(queries: usize, wall: Duration) -> Self {
        let secs = wall.as_secs_f64().max(f64::MIN_POSITIVE);
        Self { queries, wall, qps: queries as f64 / secs, threads: 1 }
    }
}

/// Runs `search` over `queries` on the calling thread. The first `warmup`
/// calls (cycling through the queries) are untimed; then every query is
/// executed exactly once under a monotonic clock. Results of the timed
/// calls are returned.
pub fn measure_qps<Q, R>(queries: &[Q], warmup: usize, mut search: impl FnMut(&Q) -> R) -> Result<(ThroughputReport, Vec<R>)> {
    if queries.is_empty() {
        return Err(Error::invalid("need at least one query"));
    }
    for i in 0..warmup {
        black_box(search(&queries[i % queries.len()]));
    }
    let mut results = Vec::with_capacity(queries.len());
    let start = Instant::now();
    for q in queries {
        results.push(black_box(search(q)));
    }
    let wall = start.elapsed();
    Ok((ThroughputReport::from_timing(queries.len(), wall), results))
}

/// Median QPS over `repetitions` runs; results come from the first run.
pub fn median_qps<Q, R>(
    queries: &[Q],
    warmup: usize,
    repetitions: usize,
    mut search: impl FnMut(&Q) -> R,
) -> Result<(ThroughputReport, Vec<R>)> {
    let reps = repetitions.max(1);
    let mut reports = Vec::with_capacity(reps);
    let mut first = None;
    for rep in 0..reps {
        let (report, results) = measure_qps(queries, if rep == 0 { warmup } else { 0 }, &mut search)?;
        reports.push(report);
        if first.is_none() {
            first = Some(results);
        }
    }
    reports.sort_by(|a, b| a.qps.total_cmp(&b.qps));
    Ok((reports[reps / 2], first.expect("at least one repetition")))
}

/// One row of a sweep report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub elem: &'static str,
    pub metric: &'static str,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "EFC")]
    pub efc: usize,
    #[serde(rename = "EFS")]
    pub efs: usize,
    pub recall: f64,
    pub qps: f64,
    pub build_s: f64,
    pub vector_bytes: u64,
    pub graph_bytes: u64,
    pub total_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn rows_for(&self, elem: ElemKind) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.elem == elem.name())
    }

    pub fn cell(&self, elem: ElemKind, m: usize, efc: usize, efs: usize) -> Option<&SweepRow> {
        self.rows_for(elem).find(|r| r.m == m && r.efc == efc && r.efs == efs)
    }

    /// Writes the rows with a header, tab- or comma-separated.
    pub fn write_table<W: io::Write>(&self, writer: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::Io(io::Error::other(e)))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Build time and memory per `(EFC, M)`, fp32 beside int8.
    pub fn build_memory_table(&self) -> String {
        let mut configs: Vec<(usize, usize)> = self.rows.iter().filter(|r| r.m > 0).map(|r| (r.efc, r.m)).collect();
        configs.sort_unstable();
        configs.dedup();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14} {:>12} {:>12} {:>14} {:>14}",
            "Config(EFC,M)", "build fp32", "build int8", "memory fp32", "memory int8"
        );
        for (efc, m) in configs {
            let pick = |elem: ElemKind| self.rows_for(elem).find(|r| r.efc == efc && r.m == m);
            let (Some(f), Some(q)) = (pick(ElemKind::Float32), pick(ElemKind::Int8)) else { continue };
            let _ = writeln!(
                out,
                "{:<14} {:>11.2}s {:>11.2}s {:>11.4} GB {:>11.4} GB",
                format!("{efc}, {m}"),
                f.build_s,
                q.build_s,
                f.total_bytes as f64 / 1e9,
                q.total_bytes as f64 / 1e9
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub ms: Vec<usize>,
    pub efcs: Vec<usize>,
    pub efs: Vec<usize>,
    pub metric: Metric,
    pub bits: u8,
    pub mode: Mode,
    pub k: usize,
    pub seed: u64,
    pub build_threads: usize,
    pub warmup: usize,
    pub repetitions: usize,
    /// Also emit flat-scan rows (`M = EFC = EFS = 0`).
    pub include_exhaustive: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            ms: vec![32, 48],
            efcs: (300..=700).step_by(100).collect(),
            efs: (300..=800).step_by(50).collect(),
            metric: Metric::InnerProduct,
            bits: 8,
            mode: Mode::AbsMax,
            k: DEFAULT_K,
            seed: 0,
            build_threads: 1,
            warmup: DEFAULT_WARMUP,
            repetitions: DEFAULT_REPETITIONS,
            include_exhaustive: false,
        }
    }
}

/// The two views of one benchmark: float originals and their quantized codes.
pub struct PairedData {
    pub corpus: Dataset<f32>,
    pub queries: Dataset<f32>,
    pub corpus_q: Dataset<i8>,
    pub queries_q: Dataset<i8>,
    pub params: QuantizerParams,
}

impl PairedData {
    /// Fits the quantizer on the corpus and applies it to corpus and queries.
    pub fn quantize(corpus: Dataset<f32>, queries: Dataset<f32>, bits: u8, mode: Mode) -> Result<Self> {
        let params = fit_dataset(&corpus, bits, mode)?.params;
        let corpus_q = params.quantize_dataset(&corpus)?;
        let queries_q = params.quantize_dataset(&queries)?;
        Ok(Self { corpus, queries, corpus_q, queries_q, params })
    }
}

struct Measured {
    recall: f64,
    qps: f64,
}

fn measure_index<T: Element>(
    index: &HnswIndex<T>,
    queries: &Dataset<T>,
    gt: &GroundTruth,
    params: SearchParams,
    cfg: &SweepConfig,
) -> Result<Measured> {
    let rows: Vec<&[T]> = queries.rows().collect();
    let (report, results) = median_qps(&rows, cfg.warmup, cfg.repetitions, |q| index.search(q, params))?;
    let found = results.into_iter().map(|r| r.map(|r| ids(&r))).collect::<Result<Vec<_>>>()?;
    Ok(Measured { recall: recall_at_k(gt, &found, params.k)?.mean, qps: report.qps })
}

fn measure_flat<T: Element>(
    corpus: &Dataset<T>,
    queries: &Dataset<T>,
    gt: &GroundTruth,
    metric: Metric,
    cfg: &SweepConfig,
) -> Result<Measured> {
    let flat = FlatIndex::new(corpus, metric)?;
    let rows: Vec<&[T]> = queries.rows().collect();
    let (report, results) = median_qps(&rows, cfg.warmup, cfg.repetitions, |q| flat.search(q, cfg.k))?;
    let found = results.into_iter().map(|r| r.map(|r| ids(&r))).collect::<Result<Vec<_>>>()?;
    Ok(Measured { recall: recall_at_k(gt, &found, cfg.k)?.mean, qps: report.qps })
}

fn timed<R>(f: impl FnOnce() -> R) -> (R, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Builds fp32 and int8 indexes for every `(M, EFC)` and measures recall and
/// QPS at every EFS. Recall is always against the float ground truth `gt`.
pub fn run_sweep(data: &PairedData, gt: &GroundTruth, cfg: &SweepConfig) -> Result<SweepResult> {
    if data.queries.n() != gt.len() {
        return Err(Error::LengthMismatch { expected: gt.len(), found: data.queries.n() });
    }
    if gt.depth() < cfg.k {
        return Err(Error::invalid(format!("ground truth depth {} is below k = {}", gt.depth(), cfg.k)));
    }
    for &efs in &cfg.efs {
        SearchParams::new(efs, cfg.k).validate()?;
    }
    let metric = cfg.metric;
    let mut result = SweepResult::default();
    let row = |elem: ElemKind, m, efc, efs, measured: &Measured, build_s, mem: Option<crate::hnsw::MemoryReport>| {
        let n = data.corpus.n() as u64;
        let d = data.corpus.dim() as u64;
        let (vector_bytes, graph_bytes, total_bytes) = match mem {
            Some(r) => (r.vector_bytes, r.graph_bytes, r.total),
            None => (n * d * elem.size() as u64, 0, n * d * elem.size() as u64),
        };
        SweepRow {
            elem: elem.name(),
            metric: metric.name(),
            m,
            efc,
            efs,
            recall: measured.recall,
            qps: measured.qps,
            build_s,
            vector_bytes,
            graph_bytes,
            total_bytes,
        }
    };

    if cfg.include_exhaustive {
        let f = measure_flat(&data.corpus, &data.queries, gt, metric, cfg)?;
        result.rows.push(row(ElemKind::Float32, 0, 0, 0, &f, 0.0, None));
        let q = measure_flat(&data.corpus_q, &data.queries_q, gt, metric, cfg)?;
        result.rows.push(row(ElemKind::Int8, 0, 0, 0, &q, 0.0, None));
    }

    for &m in &cfg.ms {
        for &efc in &cfg.efcs {
            let config = HnswConfig::new(m, efc, cfg.seed);
            let (fidx, fbuild) =
                timed(|| HnswIndex::build_with_threads(&data.corpus, config, metric, cfg.build_threads));
            let fidx = fidx?;
            let (qidx, qbuild) =
                timed(|| HnswIndex::build_with_threads(&data.corpus_q, config, metric, cfg.build_threads));
            let qidx = qidx?.with_bits(data.params.bits());
            let (fmem, qmem) = (fidx.memory_report(), qidx.memory_report());
            for &efs in &cfg.efs {
                let params = SearchParams::new(efs, cfg.k);
                let f = measure_index(&fidx, &data.queries, gt, params, cfg)?;
                result.rows.push(row(ElemKind::Float32, m, efc, efs, &f, fbuild, Some(fmem)));
                let q = measure_index(&qidx, &data.queries_q, gt, params, cfg)?;
                result.rows.push(row(ElemKind::Int8, m, efc, efs, &q, qbuild, Some(qmem)));
            }
        }
    }
    Ok(result)
}
