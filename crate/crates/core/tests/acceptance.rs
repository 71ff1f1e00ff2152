//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run a subset with `cargo test --test acceptance -- 1 3 10`.
//! Set `QUANTANN_SIFTSMALL=<dir>` to run criterion 4 on siftsmall instead of
//! the synthetic inner-product corpus.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quantann::bench::{median_qps, recall_at_k, PairedData};
use quantann::distance::distance;
use quantann::exact::ids;
use quantann::hnsw::{decode_index, encode_index, estimate_memory, load_index, save_index};
use quantann::quantizer::{decode_params, encode_params, fit_dataset, load_params, save_params};
use quantann::synthetic::generate_synthetic;
use quantann::vecs::{load_fvecs, load_ivecs};
use quantann::{
    batch_ground_truth, exact_topk, Dataset, ElemKind, Element, FlatIndex, GroundTruth, HnswConfig, HnswIndex, Metric,
    Mode, Neighbor, QuantizerParams, SearchParams,
};

type Outcome = Result<String, String>;

const K: usize = 100;
const WARMUP: usize = 10;
const REPS: usize = 3;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, budget: Duration) -> Result<(), String> {
    let took = start.elapsed();
    check(took < budget, format!("runtime {:.1}s exceeds {:.0}s", took.as_secs_f64(), budget.as_secs_f64()))
}

fn err(e: quantann::Error) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- 1

fn quantizer_properties() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for t in 0..10_000 {
        let bits = rng.random_range(2..=8u8);
        let mode = [Mode::SigmaClamp, Mode::AbsMax, Mode::UniformSigmaClamp][t % 3];
        let k: f32 = rng.random_range(-100.0..100.0);
        let half: f32 = 10f32.powf(rng.random_range(-4.0..2.0));
        let (sb, se) = (k - half, k + half);
        let p = QuantizerParams::new(bits, mode, vec![k], vec![sb], vec![se]).map_err(err)?;
        let span = 3.0 * half;
        let mut x: f32 = rng.random_range(k - span..k + span);
        let mut y: f32 = rng.random_range(k - span..k + span);
        if x > y {
            std::mem::swap(&mut x, &mut y);
        }
        let (qx, qy) = (p.quantize_value(x, 0), p.quantize_value(y, 0));
        check(qx <= qy, format!("monotonicity: q({x}) = {qx} > q({y}) = {qy}"))?;
        for q in [qx, qy] {
            check(
                (p.min_code()..=p.max_code()).contains(&(q as i32)),
                format!("code {q} outside B = {bits} range"),
            )?;
        }
        let bound = (se - sb) as f64 / f64::from(1u32 << bits);
        for v in [x, y] {
            if (sb..=se).contains(&v) {
                let e = (p.dequantize_value(p.quantize_value(v, 0), 0) - v as f64).abs();
                check(e <= bound, format!("reconstruction error {e} > {bound} at x = {v}"))?;
            }
        }
    }
    within(start, Duration::from_secs(5))?;
    Ok(format!("10000 triples in {:.2}s", start.elapsed().as_secs_f64()))
}

// ---------------------------------------------------------------- 2

fn random_f32(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset<f32> {
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        loop {
            let row: Vec<f32> = (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            if row.iter().any(|&v| v != 0.0) {
                data.extend(row);
                break;
            }
        }
    }
    Dataset::new(d, data).unwrap()
}

fn random_i8(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset<i8> {
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        loop {
            // A small range forces many exact score ties.
            let lim: i8 = if rng.random_bool(0.5) { 3 } else { 127 };
            let row: Vec<i8> = (0..d).map(|_| rng.random_range(-lim..=lim)).collect();
            if row.iter().any(|&v| v != 0) {
                data.extend(row);
                break;
            }
        }
    }
    Dataset::new(d, data).unwrap()
}

fn full_sort<T: Element>(corpus: &Dataset<T>, query: &[T], k: usize, metric: Metric) -> Vec<Neighbor> {
    let qn = quantann::distance::norm(query);
    let mut all: Vec<Neighbor> = corpus
        .rows()
        .enumerate()
        .map(|(i, row)| {
            let norms = metric.needs_norms().then(|| (qn, quantann::distance::norm(row)));
            Neighbor::new(i as u32, distance(metric, query, row, norms).unwrap())
        })
        .collect();
    all.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.id.cmp(&b.id)));
    all.truncate(k);
    all
}

fn same_results(a: &[Neighbor], b: &[Neighbor]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.id == y.id && x.score.to_bits() == y.score.to_bits())
}

const METRICS: [Metric; 3] = [Metric::InnerProduct, Metric::L2Squared, Metric::Angular];

fn exact_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut queries = 0;
    for inst in 0..200 {
        let n = rng.random_range(1..=1000);
        let d = rng.random_range(1..=32);
        let metric = METRICS[inst % 3];
        let k = rng.random_range(1..=n + 5);
        if inst % 2 == 0 {
            let corpus = random_f32(&mut rng, n, d);
            let qs = random_f32(&mut rng, 3, d);
            for q in qs.rows() {
                let got = exact_topk(&corpus, q, k, metric).map_err(err)?;
                check(same_results(&got, &full_sort(&corpus, q, k, metric)), format!("fp32 instance {inst} {metric}"))?;
                queries += 1;
            }
        } else {
            let corpus = random_i8(&mut rng, n, d);
            let qs = random_i8(&mut rng, 3, d);
            for q in qs.rows() {
                let got = exact_topk(&corpus, q, k, metric).map_err(err)?;
                check(same_results(&got, &full_sort(&corpus, q, k, metric)), format!("int8 instance {inst} {metric}"))?;
                queries += 1;
            }
        }
    }
    within(start, Duration::from_secs(30))?;
    Ok(format!("200 instances, {queries} queries in {:.2}s", start.elapsed().as_secs_f64()))
}

// ---------------------------------------------------------------- 3

fn saturated<T: Element>(corpus: &Dataset<T>, queries: &Dataset<T>, metric: Metric, seed: u64, k: usize) -> Result<(), String> {
    let n = corpus.n();
    // Layer-0 lists hold 2M >= n - 1 ids, so no edge is ever pruned.
    let m = n.div_ceil(2).max(2);
    let index = HnswIndex::build(corpus, HnswConfig::new(m, n, seed), metric).map_err(err)?;
    for q in queries.rows() {
        let got = index.search(q, SearchParams::new(n, k)).map_err(err)?;
        let want = exact_topk(corpus, q, k, metric).map_err(err)?;
        check(same_results(&got, &want), format!("n={n} d={} {metric} k={k}", corpus.dim()))?;
    }
    Ok(())
}

fn hnsw_saturation() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for c in 0..50 {
        let n = rng.random_range(2..=200);
        let d = rng.random_range(1..=16);
        let k = rng.random_range(1..=n);
        let metric = METRICS[c % 3];
        if c % 2 == 0 {
            saturated(&random_f32(&mut rng, n, d), &random_f32(&mut rng, 10, d), metric, c as u64, k)?;
        } else {
            saturated(&random_i8(&mut rng, n, d), &random_i8(&mut rng, 10, d), metric, c as u64, k)?;
        }
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("50 corpora in {:.2}s", start.elapsed().as_secs_f64()))
}

// ---------------------------------------------------------------- 4, 7a

struct Exhaustive {
    recall: f64,
    qps_f32: f64,
    qps_i8: f64,
    label: String,
    elapsed: Duration,
}

fn load_siftsmall() -> Option<(Dataset<f32>, Dataset<f32>, GroundTruth)> {
    let dir = PathBuf::from(std::env::var_os("QUANTANN_SIFTSMALL")?);
    let base = load_fvecs(dir.join("siftsmall_base.fvecs")).ok()?;
    let query = load_fvecs(dir.join("siftsmall_query.fvecs")).ok()?;
    let gt = load_ivecs(dir.join("siftsmall_groundtruth.ivecs")).ok()?;
    Some((base, query, gt))
}

fn exhaustive_run() -> Result<Exhaustive, String> {
    let start = Instant::now();
    let (corpus, queries, metric, gt, label) = match load_siftsmall() {
        Some((base, query, gt)) => (base, query, Metric::L2Squared, Some(gt), "siftsmall, L2".to_string()),
        None => (
            generate_synthetic(50_000, 64, 0.0, 0.05, 40).map_err(err)?,
            generate_synthetic(100, 64, 0.0, 0.05, 41).map_err(err)?,
            Metric::InnerProduct,
            None,
            "synthetic N(0, 0.05) n=50000 d=64, IP".to_string(),
        ),
    };
    let gt = match gt {
        Some(gt) => gt,
        None => batch_ground_truth(&corpus, &queries, K, metric).map_err(err)?,
    };
    let data = PairedData::quantize(corpus, queries, 8, Mode::AbsMax).map_err(err)?;

    let flat_f = FlatIndex::new(&data.corpus, metric).map_err(err)?;
    let rows_f: Vec<&[f32]> = data.queries.rows().collect();
    let (rep_f, _) = median_qps(&rows_f, WARMUP, REPS, |q| flat_f.search(q, K)).map_err(err)?;

    let flat_q = FlatIndex::new(&data.corpus_q, metric).map_err(err)?;
    let rows_q: Vec<&[i8]> = data.queries_q.rows().collect();
    let (rep_q, found) = median_qps(&rows_q, WARMUP, REPS, |q| flat_q.search(q, K)).map_err(err)?;
    let found = found.into_iter().map(|r| r.map(|r| ids(&r))).collect::<Result<Vec<_>, _>>().map_err(err)?;
    let recall = recall_at_k(&gt, &found, K).map_err(err)?.mean;
    Ok(Exhaustive { recall, qps_f32: rep_f.qps, qps_i8: rep_q.qps, label, elapsed: start.elapsed() })
}

fn exhaustive_recall(run: &Result<Exhaustive, String>) -> Outcome {
    let r = run.as_ref().map_err(|e| e.clone())?;
    check(r.elapsed < Duration::from_secs(120), format!("runtime {:.1}s exceeds 120s", r.elapsed.as_secs_f64()))?;
    check(r.recall >= 0.95, format!("int8 exhaustive recall@100 {:.4} < 0.95 ({})", r.recall, r.label))?;
    Ok(format!("int8 exhaustive recall@100 = {:.4} ({}, {:.1}s)", r.recall, r.label, r.elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------- 5, 7b, 8, 9

const EFS_GRID: [usize; 11] = [300, 350, 400, 450, 500, 550, 600, 650, 700, 750, 800];

struct Curve {
    recall: Vec<f64>,
    qps: Vec<f64>,
    build_s: f64,
}

struct HnswBench {
    f32: Curve,
    i8: Curve,
    elapsed: Duration,
}

fn curve<T: Element>(index: &HnswIndex<T>, queries: &Dataset<T>, gt: &GroundTruth, build_s: f64) -> Result<Curve, String> {
    let rows: Vec<&[T]> = queries.rows().collect();
    let mut recall = Vec::new();
    let mut qps = Vec::new();
    for efs in EFS_GRID {
        let params = SearchParams::new(efs, K);
        let (rep, found) = median_qps(&rows, WARMUP, REPS, |q| index.search(q, params)).map_err(err)?;
        let found = found.into_iter().map(|r| r.map(|r| ids(&r))).collect::<Result<Vec<_>, _>>().map_err(err)?;
        recall.push(recall_at_k(gt, &found, K).map_err(err)?.mean);
        qps.push(rep.qps);
    }
    Ok(Curve { recall, qps, build_s })
}

fn hnsw_run() -> Result<HnswBench, String> {
    let start = Instant::now();
    let corpus = generate_synthetic(100_000, 64, 0.0, 0.05, 50).map_err(err)?;
    let queries = generate_synthetic(100, 64, 0.0, 0.05, 51).map_err(err)?;
    let metric = Metric::InnerProduct;
    let gt = batch_ground_truth(&corpus, &queries, K, metric).map_err(err)?;
    let data = PairedData::quantize(corpus, queries, 8, Mode::AbsMax).map_err(err)?;
    let config = HnswConfig::new(32, 300, 7);

    let t = Instant::now();
    let fidx = HnswIndex::build_with_threads(&data.corpus, config, metric, 1).map_err(err)?;
    let fbuild = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let qidx = HnswIndex::build_with_threads(&data.corpus_q, config, metric, 1).map_err(err)?;
    let qbuild = t.elapsed().as_secs_f64();

    let f32 = curve(&fidx, &data.queries, &gt, fbuild)?;
    let i8 = curve(&qidx, &data.queries_q, &gt, qbuild)?;
    Ok(HnswBench { f32, i8, elapsed: start.elapsed() })
}

fn efs_index(efs: usize) -> usize {
    EFS_GRID.iter().position(|&e| e == efs).unwrap()
}

fn recall_gap(run: &Result<HnswBench, String>) -> Outcome {
    let r = run.as_ref().map_err(|e| e.clone())?;
    check(r.elapsed < Duration::from_secs(600), format!("runtime {:.1}s exceeds 600s", r.elapsed.as_secs_f64()))?;
    let i = efs_index(800);
    let (f, q) = (r.f32.recall[i], r.i8.recall[i]);
    check(f - q <= 0.04, format!("recall gap {:.4} > 0.04 (fp32 {f:.4}, int8 {q:.4})", f - q))?;
    Ok(format!(
        "EFS=800 recall@100 fp32 {f:.4}, int8 {q:.4}, gap {:.4} ({:.1}s)",
        f - q,
        r.elapsed.as_secs_f64()
    ))
}

fn efs_monotonicity(run: &Result<HnswBench, String>) -> Outcome {
    let r = run.as_ref().map_err(|e| e.clone())?;
    for (name, c) in [("fp32", &r.f32), ("int8", &r.i8)] {
        for w in c.recall.windows(2) {
            check(w[1] >= w[0], format!("{name} recall decreases: {:?}", c.recall))?;
        }
        let (lo, hi) = (c.qps[efs_index(300)], c.qps[efs_index(800)]);
        check(hi < lo, format!("{name} QPS at EFS=800 ({hi:.0}) not below EFS=300 ({lo:.0})"))?;
    }
    Ok(format!(
        "recall fp32 {:.4}->{:.4}, int8 {:.4}->{:.4}; QPS fp32 {:.0}->{:.0}, int8 {:.0}->{:.0}",
        r.f32.recall[0],
        r.f32.recall[10],
        r.i8.recall[0],
        r.i8.recall[10],
        r.f32.qps[0],
        r.f32.qps[10],
        r.i8.qps[0],
        r.i8.qps[10]
    ))
}

fn build_time(run: &Result<HnswBench, String>) -> Outcome {
    let r = run.as_ref().map_err(|e| e.clone())?;
    let (f, q) = (r.f32.build_s, r.i8.build_s);
    check(q <= f, format!("int8 build {q:.2}s > fp32 build {f:.2}s"))?;
    Ok(format!("build fp32 {f:.2}s, int8 {q:.2}s ({:.1}% faster)", 100.0 * (1.0 - q / f)))
}

fn throughput(ex: &Result<Exhaustive, String>, hn: &Result<HnswBench, String>) -> Outcome {
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    match ex {
        Ok(e) => {
            let ratio = e.qps_i8 / e.qps_f32;
            notes.push(format!("exhaustive int8/fp32 = {ratio:.2} ({:.0} vs {:.0} QPS)", e.qps_i8, e.qps_f32));
            if ratio < 1.0 {
                failures.push("exhaustive ratio below 1.0".to_string());
            }
        }
        Err(e) => failures.push(e.clone()),
    }
    match hn {
        Ok(h) => {
            let i = efs_index(500);
            let ratio = h.i8.qps[i] / h.f32.qps[i];
            notes.push(format!("HNSW EFS=500 int8/fp32 = {ratio:.2} ({:.0} vs {:.0} QPS)", h.i8.qps[i], h.f32.qps[i]));
            if ratio < 1.0 {
                failures.push("HNSW ratio below 1.0".to_string());
            }
        }
        Err(e) => failures.push(e.clone()),
    }
    let notes = notes.join("; ");
    if failures.is_empty() {
        Ok(notes)
    } else {
        Err(format!("{}: {notes}", failures.join(", ")))
    }
}

// ---------------------------------------------------------------- 6

fn memory_accounting() -> Outcome {
    let start = Instant::now();
    let (n, d) = (100_000usize, 256usize);
    let corpus = generate_synthetic(n, d, 0.0, 0.05, 60).map_err(err)?;
    let codes = fit_dataset(&corpus, 8, Mode::AbsMax).map_err(err)?.params.quantize_dataset(&corpus).map_err(err)?;
    let config = HnswConfig::new(32, 32, 61);
    let fidx = HnswIndex::build(&corpus, config, Metric::InnerProduct).map_err(err)?;
    let qidx = HnswIndex::build(&codes, config, Metric::InnerProduct).map_err(err)?;
    let (f, q) = (fidx.memory_report(), qidx.memory_report());
    check(f.total - q.total == (n * d * 3) as u64, format!("gap {} != n*d*3 = {}", f.total - q.total, n * d * 3))?;
    check(f.graph_bytes == q.graph_bytes, "graph bytes differ between fp32 and int8")?;
    let ratio = q.total as f64 / f.total as f64;
    check(ratio > 0.25, format!("int8/fp32 ratio {ratio:.4} <= 0.25"))?;
    check(encode_index(&fidx).len() as u64 == f.total, "fp32 serialized size differs from report")?;
    check(encode_index(&qidx).len() as u64 == q.total, "int8 serialized size differs from report")?;

    let big_f = estimate_memory(60_000_000, 256, 32, ElemKind::Float32, Metric::InnerProduct);
    let big_q = estimate_memory(60_000_000, 256, 32, ElemKind::Int8, Metric::InnerProduct);
    let gap_gb = (big_f.total - big_q.total) as f64 / 1e9;
    check((gap_gb - 46.08).abs() / 46.08 <= 1e-3, format!("60M gap {gap_gb:.3} GB not within 0.1% of 46.08"))?;
    within(start, Duration::from_secs(300))?;
    Ok(format!(
        "gap {} B = n*d*3, ratio {ratio:.4}, 60M gap {gap_gb:.2} GB ({:.1}s)",
        f.total - q.total,
        start.elapsed().as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 10

fn round_trip_index<T: Element>(index: &HnswIndex<T>, queries: &Dataset<T>, path: &std::path::Path) -> Result<(), String>
where
    quantann::AnyIndex: TryInto<HnswIndex<T>>,
{
    save_index(path, index).map_err(err)?;
    let bytes = std::fs::read(path).map_err(|e| e.to_string())?;
    check(bytes == encode_index(index), "saved bytes differ from encoding")?;
    let back = match load_index(path).map_err(err)?.try_into() {
        Ok(ix) => ix,
        Err(_) => return Err("loaded index has the wrong element kind".into()),
    };
    check(encode_index(&back) == bytes, "re-encoded index differs")?;
    let params = SearchParams::new(64, 10);
    for q in queries.rows() {
        let a = index.search(q, params).map_err(err)?;
        let b = back.search(q, params).map_err(err)?;
        check(same_results(&a, &b), "search results differ after reload")?;
    }
    check(decode_index(&bytes).is_ok(), "in-memory decode failed")?;
    Ok(())
}

fn serialization() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = generate_synthetic(5000, 32, 0.0, 0.05, 100).map_err(err)?;
    let queries = generate_synthetic(100, 32, 0.0, 0.05, 101).map_err(err)?;
    for mode in [Mode::SigmaClamp, Mode::AbsMax, Mode::UniformSigmaClamp] {
        let p = fit_dataset(&corpus, 8, mode).map_err(err)?.params;
        let path = dir.path().join(format!("{}.qparams", mode.name()));
        save_params(&path, &p).map_err(err)?;
        let back = load_params(&path).map_err(err)?;
        check(back == p, "params differ after reload")?;
        check(encode_params(&back) == std::fs::read(&path).map_err(|e| e.to_string())?, "params bytes differ")?;
        check(decode_params(&encode_params(&p)).map_err(err)? == p, "params decode differs")?;
    }
    let p = fit_dataset(&corpus, 8, Mode::AbsMax).map_err(err)?.params;
    let (codes, qcodes) = (p.quantize_dataset(&corpus).map_err(err)?, p.quantize_dataset(&queries).map_err(err)?);
    for metric in METRICS {
        let config = HnswConfig::new(12, 64, 9);
        let fidx = HnswIndex::build(&corpus, config, metric).map_err(err)?;
        round_trip_index(&fidx, &queries, &dir.path().join(format!("f-{metric}.qhnsw")))?;
        let qidx = HnswIndex::build(&codes, config, metric).map_err(err)?.with_bits(8);
        round_trip_index(&qidx, &qcodes, &dir.path().join(format!("q-{metric}.qhnsw")))?;
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("3 params files, 6 indexes, 100 queries each ({:.1}s)", start.elapsed().as_secs_f64()))
}

// ---------------------------------------------------------------- driver

fn report(id: u32, name: &str, outcome: Outcome) -> bool {
    match outcome {
        Ok(msg) => {
            println!("PASS {id:>2} {name}: {msg}");
            true
        }
        Err(msg) => {
            println!("FAIL {id:>2} {name}: {msg}");
            false
        }
    }
}

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |id: u32| selected.is_empty() || selected.contains(&id);
    let mut ok = true;

    if want(1) {
        ok &= report(1, "quantizer properties", quantizer_properties());
    }
    if want(2) {
        ok &= report(2, "exact search oracle", exact_oracle());
    }
    if want(3) {
        ok &= report(3, "HNSW saturation equivalence", hnsw_saturation());
    }
    let exhaustive = (want(4) || want(7)).then(exhaustive_run);
    if want(4) {
        ok &= report(4, "exhaustive int8 recall", exhaustive_recall(exhaustive.as_ref().unwrap()));
    }
    let hnsw = (want(5) || want(7) || want(8) || want(9)).then(hnsw_run);
    if want(5) {
        ok &= report(5, "HNSW recall gap", recall_gap(hnsw.as_ref().unwrap()));
    }
    if want(6) {
        ok &= report(6, "memory accounting", memory_accounting());
    }
    if want(7) {
        ok &= report(7, "throughput direction", throughput(exhaustive.as_ref().unwrap(), hnsw.as_ref().unwrap()));
    }
    if want(8) {
        ok &= report(8, "EFS monotonicity", efs_monotonicity(hnsw.as_ref().unwrap()));
    }
    if want(9) {
        ok &= report(9, "build time direction", build_time(hnsw.as_ref().unwrap()));
    }
    if want(10) {
        ok &= report(10, "serialization round trip", serialization());
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
