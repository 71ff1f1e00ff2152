//! `quantann`: fit, quantize, ground truth, build, search and bench.
//!
//! Exit codes: 0 on success, 2 on usage or validation errors, 1 on I/O and
//! other runtime failures.

use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use quantann::bench::{measure_qps, recall_at_k, run_sweep, PairedData, SweepConfig, DEFAULT_K, DEFAULT_WARMUP};
use quantann::exact::ids;
use quantann::hnsw::{load_index, save_index, AnyIndex};
use quantann::quantizer::{fit, load_params, save_params};
use quantann::vecs::{load_dense, load_fvecs, load_ivecs, save_ivecs, write_record, VecsReader};
use quantann::{
    batch_ground_truth, estimate_stats, Dataset, DenseDataset, Element, GroundTruth, HnswConfig, HnswIndex, Metric,
    Mode, QuantizerParams, SearchParams,
};

#[derive(Parser, Debug)]
#[command(name = "quantann", version, about = "Int8 scalar quantization for nearest neighbor search")]
struct Cli {
    /// Seed for HNSW level assignment.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Threads for index construction (default: all cores).
    #[arg(long, global = true, env = "QUANTANN_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate per-dimension statistics and write quantizer params.
    Fit(FitArgs),
    /// Quantize an fvecs file into i8vecs with saved params.
    Quantize(QuantizeArgs),
    /// Exact top-k ground truth.
    Gt(GtArgs),
    /// Build an HNSW index over fvecs or i8vecs.
    Build(BuildArgs),
    /// Query an index.
    Search(SearchArgs),
    /// Sweep fp32 and int8 indexes over an M x EFC x EFS grid.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u8).range(1..=8))]
    bits: u8,
    /// sigma, absmax or uniform.
    #[arg(long, default_value = "sigma")]
    mode: Mode,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct QuantizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GtArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// ip, l2 or angular.
    #[arg(long, default_value = "ip")]
    metric: Metric,
    /// Scale float vectors to unit length first.
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BuildArgs {
    /// fvecs, i8vecs or bvecs.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "ip")]
    metric: Metric,
    #[arg(long, default_value_t = 32)]
    m: usize,
    #[arg(long, default_value_t = 300)]
    efc: usize,
    /// Bit width recorded for int8 corpora.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u8).range(1..=8))]
    bits: u8,
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = 800)]
    efs: usize,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Quantize float queries with these params before searching an int8 index.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Ground truth for a recall report.
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    normalize: bool,
    /// Write neighbor ids as ivecs instead of printing them.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Ground truth ivecs; computed exactly when omitted.
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u8).range(1..=8))]
    bits: u8,
    #[arg(long, default_value = "absmax")]
    mode: Mode,
    #[arg(long, default_value = "ip")]
    metric: Metric,
    #[arg(long = "m", value_delimiter = ',', default_value = "32,48")]
    ms: Vec<usize>,
    #[arg(long = "efc", value_delimiter = ',', default_value = "300,400,500,600,700")]
    efcs: Vec<usize>,
    #[arg(
        long = "efs",
        value_delimiter = ',',
        default_value = "300,350,400,450,500,550,600,650,700,750,800"
    )]
    efs: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    warmup: usize,
    /// QPS is the median over this many runs.
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// Add flat-scan rows (M = EFC = EFS = 0).
    #[arg(long)]
    exhaustive: bool,
    #[arg(long)]
    normalize: bool,
    /// TSV report; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Additional CSV report.
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// A validation failure detected by the CLI itself.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use quantann::Error as E;
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Io(_)
                | E::TruncatedRecord { .. }
                | E::NonPositiveDim { .. }
                | E::BadMagic
                | E::UnsupportedVersion(_)
                | E::VersionMismatch { .. }
                | E::TruncatedFile(_)
                | E::Corrupt(_) => 1,
                _ => 2,
            };
        }
        if cause.is::<io::Error>() {
            return 1;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let threads = match cli.threads {
        Some(0) => return Err(usage("--threads must be at least 1")),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Quantize(a) => cmd_quantize(a),
        Command::Gt(a) => cmd_gt(a),
        Command::Build(a) => cmd_build(a, cli.seed, threads),
        Command::Search(a) => cmd_search(a),
        Command::Bench(a) => cmd_bench(a, cli.seed, threads),
    }
}

fn read_fvecs(path: &Path, normalize: bool) -> Result<Dataset<f32>> {
    let ds = load_fvecs(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(if normalize { ds.normalized()? } else { ds })
}

fn read_dense(path: &Path, normalize: bool) -> Result<DenseDataset> {
    let ds = load_dense(path).with_context(|| format!("reading {}", path.display()))?;
    match ds {
        DenseDataset::Float32(f) if normalize => Ok(f.normalized()?.into()),
        DenseDataset::Int8(_) if normalize => Err(usage("--normalize applies to float vectors only")),
        other => Ok(other),
    }
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let ds = read_fvecs(&a.input, false)?;
    let fitted = fit(&estimate_stats(&ds)?, a.bits, a.mode)?;
    for &dim in &fitted.degenerate {
        eprintln!("warning: dimension {dim} has a degenerate window; widened around k = {}", fitted.params.center()[dim]);
    }
    save_params(&a.out, &fitted.params).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "fitted {} dims from {} vectors (B = {}, mode = {}, {} degenerate)",
        ds.dim(),
        ds.n(),
        a.bits,
        a.mode.name(),
        fitted.degenerate.len()
    );
    Ok(())
}

fn quantize_stream(input: &Path, params: &QuantizerParams, out: &Path) -> Result<usize> {
    let reader = BufReader::new(File::open(input).with_context(|| format!("opening {}", input.display()))?);
    let mut writer = BufWriter::new(File::create(out).with_context(|| format!("creating {}", out.display()))?);
    let mut codes = vec![0i8; params.dim()];
    let mut rows = 0;
    for row in VecsReader::<_, f32>::new(reader) {
        let row = row?;
        params.quantize_into(&row, &mut codes)?;
        write_record(&mut writer, &codes)?;
        rows += 1;
    }
    writer.flush()?;
    Ok(rows)
}

fn cmd_quantize(a: QuantizeArgs) -> Result<()> {
    let params = load_params(&a.params).with_context(|| format!("reading {}", a.params.display()))?;
    match quantize_stream(&a.input, &params, &a.out) {
        Ok(rows) => {
            println!("quantized {rows} vectors of dimension {} (B = {})", params.dim(), params.bits());
            Ok(())
        }
        Err(e) => {
            let _ = std::fs::remove_file(&a.out);
            Err(e)
        }
    }
}

fn ground_truth<T: Element>(corpus: &Dataset<T>, queries: &Dataset<T>, k: usize, metric: Metric) -> Result<GroundTruth> {
    if corpus.is_empty() {
        return Err(usage("corpus is empty"));
    }
    Ok(batch_ground_truth(corpus, queries, k, metric)?)
}

fn cmd_gt(a: GtArgs) -> Result<()> {
    if a.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    let corpus = read_dense(&a.corpus, a.normalize)?;
    let queries = read_dense(&a.queries, a.normalize)?;
    let gt = match (&corpus, &queries) {
        (DenseDataset::Float32(c), DenseDataset::Float32(q)) => ground_truth(c, q, a.k, a.metric)?,
        (DenseDataset::Int8(c), DenseDataset::Int8(q)) => ground_truth(c, q, a.k, a.metric)?,
        _ => return Err(usage("corpus and queries must have the same element kind")),
    };
    save_ivecs(&a.out, &gt).with_context(|| format!("writing {}", a.out.display()))?;
    println!("wrote {} neighbor lists of depth {}", gt.len(), gt.depth());
    Ok(())
}

fn cmd_build(a: BuildArgs, seed: u64, threads: usize) -> Result<()> {
    let config = HnswConfig::new(a.m, a.efc, seed);
    config.validate().map_err(|e| usage(e.to_string()))?;
    let corpus = read_dense(&a.corpus, a.normalize)?;
    if corpus.n() == 0 {
        return Err(usage("corpus is empty"));
    }
    let start = Instant::now();
    let report = match &corpus {
        DenseDataset::Float32(c) => {
            let index = HnswIndex::build_with_threads(c, config, a.metric, threads)?;
            save_index(&a.out, &index).with_context(|| format!("writing {}", a.out.display()))?;
            index.memory_report()
        }
        DenseDataset::Int8(c) => {
            let index = HnswIndex::build_with_threads(c, config, a.metric, threads)?.with_bits(a.bits);
            save_index(&a.out, &index).with_context(|| format!("writing {}", a.out.display()))?;
            index.memory_report()
        }
    };
    println!(
        "built {} index over {} vectors in {:.2}s: {} bytes (graph {}, vectors {})",
        corpus.kind().name(),
        corpus.n(),
        start.elapsed().as_secs_f64(),
        report.total,
        report.graph_bytes,
        report.vector_bytes
    );
    Ok(())
}

fn search_all<T: Element>(index: &HnswIndex<T>, queries: &Dataset<T>, params: SearchParams) -> Result<(f64, Vec<Vec<u32>>)> {
    if queries.is_empty() {
        return Err(usage("no queries"));
    }
    let rows: Vec<&[T]> = queries.rows().collect();
    let (report, results) = measure_qps(&rows, DEFAULT_WARMUP.min(rows.len()), |q| index.search(q, params))?;
    let found = results.into_iter().map(|r| r.map(|r| ids(&r))).collect::<quantann::Result<Vec<_>>>()?;
    Ok((report.qps, found))
}

fn cmd_search(a: SearchArgs) -> Result<()> {
    let params = SearchParams::new(a.efs, a.k);
    params.validate().map_err(|e| usage(e.to_string()))?;
    let index = load_index(&a.index).with_context(|| format!("reading {}", a.index.display()))?;
    let queries = read_dense(&a.queries, a.normalize)?;
    let (qps, found) = match (&index, queries) {
        (AnyIndex::Float32(ix), DenseDataset::Float32(q)) => search_all(ix, &q, params)?,
        (AnyIndex::Int8(ix), DenseDataset::Int8(q)) => search_all(ix, &q, params)?,
        (AnyIndex::Int8(ix), DenseDataset::Float32(q)) => {
            let Some(path) = &a.params else {
                return Err(usage("int8 index needs int8 queries or --params to quantize float queries"));
            };
            let qp = load_params(path).with_context(|| format!("reading {}", path.display()))?;
            search_all(ix, &qp.quantize_dataset(&q)?, params)?
        }
        (AnyIndex::Float32(_), DenseDataset::Int8(_)) => return Err(usage("float index cannot take int8 queries")),
    };
    eprintln!("{} queries, {qps:.1} QPS (single thread)", found.len());
    if let Some(gt) = &a.gt {
        let gt = load_ivecs(gt).with_context(|| format!("reading {}", gt.display()))?;
        let report = recall_at_k(&gt, &found, a.k)?;
        println!("recall@{} = {:.4}", a.k, report.mean);
    }
    match &a.out {
        Some(out) => {
            let gt = GroundTruth::new(found);
            save_ivecs(out, &gt).with_context(|| format!("writing {}", out.display()))?;
        }
        None if a.gt.is_none() => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            for (qi, list) in found.iter().enumerate() {
                let line: Vec<String> = list.iter().map(u32::to_string).collect();
                writeln!(w, "{qi}\t{}", line.join(" "))?;
            }
            w.flush()?;
        }
        None => {}
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs, seed: u64, threads: usize) -> Result<()> {
    let cfg = SweepConfig {
        ms: a.ms,
        efcs: a.efcs,
        efs: a.efs,
        metric: a.metric,
        bits: a.bits,
        mode: a.mode,
        k: a.k,
        seed,
        build_threads: threads,
        warmup: a.warmup,
        repetitions: a.reps,
        include_exhaustive: a.exhaustive,
    };
    if cfg.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    for &efs in &cfg.efs {
        SearchParams::new(efs, cfg.k).validate().map_err(|e| usage(e.to_string()))?;
    }
    for &m in &cfg.ms {
        for &efc in &cfg.efcs {
            HnswConfig::new(m, efc, seed).validate().map_err(|e| usage(e.to_string()))?;
        }
    }

    let corpus = read_fvecs(&a.corpus, a.normalize)?;
    let queries = read_fvecs(&a.queries, a.normalize)?;
    if corpus.is_empty() || queries.is_empty() {
        return Err(usage("corpus and queries must be non-empty"));
    }
    let gt = match &a.gt {
        Some(path) => load_ivecs(path).with_context(|| format!("reading {}", path.display()))?,
        None => batch_ground_truth(&corpus, &queries, cfg.k, cfg.metric)?,
    };
    gt.validate(corpus.n())?;
    let data = PairedData::quantize(corpus, queries, cfg.bits, cfg.mode)?;
    let result = run_sweep(&data, &gt, &cfg)?;

    match &a.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            result.write_table(BufWriter::new(file), b'\t')?;
        }
        None => result.write_table(io::stdout().lock(), b'\t')?,
    }
    if let Some(path) = &a.csv {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        result.write_table(BufWriter::new(file), b',')?;
    }
    eprint!("{}", result.build_memory_table());
    Ok(())
}
