use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::store::Dataset;

/// Fraction trimmed from each tail before taking the absolute maximum.
pub const TRIM_QUANTILE: f64 = 0.001;

/// Per-dimension Gaussian maximum-likelihood estimates plus range statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionStats {
    pub n: usize,
    pub mean: Vec<f64>,
    /// Population (divide-by-n) standard deviation.
    pub std: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// `max |x - mean|` over the values kept after trimming
    /// `TRIM_QUANTILE` from both tails of the dimension.
    pub trimmed_absmax: Vec<f64>,
    pub pooled_mean: f64,
    pub pooled_std: f64,
}

impl DimensionStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

struct Column {
    mean: f64,
    std: f64,
    min: f64,
    max: f64,
    trimmed_absmax: f64,
}

/// Indices of the first and last kept order statistic after trimming.
fn trim_bounds(n: usize) -> (usize, usize) {
    let last = (n - 1) as f64;
    let lo = (TRIM_QUANTILE * last).floor() as usize;
    let hi = ((1.0 - TRIM_QUANTILE) * last).ceil() as usize;
    (lo, hi.min(n - 1))
}

fn column_stats(mut values: Vec<f64>) -> Column {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    values.sort_unstable_by(f64::total_cmp);
    let (lo, hi) = trim_bounds(values.len());
    let min = values[0];
    let max = values[values.len() - 1];
    // Rounding in the mean can leave it a hair outside [min, max] for
    // constant columns.
    let mean = mean.clamp(min, max);
    let trimmed_absmax = (values[lo] - mean).abs().max((values[hi] - mean).abs());
    Column { mean, std: var.sqrt(), min, max, trimmed_absmax }
}

pub fn estimate_stats(ds: &Dataset<f32>) -> Result<DimensionStats> {
    let n = ds.n();
    if n < 2 {
        return Err(Error::TooFewSamples { required: 2, found: n });
    }
    let d = ds.dim();
    let columns: Vec<Column> = (0..d)
        .into_par_iter()
        .map(|i| column_stats(ds.rows().map(|r| r[i] as f64).collect()))
        .collect();

    // Every dimension has n samples, so the pooled moments follow from the
    // per-dimension ones (law of total variance).
    let pooled_mean = columns.iter().map(|c| c.mean).sum::<f64>() / d as f64;
    let pooled_var = columns
        .iter()
        .map(|c| c.std * c.std + (c.mean - pooled_mean).powi(2))
        .sum::<f64>()
        / d as f64;

    Ok(DimensionStats {
        n,
        mean: columns.iter().map(|c| c.mean).collect(),
        std: columns.iter().map(|c| c.std).collect(),
        min: columns.iter().map(|c| c.min).collect(),
        max: columns.iter().map(|c| c.max).collect(),
        trimmed_absmax: columns.iter().map(|c| c.trimmed_absmax).collect(),
        pooled_mean,
        pooled_std: pooled_var.sqrt(),
    })
}
