//! Per-dimension clamped linear quantization to signed `B`-bit integers.
//!
//! Each dimension `i` has a center `k_i` and a window `[lo_i, hi_i]`. A value
//! inside the window maps to
//!
//! ```text
//! floor(2^B * (x - k_i) / (hi_i - lo_i))
//! ```
//!
//! clamped to `[-2^(B-1), 2^(B-1) - 1]`; values below the window map to the
//! minimum code and values above it to the maximum code. The mapping is
//! monotone per dimension, so the order of coordinates is never inverted,
//! only merged into shared bins.
//!
//! Windows are fitted from Gaussian maximum-likelihood statistics in one of
//! three modes:
//!
//! * [`Mode::SigmaClamp`]: `mu_i +/- sigma_i`
//! * [`Mode::UniformSigmaClamp`]: pooled `mu +/- sigma`, shared by every dimension
//! * [`Mode::AbsMax`]: `mu_i +/- max|x - mu_i|` after trimming both tails

mod file;
mod stats;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

pub use file::{decode_params, encode_params, load_params, save_params, PARAMS_MAGIC, PARAMS_VERSION};
pub use stats::{estimate_stats, DimensionStats, TRIM_QUANTILE};

use crate::error::{Error, Result};
use crate::store::Dataset;

/// Windows narrower than this are treated as degenerate.
pub const DEGENERATE_WIDTH: f64 = 1e-12;
/// Half-width given to degenerate windows.
pub const DEGENERATE_HALF_WIDTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    SigmaClamp,
    AbsMax,
    UniformSigmaClamp,
}

impl Mode {
    pub const fn code(self) -> u8 {
        match self {
            Mode::SigmaClamp => 0,
            Mode::AbsMax => 1,
            Mode::UniformSigmaClamp => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Mode::SigmaClamp),
            1 => Some(Mode::AbsMax),
            2 => Some(Mode::UniformSigmaClamp),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::SigmaClamp => "sigma",
            Mode::AbsMax => "absmax",
            Mode::UniformSigmaClamp => "uniform",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sigma" => Ok(Mode::SigmaClamp),
            "absmax" => Ok(Mode::AbsMax),
            "uniform" => Ok(Mode::UniformSigmaClamp),
            other => Err(Error::invalid(format!("unknown quantization mode {other:?}"))),
        }
    }
}

/// Fitted quantization constants.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerParams {
    bits: u8,
    mode: Mode,
    center: Vec<f32>,
    lower: Vec<f32>,
    upper: Vec<f32>,
}

/// Result of [`fit`]: the params plus the dimensions whose window had to be
/// widened because the data had (near) zero spread.
#[derive(Debug, Clone, PartialEq)]
pub struct Fitted {
    pub params: QuantizerParams,
    pub degenerate: Vec<usize>,
}

fn check_bits(bits: u8) -> Result<()> {
    if !(1..=8).contains(&bits) {
        return Err(Error::invalid(format!("bit width must be in 1..=8, got {bits}")));
    }
    Ok(())
}

/// Builds the f32 window `center +/- half_width`; returns `(k, lo, hi, degenerate)`.
fn window(center: f64, half_width: f64) -> (f32, f32, f32, bool) {
    let mut degenerate = !(2.0 * half_width >= DEGENERATE_WIDTH);
    let half = if degenerate { DEGENERATE_HALF_WIDTH } else { half_width };
    let k = center as f32;
    let mut lo = (center - half) as f32;
    let mut hi = (center + half) as f32;
    if !(lo < hi) || lo > k || hi < k {
        // The window collapsed when rounded to f32 (large |center|).
        lo = k.next_down();
        hi = k.next_up();
        degenerate = true;
    }
    (k, lo, hi, degenerate)
}

pub fn fit(stats: &DimensionStats, bits: u8, mode: Mode) -> Result<Fitted> {
    check_bits(bits)?;
    let d = stats.dim();
    let mut center = Vec::with_capacity(d);
    let mut lower = Vec::with_capacity(d);
    let mut upper = Vec::with_capacity(d);
    let mut degenerate = Vec::new();
    for i in 0..d {
        let (c, h) = match mode {
            Mode::SigmaClamp => (stats.mean[i], stats.std[i]),
            Mode::UniformSigmaClamp => (stats.pooled_mean, stats.pooled_std),
            Mode::AbsMax => (stats.mean[i], stats.trimmed_absmax[i]),
        };
        let (k, lo, hi, degen) = window(c, h);
        if degen {
            degenerate.push(i);
        }
        center.push(k);
        lower.push(lo);
        upper.push(hi);
    }
    Ok(Fitted { params: QuantizerParams { bits, mode, center, lower, upper }, degenerate })
}

/// Convenience: estimate statistics on `ds` and fit.
pub fn fit_dataset(ds: &Dataset<f32>, bits: u8, mode: Mode) -> Result<Fitted> {
    fit(&estimate_stats(ds)?, bits, mode)
}

impl QuantizerParams {
    /// Params from explicit per-dimension constants.
    pub fn new(bits: u8, mode: Mode, center: Vec<f32>, lower: Vec<f32>, upper: Vec<f32>) -> Result<Self> {
        check_bits(bits)?;
        if center.len() != lower.len() || center.len() != upper.len() {
            return Err(Error::invalid("center, lower and upper must have the same length"));
        }
        for (i, ((&k, &lo), &hi)) in center.iter().zip(&lower).zip(&upper).enumerate() {
            if !(k.is_finite() && lo.is_finite() && hi.is_finite()) || !(lo < hi) {
                return Err(Error::invalid(format!(
                    "dimension {i}: need finite constants with lower < upper, got k={k} lower={lo} upper={hi}"
                )));
            }
        }
        Ok(Self { bits, mode, center, lower, upper })
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f32] {
        &self.center
    }

    pub fn lower(&self) -> &[f32] {
        &self.lower
    }

    pub fn upper(&self) -> &[f32] {
        &self.upper
    }

    /// Smallest code, `-2^(B-1)`.
    pub fn min_code(&self) -> i32 {
        -(1 << (self.bits - 1))
    }

    /// Largest code, `2^(B-1) - 1`.
    pub fn max_code(&self) -> i32 {
        (1 << (self.bits - 1)) - 1
    }

    fn levels(&self) -> f64 {
        (1u32 << self.bits) as f64
    }

    /// Width of one quantization bin in dimension `dim`.
    pub fn bin_width(&self, dim: usize) -> f64 {
        (self.upper[dim] as f64 - self.lower[dim] as f64) / self.levels()
    }

    #[inline]
    pub fn quantize_value(&self, x: f32, dim: usize) -> i8 {
        let (lo, hi) = (self.lower[dim], self.upper[dim]);
        if x < lo {
            return self.min_code() as i8;
        }
        if x > hi {
            return self.max_code() as i8;
        }
        let k = self.center[dim] as f64;
        let width = hi as f64 - lo as f64;
        let code = (self.levels() * (x as f64 - k) / width).floor();
        code.clamp(self.min_code() as f64, self.max_code() as f64) as i8
    }

    /// Bin-center reconstruction `k + (q + 0.5) * width / 2^B`.
    pub fn dequantize_value(&self, q: i8, dim: usize) -> f64 {
        self.center[dim] as f64 + (q as f64 + 0.5) * self.bin_width(dim)
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: d });
        }
        Ok(())
    }

    pub fn quantize_into(&self, v: &[f32], out: &mut [i8]) -> Result<()> {
        self.check_dim(v.len())?;
        self.check_dim(out.len())?;
        for (i, (o, &x)) in out.iter_mut().zip(v).enumerate() {
            *o = self.quantize_value(x, i);
        }
        Ok(())
    }

    /// Quantizes a single query vector with the same map used for the corpus.
    pub fn quantize_query(&self, v: &[f32]) -> Result<Vec<i8>> {
        let mut out = vec![0i8; v.len()];
        self.quantize_into(v, &mut out)?;
        Ok(out)
    }

    pub fn quantize_dataset(&self, ds: &Dataset<f32>) -> Result<Dataset<i8>> {
        if ds.is_empty() {
            return Ok(Dataset::empty(self.dim()));
        }
        self.check_dim(ds.dim())?;
        let d = ds.dim();
        let mut data = vec![0i8; ds.n() * d];
        data.par_chunks_mut(d)
            .zip(ds.as_slice().par_chunks(d))
            .for_each(|(out, row)| {
                for (i, (o, &x)) in out.iter_mut().zip(row).enumerate() {
                    *o = self.quantize_value(x, i);
                }
            });
        Dataset::new(d, data)
    }

    pub fn dequantize_dataset(&self, ds: &Dataset<i8>) -> Result<Dataset<f32>> {
        if ds.is_empty() {
            return Ok(Dataset::empty(self.dim()));
        }
        self.check_dim(ds.dim())?;
        let data = ds
            .rows()
            .flat_map(|row| row.iter().enumerate().map(|(i, &q)| self.dequantize_value(q, i) as f32))
            .collect();
        Dataset::new(ds.dim(), data)
    }
}
