//! Distance kernels for `f32` and `i8` vectors.
//!
//! Every metric is expressed as a score where smaller means closer, so a
//! single top-k routine serves inner-product and L2 search alike:
//!
//! * `InnerProduct`: `-(a . b)`
//! * `L2Squared`: `sum (a_i - b_i)^2`
//! * `Angular`: `1 - (a . b) / (|a| |b|)` using the norms of the stored
//!   representation (for quantized data, the norms of the integer codes)
//!
//! The `i8` kernels widen every product to 32 bits and accumulate in `i32`.
//! Integer scores are not numerically comparable with float scores of the
//! original vectors; only the induced rankings are.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::store::Element;

/// Largest int8 dimension whose dot product cannot overflow an `i32`
/// accumulator: `d * 128 * 128 <= i32::MAX`.
pub const MAX_I8_DIM: usize = (i32::MAX as usize) / (128 * 128);

/// Largest int8 dimension for which `l2sq_i8` is exact on adversarial input
/// (`d * 255^2 <= i32::MAX`). Real quantized data stays far below the bound
/// well past this dimension.
pub const MAX_I8_L2_WORST_CASE_DIM: usize = (i32::MAX as usize) / (255 * 255);

const LANES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    InnerProduct,
    L2Squared,
    Angular,
}

impl Metric {
    pub const fn code(self) -> u8 {
        match self {
            Metric::InnerProduct => 0,
            Metric::L2Squared => 1,
            Metric::Angular => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Metric::InnerProduct),
            1 => Some(Metric::L2Squared),
            2 => Some(Metric::Angular),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::InnerProduct => "ip",
            Metric::L2Squared => "l2",
            Metric::Angular => "angular",
        }
    }

    pub fn needs_norms(self) -> bool {
        self == Metric::Angular
    }

    /// Unchecked score used by the search loops. `norm_a`/`norm_b` are only
    /// read for `Angular`.
    #[inline(always)]
    pub fn score<T: Element>(self, a: &[T], b: &[T], norm_a: f32, norm_b: f32) -> f64 {
        match self {
            Metric::InnerProduct => -T::dot(a, b),
            Metric::L2Squared => T::l2sq(a, b),
            Metric::Angular => 1.0 - T::dot(a, b) / (norm_a as f64 * norm_b as f64),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ip" | "mip" | "inner-product" | "inner_product" | "dot" => Ok(Metric::InnerProduct),
            "l2" | "l2sq" | "euclidean" => Ok(Metric::L2Squared),
            "angular" | "cosine" => Ok(Metric::Angular),
            other => Err(Error::invalid(format!("unknown metric {other:?}"))),
        }
    }
}

#[inline]
pub fn dot_f32(a: &[f32], b: &[f32]) -> f32 {
    assert_eq!(a.len(), b.len(), "dot_f32: dimension mismatch");
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the CPU supports AVX2.
        return unsafe { avx2::dot_f32(a, b) };
    }
    dot_f32_body(a, b)
}

#[inline(always)]
fn dot_f32_body(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0f32; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let (ta, tb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for j in 0..LANES {
            acc[j] += x[j] * y[j];
        }
    }
    let mut sum: f32 = acc.iter().sum();
    for (x, y) in ta.iter().zip(tb) {
        sum += x * y;
    }
    sum
}

#[inline]
pub fn l2sq_f32(a: &[f32], b: &[f32]) -> f32 {
    assert_eq!(a.len(), b.len(), "l2sq_f32: dimension mismatch");
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the CPU supports AVX2.
        return unsafe { avx2::l2sq_f32(a, b) };
    }
    l2sq_f32_body(a, b)
}

#[inline(always)]
fn l2sq_f32_body(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0f32; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let (ta, tb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for j in 0..LANES {
            let diff = x[j] - y[j];
            acc[j] += diff * diff;
        }
    }
    let mut sum: f32 = acc.iter().sum();
    for (x, y) in ta.iter().zip(tb) {
        let diff = x - y;
        sum += diff * diff;
    }
    sum
}

/// Integer dot product; exact for `d <= MAX_I8_DIM`.
#[inline]
pub fn dot_i8(a: &[i8], b: &[i8]) -> i32 {
    assert_eq!(a.len(), b.len(), "dot_i8: dimension mismatch");
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the CPU supports AVX2.
        return unsafe { avx2::dot_i8(a, b) };
    }
    dot_i8_body(a, b)
}

#[inline(always)]
fn dot_i8_body(a: &[i8], b: &[i8]) -> i32 {
    let mut acc = [0i32; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let (ta, tb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for j in 0..LANES {
            acc[j] += (x[j] as i16 * y[j] as i16) as i32;
        }
    }
    let mut sum: i32 = acc.iter().sum();
    for (&x, &y) in ta.iter().zip(tb) {
        sum += x as i32 * y as i32;
    }
    sum
}

#[inline]
pub fn l2sq_i8(a: &[i8], b: &[i8]) -> i32 {
    assert_eq!(a.len(), b.len(), "l2sq_i8: dimension mismatch");
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the CPU supports AVX2.
        return unsafe { avx2::l2sq_i8(a, b) };
    }
    l2sq_i8_body(a, b)
}

#[inline(always)]
fn l2sq_i8_body(a: &[i8], b: &[i8]) -> i32 {
    let mut acc = [0i32; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let (ta, tb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for j in 0..LANES {
            let diff = x[j] as i32 - y[j] as i32;
            acc[j] += diff * diff;
        }
    }
    let mut sum: i32 = acc.iter().sum();
    for (&x, &y) in ta.iter().zip(tb) {
        let diff = x as i32 - y as i32;
        sum += diff * diff;
    }
    sum
}

#[cfg(target_arch = "x86_64")]
#[inline]
fn has_avx2() -> bool {
    std::arch::is_x86_feature_detected!("avx2")
}

/// AVX2 variants. The float kernels are the portable bodies recompiled with
/// AVX2 enabled; lane layout and summation order are unchanged, so results
/// are bit-identical to the baseline build.
#[cfg(target_arch = "x86_64")]
mod avx2 {
    use std::arch::x86_64::*;

    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn dot_f32(a: &[f32], b: &[f32]) -> f32 {
        super::dot_f32_body(a, b)
    }

    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn l2sq_f32(a: &[f32], b: &[f32]) -> f32 {
        super::l2sq_f32_body(a, b)
    }

    // The integer kernels are written out by hand: widening to i16 and
    // using `madd` halves the work of the auto-vectorized version. Integer
    // sums are exact, so the result matches the portable kernel.

    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn dot_i8(a: &[i8], b: &[i8]) -> i32 {
        let n = a.len();
        let mut acc0 = _mm256_setzero_si256();
        let mut acc1 = _mm256_setzero_si256();
        let mut i = 0;
        while i + 32 <= n {
            let (x0, y0) = (widen(a, i), widen(b, i));
            let (x1, y1) = (widen(a, i + 16), widen(b, i + 16));
            acc0 = _mm256_add_epi32(acc0, _mm256_madd_epi16(x0, y0));
            acc1 = _mm256_add_epi32(acc1, _mm256_madd_epi16(x1, y1));
            i += 32;
        }
        if i + 16 <= n {
            acc0 = _mm256_add_epi32(acc0, _mm256_madd_epi16(widen(a, i), widen(b, i)));
            i += 16;
        }
        let mut sum = hsum(_mm256_add_epi32(acc0, acc1));
        for j in i..n {
            sum += a[j] as i32 * b[j] as i32;
        }
        sum
    }

    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn l2sq_i8(a: &[i8], b: &[i8]) -> i32 {
        let n = a.len();
        let mut acc0 = _mm256_setzero_si256();
        let mut acc1 = _mm256_setzero_si256();
        let mut i = 0;
        while i + 32 <= n {
            let d0 = _mm256_sub_epi16(widen(a, i), widen(b, i));
            let d1 = _mm256_sub_epi16(widen(a, i + 16), widen(b, i + 16));
            acc0 = _mm256_add_epi32(acc0, _mm256_madd_epi16(d0, d0));
            acc1 = _mm256_add_epi32(acc1, _mm256_madd_epi16(d1, d1));
            i += 32;
        }
        if i + 16 <= n {
            let d0 = _mm256_sub_epi16(widen(a, i), widen(b, i));
            acc0 = _mm256_add_epi32(acc0, _mm256_madd_epi16(d0, d0));
            i += 16;
        }
        let mut sum = hsum(_mm256_add_epi32(acc0, acc1));
        for j in i..n {
            let diff = a[j] as i32 - b[j] as i32;
            sum += diff * diff;
        }
        sum
    }

    /// Sign-extends 16 bytes starting at `v[i]` to i16 lanes.
    #[inline]
    #[target_feature(enable = "avx2")]
    unsafe fn widen(v: &[i8], i: usize) -> __m256i {
        debug_assert!(i + 16 <= v.len());
        // SAFETY: the caller keeps `i + 16 <= v.len()`.
        _mm256_cvtepi8_epi16(unsafe { _mm_loadu_si128(v.as_ptr().add(i).cast()) })
    }

    #[inline]
    #[target_feature(enable = "avx2")]
    fn hsum(v: __m256i) -> i32 {
        let s = _mm_add_epi32(_mm256_castsi256_si128(v), _mm256_extracti128_si256::<1>(v));
        let s = _mm_add_epi32(s, _mm_shuffle_epi32::<0b01_00_11_10>(s));
        let s = _mm_add_epi32(s, _mm_shuffle_epi32::<0b10_11_00_01>(s));
        _mm_cvtsi128_si32(s)
    }
}

/// Euclidean norm of a stored vector.
#[inline]
pub fn norm<T: Element>(v: &[T]) -> f32 {
    T::dot(v, v).sqrt() as f32
}

/// Cosine distance from precomputed norms.
pub fn angular<T: Element>(a: &[T], b: &[T], norm_a: f32, norm_b: f32) -> Result<f64> {
    check_dims(a, b)?;
    if !(norm_a > 0.0) {
        return Err(Error::ZeroNorm { id: 0 });
    }
    if !(norm_b > 0.0) {
        return Err(Error::ZeroNorm { id: 1 });
    }
    Ok(Metric::Angular.score(a, b, norm_a, norm_b))
}

fn check_dims<T>(a: &[T], b: &[T]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok(())
}

/// Checked distance between two vectors. For `Angular`, `norms` may carry
/// precomputed `(|a|, |b|)`; otherwise they are computed here.
pub fn distance<T: Element>(metric: Metric, a: &[T], b: &[T], norms: Option<(f32, f32)>) -> Result<f64> {
    check_dims(a, b)?;
    match metric {
        Metric::Angular => {
            let (na, nb) = norms.unwrap_or_else(|| (norm(a), norm(b)));
            angular(a, b, na, nb)
        }
        _ => Ok(metric.score(a, b, 0.0, 0.0)),
    }
}
