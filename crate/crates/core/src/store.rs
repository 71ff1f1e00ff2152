//! In-memory dense datasets and ground-truth neighbor lists.
//!
//! A [`Dataset`] is a row-major `n x d` matrix. Two element types are
//! supported: `f32` for raw embeddings and `i8` for quantized codes. The
//! [`DenseDataset`] enum erases the element type where a caller only learns
//! it at runtime (file loading, the CLI).

use std::fmt::Debug;

use crate::distance;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElemKind {
    Float32,
    Int8,
}

impl ElemKind {
    /// Bytes used to store one element.
    pub const fn size(self) -> usize {
        match self {
            ElemKind::Float32 => 4,
            ElemKind::Int8 => 1,
        }
    }

    pub const fn code(self) -> u8 {
        match self {
            ElemKind::Float32 => 0,
            ElemKind::Int8 => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ElemKind::Float32),
            1 => Some(ElemKind::Int8),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElemKind::Float32 => "fp32",
            ElemKind::Int8 => "int8",
        }
    }
}

/// Scalar type a dataset can hold, together with its distance kernels.
///
/// Scores are widened to `f64`; every `i32` integer result converts exactly.
pub trait Element: Copy + Default + PartialEq + Debug + Send + Sync + 'static {
    const KIND: ElemKind;

    fn dot(a: &[Self], b: &[Self]) -> f64;
    fn l2sq(a: &[Self], b: &[Self]) -> f64;

    fn to_le(values: &[Self], out: &mut Vec<u8>);
    fn from_le(bytes: &[u8]) -> Vec<Self>;
}

impl Element for f32 {
    const KIND: ElemKind = ElemKind::Float32;

    #[inline]
    fn dot(a: &[f32], b: &[f32]) -> f64 {
        distance::dot_f32(a, b) as f64
    }

    #[inline]
    fn l2sq(a: &[f32], b: &[f32]) -> f64 {
        distance::l2sq_f32(a, b) as f64
    }

    fn to_le(values: &[f32], out: &mut Vec<u8>) {
        out.reserve(values.len() * 4);
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn from_le(bytes: &[u8]) -> Vec<f32> {
        bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect()
    }
}

impl Element for i8 {
    const KIND: ElemKind = ElemKind::Int8;

    #[inline]
    fn dot(a: &[i8], b: &[i8]) -> f64 {
        distance::dot_i8(a, b) as f64
    }

    #[inline]
    fn l2sq(a: &[i8], b: &[i8]) -> f64 {
        distance::l2sq_i8(a, b) as f64
    }

    fn to_le(values: &[i8], out: &mut Vec<u8>) {
        out.extend(values.iter().map(|&v| v as u8));
    }

    fn from_le(bytes: &[u8]) -> Vec<i8> {
        bytes.iter().map(|&b| b as i8).collect()
    }
}

/// Row-major matrix of `n` vectors with `d` components each.
///
/// An empty dataset may report `d == 0` (e.g. loaded from an empty file);
/// every non-empty dataset has `d >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    n: usize,
    d: usize,
    data: Vec<T>,
}

/// Queries share the dataset representation.
pub type QuerySet<T> = Dataset<T>;

impl<T: Element> Dataset<T> {
    pub fn new(d: usize, data: Vec<T>) -> Result<Self> {
        if d == 0 {
            if data.is_empty() {
                return Ok(Self::empty(0));
            }
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if !data.len().is_multiple_of(d) {
            return Err(Error::invalid(format!(
                "data length {} is not a multiple of d = {d}",
                data.len()
            )));
        }
        Ok(Self { n: data.len() / d, d, data })
    }

    pub fn empty(d: usize) -> Self {
        Self { n: 0, d, data: Vec::new() }
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Ok(Self::empty(0));
        };
        let d = first.as_ref().len();
        let mut data = Vec::with_capacity(d * rows.len());
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::new(d, data)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        (0..self.n).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Copy of the first `count` rows (or all rows if fewer exist).
    pub fn head(&self, count: usize) -> Self {
        let n = count.min(self.n);
        Self { n, d: self.d, data: self.data[..n * self.d].to_vec() }
    }
}

impl Dataset<f32> {
    /// Rows scaled to unit Euclidean length, for angular search on
    /// pre-normalized data.
    pub fn normalized(&self) -> Result<Self> {
        let mut data = self.data.clone();
        if self.d > 0 {
            for (id, row) in data.chunks_exact_mut(self.d).enumerate() {
                let norm = distance::norm(row);
                if !(norm > 0.0) {
                    return Err(Error::ZeroNorm { id });
                }
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
        Ok(Self { n: self.n, d: self.d, data })
    }
}

/// A dataset whose element type is only known at runtime.
#[derive(Debug, Clone, PartialEq)]
pub enum DenseDataset {
    Float32(Dataset<f32>),
    Int8(Dataset<i8>),
}

impl DenseDataset {
    pub fn kind(&self) -> ElemKind {
        match self {
            DenseDataset::Float32(_) => ElemKind::Float32,
            DenseDataset::Int8(_) => ElemKind::Int8,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            DenseDataset::Float32(ds) => ds.n(),
            DenseDataset::Int8(ds) => ds.n(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DenseDataset::Float32(ds) => ds.dim(),
            DenseDataset::Int8(ds) => ds.dim(),
        }
    }

    pub fn as_f32(&self) -> Result<&Dataset<f32>> {
        match self {
            DenseDataset::Float32(ds) => Ok(ds),
            DenseDataset::Int8(_) => Err(Error::ElementKindMismatch {
                expected: ElemKind::Float32,
                found: ElemKind::Int8,
            }),
        }
    }

    pub fn as_i8(&self) -> Result<&Dataset<i8>> {
        match self {
            DenseDataset::Int8(ds) => Ok(ds),
            DenseDataset::Float32(_) => Err(Error::ElementKindMismatch {
                expected: ElemKind::Int8,
                found: ElemKind::Float32,
            }),
        }
    }
}

impl From<Dataset<f32>> for DenseDataset {
    fn from(ds: Dataset<f32>) -> Self {
        DenseDataset::Float32(ds)
    }
}

impl From<Dataset<i8>> for DenseDataset {
    fn from(ds: Dataset<i8>) -> Self {
        DenseDataset::Int8(ds)
    }
}

/// Per-query ordered neighbor ids (0-based corpus indices).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundTruth {
    lists: Vec<Vec<u32>>,
}

impl GroundTruth {
    pub fn new(lists: Vec<Vec<u32>>) -> Self {
        Self { lists }
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn lists(&self) -> &[Vec<u32>] {
        &self.lists
    }

    pub fn get(&self, query: usize) -> &[u32] {
        &self.lists[query]
    }

    /// Shortest list length, i.e. the usable `k` depth.
    pub fn depth(&self) -> usize {
        self.lists.iter().map(Vec::len).min().unwrap_or(0)
    }

    /// Checks that every id addresses a corpus of `n` items and that no list
    /// repeats an id.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (q, list) in self.lists.iter().enumerate() {
            seen.clear();
            for &id in list {
                if id as usize >= n {
                    return Err(Error::invalid(format!(
                        "ground truth for query {q} references id {id} >= n = {n}"
                    )));
                }
                if !seen.insert(id) {
                    return Err(Error::invalid(format!(
                        "ground truth for query {q} repeats id {id}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn into_lists(self) -> Vec<Vec<u32>> {
        self.lists
    }
}
