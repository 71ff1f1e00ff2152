//! Index file format. Little-endian throughout.
//!
//! ```text
//! "QHNSW1"                       6 bytes magic
//! version u8, elem u8, metric u8, bits u8
//! d u32, n u64, M u32, EFC u32, seed u64, entry u32, max_level u32
//! level[n]                       u32 each
//! for each node, for layer 0..=level:
//!     degree u32, then cap slots of u32 ids (cap = 2M on layer 0, M above;
//!     unused slots hold 0xFFFFFFFF)
//! vectors                        n * d elements (f32 or i8)
//! norms[n]                       f32 each, angular metric only
//! ```

use std::fs;
use std::path::Path;

use super::graph::{Graph, EMPTY_SLOT};
use super::memory::HEADER_BYTES;
use super::{HnswConfig, HnswIndex, MemoryReport, SearchParams};
use crate::distance::Metric;
use crate::error::{Error, Result};
use crate::exact::TopKResult;
use crate::store::{ElemKind, Element};

pub const INDEX_MAGIC: &[u8; 6] = b"QHNSW1";
pub const INDEX_VERSION: u8 = 1;

pub fn encode_index<T: Element>(index: &HnswIndex<T>) -> Vec<u8> {
    let report = index.memory_report();
    let mut out = Vec::with_capacity(report.total as usize);
    let g = &index.graph;
    out.extend_from_slice(INDEX_MAGIC);
    out.extend_from_slice(&[INDEX_VERSION, T::KIND.code(), index.metric.code(), index.bits]);
    out.extend_from_slice(&(index.d as u32).to_le_bytes());
    out.extend_from_slice(&(index.len() as u64).to_le_bytes());
    out.extend_from_slice(&(index.config.m as u32).to_le_bytes());
    out.extend_from_slice(&(index.config.ef_construction as u32).to_le_bytes());
    out.extend_from_slice(&index.config.seed.to_le_bytes());
    out.extend_from_slice(&g.entry.to_le_bytes());
    out.extend_from_slice(&g.max_level.to_le_bytes());
    for &l in &g.levels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    for node in 0..index.len() {
        for layer in 0..=g.levels[node] as usize {
            let list = g.neighbors(node, layer);
            out.extend_from_slice(&(list.len() as u32).to_le_bytes());
            for &id in list {
                out.extend_from_slice(&id.to_le_bytes());
            }
            for _ in list.len()..g.cap(layer) {
                out.extend_from_slice(&EMPTY_SLOT.to_le_bytes());
            }
        }
    }
    T::to_le(&index.vectors, &mut out);
    for &nrm in &index.norms {
        out.extend_from_slice(&nrm.to_le_bytes());
    }
    debug_assert_eq!(out.len() as u64, report.total);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Corrupt(format!("truncated while reading {what} at byte {}", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }
}

/// An index whose element kind is only known at runtime.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyIndex {
    Float32(HnswIndex<f32>),
    Int8(HnswIndex<i8>),
}

impl AnyIndex {
    pub fn kind(&self) -> ElemKind {
        match self {
            AnyIndex::Float32(_) => ElemKind::Float32,
            AnyIndex::Int8(_) => ElemKind::Int8,
        }
    }

    pub fn metric(&self) -> Metric {
        match self {
            AnyIndex::Float32(i) => i.metric(),
            AnyIndex::Int8(i) => i.metric(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            AnyIndex::Float32(i) => i.dim(),
            AnyIndex::Int8(i) => i.dim(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AnyIndex::Float32(i) => i.len(),
            AnyIndex::Int8(i) => i.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn memory_report(&self) -> MemoryReport {
        match self {
            AnyIndex::Float32(i) => i.memory_report(),
            AnyIndex::Int8(i) => i.memory_report(),
        }
    }

    pub fn into_f32(self) -> Result<HnswIndex<f32>> {
        match self {
            AnyIndex::Float32(i) => Ok(i),
            AnyIndex::Int8(_) => Err(Error::ElementKindMismatch { expected: ElemKind::Float32, found: ElemKind::Int8 }),
        }
    }

    pub fn into_i8(self) -> Result<HnswIndex<i8>> {
        match self {
            AnyIndex::Int8(i) => Ok(i),
            AnyIndex::Float32(_) => Err(Error::ElementKindMismatch { expected: ElemKind::Int8, found: ElemKind::Float32 }),
        }
    }

    pub fn search_f32(&self, query: &[f32], params: SearchParams) -> Result<TopKResult> {
        match self {
            AnyIndex::Float32(i) => i.search(query, params),
            AnyIndex::Int8(_) => Err(Error::ElementKindMismatch { expected: ElemKind::Int8, found: ElemKind::Float32 }),
        }
    }
}

impl TryFrom<AnyIndex> for HnswIndex<f32> {
    type Error = Error;

    fn try_from(i: AnyIndex) -> Result<Self> {
        i.into_f32()
    }
}

impl TryFrom<AnyIndex> for HnswIndex<i8> {
    type Error = Error;

    fn try_from(i: AnyIndex) -> Result<Self> {
        i.into_i8()
    }
}

impl From<HnswIndex<f32>> for AnyIndex {
    fn from(i: HnswIndex<f32>) -> Self {
        AnyIndex::Float32(i)
    }
}

impl From<HnswIndex<i8>> for AnyIndex {
    fn from(i: HnswIndex<i8>) -> Self {
        AnyIndex::Int8(i)
    }
}

struct Header {
    kind: ElemKind,
    metric: Metric,
    bits: u8,
    d: usize,
    n: usize,
    config: HnswConfig,
    entry: u32,
    max_level: u32,
}

fn read_header(r: &mut Reader<'_>) -> Result<Header> {
    if r.bytes.len() < INDEX_MAGIC.len() || &r.bytes[..INDEX_MAGIC.len()] != INDEX_MAGIC {
        return Err(Error::BadMagic);
    }
    r.pos = INDEX_MAGIC.len();
    let version = r.u8("version")?;
    if version != INDEX_VERSION {
        return Err(Error::VersionMismatch { expected: INDEX_VERSION, found: version });
    }
    let kind_code = r.u8("element kind")?;
    let kind = ElemKind::from_code(kind_code)
        .ok_or_else(|| Error::Corrupt(format!("unknown element kind {kind_code}")))?;
    let metric_code = r.u8("metric")?;
    let metric = Metric::from_code(metric_code)
        .ok_or_else(|| Error::Corrupt(format!("unknown metric {metric_code}")))?;
    let bits = r.u8("bits")?;
    let d = r.u32("d")? as usize;
    let n = r.u64("n")?;
    let m = r.u32("M")? as usize;
    let efc = r.u32("EFC")? as usize;
    let seed = r.u64("seed")?;
    let entry = r.u32("entry point")?;
    let max_level = r.u32("max level")?;
    debug_assert_eq!(r.pos as u64, HEADER_BYTES);
    if n == 0 || n >= u32::MAX as u64 || entry as u64 >= n || d == 0 {
        return Err(Error::Corrupt(format!("implausible header: n={n} d={d} entry={entry}")));
    }
    let config = HnswConfig::new(m, efc, seed);
    config.validate().map_err(|e| Error::Corrupt(e.to_string()))?;
    Ok(Header { kind, metric, bits, d, n: n as usize, config, entry, max_level })
}

fn decode_typed<T: Element>(r: &mut Reader<'_>, h: Header) -> Result<HnswIndex<T>> {
    let n = h.n;
    // Bound allocations by what the file can actually hold.
    let remaining = r.bytes.len() - r.pos;
    if n.checked_mul(4 + 4 * (1 + 2 * h.config.m) + h.d * T::KIND.size()).is_none_or(|need| need > remaining) {
        return Err(Error::Corrupt(format!("file too short for {n} nodes")));
    }
    let levels = r
        .take(4 * n, "levels")?
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect::<Vec<u32>>();
    let upper_words: u64 = levels.iter().map(|&l| l as u64 * (1 + h.config.m as u64)).sum();
    if upper_words * 4 > remaining as u64 {
        return Err(Error::Corrupt("level array implies more adjacency than the file holds".into()));
    }
    let mut graph = Graph::new(h.config.m, levels);
    let mut list = Vec::with_capacity(2 * h.config.m);
    for node in 0..n {
        for layer in 0..=graph.levels[node] as usize {
            let cap = graph.cap(layer);
            let deg = r.u32("degree")? as usize;
            if deg > cap {
                return Err(Error::Corrupt(format!("node {node} layer {layer}: degree {deg} exceeds cap {cap}")));
            }
            list.clear();
            let slots = r.take(4 * cap, "adjacency")?;
            for (i, b) in slots.chunks_exact(4).enumerate() {
                let id = u32::from_le_bytes([b[0], b[1], b[2], b[3]]);
                if i < deg {
                    list.push(id);
                } else if id != EMPTY_SLOT {
                    return Err(Error::Corrupt(format!("node {node} layer {layer}: non-empty padding slot")));
                }
            }
            graph.set_neighbors(node, layer, &list);
        }
    }
    graph.entry = h.entry;
    graph.max_level = h.max_level;
    let vectors = T::from_le(r.take(n * h.d * T::KIND.size(), "vectors")?);
    let norms = if h.metric.needs_norms() {
        r.take(4 * n, "norms")?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect()
    } else {
        Vec::new()
    };
    if r.pos != r.bytes.len() {
        return Err(Error::Corrupt(format!("{} trailing bytes", r.bytes.len() - r.pos)));
    }
    let index = HnswIndex { metric: h.metric, config: h.config, bits: h.bits, d: h.d, vectors, norms, graph };
    index.check_invariants().map_err(|e| Error::Corrupt(e.to_string()))?;
    Ok(index)
}

pub fn decode_index(bytes: &[u8]) -> Result<AnyIndex> {
    let mut r = Reader { bytes, pos: 0 };
    let header = read_header(&mut r)?;
    match header.kind {
        ElemKind::Float32 => Ok(AnyIndex::Float32(decode_typed(&mut r, header)?)),
        ElemKind::Int8 => Ok(AnyIndex::Int8(decode_typed(&mut r, header)?)),
    }
}

pub fn save_index<T: Element>(path: impl AsRef<Path>, index: &HnswIndex<T>) -> Result<()> {
    fs::write(path, encode_index(index))?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<AnyIndex> {
    decode_index(&fs::read(path)?)
}
