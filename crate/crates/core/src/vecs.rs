//! Readers and writers for the `*vecs` benchmark formats.
//!
//! Every record is a little-endian `i32` dimension followed by that many
//! little-endian values:
//!
//! | format  | payload element            |
//! |---------|----------------------------|
//! | fvecs   | `f32`                      |
//! | ivecs   | `i32` (ground-truth ids)   |
//! | bvecs   | `u8`, stored as `v - 128`  |
//! | i8vecs  | `i8` (quantized codes)     |
//!
//! All records in a file must share the same dimension.

use std::fs;
use std::io::{BufWriter, ErrorKind, Read, Write};
use std::marker::PhantomData;
use std::path::Path;

use crate::distance::MAX_I8_DIM;
use crate::error::{Error, Result};
use crate::store::{Dataset, DenseDataset, ElemKind, Element, GroundTruth};

/// Splits `bytes` into fixed-width records and returns `(d, payloads)`.
fn split_records(bytes: &[u8], elem_size: usize) -> Result<(usize, Vec<&[u8]>)> {
    let mut offset = 0usize;
    let mut dim: Option<usize> = None;
    let mut records = Vec::new();
    while offset < bytes.len() {
        let header = bytes
            .get(offset..offset + 4)
            .ok_or(Error::TruncatedRecord { offset: offset as u64 })?;
        let raw = i32::from_le_bytes([header[0], header[1], header[2], header[3]]);
        if raw <= 0 {
            return Err(Error::NonPositiveDim { offset: offset as u64, dim: raw });
        }
        let d = raw as usize;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::DimensionMismatch { expected, found: d })
            }
            Some(_) => {}
        }
        let start = offset + 4;
        let end = start + d * elem_size;
        let payload = bytes
            .get(start..end)
            .ok_or(Error::TruncatedRecord { offset: offset as u64 })?;
        records.push(payload);
        offset = end;
    }
    Ok((dim.unwrap_or(0), records))
}

fn parse_dataset<T: Element>(
    bytes: &[u8],
    elem_size: usize,
    decode: impl Fn(&[u8]) -> Vec<T>,
) -> Result<Dataset<T>> {
    let (d, records) = split_records(bytes, elem_size)?;
    let mut data = Vec::with_capacity(d * records.len());
    for payload in records {
        data.extend(decode(payload));
    }
    Dataset::new(d, data)
}

fn check_i8_dim(d: usize) -> Result<()> {
    if d > MAX_I8_DIM {
        return Err(Error::invalid(format!(
            "int8 dimension {d} exceeds the 32-bit accumulator bound {MAX_I8_DIM}"
        )));
    }
    Ok(())
}

pub fn parse_fvecs(bytes: &[u8]) -> Result<Dataset<f32>> {
    parse_dataset(bytes, 4, f32::from_le)
}

/// bvecs bytes are re-centered to the signed range: `stored = byte - 128`.
pub fn parse_bvecs(bytes: &[u8]) -> Result<Dataset<i8>> {
    let ds = parse_dataset(bytes, 1, |p| p.iter().map(|&b| (b as i16 - 128) as i8).collect())?;
    check_i8_dim(ds.dim())?;
    Ok(ds)
}

pub fn parse_i8vecs(bytes: &[u8]) -> Result<Dataset<i8>> {
    let ds = parse_dataset(bytes, 1, <i8 as Element>::from_le)?;
    check_i8_dim(ds.dim())?;
    Ok(ds)
}

pub fn parse_ivecs(bytes: &[u8]) -> Result<GroundTruth> {
    let (_, records) = split_records(bytes, 4)?;
    let mut lists = Vec::with_capacity(records.len());
    for payload in records {
        let list = payload
            .chunks_exact(4)
            .map(|c| {
                let v = i32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                u32::try_from(v).map_err(|_| Error::invalid(format!("negative neighbor id {v}")))
            })
            .collect::<Result<Vec<u32>>>()?;
        lists.push(list);
    }
    Ok(GroundTruth::new(lists))
}

pub fn load_fvecs(path: impl AsRef<Path>) -> Result<Dataset<f32>> {
    parse_fvecs(&fs::read(path)?)
}

pub fn load_bvecs(path: impl AsRef<Path>) -> Result<Dataset<i8>> {
    parse_bvecs(&fs::read(path)?)
}

pub fn load_i8vecs(path: impl AsRef<Path>) -> Result<Dataset<i8>> {
    parse_i8vecs(&fs::read(path)?)
}

pub fn load_ivecs(path: impl AsRef<Path>) -> Result<GroundTruth> {
    parse_ivecs(&fs::read(path)?)
}

/// Loads a corpus by extension: `.fvecs` as float, `.i8vecs` and `.bvecs` as int8.
pub fn load_dense(path: impl AsRef<Path>) -> Result<DenseDataset> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("fvecs") => Ok(load_fvecs(path)?.into()),
        Some("i8vecs") => Ok(load_i8vecs(path)?.into()),
        Some("bvecs") => Ok(load_bvecs(path)?.into()),
        other => Err(Error::invalid(format!(
            "cannot infer vector format from extension {other:?} (expected fvecs, i8vecs or bvecs)"
        ))),
    }
}

/// Serializes a dataset with fvecs-style framing; the payload encoding is
/// the element's own little-endian form.
pub fn encode_vecs<T: Element>(ds: &Dataset<T>) -> Vec<u8> {
    let elem = T::KIND.size();
    let mut out = Vec::with_capacity(ds.n() * (4 + ds.dim() * elem));
    let header = (ds.dim() as i32).to_le_bytes();
    for row in ds.rows() {
        out.extend_from_slice(&header);
        T::to_le(row, &mut out);
    }
    out
}

pub fn encode_ivecs(gt: &GroundTruth) -> Vec<u8> {
    let mut out = Vec::new();
    for list in gt.lists() {
        out.extend_from_slice(&(list.len() as i32).to_le_bytes());
        for &id in list {
            out.extend_from_slice(&(id as i32).to_le_bytes());
        }
    }
    out
}

/// Record-at-a-time reader for fvecs-framed files, with the same checks as
/// the whole-file parsers. Used to stream large inputs.
pub struct VecsReader<R, T> {
    inner: R,
    offset: u64,
    dim: Option<usize>,
    buf: Vec<u8>,
    _elem: PhantomData<T>,
}

impl<R: Read, T: Element> VecsReader<R, T> {
    pub fn new(inner: R) -> Self {
        Self { inner, offset: 0, dim: None, buf: Vec::new(), _elem: PhantomData }
    }

    /// Dimension of the records read so far.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    /// Reads until `buf` is full or the input ends; returns the byte count.
    fn fill(inner: &mut R, buf: &mut [u8]) -> Result<usize> {
        let mut got = 0;
        while got < buf.len() {
            match inner.read(&mut buf[got..]) {
                Ok(0) => break,
                Ok(k) => got += k,
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(got)
    }

    pub fn next_record(&mut self) -> Result<Option<Vec<T>>> {
        let record = self.offset;
        let mut header = [0u8; 4];
        match Self::fill(&mut self.inner, &mut header)? {
            0 => return Ok(None),
            4 => {}
            _ => return Err(Error::TruncatedRecord { offset: record }),
        }
        let raw = i32::from_le_bytes(header);
        if raw <= 0 {
            return Err(Error::NonPositiveDim { offset: record, dim: raw });
        }
        let d = raw as usize;
        match self.dim {
            None => self.dim = Some(d),
            Some(expected) if expected != d => return Err(Error::DimensionMismatch { expected, found: d }),
            Some(_) => {}
        }
        self.buf.resize(d * T::KIND.size(), 0);
        if Self::fill(&mut self.inner, &mut self.buf)? != self.buf.len() {
            return Err(Error::TruncatedRecord { offset: record });
        }
        self.offset += 4 + self.buf.len() as u64;
        Ok(Some(T::from_le(&self.buf)))
    }
}

impl<R: Read, T: Element> Iterator for VecsReader<R, T> {
    type Item = Result<Vec<T>>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().transpose()
    }
}

/// Appends one fvecs-framed record.
pub fn write_record<T: Element, W: Write>(w: &mut W, row: &[T]) -> Result<()> {
    let mut out = Vec::with_capacity(4 + row.len() * T::KIND.size());
    out.extend_from_slice(&(row.len() as i32).to_le_bytes());
    T::to_le(row, &mut out);
    w.write_all(&out)?;
    Ok(())
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(bytes)?;
    w.flush()?;
    Ok(())
}

pub fn save_fvecs(path: impl AsRef<Path>, ds: &DenseDataset) -> Result<()> {
    write_all(path.as_ref(), &encode_vecs(ds.as_f32()?))
}

/// Quantized datasets use fvecs framing with a signed-byte payload.
pub fn save_i8vecs(path: impl AsRef<Path>, ds: &DenseDataset) -> Result<()> {
    write_all(path.as_ref(), &encode_vecs(ds.as_i8()?))
}

pub fn save_ivecs(path: impl AsRef<Path>, gt: &GroundTruth) -> Result<()> {
    if gt.lists().iter().any(|l| l.is_empty()) {
        return Err(Error::invalid("ivecs cannot represent an empty neighbor list"));
    }
    write_all(path.as_ref(), &encode_ivecs(gt))
}

/// Writes a dataset in the natural format of its element kind.
pub fn save_dense(path: impl AsRef<Path>, ds: &DenseDataset) -> Result<()> {
    match ds.kind() {
        ElemKind::Float32 => save_fvecs(path, ds),
        ElemKind::Int8 => save_i8vecs(path, ds),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record_f32(values: &[f32]) -> Vec<u8> {
        let mut out = (values.len() as i32).to_le_bytes().to_vec();
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    #[test]
    fn single_fvecs_record() {
        let bytes = record_f32(&[1.0, 2.0]);
        assert_eq!(&bytes[..4], &[2, 0, 0, 0]);
        let ds = parse_fvecs(&bytes).unwrap();
        assert_eq!((ds.n(), ds.dim()), (1, 2));
        assert_eq!(ds.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let ds = parse_fvecs(&[]).unwrap();
        assert_eq!((ds.n(), ds.dim()), (0, 0));
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let mut bytes = record_f32(&[0.0; 4]);
        bytes.extend(record_f32(&[0.0; 5]));
        assert!(matches!(
            parse_fvecs(&bytes),
            Err(Error::DimensionMismatch { expected: 4, found: 5 })
        ));
    }

    #[test]
    fn truncated_payload_rejected() {
        let mut bytes = record_f32(&[1.0, 2.0, 3.0]);
        bytes.pop();
        assert!(matches!(parse_fvecs(&bytes), Err(Error::TruncatedRecord { offset: 0 })));
        let mut bytes = record_f32(&[1.0]);
        bytes.extend_from_slice(&[1, 0]);
        assert!(matches!(parse_fvecs(&bytes), Err(Error::TruncatedRecord { offset: 8 })));
    }

    #[test]
    fn ivecs_record() {
        let mut bytes = Vec::new();
        for v in [3i32, 7, 1, 9] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let gt = parse_ivecs(&bytes).unwrap();
        assert_eq!(gt.lists(), &[vec![7, 1, 9]]);
    }

    #[test]
    fn negative_dim_rejected() {
        let bytes = (-1i32).to_le_bytes();
        assert!(matches!(parse_ivecs(&bytes), Err(Error::NonPositiveDim { dim: -1, .. })));
        assert!(matches!(parse_bvecs(&bytes), Err(Error::NonPositiveDim { dim: -1, .. })));
        assert!(matches!(
            parse_fvecs(&0i32.to_le_bytes()),
            Err(Error::NonPositiveDim { dim: 0, .. })
        ));
    }

    #[test]
    fn bvecs_recentered() {
        let bytes = [2, 0, 0, 0, 0, 255];
        let ds = parse_bvecs(&bytes).unwrap();
        assert_eq!(ds.row(0), &[-128, 127]);
    }

    #[test]
    fn save_fvecs_rejects_int8() {
        let ds: DenseDataset = Dataset::<i8>::new(2, vec![1, 2]).unwrap().into();
        let dir = tempfile::tempdir().unwrap();
        let err = save_fvecs(dir.path().join("x.fvecs"), &ds).unwrap_err();
        assert!(matches!(err, Error::ElementKindMismatch { .. }));
    }

    #[test]
    fn file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let f: DenseDataset =
            Dataset::<f32>::new(4, (0..12).map(|i| i as f32 * 0.37 - 1.0).collect()).unwrap().into();
        let fp = dir.path().join("a.fvecs");
        save_fvecs(&fp, &f).unwrap();
        let first = fs::read(&fp).unwrap();
        let back: DenseDataset = load_fvecs(&fp).unwrap().into();
        assert_eq!(back, f);
        save_fvecs(&fp, &back).unwrap();
        assert_eq!(fs::read(&fp).unwrap(), first);

        let q: DenseDataset = Dataset::<i8>::new(3, vec![-128, 0, 127, 5, -5, 1]).unwrap().into();
        let qp = dir.path().join("a.i8vecs");
        save_i8vecs(&qp, &q).unwrap();
        assert_eq!(load_dense(&qp).unwrap(), q);

        let gt = GroundTruth::new(vec![vec![4, 2, 0], vec![1, 3, 5]]);
        let gp = dir.path().join("gt.ivecs");
        save_ivecs(&gp, &gt).unwrap();
        assert_eq!(load_ivecs(&gp).unwrap(), gt);
    }

    #[test]
    fn streaming_reader_matches_parser() {
        let mut bytes = Vec::new();
        for row in [[1.0f32, 2.0], [3.0, 4.0], [5.0, 6.0]] {
            write_record(&mut bytes, &row).unwrap();
        }
        let rows: Vec<Vec<f32>> = VecsReader::<_, f32>::new(&bytes[..]).collect::<Result<_>>().unwrap();
        assert_eq!(Dataset::from_rows(&rows).unwrap(), parse_fvecs(&bytes).unwrap());

        let cut = &bytes[..bytes.len() - 2];
        let err = VecsReader::<_, f32>::new(cut).collect::<Result<Vec<_>>>().unwrap_err();
        assert!(matches!(err, Error::TruncatedRecord { offset: 24 }));

        let mut mixed = bytes.clone();
        write_record(&mut mixed, &[1.0f32]).unwrap();
        let err = VecsReader::<_, f32>::new(&mixed[..]).collect::<Result<Vec<_>>>().unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, found: 1 }));
    }
}
