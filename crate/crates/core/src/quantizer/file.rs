//! Binary params file.
//!
//! ```text
//! "QZP1"            4 bytes magic
//! version   u8      = 1
//! bits      u8
//! mode      u8      0 = sigma, 1 = absmax, 2 = uniform
//! reserved  u8      = 0
//! d         u32
//! d x (k f32, lower f32, upper f32)
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::{Mode, QuantizerParams};
use crate::error::{Error, Result};

pub const PARAMS_MAGIC: &[u8; 4] = b"QZP1";
pub const PARAMS_VERSION: u8 = 1;
const HEADER_LEN: usize = 12;

pub fn encode_params(p: &QuantizerParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 12 * p.dim());
    out.extend_from_slice(PARAMS_MAGIC);
    out.extend_from_slice(&[PARAMS_VERSION, p.bits(), p.mode().code(), 0]);
    out.extend_from_slice(&(p.dim() as u32).to_le_bytes());
    for i in 0..p.dim() {
        for v in [p.center()[i], p.lower()[i], p.upper()[i]] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_params(bytes: &[u8]) -> Result<QuantizerParams> {
    if bytes.len() < 4 || &bytes[..4] != PARAMS_MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedFile(format!("header needs {HEADER_LEN} bytes, file has {}", bytes.len())));
    }
    let version = bytes[4];
    if version != PARAMS_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let bits = bytes[5];
    let mode = Mode::from_code(bytes[6])
        .ok_or_else(|| Error::invalid(format!("unknown mode code {}", bytes[6])))?;
    let d = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
    let body = &bytes[HEADER_LEN..];
    let expected = d * 12;
    if body.len() < expected {
        return Err(Error::TruncatedFile(format!(
            "{d} dimensions need {expected} payload bytes, found {}",
            body.len()
        )));
    }
    if body.len() > expected {
        return Err(Error::invalid(format!("{} trailing bytes after params", body.len() - expected)));
    }
    let mut center = Vec::with_capacity(d);
    let mut lower = Vec::with_capacity(d);
    let mut upper = Vec::with_capacity(d);
    for triple in body.chunks_exact(12) {
        let f = |o: usize| f32::from_le_bytes([triple[o], triple[o + 1], triple[o + 2], triple[o + 3]]);
        center.push(f(0));
        lower.push(f(4));
        upper.push(f(8));
    }
    QuantizerParams::new(bits, mode, center, lower, upper)
}

pub fn save_params(path: impl AsRef<Path>, p: &QuantizerParams) -> Result<()> {
    fs::write(path, encode_params(p))?;
    Ok(())
}

pub fn load_params(path: impl AsRef<Path>) -> Result<QuantizerParams> {
    decode_params(&fs::read(path)?)
}
