//! IDX (MNIST-style) dataset parsing. The files are untrusted input: every
//! header field is validated, sizes are computed with checked arithmetic and
//! capped, and gzip streams are decompressed through a hard output limit.

use std::io::Read;
use std::path::{Path, PathBuf};

use crate::{HebError, Result};

/// hard cap on decoded payload sizes (raw MNIST is < 50 MiB)
pub const MAX_IDX_BYTES: usize = 1 << 28;

#[derive(Clone, Debug)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

/// Parse an uncompressed IDX buffer holding unsigned bytes.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxArray> {
    if bytes.len() < 4 {
        return Err(HebError::Data("idx header truncated".into()));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(HebError::Data("bad idx magic".into()));
    }
    if bytes[2] != 0x08 {
        return Err(HebError::Data(format!("unsupported idx dtype 0x{:02x}", bytes[2])));
    }
    let ndim = bytes[3] as usize;
    if ndim == 0 || ndim > 3 {
        return Err(HebError::Data(format!("unsupported idx rank {ndim}")));
    }
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(HebError::Data("idx dims truncated".into()));
    }
    let mut dims = Vec::with_capacity(ndim);
    let mut total: usize = 1;
    for d in 0..ndim {
        let off = 4 + 4 * d;
        let v = u32::from_be_bytes([bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]])
            as usize;
        total = total
            .checked_mul(v)
            .filter(|t| *t <= MAX_IDX_BYTES)
            .ok_or_else(|| HebError::Data("idx size overflow".into()))?;
        dims.push(v);
    }
    let data = &bytes[header..];
    if data.len() != total {
        return Err(HebError::Data(format!(
            "idx payload length {} does not match dims ({} expected)",
            data.len(),
            total
        )));
    }
    Ok(IdxArray { dims, data: data.to_vec() })
}

/// Decompress when gzip-framed, otherwise pass through; output is capped.
pub fn maybe_gunzip(bytes: &[u8]) -> Result<Vec<u8>> {
    if bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b {
        let mut out = Vec::new();
        let mut dec = flate2::read::GzDecoder::new(bytes).take(MAX_IDX_BYTES as u64 + 1);
        dec.read_to_end(&mut out)
            .map_err(|e| HebError::Data(format!("gzip: {e}")))?;
        if out.len() > MAX_IDX_BYTES {
            return Err(HebError::Data("gzip payload exceeds cap".into()));
        }
        Ok(out)
    } else {
        Ok(bytes.to_vec())
    }
}

/// Serialize an IDX buffer (used for synthetic fixtures and fuzz seeds).
pub fn write_idx(dims: &[usize], data: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8, 0, 0x08, dims.len() as u8];
    for d in dims {
        out.extend_from_slice(&(*d as u32).to_be_bytes());
    }
    out.extend_from_slice(data);
    out
}

#[derive(Clone, Debug)]
pub struct MnistSet {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    images: Vec<u8>,
    pub labels: Vec<u8>,
}

impl MnistSet {
    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.images[i * n..(i + 1) * n]
    }
}

fn find_existing(dir: &Path, names: &[&str]) -> Result<PathBuf> {
    for n in names {
        let p = dir.join(n);
        if p.exists() {
            return Ok(p);
        }
    }
    Err(HebError::Data(format!(
        "none of {names:?} found in {}",
        dir.display()
    )))
}

fn load_idx_file(path: &Path) -> Result<IdxArray> {
    let raw = std::fs::read(path)?;
    parse_idx(&maybe_gunzip(&raw)?)
}

/// Load one split ("train" or "t10k") of an MNIST-layout directory holding
/// standard IDX files, gzip-compressed or raw.
pub fn load_mnist_split(dir: &Path, prefix: &str) -> Result<MnistSet> {
    let images = load_idx_file(&find_existing(
        dir,
        &[
            &format!("{prefix}-images-idx3-ubyte.gz"),
            &format!("{prefix}-images-idx3-ubyte"),
            &format!("{prefix}-images.idx3-ubyte"),
        ],
    )?)?;
    let labels = load_idx_file(&find_existing(
        dir,
        &[
            &format!("{prefix}-labels-idx1-ubyte.gz"),
            &format!("{prefix}-labels-idx1-ubyte"),
            &format!("{prefix}-labels.idx1-ubyte"),
        ],
    )?)?;
    if images.dims.len() != 3 {
        return Err(HebError::Data("image file must be rank 3".into()));
    }
    if labels.dims.len() != 1 || labels.dims[0] != images.dims[0] {
        return Err(HebError::Data("label count does not match image count".into()));
    }
    if labels.data.iter().any(|&l| l > 9) {
        return Err(HebError::Data("label out of range".into()));
    }
    Ok(MnistSet {
        count: images.dims[0],
        rows: images.dims[1],
        cols: images.dims[2],
        images: images.data,
        labels: labels.data,
    })
}
