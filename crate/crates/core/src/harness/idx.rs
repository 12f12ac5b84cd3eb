//! IDX files: big-endian header `00 00 <type> <ndims>`, one `u32` per
//! dimension, then the raw values. Only unsigned-byte payloads are read:
//! magic `0x00000803` for `[n, rows, cols]` images and `0x00000801` for
//! `[n]` labels.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn ingest(path: &Path, offset: usize, message: impl Into<String>) -> Error {
    Error::Ingest {
        path: path.to_path_buf(),
        offset: offset as u64,
        message: message.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize, path: &Path, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| ingest(path, bytes.len(), format!("file truncated while reading {what}")))
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let magic = read_u32(bytes, 0, path, "magic number")?;
    if magic != expected {
        return Err(ingest(
            path,
            0,
            format!("bad magic number {magic:#010x}, expected {expected:#010x}"),
        ));
    }
    Ok(())
}

fn payload<'a>(bytes: &'a [u8], start: usize, len: usize, path: &Path) -> Result<&'a [u8]> {
    let end = start
        .checked_add(len)
        .ok_or_else(|| ingest(path, start, "declared size overflows"))?;
    if bytes.len() < end {
        return Err(ingest(
            path,
            bytes.len(),
            format!("file truncated: header declares {len} data bytes, {} present", bytes.len() - start),
        ));
    }
    if bytes.len() > end {
        return Err(ingest(path, end, format!("{} unexpected trailing bytes", bytes.len() - end)));
    }
    Ok(&bytes[start..end])
}

pub fn parse_images(bytes: &[u8], path: &Path) -> Result<IdxImages> {
    check_magic(bytes, IMAGES_MAGIC, path)?;
    let count = read_u32(bytes, 4, path, "image count")? as usize;
    let rows = read_u32(bytes, 8, path, "row count")? as usize;
    let cols = read_u32(bytes, 12, path, "column count")? as usize;
    if rows == 0 || cols == 0 {
        return Err(ingest(path, 8, format!("degenerate image size {rows}x{cols}")));
    }
    let pixels = payload(bytes, 16, count * rows * cols, path)?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    check_magic(bytes, LABELS_MAGIC, path)?;
    let count = read_u32(bytes, 4, path, "label count")? as usize;
    Ok(payload(bytes, 8, count, path)?.to_vec())
}

pub fn read_images(path: &Path) -> Result<IdxImages> {
    parse_images(&fs::read(path)?, path)
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    parse_labels(&fs::read(path)?, path)
}

/// Encoders, used to write fixtures and small exported subsets.
pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGES_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
