//! IDX files as used for MNIST: a big-endian magic word, one 32-bit size per
//! dimension, then raw unsigned bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Sample;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Images as stored on disk, row-major per image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn len(&self) -> usize {
        if self.rows * self.cols == 0 {
            0
        } else {
            self.pixels.len() / (self.rows * self.cols)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }
}

/// How pixel intensity maps to spike time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PixelEncoding {
    /// `t = value / 255`: bright pixels spike late.
    #[default]
    Direct,
    /// `t = 1 - value / 255`: bright pixels spike early.
    Inverted,
}

impl std::str::FromStr for PixelEncoding {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Self::Direct),
            "inverted" => Ok(Self::Inverted),
            _ => Err(Error::Config(format!("unknown pixel encoding {s:?}"))),
        }
    }
}

impl PixelEncoding {
    pub fn time(self, value: u8) -> f64 {
        let v = f64::from(value) / 255.0;
        match self {
            Self::Direct => v,
            Self::Inverted => 1.0 - v,
        }
    }
}

fn parse_err<T>(offset: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        offset: offset as u64,
        message: message.into(),
    })
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    match bytes.get(offset..offset + 4) {
        Some(b) => Ok(u32::from_be_bytes(b.try_into().unwrap())),
        None => parse_err(offset, "file truncated inside header"),
    }
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let magic = read_u32(bytes, 0)?;
    if magic != expected {
        return parse_err(
            0,
            format!("bad magic 0x{magic:08x}, expected 0x{expected:08x}"),
        );
    }
    Ok(())
}

fn payload(bytes: &[u8], header: usize, len: usize) -> Result<&[u8]> {
    let end = header + len;
    if bytes.len() < end {
        return parse_err(
            bytes.len(),
            format!("file truncated: expected {len} data bytes after offset {header}"),
        );
    }
    if bytes.len() > end {
        return parse_err(end, "trailing bytes after data");
    }
    Ok(&bytes[header..end])
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IMAGES_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let pixels = payload(bytes, 16, count * rows * cols)?.to_vec();
    Ok(IdxImages { rows, cols, pixels })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABELS_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    Ok(payload(bytes, 8, count)?.to_vec())
}

pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [
        IMAGES_MAGIC,
        images.len() as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Pairs images with labels and encodes pixels as spike times.
pub fn idx_to_samples(
    images: &IdxImages,
    labels: &[u8],
    encoding: PixelEncoding,
) -> Result<Vec<Sample>> {
    if images.len() != labels.len() {
        return parse_err(
            4,
            format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            ),
        );
    }
    Ok((0..labels.len())
        .map(|i| Sample {
            features: images.image(i).iter().map(|&v| encoding.time(v)).collect(),
            label: usize::from(labels[i]),
        })
        .collect())
}

/// Reads an image file and its label file.
pub fn load_idx(
    images_path: &Path,
    labels_path: &Path,
    encoding: PixelEncoding,
) -> Result<Vec<Sample>> {
    let images = parse_idx_images(&std::fs::read(images_path)?)?;
    let labels = parse_idx_labels(&std::fs::read(labels_path)?)?;
    idx_to_samples(&images, &labels, encoding)
}
