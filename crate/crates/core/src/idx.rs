//! IDX binary image/label files (the MNIST container format).
//!
//! Images: magic 0x00000803, then big-endian u32 count, rows, cols, then
//! one byte per pixel. Labels: magic 0x00000801, then count and one byte
//! per label. Format errors report the byte offset of the problem.

use crate::attention::GlyphDataset;
use crate::{CoreError, Result};
use std::fs;
use std::path::Path;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, offset: 0 }
    }

    fn read_u32(&mut self, what: &str) -> Result<u32> {
        let start = self.offset;
        let end = start + 4;
        if end > self.bytes.len() {
            return Err(CoreError::IdxFormat {
                offset: start as u64,
                message: format!("truncated while reading {what}"),
            });
        }
        self.offset = end;
        Ok(u32::from_be_bytes(self.bytes[start..end].try_into().unwrap()))
    }

    fn read_bytes(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let start = self.offset;
        let end = start + n;
        if end > self.bytes.len() {
            return Err(CoreError::IdxFormat {
                offset: start as u64,
                message: format!("truncated while reading {what}: need {n} bytes, have {}",
                    self.bytes.len() - start),
            });
        }
        self.offset = end;
        Ok(&self.bytes[start..end])
    }

    fn expect_end(&self, what: &str) -> Result<()> {
        if self.offset != self.bytes.len() {
            return Err(CoreError::IdxFormat {
                offset: self.offset as u64,
                message: format!("{} trailing bytes after {what}", self.bytes.len() - self.offset),
            });
        }
        Ok(())
    }
}

fn parse_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<Vec<f64>>)> {
    let mut r = Reader::new(bytes);
    let magic = r.read_u32("images magic")?;
    if magic != IMAGES_MAGIC {
        return Err(CoreError::IdxFormat {
            offset: 0,
            message: format!("bad images magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        });
    }
    let count = r.read_u32("image count")? as usize;
    let rows = r.read_u32("row count")? as usize;
    let cols = r.read_u32("column count")? as usize;
    let data = r.read_bytes(count * rows * cols, "pixel data")?;
    r.expect_end("pixel data")?;
    let images = data
        .chunks_exact(rows * cols)
        .map(|c| c.iter().map(|&b| f64::from(b) / 255.0).collect())
        .collect();
    Ok((count, rows, cols, images))
}

fn parse_labels(bytes: &[u8]) -> Result<(usize, Vec<u8>)> {
    let mut r = Reader::new(bytes);
    let magic = r.read_u32("labels magic")?;
    if magic != LABELS_MAGIC {
        return Err(CoreError::IdxFormat {
            offset: 0,
            message: format!("bad labels magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        });
    }
    let count = r.read_u32("label count")? as usize;
    let data = r.read_bytes(count, "label data")?;
    r.expect_end("label data")?;
    Ok((count, data.to_vec()))
}

/// Parse an IDX image/label file pair into a dataset (all indices placed
/// in the train split; re-split as needed).
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<GlyphDataset> {
    let (n_images, rows, cols, images) = parse_images(&fs::read(images_path)?)?;
    let (n_labels, labels) = parse_labels(&fs::read(labels_path)?)?;
    if n_images != n_labels {
        return Err(CoreError::IdxFormat {
            offset: 4,
            message: format!("image count {n_images} != label count {n_labels}"),
        });
    }
    let n_classes = labels.iter().map(|&l| usize::from(l) + 1).max().unwrap_or(1).max(2);
    let ds = GlyphDataset {
        n_classes,
        width: cols,
        height: rows,
        images,
        labels,
        train_idx: (0..n_images).collect(),
        test_idx: vec![],
    };
    ds.validate()?;
    Ok(ds)
}

/// Write a dataset back out as an IDX pair, quantizing pixels to 8 bits.
pub fn save_idx(ds: &GlyphDataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    ds.validate()?;
    let count = ds.images.len() as u32;
    let mut img_bytes = Vec::with_capacity(16 + ds.images.len() * ds.width * ds.height);
    img_bytes.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    img_bytes.extend_from_slice(&count.to_be_bytes());
    img_bytes.extend_from_slice(&(ds.height as u32).to_be_bytes());
    img_bytes.extend_from_slice(&(ds.width as u32).to_be_bytes());
    for img in &ds.images {
        img_bytes.extend(img.iter().map(|&v| (v * 255.0).round() as u8));
    }
    let mut label_bytes = Vec::with_capacity(8 + ds.labels.len());
    label_bytes.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    label_bytes.extend_from_slice(&count.to_be_bytes());
    label_bytes.extend_from_slice(&ds.labels);
    fs::write(images_path, img_bytes)?;
    fs::write(labels_path, label_bytes)?;
    Ok(())
}
