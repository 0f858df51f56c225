//! Reader for the IDX format of the MNIST distribution files.

use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Images as rows of pixels scaled by 1/255, with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct IdxData {
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn fail(&self, offset: usize, reason: impl Into<String>) -> Error {
        Error::Idx { path: self.path.to_path_buf(), offset, reason: reason.into() }
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self
            .bytes
            .get(self.pos..self.pos + 4)
            .ok_or_else(|| self.fail(self.pos, "truncated header"))?;
        self.pos += 4;
        Ok(u32::from_be_bytes(b.try_into().expect("4 bytes")))
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(self.fail(self.bytes.len(), format!("truncated {what}: expected {n} bytes from offset {}", self.pos)));
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn parse_idx(images: &[u8], images_path: &Path, label_bytes: &[u8], labels_path: &Path) -> Result<IdxData> {
    let mut c = Cursor { bytes: images, pos: 0, path: images_path };
    let magic = c.u32()?;
    if magic != IMAGES_MAGIC {
        return Err(c.fail(0, format!("bad magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}")));
    }
    let n = c.u32()? as usize;
    let rows = c.u32()? as usize;
    let cols = c.u32()? as usize;
    if rows == 0 || cols == 0 {
        return Err(c.fail(8, "zero image dimension"));
    }
    let pixels = c.take(n * rows * cols, "pixel data")?;
    if c.pos != images.len() {
        return Err(c.fail(c.pos, "trailing bytes after pixel data"));
    }
    let images: Vec<Vec<f64>> =
        pixels.chunks_exact(rows * cols).map(|im| im.iter().map(|&p| p as f64 / 255.0).collect()).collect();

    let mut l = Cursor { bytes: label_bytes, pos: 0, path: labels_path };
    let magic = l.u32()?;
    if magic != LABELS_MAGIC {
        return Err(l.fail(0, format!("bad magic {magic:#010x}, expected {LABELS_MAGIC:#010x}")));
    }
    let m = l.u32()? as usize;
    if m != n {
        return Err(l.fail(4, format!("{m} labels for {n} images")));
    }
    let labels = l.take(m, "labels")?.to_vec();
    if l.pos != label_bytes.len() {
        return Err(l.fail(l.pos, "trailing bytes after labels"));
    }
    if let Some(i) = labels.iter().position(|&v| v > 9) {
        return Err(l.fail(8 + i, format!("label {} is not a digit", labels[i])));
    }
    Ok(IdxData { rows, cols, images, labels })
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<IdxData> {
    parse_idx(&read(images_path)?, images_path, &read(labels_path)?, labels_path)
}
