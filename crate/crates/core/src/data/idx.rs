//! IDX binary files (the MNIST container format).
//!
//! Images: big-endian `0x00000803`, then `N`, `rows`, `cols` as u32, then
//! `N * rows * cols` unsigned bytes. Labels: `0x00000801`, `N`, then `N` bytes.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use super::Dataset;
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn u32(&mut self, field: &str) -> Result<u32> {
        let end = self.pos + 4;
        let b = self.bytes.get(self.pos..end).ok_or_else(|| {
            Error::parse(self.path, format!("truncated file while reading {field}"))
        })?;
        self.pos = end;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::parse(
                self.path,
                format!(
                    "truncated file: {field} needs {n} bytes, {} available",
                    self.bytes.len() - self.pos
                ),
            )
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let m = self.u32("magic")?;
        if m != expected {
            return Err(Error::parse(
                self.path,
                format!("unexpected magic 0x{m:08x}, expected 0x{expected:08x}"),
            ));
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Load an image/label file pair. Pixels are scaled to `[0, 1]`; each image
/// is flattened row-major. The class count is `max label + 1`.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();

    let img_bytes = read(images_path)?;
    let mut r = Reader {
        path: images_path,
        bytes: &img_bytes,
        pos: 0,
    };
    r.magic(IDX_IMAGES_MAGIC)?;
    let n = r.u32("image count")? as usize;
    let rows = r.u32("row count")? as usize;
    let cols = r.u32("column count")? as usize;
    let d = rows * cols;
    let pixels = r.take(n * d, "pixel data")?;

    let lbl_bytes = read(labels_path)?;
    let mut l = Reader {
        path: labels_path,
        bytes: &lbl_bytes,
        pos: 0,
    };
    l.magic(IDX_LABELS_MAGIC)?;
    let n_labels = l.u32("label count")? as usize;
    if n_labels != n {
        return Err(Error::parse(
            labels_path,
            format!("label count {n_labels} does not match image count {n}"),
        ));
    }
    let labels: Vec<usize> = l.take(n, "label data")?.iter().map(|&b| b as usize).collect();

    let features = DMatrix::from_row_iterator(n, d, pixels.iter().map(|&p| p as f64 / 255.0));
    let num_classes = labels.iter().max().map_or(1, |m| m + 1);
    Dataset::new(features, labels, num_classes)
}

pub fn write_idx_images(
    path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
    pixels: &[u8],
) -> Result<()> {
    let path = path.as_ref();
    let d = rows * cols;
    if d == 0 || !pixels.len().is_multiple_of(d) {
        return Err(Error::InvalidArgument(format!(
            "{} pixels do not tile {rows}x{cols} images",
            pixels.len()
        )));
    }
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, (pixels.len() / d) as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_tiny_file() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
        let pixels: Vec<u8> = (0..12).map(|i| (i * 20) as u8).collect();
        write_idx_images(&ip, 2, 3, &pixels).unwrap();
        write_idx_labels(&lp, &[1, 0]).unwrap();
        let d = load_idx(&ip, &lp).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dim(), 6);
        assert_eq!(d.labels(), &[1, 0]);
        assert_eq!(d.num_classes(), 2);
        assert_eq!(d.features()[(1, 2)], 160.0 / 255.0);
        for (i, v) in d.features().row(0).iter().enumerate() {
            assert_eq!((v * 255.0).round() as u8, pixels[i]);
        }
    }

    #[test]
    fn wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
        let mut bytes = 0x0000_0802u32.to_be_bytes().to_vec();
        bytes.extend_from_slice(&[0; 12]);
        fs::write(&ip, bytes).unwrap();
        write_idx_labels(&lp, &[]).unwrap();
        let msg = load_idx(&ip, &lp).unwrap_err().to_string();
        assert!(msg.contains("unexpected magic"), "{msg}");
    }

    #[test]
    fn count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
        write_idx_images(&ip, 1, 2, &[0, 1, 2, 3]).unwrap();
        write_idx_labels(&lp, &[0, 1, 1]).unwrap();
        let msg = load_idx(&ip, &lp).unwrap_err().to_string();
        assert!(msg.contains("does not match"), "{msg}");
    }

    #[test]
    fn truncated_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
        write_idx_images(&ip, 1, 2, &[0, 1, 2, 3]).unwrap();
        let mut bytes = fs::read(&ip).unwrap();
        bytes.pop();
        fs::write(&ip, bytes).unwrap();
        write_idx_labels(&lp, &[0, 1]).unwrap();
        let msg = load_idx(&ip, &lp).unwrap_err().to_string();
        assert!(msg.contains("pixel data"), "{msg}");
    }
}
