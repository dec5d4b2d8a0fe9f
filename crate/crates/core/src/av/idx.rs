//! Big-endian IDX files as used by the MNIST distributions.

use std::path::Path;

use super::corpus::{ImageCorpus, Split};
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Parse(format!("{what}: truncated header")))
}

/// Parses an image file into `(rows, cols, images)` with pixels scaled to [0, 1].
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<Vec<f64>>)> {
    let magic = read_u32(bytes, 0, "idx images")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Parse(format!("idx images: bad magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")));
    }
    let n = read_u32(bytes, 4, "idx images")? as usize;
    let rows = read_u32(bytes, 8, "idx images")? as usize;
    let cols = read_u32(bytes, 12, "idx images")? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Parse(format!("idx images: degenerate dimensions {rows}×{cols}")));
    }
    let payload = &bytes[16..];
    let need = n * rows * cols;
    if payload.len() != need {
        return Err(Error::Parse(format!(
            "idx images: expected {need} payload bytes for {n}×{rows}×{cols}, found {}",
            payload.len()
        )));
    }
    let images = payload.chunks_exact(rows * cols).map(|c| c.iter().map(|&b| f64::from(b) / 255.0).collect()).collect();
    Ok((rows, cols, images))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = read_u32(bytes, 0, "idx labels")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Parse(format!("idx labels: bad magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")));
    }
    let n = read_u32(bytes, 4, "idx labels")? as usize;
    let payload = &bytes[8..];
    if payload.len() != n {
        return Err(Error::Parse(format!("idx labels: expected {n} payload bytes, found {}", payload.len())));
    }
    Ok(payload.iter().map(|&b| b as usize).collect())
}

/// Loads an image/label file pair. The class count is one more than the
/// largest label.
pub fn load_idx(images_path: &Path, labels_path: &Path, split: Split) -> Result<ImageCorpus> {
    let (rows, cols, images) = parse_idx_images(&std::fs::read(images_path)?)?;
    let labels = parse_idx_labels(&std::fs::read(labels_path)?)?;
    if images.len() != labels.len() {
        return Err(Error::Parse(format!("idx: {} images but {} labels", images.len(), labels.len())));
    }
    let n_classes = labels.iter().max().map_or(1, |m| m + 1);
    ImageCorpus::new(rows, cols, n_classes, images, labels, split)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent writer: header fields spelled out byte by byte.
    fn images_fixture() -> Vec<u8> {
        let mut b = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3];
        b.extend([0, 51, 102, 153, 204, 255, 255, 0, 17, 34, 68, 136]);
        b
    }

    fn labels_fixture(n: u8) -> Vec<u8> {
        let mut b = vec![0, 0, 8, 1, 0, 0, 0, n];
        b.extend((0..n).map(|i| i * 3 % 10));
        b
    }

    #[test]
    fn round_trip_is_pixel_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
        std::fs::write(&ip, images_fixture()).unwrap();
        std::fs::write(&lp, labels_fixture(2)).unwrap();
        let c = load_idx(&ip, &lp, Split::Test).unwrap();
        assert_eq!((c.len(), c.height(), c.width()), (2, 2, 3));
        assert_eq!(c.labels(), &[0, 3]);
        let bytes: Vec<u8> =
            (0..2).flat_map(|i| c.image(i).iter().map(|v| (v * 255.0).round() as u8).collect::<Vec<_>>()).collect();
        assert_eq!(bytes, images_fixture()[16..]);
    }

    #[test]
    fn mnist_shaped_header_accepted() {
        let mut b = vec![0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 28, 0, 0, 0, 28];
        b.extend(std::iter::repeat_n(7u8, 784));
        let (r, c, imgs) = parse_idx_images(&b).unwrap();
        assert_eq!((r, c, imgs.len()), (28, 28, 1));
    }

    #[test]
    fn errors_are_descriptive() {
        let mut bad = images_fixture();
        bad[3] = 1;
        assert!(parse_idx_images(&bad).unwrap_err().to_string().contains("magic"));
        let truncated = &images_fixture()[..20];
        assert!(parse_idx_images(truncated).unwrap_err().to_string().contains("payload"));
        assert!(parse_idx_images(&[0, 0, 8]).is_err());
        assert!(parse_idx_labels(&images_fixture()).is_err());

        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
        std::fs::write(&ip, images_fixture()).unwrap();
        std::fs::write(&lp, labels_fixture(3)).unwrap();
        assert!(load_idx(&ip, &lp, Split::Train).unwrap_err().to_string().contains("labels"));
    }
}
