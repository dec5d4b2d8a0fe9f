//! Binary greyscale (P5) image export.

use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Encodes a row-major grid as 8-bit P5 after dividing by its maximum.
/// An all-zero (or empty-maximum) grid encodes as black.
pub fn encode_max_normalized(width: usize, height: usize, values: &[f64]) -> Vec<u8> {
    assert_eq!(values.len(), width * height, "grid size");
    let max = values.iter().copied().fold(0.0_f64, f64::max);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(values.iter().map(|&v| if max > 0.0 { ((v / max).clamp(0.0, 1.0) * 255.0).round() as u8 } else { 0 }));
    out
}

/// Encodes values already in [0, 1] without renormalizing.
pub fn encode_unit(width: usize, height: usize, values: &[f64]) -> Vec<u8> {
    assert_eq!(values.len(), width * height, "grid size");
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(values.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_scaling() {
        let b = encode_max_normalized(2, 1, &[3.0, 1.0]);
        assert_eq!(&b[..11], b"P5\n2 1\n255\n");
        assert_eq!(&b[11..], &[255, 85]);
        assert_eq!(&encode_max_normalized(1, 1, &[0.0])[11..], &[0]);
    }
}
