//! Multi-scale foveated glimpses in normalized image coordinates.
//!
//! `l = (−1, −1)` is the top-left pixel and `(1, 1)` the bottom-right;
//! `l[0]` is horizontal, `l[1]` vertical.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoveationSpec {
    /// Side of every pooled patch.
    pub patch: usize,
    /// Number of scales.
    pub n_fov: usize,
    /// Window growth factor between consecutive scales.
    pub scale: usize,
}

impl FoveationSpec {
    pub fn new(patch: usize, n_fov: usize, scale: usize) -> Result<Self> {
        let spec = Self { patch, n_fov, scale };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch < 1 || self.n_fov < 1 {
            return Err(Error::InvalidParams("patch and n_fov must be ≥ 1".into()));
        }
        if self.n_fov > 1 && self.scale < 2 {
            return Err(Error::InvalidParams("scale must be ≥ 2 with several scales".into()));
        }
        Ok(())
    }

    pub fn glimpse_len(&self) -> usize {
        self.n_fov * self.patch * self.patch
    }

    /// Side of the window pooled into scale `k`.
    pub fn window(&self, k: usize) -> usize {
        self.patch * self.scale.pow(k as u32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Glimpse {
    pub x: Vec<f64>,
    /// Location actually sensed, after clamping.
    pub l: [f64; 2],
    /// The requested location was outside [−1, 1]².
    pub clamped: bool,
}

/// Pixel index of normalized coordinate `v` on an axis of `size` pixels.
pub fn pixel_center(v: f64, size: usize) -> usize {
    ((v + 1.0) / 2.0 * (size - 1) as f64).round() as usize
}

/// Normalized coordinate of pixel `p`; inverse of [`pixel_center`].
pub fn normalized_coord(p: usize, size: usize) -> f64 {
    if size == 1 {
        return 0.0;
    }
    2.0 * p as f64 / (size - 1) as f64 - 1.0
}

/// Samples `image` (`height × width`, row-major) at `l`.
///
/// For each scale the `w × w` window whose element `(w/2, w/2)` is the
/// center pixel is read with zero padding off the image and average-pooled
/// to `patch × patch`; patches are flattened row-major and concatenated
/// from finest to coarsest.
pub fn foveate(image: &[f64], height: usize, width: usize, l: [f64; 2], spec: &FoveationSpec) -> Result<Glimpse> {
    if image.len() != height * width {
        return Err(Error::DimensionMismatch { expected: height * width, got: image.len() });
    }
    if !(l[0].is_finite() && l[1].is_finite()) {
        return Err(Error::InvalidParams(format!("non-finite location {l:?}")));
    }
    let clamped = l.iter().any(|v| v.abs() > 1.0);
    let l = [l[0].clamp(-1.0, 1.0), l[1].clamp(-1.0, 1.0)];
    let (cc, cr) = (pixel_center(l[0], width) as isize, pixel_center(l[1], height) as isize);
    let d = spec.patch;
    let mut x = Vec::with_capacity(spec.glimpse_len());
    for k in 0..spec.n_fov {
        let w = spec.window(k);
        let pool = w / d;
        let (top, left) = (cr - (w / 2) as isize, cc - (w / 2) as isize);
        let norm = 1.0 / (pool * pool) as f64;
        for pr in 0..d {
            for pc in 0..d {
                let mut acc = 0.0;
                for dr in 0..pool {
                    let r = top + (pr * pool + dr) as isize;
                    if r < 0 || r >= height as isize {
                        continue;
                    }
                    let row = &image[r as usize * width..(r as usize + 1) * width];
                    for dc in 0..pool {
                        let c = left + (pc * pool + dc) as isize;
                        if c >= 0 && c < width as isize {
                            acc += row[c as usize];
                        }
                    }
                }
                x.push(acc * norm);
            }
        }
    }
    Ok(Glimpse { x, l, clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn translated_spec_length() {
        let spec = FoveationSpec::new(12, 3, 2).unwrap();
        let img = vec![0.5; 3600];
        let g = foveate(&img, 60, 60, [0.1, -0.3], &spec).unwrap();
        assert_eq!(g.x.len(), 432);
    }

    #[test]
    fn zero_image_gives_zero_glimpse() {
        let spec = FoveationSpec::new(4, 2, 2).unwrap();
        let g = foveate(&[0.0; 100], 10, 10, [0.9, -1.0], &spec).unwrap();
        assert!(g.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn center_of_constant_odd_image() {
        let spec = FoveationSpec::new(5, 1, 2).unwrap();
        let g = foveate(&[0.7; 81], 9, 9, [0.0, 0.0], &spec).unwrap();
        assert!(g.x.iter().all(|&v| v == 0.7));
    }

    #[test]
    fn window_indexing_and_pooling() {
        // 4×4 image holding its own pixel index.
        let img: Vec<f64> = (0..16).map(|v| v as f64 / 16.0).collect();
        let fine = FoveationSpec::new(2, 1, 2).unwrap();
        // Top-left corner: window rows/cols −1..1, so only (0,0) is inside.
        let g = foveate(&img, 4, 4, [-1.0, -1.0], &fine).unwrap();
        assert_eq!(g.x, vec![0.0, 0.0, 0.0, 0.0]);
        // l = (1/3, −1/3) → pixel (row 1, col 2); window rows 0..2, cols 1..3.
        let g = foveate(&img, 4, 4, [1.0 / 3.0, -1.0 / 3.0], &fine).unwrap();
        assert_eq!(g.x, vec![1.0 / 16.0, 2.0 / 16.0, 5.0 / 16.0, 6.0 / 16.0]);
        // The 4×4 window pooled to 1×1 at the same center covers rows −1..3 and cols 0..4.
        let coarse = FoveationSpec::new(1, 3, 2).unwrap();
        let g = foveate(&img, 4, 4, [1.0 / 3.0, -1.0 / 3.0], &coarse).unwrap();
        let expected = (0..12).map(|v| v as f64 / 16.0).sum::<f64>() / 16.0;
        assert_eq!(g.x[2], expected);
    }

    #[test]
    fn out_of_range_location_is_clamped() {
        let spec = FoveationSpec::new(2, 1, 2).unwrap();
        let img = vec![0.2; 16];
        let g = foveate(&img, 4, 4, [1.5, -0.2], &spec).unwrap();
        assert!(g.clamped);
        assert_eq!(g.l, [1.0, -0.2]);
        assert!(!foveate(&img, 4, 4, [0.5, -0.2], &spec).unwrap().clamped);
        assert!(foveate(&img, 4, 4, [f64::NAN, 0.0], &spec).is_err());
        assert!(FoveationSpec::new(4, 2, 1).is_err());
        assert!(FoveationSpec::new(0, 1, 2).is_err());
    }

    proptest! {
        #[test]
        fn values_stay_in_unit_interval(
            pixels in proptest::collection::vec(0.0f64..=1.0, 64),
            lx in -1.5f64..1.5, ly in -1.5f64..1.5,
        ) {
            let spec = FoveationSpec::new(2, 3, 2).unwrap();
            let g = foveate(&pixels, 8, 8, [lx, ly], &spec).unwrap();
            prop_assert!(g.x.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));
        }

        #[test]
        fn translation_consistency(
            pixels in proptest::collection::vec(0.0f64..=1.0, 144),
            dr in 0usize..3, dc in 0usize..3,
        ) {
            // Shift a 12×12 image by (dr, dc) inside a 16×16 canvas and move
            // the fixation by the same number of pixels.
            let spec = FoveationSpec::new(2, 2, 2).unwrap();
            let mut a = vec![0.0; 256];
            let mut b = vec![0.0; 256];
            for r in 0..12 {
                for c in 0..12 {
                    a[(r + 2) * 16 + c + 2] = pixels[r * 12 + c];
                    b[(r + 2 + dr) * 16 + c + 2 + dc] = pixels[r * 12 + c];
                }
            }
            for (pr, pc) in [(6usize, 6usize), (7, 5), (8, 9)] {
                let la = [normalized_coord(pc, 16), normalized_coord(pr, 16)];
                let lb = [normalized_coord(pc + dc, 16), normalized_coord(pr + dr, 16)];
                let ga = foveate(&a, 16, 16, la, &spec).unwrap();
                let gb = foveate(&b, 16, 16, lb, &spec).unwrap();
                prop_assert_eq!(ga.x, gb.x);
            }
        }
    }
}
