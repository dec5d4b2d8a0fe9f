//! Imagined images assembled from generated patches.

use rand::Rng;

use super::foveate::{normalized_coord, pixel_center};
use super::vae::HierarchicalVae;
use crate::error::{Error, Result};
use crate::numerics::sampling::standard_normal;

/// `n × n` grid of locations whose `patch`-sized squares tile the center of
/// a `size × size` canvas.
pub fn central_grid(n: usize, size: usize, patch: usize) -> Vec<[f64; 2]> {
    let span = n * patch;
    let start = size.saturating_sub(span) / 2;
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let (pr, pc) = (start + r * patch + patch / 2, start + c * patch + patch / 2);
            out.push([normalized_coord(pc, size), normalized_coord(pr, size)]);
        }
    }
    out
}

/// For each location, samples z′ ~ p(z | s, l), decodes it and pastes the
/// finest-scale `patch × patch` block at the location's pixel center (same
/// window convention as the sensor). Overlaps are averaged; uncovered
/// pixels are 0.
pub fn generate_stitched<R: Rng + ?Sized>(
    vae: &HierarchicalVae,
    s: &[f64],
    locations: &[[f64; 2]],
    height: usize,
    width: usize,
    patch: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if patch * patch > vae.dims().glimpse {
        return Err(Error::InvalidParams(format!("patch {patch} exceeds the glimpse length")));
    }
    let mut sum = vec![0.0; height * width];
    let mut count = vec![0u32; height * width];
    for &l in locations {
        let prior = vae.prior_z(s, l)?;
        let eps: Vec<f64> = (0..prior.dim()).map(|_| standard_normal(rng)).collect();
        let x = vae.decode_glimpse(&prior.transform_noise(&eps))?;
        let l = [l[0].clamp(-1.0, 1.0), l[1].clamp(-1.0, 1.0)];
        let top = pixel_center(l[1], height) as isize - (patch / 2) as isize;
        let left = pixel_center(l[0], width) as isize - (patch / 2) as isize;
        for pr in 0..patch {
            for pc in 0..patch {
                let (r, c) = (top + pr as isize, left + pc as isize);
                if r >= 0 && c >= 0 && (r as usize) < height && (c as usize) < width {
                    let i = r as usize * width + c as usize;
                    sum[i] += x[pr * patch + pc];
                    count[i] += 1;
                }
            }
        }
    }
    Ok(sum.iter().zip(&count).map(|(&s, &n)| if n == 0 { 0.0 } else { s / f64::from(n) }).collect())
}
