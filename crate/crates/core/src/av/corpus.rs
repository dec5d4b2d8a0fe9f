//! Labelled grayscale image sets.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::sampling::standard_normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Same-sized row-major images with values in [0, 1] and labels in `0..n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageCorpus {
    height: usize,
    width: usize,
    n_classes: usize,
    images: Vec<Vec<f64>>,
    labels: Vec<usize>,
    split: Split,
}

impl ImageCorpus {
    pub fn new(
        height: usize,
        width: usize,
        n_classes: usize,
        images: Vec<Vec<f64>>,
        labels: Vec<usize>,
        split: Split,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidParams("images must be non-empty".into()));
        }
        if images.len() != labels.len() {
            return Err(Error::InvalidParams(format!("{} images but {} labels", images.len(), labels.len())));
        }
        for img in &images {
            if img.len() != height * width {
                return Err(Error::DimensionMismatch { expected: height * width, got: img.len() });
            }
            if img.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidParams("pixel values must lie in [0, 1]".into()));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::IndexOutOfRange { index: bad, bound: n_classes });
        }
        Ok(Self { height, width, n_classes, images, labels, split })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image(&self, i: usize) -> &[f64] {
        &self.images[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// The first `n` images, in order.
    pub fn take(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self { images: self.images[..n].to_vec(), labels: self.labels[..n].to_vec(), ..self.clone() }
    }
}

pub const GLYPH_ROWS: usize = 7;
pub const GLYPH_COLS: usize = 5;
/// Upscaling factor from font cells to pixels.
pub const GLYPH_SCALE: usize = 4;

/// 7×5 bitmap digits, one string of 35 cells per class, row-major.
const FONT: [&str; 10] = [
    "01110100011001110101110011000101110",
    "00100011000010000100001000010001110",
    "01110100010000100010001000100011111",
    "11111000100010000010000011000101110",
    "00010001100101010010111110001000010",
    "11111100001111000001000011000101110",
    "00110010001000011110100011000101110",
    "11111000010001000100010000100001000",
    "01110100011000101110100011000101110",
    "01110100011000101111000010001001100",
];

/// Upscaled binary glyph of `digit`, `GLYPH_ROWS·GLYPH_SCALE × GLYPH_COLS·GLYPH_SCALE`.
pub fn glyph(digit: usize) -> Vec<f64> {
    let cells = FONT[digit].as_bytes();
    let (h, w) = (GLYPH_ROWS * GLYPH_SCALE, GLYPH_COLS * GLYPH_SCALE);
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            if cells[(r / GLYPH_SCALE) * GLYPH_COLS + c / GLYPH_SCALE] == b'1' {
                out[r * w + c] = 1.0;
            }
        }
    }
    out
}

/// Ten-class digit corpus rendered from the built-in font on a square
/// `image_size` canvas, `n_per_class` images per class in class-interleaved
/// order. Glyphs are centered, or placed uniformly at random (fully inside
/// the frame) when `translated`; then every pixel gets N(0, noise_std²)
/// noise clipped to [0, 1].
pub fn make_glyph_corpus<R: Rng + ?Sized>(
    n_per_class: usize,
    image_size: usize,
    translated: bool,
    noise_std: f64,
    split: Split,
    rng: &mut R,
) -> Result<ImageCorpus> {
    let (gh, gw) = (GLYPH_ROWS * GLYPH_SCALE, GLYPH_COLS * GLYPH_SCALE);
    if image_size < gh {
        return Err(Error::InvalidParams(format!("image size {image_size} is smaller than the {gh}×{gw} glyph")));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::InvalidParams(format!("noise_std must be ≥ 0, got {noise_std}")));
    }
    let glyphs: Vec<Vec<f64>> = (0..10).map(glyph).collect();
    let mut images = Vec::with_capacity(10 * n_per_class);
    let mut labels = Vec::with_capacity(10 * n_per_class);
    for _ in 0..n_per_class {
        for (label, g) in glyphs.iter().enumerate() {
            let (top, left) = if translated {
                (rng.random_range(0..=image_size - gh), rng.random_range(0..=image_size - gw))
            } else {
                ((image_size - gh) / 2, (image_size - gw) / 2)
            };
            let mut img = vec![0.0; image_size * image_size];
            for r in 0..gh {
                let dst = (top + r) * image_size + left;
                img[dst..dst + gw].copy_from_slice(&g[r * gw..(r + 1) * gw]);
            }
            if noise_std > 0.0 {
                for v in &mut img {
                    *v = (*v + noise_std * standard_normal(rng)).clamp(0.0, 1.0);
                }
            }
            images.push(img);
            labels.push(label);
        }
    }
    ImageCorpus::new(image_size, image_size, 10, images, labels, split)
}
