//! Synthetic colour-texture classes and a luminance-gradient descriptor stream.
//!
//! Each class is a pair of hues laid out as oriented stripes with hard colour
//! boundaries. Hue, orientation, stripe period, phase and pixel noise are jittered per
//! image, so classes are separable by their colour contrasts but no two images agree.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::colorgrid::{region_bounds, resize_image, RasterImage};
use crate::descriptor::{DescriptorSet, StreamKind};
use crate::error::{Error, Result};

/// Hue pairs in degrees, one per class.
const HUE_PAIRS: [(f64, f64); 8] = [
    (0.0, 120.0),
    (0.0, 240.0),
    (60.0, 240.0),
    (120.0, 300.0),
    (30.0, 180.0),
    (90.0, 330.0),
    (200.0, 40.0),
    (270.0, 150.0),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub per_class: usize,
    /// Images per class assigned to the train split; the rest are test.
    pub train_per_class: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: 5,
            per_class: 40,
            train_per_class: 30,
            width: 160,
            height: 160,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.classes > HUE_PAIRS.len() {
            return Err(Error::config(format!(
                "synthetic classes must be in 2..={}",
                HUE_PAIRS.len()
            )));
        }
        if self.train_per_class == 0 || self.train_per_class >= self.per_class {
            return Err(Error::config("each class needs train and test images"));
        }
        if self.width < 16 || self.height < 16 {
            return Err(Error::config("synthetic images must be at least 16x16"));
        }
        Ok(())
    }

    pub fn class_name(class: usize) -> String {
        format!("class{class}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticImage {
    pub id: String,
    pub label: String,
    pub train: bool,
    pub image: RasterImage,
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0]
}

/// Renders image `index` of `class`; depends only on `(spec.seed, class, index)`.
pub fn render(spec: &SyntheticSpec, class: usize, index: usize) -> Result<RasterImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(
        spec.seed ^ ((class as u64) << 32) ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    let (h1, h2) = HUE_PAIRS[class];
    let colors = [
        hsv_to_rgb(
            h1 + rng.random_range(-12.0..12.0),
            rng.random_range(0.6..1.0),
            rng.random_range(0.6..1.0),
        ),
        hsv_to_rgb(
            h2 + rng.random_range(-12.0..12.0),
            rng.random_range(0.6..1.0),
            rng.random_range(0.6..1.0),
        ),
    ];
    let angle = class as f64 * PI / spec.classes as f64 + rng.random_range(-0.2..0.2);
    let (dx, dy) = (angle.cos(), angle.sin());
    let period = rng.random_range(10.0..22.0);
    let phase = rng.random_range(0.0..period);
    let noise = 12.0;
    RasterImage::from_fn(spec.width, spec.height, |x, y| {
        let t = (x as f64 * dx + y as f64 * dy + phase).rem_euclid(period);
        let base = colors[usize::from(t >= period / 2.0)];
        let mut px = [0u8; 3];
        for (p, b) in px.iter_mut().zip(base) {
            *p = (b + rng.random_range(-noise..noise)).round().clamp(0.0, 255.0) as u8;
        }
        px
    })
}

/// Generates the whole dataset, classes in order, images within a class in order.
pub fn generate(spec: &SyntheticSpec) -> Result<Vec<SyntheticImage>> {
    spec.validate()?;
    (0..spec.classes * spec.per_class)
        .into_par_iter()
        .map(|i| {
            let (class, index) = (i / spec.per_class, i % spec.per_class);
            let label = SyntheticSpec::class_name(class);
            Ok(SyntheticImage {
                id: format!("{label}/img{index:03}.png"),
                label,
                train: index < spec.train_per_class,
                image: render(spec, class, index)?,
            })
        })
        .collect()
}

/// Writes the dataset as PNG files plus a `manifest.csv` under `dir` and returns the
/// manifest path.
pub fn write_dataset(dir: &Path, spec: &SyntheticSpec) -> Result<PathBuf> {
    let images = generate(spec)?;
    let mut manifest = String::from("image_path,label,split\n");
    for img in &images {
        let path = dir.join(&img.id);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        img.image.save(&path)?;
        let split = if img.train { "train" } else { "test" };
        let _ = writeln!(manifest, "{},{},{}", img.id, img.label, split);
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest)?;
    Ok(path)
}

/// Separable [1 2 1]/4 smoothing with edge clamping.
fn binomial_blur(v: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut tmp = vec![0.0; v.len()];
    for y in 0..h {
        for x in 0..w {
            let l = v[y * w + x.saturating_sub(1)];
            let r = v[y * w + (x + 1).min(w - 1)];
            tmp[y * w + x] = 0.25 * l + 0.5 * v[y * w + x] + 0.25 * r;
        }
    }
    let mut out = vec![0.0; v.len()];
    for y in 0..h {
        for x in 0..w {
            let u = tmp[y.saturating_sub(1) * w + x];
            let d = tmp[(y + 1).min(h - 1) * w + x];
            out[y * w + x] = 0.25 * u + 0.5 * tmp[y * w + x] + 0.25 * d;
        }
    }
    out
}

/// Orientation bins per region in the gradient stream.
pub const GRADIENT_BINS: usize = 8;

/// Dense luminance-gradient descriptors on the same 3x3-region patch lattice as the
/// colour streams: per region a magnitude-weighted histogram of gradient orientation
/// (`GRADIENT_BINS` bins over the full circle, votes split linearly between
/// neighbouring bins) computed on binomially smoothed luminance, nine regions per patch
/// concatenated and L2-normalized. Colour information is discarded.
pub fn gradient_descriptors(
    image_id: &str,
    img: &RasterImage,
    resize: (usize, usize),
    grid_rows: usize,
    grid_cols: usize,
) -> Result<DescriptorSet> {
    if grid_rows < 3 || grid_cols < 3 {
        return Err(Error::config("grid must be at least 3x3"));
    }
    let img = resize_image(img, resize.0, resize.1)?;
    let (w, h) = (img.width(), img.height());
    if w < grid_cols || h < grid_rows {
        return Err(Error::config("image is smaller than the region grid"));
    }
    let lum: Vec<f64> = img
        .data()
        .chunks_exact(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect();
    let lum = binomial_blur(&lum, w, h);
    let at = |x: usize, y: usize| lum[y * w + x];

    let mut regions = vec![0.0; grid_rows * grid_cols * GRADIENT_BINS];
    for r in 0..grid_rows {
        let (y0, y1) = region_bounds(h, grid_rows, r);
        for c in 0..grid_cols {
            let (x0, x1) = region_bounds(w, grid_cols, c);
            let hist = &mut regions[(r * grid_cols + c) * GRADIENT_BINS..][..GRADIENT_BINS];
            for y in y0..y1 {
                for x in x0..x1 {
                    let gx = at((x + 1).min(w - 1), y) - at(x.saturating_sub(1), y);
                    let gy = at(x, (y + 1).min(h - 1)) - at(x, y.saturating_sub(1));
                    let mag = gx.hypot(gy);
                    if mag == 0.0 {
                        continue;
                    }
                    // linear vote between the two nearest bin centres
                    let pos = gy.atan2(gx).rem_euclid(2.0 * PI) / (2.0 * PI) * GRADIENT_BINS as f64 - 0.5;
                    let lo = pos.floor();
                    let frac = pos - lo;
                    let b0 = (lo as isize).rem_euclid(GRADIENT_BINS as isize) as usize;
                    hist[b0] += mag * (1.0 - frac);
                    hist[(b0 + 1) % GRADIENT_BINS] += mag * frac;
                }
            }
        }
    }

    let (rows, cols) = (grid_rows - 2, grid_cols - 2);
    let dim = 9 * GRADIENT_BINS;
    let mut values = Vec::with_capacity(rows * cols * dim);
    let mut patch = Vec::with_capacity(dim);
    for pr in 0..rows {
        for pc in 0..cols {
            patch.clear();
            for r in pr..pr + 3 {
                for c in pc..pc + 3 {
                    patch.extend_from_slice(&regions[(r * grid_cols + c) * GRADIENT_BINS..][..GRADIENT_BINS]);
                }
            }
            let norm = patch.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = if norm > 0.0 { 1.0 / norm } else { 0.0 };
            values.extend(patch.iter().map(|v| (v * scale) as f32));
        }
    }
    DescriptorSet::new(image_id, StreamKind::External, dim, rows, cols, values)
}
