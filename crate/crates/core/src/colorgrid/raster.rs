use std::path::Path;

use crate::error::{Error, Result};
use crate::formats;

/// Decoded 8-bit RGB image, row-major, channel-interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::input(format!("image has zero dimension {width}x{height}")));
        }
        if data.len() != width * height * 3 {
            return Err(Error::input(format!(
                "image data has {} bytes, expected {width}x{height}x3",
                data.len()
            )));
        }
        Ok(RasterImage { width, height, data })
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        Self::from_fn(width, height, |_, _| rgb)
    }

    /// Loads PNG/JPEG through the `image` crate, or the raw `LCCDIMG1` fixture format.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path.as_ref())?;
        Self::decode(&bytes)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(formats::IMAGE_MAGIC) {
            return formats::read_raw_image(&mut &bytes[..]);
        }
        let rgb = image::load_from_memory(bytes)?.to_rgb8();
        let (w, h) = rgb.dimensions();
        Self::new(w as usize, h as usize, rgb.into_raw())
    }

    /// Writes a PNG (or `LCCDIMG1` when the extension is `.lccdimg`).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if path.extension().is_some_and(|e| e == "lccdimg") {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            return formats::write_raw_image(&mut f, self);
        }
        image::save_buffer(
            path,
            &self.data,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
        )?;
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn flip_horizontal(&self) -> RasterImage {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            for x in (0..self.width).rev() {
                data.extend_from_slice(&self.pixel(x, y));
            }
        }
        RasterImage {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// Bilinear resize with pixel-centre alignment and edge clamping.
///
/// Output pixel `x` samples the source at `(x + 0.5) * src_w / dst_w - 0.5`; results are
/// rounded to the nearest integer.
pub fn resize_image(img: &RasterImage, target_w: usize, target_h: usize) -> Result<RasterImage> {
    if img.width == 0 || img.height == 0 {
        return Err(Error::input("cannot resize an image with a zero dimension"));
    }
    if target_w == 0 || target_h == 0 {
        return Err(Error::input(format!("invalid resize target {target_w}x{target_h}")));
    }
    if target_w == img.width && target_h == img.height {
        return Ok(img.clone());
    }

    let xs = sample_taps(img.width, target_w);
    let ys = sample_taps(img.height, target_h);
    let mut data = Vec::with_capacity(target_w * target_h * 3);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let p00 = img.pixel(x0, y0);
            let p01 = img.pixel(x1, y0);
            let p10 = img.pixel(x0, y1);
            let p11 = img.pixel(x1, y1);
            for c in 0..3 {
                let top = f64::from(p00[c]) * (1.0 - fx) + f64::from(p01[c]) * fx;
                let bottom = f64::from(p10[c]) * (1.0 - fx) + f64::from(p11[c]) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage::new(target_w, target_h, data)
}

/// For each destination coordinate: (lower source index, upper source index, upper weight).
fn sample_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    let max = (src - 1) as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let lo = s.floor();
            let hi = (lo + 1.0).min(max);
            (lo as usize, hi as usize, s - lo)
        })
        .collect()
}
