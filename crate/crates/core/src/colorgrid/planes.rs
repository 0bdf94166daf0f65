use std::f64::consts::SQRT_2;

use crate::colorgrid::RasterImage;
use crate::error::{Error, Result};

/// Identifies a single-channel plane and fixes its analytic value range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelId {
    O1,
    O2,
    O3,
    R,
    G,
    B,
}

const SQRT_3: f64 = 1.732_050_807_568_877_2;
const SQRT_6: f64 = 2.449_489_742_783_178;

impl ChannelId {
    /// Declared `[lo, hi]` range of the channel over all 8-bit RGB inputs.
    pub fn range(self) -> (f64, f64) {
        match self {
            ChannelId::O1 => (-255.0 / SQRT_2, 255.0 / SQRT_2),
            ChannelId::O2 => (-510.0 / SQRT_6, 510.0 / SQRT_6),
            ChannelId::O3 => (0.0, 765.0 / SQRT_3),
            ChannelId::R | ChannelId::G | ChannelId::B => (0.0, 255.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelId::O1 => "O1",
            ChannelId::O2 => "O2",
            ChannelId::O3 => "O3",
            ChannelId::R => "R",
            ChannelId::G => "G",
            ChannelId::B => "B",
        }
    }
}

/// Real-valued single-channel image with a declared value range.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPlane {
    width: usize,
    height: usize,
    values: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl ChannelPlane {
    pub fn new(width: usize, height: usize, values: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::input(format!(
                "plane has {} samples, expected {width}x{height}",
                values.len()
            )));
        }
        if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
            return Err(Error::input(format!("empty plane range [{lo}, {hi}]")));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= lo && **v <= hi)) {
            return Err(Error::input(format!("plane value {v} outside [{lo}, {hi}]")));
        }
        Ok(ChannelPlane {
            width,
            height,
            values,
            lo,
            hi,
        })
    }

    fn from_image(img: &RasterImage, channel: ChannelId, f: impl Fn([u8; 3]) -> f64) -> ChannelPlane {
        let (lo, hi) = channel.range();
        let values = img
            .data()
            .chunks_exact(3)
            // rounding can nudge extreme values a hair outside the analytic range
            .map(|p| f([p[0], p[1], p[2]]).clamp(lo, hi))
            .collect();
        ChannelPlane {
            width: img.width(),
            height: img.height(),
            values,
            lo,
            hi,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Opponent colour transform: O1 = (R-G)/sqrt2, O2 = (R+G-2B)/sqrt6, O3 = (R+G+B)/sqrt3.
pub fn to_opponent(img: &RasterImage) -> [ChannelPlane; 3] {
    [
        ChannelPlane::from_image(img, ChannelId::O1, |[r, g, _]| (f64::from(r) - f64::from(g)) / SQRT_2),
        ChannelPlane::from_image(img, ChannelId::O2, |[r, g, b]| {
            (f64::from(r) + f64::from(g) - 2.0 * f64::from(b)) / SQRT_6
        }),
        ChannelPlane::from_image(img, ChannelId::O3, |[r, g, b]| {
            (f64::from(r) + f64::from(g) + f64::from(b)) / SQRT_3
        }),
    ]
}

pub fn split_rgb(img: &RasterImage) -> [ChannelPlane; 3] {
    [
        ChannelPlane::from_image(img, ChannelId::R, |p| f64::from(p[0])),
        ChannelPlane::from_image(img, ChannelId::G, |p| f64::from(p[1])),
        ChannelPlane::from_image(img, ChannelId::B, |p| f64::from(p[2])),
    ]
}

/// Inverse of [`split_rgb`]. Values are rounded and clamped to `0..=255`.
pub fn merge_rgb(planes: &[ChannelPlane; 3]) -> Result<RasterImage> {
    let (w, h) = (planes[0].width, planes[0].height);
    if planes.iter().any(|p| p.width != w || p.height != h) {
        return Err(Error::input("planes differ in size"));
    }
    let mut data = Vec::with_capacity(w * h * 3);
    for i in 0..w * h {
        for p in planes {
            data.push(p.values[i].round().clamp(0.0, 255.0) as u8);
        }
    }
    RasterImage::new(w, h, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(rgb: [u8; 3]) -> RasterImage {
        RasterImage::filled(1, 1, rgb).unwrap()
    }

    #[test]
    fn white_has_zero_opponent_colour() {
        let [o1, o2, o3] = to_opponent(&single([255, 255, 255]));
        assert_eq!(o1.values()[0], 0.0);
        assert_eq!(o2.values()[0], 0.0);
        assert!((o3.values()[0] - 255.0 * 3f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn black_maps_to_origin() {
        let planes = to_opponent(&single([0, 0, 0]));
        assert!(planes.iter().all(|p| p.values()[0] == 0.0));
    }

    #[test]
    fn pure_red_substitution() {
        let [o1, o2, o3] = to_opponent(&single([255, 0, 0]));
        assert!((o1.values()[0] - 255.0 / 2f64.sqrt()).abs() < 1e-9);
        assert!((o2.values()[0] - 255.0 / 6f64.sqrt()).abs() < 1e-9);
        assert!((o3.values()[0] - 255.0 / 3f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn extremes_stay_in_declared_range() {
        for rgb in [
            [255, 0, 0],
            [0, 255, 0],
            [0, 0, 255],
            [255, 255, 0],
            [255, 255, 255],
            [0, 0, 0],
        ] {
            for p in to_opponent(&single(rgb)) {
                let (lo, hi) = p.range();
                assert!(p.values()[0] >= lo && p.values()[0] <= hi, "{rgb:?}");
            }
        }
        assert!(ChannelPlane::new(1, 1, vec![2.0], 0.0, 1.0).is_err());
    }

    #[test]
    fn split_copies_channels() {
        let [r, g, b] = split_rgb(&single([10, 20, 30]));
        assert_eq!((r.values()[0], g.values()[0], b.values()[0]), (10.0, 20.0, 30.0));
    }

    #[test]
    fn split_merge_round_trip() {
        let img = RasterImage::from_fn(7, 4, |x, y| [(x * 31) as u8, (y * 50) as u8, (x * y) as u8]).unwrap();
        assert_eq!(merge_rgb(&split_rgb(&img)).unwrap(), img);
    }

    #[test]
    fn gray_image_zeroes_colour_opponents() {
        let img = RasterImage::from_fn(6, 6, |x, y| {
            let v = (x * 40 + y * 3) as u8;
            [v, v, v]
        })
        .unwrap();
        let [o1, o2, _] = to_opponent(&img);
        assert!(o1.values().iter().all(|&v| v == 0.0));
        assert!(o2.values().iter().all(|&v| v == 0.0));
    }
}
