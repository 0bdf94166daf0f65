use crate::colorgrid::{ChannelId, ChannelPlane};
use crate::error::{Error, Result};

/// `rows x cols` grid of `bins`-bin probability histograms for one channel plane.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramGrid {
    rows: usize,
    cols: usize,
    bins: usize,
    data: Vec<f64>,
    /// Regions that contained no pixels and were given a uniform histogram.
    empty_regions: usize,
}

impl HistogramGrid {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn empty_regions(&self) -> usize {
        self.empty_regions
    }

    pub fn histogram(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.cols + col) * self.bins;
        &self.data[start..start + self.bins]
    }

    pub fn same_shape(&self, other: &HistogramGrid) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.bins == other.bins
    }
}

/// Histogram grids for the three planes of one colour space, sharing a shape.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionHistogramGrid {
    channels: [ChannelId; 3],
    grids: [HistogramGrid; 3],
}

impl RegionHistogramGrid {
    pub fn new(channels: [ChannelId; 3], grids: [HistogramGrid; 3]) -> Result<Self> {
        if !grids[0].same_shape(&grids[1]) || !grids[0].same_shape(&grids[2]) {
            return Err(Error::input("channel histogram grids differ in shape"));
        }
        Ok(RegionHistogramGrid { channels, grids })
    }

    /// Histograms every plane over the same grid.
    pub fn from_planes(
        channels: [ChannelId; 3],
        planes: &[ChannelPlane; 3],
        rows: usize,
        cols: usize,
        bins: usize,
    ) -> Result<Self> {
        let [a, b, c] = planes;
        Self::new(
            channels,
            [
                compute_region_histograms(a, rows, cols, bins)?,
                compute_region_histograms(b, rows, cols, bins)?,
                compute_region_histograms(c, rows, cols, bins)?,
            ],
        )
    }

    pub fn grid_rows(&self) -> usize {
        self.grids[0].rows
    }

    pub fn grid_cols(&self) -> usize {
        self.grids[0].cols
    }

    pub fn bins(&self) -> usize {
        self.grids[0].bins
    }

    pub fn channels(&self) -> [ChannelId; 3] {
        self.channels
    }

    pub fn grid(&self, index: usize) -> &HistogramGrid {
        &self.grids[index]
    }

    pub fn channel(&self, id: ChannelId) -> Option<&HistogramGrid> {
        self.channels.iter().position(|&c| c == id).map(|i| &self.grids[i])
    }
}

/// Pixel span `[start, end)` of partition `index` when `len` pixels are split into `parts`.
pub fn region_bounds(len: usize, parts: usize, index: usize) -> (usize, usize) {
    (index * len / parts, (index + 1) * len / parts)
}

/// Bin index of `v` for a uniform `bins`-bin partition of `[lo, hi]`.
pub fn bin_index(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let t = (v - lo) / (hi - lo) * bins as f64;
    // snap values within rounding noise of a bin edge onto the edge
    let r = t.round();
    let t = if (t - r).abs() < 1e-9 { r } else { t };
    (t.floor().max(0.0) as usize).min(bins - 1)
}

/// Splits `plane` into a `grid_rows x grid_cols` floor partition and histograms each region.
pub fn compute_region_histograms(
    plane: &ChannelPlane,
    grid_rows: usize,
    grid_cols: usize,
    bins: usize,
) -> Result<HistogramGrid> {
    if grid_rows < 3 || grid_cols < 3 {
        return Err(Error::input(format!(
            "grid {grid_rows}x{grid_cols} is smaller than 3x3"
        )));
    }
    if bins < 2 {
        return Err(Error::input(format!("need at least 2 bins, got {bins}")));
    }
    let (w, h) = (plane.width(), plane.height());
    if w < grid_cols || h < grid_rows {
        return Err(Error::input(format!(
            "plane {w}x{h} is smaller than the {grid_cols}x{grid_rows} region grid"
        )));
    }
    let (lo, hi) = plane.range();
    let mut data = vec![0.0; grid_rows * grid_cols * bins];
    let mut empty_regions = 0;
    for r in 0..grid_rows {
        let (y0, y1) = region_bounds(h, grid_rows, r);
        for c in 0..grid_cols {
            let (x0, x1) = region_bounds(w, grid_cols, c);
            let hist = &mut data[(r * grid_cols + c) * bins..][..bins];
            let mut count = 0usize;
            for y in y0..y1 {
                for x in x0..x1 {
                    hist[bin_index(plane.get(x, y), lo, hi, bins)] += 1.0;
                    count += 1;
                }
            }
            if count == 0 {
                log::warn!("region ({r}, {c}) is empty; using a uniform histogram");
                empty_regions += 1;
                hist.fill(1.0 / bins as f64);
            } else {
                let n = count as f64;
                hist.iter_mut().for_each(|v| *v /= n);
            }
        }
    }
    Ok(HistogramGrid {
        rows: grid_rows,
        cols: grid_cols,
        bins,
        data,
        empty_regions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(w: usize, h: usize, f: impl Fn(usize, usize) -> f64, lo: f64, hi: f64) -> ChannelPlane {
        let mut v = Vec::new();
        for y in 0..h {
            for x in 0..w {
                v.push(f(x, y));
            }
        }
        ChannelPlane::new(w, h, v, lo, hi).unwrap()
    }

    #[test]
    fn constant_plane_gives_one_hot() {
        let p = plane(47, 38, |_, _| 100.0, 0.0, 255.0);
        let g = compute_region_histograms(&p, 5, 5, 20).unwrap();
        let bin = bin_index(100.0, 0.0, 255.0, 20);
        assert_eq!(bin, 7);
        for r in 0..5 {
            for c in 0..5 {
                let h = g.histogram(r, c);
                assert_eq!(h[bin], 1.0);
                assert_eq!(h.iter().sum::<f64>(), 1.0);
            }
        }
    }

    #[test]
    fn half_split_two_bins() {
        // each region spans an even number of columns alternating low/high values
        let p = plane(40, 30, |x, _| if x % 2 == 0 { 10.0 } else { 200.0 }, 0.0, 255.0);
        let g = compute_region_histograms(&p, 3, 4, 2).unwrap();
        for r in 0..3 {
            for c in 0..4 {
                // brute-force count over the region's pixels
                let (y0, y1) = region_bounds(30, 3, r);
                let (x0, x1) = region_bounds(40, 4, c);
                let n = ((y1 - y0) * (x1 - x0)) as f64;
                let low = (y0..y1)
                    .flat_map(|y| (x0..x1).map(move |x| (x, y)))
                    .filter(|&(x, y)| p.get(x, y) < 127.5)
                    .count() as f64;
                let h = g.histogram(r, c);
                assert_eq!(h[0], low / n);
                assert!((h[0] - 0.5).abs() <= 1.0 / n);
            }
        }
    }

    #[test]
    fn partition_covers_every_pixel_once() {
        for (len, parts) in [(470, 50), (380, 50), (7, 3), (100, 100)] {
            let mut total = 0;
            let mut sizes = Vec::new();
            for i in 0..parts {
                let (a, b) = region_bounds(len, parts, i);
                if i > 0 {
                    assert_eq!(a, region_bounds(len, parts, i - 1).1);
                }
                sizes.push(b - a);
                total += b - a;
            }
            assert_eq!(total, len);
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn bin_edges() {
        assert_eq!(bin_index(0.0, 0.0, 255.0, 20), 0);
        assert_eq!(bin_index(255.0, 0.0, 255.0, 20), 19);
        assert_eq!(bin_index(-1.0, 0.0, 255.0, 20), 0);
        // 51 sits exactly on the edge between bins 3 and 4
        assert_eq!(bin_index(51.0, 0.0, 255.0, 20), 4);
        let s2 = 2f64.sqrt();
        // O1 for R - G = 153 lands exactly on edge 16 after the irrational scaling
        assert_eq!(bin_index(153.0 / s2, -255.0 / s2, 255.0 / s2, 20), 16);
    }

    #[test]
    fn rejects_small_planes_and_bad_config() {
        let p = plane(4, 4, |_, _| 0.0, 0.0, 1.0);
        assert!(compute_region_histograms(&p, 5, 3, 4).is_err());
        assert!(compute_region_histograms(&p, 3, 3, 1).is_err());
        assert!(compute_region_histograms(&p, 2, 3, 4).is_err());
    }
}
