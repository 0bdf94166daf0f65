//! Image ingestion, colour transforms and per-region histograms.

mod histogram;
mod planes;
mod raster;

pub use histogram::{bin_index, compute_region_histograms, region_bounds, HistogramGrid, RegionHistogramGrid};
pub use planes::{merge_rgb, split_rgb, to_opponent, ChannelId, ChannelPlane};
pub use raster::{resize_image, RasterImage};

/// Opponent-space histograms (O1, O2, O3) used by the spatial stream.
pub fn opponent_histograms(
    img: &RasterImage,
    grid_rows: usize,
    grid_cols: usize,
    bins: usize,
) -> crate::Result<RegionHistogramGrid> {
    RegionHistogramGrid::from_planes(
        [ChannelId::O1, ChannelId::O2, ChannelId::O3],
        &to_opponent(img),
        grid_rows,
        grid_cols,
        bins,
    )
}

/// RGB histograms used by the channel stream.
pub fn rgb_histograms(
    img: &RasterImage,
    grid_rows: usize,
    grid_cols: usize,
    bins: usize,
) -> crate::Result<RegionHistogramGrid> {
    RegionHistogramGrid::from_planes(
        [ChannelId::R, ChannelId::G, ChannelId::B],
        &split_rgb(img),
        grid_rows,
        grid_cols,
        bins,
    )
}
