//! Local color contrastive descriptors (LCCD).
//!
//! The crate turns RGB images into two dense descriptor streams and then into
//! fixed-length image encodings suitable for a linear classifier:
//!
//! 1. [`colorgrid`]: resize, split into opponent (O1, O2, O3) and RGB planes, and
//!    compute a `d`-bin probability histogram for each cell of a region grid.
//! 2. [`divergence`]: f-divergences between histograms, including the sliding
//!    window ("subspace") variant that yields `d - d1 + 1` values per pair.
//! 3. [`descriptor`]: for every 3x3 block of regions, the spatial stream compares
//!    the centre region with its 8 neighbours in each opponent channel, and the
//!    channel stream compares colour channels (RG, RB by default) region by region.
//! 4. [`reduction`]: PCA per stream.
//! 5. [`encoding`]: diagonal GMM codebook trained with EM and Fisher Vector encoding.
//! 6. [`classify`]: one-vs-rest linear SVM and an evaluation harness.
//!
//! [`pipeline`] wires these stages together behind the `lccd` command-line tool and
//! [`formats`] holds the little-endian binary artifact formats shared by all stages.

pub mod classify;
pub mod colorgrid;
pub mod descriptor;
pub mod divergence;
pub mod encoding;
pub mod error;
pub mod formats;
pub mod linalg;
pub mod pipeline;
pub mod reduction;
pub mod synthetic;

pub use error::{Error, Result};
