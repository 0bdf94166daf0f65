//! GMM codebook training and image-level encodings.

mod fisher;
mod gmm;

pub use fisher::{
    bow_histogram, concat_encodings, encode, fisher_gradients, fisher_vector, l2_normalize, power_normalize,
    EncodedImage, EncodingMode,
};
pub use gmm::{fit_gmm, FitReport, GmmConfig, GmmModel, COLLAPSE_WEIGHT, VARIANCE_FLOOR_RATIO};
