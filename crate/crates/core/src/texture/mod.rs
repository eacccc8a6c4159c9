//! Gray-level co-occurrence matrices and Haralick texture features.

mod glcm;
mod haralick;
mod image;

pub use self::glcm::{compute_glcm, GlcmMatrix, GlcmOffset, ProbabilityMatrix};
pub use self::haralick::{
    feature_names, feature_vector_for_patch, haralick_features, Aggregation, DegeneracyFlags,
    HaralickVector, PatchFeatures, FEATURE_COUNT, FEATURE_NAMES,
};
pub use self::image::{luminance, quantize, GrayImage};
