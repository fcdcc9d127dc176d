//! Scene statistics for image-sequence datasets.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the analysis pipeline uses.

pub mod features;
pub mod pixbuf;
pub mod report;
pub mod reproject;
pub mod scalar;
pub mod sequence;
pub mod stats;
pub mod synth;

pub use scalar::Real;

/// Resolution at which the Laplacian variance is measured.
pub const LAPLACIAN_SIZE: (usize, usize) = (320, 240);

pub type Gray = pixbuf::GrayFrame<f64>;
pub type Gray32 = pixbuf::GrayFrame<f32>;
pub type Features = features::FeatureSet<f64>;
pub type Features32 = features::FeatureSet<f32>;
pub type Homography = reproject::Homography<f64>;
pub type Homography32 = reproject::Homography<f32>;
