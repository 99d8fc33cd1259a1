//! MUSIC-type imaging of small inhomogeneities hidden among random point
//! scatterers.
//!
//! The pipeline runs scene → forward data → SVD and subspace selection →
//! imaging map → peak analysis. A closed-form Bessel predictor of the
//! imaging map sits beside the empirical one for validation.

pub mod analysis;
pub mod config;
pub mod experiment;
pub mod forward;
pub mod geometry;
pub mod imaging;
pub mod numerics;
pub mod scene;
pub mod spectral;

pub use geometry::{Point, Rect};
pub use num_complex::Complex64;
