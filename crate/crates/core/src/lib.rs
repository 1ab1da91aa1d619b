//! Saliency estimation by semantic- and contrast-aware feature integration.
//!
//! Two pathways produce [`SaliencyMap`]s for an RGB [`Image`]:
//!
//! * [`cas`] learns a per-image ICA basis at several window sizes and scores
//!   each patch by the self-information of its responses;
//! * [`sas`] aggregates deep convolutional feature maps (read from an SFM1
//!   container, see [`formats`]) with a per-map softmax and a weighted sum
//!   over layers.
//!
//! [`fusion`] combines them with maxima normalization, and [`eval`] scores
//! maps against human fixations with shuffled AUC.

pub mod cas;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod formats;
pub mod fusion;
pub mod raster;
pub mod sas;
pub mod seed;

pub use error::{Error, Result};
pub use raster::{gaussian_blur, normalize_range, GaussianKernelSpec, Image, SaliencyMap};
