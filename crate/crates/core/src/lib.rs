//! Paired noisy/clean training-patch synthesis for blind denoising.
//!
//! A high-quality image is pushed through a randomly shuffled, doubled
//! sequence of degradations (Gaussian, Poisson, speckle, JPEG, processed
//! camera sensor noise, resizing) while a clean twin follows the geometric
//! and tone-mapping steps only. Every random choice is drawn from a
//! path-keyed [`rng::RngStream`] and recorded in a [`degrade::DegradationPlan`],
//! so each pair can be replayed bit-exactly from its JSON manifest.

pub mod degrade;
pub mod error;
pub mod image;
pub mod isp;
pub mod jpeg;
pub mod noise;
pub mod resize;
pub mod rng;
pub mod stats;

pub use crate::error::{Error, Result};
pub use crate::image::{clip01, load_png, rgb_to_gray, save_png, Image};
pub use crate::rng::RngStream;
