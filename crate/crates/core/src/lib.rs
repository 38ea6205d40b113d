//! Distribution shift detection between two embedding datasets.
//!
//! A reference set `X` and a candidate set `Y` are compared with a distance
//! between point clouds (energy, local energy, or sliced Wasserstein between
//! Vietoris-Rips persistence diagrams). Two procedures turn distances into a
//! shift decision:
//!
//! * the subsample test ([`detector::subsample_shift_test`]) compares
//!   reference-reference subsample distances with reference-candidate ones
//!   using a Welch t-test, repeated over independent runs;
//! * the perturbation test ([`detector::perturbation_shift_test`]) adds
//!   increasing Gaussian noise to the reference until kNN recall drops below a
//!   threshold, and uses the distance at the last passing level as the cutoff.

pub mod ablation;
pub mod detector;
pub mod distances;
pub mod embedio;
pub mod error;
pub mod sampling;
pub mod stats;
pub mod topology;

pub use embedio::EmbeddingSet;
pub use error::{Error, Result};
pub use sampling::RngSeed;
