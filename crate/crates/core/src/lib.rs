//! Multi-object state estimation with probabilistic data association.
//!
//! The crate is organised around the pipeline a tracker runs every frame:
//!
//! - [`model`]: beliefs, linear models and bounding-box conversions.
//! - [`assoc`]: likelihoods, exact matrix permanents and association weights.
//! - [`filter`]: prediction and the KF / PKF / JPDAF / PMHT update rules.
//! - [`sim`]: the point-target clutter simulator and its experiment drivers.
//! - [`mot`]: a SORT-style bounding-box tracker over MOT-Challenge files.
//!
//! Data-parallel work (seeds, sweeps, independent association components)
//! goes through [`par`], which uses rayon when the `parallel` feature is on
//! and falls back to plain iteration otherwise.

pub mod assoc;
pub mod error;
pub mod filter;
pub mod linalg;
pub mod model;
pub mod mot;
pub mod par;
pub mod selftest;
pub mod sim;

pub use error::{Error, Result};
pub use model::{Bbox, Detection, GaussianBelief, LinearModel};
