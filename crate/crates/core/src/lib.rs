//! Interpretable CNN-ensemble stratification of grayscale images under
//! heavy class imbalance.
//!
//! The crate provides, end to end: a small differentiable network with
//! reverse-mode gradients ([`autograd`], [`ops`]), the two-stage CNN
//! architecture ([`model`]), Adam with early stopping and two-phase
//! cost-sensitive training ([`train`]), balanced sub-sampling and
//! certainty-weighted output combination ([`ensemble`]), a
//! superpixel-perturbation local surrogate explainer ([`slic`],
//! [`explain`]), evaluation metrics with group-stratified cross-validation
//! ([`metrics`], [`cv`]), and the data plumbing to run it all on PGM/PNG
//! images ([`imageio`], [`synth`], [`dataset`]).

pub mod autograd;
pub mod error;
pub mod model;
pub mod ops;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{build_model, load_model, save_model, CnnModel, ModelConfig};
pub use ops::Mode;
pub use rng::{derive_seed, derived_rng, rng_from_seed, SeedRng};
pub use tensor::Tensor;
