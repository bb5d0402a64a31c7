//! Solve linear inverse problems (inpainting, denoising, super-resolution,
//! compressed sensing) with layered feed-forward generative priors.
//!
//! The solver inverts a generator G = G_d ∘ … ∘ G_1 by first optimizing the
//! input latent code (CSGM), then sequentially re-optimizing intermediate
//! representations inside small l1 balls around the image of the previous
//! layer's solution (intermediate layer optimization). The [`theory`] module
//! makes the accompanying covering-number and S-REC machinery executable:
//! l1-ball cover sizes, sample-complexity and error-bound evaluation, and
//! Monte-Carlo certification of measurement ensembles.

pub mod error;
pub mod generator;
pub mod numerics;
pub mod operators;
pub mod projections;
pub mod solver;
pub mod theory;

pub use error::{Error, Result};
pub use numerics::{Mat, Rng};
