//! Networks and procedures for sphere-guided point-cloud generation and inversion.
//!
//! * [`spgan`]: per-point generator over a fixed sphere prior, dual-granularity
//!   discriminator, least-squares adversarial losses and training.
//! * [`encoder`]: order-invariant encoders producing a global latent and style vectors.
//! * [`inversion`]: global encoding, code replication over the prior, and per-point
//!   latent refinement, plus the ablation variants.
//! * [`editing`]: region-restricted latent perturbation and regeneration.

pub mod checkpoint;
pub mod editing;
pub mod encoder;
mod error;
mod init;
pub mod inversion;
pub mod spgan;

pub use error::{ModelError, Result};
