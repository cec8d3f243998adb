//! Foundational types for sphere-guided point-cloud inversion.
//!
//! A [`PointCloud`] is an ordered `N x 3` matrix. Order matters: after
//! inversion, row `i` of a reconstruction is bound to row `i` of the
//! [`SpherePrior`]. Latent codes ([`LatentCodes`]) carry that same row binding.

pub mod cloud;
pub mod error;
pub mod io;
pub mod knn;
pub mod latent;
pub mod metrics;
pub mod sphere;

pub use cloud::{NormalizeTransform, PointCloud};
pub use error::{CoreError, Result};
pub use latent::{GlobalLatent, LatentCodes};
pub use metrics::{chamfer_discrepancy, earth_mover_distance};
pub use sphere::{sample_sphere_prior, SpherePrior};
