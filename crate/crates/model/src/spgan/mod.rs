//! Sphere-guided generator and dual-granularity discriminator.

mod discriminator;
mod generator;
mod loss;
mod prior;
mod train;

pub use discriminator::{DiscOutput, Discriminator, DiscriminatorConfig, Scores};
pub use generator::{Generator, GeneratorConfig, StyleVars, StyleVectors};
pub use loss::{discriminator_loss, discriminator_loss_value, generator_loss, generator_loss_value};
pub use prior::make_prior_code;
pub use train::{train_gan, GanHistory, GanState, GanStep, GanTrainingConfig};
