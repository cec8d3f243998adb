//! Run configuration read from TOML.
//!
//! Every section is optional and falls back to the desk-scale defaults:
//!
//! ```toml
//! [data]
//! family = "ellipsoid"     # synthetic family: ellipsoid | box | capsule | chair_toy
//! # corpus = "manifest.json"  # or a saved corpus instead of a family
//! count = 200
//! num_points = 256
//! seed = 1
//! test_fraction = 0.1
//!
//! [generator]              # num_points, latent_dim, hidden, style_dim, k
//! [discriminator]          # num_points, feature_widths, head_width
//! [gan]                    # lambda, beta, lr_generator, lr_discriminator, adam_beta1,
//!                          # iterations, batch_size, seed, checkpoint_every
//! [encoder]                # k, edge_widths, fused_width, head_width, latent_dim, style_dim
//! [inversion]              # step1_iterations, step3_iterations, learning_rate,
//!                          # step1_learning_rate, step1_batch_size,
//!                          # refine_generator_in_step1, freeze_coordinates, seed
//! [training]
//! encoders = ["global", "local", "discriminator"]
//! encoder_seed = 3
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use sphinv_data::ShapeFamily;
use sphinv_model::checkpoint::PairRole;
use sphinv_model::encoder::EncoderConfig;
use sphinv_model::inversion::InversionConfig;
use sphinv_model::spgan::{DiscriminatorConfig, GanTrainingConfig, GeneratorConfig};

use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub family: Option<ShapeFamily>,
    pub corpus: Option<PathBuf>,
    pub count: usize,
    pub num_points: usize,
    pub seed: u64,
    pub test_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { family: None, corpus: None, count: 200, num_points: 256, seed: 1, test_fraction: 0.10 }
    }
}

/// Where training and test shapes come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Family(ShapeFamily),
    Corpus(PathBuf),
}

impl DataConfig {
    /// The saved corpus when one is named, otherwise the family (ellipsoid by default).
    pub fn source(&self) -> DataSource {
        match (&self.corpus, self.family) {
            (Some(path), _) => DataSource::Corpus(path.clone()),
            (None, family) => DataSource::Family(family.unwrap_or(ShapeFamily::Ellipsoid)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub encoders: Vec<PairRole>,
    pub encoder_seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { encoders: PairRole::ALL.to_vec(), encoder_seed: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub gan: GanTrainingConfig,
    pub encoder: EncoderConfig,
    pub inversion: InversionConfig,
    pub training: TrainingConfig,
}

impl RunConfig {
    /// Parses and validates; every failure is a usage error.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| UsageError(format!("config: {e}")))?;
        cfg.validate().map_err(|e| UsageError(format!("config: {e:#}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("in {}", path.display()))?;
        if let Some(corpus) = &cfg.data.corpus {
            if corpus.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.data.corpus = Some(base.join(corpus));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.data.num_points;
        if self.generator.num_points != n || self.discriminator.num_points != n {
            bail!(
                "data.num_points = {n} but generator.num_points = {} and discriminator.num_points = {}",
                self.generator.num_points,
                self.discriminator.num_points
            );
        }
        if self.encoder.latent_dim != self.generator.latent_dim || self.encoder.style_dim != self.generator.style_dim {
            bail!("encoder latent_dim/style_dim must match the generator's");
        }
        if self.data.family.is_some() && self.data.corpus.is_some() {
            bail!("data takes either `family` or `corpus`, not both");
        }
        self.generator.validate()?;
        self.gan.validate()?;
        self.inversion.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_desk_profile() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.generator, GeneratorConfig::desk());
        assert_eq!(cfg.data.num_points, 256);
        assert_eq!(cfg.inversion.step3_iterations, 2000);
    }

    #[test]
    fn negative_lambda_is_a_usage_error() {
        let err = RunConfig::parse("[gan]\nlambda = -0.5\n").unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some(), "{err:#}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[gan]\nlamda = 1.0\n").is_err());
        assert!(RunConfig::parse("[nope]\n").is_err());
    }

    #[test]
    fn family_and_corpus_are_exclusive() {
        let cfg = RunConfig::parse("[data]\ncorpus = \"x.json\"\n").unwrap();
        assert_eq!(cfg.data.source(), DataSource::Corpus("x.json".into()));
        assert_eq!(RunConfig::parse("").unwrap().data.source(), DataSource::Family(ShapeFamily::Ellipsoid));
        assert!(RunConfig::parse("[data]\ncorpus = \"x.json\"\nfamily = \"box\"\n").is_err());
    }

    #[test]
    fn sizes_must_agree() {
        assert!(RunConfig::parse("[data]\nnum_points = 64\n").is_err());
        let ok = "[data]\nnum_points = 64\n[generator]\nnum_points = 64\n[discriminator]\nnum_points = 64\n";
        assert_eq!(RunConfig::parse(ok).unwrap().generator.num_points, 64);
    }
}
