use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sphinv_autograd::{Adam, AdamConfig, Graph};
use sphinv_core::PointCloud;

use super::{discriminator_loss, generator_loss, make_prior_code, Discriminator, Generator};
use crate::{ModelError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanTrainingConfig {
    /// Weight of the per-point term in the discriminative loss.
    pub lambda: f64,
    /// Weight of the per-point term in the generative loss.
    pub beta: f64,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    pub adam_beta1: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Invoke the checkpoint hook every this many iterations (0 disables).
    pub checkpoint_every: usize,
}

impl Default for GanTrainingConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            beta: 1.0,
            lr_generator: 1e-3,
            lr_discriminator: 1e-3,
            adam_beta1: 0.5,
            iterations: 2000,
            batch_size: 4,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl GanTrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !(self.beta >= 0.0) {
            return Err(ModelError::Config("lambda and beta must be nonnegative".into()));
        }
        if !(self.lr_generator > 0.0) || !(self.lr_discriminator > 0.0) {
            return Err(ModelError::Config("learning rates must be positive".into()));
        }
        if self.iterations == 0 || self.batch_size == 0 {
            return Err(ModelError::Config("iterations and batch size must be at least 1".into()));
        }
        Ok(())
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig { lr, beta1: self.adam_beta1, ..AdamConfig::default() }
    }
}

/// Everything needed to resume adversarial training exactly.
#[derive(Debug, Clone)]
pub struct GanState {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub gen_opt: Adam,
    pub disc_opt: Adam,
    /// Completed iterations.
    pub iteration: usize,
}

impl GanState {
    pub fn new(generator: Generator, discriminator: Discriminator, cfg: &GanTrainingConfig) -> Self {
        let gen_opt = Adam::new(cfg.adam(cfg.lr_generator), generator.params().values());
        let disc_opt = Adam::new(cfg.adam(cfg.lr_discriminator), discriminator.params().values());
        Self { generator, discriminator, gen_opt, disc_opt, iteration: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GanStep {
    pub iteration: usize,
    pub d_loss: f64,
    pub g_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GanHistory {
    pub steps: Vec<GanStep>,
    pub d_updates: usize,
    pub g_updates: usize,
}

/// Alternating least-squares adversarial training: per iteration one
/// discriminator update on a real/fake batch, then one generator update.
///
/// Per-iteration randomness derives from `(cfg.seed, iteration)`, so a run
/// resumed from a saved [`GanState`] continues exactly where it stopped.
pub fn train_gan(
    dataset: &[PointCloud],
    mut state: GanState,
    cfg: &GanTrainingConfig,
    mut on_checkpoint: impl FnMut(&GanState, &GanHistory) -> Result<()>,
) -> Result<(GanState, GanHistory)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let n = state.generator.config().num_points;
    if let Some(bad) = dataset.iter().find(|c| c.len() != n) {
        return Err(ModelError::Shape(format!("training cloud has {} points, generator emits {n}", bad.len())));
    }
    let d = state.generator.config().latent_dim;
    let mut history = GanHistory::default();
    let end = state.iteration + cfg.iterations;
    while state.iteration < end {
        let it = state.iteration;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (it as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let inv_b = 1.0 / cfg.batch_size as f64;

        // Discriminator step.
        let mut g = Graph::new();
        let dp = state.discriminator.params().bind(&mut g, true);
        let mut terms = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let real = &dataset[rng.random_range(0..dataset.len())];
            let fake = state.generator.sample(rng.random())?;
            let r = g.constant(real.points().clone());
            let f = g.constant(fake.into_points());
            let ro = state.discriminator.forward(&mut g, &dp, r);
            let fo = state.discriminator.forward(&mut g, &dp, f);
            terms.push(discriminator_loss(&mut g, &ro, &fo, cfg.lambda));
        }
        let total = g.sum(&terms);
        let d_loss_var = g.scale(total, inv_b);
        let d_loss = g.scalar(d_loss_var);
        if !d_loss.is_finite() {
            return Err(ModelError::Diverged { iteration: it, what: "discriminator loss" });
        }
        let grads = g.backward(d_loss_var);
        let dg = state.discriminator.params().gradients(&dp, &grads);
        state.disc_opt.step(state.discriminator.params_mut().values_mut(), &dg);
        history.d_updates += 1;

        // Generator step through the frozen discriminator.
        let mut g = Graph::new();
        let gp = state.generator.params().bind(&mut g, true);
        let dp = state.discriminator.params().bind(&mut g, false);
        let mut terms = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let codes = make_prior_code(state.generator.sphere(), d, rng.random())?;
            let c = g.constant(codes.into_values());
            let style = state.generator.unconditional_style_vars(&mut g, &gp, c);
            let fake = state.generator.forward(&mut g, &gp, c, &style);
            let fo = state.discriminator.forward(&mut g, &dp, fake);
            terms.push(generator_loss(&mut g, &fo, cfg.beta));
        }
        let total = g.sum(&terms);
        let g_loss_var = g.scale(total, inv_b);
        let g_loss = g.scalar(g_loss_var);
        if !g_loss.is_finite() {
            return Err(ModelError::Diverged { iteration: it, what: "generator loss" });
        }
        let grads = g.backward(g_loss_var);
        let gg = state.generator.params().gradients(&gp, &grads);
        state.gen_opt.step(state.generator.params_mut().values_mut(), &gg);
        history.g_updates += 1;

        history.steps.push(GanStep { iteration: it, d_loss, g_loss });
        state.iteration += 1;
        if cfg.checkpoint_every > 0 && state.iteration % cfg.checkpoint_every == 0 {
            on_checkpoint(&state, &history)?;
        }
        if it % 100 == 0 {
            log::debug!("gan iter {it}: d {d_loss:.4} g {g_loss:.4}");
        }
    }
    Ok((state, history))
}
