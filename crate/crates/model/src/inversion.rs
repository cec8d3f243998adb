//! Three-step inversion and its ablation variants.
//!
//! 1. [`step1_train`] fits an encoder (and optionally refines the generator)
//!    over a corpus by minimizing the Chamfer discrepancy of reconstructions.
//! 2. [`step2_replicate`] places the target's global latent on every prior row.
//! 3. [`step3_optimize`] refines all per-point codes against the target with the
//!    generator frozen, keeping the best codes seen.
//!
//! [`invert`] dispatches over [`AblationMode`].

use std::cmp::Ordering;
use std::sync::Arc;

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sphinv_autograd::{Adam, AdamConfig, Bound, Graph, Var};
use sphinv_core::knn::{knn_graph, Neighborhood};
use sphinv_core::{chamfer_discrepancy, GlobalLatent, LatentCodes, PointCloud, SpherePrior};

use crate::encoder::Encoder;
use crate::spgan::{make_prior_code, Generator, StyleVars, StyleVectors};
use crate::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    /// Encoder, code replication, per-point refinement.
    Full,
    /// Encoder and replication only.
    LearnGlobal,
    /// Per-point codes predicted directly by an encoder head.
    LearnLocal,
    /// Optimize one global latent from random init on the pretrained generator.
    OptGlobal,
    /// Optimize all per-point codes from random init on the pretrained generator.
    OptLocal,
}

impl AblationMode {
    pub const ALL: [AblationMode; 5] =
        [Self::OptGlobal, Self::OptLocal, Self::LearnGlobal, Self::LearnLocal, Self::Full];

    pub fn name(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::LearnGlobal => "learn_global",
            Self::LearnLocal => "learn_local",
            Self::OptGlobal => "opt_global",
            Self::OptLocal => "opt_local",
        }
    }

    /// Whether the mode runs per-target code optimization.
    pub fn uses_step3(self) -> bool {
        matches!(self, Self::Full | Self::OptGlobal | Self::OptLocal)
    }
}

impl std::fmt::Display for AblationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AblationMode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| ModelError::Config(format!("unknown mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionConfig {
    /// Gradient steps of corpus-level encoder training.
    pub step1_iterations: usize,
    /// Per-target refinement steps (also used by the optimization-only modes).
    pub step3_iterations: usize,
    /// Adam step size for latent-code optimization (Step 3 and the
    /// optimization-only modes).
    pub learning_rate: f64,
    /// Adam step size for encoder and generator weights in Step 1.
    pub step1_learning_rate: f64,
    /// Targets per Step-1 gradient step.
    pub step1_batch_size: usize,
    pub refine_generator_in_step1: bool,
    /// Keep the first three code columns at their initial values in Step 3.
    pub freeze_coordinates: bool,
    pub ablation_mode: AblationMode,
    pub seed: u64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            step1_iterations: 2000,
            step3_iterations: 2000,
            learning_rate: 0.01,
            step1_learning_rate: 1e-4,
            step1_batch_size: 4,
            refine_generator_in_step1: true,
            freeze_coordinates: false,
            ablation_mode: AblationMode::Full,
            seed: 0,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step1_iterations == 0 || self.step3_iterations == 0 || self.step1_batch_size == 0 {
            return Err(ModelError::Config("iteration counts and batch size must be at least 1".into()));
        }
        let positive = |lr: f64| lr > 0.0 && lr.is_finite();
        if !positive(self.learning_rate) || !positive(self.step1_learning_rate) {
            return Err(ModelError::Config("learning rates must be positive".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig::with_lr(self.learning_rate)
    }
}

/// An encoder together with the generator it was trained against.
#[derive(Debug, Clone)]
pub struct TrainedPair {
    pub encoder: Arc<Encoder>,
    pub generator: Arc<Generator>,
}

/// Models available to [`invert`]; each mode needs a different subset.
#[derive(Debug, Clone, Default)]
pub struct Models {
    /// Adversarially trained generator (optimization-only modes).
    pub pretrained: Option<Arc<Generator>>,
    /// Global encoder with its Step-1 generator (full, learn_global).
    pub global: Option<TrainedPair>,
    /// Encoder with a per-point head and its Step-1 generator (learn_local).
    pub local: Option<TrainedPair>,
}

#[derive(Debug, Clone)]
pub struct InversionResult {
    pub mode: AblationMode,
    /// Final per-point codes, rows aligned with the sphere prior.
    pub codes: LatentCodes,
    pub global: GlobalLatent,
    pub style: StyleVectors,
    /// Exactly `generator.generate(&codes, &style)`.
    pub reconstruction: PointCloud,
    /// Objective value at every evaluation, starting with the initial codes.
    pub loss_history: Vec<f64>,
    /// Chamfer discrepancy of the reconstruction before any per-target optimization.
    pub initial_loss: f64,
    /// Chamfer discrepancy of `reconstruction` against the target.
    pub final_loss: f64,
    /// Set when optimization stopped early on a non-finite value.
    pub aborted_at: Option<usize>,
    pub generator: Arc<Generator>,
}

impl InversionResult {
    /// Running minimum of `loss_history`.
    pub fn best_so_far(&self) -> Vec<f64> {
        running_min(&self.loss_history)
    }
}

pub fn running_min(values: &[f64]) -> Vec<f64> {
    let mut best = f64::INFINITY;
    values
        .iter()
        .map(|&v| {
            best = best.min(v);
            best
        })
        .collect()
}

/// Optimization progress reported to callers of [`invert_with_progress`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub iteration: usize,
    pub total: usize,
    pub loss: f64,
    pub best: f64,
}

/// Mean distance between reconstruction rows whose prior points are graph
/// neighbors. Low values mean the prior's neighborhoods stay together.
pub fn correspondence_smoothness(result: &InversionResult) -> f64 {
    let graph = result.generator.graph();
    let p = result.reconstruction.points();
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..graph.len() {
        for &j in graph.neighbors(i) {
            total += (&p.row(i) - &p.row(j)).mapv(|v| v * v).sum().sqrt();
            count += 1;
        }
    }
    total / count.max(1) as f64
}

/// Pairs prior index `i` with reconstruction row `i`.
pub fn correspondence_map(result: &InversionResult) -> Vec<(usize, [f64; 3])> {
    result.reconstruction.points().outer_iter().enumerate().map(|(i, p)| (i, [p[0], p[1], p[2]])).collect()
}

/// Row `i` is the prior point followed by the global latent.
pub fn step2_replicate(global: &GlobalLatent, sphere: &SpherePrior) -> Result<LatentCodes> {
    let n = sphere.len();
    let d = global.dim();
    let noise = Array2::from_shape_fn((n, d), |(_, j)| global.values()[j]);
    Ok(LatentCodes::new(concatenate(Axis(1), &[sphere.view(), noise.view()]).expect("row counts agree"))?)
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// Rows sorted lexicographically, so that reductions over the target never
/// depend on its storage order.
pub fn canonical_rows(points: &Array2<f64>) -> Array2<f64> {
    let rows: Vec<Vec<f64>> = points.outer_iter().map(|r| r.to_vec()).collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| lexicographic(&rows[a], &rows[b]));
    points.select(Axis(0), &order)
}

fn check_target(target: &PointCloud, generator: &Generator) -> Result<()> {
    let n = generator.config().num_points;
    if target.len() != n {
        return Err(ModelError::Shape(format!("target has {} points, model expects {n}", target.len())));
    }
    Ok(())
}

/// Encoder output feeding the generator: either replicated global codes or
/// the local head's per-point codes.
fn encoded_codes(g: &mut Graph, encoder: &Encoder, enc: &crate::encoder::EncoderVars, sphere: Var, n: usize) -> Var {
    match enc.local {
        Some(local) if encoder.has_local_head() => local,
        _ => {
            let rep = g.repeat_rows(enc.global, n);
            g.concat_cols(&[sphere, rep])
        }
    }
}

#[derive(Debug, Clone)]
pub struct Step1Outcome {
    pub encoder: Encoder,
    pub generator: Generator,
    /// Mean batch Chamfer discrepancy at each encoder update.
    pub history: Vec<f64>,
    pub encoder_updates: usize,
    pub generator_updates: usize,
    /// Iteration at which a non-finite value stopped training; the returned
    /// parameters are the last finite ones.
    pub diverged_at: Option<usize>,
}

fn all_finite(arrays: &[Array2<f64>]) -> bool {
    arrays.iter().all(|a| a.iter().all(|v| v.is_finite()))
}

fn batch_loss(
    g: &mut Graph,
    enc: &Encoder,
    gen: &Generator,
    ep: &Bound,
    gp: &Bound,
    batch: &[&PointCloud],
    n: usize,
) -> Var {
    let sphere = g.constant(gen.sphere().points().clone());
    let mut terms = Vec::with_capacity(batch.len());
    for target in batch {
        let x = g.constant(target.points().clone());
        let e = enc.forward(g, ep, x);
        let codes = encoded_codes(g, enc, &e, sphere, n);
        let recon = if enc.has_local_head() {
            gen.forward_with_graph(g, gp, codes, &e.style, &target_graph(target, gen))
        } else {
            gen.forward(g, gp, codes, &e.style)
        };
        terms.push(g.chamfer(recon, target.points()));
    }
    let total = g.sum(&terms);
    g.scale(total, 1.0 / batch.len() as f64)
}

/// Local-head codes come in the target's row order, so the generator's graph
/// layers must connect rows that are neighbors on the target, not on the prior.
fn target_graph(target: &PointCloud, gen: &Generator) -> Arc<Neighborhood> {
    Arc::new(knn_graph(target.view(), gen.config().k))
}

/// Cosine decay from `peak` at iteration 0 towards zero at `total`.
fn cosine_lr(peak: f64, it: usize, total: usize) -> f64 {
    let frac = it as f64 / total.max(1) as f64;
    0.5 * peak * (1.0 + (std::f64::consts::PI * frac).cos())
}

/// Corpus-level Step 1: per iteration one encoder update on a random batch,
/// then (when refining) one generator update on a fresh forward pass.
pub fn step1_train(
    dataset: &[PointCloud],
    mut generator: Generator,
    mut encoder: Encoder,
    cfg: &InversionConfig,
) -> Result<Step1Outcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    for t in dataset {
        check_target(t, &generator)?;
    }
    let n = generator.config().num_points;
    let adam = AdamConfig::with_lr(cfg.step1_learning_rate);
    let mut enc_opt = Adam::new(adam, encoder.params().values());
    let mut gen_opt = Adam::new(adam, generator.params().values());
    let mut out_history = Vec::with_capacity(cfg.step1_iterations);
    let (mut e_updates, mut g_updates) = (0, 0);
    let mut diverged_at = None;

    for it in 0..cfg.step1_iterations {
        let lr = cosine_lr(cfg.step1_learning_rate, it, cfg.step1_iterations);
        enc_opt.set_lr(lr);
        gen_opt.set_lr(lr);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (it as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let batch: Vec<&PointCloud> =
            (0..cfg.step1_batch_size).map(|_| &dataset[rng.random_range(0..dataset.len())]).collect();

        let mut g = Graph::new();
        let ep = encoder.params().bind(&mut g, true);
        let gp = generator.params().bind(&mut g, false);
        let loss = batch_loss(&mut g, &encoder, &generator, &ep, &gp, &batch, n);
        let value = g.scalar(loss);
        let grads = encoder.params().gradients(&ep, &g.backward(loss));
        if !value.is_finite() || !all_finite(&grads) {
            diverged_at = Some(it);
            break;
        }
        let saved = encoder.params().clone();
        enc_opt.step(encoder.params_mut().values_mut(), &grads);
        if !encoder.params().all_finite() {
            *encoder.params_mut() = saved;
            diverged_at = Some(it);
            break;
        }
        e_updates += 1;
        out_history.push(value);

        if cfg.refine_generator_in_step1 {
            let mut g = Graph::new();
            let ep = encoder.params().bind(&mut g, false);
            let gp = generator.params().bind(&mut g, true);
            let loss = batch_loss(&mut g, &encoder, &generator, &ep, &gp, &batch, n);
            let grads = generator.params().gradients(&gp, &g.backward(loss));
            if !g.scalar(loss).is_finite() || !all_finite(&grads) {
                diverged_at = Some(it);
                break;
            }
            let saved = generator.params().clone();
            gen_opt.step(generator.params_mut().values_mut(), &grads);
            if !generator.params().all_finite() {
                *generator.params_mut() = saved;
                diverged_at = Some(it);
                break;
            }
            g_updates += 1;
        }
        if it % 200 == 0 {
            log::debug!("step1 iter {it}: cd {value:.5}");
        }
    }
    Ok(Step1Outcome {
        encoder,
        generator,
        history: out_history,
        encoder_updates: e_updates,
        generator_updates: g_updates,
        diverged_at,
    })
}

/// Reconstruction straight from an encoder and its generator, before any
/// per-target refinement. Returns the codes, style and reconstruction.
pub fn encode_and_generate(
    target: &PointCloud,
    pair: &TrainedPair,
) -> Result<(LatentCodes, GlobalLatent, StyleVectors, PointCloud)> {
    check_target(target, &pair.generator)?;
    let (global, style, codes) = if pair.encoder.has_local_head() {
        let (codes, style) = pair.encoder.encode_local(target)?;
        let (global, _) = pair.encoder.encode(target)?;
        (global, style, codes)
    } else {
        let (global, style) = pair.encoder.encode(target)?;
        let codes = step2_replicate(&global, pair.generator.sphere())?;
        (global, style, codes)
    };
    let recon = if pair.encoder.has_local_head() {
        pair.generator.generate_with_graph(&codes, &style, &target_graph(target, &pair.generator))?
    } else {
        pair.generator.generate(&codes, &style)?
    };
    Ok((codes, global, style, recon))
}

#[derive(Debug, Clone)]
pub struct Step3Outcome {
    pub codes: LatentCodes,
    pub reconstruction: PointCloud,
    pub history: Vec<f64>,
    pub best_loss: f64,
    pub best_iteration: usize,
    pub aborted_at: Option<usize>,
}

/// Refines every entry of the per-point codes with Adam against the target,
/// generator and style held fixed. Records `iterations + 1` losses (the last
/// evaluates the final update) and returns the best codes seen.
pub fn step3_optimize(
    target: &PointCloud,
    init: &LatentCodes,
    style: &StyleVectors,
    generator: &Generator,
    cfg: &InversionConfig,
    mut progress: impl FnMut(Progress),
) -> Result<Step3Outcome> {
    cfg.validate()?;
    check_target(target, generator)?;
    if init.len() != generator.config().num_points || init.values().ncols() != generator.config().code_width() {
        return Err(ModelError::Shape("initial codes do not match the generator".into()));
    }
    let goal = canonical_rows(target.points());
    let mut codes = init.values().clone();
    let mut best = (f64::INFINITY, codes.clone(), 0usize);
    let mut history = Vec::with_capacity(cfg.step3_iterations + 1);
    let mut opt = Adam::new(cfg.adam(), [&codes]);
    let mut aborted_at = None;
    let total = cfg.step3_iterations;
    for t in 0..=total {
        let mut g = Graph::new();
        let gp = generator.params().bind(&mut g, false);
        let c = g.param(codes.clone());
        let s = style.bind(&mut g);
        let recon = generator.forward(&mut g, &gp, c, &s);
        let loss = g.chamfer(recon, &goal);
        let value = g.scalar(loss);
        if !value.is_finite() {
            aborted_at = Some(t);
            break;
        }
        history.push(value);
        if value < best.0 {
            best = (value, codes.clone(), t);
        }
        progress(Progress { iteration: t, total, loss: value, best: best.0 });
        if t == total {
            break;
        }
        let mut grad = g.backward(loss).get_or_zeros(c, codes.dim());
        if cfg.freeze_coordinates {
            grad.slice_mut(ndarray::s![.., ..3]).fill(0.0);
        }
        opt.step(std::slice::from_mut(&mut codes), &[grad]);
        if codes.iter().any(|v| !v.is_finite()) {
            aborted_at = Some(t + 1);
            break;
        }
    }
    let (best_loss, best_codes, best_iteration) = best;
    if !best_loss.is_finite() {
        return Err(ModelError::Diverged { iteration: 0, what: "initial reconstruction loss" });
    }
    let codes = LatentCodes::new(best_codes)?;
    let reconstruction = generator.generate(&codes, style)?;
    Ok(Step3Outcome { codes, reconstruction, history, best_loss, best_iteration, aborted_at })
}

/// Optimizes one global latent, replicated over the prior, with the style
/// recomputed from it through the generator's own style maps.
fn optimize_global(
    target: &PointCloud,
    generator: &Generator,
    cfg: &InversionConfig,
    progress: &mut impl FnMut(Progress),
) -> Result<(GlobalLatent, Vec<f64>, Option<usize>)> {
    let d = generator.config().latent_dim;
    let n = generator.config().num_points;
    let goal = canonical_rows(target.points());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut z = Array2::from_shape_fn((1, d), |_| rng.sample::<f64, _>(StandardNormal));
    let mut opt = Adam::new(cfg.adam(), [&z]);
    let mut best = (f64::INFINITY, z.clone());
    let mut history = Vec::with_capacity(cfg.step3_iterations + 1);
    let mut aborted_at = None;
    let total = cfg.step3_iterations;
    for t in 0..=total {
        let mut g = Graph::new();
        let gp = generator.params().bind(&mut g, false);
        let zv = g.param(z.clone());
        let style: StyleVars = generator.style_from_latent(&mut g, &gp, zv);
        let sphere = g.constant(generator.sphere().points().clone());
        let rep = g.repeat_rows(zv, n);
        let codes = g.concat_cols(&[sphere, rep]);
        let recon = generator.forward(&mut g, &gp, codes, &style);
        let loss = g.chamfer(recon, &goal);
        let value = g.scalar(loss);
        if !value.is_finite() {
            aborted_at = Some(t);
            break;
        }
        history.push(value);
        if value < best.0 {
            best = (value, z.clone());
        }
        progress(Progress { iteration: t, total, loss: value, best: best.0 });
        if t == total {
            break;
        }
        let grad = g.backward(loss).get_or_zeros(zv, z.dim());
        opt.step(std::slice::from_mut(&mut z), &[grad]);
        if z.iter().any(|v| !v.is_finite()) {
            aborted_at = Some(t + 1);
            break;
        }
    }
    if !best.0.is_finite() {
        return Err(ModelError::Diverged { iteration: 0, what: "initial reconstruction loss" });
    }
    let global = GlobalLatent::new(Array1::from(best.1.row(0).to_vec()))?;
    Ok((global, history, aborted_at))
}

fn require<'a, T>(slot: &'a Option<T>, mode: AblationMode, missing: &'static str) -> Result<&'a T> {
    slot.as_ref().ok_or(ModelError::MissingModel { mode: mode.name(), missing })
}

/// `sqrt(N)` times the mean noise row: the latent the unconditional style sees.
fn pooled_noise(codes: &LatentCodes) -> Result<GlobalLatent> {
    let n = codes.len() as f64;
    let mean = codes.noise().mean_axis(Axis(0)).expect("codes are nonempty");
    Ok(GlobalLatent::new(mean * n.sqrt())?)
}

pub fn invert(target: &PointCloud, models: &Models, cfg: &InversionConfig) -> Result<InversionResult> {
    invert_with_progress(target, models, cfg, |_| {})
}

/// Runs the configured mode on one target. Each call works on its own state;
/// the shared models are only read.
pub fn invert_with_progress(
    target: &PointCloud,
    models: &Models,
    cfg: &InversionConfig,
    mut progress: impl FnMut(Progress),
) -> Result<InversionResult> {
    cfg.validate()?;
    let mode = cfg.ablation_mode;
    match mode {
        AblationMode::Full | AblationMode::LearnGlobal | AblationMode::LearnLocal => {
            let pair = if mode == AblationMode::LearnLocal {
                let pair = require(&models.local, mode, "an encoder with a per-point head")?;
                if !pair.encoder.has_local_head() {
                    return Err(ModelError::MissingModel {
                        mode: mode.name(),
                        missing: "an encoder with a per-point head",
                    });
                }
                pair
            } else {
                require(&models.global, mode, "a Step-1 encoder and generator")?
            };
            let (codes, global, style, recon) = encode_and_generate(target, pair)?;
            let initial_loss = chamfer_discrepancy(&recon, target);
            if mode != AblationMode::Full {
                progress(Progress { iteration: 0, total: 0, loss: initial_loss, best: initial_loss });
                return Ok(InversionResult {
                    mode,
                    codes,
                    global,
                    style,
                    reconstruction: recon,
                    loss_history: vec![initial_loss],
                    initial_loss,
                    final_loss: initial_loss,
                    aborted_at: None,
                    generator: pair.generator.clone(),
                });
            }
            let out = step3_optimize(target, &codes, &style, &pair.generator, cfg, progress)?;
            let final_loss = chamfer_discrepancy(&out.reconstruction, target);
            Ok(InversionResult {
                mode,
                codes: out.codes,
                global,
                style,
                reconstruction: out.reconstruction,
                loss_history: out.history,
                initial_loss,
                final_loss,
                aborted_at: out.aborted_at,
                generator: pair.generator.clone(),
            })
        }
        AblationMode::OptGlobal => {
            let generator = require(&models.pretrained, mode, "a pretrained generator")?;
            check_target(target, generator)?;
            let (global, history, aborted_at) = optimize_global(target, generator, cfg, &mut progress)?;
            let codes = step2_replicate(&global, generator.sphere())?;
            let style = generator.style_for_global(global.values());
            let reconstruction = generator.generate(&codes, &style)?;
            let final_loss = chamfer_discrepancy(&reconstruction, target);
            Ok(InversionResult {
                mode,
                codes,
                global,
                style,
                reconstruction,
                initial_loss: history[0],
                loss_history: history,
                final_loss,
                aborted_at,
                generator: generator.clone(),
            })
        }
        AblationMode::OptLocal => {
            let generator = require(&models.pretrained, mode, "a pretrained generator")?;
            check_target(target, generator)?;
            let init = make_prior_code(generator.sphere(), generator.config().latent_dim, cfg.seed)?;
            let style = generator.unconditional_style(&init);
            let global = pooled_noise(&init)?;
            let out = step3_optimize(target, &init, &style, generator, cfg, progress)?;
            let final_loss = chamfer_discrepancy(&out.reconstruction, target);
            Ok(InversionResult {
                mode,
                codes: out.codes,
                global,
                style,
                reconstruction: out.reconstruction,
                initial_loss: out.history[0],
                loss_history: out.history,
                final_loss,
                aborted_at: out.aborted_at,
                generator: generator.clone(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sphinv_core::sample_sphere_prior;

    #[test]
    fn replication_matches_definition() {
        let sphere = SpherePrior::from_points(ndarray::array![[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]).unwrap();
        let z = GlobalLatent::new(ndarray::array![5.0, 7.0]).unwrap();
        let codes = step2_replicate(&z, &sphere).unwrap();
        assert_eq!(codes.values(), &ndarray::array![[0.0, 0.0, 1.0, 5.0, 7.0], [0.0, 0.0, -1.0, 5.0, 7.0]]);
    }

    #[test]
    fn replication_shape_and_constant_noise() {
        let sphere = sample_sphere_prior(64).unwrap();
        let z = GlobalLatent::new(Array1::linspace(-1.0, 1.0, 16)).unwrap();
        let codes = step2_replicate(&z, &sphere).unwrap();
        assert_eq!(codes.values().dim(), (64, 19));
        for row in codes.noise().outer_iter() {
            assert_eq!(row, z.values().view());
        }
        assert_eq!(codes.coords(), sphere.view());
    }

    #[test]
    fn canonical_rows_ignores_storage_order() {
        let a = ndarray::array![[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 1.0, 5.0], [0.0, 1.0, -5.0]];
        let b = a.select(Axis(0), &[2, 0, 3, 1]);
        assert_eq!(canonical_rows(&a), canonical_rows(&b));
        assert_eq!(canonical_rows(&a).row(0).to_vec(), vec![0.0, 1.0, -5.0]);
    }

    #[test]
    fn running_min_is_non_increasing() {
        assert_eq!(running_min(&[3.0, 4.0, 1.0, 2.0]), vec![3.0, 3.0, 1.0, 1.0]);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in AblationMode::ALL {
            assert_eq!(m.name().parse::<AblationMode>().unwrap(), m);
        }
        assert!("ours".parse::<AblationMode>().is_err());
    }

    #[test]
    fn missing_models_are_reported() {
        let target = PointCloud::new(sample_sphere_prior(16).unwrap().points().clone()).unwrap();
        for mode in AblationMode::ALL {
            let cfg = InversionConfig { ablation_mode: mode, ..Default::default() };
            let err = invert(&target, &Models::default(), &cfg).unwrap_err();
            assert!(matches!(err, ModelError::MissingModel { .. }), "{mode}: {err}");
        }
    }
}
