//! The stages behind each subcommand.

use std::sync::Arc;

use anyhow::{bail, Context, Result};
use sphinv_core::{chamfer_discrepancy, earth_mover_distance, PointCloud};
use sphinv_data::{generate_family, Corpus, ShapeFamilyConfig};
use sphinv_model::checkpoint::{Checkpoint, PairRole};
use sphinv_model::encoder::Encoder;
use sphinv_model::inversion::{
    correspondence_smoothness, encode_and_generate, invert, step1_train, AblationMode, InversionConfig,
    InversionResult, Models, TrainedPair,
};
use sphinv_model::spgan::{train_gan, Discriminator, GanState, GanStep, Generator};

use crate::config::{DataSource, RunConfig};
use crate::UsageError;

/// Generates or loads the corpus and checks every cloud has `num_points` rows.
pub fn load_corpus(cfg: &RunConfig) -> Result<Corpus> {
    let corpus = match cfg.data.source() {
        DataSource::Family(family) => {
            let fcfg = ShapeFamilyConfig {
                test_fraction: cfg.data.test_fraction,
                ..ShapeFamilyConfig::new(family, cfg.data.num_points, cfg.data.seed)
            };
            generate_family(&fcfg, cfg.data.count).context("generating the shape family")?
        }
        DataSource::Corpus(path) => {
            sphinv_data::load_corpus(&path).with_context(|| format!("loading corpus {}", path.display()))?
        }
    };
    if let Some((i, c)) = corpus.items.iter().enumerate().find(|(_, c)| c.len() != cfg.data.num_points) {
        bail!("corpus item {i} has {} points, the configuration expects {}", c.len(), cfg.data.num_points);
    }
    Ok(corpus)
}

/// Class label for tables: the family name, or the corpus source otherwise.
pub fn corpus_class(corpus: &Corpus) -> String {
    let src = &corpus.provenance.source;
    src.strip_prefix("family:").unwrap_or(src).to_string()
}

/// Test items with their corpus indices.
pub fn test_items(corpus: &Corpus) -> Vec<(usize, PointCloud)> {
    corpus.split.test.iter().map(|&i| (i, corpus.items[i].clone())).collect()
}

/// Adversarial training from scratch, or resumed from `resume`. The returned
/// checkpoint carries the full loss history including resumed iterations.
pub fn train_gan_stage(
    cfg: &RunConfig,
    train: &[PointCloud],
    resume: Option<&Checkpoint>,
    mut on_checkpoint: impl FnMut(&Checkpoint) -> Result<()>,
) -> Result<Checkpoint> {
    let (state, mut prior): (GanState, Vec<GanStep>) = match resume {
        Some(ck) => {
            let state = ck
                .gan_state()
                .ok_or_else(|| UsageError("checkpoint has no adversarial training state to resume".into()))?;
            (state, ck.training.as_ref().map(|t| t.history.clone()).unwrap_or_default())
        }
        None => {
            let gen = Generator::new(cfg.generator, cfg.gan.seed)?;
            let disc = Discriminator::new(cfg.discriminator, cfg.gan.seed.wrapping_add(1));
            (GanState::new(gen, disc, &cfg.gan), Vec::new())
        }
    };
    let mut hook_error = None;
    let result = train_gan(train, state, &cfg.gan, |state, hist| {
        let mut steps = prior.clone();
        steps.extend_from_slice(&hist.steps);
        if let Err(e) = on_checkpoint(&Checkpoint::from_gan(state, &cfg.gan, steps)) {
            hook_error = Some(e);
            return Err(sphinv_model::ModelError::Config("checkpoint hook failed".into()));
        }
        Ok(())
    });
    if let Some(e) = hook_error {
        return Err(e);
    }
    let (state, hist) = result?;
    prior.extend(hist.steps);
    Ok(Checkpoint::from_gan(&state, &cfg.gan, prior))
}

/// Step 1 for each requested encoder variant; pairs are stored in `ck`.
/// Encoders start from random weights, or from the same-role encoder in
/// `init` when given. Returns the per-iteration training loss of each variant.
pub fn train_encoder_stage(
    cfg: &RunConfig,
    train: &[PointCloud],
    ck: &mut Checkpoint,
    roles: &[PairRole],
    init: Option<&Checkpoint>,
) -> Result<Vec<(PairRole, Vec<f64>)>> {
    let seed = cfg.training.encoder_seed;
    let mut out = Vec::new();
    for &role in roles {
        if let Some(init) = init {
            let encoder = warm_start(init, role, cfg)?;
            let outcome = step1_train(train, ck.generator.clone(), encoder, &cfg.inversion)?;
            store_pair(ck, role, outcome.encoder, outcome.generator, outcome.diverged_at);
            out.push((role, outcome.history));
            continue;
        }
        let mut encoder = match role {
            PairRole::Global => Encoder::new(cfg.encoder, false, seed),
            PairRole::Local => Encoder::new(cfg.encoder, true, seed.wrapping_add(1)),
            PairRole::Discriminator => {
                let disc = ck.discriminator.as_ref().ok_or_else(|| {
                    UsageError("the discriminator-backed encoder needs a discriminator in the checkpoint".into())
                })?;
                Encoder::from_discriminator(disc, cfg.encoder, seed.wrapping_add(2))
            }
        };
        encoder.adopt_style_maps(&ck.generator)?;
        let outcome = step1_train(train, ck.generator.clone(), encoder, &cfg.inversion)?;
        store_pair(ck, role, outcome.encoder, outcome.generator, outcome.diverged_at);
        out.push((role, outcome.history));
    }
    Ok(out)
}

/// The `role` encoder of `init`, checked against the configured architecture.
fn warm_start(init: &Checkpoint, role: PairRole, cfg: &RunConfig) -> Result<Encoder> {
    let pair = init
        .pair(role)
        .ok_or_else(|| UsageError(format!("the initialization checkpoint has no {} encoder", role.name())))?;
    if *pair.encoder.config() != cfg.encoder {
        bail!(UsageError(format!(
            "the initialization checkpoint's {} encoder has a different architecture than the config",
            role.name()
        )));
    }
    Ok((*pair.encoder).clone())
}

fn store_pair(ck: &mut Checkpoint, role: PairRole, encoder: Encoder, generator: Generator, diverged: Option<usize>) {
    if let Some(it) = diverged {
        log::warn!("{} encoder training stopped at iteration {it} on a non-finite value", role.name());
    }
    ck.set_pair(role, TrainedPair { encoder: Arc::new(encoder), generator: Arc::new(generator) });
}

/// Checks that `models` can serve `mode`, with a usage error naming what is missing.
pub fn require_models(models: &Models, mode: AblationMode) -> Result<()> {
    let ok = match mode {
        AblationMode::Full | AblationMode::LearnGlobal => models.global.is_some(),
        AblationMode::LearnLocal => models.local.is_some(),
        AblationMode::OptGlobal | AblationMode::OptLocal => models.pretrained.is_some(),
    };
    if !ok {
        bail!(UsageError(format!("the checkpoint has no trained encoder for mode {mode}; run train-encoders first")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ItemEval {
    pub class: String,
    /// Index of the target in the corpus.
    pub item: usize,
    pub mode: AblationMode,
    /// Chamfer discrepancy of the reconstruction against the target.
    pub cd: f64,
    pub emd: Option<f64>,
    pub smoothness: f64,
    pub result: InversionResult,
}

/// Table metrics of a reconstruction against its target.
pub fn score(recon: &PointCloud, target: &PointCloud, with_emd: bool) -> Result<(f64, Option<f64>)> {
    let cd = chamfer_discrepancy(recon, target);
    let emd = if with_emd { Some(earth_mover_distance(recon, target)?) } else { None };
    Ok((cd, emd))
}

/// Inverts every target under every mode. Deterministic for a fixed config.
pub fn evaluate(
    class: &str,
    inversion: &InversionConfig,
    targets: &[(usize, PointCloud)],
    models: &Models,
    modes: &[AblationMode],
    with_emd: bool,
) -> Result<Vec<ItemEval>> {
    if targets.is_empty() {
        bail!("the test split is empty");
    }
    for &mode in modes {
        require_models(models, mode)?;
    }
    let mut out = Vec::with_capacity(targets.len() * modes.len());
    for &mode in modes {
        let cfg = InversionConfig { ablation_mode: mode, ..inversion.clone() };
        for (item, target) in targets {
            let result = invert(target, models, &cfg).with_context(|| format!("inverting item {item} ({mode})"))?;
            let (cd, emd) = score(&result.reconstruction, target, with_emd)?;
            let smoothness = correspondence_smoothness(&result);
            log::info!("{mode} item {item}: cd {cd:.4e}");
            out.push(ItemEval { class: class.to_string(), item: *item, mode, cd, emd, smoothness, result });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct EncoderEval {
    pub role: PairRole,
    /// Per-target Step-1 reconstruction discrepancy, in target order.
    pub cds: Vec<f64>,
}

impl EncoderEval {
    pub fn mean(&self) -> f64 {
        self.cds.iter().sum::<f64>() / self.cds.len() as f64
    }
}

/// Step-1 reconstruction quality of every stored global encoder variant.
pub fn compare_encoders(targets: &[(usize, PointCloud)], ck: &Checkpoint) -> Result<Vec<EncoderEval>> {
    if targets.is_empty() {
        bail!("the test split is empty");
    }
    let mut out = Vec::new();
    for role in [PairRole::Global, PairRole::Discriminator] {
        let pair = ck.pair(role).ok_or_else(|| {
            UsageError(format!("the checkpoint has no {role:?} encoder; train both variants first").to_lowercase())
        })?;
        let mut cds = Vec::with_capacity(targets.len());
        for (_, target) in targets {
            let (_, _, _, recon) = encode_and_generate(target, pair)?;
            cds.push(chamfer_discrepancy(&recon, target));
        }
        out.push(EncoderEval { role, cds });
    }
    Ok(out)
}
