//! Model and result persistence in the `PINV` container.
//!
//! A model checkpoint holds the adversarially trained generator, optionally
//! its discriminator and resumable training state, and any number of encoder
//! pairs. Each pair is a nested container with its own generator, because
//! Step 1 refines the generator alongside the encoder.
//!
//! | tag    | payload                                        |
//! |--------|------------------------------------------------|
//! | `GCFG` | generator config (JSON)                        |
//! | `GPAR` | generator parameters                           |
//! | `DCFG` | discriminator config (JSON)                    |
//! | `DPAR` | discriminator parameters                       |
//! | `TCFG` | adversarial training config (JSON)             |
//! | `TSTA` | iteration count and both optimizer states      |
//! | `HIST` | per-iteration adversarial losses               |
//! | `ENCG` | global encoder pair (nested container)         |
//! | `ENCL` | encoder pair with a per-point head             |
//! | `ENCD` | discriminator-backed encoder pair              |
//! | `ECFG` | encoder config and kind (JSON, inside a pair)  |
//! | `EPAR` | encoder parameters (inside a pair)             |

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sphinv_autograd::{Adam, ParamSet};
use sphinv_core::io::{ByteReader, ByteWriter, Container, Tag};
use sphinv_core::{GlobalLatent, LatentCodes, PointCloud};

use crate::encoder::{Encoder, EncoderConfig, EncoderKind};
use crate::inversion::{AblationMode, InversionConfig, InversionResult, Models, TrainedPair};
use crate::spgan::{
    Discriminator, DiscriminatorConfig, GanState, GanStep, GanTrainingConfig, Generator, GeneratorConfig, StyleVectors,
};
use crate::{ModelError, Result};

const GEN_CFG: Tag = *b"GCFG";
const GEN_PAR: Tag = *b"GPAR";
const DISC_CFG: Tag = *b"DCFG";
const DISC_PAR: Tag = *b"DPAR";
const TRAIN_CFG: Tag = *b"TCFG";
const TRAIN_STATE: Tag = *b"TSTA";
const HISTORY: Tag = *b"HIST";
const ENC_CFG: Tag = *b"ECFG";
const ENC_PAR: Tag = *b"EPAR";

const RES_MODE: Tag = *b"MODE";
const RES_CODES: Tag = *b"CODE";
const RES_GLOBAL: Tag = *b"GLOB";
const RES_STYLE: Tag = *b"STYL";
const RES_RECON: Tag = *b"RECN";
const RES_DIGEST: Tag = *b"CDIG";
const RES_LOSS: Tag = *b"LOSS";

/// Role of a stored encoder pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRole {
    Global,
    Local,
    Discriminator,
}

impl PairRole {
    pub const ALL: [PairRole; 3] = [Self::Global, Self::Local, Self::Discriminator];

    pub fn name(self) -> &'static str {
        match self {
            Self::Global => "global",
            Self::Local => "local",
            Self::Discriminator => "discriminator",
        }
    }

    fn tag(self) -> Tag {
        match self {
            Self::Global => *b"ENCG",
            Self::Local => *b"ENCL",
            Self::Discriminator => *b"ENCD",
        }
    }
}

impl std::str::FromStr for PairRole {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| ModelError::Config(format!("unknown encoder variant `{s}` (global, local, discriminator)")))
    }
}

/// Resumable adversarial training state.
#[derive(Debug, Clone)]
pub struct TrainingState {
    pub config: GanTrainingConfig,
    pub gen_opt: Adam,
    pub disc_opt: Adam,
    pub iteration: usize,
    pub history: Vec<GanStep>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub generator: Generator,
    pub discriminator: Option<Discriminator>,
    pub training: Option<TrainingState>,
    pub pairs: Vec<(PairRole, TrainedPair)>,
}

#[derive(Serialize, Deserialize)]
struct EncoderHeader {
    config: EncoderConfig,
    kind: EncoderKind,
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("config types serialize")
}

fn from_json<T: for<'de> Deserialize<'de>>(bytes: &[u8], what: &str) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| ModelError::Config(format!("{what}: {e}")))
}

fn push_generator(c: &mut Container, gen: &Generator) {
    c.push(GEN_CFG, json(gen.config()));
    c.push(GEN_PAR, gen.params().to_bytes());
}

fn read_generator(c: &Container) -> Result<Generator> {
    let cfg: GeneratorConfig = from_json(c.require(&GEN_CFG)?, "generator config")?;
    Generator::from_params(cfg, ParamSet::from_bytes(c.require(&GEN_PAR)?)?)
}

fn pair_container(pair: &TrainedPair) -> Container {
    let mut c = Container::new();
    let header = EncoderHeader { config: *pair.encoder.config(), kind: pair.encoder.kind() };
    c.push(ENC_CFG, json(&header));
    c.push(ENC_PAR, pair.encoder.params().to_bytes());
    push_generator(&mut c, &pair.generator);
    c
}

fn read_pair(bytes: &[u8]) -> Result<TrainedPair> {
    let c = Container::from_bytes(bytes)?;
    let header: EncoderHeader = from_json(c.require(&ENC_CFG)?, "encoder config")?;
    let encoder = Encoder::from_params(header.config, header.kind, ParamSet::from_bytes(c.require(&ENC_PAR)?)?)?;
    let generator = read_generator(&c)?;
    Ok(TrainedPair { encoder: Arc::new(encoder), generator: Arc::new(generator) })
}

fn history_bytes(history: &[GanStep]) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.u64(history.len() as u64);
    for s in history {
        w.u64(s.iteration as u64).f64(s.d_loss).f64(s.g_loss);
    }
    w.finish()
}

fn read_history(bytes: &[u8]) -> Result<Vec<GanStep>> {
    let mut r = ByteReader::new(bytes);
    let n = r.u64()? as usize;
    let mut out = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        out.push(GanStep { iteration: r.u64()? as usize, d_loss: r.f64()?, g_loss: r.f64()? });
    }
    Ok(out)
}

fn length_prefixed(parts: &[&[u8]]) -> Vec<u8> {
    let mut out = Vec::new();
    for p in parts {
        out.extend_from_slice(&(p.len() as u64).to_le_bytes());
        out.extend_from_slice(p);
    }
    out
}

fn split_prefixed(bytes: &[u8], count: usize) -> Result<Vec<&[u8]>> {
    let mut r = ByteReader::new(bytes);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u64()? as usize;
        out.push(r.bytes(len)?);
    }
    if !r.is_empty() {
        return Err(ModelError::Config("training state has trailing bytes".into()));
    }
    Ok(out)
}

impl Checkpoint {
    pub fn from_generator(generator: Generator) -> Self {
        Self { generator, discriminator: None, training: None, pairs: Vec::new() }
    }

    /// Snapshot of adversarial training that [`Checkpoint::gan_state`] resumes.
    pub fn from_gan(state: &GanState, config: &GanTrainingConfig, history: Vec<GanStep>) -> Self {
        Self {
            generator: state.generator.clone(),
            discriminator: Some(state.discriminator.clone()),
            training: Some(TrainingState {
                config: config.clone(),
                gen_opt: state.gen_opt.clone(),
                disc_opt: state.disc_opt.clone(),
                iteration: state.iteration,
                history,
            }),
            pairs: Vec::new(),
        }
    }

    /// Training state to resume from, when the checkpoint carries one.
    pub fn gan_state(&self) -> Option<GanState> {
        let (disc, t) = (self.discriminator.as_ref()?, self.training.as_ref()?);
        Some(GanState {
            generator: self.generator.clone(),
            discriminator: disc.clone(),
            gen_opt: t.gen_opt.clone(),
            disc_opt: t.disc_opt.clone(),
            iteration: t.iteration,
        })
    }

    pub fn pair(&self, role: PairRole) -> Option<&TrainedPair> {
        self.pairs.iter().find(|(r, _)| *r == role).map(|(_, p)| p)
    }

    /// Stores `pair` under `role`, replacing any previous pair with that role.
    pub fn set_pair(&mut self, role: PairRole, pair: TrainedPair) {
        self.pairs.retain(|(r, _)| *r != role);
        self.pairs.push((role, pair));
    }

    pub fn models(&self) -> Models {
        Models {
            pretrained: Some(Arc::new(self.generator.clone())),
            global: self.pair(PairRole::Global).cloned(),
            local: self.pair(PairRole::Local).cloned(),
        }
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new();
        push_generator(&mut c, &self.generator);
        if let Some(d) = &self.discriminator {
            c.push(DISC_CFG, json(d.config()));
            c.push(DISC_PAR, d.params().to_bytes());
        }
        if let Some(t) = &self.training {
            c.push(TRAIN_CFG, json(&t.config));
            let iteration = (t.iteration as u64).to_le_bytes();
            let state = length_prefixed(&[&iteration, &t.gen_opt.to_bytes(), &t.disc_opt.to_bytes()]);
            c.push(TRAIN_STATE, state);
            c.push(HISTORY, history_bytes(&t.history));
        }
        for (role, pair) in &self.pairs {
            c.push(role.tag(), pair_container(pair).to_bytes());
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let generator = read_generator(c)?;
        let discriminator = match (c.get(&DISC_CFG), c.get(&DISC_PAR)) {
            (Some(cfg), Some(par)) => {
                let cfg: DiscriminatorConfig = from_json(cfg, "discriminator config")?;
                Some(Discriminator::from_params(cfg, ParamSet::from_bytes(par)?)?)
            }
            (None, None) => None,
            _ => return Err(ModelError::Config("discriminator config and parameters must appear together".into())),
        };
        let training = match c.get(&TRAIN_CFG) {
            Some(cfg) => {
                let config: GanTrainingConfig = from_json(cfg, "training config")?;
                let parts = split_prefixed(c.require(&TRAIN_STATE)?, 3)?;
                let iteration = u64::from_le_bytes(
                    parts[0].try_into().map_err(|_| ModelError::Config("bad iteration field".into()))?,
                ) as usize;
                Some(TrainingState {
                    config,
                    gen_opt: Adam::from_bytes(parts[1])?,
                    disc_opt: Adam::from_bytes(parts[2])?,
                    iteration,
                    history: read_history(c.require(&HISTORY)?)?,
                })
            }
            None => None,
        };
        let mut pairs = Vec::new();
        for role in PairRole::ALL {
            if let Some(bytes) = c.get(&role.tag()) {
                pairs.push((role, read_pair(bytes)?));
            }
        }
        Ok(Self { generator, discriminator, training, pairs })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(self.to_container().write(path)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::read(path)?)
    }
}

/// SHA-256 of the inversion config's canonical JSON form.
pub fn config_digest(cfg: &InversionConfig) -> [u8; 32] {
    Sha256::digest(json(cfg)).into()
}

/// Serializable part of an [`InversionResult`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub mode: AblationMode,
    pub codes: LatentCodes,
    pub global: GlobalLatent,
    pub style: StyleVectors,
    pub reconstruction: PointCloud,
    pub loss_history: Vec<f64>,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub config_digest: [u8; 32],
}

impl ResultRecord {
    pub fn new(result: &InversionResult, cfg: &InversionConfig) -> Self {
        Self {
            mode: result.mode,
            codes: result.codes.clone(),
            global: result.global.clone(),
            style: result.style.clone(),
            reconstruction: result.reconstruction.clone(),
            loss_history: result.loss_history.clone(),
            initial_loss: result.initial_loss,
            final_loss: result.final_loss,
            config_digest: config_digest(cfg),
        }
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new();
        c.push(RES_MODE, self.mode.name().as_bytes().to_vec());
        let mut w = ByteWriter::new();
        w.matrix(self.codes.values());
        c.push(RES_CODES, w.finish());
        let mut w = ByteWriter::new();
        w.vector(self.global.values());
        c.push(RES_GLOBAL, w.finish());
        let mut w = ByteWriter::new();
        w.vector(&self.style.s1).vector(&self.style.s2);
        c.push(RES_STYLE, w.finish());
        let mut w = ByteWriter::new();
        w.matrix(self.reconstruction.points());
        c.push(RES_RECON, w.finish());
        c.push(RES_DIGEST, self.config_digest.to_vec());
        let mut w = ByteWriter::new();
        w.f64(self.initial_loss).f64(self.final_loss).f64s(&self.loss_history);
        c.push(RES_LOSS, w.finish());
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let mode = std::str::from_utf8(c.require(&RES_MODE)?)
            .map_err(|_| ModelError::Config("mode is not UTF-8".into()))?
            .parse()?;
        let codes = LatentCodes::new(ByteReader::new(c.require(&RES_CODES)?).matrix()?)?;
        let global = GlobalLatent::new(ByteReader::new(c.require(&RES_GLOBAL)?).vector()?)?;
        let mut r = ByteReader::new(c.require(&RES_STYLE)?);
        let style = StyleVectors { s1: r.vector()?, s2: r.vector()? };
        let reconstruction = PointCloud::new(ByteReader::new(c.require(&RES_RECON)?).matrix()?)?;
        let config_digest = c
            .require(&RES_DIGEST)?
            .try_into()
            .map_err(|_| ModelError::Config("config digest must be 32 bytes".into()))?;
        let mut r = ByteReader::new(c.require(&RES_LOSS)?);
        let (initial_loss, final_loss, loss_history) = (r.f64()?, r.f64()?, r.f64s()?);
        Ok(Self { mode, codes, global, style, reconstruction, loss_history, initial_loss, final_loss, config_digest })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(self.to_container().write(path)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spgan::GanTrainingConfig;

    fn tiny_gen() -> Generator {
        let cfg = GeneratorConfig { num_points: 16, latent_dim: 2, hidden: 6, style_dim: 4, k: 3 };
        Generator::new(cfg, 3).unwrap()
    }

    #[test]
    fn checkpoint_round_trip_with_pairs() {
        let gen = tiny_gen();
        let disc = Discriminator::new(DiscriminatorConfig { num_points: 16, feature_widths: [4, 6], head_width: 5 }, 1);
        let gcfg = GanTrainingConfig::default();
        let state = GanState::new(gen.clone(), disc, &gcfg);
        let mut ck = Checkpoint::from_gan(&state, &gcfg, vec![GanStep { iteration: 0, d_loss: 0.5, g_loss: 0.25 }]);
        let ecfg = EncoderConfig {
            k: 3,
            edge_widths: [4, 4, 4, 4],
            fused_width: 6,
            head_width: 5,
            latent_dim: 2,
            style_dim: 4,
        };
        let pair = TrainedPair { encoder: Arc::new(Encoder::new(ecfg, true, 2)), generator: Arc::new(gen) };
        ck.set_pair(PairRole::Local, pair);
        let back = Checkpoint::from_container(&Container::from_bytes(&ck.to_container().to_bytes()).unwrap()).unwrap();
        assert_eq!(back.generator, ck.generator);
        assert_eq!(back.discriminator, ck.discriminator);
        let t = back.training.as_ref().unwrap();
        assert_eq!(t.history, ck.training.as_ref().unwrap().history);
        assert_eq!(t.gen_opt.to_bytes(), state.gen_opt.to_bytes());
        let p = back.pair(PairRole::Local).unwrap();
        assert!(p.encoder.has_local_head());
        assert_eq!(p.encoder.params(), ck.pair(PairRole::Local).unwrap().encoder.params());
        assert!(back.pair(PairRole::Global).is_none());
    }

    #[test]
    fn generator_only_checkpoint_has_no_training_state() {
        let ck = Checkpoint::from_generator(tiny_gen());
        let back = Checkpoint::from_container(&ck.to_container()).unwrap();
        assert!(back.gan_state().is_none());
        assert!(back.models().global.is_none());
    }

    #[test]
    fn digest_tracks_config() {
        let a = InversionConfig::default();
        let b = InversionConfig { seed: 1, ..a.clone() };
        assert_eq!(config_digest(&a), config_digest(&a.clone()));
        assert_ne!(config_digest(&a), config_digest(&b));
    }
}
