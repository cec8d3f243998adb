//! Order-invariant encoders mapping a cloud to a global latent and style vectors.
//!
//! The default encoder stacks four edge-convolution layers whose neighbor
//! graphs are rebuilt in each layer's input feature space, concatenates all
//! four layers' per-point features, fuses them, and max-pools over points.
//! Max pooling makes the outputs invariant to the storage order of the input.

use ndarray::{s, Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sphinv_autograd::{Bound, Graph, ParamSet, Var};
use sphinv_core::knn::knn_graph;
use sphinv_core::{GlobalLatent, LatentCodes, PointCloud};

use crate::init::{self, LEAK};
use crate::spgan::{Discriminator, Generator, StyleVars, StyleVectors};
use crate::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    /// Neighbors per point in each dynamic graph.
    pub k: usize,
    pub edge_widths: [usize; 4],
    pub fused_width: usize,
    pub head_width: usize,
    /// Global latent width `d`.
    pub latent_dim: usize,
    pub style_dim: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { k: 8, edge_widths: [32, 32, 64, 64], fused_width: 128, head_width: 64, latent_dim: 16, style_dim: 32 }
    }
}

impl EncoderConfig {
    pub fn full_scale() -> Self {
        Self {
            k: 20,
            edge_widths: [64, 64, 128, 256],
            fused_width: 512,
            head_width: 256,
            latent_dim: 128,
            style_dim: 128,
        }
    }
}

/// Which feature extractor backs the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// Four dynamic-graph edge-convolution layers with multi-layer fusion.
    GraphConv,
    /// The discriminator's shared per-point trunk, pooled.
    Discriminator,
}

/// Graph nodes produced by one encoder pass.
#[derive(Debug, Clone, Copy)]
pub struct EncoderVars {
    /// `1 x d` global latent.
    pub global: Var,
    pub style: StyleVars,
    /// `N x (3 + d)` per-point codes when the local head is present.
    pub local: Option<Var>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    cfg: EncoderConfig,
    kind: EncoderKind,
    params: ParamSet,
}

fn add_heads(p: &mut ParamSet, rng: &mut ChaCha8Rng, cfg: &EncoderConfig, pooled: usize, local: bool) {
    let (h, d, s) = (cfg.head_width, cfg.latent_dim, cfg.style_dim);
    p.insert("zg1.w", init::weight(rng, pooled, h));
    p.insert("zg1.b", init::zeros(h));
    p.insert("zg2.w", init::scaled(rng, h, d, 0.5));
    p.insert("zg2.b", init::zeros(d));
    for head in ["s1", "s2"] {
        p.insert(format!("{head}.w"), init::weight(rng, d, s));
        p.insert(format!("{head}.b"), init::zeros(s));
    }
    if local {
        p.insert("loc1.feat", init::weight(rng, pooled, h));
        p.insert("loc1.glob", init::scaled(rng, pooled, h, 0.5));
        p.insert("loc1.xyz", init::weight(rng, 3, h));
        p.insert("loc1.b", init::zeros(h));
        p.insert("loc2.w", init::scaled(rng, h, 3 + d, 0.5));
        p.insert("loc2.b", init::zeros(3 + d));
    }
}

impl Encoder {
    /// Randomly initialized graph-convolution encoder. With `local_head`, an
    /// extra per-point head emits `N x (3 + d)` codes aligned with the *input*
    /// row order (the learned-local ablation).
    pub fn new(cfg: EncoderConfig, local_head: bool, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamSet::new();
        let mut c_in = 3;
        for (l, &w) in cfg.edge_widths.iter().enumerate() {
            p.insert(format!("ec{l}.self"), init::weight(&mut rng, c_in, w));
            p.insert(format!("ec{l}.nbr"), init::weight(&mut rng, c_in, w));
            p.insert(format!("ec{l}.b"), init::zeros(w));
            c_in = w;
        }
        let concat: usize = cfg.edge_widths.iter().sum();
        p.insert("fuse.w", init::weight(&mut rng, concat, cfg.fused_width));
        p.insert("fuse.b", init::zeros(cfg.fused_width));
        add_heads(&mut p, &mut rng, &cfg, cfg.fused_width, local_head);
        Self { cfg, kind: EncoderKind::GraphConv, params: p }
    }

    /// Wraps a discriminator's shared trunk with a pooling head producing the
    /// global latent and style vectors.
    pub fn from_discriminator(disc: &Discriminator, cfg: EncoderConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamSet::new();
        for name in ["feat1.w", "feat1.b", "feat2.w", "feat2.b"] {
            p.insert(name, disc.params().get(name).clone());
        }
        let pooled = disc.config().feature_widths[1];
        add_heads(&mut p, &mut rng, &cfg, pooled, false);
        Self { cfg, kind: EncoderKind::Discriminator, params: p }
    }

    pub fn from_params(cfg: EncoderConfig, kind: EncoderKind, params: ParamSet) -> Result<Self> {
        for name in ["zg2.w", "s1.w", "s2.w"] {
            if !params.contains(name) {
                return Err(ModelError::Shape(format!("encoder param {name} missing")));
            }
        }
        if params.get("zg2.w").ncols() != cfg.latent_dim || params.get("s1.w").ncols() != cfg.style_dim {
            return Err(ModelError::Shape("encoder heads do not match config".into()));
        }
        Ok(Self { cfg, kind, params })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.cfg
    }

    pub fn kind(&self) -> EncoderKind {
        self.kind
    }

    pub fn has_local_head(&self) -> bool {
        self.params.contains("loc2.w")
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Copies the generator's latent-to-style maps into the style heads, so a
    /// fresh encoder starts out speaking the generator's latent space.
    pub fn adopt_style_maps(&mut self, generator: &Generator) -> Result<()> {
        let gcfg = generator.config();
        if gcfg.latent_dim != self.cfg.latent_dim || gcfg.style_dim != self.cfg.style_dim {
            return Err(ModelError::Shape(format!(
                "generator latent/style widths {}/{} differ from encoder {}/{}",
                gcfg.latent_dim, gcfg.style_dim, self.cfg.latent_dim, self.cfg.style_dim
            )));
        }
        for (head, map) in [("s1", "style1"), ("s2", "style2")] {
            for part in ["w", "b"] {
                let value = generator.params().get(&format!("{map}.{part}")).clone();
                *self.params.get_mut(&format!("{head}.{part}")) = value;
            }
        }
        Ok(())
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.kind == EncoderKind::GraphConv && n < self.cfg.k + 1 {
            return Err(ModelError::GraphUndefined { points: n, k: self.cfg.k });
        }
        Ok(())
    }

    /// Per-point features before pooling.
    fn point_features(&self, g: &mut Graph, p: &Bound, cloud: Var) -> Var {
        match self.kind {
            EncoderKind::Discriminator => Discriminator::features(g, p, cloud),
            EncoderKind::GraphConv => {
                let mut x = cloud;
                let mut layers = Vec::with_capacity(4);
                for l in 0..4 {
                    let graph = knn_graph(g.value(x).view(), self.cfg.k);
                    let own = g.matmul(x, p.var(&format!("ec{l}.self")));
                    let msg = g.matmul(x, p.var(&format!("ec{l}.nbr")));
                    let nbr = g.neighbor_max(msg, &graph);
                    let h = g.add(own, nbr);
                    let h = g.add_row(h, p.var(&format!("ec{l}.b")));
                    x = g.leaky_relu(h, LEAK);
                    layers.push(x);
                }
                let cat = g.concat_cols(&layers);
                let f = g.matmul(cat, p.var("fuse.w"));
                let f = g.add_row(f, p.var("fuse.b"));
                g.leaky_relu(f, LEAK)
            }
        }
    }

    /// Records the encoder on `g`. `cloud` is `N x 3`.
    pub fn forward(&self, g: &mut Graph, p: &Bound, cloud: Var) -> EncoderVars {
        let feats = self.point_features(g, p, cloud);
        let pooled = g.max_rows(feats);
        let pooled = g.row_norm(pooled, 1e-5);
        let h = g.matmul(pooled, p.var("zg1.w"));
        let h = g.add(h, p.var("zg1.b"));
        let h = g.leaky_relu(h, LEAK);
        let z = g.matmul(h, p.var("zg2.w"));
        let z = g.add(z, p.var("zg2.b"));
        let z = g.scale(z, 1.0 / 3.0);
        let z = g.tanh(z);
        let global = g.scale(z, 3.0);
        let mut head = |name: &str| {
            let s = g.matmul(global, p.var(&format!("{name}.w")));
            g.add(s, p.var(&format!("{name}.b")))
        };
        let style = StyleVars { s1: head("s1"), s2: head("s2") };
        let local = self.has_local_head().then(|| {
            let a = g.matmul(feats, p.var("loc1.feat"));
            let b = g.matmul(cloud, p.var("loc1.xyz"));
            let c = g.matmul(pooled, p.var("loc1.glob"));
            let c = g.add(c, p.var("loc1.b"));
            let h = g.add(a, b);
            let h = g.add_row(h, c);
            let h = g.leaky_relu(h, LEAK);
            let o = g.matmul(h, p.var("loc2.w"));
            let o = g.add_row(o, p.var("loc2.b"));
            // Coordinate skip: each code starts at its own input point.
            let lift = g.constant(Array2::eye(3 + self.cfg.latent_dim).slice(s![..3, ..]).to_owned());
            let xyz = g.matmul(cloud, lift);
            g.add(o, xyz)
        });
        EncoderVars { global, style, local }
    }

    /// Global latent and style vectors for one cloud.
    pub fn encode(&self, cloud: &PointCloud) -> Result<(GlobalLatent, StyleVectors)> {
        self.check(cloud.len())?;
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let x = g.constant(cloud.points().clone());
        let out = self.forward(&mut g, &p, x);
        let z = GlobalLatent::new(g.value(out.global).row(0).to_owned())?;
        Ok((z, StyleVectors::from_vars(&g, &out.style)))
    }

    /// Per-point codes from the local head, rows in the input's storage order.
    pub fn encode_local(&self, cloud: &PointCloud) -> Result<(LatentCodes, StyleVectors)> {
        if !self.has_local_head() {
            return Err(ModelError::MissingModel { mode: "learn_local", missing: "an encoder with a local head" });
        }
        self.check(cloud.len())?;
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let x = g.constant(cloud.points().clone());
        let out = self.forward(&mut g, &p, x);
        let local = out.local.expect("local head present");
        Ok((LatentCodes::new(g.value(local).clone())?, StyleVectors::from_vars(&g, &out.style)))
    }

    pub fn global_dim(&self) -> usize {
        self.cfg.latent_dim
    }
}

/// The global latent as a `1 x d` matrix.
pub fn global_row(z: &GlobalLatent) -> Array2<f64> {
    z.values().clone().insert_axis(Axis(0))
}

pub fn global_from_row(row: &Array2<f64>) -> Result<GlobalLatent> {
    Ok(GlobalLatent::new(Array1::from(row.row(0).to_vec()))?)
}
