use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sphinv_autograd::{Bound, Graph, ParamSet, Var};
use sphinv_core::PointCloud;

use crate::init::{self, LEAK};
use crate::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorConfig {
    pub num_points: usize,
    /// Widths of the two shared per-point layers.
    pub feature_widths: [usize; 2],
    pub head_width: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self { num_points: 256, feature_widths: [32, 64], head_width: 32 }
    }
}

/// Graph nodes of one discriminator pass.
#[derive(Debug, Clone, Copy)]
pub struct DiscOutput {
    /// `1 x 1` whole-cloud score.
    pub score: Var,
    /// `N x 1` per-point scores.
    pub point_scores: Var,
    /// `N x F` per-point features (shared trunk output).
    pub features: Var,
}

/// Evaluated scores for one cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub global: f64,
    pub points: Array1<f64>,
}

/// Shared per-point trunk, max-pooled global branch and a per-point branch
/// that sees each point's features alongside the pooled summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    cfg: DiscriminatorConfig,
    params: ParamSet,
}

impl Discriminator {
    pub fn new(cfg: DiscriminatorConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [f1, f2] = cfg.feature_widths;
        let h = cfg.head_width;
        let mut p = ParamSet::new();
        p.insert("feat1.w", init::weight(&mut rng, 3, f1));
        p.insert("feat1.b", init::zeros(f1));
        p.insert("feat2.w", init::weight(&mut rng, f1, f2));
        p.insert("feat2.b", init::zeros(f2));
        p.insert("glob1.w", init::weight(&mut rng, f2, h));
        p.insert("glob1.b", init::zeros(h));
        p.insert("glob2.w", init::scaled(&mut rng, h, 1, 0.5));
        p.insert("glob2.b", init::zeros(1));
        p.insert("pt1.local", init::weight(&mut rng, f2, h));
        p.insert("pt1.global", init::scaled(&mut rng, f2, h, 0.5));
        p.insert("pt1.b", init::zeros(h));
        p.insert("pt2.w", init::scaled(&mut rng, h, 1, 0.5));
        p.insert("pt2.b", init::zeros(1));
        Self { cfg, params: p }
    }

    pub fn from_params(cfg: DiscriminatorConfig, params: ParamSet) -> Result<Self> {
        let [f1, f2] = cfg.feature_widths;
        if !params.contains("feat1.w")
            || params.get("feat1.w").dim() != (3, f1)
            || params.get("feat2.w").dim() != (f1, f2)
        {
            return Err(ModelError::Shape("discriminator params do not match config".into()));
        }
        Ok(Self { cfg, params })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Shared per-point trunk: two linear + leaky-ReLU layers.
    pub fn features(g: &mut Graph, p: &Bound, cloud: Var) -> Var {
        let h = g.matmul(cloud, p.var("feat1.w"));
        let h = g.add_row(h, p.var("feat1.b"));
        let h = g.leaky_relu(h, LEAK);
        let h = g.matmul(h, p.var("feat2.w"));
        let h = g.add_row(h, p.var("feat2.b"));
        g.leaky_relu(h, LEAK)
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, cloud: Var) -> DiscOutput {
        let features = Self::features(g, p, cloud);
        let pooled = g.max_rows(features);

        let h = g.matmul(pooled, p.var("glob1.w"));
        let h = g.add(h, p.var("glob1.b"));
        let h = g.leaky_relu(h, LEAK);
        let h = g.matmul(h, p.var("glob2.w"));
        let score = g.add(h, p.var("glob2.b"));

        let local = g.matmul(features, p.var("pt1.local"));
        let glob = g.matmul(pooled, p.var("pt1.global"));
        let glob = g.add(glob, p.var("pt1.b"));
        let h = g.add_row(local, glob);
        let h = g.leaky_relu(h, LEAK);
        let h = g.matmul(h, p.var("pt2.w"));
        let point_scores = g.add_row(h, p.var("pt2.b"));
        DiscOutput { score, point_scores, features }
    }

    fn check(&self, cloud: &PointCloud) -> Result<()> {
        if cloud.len() != self.cfg.num_points {
            return Err(ModelError::Shape(format!(
                "discriminator expects {} points, got {}",
                self.cfg.num_points,
                cloud.len()
            )));
        }
        Ok(())
    }

    pub fn score(&self, cloud: &PointCloud) -> Result<Scores> {
        self.check(cloud)?;
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let x = g.constant(cloud.points().clone());
        let out = self.forward(&mut g, &p, x);
        Ok(Scores { global: g.scalar(out.score), points: g.value(out.point_scores).column(0).to_owned() })
    }

    /// Least-squares discriminative loss of this discriminator on one real/fake pair.
    pub fn loss(&self, real: &PointCloud, fake: &PointCloud, lambda: f64) -> Result<f64> {
        self.check(real)?;
        self.check(fake)?;
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let r = g.constant(real.points().clone());
        let f = g.constant(fake.points().clone());
        let ro = self.forward(&mut g, &p, r);
        let fo = self.forward(&mut g, &p, f);
        let l = super::discriminator_loss(&mut g, &ro, &fo, lambda);
        Ok(g.scalar(l))
    }

    /// Least-squares generative loss of a generated cloud under this discriminator.
    pub fn generator_loss(&self, fake: &PointCloud, beta: f64) -> Result<f64> {
        self.check(fake)?;
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let f = g.constant(fake.points().clone());
        let fo = self.forward(&mut g, &p, f);
        let l = super::generator_loss(&mut g, &fo, beta);
        Ok(g.scalar(l))
    }
}
