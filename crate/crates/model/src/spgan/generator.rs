use std::sync::Arc;

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sphinv_autograd::{Bound, Graph, ParamSet, Var};
use sphinv_core::knn::{knn_graph, Neighborhood};
use sphinv_core::{sample_sphere_prior, LatentCodes, PointCloud, SpherePrior};

use crate::init::{self, LEAK};
use crate::{ModelError, Result};

const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Points per cloud (rows of the sphere prior).
    pub num_points: usize,
    /// Per-point noise width `d`.
    pub latent_dim: usize,
    pub hidden: usize,
    pub style_dim: usize,
    /// Neighbors per point in the static prior graph.
    pub k: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl GeneratorConfig {
    pub fn desk() -> Self {
        Self { num_points: 256, latent_dim: 16, hidden: 64, style_dim: 32, k: 8 }
    }

    pub fn full_scale() -> Self {
        Self { num_points: 2048, latent_dim: 128, hidden: 128, style_dim: 128, k: 20 }
    }

    pub fn code_width(&self) -> usize {
        3 + self.latent_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_points == 0 || self.hidden == 0 || self.style_dim == 0 {
            return Err(ModelError::Config("generator sizes must be positive".into()));
        }
        if self.k == 0 || self.k >= self.num_points {
            return Err(ModelError::GraphUndefined { points: self.num_points, k: self.k });
        }
        Ok(())
    }
}

/// The two modulation vectors injected at the generator's two normalization sites.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleVectors {
    pub s1: Array1<f64>,
    pub s2: Array1<f64>,
}

impl StyleVectors {
    pub fn dim(&self) -> usize {
        self.s1.len()
    }

    pub fn is_finite(&self) -> bool {
        self.s1.iter().chain(self.s2.iter()).all(|v| v.is_finite())
    }

    pub fn bind(&self, g: &mut Graph) -> StyleVars {
        StyleVars {
            s1: g.constant(self.s1.clone().insert_axis(Axis(0))),
            s2: g.constant(self.s2.clone().insert_axis(Axis(0))),
        }
    }

    pub fn from_vars(g: &Graph, vars: &StyleVars) -> Self {
        Self { s1: g.value(vars.s1).row(0).to_owned(), s2: g.value(vars.s2).row(0).to_owned() }
    }
}

/// Style vectors as `1 x style_dim` graph nodes.
#[derive(Debug, Clone, Copy)]
pub struct StyleVars {
    pub s1: Var,
    pub s2: Var,
}

/// Per-point synthesis network over the sphere prior.
///
/// ```text
/// code -> linear -> modulate(s1) -> lrelu
///      -> graph conv (static k-NN on the prior) -> lrelu
///      -> linear -> modulate(s2) -> lrelu
///      -> graph conv -> lrelu -> linear -> xyz
/// ```
/// Modulation scales and shifts every feature channel by amounts computed from
/// the unit-normalized style vector. No statistic is pooled across points, so a
/// point's output depends only on its own code, its graph neighborhood (two
/// hops) and the style vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    cfg: GeneratorConfig,
    params: ParamSet,
    sphere: SpherePrior,
    graph: Arc<Neighborhood>,
}

impl Generator {
    pub fn new(cfg: GeneratorConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, h, s, d) = (cfg.code_width(), cfg.hidden, cfg.style_dim, cfg.latent_dim);
        let mut p = ParamSet::new();
        p.insert("in.w", init::weight(&mut rng, c, h));
        p.insert("in.b", init::zeros(h));
        for site in ["mod1", "mod2"] {
            p.insert(format!("{site}.gamma.w"), init::scaled(&mut rng, s, h, 0.1));
            p.insert(format!("{site}.gamma.b"), init::zeros(h));
            p.insert(format!("{site}.beta.w"), init::scaled(&mut rng, s, h, 0.1));
            p.insert(format!("{site}.beta.b"), init::zeros(h));
        }
        for block in ["gc1", "gc2"] {
            p.insert(format!("{block}.self"), init::scaled(&mut rng, h, h, 0.7));
            p.insert(format!("{block}.nbr"), init::scaled(&mut rng, h, h, 0.7));
            p.insert(format!("{block}.b"), init::zeros(h));
        }
        p.insert("mid.w", init::weight(&mut rng, h, h));
        p.insert("mid.b", init::zeros(h));
        p.insert("out.w", init::scaled(&mut rng, h, 3, 0.5));
        p.insert("out.b", init::zeros(3));
        for site in ["style1", "style2"] {
            p.insert(format!("{site}.w"), init::weight(&mut rng, d, s));
            p.insert(format!("{site}.b"), init::zeros(s));
        }
        Self::from_params(cfg, p)
    }

    /// Rebuilds a generator around existing weights (checkpoint loading).
    pub fn from_params(cfg: GeneratorConfig, params: ParamSet) -> Result<Self> {
        cfg.validate()?;
        let sphere = sample_sphere_prior(cfg.num_points)?;
        let graph = Arc::new(knn_graph(sphere.view(), cfg.k));
        let expect = [("in.w", (cfg.code_width(), cfg.hidden)), ("out.w", (cfg.hidden, 3))];
        for (name, shape) in expect {
            if !params.contains(name) || params.get(name).dim() != shape {
                return Err(ModelError::Shape(format!("generator param {name} missing or misshapen")));
            }
        }
        Ok(Self { cfg, params, sphere, graph })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn sphere(&self) -> &SpherePrior {
        &self.sphere
    }

    pub fn graph(&self) -> &Arc<Neighborhood> {
        &self.graph
    }

    fn modulate(&self, g: &mut Graph, p: &Bound, x: Var, style: Var, site: &str) -> Var {
        let style = g.row_norm(style, NORM_EPS);
        let gw = g.matmul(style, p.var(&format!("{site}.gamma.w")));
        let gamma = g.add(gw, p.var(&format!("{site}.gamma.b")));
        let gamma = g.affine(gamma, 1.0, 1.0);
        let bw = g.matmul(style, p.var(&format!("{site}.beta.w")));
        let beta = g.add(bw, p.var(&format!("{site}.beta.b")));
        let scaled = g.mul_row(x, gamma);
        g.add_row(scaled, beta)
    }

    fn graph_conv(&self, g: &mut Graph, p: &Bound, x: Var, graph: &Arc<Neighborhood>, block: &str) -> Var {
        let own = g.matmul(x, p.var(&format!("{block}.self")));
        let agg = g.neighbor_mean(x, graph);
        let nbr = g.matmul(agg, p.var(&format!("{block}.nbr")));
        let sum = g.add(own, nbr);
        let biased = g.add_row(sum, p.var(&format!("{block}.b")));
        g.leaky_relu(biased, LEAK)
    }

    fn linear(&self, g: &mut Graph, p: &Bound, x: Var, name: &str) -> Var {
        let xw = g.matmul(x, p.var(&format!("{name}.w")));
        g.add_row(xw, p.var(&format!("{name}.b")))
    }

    /// Records the forward pass on `g` using the prior's neighborhood graph.
    pub fn forward(&self, g: &mut Graph, p: &Bound, codes: Var, style: &StyleVars) -> Var {
        self.forward_with_graph(g, p, codes, style, &self.graph)
    }

    /// Forward pass with an explicit neighborhood graph (rows of `codes` index its nodes).
    pub fn forward_with_graph(
        &self,
        g: &mut Graph,
        p: &Bound,
        codes: Var,
        style: &StyleVars,
        graph: &Arc<Neighborhood>,
    ) -> Var {
        let h = self.linear(g, p, codes, "in");
        let h = self.modulate(g, p, h, style.s1, "mod1");
        let h = g.leaky_relu(h, LEAK);
        let h = self.graph_conv(g, p, h, graph, "gc1");
        let h = self.linear(g, p, h, "mid");
        let h = self.modulate(g, p, h, style.s2, "mod2");
        let h = g.leaky_relu(h, LEAK);
        let h = self.graph_conv(g, p, h, graph, "gc2");
        self.linear(g, p, h, "out")
    }

    /// Affine style maps applied to a `1 x d` latent row.
    pub fn style_from_latent(&self, g: &mut Graph, p: &Bound, latent: Var) -> StyleVars {
        let s1 = self.linear(g, p, latent, "style1");
        let s2 = self.linear(g, p, latent, "style2");
        StyleVars { s1, s2 }
    }

    /// Style used for unconditional sampling: the style maps applied to
    /// `sqrt(N)` times the mean noise row, which is standard normal under the prior.
    pub fn unconditional_style_vars(&self, g: &mut Graph, p: &Bound, codes: Var) -> StyleVars {
        let width = g.value(codes).ncols();
        let noise = g.slice_cols(codes, 3, width);
        let mean = g.mean_rows(noise);
        let n = g.value(codes).nrows() as f64;
        let latent = g.scale(mean, n.sqrt());
        self.style_from_latent(g, p, latent)
    }

    pub fn unconditional_style(&self, codes: &LatentCodes) -> StyleVectors {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let c = g.constant(codes.values().clone());
        let vars = self.unconditional_style_vars(&mut g, &p, c);
        StyleVectors::from_vars(&g, &vars)
    }

    /// Style derived from a global latent through the generator's own style maps.
    pub fn style_for_global(&self, latent: &Array1<f64>) -> StyleVectors {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let z = g.constant(latent.clone().insert_axis(Axis(0)));
        let vars = self.style_from_latent(&mut g, &p, z);
        StyleVectors::from_vars(&g, &vars)
    }

    fn check_inputs(&self, codes: &LatentCodes, style: &StyleVectors) -> Result<()> {
        if codes.len() != self.cfg.num_points || codes.values().ncols() != self.cfg.code_width() {
            return Err(ModelError::Shape(format!(
                "codes are {}x{}, generator expects {}x{}",
                codes.len(),
                codes.values().ncols(),
                self.cfg.num_points,
                self.cfg.code_width()
            )));
        }
        if style.s1.len() != self.cfg.style_dim || style.s2.len() != self.cfg.style_dim {
            return Err(ModelError::Shape(format!("style vectors must have length {}", self.cfg.style_dim)));
        }
        Ok(())
    }

    /// Inference: deterministic `N x 3` output for the given codes and style.
    pub fn generate(&self, codes: &LatentCodes, style: &StyleVectors) -> Result<PointCloud> {
        self.generate_with_graph(codes, style, &self.graph)
    }

    pub fn generate_with_graph(
        &self,
        codes: &LatentCodes,
        style: &StyleVectors,
        graph: &Arc<Neighborhood>,
    ) -> Result<PointCloud> {
        self.check_inputs(codes, style)?;
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let c = g.constant(codes.values().clone());
        let s = style.bind(&mut g);
        let out = self.forward_with_graph(&mut g, &p, c, &s, graph);
        Ok(PointCloud::new(g.value(out).clone())?)
    }

    /// Samples a shape from the prior: fresh noise, unconditional style.
    pub fn sample(&self, seed: u64) -> Result<PointCloud> {
        let codes = super::make_prior_code(&self.sphere, self.cfg.latent_dim, seed)?;
        let style = self.unconditional_style(&codes);
        self.generate(&codes, &style)
    }

    /// Raw forward on a matrix of codes, used for batched evaluation.
    pub fn generate_points(&self, codes: &Array2<f64>, style: &StyleVectors) -> Result<Array2<f64>> {
        let codes = LatentCodes::new(codes.clone())?;
        Ok(self.generate(&codes, style)?.into_points())
    }
}
