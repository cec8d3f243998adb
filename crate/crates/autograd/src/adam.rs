use ndarray::{Array2, Zip};
use sphinv_core::io::{ByteReader, ByteWriter};
use sphinv_core::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adaptive-moment optimizer over a fixed list of tensors.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: u64,
}

impl Adam {
    pub fn new<'a>(cfg: AdamConfig, shapes: impl IntoIterator<Item = &'a Array2<f64>>) -> Self {
        let m: Vec<_> = shapes.into_iter().map(|a| Array2::zeros(a.raw_dim())).collect();
        let v = m.clone();
        Self { cfg, m, v, t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    /// Changes the step size while keeping the moment estimates.
    pub fn set_lr(&mut self, lr: f64) {
        self.cfg.lr = lr;
    }

    /// Serializes the configuration, step count and both moment estimates.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.f64(self.cfg.lr).f64(self.cfg.beta1).f64(self.cfg.beta2).f64(self.cfg.eps);
        w.u64(self.t).u32(self.m.len() as u32);
        for (m, v) in self.m.iter().zip(&self.v) {
            w.matrix(m).matrix(v);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let cfg = AdamConfig { lr: r.f64()?, beta1: r.f64()?, beta2: r.f64()?, eps: r.f64()? };
        let t = r.u64()?;
        let n = r.u32()? as usize;
        let mut m = Vec::with_capacity(n.min(1024));
        let mut v = Vec::with_capacity(n.min(1024));
        for _ in 0..n {
            m.push(r.matrix()?);
            v.push(r.matrix()?);
        }
        if !r.is_empty() {
            return Err(CoreError::Format { format: "adam", msg: "trailing bytes".into() });
        }
        Ok(Self { cfg, m, v, t })
    }

    pub fn step(&mut self, params: &mut [Array2<f64>], grads: &[Array2<f64>]) {
        assert_eq!(params.len(), self.m.len(), "parameter count changed");
        assert_eq!(grads.len(), self.m.len(), "gradient count mismatch");
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let mh = *m / bc1;
                let vh = *v / bc2;
                *p -= lr * mh / (vh.sqrt() + eps);
            });
        }
    }
}
