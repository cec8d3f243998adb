use std::collections::HashMap;
use std::sync::Arc;

use ndarray::Array2;
use sphinv_core::io::{ByteReader, ByteWriter};
use sphinv_core::{CoreError, Result};

use crate::graph::{Grads, Graph, Var};

/// Named, ordered collection of weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    values: Vec<Array2<f64>>,
    names: Vec<String>,
    index: Arc<HashMap<String, usize>>,
}

impl Default for ParamSet {
    fn default() -> Self {
        Self { values: Vec::new(), names: Vec::new(), index: Arc::new(HashMap::new()) }
    }
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a tensor. Panics on a duplicate name.
    pub fn insert(&mut self, name: impl Into<String>, value: Array2<f64>) {
        let name = name.into();
        let index = Arc::make_mut(&mut self.index);
        assert!(index.insert(name.clone(), self.values.len()).is_none(), "duplicate param {name}");
        self.names.push(name);
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> &Array2<f64> {
        &self.values[self.index_of(name)]
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Array2<f64> {
        let i = self.index_of(name);
        &mut self.values[i]
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    fn index_of(&self, name: &str) -> usize {
        *self.index.get(name).unwrap_or_else(|| panic!("unknown param {name}"))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Array2<f64>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.values
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Array2::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Places every tensor on the graph, trainable or constant.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Bound {
        let vars =
            self.values.iter().map(|v| if trainable { g.param(v.clone()) } else { g.constant(v.clone()) }).collect();
        Bound { vars, index: Arc::clone(&self.index) }
    }

    /// Gradients aligned with [`ParamSet::values`]; zeros for unused tensors.
    pub fn gradients(&self, bound: &Bound, grads: &Grads) -> Vec<Array2<f64>> {
        self.values.iter().zip(&bound.vars).map(|(v, &var)| grads.get_or_zeros(var, v.dim())).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.u32(self.values.len() as u32);
        for (name, v) in self.names.iter().zip(&self.values) {
            w.str(name).matrix(v);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let n = r.u32()? as usize;
        let mut out = Self::new();
        for _ in 0..n {
            let name = r.str()?;
            let m = r.matrix()?;
            if out.contains(&name) {
                return Err(CoreError::Format { format: "params", msg: format!("duplicate {name}") });
            }
            out.insert(name, m);
        }
        if !r.is_empty() {
            return Err(CoreError::Format { format: "params", msg: "trailing bytes".into() });
        }
        Ok(out)
    }
}

/// Graph handles for a bound [`ParamSet`].
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<Var>,
    index: Arc<HashMap<String, usize>>,
}

impl Bound {
    pub fn var(&self, name: &str) -> Var {
        self.vars[*self.index.get(name).unwrap_or_else(|| panic!("unknown param {name}"))]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}
