use ndarray::{s, Array1, Array2, ArrayView2};

use crate::error::{CoreError, Result};
use crate::sphere::SpherePrior;

/// Order-invariant `d`-dimensional code summarizing a whole shape.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalLatent {
    values: Array1<f64>,
}

impl GlobalLatent {
    pub fn new(values: Array1<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite { row: 0 });
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }
}

/// Per-point codes, `N x (3 + d)`. Row `i` belongs to sphere-prior row `i`;
/// the first three columns start out as the prior coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCodes {
    values: Array2<f64>,
}

impl LatentCodes {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.ncols() < 3 {
            return Err(CoreError::Shape(format!("latent codes need at least 3 columns, got {}", values.ncols())));
        }
        if values.nrows() == 0 {
            return Err(CoreError::EmptyCloud);
        }
        if let Some(row) = values.outer_iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(CoreError::NonFinite { row });
        }
        Ok(Self { values })
    }

    /// Concatenates the prior coordinates with a noise block of shape `N x d`.
    pub fn from_prior(sphere: &SpherePrior, noise: ArrayView2<'_, f64>) -> Result<Self> {
        if noise.nrows() != sphere.len() {
            return Err(CoreError::Cardinality { left: sphere.len(), right: noise.nrows() });
        }
        let d = noise.ncols();
        let mut values = Array2::zeros((sphere.len(), 3 + d));
        values.slice_mut(s![.., ..3]).assign(sphere.points());
        values.slice_mut(s![.., 3..]).assign(&noise);
        Self::new(values)
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Noise dimension `d`.
    pub fn latent_dim(&self) -> usize {
        self.values.ncols() - 3
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn noise(&self) -> ArrayView2<'_, f64> {
        self.values.slice(s![.., 3..])
    }

    pub fn coords(&self) -> ArrayView2<'_, f64> {
        self.values.slice(s![.., ..3])
    }
}
