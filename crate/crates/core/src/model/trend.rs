use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::data::Locations;

pub type BasisFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Deterministic covariates `μ(x)` of the mean `μ(x)ᵀβ`.
#[derive(Clone)]
pub enum Trend {
    /// `μ(x) = 1`.
    Constant,
    /// `μ(x) = (1, x₁, …, x_d)`.
    Linear,
    /// Arbitrary basis functions of location.
    Custom(Vec<BasisFn>),
}

impl Trend {
    /// Basis dimension `p` for locations of dimension `dim`.
    pub fn len(&self, dim: usize) -> usize {
        match self {
            Trend::Constant => 1,
            Trend::Linear => 1 + dim,
            Trend::Custom(fs) => fs.len(),
        }
    }

    pub fn basis_at(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Trend::Constant => vec![1.0],
            Trend::Linear => std::iter::once(1.0).chain(x.iter().copied()).collect(),
            Trend::Custom(fs) => fs.iter().map(|f| f(x)).collect(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Trend::Constant => "constant",
            Trend::Linear => "linear",
            Trend::Custom(_) => "custom",
        }
    }
}

impl fmt::Debug for Trend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trend::Custom(fs) => write!(f, "Custom({} basis functions)", fs.len()),
            other => f.write_str(other.name()),
        }
    }
}

/// `n × p` matrix whose row `i` is `μ(xᵢ)ᵀ`.
pub fn design_matrix(locations: &Locations, trend: &Trend) -> DMatrix<f64> {
    let p = trend.len(locations.dim());
    let mut x = DMatrix::zeros(locations.len(), p);
    for (i, loc) in locations.iter().enumerate() {
        for (k, v) in trend.basis_at(loc).into_iter().enumerate() {
            x[(i, k)] = v;
        }
    }
    x
}
