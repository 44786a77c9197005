//! Spatial model: trend, anisotropic Matérn covariance with nugget, and the
//! Gaussian log-likelihood for point and linear data.

mod correlation;
mod data;
mod likelihood;
mod trend;

pub use correlation::{
    correlation_matrix, matern, matern_general, scaled_distance, CorrelationFn, CorrelationParams, Matern, Metric,
    MATERN_ZERO_DISTANCE,
};
pub use data::{Dataset, Locations};
pub use likelihood::{data_log_likelihood, log_likelihood, log_likelihood_linear};
pub use trend::{design_matrix, BasisFn, Trend};

use crate::error::{Error, Result};

/// Natural-scale parameters `θ = (β, τ, σ², φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalParams {
    pub beta: Vec<f64>,
    pub tau: f64,
    pub sigma2: f64,
    pub corr: CorrelationParams,
}

impl NaturalParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.tau) {
            return Err(Error::invalid(format!("nugget must lie in [0, 1), got {}", self.tau)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::invalid(format!(
                "variance must be positive, got {}",
                self.sigma2
            )));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("non-finite trend coefficient"));
        }
        self.corr.validate()
    }

    /// Flat view used in error reports: `β…, τ, σ², κ, λ…, [α]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.beta.clone();
        v.extend([self.tau, self.sigma2, self.corr.kappa]);
        v.extend(&self.corr.scales);
        v.extend(self.corr.angle);
        v
    }
}

/// Model structure: which parameters exist and which are held fixed.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub dim: usize,
    pub trend: Trend,
    /// 2-D range anisotropy (one angle, two scales).
    pub anisotropic: bool,
    pub fixed_kappa: Option<f64>,
    pub fixed_tau: Option<f64>,
}

impl ModelSpec {
    pub fn isotropic(dim: usize, trend: Trend) -> Self {
        ModelSpec {
            dim,
            trend,
            anisotropic: false,
            fixed_kappa: None,
            fixed_tau: None,
        }
    }

    pub fn with_fixed_kappa(mut self, kappa: f64) -> Self {
        self.fixed_kappa = Some(kappa);
        self
    }

    pub fn with_fixed_tau(mut self, tau: f64) -> Self {
        self.fixed_tau = Some(tau);
        self
    }

    pub fn anisotropic(mut self) -> Self {
        self.anisotropic = true;
        self
    }

    pub fn trend_len(&self) -> usize {
        self.trend.len(self.dim)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::invalid(format!(
                "spatial dimension must be 1, 2 or 3, got {}",
                self.dim
            )));
        }
        if self.anisotropic && self.dim != 2 {
            return Err(Error::invalid("anisotropy is supported for 2-D models only"));
        }
        if self.trend_len() == 0 {
            return Err(Error::invalid("trend needs at least one basis function"));
        }
        if let Some(k) = self.fixed_kappa {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::invalid(format!("fixed smoothness must be positive, got {k}")));
            }
        }
        if let Some(t) = self.fixed_tau {
            if !(0.0..1.0).contains(&t) {
                return Err(Error::invalid(format!("fixed nugget must lie in [0, 1), got {t}")));
            }
        }
        Ok(())
    }
}
