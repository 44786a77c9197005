use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::correlation::correlation_matrix;
use super::data::Dataset;
use super::trend::{design_matrix, Trend};
use super::NaturalParams;
use crate::error::{Error, Result};
use crate::linalg::Cholesky;

fn failure(theta: &NaturalParams, reason: impl ToString) -> Error {
    Error::Likelihood {
        theta: theta.to_vec(),
        reason: reason.to_string(),
    }
}

fn check_inputs(theta: &NaturalParams, data: &Dataset, trend: &Trend) -> Result<()> {
    theta.validate()?;
    let p = trend.len(data.dim());
    if theta.beta.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: theta.beta.len(),
        });
    }
    if theta.corr.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: theta.corr.dim(),
        });
    }
    Ok(())
}

/// Gaussian log-density of `resid ~ N(0, σ² C)` given the factor of `C`.
fn gaussian_log_density(chol: &Cholesky, resid: &DVector<f64>, sigma2: f64) -> f64 {
    let m = resid.len() as f64;
    let mut z = resid.clone();
    chol.forward_in_place(z.as_mut_slice());
    let quad = z.norm_squared();
    -0.5 * m * (2.0 * PI * sigma2).ln() - chol.half_log_det() - 0.5 * quad / sigma2
}

/// Log-likelihood of point data `y` at `n` locations:
/// `y ~ N(Xβ, σ² R)`, evaluated through a Cholesky factor of `R`.
pub fn log_likelihood(theta: &NaturalParams, data: &Dataset, trend: &Trend) -> Result<f64> {
    if data.h().is_some() {
        return Err(Error::invalid(
            "point-data likelihood called on linear data; use log_likelihood_linear",
        ));
    }
    check_inputs(theta, data, trend)?;
    let locs = data.locations();
    if theta.tau == 0.0 {
        if let Some((i, j)) = locs.first_duplicate() {
            return Err(Error::CoincidentLocations(i, j));
        }
    }
    let r = correlation_matrix(locs, &theta.corr, theta.tau)?;
    let chol = Cholesky::with_jitter(&r, "correlation matrix").map_err(|e| failure(theta, e))?;
    let x = design_matrix(locs, trend);
    let resid = DVector::from_column_slice(data.values()) - x * DVector::from_column_slice(&theta.beta);
    let ll = gaussian_log_density(&chol, &resid, theta.sigma2);
    if ll.is_finite() {
        Ok(ll)
    } else {
        Err(failure(theta, "non-finite log-likelihood"))
    }
}

/// Log-likelihood of linear data `z = H y`:
/// `z ~ N(HXβ, σ² H R Hᵀ)`. The scale written `η²` for this case is the
/// model variance `σ²`.
pub fn log_likelihood_linear(theta: &NaturalParams, data: &Dataset, trend: &Trend) -> Result<f64> {
    check_inputs(theta, data, trend)?;
    let locs = data.locations();
    let identity;
    let h: &DMatrix<f64> = match data.h() {
        Some(h) => h,
        None => {
            identity = DMatrix::identity(locs.len(), locs.len());
            &identity
        }
    };
    let r = correlation_matrix(locs, &theta.corr, theta.tau)?;
    let c = h * r * h.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let chol = Cholesky::with_jitter(&c, "aggregated correlation matrix H R Hᵀ").map_err(|e| failure(theta, e))?;
    let x = design_matrix(locs, trend);
    let mean = h * (x * DVector::from_column_slice(&theta.beta));
    let resid = DVector::from_column_slice(data.values()) - mean;
    let ll = gaussian_log_density(&chol, &resid, theta.sigma2);
    if ll.is_finite() {
        Ok(ll)
    } else {
        Err(failure(theta, "non-finite log-likelihood"))
    }
}

/// Dispatches on whether `data` carries an aggregation matrix.
pub fn data_log_likelihood(theta: &NaturalParams, data: &Dataset, trend: &Trend) -> Result<f64> {
    if data.h().is_some() {
        log_likelihood_linear(theta, data, trend)
    } else {
        log_likelihood(theta, data, trend)
    }
}
