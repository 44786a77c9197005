//! Anisotropic scaled distance and the Matérn correlation family.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;

use super::data::Locations;
use crate::bessel::ln_bessel_k;
use crate::error::{Error, Result};

/// Below this scaled distance the Matérn correlation is taken as exactly 1.
pub const MATERN_ZERO_DISTANCE: f64 = 1e-10;

/// Correlation parameters `φ`: smoothness, one scale per axis and, for 2-D
/// anisotropic models, the rotation angle.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationParams {
    pub kappa: f64,
    pub scales: Vec<f64>,
    pub angle: Option<f64>,
}

impl CorrelationParams {
    pub fn isotropic(kappa: f64, scale: f64, dim: usize) -> Self {
        CorrelationParams {
            kappa,
            scales: vec![scale; dim],
            angle: None,
        }
    }

    /// 2-D geometric anisotropy: `scale_major` applies along the axis at angle
    /// `angle` (counter-clockwise from the first coordinate axis).
    pub fn anisotropic(kappa: f64, scale_major: f64, scale_minor: f64, angle: f64) -> Self {
        CorrelationParams {
            kappa,
            scales: vec![scale_major, scale_minor],
            angle: Some(angle),
        }
    }

    pub fn dim(&self) -> usize {
        self.scales.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::invalid(format!(
                "smoothness must be positive, got {}",
                self.kappa
            )));
        }
        if self.scales.is_empty() {
            return Err(Error::invalid("at least one scale is required"));
        }
        if let Some(s) = self.scales.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::invalid(format!("scales must be positive, got {s}")));
        }
        if let Some(a) = self.angle {
            if self.scales.len() != 2 {
                return Err(Error::invalid("a rotation angle requires exactly two scales"));
            }
            if !(a > 0.0 && a < FRAC_PI_2) {
                return Err(Error::invalid(format!("angle must lie in (0, pi/2), got {a}")));
            }
        }
        Ok(())
    }
}

/// Precomputed `ℓ(x₁, x₂) = √((x₁−x₂)ᵀ B (x₁−x₂))` with
/// `B = T diag(λ⁻²) Tᵀ`, `T` rotating the natural axes counter-clockwise.
#[derive(Debug, Clone, Copy)]
pub struct Metric {
    dim: usize,
    inv_scales: [f64; 3],
    rotation: Option<(f64, f64)>,
}

impl Metric {
    pub fn new(corr: &CorrelationParams) -> Result<Self> {
        corr.validate()?;
        if corr.dim() > 3 {
            return Err(Error::invalid("at most three spatial dimensions are supported"));
        }
        let mut inv_scales = [0.0; 3];
        for (dst, s) in inv_scales.iter_mut().zip(&corr.scales) {
            *dst = 1.0 / s;
        }
        Ok(Metric {
            dim: corr.dim(),
            inv_scales,
            rotation: corr.angle.map(|a| (a.cos(), a.sin())),
        })
    }

    pub fn distance(&self, x1: &[f64], x2: &[f64]) -> f64 {
        match self.rotation {
            Some((c, s)) => {
                let dx = x1[0] - x2[0];
                let dy = x1[1] - x2[1];
                // Tᵀ Δ: components along the rotated axes.
                let u = (c * dx + s * dy) * self.inv_scales[0];
                let v = (-s * dx + c * dy) * self.inv_scales[1];
                u.hypot(v)
            }
            None => {
                let mut acc = 0.0;
                for k in 0..self.dim {
                    let t = (x1[k] - x2[k]) * self.inv_scales[k];
                    acc += t * t;
                }
                acc.sqrt()
            }
        }
    }

    /// The matrix `B` itself.
    pub fn b_matrix(&self) -> DMatrix<f64> {
        let d = self.dim;
        let lam2 = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                self.inv_scales[i] * self.inv_scales[i]
            } else {
                0.0
            }
        });
        match self.rotation {
            Some((c, s)) => {
                let t = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
                &t * lam2 * t.transpose()
            }
            None => lam2,
        }
    }
}

/// Scaled distance between two locations under `corr`.
pub fn scaled_distance(x1: &[f64], x2: &[f64], corr: &CorrelationParams) -> Result<f64> {
    if x1.len() != corr.dim() || x2.len() != corr.dim() {
        return Err(Error::DimensionMismatch {
            expected: corr.dim(),
            got: if x1.len() != corr.dim() { x1.len() } else { x2.len() },
        });
    }
    Ok(Metric::new(corr)?.distance(x1, x2))
}

/// Matérn correlation `ρ(ℓ; κ) = ℓ^κ K_κ(ℓ) / (2^(κ−1) Γ(κ))`.
///
/// Half-integer orders 1/2, 3/2 and 5/2 use their closed forms.
pub fn matern(ell: f64, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::invalid(format!("smoothness must be positive, got {kappa}")));
    }
    if !(ell >= 0.0) {
        return Err(Error::invalid(format!(
            "scaled distance must be non-negative, got {ell}"
        )));
    }
    Ok(Matern::new(kappa).eval(ell))
}

/// The Bessel-function route for any `κ > 0`, without closed-form shortcuts.
pub fn matern_general(ell: f64, kappa: f64) -> f64 {
    if ell < MATERN_ZERO_DISTANCE {
        return 1.0;
    }
    if ell.is_infinite() {
        return 0.0;
    }
    let log_norm = (kappa - 1.0) * std::f64::consts::LN_2 + ln_gamma(kappa);
    let log_rho = kappa * ell.ln() + ln_bessel_k(kappa, ell) - log_norm;
    log_rho.exp().min(1.0)
}

/// A Matérn correlation with its order-dependent pieces resolved once.
#[derive(Debug, Clone, Copy)]
pub struct Matern {
    kappa: f64,
    form: MaternForm,
    log_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum MaternForm {
    Half,
    ThreeHalves,
    FiveHalves,
    General,
}

impl Matern {
    pub fn new(kappa: f64) -> Self {
        let form = if kappa == 0.5 {
            MaternForm::Half
        } else if kappa == 1.5 {
            MaternForm::ThreeHalves
        } else if kappa == 2.5 {
            MaternForm::FiveHalves
        } else {
            MaternForm::General
        };
        Matern {
            kappa,
            form,
            log_norm: (kappa - 1.0) * std::f64::consts::LN_2 + ln_gamma(kappa),
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    #[inline]
    pub fn eval(&self, ell: f64) -> f64 {
        if ell < MATERN_ZERO_DISTANCE {
            return 1.0;
        }
        match self.form {
            MaternForm::Half => (-ell).exp(),
            MaternForm::ThreeHalves => (1.0 + ell) * (-ell).exp(),
            MaternForm::FiveHalves => (1.0 + ell + ell * ell / 3.0) * (-ell).exp(),
            MaternForm::General => {
                if ell.is_infinite() {
                    return 0.0;
                }
                let log_rho = self.kappa * ell.ln() + ln_bessel_k(self.kappa, ell) - self.log_norm;
                log_rho.exp().min(1.0)
            }
        }
    }
}

/// Validated correlation function `ρ(ℓ(x₁, x₂))` of the correlated component.
#[derive(Debug, Clone, Copy)]
pub struct CorrelationFn {
    metric: Metric,
    matern: Matern,
}

impl CorrelationFn {
    pub fn new(corr: &CorrelationParams) -> Result<Self> {
        Ok(CorrelationFn {
            metric: Metric::new(corr)?,
            matern: Matern::new(corr.kappa),
        })
    }

    #[inline]
    pub fn rho(&self, x1: &[f64], x2: &[f64]) -> f64 {
        self.matern.eval(self.metric.distance(x1, x2))
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }
}

/// `Rᵢⱼ = (1−τ) ρ(ℓ(xᵢ, xⱼ)) + τ·1(i = j)`.
///
/// The nugget indicator is by index, so coincident but distinct observations
/// are correlated `1−τ`.
pub fn correlation_matrix(locations: &Locations, corr: &CorrelationParams, tau: f64) -> Result<DMatrix<f64>> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::invalid(format!("nugget must lie in [0, 1), got {tau}")));
    }
    if locations.dim() != corr.dim() {
        return Err(Error::DimensionMismatch {
            expected: corr.dim(),
            got: locations.dim(),
        });
    }
    let f = CorrelationFn::new(corr)?;
    let n = locations.len();
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        r[(i, i)] = 1.0;
        let xi = locations.point(i);
        for j in 0..i {
            let v = (1.0 - tau) * f.rho(xi, locations.point(j));
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(r)
}
