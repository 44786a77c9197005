//! Independent-component prior, natural ↔ working transforms and the
//! Jacobian-corrected log-prior on the working scale.

use std::f64::consts::{FRAC_PI_2, LN_2};

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{CorrelationParams, ModelSpec, NaturalParams};

/// Elementwise map from a natural support onto the real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Identity,
    Log,
    /// `y = log((x − lo)/(hi − x))`.
    ScaledLogit {
        lo: f64,
        hi: f64,
    },
}

impl Transform {
    /// Natural → working. Values on or outside the support boundary are rejected.
    pub fn forward(&self, x: f64) -> Result<f64> {
        match *self {
            Transform::Identity => {
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(Error::invalid(format!("non-finite value {x}")))
                }
            }
            Transform::Log => {
                if x > 0.0 && x.is_finite() {
                    Ok(x.ln())
                } else {
                    Err(Error::invalid(format!("{x} is outside (0, inf)")))
                }
            }
            Transform::ScaledLogit { lo, hi } => {
                if x > lo && x < hi {
                    Ok(((x - lo) / (hi - x)).ln())
                } else {
                    Err(Error::invalid(format!("{x} is outside ({lo}, {hi})")))
                }
            }
        }
    }

    /// Working → natural, clamped to stay strictly inside the support.
    pub fn inverse(&self, y: f64) -> f64 {
        match *self {
            Transform::Identity => y,
            Transform::Log => y.exp().clamp(f64::MIN_POSITIVE, f64::MAX),
            Transform::ScaledLogit { lo, hi } => {
                let x = if y >= 0.0 {
                    hi - (hi - lo) / (1.0 + y.exp())
                } else {
                    let e = y.exp();
                    lo + (hi - lo) * e / (1.0 + e)
                };
                x.clamp(lo.next_up(), hi.next_down())
            }
        }
    }

    /// `log |dx/dy|` at working value `y`.
    pub fn log_jacobian(&self, y: f64) -> f64 {
        match *self {
            Transform::Identity => 0.0,
            Transform::Log => y,
            Transform::ScaledLogit { lo, hi } => (hi - lo).ln() + log_sigmoid(y) + log_sigmoid(-y),
        }
    }
}

/// `log(1/(1 + e^(−y)))` without overflow.
pub fn log_sigmoid(y: f64) -> f64 {
    if y >= 0.0 {
        -(-y).exp().ln_1p()
    } else {
        y - y.exp().ln_1p()
    }
}

/// Which model quantity a working coordinate carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Beta(usize),
    Angle,
    Scale(usize),
    Sigma2,
    Tau,
    Kappa,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutEntry {
    pub name: String,
    pub kind: ParamKind,
    pub transform: Transform,
}

/// Ordered free parameters: `β…, [α], λ…, σ², [τ], [κ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterLayout {
    entries: Vec<LayoutEntry>,
    dim: usize,
    trend_len: usize,
    anisotropic: bool,
    fixed_kappa: Option<f64>,
    fixed_tau: Option<f64>,
}

impl ParameterLayout {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let p = spec.trend_len();
        let mut entries = Vec::new();
        let mut push = |name: String, kind, transform| entries.push(LayoutEntry { name, kind, transform });
        for i in 0..p {
            push(format!("beta_{i}"), ParamKind::Beta(i), Transform::Identity);
        }
        if spec.anisotropic {
            push(
                "alpha".into(),
                ParamKind::Angle,
                Transform::ScaledLogit { lo: 0.0, hi: FRAC_PI_2 },
            );
            push("lambda_1".into(), ParamKind::Scale(0), Transform::Log);
            push("lambda_2".into(), ParamKind::Scale(1), Transform::Log);
        } else {
            push("lambda".into(), ParamKind::Scale(0), Transform::Log);
        }
        push("sigma2".into(), ParamKind::Sigma2, Transform::Log);
        if spec.fixed_tau.is_none() {
            push(
                "tau".into(),
                ParamKind::Tau,
                Transform::ScaledLogit { lo: 0.0, hi: 1.0 },
            );
        }
        if spec.fixed_kappa.is_none() {
            push("kappa".into(), ParamKind::Kappa, Transform::Log);
        }
        Ok(ParameterLayout {
            entries,
            dim: spec.dim,
            trend_len: p,
            anisotropic: spec.anisotropic,
            fixed_kappa: spec.fixed_kappa,
            fixed_tau: spec.fixed_tau,
        })
    }

    /// Working dimension.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LayoutEntry] {
        &self.entries
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }

    pub fn index_of(&self, kind: ParamKind) -> Option<usize> {
        self.entries.iter().position(|e| e.kind == kind)
    }

    pub fn trend_len(&self) -> usize {
        self.trend_len
    }

    pub fn to_working(&self, theta: &NaturalParams) -> Result<Vec<f64>> {
        if theta.beta.len() != self.trend_len {
            return Err(Error::DimensionMismatch {
                expected: self.trend_len,
                got: theta.beta.len(),
            });
        }
        if theta.corr.angle.is_some() != self.anisotropic {
            return Err(Error::invalid("angle presence does not match the layout"));
        }
        self.entries
            .iter()
            .map(|e| {
                let x = match e.kind {
                    ParamKind::Beta(i) => theta.beta[i],
                    ParamKind::Angle => theta.corr.angle.unwrap_or(f64::NAN),
                    ParamKind::Scale(k) => theta.corr.scales[k],
                    ParamKind::Sigma2 => theta.sigma2,
                    ParamKind::Tau => theta.tau,
                    ParamKind::Kappa => theta.corr.kappa,
                };
                e.transform
                    .forward(x)
                    .map_err(|err| Error::invalid(format!("{}: {err}", e.name)))
            })
            .collect()
    }

    pub fn from_working(&self, work: &[f64]) -> Result<NaturalParams> {
        if work.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: work.len(),
            });
        }
        let mut beta = vec![0.0; self.trend_len];
        let mut scales = [f64::NAN; 2];
        let mut angle = None;
        let mut sigma2 = f64::NAN;
        let mut tau = self.fixed_tau.unwrap_or(f64::NAN);
        let mut kappa = self.fixed_kappa.unwrap_or(f64::NAN);
        for (e, &y) in self.entries.iter().zip(work) {
            let x = e.transform.inverse(y);
            match e.kind {
                ParamKind::Beta(i) => beta[i] = x,
                ParamKind::Angle => angle = Some(x),
                ParamKind::Scale(k) => scales[k] = x,
                ParamKind::Sigma2 => sigma2 = x,
                ParamKind::Tau => tau = x,
                ParamKind::Kappa => kappa = x,
            }
        }
        let corr = match angle {
            Some(a) => CorrelationParams::anisotropic(kappa, scales[0], scales[1], a),
            None => CorrelationParams::isotropic(kappa, scales[0], self.dim),
        };
        Ok(NaturalParams {
            beta,
            tau,
            sigma2,
            corr,
        })
    }

    /// Back-transforms each coordinate, keeping layout order.
    pub fn natural_components(&self, work: &[f64]) -> Vec<f64> {
        self.entries
            .iter()
            .zip(work)
            .map(|(e, &y)| e.transform.inverse(y))
            .collect()
    }
}

/// Hyperparameters of the independent-component prior.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    /// `beta(τ; a, b)`.
    pub nugget_beta: (f64, f64),
    /// `gamma(λ; shape, scale)`, one entry shared by all axes or one per axis.
    pub scale_gamma: Vec<(f64, f64)>,
    /// `gamma(κ; shape, scale)`.
    pub smooth_gamma: (f64, f64),
    pub domain_size: f64,
}

impl PriorSpec {
    /// Defaults for a domain of size `l`: `beta(1, 5)`, exponential scale prior
    /// with median `l/2`, smoothness prior with mode 1.5 and variance 4.
    pub fn for_domain(l: f64) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::invalid(format!("domain size must be positive, got {l}")));
        }
        Ok(PriorSpec {
            nugget_beta: (1.0, 5.0),
            scale_gamma: vec![(1.0, l / (2.0 * LN_2))],
            smooth_gamma: gamma_from_mode_variance(1.5, 4.0)?,
            domain_size: l,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        let (a, b) = self.nugget_beta;
        if !(pos(a) && pos(b)) {
            return Err(Error::invalid(format!("nugget prior beta({a}, {b}) is invalid")));
        }
        if self.scale_gamma.is_empty() {
            return Err(Error::invalid("scale prior is empty"));
        }
        for &(k, s) in self.scale_gamma.iter().chain(std::iter::once(&self.smooth_gamma)) {
            if !(pos(k) && pos(s)) {
                return Err(Error::invalid(format!("gamma({k}, {s}) prior is invalid")));
            }
        }
        if !pos(self.domain_size) {
            return Err(Error::invalid("domain size must be positive"));
        }
        Ok(())
    }

    fn scale_prior(&self, axis: usize) -> (f64, f64) {
        *self.scale_gamma.get(axis).unwrap_or(&self.scale_gamma[0])
    }

    /// Natural-scale log density of one component (up to the improper flat
    /// and `1/σ²` parts, which have no normalizer).
    pub fn log_density_natural(&self, kind: ParamKind, x: f64) -> f64 {
        match kind {
            ParamKind::Beta(_) => 0.0,
            ParamKind::Sigma2 => -x.ln(),
            ParamKind::Tau => {
                let (a, b) = self.nugget_beta;
                ln_beta_norm(a, b) + (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p()
            }
            ParamKind::Scale(k) => gamma_log_pdf(x, self.scale_prior(k)),
            ParamKind::Kappa => gamma_log_pdf(x, self.smooth_gamma),
            ParamKind::Angle => -FRAC_PI_2.ln(),
        }
    }
}

fn ln_beta_norm(a: f64, b: f64) -> f64 {
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)
}

fn gamma_log_pdf(x: f64, (k, s): (f64, f64)) -> f64 {
    -ln_gamma(k) - k * s.ln() + (k - 1.0) * x.ln() - x / s
}

/// `log π(θ)` for working-scale `θ`, including the transform Jacobians.
pub fn log_prior_working(work: &[f64], layout: &ParameterLayout, prior: &PriorSpec) -> f64 {
    layout
        .entries()
        .iter()
        .zip(work)
        .map(|(e, &y)| match e.kind {
            ParamKind::Beta(_) => 0.0,
            // (σ²)⁻¹ · σ²
            ParamKind::Sigma2 => 0.0,
            ParamKind::Tau => {
                let (a, b) = prior.nugget_beta;
                ln_beta_norm(a, b) + a * log_sigmoid(y) + b * log_sigmoid(-y)
            }
            ParamKind::Scale(k) => gamma_log_pdf_log_scale(y, prior.scale_prior(k)),
            ParamKind::Kappa => gamma_log_pdf_log_scale(y, prior.smooth_gamma),
            ParamKind::Angle => log_sigmoid(y) + log_sigmoid(-y),
        })
        .sum()
}

fn gamma_log_pdf_log_scale(y: f64, (k, s): (f64, f64)) -> f64 {
    -ln_gamma(k) - k * s.ln() + k * y - (y - s.ln()).exp()
}

/// Gamma `(shape, scale)` with the given mode and variance.
///
/// Solves `(k−1)s = mode`, `k s² = variance`, i.e.
/// `v k² − (2v + m²) k + v = 0`, keeping the root above 1.
pub fn gamma_from_mode_variance(mode: f64, variance: f64) -> Result<(f64, f64)> {
    if !(mode > 0.0 && variance > 0.0 && mode.is_finite() && variance.is_finite()) {
        return Err(Error::invalid(format!(
            "mode and variance must be positive, got {mode} and {variance}"
        )));
    }
    let b = 2.0 * variance + mode * mode;
    let disc = b * b - 4.0 * variance * variance;
    if disc < 0.0 {
        return Err(Error::invalid("no gamma distribution has this mode and variance"));
    }
    let shape = (b + disc.sqrt()) / (2.0 * variance);
    if shape <= 1.0 {
        return Err(Error::invalid(
            "no gamma distribution with shape > 1 has this mode and variance",
        ));
    }
    Ok((shape, mode / (shape - 1.0)))
}
