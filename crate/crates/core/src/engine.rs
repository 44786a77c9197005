//! Iterative importance sampling with normal-mixture proposals.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bandwidth::{select_tuning, KernelShapes, TuningConfig};
use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::Cholesky;
use crate::mixture::{weighted_covariance, NormalMixture, WeightedSample};
use crate::model::{data_log_likelihood, design_matrix, Dataset, ModelSpec};
use crate::priors::{log_prior_working, ParamKind, ParameterLayout, PriorSpec};

/// Unnormalized log density on the working scale.
pub trait Target: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, theta: &[f64]) -> Result<f64>;
}

/// A closure as a [`Target`].
pub struct FnTarget<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Result<f64> + Sync> FnTarget<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnTarget { dim, f }
    }
}

impl<F: Fn(&[f64]) -> Result<f64> + Sync> Target for FnTarget<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, theta: &[f64]) -> Result<f64> {
        (self.f)(theta)
    }
}

/// `log π(θ) + log p(data | θ)` for working-scale `θ`.
pub struct Posterior<'a> {
    pub spec: &'a ModelSpec,
    pub layout: &'a ParameterLayout,
    pub prior: &'a PriorSpec,
    pub data: &'a Dataset,
}

impl Target for Posterior<'_> {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn log_density(&self, theta: &[f64]) -> Result<f64> {
        let lp = log_prior_working(theta, self.layout, self.prior);
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
        let nat = self.layout.from_working(theta)?;
        Ok(lp + data_log_likelihood(&nat, self.data, &self.spec.trend)?)
    }
}

/// Per-iteration summary.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationDiagnostics {
    pub k: usize,
    pub n: usize,
    pub gamma: f64,
    pub d_l1: f64,
    pub r_star: f64,
    pub h_star: f64,
    pub j_star: f64,
    /// Sample points whose target evaluation failed or was `−∞`.
    pub zero_weight_count: usize,
    /// Neighborhoods that kept an earlier covariance during localization.
    pub localization_fallbacks: usize,
    /// The `(r, h)` search failed and a rule-of-thumb kernel was used.
    pub tuning_fallback: bool,
    pub wallclock: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n0: usize,
    pub decay: f64,
    pub k_max: usize,
    pub gamma_stop: Option<f64>,
    pub seed: u64,
    pub tuning: TuningConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n0: 2000,
            decay: 0.94,
            k_max: 5,
            gamma_stop: None,
            seed: 1,
            tuning: TuningConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.n0 < 2 * (p + 1) {
            return Err(Error::Config(format!(
                "run.n0 = {} is below 2(p+1) = {}",
                self.n0,
                2 * (p + 1)
            )));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::Config(format!(
                "run.decay must lie in (0, 1], got {}",
                self.decay
            )));
        }
        if self.k_max == 0 {
            return Err(Error::Config("run.k_max must be at least 1".into()));
        }
        if let Some(g) = self.gamma_stop {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::Config(format!("run.gamma_stop must lie in [0, 1], got {g}")));
            }
        }
        self.tuning.validate()
    }

    /// `nₖ = round(n₀ · decay^(k−1))`, never below `2(p+1)`.
    pub fn sample_size(&self, k: usize, p: usize) -> usize {
        let n = (self.n0 as f64 * self.decay.powi(k as i32 - 1)).round() as usize;
        n.max(2 * (p + 1))
    }

    /// The generator used for iteration `k`.
    pub fn rng(&self, k: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64);
        rng
    }
}

/// `d_L1 = (1/n) Σ |1 − n wᵢ|`.
pub fn l1_distance(w: &[f64]) -> f64 {
    let n = w.len() as f64;
    w.iter().map(|x| (1.0 - n * x).abs()).sum::<f64>() / n
}

/// A diffuse single Gaussian built from an ordinary-least-squares fit of the
/// trend.
pub fn init_approximation(
    spec: &ModelSpec,
    layout: &ParameterLayout,
    data: &Dataset,
    prior: &PriorSpec,
) -> Result<NormalMixture> {
    let mut x = design_matrix(data.locations(), &spec.trend);
    if let Some(h) = data.h() {
        x = h * x;
    }
    let (m, p) = x.shape();
    let y = DVector::from_column_slice(data.values());
    let xtx = x.transpose() * &x;
    let chol = Cholesky::new(&xtx).ok_or_else(|| {
        Error::Degenerate(format!(
            "trend design is rank deficient ({m} data values, {p} coefficients)"
        ))
    })?;
    let beta = chol.solve(&(x.transpose() * &y));
    let rss = (&y - &x * &beta).norm_squared();
    let mut s2 = if m > p { rss / (m - p) as f64 } else { rss / m as f64 };
    if !(s2 > 0.0) {
        let mean = y.mean();
        s2 = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64;
    }
    if !(s2 > 0.0) {
        s2 = 1.0;
    }
    let xtx_inv = chol.solve_matrix(&DMatrix::identity(p, p));

    let k = layout.len();
    let mut mean = vec![0.0; k];
    let mut sd = vec![0.0; k];
    for (i, e) in layout.entries().iter().enumerate() {
        let (c, s) = match e.kind {
            ParamKind::Beta(j) => (beta[j], 10.0 * (s2 * xtx_inv[(j, j)]).sqrt()),
            ParamKind::Sigma2 => (s2.ln(), 3.0),
            ParamKind::Scale(_) => ((prior.domain_size / 2.0).ln(), 2.0),
            ParamKind::Tau | ParamKind::Angle => (0.0, 2.5),
            ParamKind::Kappa => (1.5f64.ln(), 2.0),
        };
        mean[i] = c;
        sd[i] = s;
    }
    let cov = DMatrix::from_diagonal(&DVector::from_iterator(k, sd.iter().map(|s| s * s)));
    NormalMixture::single(mean, &cov)
}

/// Result of one update `f^(k−1) → f^(k)`.
#[derive(Debug, Clone)]
pub struct Iteration {
    pub mixture: NormalMixture,
    pub sample: WeightedSample,
    pub diagnostics: IterationDiagnostics,
}

/// Draws `n` points from `prev`, weights them against `target`, tunes the
/// kernels and returns the new mixture.
pub fn iterate_once<T: Target + ?Sized>(
    prev: &NormalMixture,
    target: &T,
    n: usize,
    rng: &mut ChaCha8Rng,
    cfg: &TuningConfig,
) -> Result<Iteration> {
    let start = Instant::now();
    let p = prev.dim();
    if target.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: target.dim(),
        });
    }
    if n < 2 * (p + 1) {
        return Err(Error::TooFewPoints(format!(
            "sample size {n} is below 2(p+1) = {}",
            2 * (p + 1)
        )));
    }
    let points = prev.sample(n, rng);
    let evals: Vec<(f64, f64)> = exec::map_range(n, |i| {
        let x = points.row(i);
        let lp = match target.log_density(x) {
            Ok(v) if !v.is_nan() && v < f64::INFINITY => v,
            Ok(_) => f64::NEG_INFINITY,
            Err(e) => {
                log::trace!("target evaluation failed at sample {i}: {e}");
                f64::NEG_INFINITY
            }
        };
        (lp, prev.log_density(x))
    });
    let (log_post, log_prop): (Vec<f64>, Vec<f64>) = evals.into_iter().unzip();
    let failures = log_post.iter().filter(|v| **v == f64::NEG_INFINITY).count();
    if failures == n {
        return Err(Error::AllWeightsZero {
            iteration: 0,
            n,
            failures,
        });
    }
    let sample = WeightedSample::new(points, log_post, log_prop)?;
    let (shapes, r_star, h_star, j_star, loc_fallbacks, tuning_fallback) =
        match select_tuning(&sample.points, &sample.w, &sample.v, cfg) {
            Ok(t) => (t.shapes, t.r_star, t.h_star, t.j_star, t.fallbacks, false),
            Err(e) => {
                log::warn!("bandwidth search failed ({e}); using a rule-of-thumb kernel");
                let (shapes, h) = fallback_kernel(&sample, prev)?;
                (shapes, 1.0, h, f64::NEG_INFINITY, 0, true)
            }
        };
    let mixture = NormalMixture::from_kernels(
        sample.points.clone(),
        sample.w.clone(),
        &shapes.factors,
        shapes.factor_of.clone(),
        h_star,
    )?;
    let diagnostics = IterationDiagnostics {
        k: 0,
        n,
        gamma: sample.gamma,
        d_l1: l1_distance(&sample.w),
        r_star,
        h_star,
        j_star,
        zero_weight_count: failures,
        localization_fallbacks: loc_fallbacks,
        tuning_fallback,
        wallclock: start.elapsed(),
    };
    Ok(Iteration {
        mixture,
        sample,
        diagnostics,
    })
}

/// Global covariance under `v` (or of the previous mixture when that is
/// singular) with `h = (4 / ((p+2) n_eff))^(2/(p+4))`, `n_eff = 1/Σwᵢ²`.
fn fallback_kernel(sample: &WeightedSample, prev: &NormalMixture) -> Result<(KernelShapes, f64)> {
    let n = sample.len();
    let p = sample.points.dim() as f64;
    let shapes = weighted_covariance(&sample.points, &sample.v)
        .and_then(|c| KernelShapes::shared(c, n))
        .or_else(|_| KernelShapes::shared(prev.moments().1, n))?;
    let n_eff = 1.0 / sample.w.iter().map(|w| w * w).sum::<f64>();
    let h = (4.0 / ((p + 2.0) * n_eff)).powf(2.0 / (p + 4.0));
    Ok((shapes, h))
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub mixture: NormalMixture,
    pub diagnostics: Vec<IterationDiagnostics>,
    /// Weighted sample of the last iteration.
    pub last_sample: Option<WeightedSample>,
}

/// Runs up to `k_max` iterations from `init`, stopping early once
/// `γ ≥ gamma_stop`.
pub fn run_target<T: Target + ?Sized>(config: &RunConfig, init: NormalMixture, target: &T) -> Result<RunOutput> {
    let p = init.dim();
    config.validate(p)?;
    let mut mix = init;
    let mut diagnostics = Vec::with_capacity(config.k_max);
    let mut last_sample = None;
    for k in 1..=config.k_max {
        let n = config.sample_size(k, p);
        let mut rng = config.rng(k);
        let it = iterate_once(&mix, target, n, &mut rng, &config.tuning).map_err(|e| match e {
            Error::AllWeightsZero { n, failures, .. } => Error::AllWeightsZero {
                iteration: k,
                n,
                failures,
            },
            other => Error::Iteration {
                iteration: k,
                source: Box::new(other),
            },
        })?;
        let mut d = it.diagnostics;
        d.k = k;
        log::info!(
            "iteration {k}: n = {}, gamma = {:.4}, d_l1 = {:.4}, r* = {}, h* = {:.4}, zero weights = {}",
            d.n,
            d.gamma,
            d.d_l1,
            d.r_star,
            d.h_star,
            d.zero_weight_count
        );
        let stop = config.gamma_stop.is_some_and(|g| d.gamma >= g);
        diagnostics.push(d);
        mix = it.mixture;
        last_sample = Some(it.sample);
        if stop {
            break;
        }
    }
    Ok(RunOutput {
        mixture: mix,
        diagnostics,
        last_sample,
    })
}

/// Posterior approximation for a kriging model.
pub fn run(config: &RunConfig, spec: &ModelSpec, data: &Dataset, prior: &PriorSpec) -> Result<RunOutput> {
    prior.validate()?;
    if spec.dim != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim,
            got: data.dim(),
        });
    }
    let layout = ParameterLayout::new(spec)?;
    let init = init_approximation(spec, &layout, data, prior)?;
    let target = Posterior {
        spec,
        layout: &layout,
        prior,
        data,
    };
    run_target(config, init, &target)
}
