//! Normal mixtures on the working scale, importance weights and the
//! entropy-flattening of weights.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Cholesky;

/// Weights below this are treated as exact zeros.
pub const WEIGHT_FLOOR: f64 = 1e-300;

/// `n` points in `p` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} values do not form rows of length {dim}",
                data.len()
            )));
        }
        Ok(Points { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("rows have unequal length"));
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select(&self, idx: &[usize]) -> Points {
        let mut data = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Points { dim: self.dim, data }
    }
}

/// `Σᵢ wᵢ N(θ; μᵢ, Vᵢ)` with every `Vᵢ` stored as a Cholesky factor.
///
/// Components may share a factor; `factor_of[i]` indexes `factors`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMixture {
    means: Points,
    weights: Vec<f64>,
    factors: Vec<Cholesky>,
    factor_of: Vec<usize>,
    log_weights: Vec<f64>,
    log_norms: Vec<f64>,
}

impl NormalMixture {
    /// Builds the mixture. Components with zero weight are dropped and the
    /// remaining weights renormalized.
    pub fn new(means: Points, weights: Vec<f64>, factors: Vec<Cholesky>, factor_of: Vec<usize>) -> Result<Self> {
        let n = means.len();
        if weights.len() != n || factor_of.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: if weights.len() != n {
                    weights.len()
                } else {
                    factor_of.len()
                },
            });
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid(format!(
                "mixture weight {w} is not a finite non-negative number"
            )));
        }
        if let Some(&k) = factor_of.iter().find(|&&k| k >= factors.len()) {
            return Err(Error::invalid(format!("factor index {k} out of range")));
        }
        if let Some(f) = factors.iter().find(|f| f.dim() != means.dim()) {
            return Err(Error::DimensionMismatch {
                expected: means.dim(),
                got: f.dim(),
            });
        }
        let keep: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
        if keep.is_empty() {
            return Err(Error::invalid("mixture has no component with positive weight"));
        }
        let total: f64 = keep.iter().map(|&i| weights[i]).sum();
        let means = if keep.len() == n { means } else { means.select(&keep) };
        let weights: Vec<f64> = keep.iter().map(|&i| weights[i] / total).collect();
        let factor_of: Vec<usize> = keep.iter().map(|&i| factor_of[i]).collect();
        Ok(Self::assemble(means, weights, factors, factor_of))
    }

    /// Rebuilds a mixture from stored parts without touching the weights.
    /// Weights must be positive and sum to one within `1e-9`.
    pub fn from_parts(means: Points, weights: Vec<f64>, factors: Vec<Cholesky>, factor_of: Vec<usize>) -> Result<Self> {
        let n = means.len();
        if n == 0 || weights.len() != n || factor_of.len() != n {
            return Err(Error::invalid("mixture parts have inconsistent lengths"));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::invalid("stored mixture weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("stored mixture weights sum to {total}")));
        }
        if factor_of.iter().any(|&k| k >= factors.len()) || factors.iter().any(|f| f.dim() != means.dim()) {
            return Err(Error::invalid("stored mixture factors do not match the components"));
        }
        Ok(Self::assemble(means, weights, factors, factor_of))
    }

    fn assemble(means: Points, weights: Vec<f64>, factors: Vec<Cholesky>, factor_of: Vec<usize>) -> Self {
        let p = means.dim() as f64;
        let factor_norms: Vec<f64> = factors
            .iter()
            .map(|f| -0.5 * p * (2.0 * PI).ln() - f.half_log_det())
            .collect();
        let log_norms = factor_of.iter().map(|&k| factor_norms[k]).collect();
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        NormalMixture {
            means,
            weights,
            factors,
            factor_of,
            log_weights,
            log_norms,
        }
    }

    /// A single Gaussian `N(mean, cov)`.
    pub fn single(mean: Vec<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let p = mean.len();
        let factor = Cholesky::with_jitter(cov, "initial covariance")?;
        Self::new(Points::new(p, mean)?, vec![1.0], vec![factor], vec![0])
    }

    /// Kernels `N(θᵢ, h Σᵢ)` with `Σ` factors shared according to `factor_of`.
    pub fn from_kernels(
        centers: Points,
        weights: Vec<f64>,
        sigma_factors: &[Cholesky],
        factor_of: Vec<usize>,
        h: f64,
    ) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!("bandwidth must be positive, got {h}")));
        }
        let s = h.sqrt();
        let factors = sigma_factors
            .iter()
            .map(|f| Cholesky::from_lower(f.l() * s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(centers, weights, factors, factor_of)
    }

    pub fn dim(&self) -> usize {
        self.means.dim()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn means(&self) -> &Points {
        &self.means
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn factors(&self) -> &[Cholesky] {
        &self.factors
    }

    pub fn factor_of(&self) -> &[usize] {
        &self.factor_of
    }

    pub fn component_factor(&self, i: usize) -> &Cholesky {
        &self.factors[self.factor_of[i]]
    }

    /// `log Σᵢ wᵢ N(x; μᵢ, Vᵢ)`.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let p = self.dim();
        let mut d = vec![0.0; p];
        let mut terms = Vec::with_capacity(self.len());
        for (i, mu) in self.means.rows().enumerate() {
            for k in 0..p {
                d[k] = x[k] - mu[k];
            }
            let q = self.component_factor(i).mahalanobis_sq(&d);
            terms.push(self.log_weights[i] + self.log_norms[i] - 0.5 * q);
        }
        log_sum_exp(&terms)
    }

    /// Draws `count` points.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Points {
        self.sample_with_components(count, rng).0
    }

    /// Draws `count` points and reports which component produced each.
    pub fn sample_with_components<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> (Points, Vec<usize>) {
        let p = self.dim();
        let index = WeightedIndex::new(&self.weights).expect("weights are positive and normalized");
        let mut data = Vec::with_capacity(count * p);
        let mut comps = Vec::with_capacity(count);
        let mut z = vec![0.0; p];
        for _ in 0..count {
            let i = if self.len() == 1 { 0 } else { index.sample(rng) };
            for zk in z.iter_mut() {
                *zk = rng.sample(StandardNormal);
            }
            let lz = self.component_factor(i).mul_lower(&z);
            data.extend(self.means.row(i).iter().zip(&lz).map(|(m, e)| m + e));
            comps.push(i);
        }
        (Points { dim: p, data }, comps)
    }

    /// Mixture mean and covariance.
    pub fn moments(&self) -> (Vec<f64>, DMatrix<f64>) {
        let p = self.dim();
        let mut mean = vec![0.0; p];
        for (w, mu) in self.weights.iter().zip(self.means.rows()) {
            for k in 0..p {
                mean[k] += w * mu[k];
            }
        }
        let mut cov = DMatrix::zeros(p, p);
        for (i, (w, mu)) in self.weights.iter().zip(self.means.rows()).enumerate() {
            let v = self.component_factor(i).reconstruct();
            for a in 0..p {
                for b in 0..p {
                    cov[(a, b)] += w * (v[(a, b)] + (mu[a] - mean[a]) * (mu[b] - mean[b]));
                }
            }
        }
        (mean, cov)
    }
}

/// `log Σ exp(tᵢ)`; `−∞` for an empty or all-`−∞` input.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if m == f64::INFINITY {
        return f64::INFINITY;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Normalized entropy `γ = −(1/log n) Σ wᵢ log wᵢ`, with `0 log 0 = 0`.
pub fn entropy(w: &[f64]) -> f64 {
    let n = w.len();
    if n <= 1 {
        return 1.0;
    }
    let s: f64 = w.iter().filter(|&&x| x >= WEIGHT_FLOOR).map(|&x| x * x.ln()).sum();
    // `+ 0.0` turns the `-0.0` of a point mass into `0.0`.
    (-s / (n as f64).ln()).clamp(0.0, 1.0) + 0.0
}

/// Flattened weights `vᵢ ∝ wᵢ^γ` and the exponent `γ`.
pub fn flatten_weights(w: &[f64]) -> (Vec<f64>, f64) {
    let gamma = entropy(w);
    let wmax = w.iter().copied().fold(0.0, f64::max);
    if wmax < WEIGHT_FLOOR {
        return (vec![1.0 / w.len() as f64; w.len()], gamma);
    }
    let mut v: Vec<f64> = w
        .iter()
        .map(|&x| if x < WEIGHT_FLOOR { 0.0 } else { x / wmax })
        .map(|r| r.powf(gamma))
        .collect();
    let total: f64 = v.iter().sum();
    for x in &mut v {
        *x /= total;
    }
    (v, gamma)
}

/// Weighted mean and covariance `Σᵢ wᵢ(θᵢ−θ̄)(θᵢ−θ̄)ᵀ` over the rows in `idx`,
/// weights renormalized within `idx`.
pub fn weighted_covariance_of(points: &Points, weights: &[f64], idx: &[usize]) -> Result<DMatrix<f64>> {
    let p = points.dim();
    let positive = idx.iter().filter(|&&i| weights[i] > 0.0).count();
    if positive < 2 {
        return Err(Error::TooFewPoints(format!(
            "covariance needs at least 2 points with positive weight, got {positive}"
        )));
    }
    let total: f64 = idx.iter().map(|&i| weights[i]).sum();
    let mut mean = vec![0.0; p];
    for &i in idx {
        let wi = weights[i] / total;
        for (m, x) in mean.iter_mut().zip(points.row(i)) {
            *m += wi * x;
        }
    }
    let mut cov = DMatrix::zeros(p, p);
    let mut d = vec![0.0; p];
    for &i in idx {
        let wi = weights[i] / total;
        if wi == 0.0 {
            continue;
        }
        for k in 0..p {
            d[k] = points.row(i)[k] - mean[k];
        }
        for a in 0..p {
            for b in 0..=a {
                cov[(a, b)] += wi * d[a] * d[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            cov[(b, a)] = cov[(a, b)];
        }
    }
    Ok(cov)
}

/// Weighted covariance over all points.
pub fn weighted_covariance(points: &Points, weights: &[f64]) -> Result<DMatrix<f64>> {
    if weights.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: weights.len(),
        });
    }
    let idx: Vec<usize> = (0..points.len()).collect();
    weighted_covariance_of(points, weights, &idx)
}

/// An importance-weighted sample.
#[derive(Debug, Clone)]
pub struct WeightedSample {
    pub points: Points,
    pub log_post: Vec<f64>,
    pub log_prop: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub gamma: f64,
}

impl WeightedSample {
    /// Normalizes `exp(log_post − log_prop)` by max-subtraction. Entries with
    /// `log_post = −∞` get weight zero.
    pub fn new(points: Points, log_post: Vec<f64>, log_prop: Vec<f64>) -> Result<Self> {
        let n = points.len();
        if log_post.len() != n || log_prop.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: log_post.len().min(log_prop.len()),
            });
        }
        let w = normalize_log_weights(&log_post.iter().zip(&log_prop).map(|(a, b)| a - b).collect::<Vec<_>>())?;
        let (v, gamma) = flatten_weights(&w);
        Ok(WeightedSample {
            points,
            log_post,
            log_prop,
            w,
            v,
            gamma,
        })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// `exp(lᵢ − max l)` normalized to sum 1. NaN entries count as `−∞`.
pub fn normalize_log_weights(log_w: &[f64]) -> Result<Vec<f64>> {
    let clean: Vec<f64> = log_w
        .iter()
        .map(|&x| if x.is_nan() { f64::NEG_INFINITY } else { x })
        .collect();
    let m = clean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::Degenerate(if m == f64::INFINITY {
            "an importance weight is infinite".into()
        } else {
            "every importance weight is zero".into()
        }));
    }
    let mut w: Vec<f64> = clean.iter().map(|x| (x - m).exp()).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    Ok(w)
}
