//! Joint search for the localization fraction `r` and bandwidth `h` by
//! leave-one-out weighted likelihood.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::Cholesky;
use crate::mixture::{weighted_covariance, weighted_covariance_of, Points, WEIGHT_FLOOR};

/// Terms further than this below the row maximum (in log space) are skipped:
/// `exp(−36.8) < f64::EPSILON²`.
const LOG_NEGLIGIBLE: f64 = 36.8;

#[derive(Debug, Clone, PartialEq)]
pub struct TuningConfig {
    pub threshold_r: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Golden-section stopping width in `log h`.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for TuningConfig {
    fn default() -> Self {
        TuningConfig {
            threshold_r: 0.125,
            h_min: 1e-4,
            h_max: 1e4,
            tolerance: 1e-3,
            max_iter: 60,
        }
    }
}

impl TuningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_r > 0.0 && self.threshold_r <= 1.0) {
            return Err(Error::invalid(format!(
                "threshold_r must lie in (0, 1], got {}",
                self.threshold_r
            )));
        }
        if !(self.h_min > 0.0 && self.h_max > self.h_min && self.h_max.is_finite()) {
            return Err(Error::invalid(format!(
                "invalid h bracket [{}, {}]",
                self.h_min, self.h_max
            )));
        }
        if !(self.tolerance > 0.0) || self.max_iter == 0 {
            return Err(Error::invalid("tolerance and max_iter must be positive"));
        }
        Ok(())
    }
}

/// Kernel shapes `Σᵢ`: distinct covariances plus a per-point index.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelShapes {
    pub covs: Vec<DMatrix<f64>>,
    pub factors: Vec<Cholesky>,
    pub factor_of: Vec<usize>,
}

impl KernelShapes {
    /// Every point uses `cov`.
    pub fn shared(cov: DMatrix<f64>, n: usize) -> Result<Self> {
        let f = Cholesky::with_jitter(&cov, "global weighted covariance")?;
        Ok(KernelShapes {
            covs: vec![cov],
            factors: vec![f],
            factor_of: vec![0; n],
        })
    }

    pub fn len(&self) -> usize {
        self.factor_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factor_of.is_empty()
    }

    pub fn factor(&self, i: usize) -> &Cholesky {
        &self.factors[self.factor_of[i]]
    }

    pub fn cov(&self, i: usize) -> &DMatrix<f64> {
        &self.covs[self.factor_of[i]]
    }
}

/// Squared Mahalanobis distances `Dᵢⱼ = (θᵢ−θⱼ)ᵀ Σⱼ⁻¹ (θᵢ−θⱼ)` over the
/// points with positive weight, plus what `J` needs besides `h`.
struct LooTable {
    p: usize,
    active: Vec<usize>,
    /// Row-major `|active| × |active|`; `+∞` where θⱼ coincides with θᵢ,
    /// which leaves column `j` out of row `i`.
    d: Vec<f64>,
    /// `log wⱼ − ½ log|Σⱼ|` per active column.
    col_offset: Vec<f64>,
    /// `wᵢ` and `log(1 − mass of points coincident with θᵢ)` per active row.
    row_weight: Vec<f64>,
    row_log_norm: Vec<f64>,
}

impl LooTable {
    fn new(points: &Points, w: &[f64], shapes: &KernelShapes) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(Error::TooFewPoints(format!("leave-one-out needs n >= 2, got {n}")));
        }
        if w.len() != n || shapes.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: if w.len() != n { w.len() } else { shapes.len() },
            });
        }
        if let Some(i) = w.iter().position(|&x| x == 1.0) {
            return Err(Error::Degenerate(format!("point {i} carries all the weight")));
        }
        let p = points.dim();
        let active: Vec<usize> = (0..n).filter(|&i| w[i] >= WEIGHT_FLOOR).collect();
        let m = active.len();
        let shared = shapes.factors.len() == 1;
        let whitened: Option<Vec<Vec<f64>>> = shared.then(|| {
            let f = &shapes.factors[0];
            exec::map_slice(&active, |&i| {
                let mut z = points.row(i).to_vec();
                f.forward_in_place(&mut z);
                z
            })
        });
        let rows: Vec<(Vec<f64>, Vec<bool>)> = exec::map_range(m, |a| {
            let xi = points.row(active[a]);
            let mut drow = Vec::with_capacity(m);
            let mut crow = Vec::with_capacity(m);
            let mut diff = vec![0.0; p];
            for (b, &j) in active.iter().enumerate() {
                let xj = points.row(j);
                crow.push(xi == xj);
                let dij = match &whitened {
                    Some(z) => z[a].iter().zip(&z[b]).map(|(u, v)| (u - v) * (u - v)).sum(),
                    None => {
                        for k in 0..p {
                            diff[k] = xi[k] - xj[k];
                        }
                        shapes.factor(j).mahalanobis_sq(&diff)
                    }
                };
                drow.push(dij);
            }
            (drow, crow)
        });
        let mut d = Vec::with_capacity(m * m);
        let mut row_log_norm = Vec::with_capacity(m);
        for (a, (drow, crow)) in rows.into_iter().enumerate() {
            let mass: f64 = (0..m).filter(|&b| crow[b]).map(|b| w[active[b]]).sum();
            d.extend(drow.iter().zip(&crow).map(|(&x, &c)| if c { f64::INFINITY } else { x }));
            let rest = 1.0 - mass;
            if !(rest > 0.0) {
                return Err(Error::Degenerate(format!(
                    "all weight sits at the location of point {}",
                    active[a]
                )));
            }
            row_log_norm.push(-rest.ln());
        }
        let col_offset = active
            .iter()
            .map(|&j| w[j].ln() - shapes.factor(j).half_log_det())
            .collect();
        Ok(LooTable {
            p,
            row_weight: active.iter().map(|&i| w[i]).collect(),
            active,
            d,
            col_offset,
            row_log_norm,
        })
    }

    fn objective(&self, h: f64) -> f64 {
        let m = self.active.len();
        let inv2h = 0.5 / h;
        let common = -0.5 * self.p as f64 * (2.0 * PI * h).ln();
        let rows = exec::map_range(m, |a| {
            let d = &self.d[a * m..(a + 1) * m];
            let t: Vec<f64> = self.col_offset.iter().zip(d).map(|(c, x)| c - x * inv2h).collect();
            let best = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if best == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            let cut = best - LOG_NEGLIGIBLE;
            let mut s = 0.0;
            for &x in &t {
                if x > cut {
                    s += (x - best).exp();
                }
            }
            self.row_weight[a] * (self.row_log_norm[a] + common + best + s.ln())
        });
        rows.iter().sum()
    }
}

/// `J(h) = Σᵢ wᵢ log( (1/(1−wᵢ)) Σ_{j≠i} wⱼ N(θᵢ; θⱼ, hΣⱼ) )`.
///
/// Components located exactly at `θᵢ` are all left out of row `i`, and the
/// normalizer uses their combined weight in place of `wᵢ`.
pub fn loo_objective(points: &Points, w: &[f64], shapes: &KernelShapes, h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {h}")));
    }
    Ok(LooTable::new(points, w, shapes)?.objective(h))
}

/// Maximizes `J` over `log h` on the configured bracket: a 9-point grid
/// followed by golden-section refinement around the best grid point.
pub fn optimize_h(points: &Points, w: &[f64], shapes: &KernelShapes, cfg: &TuningConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    let table = LooTable::new(points, w, shapes)?;
    maximize_log_h(|h| table.objective(h), cfg)
}

fn maximize_log_h(f: impl Fn(f64) -> f64, cfg: &TuningConfig) -> Result<(f64, f64)> {
    const GRID: usize = 9;
    let (lo, hi) = (cfg.h_min.ln(), cfg.h_max.ln());
    let step = (hi - lo) / (GRID - 1) as f64;
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    let consider = |x: f64, best: &mut (f64, f64)| -> f64 {
        let v = f(x.exp());
        if v > best.1 || (best.0.is_nan() && !v.is_nan()) {
            *best = (x, v);
        }
        v
    };
    let mut k_best = 0;
    for k in 0..GRID {
        let before = best.1;
        consider(lo + k as f64 * step, &mut best);
        if best.1 > before {
            k_best = k;
        }
    }
    if best.1 == f64::NEG_INFINITY || best.0.is_nan() {
        return Err(Error::Degenerate(
            "leave-one-out objective is -inf for every bandwidth; sample points are isolated".into(),
        ));
    }
    let mut a = lo + k_best.saturating_sub(1) as f64 * step;
    let mut b = lo + (k_best + 1).min(GRID - 1) as f64 * step;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = consider(x1, &mut best);
    let mut f2 = consider(x2, &mut best);
    for _ in 0..cfg.max_iter {
        if b - a < cfg.tolerance {
            break;
        }
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = consider(x1, &mut best);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = consider(x2, &mut best);
        }
    }
    Ok((best.0.exp(), best.1))
}

/// Neighborhood state carried between `r` levels.
#[derive(Debug, Clone)]
pub struct Neighborhoods {
    /// `sets[i]`: indices of Θᵢ in ascending distance order (ties by index).
    pub sets: Vec<Vec<usize>>,
    pub shapes: KernelShapes,
    /// Points whose new covariance could not be used and kept the old one.
    pub fallbacks: usize,
}

impl Neighborhoods {
    /// `r = 1`: every Θᵢ is the full sample and Σᵢ the global covariance.
    pub fn global(points: &Points, v: &[f64]) -> Result<Self> {
        let n = points.len();
        let cov = weighted_covariance(points, v)?;
        Ok(Neighborhoods {
            sets: vec![(0..n).collect(); n],
            shapes: KernelShapes::shared(cov, n)?,
            fallbacks: 0,
        })
    }
}

/// Shrinks each Θᵢ to its `⌈rn⌉` Mahalanobis-nearest members under the
/// current Σᵢ and recomputes Σᵢ from them with `v` renormalized.
pub fn localize(points: &Points, v: &[f64], prev: &Neighborhoods, r: f64) -> Result<Neighborhoods> {
    let n = points.len();
    let p = points.dim();
    let k = (r * n as f64).ceil() as usize;
    if k < p + 1 {
        return Err(Error::TooFewPoints(format!(
            "r = {r} leaves {k} neighbors; at least {} are needed",
            p + 1
        )));
    }
    type Local = (Vec<usize>, Option<(DMatrix<f64>, Cholesky)>);
    let results: Vec<Local> = exec::map_range(n, |i| {
        let f = prev.shapes.factor(i);
        let xi = points.row(i);
        let mut diff = vec![0.0; p];
        let mut scored: Vec<(f64, usize)> = prev.sets[i]
            .iter()
            .map(|&j| {
                for c in 0..p {
                    diff[c] = points.row(j)[c] - xi[c];
                }
                (f.mahalanobis_sq(&diff), j)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        scored.truncate(k);
        let set: Vec<usize> = scored.into_iter().map(|(_, j)| j).collect();
        let shape = weighted_covariance_of(points, v, &set).ok().and_then(|c| {
            Cholesky::with_jitter(&c, "neighborhood covariance")
                .ok()
                .map(|f| (c, f))
        });
        (set, shape)
    });
    let mut sets = Vec::with_capacity(n);
    let mut covs = Vec::with_capacity(n);
    let mut factors = Vec::with_capacity(n);
    let mut fallbacks = prev.fallbacks;
    for (i, (set, shape)) in results.into_iter().enumerate() {
        sets.push(set);
        match shape {
            Some((c, f)) => {
                covs.push(c);
                factors.push(f);
            }
            None => {
                fallbacks += 1;
                covs.push(prev.shapes.cov(i).clone());
                factors.push(prev.shapes.factor(i).clone());
            }
        }
    }
    Ok(Neighborhoods {
        sets,
        shapes: KernelShapes {
            covs,
            factors,
            factor_of: (0..n).collect(),
        },
        fallbacks,
    })
}

/// One visited `r` level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub r: f64,
    /// `None` when the `h` search failed at this level.
    pub h: Option<f64>,
    pub j: f64,
}

#[derive(Debug, Clone)]
pub struct TuningResult {
    pub r_star: f64,
    pub h_star: f64,
    pub j_star: f64,
    pub shapes: KernelShapes,
    pub levels: Vec<LevelResult>,
    pub fallbacks: usize,
}

/// The halving search over `r = 1, ½, ¼, …` with an `h` search at each level.
pub fn select_tuning(points: &Points, w: &[f64], v: &[f64], cfg: &TuningConfig) -> Result<TuningResult> {
    cfg.validate()?;
    let n = points.len();
    let p = points.dim();
    if n < 2 * (p + 1) {
        return Err(Error::TooFewPoints(format!(
            "tuning needs n >= 2(p+1) = {}, got {n}",
            2 * (p + 1)
        )));
    }
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        });
    }
    let mut hood = Neighborhoods::global(points, v)?;
    let mut r = 1.0;
    let mut best: Option<TuningResult> = None;
    let mut levels = Vec::new();
    let mut last_err = None;
    loop {
        match optimize_h(points, w, &hood.shapes, cfg) {
            Ok((h, j)) => {
                levels.push(LevelResult { r, h: Some(h), j });
                if best.as_ref().is_none_or(|b| j > b.j_star) {
                    best = Some(TuningResult {
                        r_star: r,
                        h_star: h,
                        j_star: j,
                        shapes: hood.shapes.clone(),
                        levels: Vec::new(),
                        fallbacks: hood.fallbacks,
                    });
                }
            }
            Err(e) => {
                log::debug!("h search failed at r = {r}: {e}");
                levels.push(LevelResult {
                    r,
                    h: None,
                    j: f64::NEG_INFINITY,
                });
                last_err = Some(e);
            }
        }
        if r <= cfg.threshold_r {
            break;
        }
        let next = r / 2.0;
        if ((next * n as f64).ceil() as usize) < p + 1 {
            break;
        }
        hood = localize(points, v, &hood, next)?;
        r = next;
    }
    match best {
        Some(mut b) => {
            b.levels = levels;
            Ok(b)
        }
        None => Err(last_err.unwrap_or_else(|| Error::Degenerate("no r level was searched".into()))),
    }
}
