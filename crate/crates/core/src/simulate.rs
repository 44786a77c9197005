//! Conditional simulation on a prediction grid and ensemble summaries.

use faer::Mat;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::large;
use crate::mixture::NormalMixture;
use crate::model::{design_matrix, CorrelationFn, Dataset, Locations, NaturalParams, Trend};
use crate::priors::ParameterLayout;

/// Cells whose conditional variance (relative to `σ²`) is at most this are
/// set to their conditional mean.
pub const DETERMINISTIC_VARIANCE: f64 = 1e-10;

/// Grids with more cells than this are simulated block by block.
pub const MAX_JOINT_CELLS: usize = 5000;

/// Block length, and the number of earlier cells each block conditions on,
/// in block-sequential simulation.
pub const BLOCK_CELLS: usize = 2500;

/// Retries with a fresh parameter draw after a failed simulation.
pub const MAX_RETRIES: usize = 3;

/// Regular grid of cell centers `origin + (i + ½)·cell_size` per axis.
///
/// Cells are numbered with axis 0 varying fastest, so a 2-D grid is stored
/// row by row with `x` increasing along a row and `y` increasing across rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionGrid {
    pub origin: Vec<f64>,
    pub cell_size: Vec<f64>,
    pub counts: Vec<usize>,
}

impl PredictionGrid {
    pub fn new(origin: Vec<f64>, cell_size: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let d = origin.len();
        if d == 0 || cell_size.len() != d || counts.len() != d {
            return Err(Error::invalid(
                "grid origin, cell size and counts must have the same nonzero length",
            ));
        }
        if origin.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("grid origin must be finite"));
        }
        if cell_size.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::invalid("grid cell sizes must be positive"));
        }
        if counts.contains(&0) {
            return Err(Error::invalid("grid counts must be positive"));
        }
        Ok(PredictionGrid {
            origin,
            cell_size,
            counts,
        })
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self, mut idx: usize) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            let i = idx % self.counts[k];
            idx /= self.counts[k];
            x.push(self.origin[k] + (i as f64 + 0.5) * self.cell_size[k]);
        }
        x
    }

    pub fn centers(&self) -> Locations {
        let coords = (0..self.len()).flat_map(|i| self.center(i)).collect();
        Locations::new(self.dim(), coords).expect("grid centers are finite")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimulationOptions {
    /// Simulate `μᵀβ + √(1−τ)σϱ` without the nugget term.
    pub predict_smooth_only: bool,
}

/// Covariances (divided by `σ²`) of the field at a set of cells with the data
/// functionals and each other.
struct FieldModel<'a> {
    theta: &'a NaturalParams,
    rho: CorrelationFn,
    trend: &'a Trend,
    data: Option<&'a Dataset>,
    smooth_only: bool,
}

impl<'a> FieldModel<'a> {
    fn new(
        theta: &'a NaturalParams,
        trend: &'a Trend,
        data: Option<&'a Dataset>,
        opts: SimulationOptions,
    ) -> Result<Self> {
        theta.validate()?;
        if trend.len(theta.corr.dim()) != theta.beta.len() {
            return Err(Error::DimensionMismatch {
                expected: trend.len(theta.corr.dim()),
                got: theta.beta.len(),
            });
        }
        Ok(FieldModel {
            theta,
            rho: CorrelationFn::new(&theta.corr)?,
            trend,
            data,
            smooth_only: opts.predict_smooth_only,
        })
    }

    fn tau(&self) -> f64 {
        self.theta.tau
    }

    /// Diagonal weight of the nugget for simulated cells.
    fn cell_nugget(&self) -> f64 {
        if self.smooth_only {
            0.0
        } else {
            self.tau()
        }
    }

    fn trend_mean(&self, x: &[f64]) -> f64 {
        self.trend
            .basis_at(x)
            .iter()
            .zip(&self.theta.beta)
            .map(|(b, c)| b * c)
            .sum()
    }

    /// `(1−τ)ρ` between distinct field indices.
    fn cross(&self, a: &[f64], b: &[f64]) -> f64 {
        (1.0 - self.tau()) * self.rho.rho(a, b)
    }

    /// Covariance among cells (same index set on both sides).
    fn cell_block(&self, cells: &[&[f64]]) -> Mat<f64> {
        let n = cells.len();
        let nug = self.cell_nugget();
        let mut m = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = (1.0 - self.tau()) + nug;
            for j in 0..i {
                let c = self.cross(cells[i], cells[j]);
                m[(i, j)] = c;
                m[(j, i)] = c;
            }
        }
        m
    }

    /// Covariance between data functionals `Hy` and cells: `H · (1−τ)ρ(x_obs, cell)`.
    fn data_cells(&self, cells: &[&[f64]]) -> Mat<f64> {
        let data = self.data.expect("data present");
        let locs = data.locations();
        let n_obs = locs.len();
        let raw = Mat::<f64>::from_fn(n_obs, cells.len(), |i, j| self.cross(locs.point(i), cells[j]));
        match data.h() {
            None => raw,
            Some(h) => {
                let hf = Mat::<f64>::from_fn(h.nrows(), h.ncols(), |i, j| h[(i, j)]);
                &hf * &raw
            }
        }
    }

    fn data_block(&self) -> Mat<f64> {
        let data = self.data.expect("data present");
        let locs = data.locations();
        let n = locs.len();
        let mut r = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            r[(i, i)] = 1.0;
            for j in 0..i {
                let c = self.cross(locs.point(i), locs.point(j));
                r[(i, j)] = c;
                r[(j, i)] = c;
            }
        }
        match data.h() {
            None => r,
            Some(h) => {
                let hf = Mat::<f64>::from_fn(h.nrows(), h.ncols(), |i, j| h[(i, j)]);
                let c = &hf * &r * hf.transpose();
                Mat::from_fn(c.nrows(), c.ncols(), |i, j| 0.5 * (c[(i, j)] + c[(j, i)]))
            }
        }
    }

    fn data_residual(&self) -> Vec<f64> {
        let data = self.data.expect("data present");
        let x = design_matrix(data.locations(), self.trend);
        let mu: Vec<f64> = (0..x.nrows())
            .map(|i| (0..x.ncols()).map(|k| x[(i, k)] * self.theta.beta[k]).sum())
            .collect();
        let mean: Vec<f64> = match data.h() {
            None => mu,
            Some(h) => (0..h.nrows())
                .map(|i| (0..h.ncols()).map(|k| h[(i, k)] * mu[k]).sum())
                .collect(),
        };
        data.values().iter().zip(mean).map(|(z, m)| z - m).collect()
    }
}

/// Conditional mean and covariance (both on the natural scale) of a target
/// block given the data and previously simulated cells.
struct Conditional {
    mean: Vec<f64>,
    /// Divided by `σ²`.
    cov: Mat<f64>,
}

fn condition(model: &FieldModel, target: &[&[f64]], prev: &[&[f64]], prev_values: &[f64]) -> Result<Conditional> {
    let sigma2 = model.theta.sigma2;
    let t = target.len();
    let m = model.data.map_or(0, |d| d.len());
    let s = m + prev.len();
    let mut mean: Vec<f64> = target.iter().map(|x| model.trend_mean(x)).collect();
    let mut cov = model.cell_block(target);
    if s == 0 {
        return Ok(Conditional { mean, cov });
    }
    // Conditioning covariance K_ss and cross covariance K_st.
    let mut kss = Mat::<f64>::zeros(s, s);
    let mut kst = Mat::<f64>::zeros(s, t);
    let mut resid = vec![0.0; s];
    if m > 0 {
        let dd = model.data_block();
        let dt = model.data_cells(target);
        for i in 0..m {
            for j in 0..m {
                kss[(i, j)] = dd[(i, j)];
            }
            for j in 0..t {
                kst[(i, j)] = dt[(i, j)];
            }
        }
        resid[..m].copy_from_slice(&model.data_residual());
    }
    if !prev.is_empty() {
        let pp = model.cell_block(prev);
        let pt: Vec<f64> = prev
            .iter()
            .flat_map(|a| target.iter().map(|b| model.cross(a, b)))
            .collect();
        for i in 0..prev.len() {
            for j in 0..prev.len() {
                kss[(m + i, m + j)] = pp[(i, j)];
            }
            for j in 0..t {
                kst[(m + i, j)] = pt[i * t + j];
            }
            resid[m + i] = prev_values[i] - model.trend_mean(prev[i]);
        }
        if m > 0 {
            let dp = model.data_cells(prev);
            for i in 0..m {
                for j in 0..prev.len() {
                    kss[(i, m + j)] = dp[(i, j)];
                    kss[(m + j, i)] = dp[(i, j)];
                }
            }
        }
    }
    let l = large::llt_with_jitter(kss, "conditioning covariance")?;
    let mut a = kst;
    large::forward_solve(l.as_ref(), &mut a);
    let mut r = Mat::<f64>::from_fn(s, 1, |i, _| resid[i] / sigma2.sqrt());
    large::forward_solve(l.as_ref(), &mut r);
    let shift = a.transpose() * &r;
    for (j, mj) in mean.iter_mut().enumerate() {
        *mj += sigma2.sqrt() * shift[(j, 0)];
    }
    cov = &cov - a.transpose() * &a;
    Ok(Conditional { mean, cov })
}

/// Draws from `N(mean, σ² cov)`, fixing near-deterministic entries at the mean.
/// Returns the values and which entries were random.
fn draw(cond: Conditional, sigma2: f64, rng: &mut impl Rng) -> Result<(Vec<f64>, Vec<bool>)> {
    let t = cond.mean.len();
    let random: Vec<bool> = (0..t).map(|i| cond.cov[(i, i)] > DETERMINISTIC_VARIANCE).collect();
    let idx: Vec<usize> = (0..t).filter(|&i| random[i]).collect();
    let mut values = cond.mean;
    if idx.is_empty() {
        return Ok((values, random));
    }
    let sub = Mat::<f64>::from_fn(idx.len(), idx.len(), |i, j| cond.cov[(idx[i], idx[j])]);
    let l = large::llt_with_jitter(sub, "conditional covariance")?;
    let z: Vec<f64> = (0..idx.len()).map(|_| rng.sample(StandardNormal)).collect();
    let sd = sigma2.sqrt();
    for (i, &gi) in idx.iter().enumerate() {
        let mut acc = 0.0;
        for k in 0..=i {
            acc += l[(i, k)] * z[k];
        }
        values[gi] += sd * acc;
    }
    Ok((values, random))
}

/// Point-wise conditional mean and variance of the field on `grid` given the
/// data (computed jointly, without block splitting).
pub fn conditional_moments(
    theta: &NaturalParams,
    trend: &Trend,
    data: Option<&Dataset>,
    grid: &PredictionGrid,
    opts: SimulationOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_grid(theta, data, grid)?;
    let model = FieldModel::new(theta, trend, data, opts)?;
    let centers = grid.centers();
    let cells: Vec<&[f64]> = centers.iter().collect();
    let c = condition(&model, &cells, &[], &[])?;
    let var = (0..cells.len())
        .map(|i| (c.cov[(i, i)] * theta.sigma2).max(0.0))
        .collect();
    Ok((c.mean, var))
}

fn check_grid(theta: &NaturalParams, data: Option<&Dataset>, grid: &PredictionGrid) -> Result<()> {
    if grid.dim() != theta.corr.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.corr.dim(),
            got: grid.dim(),
        });
    }
    if let Some(d) = data {
        if d.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: d.dim(),
                got: grid.dim(),
            });
        }
    }
    Ok(())
}

/// One realization of the field on `grid` conditional on `data` (or
/// unconditional when `data` is `None`).
///
/// Grids above [`MAX_JOINT_CELLS`] cells are simulated in blocks of
/// [`BLOCK_CELLS`] in cell order; each block conditions on the data and the
/// last [`BLOCK_CELLS`] random cells already simulated, which makes the draw
/// approximate.
pub fn conditional_simulate<R: Rng + ?Sized>(
    theta: &NaturalParams,
    trend: &Trend,
    data: Option<&Dataset>,
    grid: &PredictionGrid,
    opts: SimulationOptions,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_grid(theta, data, grid)?;
    let model = FieldModel::new(theta, trend, data, opts)?;
    let centers = grid.centers();
    let cells: Vec<&[f64]> = centers.iter().collect();
    let g = cells.len();
    let mut rng = rng;
    if g <= MAX_JOINT_CELLS {
        let c = condition(&model, &cells, &[], &[])?;
        return Ok(draw(c, theta.sigma2, &mut rng)?.0);
    }
    let mut out = Vec::with_capacity(g);
    let mut history: Vec<usize> = Vec::new();
    for start in (0..g).step_by(BLOCK_CELLS) {
        let end = (start + BLOCK_CELLS).min(g);
        let keep = history.len().saturating_sub(BLOCK_CELLS);
        let prev_idx = &history[keep..];
        let prev: Vec<&[f64]> = prev_idx.iter().map(|&i| cells[i]).collect();
        let prev_values: Vec<f64> = prev_idx.iter().map(|&i| out[i]).collect();
        let c = condition(&model, &cells[start..end], &prev, &prev_values)?;
        let (values, random) = draw(c, theta.sigma2, &mut rng)?;
        history.extend((start..end).filter(|&i| random[i - start]));
        out.extend(values);
    }
    Ok(out)
}

/// Optional elementwise map applied to simulated values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum OutputTransform {
    #[default]
    None,
    /// `lo + (hi − lo)/(1 + e^(−y))`.
    InverseLogit {
        lo: f64,
        hi: f64,
    },
    Exp,
}

impl OutputTransform {
    pub fn apply(&self, y: f64) -> f64 {
        match *self {
            OutputTransform::None => y,
            OutputTransform::InverseLogit { lo, hi } => lo + (hi - lo) / (1.0 + (-y).exp()),
            OutputTransform::Exp => y.exp(),
        }
    }
}

/// `s` realizations on `G` cells and the working-scale parameters behind each.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub realizations: Vec<Vec<f64>>,
    pub theta_draws: Vec<Vec<f64>>,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.realizations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.realizations.is_empty()
    }

    pub fn cells(&self) -> usize {
        self.realizations.first().map_or(0, Vec::len)
    }
}

/// Generator for ensemble draw `d`, independent of the fitting streams.
pub fn draw_rng(seed: u64, d: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((1u64 << 32) + d as u64);
    rng
}

/// Samples `θ` from `mix` and one conditional realization per draw.
#[allow(clippy::too_many_arguments)]
pub fn posterior_predictive(
    mix: &NormalMixture,
    layout: &ParameterLayout,
    trend: &Trend,
    data: &Dataset,
    grid: &PredictionGrid,
    s: usize,
    opts: SimulationOptions,
    transform: OutputTransform,
    seed: u64,
) -> Result<Ensemble> {
    if s == 0 {
        return Err(Error::invalid("ensemble size must be at least 1"));
    }
    if mix.dim() != layout.len() {
        return Err(Error::DimensionMismatch {
            expected: layout.len(),
            got: mix.dim(),
        });
    }
    let draws = exec::map_range(s, |d| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut rng = draw_rng(seed, d);
        let mut last = None;
        for attempt in 0..=MAX_RETRIES {
            let work = mix.sample(1, &mut rng).row(0).to_vec();
            let res = layout
                .from_working(&work)
                .and_then(|theta| conditional_simulate(&theta, trend, Some(data), grid, opts, &mut rng));
            match res {
                Ok(mut field) => {
                    for v in &mut field {
                        *v = transform.apply(*v);
                    }
                    return Ok((field, work));
                }
                Err(e) => {
                    log::debug!("draw {d} attempt {attempt} failed: {e}");
                    last = Some(e);
                }
            }
        }
        Err(Error::Draw {
            draw: d,
            source: Box::new(last.expect("at least one attempt")),
        })
    });
    let mut realizations = Vec::with_capacity(s);
    let mut theta_draws = Vec::with_capacity(s);
    for r in draws {
        let (field, work) = r?;
        realizations.push(field);
        theta_draws.push(work);
    }
    Ok(Ensemble {
        realizations,
        theta_draws,
    })
}

/// Point-wise median and sample standard deviation (divisor `s − 1`).
pub fn summarize_ensemble(ens: &Ensemble) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = ens.len();
    if s < 2 {
        return Err(Error::invalid(format!(
            "a standard deviation map needs at least 2 realizations, got {s}"
        )));
    }
    let g = ens.cells();
    if ens.realizations.iter().any(|r| r.len() != g) {
        return Err(Error::invalid("realizations have unequal length"));
    }
    let mut median = Vec::with_capacity(g);
    let mut sd = Vec::with_capacity(g);
    let mut col = vec![0.0; s];
    for j in 0..g {
        for (c, r) in col.iter_mut().zip(&ens.realizations) {
            *c = r[j];
        }
        median.push(median_of(&mut col));
        let mean = col.iter().sum::<f64>() / s as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (s - 1) as f64;
        sd.push(var.sqrt());
    }
    Ok((median, sd))
}

fn median_of(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}
