//! Symmetric factorizations used across the crate.
//!
//! Small systems (likelihoods, mixture kernels) use a hand-rolled Cholesky on
//! nalgebra storage. Grid-sized systems in conditional simulation go through
//! faer, see [`large`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Diagonal increment applied on the single retry after a failed factorization.
pub const JITTER: f64 = 1e-10;

/// Lower-triangular Cholesky factor `A = L Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    l: DMatrix<f64>,
    jittered: bool,
}

impl Cholesky {
    /// Plain factorization; `None` when a pivot is not strictly positive.
    pub fn new(a: &DMatrix<f64>) -> Option<Self> {
        decompose(a).map(|l| Cholesky { l, jittered: false })
    }

    /// Factorizes `a`, retrying once with [`JITTER`] on the diagonal.
    pub fn with_jitter(a: &DMatrix<f64>, context: &str) -> Result<Self> {
        if let Some(ch) = Self::new(a) {
            return Ok(ch);
        }
        let mut b = a.clone();
        for i in 0..b.nrows() {
            b[(i, i)] += JITTER;
        }
        decompose(&b)
            .map(|l| Cholesky { l, jittered: true })
            .ok_or_else(|| Error::NotPositiveDefinite {
                context: context.to_string(),
            })
    }

    /// Wraps an existing lower factor. The caller guarantees a positive diagonal.
    pub fn from_lower(l: DMatrix<f64>) -> Result<Self> {
        if !l.is_square() {
            return Err(Error::invalid("Cholesky factor must be square"));
        }
        for i in 0..l.nrows() {
            let d = l[(i, i)];
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::invalid(format!("Cholesky factor diagonal entry {i} is {d}")));
            }
        }
        Ok(Cholesky { l, jittered: false })
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn into_lower(self) -> DMatrix<f64> {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn jittered(&self) -> bool {
        self.jittered
    }

    /// `½ log|A| = Σ log Lᵢᵢ`.
    pub fn half_log_det(&self) -> f64 {
        (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum()
    }

    /// Overwrites `b` with `L⁻¹ b`.
    pub fn forward_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[(i, k)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }

    /// Overwrites `b` with `L⁻ᵀ b`.
    pub fn backward_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }

    /// `A⁻¹ b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.forward_in_place(x.as_mut_slice());
        self.backward_in_place(x.as_mut_slice());
        x
    }

    /// `A⁻¹ B`, column by column.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        for mut col in x.column_iter_mut() {
            self.forward_in_place(col.as_mut_slice());
            self.backward_in_place(col.as_mut_slice());
        }
        x
    }

    /// `dᵀ A⁻¹ d` without forming the inverse.
    pub fn mahalanobis_sq(&self, d: &[f64]) -> f64 {
        let n = self.dim();
        let mut z = [0.0f64; 16];
        let mut heap;
        let buf: &mut [f64] = if n <= z.len() {
            &mut z[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        for i in 0..n {
            let mut s = d[i];
            for k in 0..i {
                s -= self.l[(i, k)] * buf[k];
            }
            buf[i] = s / self.l[(i, i)];
        }
        buf.iter().map(|v| v * v).sum()
    }

    /// `L z`.
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|i| (0..=i).map(|k| self.l[(i, k)] * z[k]).sum()).collect()
    }

    /// Reconstructs `L Lᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.l * self.l.transpose()
    }
}

fn decompose(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return None;
    }
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Verifies that `h` (m × n) has rank m by factorizing `H Hᵀ` with a pivot
/// threshold relative to its largest diagonal entry.
pub fn check_full_row_rank(h: &DMatrix<f64>) -> Result<()> {
    let (m, n) = h.shape();
    if m == 0 {
        return Err(Error::RankDeficient("H has no rows".into()));
    }
    if m > n {
        return Err(Error::RankDeficient(format!("H is {m} x {n}; needs m <= n")));
    }
    let g = h * h.transpose();
    let scale = (0..m).map(|i| g[(i, i)]).fold(0.0f64, f64::max);
    if !(scale > 0.0) {
        return Err(Error::RankDeficient("H is identically zero".into()));
    }
    let tol = 1e-12 * scale;
    let mut l = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        let mut d = g[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= tol {
            return Err(Error::RankDeficient(format!(
                "row {j} is a linear combination of earlier rows"
            )));
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..m {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(())
}

/// Dense factorizations sized by the prediction grid.
pub mod large {
    use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
    use faer::{Mat, MatRef, Par, Side};

    use super::JITTER;
    use crate::error::{Error, Result};

    /// Returns the lower factor of `a`, retrying once with [`JITTER`].
    pub fn llt_with_jitter(mut a: Mat<f64>, context: &str) -> Result<Mat<f64>> {
        if let Ok(llt) = a.llt(Side::Lower) {
            return Ok(llt.L().to_owned());
        }
        for i in 0..a.nrows() {
            a[(i, i)] += JITTER;
        }
        a.llt(Side::Lower)
            .map(|llt| llt.L().to_owned())
            .map_err(|_| Error::NotPositiveDefinite {
                context: context.to_string(),
            })
    }

    /// Overwrites `rhs` with `L⁻¹ rhs`.
    pub fn forward_solve(l: MatRef<'_, f64>, rhs: &mut Mat<f64>) {
        solve_lower_triangular_in_place(l, rhs.as_mut(), Par::Seq);
    }
}
