use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::check_full_row_rank;

/// `n` points in `d`-dimensional space, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Locations {
    dim: usize,
    coords: Vec<f64>,
}

impl Locations {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("location dimension must be positive"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} coordinates do not form rows of length {dim}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite coordinate in location {}",
                bad / dim
            )));
        }
        Ok(Locations { dim, coords })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("ragged location rows"));
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Per-axis `(min, max)`.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|k| {
                self.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[k]), hi.max(p[k]))
                })
            })
            .collect()
    }

    /// Longest side of the bounding box.
    pub fn max_side(&self) -> f64 {
        self.bounding_box()
            .into_iter()
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max)
    }

    /// First pair `(i, j)`, `i < j`, of exactly coincident points.
    pub fn first_duplicate(&self) -> Option<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.point(a).partial_cmp(self.point(b)).unwrap().then(a.cmp(&b)));
        order
            .windows(2)
            .filter(|w| self.point(w[0]) == self.point(w[1]))
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
            .min()
    }
}

/// Observations: point values `y` at `locations`, or linear data `z = H y`
/// when an aggregation matrix is present.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    locations: Locations,
    values: Vec<f64>,
    h: Option<DMatrix<f64>>,
}

impl Dataset {
    pub fn new(locations: Locations, values: Vec<f64>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::invalid("dataset has no locations"));
        }
        if values.len() != locations.len() {
            return Err(Error::DimensionMismatch {
                expected: locations.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite observation value"));
        }
        Ok(Dataset {
            locations,
            values,
            h: None,
        })
    }

    /// Linear data: `values` has one entry per row of `h` (m × n, rank m).
    pub fn linear(locations: Locations, h: DMatrix<f64>, values: Vec<f64>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::invalid("dataset has no locations"));
        }
        if h.ncols() != locations.len() {
            return Err(Error::DimensionMismatch {
                expected: locations.len(),
                got: h.ncols(),
            });
        }
        if values.len() != h.nrows() {
            return Err(Error::DimensionMismatch {
                expected: h.nrows(),
                got: values.len(),
            });
        }
        if values.iter().chain(h.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite value in linear data"));
        }
        check_full_row_rank(&h)?;
        Ok(Dataset {
            locations,
            values,
            h: Some(h),
        })
    }

    pub fn locations(&self) -> &Locations {
        &self.locations
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn h(&self) -> Option<&DMatrix<f64>> {
        self.h.as_ref()
    }

    /// Number of data values `m`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.locations.dim()
    }
}
