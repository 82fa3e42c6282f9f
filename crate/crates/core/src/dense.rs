//! Dense matrices and the direct-solve oracle.
//!
//! The dense path is the ground truth the iterative methods are checked
//! against: a pivoted LU factorization for solves and singular values for
//! rank and conditioning questions. Storage is column-major (nalgebra's
//! layout).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operator::{LinearOperator, OpKind, Vector};

#[derive(Debug, Clone)]
pub struct DenseMatrix {
    data: DMatrix<f64>,
    kind: OpKind,
}

impl DenseMatrix {
    /// Wraps a square matrix. A `Skew` tag is validated: entries must satisfy
    /// `a_ij = -a_ji` exactly, the diagonal must be exactly zero, and the
    /// dimension must be even.
    pub fn new(data: DMatrix<f64>, kind: OpKind) -> Result<Self> {
        let n = data.nrows();
        if data.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: data.ncols(),
            });
        }
        if n < 2 {
            return Err(Error::DimensionTooSmall(n));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonfiniteEntry);
        }
        if kind == OpKind::Skew {
            if !n.is_multiple_of(2) {
                return Err(Error::OddDimension(n));
            }
            for i in 0..n {
                for j in i..n {
                    if data[(i, j)] != -data[(j, i)] {
                        return Err(Error::NotSkew { i, j });
                    }
                }
            }
        }
        Ok(DenseMatrix { data, kind })
    }

    pub fn from_rows(rows: &[&[f64]], kind: OpKind) -> Result<Self> {
        let n = rows.len();
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
        }
        let data = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(data, kind)
    }

    pub fn identity(n: usize) -> Self {
        DenseMatrix {
            data: DMatrix::identity(n, n),
            kind: OpKind::General,
        }
    }

    /// Block-diagonal of 2x2 rotation generators `[[0, w], [-w, 0]]`, one per
    /// frequency. The minimal polynomial of the square of this matrix (with
    /// respect to any right-hand side touching all blocks) has degree equal
    /// to the number of distinct frequencies, which pins down the exact
    /// termination step of the normal-equation methods.
    pub fn block_rotations(freqs: &[f64]) -> Result<Self> {
        if freqs.is_empty() {
            return Err(Error::DimensionTooSmall(0));
        }
        let n = 2 * freqs.len();
        let mut data = DMatrix::zeros(n, n);
        for (k, &w) in freqs.iter().enumerate() {
            data[(2 * k, 2 * k + 1)] = w;
            data[(2 * k + 1, 2 * k)] = -w;
        }
        Self::new(data, OpKind::Skew)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn kind(&self) -> OpKind {
        self.kind
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Max row 1-norm, the cheap operator-norm bound used to scale
    /// tolerances.
    pub fn norm_bound(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|j| self.data[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Singular values in decreasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self
            .data
            .clone()
            .singular_values()
            .iter()
            .copied()
            .collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        sv
    }

    /// Two-norm condition number from the singular values; infinite when the
    /// smallest singular value vanishes.
    pub fn condition_estimate(&self) -> f64 {
        let sv = self.singular_values();
        let max = sv[0];
        let min = sv[sv.len() - 1];
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Direct solve of `Ax = b` by pivoted LU; the oracle for every
    /// error-norm check in the crate.
    ///
    /// The returned solution is verified to satisfy
    /// `|b - Ax| / |b| <= 1e-12 * cond_est`; a violation is reported as
    /// numerical singularity rather than returned as a bad oracle.
    pub fn solve(&self, b: &Vector) -> Result<Vector> {
        let n = self.n();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonfiniteEntry);
        }
        let b_norm = b.norm();
        if b_norm == 0.0 {
            return Ok(Vector::zeros(n));
        }
        let lu = self.data.clone().lu();
        // Pivot-growth condition estimate from the U diagonal.
        let u = lu.u();
        let mut dmax: f64 = 0.0;
        let mut dmin = f64::INFINITY;
        for i in 0..n {
            let d = u[(i, i)].abs();
            dmax = dmax.max(d);
            dmin = dmin.min(d);
        }
        let cond_est = if dmin == 0.0 {
            f64::INFINITY
        } else {
            dmax / dmin
        };
        if dmin <= f64::EPSILON * n as f64 * dmax {
            return Err(Error::SingularMatrix { cond_est });
        }
        let x = lu.solve(b).ok_or(Error::SingularMatrix { cond_est })?;
        let residual = (b - &self.data * &x).norm() / b_norm;
        if residual > 1e-12 * cond_est.max(1.0) {
            return Err(Error::SingularMatrix { cond_est });
        }
        Ok(x)
    }
}

/// Skew part `(B - B^t)/2` of a square even-dimensional matrix, with the
/// diagonal forced to exact zero so that the quadratic-form identity is not
/// spoiled by rounding residue. Odd dimensions are rejected: an odd
/// skew-symmetric matrix is singular.
pub fn skew_symmetrize(b: &DenseMatrix) -> Result<DenseMatrix> {
    let n = b.n();
    if !n.is_multiple_of(2) {
        return Err(Error::OddDimension(n));
    }
    let mut data = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                data[(i, j)] = (b.entry(i, j) - b.entry(j, i)) / 2.0;
            }
        }
    }
    DenseMatrix::new(data, OpKind::Skew)
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn kind(&self) -> OpKind {
        self.kind
    }

    fn apply(&self, v: &Vector) -> Vector {
        &self.data * v
    }

    fn apply_transpose(&self, v: &Vector) -> Vector {
        match self.kind {
            OpKind::Skew => -self.apply(v),
            OpKind::General => self.data.tr_mul(v),
        }
    }
}
