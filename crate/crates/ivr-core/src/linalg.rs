//! Thin bridges between the sparse operator storage (CSR) and the dense
//! vectors/matrices used by the interface solvers.
//!
//! Conventions: sparse matrices are CSR over `f64` with `usize` indices;
//! dense storage is nalgebra's column-major `DMatrix`/`DVector`.

use nalgebra::{DMatrix, DVector};
use sprs::{CsMat, FillInReduction, SymmetryCheck};
use sprs_ldl::{Ldl, LdlNumeric};

use crate::error::{IvrError, Result};

/// Sparse matrix type used for all assembled operators.
pub type SpMat = CsMat<f64>;

/// y -= A x
pub fn spmv_sub(a: &SpMat, x: &DVector<f64>, y: &mut DVector<f64>) {
    debug_assert_eq!(a.cols(), x.len());
    debug_assert_eq!(a.rows(), y.len());
    for (row, vec) in a.outer_iterator().enumerate() {
        let mut s = 0.0;
        for (col, &v) in vec.iter() {
            s += v * x[col];
        }
        y[row] -= s;
    }
}

/// A x for a sparse A.
pub fn spmv(a: &SpMat, x: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(a.cols(), x.len());
    let mut y = DVector::zeros(a.rows());
    for (row, vec) in a.outer_iterator().enumerate() {
        let mut s = 0.0;
        for (col, &v) in vec.iter() {
            s += v * x[col];
        }
        y[row] = s;
    }
    y
}

/// A U for a sparse A and dense U, column by column.
pub fn spmm(a: &SpMat, u: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(a.cols(), u.nrows());
    let mut out = DMatrix::zeros(a.rows(), u.ncols());
    for j in 0..u.ncols() {
        for (row, vec) in a.outer_iterator().enumerate() {
            let mut s = 0.0;
            for (col, &v) in vec.iter() {
                s += v * u[(col, j)];
            }
            out[(row, j)] = s;
        }
    }
    out
}

/// Dense copy of a sparse matrix (small systems and test oracles only).
pub fn to_dense(a: &SpMat) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.rows(), a.cols());
    for (&v, (i, j)) in a.iter() {
        out[(i, j)] += v;
    }
    out
}

/// Sparse LDL^T factorization of a symmetric positive definite matrix,
/// with reverse Cuthill-McKee fill reduction.
pub struct MassSolver {
    ldl: LdlNumeric<f64, usize>,
    n: usize,
}

impl MassSolver {
    pub fn new(m: &SpMat) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(IvrError::InvalidArgument(format!(
                "mass matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let ldl = Ldl::new()
            .check_symmetry(SymmetryCheck::CheckSymmetry)
            .fill_in_reduction(FillInReduction::ReverseCuthillMcKee)
            .numeric(m.view())
            .map_err(|e| {
                IvrError::InvalidArgument(format!("mass matrix factorization failed: {e:?}"))
            })?;
        // LDL^T tolerates symmetric indefinite input; positive definiteness is
        // what the callers rely on, so reject non-positive pivots here.
        if ldl.d().iter().any(|&d| d <= 0.0 || !d.is_finite()) {
            return Err(IvrError::InvalidArgument(
                "mass matrix is not positive definite".into(),
            ));
        }
        Ok(Self { ldl, n: m.rows() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(b.len(), self.n);
        DVector::from_vec(self.ldl.solve(b.as_slice()))
    }
}

/// Thin SVD with singular values in descending order.
/// Returns (U, sigma) where U is tall (rows x min(rows, cols)).
pub fn thin_svd(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let svd = a.clone().svd(true, false);
    let u = svd.u.ok_or_else(|| {
        IvrError::InvalidArgument("SVD failed to produce singular vectors".into())
    })?;
    Ok((u, svd.singular_values))
}

/// max |a - a^T| entry, as an absolute asymmetry measure.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}
