//! Dense helpers shared by the transform and the restricted solvers.

use nalgebra::{DMatrix, DVector, QR, SVD};

use crate::error::{Error, Result};

/// Extends `basis` (n×k, orthonormal columns) to an n×n orthogonal matrix
/// whose first k columns are `basis`.
pub(crate) fn complete_orthonormal(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = basis.shape();
    if k == n {
        return basis.clone();
    }
    let mut stacked = DMatrix::zeros(n, k + n);
    stacked.columns_mut(0, k).copy_from(basis);
    stacked
        .columns_mut(k, n)
        .copy_from(&DMatrix::identity(n, n));
    let q = QR::new(stacked).q();
    let mut out = q;
    out.columns_mut(0, k).copy_from(basis);
    out
}

/// Full SVD `M = U Σ Vᵀ` with square orthogonal factors and singular
/// values sorted nonincreasing.
pub(crate) struct FullSvd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub(crate) fn full_svd(m: &DMatrix<f64>) -> Result<FullSvd> {
    let (rows, cols) = m.shape();
    let svd = SVD::try_new(m.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::LinearAlgebra("SVD did not converge".into()))?;
    let u_thin = svd.u.expect("requested U");
    let v_thin = svd.v_t.expect("requested Vᵀ").transpose();
    Ok(FullSvd {
        u: if u_thin.ncols() == rows {
            u_thin
        } else {
            complete_orthonormal(&u_thin)
        },
        singular_values: svd.singular_values.iter().copied().collect(),
        v: if v_thin.ncols() == cols {
            v_thin
        } else {
            complete_orthonormal(&v_thin)
        },
    })
}

/// Orthonormal basis (m×k) of the null space of `c` (r×m); `rank_cut` is
/// the absolute singular-value threshold. An empty `c` yields `I_m`.
pub(crate) fn null_space(c: &DMatrix<f64>, rank_cut: f64) -> Result<DMatrix<f64>> {
    let m = c.ncols();
    if c.nrows() == 0 {
        return Ok(DMatrix::identity(m, m));
    }
    let svd = full_svd(c)?;
    let rank = svd.singular_values.iter().filter(|s| **s > rank_cut).count();
    Ok(svd.v.columns(rank, m - rank).into_owned())
}

/// Minimum-norm least-squares solution of `a z ≈ b`.
pub(crate) fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return Ok(DVector::zeros(0));
    }
    if rows == 0 {
        return Ok(DVector::zeros(cols));
    }
    let svd = SVD::try_new(a.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::LinearAlgebra("SVD did not converge".into()))?;
    let smax = svd.singular_values.max();
    let eps = smax * 1e-12 * rows.max(cols) as f64;
    svd.solve(b, eps)
        .map_err(|e| Error::LinearAlgebra(e.to_string()))
}

/// Minimizes the convex quadratic `wᵀ H w + cᵀ w` with `H` symmetric PSD.
///
/// Returns the minimum-norm minimizer and the stationarity residual
/// `||2 H w + c||_2`, or `Unbounded` when `c` has a component in `null(H)`.
pub(crate) fn minimize_psd_quadratic(
    h: &DMatrix<f64>,
    c: &DVector<f64>,
) -> Result<(DVector<f64>, f64)> {
    let n = h.nrows();
    if n == 0 {
        return Ok((DVector::zeros(0), 0.0));
    }
    let two_h = h * 2.0;
    let rhs = -c;
    let w = lstsq(&two_h, &rhs)?;
    let residual = (&two_h * &w + c).norm();
    let scale = 1.0 + c.norm() + two_h.norm() * w.norm();
    if residual > 1e-8 * scale {
        return Err(Error::Unbounded(format!(
            "linear term not in the range of the Hessian (residual {residual:.3e})"
        )));
    }
    Ok((w, residual))
}

/// Rows of `m` at `rows`, in order.
pub(crate) fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Columns of the identity at `cols` (n×k embedding).
pub(crate) fn coordinate_basis(n: usize, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(n, cols.len(), |i, j| if cols[j] == i { 1.0 } else { 0.0 })
}

pub(crate) fn all_finite(values: impl IntoIterator<Item = f64>) -> bool {
    values.into_iter().all(f64::is_finite)
}
