//! The sparsifying transform `M` (d×m) and the partition it induces on
//! the preimage space: `B_j = {x : ||Mx||_0 = j}` and
//! `Gamma_l = B_0 ∪ ... ∪ B_l`.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, FullSvd};
use crate::sparsity::{self, SparsityLevel, SupportSet, ZeroTolerance};

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Structure {
    Identity,
    /// Rectangular diagonal; rank deficiency is allowed and the zero rows
    /// simply never contribute to `||Mx||_0`.
    Diagonal,
    General,
}

/// Immutable dense transform with its SVD.
#[derive(Debug, Clone)]
pub struct Transform {
    matrix: DMatrix<f64>,
    singular_values: Vec<f64>,
    rank: usize,
    left: DMatrix<f64>,
    right: DMatrix<f64>,
    rank_tol: f64,
    structure: Structure,
}

/// `M = I_d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityTransform {
    pub d: usize,
}

impl From<IdentityTransform> for Transform {
    fn from(id: IdentityTransform) -> Self {
        Transform::identity(id.d)
    }
}

impl Transform {
    /// Computes the SVD, rank and spectral norm of `matrix`.
    pub fn build(matrix: DMatrix<f64>, rank_tol: f64) -> Result<Self> {
        let (d, m) = matrix.shape();
        if d == 0 || m == 0 {
            return Err(Error::Argument(format!("transform must be at least 1×1, got {d}×{m}")));
        }
        if !linalg::all_finite(matrix.iter().copied()) {
            return Err(Error::NonFinite("transform matrix".into()));
        }
        if !(rank_tol >= 0.0 && rank_tol.is_finite()) {
            return Err(Error::Argument(format!("rank_tol must be nonnegative, got {rank_tol}")));
        }
        let FullSvd {
            u,
            singular_values,
            v,
        } = linalg::full_svd(&matrix)?;
        let top = singular_values.first().copied().unwrap_or(0.0);
        let rank = if top > 0.0 {
            singular_values.iter().filter(|s| **s > rank_tol * top).count()
        } else {
            0
        };
        let diagonal = matrix
            .iter()
            .enumerate()
            .all(|(k, v)| k % d == k / d || *v == 0.0);
        let identity = d == m
            && diagonal
            && (0..d).all(|i| matrix[(i, i)] == 1.0);
        let structure = if identity {
            Structure::Identity
        } else if diagonal {
            Structure::Diagonal
        } else {
            Structure::General
        };
        Ok(Transform {
            matrix,
            singular_values,
            rank,
            left: u,
            right: v,
            rank_tol,
            structure,
        })
    }

    pub fn with_default_tol(matrix: DMatrix<f64>) -> Result<Self> {
        Self::build(matrix, DEFAULT_RANK_TOL)
    }

    pub fn identity(d: usize) -> Self {
        assert!(d >= 1, "identity transform needs d >= 1");
        Transform {
            matrix: DMatrix::identity(d, d),
            singular_values: vec![1.0; d],
            rank: d,
            left: DMatrix::identity(d, d),
            right: DMatrix::identity(d, d),
            rank_tol: DEFAULT_RANK_TOL,
            structure: Structure::Identity,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Image dimension d.
    pub fn image_dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Preimage dimension m.
    pub fn preimage_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// `||M||`, the largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// U (d×d).
    pub fn left_factor(&self) -> &DMatrix<f64> {
        &self.left
    }

    /// V (m×m).
    pub fn right_factor(&self) -> &DMatrix<f64> {
        &self.right
    }

    /// Surjective onto `R^d`: rank equals d.
    pub fn is_full_rank(&self) -> bool {
        self.rank == self.image_dim()
    }

    pub fn is_identity(&self) -> bool {
        self.structure == Structure::Identity
    }

    /// Rectangular diagonal form, as produced by [`Transform::svd_reduce`].
    pub fn is_diagonal(&self) -> bool {
        self.structure != Structure::General
    }

    /// Errors unless the partition machinery applies: full rank, or the
    /// reduced diagonal form.
    pub fn ensure_supported(&self) -> Result<()> {
        if self.is_full_rank() || (self.is_diagonal() && self.rank > 0) {
            Ok(())
        } else {
            Err(Error::UnsupportedTransform(format!(
                "{}×{} transform has rank {} < {}; reduce it to diagonal form with svd_reduce",
                self.image_dim(),
                self.preimage_dim(),
                self.rank,
                self.image_dim()
            )))
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.preimage_dim() {
            return Err(Error::Dimension {
                what: "preimage vector",
                expected: self.preimage_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `Mx`.
    pub fn apply(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        let x = DVector::from_column_slice(x);
        Ok(if self.is_identity() { x } else { &self.matrix * x })
    }

    /// The `j` with `x ∈ B_j`, i.e. `||Mx||_0`.
    pub fn classify_preimage(&self, x: &[f64], tol: ZeroTolerance) -> Result<SparsityLevel> {
        self.ensure_supported()?;
        let y = self.apply(x)?;
        sparsity::l0_norm(y.as_slice(), tol)
    }

    /// Support of `Mx`.
    pub fn image_support(&self, x: &[f64], tol: ZeroTolerance) -> Result<SupportSet> {
        self.ensure_supported()?;
        let y = self.apply(x)?;
        sparsity::support(y.as_slice(), tol)
    }

    /// Membership in `Gamma_l`.
    pub fn in_gamma(&self, x: &[f64], level: SparsityLevel, tol: ZeroTolerance) -> Result<bool> {
        if level.0 > self.image_dim() {
            return Err(Error::Argument(format!(
                "level {} out of range 0..={}",
                level.0,
                self.image_dim()
            )));
        }
        Ok(self.classify_preimage(x, tol)? <= level)
    }

    /// `min_i |(Mx)_i| / ||M||` for `x ∈ B_d`; the ball of this radius
    /// around `x` stays inside `B_d`.
    pub fn bd_openness_radius(&self, x: &[f64], tol: ZeroTolerance) -> Result<f64> {
        self.ensure_supported()?;
        let y = self.apply(x)?;
        let level = sparsity::l0_norm(y.as_slice(), tol)?;
        if level.0 != self.image_dim() {
            return Err(Error::Precondition(format!(
                "point lies in B_{} rather than B_{}",
                level.0,
                self.image_dim()
            )));
        }
        let min = y.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        Ok(min / self.spectral_norm())
    }

    /// Orthonormal basis N (m×k) of `{x : (Mx)_i = 0 for i ∉ support}`,
    /// so that every point with image supported in `support` is `N z`.
    pub fn restriction_basis(&self, support: &SupportSet) -> Result<DMatrix<f64>> {
        self.ensure_supported()?;
        if support.ambient_dim() != self.image_dim() {
            return Err(Error::Dimension {
                what: "support ambient dimension",
                expected: self.image_dim(),
                found: support.ambient_dim(),
            });
        }
        let off = support.complement();
        if self.is_identity() {
            return Ok(linalg::coordinate_basis(self.preimage_dim(), support.indices()));
        }
        if self.is_diagonal() {
            // Columns untouched by an active off-support row stay free.
            let free: Vec<usize> = (0..self.preimage_dim())
                .filter(|&j| !(j < self.image_dim() && off.contains(&j) && self.matrix[(j, j)] != 0.0))
                .collect();
            return Ok(linalg::coordinate_basis(self.preimage_dim(), &free));
        }
        let rows = linalg::select_rows(&self.matrix, &off);
        linalg::null_space(&rows, self.rank_tol * self.spectral_norm())
    }

    /// `M = U Λ Vᵀ`: returns the diagonal transform Λ with the factors.
    ///
    /// A solver working on Λ in the variable `z = Vᵀx` regularizes exactly
    /// the first r components of `Λz` and leaves the rest free.
    pub fn svd_reduce(&self) -> Result<SvdReduction> {
        if self.rank == 0 {
            return Err(Error::DegenerateTransform);
        }
        let (d, m) = self.matrix.shape();
        let mut lambda = DMatrix::zeros(d, m);
        for (i, s) in self.singular_values.iter().enumerate().take(self.rank) {
            lambda[(i, i)] = *s;
        }
        let diagonal = Transform {
            matrix: lambda,
            singular_values: self.singular_values.clone(),
            rank: self.rank,
            left: DMatrix::identity(d, d),
            right: DMatrix::identity(m, m),
            rank_tol: self.rank_tol,
            structure: if d == m && self.singular_values.iter().all(|s| *s == 1.0) {
                Structure::Identity
            } else {
                Structure::Diagonal
            },
        };
        Ok(SvdReduction {
            diagonal,
            left: self.left.clone(),
            right: self.right.clone(),
            rank: self.rank,
        })
    }
}

/// Result of [`Transform::svd_reduce`].
#[derive(Debug, Clone)]
pub struct SvdReduction {
    pub diagonal: Transform,
    /// U (d×d)
    pub left: DMatrix<f64>,
    /// V (m×m)
    pub right: DMatrix<f64>,
    pub rank: usize,
}

impl SvdReduction {
    /// `U Λ Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.left * self.diagonal.matrix() * self.right.transpose()
    }

    /// `z = Vᵀ x`.
    pub fn to_reduced(&self, x: &DVector<f64>) -> DVector<f64> {
        self.right.transpose() * x
    }

    /// `x = V z`.
    pub fn from_reduced(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.right * z
    }
}

/// Reads a row-major CSV matrix (no header, comma separated decimals).
pub fn read_matrix_csv<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Argument(format!("bad matrix entry {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    matrix_from_rows(&rows)
}

pub fn read_matrix_csv_path(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    read_matrix_csv(std::fs::File::open(path)?)
}

/// Builds a matrix from nested rows, checking they are rectangular.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(Error::Argument("matrix has no entries".into()));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::Dimension {
            what: "matrix row length",
            expected: ncols,
            found: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXACT: ZeroTolerance = ZeroTolerance::exact();

    #[test]
    fn build_examples() {
        let t = Transform::with_default_tol(DMatrix::identity(2, 2)).unwrap();
        assert_eq!(t.rank(), 2);
        assert!((t.spectral_norm() - 1.0).abs() < 1e-15);
        assert!(t.is_full_rank() && t.is_identity());

        let row = Transform::with_default_tol(DMatrix::from_row_slice(1, 2, &[1.0, 1.0])).unwrap();
        assert_eq!(row.rank(), 1);
        assert!((row.spectral_norm() - 2f64.sqrt()).abs() < 1e-14);
        assert!(row.is_full_rank());

        let sing =
            Transform::with_default_tol(DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.0]))
                .unwrap();
        assert_eq!(sing.rank(), 1);
        assert!(!sing.is_full_rank());
        assert!(sing.is_diagonal());
    }

    #[test]
    fn build_rejects_bad_input() {
        let nan = DMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert!(matches!(Transform::with_default_tol(nan), Err(Error::NonFinite(_))));
        let zero = Transform::with_default_tol(DMatrix::zeros(2, 3)).unwrap();
        assert_eq!(zero.rank(), 0);
        assert!(matches!(
            zero.classify_preimage(&[1.0, 0.0, 0.0], EXACT),
            Err(Error::UnsupportedTransform(_))
        ));
        assert!(matches!(zero.svd_reduce(), Err(Error::DegenerateTransform)));
    }

    #[test]
    fn rank_deficient_general_is_rejected() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        let t = Transform::with_default_tol(m).unwrap();
        assert_eq!(t.rank(), 1);
        assert!(matches!(
            t.classify_preimage(&[1.0, 1.0, 1.0], EXACT),
            Err(Error::UnsupportedTransform(_))
        ));
        let red = t.svd_reduce().unwrap();
        assert!(red.diagonal.ensure_supported().is_ok());
        assert!((red.reconstruct() - t.matrix()).norm() < 1e-10 * t.matrix().norm());
    }

    #[test]
    fn classify_examples() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let t = Transform::with_default_tol(m).unwrap();
        assert_eq!(t.classify_preimage(&[1.0, -1.0], EXACT).unwrap().0, 0);
        assert!(t.in_gamma(&[1.0, -1.0], SparsityLevel(0), EXACT).unwrap());
        assert!(t.in_gamma(&[3.0, 2.0], SparsityLevel(1), EXACT).unwrap());

        let id = Transform::identity(3);
        assert_eq!(id.classify_preimage(&[1.0, 0.0, 2.0], EXACT).unwrap().0, 2);
        assert!(matches!(
            id.classify_preimage(&[1.0, 0.0], EXACT),
            Err(Error::Dimension { .. })
        ));
        let id2 = Transform::identity(2);
        assert!(!id2.in_gamma(&[1.0, 1.0], SparsityLevel(1), EXACT).unwrap());
        assert!(id2.in_gamma(&[1.0, 1.0], SparsityLevel(2), EXACT).unwrap());
    }

    #[test]
    fn openness_radius_examples() {
        let id = Transform::identity(2);
        assert_eq!(id.bd_openness_radius(&[1.0, 1.0], EXACT).unwrap(), 1.0);
        let two = Transform::with_default_tol(DMatrix::identity(2, 2) * 2.0).unwrap();
        assert!((two.bd_openness_radius(&[1.0, 1.0], EXACT).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            id.bd_openness_radius(&[1.0, 0.0], EXACT),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn svd_reduce_examples() {
        let red = Transform::identity(3).svd_reduce().unwrap();
        assert_eq!(red.diagonal.matrix(), &DMatrix::identity(3, 3));
        assert!((red.left.clone() - DMatrix::identity(3, 3)).norm() < 1e-15);

        let t = Transform::with_default_tol(DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]))
            .unwrap();
        let red = t.svd_reduce().unwrap();
        assert_eq!(red.diagonal.matrix()[(0, 0)], 3.0);
        assert_eq!(red.diagonal.matrix()[(1, 1)], 1.0);
        for f in [&red.left, &red.right] {
            assert!((f.abs() - DMatrix::identity(2, 2)).norm() < 1e-14);
        }
    }

    #[test]
    fn diagonal_restriction_leaves_trailing_components_free() {
        // Λ = diag(2, 0) inside a 2×3 frame: rank 1, only (Λz)_1 counts.
        let lambda = DMatrix::from_row_slice(2, 3, &[2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let t = Transform::with_default_tol(lambda).unwrap();
        assert_eq!(t.classify_preimage(&[0.0, 5.0, -1.0], EXACT).unwrap().0, 0);
        let n = t.restriction_basis(&SupportSet::empty(2)).unwrap();
        assert_eq!(n.ncols(), 2);
        let n = t.restriction_basis(&SupportSet::full(2)).unwrap();
        assert_eq!(n.ncols(), 3);
    }

    #[test]
    fn csv_parsing() {
        let m = read_matrix_csv("1, 2.5, -3\n# comment\n4,5,6e-1\n".as_bytes()).unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m[(1, 2)], 0.6);
        assert!(read_matrix_csv("1,2\n3\n".as_bytes()).is_err());
        assert!(read_matrix_csv("1,x\n".as_bytes()).is_err());
    }
}
