//! Fidelity terms `g` and the regularized objectives `f = g + λ ||M·||_0`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::ser::SerializeStruct;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::restricted;
use crate::sparsity::{SparsityLevel, SupportSet, ZeroTolerance};
use crate::transform::Transform;

/// A point of the search space: `x` alone, or the pair `(x, y)` of the
/// coupled models where only `x` is regularized.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: DVector<f64>,
    pub y: Option<DVector<f64>>,
}

impl Point {
    pub fn new(x: DVector<f64>) -> Self {
        Point { x, y: None }
    }

    pub fn pair(x: DVector<f64>, y: DVector<f64>) -> Self {
        Point { x, y: Some(y) }
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Point::new(DVector::from_column_slice(x))
    }

    /// Total number of coordinates, `x` and `y` together.
    pub fn dim(&self) -> usize {
        self.x.len() + self.y.as_ref().map_or(0, DVector::len)
    }

    /// Componentwise sum with a perturbation split the same way.
    pub fn offset(&self, dx: &DVector<f64>, dy: Option<&DVector<f64>>) -> Point {
        Point {
            x: &self.x + dx,
            y: match (&self.y, dy) {
                (Some(y), Some(d)) => Some(y + d),
                (y, _) => y.clone(),
            },
        }
    }

    /// Euclidean distance over all coordinates.
    pub fn distance(&self, other: &Point) -> f64 {
        let dx = (&self.x - &other.x).norm_squared();
        let dy = match (&self.y, &other.y) {
            (Some(a), Some(b)) => (a - b).norm_squared(),
            _ => 0.0,
        };
        (dx + dy).sqrt()
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("Point", if self.y.is_some() { 2 } else { 1 })?;
        st.serialize_field("x", self.x.as_slice())?;
        if let Some(y) = &self.y {
            st.serialize_field("y", y.as_slice())?;
        }
        st.end()
    }
}

/// User-supplied fidelity term.
///
/// `evaluate` must be deterministic and finite. `restricted_minimizer`, when
/// provided, returns a claimed minimizer of `g` over
/// `{x : (Mx)_i = 0 for i ∉ support}`. Implementations are called from
/// worker threads during enumeration.
pub trait BlackBoxFidelity: Send + Sync + fmt::Debug {
    fn preimage_dim(&self) -> usize;

    fn evaluate(&self, x: &[f64]) -> std::result::Result<f64, String>;

    fn restricted_minimizer(
        &self,
        _transform: &Transform,
        _support: &SupportSet,
    ) -> Option<std::result::Result<Vec<f64>, String>> {
        None
    }
}

/// The data shared by the two coupled models:
/// `phi(y) = yᵀ Q y + cᵀ y` and the coupling matrix D (d×d′).
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub phi_q: DMatrix<f64>,
    pub phi_c: DVector<f64>,
    pub mu: f64,
    pub d: DMatrix<f64>,
}

impl Coupling {
    pub fn new(phi_q: DMatrix<f64>, phi_c: DVector<f64>, mu: f64, d: DMatrix<f64>) -> Result<Self> {
        let dp = d.ncols();
        if d.nrows() == 0 || dp == 0 {
            return Err(Error::Argument("coupling matrix D must be nonempty".into()));
        }
        if phi_q.shape() != (dp, dp) {
            return Err(Error::Dimension {
                what: "phi_Q (must be d′×d′)",
                expected: dp,
                found: phi_q.nrows(),
            });
        }
        if phi_c.len() != dp {
            return Err(Error::Dimension {
                what: "phi_c",
                expected: dp,
                found: phi_c.len(),
            });
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::Argument(format!("mu must be positive, got {mu}")));
        }
        let values = phi_q.iter().chain(phi_c.iter()).chain(d.iter()).copied();
        if !linalg::all_finite(values) {
            return Err(Error::NonFinite("coupled model data".into()));
        }
        let scale = 1.0 + phi_q.norm();
        if (&phi_q - phi_q.transpose()).norm() > 1e-12 * scale {
            return Err(Error::Argument("phi_Q must be symmetric".into()));
        }
        let min_eig = phi_q
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 * scale {
            return Err(Error::Argument(format!(
                "phi_Q must be positive semidefinite (smallest eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(Coupling { phi_q, phi_c, mu, d })
    }

    pub fn x_dim(&self) -> usize {
        self.d.nrows()
    }

    pub fn y_dim(&self) -> usize {
        self.d.ncols()
    }

    pub fn phi(&self, y: &DVector<f64>) -> f64 {
        y.dot(&(&self.phi_q * y)) + self.phi_c.dot(y)
    }
}

/// The fidelity term `g`.
#[derive(Debug, Clone)]
pub enum FidelityModel {
    /// `||Ax - b||_2^2`.
    Quadratic { a: DMatrix<f64>, b: DVector<f64> },
    /// Planar cone `(√2/2)||x - (1,1)||_2 - 1` with the isolated value
    /// `-0.9` at `(0, 1)`. Its global minimizer `(1,1)` is dense while the
    /// regularized problem prefers the origin.
    SpikedCone,
    /// `phi(y) + mu ||x - Dy||_2^2`.
    CoupledQuadratic(Coupling),
    /// `phi(y) + mu ||x - Dy||_1`.
    CoupledCappedL1(Coupling),
    BlackBox(Arc<dyn BlackBoxFidelity>),
}

/// The special point of [`FidelityModel::SpikedCone`].
pub const SPIKE_POINT: [f64; 2] = [0.0, 1.0];
pub const SPIKE_VALUE: f64 = -0.9;

impl FidelityModel {
    pub fn quadratic(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::Dimension {
                what: "b (rows of A)",
                expected: a.nrows(),
                found: b.len(),
            });
        }
        if a.ncols() == 0 || a.nrows() == 0 {
            return Err(Error::Argument("A must be nonempty".into()));
        }
        if !linalg::all_finite(a.iter().chain(b.iter()).copied()) {
            return Err(Error::NonFinite("quadratic model data".into()));
        }
        Ok(FidelityModel::Quadratic { a, b })
    }

    pub fn coupled_quadratic(
        phi_q: DMatrix<f64>,
        phi_c: DVector<f64>,
        mu: f64,
        d: DMatrix<f64>,
    ) -> Result<Self> {
        Coupling::new(phi_q, phi_c, mu, d).map(FidelityModel::CoupledQuadratic)
    }

    pub fn coupled_capped_l1(
        phi_q: DMatrix<f64>,
        phi_c: DVector<f64>,
        mu: f64,
        d: DMatrix<f64>,
    ) -> Result<Self> {
        Coupling::new(phi_q, phi_c, mu, d).map(FidelityModel::CoupledCappedL1)
    }

    pub fn black_box(model: impl BlackBoxFidelity + 'static) -> Self {
        FidelityModel::BlackBox(Arc::new(model))
    }

    /// Short tag used in reports.
    pub fn kind(&self) -> &'static str {
        match self {
            FidelityModel::Quadratic { .. } => "quadratic",
            FidelityModel::SpikedCone => "spiked_cone",
            FidelityModel::CoupledQuadratic(_) => "coupled_quadratic",
            FidelityModel::CoupledCappedL1(_) => "coupled_capped_l1",
            FidelityModel::BlackBox(_) => "black_box",
        }
    }

    /// Dimension of the regularized variable `x`.
    pub fn x_dim(&self) -> usize {
        match self {
            FidelityModel::Quadratic { a, .. } => a.ncols(),
            FidelityModel::SpikedCone => 2,
            FidelityModel::CoupledQuadratic(c) | FidelityModel::CoupledCappedL1(c) => c.x_dim(),
            FidelityModel::BlackBox(bb) => bb.preimage_dim(),
        }
    }

    /// Dimension of the unregularized companion `y`, for coupled models.
    pub fn y_dim(&self) -> Option<usize> {
        self.coupling().map(Coupling::y_dim)
    }

    pub fn is_coupled(&self) -> bool {
        self.coupling().is_some()
    }

    pub fn coupling(&self) -> Option<&Coupling> {
        match self {
            FidelityModel::CoupledQuadratic(c) | FidelityModel::CoupledCappedL1(c) => Some(c),
            _ => None,
        }
    }

    pub(crate) fn check_point(&self, point: &Point) -> Result<()> {
        if point.x.len() != self.x_dim() {
            return Err(Error::Dimension {
                what: "x",
                expected: self.x_dim(),
                found: point.x.len(),
            });
        }
        match (self.y_dim(), &point.y) {
            (Some(dp), Some(y)) if y.len() != dp => Err(Error::Dimension {
                what: "y",
                expected: dp,
                found: y.len(),
            }),
            (Some(dp), None) => Err(Error::Dimension {
                what: "y (coupled model needs a pair)",
                expected: dp,
                found: 0,
            }),
            (None, Some(y)) => Err(Error::Dimension {
                what: "y (model takes x only)",
                expected: 0,
                found: y.len(),
            }),
            _ => Ok(()),
        }
    }

    /// `g(point)`.
    pub fn eval_g(&self, point: &Point) -> Result<f64> {
        self.check_point(point)?;
        let x = &point.x;
        Ok(match self {
            FidelityModel::Quadratic { a, b } => (a * x - b).norm_squared(),
            FidelityModel::SpikedCone => spiked_cone(x[0], x[1]),
            FidelityModel::CoupledQuadratic(c) => {
                let y = point.y.as_ref().expect("checked");
                c.phi(y) + c.mu * (x - &c.d * y).norm_squared()
            }
            FidelityModel::CoupledCappedL1(c) => {
                let y = point.y.as_ref().expect("checked");
                c.phi(y) + c.mu * (x - &c.d * y).lp_norm(1)
            }
            FidelityModel::BlackBox(bb) => {
                let v = bb.evaluate(x.as_slice()).map_err(Error::Evaluator)?;
                if !v.is_finite() {
                    return Err(Error::Evaluator(format!("non-finite value {v}")));
                }
                v
            }
        })
    }

    /// A global minimizer of `g` and its value.
    pub fn global_min_g(&self) -> Result<(Point, f64)> {
        match self {
            FidelityModel::CoupledCappedL1(_) => Err(Error::Unsupported(
                "the l1-coupled model has no closed-form minimizer; use \
                 minimize_on_support with the full support"
                    .into(),
            )),
            FidelityModel::SpikedCone => Ok((Point::from_slice(&[1.0, 1.0]), -1.0)),
            _ => {
                let full = SupportSet::full(self.x_dim());
                let id = Transform::identity(self.x_dim());
                let sol = restricted::minimize(self, &id, &full)?;
                Ok((sol.point, sol.value))
            }
        }
    }
}

fn spiked_cone(x1: f64, x2: f64) -> f64 {
    if x1 == SPIKE_POINT[0] && x2 == SPIKE_POINT[1] {
        return SPIKE_VALUE;
    }
    // Dividing by √2 keeps g(0,0) = 0 exact.
    (x1 - 1.0).hypot(x2 - 1.0) / std::f64::consts::SQRT_2 - 1.0
}

/// `f = g + λ ||M x||_0`.
#[derive(Debug, Clone)]
pub struct RegularizedObjective {
    pub model: FidelityModel,
    pub transform: Transform,
    pub lambda: f64,
}

impl RegularizedObjective {
    pub fn new(model: FidelityModel, transform: Transform, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Argument(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if transform.preimage_dim() != model.x_dim() {
            return Err(Error::Dimension {
                what: "transform columns",
                expected: model.x_dim(),
                found: transform.preimage_dim(),
            });
        }
        transform.ensure_supported()?;
        Ok(RegularizedObjective {
            model,
            transform,
            lambda,
        })
    }

    /// Same model and transform, different λ.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.model.clone(), self.transform.clone(), lambda)
    }

    /// The stratum index of the point: `||Mx||_0`.
    pub fn level(&self, point: &Point, tol: ZeroTolerance) -> Result<SparsityLevel> {
        self.transform.classify_preimage(point.x.as_slice(), tol)
    }

    pub fn eval_g(&self, point: &Point) -> Result<f64> {
        self.model.eval_g(point)
    }

    pub fn eval_f(&self, point: &Point, tol: ZeroTolerance) -> Result<f64> {
        let g = self.model.eval_g(point)?;
        Ok(g + self.lambda * self.level(point, tol)?.0 as f64)
    }
}
