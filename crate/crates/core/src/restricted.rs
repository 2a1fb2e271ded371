//! Minimization of `g` over a single support pattern,
//! `{x : (Mx)_i = 0 for i ∉ S}` (times `R^{d′}` for coupled models).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fidelity::{Coupling, FidelityModel, Point, SPIKE_POINT};
use crate::linalg;
use crate::sparsity::SupportSet;
use crate::transform::Transform;

pub(crate) const ADMM_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone)]
pub(crate) struct Restricted {
    pub point: Point,
    pub value: f64,
    /// Stationarity/feasibility residual of the exact solves.
    pub kkt: Option<f64>,
    pub iterations: usize,
    /// Result comes from a user callback and is not verified.
    pub claimed: bool,
}

pub(crate) fn minimize(
    model: &FidelityModel,
    transform: &Transform,
    support: &SupportSet,
) -> Result<Restricted> {
    if transform.preimage_dim() != model.x_dim() {
        return Err(Error::Dimension {
            what: "transform columns",
            expected: model.x_dim(),
            found: transform.preimage_dim(),
        });
    }
    match model {
        FidelityModel::Quadratic { a, b } => quadratic(a, b, transform, support),
        FidelityModel::SpikedCone => spiked_cone(model, transform, support),
        FidelityModel::CoupledQuadratic(c) => coupled_quadratic(c, transform, support),
        FidelityModel::CoupledCappedL1(c) => coupled_l1(model, c, transform, support),
        FidelityModel::BlackBox(bb) => {
            let x = match bb.restricted_minimizer(transform, support) {
                None => {
                    return Err(Error::Unsupported(
                        "black-box model has no restricted minimizer".into(),
                    ))
                }
                Some(r) => r.map_err(Error::Evaluator)?,
            };
            let point = Point::new(DVector::from_vec(x));
            let value = model.eval_g(&point)?;
            Ok(Restricted {
                point,
                value,
                kkt: None,
                iterations: 0,
                claimed: true,
            })
        }
    }
}

/// Null-space method: `x = N z`, `min_z ||A N z - b||²`.
fn quadratic(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    transform: &Transform,
    support: &SupportSet,
) -> Result<Restricted> {
    let n = transform.restriction_basis(support)?;
    let an = a * &n;
    let z = linalg::lstsq(&an, b)?;
    let x = &n * z;
    let residual = a * &x - b;
    let stationarity = (n.transpose() * (a.transpose() * &residual)).norm();
    let off = support.complement();
    let feasibility = if off.is_empty() {
        0.0
    } else {
        (linalg::select_rows(transform.matrix(), &off) * &x).norm()
    };
    Ok(Restricted {
        value: residual.norm_squared(),
        point: Point::new(x),
        kkt: Some(stationarity.max(feasibility)),
        iterations: 1,
        claimed: false,
    })
}

/// Case analysis: the cone part is minimized by projecting `(1, 1)` onto
/// the coordinate subspace; the spike competes whenever it is feasible.
fn spiked_cone(
    model: &FidelityModel,
    transform: &Transform,
    support: &SupportSet,
) -> Result<Restricted> {
    if !transform.is_identity() {
        return Err(Error::Unsupported(
            "the spiked cone is solved in closed form for the identity transform only".into(),
        ));
    }
    let proj = Point::new(DVector::from_fn(2, |i, _| {
        if support.contains(i) {
            1.0
        } else {
            0.0
        }
    }));
    let mut best = (model.eval_g(&proj)?, proj);
    if support.contains(1) {
        let spike = Point::from_slice(&SPIKE_POINT);
        let v = model.eval_g(&spike)?;
        if v < best.0 {
            best = (v, spike);
        }
    }
    Ok(Restricted {
        point: best.1,
        value: best.0,
        kkt: None,
        iterations: 1,
        claimed: false,
    })
}

/// Joint solve in `w = (z, y)` with `x = N z`:
/// `g = yᵀQy + cᵀy + mu ||[N, -D] w||²`.
fn coupled_quadratic(c: &Coupling, transform: &Transform, support: &SupportSet) -> Result<Restricted> {
    let n = transform.restriction_basis(support)?;
    let (k, dp) = (n.ncols(), c.y_dim());
    let mut kmat = DMatrix::zeros(c.x_dim(), k + dp);
    kmat.columns_mut(0, k).copy_from(&n);
    kmat.columns_mut(k, dp).copy_from(&(-&c.d));
    let mut h = kmat.transpose() * &kmat * c.mu;
    let mut q = h.view_mut((k, k), (dp, dp));
    q += &c.phi_q;
    let mut lin = DVector::zeros(k + dp);
    lin.rows_mut(k, dp).copy_from(&c.phi_c);
    let (w, residual) = linalg::minimize_psd_quadratic(&h, &lin)?;
    let x = &n * w.rows(0, k);
    let y = w.rows(k, dp).into_owned();
    let point = Point::pair(x, y);
    let value = FidelityModel::CoupledQuadratic(c.clone()).eval_g(&point)?;
    Ok(Restricted {
        point,
        value,
        kkt: Some(residual),
        iterations: 1,
        claimed: false,
    })
}

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// `x_S = (Dy)_S` is optimal for fixed `y`, leaving
/// `min_y yᵀQy + cᵀy + mu ||E y||_1` with `E` the off-support rows of D.
/// Solved by ADMM on the split `u = E y`, then polished by an exact solve
/// on the detected sign pattern.
fn coupled_l1(
    model: &FidelityModel,
    c: &Coupling,
    transform: &Transform,
    support: &SupportSet,
) -> Result<Restricted> {
    if !transform.is_identity() {
        return Err(Error::UnsupportedTransform(
            "the l1-coupled model is restricted along coordinate supports only".into(),
        ));
    }
    let off = support.complement();
    let assemble = |y: DVector<f64>| -> Point {
        let dy = &c.d * &y;
        let x = DVector::from_fn(c.x_dim(), |i, _| if support.contains(i) { dy[i] } else { 0.0 });
        Point::pair(x, y)
    };
    if off.is_empty() {
        let (y, residual) = linalg::minimize_psd_quadratic(&c.phi_q, &c.phi_c)?;
        let point = assemble(y);
        let value = model.eval_g(&point)?;
        return Ok(Restricted {
            point,
            value,
            kkt: Some(residual),
            iterations: 1,
            claimed: false,
        });
    }

    let e = linalg::select_rows(&c.d, &off);
    let et = e.transpose();
    let dp = c.y_dim();
    let p = off.len();
    let objective = |y: &DVector<f64>| c.phi(y) + c.mu * (&e * y).lp_norm(1);

    let mut rho = c.mu.max(1e-6);
    let factor = |rho: f64| -> Result<DMatrix<f64>> {
        let h = &c.phi_q * 2.0 + &et * &e * rho;
        let eps = 1e-13 * (1.0 + h.norm());
        h.svd(true, true)
            .pseudo_inverse(eps)
            .map_err(|e| Error::LinearAlgebra(e.to_string()))
    };
    let mut hinv = factor(rho)?;

    // Unboundedness: the linear term must be orthogonal to null(Q) ∩ null(E).
    let h0 = &c.phi_q * 2.0 + &et * &e * rho;
    let y0 = -(&hinv * &c.phi_c);
    if (&h0 * &y0 + &c.phi_c).norm() > 1e-8 * (1.0 + c.phi_c.norm()) {
        return Err(Error::Unbounded("phi is unbounded below on the restricted set".into()));
    }

    let mut y = y0;
    let mut u = &e * &y;
    let mut w = DVector::zeros(p);
    let (abs_tol, rel_tol) = (1e-13, 1e-11);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < ADMM_MAX_ITER {
        iterations += 1;
        let rhs = -&c.phi_c + &et * (&u - &w) * rho;
        y = &hinv * rhs;
        let ey = &e * &y;
        let u_prev = u.clone();
        u = (&ey + &w).map(|v| soft(v, c.mu / rho));
        w += &ey - &u;
        let r = (&ey - &u).norm();
        let s = rho * (&et * (&u - &u_prev)).norm();
        let eps_pri = (p as f64).sqrt() * abs_tol + rel_tol * ey.norm().max(u.norm());
        let eps_dual = (dp as f64).sqrt() * abs_tol + rel_tol * rho * (&et * &w).norm();
        if r <= eps_pri && s <= eps_dual {
            converged = true;
            break;
        }
        // residual balancing; w is the scaled dual so it rescales with rho
        if iterations % 50 == 0 && (r > 10.0 * s || s > 10.0 * r) {
            let scale = if r > 10.0 * s { 2.0 } else { 0.5 };
            rho *= scale;
            w /= scale;
            hinv = factor(rho)?;
        }
    }

    let admm_value = objective(&y);
    if let Some(polished) = polish(c, &e, &u, admm_value) {
        y = polished;
        converged = true;
    }
    let point = assemble(y.clone());
    let value = model.eval_g(&point)?;
    if !converged {
        return Err(Error::Convergence {
            iterations,
            best: Box::new(point),
            best_value: value,
        });
    }
    Ok(Restricted {
        point,
        value,
        kkt: None,
        iterations,
        claimed: false,
    })
}

/// Exact solve with the sign pattern of `u` fixed: zero rows become
/// equality constraints and the others contribute `mu * sign * (Ey)_i`.
/// Accepted only if the result keeps the pattern and is no worse.
fn polish(c: &Coupling, e: &DMatrix<f64>, u: &DVector<f64>, admm_value: f64) -> Option<DVector<f64>> {
    let zero: Vec<usize> = (0..u.len()).filter(|&i| u[i] == 0.0).collect();
    let signs = u.map(|v| if v == 0.0 { 0.0 } else { v.signum() });
    let n = linalg::null_space(&linalg::select_rows(e, &zero), 1e-12 * (1.0 + e.norm())).ok()?;
    let lin = &c.phi_c + e.transpose() * &signs * c.mu;
    let h = n.transpose() * &c.phi_q * &n;
    let (z, _) = linalg::minimize_psd_quadratic(&h, &(n.transpose() * lin)).ok()?;
    let y = &n * z;
    let ey = e * &y;
    let scale = 1.0 + ey.amax();
    let keeps_pattern = (0..u.len()).all(|i| {
        if u[i] == 0.0 {
            ey[i].abs() <= 1e-9 * scale
        } else {
            ey[i] * u[i] >= -1e-12 * scale
        }
    });
    let value = c.phi(&y) + c.mu * ey.lp_norm(1);
    (keeps_pattern && value <= admm_value + 1e-12 * (1.0 + admm_value.abs())).then_some(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_coordinate_projection() {
        let a = DMatrix::identity(2, 2);
        let b = DVector::from_vec(vec![3.0, 4.0]);
        let s = SupportSet::from_one_based(&[1], 2).unwrap();
        let r = quadratic(&a, &b, &Transform::identity(2), &s).unwrap();
        assert_eq!(r.point.x.as_slice(), &[3.0, 0.0]);
        assert!((r.value - 16.0).abs() < 1e-12);
        assert!(r.kkt.unwrap() < 1e-12);
    }

    #[test]
    fn spiked_cone_cases() {
        let m = FidelityModel::SpikedCone;
        let id = Transform::identity(2);
        let cases: [(&[usize], [f64; 2], f64); 4] = [
            (&[], [0.0, 0.0], 0.0),
            (&[1], [1.0, 0.0], std::f64::consts::FRAC_1_SQRT_2 - 1.0),
            (&[2], [0.0, 1.0], -0.9),
            (&[1, 2], [1.0, 1.0], -1.0),
        ];
        for (s, x, v) in cases {
            let r = minimize(&m, &id, &SupportSet::from_one_based(s, 2).unwrap()).unwrap();
            assert_eq!(r.point.x.as_slice(), &x);
            assert!((r.value - v).abs() < 1e-15, "{s:?}: {}", r.value);
        }
    }

    #[test]
    fn l1_coupled_one_dimensional() {
        // min y² - 2y + |y| (x off support): minimum at y = 1/2, value -1/4.
        let c = Coupling::new(
            DMatrix::identity(1, 1),
            DVector::from_vec(vec![-2.0]),
            1.0,
            DMatrix::identity(1, 1),
        )
        .unwrap();
        let m = FidelityModel::CoupledCappedL1(c.clone());
        let r = coupled_l1(&m, &c, &Transform::identity(1), &SupportSet::empty(1)).unwrap();
        let y = r.point.y.as_ref().unwrap()[0];
        assert!((y - 0.5).abs() < 1e-10, "{y}");
        assert!((r.value + 0.25).abs() < 1e-12);
        assert_eq!(r.point.x[0], 0.0);
    }

    #[test]
    fn l1_coupled_kink_is_exact() {
        // min y² - y + 2|y|: the kink at 0 wins.
        let c = Coupling::new(
            DMatrix::identity(1, 1),
            DVector::from_vec(vec![-1.0]),
            2.0,
            DMatrix::identity(1, 1),
        )
        .unwrap();
        let m = FidelityModel::CoupledCappedL1(c.clone());
        let r = coupled_l1(&m, &c, &Transform::identity(1), &SupportSet::empty(1)).unwrap();
        assert_eq!(r.value, 0.0);
    }
}
