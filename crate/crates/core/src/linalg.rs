//! Krylov and dense helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients for an SPD operator.
///
/// Stops on the recursively updated residual, then confirms against the true
/// residual and restarts from the current iterate if they disagree.
pub fn pcg<A, M>(
    solver: &'static str,
    mut apply: A,
    mut precond: M,
    b: &DVector<f64>,
    x0: Option<DVector<f64>>,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, CgReport)>
where
    A: FnMut(&DVector<f64>) -> DVector<f64>,
    M: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let bnorm = b.norm();
    let mut x = x0.unwrap_or_else(|| DVector::zeros(b.len()));
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok((
            x,
            CgReport {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut total = 0;
    let mut trace = Vec::new();
    for _restart in 0..4 {
        let mut r = b - apply(&x);
        let mut rel = r.norm() / bnorm;
        if rel <= tol {
            return Ok((
                x,
                CgReport {
                    iterations: total,
                    relative_residual: rel,
                },
            ));
        }
        let mut z = precond(&r);
        let mut p = z.clone();
        let mut rz = r.dot(&z);
        while total < max_iter {
            let ap = apply(&p);
            let pap = p.dot(&ap);
            if pap <= 0.0 || !pap.is_finite() {
                return Err(Error::NotConverged {
                    solver,
                    iterations: total,
                    residual: rel,
                    trace,
                });
            }
            let alpha = rz / pap;
            x.axpy(alpha, &p, 1.0);
            r.axpy(-alpha, &ap, 1.0);
            total += 1;
            rel = r.norm() / bnorm;
            trace.push(rel);
            if rel <= tol {
                break;
            }
            z = precond(&r);
            let rz_new = r.dot(&z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.axpy(1.0, &z, beta);
        }
        let true_rel = (b - apply(&x)).norm() / bnorm;
        if true_rel <= tol {
            return Ok((
                x,
                CgReport {
                    iterations: total,
                    relative_residual: true_rel,
                },
            ));
        }
        if total >= max_iter {
            return Err(Error::NotConverged {
                solver,
                iterations: total,
                residual: true_rel,
                trace,
            });
        }
    }
    let true_rel = (b - apply(&x)).norm() / bnorm;
    Err(Error::NotConverged {
        solver,
        iterations: total,
        residual: true_rel,
        trace,
    })
}

/// Solves a small dense symmetric system, Cholesky first and LU as fallback.
pub fn solve_dense_symmetric(a: DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    a.lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular(what.to_string()))
}

/// Dense inverse of a small SPD matrix.
pub fn spd_inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Singular(what.to_string()))
}

/// Orthonormalizes columns by modified Gram–Schmidt, dropping columns whose
/// residual norm falls below `drop_tol` times their original norm.
pub fn orthonormalize_columns(m: &DMatrix<f64>, drop_tol: f64) -> DMatrix<f64> {
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for j in 0..m.ncols() {
        let orig = m.column(j).into_owned();
        let n0 = orig.norm();
        if n0 == 0.0 {
            continue;
        }
        let mut v = orig;
        for _ in 0..2 {
            for q in &cols {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let n = v.norm();
        if n > drop_tol * n0 {
            cols.push(v / n);
        }
    }
    if cols.is_empty() {
        return DMatrix::zeros(m.nrows(), 0);
    }
    DMatrix::from_columns(&cols)
}
