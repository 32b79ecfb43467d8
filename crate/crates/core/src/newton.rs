//! Dense Newton iteration with a central-difference Jacobian.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn fd_jacobian<F>(f: &F, x: &[f64], rows: usize, step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let cols: Vec<Vec<f64>> = (0..x.len())
        .into_par_iter()
        .map(|j| {
            let h = step * (1.0 + x[j].abs());
            let mut xp = x.to_vec();
            xp[j] += h;
            let plus = f(&xp)?;
            xp[j] = x[j] - h;
            let minus = f(&xp)?;
            Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(rows, x.len(), |i, j| cols[j][i]))
}

/// Solves `f(x) = 0` for square systems; steps are halved (at most ten
/// times) while they increase the sup-norm residual.
pub(crate) fn solve<F>(f: F, x0: Vec<f64>, opts: NewtonOptions) -> Result<NewtonResult>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let mut x = x0;
    let mut fx = f(&x)?;
    let mut res = sup_norm(&fx);
    let mut iterations = 0;
    while res > opts.tol {
        if iterations == opts.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                residual: res,
            });
        }
        iterations += 1;
        let jac = fd_jacobian(&f, &x, fx.len(), opts.fd_step)?;
        let rhs = DVector::from_column_slice(&fx);
        let delta = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("Newton Jacobian is singular".into()))?;
        let mut scale = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a - scale * d).collect();
            let accepted = match f(&trial) {
                Ok(ft) => {
                    let r = sup_norm(&ft);
                    if r < res || scale < 1e-3 {
                        Some((trial, ft, r))
                    } else {
                        None
                    }
                }
                Err(e) if scale < 1e-3 => return Err(e),
                Err(_) => None,
            };
            if let Some((xt, ft, r)) = accepted {
                x = xt;
                fx = ft;
                res = r;
                break;
            }
            scale *= 0.5;
        }
    }
    Ok(NewtonResult {
        x,
        iterations,
        residual: res,
    })
}
