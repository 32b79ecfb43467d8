//! Action functionals on uniformly sampled paths.
//!
//! Path velocities are estimated with fourth-order finite-difference
//! stencils (centered in the interior, one-sided at the two samples next to
//! each end) and integrals use the composite trapezoid rule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::{dlambda_eval, hamiltonian_vector_field, lambda_eval, ContactPoint, TangentVector};
use crate::error::{Error, Result};
use crate::flow::{self, conformal_exponent, phi_inverse, FlowMap, FlowSpec, Trajectory};
use crate::hamlang::HamiltonianExpr;

/// Minimum number of intervals of a [`Path`].
pub const MIN_INTERVALS: usize = 8;

/// A path sampled at `m + 1` uniform times on `[t0, t1]` (usually `[0, 1]`),
/// interpolated piecewise linearly between samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    t: Vec<f64>,
    y: Vec<ContactPoint>,
}

impl Path {
    pub fn new(t0: f64, t1: f64, y: Vec<ContactPoint>) -> Result<Self> {
        if y.len() < MIN_INTERVALS + 1 {
            return Err(Error::invalid(format!(
                "a path needs at least {} samples, got {}",
                MIN_INTERVALS + 1,
                y.len()
            )));
        }
        if !(t1 > t0) {
            return Err(Error::invalid("path time interval must be increasing"));
        }
        let n = y[0].dim();
        if let Some(bad) = y.iter().find(|p| p.dim() != n || p.p.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.dim(),
            });
        }
        let m = y.len() - 1;
        let t = (0..=m)
            .map(|i| if i == m { t1 } else { t0 + (t1 - t0) * i as f64 / m as f64 })
            .collect();
        Ok(Path { t, y })
    }

    /// Samples `f` at `m + 1` uniform times on `[0, 1]`.
    pub fn from_fn(m: usize, f: impl Fn(f64) -> ContactPoint) -> Result<Self> {
        let y = (0..=m).map(|i| f(i as f64 / m as f64)).collect();
        Self::new(0.0, 1.0, y)
    }

    /// Reinterprets a forward trajectory (uniform RK4 steps) as a path.
    pub fn from_trajectory(traj: &Trajectory) -> Result<Self> {
        let (t0, t1) = (traj.t[0], *traj.t.last().expect("samples"));
        if t1 < t0 {
            return Err(Error::invalid("backward trajectories cannot be used as paths"));
        }
        Self::new(t0, t1, traj.y.clone())
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn points(&self) -> &[ContactPoint] {
        &self.y
    }

    pub fn intervals(&self) -> usize {
        self.y.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.y[0].dim()
    }

    pub fn step(&self) -> f64 {
        (self.t[self.t.len() - 1] - self.t[0]) / self.intervals() as f64
    }

    pub fn first(&self) -> &ContactPoint {
        &self.y[0]
    }

    pub fn last(&self) -> &ContactPoint {
        &self.y[self.y.len() - 1]
    }

    /// Straight-line perturbation `y_i + s eta_i`.
    pub fn perturbed(&self, eta: &[TangentVector], s: f64) -> Result<Self> {
        if eta.len() != self.y.len() {
            return Err(Error::DimensionMismatch {
                expected: self.y.len(),
                found: eta.len(),
            });
        }
        let y = self
            .y
            .iter()
            .zip(eta)
            .map(|(p, e)| {
                ContactPoint::new(
                    p.q.iter().zip(&e.dq).map(|(a, b)| a + s * b).collect(),
                    p.p.iter().zip(&e.dp).map(|(a, b)| a + s * b).collect(),
                    p.z + s * e.dz,
                )
            })
            .collect();
        Ok(Path { t: self.t.clone(), y })
    }

    /// Velocity estimates at every sample.
    pub fn velocities(&self) -> Vec<TangentVector> {
        let flat: Vec<Vec<f64>> = self.y.iter().map(ContactPoint::to_flat).collect();
        let d = flat[0].len();
        let h = self.step();
        let m = self.intervals();
        (0..=m)
            .map(|i| {
                let v: Vec<f64> = (0..d)
                    .map(|c| derivative_at(|k| flat[k][c], i, m) / h)
                    .collect();
                TangentVector::from_flat(&v)
            })
            .collect()
    }
}

/// Fourth-order difference of the sequence `f(0..=m)` at index `i`, times
/// the step.
fn derivative_at(f: impl Fn(usize) -> f64, i: usize, m: usize) -> f64 {
    const ONE_SIDED_0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
    const ONE_SIDED_1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
    let combo = |base: usize, w: &[f64; 5], sign: f64, forward: bool| {
        w.iter()
            .enumerate()
            .map(|(k, c)| c * f(if forward { base + k } else { base - k }))
            .sum::<f64>()
            * sign
            / 12.0
    };
    match i {
        0 => combo(0, &ONE_SIDED_0, 1.0, true),
        1 => combo(0, &ONE_SIDED_1, 1.0, true),
        _ if i == m => combo(m, &ONE_SIDED_0, -1.0, false),
        _ if i + 1 == m => combo(m, &ONE_SIDED_1, -1.0, false),
        _ => (f(i - 2) - 8.0 * f(i - 1) + 8.0 * f(i + 1) - f(i + 2)) / 12.0,
    }
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    let m = values.len() - 1;
    let inner: f64 = values[1..m].iter().sum();
    h * (inner + 0.5 * (values[0] + values[m]))
}

fn check_dim(h: &HamiltonianExpr, path: &Path) -> Result<()> {
    if path.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: path.dim(),
        });
    }
    Ok(())
}

/// Standard contact action `int gamma^* lambda`.
pub fn action_a0(path: &Path) -> f64 {
    let vel = path.velocities();
    let integrand: Vec<f64> = path
        .points()
        .iter()
        .zip(&vel)
        .map(|(y, v)| lambda_eval(y, v))
        .collect();
    trapezoid(&integrand, path.step())
}

/// `lambda(gamma') + H(t, gamma)` at every sample.
fn carnot_integrand(h: &HamiltonianExpr, path: &Path) -> Result<Vec<f64>> {
    check_dim(h, path)?;
    let vel = path.velocities();
    let mut ev = h.evaluator();
    path.points()
        .iter()
        .zip(&vel)
        .zip(path.times())
        .map(|((y, v), &t)| Ok(lambda_eval(y, v) + ev.value(t, y)?))
        .collect()
}

/// Perturbed action `int e^{g_{(phi^t)^-1}(gamma)} (lambda(gamma') + H) dt`.
pub fn action_ah(h: &HamiltonianExpr, path: &Path, spec: &FlowSpec) -> Result<f64> {
    let integrand = carnot_integrand(h, path)?;
    let weights: Vec<f64> = path
        .points()
        .par_iter()
        .zip(path.times().par_iter())
        .map(|(y, &t)| conformal_exponent(h, FlowMap::PhiTInverse, t, y, spec).map(f64::exp))
        .collect::<Result<_>>()?;
    let weighted: Vec<f64> = integrand.iter().zip(&weights).map(|(a, w)| a * w).collect();
    Ok(trapezoid(&weighted, path.step()))
}

/// `gamma_bar(t) = (phi_H^t)^-1 (gamma(t))` sample by sample.
pub fn gauge_transform(h: &HamiltonianExpr, path: &Path, spec: &FlowSpec) -> Result<Path> {
    check_dim(h, path)?;
    let y = path
        .points()
        .par_iter()
        .zip(path.times().par_iter())
        .map(|(y, &t)| phi_inverse(h, t, y, spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(Path { t: path.t.clone(), y })
}

/// `-A_H(gamma) + z(gamma(1))`.
pub fn effective_action(h: &HamiltonianExpr, path: &Path, spec: &FlowSpec) -> Result<f64> {
    Ok(-action_ah(h, path, spec)? + path.last().z)
}

/// Largest `|lambda(gamma') + H(t, gamma)|` over interior samples.
pub fn carnot_residual(h: &HamiltonianExpr, path: &Path) -> Result<f64> {
    let integrand = carnot_integrand(h, path)?;
    let m = integrand.len() - 1;
    Ok(integrand[1..m].iter().fold(0.0, |acc, v| acc.max(v.abs())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstVariation {
    /// Central difference of `A_H` along the straight-line perturbation.
    pub fd: f64,
    /// Quadrature of the first-variation formula.
    pub formula: f64,
}

/// Compares a central difference of `A_H` in direction `eta` with
///
/// ```text
/// int d lambda(D^-1 eta, D^-1 (gamma' - X_H)) dt + lambda(eta(1))
///     - e^{g_{psi^1}(gamma(0))} lambda(eta(0)),   D = d phi_H^t.
/// ```
pub fn first_variation_check(
    h: &HamiltonianExpr,
    path: &Path,
    eta: &[TangentVector],
    spec: &FlowSpec,
    step: f64,
) -> Result<FirstVariation> {
    check_dim(h, path)?;
    if !(step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    if eta.len() != path.points().len() {
        return Err(Error::DimensionMismatch {
            expected: path.points().len(),
            found: eta.len(),
        });
    }
    if eta.iter().any(|e| e.to_flat().iter().any(|x| !x.is_finite())) {
        return Err(Error::invalid("variation field is not finite"));
    }
    let plus = action_ah(h, &path.perturbed(eta, step)?, spec)?;
    let minus = action_ah(h, &path.perturbed(eta, -step)?, spec)?;
    let fd = (plus - minus) / (2.0 * step);

    let vel = path.velocities();
    let integrand = path
        .points()
        .par_iter()
        .zip(path.times().par_iter())
        .zip(vel.par_iter().zip(eta.par_iter()))
        .map(|((y, &t), (v, e))| {
            let jac = flow::linearized_flow(h, y, t, 1.0, spec, None)?;
            let xh = hamiltonian_vector_field(h, t, y)?;
            let eta_bar = flow::apply(&jac, e);
            let drift = flow::apply(&jac, &v.sub(&xh));
            Ok(dlambda_eval(y, &eta_bar, &drift))
        })
        .collect::<Result<Vec<f64>>>()?;
    let g0 = conformal_exponent(h, FlowMap::PsiT, 1.0, path.first(), spec)?;
    let boundary = lambda_eval(path.last(), &eta[eta.len() - 1]) - g0.exp() * lambda_eval(path.first(), &eta[0]);
    Ok(FirstVariation {
        fd,
        formula: trapezoid(&integrand, path.step()) + boundary,
    })
}

/// Classical action `int (p.q' - Hbar(t, q, p)) dt` of the `(q, p)`
/// projection; `Hbar` is evaluated at `z = 0`.
pub fn classical_action(hbar: &HamiltonianExpr, path: &Path) -> Result<f64> {
    check_dim(hbar, path)?;
    let vel = path.velocities();
    let mut ev = hbar.evaluator();
    let integrand = path
        .points()
        .iter()
        .zip(&vel)
        .zip(path.times())
        .map(|((y, v), &t)| {
            let projected = ContactPoint::new(y.q.clone(), y.p.clone(), 0.0);
            let pq: f64 = y.p.iter().zip(&v.dq).map(|(a, b)| a * b).sum();
            Ok(pq - ev.value(t, &projected)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(trapezoid(&integrand, path.step()))
}
