//! The standard contact structure on `J^1 R^n` with coordinates `(q, p, z)`
//! and contact form `lambda = dz - p.dq`.
//!
//! Sign conventions: `d lambda = dq ^ dp`, so `d lambda(d/dq_i, d/dp_i) = +1`.
//! The contact Hamiltonian vector field is determined by `lambda(X_H) = -H`
//! together with `X_H _| d lambda = dH - R[H] lambda`. Writing
//! `X = (a, b, c)` and pairing with `d/dp`, `d/dq` and `d/dz` gives
//!
//! ```text
//! a = H_p,   b = -H_q - p H_z,   c = p.H_p - H.
//! ```
//!
//! The constant Hamiltonian `H = -1` yields the Reeb field `d/dz`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamlang::HamiltonianExpr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub z: f64,
}

impl ContactPoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>, z: f64) -> Self {
        ContactPoint { q, p, z }
    }

    /// The point `(q, 0, 0)` of the zero section.
    pub fn on_zero_section(q: &[f64]) -> Self {
        ContactPoint::new(q.to_vec(), vec![0.0; q.len()], 0.0)
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.z.is_finite() && self.q.iter().chain(&self.p).all(|x| x.is_finite())
    }

    /// Flat coordinates `[q.., p.., z]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.q.len() + 1);
        v.extend_from_slice(&self.q);
        v.extend_from_slice(&self.p);
        v.push(self.z);
        v
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        let n = (flat.len() - 1) / 2;
        ContactPoint::new(flat[..n].to_vec(), flat[n..2 * n].to_vec(), flat[2 * n])
    }

    pub fn norm(&self) -> f64 {
        self.to_flat().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Euclidean distance in `(q, p, z)`.
    pub fn distance(&self, other: &ContactPoint) -> f64 {
        self.to_flat()
            .iter()
            .zip(other.to_flat())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
    pub dz: f64,
}

impl TangentVector {
    pub fn new(dq: Vec<f64>, dp: Vec<f64>, dz: f64) -> Self {
        TangentVector { dq, dp, dz }
    }

    pub fn zero(n: usize) -> Self {
        TangentVector::new(vec![0.0; n], vec![0.0; n], 0.0)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.dq.len() + 1);
        v.extend_from_slice(&self.dq);
        v.extend_from_slice(&self.dp);
        v.push(self.dz);
        v
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        let n = (flat.len() - 1) / 2;
        TangentVector::new(flat[..n].to_vec(), flat[n..2 * n].to_vec(), flat[2 * n])
    }

    pub fn scaled(&self, s: f64) -> Self {
        TangentVector::new(
            self.dq.iter().map(|x| s * x).collect(),
            self.dp.iter().map(|x| s * x).collect(),
            s * self.dz,
        )
    }

    pub fn sub(&self, other: &TangentVector) -> Self {
        TangentVector::new(
            self.dq.iter().zip(&other.dq).map(|(a, b)| a - b).collect(),
            self.dp.iter().zip(&other.dp).map(|(a, b)| a - b).collect(),
            self.dz - other.dz,
        )
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `lambda_y(v) = v.dz - p.v.dq`.
pub fn lambda_eval(y: &ContactPoint, v: &TangentVector) -> f64 {
    v.dz - dot(&y.p, &v.dq)
}

/// `d lambda(v, w) = sum_i (v.dq_i w.dp_i - v.dp_i w.dq_i)`; independent of
/// the base point.
pub fn dlambda_eval(_y: &ContactPoint, v: &TangentVector, w: &TangentVector) -> f64 {
    dot(&v.dq, &w.dp) - dot(&v.dp, &w.dq)
}

pub fn reeb(y: &ContactPoint) -> TangentVector {
    let mut r = TangentVector::zero(y.dim());
    r.dz = 1.0;
    r
}

pub fn hamiltonian_vector_field(
    h: &HamiltonianExpr,
    t: f64,
    y: &ContactPoint,
) -> Result<TangentVector> {
    if y.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: y.dim(),
        });
    }
    let jet = h.eval_with_partials(t, y)?;
    let dq = jet.d_p.clone();
    let dp = jet
        .d_q
        .iter()
        .zip(&y.p)
        .map(|(hq, p)| -hq - p * jet.d_z)
        .collect();
    let dz = dot(&y.p, &jet.d_p) - jet.value;
    Ok(TangentVector::new(dq, dp, dz))
}

/// Flat-coordinate version used by the integrator: writes
/// `[X_H (2n+1 entries), -H_z]` into `out` from the jet `[H, H_q, H_p, H_z]`.
pub(crate) fn vector_field_from_jet(state: &[f64], jet: &[f64], out: &mut [f64]) {
    let n = (state.len() - 1) / 2;
    let (h, hq, hp, hz) = (jet[0], &jet[1..1 + n], &jet[1 + n..1 + 2 * n], jet[1 + 2 * n]);
    let p = &state[n..2 * n];
    let mut p_hp = 0.0;
    for i in 0..n {
        out[i] = hp[i];
        out[n + i] = -hq[i] - p[i] * hz;
        p_hp += p[i] * hp[i];
    }
    out[2 * n] = p_hp - h;
    out[2 * n + 1] = -hz;
}

/// Projection onto `xi = ker lambda` along the Reeb direction.
pub fn xi_projection(y: &ContactPoint, v: &TangentVector) -> TangentVector {
    let l = lambda_eval(y, v);
    let mut out = v.clone();
    out.dz -= l;
    out
}
