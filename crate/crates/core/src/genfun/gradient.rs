//! Vertical gradient of `S`, its finite-difference oracle, and the change
//! to the mixed coordinates `((q_k^-, P~_k)_{k<N}, q_N^-)`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_inputs, eval_junctions, junctions, s_from_junctions, CutoffParams, FiberPoint, Partition};
use crate::error::{Error, Result};
use crate::flow::{FlowSpec, Integrator};
use crate::hamlang::HamiltonianExpr;

/// Partials of `S` in mixed coordinates:
///
/// ```text
/// dS/dP~_k  =  e^{g_k} X~_k,
/// dS/dq_k^- = -e^{g_k} (P~_k - p_k^-),   k = 1..N-1,
/// dS/dq_N^- =  p_N^-.
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedGradient {
    pub d_q_minus: Vec<Vec<f64>>,
    pub d_p_tilde: Vec<Vec<f64>>,
    pub d_q_final: Vec<f64>,
    /// `e^{g_k}`, `k = 1..N`.
    pub weights: Vec<f64>,
}

impl MixedGradient {
    /// Flattened in the order `[q_1^-, P~_1, q_2^-, P~_2, .., q_N^-]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (dq, dp) in self.d_q_minus.iter().zip(&self.d_p_tilde) {
            v.extend_from_slice(dq);
            v.extend_from_slice(dp);
        }
        v.extend_from_slice(&self.d_q_final);
        v
    }

    /// Largest fiber partial (everything except `dS/dq_N^-`).
    pub fn fiber_sup(&self) -> f64 {
        self.d_q_minus
            .iter()
            .chain(&self.d_p_tilde)
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn vertical_gradient_analytic(
    h: &HamiltonianExpr,
    e: &FiberPoint,
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
) -> Result<MixedGradient> {
    let j = eval_junctions(h, e, part, c, spec)?;
    let weights: Vec<f64> = j.cumulative().iter().map(|g| g.exp()).collect();
    let mut d_q_minus = Vec::with_capacity(part.jumps());
    let mut d_p_tilde = Vec::with_capacity(part.jumps());
    for k in 1..part.segments() {
        let w = weights[k - 1];
        d_p_tilde.push(j.x_tilde[k - 1].iter().map(|x| w * x).collect());
        d_q_minus.push(
            j.p_tilde[k - 1]
                .iter()
                .zip(j.p_minus(k))
                .map(|(pt, pm)| -w * (pt - pm))
                .collect(),
        );
    }
    Ok(MixedGradient {
        d_q_minus,
        d_p_tilde,
        d_q_final: j.p_minus(part.segments()).to_vec(),
        weights,
    })
}

/// `[q_1^-, P~_1, q_2^-, P~_2, .., q_N^-]` at `e`.
pub fn mixed_coordinates(
    h: &HamiltonianExpr,
    e: &FiberPoint,
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
) -> Result<Vec<f64>> {
    check_inputs(h, e, part, c, spec)?;
    mixed_with(&mut Integrator::new(h), e, part, c, spec)
}

fn mixed_with(
    integ: &mut Integrator<'_>,
    e: &FiberPoint,
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
) -> Result<Vec<f64>> {
    let j = junctions(integ, e, part, c, spec)?;
    let mut v = Vec::new();
    for k in 1..part.segments() {
        v.extend_from_slice(j.q_minus(k));
        v.extend_from_slice(&j.p_tilde[k - 1]);
    }
    v.extend_from_slice(j.q_minus(part.segments()));
    Ok(v)
}

/// Central differences of `f` at `raw`, one column per raw coordinate.
fn fd_columns<F>(raw: &[f64], step: f64, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    (0..raw.len())
        .into_par_iter()
        .map(|i| {
            let mut x = raw.to_vec();
            x[i] = raw[i] + step;
            let plus = f(&x)?;
            x[i] = raw[i] - step;
            let minus = f(&x)?;
            Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * step)).collect())
        })
        .collect()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Central-difference gradient of `S` in the raw coordinates
/// `[q0, X_1, P_1, ..]`; the default step is `1e-5 (1 + |e|_inf)`.
pub fn gradient_fd(
    h: &HamiltonianExpr,
    e: &FiberPoint,
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
    step: Option<f64>,
) -> Result<Vec<f64>> {
    check_inputs(h, e, part, c, spec)?;
    let raw = e.to_raw();
    let step = step.unwrap_or(1e-5 * (1.0 + sup(&raw)));
    if !(step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let n = e.dim();
    let cols = fd_columns(&raw, step, |x| {
        let point = FiberPoint::from_raw(x, n, part)?;
        let j = junctions(&mut Integrator::new(h), &point, part, c, spec)?;
        Ok(vec![s_from_junctions(&point, &j)?.value])
    })?;
    Ok(cols.into_iter().map(|c| c[0]).collect())
}

/// Finite-difference Jacobian of `(q0, X, P) -> mixed coordinates`, with
/// rows and columns grouped into the blocks `[q_1^-]`, `[P~_j, q_{j+1}^-]`
/// and `[q0]`, `[X_j, P_j]`. In this grouping the map is block
/// lower-triangular.
#[derive(Debug, Clone)]
pub struct CoordinateJacobian {
    pub matrix: DMatrix<f64>,
    pub determinant: f64,
    pub condition_number: f64,
    /// Largest entry above the block diagonal over the largest entry of
    /// the diagonal blocks.
    pub structure_violation: f64,
}

impl CoordinateJacobian {
    /// Raw gradient `J^T dS` from the mixed one.
    pub fn pull_back(&self, mixed: &MixedGradient) -> Vec<f64> {
        let g = nalgebra::DVector::from_vec(mixed.to_vec());
        (self.matrix.transpose() * g).iter().copied().collect()
    }

    pub fn is_invertible(&self) -> bool {
        self.condition_number.is_finite() && self.determinant != 0.0
    }
}

fn block_of(i: usize, n: usize) -> usize {
    if i < n {
        0
    } else {
        1 + (i - n) / (2 * n)
    }
}

pub fn coordinate_jacobian(
    h: &HamiltonianExpr,
    e: &FiberPoint,
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
    step: Option<f64>,
) -> Result<CoordinateJacobian> {
    check_inputs(h, e, part, c, spec)?;
    let raw = e.to_raw();
    let step = step.unwrap_or(1e-6 * (1.0 + sup(&raw)));
    if !(step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let n = e.dim();
    let cols = fd_columns(&raw, step, |x| {
        let point = FiberPoint::from_raw(x, n, part)?;
        mixed_with(&mut Integrator::new(h), &point, part, c, spec)
    })?;
    let d = raw.len();
    let matrix = DMatrix::from_fn(d, d, |i, j| cols[j][i]);
    let (mut upper, mut diag) = (0.0f64, 0.0f64);
    for i in 0..d {
        for j in 0..d {
            let (bi, bj) = (block_of(i, n), block_of(j, n));
            let v = matrix[(i, j)].abs();
            if bj > bi {
                upper = upper.max(v);
            } else if bj == bi {
                diag = diag.max(v);
            }
        }
    }
    let sv = matrix.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    Ok(CoordinateJacobian {
        determinant: matrix.determinant(),
        condition_number: if smin > 0.0 { smax / smin } else { f64::INFINITY },
        structure_violation: if diag > 0.0 { upper / diag } else { f64::INFINITY },
        matrix,
    })
}

/// `D^k = D_1(q o psi_{k+1}) + d_3(q o psi_{k+1}) <P~_k, .>` at `y_k^+`,
/// where `psi_{k+1}` is the flow over `[t_k, t_{k+1}]`.
pub fn dk_matrix(
    h: &HamiltonianExpr,
    e: &FiberPoint,
    part: &Partition,
    c: &CutoffParams,
    k: usize,
    spec: &FlowSpec,
    step: Option<f64>,
) -> Result<DMatrix<f64>> {
    if k == 0 || k >= part.segments() {
        return Err(Error::invalid(format!(
            "D^k needs 1 <= k <= {}, got {k}",
            part.jumps()
        )));
    }
    let j = eval_junctions(h, e, part, c, spec)?;
    let start = &j.plus[k];
    let n = e.dim();
    let step = step.unwrap_or(1e-6 * (1.0 + start.iter().map(|v| v * v).sum::<f64>().sqrt()));
    let (t0, t1) = (part.time(k), part.time(k + 1));
    let mut integ = Integrator::new(h);
    let mut partial = |idx: usize| -> Result<Vec<f64>> {
        let mut y = start.clone();
        y[idx] += step;
        let (plus, _) = integ.transition(t0, t1, &y, spec)?;
        y[idx] = start[idx] - step;
        let (minus, _) = integ.transition(t0, t1, &y, spec)?;
        Ok((0..n).map(|i| (plus[i] - minus[i]) / (2.0 * step)).collect())
    };
    let d1: Vec<Vec<f64>> = (0..n).map(&mut partial).collect::<Result<_>>()?;
    let d3 = partial(2 * n)?;
    let pt = &j.p_tilde[k - 1];
    Ok(DMatrix::from_fn(n, n, |r, col| d1[col][r] + d3[r] * pt[col]))
}

/// `max_k |D^k - I|_2` over `k = 1..N-1`.
pub fn dk_deviation(
    h: &HamiltonianExpr,
    e: &FiberPoint,
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
    step: Option<f64>,
) -> Result<f64> {
    let n = e.dim();
    (1..part.segments())
        .into_par_iter()
        .map(|k| {
            let dk = dk_matrix(h, e, part, c, k, spec, step)?;
            let dev = dk - DMatrix::<f64>::identity(n, n);
            Ok(dev.svd(false, false).singular_values.max())
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}
