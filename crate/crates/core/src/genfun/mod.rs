//! Generating functions from broken Hamiltonian-translated horizontal
//! trajectories over the flat base `R^n`.
//!
//! A fiber point `e = (q0, X_1, P_1, .., X_{N-1}, P_{N-1})` determines a
//! broken path: starting at `(q0, 0, 0)` the contact flow runs over
//! `[t_{k-1}, t_k]` to `y_k^-`, and then jumps horizontally to
//!
//! ```text
//! y_k^+ = (q_k^- + X~_k, P~_k, z_k^- + <P~_k, X~_k>),
//! ```
//!
//! where `X~ = rho(|X|) X` and `P~ = P / rho(|X|)`. The generating function
//! is `S(e) = sum <P_k, X_k> + sum (z_k^- - z_{k-1}^+)`, which telescopes to
//! `z_N^-`.

mod critical;
mod gradient;
mod probes;

use serde::{Deserialize, Serialize};

use crate::action::Path;
use crate::contact::ContactPoint;
use crate::error::{Error, Result};
use crate::flow::{integrate, FlowSpec, Integrator, Trajectory};
use crate::hamlang::HamiltonianExpr;

pub use critical::{
    critical_solve, critical_solve_with, generation_check, generation_check_against, iota_s,
    CriticalOptions, CriticalPoint, CriticalResidual, GenerationPoint, GenerationReport,
};
pub use gradient::{
    coordinate_jacobian, dk_deviation, dk_matrix, gradient_fd, mixed_coordinates,
    vertical_gradient_analytic, CoordinateJacobian, MixedGradient,
};
pub use probes::{
    almost_qi_probe, quadratic_probe, symplectic_reduction_check, QiProbeReport, ReductionPoint,
    SymplecticReport,
};

/// Uniform partition `t_k = k / N` of `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    n: usize,
}

impl Partition {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("partition needs N >= 2, got {n}")));
        }
        Ok(Partition { n })
    }

    pub fn segments(&self) -> usize {
        self.n
    }

    /// Number of jumps, `N - 1`.
    pub fn jumps(&self) -> usize {
        self.n - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.n as f64
    }
}

/// Parameters of the fiber cutoff `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffParams {
    pub delta: f64,
    pub eps0: f64,
}

impl Default for CutoffParams {
    fn default() -> Self {
        CutoffParams {
            delta: 0.2,
            eps0: 0.5,
        }
    }
}

impl CutoffParams {
    pub fn new(delta: f64, eps0: f64) -> Result<Self> {
        let c = CutoffParams { delta, eps0 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < self.eps0 && self.eps0.is_finite()) {
            return Err(Error::invalid(format!(
                "cutoff needs 0 < delta < eps0, got delta = {}, eps0 = {}",
                self.delta, self.eps0
            )));
        }
        Ok(())
    }

    /// `m(r) = r rho(r)`: the identity up to `delta`, then
    /// `delta + (eps0 - delta) u / sqrt(1 + u^2)` with
    /// `u = (r - delta) / (eps0 - delta)`.
    pub fn profile(&self, r: f64) -> f64 {
        if r <= self.delta {
            return r;
        }
        let a = self.eps0 - self.delta;
        let u = (r - self.delta) / a;
        self.delta + a * u / (1.0 + u * u).sqrt()
    }

    pub fn profile_derivative(&self, r: f64) -> f64 {
        if r <= self.delta {
            return 1.0;
        }
        let u = (r - self.delta) / (self.eps0 - self.delta);
        (1.0 + u * u).powf(-1.5)
    }
}

pub fn rho(r: f64, c: &CutoffParams) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::invalid(format!("rho needs r >= 0, got {r}")));
    }
    if r <= c.delta {
        return Ok(1.0);
    }
    Ok(c.profile(r) / r)
}

/// Fiber coordinates `(q0, X, P)`; `x` and `p` hold `N - 1` vectors of
/// length `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberPoint {
    pub q0: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
}

impl FiberPoint {
    /// `(q0, 0, 0)`.
    pub fn zero(q0: &[f64], part: &Partition) -> Self {
        let n = q0.len();
        FiberPoint {
            q0: q0.to_vec(),
            x: vec![vec![0.0; n]; part.jumps()],
            p: vec![vec![0.0; n]; part.jumps()],
        }
    }

    pub fn dim(&self) -> usize {
        self.q0.len()
    }

    pub fn validate(&self, dim: usize, part: &Partition) -> Result<()> {
        if self.q0.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.q0.len(),
            });
        }
        if self.x.len() != part.jumps() || self.p.len() != part.jumps() {
            return Err(Error::DimensionMismatch {
                expected: part.jumps(),
                found: self.x.len().min(self.p.len()),
            });
        }
        if let Some(v) = self.x.iter().chain(&self.p).find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        if self.to_raw().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("fiber point is not finite"));
        }
        Ok(())
    }

    /// Raw coordinates `[q0, X_1, P_1, X_2, P_2, ..]`.
    pub fn to_raw(&self) -> Vec<f64> {
        let mut v = self.q0.clone();
        for (x, p) in self.x.iter().zip(&self.p) {
            v.extend_from_slice(x);
            v.extend_from_slice(p);
        }
        v
    }

    pub fn from_raw(raw: &[f64], dim: usize, part: &Partition) -> Result<Self> {
        let expected = dim * (1 + 2 * part.jumps());
        if raw.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: raw.len(),
            });
        }
        let mut e = FiberPoint::zero(&raw[..dim], part);
        for k in 0..part.jumps() {
            let base = dim + 2 * dim * k;
            e.x[k].copy_from_slice(&raw[base..base + dim]);
            e.p[k].copy_from_slice(&raw[base + dim..base + 2 * dim]);
        }
        Ok(e)
    }

    /// Fiber part `[X_1, P_1, ..]` of the raw coordinates.
    pub fn fiber_raw(&self) -> Vec<f64> {
        self.to_raw()[self.dim()..].to_vec()
    }

    pub fn with_fiber_raw(&self, fiber: &[f64]) -> Result<Self> {
        let part = Partition::new(self.x.len() + 1)?;
        let mut raw = self.q0.clone();
        raw.extend_from_slice(fiber);
        Self::from_raw(&raw, self.dim(), &part)
    }

    /// `sum_k <P_k, X_k>`.
    pub fn pairing(&self) -> f64 {
        self.x.iter().zip(&self.p).map(|(x, p)| dot(x, p)).sum()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// One vector per jump.
pub type JumpVectors = Vec<Vec<f64>>;

/// `(X~_k, P~_k)` for every jump.
pub fn tilde_vars(e: &FiberPoint, c: &CutoffParams) -> Result<(JumpVectors, JumpVectors)> {
    let mut xt = Vec::with_capacity(e.x.len());
    let mut pt = Vec::with_capacity(e.p.len());
    for (x, p) in e.x.iter().zip(&e.p) {
        let r = rho(norm(x), c)?;
        xt.push(x.iter().map(|v| r * v).collect());
        pt.push(p.iter().map(|v| v / r).collect());
    }
    Ok((xt, pt))
}

/// Junction data of a broken trajectory, without the sampled segments.
#[derive(Debug, Clone)]
pub(crate) struct Junctions {
    /// `y_k^-` for `k = 1..=N`, flat.
    pub minus: Vec<Vec<f64>>,
    /// `y_k^+` for `k = 0..N`, flat; `y_0^+ = (q0, 0, 0)`.
    pub plus: Vec<Vec<f64>>,
    /// `g_{k(k+1)}` for `k = 1..N`.
    pub increments: Vec<f64>,
    pub x_tilde: Vec<Vec<f64>>,
    pub p_tilde: Vec<Vec<f64>>,
}

impl Junctions {
    pub fn n(&self) -> usize {
        self.x_tilde.first().map_or((self.plus[0].len() - 1) / 2, Vec::len)
    }

    pub fn q_minus(&self, k: usize) -> &[f64] {
        let n = self.n();
        &self.minus[k - 1][..n]
    }

    pub fn p_minus(&self, k: usize) -> &[f64] {
        let n = self.n();
        &self.minus[k - 1][n..2 * n]
    }

    pub fn z_final(&self) -> f64 {
        *self.minus.last().and_then(|y| y.last()).expect("nonempty")
    }

    /// `g_k = sum_{j >= k} g_{j(j+1)}` for `k = 1..N`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.increments.len()];
        let mut acc = 0.0;
        for k in (0..self.increments.len()).rev() {
            acc += self.increments[k];
            out[k] = acc;
        }
        out
    }

    /// `sum_k (z_k^- - z_{k-1}^+)`.
    pub fn action_part(&self) -> f64 {
        let zi = self.plus[0].len() - 1;
        self.minus
            .iter()
            .zip(&self.plus)
            .map(|(m, p)| m[zi] - p[zi])
            .sum()
    }
}

pub(crate) fn check_inputs(h: &HamiltonianExpr, e: &FiberPoint, part: &Partition, c: &CutoffParams, spec: &FlowSpec) -> Result<()> {
    spec.validate()?;
    c.validate()?;
    e.validate(h.dim(), part)
}

/// Evaluates only the junction points of the broken trajectory.
pub(crate) fn junctions(
    integ: &mut Integrator<'_>,
    e: &FiberPoint,
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
) -> Result<Junctions> {
    let n = e.dim();
    let (x_tilde, p_tilde) = tilde_vars(e, c)?;
    let mut y = ContactPoint::on_zero_section(&e.q0).to_flat();
    let mut minus = Vec::with_capacity(part.segments());
    let mut plus = Vec::with_capacity(part.segments());
    let mut increments = Vec::with_capacity(part.jumps());
    for k in 1..=part.segments() {
        let (end, g) = integ.transition(part.time(k - 1), part.time(k), &y, spec)?;
        if k > 1 {
            increments.push(g);
        }
        plus.push(y);
        if k < part.segments() {
            let (xt, pt) = (&x_tilde[k - 1], &p_tilde[k - 1]);
            let mut next = Vec::with_capacity(2 * n + 1);
            next.extend(end[..n].iter().zip(xt).map(|(q, x)| q + x));
            next.extend_from_slice(pt);
            next.push(end[2 * n] + dot(pt, xt));
            y = next;
        } else {
            y = Vec::new();
        }
        minus.push(end);
    }
    Ok(Junctions {
        minus,
        plus,
        increments,
        x_tilde,
        p_tilde,
    })
}

pub(crate) fn eval_junctions(
    h: &HamiltonianExpr,
    e: &FiberPoint,
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
) -> Result<Junctions> {
    check_inputs(h, e, part, c, spec)?;
    junctions(&mut Integrator::new(h), e, part, c, spec)
}

/// Samples per horizontal jump path.
const JUMP_SAMPLES: usize = 16;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BrokenTrajectory {
    /// `gamma_k`, `k = 1..=N`.
    pub segments: Vec<Trajectory>,
    /// `y_k^-`, `k = 1..=N`.
    pub y_minus: Vec<ContactPoint>,
    /// `y_k^+`, `k = 0..N`.
    pub y_plus: Vec<ContactPoint>,
    /// `mu_k`, `k = 1..N`.
    pub jumps: Vec<Path>,
    pub x_tilde: Vec<Vec<f64>>,
    pub p_tilde: Vec<Vec<f64>>,
    /// `g_{k(k+1)}`, `k = 1..N`.
    pub increments: Vec<f64>,
    /// `g_k`, `k = 1..N`.
    pub cumulative: Vec<f64>,
}

impl BrokenTrajectory {
    /// `|y_k^+ - y_k^-|` for `k = 1..N`.
    pub fn junction_gaps(&self) -> Vec<f64> {
        self.y_plus[1..]
            .iter()
            .zip(&self.y_minus)
            .map(|(a, b)| a.distance(b))
            .collect()
    }

    pub fn endpoint(&self) -> &ContactPoint {
        self.y_minus.last().expect("nonempty")
    }
}

/// Builds the full broken trajectory, including sampled segments and the
/// horizontal jump paths `mu_k(s) = (q_k^- + s X~_k, P~_k, z_k^- + s <P~_k, X~_k>)`.
///
/// The momentum jump from `p_k^-` to `P~_k` happens inside the fiber at the
/// start of `mu_k`, so `mu_k` itself is tangent to `ker lambda`.
pub fn build_broken_trajectory(
    h: &HamiltonianExpr,
    e: &FiberPoint,
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
) -> Result<BrokenTrajectory> {
    let j = eval_junctions(h, e, part, c, spec)?;
    let mut segments = Vec::with_capacity(part.segments());
    for k in 1..=part.segments() {
        let start = ContactPoint::from_flat(&j.plus[k - 1]);
        segments.push(integrate(h, &start, part.time(k - 1), part.time(k), spec)?);
    }
    let y_minus: Vec<ContactPoint> = j.minus.iter().map(|y| ContactPoint::from_flat(y)).collect();
    let jumps = (0..part.jumps())
        .map(|k| {
            let (ym, xt, pt) = (&y_minus[k], &j.x_tilde[k], &j.p_tilde[k]);
            let pairing = dot(pt, xt);
            Path::from_fn(JUMP_SAMPLES, |s| {
                ContactPoint::new(
                    ym.q.iter().zip(xt).map(|(q, x)| q + s * x).collect(),
                    pt.clone(),
                    ym.z + s * pairing,
                )
            })
        })
        .collect::<Result<_>>()?;
    Ok(BrokenTrajectory {
        segments,
        y_plus: j.plus.iter().map(|y| ContactPoint::from_flat(y)).collect(),
        y_minus,
        jumps,
        cumulative: j.cumulative(),
        increments: j.increments,
        x_tilde: j.x_tilde,
        p_tilde: j.p_tilde,
    })
}

/// `S(e)` computed both as the defining sum and as `z_N^-`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SEvaluation {
    pub value: f64,
    pub sum_formula: f64,
    /// `|sum_formula - value|` over `max(1, |z_N^-|, sum |<P_k, X_k>| + sum |z_k^-|)`.
    pub rel_residual: f64,
}

/// Tolerance of the telescoping identity `S = z_N^-`.
pub const TELESCOPING_TOL: f64 = 1e-12;

pub(crate) fn s_from_junctions(e: &FiberPoint, j: &Junctions) -> Result<SEvaluation> {
    let zi = j.plus[0].len() - 1;
    let pairings: Vec<f64> = e.x.iter().zip(&e.p).map(|(x, p)| dot(x, p)).collect();
    let value = j.z_final();
    let sum_formula = pairings.iter().sum::<f64>() + j.action_part();
    let scale = 1f64
        .max(value.abs())
        .max(pairings.iter().map(|v| v.abs()).sum::<f64>() + j.minus.iter().map(|y| y[zi].abs()).sum::<f64>());
    let rel_residual = (sum_formula - value).abs() / scale;
    if !(rel_residual <= TELESCOPING_TOL) {
        return Err(Error::Identity {
            name: "telescoping",
            residual: rel_residual,
            tolerance: TELESCOPING_TOL,
        });
    }
    Ok(SEvaluation {
        value,
        sum_formula,
        rel_residual,
    })
}

pub fn s_eval_detailed(
    h: &HamiltonianExpr,
    e: &FiberPoint,
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
) -> Result<SEvaluation> {
    let j = eval_junctions(h, e, part, c, spec)?;
    s_from_junctions(e, &j)
}

pub fn s_eval(
    h: &HamiltonianExpr,
    e: &FiberPoint,
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
) -> Result<f64> {
    Ok(s_eval_detailed(h, e, part, c, spec)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::carnot_residual;
    use crate::contact::lambda_eval;

    fn parse(src: &str) -> HamiltonianExpr {
        HamiltonianExpr::parse(src, 1).unwrap()
    }

    fn smooth_point(q0: f64, part: &Partition) -> FiberPoint {
        let mut e = FiberPoint::zero(&[q0], part);
        for k in 1..part.segments() {
            e.p[k - 1][0] = q0.sin() * part.time(k);
        }
        e
    }

    #[test]
    fn partition_and_cutoff_validation() {
        assert!(Partition::new(1).is_err());
        assert_eq!(Partition::new(2).unwrap().jumps(), 1);
        assert!(CutoffParams::new(0.5, 0.5).is_err());
        assert!(CutoffParams::new(0.0, 0.5).is_err());
        assert!(rho(-1.0, &CutoffParams::default()).is_err());
    }

    #[test]
    fn rho_examples() {
        let c = CutoffParams::default();
        assert_eq!(rho(c.delta / 2.0, &c).unwrap(), 1.0);
        assert_eq!(rho(0.0, &c).unwrap(), 1.0);
        let mut prev = -1.0;
        for i in 0..=600 {
            let r = if i == 0 { 0.0 } else { 10f64.powf(-3.0 + 6.0 * i as f64 / 600.0) };
            let m = c.profile(r);
            assert!(m > prev && m < c.eps0, "r = {r}");
            assert!(c.profile_derivative(r) > 0.0);
            prev = m;
        }
        assert!(c.eps0 - c.profile(1e3) < 1e-6);
    }

    #[test]
    fn tilde_vars_preserve_pairing() {
        let c = CutoffParams::default();
        let part = Partition::new(4).unwrap();
        let mut e = FiberPoint::zero(&[0.0, 1.0], &part);
        e.x = vec![vec![0.1, 0.05], vec![3.0, -4.0], vec![1e4, 2.0]];
        e.p = vec![vec![1.0, 2.0], vec![0.5, 0.25], vec![-3.0, 7.0]];
        let (xt, pt) = tilde_vars(&e, &c).unwrap();
        assert_eq!(xt[0], e.x[0]);
        assert_eq!(pt[0], e.p[0]);
        for k in 0..3 {
            let a = dot(&xt[k], &pt[k]);
            let b = dot(&e.x[k], &e.p[k]);
            assert!((a - b).abs() <= 1e-14 * (1.0 + b.abs()));
            assert!(norm(&xt[k]) < c.eps0);
        }
    }

    #[test]
    fn raw_layout_round_trips() {
        let part = Partition::new(3).unwrap();
        let raw: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let e = FiberPoint::from_raw(&raw, 2, &part).unwrap();
        assert_eq!(e.q0, vec![0.0, 1.0]);
        assert_eq!(e.x[0], vec![2.0, 3.0]);
        assert_eq!(e.p[0], vec![4.0, 5.0]);
        assert_eq!(e.to_raw(), raw);
        assert!(FiberPoint::from_raw(&raw[..9], 2, &part).is_err());
    }

    #[test]
    fn zero_x_jumps_only_move_momentum() {
        let spec = FlowSpec::default();
        let part = Partition::new(8).unwrap();
        let h = parse("p1^2/2 + cos(q1)");
        let mut e = FiberPoint::zero(&[0.4], &part);
        for (k, p) in e.p.iter_mut().enumerate() {
            p[0] = 0.3 - 0.1 * k as f64;
        }
        let b = build_broken_trajectory(&h, &e, &part, &CutoffParams::default(), &spec).unwrap();
        for k in 0..part.jumps() {
            let (plus, minus) = (&b.y_plus[k + 1], &b.y_minus[k]);
            assert_eq!(plus.q, minus.q);
            assert_eq!(plus.z, minus.z);
            assert_eq!(plus.p[0] - minus.p[0], e.p[k][0] - minus.p[0]);
        }
    }

    #[test]
    fn z_free_hamiltonian_has_zero_increments() {
        let spec = FlowSpec::default();
        let part = Partition::new(5).unwrap();
        let h = parse("p1^2/2 + cos(q1)");
        let mut e = FiberPoint::zero(&[0.1], &part);
        e.x[1][0] = 0.3;
        e.p[2][0] = -1.0;
        let b = build_broken_trajectory(&h, &e, &part, &CutoffParams::default(), &spec).unwrap();
        assert!(b.increments.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn smooth_trajectory_has_closed_junctions() {
        let spec = FlowSpec::default();
        let part = Partition::new(16).unwrap();
        let h = parse("cos(q1)");
        let e = smooth_point(0.7, &part);
        let b = build_broken_trajectory(&h, &e, &part, &CutoffParams::default(), &spec).unwrap();
        assert!(b.junction_gaps().iter().all(|g| *g <= 1e-8));
        let s = s_eval(&h, &e, &part, &CutoffParams::default(), &spec).unwrap();
        assert!((s + 0.7f64.cos()).abs() <= 1e-8);
    }

    #[test]
    fn segments_are_carnot_and_jumps_horizontal() {
        let spec = FlowSpec::default();
        let part = Partition::new(8).unwrap();
        let h = parse("p1^2/2 + cos(q1) + 0.5*z");
        let mut e = FiberPoint::zero(&[-0.2], &part);
        for k in 0..part.jumps() {
            e.x[k][0] = 0.05 * k as f64 - 0.1;
            e.p[k][0] = 0.4 - 0.07 * k as f64;
        }
        let b = build_broken_trajectory(&h, &e, &part, &CutoffParams::default(), &spec).unwrap();
        for seg in &b.segments {
            let path = Path::from_trajectory(seg).unwrap();
            assert!(carnot_residual(&h, &path).unwrap() <= 1e-6);
        }
        for mu in &b.jumps {
            let vel = mu.velocities();
            for (y, v) in mu.points().iter().zip(&vel) {
                assert!(lambda_eval(y, v).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn reeb_plateau_value() {
        let spec = FlowSpec::default();
        let part = Partition::new(4).unwrap();
        let h = parse("-1").compactify(10.0, 1.0).unwrap();
        let e = FiberPoint::zero(&[0.5], &part);
        let s = s_eval(&h, &e, &part, &CutoffParams::default(), &spec).unwrap();
        assert!((s - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn telescoping_residual_is_reported() {
        let spec = FlowSpec::default();
        let part = Partition::new(6).unwrap();
        let h = parse("p1^2/2 + cos(q1) + 0.5*z");
        let mut e = FiberPoint::zero(&[1.0], &part);
        e.x[2][0] = 2.0;
        e.p[2][0] = -3.0;
        let s = s_eval_detailed(&h, &e, &part, &CutoffParams::default(), &spec).unwrap();
        assert!(s.rel_residual <= TELESCOPING_TOL);
    }
}
