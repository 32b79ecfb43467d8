//! Time integration of contact Hamilton's equations.
//!
//! The state is augmented with the conformal exponent `g`, which evolves by
//! `g' = -H_z` along the trajectory, so every run also yields the exponent of
//! the transition map it realizes (`psi^* lambda = e^g lambda`).
//!
//! Maps of the isotopy are realized as transition maps of the
//! non-autonomous ODE: `psi^t` runs `0 -> t`, `phi^t = psi^t (psi^1)^-1`
//! runs `1 -> t`, and `(phi^t)^-1 = psi^1 (psi^t)^-1` runs `t -> 1`. The
//! exponents follow from `g_{a o b} = g_a o b + g_b` and
//! `g_{a^-1} = -g_a o a^-1`, which for transition maps reduce to the signed
//! integral of `-H_z` along the run. Every run uses fixed-step classical RK4
//! with `ceil(steps_per_unit_time * |t1 - t0|)` steps.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::contact::{lambda_eval, vector_field_from_jet, ContactPoint, TangentVector};
use crate::error::{Error, Result};
use crate::hamlang::HamiltonianExpr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub steps_per_unit_time: usize,
}

impl Default for FlowSpec {
    fn default() -> Self {
        FlowSpec {
            steps_per_unit_time: 200,
        }
    }
}

impl FlowSpec {
    pub fn new(steps_per_unit_time: usize) -> Result<Self> {
        let spec = FlowSpec {
            steps_per_unit_time,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_per_unit_time < 10 {
            return Err(Error::invalid(format!(
                "steps_per_unit_time must be at least 10, got {}",
                self.steps_per_unit_time
            )));
        }
        Ok(())
    }

    /// Number of RK4 steps used over a time span.
    pub fn step_count(&self, span: f64) -> usize {
        let raw = span.abs() * self.steps_per_unit_time as f64;
        // Guard against `200 * 0.7 = 140.00000000000003`.
        ((raw - 1e-9).ceil() as usize).max(1)
    }
}

/// Samples of one integration run, one per RK4 step boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub y: Vec<ContactPoint>,
    /// Accumulated conformal exponent, `g[0] = 0`.
    pub g: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn endpoint(&self) -> &ContactPoint {
        self.y.last().expect("trajectory has samples")
    }

    pub fn final_exponent(&self) -> f64 {
        *self.g.last().expect("trajectory has samples")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowMap {
    /// `psi_H^t`
    PsiT,
    /// `phi_H^t = psi_H^t (psi_H^1)^-1`
    PhiT,
    /// `(phi_H^t)^-1 = psi_H^1 (psi_H^t)^-1`
    PhiTInverse,
}

/// RK4 stepper over the augmented flat state `[q.., p.., z, g]`.
pub(crate) struct Integrator<'a> {
    h: &'a HamiltonianExpr,
    scratch: Vec<f64>,
    jet: Vec<f64>,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl<'a> Integrator<'a> {
    pub fn new(h: &'a HamiltonianExpr) -> Self {
        let w = 2 * h.dim() + 2;
        Integrator {
            h,
            scratch: Vec::new(),
            jet: vec![0.0; w],
            k1: vec![0.0; w],
            k2: vec![0.0; w],
            k3: vec![0.0; w],
            k4: vec![0.0; w],
            tmp: vec![0.0; w],
        }
    }

    fn rhs(
        h: &HamiltonianExpr,
        scratch: &mut Vec<f64>,
        jet: &mut [f64],
        t: f64,
        x: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        let core = &x[..x.len() - 1];
        h.jet_into(t, core, scratch, jet)?;
        vector_field_from_jet(core, jet, out);
        Ok(())
    }

    fn step(&mut self, t: f64, dt: f64, x: &mut [f64]) -> Result<()> {
        let w = x.len();
        let h = self.h;
        Self::rhs(h, &mut self.scratch, &mut self.jet, t, x, &mut self.k1)?;
        for i in 0..w {
            self.tmp[i] = x[i] + 0.5 * dt * self.k1[i];
        }
        Self::rhs(h, &mut self.scratch, &mut self.jet, t + 0.5 * dt, &self.tmp, &mut self.k2)?;
        for i in 0..w {
            self.tmp[i] = x[i] + 0.5 * dt * self.k2[i];
        }
        Self::rhs(h, &mut self.scratch, &mut self.jet, t + 0.5 * dt, &self.tmp, &mut self.k3)?;
        for i in 0..w {
            self.tmp[i] = x[i] + dt * self.k3[i];
        }
        Self::rhs(h, &mut self.scratch, &mut self.jet, t + dt, &self.tmp, &mut self.k4)?;
        for i in 0..w {
            x[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }

    /// Advances the augmented state from `t0` to `t1` in place, calling
    /// `record` after every step. A zero-length span is the identity.
    pub fn advance(
        &mut self,
        t0: f64,
        t1: f64,
        x: &mut [f64],
        spec: &FlowSpec,
        mut record: impl FnMut(f64, &[f64]),
    ) -> Result<()> {
        if x.len() != 2 * self.h.dim() + 2 {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.h.dim() + 1,
                found: x.len().saturating_sub(1),
            });
        }
        if t0 == t1 {
            return Ok(());
        }
        let steps = spec.step_count(t1 - t0);
        let dt = (t1 - t0) / steps as f64;
        for s in 0..steps {
            let t = t0 + s as f64 * dt;
            self.step(t, dt, x)?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { last_valid_time: t });
            }
            let t_next = if s + 1 == steps { t1 } else { t0 + (s + 1) as f64 * dt };
            record(t_next, x);
        }
        Ok(())
    }

    /// Transition map from `(t0, y)` to time `t1`: endpoint and exponent.
    pub fn transition(&mut self, t0: f64, t1: f64, y: &[f64], spec: &FlowSpec) -> Result<(Vec<f64>, f64)> {
        let mut x = Vec::with_capacity(y.len() + 1);
        x.extend_from_slice(y);
        x.push(0.0);
        self.advance(t0, t1, &mut x, spec, |_, _| {})?;
        let g = x.pop().expect("augmented state");
        Ok((x, g))
    }
}

fn check_point(h: &HamiltonianExpr, y: &ContactPoint) -> Result<()> {
    if y.dim() != h.dim() || y.p.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: y.dim(),
        });
    }
    if !y.is_finite() {
        return Err(Error::invalid("initial point is not finite"));
    }
    Ok(())
}

/// RK4 solution of `y' = X_H(t, y)`, `g' = -H_z`, from `(t0, y0)` to `t1`.
pub fn integrate(
    h: &HamiltonianExpr,
    y0: &ContactPoint,
    t0: f64,
    t1: f64,
    spec: &FlowSpec,
) -> Result<Trajectory> {
    spec.validate()?;
    check_point(h, y0)?;
    if t0 == t1 || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::invalid(format!(
            "integration needs distinct finite endpoints, got {t0} and {t1}"
        )));
    }
    let steps = spec.step_count(t1 - t0);
    let mut traj = Trajectory {
        t: Vec::with_capacity(steps + 1),
        y: Vec::with_capacity(steps + 1),
        g: Vec::with_capacity(steps + 1),
    };
    traj.t.push(t0);
    traj.y.push(y0.clone());
    traj.g.push(0.0);
    let mut x = y0.to_flat();
    x.push(0.0);
    let mut integrator = Integrator::new(h);
    integrator.advance(t0, t1, &mut x, spec, |t, state| {
        let core = &state[..state.len() - 1];
        traj.t.push(t);
        traj.y.push(ContactPoint::from_flat(core));
        traj.g.push(state[state.len() - 1]);
    })?;
    Ok(traj)
}

fn transition_point(
    h: &HamiltonianExpr,
    t0: f64,
    t1: f64,
    y: &ContactPoint,
    spec: &FlowSpec,
) -> Result<(ContactPoint, f64)> {
    spec.validate()?;
    check_point(h, y)?;
    let (end, g) = Integrator::new(h).transition(t0, t1, &y.to_flat(), spec)?;
    Ok((ContactPoint::from_flat(&end), g))
}

/// `psi_H^t(y)` and its conformal exponent.
pub fn psi(h: &HamiltonianExpr, t: f64, y: &ContactPoint, spec: &FlowSpec) -> Result<(ContactPoint, f64)> {
    transition_point(h, 0.0, t, y, spec)
}

/// `phi_H^t(y) = psi_H^t (psi_H^1)^-1 (y)`.
pub fn phi(h: &HamiltonianExpr, t: f64, y: &ContactPoint, spec: &FlowSpec) -> Result<ContactPoint> {
    Ok(transition_point(h, 1.0, t, y, spec)?.0)
}

/// `(phi_H^t)^-1 (y) = psi_H^1 (psi_H^t)^-1 (y)`.
pub fn phi_inverse(h: &HamiltonianExpr, t: f64, y: &ContactPoint, spec: &FlowSpec) -> Result<ContactPoint> {
    Ok(transition_point(h, t, 1.0, y, spec)?.0)
}

fn map_span(map: FlowMap, t: f64) -> (f64, f64) {
    match map {
        FlowMap::PsiT => (0.0, t),
        FlowMap::PhiT => (1.0, t),
        FlowMap::PhiTInverse => (t, 1.0),
    }
}

pub fn conformal_exponent(
    h: &HamiltonianExpr,
    map: FlowMap,
    t: f64,
    y: &ContactPoint,
    spec: &FlowSpec,
) -> Result<f64> {
    let (a, b) = map_span(map, t);
    Ok(transition_point(h, a, b, y, spec)?.1)
}

/// Default finite-difference step `1e-6 (1 + |y|)`.
pub fn default_fd_step(y: &ContactPoint) -> f64 {
    1e-6 * (1.0 + y.norm())
}

/// Central-difference Jacobian of `y -> (transition t0 -> t1)(y)` at `y0`;
/// rows and columns ordered `(q, p, z)`.
pub fn linearized_flow(
    h: &HamiltonianExpr,
    y0: &ContactPoint,
    t0: f64,
    t1: f64,
    spec: &FlowSpec,
    step: Option<f64>,
) -> Result<DMatrix<f64>> {
    spec.validate()?;
    check_point(h, y0)?;
    let step = step.unwrap_or_else(|| default_fd_step(y0));
    if !(step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let base = y0.to_flat();
    let d = base.len();
    let mut integrator = Integrator::new(h);
    let mut jac = DMatrix::zeros(d, d);
    let mut x = base.clone();
    for j in 0..d {
        x[j] = base[j] + step;
        let (plus, _) = integrator.transition(t0, t1, &x, spec)?;
        x[j] = base[j] - step;
        let (minus, _) = integrator.transition(t0, t1, &x, spec)?;
        x[j] = base[j];
        for i in 0..d {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * step);
        }
    }
    Ok(jac)
}

pub(crate) fn apply(m: &DMatrix<f64>, v: &TangentVector) -> TangentVector {
    let flat = v.to_flat();
    let out: Vec<f64> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * flat[j]).sum())
        .collect();
    TangentVector::from_flat(&out)
}

/// `|lambda_{psi_t(y)}(d psi_t v) - e^{g_t(y)} lambda_y(v)|`.
pub fn conformal_identity_check(
    h: &HamiltonianExpr,
    t: f64,
    y: &ContactPoint,
    v: &TangentVector,
    spec: &FlowSpec,
    step: Option<f64>,
) -> Result<f64> {
    let jac = linearized_flow(h, y, 0.0, t, spec, step)?;
    let (end, g) = psi(h, t, y, spec)?;
    let pushed = apply(&jac, v);
    Ok((lambda_eval(&end, &pushed) - g.exp() * lambda_eval(y, v)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(q: f64, p: f64, z: f64) -> ContactPoint {
        ContactPoint::new(vec![q], vec![p], z)
    }

    fn parse(src: &str) -> HamiltonianExpr {
        HamiltonianExpr::parse(src, 1).unwrap()
    }

    #[test]
    fn step_count_rounding() {
        let spec = FlowSpec::default();
        assert_eq!(spec.step_count(0.7), 140);
        assert_eq!(spec.step_count(1.0 / 16.0), 13);
        assert_eq!(spec.step_count(-1.0), 200);
        assert_eq!(spec.step_count(1e-9), 1);
        assert!(FlowSpec::new(9).is_err());
    }

    #[test]
    fn reeb_flow_translates_z() {
        let h = parse("-1");
        let traj = integrate(&h, &pt(0.3, -0.2, 1.0), 0.0, 0.7, &FlowSpec::default()).unwrap();
        let end = traj.endpoint();
        assert_eq!(end.q, vec![0.3]);
        assert_eq!(end.p, vec![-0.2]);
        assert!((end.z - 1.7).abs() < 1e-13);
        assert!(traj.g.iter().all(|&g| g == 0.0));
        assert_eq!(traj.len(), 141);
    }

    #[test]
    fn potential_flow_closed_form() {
        let h = parse("cos(q1)");
        for q0 in [-2.0, 0.3, 1.1] {
            let (end, g) = psi(&h, 1.0, &pt(q0, 0.0, 0.0), &FlowSpec::default()).unwrap();
            assert!((end.q[0] - q0).abs() <= 1e-10);
            assert!((end.p[0] - f64::sin(q0)).abs() <= 1e-10);
            assert!((end.z + f64::cos(q0)).abs() <= 1e-10);
            assert_eq!(g, 0.0);
        }
    }

    #[test]
    fn linear_z_flow_closed_form() {
        let h = parse("2*z");
        let (end, g) = psi(&h, 1.0, &pt(0.0, 1.0, 1.0), &FlowSpec::default()).unwrap();
        let e2 = (-2.0f64).exp();
        assert_eq!(end.q[0], 0.0);
        assert!((end.p[0] - e2).abs() <= 1e-8 * e2);
        assert!((end.z - e2).abs() <= 1e-8 * e2);
        assert!((g + 2.0).abs() <= 1e-12);
    }

    #[test]
    fn backward_runs_decrease_time() {
        let h = parse("cos(q1) + 0.5*z");
        let traj = integrate(&h, &pt(0.1, 0.2, 0.3), 1.0, 0.0, &FlowSpec::default()).unwrap();
        assert!(traj.t.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(*traj.t.last().unwrap(), 0.0);
        assert!(integrate(&h, &pt(0.1, 0.2, 0.3), 0.5, 0.5, &FlowSpec::default()).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let h = parse("-z^3");
        match integrate(&h, &pt(0.0, 0.0, 10.0), 0.0, 1.0, &FlowSpec::default()) {
            Err(Error::NonFinite { last_valid_time }) => assert!(last_valid_time < 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn phi_at_one_is_identity_and_reeb_composition() {
        let spec = FlowSpec::default();
        let h = parse("p1^2/2 + cos(q1) + 0.3*z");
        let y = pt(0.4, -0.6, 0.2);
        assert_eq!(phi(&h, 1.0, &y, &spec).unwrap(), y);
        let reeb = parse("-1");
        let out = phi(&reeb, 0.25, &y, &spec).unwrap();
        assert!((out.z - (0.2 + 0.25 - 1.0)).abs() < 1e-13);
        // phi^0 = (psi^1)^-1
        let back = phi(&h, 0.0, &y, &spec).unwrap();
        let (fwd, _) = psi(&h, 1.0, &back, &spec).unwrap();
        assert!(fwd.distance(&y) <= 1e-8);
    }

    #[test]
    fn phi_round_trip() {
        let spec = FlowSpec::default();
        let h = parse("p1^2/2 + cos(q1) + 0.3*z*p1");
        let y = pt(0.4, -0.6, 0.2);
        for t in [0.0, 0.3, 0.77] {
            let there = phi(&h, t, &y, &spec).unwrap();
            let back = phi_inverse(&h, t, &there, &spec).unwrap();
            assert!(back.distance(&y) <= 1e-8, "t = {t}");
        }
    }

    #[test]
    fn conformal_exponent_examples() {
        let spec = FlowSpec::default();
        let y = pt(0.2, 0.1, -0.4);
        let free = parse("p1^2/2 + cos(q1)");
        for map in [FlowMap::PsiT, FlowMap::PhiT, FlowMap::PhiTInverse] {
            assert_eq!(conformal_exponent(&free, map, 0.6, &y, &spec).unwrap(), 0.0);
        }
        let lin = parse("2*z");
        let g = conformal_exponent(&lin, FlowMap::PsiT, 0.35, &y, &spec).unwrap();
        assert!((g + 0.7).abs() < 1e-12);
        let h = parse("p1^2/2 + cos(q1) + 0.3*z*p1");
        let g = conformal_exponent(&h, FlowMap::PhiTInverse, 1.0, &y, &spec).unwrap();
        assert!(g.abs() <= 1e-9);
    }

    #[test]
    fn linearized_flow_examples() {
        let spec = FlowSpec::default();
        let y = pt(0.3, 0.2, 0.1);
        let reeb = linearized_flow(&parse("-1"), &y, 0.0, 1.0, &spec, None).unwrap();
        assert!((reeb - DMatrix::identity(3, 3)).amax() <= 1e-9);

        let lin = linearized_flow(&parse("2*z"), &y, 0.0, 1.0, &spec, None).unwrap();
        let e2 = (-2.0f64).exp();
        let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, e2, e2]));
        assert!((lin - expected).amax() <= 1e-6);
    }

    #[test]
    fn conformal_identity_examples() {
        let spec = FlowSpec::default();
        let y = pt(0.3, -0.4, 0.5);
        let lin = parse("2*z");
        let r = conformal_identity_check(&lin, 0.8, &y, &TangentVector::new(vec![0.0], vec![0.0], 1.0), &spec, None)
            .unwrap();
        assert!(r <= 1e-8);
        let h = parse("p1^2/2 + cos(q1)");
        let v = TangentVector::new(vec![0.3], vec![-1.2], 0.7);
        assert!(conformal_identity_check(&h, 0.9, &y, &v, &spec, None).unwrap() <= 1e-6);
        // A vector in xi stays in xi.
        let hz = parse("cos(q1) + 0.5*z*p1");
        let horizontal = TangentVector::new(vec![1.0], vec![0.5], y.p[0]);
        let jac = linearized_flow(&hz, &y, 0.0, 0.6, &spec, None).unwrap();
        let (end, _) = psi(&hz, 0.6, &y, &spec).unwrap();
        assert!(lambda_eval(&end, &apply(&jac, &horizontal)).abs() <= 1e-6);
    }
}
