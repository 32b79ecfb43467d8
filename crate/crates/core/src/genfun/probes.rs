//! Behaviour of `S` at infinity and the symplectic special case.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_inputs, critical_solve, junctions, CutoffParams, FiberPoint, Partition};
use crate::action::{classical_action, Path};
use crate::contact::ContactPoint;
use crate::error::{Error, Result};
use crate::flow::{integrate, FlowSpec, Integrator};
use crate::hamlang::HamiltonianExpr;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QiProbeReport {
    pub radii: Vec<f64>,
    /// Largest `|grad_fiber|_inf` over all rays, per radius.
    pub sup: Vec<f64>,
    /// `sup` at the largest radius over `sup` at the median radius.
    pub ratio: f64,
    pub bounded: bool,
}

#[derive(Clone, Copy)]
enum Probed {
    /// `A = sum (z_k^- - z_{k-1}^+)`.
    Deviation,
    /// `Q = sum <P_k, X_k>`.
    Quadratic,
}

/// Random stream name shared by both probes, so they see the same rays.
const RAY_STREAM: &str = "almost_qi_probe";

/// Fiber gradient of `A = S - Q` along random rays `(q0, 0, 0) + r u`.
#[allow(clippy::too_many_arguments)]
pub fn almost_qi_probe(
    h: &HamiltonianExpr,
    q0: &[f64],
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
    rays: usize,
    radii: &[f64],
    seed: u64,
) -> Result<QiProbeReport> {
    probe(h, q0, part, c, spec, rays, radii, seed, Probed::Deviation)
}

/// The same probe applied to `Q` itself; its gradient grows linearly.
#[allow(clippy::too_many_arguments)]
pub fn quadratic_probe(
    h: &HamiltonianExpr,
    q0: &[f64],
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
    rays: usize,
    radii: &[f64],
    seed: u64,
) -> Result<QiProbeReport> {
    probe(h, q0, part, c, spec, rays, radii, seed, Probed::Quadratic)
}

#[allow(clippy::too_many_arguments)]
fn probe(
    h: &HamiltonianExpr,
    q0: &[f64],
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
    rays: usize,
    radii: &[f64],
    seed: u64,
    what: Probed,
) -> Result<QiProbeReport> {
    if rays == 0 {
        return Err(Error::invalid("probe needs at least one ray"));
    }
    if radii.is_empty()
        || radii.iter().any(|r| !(*r > 0.0 && r.is_finite()))
        || radii.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::invalid("probe radii must be positive and increasing"));
    }
    if radii[radii.len() - 1] < 100.0 {
        return Err(Error::invalid("largest probe radius must be at least 100"));
    }
    let base = FiberPoint::zero(q0, part);
    check_inputs(h, &base, part, c, spec)?;
    let fiber_dim = base.fiber_raw().len();
    let directions: Vec<Vec<f64>> = (0..rays)
        .map(|i| rng::unit_vector(&mut rng::stream(seed, RAY_STREAM, i as u64), fiber_dim))
        .collect();

    let value = |e: &FiberPoint, integ: &mut Integrator<'_>| -> Result<f64> {
        Ok(match what {
            Probed::Deviation => junctions(integ, e, part, c, spec)?.action_part(),
            Probed::Quadratic => e.pairing(),
        })
    };
    let grad_sup = |fiber: &[f64], step: f64| -> Result<f64> {
        let mut integ = Integrator::new(h);
        let mut x = fiber.to_vec();
        let mut best = 0.0f64;
        for i in 0..x.len() {
            x[i] = fiber[i] + step;
            let plus = value(&base.with_fiber_raw(&x)?, &mut integ)?;
            x[i] = fiber[i] - step;
            let minus = value(&base.with_fiber_raw(&x)?, &mut integ)?;
            x[i] = fiber[i];
            best = best.max(((plus - minus) / (2.0 * step)).abs());
        }
        Ok(best)
    };

    let table: Vec<Vec<f64>> = directions
        .par_iter()
        .map(|u| {
            radii
                .iter()
                .map(|&r| {
                    let fiber: Vec<f64> = u.iter().map(|v| r * v).collect();
                    grad_sup(&fiber, 1e-5 * (1.0 + r))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let sup: Vec<f64> = (0..radii.len())
        .map(|j| table.iter().map(|row| row[j]).fold(0.0, f64::max))
        .collect();
    let (top, mid) = (sup[sup.len() - 1], sup[sup.len() / 2]);
    let ratio = if mid > 0.0 {
        top / mid
    } else if top == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(QiProbeReport {
        radii: radii.to_vec(),
        sup,
        ratio,
        bounded: top <= 2.0 * mid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionPoint {
    pub q0: Vec<f64>,
    pub s: f64,
    pub classical_action: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymplecticReport {
    /// Largest `|H_z|` sampled along the reference trajectories.
    pub max_hz: f64,
    /// Largest `|g_{k(k+1)}|` at the critical points.
    pub max_increment: f64,
    /// Largest `|S - int (p.q' - H) dt|`.
    pub max_action_gap: f64,
    pub points: Vec<ReductionPoint>,
}

const HZ_TOL: f64 = 1e-12;
/// Resolution of the reference trajectory for the classical action.
const REFERENCE_STEPS: usize = 2000;

/// For `z`-independent `H`: conformal increments vanish and `S` at each
/// critical point equals the classical action of the projected trajectory.
pub fn symplectic_reduction_check(
    h: &HamiltonianExpr,
    grid: &[Vec<f64>],
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
) -> Result<SymplecticReport> {
    if grid.is_empty() {
        return Err(Error::invalid("reduction check needs a nonempty grid"));
    }
    let fine = FlowSpec::new(REFERENCE_STEPS)?;
    let points: Vec<(ReductionPoint, f64, f64)> = grid
        .par_iter()
        .map(|q0| {
            let traj = integrate(h, &ContactPoint::on_zero_section(q0), 0.0, 1.0, &fine)?;
            let mut ev = h.evaluator();
            let mut max_hz = 0.0f64;
            for (t, y) in traj.t.iter().zip(&traj.y) {
                max_hz = max_hz.max(ev.jet(*t, y)?.d_z.abs());
            }
            if !(max_hz <= HZ_TOL) {
                return Err(Error::Precondition(format!(
                    "Hamiltonian depends on z: |H_z| = {max_hz:e} near q0 = {q0:?}"
                )));
            }
            let sol = critical_solve(h, q0, part, c, spec)?;
            let j = junctions(&mut Integrator::new(h), &sol.e, part, c, spec)?;
            let max_inc = j.increments.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            let classical = classical_action(h, &Path::from_trajectory(&traj)?)?;
            Ok((
                ReductionPoint {
                    q0: q0.clone(),
                    s: j.z_final(),
                    classical_action: classical,
                },
                max_hz,
                max_inc,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(SymplecticReport {
        max_hz: points.iter().map(|p| p.1).fold(0.0, f64::max),
        max_increment: points.iter().map(|p| p.2).fold(0.0, f64::max),
        max_action_gap: points
            .iter()
            .map(|p| (p.0.s - p.0.classical_action).abs())
            .fold(0.0, f64::max),
        points: points.into_iter().map(|p| p.0).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn compact(src: &str) -> HamiltonianExpr {
        HamiltonianExpr::parse(src, 1).unwrap().compactify(10.0, 1.0).unwrap()
    }

    #[test]
    fn probe_validation() {
        let h = compact("cos(q1)");
        let part = Partition::new(4).unwrap();
        let (c, spec) = (CutoffParams::default(), FlowSpec::default());
        assert!(almost_qi_probe(&h, &[0.0], &part, &c, &spec, 0, &[1.0, 100.0], 1).is_err());
        assert!(almost_qi_probe(&h, &[0.0], &part, &c, &spec, 2, &[1.0, 10.0], 1).is_err());
        assert!(almost_qi_probe(&h, &[0.0], &part, &c, &spec, 2, &[10.0, 1.0, 100.0], 1).is_err());
    }

    #[test]
    fn zero_hamiltonian_has_no_deviation() {
        let h = HamiltonianExpr::zero(1).unwrap();
        let part = Partition::new(4).unwrap();
        let r = almost_qi_probe(&h, &[0.2], &part, &CutoffParams::default(), &FlowSpec::default(), 4, &[1.0, 10.0, 100.0], 3)
            .unwrap();
        assert!(r.sup.iter().all(|s| *s <= 1e-8));
        assert!(r.bounded);
    }

    #[test]
    fn quadratic_control_grows_linearly() {
        let h = compact("cos(q1)");
        let part = Partition::new(4).unwrap();
        let r = quadratic_probe(&h, &[0.2], &part, &CutoffParams::default(), &FlowSpec::default(), 4, &[1.0, 10.0, 100.0], 3)
            .unwrap();
        assert!((r.ratio - 10.0).abs() <= 0.1);
        assert!(!r.bounded);
    }

    #[test]
    fn reduction_examples() {
        let part = Partition::new(8).unwrap();
        let (c, spec) = (CutoffParams::default(), FlowSpec::default());
        let grid: Vec<Vec<f64>> = (0..5).map(|i| vec![-1.0 + 0.5 * i as f64]).collect();
        let free = symplectic_reduction_check(&compact("p1^2/2"), &grid, &part, &c, &spec).unwrap();
        assert!(free.points.iter().all(|p| p.s == 0.0));
        let cos = symplectic_reduction_check(&compact("cos(q1)"), &grid, &part, &c, &spec).unwrap();
        let variant = symplectic_reduction_check(&compact("p1*0 + cos(q1)"), &grid, &part, &c, &spec).unwrap();
        assert_eq!(cos.max_increment, 0.0);
        assert!(cos.max_action_gap <= 1e-6);
        for ((a, b), q) in cos.points.iter().zip(&variant.points).zip(&grid) {
            assert!((a.s + q[0].cos()).abs() <= 1e-8);
            assert_eq!(a.s, b.s);
        }
        let err = symplectic_reduction_check(&compact("cos(q1) + z"), &grid, &part, &c, &spec);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }
}
