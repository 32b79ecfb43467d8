//! Fiber-critical points of `S` and the Legendrian they generate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_inputs, junctions, CutoffParams, FiberPoint, Junctions, Partition};
use crate::contact::ContactPoint;
use crate::error::{Error, Result};
use crate::flow::{psi, FlowSpec, Integrator};
use crate::hamlang::HamiltonianExpr;
use crate::newton::{self, NewtonOptions};

/// Which system of equations the Newton solver drives to zero. All three
/// have the same zero set because `e^{g_k} > 0` and `X~ = 0` iff `X = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalResidual {
    /// `(X_k, P~_k - p_k^-)`.
    Junction,
    /// Fiber components of the analytic gradient, `e^{g_k}`-weighted.
    WeightedGradient,
    /// The same with every weight replaced by 1.
    UnweightedGradient,
}

#[derive(Debug, Clone)]
pub struct CriticalOptions {
    pub residual: CriticalResidual,
    pub tol: f64,
    pub max_iter: usize,
    /// Starting fiber values; `(X, P) = (0, 0)` when absent.
    pub seed: Option<FiberPoint>,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        CriticalOptions {
            residual: CriticalResidual::Junction,
            tol: 1e-10,
            max_iter: 50,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub e: FiberPoint,
    pub iterations: usize,
    pub residual: f64,
}

fn residual(kind: CriticalResidual, e: &FiberPoint, j: &Junctions) -> Vec<f64> {
    let weights: Vec<f64> = match kind {
        CriticalResidual::WeightedGradient => j.cumulative().iter().map(|g| g.exp()).collect(),
        _ => vec![1.0; j.increments.len()],
    };
    let mut out = Vec::with_capacity(2 * e.dim() * e.x.len());
    for k in 0..e.x.len() {
        let w = weights[k];
        match kind {
            CriticalResidual::Junction => out.extend_from_slice(&e.x[k]),
            _ => out.extend(j.x_tilde[k].iter().map(|x| w * x)),
        }
        let pm = j.p_minus(k + 1);
        let sign = if kind == CriticalResidual::Junction { 1.0 } else { -1.0 };
        out.extend(j.p_tilde[k].iter().zip(pm).map(|(pt, p)| sign * w * (pt - p)));
    }
    out
}

/// `|(X_k, P~_k - p_k^-)_k|_inf`.
pub(crate) fn junction_residual(
    h: &HamiltonianExpr,
    e: &FiberPoint,
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
) -> Result<f64> {
    let j = junctions(&mut Integrator::new(h), e, part, c, spec)?;
    Ok(residual(CriticalResidual::Junction, e, &j)
        .iter()
        .fold(0.0, |m, v| m.max(v.abs())))
}

/// Solves the critical equations with `q0` held fixed, starting from
/// `(X, P) = (0, 0)`.
pub fn critical_solve(
    h: &HamiltonianExpr,
    q0: &[f64],
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
) -> Result<CriticalPoint> {
    critical_solve_with(h, q0, part, c, spec, &CriticalOptions::default())
}

pub fn critical_solve_with(
    h: &HamiltonianExpr,
    q0: &[f64],
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
    opts: &CriticalOptions,
) -> Result<CriticalPoint> {
    let start = match &opts.seed {
        Some(seed) => FiberPoint {
            q0: q0.to_vec(),
            ..seed.clone()
        },
        None => FiberPoint::zero(q0, part),
    };
    check_inputs(h, &start, part, c, spec)?;
    let f = |fiber: &[f64]| -> Result<Vec<f64>> {
        let e = start.with_fiber_raw(fiber)?;
        let j = junctions(&mut Integrator::new(h), &e, part, c, spec)?;
        Ok(residual(opts.residual, &e, &j))
    };
    let sol = newton::solve(
        f,
        start.fiber_raw(),
        NewtonOptions {
            tol: opts.tol,
            max_iter: opts.max_iter,
            fd_step: 1e-6,
        },
    )?;
    Ok(CriticalPoint {
        e: start.with_fiber_raw(&sol.x)?,
        iterations: sol.iterations,
        residual: sol.residual,
    })
}

const IOTA_PRECONDITION: f64 = 1e-8;
const BASE_STEP: f64 = 1e-4;
const BASE_TOL: f64 = 1e-4;

/// `iota_S(e) = (q_N^-, p_N^-, z_N^-)` at a critical point.
///
/// Also checks `dS/dq_N^- = p_N^-` along the critical locus by solving at
/// `q0 +- h` and comparing `Delta S` with `<p_N^-, Delta q_N^->`.
pub fn iota_s(
    h: &HamiltonianExpr,
    e_star: &FiberPoint,
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
) -> Result<ContactPoint> {
    check_inputs(h, e_star, part, c, spec)?;
    let res = junction_residual(h, e_star, part, c, spec)?;
    if !(res <= IOTA_PRECONDITION) {
        return Err(Error::Precondition(format!(
            "iota_S needs a critical point, residual is {res:e}"
        )));
    }
    let j = junctions(&mut Integrator::new(h), e_star, part, c, spec)?;
    let point = ContactPoint::from_flat(&j.minus[part.segments() - 1]);
    let n = e_star.dim();
    let opts = CriticalOptions {
        seed: Some(e_star.clone()),
        ..CriticalOptions::default()
    };
    for i in 0..n {
        let mut ends = Vec::with_capacity(2);
        for sign in [1.0, -1.0] {
            let mut q = e_star.q0.clone();
            q[i] += sign * BASE_STEP;
            let sol = critical_solve_with(h, &q, part, c, spec, &opts)?;
            let jj = junctions(&mut Integrator::new(h), &sol.e, part, c, spec)?;
            ends.push(jj.minus[part.segments() - 1].clone());
        }
        let ds = ends[0][2 * n] - ends[1][2 * n];
        let pdq: f64 = (0..n).map(|r| point.p[r] * (ends[0][r] - ends[1][r])).sum();
        let err = (ds - pdq).abs() / (2.0 * BASE_STEP);
        if !(err <= BASE_TOL) {
            return Err(Error::Identity {
                name: "dS/dq_N = p_N",
                residual: err,
                tolerance: BASE_TOL,
            });
        }
    }
    Ok(point)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationPoint {
    pub q0: Vec<f64>,
    pub gap: Option<f64>,
    pub iterations: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub max_gap: f64,
    pub failures: usize,
    pub points: Vec<GenerationPoint>,
}

/// Compares `iota_S` at the critical point over each `q0` with the direct
/// flow `psi_H^1(q0, 0, 0)`.
pub fn generation_check(
    h: &HamiltonianExpr,
    grid: &[Vec<f64>],
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
) -> Result<GenerationReport> {
    let oracle = |q0: &[f64]| Ok(psi(h, 1.0, &ContactPoint::on_zero_section(q0), spec)?.0);
    generation_check_against(h, grid, part, c, spec, &oracle)
}

/// As [`generation_check`] with a caller-supplied reference point.
pub fn generation_check_against(
    h: &HamiltonianExpr,
    grid: &[Vec<f64>],
    part: &Partition,
    c: &CutoffParams,
    spec: &FlowSpec,
    oracle: &(dyn Fn(&[f64]) -> Result<ContactPoint> + Sync),
) -> Result<GenerationReport> {
    if grid.is_empty() {
        return Err(Error::invalid("generation check needs a nonempty grid"));
    }
    spec.validate()?;
    c.validate()?;
    let points: Vec<GenerationPoint> = grid
        .par_iter()
        .map(|q0| {
            let run = || -> Result<(f64, usize)> {
                let sol = critical_solve(h, q0, part, c, spec)?;
                let generated = iota_s(h, &sol.e, part, c, spec)?;
                Ok((generated.distance(&oracle(q0)?), sol.iterations))
            };
            match run() {
                Ok((gap, it)) => GenerationPoint {
                    q0: q0.clone(),
                    gap: Some(gap),
                    iterations: Some(it),
                    error: None,
                },
                Err(e) => GenerationPoint {
                    q0: q0.clone(),
                    gap: None,
                    iterations: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(GenerationReport {
        max_gap: points.iter().filter_map(|p| p.gap).fold(0.0, f64::max),
        failures: points.iter().filter(|p| p.error.is_some()).count(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> HamiltonianExpr {
        HamiltonianExpr::parse(src, 1).unwrap()
    }

    #[test]
    fn cos_critical_point_is_the_smooth_trajectory() {
        let spec = FlowSpec::default();
        let part = Partition::new(16).unwrap();
        let c = CutoffParams::default();
        let sol = critical_solve(&parse("cos(q1)"), &[0.3], &part, &c, &spec).unwrap();
        assert!(sol.iterations <= 6);
        for k in 1..16 {
            assert!(sol.e.x[k - 1][0].abs() <= 1e-8);
            assert!((sol.e.p[k - 1][0] - 0.3f64.sin() * k as f64 / 16.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn zero_hamiltonian_is_already_critical() {
        let part = Partition::new(4).unwrap();
        let sol = critical_solve(&parse("0"), &[1.0], &part, &CutoffParams::default(), &FlowSpec::default()).unwrap();
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.e, FiberPoint::zero(&[1.0], &part));
    }

    #[test]
    fn residual_variants_share_solutions() {
        let spec = FlowSpec::default();
        let part = Partition::new(6).unwrap();
        let c = CutoffParams::default();
        let h = parse("p1^2/2 + cos(q1) + 0.5*z");
        let solve = |residual| {
            let opts = CriticalOptions {
                residual,
                ..CriticalOptions::default()
            };
            critical_solve_with(&h, &[0.8], &part, &c, &spec, &opts).unwrap().e.to_raw()
        };
        let a = solve(CriticalResidual::Junction);
        for kind in [CriticalResidual::WeightedGradient, CriticalResidual::UnweightedGradient] {
            let b = solve(kind);
            let d = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(d <= 1e-9, "{kind:?}: {d}");
        }
    }

    #[test]
    fn iota_examples() {
        let spec = FlowSpec::default();
        let part = Partition::new(8).unwrap();
        let c = CutoffParams::default();
        let q0 = 0.9f64;
        let h = parse("cos(q1)");
        let sol = critical_solve(&h, &[q0], &part, &c, &spec).unwrap();
        let y = iota_s(&h, &sol.e, &part, &c, &spec).unwrap();
        assert!(y.distance(&ContactPoint::new(vec![q0], vec![q0.sin()], -q0.cos())) <= 1e-7);

        let h = parse("cos(q1) + 0.7*z");
        let sol = critical_solve(&h, &[q0], &part, &c, &spec).unwrap();
        let y = iota_s(&h, &sol.e, &part, &c, &spec).unwrap();
        let s = (1.0 - (-0.7f64).exp()) / 0.7;
        assert!(y.distance(&ContactPoint::new(vec![q0], vec![s * q0.sin()], -s * q0.cos())) <= 1e-6);

        let h = parse("0");
        let y = iota_s(&h, &FiberPoint::zero(&[q0], &part), &part, &c, &spec).unwrap();
        assert_eq!(y, ContactPoint::on_zero_section(&[q0]));
    }

    #[test]
    fn iota_rejects_noncritical_points() {
        let part = Partition::new(4).unwrap();
        let mut e = FiberPoint::zero(&[0.0], &part);
        e.x[0][0] = 0.1;
        assert!(matches!(
            iota_s(&parse("0"), &e, &part, &CutoffParams::default(), &FlowSpec::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn generation_records_failures_without_aborting() {
        let spec = FlowSpec::default();
        let part = Partition::new(4).unwrap();
        let c = CutoffParams::default();
        let h = parse("log(q1)");
        let grid = vec![vec![0.5], vec![-0.5]];
        let report = generation_check(&h, &grid, &part, &c, &spec).unwrap();
        assert_eq!(report.failures, 1);
        assert!(report.points[0].gap.unwrap() <= 1e-6);
        assert!(report.points[1].error.is_some());
        assert!(generation_check(&h, &[], &part, &c, &spec).is_err());
    }
}
