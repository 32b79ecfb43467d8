use std::path::Path;

use anyhow::Result;
use gfqi::families::random_fiber_point;
use gfqi::genfun::{
    almost_qi_probe, coordinate_jacobian, dk_deviation, generation_check, gradient_fd, quadratic_probe,
    s_eval_detailed, vertical_gradient_analytic,
};
use gfqi::{rng, Error, FiberPoint};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{sup, Outcome};
use crate::config::Resolved;
use crate::output::{write_json, Check, Report};

#[derive(Debug, Serialize)]
struct Generation {
    check: Check,
    points: usize,
    failures: usize,
    max_iterations: usize,
}

#[derive(Debug, Serialize)]
struct Gradient {
    check: Check,
    samples: usize,
}

#[derive(Debug, Serialize)]
struct Telescoping {
    check: Check,
    evaluations: usize,
}

#[derive(Debug, Serialize)]
struct QiProbe {
    check: Check,
    q0: Vec<f64>,
    radii: Vec<f64>,
    sup: Vec<f64>,
    quadratic_control_ratio: f64,
}

#[derive(Debug, Serialize)]
struct Jacobian {
    passed: bool,
    determinant: f64,
    condition_number: f64,
    structure_violation: f64,
    dk_deviation: f64,
}

#[derive(Debug, Serialize)]
struct GenfunResults {
    generation: Generation,
    gradient: Gradient,
    telescoping: Telescoping,
    qi_probe: QiProbe,
    jacobian: Jacobian,
}

fn random_q0(r: &mut impl Rng, run: &Resolved) -> Vec<f64> {
    (0..run.h.dim())
        .map(|_| r.random_range(run.grid.min..=run.grid.max))
        .collect()
}

/// Generation, gradient, telescoping, almost-QI and local-coordinate checks.
pub fn cmd_genfun_check(run: &Resolved, seed: u64, out: &Path) -> Result<Outcome> {
    let (h, part, c, spec) = (&run.h, &run.part, &run.cutoff, &run.spec);
    let tol = &run.config.tolerances;
    let sampling = &run.config.sampling;
    let n = h.dim();

    let grid = run.grid.points(n);
    let gen = generation_check(h, &grid, part, c, spec)?;
    for p in gen.points.iter().filter(|p| p.error.is_some()) {
        eprintln!("generation at q0 = {:?}: {}", p.q0, p.error.as_deref().unwrap_or_default());
    }
    let generation = Generation {
        check: Check {
            passed: gen.failures == 0 && gen.max_gap <= tol.generation,
            ..Check::at_most(gen.max_gap, tol.generation)
        },
        points: gen.points.len(),
        failures: gen.failures,
        max_iterations: gen.points.iter().filter_map(|p| p.iterations).max().unwrap_or(0),
    };

    let grad_errors: Vec<f64> = (0..sampling.gradient_points)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut r = rng::stream(seed, "gradient_check", i as u64);
            let q0 = random_q0(&mut r, run);
            let e = random_fiber_point(&mut r, &q0, part, 0.3, 1.0);
            let jac = coordinate_jacobian(h, &e, part, c, spec, None)?;
            let analytic = jac.pull_back(&vertical_gradient_analytic(h, &e, part, c, spec)?);
            let fd = gradient_fd(h, &e, part, c, spec, None)?;
            let diff = sup(analytic.iter().zip(&fd).map(|(a, b)| a - b));
            Ok(diff / sup(fd.iter().copied()).max(f64::MIN_POSITIVE))
        })
        .collect::<Result<_>>()?;
    let gradient = Gradient {
        check: Check::at_most(sup(grad_errors), tol.gradient),
        samples: sampling.gradient_points,
    };

    let residuals: Vec<f64> = (0..sampling.telescoping_points)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut r = rng::stream(seed, "telescoping", i as u64);
            let q0 = random_q0(&mut r, run);
            let e = random_fiber_point(&mut r, &q0, part, 3.0, 3.0);
            match s_eval_detailed(h, &e, part, c, spec) {
                Ok(s) => Ok(s.rel_residual),
                Err(Error::Identity { residual, .. }) => Ok(residual),
                Err(err) => Err(err.into()),
            }
        })
        .collect::<Result<_>>()?;
    let telescoping = Telescoping {
        check: Check::at_most(sup(residuals), tol.telescoping),
        evaluations: sampling.telescoping_points,
    };

    let center = vec![0.5 * (run.grid.min + run.grid.max); n];
    let (rays, radii) = (sampling.probe_rays, &sampling.probe_radii);
    let probe = almost_qi_probe(h, &center, part, c, spec, rays, radii, seed)?;
    let control = quadratic_probe(h, &center, part, c, spec, rays, radii, seed)?;
    let qi_probe = QiProbe {
        check: Check::at_most(probe.ratio, tol.qi_ratio),
        q0: center.clone(),
        radii: probe.radii,
        sup: probe.sup,
        quadratic_control_ratio: control.ratio,
    };

    let base = FiberPoint::zero(&center, part);
    let jac = coordinate_jacobian(h, &base, part, c, spec, None)?;
    let jacobian = Jacobian {
        passed: jac.is_invertible(),
        determinant: jac.determinant,
        condition_number: jac.condition_number,
        structure_violation: jac.structure_violation,
        dk_deviation: dk_deviation(h, &base, part, c, spec, None)?,
    };

    let mut failed = Vec::new();
    for (name, ok) in [
        ("generation", generation.check.passed),
        ("gradient", gradient.check.passed),
        ("telescoping", telescoping.check.passed),
        ("qi_probe", qi_probe.check.passed),
        ("jacobian", jacobian.passed),
    ] {
        if !ok {
            failed.push(name.to_string());
        }
    }
    let report = Report {
        command: "genfun-check",
        seed,
        passed: failed.is_empty(),
        failed_checks: failed.clone(),
        config: &run.config,
        results: GenfunResults {
            generation,
            gradient,
            telescoping,
            qi_probe,
            jacobian,
        },
    };
    let path = write_json(out, "genfun_check.json", &report)?;
    eprintln!("wrote {}", path.display());
    Ok(Outcome::from_failures(failed))
}
