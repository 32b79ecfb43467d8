use std::path::Path;

use anyhow::Result;
use gfqi::action::{action_a0, action_ah, carnot_residual, first_variation_check, gauge_transform};
use gfqi::families::{random_point, random_smooth_path, random_tangent};
use gfqi::flow::{conformal_identity_check, integrate};
use gfqi::{rng, FlowSpec, Path as SampledPath};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{sup, Outcome};
use crate::config::Resolved;
use crate::output::{write_json, Check, Report};

#[derive(Debug, Serialize)]
struct ValidateResults {
    conformal_identity: Check,
    gauge_identity: Check,
    carnot_residual: Check,
    first_variation: Check,
    action_vanishing: Check,
}

const FD_STEP: f64 = 1e-5;

/// Conformal, gauge, Carnot, first-variation and action-vanishing checks.
pub fn cmd_validate(run: &Resolved, seed: u64, out: &Path) -> Result<Outcome> {
    let (h, spec) = (&run.h, &run.spec);
    let tol = &run.config.tolerances;
    let sampling = &run.config.sampling;
    let n = h.dim();
    let m = sampling.path_intervals;

    let conformal: Vec<f64> = (0..sampling.conformal_points)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut r = rng::stream(seed, "conformal", i as u64);
            let t = r.random_range(0.05..=1.0);
            let y = random_point(&mut r, n, 2.0);
            let v = random_tangent(&mut r, n);
            Ok(conformal_identity_check(h, t, &y, &v, spec, None)?)
        })
        .collect::<Result<_>>()?;

    let paths: Vec<SampledPath> = (0..sampling.gauge_paths)
        .map(|i| random_smooth_path(&mut rng::stream(seed, "gauge", i as u64), n, m, 0.8))
        .collect::<gfqi::Result<_>>()?;
    let gauge: Vec<f64> = paths
        .par_iter()
        .map(|path| -> Result<f64> {
            let a0 = action_a0(&gauge_transform(h, path, spec)?);
            let ah = action_ah(h, path, spec)?;
            Ok((ah - a0).abs() / (1.0 + a0.abs()))
        })
        .collect::<Result<_>>()?;

    let path_spec = FlowSpec::new(m)?;
    let trajectories: Vec<(f64, f64)> = (0..sampling.trajectories)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let y0 = random_point(&mut rng::stream(seed, "trajectory", i as u64), n, 1.0);
            let path = SampledPath::from_trajectory(&integrate(h, &y0, 0.0, 1.0, &path_spec)?)?;
            Ok((carnot_residual(h, &path)?, action_ah(h, &path, spec)?))
        })
        .collect::<Result<_>>()?;

    let variations: Vec<f64> = paths
        .par_iter()
        .take(2)
        .enumerate()
        .map(|(i, path)| -> Result<f64> {
            let mut r = rng::stream(seed, "first_variation", i as u64);
            let eta_path = random_smooth_path(&mut r, n, m, 1.0)?;
            let eta: Vec<_> = eta_path
                .points()
                .iter()
                .map(|p| gfqi::TangentVector::from_flat(&p.to_flat()))
                .collect();
            let fv = first_variation_check(h, path, &eta, spec, FD_STEP)?;
            Ok((fv.fd - fv.formula).abs() / (1.0 + fv.fd.abs()))
        })
        .collect::<Result<_>>()?;

    let results = ValidateResults {
        conformal_identity: Check::at_most(sup(conformal), tol.conformal),
        gauge_identity: Check::at_most(sup(gauge), tol.gauge),
        carnot_residual: Check::at_most(sup(trajectories.iter().map(|t| t.0)), tol.carnot),
        first_variation: Check::at_most(sup(variations), tol.first_variation),
        action_vanishing: Check::at_most(sup(trajectories.iter().map(|t| t.1)), tol.action_vanishing),
    };
    let mut failed = Vec::new();
    for (name, check) in [
        ("conformal_identity", &results.conformal_identity),
        ("gauge_identity", &results.gauge_identity),
        ("carnot_residual", &results.carnot_residual),
        ("first_variation", &results.first_variation),
        ("action_vanishing", &results.action_vanishing),
    ] {
        if !check.passed {
            failed.push(name.to_string());
        }
    }
    let report = Report {
        command: "validate",
        seed,
        passed: failed.is_empty(),
        failed_checks: failed.clone(),
        config: &run.config,
        results,
    };
    let path = write_json(out, "validate.json", &report)?;
    eprintln!("wrote {}", path.display());
    Ok(Outcome::from_failures(failed))
}
