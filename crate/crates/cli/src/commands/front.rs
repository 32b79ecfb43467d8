use std::path::Path;

use anyhow::{bail, Result};
use gfqi::legendrian::{fold_count, sample_legendrian, spectrum, SpectrumReport, SPECTRUM_TOL};
use serde::Serialize;

use super::Outcome;
use crate::config::Resolved;
use crate::output::{csv_writer, fmt_f64, point_header, write_json, Report};

/// Minimum fraction of grid points that must flow successfully.
const MIN_SUCCESS: f64 = 0.99;

#[derive(Debug, Serialize)]
struct FrontResults {
    points: usize,
    failures: usize,
    success_fraction: f64,
    fold_count: Option<usize>,
    spectrum: SpectrumReport,
}

/// Samples the time-one image, writes its points and the spectrum.
pub fn cmd_front(run: &Resolved, seed: u64, out: &Path) -> Result<Outcome> {
    let sample = sample_legendrian(&run.h, &run.grid, &run.spec)?;
    let (mut w, path) = csv_writer(out, "front.csv")?;
    w.write_record(point_header(run.h.dim()))?;
    for entry in &sample.entries {
        match (&entry.point, &entry.error) {
            (Some(y), _) => w.write_record(y.to_flat().into_iter().map(fmt_f64))?,
            (None, Some(err)) => eprintln!("q0 = {:?}: {err}", entry.q0),
            (None, None) => {}
        }
    }
    w.flush()?;
    let failures = sample.failures();
    let points = sample.entries.len();
    let success_fraction = (points - failures) as f64 / points as f64;
    let results = FrontResults {
        points,
        failures,
        success_fraction,
        fold_count: (run.h.dim() == 1).then(|| fold_count(&sample.front())),
        spectrum: spectrum(&run.h, &run.grid, &run.spec, SPECTRUM_TOL)?,
    };
    let ok = success_fraction >= MIN_SUCCESS;
    let report = Report {
        command: "front",
        seed,
        passed: ok,
        failed_checks: if ok { vec![] } else { vec!["success_fraction".into()] },
        config: &run.config,
        results,
    };
    let json = write_json(out, "spectrum.json", &report)?;
    eprintln!("wrote {} and {}", path.display(), json.display());
    if !ok {
        bail!("{failures} of {points} grid points failed to flow; success fraction {success_fraction:.4} is below {MIN_SUCCESS}");
    }
    Ok(Outcome::Pass)
}
