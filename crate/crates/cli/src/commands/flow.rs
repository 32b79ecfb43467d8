use std::path::Path;

use anyhow::Result;
use gfqi::flow::integrate;
use gfqi::ContactPoint;

use super::Outcome;
use crate::config::Resolved;
use crate::output::{csv_writer, fmt_f64, point_header};

/// Integrates one trajectory and writes `t, q.., p.., z, g` rows.
pub fn cmd_flow(run: &Resolved, out: &Path) -> Result<Outcome> {
    let n = run.h.dim();
    let (y0, t0, t1) = match &run.config.initial {
        Some(init) => (ContactPoint::new(init.q.clone(), init.p.clone(), init.z), init.t0, init.t1),
        None => (ContactPoint::new(vec![0.0; n], vec![0.0; n], 0.0), 0.0, 1.0),
    };
    let traj = integrate(&run.h, &y0, t0, t1, &run.spec)?;
    let (mut w, path) = csv_writer(out, "trajectory.csv")?;
    let mut header = vec!["t".to_string()];
    header.extend(point_header(n));
    header.push("g".into());
    w.write_record(&header)?;
    for ((t, y), g) in traj.t.iter().zip(&traj.y).zip(&traj.g) {
        let mut row = vec![fmt_f64(*t)];
        row.extend(y.to_flat().into_iter().map(fmt_f64));
        row.push(fmt_f64(*g));
        w.write_record(&row)?;
    }
    w.flush()?;
    eprintln!("wrote {} rows to {}", traj.len(), path.display());
    Ok(Outcome::Pass)
}
