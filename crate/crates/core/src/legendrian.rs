//! The time-one image `psi_H^1(o)` of the zero section: samples, wave
//! front, zero-wall crossings and the spectrum of critical values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::ContactPoint;
use crate::error::{Error, Result};
use crate::flow::{psi, FlowSpec};
use crate::hamlang::HamiltonianExpr;
use crate::newton::{self, NewtonOptions};

/// Tensor grid with the same uniform axis in every base direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Grid {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        let g = Grid { min, max, count };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::invalid("grid needs a positive count and finite bounds"));
        }
        if self.count > 1 && !(self.max > self.min) {
            return Err(Error::invalid(format!(
                "grid bounds must be increasing, got [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn axis(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let last = self.count - 1;
        (0..self.count)
            .map(|i| {
                if i == last {
                    self.max
                } else {
                    self.min + (self.max - self.min) * i as f64 / last as f64
                }
            })
            .collect()
    }

    /// All grid points in row-major order (last axis fastest).
    pub fn points(&self, dim: usize) -> Vec<Vec<f64>> {
        let axis = self.axis();
        let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(dim)];
        for _ in 0..dim {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&a| {
                        let mut p = prefix.clone();
                        p.push(a);
                        p
                    })
                })
                .collect();
        }
        out
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        q.iter().all(|v| *v >= self.min && *v <= self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendrianEntry {
    pub q0: Vec<f64>,
    pub point: Option<ContactPoint>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendrianSample {
    pub grid: Grid,
    pub dim: usize,
    pub entries: Vec<LegendrianEntry>,
}

impl LegendrianSample {
    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| e.error.is_some()).count()
    }

    /// `(q, z)` of every successful sample, in grid order.
    pub fn front(&self) -> Vec<FrontPoint> {
        self.entries
            .iter()
            .filter_map(|e| e.point.as_ref())
            .map(|p| FrontPoint {
                q: p.q.clone(),
                z: p.z,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub q: Vec<f64>,
    pub z: f64,
}

fn start(q0: &[f64]) -> ContactPoint {
    ContactPoint::on_zero_section(q0)
}

/// Flows every `(q0, 0, 0)` to time one; failures are recorded per point.
pub fn sample_legendrian(h: &HamiltonianExpr, grid: &Grid, spec: &FlowSpec) -> Result<LegendrianSample> {
    grid.validate()?;
    spec.validate()?;
    let entries = grid
        .points(h.dim())
        .into_par_iter()
        .map(|q0| match psi(h, 1.0, &start(&q0), spec) {
            Ok((y, _)) => LegendrianEntry {
                q0,
                point: Some(y),
                error: None,
            },
            Err(e) => LegendrianEntry {
                q0,
                point: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(LegendrianSample {
        grid: *grid,
        dim: h.dim(),
        entries,
    })
}

pub fn wave_front(h: &HamiltonianExpr, grid: &Grid, spec: &FlowSpec) -> Result<Vec<FrontPoint>> {
    Ok(sample_legendrian(h, grid, spec)?.front())
}

/// Number of direction reversals of `q` along a one-dimensional front.
pub fn fold_count(front: &[FrontPoint]) -> usize {
    let mut folds = 0;
    let mut last_sign = 0.0;
    for w in front.windows(2) {
        let d = w[1].q[0] - w[0].q[0];
        if d == 0.0 {
            continue;
        }
        let s = d.signum();
        if last_sign != 0.0 && s != last_sign {
            folds += 1;
        }
        last_sign = s;
    }
    folds
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Critical values, ascending; repeated values are kept.
    pub values: Vec<f64>,
    /// `q0` of each critical value.
    pub locations: Vec<Vec<f64>>,
    /// `psi_H^1(q0, 0, 0)` at each location.
    pub points: Vec<ContactPoint>,
    /// True where `|p|` stays below the tolerance on a plateau, in which case
    /// the location is the plateau midpoint.
    pub degenerate: Vec<bool>,
    pub failures: usize,
}

impl SpectrumReport {
    /// Values with neighbours closer than `tol` merged.
    pub fn distinct_values(&self, tol: f64) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &v in &self.values {
            if out.last().is_none_or(|l| (v - l).abs() > tol) {
                out.push(v);
            }
        }
        out
    }
}

/// Default root tolerance on `|p|`.
pub const SPECTRUM_TOL: f64 = 1e-10;
/// Runs of small `|p|` longer than this many cells are degenerate.
const PLATEAU_CELLS: usize = 3;

struct Root {
    q0: Vec<f64>,
    point: ContactPoint,
    degenerate: bool,
}

/// Critical values `z` of the time-one image where `p = 0`.
pub fn spectrum(h: &HamiltonianExpr, grid: &Grid, spec: &FlowSpec, tol: f64) -> Result<SpectrumReport> {
    if !(tol > 0.0) {
        return Err(Error::invalid("spectrum tolerance must be positive"));
    }
    let sample = sample_legendrian(h, grid, spec)?;
    let mut roots = if h.dim() == 1 {
        scan_roots(h, &sample, spec, tol)
    } else {
        newton_roots(h, &sample, grid, spec, tol)
    };
    roots.sort_by(|a, b| a.point.z.total_cmp(&b.point.z));
    Ok(SpectrumReport {
        values: roots.iter().map(|r| r.point.z).collect(),
        locations: roots.iter().map(|r| r.q0.clone()).collect(),
        points: roots.iter().map(|r| r.point.clone()).collect(),
        degenerate: roots.iter().map(|r| r.degenerate).collect(),
        failures: sample.failures(),
    })
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn scan_roots(h: &HamiltonianExpr, sample: &LegendrianSample, spec: &FlowSpec, tol: f64) -> Vec<Root> {
    let entries = &sample.entries;
    let p_at = |i: usize| entries[i].point.as_ref().map(|y| y.p[0]);
    let small = |i: usize| p_at(i).is_some_and(|p| p.abs() <= tol);
    let mut roots = Vec::new();
    let mut i = 0;
    while i < entries.len() {
        if small(i) {
            let mut j = i;
            while j + 1 < entries.len() && small(j + 1) {
                j += 1;
            }
            let (idx, degenerate) = if j - i > PLATEAU_CELLS {
                ((i + j) / 2, true)
            } else {
                let best = (i..=j)
                    .min_by(|&a, &b| p_at(a).unwrap().abs().total_cmp(&p_at(b).unwrap().abs()))
                    .expect("nonempty run");
                (best, false)
            };
            roots.push(Root {
                q0: entries[idx].q0.clone(),
                point: entries[idx].point.clone().expect("sampled"),
                degenerate,
            });
            i = j + 1;
            continue;
        }
        if i + 1 < entries.len() && !small(i + 1) {
            if let (Some(a), Some(b)) = (p_at(i), p_at(i + 1)) {
                if a.signum() != b.signum() {
                    if let Some(root) = bisect(h, entries[i].q0[0], entries[i + 1].q0[0], a, spec, tol) {
                        roots.push(root);
                    }
                }
            }
        }
        i += 1;
    }
    roots
}

fn bisect(h: &HamiltonianExpr, mut lo: f64, mut hi: f64, p_lo: f64, spec: &FlowSpec, tol: f64) -> Option<Root> {
    let sign_lo = p_lo.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (y, _) = psi(h, 1.0, &start(&[mid]), spec).ok()?;
        let p = y.p[0];
        if p.abs() <= tol || mid == lo || mid == hi {
            return Some(Root {
                q0: vec![mid],
                point: y,
                degenerate: false,
            });
        }
        if p.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    None
}

fn newton_roots(h: &HamiltonianExpr, sample: &LegendrianSample, grid: &Grid, spec: &FlowSpec, tol: f64) -> Vec<Root> {
    let n = h.dim();
    let f = |q: &[f64]| -> Result<Vec<f64>> { Ok(psi(h, 1.0, &start(q), spec)?.0.p) };
    let found: Vec<Option<Root>> = sample
        .entries
        .par_iter()
        .filter(|e| e.point.is_some())
        .map(|e| {
            let opts = NewtonOptions {
                tol,
                max_iter: 30,
                fd_step: 1e-7,
            };
            let sol = newton::solve(f, e.q0.clone(), opts).ok()?;
            if !grid.contains(&sol.x) {
                return None;
            }
            let point = psi(h, 1.0, &start(&sol.x), spec).ok()?.0;
            let jac = newton::fd_jacobian(&f, &sol.x, n, 1e-7).ok()?;
            Some(Root {
                degenerate: jac.determinant().abs() <= 1e-8,
                q0: sol.x,
                point,
            })
        })
        .collect();
    let mut roots: Vec<Root> = Vec::new();
    for r in found.into_iter().flatten() {
        let dup = roots.iter().any(|o| {
            let d: Vec<f64> = o.q0.iter().zip(&r.q0).map(|(a, b)| a - b).collect();
            sup(&d) <= 1e-6
        });
        if !dup {
            roots.push(r);
        }
    }
    roots
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroWallCrossing {
    pub point: ContactPoint,
    pub degenerate: bool,
}

/// Points `(q, 0, z)` where the time-one image meets `{p = 0}`.
pub fn zero_wall_crossings(
    h: &HamiltonianExpr,
    grid: &Grid,
    spec: &FlowSpec,
    tol: f64,
) -> Result<Vec<ZeroWallCrossing>> {
    let report = spectrum(h, grid, spec, tol)?;
    Ok(report
        .points
        .iter()
        .zip(&report.degenerate)
        .map(|(y, &degenerate)| ZeroWallCrossing {
            point: ContactPoint::new(y.q.clone(), vec![0.0; y.dim()], y.z),
            degenerate,
        })
        .collect())
}
