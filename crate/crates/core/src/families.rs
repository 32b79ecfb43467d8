//! Reference Hamiltonians and random inputs shared by tests, benchmarks
//! and the command-line checks.

use std::f64::consts::PI;

use rand::Rng;

use crate::action::Path;
use crate::contact::{ContactPoint, TangentVector};
use crate::error::Result;
use crate::genfun::{FiberPoint, Partition};
use crate::hamlang::HamiltonianExpr;

pub const SUPPORT_RADIUS: f64 = 10.0;
pub const COLLAR_WIDTH: f64 = 1.0;

/// One-dimensional test family: potential, potential with friction, and
/// the pendulum with and without friction.
pub const TEST_FAMILY: [&str; 4] = [
    "cos(q1)",
    "cos(q1) + 0.7*z",
    "p1^2/2 + cos(q1)",
    "p1^2/2 + cos(q1) + 0.5*z",
];

/// `src` cut off outside the ball of radius [`SUPPORT_RADIUS`].
pub fn compactified(src: &str, dim: usize) -> Result<HamiltonianExpr> {
    HamiltonianExpr::parse(src, dim)?.compactify(SUPPORT_RADIUS, COLLAR_WIDTH)
}

pub fn test_family() -> Vec<HamiltonianExpr> {
    TEST_FAMILY
        .iter()
        .map(|src| compactified(src, 1).expect("family parses"))
        .collect()
}

fn uniform(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..=scale)).collect()
}

/// Point with every coordinate uniform in `[-scale, scale]`.
pub fn random_point(rng: &mut impl Rng, dim: usize, scale: f64) -> ContactPoint {
    ContactPoint::new(uniform(rng, dim, scale), uniform(rng, dim, scale), rng.random_range(-scale..=scale))
}

pub fn random_tangent(rng: &mut impl Rng, dim: usize) -> TangentVector {
    TangentVector::new(uniform(rng, dim, 1.0), uniform(rng, dim, 1.0), rng.random_range(-1.0..=1.0))
}

/// Low-frequency trigonometric path on `[0, 1]` with `m` intervals and
/// amplitude about `scale`.
pub fn random_smooth_path(rng: &mut impl Rng, dim: usize, m: usize, scale: f64) -> Result<Path> {
    let coeffs: Vec<[f64; 7]> = (0..2 * dim + 1)
        .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..=1.0)))
        .collect();
    Path::from_fn(m, |t| {
        let flat: Vec<f64> = coeffs
            .iter()
            .map(|c| {
                let mut v = c[0];
                for j in 1..=3 {
                    let w = j as f64 * PI * t;
                    v += (c[2 * j - 1] * w.sin() + c[2 * j] * w.cos()) / j as f64;
                }
                scale * v
            })
            .collect();
        ContactPoint::from_flat(&flat)
    })
}

/// Fiber point over `q0` with `|X_k|_inf <= x_scale` and
/// `|P_k|_inf <= p_scale`.
pub fn random_fiber_point(rng: &mut impl Rng, q0: &[f64], part: &Partition, x_scale: f64, p_scale: f64) -> FiberPoint {
    let mut e = FiberPoint::zero(q0, part);
    for (x, p) in e.x.iter_mut().zip(e.p.iter_mut()) {
        *x = uniform(rng, q0.len(), x_scale);
        *p = uniform(rng, q0.len(), p_scale);
    }
    e
}
