use gfqi::families::{compactified, random_fiber_point, test_family};
use gfqi::genfun::{
    build_broken_trajectory, coordinate_jacobian, critical_solve, gradient_fd, vertical_gradient_analytic, s_eval, s_eval_detailed, tilde_vars, TELESCOPING_TOL,
};
use gfqi::{rng, CutoffParams, FiberPoint, FlowSpec, Partition};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn telescoping_holds(seed in any::<u64>(), k in 0..4usize, n in 2..12usize, x in 0.01..5.0f64, p in 0.01..5.0f64) {
        let part = Partition::new(n).unwrap();
        let mut r = rng::stream(seed, "telescoping", 0);
        let e = random_fiber_point(&mut r, &[0.5], &part, x, p);
        let s = s_eval_detailed(&test_family()[k], &e, &part, &CutoffParams::default(), &FlowSpec::default()).unwrap();
        prop_assert!(s.rel_residual <= TELESCOPING_TOL);
    }

    #[test]
    fn pairing_is_invariant(seed in any::<u64>(), n in 2..10usize, x in 0.01..100.0f64, p in 0.01..100.0f64) {
        let part = Partition::new(n).unwrap();
        let mut r = rng::stream(seed, "pairing", 0);
        let e = random_fiber_point(&mut r, &[0.0, 1.0], &part, x, p);
        let (xt, pt) = tilde_vars(&e, &CutoffParams::default()).unwrap();
        let tilde: f64 = xt.iter().zip(&pt).map(|(a, b)| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>()).sum();
        let raw = e.pairing();
        let scale: f64 = e.x.iter().zip(&e.p).map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u * v).abs()).sum::<f64>()).sum();
        prop_assert!((tilde - raw).abs() <= 1e-14 * (1.0 + scale));
    }

    #[test]
    fn weights_are_positive(seed in any::<u64>(), k in 0..4usize) {
        let part = Partition::new(6).unwrap();
        let mut r = rng::stream(seed, "weights", 0);
        let e = random_fiber_point(&mut r, &[0.2], &part, 0.3, 1.0);
        let b = build_broken_trajectory(&test_family()[k], &e, &part, &CutoffParams::default(), &FlowSpec::default()).unwrap();
        prop_assert!(b.cumulative.iter().all(|g| g.exp() > 0.0));
        prop_assert_eq!(b.increments.len(), 5);
    }
}

#[test]
fn near_critical_points_have_small_fiber_gradient() {
    let (c, spec) = (CutoffParams::default(), FlowSpec::default());
    let part = Partition::new(8).unwrap();
    let mut worst_ratio = 0.0f64;
    for (k, h) in test_family().iter().enumerate() {
        let sol = critical_solve(h, &[0.4], &part, &c, &spec).unwrap();
        for (i, eps) in [1e-3, 1e-4, 1e-5].iter().enumerate() {
            let mut r = rng::stream(9, "near_critical", (4 * k + i) as u64);
            let noise = random_fiber_point(&mut r, &[0.0], &part, *eps, *eps);
            let mut e = sol.e.clone();
            for j in 0..part.jumps() {
                e.x[j][0] += noise.x[j][0];
                e.p[j][0] += noise.p[j][0];
            }
            let g = gradient_fd(h, &e, &part, &c, &spec, None).unwrap();
            // Remove the base direction: subtract p_N dq_N/d(raw).
            let jac = coordinate_jacobian(h, &e, &part, &c, &spec, None).unwrap();
            let p_n = vertical_gradient_analytic(h, &e, &part, &c, &spec).unwrap().d_q_final[0];
            let last = jac.matrix.nrows() - 1;
            let fiber = (1..g.len()).fold(0.0f64, |m, j| m.max((g[j] - p_n * jac.matrix[(last, j)]).abs()));
            let b = build_broken_trajectory(h, &e, &part, &c, &spec).unwrap();
            let residual = (0..part.jumps()).fold(0.0f64, |m, j| {
                m.max(e.x[j][0].abs()).max((b.p_tilde[j][0] - b.y_minus[j].p[0]).abs())
            });
            worst_ratio = worst_ratio.max((fiber - 1e-5).max(0.0) / residual);
        }
    }
    println!("criticality constant C = {worst_ratio:.3}");
    assert!(worst_ratio <= 10.0);
}

#[test]
fn refinement_preserves_critical_values() {
    let (c, spec) = (CutoffParams::default(), FlowSpec::new(1600).unwrap());
    for h in test_family() {
        let values: Vec<f64> = [8, 16]
            .iter()
            .map(|&n| {
                let part = Partition::new(n).unwrap();
                let sol = critical_solve(&h, &[0.6], &part, &c, &spec).unwrap();
                s_eval(&h, &sol.e, &part, &c, &spec).unwrap()
            })
            .collect();
        assert!((values[0] - values[1]).abs() <= 1e-7, "{}: {values:?}", h.source());
    }
}

#[test]
fn plateau_reeb_gradient_vanishes_in_p() {
    let (c, spec) = (CutoffParams::default(), FlowSpec::default());
    let part = Partition::new(4).unwrap();
    let h = compactified("-1", 1).unwrap();
    let mut e = FiberPoint::zero(&[0.5], &part);
    e.p[1][0] = 0.3;
    e.x[2][0] = 0.1;
    let g = gradient_fd(&h, &e, &part, &c, &spec, None).unwrap();
    for k in 0..part.jumps() {
        assert!(g[1 + 2 * k + 1].abs() <= 1e-6 || k == 2);
    }
}
