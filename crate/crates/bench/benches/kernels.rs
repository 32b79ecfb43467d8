use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use gfqi::families::compactified;
use gfqi::flow::integrate;
use gfqi::genfun::{critical_solve, s_eval};
use gfqi::{ContactPoint, CutoffParams, FiberPoint, FlowSpec, Partition};

const H: &str = "p1^2/2 + cos(q1) + 0.5*z";

fn kernels(c: &mut Criterion) {
    let h = compactified(H, 1).unwrap();
    let y = ContactPoint::new(vec![0.3], vec![0.4], 0.1);
    let spec = FlowSpec::default();
    let part = Partition::new(16).unwrap();
    let cutoff = CutoffParams::default();

    let mut ev = h.evaluator();
    c.bench_function("hamiltonian_jet", |b| b.iter(|| ev.jet(black_box(0.5), black_box(&y)).unwrap()));

    c.bench_function("integrate_unit_time", |b| {
        b.iter(|| integrate(&h, black_box(&y), 0.0, 1.0, &spec).unwrap())
    });

    let e = FiberPoint::zero(&[0.3], &part);
    c.bench_function("s_eval_n16", |b| b.iter(|| s_eval(&h, black_box(&e), &part, &cutoff, &spec).unwrap()));

    c.bench_function("critical_solve_n16", |b| {
        b.iter(|| critical_solve(&h, black_box(&[0.3]), &part, &cutoff, &spec).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = kernels
}
criterion_main!(benches);
