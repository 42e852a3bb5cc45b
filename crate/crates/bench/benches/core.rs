use std::hint::black_box;

use clab_core::analyzer::{certify_qp_scalar, exhaustive_scan, refute_qp2_diag, separation};
use clab_core::padic::q;
use clab_core::{
    chabauty_dist, AmbientGroup, Automorphism, ClosedSubgroup, MetricConfig, PrimeContext, QpMatrix, QpModule, Route,
};
use criterion::{criterion_group, criterion_main, Criterion};

fn qp2(p: u64) -> AmbientGroup {
    AmbientGroup::PAdicSpace(PrimeContext::new(p, 24).unwrap(), 2)
}

fn canonicalize(c: &mut Criterion) {
    let m = QpModule::new(3, vec![vec![q(3, 1), q(9, 2), q(1, 27)]], vec![vec![q(5, 3), q(-7, 1), q(2, 9)], vec![q(1, 1), q(81, 1), q(-4, 3)]])
        .unwrap();
    c.bench_function("canonicalize/qp3_rank3", |b| b.iter(|| black_box(&m).canonicalize(3)));
}

fn metric(c: &mut Criterion) {
    let amb = qp2(3);
    let a = ClosedSubgroup::Module(QpModule::lattice(2, vec![vec![q(1, 1), q(3, 1)], vec![q(0, 1), q(27, 1)]]).unwrap().canonicalize(3));
    let b = ClosedSubgroup::Module(QpModule::line(vec![q(1, 1), q(10, 1)]).unwrap().canonicalize(3));
    let mut group = c.benchmark_group("chabauty_dist");
    for (name, route) in [("auto", Route::Auto), ("generators", Route::Generators)] {
        let cfg = MetricConfig::default().with_route(route);
        group.bench_function(name, |bench| bench.iter(|| chabauty_dist(&amb, black_box(&a), black_box(&b), &cfg).unwrap()));
    }
    group.finish();
}

fn analyzer(c: &mut Criterion) {
    let cfg = MetricConfig::default();
    c.bench_function("certify/qp3_scalar_27", |b| b.iter(|| certify_qp_scalar(3, black_box(&q(27, 1))).unwrap()));
    let mut slow = c.benchmark_group("analyzer");
    slow.sample_size(10);
    slow.bench_function("scan/qp3_k10_n20", |b| b.iter(|| exhaustive_scan(3, &q(3, 1), 10, 20, &cfg).unwrap()));
    let amb = qp2(3);
    let d = QpMatrix::diagonal(3, vec![q(3, 1), q(1, 1)]).unwrap();
    slow.bench_function("refute/qp2_diag_n50", |b| b.iter(|| refute_qp2_diag(&amb, &d, &q(1, 729), 50, &cfg).unwrap()));
    let t = Automorphism::QpMatrix(d.clone());
    let l1 = ClosedSubgroup::Module(QpModule::line(vec![q(1, 1), q(1, 1)]).unwrap().canonicalize(3));
    let l2 = ClosedSubgroup::Module(QpModule::line(vec![q(28, 1), q(1, 1)]).unwrap().canonicalize(3));
    slow.bench_function("separation/lines_n50", |b| b.iter(|| separation(&amb, &t, &l1, &l2, 50, &cfg).unwrap()));
    slow.finish();
}

criterion_group!(benches, canonicalize, metric, analyzer);
criterion_main!(benches);
