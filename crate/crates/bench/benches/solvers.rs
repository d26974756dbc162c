use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use msvm_bench::five_class_train;
use msvm_core::basis::{expand_basis, BasisSpec};
use msvm_core::lpmodel::fit_penalized;
use msvm_core::model::hinge_objective_loss;
use msvm_core::penalty::PenaltySpec;
use msvm_core::CoefModel;

fn bench_lp_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("lp_fit");
    group.sample_size(10);
    for n in [50usize, 100] {
        let train = five_class_train(n);
        group.bench_with_input(BenchmarkId::new("supnorm", n), &train, |b, data| {
            b.iter(|| fit_penalized(data, &PenaltySpec::SupNorm, 0.05).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("l1", n), &train, |b, data| {
            b.iter(|| fit_penalized(data, &PenaltySpec::L1, 0.05).unwrap())
        });
    }
    group.finish();
}

fn bench_hinge_loss(c: &mut Criterion) {
    let train = five_class_train(250);
    let model = CoefModel::zero(5, 10);
    c.bench_function("hinge_loss_250x10", |b| {
        b.iter(|| hinge_objective_loss(&model, &train).unwrap())
    });
}

fn bench_basis_expansion(c: &mut Criterion) {
    let train = five_class_train(250);
    c.bench_function("expand_poly3_250x10", |b| {
        b.iter(|| expand_basis(&train, BasisSpec::poly(3)).unwrap())
    });
}

criterion_group!(benches, bench_lp_fit, bench_hinge_loss, bench_basis_expansion);
criterion_main!(benches);
