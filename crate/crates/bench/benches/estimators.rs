use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ddr_core::classifier::{fit_weighted_gnb, fit_wlspc};
use ddr_core::data::{gen_two_class_four_cluster, Domain};
use ddr_core::ddr::{ddr_fit, DdrConfig};
use ddr_core::density_ratio::{fit_ulsif, fit_ulsif_auto, RatioGrid};
use ddr_core::kernel::{kernel_matrix, sample_centers, KernelParams};

fn estimators(c: &mut Criterion) {
    let train = gen_two_class_four_cluster(500, Domain::Train, 1).unwrap();
    let test = gen_two_class_four_cluster(2000, Domain::Test, 2).unwrap();
    let classes = train.classes().unwrap();
    let y = train.encode_labels(&classes).unwrap();
    let centers = sample_centers(test.x(), 100, 3).unwrap();
    let ones = vec![1.0; train.n_rows()];

    c.bench_function("kernel_matrix 2000x100", |b| {
        b.iter(|| kernel_matrix(black_box(test.x()), &centers, KernelParams::new(1.0).unwrap()).unwrap())
    });
    c.bench_function("fit_ulsif fixed", |b| {
        b.iter(|| fit_ulsif(black_box(train.x()), test.x(), &centers, 1.0, 0.1).unwrap())
    });
    c.bench_function("fit_ulsif selected", |b| {
        b.iter(|| fit_ulsif_auto(black_box(train.x()), test.x(), &RatioGrid::default(), 4).unwrap())
    });
    c.bench_function("fit_weighted_gnb", |b| {
        b.iter(|| fit_weighted_gnb(black_box(train.x()), &y, &ones).unwrap())
    });
    c.bench_function("fit_wlspc", |b| {
        b.iter(|| fit_wlspc(black_box(train.x()), &y, &ones, 1.0, 0.1, &centers).unwrap())
    });

    let mut group = c.benchmark_group("ddr");
    group.sample_size(10);
    group.bench_function("ddr_fit gnb 500/2000", |b| {
        b.iter(|| ddr_fit(black_box(train.x()), &y, test.x(), &DdrConfig::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, estimators);
criterion_main!(benches);
