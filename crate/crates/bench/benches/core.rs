use std::hint::black_box;

use bora_bench::{rng, simplex_points, training_set};
use bora_core::gp::{fit_gp, GpModel, KernelKind, KernelSpec};
use bora_core::measures::wasserstein_p;
use bora_core::{maximize_ucb_simplex, PolicyId};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn wasserstein(c: &mut Criterion) {
    let mut group = c.benchmark_group("wasserstein_p");
    for m in [2, 20, 200] {
        let points = simplex_points(m, 2, 7);
        group.bench_with_input(BenchmarkId::from_parameter(m), &points, |b, p| {
            b.iter(|| wasserstein_p(black_box(&p[0]), black_box(&p[1]), 1.0).unwrap())
        });
    }
    group.finish();
}

fn gp_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_gp");
    group.sample_size(10);
    for (name, kind) in
        [("se_anisotropic", KernelKind::SeAnisotropic), ("wasserstein_p2", KernelKind::WassersteinSe { p: 2.0 })]
    {
        for n in [20, 100] {
            let (inputs, targets) = training_set(5, n, 11);
            group.bench_with_input(BenchmarkId::new(name, n), &(inputs, targets), |b, (x, y)| {
                b.iter(|| fit_gp(x, y, kind, &mut rng(3)).unwrap())
            });
        }
    }
    group.finish();
}

fn acquisition(c: &mut Criterion) {
    let mut group = c.benchmark_group("maximize_ucb_simplex");
    group.sample_size(10);
    for m in [2, 20] {
        let (inputs, targets) = training_set(m, 50, 13);
        let spec = KernelSpec::wasserstein_se(1.0, 0.3, 2.0, 1e-2).unwrap();
        let model = GpModel::condition(spec, inputs, targets).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &model, |b, model| {
            b.iter(|| maximize_ucb_simplex(model, 2.0, &mut rng(5)).unwrap())
        });
    }
    group.finish();
}

fn policy_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("policy_decide");
    group.sample_size(10);
    let config = bora_core::policies::BoraConfig::default();
    for id in [PolicyId::Bora1, PolicyId::Bora3, PolicyId::Sbf] {
        let mut policy = bora_core::policies::make_policy(id, 5, &config);
        let mut r = rng(17);
        for t in 1..=30 {
            let x = policy.decide(40.0, &mut r).unwrap();
            let outcomes: Vec<bool> = x.amounts().iter().map(|v| *v >= 8.0).collect();
            let reward = outcomes.iter().filter(|o| **o).count() as f64;
            policy.observe(bora_core::ObservationRecord::new(x, reward, Some(outcomes), t).unwrap()).unwrap();
        }
        group.bench_function(id.as_str(), |b| b.iter(|| policy.decide(40.0, &mut rng(19)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, wasserstein, gp_fit, acquisition, policy_step);
criterion_main!(benches);
