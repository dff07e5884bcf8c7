use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use rabi::config::ModelConfig;
use rabi::dynamics::{linspace, rabi_curve_with, reference_initial_state, GeometryMode};
use rabi::experiment::{fit_parameters, synthetic_dataset, FitConfig, FitParam};
use rabi::model::{detailed_balance_rates, BaseRates, DressedLadder, PhysicalParams};
use rabi::oracle::expm_trajectory;
use rabi::{Execution, Generator};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn curves(c: &mut Criterion) {
    let p = PhysicalParams::default();
    let ladder = DressedLadder::new(&p, 2).unwrap();
    let rates = detailed_balance_rates(&p, &BaseRates::reference(p.g, 2)).unwrap();
    let rho0 = reference_initial_state(&ladder).unwrap();
    let grid = linspace(0.0, 600e-6, 16384);
    let mut group = c.benchmark_group("rabi_curve");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                rabi_curve_with(&p, &rates, &rho0, black_box(&grid), GeometryMode::Raw, exec)
                    .unwrap()
            })
        });
    }
    group.finish();

    let gen = Generator::new(&ladder, &rates).unwrap();
    let grid = linspace(0.0, 600e-6, 256);
    let mut group = c.benchmark_group("expm_trajectory");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| expm_trajectory(&gen, &rho0, black_box(&grid), exec).unwrap())
        });
    }
    group.finish();
}

fn fit(c: &mut Criterion) {
    let model = ModelConfig::default();
    let data = synthetic_dataset(&model, 2, &linspace(1e-6, 10e-3, 2048), 0.01, 1).unwrap();
    let mut group = c.benchmark_group("fit_two_parameters");
    group.sample_size(10);
    for (name, exec) in MODES {
        let mut cfg = FitConfig::new(model.clone(), &[FitParam::GammaCavity, FitParam::GammaLong]);
        cfg.exec = exec;
        cfg.max_cycles = 3;
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| fit_parameters(black_box(&data), &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, curves, fit);
criterion_main!(benches);
