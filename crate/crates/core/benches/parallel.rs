use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lambkit::circuit::{fit_mbvd_batch, mbvd_admittance, FitOptions, MbvdModel, MotionalBranch, StaticNetwork};
use lambkit::dispersion::{solve_mode, LambMode, PlateSpec};
use lambkit::layout::{gen_wafer_map, WaferGeometry};
use lambkit::stats::{simulate_wafer, VariationModel};
use lambkit::Execution;
use std::f64::consts::PI;
use std::hint::black_box;

const STRATEGIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn dispersion(c: &mut Criterion) {
    let plate = PlateSpec::default_stack();
    let k: Vec<f64> = (0..400).map(|i| PI / 4.5e-6 + i as f64 * (PI / 0.5e-6 - PI / 4.5e-6) / 399.0).collect();
    let mut g = c.benchmark_group("solve_mode_S1_400k");
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| solve_mode(&plate, LambMode::S1, black_box(&k), exec).unwrap())
        });
    }
    g.finish();
}

fn wafer(c: &mut Criterion) {
    let plate = PlateSpec::default_stack();
    let sites = gen_wafer_map(17.0, 3.0, &WaferGeometry::default());
    let model = VariationModel { full_resolve: true, ..VariationModel::default() };
    let pitches = [1e-6, 2.5e-6, 4.5e-6];
    let mut g = c.benchmark_group("simulate_wafer_full_resolve");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| simulate_wafer(&model, &pitches, &[LambMode::S0, LambMode::S1], &plate, &sites, 50.0, exec).unwrap())
        });
    }
    g.finish();
}

fn fits(c: &mut Criterion) {
    let traces: Vec<_> = (0..16)
        .map(|i| {
            let f = 1e9 + 1e7 * i as f64;
            let c_m = 5e-14;
            let w = 2.0 * PI * f;
            let model = MbvdModel::new(StaticNetwork::new(1e-12, 0.0, 1.0), vec![MotionalBranch::new(4.0, 1.0 / (w * w * c_m), c_m)]).unwrap();
            let freqs: Vec<f64> = (0..400).map(|j| f * (0.9 + 0.2 * j as f64 / 399.0)).collect();
            mbvd_admittance(&model, &freqs).unwrap()
        })
        .collect();
    let options = FitOptions::default();
    let mut g = c.benchmark_group("fit_mbvd_batch_16");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| fit_mbvd_batch(black_box(&traces), 1, &options, exec)));
    }
    g.finish();
}

criterion_group!(benches, dispersion, wafer, fits);
criterion_main!(benches);
