use std::hint::black_box;
use std::path::Path;

use consumption_duality::exec::Exec;
use consumption_duality::report::{load_builder, load_scenario, solve_grid, sweep};
use consumption_duality::scenarios::lakner_slud;
use consumption_duality::market::ConsumptionMeasure;
use consumption_duality::solver::{minimax_check, SolverOptions};
use consumption_duality::utility::{UtilityField, UtilitySpec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn wealth_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.25 + 0.25 * i as f64).collect()
}

fn bench_solve_grid(c: &mut Criterion) {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mixed_two_asset.scn");
    let loaded = load_scenario(&fixture).unwrap();
    let deep = load_builder("lakner_slud:e=1,p=0.5,n=6", Some(UtilitySpec::log())).unwrap();
    let xs = wealth_grid(16);
    let opts = SolverOptions::default();
    let mut group = c.benchmark_group("solve_grid");
    for (label, scenario) in [("mixed_two_asset", &loaded), ("lakner_slud_n6", &deep)] {
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, label), &exec, |b, &exec| {
                b.iter(|| solve_grid(black_box(scenario), &xs, &[], &opts, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/no_short_sale_power.scn");
    let loaded = load_scenario(&fixture).unwrap();
    let xs = wealth_grid(12);
    let ys: Vec<f64> = (0..12).map(|i| 0.2 * 1.3f64.powi(i)).collect();
    let opts = SolverOptions::default();
    let mut group = c.benchmark_group("sweep");
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| b.iter(|| sweep(black_box(&loaded), &xs, &ys, &opts, exec).unwrap()));
    }
    group.finish();
}

fn bench_minimax(c: &mut Criterion) {
    let s = lakner_slud(&[0.0, 2.0, 1.0], 0.5, 1)
        .unwrap()
        .with_mu(ConsumptionMeasure::point_mass(2, 1))
        .unwrap();
    let field = UtilityField::resolve(&UtilitySpec::log(), s.tree()).unwrap();
    let mut group = c.benchmark_group("minimax");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| {
            b.iter(|| minimax_check(black_box(&s), &field, 1.0, 4.0, 2e-3, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_solve_grid, bench_sweep, bench_minimax);
criterion_main!(benches);
