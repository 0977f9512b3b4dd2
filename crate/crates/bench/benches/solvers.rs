use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use kirchhoff_bench::{supercritical_model, two_branch_params};
use kirchhoff_core::limit::log_grid;
use kirchhoff_core::{
    default_initial, normalized_gradient_flow, qp_l2_norm, root_equation_solve, shoot_ground_state, sweep,
    FlowSchedule, PotentialSpec, ShootingConfig,
};

fn shooting(c: &mut Criterion) {
    let cfg = ShootingConfig::default();
    c.bench_function("shoot N=3 p=4", |b| b.iter(|| shoot_ground_state(3, black_box(4.0), &cfg).unwrap()));
}

fn root_solve(c: &mut Criterion) {
    let params = two_branch_params();
    let q = qp_l2_norm(params.dim, params.p).unwrap();
    c.bench_function("root equation, two branches", |b| {
        b.iter(|| root_equation_solve(black_box(&params), q).unwrap())
    });
}

fn sweeps(c: &mut Criterion) {
    let model = supercritical_model();
    let grid = log_grid(1.0, 100.0, 200);
    qp_l2_norm(model.dim, model.p).unwrap();
    let mut group = c.benchmark_group("sweep 200 masses");
    group.bench_function("serial", |b| b.iter(|| sweep(&model, &grid, Some(1)).unwrap()));
    group.bench_function("parallel", |b| b.iter(|| sweep(&model, &grid, None).unwrap()));
    group.finish();
}

fn flow(c: &mut Criterion) {
    let params = two_branch_params();
    let init = default_initial(&params, 2_000).unwrap();
    let schedule = FlowSchedule::default();
    let mut group = c.benchmark_group("flow");
    group.sample_size(10);
    group.bench_function("2000 cells, V = 0", |b| {
        b.iter(|| normalized_gradient_flow(&init, &PotentialSpec::Zero, &params, &schedule).unwrap())
    });
    group.finish();
}

criterion_group!(benches, shooting, root_solve, sweeps, flow);
criterion_main!(benches);
