use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use otm_bench::unit_ball;
use otm_core::discretization::{build_neighbors, seed};
use otm_core::maxent::build_shape_table;
use otm_core::oracle::{wasserstein2, DiscreteMeasure};
use otm_core::{Domain, LmeParams, Point, SimConfig, Simulation};

fn seeding(c: &mut Criterion) {
    let domain = Domain::sphere(Point::zeros(), 3.0).unwrap();
    let region = Domain::sphere(Point::zeros(), 1.0).unwrap();
    c.bench_function("seed unit ball h=0.3", |b| {
        b.iter(|| seed(&domain, &region, black_box(0.3), 1.0).unwrap())
    });
}

fn shape_functions(c: &mut Criterion) {
    let (_, nodes, mps) = unit_ball(0.3);
    let lme = LmeParams::default();
    c.bench_function("neighbors h=0.3", |b| b.iter(|| build_neighbors(&nodes, &mps, &lme).unwrap()));
    let table = build_neighbors(&nodes, &mps, &lme).unwrap();
    c.bench_function("shape table h=0.3", |b| {
        b.iter(|| build_shape_table(&nodes, &mps, &table, &lme).unwrap())
    });
}

fn solver_step(c: &mut Criterion) {
    let sim = Simulation::new(SimConfig::preset("sphere_desk").unwrap()).unwrap();
    c.bench_function("step sphere_desk", |b| {
        b.iter_batched(|| sim.clone(), |mut s| s.step().unwrap(), BatchSize::LargeInput)
    });
    let annulus = Simulation::new(SimConfig::preset("annulus_advection").unwrap()).unwrap();
    c.bench_function("step annulus_advection", |b| {
        b.iter_batched(|| annulus.clone(), |mut s| s.step().unwrap(), BatchSize::LargeInput)
    });
}

fn transport(c: &mut Criterion) {
    let (_, _, mps) = unit_ball(0.3);
    let a = DiscreteMeasure::from_particles(&mps).unwrap().subsample(200);
    let mut shifted = mps.clone();
    shifted.positions_mut().iter_mut().for_each(|x| *x *= 1.2);
    let b = DiscreteMeasure::from_particles(&shifted).unwrap().subsample(200);
    c.bench_function("wasserstein2 weighted n=200", |bench| bench.iter(|| wasserstein2(&a, &b).unwrap()));
    let ua = DiscreteMeasure::uniform(a.points().to_vec()).unwrap();
    let ub = DiscreteMeasure::uniform(b.points().to_vec()).unwrap();
    c.bench_function("wasserstein2 assignment n=200", |bench| bench.iter(|| wasserstein2(&ua, &ub).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = seeding, shape_functions, solver_step, transport
}
criterion_main!(benches);
