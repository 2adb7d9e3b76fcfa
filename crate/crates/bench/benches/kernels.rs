use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use surfrd_bench::{cloth, full_model, points};
use surfrd_core::geometry::metric_at;
use surfrd_core::network::JetOrder;
use surfrd_core::physics::{GrayScottParams, InitialCondition, InitialConditionConfig};
use surfrd_core::sfem::{FieldSnapshot, Kinetics, SfemSolver, TriMesh};
use surfrd_core::trainer::{loss_and_grad, Problem, TrainConfig};

fn metric(c: &mut Criterion) {
    let s = cloth();
    let pts = points(1024);
    c.bench_function("metric_at/1024", |b| {
        b.iter(|| pts.iter().map(|p| metric_at(&s, p[0], p[1]).det_g).sum::<f64>())
    });
}

fn network(c: &mut Criterion) {
    let model = full_model();
    let pts = points(1024);
    let mut g = c.benchmark_group("forward/1024");
    g.sample_size(10);
    for (name, order) in [("value", JetOrder::Value), ("spatial", JetOrder::Spatial), ("full", JetOrder::Full)] {
        g.bench_with_input(BenchmarkId::from_parameter(name), &order, |b, &o| {
            b.iter(|| model.evaluate(&pts, o, false))
        });
    }
    g.finish();
}

fn training_step(c: &mut Criterion) {
    let s = cloth();
    let physics = GrayScottParams::default();
    let ic = InitialCondition::new(InitialConditionConfig::default());
    let problem = Problem { surface: &s, physics: &physics, ic: &ic };
    let cfg = TrainConfig {
        collocation_batch: 512,
        bc_batch: 128,
        ic_batch: 128,
        mass_points: 256,
        mass_slices: 2,
        ..TrainConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let batches = problem.sample(&cfg, 2000.0, &mut rng);
    let quad = problem.quadrature(&cfg);
    let model = full_model();
    let weights = cfg.base_weights(1.0);
    let mut g = c.benchmark_group("loss_and_grad");
    g.sample_size(10);
    g.bench_function("batch512", |b| {
        b.iter(|| loss_and_grad(&model, &batches, &quad, &physics, &weights).unwrap())
    });
    g.finish();
}

fn sfem_step(c: &mut Criterion) {
    let s = cloth();
    let mesh = TriMesh::build(&s, 128).unwrap();
    let ic = InitialCondition::new(InitialConditionConfig::default());
    let state = FieldSnapshot::initial(&mesh, &ic);
    let solver = SfemSolver::new(mesh, GrayScottParams::default(), 1.0, Kinetics::GrayScott).unwrap();
    let mut g = c.benchmark_group("sfem");
    g.sample_size(20);
    g.bench_function("step/n128", |b| b.iter(|| solver.step(&state).unwrap()));
    g.finish();
}

criterion_group!(benches, metric, network, training_step, sfem_step);
criterion_main!(benches);
