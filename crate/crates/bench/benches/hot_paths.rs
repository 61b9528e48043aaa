use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use kernelflows::generator::{generator_check, DmBuilder};
use kernelflows::motion::sample_npoint_at;
use kernelflows::skewbm::skew_from_walk;
use kernelflows::{flow_compose, generate_brownian, kernel_km, sample_npoint, stream, Domain, ExcursionRegistry, Measure, TimeGrid};

fn paths(c: &mut Criterion) {
    let mut g = c.benchmark_group("paths");
    for steps in [1_000usize, 10_000, 100_000] {
        let grid = TimeGrid::new(0.0, 1.0 / steps as f64, steps).unwrap();
        g.throughput(Throughput::Elements(steps as u64));
        g.bench_with_input(BenchmarkId::new("generate_brownian", steps), &grid, |b, &grid| {
            let mut rng = stream(1, Domain::Path, 0);
            b.iter(|| generate_brownian(grid, &mut rng))
        });
        let path = generate_brownian(grid, &mut stream(1, Domain::Path, 0));
        g.bench_with_input(BenchmarkId::new("running_min", steps), &path, |b, p| b.iter(|| p.running_min(black_box(0))));
    }
    g.finish();
}

fn kernels(c: &mut Criterion) {
    let grid = TimeGrid::new(0.0, 1e-3, 1000).unwrap();
    let path = generate_brownian(grid, &mut stream(2, Domain::Path, 0));
    let m = Measure::Uniform;
    let mut g = c.benchmark_group("kernels");
    g.bench_function("kernel_km", |b| {
        let mut reg = ExcursionRegistry::new(&m, 3);
        b.iter(|| kernel_km(&path, &mut reg, black_box(100), black_box(900), black_box(0.05)).unwrap())
    });
    g.bench_function("flow_compose", |b| {
        let mut reg = ExcursionRegistry::new(&m, 3);
        b.iter(|| flow_compose(&path, &mut reg, black_box(100), black_box(500), black_box(900), black_box(0.05)).unwrap())
    });
    g.finish();
}

fn motions(c: &mut Criterion) {
    let grid = TimeGrid::new(0.0, 1e-4, 10_000).unwrap();
    let path = generate_brownian(grid, &mut stream(4, Domain::Path, 0));
    let m = Measure::beta_symmetric(2.0).unwrap();
    let mut g = c.benchmark_group("motions");
    g.throughput(Throughput::Elements(10_000));
    for n in [1usize, 4] {
        let x0 = vec![0.0; n];
        g.bench_with_input(BenchmarkId::new("sample_npoint", n), &x0, |b, x0| {
            let mut rng = stream(4, Domain::Signs, 0);
            b.iter(|| sample_npoint(&path, &m, x0, &mut rng).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("sample_npoint_at", n), &x0, |b, x0| {
            let mut rng = stream(4, Domain::Signs, 0);
            b.iter(|| sample_npoint_at(&path, &m, x0, &[10_000], &mut rng).unwrap())
        });
    }
    g.finish();
}

fn skew(c: &mut Criterion) {
    let mut g = c.benchmark_group("skew");
    g.sample_size(20);
    for scale in [6u32, 8] {
        g.bench_with_input(BenchmarkId::new("skew_from_walk", scale), &scale, |b, &scale| {
            let mut rng = stream(5, Domain::Walk, 0);
            b.iter(|| skew_from_walk(0.7, scale, 1.0, &mut rng).unwrap())
        });
    }
    g.finish();
}

fn generator(c: &mut Criterion) {
    let m = Measure::beta_symmetric(2.0).unwrap();
    let f = DmBuilder::new(2).slope(0, 0.4).cubic(0, 0.5, 0.5).cross(0, 1, 0.8).build(&m).unwrap();
    let mut g = c.benchmark_group("generator");
    g.sample_size(10);
    g.bench_function("generator_check_1e4", |b| b.iter(|| generator_check(&f, &m, &[0.0, 0.0], 1e-3, 10_000, 6).unwrap()));
    g.finish();
}

criterion_group!(benches, paths, kernels, motions, skew, generator);
criterion_main!(benches);
