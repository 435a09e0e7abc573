//! Timings of the expensive stages: triangulation, alpha search, sampling,
//! containment, surrogate inference and one process simulation.

use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use dspace::analysis::{find_aor, AorSettings};
use dspace::chromapcc::{simulate, ColumnParams, CycleSettings, DecisionVector};
use dspace::dsid::{find_alpha_radius, AlphaSearch};
use dspace::geometry::{convex_hull, delaunay};
use dspace::sampling::{sobol, Bounds};
use dspace::surrogate::{Interpolator, MinMax, Mlp};
use dspace_bench::{random_cloud, sphere_split};

fn geometry(c: &mut Criterion) {
    let pts = random_cloud(1000, 3, 1);
    c.bench_function("delaunay 3d 1000 points", |b| {
        b.iter(|| delaunay(black_box(&pts)).unwrap())
    });

    let (sat, vio) = sphere_split(12);
    let tri = delaunay(&sat).unwrap();
    let search = AlphaSearch::normalized(3, 0.0, [1e-3, 1e3], 1e-3, 50);
    c.bench_function("alpha radius search on the benchmark", |b| {
        b.iter(|| find_alpha_radius(&tri, black_box(&vio), &search).unwrap())
    });

    let hull = convex_hull(&sat).unwrap();
    let queries = random_cloud(10_000, 3, 2);
    c.bench_function("containment 10k queries", |b| {
        b.iter(|| queries.iter().filter(|q| hull.contains(q)).count())
    });
    c.bench_function("operating region at the centre", |b| {
        b.iter(|| find_aor(&hull, black_box(&[0.5, 0.5, 0.5]), &AorSettings::default()).unwrap())
    });
}

fn sampling(c: &mut Criterion) {
    let bounds = Bounds::unit(3);
    c.bench_function("sobol 3d 2^16 points", |b| {
        b.iter(|| sobol(3, black_box(&bounds), 16).unwrap())
    });
}

fn surrogate(c: &mut Criterion) {
    let unit = |d: usize| MinMax {
        min: vec![0.0; d],
        max: vec![1.0; d],
    };
    let net = Mlp::new(&[3, 64, 64, 64, 2], unit(3), unit(2), 0);
    let x = random_cloud(4096, 3, 3);
    c.bench_function("mlp 3x64 predict 4096 rows", |b| {
        b.iter(|| net.predict(black_box(&x)))
    });
}

fn process_model(c: &mut Criterion) {
    let p = ColumnParams::uncalibrated_default();
    let s = CycleSettings::default();
    let mut g = c.benchmark_group("chromapcc");
    g.sample_size(10);
    g.bench_function("simulate to cyclic steady state", |b| {
        b.iter_batched(
            || DecisionVector::new(0.42, 1.0, 80.0),
            |dd| simulate(dd, &p, &s).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

criterion_group!(benches, geometry, sampling, surrogate, process_model);
criterion_main!(benches);
