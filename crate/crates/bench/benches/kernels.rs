use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use spinelab::barriers::{verify_barrier, BarrierCandidate, RadialPower};
use spinelab::regularity::default_probe;
use spinelab::*;

fn potentials(c: &mut Criterion) {
    let q = QuadConfig::default();
    let leb = PotentialSpec::from_preset(Preset::Lebesgue).unwrap();
    let t23 = PotentialSpec::from_preset(Preset::T23D3 { c: 0.05 }).unwrap();
    c.bench_function("eval_u lebesgue", |b| {
        b.iter(|| leb.eval_u(black_box(0.3), black_box(0.01), &q).unwrap())
    });
    c.bench_function("eval_u t23_d3 near segment", |b| {
        b.iter(|| t23.eval_u(black_box(0.01), black_box(1e-6), &q).unwrap())
    });
    c.bench_function("pde_residual t23_d3", |b| {
        b.iter(|| {
            t23.pde_residual(black_box(0.02), black_box(0.01), &q)
                .unwrap()
        })
    });
    c.bench_function("eval_omega t23_d3", |b| {
        b.iter(|| {
            t23.eval_omega(black_box(0.02), black_box(0.01), &q)
                .unwrap()
        })
    });
}

fn regularity(c: &mut Criterion) {
    let q = QuadConfig::default();
    let p = SpineProfile::new(ProfileKind::ExpSpine { eps: 0.5 }, 0.25).unwrap();
    let probe = default_probe(0.25);
    c.bench_function("ito_mckean_test exp spine", |b| {
        b.iter(|| ito_mckean_test(&p, 3, black_box(&probe), &q).unwrap())
    });
}

fn barriers(c: &mut Criterion) {
    let d = 4;
    let cand = BarrierCandidate {
        w: Arc::new(RadialPower { a: 0.4 }),
        field: LambdaField::constant(0.3).unwrap(),
        d,
        domain: CuspDomain::new(
            d,
            0.5,
            SpineProfile::new(ProfileKind::Power { eta: 2.0 }, 0.5).unwrap(),
            true,
        )
        .unwrap(),
    };
    c.bench_function("verify_barrier radial power", |b| {
        b.iter(|| verify_barrier(&cand, black_box(&[(0.05, 0.2), (0.2, 0.45)]), 8).unwrap())
    });
}

fn diffusion(c: &mut Criterion) {
    let dom = CuspDomain::new(
        3,
        0.5,
        SpineProfile::new(ProfileKind::ExpSpine { eps: 0.5 }, 0.5).unwrap(),
        false,
    )
    .unwrap();
    let field = LambdaField::constant(1.0).unwrap();
    let cfg = SimConfig {
        paths: 200,
        ..SimConfig::default()
    };
    let mut g = c.benchmark_group("diffusion");
    g.sample_size(10);
    g.bench_function("simulate_paths 200 from (0, 0.1, 0)", |b| {
        b.iter(|| simulate_paths(&dom, &field, black_box(&[0.0, 0.1, 0.0]), &cfg).unwrap())
    });
    g.finish();
}

criterion_group!(benches, potentials, regularity, barriers, diffusion);
criterion_main!(benches);
