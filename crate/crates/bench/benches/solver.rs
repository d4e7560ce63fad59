use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rws_core::forcing::ForcingSpec;
use rws_core::hbuilder::build_h;
use rws_core::operators::OperatorWorkspace;
use rws_core::range::{solve_range, RangeConfig, SolverContext};
use rws_core::reducer::evaluate;
use rws_core::{Discretization, GridField, KernelElement, TorusProfile};

fn transforms(c: &mut Criterion) {
    let disc = Discretization::default();
    let g = GridField::from_fn(disc.grid(), |t, x| (t + x).sin() * x.sin() + (3.0 * t).cos() * (2.0 * x).sin());
    let s = disc.analyze(&g).unwrap();
    c.bench_function("analyze", |b| b.iter(|| disc.analyze(black_box(&g)).unwrap()));
    c.bench_function("synthesize", |b| b.iter(|| disc.synthesize(black_box(&s)).unwrap()));
}

fn solvers(c: &mut Criterion) {
    let disc = Discretization::default();
    let ws = OperatorWorkspace::new(disc.truncation());
    let h = GridField::from_fn(disc.grid(), |_, x| x.sin());
    let spec = ForcingSpec::theorem1(1, 1.0, h.clone(), &disc).unwrap();
    let ctx = SolverContext::new(&disc, &ws, &spec);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let v = KernelElement::new(TorusProfile::random(&mut rng, 4, 0.3).resized(disc.kernel_modes()));
    let cfg = RangeConfig { tol: 1e-12, max_iter: 200 };
    c.bench_function("range_solve", |b| b.iter(|| solve_range(&ctx, black_box(&v), 1e-2, &cfg, None).unwrap()));
    c.bench_function("reduced_evaluate", |b| b.iter(|| evaluate(&ctx, black_box(&v), 1e-2, &cfg, None).unwrap()));
    c.bench_function("build_h", |b| b.iter(|| build_h(&disc, black_box(&h)).unwrap()));
}

criterion_group!(benches, transforms, solvers);
criterion_main!(benches);
