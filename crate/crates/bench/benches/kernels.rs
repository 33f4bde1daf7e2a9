use criterion::{criterion_group, criterion_main, Criterion};
use halfspace::kernels::{kernel_value, robin_image_closed, robin_image_quadrature};
use halfspace::propagators::flowing_propagator;
use halfspace::quad::QuadOptions;
use halfspace::{CutoffPair, KernelContext, Part, PropagatorQuery};
use halfspace_bench::{kernel_grid, BOUNDARIES};
use std::hint::black_box;

fn kernels(c: &mut Criterion) {
    let grid = kernel_grid(10);
    let mut g = c.benchmark_group("kernel_grid_1000");
    for bc in BOUNDARIES {
        g.bench_function(bc.name(), |b| {
            b.iter(|| grid.iter().map(|&(t, z, zp)| kernel_value(bc, t, z, zp)).sum::<f64>())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("robin_image");
    g.bench_function("closed_form", |b| b.iter(|| robin_image_closed(black_box(0.7), black_box(1.3), black_box(2.0))));
    g.bench_function("quadrature", |b| {
        b.iter(|| robin_image_quadrature(black_box(0.7), black_box(1.3), black_box(2.0), QuadOptions::tol(1e-14, 1e-12)))
    });
    g.finish();
}

fn propagators(c: &mut Criterion) {
    let mut g = c.benchmark_group("flowing_propagator");
    for bc in BOUNDARIES {
        let ctx = KernelContext::new(1.0, bc).unwrap();
        let q = PropagatorQuery { p: 1.0, z: 0.4, zp: 1.1, ctx, cut: CutoffPair::new(0.5, 100.0).unwrap() };
        g.bench_function(bc.name(), |b| b.iter(|| flowing_propagator(black_box(q), Part::Full)));
    }
    g.finish();
}

criterion_group!(benches, kernels, propagators);
criterion_main!(benches);
