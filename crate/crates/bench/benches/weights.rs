use criterion::{criterion_group, criterion_main, Criterion};
use halfspace::weights::gauss::orthant_probability;
use halfspace::weights::lemmas::{run_sweep, LemmaKind, SweepConfig};
use halfspace::weights::{global_weight_factor, Family, WeightQuery};
use halfspace::CutoffPair;
use nalgebra::{DMatrix, DVector};
use std::hint::black_box;

fn orthants(c: &mut Criterion) {
    let mut g = c.benchmark_group("orthant_probability");
    for r in [2usize, 3, 4] {
        let mu = DVector::from_fn(r, |i, _| 0.2 * i as f64 - 0.1);
        let sigma = DMatrix::from_fn(r, r, |i, j| if i == j { 1.0 + 0.1 * i as f64 } else { 0.3 });
        g.bench_function(format!("dim_{r}"), |b| b.iter(|| orthant_probability(black_box(&mu), black_box(&sigma))));
    }
    g.finish();
}

fn global_factors(c: &mut Criterion) {
    let cut = CutoffPair::new(1.0, 10.0).unwrap();
    let q = WeightQuery::new(vec![0.3, 0.8], vec![0.5, 1.5], cut, 0.5).unwrap();
    let mut g = c.benchmark_group("global_weight_factor");
    g.sample_size(10);
    g.bench_function("surface_s2_l1_cap2", |b| b.iter(|| global_weight_factor(2, 1, black_box(&q), Family::Surface, 2)));
    g.finish();

    let mut g = c.benchmark_group("lemma_sweep_4_samples");
    g.sample_size(10);
    for kind in [LemmaKind::Chain, LemmaKind::Testfn7, LemmaKind::Monotonicity] {
        let cfg = SweepConfig::new(kind, 4, 1);
        g.bench_function(format!("{kind:?}"), |b| b.iter(|| run_sweep(black_box(&cfg))));
    }
    g.finish();
}

criterion_group!(benches, orthants, global_factors);
criterion_main!(benches);
