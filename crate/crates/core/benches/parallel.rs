//! Independent chains through `par_map` (rayon when the `parallel` feature is
//! on) against the same jobs run by `seq_map`.

use criterion::{criterion_group, criterion_main, Criterion};
use hsbqr::par::{par_map, seq_map};
use hsbqr::sampler::run_chain;
use hsbqr::{RngHandle, SamplerConfig};
use nalgebra::{DMatrix, DVector};
use std::hint::black_box;

fn chains(c: &mut Criterion) {
    let (t, k) = (80, 20);
    let mut rng = RngHandle::new(5, 0);
    let x = DMatrix::from_fn(t, k, |_, j| if j == 0 { 1.0 } else { rng.standard_normal() });
    let y = DVector::from_fn(t, |i, _| x[(i, 1)] - 0.5 * x[(i, 2)] + rng.standard_normal());
    let cfg = SamplerConfig {
        n_iter: 300,
        n_burn: 100,
        ..SamplerConfig::default()
    };
    let jobs: Vec<u64> = (0..16).collect();
    let fit = |&j: &u64| {
        let mut rng = RngHandle::new(11, j);
        run_chain(&mut rng, &x, &y, 0.1 + 0.05 * j as f64, &cfg).unwrap().mean_beta()[1]
    };

    let mut group = c.benchmark_group(format!("chains_16_parallel_{}", hsbqr::par::is_parallel()));
    group.sample_size(10);
    group.bench_function("par_map", |b| b.iter(|| black_box(par_map(&jobs, fit))));
    group.bench_function("seq_map", |b| b.iter(|| black_box(seq_map(&jobs, fit))));
    group.finish();
}

criterion_group!(benches, chains);
criterion_main!(benches);
