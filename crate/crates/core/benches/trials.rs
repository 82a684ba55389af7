//! Sequential vs parallel execution of a batch of independent trials, plus
//! the oracle's batched search.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use fdrelay::harness::{run_trial, RunConfig};
use fdrelay::oracle::brute_force_with;
use fdrelay::parallel::{self, Execution};
use fdrelay::{build_lifted, sample_realization, ZfcMode};

fn trials(c: &mut Criterion) {
    let rc = RunConfig::default();
    let mut group = c.benchmark_group("trials");
    group.sample_size(10);
    for n in [2, 3] {
        let cfg = rc.cell_config(n, -40.0, 20.0);
        for exec in [Execution::Sequential, Execution::Parallel] {
            group.bench_with_input(BenchmarkId::new(format!("{exec:?}"), n), &cfg, |b, cfg| {
                b.iter(|| {
                    let ids: Vec<u64> = (0..16).collect();
                    black_box(parallel::map(exec, ids, |t| run_trial(cfg, t, None)))
                })
            });
        }
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let mut cfg = RunConfig::default().cell_config(2, -40.0, 20.0);
    cfg.zfc_mode = ZfcMode::Strict;
    let ch = sample_realization(&cfg, 0).unwrap();
    let lp = build_lifted(&cfg, &ch).unwrap();
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_function(format!("{exec:?}"), |b| b.iter(|| black_box(brute_force_with(&lp, 50_000, 1, ZfcMode::Strict, exec).unwrap().j_bf)));
    }
    group.finish();
}

criterion_group!(benches, trials, oracle);
criterion_main!(benches);
