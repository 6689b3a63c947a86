//! End-to-end timing of the analysis pipeline: dual-rate assignment,
//! multi-rate search, the exact test, and one simulated scenario battery.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mcsched_bench::sample_sets;
use mcsched_core::dualrate::dual_rate_assign;
use mcsched_core::multirate::multi_rate_test;
use mcsched_core::simulator::{adversarial_scenarios, simulate};
use mcsched_core::soma::soma;

fn bench_assigners(c: &mut Criterion) {
    let mut group = c.benchmark_group("assign");
    for m in [2u32, 4, 8] {
        let sets = sample_sets(m, "0.85", 20);
        group.bench_with_input(BenchmarkId::new("dual_rate", m), &sets, |b, sets| {
            b.iter(|| {
                sets.iter()
                    .filter(|ts| dual_rate_assign(ts).is_some())
                    .count()
            })
        });
        group.bench_with_input(BenchmarkId::new("soma", m), &sets, |b, sets| {
            b.iter(|| sets.iter().filter(|ts| soma(ts).is_success()).count())
        });
    }
    group.finish();
}

fn bench_exact_test(c: &mut Criterion) {
    let sets = sample_sets(4, "0.80", 20);
    let accepted: Vec<_> = sets
        .iter()
        .filter_map(|ts| soma(ts).assignment.map(|a| (ts.clone(), a)))
        .collect();
    c.bench_function("multi_rate_test", |b| {
        b.iter(|| {
            accepted
                .iter()
                .filter(|(ts, a)| multi_rate_test(ts, a).unwrap().is_schedulable())
                .count()
        })
    });
}

fn bench_simulation(c: &mut Criterion) {
    let sets = sample_sets(2, "0.80", 8);
    let accepted: Vec<_> = sets
        .iter()
        .filter_map(|ts| soma(ts).assignment.map(|a| (ts.clone(), a)))
        .collect();
    c.bench_function("simulate_battery", |b| {
        b.iter(|| {
            let mut met = 0usize;
            for (ts, a) in &accepted {
                for sc in adversarial_scenarios(ts, a, 2, 1) {
                    let (_, v) = simulate(ts, a, &sc).unwrap();
                    met += usize::from(v.all_met());
                }
            }
            met
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_assigners, bench_exact_test, bench_simulation
}
criterion_main!(benches);
