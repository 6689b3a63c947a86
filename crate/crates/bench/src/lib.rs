//! Shared helpers for the criterion benchmarks in `benches/`.

use mcsched_core::rat::{rat, Rat};
use mcsched_core::taskgen::{generate, GeneratorConfig, Rng};
use mcsched_core::TaskSet;

/// Deterministic batch of schedulable-ish task sets for benchmarking.
pub fn sample_sets(m: u32, u_bound: &str, count: usize) -> Vec<TaskSet> {
    let ub: Rat = rat(u_bound);
    (0..count)
        .filter_map(|i| {
            let seed = Rng::derive_seed(0xbe9c, &[m as u64, i as u64]);
            let cfg = GeneratorConfig::new(m, ub.clone(), rat("0.5"), seed);
            generate(&cfg).ok()
        })
        .collect()
}
