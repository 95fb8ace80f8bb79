//! Criterion benchmarks for the affinity, relation loss and log-det kernels
//! live under `benches/`.
