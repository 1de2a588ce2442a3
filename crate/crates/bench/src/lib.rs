//! Criterion benchmarks for `agejam-core`; see `benches/solvers.rs`.
