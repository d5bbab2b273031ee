//! Benchmark-only crate; see `benches/solve_bench.rs`.
