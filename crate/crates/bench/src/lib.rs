//! Benchmarks for the norm routines; see `benches/norms.rs`.
