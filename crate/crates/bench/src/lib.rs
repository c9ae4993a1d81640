//! Benchmarks for the numerical kernels; see `benches/kernels.rs`.
