//! Criterion benchmarks for the spinelab kernels. See `benches/`.
