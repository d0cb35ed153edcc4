//! Criterion benchmarks for the transform, noise and stepping kernels; see `benches/`.
