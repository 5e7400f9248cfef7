//! Criterion benchmarks for the release pipeline live in `benches/`.
