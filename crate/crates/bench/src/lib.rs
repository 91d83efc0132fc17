//! Criterion benchmarks for `maxsep-core`; see `benches/`.
