//! Criterion benchmarks for the hot loops of `onet-core`; see `benches/`.
