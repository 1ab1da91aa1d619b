//! Criterion benchmarks for the saliency pipeline; see `benches/pipeline.rs`.
