//! Benchmark-only crate; see `benches/planning.rs`.
