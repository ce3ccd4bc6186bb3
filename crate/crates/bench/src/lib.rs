//! Criterion benchmarks for the zfenergy kernels; see `benches/kernels.rs`.
//!
//! ```text
//! cargo bench -p zfenergy-bench
//! ```
