//! Benchmarks for `paralens`; see `benches/compose_modes.rs`. Run with
//! `cargo bench -p paralens-bench`.
