//! Criterion benchmarks for `conjugate-core`; run with `cargo bench -p conjugate-bench`.
