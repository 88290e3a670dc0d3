//! Criterion benchmarks for the simulation hot paths; see benches/.
