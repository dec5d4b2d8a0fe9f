//! Seeded, multi-run experiment orchestration for the `explore` binary.

pub mod av;
pub mod cmc;
pub mod runs;
