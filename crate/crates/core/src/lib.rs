//! Genetic-algorithm optimisation of write-pulse shapes for a warm-vapour
//! Λ-system quantum memory.
//!
//! The crate is split along the data flow of one optimisation:
//!
//! * [`pulse_codec`] turns a genome into a sampled control waveform,
//! * [`memory_sim`] stores and retrieves a signal pulse with that waveform,
//! * [`fitness`] scores the resulting trace, optionally under an energy budget,
//! * [`ga`] searches genome space with a cached, seeded genetic algorithm,
//! * [`analysis`] summarises the [`runlog::RunLog`] a search leaves behind.

pub mod analysis;
pub mod fitness;
pub mod ga;
pub mod memory_sim;
pub mod pulse_codec;
pub mod runlog;

pub use fitness::{BackendError, Evaluation, FitnessBackend};
pub use ga::{GaConfig, RunOutcome};
pub use pulse_codec::{DecodeContext, Encoding, Genome};
pub use runlog::RunLog;
