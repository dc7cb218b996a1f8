//! Seed-splitting rule.
//!
//! Every run is driven by a single user seed. Components that need their
//! own random stream derive a sub-seed as `seed + offset` (wrapping), with
//! one fixed offset per consumer. Keeping the offsets here makes the
//! derivation auditable and guarantees that two components never share a
//! stream by accident.

/// Encoder weight initialization.
pub const ENCODER_INIT: u64 = 0x5EED_0001;
/// Batch schedule (anchor shuffling and window sampling) during training.
pub const TRAIN_SCHEDULE: u64 = 0x5EED_0002;
/// Synthetic category centers (kept separate so streams can share centers).
pub const SYNTH_CENTERS: u64 = 0x5EED_0003;
/// Synthetic per-segment randomness (lengths, drift, noise).
pub const SYNTH_STREAM: u64 = 0x5EED_0004;

/// Derive a component sub-seed from the run seed.
pub fn derive(seed: u64, offset: u64) -> u64 {
    seed.wrapping_add(offset)
}
