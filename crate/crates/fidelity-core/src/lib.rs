//! Core data model and analysis routines for comparing driver behaviour
//! across test environments.
//!
//! The pipeline shape is: parse drive logs ([`logio`]) -> resample and derive
//! kinematics ([`trajectory`]) -> cut the session into attempts and align them
//! to the task layout ([`extract`]) -> compute per-attempt measures
//! ([`metrics`]) and steering-model fits ([`model`]) -> pool attempts and
//! compare environments with effect sizes ([`effect`]).

pub mod circle;
pub mod effect;
pub mod error;
pub mod extract;
pub mod layout;
pub mod logio;
pub mod metrics;
pub mod model;
pub mod path;
pub mod signal;
pub mod trajectory;

pub use error::{Error, Result};

/// Canonical internal sample rate, Hz. Logs are resampled to this before
/// segmentation so that window lengths and delays are exact sample counts.
pub const CANONICAL_RATE: f64 = 100.0;

/// Derive a child RNG seed from a base seed and a list of string labels.
///
/// FNV-1a over the labels, folded with the base seed. Stable across runs and
/// platforms; used to give every (driver, environment, task, attempt) its own
/// reproducible random stream.
pub fn derive_seed(base: u64, parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for chunk in base.to_le_bytes() {
        h ^= chunk as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    for part in parts {
        for b in part.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        // separator so ("ab","c") != ("a","bc")
        h ^= 0x1f;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
