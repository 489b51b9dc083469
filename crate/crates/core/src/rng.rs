//! Portable random streams.
//!
//! Every random draw in the simulator comes from a ChaCha12 generator. The
//! 256-bit key is expanded from the 64-bit master seed, and the 64-bit ChaCha
//! stream id selects an independent sequence for one (body, purpose) pair:
//!
//! ```text
//! stream = body_index << 8 | purpose
//! ```
//!
//! so bodies can be produced in any order, on any number of threads, and
//! still draw exactly the same numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

pub type SimRng = ChaCha12Rng;

/// What a stream is used for. The discriminant is the low byte of the
/// ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Geometry, mesh and initial materials.
    Body,
    /// Material resampling between trials.
    Perturb,
    /// Lump growth for change-flagged bodies.
    Change,
    /// Sensor noise of trial `n` (n < 248).
    Sensor(u8),
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::Body => 0,
            Purpose::Perturb => 1,
            Purpose::Change => 2,
            Purpose::Sensor(n) => 8 + n as u64,
        }
    }
}

/// Derive the generator for `purpose` of body `body_index`.
pub fn stream(master_seed: u64, body_index: u64, purpose: Purpose) -> SimRng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream((body_index << 8) | purpose.code());
    rng
}

/// Draw from `Normal(mean, std)`. A zero `std` returns `mean` without
/// consuming randomness.
pub fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, std: f64) -> f64 {
    if std == 0.0 {
        return mean;
    }
    // std is validated positive and finite by the config loader
    Normal::new(mean, std).expect("valid normal").sample(rng)
}

/// Draw from `U[lo, hi]`; a degenerate interval returns `lo`.
pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    rng.gen_range(lo..=hi)
}
