//! Seeded random streams shared by the controller and the testbed.
//!
//! Everything random in this crate flows through ChaCha8 streams derived
//! from a single 64-bit seed. Each consumer gets its own stream id, so
//! e.g. turning loss noise on or off never shifts the controller's draws.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream id for the controller's action sampling.
pub const CONTROLLER_STREAM: u64 = 0;
/// Stream id for per-iteration loss noise in the testbed.
pub const NOISE_STREAM: u64 = 1;
/// Stream id for problem construction (optima, initial parameters).
pub const PROBLEM_STREAM: u64 = 2;
/// Stream id for the self-check suite.
pub const AUDIT_STREAM: u64 = 3;

/// A ChaCha8 stream for (`seed`, `stream`).
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The controller's action-sampling stream.
pub fn controller_rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, CONTROLLER_STREAM)
}

/// The testbed's loss-noise stream.
pub fn noise_rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, NOISE_STREAM)
}

/// The problem-construction stream.
pub fn problem_rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, PROBLEM_STREAM)
}

/// Hex digest of an rng's full state (seed bytes plus word position).
///
/// Recorded in step reports so a replay can be checked against the run
/// that produced it. FNV-1a, stable across platforms and versions.
pub fn rng_digest(rng: &ChaCha8Rng) -> String {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = FNV_OFFSET;
    let mut eat = |byte: u8| {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    };
    for byte in rng.get_seed() {
        eat(byte);
    }
    for byte in rng.get_word_pos().to_le_bytes() {
        eat(byte);
    }
    format!("{hash:016x}")
}
