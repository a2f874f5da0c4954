//! Deterministic RNG streams.
//!
//! Every replicate (Monte-Carlo draw, bootstrap resample, simulation run)
//! gets its own ChaCha stream keyed by `(seed, context, index)`, so results
//! are identical regardless of execution order or thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub(crate) const CTX_MC_NULL: u64 = 1;
pub(crate) const CTX_BOOTSTRAP: u64 = 2;
pub(crate) const CTX_CAMPAIGN: u64 = 3;

pub(crate) fn stream_rng(seed: u64, context: u64, index: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&context.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..].copy_from_slice(b"graphrnk");
    ChaCha12Rng::from_seed(key)
}
