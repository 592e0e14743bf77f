//! Reproducible random number generation.
//!
//! Every experiment replicate owns an independently seeded generator derived
//! from `(master seed, stream id)` with a SplitMix64 expansion, so runs are
//! reproducible and independent of replicate execution order.

use rand_chacha::ChaCha12Rng;
use rand::SeedableRng;

/// The generator used throughout the crate.
pub type Rng = ChaCha12Rng;

/// SplitMix64 step, used only to expand seeds.
fn splitmix64(state: &mut u64) {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
}

fn splitmix64_next(state: &mut u64) -> u64 {
    splitmix64(state);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent generator for `(master, stream)`.
///
/// Distinct `(master, stream)` pairs map to distinct 256-bit ChaCha seeds;
/// the derivation is pure, so replicates can be spawned in any order.
pub fn stream_rng(master: u64, stream: u64) -> Rng {
    let mut state = master ^ 0x6A09_E667_F3BC_C908u64.wrapping_mul(stream.wrapping_add(1));
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64_next(&mut state).to_le_bytes());
    }
    Rng::from_seed(seed)
}

/// Dedicated stream for simulating the shared dataset of an experiment.
pub const DATA_STREAM: u64 = u64::MAX;
