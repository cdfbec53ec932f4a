//! Per-trial random streams.
//!
//! Each trial owns a ChaCha8 stream whose key is derived from the master
//! seed and whose stream id is the trial index, so trial `i` draws the same
//! numbers regardless of which worker runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn key_from(master_seed: u64) -> [u8; 32] {
    let mut state = master_seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Stream for trial `trial_index` under `master_seed`.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::from_seed(key_from(master_seed));
    rng.set_stream(trial_index);
    rng
}

/// Stream for a single stand-alone draw (one graph, one run).
pub fn seeded_rng(seed: u64) -> TrialRng {
    trial_rng(seed, 0)
}
