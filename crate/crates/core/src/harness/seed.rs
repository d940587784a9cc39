//! Per-trial seed derivation.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// One round of the SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at SNR index `snr`; a pure function of its inputs,
/// so trials can run in any order.
pub fn trial_seed(master: u64, snr: usize, trial: usize) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ (snr as u64).wrapping_mul(GOLDEN));
    splitmix64(b ^ trial as u64)
}
