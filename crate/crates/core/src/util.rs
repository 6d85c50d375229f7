use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nand::WlAddr;

/// SplitMix64 finaliser.
#[inline]
pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a sequence of words.
pub(crate) fn mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243F_6A88_85A3_08D3, |acc, &p| splitmix(acc ^ splitmix(p)))
}

pub(crate) fn stream_rng(seed: u64, a: WlAddr) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(&[seed, a.chip as u64, a.block as u64, a.wl as u64]))
}

pub(crate) fn seeded(seed: u64, salt: &[u64]) -> ChaCha8Rng {
    let mut parts = vec![seed];
    parts.extend_from_slice(salt);
    ChaCha8Rng::seed_from_u64(mix(&parts))
}
