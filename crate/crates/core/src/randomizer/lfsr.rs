//! Galois LFSR scrambler with per-page seeds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nand::WlAddr;
use crate::util::mix;

/// x^32 + x^22 + x^2 + x + 1
pub const DEFAULT_POLY: u64 = (1 << 32) | (1 << 22) | (1 << 2) | (1 << 1) | 1;

/// Replacement for a derived seed that would leave the register all-zero.
const ZERO_SEED_FIX: u64 = 0x5EED_1E57;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LfsrConfig {
    pub width: u32,
    /// Feedback polynomial including the `x^width` and constant terms.
    pub poly: u64,
    pub base_seed: u64,
}

impl Default for LfsrConfig {
    fn default() -> Self {
        LfsrConfig { width: 32, poly: DEFAULT_POLY, base_seed: 0x5354_4152 }
    }
}

impl LfsrConfig {
    /// Checks that `poly` is primitive of degree `width`.
    pub fn new(width: u32, poly: u64, base_seed: u64) -> Result<Self> {
        if !(2..=32).contains(&width) {
            return Err(Error::Config(format!("LFSR width {width} outside 2..=32")));
        }
        if !is_primitive(poly, width) {
            return Err(Error::NotPrimitive(poly));
        }
        Ok(LfsrConfig { width, poly, base_seed })
    }

    pub fn with_seed(base_seed: u64) -> Self {
        LfsrConfig { base_seed, ..LfsrConfig::default() }
    }

    pub fn verify(&self) -> Result<()> {
        Self::new(self.width, self.poly, self.base_seed).map(|_| ())
    }

    fn state_mask(&self) -> u64 {
        (1u64 << self.width) - 1
    }

    /// Register seed for one page of one wordline. Never zero.
    pub fn page_seed(&self, a: WlAddr, page: usize) -> u64 {
        let s = mix(&[self.base_seed, a.chip as u64, a.block as u64, a.wl as u64, page as u64]) & self.state_mask();
        if s == 0 {
            ZERO_SEED_FIX & self.state_mask() | 1
        } else {
            s
        }
    }

    pub fn generator(&self, seed: u64) -> Lfsr {
        Lfsr::new(self, seed)
    }

    /// `len` keystream bytes, bits emitted LSB first.
    pub fn keystream(&self, seed: u64, len: usize) -> Vec<u8> {
        let mut g = self.generator(seed);
        (0..len).map(|_| g.next_byte()).collect()
    }
}

/// Right-shifting Galois register with a byte-at-a-time step table.
#[derive(Debug, Clone)]
pub struct Lfsr {
    state: u64,
    mask: u64,
    out: Box<[u8; 256]>,
    next: Box<[u64; 256]>,
}

impl Lfsr {
    pub fn new(cfg: &LfsrConfig, seed: u64) -> Self {
        let mask = (cfg.poly >> 1) & cfg.state_mask();
        let mut seed = seed & cfg.state_mask();
        if seed == 0 {
            seed = ZERO_SEED_FIX & cfg.state_mask() | 1;
        }
        let mut out = Box::new([0u8; 256]);
        let mut next = Box::new([0u64; 256]);
        for low in 0..256u64 {
            let mut s = low;
            let mut o = 0u8;
            for i in 0..8 {
                let bit = s & 1;
                o |= (bit as u8) << i;
                s >>= 1;
                if bit == 1 {
                    s ^= mask;
                }
            }
            out[low as usize] = o;
            next[low as usize] = s;
        }
        Lfsr { state: seed, mask, out, next }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    #[inline]
    pub fn next_bit(&mut self) -> u8 {
        let bit = (self.state & 1) as u8;
        self.state >>= 1;
        if bit == 1 {
            self.state ^= self.mask;
        }
        bit
    }

    #[inline]
    pub fn next_byte(&mut self) -> u8 {
        let low = (self.state & 0xFF) as usize;
        self.state = (self.state >> 8) ^ self.next[low];
        self.out[low]
    }
}

fn mulmod(a: u64, b: u64, poly: u64, width: u32) -> u64 {
    let mut acc = 0u64;
    let mut a = a;
    let mut b = b;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if (a >> width) & 1 == 1 {
            a ^= poly;
        }
    }
    acc
}

fn powmod_x(mut e: u64, poly: u64, width: u32) -> u64 {
    let mut base = 0b10u64;
    let mut acc = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod(acc, base, poly, width);
        }
        base = mulmod(base, base, poly, width);
        e >>= 1;
    }
    acc
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            out.push(p);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Whether `poly` (degree `width`) has multiplicative order `2^width - 1`,
/// i.e. generates a maximal-length sequence.
pub fn is_primitive(poly: u64, width: u32) -> bool {
    if !(2..=32).contains(&width) || poly >> width != 1 || poly & 1 == 0 {
        return false;
    }
    let order = (1u64 << width) - 1;
    if powmod_x(order, poly, width) != 1 {
        return false;
    }
    prime_factors(order).into_iter().all(|q| powmod_x(order / q, poly, width) != 1)
}

/// XORs every page with its own keystream. Applying it twice with the same
/// address restores the input.
pub fn lfsr_randomize(pages: &[Vec<u8>], cfg: &LfsrConfig, a: WlAddr) -> Result<Vec<Vec<u8>>> {
    let len = pages.first().map_or(0, Vec::len);
    if pages.iter().any(|p| p.len() != len) {
        return Err(Error::Geometry("pages differ in length".into()));
    }
    Ok(pages
        .iter()
        .enumerate()
        .map(|(j, page)| {
            let mut g = cfg.generator(cfg.page_seed(a, j));
            page.iter().map(|&b| b ^ g.next_byte()).collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_polynomial_is_primitive() {
        assert!(is_primitive(DEFAULT_POLY, 32));
        assert!(LfsrConfig::default().verify().is_ok());
        // x^32 + 1 is not
        assert!(matches!(LfsrConfig::new(32, (1 << 32) | 1, 0), Err(Error::NotPrimitive(_))));
    }

    #[test]
    fn small_primitive_polys_have_full_period() {
        // x^8+x^4+x^3+x^2+1 and x^5+x^2+1 are primitive, x^4+x^3+x^2+x+1 is not
        for (poly, width, prim) in [(0x11D, 8, true), (0x25, 5, true), (0x1F, 4, false)] {
            assert_eq!(is_primitive(poly, width), prim, "{poly:#x}");
            let cfg = LfsrConfig { width, poly, base_seed: 0 };
            let mut g = cfg.generator(1);
            let start = g.state();
            let mut period = 0u64;
            loop {
                g.next_bit();
                period += 1;
                if g.state() == start {
                    break;
                }
            }
            assert_eq!(period == (1 << width) - 1, prim, "{poly:#x}");
        }
    }

    #[test]
    fn byte_table_matches_bitwise_steps() {
        let cfg = LfsrConfig::default();
        let mut a = cfg.generator(0xDEAD_BEEF);
        let mut b = a.clone();
        for _ in 0..1000 {
            let byte = a.next_byte();
            let bits = (0..8).fold(0u8, |acc, i| acc | (b.next_bit() << i));
            assert_eq!(byte, bits);
            assert_eq!(a.state(), b.state());
        }
    }

    #[test]
    fn zero_seed_is_adjusted() {
        let cfg = LfsrConfig::default();
        let ks = cfg.keystream(0, 64);
        assert!(ks.iter().any(|&b| b != 0));
    }

    #[test]
    fn randomize_twice_is_identity() {
        let cfg = LfsrConfig::default();
        let a = WlAddr::new(0, 3, 7);
        let pages: Vec<Vec<u8>> = (0..4).map(|j| (0..4096).map(|i| (i * 31 + j) as u8).collect()).collect();
        let once = lfsr_randomize(&pages, &cfg, a).unwrap();
        assert_ne!(once, pages);
        assert_eq!(lfsr_randomize(&once, &cfg, a).unwrap(), pages);
        assert!(lfsr_randomize(&[vec![0; 3], vec![0; 4]], &cfg, a).is_err());
    }

    #[test]
    fn distinct_pages_get_distinct_seeds() {
        let cfg = LfsrConfig::default();
        let a = WlAddr::new(0, 0, 0);
        assert_ne!(cfg.page_seed(a, 0), cfg.page_seed(a, 1));
        assert_ne!(cfg.page_seed(a, 0), cfg.page_seed(WlAddr::new(0, 0, 1), 0));
    }
}
