//! Group-level error estimation and optimal bit-flip selection.

use serde::{Deserialize, Serialize};

use super::lfsr::{lfsr_randomize, LfsrConfig};
use crate::error::{Error, Result};
use crate::gray::{CellState, CellType, GrayCodeMap};
use crate::nand::WlAddr;
use crate::profile::{DeltaLut, ErrorProfile};

pub const DEFAULT_GROUP_SIZE: usize = 128;

const TIE_TOLERANCE: f64 = 1e-12;

/// Page-bit inversion mask. Bit `j` set inverts page `j` (page 0 = LSB).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FlipOp(u8);

impl FlipOp {
    pub const IDENTITY: FlipOp = FlipOp(0);

    pub fn new(mask: u8, cell: CellType) -> Result<Self> {
        if (mask as usize) < cell.states() {
            Ok(FlipOp(mask))
        } else {
            Err(Error::Config(format!("flip mask {mask:#b} too wide for {cell}")))
        }
    }

    pub const fn mask(self) -> u8 {
        self.0
    }

    /// All `2^m` masks in ascending order.
    pub fn all(cell: CellType) -> impl Iterator<Item = FlipOp> {
        (0..cell.states() as u8).map(FlipOp)
    }

    #[inline]
    pub fn apply(self, s: CellState, map: &GrayCodeMap) -> CellState {
        map.flip(s, self.0)
    }
}

/// A run of cells on one wordline sharing a single flip mask.
#[derive(Debug, Clone, Copy)]
pub struct Group<'a> {
    pub cells: &'a [CellState],
    pub origin: WlAddr,
    pub start: usize,
}

/// Splits a wordline into groups; a trailing remainder forms a short group.
pub fn groups_of(cells: &[CellState], origin: WlAddr, group_size: usize) -> impl Iterator<Item = Group<'_>> {
    cells.chunks(group_size.max(1)).enumerate().map(move |(g, c)| Group { cells: c, origin, start: g * group_size })
}

pub fn groups_per_wordline(cells: usize, group_size: usize) -> usize {
    cells.div_ceil(group_size)
}

/// Expected number of erroneous cells in a group.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct GroupError(pub f64);

/// `E_G = sum_i e[s_i]`.
pub fn group_error(cells: &[CellState], profile: &ErrorProfile) -> GroupError {
    GroupError(cells.iter().map(|s| profile.e[s.index()]).sum())
}

/// `sum_i lut[f][s_i]`, negative when the flip lowers the expected error.
pub fn delta_group_error(cells: &[CellState], f: FlipOp, lut: &DeltaLut) -> f64 {
    let row = lut.row(f.mask());
    cells.iter().map(|s| row[s.index()]).sum()
}

/// State histogram of a group.
#[inline]
pub fn histogram(cells: &[CellState], states: usize) -> [u32; 16] {
    let mut h = [0u32; 16];
    debug_assert!(states <= 16);
    for s in cells {
        h[s.index()] += 1;
    }
    h
}

/// Mask minimising the group's expected error; the smallest mask wins ties,
/// so an indifferent group keeps the identity. Candidates closer than
/// rounding noise (`1e-12` of the largest possible group change) are ties.
pub fn optimal_flip(cells: &[CellState], lut: &DeltaLut) -> FlipOp {
    let n = lut.states();
    optimal_flip_hist(&histogram(cells, n)[..n], lut)
}

/// [`optimal_flip`] from a precomputed histogram.
pub fn optimal_flip_hist(hist: &[u32], lut: &DeltaLut) -> FlipOp {
    let n = lut.states();
    let cells: u32 = hist.iter().sum();
    let tol = TIE_TOLERANCE * lut.max_abs() * f64::from(cells);
    let mut best = 0u8;
    let mut best_delta = 0.0;
    for f in 1..n as u8 {
        let row = lut.row(f);
        let d: f64 = hist.iter().zip(row).map(|(&c, &v)| f64::from(c) * v).sum();
        if d < best_delta - tol {
            best_delta = d;
            best = f;
        }
    }
    FlipOp(best)
}

/// Per-group flip masks of one wordline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fib {
    m: usize,
    masks: Vec<u8>,
}

impl Fib {
    pub fn identity(m: usize, groups: usize) -> Self {
        Fib { m, masks: vec![0; groups] }
    }

    pub fn from_masks(m: usize, masks: Vec<u8>) -> Result<Self> {
        if let Some(&bad) = masks.iter().find(|&&v| v as usize >= 1 << m) {
            return Err(Error::MetadataCorrupt(format!("mask {bad:#b} wider than {m} bits")));
        }
        Ok(Fib { m, masks })
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn masks(&self) -> &[u8] {
        &self.masks
    }

    pub fn get(&self, group: usize) -> FlipOp {
        FlipOp(self.masks[group])
    }

    pub fn bits(&self) -> usize {
        self.masks.len() * self.m
    }

    /// Packs masks in ascending group order, `m` bits each, little-endian
    /// within bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bits().div_ceil(8)];
        for (g, &mask) in self.masks.iter().enumerate() {
            for b in 0..self.m {
                if (mask >> b) & 1 == 1 {
                    let pos = g * self.m + b;
                    out[pos / 8] |= 1 << (pos % 8);
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], m: usize, groups: usize) -> Result<Self> {
        let need = (groups * m).div_ceil(8);
        if bytes.len() < need {
            return Err(Error::MetadataCorrupt(format!(
                "flip record holds {} bytes, {groups} groups need {need}",
                bytes.len()
            )));
        }
        let masks = (0..groups)
            .map(|g| {
                (0..m).fold(0u8, |acc, b| {
                    let pos = g * m + b;
                    acc | (((bytes[pos / 8] >> (pos % 8)) & 1) << b)
                })
            })
            .collect();
        Ok(Fib { m, masks })
    }
}

/// Fraction of a wordline's raw bits (data plus spare) taken by the FIB.
pub fn fib_overhead(page_bytes: usize, spare_bytes: usize, group_size: usize, m: usize) -> f64 {
    let groups = groups_per_wordline(page_bytes * 8, group_size);
    (groups * m) as f64 / ((page_bytes + spare_bytes) * 8 * m) as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarConfig {
    pub lfsr: LfsrConfig,
    pub group_size: usize,
    /// Byte offset of the FIB inside the spare area.
    pub fib_offset: usize,
}

impl Default for StarConfig {
    fn default() -> Self {
        StarConfig { lfsr: LfsrConfig::default(), group_size: DEFAULT_GROUP_SIZE, fib_offset: 0 }
    }
}

/// Chooses and applies each group's optimal flip in place.
pub fn star_flip_states(states: &mut [CellState], group_size: usize, lut: &DeltaLut, map: &GrayCodeMap) -> Fib {
    let n = map.states();
    let masks = states
        .chunks_mut(group_size.max(1))
        .map(|g| {
            let f = optimal_flip_hist(&histogram(g, n)[..n], lut);
            if f != FlipOp::IDENTITY {
                g.iter_mut().for_each(|s| *s = f.apply(*s, map));
            }
            f.mask()
        })
        .collect();
    Fib { m: map.bits_per_cell(), masks }
}

fn check_pages(pages: &[Vec<u8>], map: &GrayCodeMap) -> Result<usize> {
    if pages.len() != map.bits_per_cell() {
        return Err(Error::Geometry(format!("expected {} pages, got {}", map.bits_per_cell(), pages.len())));
    }
    let len = pages[0].len();
    if pages.iter().any(|p| p.len() != len) {
        return Err(Error::Geometry("pages differ in length".into()));
    }
    Ok(len * 8)
}

/// Scramble, estimate, flip. Returns the pages to program and the FIB.
pub fn star_write_transform(
    pages: &[Vec<u8>],
    cfg: &StarConfig,
    a: WlAddr,
    lut: &DeltaLut,
    map: &GrayCodeMap,
) -> Result<(Vec<Vec<u8>>, Fib)> {
    let cells = check_pages(pages, map)?;
    if lut.states() != map.states() {
        return Err(Error::Dimension("LUT and map disagree on state count".into()));
    }
    let scrambled = lfsr_randomize(pages, &cfg.lfsr, a)?;
    let mut states = map.decode_states(&scrambled, cells)?;
    let fib = star_flip_states(&mut states, cfg.group_size, lut, map);
    Ok((map.encode_pages(&states)?, fib))
}

/// Undoes the recorded flips, then descrambles.
pub fn star_read_transform(
    pages: &[Vec<u8>],
    fib: &Fib,
    cfg: &StarConfig,
    a: WlAddr,
    map: &GrayCodeMap,
) -> Result<Vec<Vec<u8>>> {
    let cells = check_pages(pages, map)?;
    let groups = groups_per_wordline(cells, cfg.group_size);
    if fib.len() != groups {
        return Err(Error::MetadataCorrupt(format!("FIB covers {} groups, wordline has {groups}", fib.len())));
    }
    let mut states = map.decode_states(pages, cells)?;
    for (g, chunk) in states.chunks_mut(cfg.group_size).enumerate() {
        let f = fib.get(g);
        if f != FlipOp::IDENTITY {
            chunk.iter_mut().for_each(|s| *s = f.apply(*s, map));
        }
    }
    lfsr_randomize(&map.encode_pages(&states)?, &cfg.lfsr, a)
}
