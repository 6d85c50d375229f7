//! Cell states and the state <-> page-codeword Gray mapping.
//!
//! A codeword is an `m`-bit value whose bit `j` is the bit the cell stores in
//! page `j`, with page 0 the LSB page. For QLC the printed order
//! `TSB MSB CSB LSB` therefore reads the codeword from bit 3 down to bit 0.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bits stored per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellType {
    Tlc,
    Qlc,
}

impl CellType {
    pub const fn bits_per_cell(self) -> usize {
        match self {
            CellType::Tlc => 3,
            CellType::Qlc => 4,
        }
    }

    pub const fn states(self) -> usize {
        1 << self.bits_per_cell()
    }

    pub fn from_bits(m: usize) -> Result<Self> {
        match m {
            3 => Ok(CellType::Tlc),
            4 => Ok(CellType::Qlc),
            other => Err(Error::UnsupportedBitsPerCell(other)),
        }
    }
}

impl fmt::Display for CellType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellType::Tlc => f.write_str("tlc"),
            CellType::Qlc => f.write_str("qlc"),
        }
    }
}

impl std::str::FromStr for CellType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tlc" => Ok(CellType::Tlc),
            "qlc" => Ok(CellType::Qlc),
            _ => Err(Error::Parse(format!("unknown cell type `{s}`"))),
        }
    }
}

/// A discrete threshold-voltage state. `P0` is the erased state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[repr(transparent)]
pub struct CellState(u8);

impl CellState {
    pub const ERASED: CellState = CellState(0);

    /// Validates `k` against `2^m` states.
    pub fn new(k: u8, cell: CellType) -> Result<Self> {
        if (k as usize) < cell.states() {
            Ok(CellState(k))
        } else {
            Err(Error::InvalidState { state: k, states: cell.states() })
        }
    }

    /// No range check; callers must already hold a value below `2^m`.
    pub(crate) const fn from_raw(k: u8) -> Self {
        CellState(k)
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }

    pub const fn raw(self) -> u8 {
        self.0
    }
}

impl fmt::Display for CellState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

/// Anchor codewords every QLC map must honor, as `(state, codeword)`.
pub const QLC_ANCHORS: [(u8, u8); 4] = [(0, 0b1111), (9, 0b1101), (11, 0b0100), (14, 0b0110)];

/// Default QLC map. Balanced 3-4-4-4 transitions per page and, unlike the
/// plain path through the anchors, the error-prone set {P0, P1, P14, P15}
/// is not a coset of any XOR subgroup, so group flips can target it.
const QLC_DEFAULT: [u8; 16] = [
    0b1111, 0b1011, 0b1010, 0b1000, 0b1001, 0b0001, 0b0011, 0b0111, 0b0101, 0b1101, 0b1100, 0b0100, 0b0000, 0b0010,
    0b0110, 0b1110,
];

/// Anchor-satisfying path whose error-prone states form a coset.
const QLC_COSET_PATH: [u8; 16] = [
    0b1111, 0b0111, 0b0101, 0b0001, 0b0011, 0b1011, 0b1010, 0b1000, 0b1001, 0b1101, 0b1100, 0b0100, 0b0000, 0b0010,
    0b0110, 0b1110,
];

/// 2-3-2 TLC Gray code with the erased state at `111`.
const TLC_DEFAULT: [u8; 8] = [0b111, 0b110, 0b100, 0b000, 0b010, 0b011, 0b001, 0b101];

/// Bijection between state indices and page codewords.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayCodeMap {
    cell: CellType,
    code_of: Vec<u8>,
    state_of: Vec<u8>,
}

impl GrayCodeMap {
    /// The shipped map for `cell`.
    pub fn standard(cell: CellType) -> Self {
        match cell {
            CellType::Tlc => Self::from_codes(cell, &TLC_DEFAULT),
            CellType::Qlc => Self::from_codes(cell, &QLC_DEFAULT),
        }
        .expect("shipped Gray maps are valid")
    }

    /// The straight anchor path (P1 = 0111). Kept for comparison runs.
    pub fn qlc_coset_path() -> Self {
        Self::from_codes(CellType::Qlc, &QLC_COSET_PATH).expect("valid Gray map")
    }

    /// Builds a map from `codes[k] = codeword of state k` and checks it is a
    /// bijective Gray code with the erased state all-ones.
    pub fn from_codes(cell: CellType, codes: &[u8]) -> Result<Self> {
        let n = cell.states();
        if codes.len() != n {
            return Err(Error::InvalidGrayMap(format!("expected {n} codewords, got {}", codes.len())));
        }
        let mut state_of = vec![u8::MAX; n];
        for (k, &c) in codes.iter().enumerate() {
            if c as usize >= n {
                return Err(Error::InvalidGrayMap(format!("codeword {c:#b} out of range")));
            }
            if state_of[c as usize] != u8::MAX {
                return Err(Error::InvalidGrayMap(format!("codeword {c:#b} used twice")));
            }
            state_of[c as usize] = k as u8;
        }
        for k in 1..n {
            if (codes[k] ^ codes[k - 1]).count_ones() != 1 {
                return Err(Error::InvalidGrayMap(format!("P{} and P{k} differ in more than one bit", k - 1)));
            }
        }
        if codes[0] as usize != n - 1 {
            return Err(Error::InvalidGrayMap("erased state must be all-ones".into()));
        }
        Ok(GrayCodeMap { cell, code_of: codes.to_vec(), state_of })
    }

    pub fn cell_type(&self) -> CellType {
        self.cell
    }

    pub fn bits_per_cell(&self) -> usize {
        self.cell.bits_per_cell()
    }

    pub fn states(&self) -> usize {
        self.code_of.len()
    }

    #[inline]
    pub fn code_of(&self, s: CellState) -> u8 {
        self.code_of[s.index()]
    }

    #[inline]
    pub fn state_of(&self, code: u8) -> CellState {
        CellState(self.state_of[code as usize])
    }

    pub fn codes(&self) -> &[u8] {
        &self.code_of
    }

    /// State reached by inverting the page bits selected by `mask`.
    #[inline]
    pub fn flip(&self, s: CellState, mask: u8) -> CellState {
        self.state_of(self.code_of(s) ^ mask)
    }

    /// Page whose bit changes when a cell moves between the adjacent states
    /// `k` and `k+1`.
    pub fn transition_page(&self, lower: CellState) -> usize {
        let k = lower.index();
        (self.code_of[k] ^ self.code_of[k + 1]).trailing_zeros() as usize
    }

    /// Whether `{P0, P1, P(n-2), P(n-1)}` is a coset of an XOR subgroup. When
    /// it is, no flip mask can move more of it out than the emptiest coset.
    pub fn edge_states_form_coset(&self) -> bool {
        let n = self.states();
        let set = [0, 1, n - 2, n - 1].map(|k| self.code_of[k]);
        let diffs: Vec<u8> = set.iter().map(|&c| c ^ set[0]).collect();
        diffs.iter().all(|&a| diffs.iter().all(|&b| diffs.contains(&(a ^ b))))
    }

    /// Packs per-cell states into `m` page bit-vectors (LSB-first bit order
    /// within each byte). Trailing bits of the last byte are left at one.
    pub fn encode_pages(&self, states: &[CellState]) -> Result<Vec<Vec<u8>>> {
        let m = self.bits_per_cell();
        let n = self.states();
        let bytes = states.len().div_ceil(8);
        let mut pages = vec![vec![0xFFu8; bytes]; m];
        for (i, s) in states.iter().enumerate() {
            if s.index() >= n {
                return Err(Error::InvalidState { state: s.raw(), states: n });
            }
            let code = self.code_of[s.index()];
            for (j, page) in pages.iter_mut().enumerate() {
                if (code >> j) & 1 == 0 {
                    page[i / 8] &= !(1 << (i % 8));
                }
            }
        }
        Ok(pages)
    }

    /// Inverse of [`encode_pages`](Self::encode_pages) for `cells` cells.
    pub fn decode_states(&self, pages: &[Vec<u8>], cells: usize) -> Result<Vec<CellState>> {
        let m = self.bits_per_cell();
        if pages.len() != m {
            return Err(Error::Geometry(format!("expected {m} pages, got {}", pages.len())));
        }
        let need = cells.div_ceil(8);
        if let Some(p) = pages.iter().find(|p| p.len() < need) {
            return Err(Error::Geometry(format!("page holds {} bytes, {cells} cells need {need}", p.len())));
        }
        let mut out = Vec::with_capacity(cells);
        for i in 0..cells {
            let mut code = 0u8;
            for (j, page) in pages.iter().enumerate() {
                code |= ((page[i / 8] >> (i % 8)) & 1) << j;
            }
            out.push(self.state_of(code));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(k: u8) -> CellState {
        CellState::new(k, CellType::Qlc).unwrap()
    }

    #[test]
    fn qlc_anchor_pages() {
        let map = GrayCodeMap::standard(CellType::Qlc);
        let pages = map.encode_pages(&[q(0)]).unwrap();
        // TSB, MSB, CSB, LSB all one
        assert!(pages.iter().all(|p| p[0] & 1 == 1));
        let pages = map.encode_pages(&[q(9)]).unwrap();
        let bits: Vec<u8> = (0..4).rev().map(|j| pages[j][0] & 1).collect();
        assert_eq!(bits, vec![1, 1, 0, 1]);
    }

    #[test]
    fn tlc_erased_wordline_is_all_ones() {
        let map = GrayCodeMap::standard(CellType::Tlc);
        let pages = map.encode_pages(&[CellState::ERASED; 64]).unwrap();
        assert_eq!(pages.len(), 3);
        assert!(pages.iter().all(|p| p.iter().all(|&b| b == 0xFF)));
    }

    #[test]
    fn csb_flip_matches_anchor_examples() {
        let map = GrayCodeMap::standard(CellType::Qlc);
        assert_eq!(map.flip(q(0), 0b0010), q(9));
        assert_eq!(map.flip(q(14), 0b0010), q(11));
    }

    #[test]
    fn out_of_range_state_rejected() {
        assert!(CellState::new(8, CellType::Tlc).is_err());
        let map = GrayCodeMap::standard(CellType::Tlc);
        let bad = CellState::from_raw(9);
        assert!(matches!(map.encode_pages(&[bad]), Err(Error::InvalidState { .. })));
    }

    #[test]
    fn coset_detection() {
        assert!(GrayCodeMap::qlc_coset_path().edge_states_form_coset());
        assert!(!GrayCodeMap::standard(CellType::Qlc).edge_states_form_coset());
    }

    #[test]
    fn rejects_non_gray_sequence() {
        let codes = [0b111, 0b000, 0b001, 0b011, 0b010, 0b110, 0b100, 0b101];
        assert!(GrayCodeMap::from_codes(CellType::Tlc, &codes).is_err());
    }

    #[test]
    fn p15_to_p14_changes_only_tsb() {
        let map = GrayCodeMap::standard(CellType::Qlc);
        let diff = map.code_of(q(15)) ^ map.code_of(q(14));
        assert_eq!(diff, 0b1000);
        assert_eq!(map.transition_page(q(14)), 3);
    }
}
