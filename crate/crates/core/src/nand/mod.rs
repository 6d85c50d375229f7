//! Discrete-state NAND array: geometry, program/read/erase and the vertical
//! (bitline-direction) neighbour relation used by the retention model.

mod dump;
mod onset;
mod retention;
mod stats;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gray::{CellState, CellType, GrayCodeMap};

pub use dump::{read_dump, write_dump, DUMP_MAGIC, DUMP_VERSION};
pub use onset::ErrorOnsets;
pub use retention::{apply_retention, LcsForm, LcsModel, RetentionModel, ShiftRule};
pub use stats::{codeword_error_counts, measure_rber, scan_weak_patterns, RberReport, WeakPatternStats, CODEWORD_BITS};

/// Array dimensions. One cell contributes one bit to each of the `m` pages
/// of its wordline, so `cells_per_wordline = page_bytes * 8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub chips: usize,
    pub blocks_per_chip: usize,
    pub wordlines_per_block: usize,
    pub page_bytes: usize,
    pub spare_bytes: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry { chips: 1, blocks_per_chip: 1, wordlines_per_block: 64, page_bytes: 4096, spare_bytes: 512 }
    }
}

impl Geometry {
    /// Full-size 16 KiB page with a 2 KiB spare area.
    pub fn full_page() -> Self {
        Geometry { page_bytes: 16384, spare_bytes: 2048, ..Geometry::default() }
    }

    pub fn cells_per_wordline(&self) -> usize {
        self.page_bytes * 8
    }

    pub fn blocks(&self) -> usize {
        self.chips * self.blocks_per_chip
    }

    pub fn wordlines(&self) -> usize {
        self.blocks() * self.wordlines_per_block
    }

    pub fn total_cells(&self) -> usize {
        self.wordlines() * self.cells_per_wordline()
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("chips", self.chips),
            ("blocks_per_chip", self.blocks_per_chip),
            ("wordlines_per_block", self.wordlines_per_block),
            ("page_bytes", self.page_bytes),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Geometry(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockAddr {
    pub chip: usize,
    pub block: usize,
}

impl BlockAddr {
    pub const fn new(chip: usize, block: usize) -> Self {
        BlockAddr { chip, block }
    }

    pub const fn wordline(self, wl: usize) -> WlAddr {
        WlAddr { chip: self.chip, block: self.block, wl }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WlAddr {
    pub chip: usize,
    pub block: usize,
    pub wl: usize,
}

impl WlAddr {
    pub const fn new(chip: usize, block: usize, wl: usize) -> Self {
        WlAddr { chip, block, wl }
    }

    pub const fn block_addr(self) -> BlockAddr {
        BlockAddr { chip: self.chip, block: self.block }
    }
}

impl std::fmt::Display for WlAddr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "chip {} block {} wl {}", self.chip, self.block, self.wl)
    }
}

/// Programmed and current (possibly error-shifted) cell states for every
/// wordline, plus per-block wear and per-wordline out-of-band metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FlashArray {
    geometry: Geometry,
    cell: CellType,
    programmed: Vec<CellState>,
    current: Vec<CellState>,
    pec: Vec<u32>,
    wl_programmed: Vec<bool>,
    oob: Vec<Vec<u8>>,
}

impl FlashArray {
    /// A factory-fresh array: every block erased, zero wear.
    pub fn new(geometry: Geometry, cell: CellType) -> Result<Self> {
        geometry.validate()?;
        let cells = geometry.total_cells();
        Ok(FlashArray {
            geometry,
            cell,
            programmed: vec![CellState::ERASED; cells],
            current: vec![CellState::ERASED; cells],
            pec: vec![0; geometry.blocks()],
            wl_programmed: vec![false; geometry.wordlines()],
            oob: vec![Vec::new(); geometry.wordlines()],
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn cell_type(&self) -> CellType {
        self.cell
    }

    pub fn cells_per_wordline(&self) -> usize {
        self.geometry.cells_per_wordline()
    }

    fn block_index(&self, b: BlockAddr) -> Result<usize> {
        let g = &self.geometry;
        if b.chip >= g.chips || b.block >= g.blocks_per_chip {
            return Err(Error::Address(format!("chip {} block {}", b.chip, b.block)));
        }
        Ok(b.chip * g.blocks_per_chip + b.block)
    }

    fn wl_index(&self, a: WlAddr) -> Result<usize> {
        let b = self.block_index(a.block_addr())?;
        if a.wl >= self.geometry.wordlines_per_block {
            return Err(Error::Address(a.to_string()));
        }
        Ok(b * self.geometry.wordlines_per_block + a.wl)
    }

    fn cell_range(&self, wl_index: usize) -> std::ops::Range<usize> {
        let n = self.cells_per_wordline();
        wl_index * n..(wl_index + 1) * n
    }

    pub fn pec(&self, b: BlockAddr) -> Result<u32> {
        Ok(self.pec[self.block_index(b)?])
    }

    /// Erases the block, which costs one program/erase cycle.
    pub fn erase_block(&mut self, b: BlockAddr) -> Result<()> {
        let bi = self.block_index(b)?;
        let wls = self.geometry.wordlines_per_block;
        let n = self.cells_per_wordline();
        let cells = bi * wls * n..(bi + 1) * wls * n;
        self.programmed[cells.clone()].fill(CellState::ERASED);
        self.current[cells].fill(CellState::ERASED);
        for w in bi * wls..(bi + 1) * wls {
            self.wl_programmed[w] = false;
            self.oob[w].clear();
        }
        self.pec[bi] = self.pec[bi].saturating_add(1);
        Ok(())
    }

    /// Accounts `cycles` program/erase cycles of prior wear without touching
    /// the stored data.
    pub fn age_block(&mut self, b: BlockAddr, cycles: u32) -> Result<()> {
        let bi = self.block_index(b)?;
        self.pec[bi] = self.pec[bi].saturating_add(cycles);
        Ok(())
    }

    /// One-shot programs a whole wordline.
    pub fn program_wordline(&mut self, a: WlAddr, states: &[CellState]) -> Result<()> {
        self.program_wordline_with_oob(a, states, Vec::new())
    }

    /// Programs a wordline together with out-of-band metadata (flip
    /// indicators, remap records). Metadata is stored outside the error
    /// channel.
    pub fn program_wordline_with_oob(&mut self, a: WlAddr, states: &[CellState], oob: Vec<u8>) -> Result<()> {
        let wi = self.wl_index(a)?;
        if self.wl_programmed[wi] {
            return Err(Error::Overwrite(a.to_string()));
        }
        let n = self.cells_per_wordline();
        if states.len() != n {
            return Err(Error::Geometry(format!("{} states supplied for a {n}-cell wordline", states.len())));
        }
        let states_n = self.cell.states();
        if let Some(bad) = states.iter().find(|s| s.index() >= states_n) {
            return Err(Error::InvalidState { state: bad.raw(), states: states_n });
        }
        let r = self.cell_range(wi);
        self.programmed[r.clone()].copy_from_slice(states);
        self.current[r].copy_from_slice(states);
        self.wl_programmed[wi] = true;
        self.oob[wi] = oob;
        Ok(())
    }

    pub fn is_programmed(&self, a: WlAddr) -> Result<bool> {
        Ok(self.wl_programmed[self.wl_index(a)?])
    }

    pub fn block_fully_programmed(&self, b: BlockAddr) -> Result<bool> {
        let bi = self.block_index(b)?;
        let wls = self.geometry.wordlines_per_block;
        Ok(self.wl_programmed[bi * wls..(bi + 1) * wls].iter().all(|&p| p))
    }

    /// States as programmed, ignoring any retention drift. Unprogrammed
    /// wordlines read back as erased.
    pub fn programmed_states(&self, a: WlAddr) -> Result<&[CellState]> {
        let wi = self.wl_index(a)?;
        Ok(&self.programmed[self.cell_range(wi)])
    }

    /// States as a read would sense them now.
    pub fn current_states(&self, a: WlAddr) -> Result<&[CellState]> {
        let wi = self.wl_index(a)?;
        if !self.wl_programmed[wi] {
            return Err(Error::Unprogrammed(a.to_string()));
        }
        Ok(&self.current[self.cell_range(wi)])
    }

    pub fn oob(&self, a: WlAddr) -> Result<&[u8]> {
        let wi = self.wl_index(a)?;
        Ok(&self.oob[wi])
    }

    /// Senses one logical page: bit `i` is bit `page_index` of the codeword
    /// of cell `i`'s current state.
    pub fn read_page(&self, a: WlAddr, page_index: usize, map: &GrayCodeMap) -> Result<Vec<u8>> {
        if map.cell_type() != self.cell {
            return Err(Error::Dimension(format!("{} map used on a {} array", map.cell_type(), self.cell)));
        }
        if page_index >= map.bits_per_cell() {
            return Err(Error::Address(format!("page {page_index} of {a}")));
        }
        let states = self.current_states(a)?;
        let mut page = vec![0xFFu8; states.len().div_ceil(8)];
        for (i, &s) in states.iter().enumerate() {
            if (map.code_of(s) >> page_index) & 1 == 0 {
                page[i / 8] &= !(1 << (i % 8));
            }
        }
        Ok(page)
    }

    /// All `m` pages of a wordline.
    pub fn read_wordline(&self, a: WlAddr, map: &GrayCodeMap) -> Result<Vec<Vec<u8>>> {
        (0..map.bits_per_cell()).map(|j| self.read_page(a, j, map)).collect()
    }

    /// Overrides one cell's current state. Meant for fault injection in
    /// tests and tooling.
    pub fn inject_shift(&mut self, a: WlAddr, cell: usize, state: CellState) -> Result<()> {
        let wi = self.wl_index(a)?;
        if cell >= self.cells_per_wordline() {
            return Err(Error::Address(format!("cell {cell} of {a}")));
        }
        if state.index() >= self.cell.states() {
            return Err(Error::InvalidState { state: state.raw(), states: self.cell.states() });
        }
        let n = self.cells_per_wordline();
        self.current[wi * n + cell] = state;
        Ok(())
    }

    #[allow(clippy::type_complexity)]
    pub(crate) fn block_slices_mut(&mut self, b: BlockAddr) -> Result<(&[CellState], &mut [CellState], &[bool], u32)> {
        let bi = self.block_index(b)?;
        let wls = self.geometry.wordlines_per_block;
        let n = self.cells_per_wordline();
        let cells = bi * wls * n..(bi + 1) * wls * n;
        Ok((
            &self.programmed[cells.clone()],
            &mut self.current[cells],
            &self.wl_programmed[bi * wls..(bi + 1) * wls],
            self.pec[bi],
        ))
    }

    pub(crate) fn block_slices(&self, b: BlockAddr) -> Result<(&[CellState], &[CellState], &[bool])> {
        let bi = self.block_index(b)?;
        let wls = self.geometry.wordlines_per_block;
        let n = self.cells_per_wordline();
        let cells = bi * wls * n..(bi + 1) * wls * n;
        Ok((&self.programmed[cells.clone()], &self.current[cells], &self.wl_programmed[bi * wls..(bi + 1) * wls]))
    }

    #[allow(clippy::type_complexity)]
    pub(crate) fn raw_parts(&self) -> (&[CellState], &[CellState], &[u32], &[bool], &[Vec<u8>]) {
        (&self.programmed, &self.current, &self.pec, &self.wl_programmed, &self.oob)
    }

    pub(crate) fn from_raw_parts(
        geometry: Geometry,
        cell: CellType,
        programmed: Vec<CellState>,
        current: Vec<CellState>,
        pec: Vec<u32>,
        wl_programmed: Vec<bool>,
        oob: Vec<Vec<u8>>,
    ) -> Self {
        FlashArray { geometry, cell, programmed, current, pec, wl_programmed, oob }
    }
}
