//! Behavioural TailCut: breaks the two worst TLC vertical patterns
//! (E-P6-E and E-P7-E) as they are completed.

use super::lfsr::{lfsr_randomize, LfsrConfig};
use crate::error::{Error, Result};
use crate::gray::{CellState, CellType, GrayCodeMap};
use crate::nand::WlAddr;

/// Programmed states of the two wordlines below the one being written.
#[derive(Debug, Clone, Copy, Default)]
pub struct TailCutContext<'a> {
    pub prev2: Option<&'a [CellState]>,
    pub prev1: Option<&'a [CellState]>,
}

/// One bit per cell: set where the erased state was remapped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TailCutRecord {
    cells: usize,
    bitmap: Vec<u8>,
}

impl TailCutRecord {
    pub fn empty(cells: usize) -> Self {
        TailCutRecord { cells, bitmap: vec![0; cells.div_ceil(8)] }
    }

    pub fn from_bytes(bytes: &[u8], cells: usize) -> Result<Self> {
        if bytes.len() != cells.div_ceil(8) {
            return Err(Error::MetadataCorrupt(format!("remap record holds {} bytes for {cells} cells", bytes.len())));
        }
        Ok(TailCutRecord { cells, bitmap: bytes.to_vec() })
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bitmap
    }

    #[inline]
    pub fn is_remapped(&self, i: usize) -> bool {
        (self.bitmap[i / 8] >> (i % 8)) & 1 == 1
    }

    fn mark(&mut self, i: usize) {
        self.bitmap[i / 8] |= 1 << (i % 8);
    }

    pub fn count(&self) -> usize {
        self.bitmap.iter().map(|b| b.count_ones() as usize).sum()
    }
}

fn require_tlc(map: &GrayCodeMap) -> Result<()> {
    match map.cell_type() {
        CellType::Tlc => Ok(()),
        other => Err(Error::UnsupportedMode(format!("TailCut needs TLC, got {other}"))),
    }
}

/// The state an erased cell is moved to: its top-page bit inverted.
pub fn remap_target(map: &GrayCodeMap) -> CellState {
    map.flip(CellState::ERASED, 1 << (map.bits_per_cell() - 1))
}

/// Remaps every erased cell that would complete an `E, P6|P7, E` column.
pub fn tailcut_states(states: &mut [CellState], ctx: TailCutContext<'_>, map: &GrayCodeMap) -> Result<TailCutRecord> {
    require_tlc(map)?;
    let mut rec = TailCutRecord::empty(states.len());
    let (Some(p2), Some(p1)) = (ctx.prev2, ctx.prev1) else {
        return Ok(rec);
    };
    if p2.len() != states.len() || p1.len() != states.len() {
        return Err(Error::Geometry("TailCut context length mismatch".into()));
    }
    let top = map.states() as u8 - 1;
    let target = remap_target(map);
    for i in 0..states.len() {
        let mid = p1[i].raw();
        if states[i] == CellState::ERASED && p2[i] == CellState::ERASED && (mid == top || mid == top - 1) {
            states[i] = target;
            rec.mark(i);
        }
    }
    Ok(rec)
}

pub fn tailcut_write_transform(
    pages: &[Vec<u8>],
    lfsr: &LfsrConfig,
    a: WlAddr,
    ctx: TailCutContext<'_>,
    map: &GrayCodeMap,
) -> Result<(Vec<Vec<u8>>, TailCutRecord)> {
    require_tlc(map)?;
    let cells = pages.first().map_or(0, Vec::len) * 8;
    let scrambled = lfsr_randomize(pages, lfsr, a)?;
    let mut states = map.decode_states(&scrambled, cells)?;
    let rec = tailcut_states(&mut states, ctx, map)?;
    Ok((map.encode_pages(&states)?, rec))
}

pub fn tailcut_read_transform(
    pages: &[Vec<u8>],
    rec: &TailCutRecord,
    lfsr: &LfsrConfig,
    a: WlAddr,
    map: &GrayCodeMap,
) -> Result<Vec<Vec<u8>>> {
    require_tlc(map)?;
    let cells = pages.first().map_or(0, Vec::len) * 8;
    if rec.cells != cells {
        return Err(Error::MetadataCorrupt(format!("remap record for {} cells, page has {cells}", rec.cells)));
    }
    let mut states = map.decode_states(pages, cells)?;
    let top = 1 << (map.bits_per_cell() - 1);
    for (i, s) in states.iter_mut().enumerate() {
        if rec.is_remapped(i) {
            *s = map.flip(*s, top);
        }
    }
    lfsr_randomize(&map.encode_pages(&states)?, lfsr, a)
}
