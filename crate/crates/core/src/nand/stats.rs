use std::io::{Read, Write};

use super::{BlockAddr, FlashArray};
use crate::error::{Error, Result};
use crate::gray::{CellState, GrayCodeMap};

/// Bits in one ECC codeword (1 KiB of page data).
pub const CODEWORD_BITS: usize = 8192;

/// Occurrence counts of vertical triples `(k_up, k_victim, k_down)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeakPatternStats {
    states: usize,
    counts: Vec<u64>,
    total_triples: u64,
}

impl WeakPatternStats {
    pub fn new(states: usize) -> Self {
        WeakPatternStats { states, counts: vec![0; states.pow(3)], total_triples: 0 }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    #[inline]
    fn idx(&self, up: usize, k: usize, down: usize) -> usize {
        (up * self.states + k) * self.states + down
    }

    #[inline]
    pub fn record(&mut self, up: CellState, k: CellState, down: CellState) {
        let i = self.idx(up.index(), k.index(), down.index());
        self.counts[i] += 1;
        self.total_triples += 1;
    }

    pub fn get(&self, up: CellState, k: CellState, down: CellState) -> u64 {
        self.counts[self.idx(up.index(), k.index(), down.index())]
    }

    pub fn total_triples(&self) -> u64 {
        self.total_triples
    }

    /// `(up, victim, down, count)` in lexicographic triple order.
    pub fn iter(&self) -> impl Iterator<Item = (CellState, CellState, CellState, u64)> + '_ {
        let n = self.states;
        self.counts.iter().enumerate().map(move |(i, &c)| {
            let s = |v: usize| CellState::from_raw(v as u8);
            (s(i / (n * n)), s(i / n % n), s(i % n), c)
        })
    }

    pub fn merge(&mut self, other: &WeakPatternStats) -> Result<()> {
        if other.states != self.states {
            return Err(Error::Dimension(format!("{} vs {} states", self.states, other.states)));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total_triples += other.total_triples;
        Ok(())
    }

    /// Frequency of a triple among all scanned triples.
    pub fn frequency(&self, up: CellState, k: CellState, down: CellState) -> f64 {
        if self.total_triples == 0 {
            0.0
        } else {
            self.get(up, k, down) as f64 / self.total_triples as f64
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["k_up", "k_victim", "k_down", "count"])?;
        for (u, k, d, c) in self.iter() {
            wr.write_record([u.raw().to_string(), k.raw().to_string(), d.raw().to_string(), c.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the CSV produced by [`write_csv`](Self::write_csv). Lines
    /// starting with `#` are ignored.
    pub fn read_csv<R: Read>(r: R, states: usize) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let mut out = WeakPatternStats::new(states);
        for rec in rd.records() {
            let rec = rec?;
            let field = |i: usize| -> Result<u64> {
                rec.get(i)
                    .ok_or_else(|| Error::Parse(format!("missing column {i}")))?
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("column {i}: {e}")))
            };
            let (u, k, d, c) = (field(0)?, field(1)?, field(2)?, field(3)?);
            if [u, k, d].iter().any(|&v| v as usize >= states) {
                return Err(Error::Parse(format!("triple ({u},{k},{d}) out of range")));
            }
            let i = out.idx(u as usize, k as usize, d as usize);
            out.counts[i] += c;
            out.total_triples += c;
        }
        Ok(out)
    }
}

/// Counts vertical triples over programmed states. Boundary wordlines only
/// ever appear as neighbours. With `allow_partial`, triples touching an
/// unprogrammed wordline are skipped instead of rejected.
pub fn scan_weak_patterns(array: &FlashArray, b: BlockAddr, allow_partial: bool) -> Result<WeakPatternStats> {
    let wls = array.geometry().wordlines_per_block;
    let n = array.cells_per_wordline();
    let (programmed, _, flags) = array.block_slices(b)?;
    if !allow_partial && flags.iter().any(|&f| !f) {
        return Err(Error::PartialScan(format!("chip {} block {}", b.chip, b.block)));
    }
    let mut stats = WeakPatternStats::new(array.cell_type().states());
    for wl in 1..wls.saturating_sub(1) {
        if !(flags[wl - 1] && flags[wl] && flags[wl + 1]) {
            continue;
        }
        let up = &programmed[(wl - 1) * n..wl * n];
        let mid = &programmed[wl * n..(wl + 1) * n];
        let down = &programmed[(wl + 1) * n..(wl + 2) * n];
        for i in 0..n {
            stats.record(up[i], mid[i], down[i]);
        }
    }
    Ok(stats)
}

/// Raw error statistics of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct RberReport {
    pub cells_per_state: Vec<u64>,
    pub errors_per_state: Vec<u64>,
    /// Fraction of cells programmed to `k` whose current state differs.
    pub per_state: Vec<f64>,
    pub erroneous_cells: u64,
    pub total_cells: u64,
    /// Erroneous cells over all programmed cells.
    pub aggregate_rber: f64,
    pub bit_errors: u64,
    pub total_bits: u64,
    pub bit_error_rate: f64,
    /// Largest raw bit-error count of any 1 KiB codeword.
    pub worst_codeword_errors: u32,
}

pub fn measure_rber(array: &FlashArray, b: BlockAddr, map: &GrayCodeMap) -> Result<RberReport> {
    let wls = array.geometry().wordlines_per_block;
    let n = array.cells_per_wordline();
    let m = map.bits_per_cell();
    let states = array.cell_type().states();
    let (programmed, current, flags) = array.block_slices(b)?;
    if flags.iter().all(|&f| !f) {
        return Err(Error::Unprogrammed(format!("chip {} block {}", b.chip, b.block)));
    }
    let mut cells_per_state = vec![0u64; states];
    let mut errors_per_state = vec![0u64; states];
    let mut bit_errors = 0u64;
    let mut total_cells = 0u64;
    for wl in (0..wls).filter(|&w| flags[w]) {
        let r = wl * n..(wl + 1) * n;
        for (&p, &c) in programmed[r.clone()].iter().zip(&current[r]) {
            cells_per_state[p.index()] += 1;
            if p != c {
                errors_per_state[p.index()] += 1;
                bit_errors += u64::from((map.code_of(p) ^ map.code_of(c)).count_ones());
            }
        }
        total_cells += n as u64;
    }
    let per_state = cells_per_state
        .iter()
        .zip(&errors_per_state)
        .map(|(&c, &e)| if c == 0 { 0.0 } else { e as f64 / c as f64 })
        .collect();
    let erroneous_cells = errors_per_state.iter().sum();
    let total_bits = total_cells * m as u64;
    let worst = codeword_error_counts(array, b, map)?.into_iter().max().unwrap_or(0);
    Ok(RberReport {
        cells_per_state,
        errors_per_state,
        per_state,
        erroneous_cells,
        total_cells,
        aggregate_rber: erroneous_cells as f64 / total_cells as f64,
        bit_errors,
        total_bits,
        bit_error_rate: bit_errors as f64 / total_bits as f64,
        worst_codeword_errors: worst,
    })
}

/// Raw bit errors per 1 KiB codeword, ordered by (wordline, page, codeword)
/// over the programmed wordlines of a block.
pub fn codeword_error_counts(array: &FlashArray, b: BlockAddr, map: &GrayCodeMap) -> Result<Vec<u32>> {
    let wls = array.geometry().wordlines_per_block;
    let n = array.cells_per_wordline();
    let m = map.bits_per_cell();
    let per_page = n.div_ceil(CODEWORD_BITS);
    let (programmed, current, flags) = array.block_slices(b)?;
    let mut out = Vec::new();
    for wl in (0..wls).filter(|&w| flags[w]) {
        let base = out.len();
        out.resize(base + m * per_page, 0u32);
        let r = wl * n..(wl + 1) * n;
        for (i, (&p, &c)) in programmed[r.clone()].iter().zip(&current[r]).enumerate() {
            if p == c {
                continue;
            }
            let mut diff = map.code_of(p) ^ map.code_of(c);
            while diff != 0 {
                let j = diff.trailing_zeros() as usize;
                out[base + j * per_page + i / CODEWORD_BITS] += 1;
                diff &= diff - 1;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gray::CellType;
    use crate::nand::{Geometry, WlAddr};

    fn s(k: u8) -> CellState {
        CellState::from_raw(k)
    }

    fn toy(wls: usize, page_bytes: usize) -> FlashArray {
        let g = Geometry { wordlines_per_block: wls, page_bytes, ..Geometry::default() };
        FlashArray::new(g, CellType::Qlc).unwrap()
    }

    #[test]
    fn constructed_e_p15_e_columns() {
        let mut a = toy(3, 8);
        let mut mid = vec![s(3); 64];
        mid[4] = s(15);
        mid[40] = s(15);
        a.program_wordline(WlAddr::new(0, 0, 0), &[s(0); 64]).unwrap();
        a.program_wordline(WlAddr::new(0, 0, 1), &mid).unwrap();
        a.program_wordline(WlAddr::new(0, 0, 2), &[s(0); 64]).unwrap();
        let st = scan_weak_patterns(&a, BlockAddr::new(0, 0), false).unwrap();
        assert_eq!(st.get(s(0), s(15), s(0)), 2);
        assert_eq!(st.get(s(0), s(3), s(0)), 62);
        assert_eq!(st.total_triples(), 64);
    }

    #[test]
    fn partial_block_is_rejected_unless_allowed() {
        let mut a = toy(4, 8);
        for wl in 0..3 {
            a.program_wordline(WlAddr::new(0, 0, wl), &[s(0); 64]).unwrap();
        }
        assert!(matches!(scan_weak_patterns(&a, BlockAddr::new(0, 0), false), Err(Error::PartialScan(_))));
        let st = scan_weak_patterns(&a, BlockAddr::new(0, 0), true).unwrap();
        assert_eq!(st.total_triples(), 64);
    }

    #[test]
    fn single_injected_flip() {
        let mut a = toy(2, 1024);
        let map = GrayCodeMap::standard(CellType::Qlc);
        let b = BlockAddr::new(0, 0);
        for wl in 0..2 {
            a.program_wordline(b.wordline(wl), &vec![s(9); 8192]).unwrap();
        }
        let clean = measure_rber(&a, b, &map).unwrap();
        assert_eq!(clean.erroneous_cells, 0);
        assert!(clean.per_state.iter().all(|&r| r == 0.0));
        a.inject_shift(b.wordline(1), 17, s(10)).unwrap();
        let r = measure_rber(&a, b, &map).unwrap();
        assert_eq!(r.aggregate_rber, 1.0 / 16384.0);
        assert_eq!(r.bit_errors, 1);
        assert_eq!(r.worst_codeword_errors, 1);
        let cw = codeword_error_counts(&a, b, &map).unwrap();
        assert_eq!(cw.len(), 2 * 4);
        assert_eq!(cw.iter().sum::<u32>(), 1);
    }

    #[test]
    fn csv_round_trip() {
        let mut st = WeakPatternStats::new(8);
        st.record(s(0), s(7), s(0));
        st.record(s(0), s(7), s(0));
        st.record(s(1), s(2), s(3));
        let mut buf = Vec::new();
        st.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("k_up,k_victim,k_down,count\n"));
        let back = WeakPatternStats::read_csv(&buf[..], 8).unwrap();
        assert_eq!(back, st);
    }
}
