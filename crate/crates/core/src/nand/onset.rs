//! Stress at which each cell of a programmed block first fails.
//!
//! A cell with shift weight `w` and retention uniform `u` is in error at
//! stress `S` exactly when `u < w S`, so its onset is `u / w`. Sorting the
//! onsets per codeword answers "how many raw errors at this wear and age"
//! for any condition without re-running the injection, and gives the same
//! error sets as [`apply_retention`](super::apply_retention) with the same
//! seed.

use super::retention::{neighbours, wordline_uniforms};
use super::stats::CODEWORD_BITS;
use super::{BlockAddr, FlashArray, RetentionModel};
use crate::error::{Error, Result};
use crate::gray::GrayCodeMap;

#[derive(Debug, Clone)]
pub struct ErrorOnsets {
    codewords_per_page: usize,
    pages_per_wordline: usize,
    /// Sorted onsets per codeword, ordered by (wordline, page, codeword).
    onsets: Vec<Vec<f64>>,
}

impl ErrorOnsets {
    /// Collects onsets up to `max_stress` for every programmed wordline of
    /// block `b`.
    pub fn collect(
        array: &FlashArray,
        b: BlockAddr,
        model: &RetentionModel,
        map: &GrayCodeMap,
        seed: u64,
        max_stress: f64,
    ) -> Result<Self> {
        if model.states() != array.cell_type().states() || map.cell_type() != array.cell_type() {
            return Err(Error::Dimension("model, map and array disagree on cell type".into()));
        }
        let wls = array.geometry().wordlines_per_block;
        let n = array.cells_per_wordline();
        let m = map.bits_per_cell();
        let per_page = n.div_ceil(CODEWORD_BITS);
        let (programmed, _, flags) = array.block_slices(b)?;
        let mut onsets = Vec::new();
        for wl in (0..wls).filter(|&w| flags[w]) {
            let base = onsets.len();
            onsets.resize(base + m * per_page, Vec::new());
            let (up, mid, down) = neighbours(programmed, wl, wls, n);
            for (i, u) in wordline_uniforms(seed, b.wordline(wl)).take(n).enumerate() {
                let k = mid[i];
                let rule = model.rule(up.map_or(k, |s| s[i]), k, down.map_or(k, |s| s[i]));
                if rule.weight <= 0.0 {
                    continue;
                }
                let onset = u / rule.weight;
                if onset >= max_stress {
                    continue;
                }
                let mut diff = map.code_of(k) ^ map.code_of(rule.to);
                while diff != 0 {
                    let j = diff.trailing_zeros() as usize;
                    onsets[base + j * per_page + i / CODEWORD_BITS].push(onset);
                    diff &= diff - 1;
                }
            }
        }
        for v in &mut onsets {
            v.sort_by(f64::total_cmp);
        }
        Ok(ErrorOnsets { codewords_per_page: per_page, pages_per_wordline: m, onsets })
    }

    pub fn codewords(&self) -> usize {
        self.onsets.len()
    }

    pub fn codewords_per_page(&self) -> usize {
        self.codewords_per_page
    }

    pub fn pages(&self) -> usize {
        self.onsets.len() / self.codewords_per_page
    }

    pub fn pages_per_wordline(&self) -> usize {
        self.pages_per_wordline
    }

    /// Raw errors per codeword at `stress`.
    pub fn errors_at(&self, stress: f64) -> Vec<u32> {
        self.onsets.iter().map(|v| v.partition_point(|&o| o < stress) as u32).collect()
    }

    pub fn worst_at(&self, stress: f64) -> u32 {
        self.onsets.iter().map(|v| v.partition_point(|&o| o < stress) as u32).max().unwrap_or(0)
    }

    /// Worst codeword of each page at `stress`.
    pub fn page_worst_at(&self, stress: f64) -> Vec<u32> {
        self.errors_at(stress).chunks(self.codewords_per_page).map(|c| c.iter().copied().max().unwrap_or(0)).collect()
    }
}
