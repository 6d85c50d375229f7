//! Write-path data transforms and their read-path inverses.

pub mod lfsr;
pub mod star;
pub mod tailcut;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gray::{CellState, CellType, GrayCodeMap};
use crate::nand::{FlashArray, WlAddr};
use crate::profile::{build_delta_lut, DeltaLut, ErrorProfile};

pub use lfsr::{lfsr_randomize, LfsrConfig};
pub use star::{
    delta_group_error, fib_overhead, group_error, groups_of, groups_per_wordline, optimal_flip, star_flip_states,
    star_read_transform, star_write_transform, Fib, FlipOp, Group, GroupError, StarConfig, DEFAULT_GROUP_SIZE,
};
pub use tailcut::{tailcut_read_transform, tailcut_states, tailcut_write_transform, TailCutContext, TailCutRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Baseline,
    Tailcut,
    Star,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Baseline, Mode::Tailcut, Mode::Star];

    pub fn supports(self, cell: CellType) -> bool {
        !(self == Mode::Tailcut && cell != CellType::Tlc)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Baseline => "baseline",
            Mode::Tailcut => "tailcut",
            Mode::Star => "star",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Mode::Baseline),
            "tailcut" => Ok(Mode::Tailcut),
            "star" => Ok(Mode::Star),
            _ => Err(Error::Parse(format!("unknown randomizer mode `{s}`"))),
        }
    }
}

/// A configured write path: LFSR plus the mode-specific stage.
#[derive(Debug, Clone)]
pub struct Randomizer {
    mode: Mode,
    map: GrayCodeMap,
    star: StarConfig,
    lut: Option<DeltaLut>,
}

impl Randomizer {
    pub fn new(mode: Mode, map: GrayCodeMap, star: StarConfig, profile: &ErrorProfile) -> Result<Self> {
        if !mode.supports(map.cell_type()) {
            return Err(Error::UnsupportedMode(format!("{mode} on {}", map.cell_type())));
        }
        if star.group_size == 0 {
            return Err(Error::Config("group size must be positive".into()));
        }
        star.lfsr.verify()?;
        let lut = match mode {
            Mode::Star => Some(build_delta_lut(profile, &map)?),
            _ => None,
        };
        Ok(Randomizer { mode, map, star, lut })
    }

    /// Default LFSR and group size for `mode` with the given profile.
    pub fn standard(mode: Mode, profile: &ErrorProfile, lfsr_seed: u64) -> Result<Self> {
        let map = GrayCodeMap::standard(profile.cell_type()?);
        let star = StarConfig { lfsr: LfsrConfig::with_seed(lfsr_seed), ..StarConfig::default() };
        Self::new(mode, map, star, profile)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn map(&self) -> &GrayCodeMap {
        &self.map
    }

    pub fn config(&self) -> &StarConfig {
        &self.star
    }

    /// Transforms user pages into cell states plus out-of-band metadata.
    pub fn encode(
        &self,
        user_pages: &[Vec<u8>],
        a: WlAddr,
        ctx: TailCutContext<'_>,
    ) -> Result<(Vec<CellState>, Vec<u8>)> {
        if user_pages.len() != self.map.bits_per_cell() {
            return Err(Error::Geometry(format!(
                "expected {} pages, got {}",
                self.map.bits_per_cell(),
                user_pages.len()
            )));
        }
        let cells = user_pages[0].len() * 8;
        let scrambled = lfsr_randomize(user_pages, &self.star.lfsr, a)?;
        let mut states = self.map.decode_states(&scrambled, cells)?;
        let oob = self.shape_states(&mut states, ctx)?;
        Ok((states, oob))
    }

    /// Applies the mode-specific stage to already-scrambled states.
    pub fn shape_states(&self, states: &mut [CellState], ctx: TailCutContext<'_>) -> Result<Vec<u8>> {
        Ok(match self.mode {
            Mode::Baseline => Vec::new(),
            Mode::Tailcut => tailcut_states(states, ctx, &self.map)?.as_bytes().to_vec(),
            Mode::Star => {
                let lut = self.lut.as_ref().expect("star mode has a LUT");
                star_flip_states(states, self.star.group_size, lut, &self.map).to_bytes()
            }
        })
    }

    /// Inverts [`encode`](Self::encode) on sensed pages.
    pub fn decode(&self, raw_pages: &[Vec<u8>], oob: &[u8], a: WlAddr) -> Result<Vec<Vec<u8>>> {
        let cells = raw_pages.first().map_or(0, Vec::len) * 8;
        match self.mode {
            Mode::Baseline => lfsr_randomize(raw_pages, &self.star.lfsr, a),
            Mode::Tailcut => {
                let rec = TailCutRecord::from_bytes(oob, cells)?;
                tailcut_read_transform(raw_pages, &rec, &self.star.lfsr, a, &self.map)
            }
            Mode::Star => {
                let groups = groups_per_wordline(cells, self.star.group_size);
                let fib = Fib::from_bytes(oob, self.map.bits_per_cell(), groups)?;
                star_read_transform(raw_pages, &fib, &self.star, a, &self.map)
            }
        }
    }

    /// Encodes and programs one wordline, taking TailCut context from the
    /// two wordlines below it.
    pub fn write_wordline(&self, array: &mut FlashArray, a: WlAddr, user_pages: &[Vec<u8>]) -> Result<()> {
        let (states, oob) = {
            let ctx = context_from(array, a)?;
            self.encode(user_pages, a, ctx)?
        };
        array.program_wordline_with_oob(a, &states, oob)
    }

    /// Programs already-scrambled states after the mode-specific stage.
    pub fn program_scrambled(&self, array: &mut FlashArray, a: WlAddr, mut states: Vec<CellState>) -> Result<()> {
        let oob = {
            let ctx = context_from(array, a)?;
            self.shape_states(&mut states, ctx)?
        };
        array.program_wordline_with_oob(a, &states, oob)
    }

    /// Senses and decodes one wordline.
    pub fn read_wordline(&self, array: &FlashArray, a: WlAddr) -> Result<Vec<Vec<u8>>> {
        let raw = array.read_wordline(a, &self.map)?;
        self.decode(&raw, array.oob(a)?, a)
    }
}

fn context_from(array: &FlashArray, a: WlAddr) -> Result<TailCutContext<'_>> {
    if a.wl < 2 {
        return Ok(TailCutContext::default());
    }
    Ok(TailCutContext {
        prev2: Some(array.programmed_states(WlAddr { wl: a.wl - 2, ..a })?),
        prev1: Some(array.programmed_states(WlAddr { wl: a.wl - 1, ..a })?),
    })
}

/// Longest run of one state along any bitline of a stack of wordlines.
pub fn max_bitline_run(wordlines: &[Vec<CellState>]) -> usize {
    let Some(first) = wordlines.first() else {
        return 0;
    };
    let mut best = 0;
    for i in 0..first.len() {
        let mut run = 0;
        let mut prev = None;
        for wl in wordlines {
            if Some(wl[i]) == prev {
                run += 1;
            } else {
                run = 1;
                prev = Some(wl[i]);
            }
            best = best.max(run);
        }
    }
    best
}
