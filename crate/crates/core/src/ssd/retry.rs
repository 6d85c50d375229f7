//! Read-retry ladder and the per-condition raw-error distributions it is
//! driven by.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::SsdConfig;
use crate::error::{Error, Result};
use crate::gray::{CellType, GrayCodeMap};
use crate::nand::{BlockAddr, ErrorOnsets, FlashArray, Geometry, RetentionModel};
use crate::profile::ErrorProfile;
use crate::randomizer::{Mode, Randomizer};
use crate::util::seeded;

/// `r = ceil(max(0, E - t0) / delta_t)`, capped at `max_retries`, where `E`
/// is the worst raw codeword error count of the page. Every retry shifts
/// the read references and leaves a fraction `rho` of the errors behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadRetryModel {
    pub t0: f64,
    pub delta_t: f64,
    pub max_retries: u32,
    pub rho: f64,
}

impl ReadRetryModel {
    pub fn default_for(cell: CellType) -> Self {
        match cell {
            CellType::Tlc => ReadRetryModel { t0: 51.5, delta_t: 0.5, max_retries: 40, rho: 0.5 },
            CellType::Qlc => ReadRetryModel { t0: 38.7, delta_t: 1.5, max_retries: 40, rho: 0.5 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.t0 >= 0.0) {
            return Err(Error::Config("retry t0 must be finite and >= 0".into()));
        }
        if !(self.delta_t.is_finite() && self.delta_t > 0.0) {
            return Err(Error::Config("retry delta_t must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Config("retry rho must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn retries(&self, errors: u32) -> u32 {
        let excess = f64::from(errors) - self.t0;
        if excess <= 0.0 {
            0
        } else {
            ((excess / self.delta_t).ceil() as u32).min(self.max_retries)
        }
    }

    /// Raw errors still present after `r` retries.
    pub fn residual_errors(&self, errors: u32, r: u32) -> f64 {
        f64::from(errors) * self.rho.powi(r as i32)
    }
}

/// Wear and retention age at which a measurement is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub pec: u32,
    pub retention_months: f64,
}

impl Condition {
    pub const fn new(pec: u32, retention_months: f64) -> Self {
        Condition { pec, retention_months }
    }
}

/// Deflated NAND region programmed to measure raw error distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub geometry: Geometry,
    /// Independent data/retention draws; statistics pool over them.
    pub replicas: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { geometry: Geometry::default(), replicas: 8, seed: 0x5EED }
    }
}

/// Programs every wordline of `array` with uniformly random user data.
pub fn program_random<R: Rng>(array: &mut FlashArray, randomizer: &Randomizer, rng: &mut R) -> Result<()> {
    let g = *array.geometry();
    let m = randomizer.map().bits_per_cell();
    for chip in 0..g.chips {
        for block in 0..g.blocks_per_chip {
            for wl in 0..g.wordlines_per_block {
                let pages: Vec<Vec<u8>> = (0..m)
                    .map(|_| {
                        let mut p = vec![0u8; g.page_bytes];
                        rng.fill(&mut p[..]);
                        p
                    })
                    .collect();
                randomizer.write_wordline(array, BlockAddr::new(chip, block).wordline(wl), &pages)?;
            }
        }
    }
    Ok(())
}

/// Error onsets of a probe region programmed under one randomizer mode.
#[derive(Debug, Clone)]
pub struct ModeProbe {
    mode: Mode,
    model: RetentionModel,
    onsets: Vec<ErrorOnsets>,
}

impl ModeProbe {
    /// `max_stress` bounds the wear/age multiplier the probe will be asked
    /// about; see [`RetentionModel::stress`].
    pub fn build(profile: &ErrorProfile, mode: Mode, cfg: &ProbeConfig, max_stress: f64) -> Result<Self> {
        let cell = profile.cell_type()?;
        let model = RetentionModel::new(profile, &profile.lcs_model())?;
        let map = GrayCodeMap::standard(cell);
        let mut onsets = Vec::new();
        for rep in 0..cfg.replicas.max(1) {
            let randomizer = Randomizer::standard(mode, profile, seeded(cfg.seed, &[rep as u64, 1]).gen())?;
            let mut array = FlashArray::new(cfg.geometry, cell)?;
            let mut data_rng = seeded(cfg.seed, &[rep as u64, 2]);
            program_random(&mut array, &randomizer, &mut data_rng)?;
            let retention_seed = seeded(cfg.seed, &[rep as u64, 3]).gen();
            for chip in 0..cfg.geometry.chips {
                for block in 0..cfg.geometry.blocks_per_chip {
                    onsets.push(ErrorOnsets::collect(
                        &array,
                        BlockAddr::new(chip, block),
                        &model,
                        &map,
                        retention_seed,
                        max_stress,
                    )?);
                }
            }
        }
        Ok(ModeProbe { mode, model, onsets })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn model(&self) -> &RetentionModel {
        &self.model
    }

    pub fn stress(&self, c: Condition) -> f64 {
        self.model.stress(f64::from(c.pec), c.retention_months)
    }

    /// Worst codeword error count of every probed page.
    pub fn page_worst(&self, c: Condition) -> Vec<u32> {
        let s = self.stress(c);
        self.onsets.iter().flat_map(|o| o.page_worst_at(s)).collect()
    }

    /// Worst codeword of each replica block at `c`.
    pub fn block_worst(&self, c: Condition) -> Vec<u32> {
        let s = self.stress(c);
        self.onsets.iter().map(|o| o.worst_at(s)).collect()
    }
}

/// Empirical per-page worst-codeword error distribution at one condition.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryTable {
    pub condition: Condition,
    pub mode: Mode,
    pub page_worst: Vec<u32>,
}

impl RetryTable {
    pub fn from_probe(probe: &ModeProbe, condition: Condition) -> Self {
        RetryTable { condition, mode: probe.mode(), page_worst: probe.page_worst(condition) }
    }

    /// No raw errors at all.
    pub fn error_free(mode: Mode) -> Self {
        RetryTable { condition: Condition::new(0, 0.0), mode, page_worst: vec![0] }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        self.page_worst[rng.gen_range(0..self.page_worst.len())]
    }

    pub fn mean_retries(&self, model: &ReadRetryModel) -> f64 {
        let total: u64 = self.page_worst.iter().map(|&e| u64::from(model.retries(e))).sum();
        total as f64 / self.page_worst.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryStats {
    pub mode: Mode,
    pub condition: Condition,
    pub mean_retries: f64,
    pub mean_page_worst: f64,
    /// Reads needing 0, 1, 2, ... retries.
    pub histogram: Vec<u64>,
    pub pages: usize,
}

impl RetryStats {
    pub fn from_table(table: &RetryTable, model: &ReadRetryModel) -> Self {
        let mut histogram = vec![0u64; model.max_retries as usize + 1];
        for &e in &table.page_worst {
            histogram[model.retries(e) as usize] += 1;
        }
        let n = table.page_worst.len();
        RetryStats {
            mode: table.mode,
            condition: table.condition,
            mean_retries: table.mean_retries(model),
            mean_page_worst: table.page_worst.iter().map(|&e| f64::from(e)).sum::<f64>() / n as f64,
            histogram,
            pages: n,
        }
    }
}

/// Mean read retries per page read at `condition` under the drive's mode.
pub fn measure_read_retry(
    ssd: &SsdConfig,
    profile: &ErrorProfile,
    condition: Condition,
    probe: &ProbeConfig,
) -> Result<RetryStats> {
    ssd.validate()?;
    if profile.cell_type()? != ssd.cell {
        return Err(Error::Dimension(format!("{}-bit profile for a {} drive", profile.m, ssd.cell)));
    }
    let p = ModeProbe::build(profile, ssd.mode, probe, f64::INFINITY)?;
    Ok(RetryStats::from_table(&RetryTable::from_probe(&p, condition), &ssd.retry))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retry_ladder() {
        let m = ReadRetryModel { t0: 40.0, delta_t: 5.0, max_retries: 10, rho: 0.5 };
        assert_eq!(m.retries(0), 0);
        assert_eq!(m.retries(40), 0);
        assert_eq!(m.retries(41), 1);
        assert_eq!(m.retries(45), 1);
        assert_eq!(m.retries(46), 2);
        assert_eq!(m.retries(10_000), 10);
        let mut last = 0;
        for e in 0..200 {
            let r = m.retries(e);
            assert!(r >= last);
            last = r;
        }
        assert_eq!(m.residual_errors(80, 2), 20.0);
    }

    #[test]
    fn fresh_device_needs_no_retries() {
        let p = ErrorProfile::default_for(CellType::Tlc);
        let ssd = SsdConfig::tlc(Mode::Baseline);
        let probe = ProbeConfig {
            geometry: Geometry { wordlines_per_block: 8, page_bytes: 1024, ..Geometry::default() },
            replicas: 1,
            seed: 3,
        };
        let s = measure_read_retry(&ssd, &p, Condition::new(0, 0.0), &probe).unwrap();
        assert_eq!(s.mean_retries, 0.0);
        assert_eq!(s.mean_page_worst, 0.0);
    }
}
