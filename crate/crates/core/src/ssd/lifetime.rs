//! Endurance sweep: worst codeword after reference retention versus wear.

use serde::{Deserialize, Serialize};

use super::config::SsdConfig;
use super::retry::{Condition, ModeProbe, ProbeConfig};
use crate::error::{Error, Result};
use crate::gray::CellType;
use crate::nand::Geometry;
use crate::profile::ErrorProfile;
use crate::randomizer::Mode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub step_pec: u32,
    pub max_pec: u32,
    pub retention_months: f64,
    pub probe: ProbeConfig,
}

impl SweepConfig {
    pub fn default_for(cell: CellType, step_pec: u32) -> Self {
        let max_pec = match cell {
            CellType::Tlc => 25_000,
            CellType::Qlc => 8_000,
        };
        SweepConfig {
            step_pec,
            max_pec,
            retention_months: 12.0,
            probe: ProbeConfig {
                geometry: Geometry {
                    wordlines_per_block: 64,
                    page_bytes: 4096,
                    spare_bytes: 512,
                    ..Geometry::default()
                },
                replicas: 64,
                seed: 0x11FE,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimePoint {
    pub pec: u32,
    /// Worst codeword per probe block, averaged over blocks.
    pub mean_worst: f64,
    pub max_worst: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeReport {
    pub cell: CellType,
    pub mode: Mode,
    pub ecc_limit: u32,
    pub retention_months: f64,
    pub curve: Vec<LifetimePoint>,
    /// Last swept PEC whose mean worst codeword stays within the ECC limit;
    /// 0 when even the fresh device fails.
    pub lifetime_pec: u32,
}

impl LifetimeReport {
    pub fn ratio_to(&self, baseline: &LifetimeReport) -> f64 {
        f64::from(self.lifetime_pec) / f64::from(baseline.lifetime_pec.max(1))
    }
}

/// Sweeps with [`SweepConfig::default_for`] the drive's cell type.
pub fn sweep_lifetime(ssd: &SsdConfig, profile: &ErrorProfile, step_pec: u32) -> Result<LifetimeReport> {
    sweep_lifetime_with(ssd, profile, &SweepConfig::default_for(ssd.cell, step_pec))
}

pub fn sweep_lifetime_with(ssd: &SsdConfig, profile: &ErrorProfile, cfg: &SweepConfig) -> Result<LifetimeReport> {
    if cfg.step_pec == 0 {
        return Err(Error::Domain("step_pec must be at least 1".into()));
    }
    ssd.validate()?;
    if profile.cell_type()? != ssd.cell {
        return Err(Error::Dimension(format!("{}-bit profile for a {} drive", profile.m, ssd.cell)));
    }
    let probe = ModeProbe::build(profile, ssd.mode, &cfg.probe, f64::INFINITY)?;
    let curve: Vec<LifetimePoint> = (0..=cfg.max_pec)
        .step_by(cfg.step_pec as usize)
        .map(|pec| {
            let w = probe.block_worst(Condition::new(pec, cfg.retention_months));
            LifetimePoint {
                pec,
                mean_worst: w.iter().map(|&x| f64::from(x)).sum::<f64>() / w.len() as f64,
                max_worst: w.iter().copied().max().unwrap_or(0),
            }
        })
        .collect();
    let limit = f64::from(ssd.ecc_bits_per_kib);
    let lifetime_pec = curve.iter().take_while(|p| p.mean_worst <= limit).last().map_or(0, |p| p.pec);
    Ok(LifetimeReport {
        cell: ssd.cell,
        mode: ssd.mode,
        ecc_limit: ssd.ecc_bits_per_kib,
        retention_months: cfg.retention_months,
        curve,
        lifetime_pec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(cell: CellType, step: u32) -> SweepConfig {
        let mut c = SweepConfig::default_for(cell, step);
        c.probe.geometry = Geometry { wordlines_per_block: 8, page_bytes: 1024, spare_bytes: 0, ..Geometry::default() };
        c.probe.replicas = 2;
        c.max_pec = 4000;
        c
    }

    #[test]
    fn unlimited_ecc_reaches_sweep_end() {
        let mut ssd = SsdConfig::tlc(Mode::Star);
        ssd.ecc_bits_per_kib = u32::MAX;
        let r =
            sweep_lifetime_with(&ssd, &ErrorProfile::default_for(CellType::Tlc), &quick(CellType::Tlc, 500)).unwrap();
        assert_eq!(r.lifetime_pec, 4000);
        assert_eq!(r.curve.len(), 9);
    }

    #[test]
    fn curve_is_monotone_and_step_checked() {
        let ssd = SsdConfig::qlc(Mode::Baseline);
        let p = ErrorProfile::default_for(CellType::Qlc);
        let r = sweep_lifetime_with(&ssd, &p, &quick(CellType::Qlc, 250)).unwrap();
        for w in r.curve.windows(2) {
            assert!(w[1].mean_worst >= w[0].mean_worst);
        }
        assert!(sweep_lifetime_with(&ssd, &p, &quick(CellType::Qlc, 0)).is_err());
    }
}
