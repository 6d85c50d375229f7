use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use starsim::calibrate::CalibrationTargets;
use starsim::pipeline::DatapathConfig;
use starsim::ssd::{Condition, SsdConfig};
use starsim::{CellType, Error, ErrorProfile, Geometry, Mode, Result};

/// Geometry fields that may be overridden for the programmed populations and
/// probe regions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryOverrides {
    pub blocks: Option<usize>,
    pub wordlines_per_block: Option<usize>,
    pub page_bytes: Option<usize>,
    pub spare_bytes: Option<usize>,
}

impl GeometryOverrides {
    pub fn apply(&self, mut g: Geometry) -> Geometry {
        if let Some(b) = self.blocks {
            g.blocks_per_chip = b;
        }
        if let Some(w) = self.wordlines_per_block {
            g.wordlines_per_block = w;
        }
        if let Some(p) = self.page_bytes {
            g.page_bytes = p;
        }
        if let Some(s) = self.spare_bytes {
            g.spare_bytes = s;
        }
        g
    }
}

/// Everything a run depends on. Command-line flags override the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: Option<String>,
    pub cell: Option<CellType>,
    pub profile: Option<PathBuf>,
    pub mode: Option<Mode>,
    pub geometry: Option<GeometryOverrides>,
    pub conditions: Option<Vec<Condition>>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Drive description; defaults to the deflated drive for the cell type.
    pub ssd: Option<PathBuf>,
    pub replicas: Option<usize>,
    pub step_pec: Option<u32>,
    pub max_pec: Option<u32>,
    pub workloads: Option<Vec<String>>,
    pub duration_s: Option<f64>,
    pub datapaths: Option<Vec<DatapathConfig>>,
    pub groups: Option<u64>,
    pub targets: Option<CalibrationTargets>,
}

pub const DEFAULT_SEED: u64 = 1;

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok(cfg.resolve_paths(base))
    }

    fn resolve_paths(mut self, base: &Path) -> Self {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p {
                if q.is_relative() {
                    *q = base.join(&q);
                }
            }
        };
        fix(&mut self.profile);
        fix(&mut self.ssd);
        self
    }

    /// Referenced files must exist.
    pub fn validate(&self) -> Result<()> {
        for p in [&self.profile, &self.ssd].into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        if let Some(d) = self.duration_s {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::Config("duration_s must be positive".into()));
            }
        }
        if self.replicas == Some(0) {
            return Err(Error::Config("replicas must be positive".into()));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn cell(&self) -> Result<CellType> {
        match (&self.cell, &self.profile) {
            (Some(c), _) => Ok(*c),
            (None, Some(_)) => self.profile().and_then(|p| p.cell_type()),
            (None, None) => Ok(CellType::Qlc),
        }
    }

    pub fn profile(&self) -> Result<ErrorProfile> {
        let p = match &self.profile {
            Some(path) => starsim::load_profile(path)?,
            None => ErrorProfile::default_for(self.cell.unwrap_or(CellType::Qlc)),
        };
        if let Some(c) = self.cell {
            if p.cell_type()? != c {
                return Err(Error::Dimension(format!("{}-bit profile for {c}", p.m)));
            }
        }
        Ok(p)
    }

    pub fn ssd(&self) -> Result<SsdConfig> {
        let cell = self.cell()?;
        let ssd = match &self.ssd {
            Some(path) => SsdConfig::load(path)?,
            None => SsdConfig::for_cell(cell, Mode::Baseline),
        };
        if ssd.cell != cell {
            return Err(Error::Dimension(format!("{} drive for a {cell} experiment", ssd.cell)));
        }
        Ok(ssd)
    }

    pub fn modes(&self) -> Vec<Mode> {
        self.mode.into_iter().collect()
    }

    pub fn geometry(&self, g: Geometry) -> Geometry {
        self.geometry.as_ref().map_or(g, |o| o.apply(g))
    }

    /// Canonical JSON used for the provenance hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
