use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gray::CellType;
use crate::randomizer::Mode;

use super::retry::ReadRetryModel;

/// Emulated drive. Field names follow the usual datasheet table: channel
/// and die counts, interface rate, per-page read and program times and the
/// ECC strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsdConfig {
    pub cell: CellType,
    pub channels: usize,
    pub chips_per_channel: usize,
    pub planes_per_chip: usize,
    pub blocks_per_plane: usize,
    pub pages_per_block: usize,
    pub page_bytes: usize,
    /// Host interface rate in GB/s.
    pub interface_gbps: f64,
    pub t_r_us: f64,
    pub t_prog_us: f64,
    pub t_erase_us: f64,
    pub ecc_bits_per_kib: u32,
    pub mode: Mode,
    /// Garbage collection starts when a plane's free-block fraction drops
    /// below this.
    pub gc_threshold: f64,
    pub retry: ReadRetryModel,
    /// When present, must equal the geometry product.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_bytes: Option<u64>,
}

impl SsdConfig {
    /// Deflated TLC drive: 8 channels x 1 chip x 2 planes, 3 GiB.
    pub fn tlc(mode: Mode) -> Self {
        SsdConfig {
            cell: CellType::Tlc,
            channels: 8,
            chips_per_channel: 1,
            planes_per_chip: 2,
            blocks_per_plane: 64,
            pages_per_block: 64 * 3,
            page_bytes: 16384,
            interface_gbps: 8.0,
            t_r_us: 45.0,
            t_prog_us: 390.0,
            t_erase_us: 3500.0,
            ecc_bits_per_kib: 72,
            mode,
            gc_threshold: 0.10,
            retry: ReadRetryModel::default_for(CellType::Tlc),
            capacity_bytes: None,
        }
    }

    /// Deflated QLC drive: 8 channels x 1 chip x 2 planes, 4 GiB.
    pub fn qlc(mode: Mode) -> Self {
        SsdConfig {
            cell: CellType::Qlc,
            pages_per_block: 64 * 4,
            t_r_us: 110.0,
            t_prog_us: 2000.0,
            retry: ReadRetryModel::default_for(CellType::Qlc),
            ..SsdConfig::tlc(mode)
        }
    }

    pub fn for_cell(cell: CellType, mode: Mode) -> Self {
        match cell {
            CellType::Tlc => Self::tlc(mode),
            CellType::Qlc => Self::qlc(mode),
        }
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        SsdConfig { mode, ..self.clone() }
    }

    pub fn chips(&self) -> usize {
        self.channels * self.chips_per_channel
    }

    pub fn planes(&self) -> usize {
        self.chips() * self.planes_per_chip
    }

    pub fn total_pages(&self) -> usize {
        self.planes() * self.blocks_per_plane * self.pages_per_block
    }

    pub fn capacity(&self) -> u64 {
        self.total_pages() as u64 * self.page_bytes as u64
    }

    /// Host transfer time of `bytes` in microseconds.
    pub fn transfer_us(&self, bytes: u64) -> f64 {
        bytes as f64 / (self.interface_gbps * 1e3)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("channels", self.channels),
            ("chips_per_channel", self.chips_per_channel),
            ("planes_per_chip", self.planes_per_chip),
            ("blocks_per_plane", self.blocks_per_plane),
            ("pages_per_block", self.pages_per_block),
            ("page_bytes", self.page_bytes),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        let times = [
            ("interface_gbps", self.interface_gbps),
            ("t_r_us", self.t_r_us),
            ("t_prog_us", self.t_prog_us),
            ("t_erase_us", self.t_erase_us),
        ];
        for (name, v) in times {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !self.page_bytes.is_multiple_of(512) {
            return Err(Error::Config("page size must be a multiple of 512 bytes".into()));
        }
        if !(0.0..1.0).contains(&self.gc_threshold) {
            return Err(Error::Config("gc_threshold must lie in [0, 1)".into()));
        }
        if self.blocks_per_plane < 4 {
            return Err(Error::Config("need at least 4 blocks per plane".into()));
        }
        if !self.mode.supports(self.cell) {
            return Err(Error::UnsupportedMode(format!("{} on {}", self.mode, self.cell)));
        }
        if let Some(c) = self.capacity_bytes {
            if c != self.capacity() {
                return Err(Error::Config(format!("capacity {c} does not match geometry {}", self.capacity())));
            }
        }
        self.retry.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SsdConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
