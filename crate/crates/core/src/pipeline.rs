//! Cycle-accounting model of the controller datapath: zig-zag page
//! interleaving feeding a three-stage group pipeline
//! (scrambler, parallel error estimator, bit flipper).

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Lfsr,
    Estimator,
    Flipper,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Lfsr, Stage::Estimator, Stage::Flipper];
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Lfsr => "lfsr",
            Stage::Estimator => "estimator",
            Stage::Flipper => "flipper",
        })
    }
}

/// What limits the steady-state group rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bottleneck {
    /// The I/O link; the datapath keeps up.
    Io,
    Stage(Stage),
}

impl fmt::Display for Bottleneck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bottleneck::Io => f.write_str("io"),
            Bottleneck::Stage(s) => s.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatapathConfig {
    pub clock_ns: f64,
    pub io_width_bits: u32,
    /// Fill latency in cycles of the scrambler, estimator and flipper.
    pub stage_latencies: [u32; 3],
    pub group_size: u32,
    pub m: u32,
    pub pee_units: u32,
    /// Cells each estimator unit consumes per cycle.
    pub scan_lanes: u32,
    pub per_cell_cycles: u32,
}

impl DatapathConfig {
    /// QLC datapath at 1 GHz sized so every stage keeps up with `io_width`.
    pub fn standard(io_width_bits: u32) -> Self {
        DatapathConfig {
            clock_ns: 1.0,
            io_width_bits,
            stage_latencies: [2, 24, 2],
            group_size: 128,
            m: 4,
            pee_units: 16,
            scan_lanes: io_width_bits / 4,
            per_cell_cycles: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.io_width_bits != 32 && self.io_width_bits != 64 {
            return Err(Error::Config(format!("io width {} is not 32 or 64", self.io_width_bits)));
        }
        if self.pee_units == 0 || self.scan_lanes == 0 || self.per_cell_cycles == 0 {
            return Err(Error::Config("estimator units, lanes and per-cell cycles must be >= 1".into()));
        }
        if self.stage_latencies.contains(&0) {
            return Err(Error::Config("stage latencies must be >= 1 cycle".into()));
        }
        if self.group_size == 0 || !(1..=8).contains(&self.m) {
            return Err(Error::Config("group size must be positive and m in 1..=8".into()));
        }
        if self.clock_ns.is_nan() || self.clock_ns <= 0.0 {
            return Err(Error::Config("clock period must be positive".into()));
        }
        Ok(())
    }

    pub fn group_bits(&self) -> u64 {
        u64::from(self.group_size) * u64::from(self.m)
    }

    /// Cycles for one group to arrive over the link.
    pub fn arrival_interval(&self) -> u64 {
        self.group_bits().div_ceil(u64::from(self.io_width_bits))
    }

    /// Minimum cycles between successive groups entering each stage.
    pub fn stage_intervals(&self) -> [u64; 3] {
        let a = self.arrival_interval();
        [a, estimate_pee_time(self, self.group_size), a]
    }
}

/// Estimator occupancy per group: `ceil(2^m / units)` passes, each scanning
/// the group `scan_lanes` cells per cycle.
pub fn estimate_pee_time(cfg: &DatapathConfig, group_size: u32) -> u64 {
    let passes = (1u64 << cfg.m).div_ceil(u64::from(cfg.pee_units.max(1)));
    let scan = u64::from(group_size).div_ceil(u64::from(cfg.scan_lanes.max(1)));
    passes * scan * u64::from(cfg.per_cell_cycles)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub initial_latency_ns: f64,
    pub sustained_throughput_bits_per_cycle: f64,
    /// Throughput over the finite run, including fill and drain.
    pub effective_throughput_bits_per_cycle: f64,
    pub stall_cycles_per_group: u64,
    pub bottleneck_stage: Bottleneck,
    pub total_cycles: u64,
    pub n_groups: u64,
}

/// Cycle count for `n_groups` groups: fill through all stages plus one
/// steady-state interval per further group.
pub fn pipeline_cycles(cfg: &DatapathConfig, n_groups: u64) -> u64 {
    if n_groups == 0 {
        return 0;
    }
    let fill: u64 = cfg.stage_latencies.iter().map(|&l| u64::from(l)).sum();
    let interval = cfg.stage_intervals().into_iter().max().unwrap_or(0).max(cfg.arrival_interval());
    fill + (n_groups - 1) * interval
}

pub fn simulate_pipeline(cfg: &DatapathConfig, n_groups: u64) -> Result<PipelineReport> {
    cfg.validate()?;
    if n_groups == 0 {
        return Err(Error::Config("at least one group is required".into()));
    }
    let a = cfg.arrival_interval();
    let intervals = cfg.stage_intervals();
    let (slowest, &worst) =
        intervals.iter().enumerate().max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(&x.0))).expect("three stages");
    let interval = worst.max(a);
    let bottleneck = if worst > a { Bottleneck::Stage(Stage::ALL[slowest]) } else { Bottleneck::Io };
    let total = pipeline_cycles(cfg, n_groups);
    let fill: u64 = cfg.stage_latencies.iter().map(|&l| u64::from(l)).sum();
    let bits = cfg.group_bits() as f64;
    Ok(PipelineReport {
        initial_latency_ns: fill as f64 * cfg.clock_ns,
        sustained_throughput_bits_per_cycle: (bits / interval as f64).min(f64::from(cfg.io_width_bits)),
        effective_throughput_bits_per_cycle: n_groups as f64 * bits / total as f64,
        stall_cycles_per_group: worst.saturating_sub(a),
        bottleneck_stage: bottleneck,
        total_cycles: total,
        n_groups,
    })
}

/// Position `(page, cell)` of every bit in zig-zag transfer order: all `m`
/// pages of group 0 (LSB page first), then group 1, and so on.
pub fn zigzag_order(cells: usize, m: usize, group_size: usize) -> Vec<(usize, usize)> {
    let mut order = Vec::with_capacity(cells * m);
    let gs = group_size.max(1);
    for start in (0..cells).step_by(gs) {
        let end = (start + gs).min(cells);
        for page in 0..m {
            order.extend((start..end).map(|c| (page, c)));
        }
    }
    order
}

/// Interleaved beat stream. Bits are packed LSB first into beats of
/// `io_width_bits`; only the last beat may be partial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeatStream {
    pub io_width_bits: u32,
    pub total_bits: usize,
    pub beats: Vec<u64>,
}

fn page_lengths(pages: &[Vec<u8>]) -> Result<usize> {
    let len = pages.first().map_or(0, Vec::len);
    if pages.iter().any(|p| p.len() != len) {
        return Err(Error::Geometry("pages differ in length".into()));
    }
    Ok(len * 8)
}

pub fn schedule_zigzag(pages: &[Vec<u8>], group_size: usize, io_width_bits: u32) -> Result<BeatStream> {
    if !(1..=64).contains(&io_width_bits) {
        return Err(Error::Config(format!("beat width {io_width_bits}")));
    }
    let cells = page_lengths(pages)?;
    let order = zigzag_order(cells, pages.len(), group_size);
    let w = io_width_bits as usize;
    let mut beats = vec![0u64; order.len().div_ceil(w)];
    for (pos, &(page, cell)) in order.iter().enumerate() {
        let bit = (pages[page][cell / 8] >> (cell % 8)) & 1;
        beats[pos / w] |= u64::from(bit) << (pos % w);
    }
    Ok(BeatStream { io_width_bits, total_bits: order.len(), beats })
}

/// Sorts a beat stream back into page order.
pub fn unschedule_zigzag(stream: &BeatStream, m: usize, group_size: usize) -> Result<Vec<Vec<u8>>> {
    if m == 0 || !stream.total_bits.is_multiple_of(m) {
        return Err(Error::Geometry("stream length is not a whole number of cells".into()));
    }
    let cells = stream.total_bits / m;
    let mut pages = vec![vec![0u8; cells.div_ceil(8)]; m];
    let w = stream.io_width_bits as usize;
    for (pos, (page, cell)) in zigzag_order(cells, m, group_size).into_iter().enumerate() {
        let bit = (stream.beats[pos / w] >> (pos % w)) & 1;
        pages[page][cell / 8] |= (bit as u8) << (cell % 8);
    }
    Ok(pages)
}

/// Writes `config_id,initial_latency_ns,throughput,stall_cycles,bottleneck`.
pub fn write_reports_csv<W: Write>(rows: &[(String, PipelineReport)], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["config_id", "initial_latency_ns", "throughput", "stall_cycles", "bottleneck"])?;
    for (id, r) in rows {
        wr.write_record([
            id.clone(),
            format!("{}", r.initial_latency_ns),
            format!("{}", r.sustained_throughput_bits_per_cycle),
            r.stall_cycles_per_group.to_string(),
            r.bottleneck_stage.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
