//! Page-mapped FTL with per-chip FIFO queues, replaying a trace against a
//! read-retry distribution.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::config::SsdConfig;
use super::retry::{Condition, ModeProbe, ProbeConfig, RetryTable};
use super::workload::{Op, Trace, SECTOR_BYTES};
use crate::error::{Error, Result};
use crate::profile::ErrorProfile;
use crate::util::seeded;

/// Share of physical pages hidden from the host.
pub const OVERPROVISION: f64 = 0.2;
const UNMAPPED: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, Default)]
struct BlockState {
    written: usize,
    valid: usize,
}

#[derive(Debug, Clone)]
struct Plane {
    blocks: Vec<BlockState>,
    free: VecDeque<usize>,
    active: usize,
    busy_until: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GcStats {
    pub runs: u64,
    pub copies: u64,
    pub erases: u64,
}

/// Logical-to-physical page map with greedy garbage collection.
#[derive(Debug, Clone)]
pub struct Ftl {
    pages_per_block: usize,
    blocks_per_plane: usize,
    gc_floor: usize,
    planes: Vec<Plane>,
    l2p: Vec<u32>,
    p2l: Vec<u32>,
    cursor: usize,
    gc: GcStats,
}

impl Ftl {
    pub fn new(ssd: &SsdConfig) -> Result<Self> {
        ssd.validate()?;
        let total = ssd.total_pages();
        if total >= UNMAPPED as usize {
            return Err(Error::Config("too many pages for the page map".into()));
        }
        let bpp = ssd.blocks_per_plane;
        let planes = (0..ssd.planes())
            .map(|_| Plane {
                blocks: vec![BlockState::default(); bpp],
                free: (1..bpp).collect(),
                active: 0,
                busy_until: 0.0,
            })
            .collect();
        Ok(Ftl {
            pages_per_block: ssd.pages_per_block,
            blocks_per_plane: bpp,
            gc_floor: ((ssd.gc_threshold * bpp as f64).ceil() as usize).max(1),
            planes,
            l2p: vec![UNMAPPED; (total as f64 * (1.0 - OVERPROVISION)) as usize],
            p2l: vec![UNMAPPED; total],
            cursor: 0,
            gc: GcStats::default(),
        })
    }

    pub fn logical_pages(&self) -> usize {
        self.l2p.len()
    }

    pub fn gc_stats(&self) -> GcStats {
        self.gc
    }

    fn ppn(&self, plane: usize, block: usize, page: usize) -> usize {
        (plane * self.blocks_per_plane + block) * self.pages_per_block + page
    }

    fn plane_of(&self, ppn: usize) -> usize {
        ppn / (self.blocks_per_plane * self.pages_per_block)
    }

    /// Plane holding `lpn`, if it was ever written.
    pub fn lookup(&self, lpn: usize) -> Option<usize> {
        match self.l2p.get(lpn) {
            Some(&p) if p != UNMAPPED => Some(self.plane_of(p as usize)),
            _ => None,
        }
    }

    fn check(&self, lpn: usize) -> Result<()> {
        if lpn >= self.l2p.len() {
            return Err(Error::Address(format!("logical page {lpn} beyond {} host pages", self.l2p.len())));
        }
        Ok(())
    }

    fn invalidate(&mut self, lpn: usize) {
        let old = self.l2p[lpn];
        if old != UNMAPPED {
            let old = old as usize;
            let plane = self.plane_of(old);
            let block = (old / self.pages_per_block) % self.blocks_per_plane;
            self.planes[plane].blocks[block].valid -= 1;
            self.p2l[old] = UNMAPPED;
        }
    }

    fn append(&mut self, plane: usize, lpn: usize) {
        let ppb = self.pages_per_block;
        if self.planes[plane].blocks[self.planes[plane].active].written == ppb {
            let next = self.planes[plane].free.pop_front().expect("garbage collection keeps a free block");
            self.planes[plane].active = next;
        }
        let p = &mut self.planes[plane];
        let block = p.active;
        let page = p.blocks[block].written;
        p.blocks[block].written += 1;
        p.blocks[block].valid += 1;
        let ppn = self.ppn(plane, block, page);
        self.p2l[ppn] = lpn as u32;
        self.l2p[lpn] = ppn as u32;
    }

    /// Writes `lpn` to the next plane in round-robin order. Returns the plane
    /// and, when garbage collection ran there, how many pages it copied.
    pub fn write(&mut self, lpn: usize) -> Result<(usize, Option<usize>)> {
        self.check(lpn)?;
        self.invalidate(lpn);
        let plane = self.cursor;
        self.cursor = (self.cursor + 1) % self.planes.len();
        self.append(plane, lpn);
        Ok((plane, self.collect_if_needed(plane)))
    }

    fn collect_if_needed(&mut self, plane: usize) -> Option<usize> {
        if self.planes[plane].free.len() > self.gc_floor {
            return None;
        }
        let p = &self.planes[plane];
        let ppb = self.pages_per_block;
        let victim = (0..self.blocks_per_plane)
            .filter(|&b| b != p.active && p.blocks[b].written == ppb)
            .min_by_key(|&b| (p.blocks[b].valid, b))?;
        let mut moved = 0;
        for page in 0..ppb {
            let ppn = self.ppn(plane, victim, page);
            let lpn = self.p2l[ppn];
            if lpn != UNMAPPED {
                self.invalidate(lpn as usize);
                self.append(plane, lpn as usize);
                moved += 1;
            }
        }
        let p = &mut self.planes[plane];
        p.blocks[victim] = BlockState::default();
        p.free.push_back(victim);
        self.gc.runs += 1;
        self.gc.copies += moved as u64;
        self.gc.erases += 1;
        Some(moved)
    }
}

/// One host request with its latency split into components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequestLatency {
    pub timestamp_us: f64,
    pub op: Op,
    pub size_bytes: u64,
    pub queueing_us: f64,
    pub media_us: f64,
    pub transfer_us: f64,
    /// Retries of the page read that finished last.
    pub retries: u32,
}

impl RequestLatency {
    pub fn total_us(&self) -> f64 {
        self.queueing_us + self.media_us + self.transfer_us
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub requests: Vec<RequestLatency>,
    /// Page reads needing 0, 1, 2, ... retries.
    pub retry_histogram: Vec<u64>,
    pub gc: GcStats,
}

impl LatencyReport {
    fn totals(&self, op: Op) -> Vec<f64> {
        self.requests.iter().filter(|r| r.op == op).map(RequestLatency::total_us).collect()
    }

    pub fn mean_us(&self, op: Op) -> f64 {
        let v = self.totals(op);
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }

    pub fn mean_read_us(&self) -> f64 {
        self.mean_us(Op::Read)
    }

    /// Mean of one latency component over reads.
    pub fn mean_read_component(&self, f: impl Fn(&RequestLatency) -> f64) -> f64 {
        let reads: Vec<f64> = self.requests.iter().filter(|r| r.op == Op::Read).map(f).collect();
        if reads.is_empty() {
            0.0
        } else {
            reads.iter().sum::<f64>() / reads.len() as f64
        }
    }

    /// Nearest-rank percentile, `q` in [0, 100].
    pub fn percentile_us(&self, op: Op, q: f64) -> f64 {
        let mut v = self.totals(op);
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        let rank = ((q / 100.0) * v.len() as f64).ceil() as usize;
        v[rank.clamp(1, v.len()) - 1]
    }

    /// One row per request with its latency components.
    pub fn write_requests_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "timestamp_us",
            "op",
            "size_bytes",
            "queueing_us",
            "media_us",
            "transfer_us",
            "total_us",
            "retries",
        ])?;
        for r in &self.requests {
            let op = match r.op {
                Op::Read => "read",
                Op::Write => "write",
            };
            out.write_record([
                format!("{:.3}", r.timestamp_us),
                op.to_string(),
                r.size_bytes.to_string(),
                format!("{:.3}", r.queueing_us),
                format!("{:.3}", r.media_us),
                format!("{:.3}", r.transfer_us),
                format!("{:.3}", r.total_us()),
                r.retries.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn mean_retries_per_page_read(&self) -> f64 {
        let n: u64 = self.retry_histogram.iter().sum();
        if n == 0 {
            return 0.0;
        }
        let s: u64 = self.retry_histogram.iter().enumerate().map(|(r, &c)| r as u64 * c).sum();
        s as f64 / n as f64
    }
}

/// Replays `trace`; every page read draws its raw error count from `table`.
/// The host address space touched by the trace is written once up front.
pub fn run_trace(ssd: &SsdConfig, trace: &Trace, table: &RetryTable, seed: u64) -> Result<LatencyReport> {
    trace.validate()?;
    if table.page_worst.is_empty() {
        return Err(Error::Config("empty retry table".into()));
    }
    let mut ftl = Ftl::new(ssd)?;
    let page = ssd.page_bytes as u64;
    let footprint = trace.footprint_bytes().div_ceil(page) as usize;
    if footprint > ftl.logical_pages() {
        return Err(Error::Address(format!(
            "trace touches {footprint} pages, host capacity is {}",
            ftl.logical_pages()
        )));
    }
    for lpn in 0..footprint {
        ftl.write(lpn)?;
    }
    let gc_base = ftl.gc_stats();
    for p in &mut ftl.planes {
        p.busy_until = 0.0;
    }

    let mut rng = seeded(seed, &[0x7E7]);
    let mut chip_issue = vec![0.0f64; ssd.chips()];
    let mut histogram = vec![0u64; ssd.retry.max_retries as usize + 1];
    let mut requests = Vec::with_capacity(trace.len());
    for rec in &trace.records {
        let start_byte = rec.lba * SECTOR_BYTES;
        let first = (start_byte / page) as usize;
        let last = ((start_byte + rec.size_bytes - 1) / page) as usize;
        let mut critical = (f64::NEG_INFINITY, 0.0, 0.0, 0u32);
        for lpn in first..=last {
            let (plane, media, retries, gc_pages) = match rec.op {
                Op::Read => match ftl.lookup(lpn) {
                    Some(plane) => {
                        let r = ssd.retry.retries(table.sample(&mut rng));
                        histogram[r as usize] += 1;
                        (plane, f64::from(1 + r) * ssd.t_r_us, r, None)
                    }
                    None => {
                        ftl.check(lpn)?;
                        (lpn % ftl.planes.len(), ssd.t_r_us, 0, None)
                    }
                },
                Op::Write => {
                    let (plane, gc) = ftl.write(lpn)?;
                    (plane, ssd.t_prog_us, 0, gc)
                }
            };
            let chip = plane / ssd.planes_per_chip;
            let start = rec.timestamp_us.max(ftl.planes[plane].busy_until).max(chip_issue[chip]);
            chip_issue[chip] = start;
            let mut busy = start + media;
            let end = busy;
            if let Some(moved) = gc_pages {
                busy += moved as f64 * (ssd.t_r_us + ssd.t_prog_us) + ssd.t_erase_us;
            }
            ftl.planes[plane].busy_until = busy;
            if end > critical.0 {
                critical = (end, start - rec.timestamp_us, media, retries);
            }
        }
        requests.push(RequestLatency {
            timestamp_us: rec.timestamp_us,
            op: rec.op,
            size_bytes: rec.size_bytes,
            queueing_us: critical.1,
            media_us: critical.2,
            transfer_us: ssd.transfer_us(rec.size_bytes),
            retries: critical.3,
        });
    }
    let g = ftl.gc_stats();
    Ok(LatencyReport {
        requests,
        retry_histogram: histogram,
        gc: GcStats {
            runs: g.runs - gc_base.runs,
            copies: g.copies - gc_base.copies,
            erases: g.erases - gc_base.erases,
        },
    })
}

/// Builds the retry distribution for `condition` and replays `trace`.
pub fn run_trace_at(
    ssd: &SsdConfig,
    profile: &ErrorProfile,
    trace: &Trace,
    condition: Condition,
    probe: &ProbeConfig,
    seed: u64,
) -> Result<LatencyReport> {
    let p = ModeProbe::build(profile, ssd.mode, probe, f64::INFINITY)?;
    run_trace(ssd, trace, &RetryTable::from_probe(&p, condition), seed)
}
