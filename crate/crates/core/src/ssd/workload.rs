//! Filebench-style synthetic workloads and the trace format the emulator
//! replays.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};

use super::config::SsdConfig;
use crate::error::{Error, Result};
use crate::util::seeded;

pub const SECTOR_BYTES: u64 = 512;
const BLOCK_ALIGN: u64 = 4096;
const LARGE_FILE: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub timestamp_us: f64,
    pub op: Op,
    /// Start address in 512-byte sectors.
    pub lba: u64,
    pub size_bytes: u64,
}

impl TraceRecord {
    pub fn end_byte(&self) -> u64 {
        self.lba * SECTOR_BYTES + self.size_bytes
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new(records: Vec<TraceRecord>) -> Result<Self> {
        let t = Trace { records };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let mut last = f64::NEG_INFINITY;
        for (i, r) in self.records.iter().enumerate() {
            if !r.timestamp_us.is_finite() || r.timestamp_us < 0.0 {
                return Err(Error::Parse(format!("record {i}: bad timestamp {}", r.timestamp_us)));
            }
            if r.timestamp_us < last {
                return Err(Error::Parse(format!("record {i}: timestamps go backwards")));
            }
            if r.size_bytes == 0 || r.size_bytes % SECTOR_BYTES != 0 {
                return Err(Error::Parse(format!(
                    "record {i}: size {} is not a positive multiple of {SECTOR_BYTES}",
                    r.size_bytes
                )));
            }
            last = r.timestamp_us;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, op: Op) -> usize {
        self.records.iter().filter(|r| r.op == op).count()
    }

    /// One past the highest byte touched.
    pub fn footprint_bytes(&self) -> u64 {
        self.records.iter().map(TraceRecord::end_byte).max().unwrap_or(0)
    }

    pub fn duration_us(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.timestamp_us)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads `timestamp_us,op,lba,size_bytes`; lines starting with `#` are
    /// ignored.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
        let records = rdr.deserialize().collect::<std::result::Result<Vec<TraceRecord>, _>>()?;
        Trace::new(records)
    }
}

/// One workload row: file set, concurrency and read/write mix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub name: String,
    pub file_size_bytes: u64,
    pub file_count: u64,
    pub threads: u32,
    pub read_parts: u32,
    pub write_parts: u32,
    /// Fixed request size; when absent, whole-file style requests with sizes
    /// drawn around the file size.
    #[serde(default)]
    pub io_size_bytes: Option<u64>,
    /// Aggregate request rate over all threads.
    pub ops_per_sec: f64,
}

impl WorkloadSpec {
    fn row(name: &str, file_size: u64, files: u64, threads: u32, r: u32, w: u32) -> Self {
        WorkloadSpec {
            name: name.into(),
            file_size_bytes: file_size,
            file_count: files,
            threads,
            read_parts: r,
            write_parts: w,
            io_size_bytes: (file_size > LARGE_FILE).then_some(8 << 10),
            ops_per_sec: 200.0,
        }
    }

    /// Web, file, mail, database and proxy servers.
    pub fn server_mix() -> Vec<WorkloadSpec> {
        vec![
            Self::row("web", 32 << 10, 20_000, 100, 10, 1),
            Self::row("file", 256 << 10, 50_000, 100, 1, 2),
            Self::row("mail", 16 << 10, 50_000, 100, 1, 1),
            Self::row("db", 512 << 20, 10, 210, 20, 1),
            Self::row("proxy", 1 << 20, 10_000, 100, 5, 1),
        ]
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Self::server_mix()
            .into_iter()
            .find(|w| w.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Config(format!("unknown workload {name:?}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.file_size_bytes < SECTOR_BYTES || self.file_count == 0 || self.threads == 0 {
            return Err(Error::Config(format!("{}: empty file set or no threads", self.name)));
        }
        if self.read_parts + self.write_parts == 0 {
            return Err(Error::Config(format!("{}: read/write ratio 0:0", self.name)));
        }
        if let Some(io) = self.io_size_bytes {
            if io == 0 || io % SECTOR_BYTES != 0 || io > self.extent() {
                return Err(Error::Config(format!("{}: bad I/O size {io}", self.name)));
            }
        }
        if !(self.ops_per_sec.is_finite() && self.ops_per_sec > 0.0) {
            return Err(Error::Config(format!("{}: ops_per_sec must be positive", self.name)));
        }
        Ok(())
    }

    /// Bytes reserved per file.
    pub fn extent(&self) -> u64 {
        self.file_size_bytes.div_ceil(BLOCK_ALIGN) * BLOCK_ALIGN
    }

    pub fn dataset_bytes(&self) -> u64 {
        self.extent() * self.file_count
    }

    pub fn read_fraction(&self) -> f64 {
        f64::from(self.read_parts) / f64::from(self.read_parts + self.write_parts)
    }

    pub fn mean_request_bytes(&self) -> f64 {
        self.io_size_bytes.map_or(self.file_size_bytes as f64, |io| io as f64)
    }

    /// Shrinks the file set to at most `fraction` of `capacity` (file count
    /// first, then file size) and sets the request rate so each plane is
    /// busy about `utilization` of the time with reads costing
    /// `read_cost_us` per page.
    pub fn deflated_for(&self, ssd: &SsdConfig, fraction: f64, utilization: f64, read_cost_us: f64) -> Self {
        let mut w = self.clone();
        let budget = (ssd.capacity() as f64 * fraction) as u64;
        if w.dataset_bytes() > budget {
            w.file_count = (budget / w.extent()).max(1);
            if w.dataset_bytes() > budget {
                w.file_size_bytes = (budget / w.file_count / BLOCK_ALIGN).max(1) * BLOCK_ALIGN;
            }
        }
        if let Some(io) = w.io_size_bytes {
            w.io_size_bytes = Some(io.min(w.extent()));
        }
        let pages = (w.mean_request_bytes() / ssd.page_bytes as f64).ceil().max(1.0);
        let rf = w.read_fraction();
        let busy_per_op = pages * (rf * read_cost_us + (1.0 - rf) * ssd.t_prog_us);
        w.ops_per_sec = utilization * ssd.planes() as f64 * 1e6 / busy_per_op;
        w
    }
}

/// Poisson arrivals per thread, merged; reads and writes come in shuffled
/// blocks of `read_parts + write_parts` so the mix holds at any trace length.
pub fn synthesize_workload(spec: &WorkloadSpec, duration_s: f64, seed: u64) -> Result<Trace> {
    spec.validate()?;
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::Domain(format!("duration must be positive, got {duration_s}")));
    }
    let horizon = duration_s * 1e6;
    let per_thread =
        Exp::new(spec.ops_per_sec / f64::from(spec.threads) / 1e6).map_err(|e| Error::Config(e.to_string()))?;
    let mut arrivals: Vec<(f64, u32)> = Vec::new();
    for t in 0..spec.threads {
        let mut rng = seeded(seed, &[u64::from(t), 1]);
        let mut now = 0.0;
        loop {
            now += per_thread.sample(&mut rng);
            if now > horizon {
                break;
            }
            arrivals.push((now, t));
        }
    }
    arrivals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut kind_rng = seeded(seed, &[u64::MAX]);
    let mut quota: Vec<Op> = Vec::new();
    let mut addr_rngs: Vec<_> = (0..spec.threads).map(|t| seeded(seed, &[u64::from(t), 2])).collect();
    let size_dist = Gamma::new(2.0, spec.file_size_bytes as f64 / 2.0).map_err(|e| Error::Config(e.to_string()))?;
    let extent = spec.extent();
    let mut records = Vec::with_capacity(arrivals.len());
    for (ts, thread) in arrivals {
        if quota.is_empty() {
            quota.extend(std::iter::repeat_n(Op::Read, spec.read_parts as usize));
            quota.extend(std::iter::repeat_n(Op::Write, spec.write_parts as usize));
            quota.shuffle(&mut kind_rng);
        }
        let op = quota.pop().expect("refilled above");
        let rng = &mut addr_rngs[thread as usize];
        let file = rng.gen_range(0..spec.file_count);
        let (offset, size) = match spec.io_size_bytes {
            Some(io) => {
                let slots = (extent - io) / SECTOR_BYTES + 1;
                let slot = rng.gen_range(0..slots) * SECTOR_BYTES;
                (slot - slot % BLOCK_ALIGN.min(io), io)
            }
            None => {
                let raw = size_dist.sample(rng).ceil() as u64;
                (0, raw.div_ceil(BLOCK_ALIGN).max(1).saturating_mul(BLOCK_ALIGN).min(extent))
            }
        };
        records.push(TraceRecord {
            timestamp_us: ts,
            op,
            lba: (file * extent + offset) / SECTOR_BYTES,
            size_bytes: size,
        });
    }
    Trace::new(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomizer::Mode;

    fn small(mut w: WorkloadSpec) -> WorkloadSpec {
        w.file_count = w.file_count.min(1000);
        w.ops_per_sec = 5000.0;
        w
    }

    #[test]
    fn table_rows() {
        let t = WorkloadSpec::server_mix();
        assert_eq!(t.len(), 5);
        assert_eq!(t[0].read_fraction(), 10.0 / 11.0);
        assert_eq!(t[3].threads, 210);
        assert_eq!(t[3].io_size_bytes, Some(8192));
        assert_eq!(t[4].io_size_bytes, None);
    }

    #[test]
    fn web_ratio_and_determinism() {
        let spec = small(WorkloadSpec::by_name("web").unwrap());
        let a = synthesize_workload(&spec, 2.0, 7).unwrap();
        let b = synthesize_workload(&spec, 2.0, 7).unwrap();
        assert_eq!(a, b);
        let ratio = a.count(Op::Read) as f64 / a.count(Op::Write) as f64;
        assert!((ratio - 10.0).abs() / 10.0 < 0.01, "{ratio}");
        assert!(a.len() > 8000);
        for r in &a.records {
            assert!(r.end_byte() <= spec.dataset_bytes());
        }
    }

    #[test]
    fn zero_duration_rejected() {
        let spec = WorkloadSpec::by_name("mail").unwrap();
        assert!(matches!(synthesize_workload(&spec, 0.0, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let spec = small(WorkloadSpec::by_name("db").unwrap());
        let t = synthesize_workload(&spec, 0.05, 3).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("timestamp_us,op,lba,size_bytes"));
        assert_eq!(Trace::read_csv(text.as_bytes()).unwrap(), t);
        let bad = "timestamp_us,op,lba,size_bytes\n5,read,0,4096\n4,write,8,4096\n";
        assert!(Trace::read_csv(bad.as_bytes()).is_err());
        let odd = "timestamp_us,op,lba,size_bytes\n5,read,0,100\n";
        assert!(Trace::read_csv(odd.as_bytes()).is_err());
    }

    #[test]
    fn deflation_fits_half_capacity() {
        let ssd = SsdConfig::qlc(Mode::Baseline);
        for w in WorkloadSpec::server_mix() {
            let d = w.deflated_for(&ssd, 0.5, 0.05, 400.0);
            d.validate().unwrap();
            assert!(d.dataset_bytes() <= ssd.capacity() / 2, "{}", d.name);
        }
    }
}
