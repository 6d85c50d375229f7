//! Experiment runners comparing randomizer modes: state populations, weak
//! vertical patterns, endurance, read retries and host-visible latency.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gray::{CellState, CellType};
use crate::nand::{scan_weak_patterns, BlockAddr, FlashArray, Geometry, RetentionModel, WeakPatternStats};
use crate::profile::ErrorProfile;
use crate::randomizer::{Mode, Randomizer};
use crate::ssd::{
    program_random, run_trace, sweep_lifetime_with, synthesize_workload, Condition, LifetimeReport, ModeProbe,
    ProbeConfig, RetryTable, SsdConfig, SweepConfig, WorkloadSpec,
};
use crate::util::seeded;

/// Modes that run on `cell`, baseline first.
pub fn modes_for(cell: CellType) -> Vec<Mode> {
    Mode::ALL.into_iter().filter(|m| m.supports(cell)).collect()
}

/// Baseline followed by the requested modes in canonical order; every
/// supported mode when `requested` is empty.
pub fn mode_set(cell: CellType, requested: &[Mode]) -> Result<Vec<Mode>> {
    if requested.is_empty() {
        return Ok(modes_for(cell));
    }
    if let Some(m) = requested.iter().find(|m| !m.supports(cell)) {
        return Err(Error::UnsupportedMode(format!("{m} on {cell}")));
    }
    Ok(Mode::ALL.into_iter().filter(|m| *m == Mode::Baseline || requested.contains(m)).collect())
}

fn reduction(base: f64, other: f64) -> f64 {
    if base == 0.0 {
        0.0
    } else {
        1.0 - other / base
    }
}

/// Random user data programmed block by block through one randomizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub geometry: Geometry,
    pub seed: u64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        PopulationConfig {
            geometry: Geometry { blocks_per_chip: 4, wordlines_per_block: 64, ..Geometry::default() },
            seed: 0xD15,
        }
    }
}

pub fn program_population(profile: &ErrorProfile, mode: Mode, cfg: &PopulationConfig) -> Result<FlashArray> {
    let cell = profile.cell_type()?;
    let randomizer = Randomizer::standard(mode, profile, seeded(cfg.seed, &[1]).gen())?;
    let mut array = FlashArray::new(cfg.geometry, cell)?;
    program_random(&mut array, &randomizer, &mut seeded(cfg.seed, &[2]))?;
    Ok(array)
}

/// Programmed cells per state over the whole array.
pub fn state_counts(array: &FlashArray) -> Result<Vec<u64>> {
    let g = *array.geometry();
    let mut counts = vec![0u64; array.cell_type().states()];
    for b in 0..g.blocks() {
        let addr = BlockAddr::new(b / g.blocks_per_chip, b % g.blocks_per_chip);
        for wl in 0..g.wordlines_per_block {
            let a = addr.wordline(wl);
            if array.is_programmed(a)? {
                for s in array.programmed_states(a)? {
                    counts[s.index()] += 1;
                }
            }
        }
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDistribution {
    pub cell: CellType,
    pub modes: Vec<Mode>,
    /// `counts[i][k]`: cells of mode `modes[i]` in state `k`.
    pub counts: Vec<Vec<u64>>,
}

impl StateDistribution {
    fn index(&self, mode: Mode) -> Result<usize> {
        self.modes.iter().position(|&m| m == mode).ok_or_else(|| Error::UnsupportedMode(format!("{mode} was not run")))
    }

    pub fn fractions(&self, mode: Mode) -> Result<Vec<f64>> {
        let c = &self.counts[self.index(mode)?];
        let total: u64 = c.iter().sum();
        Ok(c.iter().map(|&x| x as f64 / total.max(1) as f64).collect())
    }

    /// Relative drop of each state's population against baseline.
    pub fn reductions(&self, mode: Mode) -> Result<Vec<f64>> {
        let base = self.fractions(Mode::Baseline)?;
        let other = self.fractions(mode)?;
        Ok(base.iter().zip(&other).map(|(&b, &o)| reduction(b, o)).collect())
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["mode", "state", "cells", "fraction", "reduction_vs_baseline"])?;
        for &mode in &self.modes {
            let f = self.fractions(mode)?;
            let r = self.reductions(mode)?;
            for k in 0..f.len() {
                out.write_record([
                    mode.to_string(),
                    CellState::from_raw(k as u8).to_string(),
                    self.counts[self.index(mode)?][k].to_string(),
                    format!("{:.6}", f[k]),
                    format!("{:.6}", r[k]),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

pub fn state_distribution(profile: &ErrorProfile, modes: &[Mode], cfg: &PopulationConfig) -> Result<StateDistribution> {
    let cell = profile.cell_type()?;
    let modes = mode_set(cell, modes)?;
    let counts =
        modes.iter().map(|&m| state_counts(&program_population(profile, m, cfg)?)).collect::<Result<Vec<_>>>()?;
    Ok(StateDistribution { cell, modes, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRow {
    pub up: u8,
    pub victim: u8,
    pub down: u8,
    /// Shift probability of the victim at unit stress.
    pub weight: f64,
    /// Occurrences per mode, in the order of [`WeakPatterns::modes`].
    pub counts: Vec<u64>,
}

impl PatternRow {
    pub fn label(&self) -> String {
        let name = |k: u8| if k == 0 { "E".to_string() } else { format!("P{k}") };
        format!("{}-{}-{}", name(self.up), name(self.victim), name(self.down))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakPatterns {
    pub cell: CellType,
    pub modes: Vec<Mode>,
    /// Ten most error-prone triples by shift probability, worst first.
    pub top: Vec<PatternRow>,
    /// Erased, highest state, erased.
    pub headline: PatternRow,
}

impl WeakPatterns {
    fn index(&self, mode: Mode) -> Result<usize> {
        self.modes.iter().position(|&m| m == mode).ok_or_else(|| Error::UnsupportedMode(format!("{mode} was not run")))
    }

    pub fn row_reduction(&self, row: &PatternRow, mode: Mode) -> Result<f64> {
        let i = self.index(mode)?;
        Ok(reduction(row.counts[0] as f64, row.counts[i] as f64))
    }

    pub fn top_mean_reduction(&self, mode: Mode) -> Result<f64> {
        let mut s = 0.0;
        for r in &self.top {
            s += self.row_reduction(r, mode)?;
        }
        Ok(s / self.top.len() as f64)
    }

    pub fn headline_reduction(&self, mode: Mode) -> Result<f64> {
        self.row_reduction(&self.headline, mode)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["rank".to_string(), "pattern".into(), "weight".into()];
        for m in &self.modes {
            header.push(format!("{m}_count"));
        }
        for m in &self.modes[1..] {
            header.push(format!("{m}_reduction"));
        }
        out.write_record(&header)?;
        let rows = self.top.iter().enumerate().map(|(i, r)| ((i + 1).to_string(), r));
        for (rank, r) in rows.chain(std::iter::once(("headline".to_string(), &self.headline))) {
            let mut rec = vec![rank, r.label(), format!("{:.6e}", r.weight)];
            rec.extend(r.counts.iter().map(u64::to_string));
            for &m in &self.modes[1..] {
                rec.push(format!("{:.6}", self.row_reduction(r, m)?));
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Counts vertical triples under every mode and ranks them by how likely the
/// middle cell is to shift.
pub fn weak_patterns(profile: &ErrorProfile, modes: &[Mode], cfg: &PopulationConfig) -> Result<WeakPatterns> {
    let cell = profile.cell_type()?;
    let n = cell.states();
    let model = RetentionModel::new(profile, &profile.lcs_model())?;
    let modes = mode_set(cell, modes)?;
    let mut stats = Vec::new();
    for &m in &modes {
        let array = program_population(profile, m, cfg)?;
        let g = cfg.geometry;
        let mut total = WeakPatternStats::new(n);
        for b in 0..g.blocks() {
            total.merge(&scan_weak_patterns(
                &array,
                BlockAddr::new(b / g.blocks_per_chip, b % g.blocks_per_chip),
                false,
            )?)?;
        }
        stats.push(total);
    }
    let row = |u: usize, k: usize, d: usize| {
        let s = |x: usize| CellState::from_raw(x as u8);
        PatternRow {
            up: u as u8,
            victim: k as u8,
            down: d as u8,
            weight: model.rule(s(u), s(k), s(d)).weight,
            counts: stats.iter().map(|st| st.get(s(u), s(k), s(d))).collect(),
        }
    };
    let mut all: Vec<PatternRow> = (0..n * n * n).map(|i| row(i / (n * n), (i / n) % n, i % n)).collect();
    all.sort_by(|a, b| b.weight.total_cmp(&a.weight).then((a.up, a.victim, a.down).cmp(&(b.up, b.victim, b.down))));
    all.truncate(10);
    Ok(WeakPatterns { cell, modes, top: all, headline: row(0, n - 1, 0) })
}

/// Lifetime of each mode at the drive's ECC strength.
pub fn lifetimes(
    ssd: &SsdConfig,
    profile: &ErrorProfile,
    modes: &[Mode],
    cfg: &SweepConfig,
) -> Result<Vec<LifetimeReport>> {
    mode_set(ssd.cell, modes)?.into_iter().map(|m| sweep_lifetime_with(&ssd.with_mode(m), profile, cfg)).collect()
}

pub fn write_lifetimes_csv<W: std::io::Write>(reports: &[LifetimeReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "cell",
        "mode",
        "pec",
        "mean_worst_errors",
        "max_worst_errors",
        "ecc_limit",
        "lifetime_pec",
        "ratio_to_baseline",
    ])?;
    let base = reports.iter().find(|r| r.mode == Mode::Baseline);
    for r in reports {
        let ratio = base.map_or(f64::NAN, |b| r.ratio_to(b));
        for p in &r.curve {
            out.write_record([
                r.cell.to_string(),
                r.mode.to_string(),
                p.pec.to_string(),
                format!("{:.3}", p.mean_worst),
                p.max_worst.to_string(),
                r.ecc_limit.to_string(),
                r.lifetime_pec.to_string(),
                format!("{ratio:.4}"),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Probe geometry for retry and latency runs: full-size pages so the
/// per-page worst codeword matches the drive's.
pub fn retry_probe(ssd: &SsdConfig, replicas: usize, seed: u64) -> ProbeConfig {
    ProbeConfig {
        geometry: Geometry {
            wordlines_per_block: 32,
            page_bytes: ssd.page_bytes,
            spare_bytes: ssd.page_bytes / 8,
            ..Geometry::default()
        },
        replicas,
        seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPoint {
    pub mode: Mode,
    pub pec: u32,
    pub retention_months: f64,
    pub mean_retries: f64,
    pub mean_page_worst: f64,
}

/// Mean retries per page read for each mode and condition.
pub fn retry_grid(
    ssd: &SsdConfig,
    profile: &ErrorProfile,
    modes: &[Mode],
    conditions: &[Condition],
    probe: &ProbeConfig,
) -> Result<Vec<RetryPoint>> {
    let mut out = Vec::new();
    for mode in mode_set(ssd.cell, modes)? {
        let p = ModeProbe::build(profile, mode, probe, f64::INFINITY)?;
        for &c in conditions {
            let t = RetryTable::from_probe(&p, c);
            out.push(RetryPoint {
                mode,
                pec: c.pec,
                retention_months: c.retention_months,
                mean_retries: t.mean_retries(&ssd.retry),
                mean_page_worst: t.page_worst.iter().map(|&e| f64::from(e)).sum::<f64>() / t.page_worst.len() as f64,
            });
        }
    }
    Ok(out)
}

/// Retry reduction of `mode` against baseline at one condition.
pub fn retry_reduction(points: &[RetryPoint], mode: Mode, c: Condition) -> Option<f64> {
    let at = |m: Mode| {
        points
            .iter()
            .find(|p| p.mode == m && p.pec == c.pec && p.retention_months == c.retention_months)
            .map(|p| p.mean_retries)
    };
    Some(reduction(at(Mode::Baseline)?, at(mode)?))
}

pub fn write_retry_csv<W: std::io::Write>(points: &[RetryPoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "mode",
        "pec",
        "retention_months",
        "mean_retries",
        "mean_page_worst_errors",
        "reduction_vs_baseline",
    ])?;
    for p in points {
        let r = retry_reduction(points, p.mode, Condition::new(p.pec, p.retention_months)).unwrap_or(f64::NAN);
        out.write_record([
            p.mode.to_string(),
            p.pec.to_string(),
            p.retention_months.to_string(),
            format!("{:.4}", p.mean_retries),
            format!("{:.3}", p.mean_page_worst),
            format!("{r:.4}"),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyConfig {
    pub duration_s: f64,
    /// Target busy fraction of each plane.
    pub utilization: f64,
    /// Largest share of drive capacity a workload's file set may occupy.
    pub dataset_fraction: f64,
    pub probe: ProbeConfig,
    pub seed: u64,
}

impl LatencyConfig {
    pub fn default_for(ssd: &SsdConfig) -> Self {
        LatencyConfig {
            duration_s: 20.0,
            utilization: 0.05,
            dataset_fraction: 0.5,
            probe: retry_probe(ssd, 8, 0xA11),
            seed: 0x1A7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub workload: String,
    pub mode: Mode,
    pub pec: u32,
    pub retention_months: f64,
    pub reads: usize,
    pub mean_read_us: f64,
    pub mean_queueing_us: f64,
    pub mean_media_us: f64,
    pub mean_transfer_us: f64,
    pub p99_read_us: f64,
    pub mean_retries_per_page: f64,
}

/// Replays every workload under each mode and condition. Each workload uses
/// one trace for all modes.
pub fn latency_grid(
    ssd: &SsdConfig,
    profile: &ErrorProfile,
    modes: &[Mode],
    workloads: &[WorkloadSpec],
    conditions: &[Condition],
    cfg: &LatencyConfig,
) -> Result<Vec<LatencyRow>> {
    let modes = mode_set(ssd.cell, modes)?;
    let probes =
        modes.iter().map(|&m| ModeProbe::build(profile, m, &cfg.probe, f64::INFINITY)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (wi, w) in workloads.iter().enumerate() {
        let spec = w.deflated_for(ssd, cfg.dataset_fraction, cfg.utilization, 4.0 * ssd.t_r_us);
        let trace = synthesize_workload(&spec, cfg.duration_s, cfg.seed ^ wi as u64)?;
        for &c in conditions {
            for (&mode, probe) in modes.iter().zip(&probes) {
                let table = RetryTable::from_probe(probe, c);
                let rep = run_trace(&ssd.with_mode(mode), &trace, &table, cfg.seed)?;
                rows.push(LatencyRow {
                    workload: w.name.clone(),
                    mode,
                    pec: c.pec,
                    retention_months: c.retention_months,
                    reads: trace.count(crate::ssd::Op::Read),
                    mean_read_us: rep.mean_read_us(),
                    mean_queueing_us: rep.mean_read_component(|r| r.queueing_us),
                    mean_media_us: rep.mean_read_component(|r| r.media_us),
                    mean_transfer_us: rep.mean_read_component(|r| r.transfer_us),
                    p99_read_us: rep.percentile_us(crate::ssd::Op::Read, 99.0),
                    mean_retries_per_page: rep.mean_retries_per_page_read(),
                });
            }
        }
    }
    Ok(rows)
}

/// Mean read latency reduction of `mode` against baseline for one workload
/// and condition.
pub fn latency_reduction(rows: &[LatencyRow], workload: &str, mode: Mode, c: Condition) -> Option<f64> {
    let at = |m: Mode| {
        rows.iter()
            .find(|r| {
                r.workload == workload && r.mode == m && r.pec == c.pec && r.retention_months == c.retention_months
            })
            .map(|r| r.mean_read_us)
    };
    Some(reduction(at(Mode::Baseline)?, at(mode)?))
}

pub fn write_latency_csv<W: std::io::Write>(rows: &[LatencyRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "workload",
        "mode",
        "pec",
        "retention_months",
        "reads",
        "mean_read_us",
        "mean_queueing_us",
        "mean_media_us",
        "mean_transfer_us",
        "p99_read_us",
        "mean_retries_per_page",
        "normalized_to_baseline",
    ])?;
    for r in rows {
        let c = Condition::new(r.pec, r.retention_months);
        let norm = latency_reduction(rows, &r.workload, r.mode, c).map_or(f64::NAN, |x| 1.0 - x);
        out.write_record([
            r.workload.clone(),
            r.mode.to_string(),
            r.pec.to_string(),
            r.retention_months.to_string(),
            r.reads.to_string(),
            format!("{:.3}", r.mean_read_us),
            format!("{:.3}", r.mean_queueing_us),
            format!("{:.3}", r.mean_media_us),
            format!("{:.3}", r.mean_transfer_us),
            format!("{:.3}", r.p99_read_us),
            format!("{:.4}", r.mean_retries_per_page),
            format!("{norm:.4}"),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PopulationConfig {
        PopulationConfig {
            geometry: Geometry { wordlines_per_block: 16, page_bytes: 2048, spare_bytes: 256, ..Geometry::default() },
            seed: 9,
        }
    }

    #[test]
    fn baseline_population_is_flat() {
        let p = ErrorProfile::default_for(CellType::Qlc);
        let d = state_distribution(&p, &[], &small()).unwrap();
        assert_eq!(d.modes, vec![Mode::Baseline, Mode::Star]);
        for f in d.fractions(Mode::Baseline).unwrap() {
            assert!((f - 1.0 / 16.0).abs() < 0.01);
        }
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 2 * 16);
    }

    #[test]
    fn tailcut_clears_its_targets() {
        let p = ErrorProfile::default_for(CellType::Tlc);
        let w = weak_patterns(&p, &[], &small()).unwrap();
        assert_eq!(w.modes, vec![Mode::Baseline, Mode::Tailcut, Mode::Star]);
        assert_eq!(w.headline.label(), "E-P7-E");
        assert_eq!(w.headline.counts[1], 0);
        assert_eq!(w.headline_reduction(Mode::Tailcut).unwrap(), 1.0);
        assert_eq!(w.top.len(), 10);
        assert!(w.top.windows(2).all(|x| x[0].weight >= x[1].weight));
    }

    #[test]
    fn mode_selection() {
        assert_eq!(mode_set(CellType::Tlc, &[Mode::Star]).unwrap(), vec![Mode::Baseline, Mode::Star]);
        assert_eq!(mode_set(CellType::Qlc, &[]).unwrap(), vec![Mode::Baseline, Mode::Star]);
        assert!(mode_set(CellType::Qlc, &[Mode::Tailcut]).is_err());
    }
}
