//! Acceptance gate. Prints one PASS/FAIL line per criterion.
//!
//! Criteria 1-8 are exact or property checks and fail the run. Criteria
//! 9-13 reproduce characterization results from the shipped calibrated
//! profiles; their outcome is reported but does not fail the run.
//!
//! Pass criterion numbers to run a subset:
//! `cargo test --test acceptance -- 1 7`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use starsim::experiments::{
    latency_grid, latency_reduction, lifetimes, retry_grid, retry_probe, retry_reduction, state_distribution,
    weak_patterns, LatencyConfig, PopulationConfig,
};
use starsim::gray::QLC_ANCHORS;
use starsim::pipeline::{pipeline_cycles, simulate_pipeline, DatapathConfig};
use starsim::randomizer::{
    delta_group_error, fib_overhead, group_error, optimal_flip, FlipOp, Randomizer, DEFAULT_GROUP_SIZE,
};
use starsim::ssd::{Condition, SsdConfig, SweepConfig, WorkloadSpec};
use starsim::{build_delta_lut, CellState, CellType, ErrorProfile, FlashArray, Geometry, GrayCodeMap, Mode, WlAddr};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use common::{brute_force_flip, random_group, random_profile, rng, tick_pipeline};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn flip_oracle() -> Outcome {
    let mut r = rng(1);
    let mut groups = 0usize;
    let mut mismatches = 0usize;
    let profiles = 12;
    for i in 0..profiles {
        let cell = CellType::Qlc;
        let profile = if i == 0 { ErrorProfile::default_for(cell) } else { random_profile(cell, &mut r) };
        let map = GrayCodeMap::standard(cell);
        let lut = build_delta_lut(&profile, &map).unwrap();
        for _ in 0..10_000 {
            let g = random_group(cell, DEFAULT_GROUP_SIZE, &mut r);
            if optimal_flip(&g, &lut) != brute_force_flip(&g, &profile, &map) {
                mismatches += 1;
            }
            groups += 1;
        }
    }
    Outcome::new(mismatches == 0, format!("{groups} groups over {profiles} profiles, {mismatches} mismatches"))
}

fn delta_consistency() -> Outcome {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    let mut checks = 0usize;
    for cell in [CellType::Qlc, CellType::Tlc] {
        let map = GrayCodeMap::standard(cell);
        for i in 0..5_000 {
            let profile = if i % 500 == 0 { random_profile(cell, &mut r) } else { ErrorProfile::default_for(cell) };
            let lut = build_delta_lut(&profile, &map).unwrap();
            let g = random_group(cell, DEFAULT_GROUP_SIZE, &mut r);
            let before = group_error(&g, &profile).0;
            for f in FlipOp::all(cell) {
                let after: Vec<CellState> = g.iter().map(|&s| f.apply(s, &map)).collect();
                let exact = group_error(&after, &profile).0 - before;
                let rel = (exact - delta_group_error(&g, f, &lut)).abs() / before.max(f64::MIN_POSITIVE);
                worst = worst.max(rel);
                checks += 1;
            }
        }
    }
    Outcome::new(worst <= 1e-12, format!("{checks} flip evaluations, worst relative gap {worst:.2e}"))
}

fn round_trip() -> Outcome {
    let mut report = Vec::new();
    let mut pass = true;
    for (cell, mode) in [
        (CellType::Tlc, Mode::Baseline),
        (CellType::Qlc, Mode::Baseline),
        (CellType::Tlc, Mode::Tailcut),
        (CellType::Tlc, Mode::Star),
        (CellType::Qlc, Mode::Star),
    ] {
        let profile = ErrorProfile::default_for(cell);
        let geometry =
            Geometry { blocks_per_chip: 4, wordlines_per_block: 250, page_bytes: 2048, spare_bytes: 256, chips: 1 };
        let randomizer = Randomizer::standard(mode, &profile, 0xACE1).unwrap();
        let mut array = FlashArray::new(geometry, cell).unwrap();
        let mut r = rng(3);
        let mut diffs = 0u64;
        for block in 0..geometry.blocks_per_chip {
            for wl in 0..geometry.wordlines_per_block {
                let a = WlAddr { chip: 0, block, wl };
                let pages: Vec<Vec<u8>> =
                    (0..cell.bits_per_cell()).map(|_| (0..geometry.page_bytes).map(|_| r.gen()).collect()).collect();
                randomizer.write_wordline(&mut array, a, &pages).unwrap();
                let back = randomizer.read_wordline(&array, a).unwrap();
                diffs += pages
                    .iter()
                    .flatten()
                    .zip(back.iter().flatten())
                    .map(|(x, y)| (x ^ y).count_ones() as u64)
                    .sum::<u64>();
            }
        }
        pass &= diffs == 0;
        report.push(format!("{cell}/{mode} {diffs}"));
    }
    Outcome::new(pass, format!("1000 wordlines each, differing bits: {}", report.join(", ")))
}

fn gray_maps() -> Outcome {
    let mut problems = Vec::new();
    for cell in [CellType::Tlc, CellType::Qlc] {
        let map = GrayCodeMap::standard(cell);
        let codes = map.codes();
        let mut seen = vec![false; cell.states()];
        for &c in codes {
            if (c as usize) < seen.len() {
                seen[c as usize] = true;
            }
        }
        if codes.len() != cell.states() || !seen.iter().all(|&s| s) {
            problems.push(format!("{cell} map is not a bijection"));
        }
        for (k, w) in codes.windows(2).enumerate() {
            if (w[0] ^ w[1]).count_ones() != 1 {
                problems.push(format!("{cell} P{k}/P{} differ in more than one bit", k + 1));
            }
        }
        for k in 0..cell.states() as u8 {
            let s = CellState::new(k, cell).unwrap();
            if map.state_of(map.code_of(s)) != s {
                problems.push(format!("{cell} P{k} does not round-trip"));
            }
        }
    }
    let qlc = GrayCodeMap::standard(CellType::Qlc);
    for (k, code) in QLC_ANCHORS {
        let got = qlc.code_of(CellState::new(k, CellType::Qlc).unwrap());
        if got != code {
            problems.push(format!("P{k} = {got:04b}, expected {code:04b}"));
        }
    }
    let anchors = QLC_ANCHORS.map(|(k, c)| format!("P{k}={c:04b}")).join(" ");
    if problems.is_empty() {
        Outcome::new(true, format!("TLC and QLC bijective with unit adjacency; {anchors}"))
    } else {
        Outcome::new(false, problems.join("; "))
    }
}

fn lfsr_uniformity() -> Outcome {
    let cell = CellType::Qlc;
    let geometry = Geometry { wordlines_per_block: 80, ..Geometry::full_page() };
    let randomizer = Randomizer::standard(Mode::Baseline, &ErrorProfile::default_for(cell), 0x1234_5678).unwrap();
    let mut array = FlashArray::new(geometry, cell).unwrap();
    let zeros = vec![vec![0u8; geometry.page_bytes]; cell.bits_per_cell()];
    let mut counts = [0u64; 16];
    for wl in 0..geometry.wordlines_per_block {
        let a = WlAddr { chip: 0, block: 0, wl };
        randomizer.write_wordline(&mut array, a, &zeros).unwrap();
        for s in array.programmed_states(a).unwrap() {
            counts[s.index()] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / 16.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(15.0).unwrap().cdf(chi2);
    let worst = counts.iter().map(|&c| (c as f64 / total as f64 - 1.0 / 16.0).abs()).fold(0.0, f64::max);
    Outcome::new(
        total >= 10_000_000 && worst <= 0.005 && p > 0.01,
        format!("{total} cells of all-zero data, max deviation {:.3}%, chi2 {chi2:.1}, p {p:.3}", 100.0 * worst),
    )
}

fn fib_arithmetic() -> Outcome {
    let o = fib_overhead(16384, 2048, 128, 4);
    Outcome::new((0.0069..=0.0070).contains(&o), format!("16 KiB + 2 KiB QLC, 128-cell groups: {:.4}%", 100.0 * o))
}

fn pipeline_claims() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for w in [32, 64] {
        let r = simulate_pipeline(&DatapathConfig::standard(w), 4096).unwrap();
        let ok = r.initial_latency_ns <= 100.0
            && r.sustained_throughput_bits_per_cycle == f64::from(w)
            && r.stall_cycles_per_group == 0;
        pass &= ok;
        notes.push(format!(
            "io{w}: {} ns, {} bits/cycle, {} stalls",
            r.initial_latency_ns, r.sustained_throughput_bits_per_cycle, r.stall_cycles_per_group
        ));
    }
    let mut r = rng(7);
    let mut configs = vec![DatapathConfig::standard(32), DatapathConfig::standard(64)];
    for _ in 0..200 {
        let mut c = DatapathConfig::standard(if r.gen() { 32 } else { 64 });
        c.stage_latencies = [r.gen_range(1..8), r.gen_range(1..40), r.gen_range(1..8)];
        c.pee_units = r.gen_range(1..=16);
        c.scan_lanes = r.gen_range(1..=32);
        c.per_cell_cycles = r.gen_range(1..=2);
        configs.push(c);
    }
    let mut mismatches = 0;
    for c in &configs {
        for n in 1..=64 {
            if pipeline_cycles(c, n) != tick_pipeline(c, n) {
                mismatches += 1;
            }
        }
    }
    pass &= mismatches == 0;
    notes.push(format!("{} configs x 64 group counts vs cycle stepping: {mismatches} mismatches", configs.len()));
    Outcome::new(pass, notes.join("; "))
}

fn directional_benefit() -> Outcome {
    let mut r = rng(8);
    let mut notes = Vec::new();
    let mut pass = true;
    let mut profiles = vec![ErrorProfile::default_for(CellType::Qlc), ErrorProfile::default_for(CellType::Tlc)];
    while profiles.len() < 8 {
        let cell = if profiles.len() % 2 == 0 { CellType::Qlc } else { CellType::Tlc };
        let p = random_profile(cell, &mut r);
        if p.state_ratio().is_some_and(|x| x >= 2.0) {
            profiles.push(p);
        }
    }
    for profile in &profiles {
        let cell = profile.cell_type().unwrap();
        let map = GrayCodeMap::standard(cell);
        let lut = build_delta_lut(profile, &map).unwrap();
        let mut order: Vec<usize> = (0..cell.states()).collect();
        order.sort_by(|&a, &b| profile.e[b].total_cmp(&profile.e[a]));
        let worst = [order[0], order[1]];
        let n = 10_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let g = random_group(cell, DEFAULT_GROUP_SIZE, &mut r);
            let f = optimal_flip(&g, &lut);
            let count = |cells: &mut dyn Iterator<Item = CellState>| {
                cells.filter(|s| worst.contains(&s.index())).count() as f64
            };
            let d = count(&mut g.iter().copied()) - count(&mut g.iter().map(|&s| f.apply(s, &map)));
            sum += d;
            sq += d * d;
        }
        let mean = sum / n as f64;
        let sd = (sq / n as f64 - mean * mean).max(0.0).sqrt();
        let z = mean / (sd / (n as f64).sqrt());
        pass &= z > 3.0;
        notes.push(format!("{}:{:.1}x z={z:.0}", cell, profile.state_ratio().unwrap()));
    }
    Outcome::new(pass, format!("top-two-state cells removed per group, {}", notes.join(" ")))
}

fn timed_out(start: Instant, limit: Duration) -> String {
    let t = start.elapsed();
    if t > limit {
        format!(" [took {:.0} s, limit {} s]", t.as_secs_f64(), limit.as_secs())
    } else {
        String::new()
    }
}

fn state_redistribution() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut notes = Vec::new();
    for (cell, targets, tol) in [
        (CellType::Qlc, vec![(0, 0.33), (1, 0.31), (14, 0.42), (15, 0.39)], 0.10),
        (CellType::Tlc, vec![(0, 0.13), (7, 0.20)], 0.05),
    ] {
        let d =
            state_distribution(&ErrorProfile::default_for(cell), &[Mode::Star], &PopulationConfig::default()).unwrap();
        let red = d.reductions(Mode::Star).unwrap();
        for (k, t) in targets {
            let ok = within(red[k], t, tol);
            pass &= ok;
            notes.push(format!("{cell} P{k} {}{}", pct(red[k]), if ok { "" } else { "(x)" }));
        }
    }
    let slow = timed_out(start, Duration::from_secs(120));
    Outcome::new(pass && slow.is_empty(), notes.join(", ") + &slow)
}

fn weak_pattern_reduction() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for (cell, top_t, head_t, tol) in [(CellType::Qlc, 0.717, 0.723, 0.15), (CellType::Tlc, 0.290, 0.398, 0.10)] {
        let w = weak_patterns(&ErrorProfile::default_for(cell), &[Mode::Star], &PopulationConfig::default()).unwrap();
        let top = w.top_mean_reduction(Mode::Star).unwrap();
        let head = w.headline_reduction(Mode::Star).unwrap();
        pass &= within(top, top_t, tol) && within(head, head_t, tol);
        notes.push(format!("{cell} top-10 {} {} {}", pct(top), w.headline.label(), pct(head)));
    }
    Outcome::new(pass, notes.join(", "))
}

fn lifetime_ratios() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut pass = true;
    let mut ratio = |cell: CellType, modes: &[Mode], step: u32| {
        let ssd = SsdConfig::for_cell(cell, Mode::Baseline);
        let reps =
            lifetimes(&ssd, &ErrorProfile::default_for(cell), modes, &SweepConfig::default_for(cell, step)).unwrap();
        let out: Vec<(Mode, f64)> = reps.iter().map(|r| (r.mode, r.ratio_to(&reps[0]))).collect();
        notes.push(format!(
            "{cell} {}",
            reps.iter().map(|r| format!("{}={}PEC", r.mode, r.lifetime_pec)).collect::<Vec<_>>().join(" ")
        ));
        out
    };
    let q = ratio(CellType::Qlc, &[Mode::Star], 25);
    let t = ratio(CellType::Tlc, &[Mode::Tailcut, Mode::Star], 100);
    let get = |v: &[(Mode, f64)], m: Mode| v.iter().find(|x| x.0 == m).unwrap().1;
    let (qs, tt, ts) = (get(&q, Mode::Star), get(&t, Mode::Tailcut), get(&t, Mode::Star));
    pass &= within(qs, 2.3, 0.3) && within(tt, 1.8, 0.2) && within(ts, 1.98, 0.2);
    pass &= ts > tt && tt > 1.0;
    let slow = timed_out(start, Duration::from_secs(600));
    Outcome::new(
        pass && slow.is_empty(),
        format!("QLC STAR {qs:.2}x, TLC TailCut {tt:.2}x, TLC STAR {ts:.2}x ({}){slow}", notes.join("; ")),
    )
}

fn read_retries() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for (cell, pecs, modes, at, target) in [
        (CellType::Tlc, [0, 1000, 2000, 3000], vec![Mode::Tailcut, Mode::Star], 2000, 0.48),
        (CellType::Qlc, [0, 500, 1000, 1500], vec![Mode::Star], 1000, 0.58),
    ] {
        let months = [0.0, 1.0, 3.0, 6.0, 12.0];
        let conditions: Vec<Condition> = pecs.iter().flat_map(|&p| months.map(|t| Condition::new(p, t))).collect();
        let ssd = SsdConfig::for_cell(cell, Mode::Baseline);
        let pts = retry_grid(&ssd, &ErrorProfile::default_for(cell), &modes, &conditions, &retry_probe(&ssd, 8, 0x2E7))
            .unwrap();
        let red = retry_reduction(&pts, Mode::Star, Condition::new(at, 12.0)).unwrap();
        pass &= within(red, target, 0.10);
        let mut monotone = true;
        for p in &pts {
            for q in &pts {
                if p.mode == q.mode && q.pec >= p.pec && q.retention_months >= p.retention_months {
                    monotone &= q.mean_retries >= p.mean_retries;
                }
            }
        }
        pass &= monotone;
        let base = pts.iter().find(|p| p.mode == Mode::Baseline && p.pec == at && p.retention_months == 12.0).unwrap();
        notes.push(format!(
            "{cell} STAR -{} at {at} PEC/12 mo (baseline {:.2} retries/read), monotone {monotone}",
            pct(red),
            base.mean_retries
        ));
    }
    Outcome::new(pass, notes.join("; "))
}

fn read_latency() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut notes = Vec::new();
    let workloads = WorkloadSpec::server_mix();
    for (cell, modes, targets) in [
        (CellType::Qlc, vec![Mode::Star], vec![(Condition::new(1000, 12.0), 0.50), (Condition::new(500, 6.0), 0.33)]),
        (CellType::Tlc, vec![Mode::Tailcut, Mode::Star], vec![(Condition::new(2000, 12.0), 0.46)]),
    ] {
        let ssd = SsdConfig::for_cell(cell, Mode::Baseline);
        let conditions: Vec<Condition> = targets.iter().map(|t| t.0).collect();
        let rows = latency_grid(
            &ssd,
            &ErrorProfile::default_for(cell),
            &modes,
            &workloads,
            &conditions,
            &LatencyConfig::default_for(&ssd),
        )
        .unwrap();
        for &(c, target) in &targets {
            let mut reds = Vec::new();
            for w in &workloads {
                let red = latency_reduction(&rows, &w.name, Mode::Star, c).unwrap();
                pass &= within(red, target, 0.10);
                let mean = |m: Mode| {
                    rows.iter()
                        .find(|r| {
                            r.workload == w.name
                                && r.mode == m
                                && r.pec == c.pec
                                && r.retention_months == c.retention_months
                        })
                        .map(|r| r.mean_read_us)
                };
                let base = mean(Mode::Baseline).unwrap();
                let star = mean(Mode::Star).unwrap();
                let tail = mean(Mode::Tailcut).unwrap_or(base);
                pass &= star <= tail && tail <= base;
                reds.push(format!("{} -{}", w.name, pct(red)));
            }
            notes.push(format!("{cell} {} PEC/{} mo: {}", c.pec, c.retention_months, reds.join(" ")));
        }
    }
    let slow = timed_out(start, Duration::from_secs(900));
    Outcome::new(pass && slow.is_empty(), notes.join("; ") + &slow)
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(u8, &str, Check); 13] = [
        (1, "flip oracle equivalence", flip_oracle),
        (2, "group error delta consistency", delta_consistency),
        (3, "write/read round trip", round_trip),
        (4, "Gray map validity", gray_maps),
        (5, "LFSR state uniformity", lfsr_uniformity),
        (6, "FIB overhead", fib_arithmetic),
        (7, "datapath pipeline", pipeline_claims),
        (8, "directional STAR benefit", directional_benefit),
        (9, "state redistribution", state_redistribution),
        (10, "weak pattern reduction", weak_pattern_reduction),
        (11, "lifetime ratios", lifetime_ratios),
        (12, "read retries", read_retries),
        (13, "read latency", read_latency),
    ];
    let wanted: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut hard_failures = 0;
    let mut soft_failures = 0;
    for (id, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {id:>2} {name} ({:.1} s): {}", start.elapsed().as_secs_f64(), o.detail);
        if !o.pass {
            if id <= 8 {
                hard_failures += 1;
            } else {
                soft_failures += 1;
            }
        }
    }
    println!("acceptance: {hard_failures} exact/property failures, {soft_failures} calibration-conditional failures");
    if hard_failures > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
