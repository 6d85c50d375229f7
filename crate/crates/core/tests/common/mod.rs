//! Independent oracles and fixtures shared by the integration tests.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use starsim::pipeline::DatapathConfig;
use starsim::randomizer::{group_error, FlipOp};
use starsim::{CellState, CellType, ErrorProfile, GrayCodeMap};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A profile with independent log-uniform state error rates spanning
/// roughly two decades.
pub fn random_profile(cell: CellType, r: &mut impl Rng) -> ErrorProfile {
    let mut p = ErrorProfile::uniform(cell.bits_per_cell(), 0.01);
    for e in &mut p.e {
        *e = 10f64.powf(r.gen_range(-3.9..-2.0));
    }
    p.provenance = "random".into();
    p
}

pub fn random_group(cell: CellType, len: usize, r: &mut impl Rng) -> Vec<CellState> {
    (0..len).map(|_| CellState::new(r.gen_range(0..cell.states() as u8), cell).unwrap()).collect()
}

/// Applies every mask, recomputes the full group error and keeps the first
/// minimum, so the smallest mask wins ties. Errors within `1e-12` of the
/// group's worst possible error count as equal.
pub fn brute_force_flip(cells: &[CellState], profile: &ErrorProfile, map: &GrayCodeMap) -> FlipOp {
    let max_e = profile.e.iter().fold(0.0f64, |a, &b| a.max(b));
    let tol = 1e-12 * max_e * cells.len() as f64;
    let mut best = FlipOp::IDENTITY;
    let mut best_err = group_error(cells, profile).0;
    for f in FlipOp::all(map.cell_type()).skip(1) {
        let flipped: Vec<CellState> = cells.iter().map(|&s| f.apply(s, map)).collect();
        let e = group_error(&flipped, profile).0;
        if e < best_err - tol {
            best_err = e;
            best = f;
        }
    }
    best
}

/// Clocks the datapath one cycle at a time. Group `i` has fully arrived
/// at cycle `i * arrival`; a stage admits the next group once its previous
/// admission is at least one interval old and the group has left the stage
/// before it. Returns the cycle the last group leaves the flipper.
pub fn tick_pipeline(cfg: &DatapathConfig, n_groups: u64) -> u64 {
    let n = n_groups as usize;
    let arrival = cfg.arrival_interval();
    let intervals = cfg.stage_intervals();
    let lat: Vec<u64> = cfg.stage_latencies.iter().map(|&l| u64::from(l)).collect();
    let mut ready: Vec<Option<u64>> = (0..n).map(|i| Some(i as u64 * arrival)).collect();
    let mut next = [0usize; 3];
    let mut last_start: [Option<u64>; 3] = [None; 3];
    let mut out: Vec<Vec<Option<u64>>> = vec![vec![None; n]; 3];
    let mut t = 0u64;
    loop {
        for s in 0..3 {
            let i = next[s];
            if i == n {
                continue;
            }
            let upstream = if s == 0 { ready[i] } else { out[s - 1][i] };
            let free = last_start[s].is_none_or(|l| t >= l + intervals[s]);
            if free && upstream.is_some_and(|u| u <= t) {
                last_start[s] = Some(t);
                out[s][i] = Some(t + lat[s]);
                next[s] += 1;
            }
        }
        if let Some(done) = out[2][n - 1] {
            if done <= t {
                ready.clear();
                return done;
            }
        }
        t += 1;
    }
}
