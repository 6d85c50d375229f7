//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers or strings and returns a JSON string,
//! so the page needs no bundler or generated type glue beyond wasm-bindgen.

use serde_json::{json, Value};
use starsim::experiments::{modes_for, state_distribution, PopulationConfig};
use starsim::pipeline::{simulate_pipeline, DatapathConfig};
use starsim::randomizer::{group_error, FlipOp};
use starsim::{build_delta_lut, CellState, CellType, ErrorProfile, Geometry, GrayCodeMap, Result};
use wasm_bindgen::prelude::*;

fn to_js(r: Result<Value>) -> std::result::Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

fn cell_of(name: &str) -> Result<CellType> {
    name.parse()
}

/// Per-state populations for every supported mode on a small programmed
/// region (one block of `wordlines` wordlines with 4 KiB pages).
pub fn state_distribution_json(cell: &str, wordlines: usize, seed: u64) -> Result<Value> {
    let cell = cell_of(cell)?;
    let profile = ErrorProfile::default_for(cell);
    let cfg = PopulationConfig {
        geometry: Geometry {
            blocks_per_chip: 1,
            wordlines_per_block: wordlines.clamp(1, 256),
            page_bytes: 4096,
            spare_bytes: 512,
            ..Geometry::default()
        },
        seed,
    };
    let modes = modes_for(cell);
    let d = state_distribution(&profile, &modes[1..], &cfg)?;
    let rows = d
        .modes
        .iter()
        .map(|&m| Ok(json!({ "mode": m.to_string(), "fractions": d.fractions(m)? })))
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({ "cell": cell.to_string(), "error_rates": profile.e, "modes": rows }))
}

/// Group error under each of the `2^m` page-inversion masks for the given
/// cell states, and the mask the selector picks.
pub fn flip_explorer_json(cell: &str, states: &[u8]) -> Result<Value> {
    let cell = cell_of(cell)?;
    let profile = ErrorProfile::default_for(cell);
    let map = GrayCodeMap::standard(cell);
    let lut = build_delta_lut(&profile, &map)?;
    let cells = states.iter().map(|&k| CellState::new(k, cell)).collect::<Result<Vec<_>>>()?;
    let chosen = starsim::randomizer::optimal_flip(&cells, &lut);
    let options: Vec<Value> = FlipOp::all(cell)
        .map(|f| {
            let flipped: Vec<CellState> = cells.iter().map(|&s| f.apply(s, &map)).collect();
            json!({
                "mask": f.mask(),
                "states": flipped.iter().map(|s| s.index()).collect::<Vec<_>>(),
                "error": group_error(&flipped, &profile).0,
            })
        })
        .collect();
    Ok(json!({ "chosen": chosen.mask(), "options": options }))
}

/// Cycle-level datapath report for one I/O width.
pub fn pipeline_json(io_width_bits: u32, groups: u64) -> Result<Value> {
    let cfg = DatapathConfig::standard(io_width_bits);
    let r = simulate_pipeline(&cfg, groups)?;
    Ok(json!({
        "initial_latency_ns": r.initial_latency_ns,
        "throughput_bits_per_cycle": r.sustained_throughput_bits_per_cycle,
        "stall_cycles_per_group": r.stall_cycles_per_group,
        "bottleneck": r.bottleneck_stage.to_string(),
        "total_cycles": r.total_cycles,
    }))
}

#[wasm_bindgen]
pub fn state_dist(cell: &str, wordlines: usize, seed: u64) -> std::result::Result<String, JsError> {
    to_js(state_distribution_json(cell, wordlines, seed))
}

#[wasm_bindgen]
pub fn flip_explorer(cell: &str, states: &[u8]) -> std::result::Result<String, JsError> {
    to_js(flip_explorer_json(cell, states))
}

#[wasm_bindgen]
pub fn pipeline(io_width_bits: u32, groups: u64) -> std::result::Result<String, JsError> {
    to_js(pipeline_json(io_width_bits, groups))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flip_explorer_picks_the_cheapest_mask() {
        let v = flip_explorer_json("tlc", &[7, 7, 7, 0]).unwrap();
        let opts = v["options"].as_array().unwrap();
        assert_eq!(opts.len(), 8);
        let best = opts.iter().map(|o| o["error"].as_f64().unwrap()).fold(f64::INFINITY, f64::min);
        let chosen = &opts[v["chosen"].as_u64().unwrap() as usize];
        assert_eq!(chosen["error"].as_f64().unwrap(), best);
    }

    #[test]
    fn state_dist_covers_every_mode() {
        let v = state_distribution_json("tlc", 2, 3).unwrap();
        assert_eq!(v["modes"].as_array().unwrap().len(), 3);
        let f: f64 = v["modes"][0]["fractions"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
        assert!((f - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bad_input_is_an_error() {
        assert!(flip_explorer_json("qlc", &[16]).is_err());
        assert!(state_distribution_json("slc", 2, 0).is_err());
        assert_eq!(pipeline_json(64, 16).unwrap()["stall_cycles_per_group"], 0);
    }
}
