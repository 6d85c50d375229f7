//! Per-state error profiles and the flip delta lookup table.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gray::{CellState, CellType, GrayCodeMap};
use crate::nand::{LcsForm, LcsModel};

const QLC_DEFAULT: &str = include_str!("../profiles/qlc.json");
const TLC_DEFAULT: &str = include_str!("../profiles/tlc.json");

fn default_kappa() -> f64 {
    1.0
}

fn default_cap() -> f64 {
    100.0
}

/// Per-state error probabilities plus the spreading, wear and time
/// parameters of the retention model.
///
/// `e[k]` is the probability that a cell programmed to state `k` shifts
/// after 12 months at 0 PEC, averaged over uniformly random neighbours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub m: usize,
    pub e: Vec<f64>,
    pub beta: f64,
    pub gamma: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default)]
    pub lcs_form: LcsForm,
    pub c_pec: f64,
    pub delta: f64,
    #[serde(default)]
    pub provenance: String,
    /// Largest accepted max/min ratio over nonzero `e`.
    #[serde(default = "default_cap", skip_serializing)]
    pub sanity_cap: f64,
}

impl ErrorProfile {
    /// Every state equally error-prone, no spreading, no wear or time
    /// acceleration beyond linear time.
    pub fn uniform(m: usize, e: f64) -> Self {
        ErrorProfile {
            m,
            e: vec![e; 1 << m],
            beta: 0.0,
            gamma: 1.0,
            kappa: 1.0,
            lcs_form: LcsForm::PowerOfSum,
            c_pec: 0.0,
            delta: 1.0,
            provenance: "uniform".into(),
            sanity_cap: default_cap(),
        }
    }

    /// Shipped calibrated profile.
    pub fn default_for(cell: CellType) -> Self {
        let text = match cell {
            CellType::Tlc => TLC_DEFAULT,
            CellType::Qlc => QLC_DEFAULT,
        };
        Self::from_json(text).expect("shipped profiles are valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: ErrorProfile = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn states(&self) -> usize {
        1 << self.m
    }

    pub fn cell_type(&self) -> Result<CellType> {
        CellType::from_bits(self.m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| Err(Error::ProfileInvalid { field: field.into(), reason });
        if CellType::from_bits(self.m).is_err() {
            return bad("m", format!("{} bits per cell is not supported", self.m));
        }
        if self.e.len() != self.states() {
            return bad("e", format!("expected {} entries, got {}", self.states(), self.e.len()));
        }
        for (k, &v) in self.e.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return bad(&format!("e[{k}]"), format!("{v} is not a probability"));
            }
        }
        for (name, v) in [("beta", self.beta), ("gamma", self.gamma), ("kappa", self.kappa), ("c_pec", self.c_pec)] {
            if !v.is_finite() || v < 0.0 {
                return bad(name, format!("{v} must be finite and non-negative"));
            }
        }
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return bad("delta", format!("{} must be positive", self.delta));
        }
        if let Some(r) = self.state_ratio() {
            if r > self.sanity_cap {
                return bad("e", format!("max/min ratio {r:.1} exceeds cap {}", self.sanity_cap));
            }
        }
        Ok(())
    }

    /// Max over min of the nonzero per-state probabilities.
    pub fn state_ratio(&self) -> Option<f64> {
        let nz = self.e.iter().copied().filter(|&v| v > 0.0);
        let (lo, hi) = nz.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        (hi > 0.0).then(|| hi / lo)
    }

    pub fn is_uniform(&self) -> bool {
        self.e.windows(2).all(|w| w[0] == w[1])
    }

    pub fn lcs_model(&self) -> LcsModel {
        LcsModel::new(self.states(), self.beta, self.gamma, self.kappa, self.lcs_form).expect("validated profile")
    }

    /// The same profile with every `e_k` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut p = self.clone();
        p.e.iter_mut().for_each(|v| *v *= factor);
        p
    }
}

/// Reads and validates a profile file.
pub fn load_profile(path: impl AsRef<Path>) -> Result<ErrorProfile> {
    let text = fs::read_to_string(path)?;
    ErrorProfile::from_json(&text)
}

/// `table[f][k] = e[f(k)] - e[k]`, the change in a cell's error
/// probability when flip mask `f` is applied to state `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaLut {
    states: usize,
    table: Vec<f64>,
    max_abs: f64,
}

impl DeltaLut {
    pub fn states(&self) -> usize {
        self.states
    }

    #[inline]
    pub fn get(&self, mask: u8, k: CellState) -> f64 {
        self.table[mask as usize * self.states + k.index()]
    }

    /// Largest `|table[f][k]|`; sets the scale below which two candidate
    /// group errors count as tied.
    pub fn max_abs(&self) -> f64 {
        self.max_abs
    }

    #[inline]
    pub fn row(&self, mask: u8) -> &[f64] {
        &self.table[mask as usize * self.states..(mask as usize + 1) * self.states]
    }
}

pub fn build_delta_lut(profile: &ErrorProfile, map: &GrayCodeMap) -> Result<DeltaLut> {
    let n = profile.states();
    if map.states() != n {
        return Err(Error::Dimension(format!("{n}-state profile with a {}-state map", map.states())));
    }
    let mut table = vec![0.0; n * n];
    for f in 0..n {
        for k in 0..n {
            let to = map.flip(CellState::from_raw(k as u8), f as u8);
            table[f * n + k] = profile.e[to.index()] - profile.e[k];
        }
    }
    let max_abs = table.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(DeltaLut { states: n, table, max_abs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(k: u8) -> CellState {
        CellState::from_raw(k)
    }

    #[test]
    fn uniform_profile_loads_and_is_flagged() {
        let p = ErrorProfile::from_json(&ErrorProfile::uniform(4, 0.001).to_json().unwrap()).unwrap();
        assert!(p.is_uniform());
        assert_eq!(p.state_ratio(), Some(1.0));
    }

    #[test]
    fn negative_entry_rejected_with_field() {
        let mut p = ErrorProfile::uniform(4, 0.001);
        p.e[5] = -0.1;
        let text = p.to_json().unwrap();
        match ErrorProfile::from_json(&text) {
            Err(Error::ProfileInvalid { field, .. }) => assert_eq!(field, "e[5]"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(ErrorProfile::from_json(&text.replace("-0.1", "NaN")).is_err());
    }

    #[test]
    fn shipped_ratios() {
        let qlc = ErrorProfile::default_for(CellType::Qlc);
        let tlc = ErrorProfile::default_for(CellType::Tlc);
        assert!((qlc.state_ratio().unwrap() - 4.6).abs() < 0.05);
        assert!((tlc.state_ratio().unwrap() - 3.7).abs() < 0.05);
    }

    #[test]
    fn lut_rows_and_involution() {
        let p = ErrorProfile::default_for(CellType::Qlc);
        let map = GrayCodeMap::standard(CellType::Qlc);
        let lut = build_delta_lut(&p, &map).unwrap();
        assert!(lut.row(0).iter().all(|&v| v == 0.0));
        assert_eq!(lut.get(0b0010, q(0)), p.e[9] - p.e[0]);
        for f in 0..16u8 {
            for k in 0..16u8 {
                let fk = map.flip(q(k), f);
                assert_eq!(lut.get(f, q(k)) + lut.get(f, fk), 0.0);
            }
        }
        let flat = build_delta_lut(&ErrorProfile::uniform(4, 0.3), &map).unwrap();
        assert!((0..16).all(|f| flat.row(f).iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn lut_dimension_mismatch() {
        let p = ErrorProfile::uniform(3, 0.1);
        assert!(build_delta_lut(&p, &GrayCodeMap::standard(CellType::Qlc)).is_err());
    }
}
