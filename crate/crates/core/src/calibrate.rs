//! Grid search of the spreading parameters and per-state error shape
//! against asymmetry, retention-share and pattern-ranking targets.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gray::{CellState, CellType};
use crate::nand::{LcsForm, RetentionModel};
use crate::profile::ErrorProfile;

/// What the calibrated profile should reproduce. Unset targets are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    pub cell: CellType,
    /// Largest over smallest per-state error rate.
    #[serde(default)]
    pub state_ratio: Option<f64>,
    /// Share of retention errors caused by spreading under random data.
    #[serde(default)]
    pub retention_share: Option<f64>,
    /// Triple `[up, victim, down]` that must be the most shift-prone.
    #[serde(default)]
    pub top_pattern: Option<[u8; 3]>,
    /// Mean per-state error rate at the reference condition.
    pub mean_error: f64,
    /// Relative height of each state above the floor, in [0, 1]. The
    /// state(s) at 1 reach the target ratio.
    pub shape: Vec<f64>,
    #[serde(default)]
    pub c_pec: f64,
    #[serde(default = "one")]
    pub delta: f64,
}

fn one() -> f64 {
    1.0
}

impl CalibrationTargets {
    /// Every state alike and no spreading.
    pub fn uniform(cell: CellType, mean_error: f64) -> Self {
        CalibrationTargets {
            cell,
            state_ratio: Some(1.0),
            retention_share: Some(0.0),
            top_pattern: None,
            mean_error,
            shape: vec![0.0; cell.states()],
            c_pec: 0.0,
            delta: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.cell.states();
        if self.state_ratio.is_none() && self.retention_share.is_none() && self.top_pattern.is_none() {
            return Err(Error::Config("no calibration targets".into()));
        }
        if self.shape.len() != n {
            return Err(Error::Dimension(format!("shape has {} entries, need {n}", self.shape.len())));
        }
        if self.shape.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
            return Err(Error::Config("shape entries must lie in [0, 1]".into()));
        }
        if let Some(r) = self.state_ratio {
            if !(r.is_finite() && r >= 1.0) {
                return Err(Error::Config("state_ratio must be >= 1".into()));
            }
        }
        if let Some(s) = self.retention_share {
            if !(0.0..1.0).contains(&s) {
                return Err(Error::Config("retention_share must lie in [0, 1)".into()));
            }
        }
        if let Some(t) = self.top_pattern {
            if t.iter().any(|&k| k as usize >= n) {
                return Err(Error::InvalidState { state: *t.iter().max().unwrap_or(&0), states: n });
            }
        }
        if !(self.mean_error > 0.0 && self.mean_error < 1.0) {
            return Err(Error::Config("mean_error must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Per-state rates: `floor (1 + (ratio - 1) shape_k)`, scaled to the
    /// requested mean.
    pub fn rates(&self) -> Vec<f64> {
        let r = self.state_ratio.unwrap_or(1.0);
        let raw: Vec<f64> = self.shape.iter().map(|&s| 1.0 + (r - 1.0) * s).collect();
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        raw.iter().map(|x| x * self.mean_error / mean).collect()
    }
}

/// Candidate spreading parameters, searched exhaustively in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationGrid {
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub kappas: Vec<f64>,
    pub form: LcsForm,
}

impl Default for CalibrationGrid {
    fn default() -> Self {
        CalibrationGrid {
            betas: std::iter::once(0.0).chain((0..=40).map(|i| 2f64.powf(f64::from(i) / 4.0))).collect(),
            gammas: (2..=24).map(|i| f64::from(i) / 2.0).collect(),
            kappas: vec![0.5, 0.75, 1.0, 1.5, 2.0],
            form: LcsForm::PowerOfSum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub target: String,
    pub value: f64,
    pub achieved: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub profile: ErrorProfile,
    pub residuals: Vec<Residual>,
    pub objective: f64,
}

impl Calibration {
    /// Targets missed by more than `tolerance` (absolute residual).
    pub fn flagged(&self, tolerance: f64) -> Vec<&Residual> {
        self.residuals.iter().filter(|r| r.residual.abs() > tolerance).collect()
    }

    pub fn write_residuals_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.residuals {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Rank (0 = worst) of the triple's shift weight among all triples.
fn pattern_rank(model: &RetentionModel, t: [u8; 3]) -> usize {
    let s = CellState::from_raw;
    let w = model.rule(s(t[0]), s(t[1]), s(t[2])).weight;
    let n = model.states() as u8;
    let mut above = 0;
    for u in 0..n {
        for k in 0..n {
            for d in 0..n {
                if model.rule(s(u), s(k), s(d)).weight > w {
                    above += 1;
                }
            }
        }
    }
    above
}

fn evaluate(targets: &CalibrationTargets, profile: &ErrorProfile) -> Result<(f64, Vec<Residual>)> {
    let model = RetentionModel::new(profile, &profile.lcs_model())?;
    let mut residuals = Vec::new();
    let mut objective = 0.0;
    if let Some(r) = targets.state_ratio {
        let got = profile.state_ratio().unwrap_or(1.0);
        let res = (got / r).ln();
        objective += res * res;
        residuals.push(Residual { target: "state_ratio".into(), value: r, achieved: got, residual: res });
    }
    if let Some(s) = targets.retention_share {
        let got = model.lcs_share();
        let res = if s > 0.0 { (got.max(1e-12) / s).ln() } else { got };
        objective += res * res;
        residuals.push(Residual { target: "retention_share".into(), value: s, achieved: got, residual: res });
    }
    if let Some(t) = targets.top_pattern {
        let rank = pattern_rank(&model, t) as f64;
        objective += rank;
        residuals.push(Residual { target: "top_pattern_rank".into(), value: 0.0, achieved: rank, residual: rank });
    }
    Ok((objective, residuals))
}

/// Exhaustive search; the first grid point with the smallest objective wins,
/// so equal inputs always give the same profile.
pub fn calibrate(targets: &CalibrationTargets, grid: &CalibrationGrid) -> Result<Calibration> {
    targets.validate()?;
    if grid.betas.is_empty() || grid.gammas.is_empty() || grid.kappas.is_empty() {
        return Err(Error::Config("empty calibration grid".into()));
    }
    let e = targets.rates();
    let mut best: Option<Calibration> = None;
    for &beta in &grid.betas {
        for &gamma in &grid.gammas {
            for &kappa in &grid.kappas {
                let profile = ErrorProfile {
                    m: targets.cell.bits_per_cell(),
                    e: e.clone(),
                    beta,
                    gamma,
                    kappa,
                    lcs_form: grid.form,
                    c_pec: targets.c_pec,
                    delta: targets.delta,
                    provenance: "calibrated".into(),
                    sanity_cap: 100.0,
                };
                if profile.validate().is_err() {
                    continue;
                }
                let (objective, residuals) = evaluate(targets, &profile)?;
                if best.as_ref().is_none_or(|b| objective < b.objective) {
                    best = Some(Calibration { profile, residuals, objective });
                }
            }
        }
    }
    best.ok_or_else(|| Error::Config("no grid point yields a valid profile".into()))
}
