//! Retention-error injection driven by lateral charge spreading between
//! vertically adjacent cells.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BlockAddr, FlashArray, WlAddr};
use crate::error::{Error, Result};
use crate::gray::CellState;
use crate::profile::ErrorProfile;
use crate::util::stream_rng;

/// How the two neighbour gradients combine into the spreading factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LcsForm {
    /// `beta * ((G_loss + kappa * G_gain) / (2 (n-1)))^gamma`, where `G_loss`
    /// sums the state gap to lower neighbours and `G_gain` to higher ones.
    /// A victim flanked by two distant low neighbours is hit hardest.
    #[default]
    PowerOfSum,
    /// `beta * (|d_up|^gamma + |d_down|^gamma) / (2 (n-1)^gamma)`.
    SumOfPowers,
}

/// Spreading factor and shift direction for a vertical triple.
#[derive(Debug, Clone, PartialEq)]
pub struct LcsModel {
    states: usize,
    beta: f64,
    gamma: f64,
    kappa: f64,
    form: LcsForm,
}

impl LcsModel {
    pub fn new(states: usize, beta: f64, gamma: f64, kappa: f64, form: LcsForm) -> Result<Self> {
        for (name, v) in [("beta", beta), ("gamma", gamma), ("kappa", kappa)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::ProfileInvalid {
                    field: name.into(),
                    reason: format!("must be finite and non-negative, got {v}"),
                });
            }
        }
        if states < 2 {
            return Err(Error::Dimension(format!("{states} states")));
        }
        Ok(LcsModel { states, beta, gamma, kappa, form })
    }

    /// No spreading at all.
    pub fn none(states: usize) -> Self {
        LcsModel { states, beta: 0.0, gamma: 1.0, kappa: 1.0, form: LcsForm::PowerOfSum }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    fn gradients(&self, up: usize, k: usize, down: usize) -> (f64, f64) {
        let mut loss = 0.0;
        let mut gain = 0.0;
        for nb in [up, down] {
            if nb < k {
                loss += (k - nb) as f64;
            } else {
                gain += (nb - k) as f64;
            }
        }
        (loss, gain)
    }

    /// Multiplicative increase of the victim's shift probability.
    pub fn factor(&self, up: CellState, k: CellState, down: CellState) -> f64 {
        if self.beta == 0.0 {
            return 0.0;
        }
        let (up, k, down) = (up.index(), k.index(), down.index());
        let span = (self.states - 1) as f64;
        match self.form {
            LcsForm::PowerOfSum => {
                let (loss, gain) = self.gradients(up, k, down);
                let g = (loss + self.kappa * gain) / (2.0 * span);
                if g == 0.0 {
                    0.0
                } else {
                    self.beta * g.powf(self.gamma)
                }
            }
            LcsForm::SumOfPowers => {
                let d_up = up.abs_diff(k) as f64;
                let d_down = down.abs_diff(k) as f64;
                let sum = pow0(d_up, self.gamma) + pow0(d_down, self.gamma);
                self.beta * sum / (2.0 * span.powf(self.gamma))
            }
        }
    }

    /// `+1` for charge gain (toward higher states), `-1` for charge loss.
    pub fn direction(&self, up: CellState, k: CellState, down: CellState) -> i8 {
        let (u, kk, d) = (up.index(), k.index(), down.index());
        if kk == 0 {
            return 1;
        }
        if kk == self.states - 1 {
            return -1;
        }
        let lower = match self.form {
            LcsForm::PowerOfSum => {
                let (loss, gain) = self.gradients(u, kk, d);
                loss >= self.kappa * gain
            }
            LcsForm::SumOfPowers => (u + d) as f64 / 2.0 <= kk as f64,
        };
        if lower {
            -1
        } else {
            1
        }
    }

    /// Mean spreading factor of state `k` over uniformly random neighbours.
    pub fn mean_factor(&self, k: CellState) -> f64 {
        let n = self.states;
        let mut acc = 0.0;
        for u in 0..n {
            for d in 0..n {
                acc += self.factor(CellState::from_raw(u as u8), k, CellState::from_raw(d as u8));
            }
        }
        acc / (n * n) as f64
    }
}

fn pow0(x: f64, g: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.powf(g)
    }
}

/// Outcome for one vertical triple at unit stress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftRule {
    /// Shift probability at 0 PEC and 12 months.
    pub weight: f64,
    pub to: CellState,
}

/// Precomputed per-triple shift rules plus the wear/time scaling.
///
/// The per-state base rate is `e_k / (1 + mean_factor(k))`, so that `e_k`
/// is the error rate of state `k` under uniformly random neighbours at
/// 0 PEC and 12 months.
#[derive(Debug, Clone)]
pub struct RetentionModel {
    states: usize,
    base: Vec<f64>,
    c_pec: f64,
    delta: f64,
    rules: Vec<ShiftRule>,
}

impl RetentionModel {
    pub fn new(profile: &ErrorProfile, lcs: &LcsModel) -> Result<Self> {
        let n = profile.states();
        if lcs.states() != n {
            return Err(Error::Dimension(format!("profile has {n} states, LCS model {}", lcs.states())));
        }
        let base: Vec<f64> =
            (0..n).map(|k| profile.e[k] / (1.0 + lcs.mean_factor(CellState::from_raw(k as u8)))).collect();
        let mut rules = Vec::with_capacity(n * n * n);
        for u in 0..n {
            for (k, &b) in base.iter().enumerate() {
                for d in 0..n {
                    let (su, sk, sd) =
                        (CellState::from_raw(u as u8), CellState::from_raw(k as u8), CellState::from_raw(d as u8));
                    let weight = b * (1.0 + lcs.factor(su, sk, sd));
                    let to = (k as i32 + i32::from(lcs.direction(su, sk, sd))) as u8;
                    rules.push(ShiftRule { weight, to: CellState::from_raw(to) });
                }
            }
        }
        Ok(RetentionModel { states: n, base, c_pec: profile.c_pec, delta: profile.delta, rules })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    /// Wear and time multiplier: `(1 + c_pec PEC / 1000) (t / 12)^delta`.
    pub fn stress(&self, pec: f64, months: f64) -> f64 {
        if months <= 0.0 {
            return 0.0;
        }
        (1.0 + self.c_pec * pec / 1000.0) * (months / 12.0).powf(self.delta)
    }

    #[inline]
    pub fn rule(&self, up: CellState, k: CellState, down: CellState) -> ShiftRule {
        let n = self.states;
        self.rules[(up.index() * n + k.index()) * n + down.index()]
    }

    pub fn probability(&self, up: CellState, k: CellState, down: CellState, pec: f64, months: f64) -> f64 {
        (self.rule(up, k, down).weight * self.stress(pec, months)).min(1.0)
    }

    /// LCS-attributable share of all retention errors under uniformly
    /// random data.
    pub fn lcs_share(&self) -> f64 {
        let n = self.states;
        let mut total = 0.0;
        let mut plain = 0.0;
        for u in 0..n {
            for k in 0..n {
                for d in 0..n {
                    total += self.rules[(u * n + k) * n + d].weight;
                    plain += self.base[k];
                }
            }
        }
        if total == 0.0 {
            0.0
        } else {
            1.0 - plain / total
        }
    }
}

/// Vertical neighbours of wordline `wl` in a block-local programmed plane.
/// Cells past the block edge mirror the victim; unprogrammed wordlines hold
/// the erased state.
#[inline]
pub(crate) fn neighbours(
    programmed: &[CellState],
    wl: usize,
    wls: usize,
    n: usize,
) -> (Option<&[CellState]>, &[CellState], Option<&[CellState]>) {
    let up = (wl > 0).then(|| &programmed[(wl - 1) * n..wl * n]);
    let down = (wl + 1 < wls).then(|| &programmed[(wl + 1) * n..(wl + 2) * n]);
    (up, &programmed[wl * n..(wl + 1) * n], down)
}

/// Re-derives every programmed cell's current state after `months` of
/// retention at the block's present wear.
///
/// Each cell draws one uniform from a stream keyed by `(seed, wordline)`,
/// so repeated calls with the same seed are idempotent and error sets grow
/// monotonically with wear and time.
pub fn apply_retention(
    array: &mut FlashArray,
    months: f64,
    profile: &ErrorProfile,
    lcs: &LcsModel,
    seed: u64,
) -> Result<()> {
    if !months.is_finite() || months < 0.0 {
        return Err(Error::Domain(format!("retention time must be >= 0, got {months}")));
    }
    if profile.states() != array.cell_type().states() {
        return Err(Error::Dimension(format!("{}-bit profile on a {} array", profile.m, array.cell_type())));
    }
    let model = RetentionModel::new(profile, lcs)?;
    let g = *array.geometry();
    for chip in 0..g.chips {
        for block in 0..g.blocks_per_chip {
            retain_block(array, BlockAddr::new(chip, block), months, &model, seed)?;
        }
    }
    Ok(())
}

fn retain_block(array: &mut FlashArray, b: BlockAddr, months: f64, model: &RetentionModel, seed: u64) -> Result<()> {
    let wls = array.geometry().wordlines_per_block;
    let n = array.cells_per_wordline();
    let (programmed, current, flags, pec) = array.block_slices_mut(b)?;
    let stress = model.stress(f64::from(pec), months);
    for wl in 0..wls {
        if !flags[wl] {
            continue;
        }
        let cur = &mut current[wl * n..(wl + 1) * n];
        let (up, mid, down) = neighbours(programmed, wl, wls, n);
        if stress == 0.0 {
            cur.copy_from_slice(mid);
            continue;
        }
        let mut rng = stream_rng(seed, b.wordline(wl));
        for i in 0..n {
            let k = mid[i];
            let u_nb = up.map_or(k, |s| s[i]);
            let d_nb = down.map_or(k, |s| s[i]);
            let rule = model.rule(u_nb, k, d_nb);
            let x: f64 = rng.gen();
            cur[i] = if x < rule.weight * stress { rule.to } else { k };
        }
    }
    Ok(())
}

/// Uniform stream used for the cells of one wordline.
pub(crate) fn wordline_uniforms(seed: u64, a: WlAddr) -> impl Iterator<Item = f64> {
    let mut rng = stream_rng(seed, a);
    std::iter::repeat_with(move || rng.gen::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gray::CellType;
    use crate::nand::Geometry;

    fn s(k: u8) -> CellState {
        CellState::from_raw(k)
    }

    fn lcs() -> LcsModel {
        LcsModel::new(16, 50.0, 6.0, 1.0, LcsForm::PowerOfSum).unwrap()
    }

    #[test]
    fn e_p15_e_beats_uniform_p15() {
        let m = lcs();
        assert!(m.factor(s(0), s(15), s(0)) > m.factor(s(15), s(15), s(15)));
        assert_eq!(m.factor(s(0), s(0), s(0)), 0.0);
        assert_eq!(m.direction(s(0), s(15), s(0)), -1);
        assert_eq!(m.direction(s(15), s(0), s(15)), 1);
    }

    #[test]
    fn factor_monotone_in_each_gap() {
        for form in [LcsForm::PowerOfSum, LcsForm::SumOfPowers] {
            let m = LcsModel::new(8, 10.0, 3.0, 0.5, form).unwrap();
            for k in 0..8u8 {
                for other in 0..8u8 {
                    for nb in 0..8u8 {
                        for nb2 in 0..8u8 {
                            let (d1, d2) = (nb.abs_diff(k), nb2.abs_diff(k));
                            let same_side = (nb < k) == (nb2 < k) || nb == k || nb2 == k;
                            if d1 <= d2 && same_side {
                                let a = m.factor(s(nb), s(k), s(other));
                                let b = m.factor(s(nb2), s(k), s(other));
                                assert!(a <= b + 1e-12, "{form:?} {nb} {k} {other} vs {nb2}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sum_of_powers_worst_pattern_equals_beta() {
        let m = LcsModel::new(16, 7.0, 2.0, 1.0, LcsForm::SumOfPowers).unwrap();
        assert!((m.factor(s(0), s(15), s(0)) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn zero_time_changes_nothing() {
        let g = Geometry { wordlines_per_block: 3, page_bytes: 8, ..Geometry::default() };
        let mut a = FlashArray::new(g, CellType::Qlc).unwrap();
        for wl in 0..3 {
            a.program_wordline(WlAddr::new(0, 0, wl), &[s((wl * 7) as u8); 64]).unwrap();
        }
        let p = ErrorProfile::uniform(4, 0.5);
        apply_retention(&mut a, 0.0, &p, &lcs(), 1).unwrap();
        for wl in 0..3 {
            let addr = WlAddr::new(0, 0, wl);
            assert_eq!(a.current_states(addr).unwrap(), a.programmed_states(addr).unwrap());
        }
        assert!(matches!(apply_retention(&mut a, -1.0, &p, &lcs(), 1), Err(Error::Domain(_))));
    }

    #[test]
    fn retention_is_idempotent_and_seeded() {
        let g = Geometry { wordlines_per_block: 4, page_bytes: 64, ..Geometry::default() };
        let mut a = FlashArray::new(g, CellType::Tlc).unwrap();
        for wl in 0..4 {
            let st: Vec<_> = (0..512).map(|i| s(((i + wl * 3) % 8) as u8)).collect();
            a.program_wordline(WlAddr::new(0, 0, wl), &st).unwrap();
        }
        let p = ErrorProfile::uniform(3, 0.2);
        let l = LcsModel::new(8, 2.0, 2.0, 1.0, LcsForm::PowerOfSum).unwrap();
        apply_retention(&mut a, 12.0, &p, &l, 9).unwrap();
        let once = a.clone();
        apply_retention(&mut a, 12.0, &p, &l, 9).unwrap();
        assert_eq!(once, a);
        let changed = (0..4)
            .map(|wl| {
                let addr = WlAddr::new(0, 0, wl);
                let c = a.current_states(addr).unwrap();
                let pr = a.programmed_states(addr).unwrap();
                c.iter().zip(pr).filter(|(x, y)| x != y).count()
            })
            .sum::<usize>();
        assert!(changed > 0);
    }

    #[test]
    fn uniform_share_is_zero_without_spreading() {
        let p = ErrorProfile::uniform(4, 0.01);
        let m = RetentionModel::new(&p, &LcsModel::none(16)).unwrap();
        assert_eq!(m.lcs_share(), 0.0);
        assert!((m.probability(s(3), s(3), s(3), 0.0, 12.0) - 0.01).abs() < 1e-15);
    }
}
