//! Resource allocation for NOMA small cells sharing RBs with a macro tier:
//! many-to-one BS/RB matching under a quota and per-RB power control.
//!
//! Rates are spectral efficiencies in bits/s/Hz; powers and gains are
//! linear (watts, power gains).

mod matching;
mod power;
mod scenario;

pub use matching::{build_preferences, match_rbs, Matching, Preferences};
pub use power::{allocate, sca_power_control, Allocation, PowerSolution, ScaConfig};
pub use scenario::SmallCellScenario;

use crate::noma::{NomaError, NomaPair};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum AllocationError {
    #[error("quota tau must be >= 1")]
    InvalidQuota,
    #[error("at least one resource block is required")]
    NoResourceBlocks,
    #[error("noise variance must be finite and > 0, got {0}")]
    InvalidNoise(f64),
    #[error("maximum power must be finite and > 0, got {0}")]
    InvalidMaxPower(f64),
    #[error("interference cap on RB {rb} must be > 0, got {value}")]
    InvalidCap { rb: usize, value: f64 },
    #[error("{field} has the wrong shape")]
    Shape { field: &'static str },
    #[error("{field} contains a negative or non-finite gain")]
    InvalidGain { field: &'static str },
    #[error("infeasible: {0}")]
    Infeasible(Constraint),
    #[error("matching is inconsistent: {0}")]
    InvalidMatching(String),
    #[error("power must be finite and > 0, got {0}")]
    InvalidPower(f64),
    #[error("all fairness values are zero")]
    AllZero,
    #[error("fairness needs at least one finite, non-negative value")]
    InvalidFairnessInput,
    #[error(transparent)]
    Noma(#[from] NomaError),
}

/// Constraint that rules out every power vector (the infeasibility
/// certificate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Constraint {
    /// Even the minimum power of every BS on `rb` exceeds the macro cap.
    InterferenceCap { rb: usize, floor_interference: f64, cap: f64 },
}

impl std::fmt::Display for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Constraint::InterferenceCap { rb, floor_interference, cap } => write!(
                f,
                "macro interference cap on RB {rb}: {floor_interference:e} W at minimum power exceeds {cap:e} W"
            ),
        }
    }
}

/// How a cell serves its user pair on an RB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Access {
    /// Superposition with fixed power shares and SIC at the near user.
    Noma,
    /// Equal time sharing, full power to whichever user is active.
    Oma,
}

impl Access {
    pub fn name(self) -> &'static str {
        match self {
            Access::Noma => "NOMA",
            Access::Oma => "OMA",
        }
    }
}

/// Channels of one small cell, indexed by RB.
#[derive(Debug, Clone, PartialEq)]
pub struct CellChannels {
    pub pair: NomaPair,
    pub far_gain: Vec<f64>,
    pub near_gain: Vec<f64>,
    /// Macro-tier interference power (watts) at the far / near user.
    pub macro_interference_far: Vec<f64>,
    pub macro_interference_near: Vec<f64>,
    /// Gain from this BS to the protected macro user of each RB.
    pub macro_user_gain: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationInstance {
    pub cells: Vec<CellChannels>,
    /// `cross_far[j][b][r]`: gain from small cell `j` to the far user of
    /// cell `b` on RB `r` (the `j == b` entries are ignored).
    pub cross_far: Vec<Vec<Vec<f64>>>,
    pub cross_near: Vec<Vec<Vec<f64>>>,
    pub resource_blocks: usize,
    /// Maximum number of small cells per RB.
    pub tau: usize,
    pub max_power: f64,
    /// Per-RB cap on small-cell interference at the macro user (watts);
    /// `f64::INFINITY` disables it.
    pub interference_cap: Vec<f64>,
    pub noise: f64,
}

/// Powers never go below this fraction of `max_power`.
pub const MIN_POWER_FRACTION: f64 = 1e-9;

impl AllocationInstance {
    pub fn validate(&self) -> Result<(), AllocationError> {
        if self.tau < 1 {
            return Err(AllocationError::InvalidQuota);
        }
        let r = self.resource_blocks;
        if r == 0 {
            return Err(AllocationError::NoResourceBlocks);
        }
        if !(self.noise.is_finite() && self.noise > 0.0) {
            return Err(AllocationError::InvalidNoise(self.noise));
        }
        if !(self.max_power.is_finite() && self.max_power > 0.0) {
            return Err(AllocationError::InvalidMaxPower(self.max_power));
        }
        if self.interference_cap.len() != r {
            return Err(AllocationError::Shape { field: "interference_cap" });
        }
        for (rb, &value) in self.interference_cap.iter().enumerate() {
            if value.is_nan() || value <= 0.0 {
                return Err(AllocationError::InvalidCap { rb, value });
            }
        }
        let check = |v: &[f64], field: &'static str| -> Result<(), AllocationError> {
            if v.len() != r {
                return Err(AllocationError::Shape { field });
            }
            if v.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
                return Err(AllocationError::InvalidGain { field });
            }
            Ok(())
        };
        let n = self.cells.len();
        for c in &self.cells {
            check(&c.far_gain, "far_gain")?;
            check(&c.near_gain, "near_gain")?;
            check(&c.macro_interference_far, "macro_interference_far")?;
            check(&c.macro_interference_near, "macro_interference_near")?;
            check(&c.macro_user_gain, "macro_user_gain")?;
        }
        for (cross, field) in [(&self.cross_far, "cross_far"), (&self.cross_near, "cross_near")] {
            if cross.len() != n || cross.iter().any(|row| row.len() != n) {
                return Err(AllocationError::Shape { field });
            }
            for row in cross {
                for v in row {
                    check(v, field)?;
                }
            }
        }
        Ok(())
    }

    pub fn min_power(&self) -> f64 {
        self.max_power * MIN_POWER_FRACTION
    }

    /// Equal power for every member of `members` on `rb`: `P_max`, scaled
    /// down just enough to meet the interference cap.
    pub fn provisional_power(&self, rb: usize, members: &[usize]) -> f64 {
        let h: f64 = members.iter().map(|&b| self.cells[b].macro_user_gain[rb]).sum();
        let cap = self.interference_cap[rb];
        if h > 0.0 && cap.is_finite() {
            self.max_power.min(cap / h)
        } else {
            self.max_power
        }
    }
}

/// One `weight · log2(1 + c·p_owner / (Σ_k d_k p_k + noise))` rate term
/// on an RB; indices refer to positions in the RB's member list.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RateTerm {
    pub owner: usize,
    pub weight: f64,
    pub c: f64,
    pub d: Vec<f64>,
    pub noise: f64,
}

impl RateTerm {
    pub fn sinr(&self, p: &[f64]) -> f64 {
        let denom: f64 = self.d.iter().zip(p).map(|(d, p)| d * p).sum::<f64>() + self.noise;
        self.c * p[self.owner] / denom
    }

    pub fn rate(&self, p: &[f64]) -> f64 {
        self.weight * self.sinr(p).ln_1p() / std::f64::consts::LN_2
    }
}

/// Rate terms of the cells in `members` sharing `rb`.
pub(crate) fn rate_terms(instance: &AllocationInstance, rb: usize, members: &[usize], access: Access) -> Vec<RateTerm> {
    let m = members.len();
    let mut terms = Vec::with_capacity(2 * m);
    for (i, &b) in members.iter().enumerate() {
        let cell = &instance.cells[b];
        let (a_m, a_n) = (cell.pair.far_share(), cell.pair.near_share());
        let interference = |cross: &Vec<Vec<Vec<f64>>>| -> Vec<f64> {
            members.iter().enumerate().map(|(k, &j)| if k == i { 0.0 } else { cross[j][b][rb] }).collect()
        };
        let g_f = cell.far_gain[rb];
        let g_n = cell.near_gain[rb];
        let mut far_d = interference(&instance.cross_far);
        let near_d = interference(&instance.cross_near);
        let far_noise = instance.noise + cell.macro_interference_far[rb];
        let near_noise = instance.noise + cell.macro_interference_near[rb];
        let (weight, c_far, c_near) = match access {
            Access::Noma => {
                // the far user decodes its own signal with the near user's
                // share as interference
                far_d[i] = a_n * g_f;
                (1.0, a_m * g_f, a_n * g_n)
            }
            Access::Oma => (0.5, g_f, g_n),
        };
        for (c, d, noise) in [(c_far, far_d, far_noise), (c_near, near_d, near_noise)] {
            if c > 0.0 {
                terms.push(RateTerm { owner: i, weight, c, d, noise });
            }
        }
    }
    terms
}

/// Provisional powers of `members` on `rb` and the sum rate they give.
///
/// Every on/off pattern is tried, "off" members sitting at the power
/// floor. The "on" members get either the largest equal power that meets
/// `P_max` and the cap, or full power handed out greedily in order of
/// increasing macro leakage until the cap budget runs out. The best
/// candidate wins (all-on and equal power first on ties), so a lone member
/// simply gets its equal provisional power.
pub(crate) fn provisional_rb(instance: &AllocationInstance, rb: usize, members: &[usize], access: Access) -> (f64, Vec<f64>) {
    let m = members.len();
    if m == 0 {
        return (0.0, Vec::new());
    }
    let terms = rate_terms(instance, rb, members, access);
    let floor = instance.min_power();
    let cap = instance.interference_cap[rb];
    let h: Vec<f64> = members.iter().map(|&b| instance.cells[b].macro_user_gain[rb]).collect();
    let mut by_leakage: Vec<usize> = (0..m).collect();
    by_leakage.sort_by(|&a, &b| h[a].total_cmp(&h[b]).then(a.cmp(&b)));
    let full = (1usize << m.min(16)) - 1;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |p: Vec<f64>| {
        let rate: f64 = terms.iter().map(|t| t.rate(&p)).sum();
        if best.as_ref().is_none_or(|(b, _)| rate > *b) {
            best = Some((rate, p));
        }
    };
    for mask in (1..=full).rev() {
        let on = |i: usize| mask >> i & 1 == 1;
        let h_on: f64 = (0..m).filter(|&i| on(i)).map(|i| h[i]).sum();
        let h_off: f64 = (0..m).filter(|&i| !on(i)).map(|i| h[i]).sum();
        let budget = cap - h_off * floor;
        let mut level = instance.max_power;
        if cap.is_finite() && h_on > 0.0 {
            level = level.min(budget / h_on);
        }
        if level.is_nan() || level <= floor {
            continue;
        }
        consider((0..m).map(|i| if on(i) { level } else { floor }).collect());
        if level < instance.max_power {
            let mut p = vec![floor; m];
            let mut left = budget;
            let mut ok = true;
            for &i in by_leakage.iter().filter(|&&i| on(i)) {
                p[i] = if h[i] > 0.0 { instance.max_power.min(left / h[i]) } else { instance.max_power };
                if p[i].is_nan() || p[i] <= floor {
                    ok = false;
                    break;
                }
                left -= h[i] * p[i];
            }
            if ok {
                consider(p);
            }
        }
    }
    best.unwrap_or_else(|| (0.0, vec![floor; m]))
}

pub(crate) fn provisional_rb_rate(instance: &AllocationInstance, rb: usize, members: &[usize], access: Access) -> f64 {
    provisional_rb(instance, rb, members, access).0
}

/// Link gains seen by one NOMA pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGains {
    pub far: f64,
    pub near: f64,
    /// Co-channel interference power (watts) at each user.
    pub interference_far: f64,
    pub interference_near: f64,
}

/// `(rate_far, rate_near)` of a downlink NOMA pair at BS power `p`.
pub fn noma_pair_rates(p: f64, pair: &NomaPair, gains: &PairGains, noise: f64) -> Result<(f64, f64), AllocationError> {
    if !(noise.is_finite() && noise > 0.0) {
        return Err(AllocationError::InvalidNoise(noise));
    }
    if !(p.is_finite() && p > 0.0) {
        return Err(AllocationError::InvalidPower(p));
    }
    let far_sinr = pair.far_share() * p * gains.far / (pair.near_share() * p * gains.far + gains.interference_far + noise);
    let near_sinr = pair.near_share() * p * gains.near / (gains.interference_near + noise);
    Ok((far_sinr.ln_1p() / std::f64::consts::LN_2, near_sinr.ln_1p() / std::f64::consts::LN_2))
}

/// `(rate_far, rate_near)` when the pair time-shares the RB equally.
pub fn oma_pair_rates(p: f64, gains: &PairGains, noise: f64) -> Result<(f64, f64), AllocationError> {
    if !(noise.is_finite() && noise > 0.0) {
        return Err(AllocationError::InvalidNoise(noise));
    }
    if !(p.is_finite() && p > 0.0) {
        return Err(AllocationError::InvalidPower(p));
    }
    let half = |g: f64, i: f64| 0.5 * (p * g / (i + noise)).ln_1p() / std::f64::consts::LN_2;
    Ok((half(gains.far, gains.interference_far), half(gains.near, gains.interference_near)))
}

/// Jain's index `(Σx)² / (n·Σx²)`.
pub fn jain_fairness(values: &[f64]) -> Result<f64, AllocationError> {
    if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(AllocationError::InvalidFairnessInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sum: f64 = sorted.iter().sum();
    if sum == 0.0 {
        return Err(AllocationError::AllZero);
    }
    // normalise first so tiny or huge inputs cannot under/overflow
    let max = sorted[sorted.len() - 1];
    let s: f64 = sorted.iter().map(|v| v / max).sum();
    let sq: f64 = sorted.iter().map(|v| (v / max) * (v / max)).sum();
    Ok(s * s / (sorted.len() as f64 * sq))
}
