//! Cross-tier user association by maximum average received power, NOMA
//! pairing inside each cell, and Monte-Carlo association probabilities.

use crate::geometry::{
    avg_received_power, clamp_distance, BsId, Deployment, GeometryError, NetworkSnapshot, Point,
};
use crate::noma::{NomaError, NomaPair};
use crate::seed;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum AssociationError {
    #[error("network has no base station")]
    EmptyNetwork,
    #[error("every tier has zero density and no BS is guaranteed")]
    NoBaseStations,
    #[error("trials must be >= 1")]
    NoTrials,
    #[error("at least one resource block is required")]
    NoResourceBlocks,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Noma(#[from] NomaError),
}

/// Average received power from every BS, in (tier, index) order.
pub fn received_powers(user: &Point, snapshot: &NetworkSnapshot) -> Result<Vec<(BsId, f64)>, AssociationError> {
    let mut out = Vec::with_capacity(snapshot.bs_count());
    for (tier, t) in snapshot.tiers.iter().enumerate() {
        let tx = t.config.tx_power_watts()?;
        for (index, pos) in t.positions.iter().enumerate() {
            let d = clamp_distance(user.distance(pos));
            let p = avg_received_power(tx, t.config.array_gain, d, t.config.path_loss_exponent)?;
            out.push((BsId { tier, index }, p));
        }
    }
    Ok(out)
}

/// Strongest BS by average received power; ties go to the lowest
/// (tier, index).
pub fn associate_user(user: &Point, snapshot: &NetworkSnapshot) -> Result<BsId, AssociationError> {
    let mut best: Option<(BsId, f64)> = None;
    for (id, p) in received_powers(user, snapshot)? {
        if best.is_none_or(|(_, bp)| p > bp) {
            best = Some((id, p));
        }
    }
    best.map(|(id, _)| id).ok_or(AssociationError::EmptyNetwork)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pairing {
    pub pairs: Vec<NomaPair>,
    /// Odd user out, served alone (OMA).
    pub singleton: Option<usize>,
}

/// Sort-and-fold pairing: users ranked by `metric` (descending, ties by id),
/// the strongest paired with the weakest, the second strongest with the
/// second weakest and so on. The weaker user of each pair gets `far_share`.
pub fn pair_users(users: &[(usize, f64)], far_share: f64, near_share: f64) -> Result<Pairing, AssociationError> {
    NomaPair::new(0, 1, far_share, near_share)?;
    let mut ranked = users.to_vec();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let n = ranked.len();
    let mut pairs = Vec::with_capacity(n / 2);
    for i in 0..n / 2 {
        let strong = ranked[i].0;
        let weak = ranked[n - 1 - i].0;
        pairs.push(NomaPair::new(strong, weak, far_share, near_share)?);
    }
    let singleton = (n % 2 == 1).then(|| ranked[n / 2].0);
    Ok(Pairing { pairs, singleton })
}

/// Position of a served group in a cell's (resource block, time slot) grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Slot {
    pub rb: usize,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellService {
    /// Users ranked by average received power, strongest first.
    pub users: Vec<usize>,
    pub pairs: Vec<(NomaPair, Slot)>,
    pub singleton: Option<(usize, Slot)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationMap {
    pub user_bs: Vec<Option<BsId>>,
    pub cells: BTreeMap<BsId, CellService>,
}

/// Associates every user of the snapshot, pairs users within each cell and
/// queues the groups round-robin over `resource_blocks` (one group per RB
/// per time slot).
pub fn associate_all(
    snapshot: &NetworkSnapshot,
    far_share: f64,
    near_share: f64,
    resource_blocks: usize,
) -> Result<AssociationMap, AssociationError> {
    if resource_blocks == 0 {
        return Err(AssociationError::NoResourceBlocks);
    }
    let mut user_bs = Vec::with_capacity(snapshot.users.len());
    let mut members: BTreeMap<BsId, Vec<(usize, f64)>> = BTreeMap::new();
    for (u, pos) in snapshot.users.iter().enumerate() {
        let powers = received_powers(pos, snapshot)?;
        let best = powers
            .iter()
            .fold(None::<(BsId, f64)>, |acc, &(id, p)| match acc {
                Some((_, bp)) if p <= bp => acc,
                _ => Some((id, p)),
            });
        user_bs.push(best.map(|b| b.0));
        if let Some((id, p)) = best {
            members.entry(id).or_default().push((u, p));
        }
    }
    let mut cells = BTreeMap::new();
    for (id, users) in members {
        let pairing = pair_users(&users, far_share, near_share)?;
        let mut ranked = users.clone();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let slot_of = |i: usize| Slot { rb: i % resource_blocks, slot: i / resource_blocks };
        let pairs: Vec<(NomaPair, Slot)> =
            pairing.pairs.into_iter().enumerate().map(|(i, p)| (p, slot_of(i))).collect();
        let singleton = pairing.singleton.map(|u| (u, slot_of(pairs.len())));
        cells.insert(id, CellService { users: ranked.into_iter().map(|u| u.0).collect(), pairs, singleton });
    }
    Ok(AssociationMap { user_bs, cells })
}

/// Where the probe user is dropped in each trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeMode {
    /// Typical user at the window centre.
    Origin,
    /// Uniform over the window.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TierProbability {
    pub tier: String,
    pub count: usize,
    pub probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssociationStats {
    pub tiers: Vec<TierProbability>,
    /// Trials in which no BS existed.
    pub uncovered: usize,
    pub trials: usize,
}

/// Wilson score interval for `successes` out of `n` at two-sided `z`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Monte-Carlo estimate of the probability that a probe user associates
/// with each tier. Trial `t` draws from the stream `(master_seed, t)`.
pub fn association_probability(
    deployment: &Deployment,
    probe: ProbeMode,
    trials: usize,
    master_seed: u64,
) -> Result<AssociationStats, AssociationError> {
    if trials == 0 {
        return Err(AssociationError::NoTrials);
    }
    for t in &deployment.tiers {
        t.validate()?;
    }
    if !deployment.guaranteed_macro && deployment.tiers.iter().all(|t| t.density == 0.0) {
        return Err(AssociationError::NoBaseStations);
    }
    let bs_only = Deployment { user_density: 0.0, ..deployment.clone() };
    let winners: Vec<Option<usize>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<Option<usize>, AssociationError> {
            let stream = seed::derive(master_seed, &[t]);
            let mut rng = seed::rng_for(master_seed, &[t]);
            let snap = NetworkSnapshot::generate_with(&bs_only, stream, &mut rng)?;
            let user = match probe {
                ProbeMode::Origin => bs_only.region.center(),
                ProbeMode::Uniform => bs_only.region.sample_uniform(&mut rng),
            };
            match associate_user(&user, &snap) {
                Ok(id) => Ok(Some(id.tier)),
                Err(AssociationError::EmptyNetwork) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, _>>()?;

    let mut counts = vec![0usize; deployment.tiers.len()];
    let mut uncovered = 0;
    for w in winners {
        match w {
            Some(t) => counts[t] += 1,
            None => uncovered += 1,
        }
    }
    let tiers = deployment
        .tiers
        .iter()
        .zip(counts)
        .map(|(cfg, count)| {
            let (lo, hi) = wilson_interval(count, trials, crate::metrics::Z_95);
            TierProbability {
                tier: cfg.name.clone(),
                count,
                probability: count as f64 / trials as f64,
                ci_low: lo,
                ci_high: hi,
                ci_half_width: (hi - lo) / 2.0,
            }
        })
        .collect();
    Ok(AssociationStats { tiers, uncovered, trials })
}
