use super::{provisional_rb_rate, Access, AllocationError, AllocationInstance};
use serde::Serialize;

/// Relative margin a swap must clear to count as a strict improvement.
const IMPROVEMENT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preferences {
    /// Per BS: RBs, most preferred first.
    pub bs: Vec<Vec<usize>>,
    /// Per RB: BSs, most preferred first.
    pub rb: Vec<Vec<usize>>,
}

/// Both sides rank by the pair sum rate a BS would get alone on the RB at
/// its provisional power. Ties go to the lower index.
pub fn build_preferences(instance: &AllocationInstance, access: Access) -> Result<Preferences, AllocationError> {
    instance.validate()?;
    let n = instance.cells.len();
    let r = instance.resource_blocks;
    let score: Vec<Vec<f64>> =
        (0..n).map(|b| (0..r).map(|rb| provisional_rb_rate(instance, rb, &[b], access)).collect()).collect();
    let rank = |len: usize, key: &dyn Fn(usize) -> f64| {
        let mut idx: Vec<usize> = (0..len).collect();
        idx.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
        idx
    };
    let bs = (0..n).map(|b| rank(r, &|rb| score[b][rb])).collect();
    let rb = (0..r).map(|rb| rank(n, &|b| score[b][rb])).collect();
    Ok(Preferences { bs, rb })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matching {
    /// Per RB: member BSs in increasing index order.
    pub rb_members: Vec<Vec<usize>>,
    /// Per BS: its RB, or `None` when unmatched.
    pub bs_rb: Vec<Option<usize>>,
    pub tau: usize,
    /// Provisional-power sum rate right after deferred acceptance.
    pub seed_sum_rate: f64,
    /// Provisional-power sum rate after the swap phase.
    pub sum_rate: f64,
    pub swaps: usize,
}

impl Matching {
    /// Builds a matching from a BS → RB map, checking the quota.
    pub fn from_assignment(bs_rb: Vec<Option<usize>>, resource_blocks: usize, tau: usize) -> Result<Self, AllocationError> {
        if tau < 1 {
            return Err(AllocationError::InvalidQuota);
        }
        let mut rb_members = vec![Vec::new(); resource_blocks];
        for (b, rb) in bs_rb.iter().enumerate() {
            if let Some(rb) = *rb {
                let slot = rb_members
                    .get_mut(rb)
                    .ok_or_else(|| AllocationError::InvalidMatching(format!("BS {b} on missing RB {rb}")))?;
                slot.push(b);
            }
        }
        if let Some(rb) = rb_members.iter().position(|m| m.len() > tau) {
            return Err(AllocationError::InvalidMatching(format!("RB {rb} holds more than {tau} BSs")));
        }
        Ok(Self { rb_members, bs_rb, tau, seed_sum_rate: 0.0, sum_rate: 0.0, swaps: 0 })
    }

    pub fn matched_count(&self) -> usize {
        self.bs_rb.iter().flatten().count()
    }

    pub fn check(&self) -> Result<(), AllocationError> {
        let rebuilt = Self::from_assignment(self.bs_rb.clone(), self.rb_members.len(), self.tau)?;
        if rebuilt.rb_members != self.rb_members {
            return Err(AllocationError::InvalidMatching("RB and BS maps disagree".into()));
        }
        Ok(())
    }

    fn set(&mut self, b: usize, to: Option<usize>) {
        if let Some(old) = self.bs_rb[b] {
            self.rb_members[old].retain(|&x| x != b);
        }
        if let Some(new) = to {
            let m = &mut self.rb_members[new];
            let pos = m.partition_point(|&x| x < b);
            m.insert(pos, b);
        }
        self.bs_rb[b] = to;
    }
}

/// Deferred acceptance (BSs propose, each RB keeps its top `tau`), then
/// exchange/move operations accepted only on a strict increase of the
/// provisional-power sum rate, until none is left.
pub fn match_rbs(instance: &AllocationInstance, access: Access) -> Result<Matching, AllocationError> {
    let prefs = build_preferences(instance, access)?;
    let n = instance.cells.len();
    let r = instance.resource_blocks;
    let tau = instance.tau;

    let mut rank_at_rb = vec![vec![0usize; n]; r];
    for (rb, list) in prefs.rb.iter().enumerate() {
        for (pos, &b) in list.iter().enumerate() {
            rank_at_rb[rb][b] = pos;
        }
    }
    let mut next = vec![0usize; n];
    let mut held: Vec<Vec<usize>> = vec![Vec::new(); r];
    let mut free: std::collections::VecDeque<usize> = (0..n).collect();
    while let Some(b) = free.pop_front() {
        let Some(&rb) = prefs.bs[b].get(next[b]) else { continue };
        next[b] += 1;
        held[rb].push(b);
        if held[rb].len() > tau {
            let (worst_pos, _) = held[rb]
                .iter()
                .enumerate()
                .max_by_key(|&(_, &x)| rank_at_rb[rb][x])
                .expect("non-empty");
            let rejected = held[rb].remove(worst_pos);
            free.push_back(rejected);
        }
    }
    let mut bs_rb = vec![None; n];
    for (rb, members) in held.iter().enumerate() {
        for &b in members {
            bs_rb[b] = Some(rb);
        }
    }
    let mut m = Matching::from_assignment(bs_rb, r, tau)?;
    m.seed_sum_rate = sorted_sum(
        &(0..r).map(|rb| provisional_rb_rate(instance, rb, &m.rb_members[rb], access)).collect::<Vec<_>>(),
    );
    m.sum_rate = improve(instance, &mut m, |rb, members| Ok(provisional_rb_rate(instance, rb, members, access)))?;
    Ok(m)
}

/// Exchange/move search: repeatedly applies the first operation that
/// strictly raises `Σ_rb rb_rate(rb, members)` until none is left, and
/// returns the final total.
pub(crate) fn improve<F>(instance: &AllocationInstance, m: &mut Matching, mut rb_rate: F) -> Result<f64, AllocationError>
where
    F: FnMut(usize, &[usize]) -> Result<f64, AllocationError>,
{
    let n = instance.cells.len();
    let r = instance.resource_blocks;
    let mut rates = Vec::with_capacity(r);
    for rb in 0..r {
        rates.push(rb_rate(rb, &m.rb_members[rb])?);
    }
    loop {
        let total = sorted_sum(&rates);
        let eps = IMPROVEMENT_EPS * total.abs().max(1.0);
        let mut improved = false;
        'search: for b1 in 0..n {
            for b2 in b1 + 1..n {
                let (r1, r2) = (m.bs_rb[b1], m.bs_rb[b2]);
                if r1 == r2 {
                    continue;
                }
                if try_moves(m, &mut rates, &[(b1, r2), (b2, r1)], eps, &mut rb_rate)? {
                    improved = true;
                    break 'search;
                }
            }
            for rb in 0..r {
                if m.bs_rb[b1] == Some(rb) || m.rb_members[rb].len() >= m.tau {
                    continue;
                }
                if try_moves(m, &mut rates, &[(b1, Some(rb))], eps, &mut rb_rate)? {
                    improved = true;
                    break 'search;
                }
            }
        }
        if !improved {
            return Ok(sorted_sum(&rates));
        }
        m.swaps += 1;
    }
}

/// Applies `moves` if that raises the total by more than `eps` (updating
/// `rates`); otherwise leaves everything untouched.
fn try_moves<F>(
    m: &mut Matching,
    rates: &mut [f64],
    moves: &[(usize, Option<usize>)],
    eps: f64,
    rb_rate: &mut F,
) -> Result<bool, AllocationError>
where
    F: FnMut(usize, &[usize]) -> Result<f64, AllocationError>,
{
    let before: Vec<Option<usize>> = moves.iter().map(|&(b, _)| m.bs_rb[b]).collect();
    for &(b, to) in moves {
        m.set(b, to);
    }
    let mut touched: Vec<usize> = before.iter().chain(moves.iter().map(|(_, to)| to)).flatten().copied().collect();
    touched.sort_unstable();
    touched.dedup();
    let mut updated = Vec::with_capacity(touched.len());
    let mut delta = 0.0;
    for &rb in &touched {
        let v = rb_rate(rb, &m.rb_members[rb])?;
        delta += v - rates[rb];
        updated.push(v);
    }
    if delta > eps {
        for (&rb, v) in touched.iter().zip(updated) {
            rates[rb] = v;
        }
        return Ok(true);
    }
    for (&(b, _), &old) in moves.iter().zip(&before).rev() {
        m.set(b, old);
    }
    Ok(false)
}

pub(crate) fn sorted_sum(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}
