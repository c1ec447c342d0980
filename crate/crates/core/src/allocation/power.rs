use super::matching::{match_rbs, sorted_sum, Matching};
use super::{provisional_rb, rate_terms, Access, AllocationError, AllocationInstance, Constraint, RateTerm};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaConfig {
    pub max_iters: usize,
    /// Stop once the relative objective change drops below this.
    pub tolerance: f64,
}

impl Default for ScaConfig {
    fn default() -> Self {
        Self { max_iters: 100, tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerSolution {
    /// Per BS transmit power in watts; 0 for unmatched BSs.
    pub powers: Vec<f64>,
    /// Per BS `(a_m, a_n)`.
    pub shares: Vec<(f64, f64)>,
    /// Per BS pair sum rate; 0 for unmatched BSs.
    pub cell_rates: Vec<f64>,
    pub sum_rate: f64,
    /// Largest SCA iteration count over the RBs.
    pub iterations: usize,
    pub converged: bool,
    /// Total objective after each SCA iteration (entry 0 is the start).
    pub history: Vec<f64>,
}

impl PowerSolution {
    /// Worst relative constraint violation (`<= 0` when all hold).
    pub fn max_violation(&self, instance: &AllocationInstance, matching: &Matching) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (rb, members) in matching.rb_members.iter().enumerate() {
            for &b in members {
                worst = worst.max(self.powers[b] / instance.max_power - 1.0);
            }
            let cap = instance.interference_cap[rb];
            if cap.is_finite() && !members.is_empty() {
                let i: f64 = members.iter().map(|&b| instance.cells[b].macro_user_gain[rb] * self.powers[b]).sum();
                worst = worst.max(i / cap - 1.0);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub access: Access,
    pub matching: Matching,
    pub power: PowerSolution,
}

/// Matching followed by power control of the matched RBs.
pub fn allocate(instance: &AllocationInstance, access: Access, config: &ScaConfig) -> Result<Allocation, AllocationError> {
    let matching = match_rbs(instance, access)?;
    let power = sca_power_control(&matching, instance, access, config)?;
    Ok(Allocation { access, matching, power })
}

/// Maximises the sum rate of every RB over the powers of its co-channel
/// BSs subject to `p <= P_max` and the macro interference cap.
///
/// Each iteration replaces `log(1 + z)` by its tight lower bound
/// `α·log z + β` at the current point, which is concave in log-powers, and
/// maximises that with a log-barrier Newton method. A new point is taken
/// only if it does not lower the surrogate, so the true objective never
/// decreases.
pub fn sca_power_control(
    matching: &Matching,
    instance: &AllocationInstance,
    access: Access,
    config: &ScaConfig,
) -> Result<PowerSolution, AllocationError> {
    instance.validate()?;
    matching.check()?;
    if matching.rb_members.len() != instance.resource_blocks || matching.bs_rb.len() != instance.cells.len() {
        return Err(AllocationError::InvalidMatching("matching does not fit the instance".into()));
    }
    if matching.matched_count() > 0 && matching.rb_members.iter().any(|m| m.len() > instance.tau) {
        return Err(AllocationError::InvalidMatching("quota exceeded".into()));
    }
    let n = instance.cells.len();
    let mut powers = vec![0.0; n];
    let mut cell_rates = vec![0.0; n];
    let mut histories = Vec::new();
    let mut iterations = 0;
    let mut converged = true;
    for (rb, members) in matching.rb_members.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let problem = RbProblem::new(instance, rb, members, access)?;
        let (_, start) = provisional_rb(instance, rb, members, access);
        let out = problem.solve(&start, config);
        for (k, &b) in members.iter().enumerate() {
            powers[b] = out.powers[k];
        }
        let mut rates = vec![0.0; members.len()];
        for t in &problem.terms {
            rates[t.owner] += t.rate(&out.powers);
        }
        for (k, &b) in members.iter().enumerate() {
            cell_rates[b] = rates[k];
        }
        iterations = iterations.max(out.iterations);
        converged &= out.converged;
        histories.push(out.history);
    }
    let longest = histories.iter().map(Vec::len).max().unwrap_or(1);
    let history = (0..longest)
        .map(|k| sorted_sum(&histories.iter().map(|h| h[k.min(h.len() - 1)]).collect::<Vec<_>>()))
        .collect();
    let shares = instance.cells.iter().map(|c| (c.pair.far_share(), c.pair.near_share())).collect();
    Ok(PowerSolution { powers, shares, sum_rate: sorted_sum(&cell_rates), cell_rates, iterations, converged, history })
}

struct RbOutcome {
    powers: Vec<f64>,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

/// Duality-gap target of the barrier method, in nats.
const BARRIER_GAP: f64 = 1e-11;
const BARRIER_GROWTH: f64 = 20.0;
/// Newton stops once half the squared decrement falls below this.
const NEWTON_DECREMENT: f64 = 1e-10;
const MAX_NEWTON_STEPS: usize = 60;
const MIN_STEP: f64 = 1e-12;

struct RbProblem {
    terms: Vec<RateTerm>,
    m: usize,
    /// ln P_max and ln p_min
    upper: f64,
    lower: f64,
    /// Gains to the macro user and the cap, when the cap can bind.
    cap: Option<(Vec<f64>, f64)>,
}

impl RbProblem {
    fn new(instance: &AllocationInstance, rb: usize, members: &[usize], access: Access) -> Result<Self, AllocationError> {
        let h: Vec<f64> = members.iter().map(|&b| instance.cells[b].macro_user_gain[rb]).collect();
        let cap = instance.interference_cap[rb];
        let h_sum: f64 = h.iter().sum();
        let floor_interference = h_sum * instance.min_power();
        if cap.is_finite() && floor_interference >= cap {
            return Err(AllocationError::Infeasible(Constraint::InterferenceCap { rb, floor_interference, cap }));
        }
        Ok(Self {
            terms: rate_terms(instance, rb, members, access),
            m: members.len(),
            upper: instance.max_power.ln(),
            lower: instance.min_power().ln(),
            cap: (cap.is_finite() && h_sum > 0.0).then(|| (h, cap.ln())),
        })
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        let p: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        sorted_sum(&self.terms.iter().map(|t| t.rate(&p)).collect::<Vec<_>>())
    }

    /// Strictly interior start near the provisional powers.
    fn start(&self, provisional: &[f64]) -> DVector<f64> {
        let delta = 1e-3f64.min((self.upper - self.lower) / 4.0);
        let x = DVector::from_iterator(
            self.m,
            provisional.iter().map(|p| (p.ln() - delta).clamp(self.lower + delta, self.upper - delta)),
        );
        if self.feasible(&x) {
            return x;
        }
        let mut hi = self.upper;
        if let Some((h, lncap)) = &self.cap {
            let h_sum: f64 = h.iter().sum();
            hi = hi.min(lncap - h_sum.ln());
        }
        let back = 1e-3f64.min((hi - self.lower) / 2.0);
        DVector::from_element(self.m, hi - back)
    }

    fn solve(&self, start: &[f64], config: &ScaConfig) -> RbOutcome {
        let mut x = self.start(start);
        let mut f = self.objective(&x);
        let mut history = vec![f];
        let mut iterations = 0;
        let mut converged = self.terms.is_empty();
        while !converged && iterations < config.max_iters {
            let surrogate = Surrogate::at(self, &x);
            let candidate = self.maximize(&surrogate, x.clone());
            iterations += 1;
            if surrogate.value(self, &candidate) <= surrogate.value(self, &x) {
                converged = true;
                break;
            }
            let f_new = self.objective(&candidate);
            let change = (f_new - f).abs();
            x = candidate;
            f = f_new;
            history.push(f);
            if change <= config.tolerance * f.abs().max(f64::MIN_POSITIVE) {
                converged = true;
            }
        }
        RbOutcome { powers: x.iter().map(|v| v.exp()).collect(), iterations, converged, history }
    }

    fn constraint_count(&self) -> f64 {
        (2 * self.m + usize::from(self.cap.is_some())) as f64
    }

    fn feasible(&self, x: &DVector<f64>) -> bool {
        if x.iter().any(|&v| !(v < self.upper && v > self.lower)) {
            return false;
        }
        match &self.cap {
            Some((h, lncap)) => log_sum_exp(h, x).0 < *lncap,
            None => true,
        }
    }

    /// Barrier objective `t·s(x) + Σ log slacks` with gradient and Hessian.
    fn barrier(&self, s: &Surrogate, x: &DVector<f64>, t: f64) -> (f64, DVector<f64>, DMatrix<f64>) {
        let (sv, sg, sh) = s.derivatives(self, x);
        let mut v = t * sv;
        let mut g = sg * t;
        let mut h = sh * t;
        for i in 0..self.m {
            let up = self.upper - x[i];
            let lo = x[i] - self.lower;
            v += up.ln() + lo.ln();
            g[i] += -1.0 / up + 1.0 / lo;
            h[(i, i)] -= 1.0 / (up * up) + 1.0 / (lo * lo);
        }
        if let Some((gains, lncap)) = &self.cap {
            let (lse, lg, lh) = log_sum_exp(gains, x);
            let slack = lncap - lse;
            v += slack.ln();
            g -= &lg / slack;
            h -= lh / slack + &lg * lg.transpose() / (slack * slack);
        }
        (v, g, h)
    }

    fn maximize(&self, s: &Surrogate, mut x: DVector<f64>) -> DVector<f64> {
        let mut t = 1.0;
        loop {
            for _ in 0..MAX_NEWTON_STEPS {
                let (v, g, h) = self.barrier(s, &x, t);
                let neg = -h;
                let step = match neg.clone().cholesky() {
                    Some(c) => c.solve(&g),
                    None => {
                        let ridge = DMatrix::identity(self.m, self.m) * (1e-12 * neg.amax().max(1.0));
                        match (neg + ridge).cholesky() {
                            Some(c) => c.solve(&g),
                            None => g.clone(),
                        }
                    }
                };
                let decrement = g.dot(&step);
                if decrement.is_nan() || decrement <= 2.0 * NEWTON_DECREMENT {
                    break;
                }
                // at large t the barrier value carries absolute rounding
                // error far above the decrement, so allow for it
                let noise = 64.0 * f64::EPSILON * v.abs();
                let mut a = 1.0;
                while a > MIN_STEP && !self.feasible(&(&x + &step * a)) {
                    a *= 0.5;
                }
                while a > MIN_STEP {
                    let cand = &x + &step * a;
                    if self.barrier_value(s, &cand, t) >= v + 0.25 * a * decrement - noise {
                        break;
                    }
                    a *= 0.5;
                }
                if a <= MIN_STEP {
                    break;
                }
                x += &step * a;
            }
            if self.constraint_count() / t < BARRIER_GAP {
                return x;
            }
            t *= BARRIER_GROWTH;
        }
    }

    fn barrier_value(&self, s: &Surrogate, x: &DVector<f64>, t: f64) -> f64 {
        if !self.feasible(x) {
            return f64::NEG_INFINITY;
        }
        let mut v = t * s.value(self, x);
        for i in 0..self.m {
            v += (self.upper - x[i]).ln() + (x[i] - self.lower).ln();
        }
        if let Some((gains, lncap)) = &self.cap {
            v += (lncap - log_sum_exp(gains, x).0).ln();
        }
        v
    }
}

/// `ln Σ w_k e^{x_k}` with its gradient and Hessian.
fn log_sum_exp(w: &[f64], x: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
    log_sum_exp_plus(w, x, 0.0)
}

/// `ln(Σ w_k e^{x_k} + c)` with its gradient and Hessian.
fn log_sum_exp_plus(w: &[f64], x: &DVector<f64>, c: f64) -> (f64, DVector<f64>, DMatrix<f64>) {
    let u = DVector::from_iterator(x.len(), w.iter().zip(x.iter()).map(|(w, x)| w * x.exp()));
    let total = u.sum() + c;
    let g = &u / total;
    let h = DMatrix::from_diagonal(&g) - &g * g.transpose();
    (total.ln(), g, h)
}

/// `Σ weight·(α·ln z + β)` in bits, tight at the point it was built at.
struct Surrogate {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl Surrogate {
    fn at(problem: &RbProblem, x: &DVector<f64>) -> Self {
        let p: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let mut alpha = Vec::with_capacity(problem.terms.len());
        let mut beta = Vec::with_capacity(problem.terms.len());
        for t in &problem.terms {
            let z = t.sinr(&p);
            let a = z / (1.0 + z);
            alpha.push(a);
            beta.push(z.ln_1p() - a * z.ln());
        }
        Self { alpha, beta }
    }

    fn ln_sinr(t: &RateTerm, x: &DVector<f64>) -> f64 {
        t.c.ln() + x[t.owner] - log_sum_exp_plus(&t.d, x, t.noise).0
    }

    fn value(&self, problem: &RbProblem, x: &DVector<f64>) -> f64 {
        let parts: Vec<f64> = problem
            .terms
            .iter()
            .enumerate()
            .map(|(k, t)| t.weight * (self.alpha[k] * Self::ln_sinr(t, x) + self.beta[k]) / std::f64::consts::LN_2)
            .collect();
        sorted_sum(&parts)
    }

    fn derivatives(&self, problem: &RbProblem, x: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let m = problem.m;
        let mut g = DVector::zeros(m);
        let mut h = DMatrix::zeros(m, m);
        for (k, t) in problem.terms.iter().enumerate() {
            let scale = t.weight * self.alpha[k] / std::f64::consts::LN_2;
            let (_, lg, lh) = log_sum_exp_plus(&t.d, x, t.noise);
            g[t.owner] += scale;
            g -= lg * scale;
            h -= lh * scale;
        }
        (self.value(problem, x), g, h)
    }
}
