//! Log-domain sum-product detection on the factor graph of a spreading
//! matrix: resource blocks are function nodes, layers are variable nodes.

use super::{Codebook, Complex64, NomaError, SpreadingMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpaConfig {
    pub max_iters: usize,
    /// Early stop once no message moves by more than this.
    pub tolerance: f64,
    /// Weight kept from the previous function-to-variable message, in [0, 1).
    pub damping: f64,
}

impl Default for MpaConfig {
    fn default() -> Self {
        Self { max_iters: 8, tolerance: 1e-6, damping: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// `marginals[layer][symbol]`, each row sums to one.
    pub marginals: Vec<Vec<f64>>,
    pub decisions: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

/// Jacobian logarithm: `ln(e^a + e^b)`.
#[inline]
fn max_star(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    a.max(b) + (-(a - b).abs()).exp().ln_1p()
}

fn log_sum(values: &[f64]) -> f64 {
    values.iter().fold(f64::NEG_INFINITY, |acc, &v| max_star(acc, v))
}

fn normalize(values: &mut [f64]) {
    let z = log_sum(values);
    if z.is_finite() {
        values.iter_mut().for_each(|v| *v -= z);
    }
}

const FOREST_TOLERANCE: f64 = 1e-12;

/// True when the bipartite row/column graph has no cycle.
fn is_forest(matrix: &SpreadingMatrix) -> bool {
    let n_nodes = matrix.rows() + matrix.cols();
    let mut parent: Vec<usize> = (0..n_nodes).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for k in 0..matrix.rows() {
        for l in matrix.row_support(k) {
            let a = find(&mut parent, k);
            let b = find(&mut parent, matrix.rows() + l);
            if a == b {
                return false;
            }
            parent[a] = b;
        }
    }
    true
}

struct FactorNode {
    vars: Vec<usize>,
    /// Log-likelihood of each joint configuration of `vars` (mixed radix,
    /// first variable least significant).
    log_lik: Vec<f64>,
}

/// Marginal posteriors of each layer's symbol given `received`, under
/// circular Gaussian noise of variance `noise_var` per resource block and
/// uniform priors.
///
/// On cycle-free graphs the messages are iterated to an exact fixed point
/// (bounded by `max_iters`), which yields the exact marginals.
pub fn mpa_detect(
    received: &[Complex64],
    matrix: &SpreadingMatrix,
    codebook: &Codebook,
    noise_var: f64,
    config: &MpaConfig,
) -> Result<DetectionResult, NomaError> {
    if !(noise_var.is_finite() && noise_var > 0.0) {
        return Err(NomaError::InvalidNoise(noise_var));
    }
    if config.max_iters == 0 {
        return Err(NomaError::NoIterations);
    }
    if !(0.0..1.0).contains(&config.damping) {
        return Err(NomaError::InvalidDamping(config.damping));
    }
    codebook.check_against(matrix)?;
    if received.len() != matrix.rows() {
        return Err(NomaError::ReceivedLength { got: received.len(), rows: matrix.rows() });
    }
    let q = codebook.order();
    let n_layers = matrix.cols();

    let factors: Vec<FactorNode> = (0..matrix.rows())
        .map(|k| {
            let vars = matrix.row_support(k);
            let n_conf = q.pow(vars.len() as u32);
            let mut log_lik = Vec::with_capacity(n_conf);
            let mut digits = vec![0usize; vars.len()];
            for _ in 0..n_conf {
                let mut r = received[k];
                for (&l, &s) in vars.iter().zip(&digits) {
                    r -= codebook.codeword(l, s)[k];
                }
                log_lik.push(-r.norm_sqr() / noise_var);
                increment(&mut digits, q);
            }
            FactorNode { vars, log_lik }
        })
        .collect();

    // edge (k, i) connects factor k to its i-th variable
    let mut to_var: Vec<Vec<Vec<f64>>> = factors.iter().map(|f| vec![vec![0.0; q]; f.vars.len()]).collect();
    let mut to_factor = to_var.clone();
    // for each layer, the (factor, slot) pairs it touches
    let mut var_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_layers];
    for (k, f) in factors.iter().enumerate() {
        for (i, &l) in f.vars.iter().enumerate() {
            var_edges[l].push((k, i));
        }
    }

    // on a tree the messages are exact after a few sweeps; only round-off moves after that
    let tolerance = if is_forest(matrix) { FOREST_TOLERANCE } else { config.tolerance };
    let mut iterations = 0;
    let mut converged = false;
    let mut acc = vec![f64::NEG_INFINITY; q];
    while iterations < config.max_iters {
        iterations += 1;
        let mut delta: f64 = 0.0;
        for (k, f) in factors.iter().enumerate() {
            let d = f.vars.len();
            let mut digits = vec![0usize; d];
            let mut out = vec![vec![f64::NEG_INFINITY; q]; d];
            for &ll in &f.log_lik {
                let total: f64 = ll + (0..d).map(|j| to_factor[k][j][digits[j]]).sum::<f64>();
                for i in 0..d {
                    let v = total - to_factor[k][i][digits[i]];
                    let slot = &mut out[i][digits[i]];
                    *slot = max_star(*slot, v);
                }
                increment(&mut digits, q);
            }
            for (i, mut msg) in out.into_iter().enumerate() {
                normalize(&mut msg);
                let old = &mut to_var[k][i];
                for (o, m) in old.iter_mut().zip(&msg) {
                    let new = if iterations > 1 && config.damping > 0.0 {
                        config.damping * *o + (1.0 - config.damping) * m
                    } else {
                        *m
                    };
                    let change = if new.is_finite() || o.is_finite() {
                        if new == *o { 0.0 } else { (new - *o).abs() }
                    } else {
                        0.0
                    };
                    delta = delta.max(change);
                    *o = new;
                }
            }
        }
        for edges in &var_edges {
            for &(k, i) in edges {
                for (s, slot) in acc.iter_mut().enumerate() {
                    *slot = edges
                        .iter()
                        .filter(|&&e| e != (k, i))
                        .map(|&(k2, i2)| to_var[k2][i2][s])
                        .sum();
                }
                normalize(&mut acc);
                to_factor[k][i].copy_from_slice(&acc);
            }
        }
        if iterations > 1 && delta <= tolerance {
            converged = true;
            break;
        }
    }

    let mut marginals = Vec::with_capacity(n_layers);
    let mut decisions = Vec::with_capacity(n_layers);
    for edges in &var_edges {
        let mut logp: Vec<f64> = (0..q)
            .map(|s| edges.iter().map(|&(k, i)| to_var[k][i][s]).sum())
            .collect();
        normalize(&mut logp);
        let mut p: Vec<f64> = logp.iter().map(|v| v.exp()).collect();
        let z: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= z);
        let mut best = 0;
        for s in 1..q {
            if p[s] > p[best] {
                best = s;
            }
        }
        decisions.push(best);
        marginals.push(p);
    }
    Ok(DetectionResult { marginals, decisions, iterations, converged })
}

fn increment(digits: &mut [usize], radix: usize) {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < radix {
            return;
        }
        *d = 0;
    }
}
