//! Low cross-correlation spreading sequence pools.

use super::{Complex64, NomaError};
use rand::seq::SliceRandom;
use rand::Rng;

/// Full enumeration of the alphabet is used below this many sequences;
/// above it a random candidate set of this size is drawn instead.
const MAX_CANDIDATES: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct MusaPool {
    /// Unit-norm sequences of equal length.
    pub sequences: Vec<Vec<Complex64>>,
    /// Largest `|<s_i, s_j>|` over distinct pairs; 0 for a single sequence.
    pub max_cross_correlation: f64,
}

pub fn max_cross_correlation(sequences: &[Vec<Complex64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..sequences.len() {
        for j in i + 1..sequences.len() {
            worst = worst.max(correlation(&sequences[i], &sequences[j]));
        }
    }
    worst
}

fn correlation(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm()
}

fn normalized(seq: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let norm = seq.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    (norm > 0.0).then(|| seq.into_iter().map(|c| c / norm).collect())
}

fn candidates<R: Rng + ?Sized>(length: usize, alphabet: &[Complex64], rng: &mut R) -> Vec<Vec<Complex64>> {
    let a = alphabet.len();
    let total = (a as f64).powi(length as i32);
    let raw: Vec<Vec<Complex64>> = if total <= MAX_CANDIDATES as f64 {
        let total = total as usize;
        (0..total)
            .map(|mut idx| {
                (0..length)
                    .map(|_| {
                        let s = alphabet[idx % a];
                        idx /= a;
                        s
                    })
                    .collect()
            })
            .collect()
    } else {
        (0..MAX_CANDIDATES)
            .map(|_| (0..length).map(|_| alphabet[rng.random_range(0..a)]).collect())
            .collect()
    };
    raw.into_iter().filter_map(normalized).collect()
}

/// Draws `pool_size` unit-norm length-`length` sequences over `alphabet`.
///
/// Each of `restarts` rounds starts from a random candidate and greedily
/// adds the candidate with the smallest worst-case correlation to the pool
/// so far (lowest candidate index on ties). The round with the smallest
/// maximum pairwise cross-correlation wins.
pub fn musa_pool<R: Rng + ?Sized>(
    pool_size: usize,
    length: usize,
    alphabet: &[Complex64],
    restarts: usize,
    rng: &mut R,
) -> Result<MusaPool, NomaError> {
    if alphabet.is_empty() {
        return Err(NomaError::EmptyAlphabet);
    }
    if pool_size == 0 {
        return Err(NomaError::EmptyPool);
    }
    if length == 0 {
        return Err(NomaError::EmptyMatrix { rows: length, cols: pool_size });
    }
    let cands = candidates(length, alphabet, rng);
    if cands.is_empty() {
        // the alphabet holds only zeros
        return Err(NomaError::EmptyAlphabet);
    }
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.shuffle(rng);

    let mut best: Option<(f64, Vec<usize>)> = None;
    for round in 0..restarts.max(1) {
        let start = order[round % order.len()];
        let mut chosen = vec![start];
        // worst correlation of each candidate against the chosen set
        let mut worst: Vec<f64> = cands.iter().map(|c| correlation(c, &cands[start])).collect();
        worst[start] = f64::INFINITY;
        while chosen.len() < pool_size {
            let mut pick = 0;
            for i in 1..cands.len() {
                if worst[i] < worst[pick] {
                    pick = i;
                }
            }
            if worst[pick] == f64::INFINITY {
                // every candidate used: allow repeats
                pick = chosen[chosen.len() % chosen.len().max(1)];
            }
            chosen.push(pick);
            for (i, w) in worst.iter_mut().enumerate() {
                if *w != f64::INFINITY {
                    *w = w.max(correlation(&cands[i], &cands[pick]));
                }
            }
            worst[pick] = f64::INFINITY;
        }
        let seqs: Vec<Vec<Complex64>> = chosen.iter().map(|&i| cands[i].clone()).collect();
        let score = max_cross_correlation(&seqs);
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, chosen));
        }
    }
    let (score, chosen) = best.expect("at least one round");
    Ok(MusaPool {
        sequences: chosen.into_iter().map(|i| cands[i].clone()).collect(),
        max_cross_correlation: score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qpsk_half() -> Vec<Complex64> {
        vec![
            Complex64::new(0.5, 0.5),
            Complex64::new(0.5, -0.5),
            Complex64::new(-0.5, 0.5),
            Complex64::new(-0.5, -0.5),
        ]
    }

    #[test]
    fn single_sequence_pool() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pool = musa_pool(1, 4, &qpsk_half(), 8, &mut rng).unwrap();
        assert_eq!(pool.sequences.len(), 1);
        assert_eq!(pool.max_cross_correlation, 0.0);
    }

    #[test]
    fn orthogonal_pool_found() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bpsk = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        for size in 1..=4 {
            let pool = musa_pool(size, 4, &bpsk, 8, &mut rng).unwrap();
            assert!(pool.max_cross_correlation < 1e-12, "size {size}: {}", pool.max_cross_correlation);
        }
    }

    #[test]
    fn reported_correlation_matches_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pool = musa_pool(8, 4, &qpsk_half(), 16, &mut rng).unwrap();
        let mut worst: f64 = 0.0;
        for (i, a) in pool.sequences.iter().enumerate() {
            let e: f64 = a.iter().map(|c| c.norm_sqr()).sum();
            assert!((e - 1.0).abs() < 1e-12);
            for b in &pool.sequences[i + 1..] {
                let mut dot = Complex64::new(0.0, 0.0);
                for k in 0..4 {
                    dot += a[k].conj() * b[k];
                }
                worst = worst.max(dot.norm());
            }
        }
        assert!((worst - pool.max_cross_correlation).abs() < 1e-12);
        assert!(pool.max_cross_correlation < 1.0);
    }

    #[test]
    fn errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(musa_pool(2, 4, &[], 1, &mut rng).unwrap_err(), NomaError::EmptyAlphabet);
        assert_eq!(musa_pool(0, 4, &qpsk_half(), 1, &mut rng).unwrap_err(), NomaError::EmptyPool);
        let zero = [Complex64::new(0.0, 0.0)];
        assert!(musa_pool(2, 3, &zero, 1, &mut rng).is_err());
    }
}
