//! Community-size distributions: the Poisson-binomial start and event-wise propagation.

use crate::error::{Error, Result};
use crate::model::EventKind;

/// Exact pmf of a sum of independent Bernoulli trials, inserted one trial at a time.
pub fn poisson_binomial_pmf(success_probs: &[f64]) -> Vec<f64> {
    let mut pmf = Vec::with_capacity(success_probs.len() + 1);
    pmf.push(1.0);
    for &p in success_probs {
        let q = 1.0 - p;
        pmf.push(0.0);
        for n in (1..pmf.len()).rev() {
            pmf[n] = pmf[n] * q + pmf[n - 1] * p;
        }
        pmf[0] *= q;
    }
    pmf
}

/// Size pmf of each community among the initial individuals.
///
/// `delta_v0` holds one length-`k` membership row per initial individual.
pub fn initial_size_marginals(delta_v0: &[&[f64]], k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|c| {
            let probs: Vec<f64> = delta_v0.iter().map(|row| row[c]).collect();
            poisson_binomial_pmf(&probs)
        })
        .collect()
}

/// Pushes a size pmf through one event.
///
/// At a birth `moves[n]` is the probability of growing from `n` to `n + 1`; at a death
/// it is the probability of shrinking from `n` to `n - 1`. Both have the length of
/// `prev`. The result has one more (birth) or one fewer (death) entry than `prev`.
pub fn propagate_marginal(prev: &[f64], moves: &[f64], kind: EventKind) -> Result<Vec<f64>> {
    if moves.len() != prev.len() {
        return Err(Error::input("transition and marginal lengths differ"));
    }
    if moves.iter().any(|m| !(0.0..=1.0).contains(m)) {
        return Err(Error::input("transition probabilities must lie in [0, 1]"));
    }
    Ok(match kind {
        EventKind::Birth => propagate_birth(prev, moves),
        EventKind::Death => {
            if prev.len() < 2 {
                return Err(Error::input("death from an empty population"));
            }
            propagate_death(prev, moves)
        }
    })
}

pub(crate) fn propagate_birth(prev: &[f64], up: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; prev.len() + 1];
    for (n, (&g, &u)) in prev.iter().zip(up).enumerate() {
        out[n] += g * (1.0 - u);
        out[n + 1] += g * u;
    }
    out
}

pub(crate) fn propagate_death(prev: &[f64], down: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; prev.len() - 1];
    for (n, (&g, &d)) in prev.iter().zip(down).enumerate() {
        if n < out.len() {
            out[n] += g * (1.0 - d);
        }
        if n > 0 {
            out[n - 1] += g * d;
        }
    }
    out
}

/// `sum_n n * pmf[n]`.
pub fn expected_size(pmf: &[f64]) -> f64 {
    pmf.iter().enumerate().map(|(n, &g)| n as f64 * g).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enumerate_subsets(p: &[f64]) -> Vec<f64> {
        let n = p.len();
        let mut pmf = vec![0.0; n + 1];
        for mask in 0u32..(1 << n) {
            let mut prob = 1.0;
            for (i, &pi) in p.iter().enumerate() {
                prob *= if mask & (1 << i) != 0 { pi } else { 1.0 - pi };
            }
            pmf[mask.count_ones() as usize] += prob;
        }
        pmf
    }

    #[test]
    fn poisson_binomial_examples() {
        assert_eq!(poisson_binomial_pmf(&[]), vec![1.0]);
        assert_eq!(poisson_binomial_pmf(&[0.5, 0.5]), vec![0.25, 0.5, 0.25]);
        let p = [0.2, 0.7, 0.9];
        let dp = poisson_binomial_pmf(&p);
        for (a, b) in dp.iter().zip(enumerate_subsets(&p)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn initial_marginals_examples() {
        let one_hot = [1.0, 0.0];
        let rows: Vec<&[f64]> = vec![&one_hot; 3];
        let m = initial_size_marginals(&rows, 2);
        assert_eq!(m[0], vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(m[1], vec![1.0, 0.0, 0.0, 0.0]);
        let half = [0.5, 0.5];
        let m = initial_size_marginals(&[&half, &half], 2);
        assert_eq!(m[0], vec![0.25, 0.5, 0.25]);
        assert_eq!(m[1], vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn propagation_trivial_cases() {
        let g = [0.1, 0.2, 0.3, 0.4];
        let stay = propagate_marginal(&g, &[0.0; 4], EventKind::Birth).unwrap();
        assert_eq!(stay, vec![0.1, 0.2, 0.3, 0.4, 0.0]);
        let shift = propagate_marginal(&g, &[1.0; 4], EventKind::Birth).unwrap();
        assert_eq!(shift, vec![0.0, 0.1, 0.2, 0.3, 0.4]);
        assert!(propagate_marginal(&g, &[1.5, 0.0, 0.0, 0.0], EventKind::Birth).is_err());
        assert!(propagate_marginal(&g, &[0.0; 3], EventKind::Death).is_err());
    }

    #[test]
    fn propagation_matches_dense_matrix_product() {
        let g = [0.05, 0.15, 0.3, 0.25, 0.25];
        let moves = [0.0, 0.3, 0.55, 0.8, 1.0];
        for kind in [EventKind::Birth, EventKind::Death] {
            let out_len = if kind == EventKind::Birth {
                g.len() + 1
            } else {
                g.len() - 1
            };
            let mut matrix = vec![vec![0.0; g.len()]; out_len];
            for n in 0..g.len() {
                let target = if kind == EventKind::Birth {
                    n + 1
                } else {
                    n.wrapping_sub(1)
                };
                if n < out_len {
                    matrix[n][n] += 1.0 - moves[n];
                }
                if target < out_len {
                    matrix[target][n] += moves[n];
                }
            }
            let oracle: Vec<f64> = matrix
                .iter()
                .map(|row| row.iter().zip(&g).map(|(a, b)| a * b).sum())
                .collect();
            let out = propagate_marginal(&g, &moves, kind).unwrap();
            for (a, b) in out.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
