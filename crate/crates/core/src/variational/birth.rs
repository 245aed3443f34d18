//! Size transitions at a birth event.
//!
//! With per-community log-weights `w_k` and multiplier `rho`, a community of size
//! `n` (with `1 <= n < N_prev`) receives the newborn with probability
//! `n e^{w_k} / (rho + n e^{w_k})`. An empty community never does, and a community
//! holding the whole population always does. `rho` is fixed by requiring the
//! expected number of communities that grow to be exactly one.

use crate::bisect::{bisect_monotone, RHO_MAX, RHO_MIN};

/// Solution of one birth-event solve.
#[derive(Clone, Debug, PartialEq)]
pub struct BirthSolution {
    /// `ln(rho)`, on the scale of the log-weights that were passed in.
    pub log_rho: f64,
    /// `up[k][n]`: probability that community `k` of size `n` grows, `n = 0..=N_prev`.
    pub up: Vec<Vec<f64>>,
    /// `f(rho) - 1`.
    pub residual: f64,
    pub iterations: usize,
    /// Every log-weight was `-inf`; uniform weights were used instead.
    pub degenerate_weights: bool,
}

/// Growth probability of a community of size `n` when the population has `n_prev` members.
#[inline]
pub fn up_probability(n: usize, n_prev: usize, log_weight: f64, log_rho: f64) -> f64 {
    if n == 0 {
        0.0
    } else if n >= n_prev {
        1.0
    } else if log_weight == f64::NEG_INFINITY || log_rho == f64::INFINITY {
        0.0
    } else {
        1.0 / (1.0 + (log_rho - (n as f64).ln() - log_weight).exp())
    }
}

/// The constraint function `f(rho) = sum_k sum_n up(k, n) g_k(n)`, evaluated at `ln(rho)`.
pub fn birth_constraint(log_rho: f64, log_weights: &[f64], prev: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (&w, g) in log_weights.iter().zip(prev) {
        let n_prev = g.len() - 1;
        for (n, &gn) in g.iter().enumerate().skip(1) {
            if gn != 0.0 {
                total += up_probability(n, n_prev, w, log_rho) * gn;
            }
        }
    }
    total
}

/// Finds `rho` for one birth event and returns the resulting growth probabilities.
///
/// `prev[k]` is the size pmf of community `k` just before the birth, each of length
/// `N_prev + 1`. Fails when the growth mass cannot reach one for any `rho`, which
/// only happens when the marginals have leaked mass or every populated community
/// carries a `-inf` weight.
pub fn solve_birth_transition(
    log_weights: &[f64],
    prev: &[Vec<f64>],
) -> std::result::Result<BirthSolution, String> {
    let k = log_weights.len();
    if k == 0 || prev.len() != k {
        return Err("one size pmf per community is required".into());
    }
    let n_prev = prev[0].len() - 1;
    if n_prev == 0 {
        return Err("birth in an empty population".into());
    }
    if prev.iter().any(|g| g.len() != n_prev + 1) {
        return Err("size pmfs disagree on the population size".into());
    }

    let degenerate_weights = log_weights.iter().all(|w| !(*w > f64::NEG_INFINITY));
    let weights: Vec<f64> = if degenerate_weights {
        vec![0.0; k]
    } else {
        log_weights
            .iter()
            .map(|&w| if w.is_nan() { f64::NEG_INFINITY } else { w })
            .collect()
    };

    let forced: f64 = prev.iter().map(|g| g[n_prev]).sum();
    let reachable: f64 = forced
        + weights
            .iter()
            .zip(prev)
            .filter(|(w, _)| w.is_finite())
            .map(|(_, g)| g[1..n_prev].iter().sum::<f64>())
            .sum::<f64>();
    if reachable < 1.0 - 1e-9 {
        return Err(format!(
            "growth mass {reachable:.3e} cannot reach one (degenerate weights: {degenerate_weights})"
        ));
    }

    let finite = weights.iter().copied().filter(|w| w.is_finite());
    let w_min = finite.clone().fold(f64::INFINITY, f64::min);
    let w_max = finite.fold(f64::NEG_INFINITY, f64::max);
    let lo = w_min + RHO_MIN.ln();
    let hi = w_max + (n_prev as f64).ln() + RHO_MAX.ln();

    let (log_rho, residual, iterations) = if n_prev == 1 || reachable == forced {
        // No interior sizes carry mass: f does not depend on rho.
        (f64::INFINITY, forced - 1.0, 0)
    } else if forced >= 1.0 {
        (hi, birth_constraint(hi, &weights, prev) - 1.0, 0)
    } else {
        let root = bisect_monotone(|u| birth_constraint(u, &weights, prev), 1.0, lo, hi, false);
        (root.x, root.residual, root.iterations)
    };

    let up = weights
        .iter()
        .zip(prev)
        .map(|(&w, g)| {
            (0..g.len())
                .map(|n| up_probability(n, n_prev, w, log_rho))
                .collect()
        })
        .collect();
    Ok(BirthSolution {
        log_rho,
        up,
        residual,
        iterations,
        degenerate_weights,
    })
}

/// Membership of the newborn implied by the growth probabilities:
/// `delta(k) = sum_{n >= 1} up(k, n) g_k(n)`.
pub fn newborn_delta(up: &[Vec<f64>], prev: &[Vec<f64>]) -> Vec<f64> {
    up.iter()
        .zip(prev)
        .map(|(u, g)| u.iter().zip(g).skip(1).map(|(a, b)| a * b).sum())
        .collect()
}
