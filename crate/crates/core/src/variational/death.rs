//! Size transitions at a death event.
//!
//! A community of size `m` loses the dying individual with probability
//! `rho (m - 1) / (1 + rho (m - 1))`, a per-community multiplier `rho` being chosen so
//! that the expected loss equals the dying individual's membership probability.
//! An empty community cannot shrink and a community holding the whole population
//! always does. Under this form a singleton never shrinks, so targets above what
//! `rho = inf` reaches are met by letting singletons shrink with the probability
//! that covers the remainder; this makes every target up to `1 - g(0)` reachable.

use crate::bisect::{bisect_monotone, RHO_MAX, RHO_MIN};

#[derive(Clone, Debug, PartialEq)]
pub struct DeathSolution {
    /// `rho`, possibly `0` or `+inf` at the ends of the feasible range.
    pub rho: f64,
    /// Shrink probability of a singleton community; nonzero only when `rho = inf`.
    pub singleton_down: f64,
    /// `down[m]`: probability that a community of size `m` shrinks, `m = 0..=N_prev`.
    pub down: Vec<f64>,
    /// Expected loss minus target.
    pub residual: f64,
    pub iterations: usize,
}

#[inline]
pub fn down_probability(m: usize, n_prev: usize, rho: f64) -> f64 {
    if m == 0 {
        0.0
    } else if m >= n_prev {
        1.0
    } else if m == 1 || rho == 0.0 {
        0.0
    } else if rho == f64::INFINITY {
        1.0
    } else {
        let x = rho * (m - 1) as f64;
        x / (1.0 + x)
    }
}

/// Smallest and largest expected loss reachable by varying `rho` over `[0, inf]`.
pub fn parametric_bounds(prev: &[f64]) -> (f64, f64) {
    let n_prev = prev.len() - 1;
    let floor = prev[n_prev];
    let interior: f64 = if n_prev > 2 {
        prev[2..n_prev].iter().sum()
    } else {
        0.0
    };
    (floor, floor + interior)
}

/// Smallest and largest reachable expected loss, singleton deaths included.
pub fn death_bounds(prev: &[f64]) -> (f64, f64) {
    let n_prev = prev.len() - 1;
    let (floor, cap) = parametric_bounds(prev);
    let singleton = if n_prev > 1 { prev[1] } else { 0.0 };
    (floor, cap + singleton)
}

/// Expected loss `sum_m down(m) g(m)` at `rho = e^u`.
pub fn death_constraint(log_rho: f64, prev: &[f64]) -> f64 {
    let n_prev = prev.len() - 1;
    let mut total = prev[n_prev];
    for m in 2..n_prev {
        if prev[m] != 0.0 {
            total += prev[m] / (1.0 + (-log_rho - ((m - 1) as f64).ln()).exp());
        }
    }
    total
}

/// Solves for the multiplier of one community at one death. Targets outside the
/// reachable range are clamped to it (the residual then reports the gap).
pub fn solve_death_transition(target: f64, prev: &[f64]) -> DeathSolution {
    let n_prev = prev.len() - 1;
    let (floor, cap) = parametric_bounds(prev);
    let mut singleton_down = 0.0;
    let (rho, iterations) = if target <= floor {
        (0.0, 0)
    } else if target >= cap {
        if n_prev > 1 && prev[1] > 0.0 {
            singleton_down = ((target - cap) / prev[1]).min(1.0);
        }
        (f64::INFINITY, 0)
    } else {
        let root = bisect_monotone(
            |u| death_constraint(u, prev),
            target,
            RHO_MIN.ln(),
            RHO_MAX.ln(),
            true,
        );
        (root.x.exp(), root.iterations)
    };
    let mut down: Vec<f64> = (0..=n_prev)
        .map(|m| down_probability(m, n_prev, rho))
        .collect();
    if n_prev > 1 {
        down[1] = singleton_down;
    }
    let loss: f64 = down.iter().zip(prev).map(|(d, g)| d * g).sum();
    DeathSolution {
        rho,
        singleton_down,
        down,
        residual: loss - target,
        iterations,
    }
}

/// Moves the per-community targets into their reachable ranges while keeping their
/// sum at one, shifting mass in proportion to the remaining room of each community.
/// Returns the projected targets and whether anything had to move.
pub fn project_death_targets(targets: &[f64], bounds: &[(f64, f64)]) -> (Vec<f64>, bool) {
    let mut out: Vec<f64> = targets
        .iter()
        .zip(bounds)
        .map(|(&t, &(lo, hi))| t.clamp(lo, hi.max(lo)))
        .collect();
    let mut moved = out.iter().zip(targets).any(|(a, b)| (a - b).abs() > 1e-12);
    let excess = 1.0 - out.iter().sum::<f64>();
    if excess.abs() > 1e-15 {
        let room: Vec<f64> = out
            .iter()
            .zip(bounds)
            .map(|(&t, &(lo, hi))| if excess > 0.0 { hi - t } else { t - lo }.max(0.0))
            .collect();
        let total_room: f64 = room.iter().sum();
        if total_room > 0.0 {
            let share = (excess.abs() / total_room).min(1.0);
            for (t, r) in out.iter_mut().zip(&room) {
                *t += excess.signum() * share * r;
            }
        }
        moved |= excess.abs() > 1e-12;
    }
    (out, moved)
}
