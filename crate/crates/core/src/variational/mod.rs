//! The structured variational family: memberships, community-size marginals at every
//! event, and the size transitions linking consecutive events.

pub mod birth;
pub mod death;
pub mod pmf;

pub use birth::{newborn_delta, solve_birth_transition, up_probability, BirthSolution};
pub use death::{
    death_bounds, down_probability, parametric_bounds, project_death_targets,
    solve_death_transition, DeathSolution,
};
pub use pmf::{expected_size, initial_size_marginals, poisson_binomial_pmf, propagate_marginal};

use crate::data::PairStats;
use crate::util::xlogy;

/// Size transitions attached to one event.
#[derive(Clone, Debug, PartialEq)]
pub enum Transition {
    Birth {
        /// `ln(rho)` of the birth solve.
        log_rho: f64,
        /// `up[k][n]`, `n = 0..=N_prev`.
        up: Vec<Vec<f64>>,
    },
    Death {
        /// One multiplier per community.
        rho: Vec<f64>,
        /// `down[k][m]`, `m = 0..=N_prev`.
        down: Vec<Vec<f64>>,
    },
}

/// Variational posterior over labels and community sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationalState {
    k: usize,
    /// Row-major `n_individuals x k`, rows in dense-index order.
    pub(crate) delta: Vec<f64>,
    /// `marginals[layer][k]`: size pmf after `layer` events.
    pub(crate) marginals: Vec<Vec<Vec<f64>>>,
    pub(crate) transitions: Vec<Transition>,
}

impl VariationalState {
    /// A state holding only memberships; marginals and transitions are filled by a
    /// forward pass.
    pub(crate) fn from_delta(k: usize, delta: Vec<f64>) -> Self {
        VariationalState {
            k,
            delta,
            marginals: Vec::new(),
            transitions: Vec::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_individuals(&self) -> usize {
        self.delta.len() / self.k
    }

    /// Membership row of the individual with dense index `i`.
    pub fn delta(&self, i: usize) -> &[f64] {
        &self.delta[i * self.k..(i + 1) * self.k]
    }

    pub fn delta_matrix(&self) -> &[f64] {
        &self.delta
    }

    /// Size pmf of community `k` after `layer` events.
    pub fn marginal(&self, layer: usize, k: usize) -> &[f64] {
        &self.marginals[layer][k]
    }

    pub fn marginals(&self, layer: usize) -> &[Vec<f64>] {
        &self.marginals[layer]
    }

    pub fn n_layers(&self) -> usize {
        self.marginals.len()
    }

    pub fn transition(&self, e: usize) -> &Transition {
        &self.transitions[e]
    }

    /// `sum_k E[size_k]` after `layer` events.
    pub fn expected_population(&self, layer: usize) -> f64 {
        self.marginals[layer].iter().map(|g| expected_size(g)).sum()
    }
}

/// For each community `c`, the expected log-probability of all edge observations of
/// individual `i` if it belonged to `c`, with every partner weighted by its
/// current membership row:
/// `sum_j sum_k' delta(j,k') [s_ij ln pi[c][k'] + (c_ij - s_ij) ln(1 - pi[c][k'])]`.
pub fn membership_field(
    i: usize,
    delta: &[f64],
    k: usize,
    pairs: &PairStats,
    pi: &[Vec<f64>],
    out: &mut [f64],
) {
    let mut linked = vec![0.0; k];
    let mut unlinked = vec![0.0; k];
    for obs in pairs.neighbors(i) {
        let row = &delta[obs.partner * k..(obs.partner + 1) * k];
        let s = obs.links as f64;
        let f = (obs.slots - obs.links) as f64;
        for c in 0..k {
            linked[c] += row[c] * s;
            unlinked[c] += row[c] * f;
        }
    }
    for (c, o) in out.iter_mut().enumerate() {
        *o = (0..k)
            .map(|c2| xlogy(linked[c2], pi[c][c2]) + xlogy(unlinked[c2], 1.0 - pi[c][c2]))
            .sum();
    }
}
