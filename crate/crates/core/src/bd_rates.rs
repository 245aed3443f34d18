//! Closed-form maximum-likelihood estimates of shared birth and death rates.

use crate::error::{Error, Result};
use crate::model::EventHistory;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEstimate {
    pub lambda_hat: f64,
    pub mu_hat: f64,
    /// Integrated population size over the observation window.
    pub exposure: f64,
    pub birth_count: usize,
    pub death_count: usize,
}

/// `∫ N(t) dt` over `[t0, t_end]`, including the interval after the last event.
pub fn integrated_exposure(history: &EventHistory) -> f64 {
    (0..=history.n_events())
        .map(|e| history.population(e) as f64 * history.interval(e))
        .sum()
}

/// Births and deaths per unit of exposure.
pub fn estimate_rates(history: &EventHistory) -> Result<RateEstimate> {
    let exposure = integrated_exposure(history);
    if !(exposure > 0.0) {
        return Err(Error::Estimation(
            "zero population exposure: no individual is ever alive in the window".into(),
        ));
    }
    let birth_count = history.n_births();
    let death_count = history.n_deaths();
    Ok(RateEstimate {
        lambda_hat: birth_count as f64 / exposure,
        mu_hat: death_count as f64 / exposure,
        exposure,
        birth_count,
        death_count,
    })
}
