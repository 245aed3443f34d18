//! Choosing the number of communities with the integrated completed likelihood.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::init::{initialize, InitOptions};
use crate::model::complete_log_likelihood;
use crate::vem::{fit, starting_params, FitOptions, FitResult};

/// `-(K - 1)/2 ln N0 - K(K + 1)/4 ln(total co-presence slots)`.
pub fn icl_penalty(k: usize, n0: usize, total_slots: u64) -> f64 {
    let k = k as f64;
    -0.5 * (k - 1.0) * (n0 as f64).ln() - 0.5 * (k * (k + 1.0) / 2.0) * (total_slots as f64).ln()
}

/// Complete-data log-likelihood at the fitted parameters and MAP labels, minus the
/// penalty for the proportions and block probabilities (rates are not penalized).
pub fn icl(fit: &FitResult, data: &Dataset) -> Result<f64> {
    let total = data.pairs().total_slots();
    if total == 0 {
        return Err(Error::Selection(
            "no pair of individuals is ever observed together".into(),
        ));
    }
    let loglik = complete_log_likelihood(&fit.params, &fit.map_labels, data)?;
    Ok(loglik + icl_penalty(fit.params.k(), data.history().n_initial(), total))
}

/// Initializes with k-means on the similarity rows, then runs variational EM.
pub fn fit_from_scratch(
    data: &Dataset,
    k: usize,
    init: &InitOptions,
    options: &FitOptions,
) -> Result<FitResult> {
    let start = initialize(data, k, init)?;
    let params = starting_params(data, start.params.beta, start.params.pi, options.rate_mode)?;
    fit(data, start.delta, params, options)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectOptions {
    pub k_range: Vec<usize>,
    pub n_inits: usize,
    /// Initialization `s` uses seed `base_seed + s` for every K.
    pub base_seed: u64,
    pub fit: FitOptions,
    pub init: InitOptions,
}

/// Outcome of one (K, seed) fit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IclCell {
    pub k: usize,
    pub seed: u64,
    pub elbo: f64,
    pub icl: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellFailure {
    pub k: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IclTable {
    /// Successful cells, ordered by K then seed.
    pub cells: Vec<IclCell>,
    pub failures: Vec<CellFailure>,
    /// Highest ICL per K (K without any successful cell are omitted).
    pub best_per_k: Vec<(usize, f64)>,
    /// For each K, how many seeds had their highest ICL at that K.
    pub histogram: Vec<(usize, usize)>,
    pub selected_k: usize,
}

fn run_cell(data: &Dataset, k: usize, seed: u64, options: &SelectOptions) -> Result<IclCell> {
    let init_opts = InitOptions {
        seed,
        ..options.init.clone()
    };
    let fit_opts = FitOptions {
        seed,
        ..options.fit.clone()
    };
    let result = fit_from_scratch(data, k, &init_opts, &fit_opts)?;
    Ok(IclCell {
        k,
        seed,
        elbo: result.elbo,
        icl: icl(&result, data)?,
        iterations: result.diagnostics.iterations,
        converged: result.diagnostics.converged,
    })
}

/// Fits every (K, seed) combination, in parallel, and aggregates deterministically.
/// Failing cells are recorded rather than aborting the sweep.
pub fn select_k(data: &Dataset, options: &SelectOptions) -> Result<IclTable> {
    if options.k_range.is_empty() || options.n_inits == 0 {
        return Err(Error::Selection(
            "empty K range or no initializations".into(),
        ));
    }
    let mut k_range = options.k_range.clone();
    k_range.sort_unstable();
    k_range.dedup();
    let jobs: Vec<(usize, u64)> = k_range
        .iter()
        .flat_map(|&k| (0..options.n_inits as u64).map(move |s| (k, options.base_seed + s)))
        .collect();
    let outcomes: Vec<Result<IclCell>> = jobs
        .par_iter()
        .map(|&(k, seed)| run_cell(data, k, seed, options))
        .collect();

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for ((k, seed), outcome) in jobs.into_iter().zip(outcomes) {
        match outcome {
            Ok(cell) => cells.push(cell),
            Err(e) => failures.push(CellFailure {
                k,
                seed,
                message: e.to_string(),
            }),
        }
    }

    let best_per_k: Vec<(usize, f64)> = k_range
        .iter()
        .filter_map(|&k| {
            cells
                .iter()
                .filter(|c| c.k == k && !c.icl.is_nan())
                .map(|c| c.icl)
                .fold(None, |acc: Option<f64>, v| {
                    Some(acc.map_or(v, |a| a.max(v)))
                })
                .map(|best| (k, best))
        })
        .collect();
    let selected_k = argmax_smallest(&best_per_k).ok_or_else(|| {
        Error::Selection(format!("every fit failed ({} failures)", failures.len()))
    })?;

    let mut histogram: Vec<(usize, usize)> = k_range.iter().map(|&k| (k, 0)).collect();
    for s in 0..options.n_inits as u64 {
        let seed = options.base_seed + s;
        let per_k: Vec<(usize, f64)> = cells
            .iter()
            .filter(|c| c.seed == seed && !c.icl.is_nan())
            .map(|c| (c.k, c.icl))
            .collect();
        if let Some(k) = argmax_smallest(&per_k) {
            if let Some(entry) = histogram.iter_mut().find(|(kk, _)| *kk == k) {
                entry.1 += 1;
            }
        }
    }

    Ok(IclTable {
        cells,
        failures,
        best_per_k,
        histogram,
        selected_k,
    })
}

/// K with the largest value; entries are in increasing K so ties keep the smaller K.
fn argmax_smallest(values: &[(usize, f64)]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &(k, v) in values {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best.map(|(k, _)| k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalty_arithmetic() {
        let p = icl_penalty(2, 100, 10_000);
        let expected = -0.5 * 100f64.ln() - 1.5 * 10_000f64.ln();
        assert!((p - expected).abs() < 1e-12);
        assert!((p - (-16.118_095_650_958_32)).abs() < 1e-9);
        assert!((icl_penalty(1, 50, 400) + 0.5 * 400f64.ln()).abs() < 1e-12);
        for k in 1..10 {
            assert!(icl_penalty(k + 1, 30, 900) < icl_penalty(k, 30, 900));
        }
    }

    #[test]
    fn ties_go_to_smaller_k() {
        assert_eq!(argmax_smallest(&[(2, 1.0), (3, 1.0), (4, 0.5)]), Some(2));
        assert_eq!(argmax_smallest(&[]), None);
    }
}
