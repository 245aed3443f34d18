//! Variational EM: the evidence lower bound, the VE and VM steps, and the fitting loop.

use crate::bd_rates::estimate_rates;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{EventKind, LabelAssignment, ModelParams, RateMode, Rates};
use crate::util::{normalize_log_weights, weighted, xlogx, xlogy};
use crate::variational::{
    birth::newborn_delta, death::death_bounds, expected_size, initial_size_marginals,
    membership_field, pmf::propagate_birth, pmf::propagate_death, project_death_targets,
    solve_birth_transition, solve_death_transition, Transition, VariationalState,
};

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop once `|ELBO_t - ELBO_{t-1}| / |ELBO_t|` falls below this.
    pub elbo_rel_tolerance: f64,
    /// Fixed-point sweeps over the initial individuals per VE step.
    pub fixed_point_sweeps: usize,
    pub seed: u64,
    pub rate_mode: RateMode,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 100,
            elbo_rel_tolerance: 1e-6,
            fixed_point_sweeps: 1,
            seed: 0,
            rate_mode: RateMode::Shared,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.elbo_rel_tolerance > 0.0) {
            return Err(Error::input("ELBO tolerance must be positive"));
        }
        if self.fixed_point_sweeps == 0 {
            return Err(Error::input("at least one fixed-point sweep is required"));
        }
        Ok(())
    }
}

/// Counters collected while fitting.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub elbo_decreases: usize,
    /// Death events whose membership targets had to be moved into the reachable range.
    pub clamped_death_targets: usize,
    pub solver_iterations: usize,
    /// Membership rows with no finite log-weight, replaced by uniform rows.
    pub degenerate_memberships: usize,
    /// Birth events whose log-weights were all `-inf`.
    pub degenerate_birth_weights: usize,
    /// Blocks with no co-presence mass that kept their previous edge probability.
    pub empty_blocks: usize,
    /// Communities whose per-community rate kept its previous value for lack of exposure.
    pub empty_rate_exposures: usize,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub params: ModelParams,
    pub state: VariationalState,
    /// ELBO of the starting point followed by one value per iteration.
    pub elbo_trace: Vec<f64>,
    /// ELBO of the returned state.
    pub elbo: f64,
    pub map_labels: LabelAssignment,
    pub diagnostics: Diagnostics,
}

/// Log-weights of the newborn at a birth: its membership field plus, with
/// per-community rates, `ln lambda_k` and `ln mu_k` if it later dies.
pub fn log_pair_weights(i: usize, delta: &[f64], params: &ModelParams, data: &Dataset) -> Vec<f64> {
    let k = params.k();
    let mut out = vec![0.0; k];
    membership_field(i, delta, k, data.pairs(), &params.pi, &mut out);
    if let Rates::PerCommunity { lambda, mu } = &params.rates {
        let dies = data.history().lifespan(i).dies;
        for c in 0..k {
            out[c] += lambda[c].ln();
            if dies {
                out[c] += mu[c].ln();
            }
        }
    }
    out
}

/// New membership row of an initial individual given everybody else's rows.
/// Returns the row and whether the uniform fallback was used.
pub fn update_initial_delta(
    i: usize,
    delta: &[f64],
    params: &ModelParams,
    data: &Dataset,
) -> (Vec<f64>, bool) {
    let k = params.k();
    let mut log_w = vec![0.0; k];
    membership_field(i, delta, k, data.pairs(), &params.pi, &mut log_w);
    let dies = data.history().lifespan(i).dies;
    for c in 0..k {
        log_w[c] += params.beta[c].ln();
        if dies && params.rate_mode() == RateMode::PerCommunity {
            log_w[c] += params.mu(c).ln();
        }
    }
    let mut row = vec![0.0; k];
    match normalize_log_weights(&log_w, &mut row) {
        Some(()) => (row, false),
        None => (vec![1.0 / k as f64; k], true),
    }
}

/// Recomputes the size marginals from the current initial memberships and runs one
/// chronological pass over the events, solving every transition and updating the
/// memberships of newborns.
pub fn forward_pass(
    state: &mut VariationalState,
    params: &ModelParams,
    data: &Dataset,
    diag: &mut Diagnostics,
) -> Result<()> {
    let history = data.history();
    let k = state.k();
    let n0 = history.n_initial();
    let rows: Vec<&[f64]> = (0..n0).map(|i| state.delta(i)).collect();
    let mut layer = initial_size_marginals(&rows, k);
    let mut marginals = Vec::with_capacity(history.n_events() + 1);
    let mut transitions = Vec::with_capacity(history.n_events());

    for (e, ev) in history.events().iter().enumerate() {
        let i = history.subject(e);
        let next = match ev.kind {
            EventKind::Birth => {
                let log_w = log_pair_weights(i, &state.delta, params, data);
                let sol = solve_birth_transition(&log_w, &layer)
                    .map_err(|message| Error::Solver { event: e, message })?;
                diag.solver_iterations += sol.iterations;
                if sol.degenerate_weights {
                    diag.degenerate_birth_weights += 1;
                }
                let mut row = newborn_delta(&sol.up, &layer);
                let total: f64 = row.iter().sum();
                if total > 0.0 {
                    row.iter_mut().for_each(|d| *d /= total);
                }
                state.delta[i * k..(i + 1) * k].copy_from_slice(&row);
                let next: Vec<Vec<f64>> = layer
                    .iter()
                    .zip(&sol.up)
                    .map(|(g, u)| propagate_birth(g, u))
                    .collect();
                transitions.push(Transition::Birth {
                    log_rho: sol.log_rho,
                    up: sol.up,
                });
                next
            }
            EventKind::Death => {
                let bounds: Vec<(f64, f64)> = layer.iter().map(|g| death_bounds(g)).collect();
                let (targets, moved) = project_death_targets(state.delta(i), &bounds);
                if moved {
                    diag.clamped_death_targets += 1;
                }
                let mut rho = Vec::with_capacity(k);
                let mut down = Vec::with_capacity(k);
                let mut next = Vec::with_capacity(k);
                for (g, &t) in layer.iter().zip(&targets) {
                    let sol = solve_death_transition(t, g);
                    diag.solver_iterations += sol.iterations;
                    next.push(propagate_death(g, &sol.down));
                    rho.push(sol.rho);
                    down.push(sol.down);
                }
                transitions.push(Transition::Death { rho, down });
                next
            }
        };
        marginals.push(std::mem::replace(&mut layer, next));
    }
    marginals.push(layer);
    state.marginals = marginals;
    state.transitions = transitions;
    Ok(())
}

/// Builds a full state from membership rows: size marginals and transitions come
/// from one forward pass under `params`; newborn rows are overwritten by it.
pub fn initial_state(
    data: &Dataset,
    params: &ModelParams,
    delta: Vec<f64>,
    diag: &mut Diagnostics,
) -> Result<VariationalState> {
    let k = params.k();
    if delta.len() != data.history().n_individuals() * k {
        return Err(Error::input("membership matrix does not match the data"));
    }
    let mut state = VariationalState::from_delta(k, delta);
    forward_pass(&mut state, params, data, diag)?;
    Ok(state)
}

/// Fixed-point sweeps over the initial individuals (in id order), then one forward pass.
pub fn ve_step(
    state: &mut VariationalState,
    params: &ModelParams,
    data: &Dataset,
    options: &FitOptions,
    diag: &mut Diagnostics,
) -> Result<()> {
    let k = state.k();
    for _ in 0..options.fixed_point_sweeps {
        for i in 0..data.history().n_initial() {
            let (row, degenerate) = update_initial_delta(i, &state.delta, params, data);
            if degenerate {
                diag.degenerate_memberships += 1;
            }
            state.delta[i * k..(i + 1) * k].copy_from_slice(&row);
        }
    }
    forward_pass(state, params, data, diag)
}

/// `sum_e Delta_e E[size_k]` over all inter-event intervals, including the tail.
pub fn expected_exposure(state: &VariationalState, data: &Dataset) -> Vec<f64> {
    let history = data.history();
    let mut out = vec![0.0; state.k()];
    for layer in 0..=history.n_events() {
        let dt = history.interval(layer);
        for (c, o) in out.iter_mut().enumerate() {
            *o += dt * expected_size(state.marginal(layer, c));
        }
    }
    out
}

/// Closed-form parameter updates given the variational state.
pub fn vm_step(
    state: &VariationalState,
    data: &Dataset,
    previous: &ModelParams,
    rate_mode: RateMode,
    diag: &mut Diagnostics,
) -> Result<ModelParams> {
    let history = data.history();
    let k = state.k();
    let n0 = history.n_initial();
    if n0 == 0 {
        return Err(Error::Estimation("no initial individuals".into()));
    }

    let mut num = vec![vec![0.0; k]; k];
    let mut den = vec![vec![0.0; k]; k];
    let mut linked = vec![0.0; k];
    let mut slots = vec![0.0; k];
    for i in 0..history.n_individuals() {
        linked.iter_mut().for_each(|x| *x = 0.0);
        slots.iter_mut().for_each(|x| *x = 0.0);
        for obs in data.pairs().neighbors(i) {
            let row = state.delta(obs.partner);
            for c in 0..k {
                linked[c] += row[c] * obs.links as f64;
                slots[c] += row[c] * obs.slots as f64;
            }
        }
        let own = state.delta(i);
        for a in 0..k {
            for b in 0..k {
                num[a][b] += own[a] * linked[b];
                den[a][b] += own[a] * slots[b];
            }
        }
    }
    let mut pi = previous.pi.clone();
    for a in 0..k {
        for b in a..k {
            let n = num[a][b] + num[b][a];
            let d = den[a][b] + den[b][a];
            if d > 0.0 {
                let p = (n / d).clamp(0.0, 1.0);
                pi[a][b] = p;
                pi[b][a] = p;
            } else {
                diag.empty_blocks += 1;
            }
        }
    }

    let mut beta = vec![0.0; k];
    for i in 0..n0 {
        for (b, d) in beta.iter_mut().zip(state.delta(i)) {
            *b += d;
        }
    }
    let total: f64 = beta.iter().sum();
    beta.iter_mut().for_each(|b| *b /= total);

    let shared = estimate_rates(history)?;
    let rates = match rate_mode {
        RateMode::Shared => Rates::Shared {
            lambda: shared.lambda_hat,
            mu: shared.mu_hat,
        },
        RateMode::PerCommunity => {
            let exposure = expected_exposure(state, data);
            let mut births = vec![0.0; k];
            let mut deaths = vec![0.0; k];
            for (e, ev) in history.events().iter().enumerate() {
                let row = state.delta(history.subject(e));
                let acc = if ev.kind == EventKind::Birth {
                    &mut births
                } else {
                    &mut deaths
                };
                for c in 0..k {
                    acc[c] += row[c];
                }
            }
            let mut lambda = vec![0.0; k];
            let mut mu = vec![0.0; k];
            for c in 0..k {
                if exposure[c] > 0.0 {
                    lambda[c] = births[c] / exposure[c];
                    mu[c] = deaths[c] / exposure[c];
                } else {
                    diag.empty_rate_exposures += 1;
                    lambda[c] = previous.lambda(c);
                    mu[c] = previous.mu(c);
                }
            }
            Rates::PerCommunity { lambda, mu }
        }
    };
    ModelParams::new(rates, beta, pi)
}

/// Evidence lower bound of `state` under `params`.
pub fn elbo(state: &VariationalState, params: &ModelParams, data: &Dataset) -> f64 {
    let history = data.history();
    let k = state.k();
    let mut field = vec![0.0; k];

    let mut pair = 0.0;
    for i in 0..history.n_individuals() {
        membership_field(i, &state.delta, k, data.pairs(), &params.pi, &mut field);
        for (d, f) in state.delta(i).iter().zip(&field) {
            pair += weighted(*d, *f);
        }
    }
    pair *= 0.5;

    let mut initial = 0.0;
    for i in 0..history.n_initial() {
        for (c, &d) in state.delta(i).iter().enumerate() {
            initial += xlogy(d, params.beta[c]) - xlogx(d);
        }
    }

    let mut births = 0.0;
    for (e, ev) in history.events().iter().enumerate() {
        if ev.kind != EventKind::Birth {
            continue;
        }
        let Transition::Birth { up, .. } = state.transition(e) else {
            unreachable!("birth event without birth transitions")
        };
        for (c, u) in up.iter().enumerate() {
            let g = state.marginal(e, c);
            for n in 1..g.len() {
                if g[n] == 0.0 {
                    continue;
                }
                births += g[n] * u[n] * (n as f64).ln();
                births -= g[n] * (xlogx(u[n]) + xlogx(1.0 - u[n]));
            }
        }
    }

    let rates = match &params.rates {
        Rates::Shared { lambda, mu } => {
            let exposure = crate::bd_rates::integrated_exposure(history);
            xlogy(history.n_births() as f64, *lambda) + xlogy(history.n_deaths() as f64, *mu)
                - (lambda + mu) * exposure
        }
        Rates::PerCommunity { lambda, mu } => {
            let exposure = expected_exposure(state, data);
            let mut total: f64 = (0..k).map(|c| -(lambda[c] + mu[c]) * exposure[c]).sum();
            for (e, ev) in history.events().iter().enumerate() {
                let rates = if ev.kind == EventKind::Birth {
                    lambda
                } else {
                    mu
                };
                for (c, &d) in state.delta(history.subject(e)).iter().enumerate() {
                    total += xlogy(d, rates[c]);
                }
            }
            total
        }
    };

    pair + initial + births + rates
}

/// Most probable community of every individual; ties go to the lowest index.
pub fn map_labels(state: &VariationalState, data: &Dataset) -> LabelAssignment {
    let dense = map_dense(state);
    LabelAssignment::from_dense(state.k(), data.history(), &dense)
        .expect("one label per individual")
}

pub(crate) fn map_dense(state: &VariationalState) -> Vec<usize> {
    (0..state.n_individuals())
        .map(|i| argmax(state.delta(i)))
        .collect()
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = c;
        }
    }
    best
}

/// Largest deviation between expected and actual population over all layers.
pub fn mass_conservation_error(state: &VariationalState, data: &Dataset) -> f64 {
    (0..state.n_layers())
        .map(|layer| {
            (state.expected_population(layer) - data.history().population(layer) as f64).abs()
        })
        .fold(0.0, f64::max)
}

/// Starting parameters for a fit: shared rate estimates (replicated per community when
/// requested) with the given proportions and block probabilities.
pub fn starting_params(
    data: &Dataset,
    beta: Vec<f64>,
    pi: Vec<Vec<f64>>,
    rate_mode: RateMode,
) -> Result<ModelParams> {
    let est = estimate_rates(data.history())?;
    let k = beta.len();
    let rates = match rate_mode {
        RateMode::Shared => Rates::Shared {
            lambda: est.lambda_hat,
            mu: est.mu_hat,
        },
        RateMode::PerCommunity => Rates::PerCommunity {
            lambda: vec![est.lambda_hat; k],
            mu: vec![est.mu_hat; k],
        },
    };
    ModelParams::new(rates, beta, pi)
}

/// Runs variational EM from the given memberships and starting parameters.
///
/// The returned state and parameters are those with the highest ELBO seen; the
/// trace keeps every iterate.
pub fn fit(
    data: &Dataset,
    init_delta: Vec<f64>,
    init_params: ModelParams,
    options: &FitOptions,
) -> Result<FitResult> {
    options.validate()?;
    init_params.validate()?;
    if init_params.rate_mode() != options.rate_mode {
        return Err(Error::input(
            "starting parameters use a different rate mode",
        ));
    }
    let mut diag = Diagnostics::default();
    let mut params = init_params;
    let mut state = initial_state(data, &params, init_delta, &mut diag)?;
    let mut current = elbo(&state, &params, data);
    let mut trace = vec![current];
    let mut best = (current, state.clone(), params.clone());

    for _ in 0..options.max_iterations {
        ve_step(&mut state, &params, data, options, &mut diag)?;
        params = vm_step(&state, data, &params, options.rate_mode, &mut diag)?;
        let next = elbo(&state, &params, data);
        diag.iterations += 1;
        if next < current {
            diag.elbo_decreases += 1;
        }
        trace.push(next);
        if next > best.0 || best.0.is_nan() {
            best = (next, state.clone(), params.clone());
        }
        let change = (next - current).abs() / next.abs();
        current = next;
        if change < options.elbo_rel_tolerance {
            diag.converged = true;
            break;
        }
    }

    let (elbo_value, state, params) = best;
    let map_labels = map_labels(&state, data);
    Ok(FitResult {
        params,
        state,
        elbo_trace: trace,
        elbo: elbo_value,
        map_labels,
        diagnostics: diag,
    })
}
