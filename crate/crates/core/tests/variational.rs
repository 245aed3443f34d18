mod common;

use bdsbm::init::InitOptions;
use bdsbm::selection::fit_from_scratch;
use bdsbm::util::{xlogx, xlogy};
use bdsbm::variational::{
    down_probability, parametric_bounds, solve_death_transition, Transition, VariationalState,
};
use bdsbm::vem::{elbo, initial_state, Diagnostics, FitOptions};
use bdsbm::{Dataset, Event, EventHistory, EventKind, ModelParams, Rates, SnapshotSeries};

use common::{exact_log_likelihood, exposure_from_lifespans, high_signal};

/// The bound recomputed from the state's accessors, with the edge term taken from a
/// scan over every living pair at every snapshot.
fn elbo_by_scan(state: &VariationalState, params: &ModelParams, data: &Dataset) -> f64 {
    let history = data.history();
    let snaps = data.snapshots();
    let k = params.k();
    let mut total = 0.0;

    for (s, &t) in snaps.times().iter().enumerate() {
        let alive = history.alive_at(t);
        for (a, &i) in alive.iter().enumerate() {
            for &j in &alive[a + 1..] {
                let (x, y) = (history.id_of(i), history.id_of(j));
                let linked = snaps.edges(s).contains(&(x.min(y), x.max(y)));
                for c in 0..k {
                    for d in 0..k {
                        let p = params.pi[c][d];
                        let lp = if linked { p.ln() } else { (1.0 - p).ln() };
                        total += state.delta(i)[c] * state.delta(j)[d] * lp;
                    }
                }
            }
        }
    }

    for i in 0..history.n_initial() {
        for (c, &d) in state.delta(i).iter().enumerate() {
            total += xlogy(d, params.beta[c]) - xlogx(d);
        }
    }

    for (e, ev) in history.events().iter().enumerate() {
        if let (EventKind::Birth, Transition::Birth { up, .. }) = (ev.kind, state.transition(e)) {
            for c in 0..k {
                let g = state.marginal(e, c);
                for n in 1..g.len() {
                    let u = up[c][n];
                    total += g[n] * (u * (n as f64).ln() - xlogx(u) - xlogx(1.0 - u));
                }
            }
        }
    }

    let Rates::Shared { lambda, mu } = params.rates else {
        panic!("shared rates expected")
    };
    total + xlogy(history.n_births() as f64, lambda) + xlogy(history.n_deaths() as f64, mu)
        - (lambda + mu) * exposure_from_lifespans(history)
}

#[test]
fn elbo_matches_a_pairwise_scan() {
    for seed in 1..=3 {
        let sim = high_signal(0.03, 0.02, 15.0, seed);
        let data = Dataset::new(sim.history, sim.snapshots).unwrap();
        let options = FitOptions {
            max_iterations: 4,
            ..FitOptions::default()
        };
        let init = InitOptions {
            seed,
            ..InitOptions::default()
        };
        let fit = fit_from_scratch(&data, 4, &init, &options).unwrap();
        let direct = elbo(&fit.state, &fit.params, &data);
        let scan = elbo_by_scan(&fit.state, &fit.params, &data);
        assert!((direct - fit.elbo).abs() <= 1e-9 * direct.abs());
        assert!(
            (direct - scan).abs() <= 1e-9 * direct.abs(),
            "seed {seed}: {direct} vs {scan}"
        );
    }
}

/// Two founders with uniform memberships and one birth. The exact evidence counts the
/// newborn's community choice once; the bound adds a binary entropy per community,
/// which counts it twice and lands above the evidence by exactly `ln(2) / 2`.
#[test]
fn per_community_birth_entropies_overcount_the_newborn_choice() {
    let history = EventHistory::new(
        0.0,
        2.0,
        vec![0, 1],
        vec![Event {
            time: 1.0,
            kind: EventKind::Birth,
            id: 2,
        }],
    )
    .unwrap();
    let snaps = SnapshotSeries::new(vec![0.5], vec![vec![]]).unwrap();
    let params = ModelParams::shared(1.0, 0.0, vec![0.5, 0.5], vec![vec![0.5; 2]; 2]).unwrap();
    let data = Dataset::new(history, snaps).unwrap();
    let mut diag = Diagnostics::default();
    let state = initial_state(&data, &params, vec![0.5; 6], &mut diag).unwrap();

    let ln2 = 2f64.ln();
    let bound = elbo(&state, &params, &data);
    let exact = exact_log_likelihood(&params, data.history(), data.snapshots());
    // pair term -ln 2, rate term -5, newborn term 3 ln(2) / 2
    assert!((bound - (-ln2 - 5.0 + 1.5 * ln2)).abs() < 1e-12, "{bound}");
    assert!((exact - (-ln2 - 5.0 + ln2)).abs() < 1e-12, "{exact}");
    assert!((bound - exact - 0.5 * ln2).abs() < 1e-12);
}

#[test]
fn bound_holds_without_births() {
    for seed in 1..=10u64 {
        let sim = bdsbm::simulator::simulate(&bdsbm::simulator::SimConfig {
            params: ModelParams::shared(
                0.0,
                0.08,
                vec![0.5, 0.5],
                vec![vec![0.7, 0.2], vec![0.2, 0.6]],
            )
            .unwrap(),
            initial: bdsbm::simulator::InitialComposition::Sizes(vec![3, 3]),
            t0: 0.0,
            t_end: 6.0,
            snapshots: bdsbm::simulator::SnapshotSchedule::Uniform { step: 2.0 },
            seed,
        })
        .unwrap();
        let data = Dataset::new(sim.history, sim.snapshots).unwrap();
        let fit =
            fit_from_scratch(&data, 2, &InitOptions::default(), &FitOptions::default()).unwrap();
        let exact = exact_log_likelihood(&fit.params, data.history(), data.snapshots());
        assert!(
            fit.elbo <= exact + 1e-9,
            "seed {seed}: {} > {exact}",
            fit.elbo
        );
    }
}

#[test]
fn death_equation_changes_sign_once() {
    let n_prev = 10;
    let prev: Vec<f64> = (0..=n_prev)
        .map(|m| {
            let choose: f64 = (1..=m)
                .map(|j| (n_prev + 1 - j) as f64 / j as f64)
                .product();
            choose * 0.5f64.powi(n_prev as i32)
        })
        .collect();
    let target = 0.3;
    let (floor, cap) = parametric_bounds(&prev);
    assert!(floor < target && target < cap);

    let f = |rho: f64| -> f64 {
        (0..=n_prev)
            .map(|m| prev[m] * down_probability(m, n_prev, rho))
            .sum::<f64>()
            - target
    };
    let points = 1_000_000;
    let (lo, hi) = (-12.0f64, 12.0f64);
    let mut changes = Vec::new();
    let mut last = f((lo).exp());
    for p in 1..points {
        let rho = (lo + (hi - lo) * p as f64 / (points - 1) as f64).exp();
        let v = f(rho);
        if (v > 0.0) != (last > 0.0) {
            changes.push(rho);
        }
        last = v;
    }
    assert_eq!(changes.len(), 1);
    let sol = solve_death_transition(target, &prev);
    let step = ((hi - lo) / (points - 1) as f64).exp();
    assert!(sol.rho <= changes[0] && sol.rho >= changes[0] / step);
}
