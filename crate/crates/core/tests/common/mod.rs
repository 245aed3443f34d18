//! Scenarios and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use bdsbm::ingest::PublicationRecord;
use bdsbm::model::{EventHistory, EventKind, ModelParams, Rates, SnapshotSeries};
use bdsbm::simulator::{simulate, InitialComposition, SimConfig, Simulation, SnapshotSchedule};

pub const HIGH_SIGNAL_SIZES: [usize; 4] = [10, 11, 7, 12];
pub const HIGH_SIGNAL_BETA: [f64; 4] = [0.25, 0.275, 0.175, 0.30];

pub fn high_signal_pi() -> Vec<Vec<f64>> {
    vec![
        vec![0.75, 0.36, 0.20, 0.16],
        vec![0.36, 0.91, 0.22, 0.24],
        vec![0.20, 0.22, 0.82, 0.28],
        vec![0.16, 0.24, 0.28, 0.66],
    ]
}

/// Four communities of sizes 10, 11, 7, 12 with strong within-block links, one
/// snapshot per unit of time.
pub fn high_signal_config(lambda: f64, mu: f64, t_end: f64, seed: u64) -> SimConfig {
    SimConfig {
        params: ModelParams::shared(lambda, mu, HIGH_SIGNAL_BETA.to_vec(), high_signal_pi())
            .unwrap(),
        initial: InitialComposition::Sizes(HIGH_SIGNAL_SIZES.to_vec()),
        t0: 0.0,
        t_end,
        snapshots: SnapshotSchedule::Uniform { step: 1.0 },
        seed,
    }
}

pub fn high_signal(lambda: f64, mu: f64, t_end: f64, seed: u64) -> Simulation {
    simulate(&high_signal_config(lambda, mu, t_end, seed)).unwrap()
}

/// `int N(t) dt` from the lifespans alone.
pub fn exposure_from_lifespans(history: &EventHistory) -> f64 {
    history
        .lifespans()
        .iter()
        .map(|l| l.death.min(history.t_end()) - l.birth.max(history.t0()))
        .sum()
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn ln_or_zero(count: f64, p: f64) -> f64 {
    if count == 0.0 {
        0.0
    } else {
        count * p.ln()
    }
}

/// Joint log-density of one labeling (dense index order) with the history and the
/// snapshots, computed by replaying events and scanning every snapshot pair.
pub fn joint_log_density(
    params: &ModelParams,
    z: &[usize],
    history: &EventHistory,
    snaps: &SnapshotSeries,
) -> f64 {
    let k = params.k();
    let mut total = 0.0;
    for i in 0..history.n_initial() {
        total += params.beta[z[i]].ln();
    }

    let mut sizes = vec![0usize; k];
    for &c in &z[..history.n_initial()] {
        sizes[c] += 1;
    }
    let mut last = history.t0();
    let mut exposure = vec![0.0; k];
    let (mut births, mut deaths) = (vec![0.0; k], vec![0.0; k]);
    for ev in history.events() {
        for c in 0..k {
            exposure[c] += sizes[c] as f64 * (ev.time - last);
        }
        last = ev.time;
        let c = z[history.index_of(ev.id).unwrap()];
        match ev.kind {
            EventKind::Birth => {
                if sizes[c] == 0 {
                    return f64::NEG_INFINITY;
                }
                total += (sizes[c] as f64).ln();
                births[c] += 1.0;
                sizes[c] += 1;
            }
            EventKind::Death => {
                if sizes[c] == 0 {
                    return f64::NEG_INFINITY;
                }
                deaths[c] += 1.0;
                sizes[c] -= 1;
            }
        }
    }
    for c in 0..k {
        exposure[c] += sizes[c] as f64 * (history.t_end() - last);
    }
    total += match &params.rates {
        Rates::Shared { lambda, mu } => {
            ln_or_zero(births.iter().sum(), *lambda) + ln_or_zero(deaths.iter().sum(), *mu)
                - (lambda + mu) * exposure.iter().sum::<f64>()
        }
        Rates::PerCommunity { lambda, mu } => (0..k)
            .map(|c| {
                ln_or_zero(births[c], lambda[c]) + ln_or_zero(deaths[c], mu[c])
                    - (lambda[c] + mu[c]) * exposure[c]
            })
            .sum(),
    };

    for (s, &t) in snaps.times().iter().enumerate() {
        let edges: BTreeSet<(usize, usize)> = snaps.edges(s).iter().copied().collect();
        let alive: Vec<usize> = (0..history.n_individuals())
            .filter(|&i| {
                let l = history.lifespan(i);
                l.birth <= t && t <= l.death
            })
            .collect();
        for (a, &i) in alive.iter().enumerate() {
            for &j in &alive[a + 1..] {
                let (x, y) = (history.id_of(i), history.id_of(j));
                let p = params.pi[z[i]][z[j]];
                total += if edges.contains(&(x.min(y), x.max(y))) {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                };
            }
        }
    }
    total
}

/// Observed-data log-likelihood by summing the joint over all `K^N` labelings.
pub fn exact_log_likelihood(
    params: &ModelParams,
    history: &EventHistory,
    snaps: &SnapshotSeries,
) -> f64 {
    let n = history.n_individuals();
    let k = params.k();
    let total = k.pow(n as u32);
    let mut terms = Vec::with_capacity(total);
    let mut z = vec![0usize; n];
    for code in 0..total {
        let mut rest = code;
        for zi in z.iter_mut() {
            *zi = rest % k;
            rest /= k;
        }
        terms.push(joint_log_density(params, &z, history, snaps));
    }
    log_sum_exp(&terms)
}

/// Events and snapshots expected from a publication corpus, recomputed by scanning
/// every record for every author and every bin.
pub struct IngestOracle {
    /// `(time, is_birth, author)` sorted by time.
    pub events: Vec<(f64, bool, String)>,
    pub initial: Vec<String>,
    /// Per bin end: co-author pairs among retained authors.
    pub snapshots: Vec<(f64, BTreeSet<(String, String)>)>,
    pub discarded: Vec<String>,
}

/// Scan oracle; tied event times drop everybody but the most prolific author
/// (smallest identifier on equal counts).
pub fn ingest_oracle(
    records: &[PublicationRecord],
    t_start: f64,
    t_end: f64,
    ancestor_len: f64,
    bin: f64,
) -> IngestOracle {
    let t0 = t_start + ancestor_len;
    let window: Vec<&PublicationRecord> = records
        .iter()
        .filter(|r| r.timestamp >= t_start && r.timestamp <= t_end)
        .collect();
    let seed_authors: BTreeSet<String> = window
        .iter()
        .filter(|r| r.timestamp < t0)
        .flat_map(|r| r.authors.clone())
        .collect();

    // Closure by repeated sweeps until nothing changes.
    let mut nodes = seed_authors.clone();
    loop {
        let before = nodes.len();
        for r in &window {
            if r.authors.iter().any(|a| nodes.contains(a)) {
                nodes.extend(r.authors.iter().cloned());
            }
        }
        if nodes.len() == before {
            break;
        }
    }

    let last_of = |a: &String| {
        window
            .iter()
            .filter(|r| r.authors.contains(a))
            .map(|r| r.timestamp)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let initial: BTreeSet<String> = seed_authors
        .iter()
        .filter(|a| last_of(a) + bin > t0)
        .cloned()
        .collect();
    nodes.retain(|a| !seed_authors.contains(a) || initial.contains(a));

    let mut events = Vec::new();
    for a in &nodes {
        let times: Vec<f64> = window
            .iter()
            .filter(|r| r.authors.contains(a))
            .map(|r| r.timestamp)
            .collect();
        let first = times.iter().copied().fold(f64::INFINITY, f64::min);
        let last = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let is_initial = initial.contains(a);
        if !is_initial {
            events.push((first, true, a.clone()));
        }
        let death = last + bin;
        if death < t_end {
            events.push((death, false, a.clone()));
        }
    }
    events.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.2.cmp(&y.2)));

    // Resolve the earliest remaining tie until none is left.
    let count = |a: &String| window.iter().filter(|r| r.authors.contains(a)).count();
    let mut discarded = BTreeSet::new();
    while let Some(i) = (1..events.len()).find(|&i| events[i].0 == events[i - 1].0) {
        let time = events[i].0;
        let group: Vec<String> = events
            .iter()
            .filter(|e| e.0 == time)
            .map(|e| e.2.clone())
            .collect();
        let keep = group
            .iter()
            .max_by(|a, b| count(a).cmp(&count(b)).then(b.cmp(a)))
            .unwrap()
            .clone();
        for a in group.into_iter().filter(|a| *a != keep) {
            events.retain(|e| e.2 != a);
            discarded.insert(a);
        }
    }
    nodes.retain(|a| !discarded.contains(a));
    let initial: BTreeSet<String> = initial.difference(&discarded).cloned().collect();

    let mut snapshots = Vec::new();
    let mut b = 0;
    while t0 + b as f64 * bin < t_end {
        let start = t0 + b as f64 * bin;
        let end = (start + bin).min(t_end);
        let last_bin = end >= t_end;
        let mut pairs = BTreeSet::new();
        for r in &window {
            let inside = r.timestamp >= start && (r.timestamp < end || last_bin);
            if !inside {
                continue;
            }
            for a in &r.authors {
                for b in &r.authors {
                    if a < b && nodes.contains(a) && nodes.contains(b) {
                        pairs.insert((a.clone(), b.clone()));
                    }
                }
            }
        }
        snapshots.push((end, pairs));
        b += 1;
    }
    IngestOracle {
        events,
        initial: initial.into_iter().collect(),
        snapshots,
        discarded: discarded.into_iter().collect(),
    }
}

/// Publication counts per author.
pub fn publication_counts(records: &[PublicationRecord]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for r in records {
        for a in &r.authors {
            *out.entry(a.clone()).or_insert(0) += 1;
        }
    }
    out
}
