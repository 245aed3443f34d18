//! Domain types of the birth-death block model and its complete-data log-likelihood.
//!
//! Individuals are identified by non-negative integer ids. Internally every
//! individual also has a dense *index*: initial individuals first (ascending id),
//! then newborns in birth order. Because newborn ids are strictly increasing the
//! dense index order coincides with id order.
//!
//! Community indices are 0-based in memory; the file formats use 1-based labels.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::util::xlogy;

pub type IndividualId = usize;

/// Tolerance on `sum(beta) == 1`.
pub const BETA_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMode {
    /// One birth rate and one death rate for the whole population.
    Shared,
    /// A birth and death rate per community.
    PerCommunity,
}

impl std::str::FromStr for RateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(RateMode::Shared),
            "per-community" => Ok(RateMode::PerCommunity),
            other => Err(Error::input(format!(
                "unknown rate mode {other:?} (expected \"shared\" or \"per-community\")"
            ))),
        }
    }
}

impl std::fmt::Display for RateMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RateMode::Shared => "shared",
            RateMode::PerCommunity => "per-community",
        })
    }
}

/// Birth and death rates, in events per unit time per individual.
#[derive(Clone, Debug, PartialEq)]
pub enum Rates {
    Shared { lambda: f64, mu: f64 },
    PerCommunity { lambda: Vec<f64>, mu: Vec<f64> },
}

impl Rates {
    pub fn mode(&self) -> RateMode {
        match self {
            Rates::Shared { .. } => RateMode::Shared,
            Rates::PerCommunity { .. } => RateMode::PerCommunity,
        }
    }
}

/// Model parameters: rates, initial community proportions and block edge probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub rates: Rates,
    pub beta: Vec<f64>,
    pub pi: Vec<Vec<f64>>,
}

impl ModelParams {
    pub fn new(rates: Rates, beta: Vec<f64>, pi: Vec<Vec<f64>>) -> Result<Self> {
        let params = ModelParams { rates, beta, pi };
        params.validate()?;
        Ok(params)
    }

    pub fn shared(lambda: f64, mu: f64, beta: Vec<f64>, pi: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(Rates::Shared { lambda, mu }, beta, pi)
    }

    /// Number of communities.
    pub fn k(&self) -> usize {
        self.beta.len()
    }

    pub fn rate_mode(&self) -> RateMode {
        self.rates.mode()
    }

    pub fn lambda(&self, k: usize) -> f64 {
        match &self.rates {
            Rates::Shared { lambda, .. } => *lambda,
            Rates::PerCommunity { lambda, .. } => lambda[k],
        }
    }

    pub fn mu(&self, k: usize) -> f64 {
        match &self.rates {
            Rates::Shared { mu, .. } => *mu,
            Rates::PerCommunity { mu, .. } => mu[k],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 {
            return Err(Error::input("model needs at least one community"));
        }
        let rate_ok = |r: f64| r.is_finite() && r >= 0.0;
        match &self.rates {
            Rates::Shared { lambda, mu } => {
                if !rate_ok(*lambda) || !rate_ok(*mu) {
                    return Err(Error::input("rates must be finite and non-negative"));
                }
            }
            Rates::PerCommunity { lambda, mu } => {
                if lambda.len() != k || mu.len() != k {
                    return Err(Error::input(format!(
                        "per-community rates need {k} entries each"
                    )));
                }
                if !lambda.iter().chain(mu).all(|&r| rate_ok(r)) {
                    return Err(Error::input("rates must be finite and non-negative"));
                }
            }
        }
        if self.beta.iter().any(|&b| !(0.0..=1.0).contains(&b)) {
            return Err(Error::input("beta entries must lie in [0, 1]"));
        }
        let total: f64 = self.beta.iter().sum();
        if (total - 1.0).abs() > BETA_SUM_TOLERANCE {
            return Err(Error::input(format!("beta sums to {total}, expected 1")));
        }
        if self.pi.len() != k || self.pi.iter().any(|row| row.len() != k) {
            return Err(Error::input(format!("pi must be a {k}x{k} matrix")));
        }
        for a in 0..k {
            for b in 0..k {
                let p = self.pi[a][b];
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::input(format!("pi[{a}][{b}] = {p} outside [0, 1]")));
                }
                if p != self.pi[b][a] {
                    return Err(Error::input(format!("pi is not symmetric at ({a}, {b})")));
                }
            }
        }
        Ok(())
    }

    /// Relabels communities: old community `c` becomes `perm[c]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let k = self.k();
        let mut beta = vec![0.0; k];
        let mut pi = vec![vec![0.0; k]; k];
        for a in 0..k {
            beta[perm[a]] = self.beta[a];
            for b in 0..k {
                pi[perm[a]][perm[b]] = self.pi[a][b];
            }
        }
        let permute = |v: &[f64]| {
            let mut out = vec![0.0; k];
            for a in 0..k {
                out[perm[a]] = v[a];
            }
            out
        };
        let rates = match &self.rates {
            Rates::Shared { lambda, mu } => Rates::Shared {
                lambda: *lambda,
                mu: *mu,
            },
            Rates::PerCommunity { lambda, mu } => Rates::PerCommunity {
                lambda: permute(lambda),
                mu: permute(mu),
            },
        };
        ModelParams { rates, beta, pi }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Birth,
    Death,
}

impl EventKind {
    /// `+1` for a birth, `-1` for a death.
    pub fn sign(self) -> i64 {
        match self {
            EventKind::Birth => 1,
            EventKind::Death => -1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub id: IndividualId,
}

/// Birth and death time of one individual. Initial individuals are born at `t0`,
/// survivors die at the window end without an observed death event.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lifespan {
    pub birth: f64,
    pub death: f64,
    pub dies: bool,
}

impl Lifespan {
    /// Closed-interval presence: alive at both its birth and its death time.
    pub fn contains(&self, t: f64) -> bool {
        self.birth <= t && t <= self.death
    }
}

/// A fully observed birth-death history over `[t0, t_end]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EventHistory {
    t0: f64,
    t_end: f64,
    v0: Vec<IndividualId>,
    events: Vec<Event>,
    ids: Vec<IndividualId>,
    index: HashMap<IndividualId, usize>,
    lifespans: Vec<Lifespan>,
    subjects: Vec<usize>,
    population: Vec<usize>,
    births: usize,
    deaths: usize,
}

impl EventHistory {
    pub fn new(t0: f64, t_end: f64, v0: Vec<IndividualId>, events: Vec<Event>) -> Result<Self> {
        if !t0.is_finite() || !t_end.is_finite() || t_end <= t0 {
            return Err(Error::input(format!(
                "observation window [{t0}, {t_end}] must be finite with t_end > t0"
            )));
        }
        let mut v0 = v0;
        v0.sort_unstable();
        if v0.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::input("initial individual ids must be distinct"));
        }

        let mut ids = v0.clone();
        let mut index: HashMap<IndividualId, usize> =
            v0.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut lifespans: Vec<Lifespan> = v0
            .iter()
            .map(|_| Lifespan {
                birth: t0,
                death: t_end,
                dies: false,
            })
            .collect();
        let mut alive = vec![true; v0.len()];
        let mut max_id = v0.last().copied();
        let mut population = Vec::with_capacity(events.len() + 1);
        let mut subjects = Vec::with_capacity(events.len());
        let mut n = v0.len();
        population.push(n);
        let (mut births, mut deaths) = (0, 0);
        let mut prev_time = f64::NEG_INFINITY;

        for (e, ev) in events.iter().enumerate() {
            if !ev.time.is_finite() || ev.time < t0 || ev.time > t_end {
                return Err(Error::input(format!(
                    "event {e} at time {} lies outside [{t0}, {t_end}]",
                    ev.time
                )));
            }
            if ev.time <= prev_time {
                return Err(Error::input(format!(
                    "event times must be strictly increasing (event {e} at {})",
                    ev.time
                )));
            }
            prev_time = ev.time;
            match ev.kind {
                EventKind::Birth => {
                    if index.contains_key(&ev.id) {
                        return Err(Error::input(format!(
                            "event {e}: birth of already known id {}",
                            ev.id
                        )));
                    }
                    if max_id.is_some_and(|m| ev.id <= m) {
                        return Err(Error::input(format!(
                            "event {e}: newborn id {} is not above every earlier id",
                            ev.id
                        )));
                    }
                    max_id = Some(ev.id);
                    index.insert(ev.id, ids.len());
                    subjects.push(ids.len());
                    ids.push(ev.id);
                    lifespans.push(Lifespan {
                        birth: ev.time,
                        death: t_end,
                        dies: false,
                    });
                    alive.push(true);
                    n += 1;
                    births += 1;
                }
                EventKind::Death => {
                    let idx = match index.get(&ev.id) {
                        Some(&idx) if alive[idx] => idx,
                        _ => {
                            return Err(Error::input(format!(
                                "event {e}: death of id {} which is not alive",
                                ev.id
                            )))
                        }
                    };
                    alive[idx] = false;
                    lifespans[idx].death = ev.time;
                    lifespans[idx].dies = true;
                    subjects.push(idx);
                    n -= 1;
                    deaths += 1;
                }
            }
            population.push(n);
        }

        Ok(EventHistory {
            t0,
            t_end,
            v0,
            events,
            ids,
            index,
            lifespans,
            subjects,
            population,
            births,
            deaths,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Initial individual ids, ascending.
    pub fn v0(&self) -> &[IndividualId] {
        &self.v0
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Number of events `M`.
    pub fn n_events(&self) -> usize {
        self.events.len()
    }

    pub fn n_births(&self) -> usize {
        self.births
    }

    pub fn n_deaths(&self) -> usize {
        self.deaths
    }

    /// Number of individuals ever present, `N = |V|`.
    pub fn n_individuals(&self) -> usize {
        self.ids.len()
    }

    /// `N0 = |V0|`.
    pub fn n_initial(&self) -> usize {
        self.v0.len()
    }

    /// Ids by dense index.
    pub fn ids(&self) -> &[IndividualId] {
        &self.ids
    }

    pub fn id_of(&self, index: usize) -> IndividualId {
        self.ids[index]
    }

    pub fn index_of(&self, id: IndividualId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn lifespans(&self) -> &[Lifespan] {
        &self.lifespans
    }

    pub fn lifespan(&self, index: usize) -> Lifespan {
        self.lifespans[index]
    }

    pub fn is_initial(&self, index: usize) -> bool {
        index < self.v0.len()
    }

    /// Dense index of the individual born or dying at event `e` (0-based).
    pub fn subject(&self, e: usize) -> usize {
        self.subjects[e]
    }

    /// Population size after `layer` events: `layer = 0` is `N(t0)`, `layer = e + 1`
    /// is the size right after event `e`.
    pub fn population(&self, layer: usize) -> usize {
        self.population[layer]
    }

    /// Length of the interval preceding event `e`, or of the censored tail when `e == M`.
    pub fn interval(&self, e: usize) -> f64 {
        let start = if e == 0 {
            self.t0
        } else {
            self.events[e - 1].time
        };
        let end = if e == self.events.len() {
            self.t_end
        } else {
            self.events[e].time
        };
        end - start
    }

    /// Indices alive at time `t` (closed lifespans).
    pub fn alive_at(&self, t: f64) -> Vec<usize> {
        (0..self.ids.len())
            .filter(|&i| self.lifespans[i].contains(t))
            .collect()
    }
}

/// Observed undirected edge sets at the snapshot times.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSeries {
    times: Vec<f64>,
    edges: Vec<Vec<(IndividualId, IndividualId)>>,
}

impl SnapshotSeries {
    /// Edges are normalized to `(min, max)`, sorted and de-duplicated.
    pub fn new(times: Vec<f64>, edges: Vec<Vec<(IndividualId, IndividualId)>>) -> Result<Self> {
        if times.len() != edges.len() {
            return Err(Error::input("one edge list per snapshot time is required"));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::input("snapshot times must be finite"));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("snapshot times must be strictly increasing"));
        }
        let mut normalized = Vec::with_capacity(edges.len());
        for (s, list) in edges.into_iter().enumerate() {
            let mut list: Vec<_> = list
                .into_iter()
                .map(|(i, j)| {
                    if i == j {
                        Err(Error::input(format!("self-loop on {i} at snapshot {s}")))
                    } else {
                        Ok((i.min(j), i.max(j)))
                    }
                })
                .collect::<Result<_>>()?;
            list.sort_unstable();
            list.dedup();
            normalized.push(list);
        }
        Ok(SnapshotSeries {
            times,
            edges: normalized,
        })
    }

    /// Snapshot times with no edges.
    pub fn empty(times: Vec<f64>) -> Result<Self> {
        let n = times.len();
        Self::new(times, vec![Vec::new(); n])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn edges(&self, s: usize) -> &[(IndividualId, IndividualId)] {
        &self.edges[s]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Checks times against the window and every endpoint against the alive sets.
    pub fn validate_against(&self, history: &EventHistory) -> Result<()> {
        for (s, &t) in self.times.iter().enumerate() {
            if t < history.t0() || t > history.t_end() {
                return Err(Error::input(format!(
                    "snapshot time {t} outside [{}, {}]",
                    history.t0(),
                    history.t_end()
                )));
            }
            for &(i, j) in &self.edges[s] {
                for id in [i, j] {
                    let alive = history
                        .index_of(id)
                        .is_some_and(|idx| history.lifespan(idx).contains(t));
                    if !alive {
                        return Err(Error::input(format!(
                            "edge ({i}, {j}) at time {t}: individual {id} is not alive"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One community per individual id (0-based communities).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelAssignment {
    k: usize,
    labels: BTreeMap<IndividualId, usize>,
}

impl LabelAssignment {
    pub fn new(k: usize, labels: BTreeMap<IndividualId, usize>) -> Result<Self> {
        if k == 0 {
            return Err(Error::input(
                "label assignment needs at least one community",
            ));
        }
        if let Some((id, c)) = labels.iter().find(|(_, &c)| c >= k) {
            return Err(Error::input(format!(
                "id {id} has community {c} >= K = {k}"
            )));
        }
        Ok(LabelAssignment { k, labels })
    }

    /// Labels given per dense index of `history`.
    pub fn from_dense(k: usize, history: &EventHistory, dense: &[usize]) -> Result<Self> {
        if dense.len() != history.n_individuals() {
            return Err(Error::input("dense labels do not cover every individual"));
        }
        let labels = dense
            .iter()
            .enumerate()
            .map(|(i, &c)| (history.id_of(i), c))
            .collect();
        Self::new(k, labels)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, id: IndividualId) -> Option<usize> {
        self.labels.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (IndividualId, usize)> + '_ {
        self.labels.iter().map(|(&id, &c)| (id, c))
    }

    /// Labels by dense index; fails if some individual of `history` has no label.
    pub fn to_dense(&self, history: &EventHistory) -> Result<Vec<usize>> {
        history
            .ids()
            .iter()
            .map(|id| {
                self.get(*id)
                    .ok_or_else(|| Error::input(format!("no label for individual {id}")))
            })
            .collect()
    }

    /// Old community `c` becomes `perm[c]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        LabelAssignment {
            k: self.k,
            labels: self.labels.iter().map(|(&id, &c)| (id, perm[c])).collect(),
        }
    }
}

/// Snapshot times at which both `i` and `j` are alive.
pub fn upsilon(
    i: IndividualId,
    j: IndividualId,
    history: &EventHistory,
    times: &[f64],
) -> Result<Vec<f64>> {
    if i == j {
        return Err(Error::input("upsilon needs two distinct individuals"));
    }
    let span = |id| {
        history
            .index_of(id)
            .map(|idx| history.lifespan(idx))
            .ok_or_else(|| Error::input(format!("unknown individual {id}")))
    };
    let (a, b) = (span(i)?, span(j)?);
    let lo = a.birth.max(b.birth);
    let hi = a.death.min(b.death);
    Ok(times
        .iter()
        .copied()
        .filter(|&t| lo <= t && t <= hi)
        .collect())
}

/// Bernoulli log-probability of an edge indicator under block probability `pi[k1][k2]`.
pub fn edge_log_prob(edge: bool, k1: usize, k2: usize, pi: &[Vec<f64>]) -> f64 {
    let p = pi[k1][k2];
    if edge {
        p.ln()
    } else {
        (1.0 - p).ln()
    }
}

/// Sum of edge log-probabilities over `slots` co-presence snapshots of which `links`
/// carried an edge. Zero counts contribute zero even at a degenerate `p`.
#[inline]
pub(crate) fn pair_log_lik(links: f64, slots: f64, p: f64) -> f64 {
    xlogy(links, p) + xlogy(slots - links, 1.0 - p)
}

/// Complete-data log-likelihood of labels, history and snapshots.
///
/// The birth-size term takes the size of the newborn's community just before the
/// birth, so a birth into (or a death from) an empty community yields `-inf`. A vanishing rate with a
/// positive event count also yields `-inf`; with zero events it contributes nothing.
pub fn complete_log_likelihood(
    params: &ModelParams,
    labels: &LabelAssignment,
    data: &Dataset,
) -> Result<f64> {
    params.validate()?;
    if labels.k() != params.k() {
        return Err(Error::input("labels and parameters disagree on K"));
    }
    let history = data.history();
    let z = labels.to_dense(history)?;
    let k = params.k();

    let mut edge_term = 0.0;
    for i in 0..history.n_individuals() {
        for obs in data.pairs().neighbors(i) {
            if obs.partner > i {
                edge_term += pair_log_lik(
                    obs.links as f64,
                    obs.slots as f64,
                    params.pi[z[i]][z[obs.partner]],
                );
            }
        }
    }

    let prior: f64 = (0..history.n_initial())
        .map(|i| params.beta[z[i]].ln())
        .sum();

    let mut sizes = vec![0usize; k];
    for &c in &z[..history.n_initial()] {
        sizes[c] += 1;
    }
    let mut exposure = vec![0.0; k];
    let mut birth_term = 0.0;
    let mut birth_counts = vec![0usize; k];
    let mut death_counts = vec![0usize; k];
    for (e, ev) in history.events().iter().enumerate() {
        let dt = history.interval(e);
        for c in 0..k {
            exposure[c] += sizes[c] as f64 * dt;
        }
        let c = z[history.subject(e)];
        match ev.kind {
            EventKind::Birth => {
                birth_term += (sizes[c] as f64).ln();
                birth_counts[c] += 1;
                sizes[c] += 1;
            }
            EventKind::Death => {
                if sizes[c] == 0 {
                    // The labels make this death impossible.
                    return Ok(f64::NEG_INFINITY);
                }
                death_counts[c] += 1;
                sizes[c] -= 1;
            }
        }
    }
    let tail = history.interval(history.n_events());
    for c in 0..k {
        exposure[c] += sizes[c] as f64 * tail;
    }

    let rate_term = match &params.rates {
        Rates::Shared { lambda, mu } => {
            let total_exposure: f64 = exposure.iter().sum();
            xlogy(history.n_births() as f64, *lambda) + xlogy(history.n_deaths() as f64, *mu)
                - (lambda + mu) * total_exposure
        }
        Rates::PerCommunity { lambda, mu } => (0..k)
            .map(|c| {
                xlogy(birth_counts[c] as f64, lambda[c]) + xlogy(death_counts[c] as f64, mu[c])
                    - (lambda[c] + mu[c]) * exposure[c]
            })
            .sum(),
    };

    Ok(edge_term + rate_term + birth_term + prior)
}
