//! Exact simulation of the generative process: birth-death history by exponential
//! clocks, then independent block-model snapshots.
//!
//! Randomness comes from ChaCha8 seeded with the configured seed. Stream 0 drives
//! the event process, stream 1 the initial labels when they are sampled, and stream
//! `2 + s` the snapshot at time index `s`, so each snapshot is reproducible on its own.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::model::{
    Event, EventHistory, EventKind, IndividualId, LabelAssignment, ModelParams, SnapshotSeries,
};

#[derive(Clone, Debug, PartialEq)]
pub enum InitialComposition {
    /// Community sizes at `t0`; ids are handed out in contiguous blocks per community.
    Sizes(Vec<usize>),
    /// `n0` individuals with labels drawn independently from `beta`.
    Sampled { n0: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum SnapshotSchedule {
    Times(Vec<f64>),
    /// `t0, t0 + step, ...` up to `t_end`.
    Uniform {
        step: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub params: ModelParams,
    pub initial: InitialComposition,
    pub t0: f64,
    pub t_end: f64,
    pub snapshots: SnapshotSchedule,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub history: EventHistory,
    pub labels: LabelAssignment,
    pub snapshots: SnapshotSeries,
    /// The population died out before `t_end`.
    pub extinct: bool,
}

const EVENT_STREAM: u64 = 0;
const LABEL_STREAM: u64 = 1;
const FIRST_SNAPSHOT_STREAM: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl SimConfig {
    pub fn snapshot_times(&self) -> Result<Vec<f64>> {
        let times = match &self.snapshots {
            SnapshotSchedule::Times(t) => t.clone(),
            SnapshotSchedule::Uniform { step } => {
                if !(*step > 0.0) || !step.is_finite() {
                    return Err(Error::input("snapshot step must be positive"));
                }
                let count = ((self.t_end - self.t0) / step + 1e-9).floor() as usize;
                (0..=count).map(|i| self.t0 + i as f64 * step).collect()
            }
        };
        if times.iter().any(|&t| !(t >= self.t0 && t <= self.t_end)) {
            return Err(Error::input(
                "snapshot times must lie in the simulation window",
            ));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("snapshot times must be strictly increasing"));
        }
        Ok(times)
    }

    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !self.t0.is_finite() || !self.t_end.is_finite() || self.t_end <= self.t0 {
            return Err(Error::input("simulation window needs t_end > t0"));
        }
        if let InitialComposition::Sizes(sizes) = &self.initial {
            if sizes.len() != self.params.k() {
                return Err(Error::input("one initial size per community is required"));
            }
        }
        Ok(())
    }
}

/// Simulates the birth-death history and true labels only.
pub fn simulate_history(config: &SimConfig) -> Result<(EventHistory, LabelAssignment, bool)> {
    config.validate()?;
    let params = &config.params;
    let k = params.k();

    let mut labels: BTreeMap<IndividualId, usize> = BTreeMap::new();
    let mut members: Vec<Vec<IndividualId>> = vec![Vec::new(); k];
    match &config.initial {
        InitialComposition::Sizes(sizes) => {
            let mut id = 0;
            for (c, &size) in sizes.iter().enumerate() {
                for _ in 0..size {
                    labels.insert(id, c);
                    members[c].push(id);
                    id += 1;
                }
            }
        }
        InitialComposition::Sampled { n0 } => {
            let mut rng = stream(config.seed, LABEL_STREAM);
            for id in 0..*n0 {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut c = k - 1;
                for (j, &b) in params.beta.iter().enumerate() {
                    acc += b;
                    if u < acc {
                        c = j;
                        break;
                    }
                }
                labels.insert(id, c);
                members[c].push(id);
            }
        }
    }
    let v0: Vec<IndividualId> = labels.keys().copied().collect();
    let mut next_id = v0.len();

    let mut rng = stream(config.seed, EVENT_STREAM);
    let mut events = Vec::new();
    let mut t = config.t0;
    let mut extinct = v0.is_empty();
    while !extinct {
        let weights: Vec<(f64, f64)> = (0..k)
            .map(|c| {
                let n = members[c].len() as f64;
                (params.lambda(c) * n, params.mu(c) * n)
            })
            .collect();
        let total: f64 = weights.iter().map(|(b, d)| b + d).sum();
        if total <= 0.0 {
            break;
        }
        t += Exp::new(total)
            .expect("positive total rate")
            .sample(&mut rng);
        if t > config.t_end {
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut choice = None;
        'pick: for (c, &(b, d)) in weights.iter().enumerate() {
            for (kind, w) in [(EventKind::Birth, b), (EventKind::Death, d)] {
                if u < w {
                    choice = Some((c, kind));
                    break 'pick;
                }
                u -= w;
            }
        }
        // Rounding can leave `u` marginally above the last weight.
        let (c, kind) = choice.unwrap_or_else(|| {
            let c = (0..k)
                .rev()
                .find(|&c| weights[c].0 + weights[c].1 > 0.0)
                .unwrap();
            (
                c,
                if weights[c].1 > 0.0 {
                    EventKind::Death
                } else {
                    EventKind::Birth
                },
            )
        });
        match kind {
            EventKind::Birth => {
                let id = next_id;
                next_id += 1;
                labels.insert(id, c);
                members[c].push(id);
                events.push(Event { time: t, kind, id });
            }
            EventKind::Death => {
                let pos = rng.random_range(0..members[c].len());
                let id = members[c].swap_remove(pos);
                events.push(Event { time: t, kind, id });
            }
        }
        extinct = members.iter().all(Vec::is_empty);
    }

    let history = EventHistory::new(config.t0, config.t_end, v0, events)?;
    let labels = LabelAssignment::new(k, labels)?;
    Ok((history, labels, extinct))
}

/// Each unordered pair of `alive` (ascending ids) is linked independently with
/// probability `pi[label_i][label_j]`.
pub fn sample_snapshot(
    labels: &LabelAssignment,
    alive: &[IndividualId],
    pi: &[Vec<f64>],
    rng: &mut impl Rng,
) -> Result<Vec<(IndividualId, IndividualId)>> {
    let z: Vec<usize> = alive
        .iter()
        .map(|&id| {
            labels
                .get(id)
                .ok_or_else(|| Error::input(format!("no label for {id}")))
        })
        .collect::<Result<_>>()?;
    let mut edges = Vec::new();
    for a in 0..alive.len() {
        for b in (a + 1)..alive.len() {
            if rng.random::<f64>() < pi[z[a]][z[b]] {
                edges.push((alive[a], alive[b]));
            }
        }
    }
    Ok(edges)
}

/// Full simulation: history, labels and one snapshot per scheduled time.
pub fn simulate(config: &SimConfig) -> Result<Simulation> {
    let times = config.snapshot_times()?;
    let (history, labels, extinct) = simulate_history(config)?;
    let mut edges = Vec::with_capacity(times.len());
    for (s, &t) in times.iter().enumerate() {
        let mut rng = stream(config.seed, FIRST_SNAPSHOT_STREAM + s as u64);
        let mut alive: Vec<IndividualId> = history
            .alive_at(t)
            .into_iter()
            .map(|i| history.id_of(i))
            .collect();
        alive.sort_unstable();
        edges.push(sample_snapshot(
            &labels,
            &alive,
            &config.params.pi,
            &mut rng,
        )?);
    }
    let snapshots = SnapshotSeries::new(times, edges)?;
    Ok(Simulation {
        history,
        labels,
        snapshots,
        extinct,
    })
}
