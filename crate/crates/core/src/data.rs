//! Validated history plus snapshots, with per-pair co-presence statistics.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{EventHistory, SnapshotSeries};

/// Co-presence statistics of one ordered pair, seen from its first member.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairObs {
    /// Dense index of the other individual.
    pub partner: usize,
    /// `|Upsilon_ij|`: snapshots at which both are alive.
    pub slots: u32,
    /// Snapshots at which the edge is present.
    pub links: u32,
}

/// Compressed adjacency of all pairs with at least one shared snapshot. Every pair
/// is stored in both directions so that per-individual sums are a single scan.
#[derive(Clone, Debug)]
pub struct PairStats {
    offsets: Vec<usize>,
    partners: Vec<u32>,
    slots: Vec<u32>,
    links: Vec<u32>,
    total_slots: u64,
    total_links: u64,
}

impl PairStats {
    pub fn build(history: &EventHistory, snapshots: &SnapshotSeries) -> Result<Self> {
        let n = history.n_individuals();
        if n > u32::MAX as usize {
            return Err(Error::input("too many individuals"));
        }
        let times = snapshots.times();

        let mut edge_counts: HashMap<(u32, u32), u32> = HashMap::new();
        for s in 0..snapshots.len() {
            for &(a, b) in snapshots.edges(s) {
                let ia = history.index_of(a).ok_or_else(|| unknown(a))?;
                let ib = history.index_of(b).ok_or_else(|| unknown(b))?;
                let key = (ia.min(ib) as u32, ia.max(ib) as u32);
                *edge_counts.entry(key).or_insert(0) += 1;
            }
        }

        // Snapshot index range alive for each individual: [first, last).
        let ranges: Vec<(usize, usize)> = history
            .lifespans()
            .iter()
            .map(|span| {
                let first = times.partition_point(|&t| t < span.birth);
                let last = times.partition_point(|&t| t <= span.death);
                (first, last.max(first))
            })
            .collect();

        let mut degree = vec![0usize; n];
        let mut upper: Vec<(u32, u32, u32, u32)> = Vec::new();
        for i in 0..n {
            let (fi, li) = ranges[i];
            if fi == li {
                continue;
            }
            for j in (i + 1)..n {
                let (fj, lj) = ranges[j];
                let lo = fi.max(fj);
                let hi = li.min(lj);
                if hi > lo {
                    let c = (hi - lo) as u32;
                    let l = edge_counts.remove(&(i as u32, j as u32)).unwrap_or(0);
                    upper.push((i as u32, j as u32, c, l));
                    degree[i] += 1;
                    degree[j] += 1;
                }
            }
        }
        if let Some(((a, b), _)) = edge_counts.into_iter().next() {
            return Err(Error::input(format!(
                "edge between {} and {} at a time when they are not both alive",
                history.id_of(a as usize),
                history.id_of(b as usize)
            )));
        }

        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let total = offsets[n];
        let mut partners = vec![0u32; total];
        let mut slots = vec![0u32; total];
        let mut links = vec![0u32; total];
        let mut fill = offsets[..n].to_vec();
        let (mut total_slots, mut total_links) = (0u64, 0u64);
        // `upper` is sorted by (i, j), so each row ends up sorted by partner.
        for &(i, j, c, l) in &upper {
            total_slots += u64::from(c);
            total_links += u64::from(l);
            for (a, b) in [(i, j), (j, i)] {
                let p = fill[a as usize];
                partners[p] = b;
                slots[p] = c;
                links[p] = l;
                fill[a as usize] += 1;
            }
        }
        Ok(PairStats {
            offsets,
            partners,
            slots,
            links,
            total_slots,
            total_links,
        })
    }

    pub fn n_individuals(&self) -> usize {
        self.offsets.len() - 1
    }

    /// All partners of `i` with at least one shared snapshot, ascending.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = PairObs> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        range.map(move |p| PairObs {
            partner: self.partners[p] as usize,
            slots: self.slots[p],
            links: self.links[p],
        })
    }

    /// Statistics of the pair `(i, j)` (zeros when never co-present).
    pub fn get(&self, i: usize, j: usize) -> (u32, u32) {
        let row = &self.partners[self.offsets[i]..self.offsets[i + 1]];
        match row.binary_search(&(j as u32)) {
            Ok(p) => {
                let p = self.offsets[i] + p;
                (self.slots[p], self.links[p])
            }
            Err(_) => (0, 0),
        }
    }

    /// `sum_{i<j} |Upsilon_ij|`.
    pub fn total_slots(&self) -> u64 {
        self.total_slots
    }

    /// Total edge observations over all snapshots.
    pub fn total_links(&self) -> u64 {
        self.total_links
    }
}

fn unknown(id: usize) -> Error {
    Error::input(format!("edge endpoint {id} is not part of the history"))
}

/// An event history together with its snapshots and derived pair statistics.
#[derive(Clone, Debug)]
pub struct Dataset {
    history: EventHistory,
    snapshots: SnapshotSeries,
    pairs: PairStats,
}

impl Dataset {
    pub fn new(history: EventHistory, snapshots: SnapshotSeries) -> Result<Self> {
        snapshots.validate_against(&history)?;
        let pairs = PairStats::build(&history, &snapshots)?;
        Ok(Dataset {
            history,
            snapshots,
            pairs,
        })
    }

    pub fn history(&self) -> &EventHistory {
        &self.history
    }

    pub fn snapshots(&self) -> &SnapshotSeries {
        &self.snapshots
    }

    pub fn pairs(&self) -> &PairStats {
        &self.pairs
    }
}
