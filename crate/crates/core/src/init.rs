//! Starting point for variational EM: k-means on pairwise similarity rows, softened
//! into membership probabilities, plus the matching proportions and block probabilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};

const LLOYD_MAX_ITERATIONS: usize = 100;

/// Edge probability used when no pair is ever observed together.
pub const UNOBSERVED_PI: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct InitOptions {
    /// Weight of the hard assignment in the softened memberships, in `(0, 1)`.
    pub omega: f64,
    pub kmeans_restarts: usize,
    pub seed: u64,
}

impl Default for InitOptions {
    fn default() -> Self {
        InitOptions {
            omega: 0.9,
            kmeans_restarts: 10,
            seed: 0,
        }
    }
}

impl InitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return Err(Error::input(format!(
                "omega = {} must lie in (0, 1)",
                self.omega
            )));
        }
        if self.kmeans_restarts == 0 {
            return Err(Error::input("at least one k-means restart is required"));
        }
        Ok(())
    }
}

/// Dense symmetric similarity matrix with a mask of pairs that were ever co-present.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
    defined: Vec<bool>,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn is_defined(&self, i: usize, j: usize) -> bool {
        self.defined[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// `s_ij = (2 links - slots) / slots`: `1` for always linked, `-1` for never linked,
/// and `0` (undefined) for pairs that never share a snapshot.
pub fn similarity_matrix(data: &Dataset) -> SimilarityMatrix {
    let n = data.history().n_individuals();
    let mut values = vec![0.0; n * n];
    let mut defined = vec![false; n * n];
    for i in 0..n {
        for obs in data.pairs().neighbors(i) {
            let c = obs.slots as f64;
            values[i * n + obs.partner] = (2.0 * obs.links as f64 - c) / c;
            defined[i * n + obs.partner] = true;
        }
    }
    SimilarityMatrix { n, values, defined }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Hard clustering of the rows of `s` into `k` groups: seeded k-means++ starts,
/// Lloyd iterations, best within-cluster sum of squares over the restarts.
pub fn kmeans_rows(s: &SimilarityMatrix, k: usize, options: &InitOptions) -> Result<Vec<usize>> {
    let rows: Vec<&[f64]> = (0..s.n()).map(|i| s.row(i)).collect();
    kmeans(&rows, k, options.kmeans_restarts, options.seed).map(|(labels, _)| labels)
}

/// k-means over arbitrary points; returns labels and their within-cluster sum of squares.
pub fn kmeans(
    points: &[&[f64]],
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<(Vec<usize>, f64)> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::input(format!(
            "cannot form {k} clusters from {n} points"
        )));
    }
    let runs: Vec<(Vec<usize>, f64)> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            lloyd(points, k, &mut rng)
        })
        .collect();
    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.1 < runs[best].1 {
            best = r;
        }
    }
    Ok(runs.into_iter().nth(best).expect("at least one restart"))
}

fn plus_plus_centers(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].to_vec()];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if u < d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].to_vec();
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centers.push(c);
    }
    centers
}

fn nearest_center(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(p, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn lloyd(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let n = points.len();
    let dim = points[0].len();
    let mut centers = plus_plus_centers(points, k, rng);
    let mut labels = vec![usize::MAX; n];
    let mut dists = vec![0.0; n];
    for _ in 0..LLOYD_MAX_ITERATIONS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest_center(p, &centers);
            changed |= labels[i] != c;
            labels[i] = c;
            dists[i] = d;
        }
        // Every cluster must keep at least one member: move the point lying
        // farthest from its center into each empty cluster.
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&c| counts[c] += 1);
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .expect("k <= n leaves a cluster with two members");
                counts[labels[far]] -= 1;
                labels[far] = c;
                counts[c] = 1;
                dists[far] = 0.0;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for center in centers.iter_mut() {
            center.iter_mut().for_each(|x| *x = 0.0);
        }
        for (p, &c) in points.iter().zip(&labels) {
            for (x, v) in centers[c].iter_mut().zip(p.iter()) {
                *x += v;
            }
        }
        for (center, &count) in centers.iter_mut().zip(&counts) {
            center.iter_mut().for_each(|x| *x /= count as f64);
        }
        debug_assert_eq!(centers[0].len(), dim);
    }
    let wcss = wcss(points, &labels, k);
    (labels, wcss)
}

/// Within-cluster sum of squared distances to the cluster means.
pub fn wcss(points: &[&[f64]], labels: &[usize], k: usize) -> f64 {
    let dim = points.first().map_or(0, |p| p.len());
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter().zip(labels) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(p.iter()) {
            *s += v;
        }
    }
    points
        .iter()
        .zip(labels)
        .map(|(p, &c)| {
            let m = counts[c] as f64;
            p.iter()
                .zip(&sums[c])
                .map(|(v, s)| (v - s / m) * (v - s / m))
                .sum::<f64>()
        })
        .sum()
}

/// `delta(i, k) = omega 1{label_i = k} + (1 - omega) / K`, row-major.
pub fn soften(labels: &[usize], k: usize, omega: f64) -> Vec<f64> {
    let base = (1.0 - omega) / k as f64;
    let mut delta = vec![base; labels.len() * k];
    for (i, &c) in labels.iter().enumerate() {
        delta[i * k + c] += omega;
    }
    delta
}

/// Proportions and block probabilities implied by memberships.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialParams {
    pub beta: Vec<f64>,
    pub pi: Vec<Vec<f64>>,
    /// Blocks without any co-presence mass, set to [`UNOBSERVED_PI`].
    pub empty_blocks: usize,
}

/// `beta_k` is the mean initial membership; `pi_kl` the membership-weighted edge rate
/// over all co-present ordered pairs, which makes it symmetric.
pub fn init_params(delta: &[f64], k: usize, data: &Dataset) -> Result<InitialParams> {
    let history = data.history();
    let n0 = history.n_initial();
    if n0 == 0 {
        return Err(Error::input("no initial individuals"));
    }
    let mut beta = vec![0.0; k];
    for i in 0..n0 {
        for c in 0..k {
            beta[c] += delta[i * k + c];
        }
    }
    let total: f64 = beta.iter().sum();
    beta.iter_mut().for_each(|b| *b /= total);

    let mut num = vec![vec![0.0; k]; k];
    let mut den = vec![vec![0.0; k]; k];
    for i in 0..history.n_individuals() {
        for obs in data.pairs().neighbors(i) {
            let j = obs.partner;
            for a in 0..k {
                let da = delta[i * k + a];
                for b in 0..k {
                    let w = da * delta[j * k + b];
                    num[a][b] += w * obs.links as f64;
                    den[a][b] += w * obs.slots as f64;
                }
            }
        }
    }
    let mut pi = vec![vec![UNOBSERVED_PI; k]; k];
    let mut empty_blocks = 0;
    for a in 0..k {
        for b in a..k {
            let d = den[a][b] + den[b][a];
            if d > 0.0 {
                let p = ((num[a][b] + num[b][a]) / d).clamp(0.0, 1.0);
                pi[a][b] = p;
                pi[b][a] = p;
            } else {
                empty_blocks += 1;
            }
        }
    }
    Ok(InitialParams {
        beta,
        pi,
        empty_blocks,
    })
}

/// Complete initialization: hard labels, softened memberships and starting parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Initialization {
    pub labels: Vec<usize>,
    pub delta: Vec<f64>,
    pub params: InitialParams,
}

pub fn initialize(data: &Dataset, k: usize, options: &InitOptions) -> Result<Initialization> {
    options.validate()?;
    let s = similarity_matrix(data);
    let labels = kmeans_rows(&s, k, options)?;
    let delta = soften(&labels, k, options.omega);
    let params = init_params(&delta, k, data)?;
    Ok(Initialization {
        labels,
        delta,
        params,
    })
}
