//! Clustering accuracy against known labels, up to relabeling of communities.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{EventHistory, LabelAssignment};

/// Evaluation of predicted labels against the truth after optimal relabeling.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlignedReport {
    /// `permutation[p]` is the true community matched to predicted community `p`.
    pub permutation: Vec<usize>,
    /// Rows: true community; columns: aligned predicted community.
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    /// `(time, accuracy over individuals alive at that time)`; `NaN` when nobody is alive.
    pub accuracy_series: Vec<(f64, f64)>,
}

/// Assignment maximizing `sum_r weight[r][perm[r]]` over permutations of a square matrix.
pub fn max_weight_assignment(weight: &[Vec<f64>]) -> Vec<usize> {
    let n = weight.len();
    if n == 0 {
        return Vec::new();
    }
    let max = weight
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    // Shortest augmenting paths with potentials on the cost max - weight
    // (1-based arrays, column 0 is the virtual start).
    let cost = |r: usize, c: usize| max - weight[r - 1][c - 1];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for r in 1..=n {
        row_of[0] = r;
        let mut col = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col] = true;
            let r0 = row_of[col];
            let mut delta = f64::INFINITY;
            let mut next = 0;
            for c in 1..=n {
                if !used[c] {
                    let reduced = cost(r0, c) - u[r0] - v[c];
                    if reduced < minv[c] {
                        minv[c] = reduced;
                        way[c] = col;
                    }
                    if minv[c] < delta {
                        delta = minv[c];
                        next = c;
                    }
                }
            }
            for c in 0..=n {
                if used[c] {
                    u[row_of[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            col = next;
            if row_of[col] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col];
            row_of[col] = row_of[prev];
            col = prev;
            if col == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for c in 1..=n {
        assignment[row_of[c] - 1] = c - 1;
    }
    assignment
}

fn co_occurrence(
    pred: &LabelAssignment,
    truth: &LabelAssignment,
    k: usize,
) -> Result<Vec<Vec<usize>>> {
    if pred.len() != truth.len() {
        return Err(Error::input(
            "predicted and true labels cover different individuals",
        ));
    }
    if pred.k() > k || truth.k() > k {
        return Err(Error::input("labels use more communities than K"));
    }
    let mut counts = vec![vec![0usize; k]; k];
    for (id, p) in pred.iter() {
        let t = truth
            .get(id)
            .ok_or_else(|| Error::input(format!("individual {id} has no true label")))?;
        counts[p][t] += 1;
    }
    Ok(counts)
}

/// Relabeling of predicted communities that maximizes agreement with the truth:
/// predicted community `p` corresponds to true community `perm[p]`.
pub fn align_labels(
    pred: &LabelAssignment,
    truth: &LabelAssignment,
    k: usize,
) -> Result<Vec<usize>> {
    let counts = co_occurrence(pred, truth, k)?;
    let weight: Vec<Vec<f64>> = counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64).collect())
        .collect();
    Ok(max_weight_assignment(&weight))
}

/// Aligned confusion matrix, overall accuracy and accuracy among the living at each time.
pub fn report(
    pred: &LabelAssignment,
    truth: &LabelAssignment,
    history: &EventHistory,
    times: &[f64],
) -> Result<AlignedReport> {
    let k = pred.k().max(truth.k());
    let permutation = align_labels(pred, truth, k)?;
    let mut confusion = vec![vec![0usize; k]; k];
    for (id, p) in pred.iter() {
        let t = truth.get(id).expect("checked during alignment");
        confusion[t][permutation[p]] += 1;
    }
    let total: usize = confusion.iter().flatten().sum();
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    let accuracy = if total == 0 {
        f64::NAN
    } else {
        correct as f64 / total as f64
    };

    let accuracy_series = times
        .iter()
        .map(|&t| {
            let (mut hit, mut seen) = (0usize, 0usize);
            for i in history.alive_at(t) {
                let id = history.id_of(i);
                if let (Some(p), Some(tr)) = (pred.get(id), truth.get(id)) {
                    seen += 1;
                    hit += usize::from(permutation[p] == tr);
                }
            }
            (
                t,
                if seen == 0 {
                    f64::NAN
                } else {
                    hit as f64 / seen as f64
                },
            )
        })
        .collect();
    Ok(AlignedReport {
        permutation,
        confusion,
        accuracy,
        accuracy_series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(k: usize, v: &[usize]) -> LabelAssignment {
        LabelAssignment::new(k, v.iter().copied().enumerate().collect()).unwrap()
    }

    #[test]
    fn identity_and_swap() {
        let t = labels(2, &[0, 0, 1, 1, 0]);
        assert_eq!(align_labels(&t, &t, 2).unwrap(), vec![0, 1]);
        let swapped = labels(2, &[1, 1, 0, 0, 1]);
        assert_eq!(align_labels(&swapped, &t, 2).unwrap(), vec![1, 0]);
    }

    #[test]
    fn assignment_matches_brute_force_on_small_matrices() {
        let w = vec![
            vec![7.0, 2.0, 1.0, 9.0],
            vec![3.0, 8.0, 4.0, 2.0],
            vec![6.0, 6.0, 5.0, 1.0],
            vec![2.0, 9.0, 3.0, 4.0],
        ];
        let a = max_weight_assignment(&w);
        let value: f64 = a.iter().enumerate().map(|(r, &c)| w[r][c]).sum();
        assert_eq!(value, 9.0 + 4.0 + 6.0 + 9.0);
    }

    #[test]
    fn mismatched_sets_are_rejected() {
        let a = labels(2, &[0, 1]);
        let b = labels(2, &[0, 1, 1]);
        assert!(align_labels(&a, &b, 2).is_err());
    }
}
