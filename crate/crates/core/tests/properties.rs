mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use bdsbm::bd_rates::estimate_rates;
use bdsbm::eval::align_labels;
use bdsbm::ingest::{ancestor_closure, parse_publications, IngestConfig, TieRule};
use bdsbm::init::{kmeans, wcss};
use bdsbm::simulator::{simulate, InitialComposition, SimConfig, SnapshotSchedule};
use bdsbm::{
    complete_log_likelihood, io, Dataset, Event, EventHistory, LabelAssignment, ModelParams,
};

use common::{high_signal, joint_log_density};

fn small_config(seed: u64, lambda: f64, mu: f64) -> SimConfig {
    SimConfig {
        params: ModelParams::shared(
            lambda,
            mu,
            vec![0.3, 0.3, 0.4],
            vec![
                vec![0.8, 0.1, 0.2],
                vec![0.1, 0.7, 0.3],
                vec![0.2, 0.3, 0.6],
            ],
        )
        .unwrap(),
        initial: InitialComposition::Sizes(vec![4, 5, 3]),
        t0: 0.0,
        t_end: 10.0,
        snapshots: SnapshotSchedule::Uniform { step: 2.5 },
        seed,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn complete_likelihood_matches_replay(seed in 0u64..10_000, lambda in 0.01f64..0.1, mu in 0.0f64..0.1) {
        let sim = simulate(&small_config(seed, lambda, mu)).unwrap();
        let data = Dataset::new(sim.history.clone(), sim.snapshots.clone()).unwrap();
        let params = small_config(seed, lambda, mu).params;
        let lib = complete_log_likelihood(&params, &sim.labels, &data).unwrap();
        let z = sim.labels.to_dense(&sim.history).unwrap();
        let oracle = joint_log_density(&params, &z, &sim.history, &sim.snapshots);
        prop_assert!((lib - oracle).abs() <= 1e-9 * oracle.abs().max(1.0), "{} vs {}", lib, oracle);
    }

    #[test]
    fn relabeling_leaves_the_likelihood_unchanged(seed in 0u64..10_000, perm_index in 0usize..6) {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let perm = perms[perm_index];
        let config = small_config(seed, 0.05, 0.03);
        let sim = simulate(&config).unwrap();
        let data = Dataset::new(sim.history.clone(), sim.snapshots.clone()).unwrap();
        let before = complete_log_likelihood(&config.params, &sim.labels, &data).unwrap();
        let after = complete_log_likelihood(
            &config.params.permuted(&perm),
            &sim.labels.permuted(&perm),
            &data,
        )
        .unwrap();
        prop_assert!((before - after).abs() <= 1e-9 * before.abs().max(1.0));
    }

    #[test]
    fn stretching_time_divides_the_rates(seed in 0u64..10_000, scale in 0.1f64..10.0) {
        let sim = simulate(&small_config(seed, 0.08, 0.05)).unwrap();
        let h = &sim.history;
        let stretched = EventHistory::new(
            h.t0() * scale,
            h.t_end() * scale,
            h.v0().to_vec(),
            h.events().iter().map(|e| Event { time: e.time * scale, ..*e }).collect(),
        )
        .unwrap();
        let a = estimate_rates(h).unwrap();
        let b = estimate_rates(&stretched).unwrap();
        prop_assert!((a.lambda_hat - b.lambda_hat * scale).abs() <= 1e-12 * a.lambda_hat.max(1e-300));
        prop_assert!((a.mu_hat - b.mu_hat * scale).abs() <= 1e-12 * a.mu_hat.max(1e-300));
    }

    #[test]
    fn parsers_reject_garbage_without_panicking(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let text = String::from_utf8_lossy(&bytes);
        let _ = io::parse_events(&text);
        let _ = io::parse_meta(&text);
        let _ = io::parse_snapshots(&text, &[0.0, 1.0]);
        let _ = io::parse_labels(&text, None);
        let _ = io::parse_params(&text);
        let _ = io::parse_memberships(&text);
        let _ = parse_publications(&text);
    }

    #[test]
    fn parsers_survive_near_valid_rows(rows in proptest::collection::vec("[-0-9.e,x ]{0,12}", 0..8)) {
        let events = format!("tau,b,id\n{}", rows.join("\n"));
        let labels = format!("id,k\n{}", rows.join("\n"));
        let snaps = format!("t,i,j\n{}", rows.join("\n"));
        let _ = io::parse_events(&events);
        let _ = io::parse_labels(&labels, Some(3));
        let _ = io::parse_snapshots(&snaps, &[0.0, 1.0]);
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn alignment_agrees_with_all_24_relabelings() {
    let sim = high_signal(0.03, 0.02, 20.0, 5);
    let truth = &sim.labels;
    let perms = permutations(4);
    assert_eq!(perms.len(), 24);
    // Predictions: the truth relabeled, with every seventh individual moved.
    for (n, shuffle) in perms.iter().enumerate() {
        let pred = LabelAssignment::new(
            4,
            truth
                .iter()
                .map(|(id, c)| {
                    let c = if id % 7 == n % 7 { (c + 1) % 4 } else { c };
                    (id, shuffle[c])
                })
                .collect(),
        )
        .unwrap();
        let agree = |perm: &[usize]| {
            pred.iter()
                .filter(|&(id, p)| truth.get(id) == Some(perm[p]))
                .count()
        };
        let best = perms.iter().map(|p| agree(p)).max().unwrap();
        let found = align_labels(&pred, truth, 4).unwrap();
        assert_eq!(agree(&found), best);
    }
}

#[test]
fn kmeans_reaches_the_exhaustive_optimum() {
    // Two well separated groups of six, plus mild noise.
    let raw: Vec<Vec<f64>> = (0..12)
        .map(|i| {
            let base = if i < 6 { 0.0 } else { 5.0 };
            vec![base + 0.1 * (i % 3) as f64, base - 0.07 * (i % 4) as f64]
        })
        .collect();
    let points: Vec<&[f64]> = raw.iter().map(Vec::as_slice).collect();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << 11) {
        let labels: Vec<usize> = (0..12).map(|i| ((mask >> i) & 1) as usize).collect();
        best = best.min(wcss(&points, &labels, 2));
    }
    let (labels, found) = kmeans(&points, 2, 10, 3).unwrap();
    assert!((found - best).abs() <= 1e-9, "{found} vs {best}");
    assert!((wcss(&points, &labels, 2) - found).abs() <= 1e-12);
}

#[test]
fn closure_follows_coauthor_chains() {
    let records = parse_publications(
        "0\toriginal\ta\n\
         86400\toriginal\ta,b\n\
         1728000\toriginal\tb,c\n\
         3456000\toriginal\tc,d\n\
         4320000\toriginal\te,f\n",
    )
    .unwrap();
    let config = IngestConfig {
        t_start: 0.0,
        t_end: 100.0,
        ancestor_len: 10.0,
        bin_width: 20.0,
        tie_rule: TieRule::DiscardFewerPublications,
        max_authors: None,
    };
    let (v0, nodes) = ancestor_closure(&records, &config).unwrap();
    let names = |s: &[&str]| s.iter().map(|x| x.to_string()).collect::<BTreeSet<_>>();
    assert_eq!(v0, names(&["a", "b"]));
    assert_eq!(nodes, names(&["a", "b", "c", "d"]));
}

#[test]
fn within_block_links_match_their_probability() {
    let sim = simulate(&common::high_signal_config(0.0, 0.0, 60.0, 17)).unwrap();
    let first: Vec<usize> = sim
        .labels
        .iter()
        .filter(|&(_, c)| c == 0)
        .map(|(id, _)| id)
        .collect();
    let mut links = 0usize;
    let mut trials = 0usize;
    for s in 0..sim.snapshots.len() {
        let edges: BTreeSet<(usize, usize)> = sim.snapshots.edges(s).iter().copied().collect();
        for (a, &i) in first.iter().enumerate() {
            for &j in &first[a + 1..] {
                trials += 1;
                links += usize::from(edges.contains(&(i.min(j), i.max(j))));
            }
        }
    }
    let p = links as f64 / trials as f64;
    let sd = (0.75 * 0.25 / trials as f64).sqrt();
    assert!((p - 0.75).abs() <= 4.0 * sd, "{p} over {trials} trials");
}
