//! Turning timestamped publication records into an event history and snapshots.
//!
//! Times are measured in days since the Unix epoch. Authors publishing in the seed
//! window `[t_start, t_start + ancestor_len)` form the initial population, present
//! from `t0 = t_start + ancestor_len`. Everybody reachable from them through
//! co-authorship in `[t_start, t_end]` joins the node set. A newcomer is born at
//! their first publication; every author dies one bin after their last publication,
//! unless that falls at or after `t_end`. Initial authors whose death would come at
//! or before `t0` are dormant and left out. Snapshots are taken at the end of each
//! bin of `[t0, t_end]` and link two authors when they share a record inside the bin.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};
use crate::model::{Event, EventHistory, EventKind, SnapshotSeries};

const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PublicationKind {
    Original,
    Revision,
}

impl PublicationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PublicationKind::Original => "original",
            PublicationKind::Revision => "revision",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PublicationRecord {
    /// Days since the Unix epoch.
    pub timestamp: f64,
    pub kind: PublicationKind,
    /// Distinct author identifiers.
    pub authors: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TieRule {
    /// Among authors whose events share a time, keep only the one with the most
    /// publications (the lexicographically smallest on equal counts).
    DiscardFewerPublications,
    /// Offset tied events by `rank * 1e-6` bins, ranking authors by identifier.
    EpsilonJitter,
}

impl std::str::FromStr for TieRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discard-fewer-publications" => Ok(TieRule::DiscardFewerPublications),
            "epsilon-jitter" => Ok(TieRule::EpsilonJitter),
            other => Err(Error::input(format!("unknown tie rule {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IngestConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub ancestor_len: f64,
    pub bin_width: f64,
    pub tie_rule: TieRule,
    /// Keep only this many authors of highest co-author degree.
    pub max_authors: Option<usize>,
}

impl IngestConfig {
    pub fn t0(&self) -> f64 {
        self.t_start + self.ancestor_len
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.t_start, self.t_end, self.ancestor_len, self.bin_width]
            .iter()
            .all(|x| x.is_finite());
        if !finite || !(self.bin_width > 0.0) {
            return Err(Error::input(
                "bin width must be positive and all times finite",
            ));
        }
        if !(self.ancestor_len > 0.0) || self.t0() >= self.t_end {
            return Err(Error::input(
                "the seed window must be non-empty and end before the observation window does",
            ));
        }
        Ok(())
    }

    /// `(start, end)` of every bin covering `[t0, t_end]`; the last one is clipped.
    pub fn bins(&self) -> Vec<(f64, f64)> {
        let t0 = self.t0();
        let count = ((self.t_end - t0) / self.bin_width).ceil().max(1.0) as usize;
        (0..count)
            .map(|b| {
                let start = t0 + b as f64 * self.bin_width;
                let end = if b + 1 == count {
                    self.t_end
                } else {
                    start + self.bin_width
                };
                (start, end)
            })
            .filter(|(s, e)| e > s)
            .collect()
    }
}

/// Result of ingestion: the standard data plus the author behind every id.
#[derive(Clone, Debug)]
pub struct IngestOutput {
    pub history: EventHistory,
    pub snapshots: SnapshotSeries,
    /// Author identifier of each id (index = id).
    pub authors: Vec<String>,
    /// Authors removed by the tie rule.
    pub discarded: Vec<String>,
    /// Seed-window authors with no activity within one bin of `t0`.
    pub dormant: Vec<String>,
}

/// Parses a timestamp given as epoch seconds or ISO-8601 into days since the epoch.
pub fn parse_timestamp(text: &str) -> Result<f64> {
    let text = text.trim();
    if let Ok(seconds) = text.parse::<f64>() {
        if seconds.is_finite() {
            return Ok(seconds / SECONDS_PER_DAY);
        }
    }
    let seconds = if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9
    } else if let Ok(dt) = NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S%.f") {
        let utc = dt.and_utc();
        utc.timestamp() as f64 + f64::from(utc.timestamp_subsec_nanos()) * 1e-9
    } else if let Ok(d) = NaiveDate::parse_from_str(text, "%Y-%m-%d") {
        d.and_hms_opt(0, 0, 0)
            .expect("midnight exists")
            .and_utc()
            .timestamp() as f64
    } else {
        return Err(Error::input(format!("unrecognized timestamp {text:?}")));
    };
    Ok(seconds / SECONDS_PER_DAY)
}

/// Parses `timestamp<TAB>kind<TAB>author1,author2,...` lines; blank lines are skipped.
pub fn parse_publications(text: &str) -> Result<Vec<PublicationRecord>> {
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fail = |msg: &str| Error::input(format!("publications line {}: {msg}", n + 1));
        let mut fields = line.split('\t');
        let (Some(ts), Some(kind), Some(authors), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(fail("expected three tab-separated fields"));
        };
        let timestamp = parse_timestamp(ts).map_err(|e| fail(&e.to_string()))?;
        let kind = match kind.trim() {
            "original" => PublicationKind::Original,
            "revision" => PublicationKind::Revision,
            other => return Err(fail(&format!("unknown kind {other:?}"))),
        };
        let mut list: Vec<String> = Vec::new();
        for a in authors.split(',') {
            let a = a.trim();
            if a.is_empty() {
                return Err(fail("empty author identifier"));
            }
            if !list.iter().any(|x| x == a) {
                list.push(a.to_string());
            }
        }
        records.push(PublicationRecord {
            timestamp,
            kind,
            authors: list,
        });
    }
    Ok(records)
}

fn in_window<'a>(
    records: &'a [PublicationRecord],
    config: &'a IngestConfig,
) -> impl Iterator<Item = &'a PublicationRecord> + 'a {
    records
        .iter()
        .filter(|r| r.timestamp >= config.t_start && r.timestamp <= config.t_end)
}

/// Initial authors and the co-authorship closure around them.
pub fn ancestor_closure(
    records: &[PublicationRecord],
    config: &IngestConfig,
) -> Result<(BTreeSet<String>, BTreeSet<String>)> {
    config.validate()?;
    let t0 = config.t0();
    let v0: BTreeSet<String> = in_window(records, config)
        .filter(|r| r.timestamp < t0)
        .flat_map(|r| r.authors.iter().cloned())
        .collect();
    if v0.is_empty() {
        return Err(Error::Ingest(
            "no author publishes in the seed window".into(),
        ));
    }

    let window: Vec<&PublicationRecord> = in_window(records, config).collect();
    let mut by_author: HashMap<&str, Vec<usize>> = HashMap::new();
    for (r, rec) in window.iter().enumerate() {
        for a in &rec.authors {
            by_author.entry(a.as_str()).or_default().push(r);
        }
    }
    let mut nodes = v0.clone();
    let mut queue: VecDeque<String> = v0.iter().cloned().collect();
    let mut seen_record = vec![false; window.len()];
    while let Some(a) = queue.pop_front() {
        for &r in by_author.get(a.as_str()).into_iter().flatten() {
            if std::mem::replace(&mut seen_record[r], true) {
                continue;
            }
            for b in &window[r].authors {
                if nodes.insert(b.clone()) {
                    queue.push_back(b.clone());
                }
            }
        }
    }
    Ok((v0, nodes))
}

/// Keeps the `max` authors with the most distinct co-authors inside `nodes`
/// (ties by identifier).
pub fn top_degree(
    records: &[PublicationRecord],
    nodes: &BTreeSet<String>,
    config: &IngestConfig,
    max: usize,
) -> BTreeSet<String> {
    let mut partners: BTreeMap<&str, BTreeSet<&str>> = nodes
        .iter()
        .map(|a| (a.as_str(), BTreeSet::new()))
        .collect();
    for rec in in_window(records, config) {
        for a in rec.authors.iter().filter(|a| nodes.contains(*a)) {
            for b in rec.authors.iter().filter(|b| *b != a && nodes.contains(*b)) {
                partners
                    .get_mut(a.as_str())
                    .expect("node")
                    .insert(b.as_str());
            }
        }
    }
    let mut ranked: Vec<(&str, usize)> = partners.iter().map(|(a, p)| (*a, p.len())).collect();
    ranked.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(y.0)));
    ranked
        .into_iter()
        .take(max)
        .map(|(a, _)| a.to_string())
        .collect()
}

#[derive(Clone, Debug)]
struct AuthorSpan {
    first: f64,
    last: f64,
    count: usize,
}

/// Builds the history and snapshots over the given node set.
pub fn build_history_and_snapshots(
    records: &[PublicationRecord],
    v0: &BTreeSet<String>,
    nodes: &BTreeSet<String>,
    config: &IngestConfig,
) -> Result<IngestOutput> {
    config.validate()?;
    let t0 = config.t0();
    let t_end = config.t_end;
    let w = config.bin_width;

    let mut spans: BTreeMap<&str, AuthorSpan> = BTreeMap::new();
    for rec in in_window(records, config) {
        for a in rec.authors.iter().filter(|a| nodes.contains(*a)) {
            let s = spans.entry(a.as_str()).or_insert(AuthorSpan {
                first: rec.timestamp,
                last: rec.timestamp,
                count: 0,
            });
            s.first = s.first.min(rec.timestamp);
            s.last = s.last.max(rec.timestamp);
            s.count += 1;
        }
    }

    // Candidate events: (time, kind, author).
    let mut events: Vec<(f64, EventKind, &str)> = Vec::new();
    let mut dormant: BTreeSet<&str> = BTreeSet::new();
    for (&a, s) in &spans {
        let death = s.last + w;
        if v0.contains(a) {
            if death <= t0 {
                dormant.insert(a);
                continue;
            }
        } else {
            events.push((s.first, EventKind::Birth, a));
        }
        if death < t_end {
            events.push((death, EventKind::Death, a));
        }
    }
    events.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.2.cmp(y.2)));

    let mut discarded: BTreeSet<&str> = BTreeSet::new();
    let mut start = 0;
    while start < events.len() {
        let mut end = start + 1;
        while end < events.len() && events[end].0 == events[start].0 {
            end += 1;
        }
        if end - start > 1 {
            match config.tie_rule {
                TieRule::DiscardFewerPublications => {
                    let group: Vec<&str> = events[start..end]
                        .iter()
                        .map(|e| e.2)
                        .filter(|a| !discarded.contains(a))
                        .collect();
                    if group.len() > 1 {
                        let keep = group
                            .iter()
                            .copied()
                            .max_by(|a, b| spans[a].count.cmp(&spans[b].count).then(b.cmp(a)))
                            .expect("non-empty group");
                        discarded.extend(group.into_iter().filter(|&a| a != keep));
                    }
                }
                TieRule::EpsilonJitter => {
                    // Authors within a group are already sorted by identifier.
                    for (rank, e) in events[start..end].iter_mut().enumerate() {
                        e.0 += rank as f64 * 1e-6 * w;
                    }
                }
            }
        }
        start = end;
    }
    events.retain(|e| !discarded.contains(e.2));
    events.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.2.cmp(y.2)));
    if let Some(pair) = events.windows(2).find(|p| p[0].0 == p[1].0) {
        return Err(Error::Ingest(format!(
            "events of {} and {} remain tied at time {}",
            pair[0].2, pair[1].2, pair[0].0
        )));
    }
    if let Some(e) = events.iter().find(|e| e.0 > t_end) {
        return Err(Error::Ingest(format!(
            "jittered event of {} passes the window end",
            e.2
        )));
    }

    let initial: Vec<&str> = v0
        .iter()
        .map(String::as_str)
        .filter(|a| spans.contains_key(a) && !discarded.contains(a) && !dormant.contains(a))
        .collect();
    let mut ids: HashMap<&str, usize> = initial.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    let mut authors: Vec<String> = initial.iter().map(|a| a.to_string()).collect();
    let mut history_events = Vec::with_capacity(events.len());
    for &(time, kind, a) in &events {
        if kind == EventKind::Birth {
            ids.insert(a, authors.len());
            authors.push(a.to_string());
        }
        history_events.push(Event {
            time,
            kind,
            id: ids[a],
        });
    }
    let history = EventHistory::new(t0, t_end, (0..initial.len()).collect(), history_events)
        .map_err(|e| Error::Ingest(e.to_string()))?;

    let bins = config.bins();
    let mut edges: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); bins.len()];
    for rec in in_window(records, config) {
        if rec.timestamp < t0 {
            continue;
        }
        let mut b = (((rec.timestamp - t0) / w).floor() as usize).min(bins.len() - 1);
        while b > 0 && rec.timestamp < bins[b].0 {
            b -= 1;
        }
        while b + 1 < bins.len() && rec.timestamp >= bins[b + 1].0 {
            b += 1;
        }
        let members: Vec<usize> = rec
            .authors
            .iter()
            .filter_map(|a| ids.get(a.as_str()).copied())
            .collect();
        for (x, &i) in members.iter().enumerate() {
            for &j in &members[x + 1..] {
                edges[b].insert((i.min(j), i.max(j)));
            }
        }
    }
    let times: Vec<f64> = bins.iter().map(|&(_, end)| end).collect();
    let snapshots = SnapshotSeries::new(
        times,
        edges.into_iter().map(|s| s.into_iter().collect()).collect(),
    )?;
    snapshots
        .validate_against(&history)
        .map_err(|e| Error::Ingest(format!("inconsistent snapshot: {e}")))?;

    Ok(IngestOutput {
        history,
        snapshots,
        authors,
        discarded: discarded.into_iter().map(str::to_string).collect(),
        dormant: dormant.into_iter().map(str::to_string).collect(),
    })
}

/// Closure, optional degree filter, then history and snapshots.
pub fn ingest(records: &[PublicationRecord], config: &IngestConfig) -> Result<IngestOutput> {
    let (v0, mut nodes) = ancestor_closure(records, config)?;
    if let Some(max) = config.max_authors {
        nodes = top_degree(records, &nodes, config, max);
    }
    let v0: BTreeSet<String> = v0.intersection(&nodes).cloned().collect();
    if v0.is_empty() {
        return Err(Error::Ingest(
            "the degree filter removed every initial author".into(),
        ));
    }
    build_history_and_snapshots(records, &v0, &nodes, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64, authors: &[&str]) -> PublicationRecord {
        PublicationRecord {
            timestamp: t,
            kind: PublicationKind::Original,
            authors: authors.iter().map(|a| a.to_string()).collect(),
        }
    }

    fn config() -> IngestConfig {
        IngestConfig {
            t_start: 0.0,
            t_end: 100.0,
            ancestor_len: 10.0,
            bin_width: 20.0,
            tie_rule: TieRule::DiscardFewerPublications,
            max_authors: None,
        }
    }

    #[test]
    fn timestamps() {
        assert_eq!(parse_timestamp("86400").unwrap(), 1.0);
        assert_eq!(parse_timestamp("1970-01-03").unwrap(), 2.0);
        assert_eq!(parse_timestamp("1970-01-02T12:00:00Z").unwrap(), 1.5);
        assert_eq!(parse_timestamp("1970-01-02T06:00:00").unwrap(), 1.25);
        assert!(parse_timestamp("yesterday").is_err());
    }

    #[test]
    fn parse_lines() {
        let text = "0\toriginal\ta,b\n\n86400\trevision\tc , a,a\n";
        let recs = parse_publications(text).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].authors, vec!["c", "a"]);
        assert_eq!(recs[1].kind, PublicationKind::Revision);
        assert!(parse_publications("0\toriginal").is_err());
        assert!(parse_publications("0\tpreprint\ta").is_err());
        assert!(parse_publications("0\toriginal\ta,,b").is_err());
    }

    #[test]
    fn isolated_seed_author() {
        let (v0, v) = ancestor_closure(&[rec(1.0, &["a"])], &config()).unwrap();
        assert_eq!(v0, v);
        assert_eq!(v.len(), 1);
        assert!(ancestor_closure(&[rec(50.0, &["a"])], &config()).is_err());
    }

    #[test]
    fn single_newcomer_lifespan() {
        let records = [rec(1.0, &["a"]), rec(35.0, &["a", "b"]), rec(40.0, &["a"])];
        let out = ingest(&records, &config()).unwrap();
        let h = &out.history;
        assert_eq!(out.authors, vec!["a", "b"]);
        assert_eq!(h.lifespan(1).birth, 35.0);
        assert_eq!(h.lifespan(1).death, 55.0);
        assert_eq!(h.lifespan(0).death, 60.0);
        assert_eq!(out.snapshots.times(), &[30.0, 50.0, 70.0, 90.0, 100.0]);
        assert_eq!(out.snapshots.edges(1), &[(0, 1)]);
    }

    #[test]
    fn tied_deaths_drop_the_less_prolific_author() {
        // a and b both last publish at 30 and would both die at 50.
        let records = [rec(1.0, &["a"]), rec(30.0, &["a", "b"])];
        let out = ingest(&records, &config()).unwrap();
        assert_eq!(out.authors, vec!["a"]);
        assert_eq!(out.discarded, vec!["b"]);
        let jitter = IngestConfig {
            tie_rule: TieRule::EpsilonJitter,
            ..config()
        };
        let out = ingest(&records, &jitter).unwrap();
        assert_eq!(out.authors, vec!["a", "b"]);
        assert_eq!(out.history.n_events(), 3);
    }

    #[test]
    fn dormant_seed_authors_are_dropped() {
        // Bins are 20 wide, so the three seed authors die at 24, 21 and 22.
        let records = [
            rec(4.0, &["a"]),
            rec(1.0, &["c"]),
            rec(2.0, &["d"]),
            rec(-5.0, &["e"]),
        ];
        let config = IngestConfig {
            ancestor_len: 10.0,
            ..config()
        };
        let out = ingest(&records, &config).unwrap();
        assert_eq!(out.authors, vec!["a", "c", "d"]);
        assert!(out.dormant.is_empty());
        let late = IngestConfig {
            t_start: 0.0,
            ancestor_len: 22.0,
            ..config
        };
        let out = ingest(&records, &late).unwrap();
        assert_eq!(out.authors, vec!["a"]);
        assert_eq!(out.dormant, vec!["c", "d"]);
        assert_eq!(out.history.lifespan(0).death, 24.0);
    }

    #[test]
    fn late_newcomer_survives_to_the_end() {
        let out = ingest(&[rec(1.0, &["a"]), rec(95.0, &["a", "b"])], &config()).unwrap();
        assert!(!out.history.lifespan(1).dies);
        assert_eq!(out.history.lifespan(1).death, 100.0);
    }
}
