//! Text file formats.
//!
//! | file | content |
//! |------|---------|
//! | `events.csv` | header `tau,b,id`, rows sorted by `tau`, `b` is `1` (birth) or `-1` (death) |
//! | `meta.json` | `{"t0", "tT", "v0": [ids], "snapshot_times": [...]}` |
//! | `snapshots.csv` | header `t,i,j` with `i < j`; `t` is one of `snapshot_times` |
//! | `labels.csv` | header `id,k`, communities numbered from 1 |
//! | `params.json` | `{"K", "rate_mode", "lambda", "mu", "beta", "pi"}`; rates are numbers in shared mode and arrays per community |
//! | `memberships.csv` | header `id,delta_1,...,delta_K` |
//! | `elbo.csv` | header `iter,elbo` |
//! | `icl.csv` | header `K,seed,elbo,icl` |
//! | `authors.csv` | header `id,author` |
//! | `accuracy_series.csv` | header `t,accuracy` |
//!
//! Every float is written with 17 significant digits, so values round-trip exactly.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::AlignedReport;
use crate::model::{
    Event, EventHistory, EventKind, IndividualId, LabelAssignment, ModelParams, RateMode, Rates,
    SnapshotSeries,
};
use crate::selection::IclTable;
use crate::util::fmt_f64;
use crate::variational::VariationalState;

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &[&str], file: &str) -> Result<()> {
    let header = reader
        .headers()
        .map_err(|e| Error::input(format!("{file}: {e}")))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::input(format!(
            "{file}: expected header {:?}, found {:?}",
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

fn records(text: &str, expected: &[&str], file: &str) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv_reader(text);
    check_header(&mut reader, expected, file)?;
    let mut out = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::input(format!("{file} row {}: {e}", n + 1)))?;
        if rec.len() != expected.len() {
            return Err(Error::input(format!(
                "{file} row {}: wrong field count",
                n + 1
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    i: usize,
    file: &str,
    row: usize,
) -> Result<T> {
    rec[i]
        .parse()
        .map_err(|_| Error::input(format!("{file} row {row}: cannot parse {:?}", &rec[i])))
}

fn finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::input(format!("{what} must be finite")))
    }
}

fn raw(x: f64) -> Result<Box<RawValue>> {
    let x = finite(x, "serialized value")?;
    RawValue::from_string(fmt_f64(x)).map_err(|e| Error::input(e.to_string()))
}

fn raw_vec(xs: &[f64]) -> Result<Vec<Box<RawValue>>> {
    xs.iter().map(|&x| raw(x)).collect()
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::input(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct Meta {
    pub t0: f64,
    #[serde(rename = "tT")]
    pub t_end: f64,
    pub v0: Vec<IndividualId>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

#[derive(Serialize)]
struct MetaOut {
    t0: Box<RawValue>,
    #[serde(rename = "tT")]
    t_end: Box<RawValue>,
    v0: Vec<IndividualId>,
    snapshot_times: Vec<Box<RawValue>>,
}

pub fn write_events(history: &EventHistory) -> String {
    let mut out = String::from("tau,b,id\n");
    for ev in history.events() {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(ev.time),
            ev.kind.sign(),
            ev.id
        ));
    }
    out
}

pub fn parse_events(text: &str) -> Result<Vec<Event>> {
    const FILE: &str = "events.csv";
    records(text, &["tau", "b", "id"], FILE)?
        .iter()
        .enumerate()
        .map(|(n, rec)| {
            let time = finite(field(rec, 0, FILE, n + 1)?, "event time")?;
            let kind = match field::<i64>(rec, 1, FILE, n + 1)? {
                1 => EventKind::Birth,
                -1 => EventKind::Death,
                other => return Err(Error::input(format!("{FILE} row {}: b = {other}", n + 1))),
            };
            Ok(Event {
                time,
                kind,
                id: field(rec, 2, FILE, n + 1)?,
            })
        })
        .collect()
}

pub fn write_meta(history: &EventHistory, snapshot_times: &[f64]) -> Result<String> {
    to_json(&MetaOut {
        t0: raw(history.t0())?,
        t_end: raw(history.t_end())?,
        v0: history.v0().to_vec(),
        snapshot_times: raw_vec(snapshot_times)?,
    })
}

pub fn parse_meta(text: &str) -> Result<Meta> {
    serde_json::from_str(text).map_err(|e| Error::input(format!("meta.json: {e}")))
}

pub fn write_snapshots(snaps: &SnapshotSeries) -> String {
    let mut out = String::from("t,i,j\n");
    for (s, &t) in snaps.times().iter().enumerate() {
        let t = fmt_f64(t);
        for &(i, j) in snaps.edges(s) {
            out.push_str(&format!("{t},{i},{j}\n"));
        }
    }
    out
}

/// Edge rows grouped onto the given snapshot times (matched exactly).
pub fn parse_snapshots(text: &str, times: &[f64]) -> Result<SnapshotSeries> {
    const FILE: &str = "snapshots.csv";
    let index: HashMap<u64, usize> = times
        .iter()
        .enumerate()
        .map(|(s, t)| (t.to_bits(), s))
        .collect();
    let mut edges = vec![Vec::new(); times.len()];
    for (n, rec) in records(text, &["t", "i", "j"], FILE)?.iter().enumerate() {
        let t: f64 = field(rec, 0, FILE, n + 1)?;
        let s = *index.get(&t.to_bits()).ok_or_else(|| {
            Error::input(format!(
                "{FILE} row {}: time {t} is not a snapshot time",
                n + 1
            ))
        })?;
        let i: IndividualId = field(rec, 1, FILE, n + 1)?;
        let j: IndividualId = field(rec, 2, FILE, n + 1)?;
        if i >= j {
            return Err(Error::input(format!(
                "{FILE} row {}: expected i < j",
                n + 1
            )));
        }
        edges[s].push((i, j));
    }
    SnapshotSeries::new(times.to_vec(), edges)
}

/// Builds a validated dataset from the three text files.
pub fn load_dataset(events: &str, meta: &str, snapshots: &str) -> Result<Dataset> {
    let meta = parse_meta(meta)?;
    let history = EventHistory::new(meta.t0, meta.t_end, meta.v0, parse_events(events)?)?;
    let snaps = parse_snapshots(snapshots, &meta.snapshot_times)?;
    Dataset::new(history, snaps)
}

pub fn write_labels(labels: &LabelAssignment) -> String {
    let mut out = String::from("id,k\n");
    for (id, c) in labels.iter() {
        out.push_str(&format!("{id},{}\n", c + 1));
    }
    out
}

/// Labels are 1-based in the file; `K` is the largest label present unless given.
pub fn parse_labels(text: &str, k: Option<usize>) -> Result<LabelAssignment> {
    const FILE: &str = "labels.csv";
    let mut map = BTreeMap::new();
    for (n, rec) in records(text, &["id", "k"], FILE)?.iter().enumerate() {
        let id: IndividualId = field(rec, 0, FILE, n + 1)?;
        let c: usize = field(rec, 1, FILE, n + 1)?;
        if c == 0 {
            return Err(Error::input(format!(
                "{FILE} row {}: communities start at 1",
                n + 1
            )));
        }
        if map.insert(id, c - 1).is_some() {
            return Err(Error::input(format!("{FILE}: id {id} listed twice")));
        }
    }
    let k = k.unwrap_or_else(|| map.values().max().map_or(1, |m| m + 1));
    LabelAssignment::new(k, map)
}

#[derive(Serialize)]
struct ParamsOut {
    #[serde(rename = "K")]
    k: usize,
    rate_mode: RateMode,
    lambda: Box<RawValue>,
    mu: Box<RawValue>,
    beta: Vec<Box<RawValue>>,
    pi: Vec<Vec<Box<RawValue>>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RateIn {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsIn {
    #[serde(rename = "K")]
    k: usize,
    rate_mode: RateMode,
    lambda: RateIn,
    mu: RateIn,
    beta: Vec<f64>,
    pi: Vec<Vec<f64>>,
}

fn raw_rate(values: &[f64], scalar: bool) -> Result<Box<RawValue>> {
    if scalar {
        raw(values[0])
    } else {
        let inner: Vec<String> = values
            .iter()
            .map(|&x| finite(x, "rate").map(fmt_f64))
            .collect::<Result<_>>()?;
        RawValue::from_string(format!("[{}]", inner.join(", ")))
            .map_err(|e| Error::input(e.to_string()))
    }
}

pub fn write_params(params: &ModelParams) -> Result<String> {
    let (lambda, mu) = match &params.rates {
        Rates::Shared { lambda, mu } => (raw_rate(&[*lambda], true)?, raw_rate(&[*mu], true)?),
        Rates::PerCommunity { lambda, mu } => (raw_rate(lambda, false)?, raw_rate(mu, false)?),
    };
    to_json(&ParamsOut {
        k: params.k(),
        rate_mode: params.rate_mode(),
        lambda,
        mu,
        beta: raw_vec(&params.beta)?,
        pi: params
            .pi
            .iter()
            .map(|row| raw_vec(row))
            .collect::<Result<_>>()?,
    })
}

pub fn parse_params(text: &str) -> Result<ModelParams> {
    let p: ParamsIn =
        serde_json::from_str(text).map_err(|e| Error::input(format!("params.json: {e}")))?;
    let rates = match (p.rate_mode, p.lambda, p.mu) {
        (RateMode::Shared, RateIn::Scalar(lambda), RateIn::Scalar(mu)) => {
            Rates::Shared { lambda, mu }
        }
        (RateMode::PerCommunity, RateIn::Vector(lambda), RateIn::Vector(mu)) => {
            Rates::PerCommunity { lambda, mu }
        }
        _ => {
            return Err(Error::input(
                "params.json: rates must be numbers in shared mode and arrays per community",
            ))
        }
    };
    let params = ModelParams::new(rates, p.beta, p.pi)?;
    if params.k() != p.k {
        return Err(Error::input(format!(
            "params.json: K = {} but beta has {}",
            p.k,
            params.k()
        )));
    }
    Ok(params)
}

pub fn write_memberships(state: &VariationalState, history: &EventHistory) -> String {
    let k = state.k();
    let mut out = String::from("id");
    for c in 1..=k {
        out.push_str(&format!(",delta_{c}"));
    }
    out.push('\n');
    for i in 0..state.n_individuals() {
        out.push_str(&history.id_of(i).to_string());
        for &d in state.delta(i) {
            out.push(',');
            out.push_str(&fmt_f64(d));
        }
        out.push('\n');
    }
    out
}

/// Membership rows keyed by id.
pub fn parse_memberships(text: &str) -> Result<BTreeMap<IndividualId, Vec<f64>>> {
    const FILE: &str = "memberships.csv";
    let mut reader = csv_reader(text);
    let header = reader
        .headers()
        .map_err(|e| Error::input(format!("{FILE}: {e}")))?
        .clone();
    let k = header.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("id".to_string())
        .chain((1..=k).map(|c| format!("delta_{c}")))
        .collect();
    if k == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::input(format!("{FILE}: malformed header")));
    }
    let mut out = BTreeMap::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::input(format!("{FILE} row {}: {e}", n + 1)))?;
        if rec.len() != k + 1 {
            return Err(Error::input(format!(
                "{FILE} row {}: wrong field count",
                n + 1
            )));
        }
        let id: IndividualId = field(&rec, 0, FILE, n + 1)?;
        let row = (1..=k)
            .map(|c| field(&rec, c, FILE, n + 1))
            .collect::<Result<Vec<f64>>>()?;
        if out.insert(id, row).is_some() {
            return Err(Error::input(format!("{FILE}: id {id} listed twice")));
        }
    }
    Ok(out)
}

pub fn write_elbo_trace(trace: &[f64]) -> String {
    let mut out = String::from("iter,elbo\n");
    for (i, v) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{}\n", fmt_f64(*v)));
    }
    out
}

pub fn write_icl_table(table: &IclTable) -> String {
    let mut out = String::from("K,seed,elbo,icl\n");
    for c in &table.cells {
        out.push_str(&format!(
            "{},{},{},{}\n",
            c.k,
            c.seed,
            fmt_f64(c.elbo),
            fmt_f64(c.icl)
        ));
    }
    out
}

#[derive(Serialize)]
struct SelectionOut {
    selected_k: usize,
    best_per_k: Vec<BestOut>,
    histogram: Vec<HistOut>,
    failures: Vec<crate::selection::CellFailure>,
}

#[derive(Serialize)]
struct BestOut {
    #[serde(rename = "K")]
    k: usize,
    icl: Box<RawValue>,
    selected: bool,
}

#[derive(Serialize)]
struct HistOut {
    #[serde(rename = "K")]
    k: usize,
    wins: usize,
}

pub fn write_selection(table: &IclTable) -> Result<String> {
    to_json(&SelectionOut {
        selected_k: table.selected_k,
        best_per_k: table
            .best_per_k
            .iter()
            .map(|&(k, icl)| {
                Ok(BestOut {
                    k,
                    icl: RawValue::from_string(if icl.is_finite() {
                        fmt_f64(icl)
                    } else {
                        "null".into()
                    })
                    .map_err(|e| Error::input(e.to_string()))?,
                    selected: k == table.selected_k,
                })
            })
            .collect::<Result<_>>()?,
        histogram: table
            .histogram
            .iter()
            .map(|&(k, wins)| HistOut { k, wins })
            .collect(),
        failures: table.failures.clone(),
    })
}

#[derive(Serialize)]
struct ReportOut {
    accuracy: Box<RawValue>,
    /// `permutation[p - 1]` is the true community matched to predicted community `p`.
    permutation: Vec<usize>,
    confusion: Vec<Vec<usize>>,
}

pub fn write_report(report: &AlignedReport) -> Result<String> {
    to_json(&ReportOut {
        accuracy: raw(report.accuracy)?,
        permutation: report.permutation.iter().map(|p| p + 1).collect(),
        confusion: report.confusion.clone(),
    })
}

pub fn write_accuracy_series(report: &AlignedReport) -> String {
    let mut out = String::from("t,accuracy\n");
    for &(t, a) in &report.accuracy_series {
        let a = if a.is_nan() {
            String::new()
        } else {
            fmt_f64(a)
        };
        out.push_str(&format!("{},{a}\n", fmt_f64(t)));
    }
    out
}

pub fn write_authors(authors: &[String]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(["id", "author"]).expect("in-memory write");
    for (id, a) in authors.iter().enumerate() {
        w.write_record([id.to_string().as_str(), a.as_str()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8 input")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_round_trip() {
        for params in [
            ModelParams::shared(
                0.04,
                0.02,
                vec![0.25, 0.75],
                vec![vec![0.1, 0.3], vec![0.3, 0.7]],
            )
            .unwrap(),
            ModelParams::new(
                Rates::PerCommunity {
                    lambda: vec![0.1, 1.0 / 3.0],
                    mu: vec![0.0, 2e-5],
                },
                vec![0.5, 0.5],
                vec![vec![0.9, 0.0], vec![0.0, 1.0]],
            )
            .unwrap(),
        ] {
            let text = write_params(&params).unwrap();
            assert_eq!(parse_params(&text).unwrap(), params);
        }
        assert!(parse_params(
            r#"{"K":1,"rate_mode":"shared","lambda":[1],"mu":0,"beta":[1],"pi":[[0.5]]}"#
        )
        .is_err());
    }

    #[test]
    fn events_and_snapshots_round_trip() {
        let events = vec![
            Event {
                time: 0.1,
                kind: EventKind::Birth,
                id: 2,
            },
            Event {
                time: 1.0 / 3.0,
                kind: EventKind::Death,
                id: 0,
            },
        ];
        let history = EventHistory::new(0.0, 2.0, vec![0, 1], events).unwrap();
        let times = vec![0.0, 0.7, 2.0];
        let snaps =
            SnapshotSeries::new(times.clone(), vec![vec![(0, 1)], vec![(1, 2)], vec![]]).unwrap();
        let data = load_dataset(
            &write_events(&history),
            &write_meta(&history, &times).unwrap(),
            &write_snapshots(&snaps),
        )
        .unwrap();
        assert_eq!(data.history(), &history);
        assert_eq!(data.snapshots(), &snaps);
    }

    #[test]
    fn labels_round_trip_and_errors() {
        let labels = LabelAssignment::new(3, [(0, 2), (5, 0)].into_iter().collect()).unwrap();
        let text = write_labels(&labels);
        assert_eq!(text, "id,k\n0,3\n5,1\n");
        assert_eq!(parse_labels(&text, Some(3)).unwrap(), labels);
        assert!(parse_labels("id,k\n0,0\n", None).is_err());
        assert!(parse_labels("id,c\n0,1\n", None).is_err());
        assert!(parse_labels("id,k\n0,1\n0,2\n", None).is_err());
    }
}
