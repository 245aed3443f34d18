//! `bdsbm`: simulate, fit, select, evaluate and ingest birth-death block model data.
//!
//! Every command reads and writes the plain-text formats of `bdsbm::io` inside a
//! data directory. `BDSBM_THREADS` caps the worker threads used by `select` and by
//! the k-means restarts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bdsbm::eval::report;
use bdsbm::ingest::{ingest, parse_publications, parse_timestamp, IngestConfig, TieRule};
use bdsbm::init::InitOptions;
use bdsbm::selection::{fit_from_scratch, select_k, SelectOptions};
use bdsbm::simulator::{simulate, InitialComposition, SimConfig, SnapshotSchedule};
use bdsbm::vem::FitOptions;
use bdsbm::{io, Dataset, Error, RateMode};

#[derive(Parser)]
#[command(name = "bdsbm", version, about = "Birth-death stochastic block model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a history, snapshots and true labels from a parameter file.
    Simulate(SimulateArgs),
    /// Fit one model with K communities.
    Fit(FitArgs),
    /// Fit every K of a range from several initializations and pick K by ICL.
    Select(SelectArgs),
    /// Compare predicted labels with true labels.
    Eval(EvalArgs),
    /// Turn a publication corpus into events and snapshots.
    Ingest(IngestArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// params.json with K, rates, beta and pi.
    #[arg(long)]
    params: PathBuf,
    /// Community sizes at t0, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "n0")]
    sizes: Option<Vec<usize>>,
    /// Number of initial individuals, labels drawn from beta.
    #[arg(long)]
    n0: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long)]
    t_end: f64,
    #[arg(long, default_value_t = 1.0)]
    snapshot_step: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct FitFlags {
    /// Weight of the k-means assignment in the starting memberships.
    #[arg(long, default_value_t = 0.9)]
    omega: f64,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Relative ELBO change below which iterations stop.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// shared or per-community
    #[arg(long, default_value = "shared")]
    rate_mode: String,
}

impl FitFlags {
    fn options(&self, seed: u64) -> Result<(InitOptions, FitOptions), Error> {
        let init = InitOptions {
            omega: self.omega,
            kmeans_restarts: self.restarts,
            seed,
        };
        let fit = FitOptions {
            max_iterations: self.max_iter,
            elbo_rel_tolerance: self.tol,
            seed,
            rate_mode: self.rate_mode.parse::<RateMode>()?,
            ..FitOptions::default()
        };
        init.validate()?;
        fit.validate()?;
        Ok((init, fit))
    }
}

#[derive(Args)]
struct FitArgs {
    /// Directory with events.csv, meta.json and snapshots.csv.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    flags: FitFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    data: PathBuf,
    /// Candidate K, as `2..6` (inclusive) or a comma separated list.
    #[arg(long, default_value = "2..6")]
    k_range: String,
    /// Initializations per K; initialization s uses seed `seed + s`.
    #[arg(long, default_value_t = 10)]
    n_inits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    flags: FitFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    /// labels.csv with the true communities.
    #[arg(long)]
    truth: PathBuf,
    /// labels.csv with the predicted communities.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    /// publications.txt: `timestamp<TAB>kind<TAB>author1,author2,...` per line.
    #[arg(long)]
    input: PathBuf,
    /// Start of the observation window (epoch seconds or ISO-8601).
    #[arg(long)]
    t_start: String,
    /// End of the observation window (epoch seconds or ISO-8601).
    #[arg(long)]
    t_end: String,
    /// Length of the seed window in days.
    #[arg(long)]
    ancestor_len: f64,
    /// Snapshot bin width in days.
    #[arg(long, default_value_t = 30.0)]
    bin_width: f64,
    /// discard-fewer-publications or epsilon-jitter
    #[arg(long, default_value = "discard-fewer-publications")]
    tie_rule: String,
    /// Keep only this many authors of highest co-author degree.
    #[arg(long)]
    max_authors: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn load(dir: &Path) -> Result<Dataset, Error> {
    io::load_dataset(
        &read(&dir.join("events.csv"))?,
        &read(&dir.join("meta.json"))?,
        &read(&dir.join("snapshots.csv"))?,
    )
}

fn write_dataset(dir: &Path, data: &Dataset) -> Result<(), Error> {
    write(dir, "events.csv", &io::write_events(data.history()))?;
    write(
        dir,
        "meta.json",
        &io::write_meta(data.history(), data.snapshots().times())?,
    )?;
    write(dir, "snapshots.csv", &io::write_snapshots(data.snapshots()))
}

fn parse_k_range(text: &str) -> Result<Vec<usize>, Error> {
    let bad = || Error::Input(format!("cannot read K range {text:?}"));
    let ks: Vec<usize> = if let Some((lo, hi)) = text.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        (lo..=hi).collect()
    } else {
        text.split(',')
            .map(|k| k.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if ks.is_empty() || ks.contains(&0) {
        return Err(bad());
    }
    Ok(ks)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Error> {
    let params = io::parse_params(&read(&args.params)?)?;
    let initial = match (args.sizes, args.n0) {
        (Some(sizes), None) => InitialComposition::Sizes(sizes),
        (None, Some(n0)) => InitialComposition::Sampled { n0 },
        _ => return Err(Error::Input("give either --sizes or --n0".into())),
    };
    let sim = simulate(&SimConfig {
        params: params.clone(),
        initial,
        t0: args.t0,
        t_end: args.t_end,
        snapshots: SnapshotSchedule::Uniform {
            step: args.snapshot_step,
        },
        seed: args.seed,
    })?;
    if sim.extinct {
        eprintln!("population died out before t_end");
    }
    let data = Dataset::new(sim.history, sim.snapshots)?;
    write_dataset(&args.out, &data)?;
    write(&args.out, "labels.csv", &io::write_labels(&sim.labels))?;
    write(&args.out, "params.json", &io::write_params(&params)?)
}

fn cmd_fit(args: FitArgs) -> Result<(), Error> {
    let data = load(&args.data)?;
    let (init, fit_opts) = args.flags.options(args.seed)?;
    let fit = fit_from_scratch(&data, args.k, &init, &fit_opts)?;
    let d = &fit.diagnostics;
    eprintln!(
        "elbo {} after {} iterations (converged: {}, decreases: {}, clamped death targets: {})",
        fit.elbo, d.iterations, d.converged, d.elbo_decreases, d.clamped_death_targets
    );
    write(&args.out, "params.json", &io::write_params(&fit.params)?)?;
    write(
        &args.out,
        "memberships.csv",
        &io::write_memberships(&fit.state, data.history()),
    )?;
    write(&args.out, "labels.csv", &io::write_labels(&fit.map_labels))?;
    write(
        &args.out,
        "elbo.csv",
        &io::write_elbo_trace(&fit.elbo_trace),
    )
}

fn cmd_select(args: SelectArgs) -> Result<(), Error> {
    let data = load(&args.data)?;
    let (init, fit) = args.flags.options(args.seed)?;
    let table = select_k(
        &data,
        &SelectOptions {
            k_range: parse_k_range(&args.k_range)?,
            n_inits: args.n_inits,
            base_seed: args.seed,
            fit,
            init,
        },
    )?;
    for f in &table.failures {
        eprintln!("K = {}, seed {}: {}", f.k, f.seed, f.message);
    }
    eprintln!("selected K = {}", table.selected_k);
    write(&args.out, "icl.csv", &io::write_icl_table(&table))?;
    write(&args.out, "selection.json", &io::write_selection(&table)?)
}

fn cmd_eval(args: EvalArgs) -> Result<(), Error> {
    let data = load(&args.data)?;
    let truth = io::parse_labels(&read(&args.truth)?, None)?;
    let pred = io::parse_labels(&read(&args.pred)?, None)?;
    let rep = report(&pred, &truth, data.history(), data.snapshots().times())?;
    eprintln!("accuracy {}", rep.accuracy);
    write(&args.out, "report.json", &io::write_report(&rep)?)?;
    write(
        &args.out,
        "accuracy_series.csv",
        &io::write_accuracy_series(&rep),
    )
}

fn cmd_ingest(args: IngestArgs) -> Result<(), Error> {
    let records = parse_publications(&read(&args.input)?)?;
    let config = IngestConfig {
        t_start: parse_timestamp(&args.t_start)?,
        t_end: parse_timestamp(&args.t_end)?,
        ancestor_len: args.ancestor_len,
        bin_width: args.bin_width,
        tie_rule: args.tie_rule.parse::<TieRule>()?,
        max_authors: args.max_authors,
    };
    let out = ingest(&records, &config)?;
    eprintln!(
        "{} authors, {} events, {} discarded by the tie rule, {} dormant",
        out.authors.len(),
        out.history.n_events(),
        out.discarded.len(),
        out.dormant.len()
    );
    let data = Dataset::new(out.history, out.snapshots)?;
    write_dataset(&args.out, &data)?;
    write(&args.out, "authors.csv", &io::write_authors(&out.authors))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Input(_) | Error::Estimation(_) | Error::Ingest(_) => 2,
        Error::Solver { .. } | Error::Selection(_) => 3,
        Error::Io(_) => 1,
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var("BDSBM_THREADS") else {
        return Ok(());
    };
    let n: usize = value.trim().parse().map_err(|_| {
        Error::Input(format!(
            "BDSBM_THREADS must be a positive integer, got {value:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Input(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Select(a) => cmd_select(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ingest(a) => cmd_ingest(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bdsbm: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
