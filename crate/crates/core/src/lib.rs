//! Birth-death stochastic block model.
//!
//! A population evolves by a linear birth-death process; every newborn inherits the
//! community of its parent, and at each snapshot time the living individuals are
//! linked according to a stochastic block model. The crate simulates such data,
//! estimates the birth and death rates, infers communities and block parameters by
//! structured variational EM, selects the number of communities with ICL, and turns
//! timestamped publication records into event histories and snapshots.

pub mod bd_rates;
pub mod bisect;
pub mod data;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod init;
pub mod io;
pub mod model;
pub mod selection;
pub mod simulator;
pub mod util;
pub mod variational;
pub mod vem;

pub use data::Dataset;
pub use error::{Error, Result};
pub use model::{
    complete_log_likelihood, edge_log_prob, upsilon, Event, EventHistory, EventKind,
    LabelAssignment, ModelParams, RateMode, Rates, SnapshotSeries,
};
