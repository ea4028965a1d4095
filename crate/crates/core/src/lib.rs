//! Localized-discrepancy testing and decoupled train/test pipelines for
//! learning under distribution shift.
//!
//! The crate provides three testers that certify, for a fixed reference
//! hypothesis, that a batch of unlabeled test points cannot have drifted in
//! any way that matters for nearby concepts:
//!
//! * [`chow`] — low-degree moment and Chow-parameter matching against a
//!   reference marginal, sound for every concept with small L1-sandwiching
//!   gap;
//! * [`grid`] — cylindrical grid occupancy checks on the hypothesis's
//!   relevant subspace, for smooth-boundary subspace juntas;
//! * [`boundary`] — per-halfspace slab-mass checks plus a concentration
//!   wrapper, for balanced halfspace intersections.
//!
//! Around them sit synthetic distribution generators ([`distributions`]),
//! pluggable trainers ([`training`]), an exact LP oracle for L1-sandwiching
//! pairs on small hypercubes ([`sandwich`]) and an experiment harness
//! ([`experiment`]) used by the `tds` CLI.

pub mod boundary;
pub mod chow;
pub mod concepts;
pub mod data;
pub mod distributions;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod linalg;
pub mod moments;
pub mod rng;
pub mod sandwich;
pub mod simplex;
pub mod training;

pub use data::{Dataset, LabeledDataset, SampleBudget, Verdict};
pub use error::{Error, Result};
pub use rng::RngSpec;
