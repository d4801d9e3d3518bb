//! Change point localization for time-varying Bradley-Terry-Luce models.
//!
//! A stream of pairwise comparison outcomes is segmented into regimes with
//! constant preference scores. The main estimator is an ℓ0-penalized
//! dynamic program over interval maximum-likelihood fits ([`dp`]), optionally
//! followed by a local two-sample rescan of each change point ([`refine`]).
//! Wild binary segmentation with several split statistics ([`wbs`]), a
//! simulator ([`simulate`]) and evaluation/tuning helpers ([`eval`]) complete
//! the toolkit.
//!
//! Conventions: items are 0-based; time indices are 1-based; a change point
//! is the first time index of the new regime.

pub mod error;
pub mod model;
pub mod solver;
pub mod dp;
pub mod refine;
pub mod wbs;
pub mod simulate;
pub mod detect;
pub mod eval;
pub mod io;

pub use error::{Error, Result};
