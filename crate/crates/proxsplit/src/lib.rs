//! A laboratory for proximal operator-splitting methods.
//!
//! The crate implements the non-stationary Forward–Douglas–Rachford scheme
//! and its relatives (forward–backward, generalized forward–backward,
//! three-operator splitting) over a catalog of partly smooth regularizers,
//! together with two measurement layers:
//!
//! * **diagnostics** — a Bregman-divergence convergence criterion with
//!   best-iterate and ergodic rates, a per-iteration energy-inequality
//!   audit, and finite activity-identification detection;
//! * **rates** — local linear-rate certification via the linearized
//!   fixed-point matrices at a converged anchor, comparing the spectral
//!   contraction factor against the observed decay.
//!
//! The [`experiments`] module adds deterministic synthetic problem
//! generators (a subspace-constrained lasso and a group-sparse + total
//! variation family), step-size schedule presets, end-to-end pipelines and
//! CSV/SVG emission; the companion `proxsplit-cli` binary exposes them on
//! the command line.

// Negated comparisons like `!(x > 0.0)` are deliberate: they reject NaN
// along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod linear;
pub mod rates;
pub mod regularizers;
pub mod smooth;
pub mod solvers;

pub use error::{Error, Result};
