//! Synthesis and certification toolbox for pendulum-like nonlinear systems:
//! plants with periodic sector-bounded nonlinearities whose linear part has a
//! single zero mode, controlled so that every closed-loop trajectory stays
//! bounded (Lagrange stability) while the periodic phase structure survives.
//!
//! The toolbox is organized around a pseudo-H-infinity layer: matrices with
//! exactly one unstable eigenvalue (pseudo-Hurwitz), symmetric matrices with
//! exactly one negative eigenvalue (pseudo-positive definite), and a strict
//! gain bound checked on a frequency grid. Game-type Riccati equations with
//! sign-indefinite quadratic terms supply the certificates; the synthesis
//! module turns them into static gains or dynamic output-feedback
//! compensators; the sim module corroborates the certificates by direct
//! integration.
//!
//! The `penstab` binary wraps everything behind model files (JSON, with exact
//! `"p/q"` rational entries where lattice arithmetic must be exact) and
//! emits machine-readable reports and plot-ready CSV.

pub mod cli;
pub mod error;
pub mod exact;
pub mod numlin;
pub mod pendulum;
pub mod riccati;
pub mod sbrl;
pub mod sim;
pub mod synthesis;

pub use error::{Error, Result};
