//! Symmetric cooperative motion on the integer lattice.
//!
//! The crate evolves cooperative-motion distributions exactly through their
//! probability recurrences, runs the matching explicit scheme for the
//! integrated porous-medium (parabolic p-Laplace) equation, provides the
//! closed-form ZKB/Beta limits, and bundles a harness that checks the
//! distributional limit claims numerically.
//!
//! Modules:
//!
//! * [`lattice_measure`]: lattice PMFs, extended CDFs, model parameters and
//!   Kolmogorov distances.
//! * [`scm_engine`]: PMF/CDF recurrences, evolution and the tree-indexed
//!   Monte Carlo sampler.
//! * [`fd_scheme`]: mesh functions, the explicit p-Laplace and heat schemes,
//!   and checkers for monotonicity, consistency and stability.
//! * [`closed_forms`]: ZKB profiles, the Beta limit and its constants,
//!   lattice mixtures, and special functions.
//! * [`verify`]: experiment reports (convergence, p*-hitting, sandwiching,
//!   residuals, CLT case study, m to 0).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_forms;
pub mod error;
pub mod fd_scheme;
pub mod format;
pub mod lattice_measure;
pub mod quadrature;
pub mod scm_engine;
pub mod verify;

pub use closed_forms::{LimitSpec, ZkbSpec};
pub use error::{Error, Result};
pub use fd_scheme::{MeshFn, SchemeKind, SchemeSpec};
pub use lattice_measure::{ExtInt, ExtendedCdf, ModelParams, Pmf};
pub use scm_engine::{evolve, step_cdf, step_pmf, Evolution};
