//! Experiment harness: convergence to the Beta limit, p*-hitting times,
//! sandwiching, PDE residuals of the ZKB profile, the heat/CLT case study and
//! the m → 0 variance check.
//!
//! Every report converts into a [`ReportDoc`], which serializes to JSON with
//! `kind`, `params`, `arrays` and `fixtures` fields, and to CSV (one column
//! per array) for plotting.

mod clt;
mod convergence;
mod report;
mod residual;
mod sandwich;

pub use clt::{clt_case_study, m_to_zero_check, CltReport, MZeroReport};
pub use convergence::{
    convergence_report, decrease_constant, p_star_hitting_time, ConvergenceReport, DecreaseReport,
    PERSISTENCE_STEPS,
};
pub use report::{Report, ReportDoc};
pub use residual::{
    classical_residual_study, distributional_residual, pde_residual_classical, residual_refinement,
    BumpTest, QuadratureSpec, RefinementReport, SpaceTimeGrid,
};
pub use sandwich::{sandwich_check, SandwichReport};
