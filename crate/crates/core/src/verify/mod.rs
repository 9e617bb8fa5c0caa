//! Empirical checks of the scheme: weak-form residuals against smooth test
//! functions, a priori bound monitors, and the refinement study driver.

mod convergence;
mod monitor;
mod residual;
mod testfn;

pub use convergence::{
    convergence_study, fit_order, ConvergenceRow, ConvergenceTable, OrderFit, StudyCase,
};
pub use monitor::{monitor, BoundFlags, DiagnosticsRecord, InitialStats};
pub use residual::{weak_residual, ResidualReport};
pub use testfn::{Support, TestFunction};
