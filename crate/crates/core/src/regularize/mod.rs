//! Regularization families `h_ε` of singular metrics and their diagnostics.

mod family;
mod kernel;
mod mollify;

pub use family::{
    analytic_eps, convergence_diagnostic, default_schedule, diagnose_schedule, geometric_schedule,
    parse_schedule, validate_schedule, ConvergenceReport, DeclaredConvergence, FamilyMode, MemberFn,
    RegularizationFamily,
};
pub use kernel::{CalibratedKernel, Kernel};
pub use mollify::{chart_margin, mollify, mollify_poly, mollify_with, MollifiedJet};
