//! The projectivized bundle `P(E)`, the induced metric on `O(1)` and Segre forms
//! as fiber integrals.

mod fiber;
mod phi;
mod segre;
mod total;

pub use fiber::{Calibration, FiberNode, FiberRule, FiberScheme};
pub use phi::{hessian, induced_phi, normalize, InducedPhi};
pub use segre::{default_rule, segre_form, segre_forms, segre_local, SegreEvaluator};
pub use total::{phi_form, TotalSpaceForm};
