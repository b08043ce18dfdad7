//! Hermitian metrics on trivial bundles over a chart: duals, section-induced
//! singular metrics, Chern connection curvature and Chern forms.

pub mod catalog;
mod curvature;
mod field;
pub mod jet;
mod poly;

pub use catalog::MetricSpec;
pub use curvature::{
    chern_forms, chern_local, curvature, curvature_local, first_chern_via_det, forms_from_nodes,
    griffiths_diagnostic, GriffithsReport,
};
pub use field::{
    dual_metric, from_sections, Degeneracy, DegeneracyReport, MetricData, MetricField, Provenance,
    Regularity,
};
pub use jet::{Jet, MetricJet};
pub use poly::{PolyJet, SectionMatrix, ZPoly};

#[cfg(test)]
mod tests;
