//! Complex differential forms on gridded polydisc charts.

mod chart;
pub mod diff;
mod field;
mod local;
pub mod multiindex;
mod pullback;
mod quadrature;

pub use chart::{Chart, ChartSpec, MIN_RESOLUTION};
pub use field::{
    ddc, ddc_factor, levi_matrix, stencil_interior, top_form_factor, FormField, JetFn, ScalarField,
    ScalarJet,
};
pub use local::LocalForm;
pub use multiindex::Mask;
pub use pullback::coordinate_projection_pullback;
pub use quadrature::{pairwise_sum, Quadrature, Region, Rule};
