//! Example catalog, the `P¹` cohomology check, experiment configs and report emission.

mod atlas;
mod config;
mod run;

pub use atlas::{
    cohomology_check, point_singular_members, CohomologyConfig, CohomologyReport, ManifoldAtlas, P1Metric,
    PartitionOfUnity,
};
pub use config::{
    acceptance_schedule, BumpConfig, ChartConfig, Example, ExampleData, ExperimentConfig, FamilyKind, MassConfig,
    Pipeline, RegularizationConfig, ScheduleSpec, SymbolicConfig,
};
pub use run::{
    build_family, reality_defect, round_trip_failures, run_experiment, segre_from_chern, symbolic_tables, Check,
    ExtrapolationRow, Outcome, PairingRecord, RunReport,
};
