//! Validation harnesses: the five-leaf structural-equation tree simulation
//! with its corrupted counterpart, and the scenario resampling study driven
//! by cross-covariance sources with known constraint counts.

mod scenario;
mod tree;

pub use scenario::{
    bundled_sources, default_scenario_basis, run_scenarios, Scenario, ScenarioConfig,
    ScenarioReport, ScenarioSource, SourceOutcome,
};
pub use tree::{
    pipeline_amenability,
    run_table1, simulate_tree, simulate_tree_with, Corruption, EdgeLoadings, Table1Report,
    TreeSimConfig,
};
