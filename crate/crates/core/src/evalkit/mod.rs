//! Desk-scale evaluation and synthetic scenario generation.

mod metrics;
mod scenario;

pub use metrics::{compute_clear, compute_idf1, evaluate, format_table, MetricReport};
pub use scenario::{
    generate_scenario, inject_splits, InjectedSplit, MotionKind, Occlusion, Scenario, ScenarioFiles, ScenarioSpec,
};
