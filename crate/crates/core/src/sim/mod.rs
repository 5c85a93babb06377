//! Scenario runner: builds an instance from a scenario file, runs the
//! hopping protocol or the random-swap baseline, and writes reports.

mod inspect;
mod report;
mod run;
mod scenario;

pub use inspect::{
    analyze_scenario, configurations_csv, enumerate_scenario, rate_scenario, AnalysisReport,
    ConfigurationRow, RateReport,
};
pub use report::{
    cdf, emit_report, BaselineComparison, CdfPoint, OccupancyEntry, ReportFormat, RunReport,
    Sample, OCCUPANCY_ROWS,
};
pub use run::{initial_configuration, run_baseline, run_scenario};
pub use scenario::{
    proportional_bound, BoundRule, CapacitySpec, Generator, GraphSource, Initial, Scenario,
    PROPORTIONAL_UNIT,
};
