//! Configuration, single runs, parameter sweeps, manufactured-solution
//! verification and the binary snapshot format.

mod config;
mod run;
mod snapshot;
mod sweep;
mod verify;

pub use config::{DiagConfig, RunConfig, StepperConfig};
pub use run::{run, run_with, write_csv, RunOptions, RunOutcome};
pub use snapshot::Snapshot;
pub use sweep::{
    compare, loglog_slope, state_distance, sweep, CauchyRow, Comparison, LayerScaling, MemberSummary, SweepAxis,
    SweepOutcome, SweepPlan, SweepReport, ThetaComparison,
};
pub use verify::{mms_verify, write_table, ConvergenceTable, LevelError, ERROR_FLOOR, MIN_ORDER};
