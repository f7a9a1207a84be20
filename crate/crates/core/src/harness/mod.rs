//! Configuration-driven experiment runner: traces, manifests, comparisons and the
//! acceptance suite.

pub mod config;
pub mod run;
pub mod verify;

pub use config::{theta_heuristic, RunConfig};
pub use run::{
    compare, run, trace_run, RunManifest, RunOutcome, RunRecord, TraceOptions, TraceRow,
};
pub use verify::{run_suite, CheckResult, SuiteOptions};
