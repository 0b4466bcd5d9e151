//! Evaluation of drag methods on synthetic backends.
//!
//! [`metrics`] runs an instruction forward and then reversed from the
//! achieved handles and scores how much of the original content survives.
//! [`method::AnyMethod`] picks the engine or the baseline at runtime, and
//! [`suites`] builds the fixed seeded instruction sets.

pub mod method;
pub mod metrics;
pub mod suites;

pub use method::{AnyMethod, MethodState};
pub use metrics::{
    ccsd, mean_distance_oracle, round_trip, run_instruction, run_suite, start_method, MetricReport,
    RoundTrip, RunOutcome, SuiteOptions,
};

pub type AnyMethodF64 = AnyMethod<f64>;
pub type MethodStateF64 = MethodState<f64>;
