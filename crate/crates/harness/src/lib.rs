//! Instance documents, experiment drivers and report writers for the
//! `misnc-core` algorithms, plus the extended butterfly used in the
//! evaluation.

pub mod butterfly;
pub mod experiment;
pub mod instance;
pub mod report;
pub mod trace;

pub use butterfly::{build_extended_butterfly, BUTTERFLY_CAPACITY, BUTTERFLY_LINKS};
pub use experiment::{
    run_experiment, run_sweep, ExperimentError, ExperimentReport, MinCostRow, OfflineSummary,
    OnlineSummary, SweepConfig, SweepReport,
};
pub use instance::{
    InstanceDocument, InstanceError, LinkEntry, Mode, NetworkSection, Params, RequestEntry,
};
pub use report::{emit_report, emit_sweep, ReportError, ReportFormat};
pub use trace::generate_online_trace;
