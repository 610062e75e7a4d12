//! Extreme-flow primal-dual algorithms for multi-source multicast with
//! intra-session network coding.
//!
//! * [`netgraph`]: network and request model, max-flow feasibility.
//! * [`lpsolve`]: two-phase simplex returning vertex solutions.
//! * [`mincost`]: exact and flow-shifted min-cost unit coded multicast.
//! * [`offline`]: phase/iteration FPTAS for maximum concurrent throughput.
//! * [`online`]: primal-dual admission control for arriving requests.

pub mod certificate;
pub mod lpsolve;
pub mod mincost;
pub mod netgraph;
pub mod offline;
pub mod online;

pub use certificate::{CertificateCheck, CertificateReport};
pub use lpsolve::{solve_lp, LinearProgram, LpError, LpSolution, LpStatus, Relation};
pub use mincost::{
    build_mnc, decompose_paths, granularity, mincost_approx, mincost_exact, shift_small_flows,
    Criteria, MinCostError, MinCostResult, PathFlow, PriceSystem, UnitExtremeFlow,
};
pub use netgraph::{GraphError, LinkSpec, MulticastRequest, Network, NodeId};
pub use offline::{
    dual_objective, max_concurrent_lp, run_fptas, verify_offline_certificates, FptasError,
    FptasParams, OfflineSolution,
};
pub use online::{
    verify_online_certificates, OnlineConfig, OnlineError, OnlineMetrics, OnlineState, Variant,
};
