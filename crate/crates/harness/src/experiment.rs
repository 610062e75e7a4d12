//! Runs instance documents through the engines and collects reports.

use std::time::Instant;

use misnc_core::{
    max_concurrent_lp, mincost_approx, mincost_exact, run_fptas, verify_offline_certificates,
    verify_online_certificates, CertificateCheck, CertificateReport, Criteria, FptasError,
    FptasParams, MinCostError, MulticastRequest, Network, OnlineConfig, OnlineError, OnlineState,
    PriceSystem, Variant,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{InstanceDocument, InstanceError, Mode, DEFAULT_EPSILON, DEFAULT_SEED};

/// The exact concurrent-flow optimum is only computed below this many LP
/// variables.
const LP_ORACLE_LIMIT: usize = 5_000;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Fptas(#[from] FptasError),
    #[error(transparent)]
    Online(#[from] OnlineError),
    #[error(transparent)]
    MinCost(#[from] MinCostError),
    #[error("{0} mode needs at least one request")]
    NoRequests(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub mode: Mode,
    /// The document that was run, with every defaulted parameter filled in.
    pub instance: InstanceDocument,
    pub links: Vec<String>,
    pub wall_time_secs: f64,
    /// Wall time divided by the `ε = 0.1` run of the same sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offline: Option<OfflineSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub online: Option<OnlineSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mincost: Option<Vec<MinCostRow>>,
    pub certificates: CertificateReport,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.certificates.all_passed()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineSummary {
    pub epsilon: f64,
    pub delta: f64,
    pub lambda: f64,
    pub lambda_lp: Option<f64>,
    pub phases: usize,
    pub phase_cap: usize,
    /// `x_e / c_e` after scaling, in link order.
    pub utilization: Vec<f64>,
    pub bottleneck: Option<String>,
    pub dual: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub incremental_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineSummary {
    pub total: usize,
    pub accepted: usize,
    pub acceptance_ratio: f64,
    pub violation_ratio: f64,
    pub bottleneck: Option<String>,
    /// `F(e) / c_e` in link order.
    pub utilization: Vec<f64>,
    pub min_granularity: Option<f64>,
    pub price_bound: Option<f64>,
    pub utilization_bound: Option<f64>,
    pub competitive_bound: f64,
    pub decisions: Vec<DecisionRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub request_id: String,
    pub accepted: bool,
    /// Min-cost value `L`; absent when the request could not be routed.
    pub cost: Option<f64>,
    pub z: f64,
    /// Load added to each link, in link order.
    pub increments: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinCostRow {
    pub request_id: String,
    pub criteria: Criteria,
    pub cost: f64,
    pub granularity: f64,
    pub link_flow: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_counts: Option<Vec<usize>>,
}

/// Index of the largest entry; entries within `1e-9` of the maximum count as
/// ties and the first one wins.
pub(crate) fn argmax(values: &[f64]) -> Option<usize> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values.iter().position(|&v| v >= max - 1e-9)
}

/// Dispatches on the document mode and always runs the matching checks.
pub fn run_experiment(doc: &InstanceDocument) -> Result<ExperimentReport, ExperimentError> {
    let net = doc.network()?;
    let requests = doc.requests()?;
    let mut instance = doc.clone();
    let start = Instant::now();
    let (offline, online, mincost, certificates) = match doc.mode {
        Mode::Offline => {
            let (summary, checks) = run_offline(&net, &requests, &mut instance)?;
            (Some(summary), None, None, checks)
        }
        Mode::Online => {
            let (summary, checks) = run_online(net.clone(), &requests, &mut instance)?;
            (None, Some(summary), None, checks)
        }
        Mode::Mincost => {
            let (rows, checks) = run_mincost(&net, &requests, &mut instance)?;
            (None, None, Some(rows), checks)
        }
    };
    Ok(ExperimentReport {
        mode: doc.mode,
        instance,
        links: net.links().iter().map(|l| l.id.clone()).collect(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        normalized_time: None,
        offline,
        online,
        mincost,
        certificates,
    })
}

fn run_offline(
    net: &Network,
    requests: &[MulticastRequest],
    instance: &mut InstanceDocument,
) -> Result<(OfflineSummary, CertificateReport), ExperimentError> {
    if requests.is_empty() {
        return Err(ExperimentError::NoRequests("offline"));
    }
    let m = net.link_count();
    let params = match instance.params.omega {
        Some(omega) => FptasParams::from_omega(omega, m)?,
        None => {
            let eps = instance.params.epsilon.unwrap_or(DEFAULT_EPSILON);
            instance.params.epsilon = Some(eps);
            FptasParams::from_epsilon(eps, m)?
        }
    };
    let solution = run_fptas(net, requests, &params)?;

    let receivers: usize = requests.iter().map(|r| r.receivers.len()).sum();
    let lambda_lp = if m * (receivers + requests.len()) < LP_ORACLE_LIMIT {
        Some(max_concurrent_lp(net, requests)?)
    } else {
        None
    };
    let checks = verify_offline_certificates(&solution, net, requests, lambda_lp);
    let utilization = solution.utilization(net);
    let account = &solution.account;
    let summary = OfflineSummary {
        epsilon: params.epsilon,
        delta: params.delta,
        lambda: solution.lambda,
        lambda_lp,
        phases: solution.phases,
        phase_cap: solution.phase_cap,
        bottleneck: argmax(&utilization).map(|e| net.link(e).id.clone()),
        utilization,
        dual: account.dual,
        alpha: account.alpha,
        beta: account.beta,
        gamma: account.gamma,
        incremental_drift: account.incremental_drift,
    };
    Ok((summary, checks))
}

fn online_config(instance: &mut InstanceDocument) -> OnlineConfig {
    let p = &mut instance.params;
    let phi = p.phi_or_default();
    let variant = p.variant_or_default();
    let mut config = match variant {
        Variant::Exact => OnlineConfig::exact(phi),
        Variant::Shifted => OnlineConfig::shifted(phi),
    };
    p.phi = Some(phi);
    p.variant = Some(variant);
    if variant == Variant::Shifted {
        config.sigma = *p.sigma.get_or_insert(config.sigma);
        config.lambda_thr = *p.lambda_thr.get_or_insert(config.lambda_thr);
    }
    p.seed.get_or_insert(DEFAULT_SEED);
    config
}

fn run_online(
    net: Network,
    requests: &[MulticastRequest],
    instance: &mut InstanceDocument,
) -> Result<(OnlineSummary, CertificateReport), ExperimentError> {
    let config = online_config(instance);
    let mut state = OnlineState::new(net, config)?;
    state.run(requests)?;
    let metrics = state.metrics();
    let decisions = state
        .decisions()
        .iter()
        .map(|d| DecisionRow {
            request_id: d.request_id.clone(),
            accepted: d.accepted,
            cost: d.cost,
            z: d.z,
            increments: d.increments.clone(),
        })
        .collect();
    let summary = OnlineSummary {
        total: metrics.total,
        accepted: metrics.accepted,
        acceptance_ratio: metrics.acceptance_ratio,
        violation_ratio: metrics.violation_ratio,
        bottleneck: metrics.bottleneck,
        utilization: metrics.utilization,
        min_granularity: metrics.min_granularity,
        price_bound: metrics.price_bound,
        utilization_bound: metrics.utilization_bound,
        competitive_bound: metrics.competitive_bound,
        decisions,
    };
    Ok((summary, verify_online_certificates(&state)))
}

fn run_mincost(
    net: &Network,
    requests: &[MulticastRequest],
    instance: &mut InstanceDocument,
) -> Result<(Vec<MinCostRow>, CertificateReport), ExperimentError> {
    if requests.is_empty() {
        return Err(ExperimentError::NoRequests("mincost"));
    }
    let prices = instance
        .params
        .prices
        .get_or_insert_with(|| vec![1.0; net.link_count()])
        .clone();
    let variant = *instance.params.variant.get_or_insert(Variant::Exact);
    let prices = PriceSystem::new(prices)?;

    let mut rows = Vec::new();
    let mut feasibility = None;
    let mut consistency = None;
    let mut criteria = None;
    for r in requests {
        let exact = mincost_exact(net, r, &prices)?;
        let result = match variant {
            Variant::Exact => exact.clone(),
            Variant::Shifted => mincost_approx(net, r, &prices)?,
        };
        let factor = result.criteria.mu();
        let violation = result.flow.max_violation(net, r.size, factor);
        if violation > 1e-9 && feasibility.is_none() {
            feasibility = Some(format!("{}: violation {violation:e}", r.id));
        }
        let recomputed = prices.cost_of(&result.flow.link_flow);
        if (recomputed - result.cost).abs() > 1e-9 * (1.0 + recomputed.abs())
            && consistency.is_none()
        {
            consistency = Some(format!("{}: cost {} vs {}", r.id, result.cost, recomputed));
        }
        let eta = result.criteria.eta();
        if result.cost > eta * exact.cost + 1e-9 && criteria.is_none() {
            criteria = Some(format!(
                "{}: cost {} > {eta} x {}",
                r.id, result.cost, exact.cost
            ));
        }
        rows.push(MinCostRow {
            request_id: r.id.clone(),
            criteria: result.criteria,
            cost: result.cost,
            granularity: result.granularity,
            link_flow: result.flow.link_flow,
            path_counts: result.path_counts,
        });
    }
    let check = |name: &str, failure: Option<String>, ok: &str| CertificateCheck {
        name: name.to_string(),
        passed: failure.is_none(),
        detail: failure.unwrap_or_else(|| ok.to_string()),
    };
    let report = CertificateReport {
        checks: vec![
            check(
                "flow_feasibility",
                feasibility,
                "all flows within scaled capacity",
            ),
            check("cost_consistency", consistency, "costs match prices"),
            check("cost_criteria", criteria, "costs within eta of exact"),
        ],
    };
    Ok((rows, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    pub phis: Vec<f64>,
    pub variant: Variant,
    pub seed: u64,
    /// Per-session demand of the offline runs.
    pub offline_size: f64,
    /// Requests per session and their size in the online runs.
    pub online_count: usize,
    pub online_size: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            epsilons: vec![0.4, 0.2, 0.1, 0.05],
            phis: vec![1.0, 2.0, 4.0, 8.0],
            variant: Variant::Exact,
            seed: DEFAULT_SEED,
            offline_size: 150.0,
            online_count: 100,
            online_size: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineRow {
    pub epsilon: f64,
    pub lambda: f64,
    pub normalized_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineRow {
    pub phi: f64,
    pub acceptance_ratio: f64,
    pub violation_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkLoadRow {
    pub link_id: String,
    pub offline_utilization: Option<f64>,
    pub online_utilization: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub offline: Vec<ExperimentReport>,
    pub online: Vec<ExperimentReport>,
    pub offline_rows: Vec<OfflineRow>,
    pub online_rows: Vec<OnlineRow>,
    /// Offline at `ε = 0.1` against online at `φ = 1` on matched demand.
    pub link_rows: Vec<LinkLoadRow>,
    pub offline_bottleneck: Option<String>,
    pub online_bottleneck: Option<String>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.offline.iter().chain(&self.online).all(|r| r.passed())
    }
}

/// Butterfly sweeps over `ε` and `φ`. The `ε = 0.1` and `φ = 1` runs are
/// added when missing since the time normalization and the link-load
/// comparison are defined against them.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport, ExperimentError> {
    let mut offline = Vec::new();
    let mut epsilons = config.epsilons.clone();
    if !epsilons.contains(&DEFAULT_EPSILON) {
        epsilons.push(DEFAULT_EPSILON);
    }
    for &eps in &epsilons {
        let mut doc = InstanceDocument::butterfly_offline(config.offline_size);
        doc.params.epsilon = Some(eps);
        offline.push(run_experiment(&doc)?);
    }
    let reference = offline[epsilons.iter().position(|&e| e == DEFAULT_EPSILON).unwrap()]
        .wall_time_secs
        .max(f64::MIN_POSITIVE);
    for report in &mut offline {
        report.normalized_time = Some(report.wall_time_secs / reference);
    }

    let mut phis = config.phis.clone();
    if !phis.contains(&1.0) {
        phis.push(1.0);
    }
    let mut online = Vec::new();
    for &phi in &phis {
        let mut doc = InstanceDocument::butterfly_online(
            config.seed,
            config.online_count,
            config.online_count,
            config.online_size,
        );
        doc.params.phi = Some(phi);
        doc.params.variant = Some(config.variant);
        online.push(run_experiment(&doc)?);
    }

    let offline_rows = offline
        .iter()
        .filter(|r| {
            config
                .epsilons
                .contains(&r.offline.as_ref().unwrap().epsilon)
        })
        .map(|r| OfflineRow {
            epsilon: r.offline.as_ref().unwrap().epsilon,
            lambda: r.offline.as_ref().unwrap().lambda,
            normalized_time: r.normalized_time.unwrap(),
        })
        .collect();
    let online_rows = online
        .iter()
        .zip(&phis)
        .filter(|(_, phi)| config.phis.contains(phi))
        .map(|(r, &phi)| {
            let s = r.online.as_ref().unwrap();
            OnlineRow {
                phi,
                acceptance_ratio: s.acceptance_ratio,
                violation_ratio: s.violation_ratio,
            }
        })
        .collect();

    let off = offline[epsilons.iter().position(|&e| e == DEFAULT_EPSILON).unwrap()]
        .offline
        .as_ref()
        .unwrap();
    let on = online[phis.iter().position(|&p| p == 1.0).unwrap()]
        .online
        .as_ref()
        .unwrap();
    let link_rows = offline[0]
        .links
        .iter()
        .enumerate()
        .map(|(e, id)| LinkLoadRow {
            link_id: id.clone(),
            offline_utilization: Some(off.utilization[e]),
            online_utilization: Some(on.utilization[e]),
        })
        .collect();

    Ok(SweepReport {
        config: config.clone(),
        offline_bottleneck: off.bottleneck.clone(),
        online_bottleneck: on.bottleneck.clone(),
        offline,
        online,
        offline_rows,
        online_rows,
        link_rows,
    })
}
