//! Phase/iteration primal-dual FPTAS for maximum concurrent throughput.
//!
//! Prices start at `δ / c_e`. Every phase routes each request once, in list
//! order, as a scaled min-cost unit flow and multiplies the price of every
//! touched link by `1 + ε·f_e·d_r / c_e`. Phases repeat while
//! `D(p) = Σ p_e c_e < 1`. The flow routed during the completed phases
//! before the last one is scaled down by `log_{1+ε}(1/δ)`, which makes it
//! feasible and yields the throughput multiplier
//! `λ = (ρ - 1) / log_{1+ε}(1/δ)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificate::CertificateReport;
use crate::lpsolve::{solve_lp, LinearProgram, LpError, LpStatus, Relation};
use crate::mincost::{mincost_exact, MinCostError, PriceSystem};
use crate::netgraph::{MulticastRequest, Network};

/// Hard ceiling on phases regardless of the derived cap.
pub const ABSOLUTE_PHASE_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FptasError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("request list is empty")]
    NoRequests,
    #[error("request `{0}` is infeasible")]
    InfeasibleRequest(String),
    #[error("no termination after {phases} phases (cap {cap}), D(p) = {dual}")]
    NonTerminating {
        phases: usize,
        cap: usize,
        dual: f64,
    },
    #[error(transparent)]
    MinCost(#[from] MinCostError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("concurrent-flow program is {0:?}")]
    OracleStatus(LpStatus),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FptasParams {
    pub epsilon: f64,
    pub delta: f64,
    /// Target approximation slack when the parameters were derived from it.
    pub omega: Option<f64>,
}

impl FptasParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self, FptasError> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(FptasError::InvalidParameter(format!(
                "epsilon must lie in (0,1), got {epsilon}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(FptasError::InvalidParameter(format!(
                "delta must lie in (0,1), got {delta}"
            )));
        }
        Ok(FptasParams {
            epsilon,
            delta,
            omega: None,
        })
    }

    /// `δ = ((1 - ε) / m)^(1/ε)`.
    pub fn from_epsilon(epsilon: f64, m: usize) -> Result<Self, FptasError> {
        if m == 0 {
            return Err(FptasError::InvalidParameter("network has no links".into()));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(FptasError::InvalidParameter(format!(
                "epsilon must lie in (0,1), got {epsilon}"
            )));
        }
        let delta = ((1.0 - epsilon) / m as f64).powf(1.0 / epsilon);
        if delta == 0.0 {
            return Err(FptasError::InvalidParameter(format!(
                "delta underflows for epsilon {epsilon}"
            )));
        }
        Self::new(epsilon, delta)
    }

    /// `ε = 1 - (1 + ω)^(-1/3)`, then `δ` as in [`FptasParams::from_epsilon`].
    pub fn from_omega(omega: f64, m: usize) -> Result<Self, FptasError> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(FptasError::InvalidParameter(format!(
                "omega must be positive, got {omega}"
            )));
        }
        let epsilon = epsilon_from_omega(omega);
        let mut params = Self::from_epsilon(epsilon, m)?;
        params.omega = Some(omega);
        Ok(params)
    }

    /// `log_{1+ε}(1/δ)`, the final scaling factor.
    pub fn scale(&self) -> f64 {
        (1.0 / self.delta).ln() / (1.0 + self.epsilon).ln()
    }

    /// `(1 - ε)^3`, the guaranteed fraction of the optimum.
    pub fn guarantee(&self) -> f64 {
        (1.0 - self.epsilon).powi(3)
    }
}

/// `ε(ω) = 1 - (1 + ω)^(-1/3)`.
pub fn epsilon_from_omega(omega: f64) -> f64 {
    1.0 - (1.0 + omega).powf(-1.0 / 3.0)
}

/// `D(p) = Σ_e p_e c_e`.
pub fn dual_objective(net: &Network, p: &PriceSystem) -> f64 {
    net.links()
        .iter()
        .zip(p.as_slice())
        .map(|(l, p)| p * l.capacity)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based phase index.
    pub phase: usize,
    pub request_id: String,
    pub size: f64,
    /// Unit flow `f*_e` chosen in this iteration.
    pub link_flow: Vec<f64>,
    /// Its cost under the prices in force before the update.
    pub cost: f64,
}

/// Dual-side bookkeeping of a completed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualAccount {
    /// `D(p)` at the end of the run.
    pub dual: f64,
    /// Per-request min cost under the final prices.
    pub z: Vec<f64>,
    /// `α(p) = Σ_r d_r · mincost_r(p)`.
    pub alpha: f64,
    /// `D(p) / α(p)`, an upper bound on the optimal multiplier.
    pub beta: f64,
    /// `β / λ`, the certified dual-to-primal ratio.
    pub gamma: f64,
    /// Estimate of `β` from the initial prices, used for the phase cap.
    pub beta_initial: f64,
    /// Per-link flow scaling factor `κ_e` over the counted phases.
    pub kappa: Vec<f64>,
    /// Largest relative gap between tracked and recomputed `D(p)`.
    pub incremental_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineSolution {
    pub params: FptasParams,
    pub lambda: f64,
    /// Scaled link loads `x_e`.
    pub loads: Vec<f64>,
    /// Unscaled loads after every executed phase, including the last.
    pub raw_loads: Vec<f64>,
    /// Number of executed phases `ρ`.
    pub phases: usize,
    pub phase_cap: usize,
    /// `log_{1+ε}(1/δ)`.
    pub scale: f64,
    pub iterations: Vec<IterationRecord>,
    /// `D(p)` at start and after each phase.
    pub dual_trace: Vec<f64>,
    pub final_prices: Vec<f64>,
    pub account: DualAccount,
}

impl OfflineSolution {
    /// `x_e / c_e` per link.
    pub fn utilization(&self, net: &Network) -> Vec<f64> {
        self.loads
            .iter()
            .zip(net.links())
            .map(|(x, l)| x / l.capacity)
            .collect()
    }
}

fn alpha(
    net: &Network,
    requests: &[MulticastRequest],
    p: &PriceSystem,
) -> Result<(f64, Vec<f64>), FptasError> {
    let mut z = Vec::with_capacity(requests.len());
    let mut total = 0.0;
    for r in requests {
        let cost = mincost_exact(net, r, p)?.cost;
        total += r.size * cost;
        z.push(cost);
    }
    Ok((total, z))
}

/// Runs the FPTAS on the given request list.
pub fn run_fptas(
    net: &Network,
    requests: &[MulticastRequest],
    params: &FptasParams,
) -> Result<OfflineSolution, FptasError> {
    if requests.is_empty() {
        return Err(FptasError::NoRequests);
    }
    for r in requests {
        r.validate()
            .map_err(|_| FptasError::InfeasibleRequest(r.id.clone()))?;
        if !net.request_feasible(r) {
            return Err(FptasError::InfeasibleRequest(r.id.clone()));
        }
    }

    let m = net.link_count();
    let eps = params.epsilon;
    let caps = net.capacities();
    let mut prices = PriceSystem::new(caps.iter().map(|c| params.delta / c).collect())?;

    let initial_dual = dual_objective(net, &prices);
    let (alpha0, _) = alpha(net, requests, &prices)?;
    let beta_initial = initial_dual / alpha0;
    let derived_cap = 2.0 * beta_initial / eps * ((m as f64) / (1.0 - eps)).ln() / (1.0 + eps).ln();
    let phase_cap = (derived_cap.ceil() as usize).clamp(1, ABSOLUTE_PHASE_CAP);

    let mut loads = vec![0.0; m];
    let mut counted = vec![0.0; m];
    let mut iterations = Vec::new();
    let mut dual = initial_dual;
    let mut tracked = initial_dual;
    let mut drift = 0.0f64;
    let mut dual_trace = vec![dual];
    let mut phases = 0usize;

    while dual < 1.0 {
        if phases >= phase_cap {
            return Err(FptasError::NonTerminating {
                phases,
                cap: phase_cap,
                dual,
            });
        }
        counted.copy_from_slice(&loads);
        for r in requests {
            let best = mincost_exact(net, r, &prices)?;
            tracked += eps * r.size * best.cost;
            for e in 0..m {
                let f = best.flow.link_flow[e];
                if f > 0.0 {
                    let added = f * r.size;
                    loads[e] += added;
                    prices.set(e, prices.get(e) * (1.0 + eps * added / caps[e]));
                }
            }
            iterations.push(IterationRecord {
                phase: phases + 1,
                request_id: r.id.clone(),
                size: r.size,
                link_flow: best.flow.link_flow,
                cost: best.cost,
            });
        }
        phases += 1;
        dual = dual_objective(net, &prices);
        drift = drift.max((dual - tracked).abs() / dual);
        dual_trace.push(dual);
    }

    let scale = params.scale();
    let lambda = (phases - 1) as f64 / scale;
    let scaled: Vec<f64> = counted.iter().map(|x| x / scale).collect();
    let kappa: Vec<f64> = counted.iter().zip(&caps).map(|(x, c)| x / c).collect();

    let (alpha_final, z) = alpha(net, requests, &prices)?;
    let beta = dual / alpha_final;
    let account = DualAccount {
        dual,
        z,
        alpha: alpha_final,
        beta,
        gamma: if lambda > 0.0 {
            beta / lambda
        } else {
            f64::INFINITY
        },
        beta_initial,
        kappa,
        incremental_drift: drift,
    };

    Ok(OfflineSolution {
        params: *params,
        lambda,
        loads: scaled,
        raw_loads: loads,
        phases,
        phase_cap,
        scale,
        iterations,
        dual_trace,
        final_prices: prices.as_slice().to_vec(),
        account,
    })
}

/// Exact optimum of the concurrent coded-multicast throughput program,
/// solved in arc form. Intended for small instances.
pub fn max_concurrent_lp(net: &Network, requests: &[MulticastRequest]) -> Result<f64, FptasError> {
    let m = net.link_count();
    let mut lp = LinearProgram::new();
    let lambda = lp.add_variable("lambda", -1.0);
    let mut actual_of: Vec<Vec<usize>> = Vec::with_capacity(requests.len());
    for r in requests {
        net.check_request(r).map_err(MinCostError::from)?;
        let actual: Vec<usize> = net
            .links()
            .iter()
            .map(|l| lp.add_variable(format!("x[{},{}]", r.id, l.id), 0.0))
            .collect();
        let source = net.node_index(r.source).map_err(MinCostError::from)?;
        for &t in &r.receivers {
            let sink = net.node_index(t).map_err(MinCostError::from)?;
            let conceptual: Vec<usize> = net
                .links()
                .iter()
                .map(|l| lp.add_variable(format!("g[{},{t},{}]", r.id, l.id), 0.0))
                .collect();
            for v in (0..net.node_count()).filter(|&v| v != source) {
                let mut row: Vec<(usize, f64)> = net
                    .in_links(v)
                    .iter()
                    .map(|&e| (conceptual[e], 1.0))
                    .collect();
                row.extend(net.out_links(v).iter().map(|&e| (conceptual[e], -1.0)));
                if v == sink {
                    row.push((lambda, -r.size));
                }
                lp.add_constraint(row, Relation::Eq, 0.0)?;
            }
            for e in 0..m {
                lp.add_constraint(
                    vec![(conceptual[e], 1.0), (actual[e], -1.0)],
                    Relation::Le,
                    0.0,
                )?;
            }
        }
        actual_of.push(actual);
    }
    for (e, link) in net.links().iter().enumerate() {
        let row = actual_of.iter().map(|a| (a[e], 1.0)).collect();
        lp.add_constraint(row, Relation::Le, link.capacity)?;
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.value(lambda)),
        other => Err(FptasError::OracleStatus(other)),
    }
}

/// Re-derives the offline guarantees from the iteration trace:
/// (a) `κ_e < log_{1+ε}(1/δ)` per link, (b) scaled loads within capacity,
/// (c) `λ >= (1-ε)^3 λ_LP` when the optimum is known, and (d) weak duality,
/// `λ <= D(p)/α(p)` and `λ <= λ_LP`.
pub fn verify_offline_certificates(
    solution: &OfflineSolution,
    net: &Network,
    requests: &[MulticastRequest],
    lambda_lp: Option<f64>,
) -> CertificateReport {
    let mut report = CertificateReport::default();
    let m = net.link_count();
    let params = &solution.params;
    let scale = params.scale();

    let mut kappa = vec![0.0; m];
    for it in solution
        .iterations
        .iter()
        .filter(|it| it.phase < solution.phases)
    {
        let size = requests
            .iter()
            .find(|r| r.id == it.request_id)
            .map_or(it.size, |r| r.size);
        for (e, link) in net.links().iter().enumerate() {
            kappa[e] += size * it.link_flow[e] / link.capacity;
        }
    }
    let worst = (0..m).fold(None, |acc: Option<usize>, e| match acc {
        Some(w) if kappa[w] >= kappa[e] => Some(w),
        _ => Some(e),
    });
    let failure = worst.filter(|&e| kappa[e] >= scale).map(|e| {
        format!(
            "link {} has kappa {} >= {}",
            net.link(e).id,
            kappa[e],
            scale
        )
    });
    let ok = match worst {
        Some(e) => format!("max kappa {} on {} < {}", kappa[e], net.link(e).id, scale),
        None => "no links".to_string(),
    };
    report.push("kappa_bound", failure, ok);

    let mut failure = None;
    let mut max_util = 0.0f64;
    for (e, link) in net.links().iter().enumerate() {
        let x = kappa[e] * link.capacity / scale;
        max_util = max_util.max(x / link.capacity);
        if x > link.capacity + 1e-6 && failure.is_none() {
            failure = Some(format!(
                "link {} load {} > capacity {}",
                link.id, x, link.capacity
            ));
        }
    }
    report.push(
        "scaled_feasibility",
        failure,
        format!("max utilization {max_util}"),
    );

    let lambda = solution.lambda;
    match lambda_lp {
        Some(opt) => {
            let floor = params.guarantee() * opt;
            let failure = (lambda < floor - 1e-9)
                .then(|| format!("lambda {lambda} < (1-eps)^3 * {opt} = {floor}"));
            report.push(
                "approximation",
                failure,
                format!("lambda {lambda} >= {floor}"),
            );
        }
        None => report.push(
            "approximation",
            None,
            "optimum not supplied; check skipped".to_string(),
        ),
    }

    let account = &solution.account;
    let mut failure = None;
    if lambda > account.beta * (1.0 + 1e-9) + 1e-9 {
        failure = Some(format!(
            "lambda {lambda} exceeds dual bound D/alpha = {}",
            account.beta
        ));
    }
    if let Some(opt) = lambda_lp {
        if lambda > opt + 1e-6 {
            failure = Some(format!("lambda {lambda} exceeds optimum {opt}"));
        }
    }
    report.push(
        "weak_duality",
        failure,
        format!("lambda {lambda} <= D/alpha = {}", account.beta),
    );
    report
}
