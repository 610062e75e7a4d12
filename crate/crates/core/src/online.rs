//! Online primal-dual admission and routing of coded multicast requests.
//!
//! Requests arrive one at a time. Each one is priced with the min-cost kernel
//! under the current link prices; it is admitted whole along that flow when
//! the unit cost `L` is at most the threshold, and rejected otherwise.
//! Admission raises the price of every used link by
//! `p_e ← p_e (1 + a_e) + (φ/m) a_e` with `a_e = f*_e d_r / c_e`. The
//! flow-shifted variant uses the approximate kernel and divides `a_e` by `σ`.
//! Decisions are final and rejected requests leave the state untouched.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificate::CertificateReport;
use crate::mincost::{mincost_approx, mincost_exact, MinCostError, PriceSystem};
use crate::netgraph::{MulticastRequest, Network};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OnlineError {
    #[error("phi must be positive, got {0}")]
    InvalidPhi(f64),
    #[error("sigma must be at least 1, got {0}")]
    InvalidSigma(f64),
    #[error("rejection threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error(transparent)]
    MinCost(#[from] MinCostError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Exact,
    Shifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    pub phi: f64,
    pub variant: Variant,
    /// `σ = max{η, μ}` of the shifted kernel; unused by the exact variant.
    pub sigma: f64,
    /// Admission threshold on `L` for the shifted variant; the exact variant
    /// always admits on `L <= 1`.
    pub lambda_thr: f64,
}

impl OnlineConfig {
    pub fn exact(phi: f64) -> Self {
        OnlineConfig {
            phi,
            variant: Variant::Exact,
            sigma: 1.0,
            lambda_thr: 1.0,
        }
    }

    pub fn shifted(phi: f64) -> Self {
        OnlineConfig {
            phi,
            variant: Variant::Shifted,
            sigma: 2.0,
            lambda_thr: 1.0,
        }
    }

    fn effective_sigma(&self) -> f64 {
        match self.variant {
            Variant::Exact => 1.0,
            Variant::Shifted => self.sigma,
        }
    }

    fn threshold(&self) -> f64 {
        match self.variant {
            Variant::Exact => 1.0,
            Variant::Shifted => self.lambda_thr,
        }
    }

    /// Bound on `ΔD / ΔP` per admitted request.
    pub fn competitive_bound(&self) -> f64 {
        1.0 + self.phi / self.effective_sigma()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub request_id: String,
    pub size: f64,
    pub accepted: bool,
    /// `L` of the chosen flow; `None` when the request has no feasible flow.
    pub cost: Option<f64>,
    pub z: f64,
    /// Chosen unit flow `f*_e` (admitted requests only).
    pub link_flow: Option<Vec<f64>>,
    /// Load added per link, `d_r f*_e` (zero when rejected).
    pub increments: Vec<f64>,
    pub granularity: Option<f64>,
    pub prices_before: Vec<f64>,
    pub prices_after: Vec<f64>,
}

impl Decision {
    /// Dual objective increase `z_r + Σ_e c_e Δp_e`.
    pub fn dual_increase(&self, net: &Network) -> f64 {
        let price_part: f64 = net
            .links()
            .iter()
            .enumerate()
            .map(|(e, l)| l.capacity * (self.prices_after[e] - self.prices_before[e]))
            .sum();
        self.z + price_part
    }

    /// Primal objective increase (`d_r` when admitted).
    pub fn primal_increase(&self) -> f64 {
        if self.accepted {
            self.size
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct OnlineState {
    net: Network,
    config: OnlineConfig,
    prices: PriceSystem,
    loads: Vec<f64>,
    decisions: Vec<Decision>,
    min_granularity: Option<f64>,
}

impl OnlineState {
    /// Fresh state with zero prices and loads.
    pub fn new(net: Network, config: OnlineConfig) -> Result<Self, OnlineError> {
        if !(config.phi.is_finite() && config.phi > 0.0) {
            return Err(OnlineError::InvalidPhi(config.phi));
        }
        if config.variant == Variant::Shifted {
            if !(config.sigma.is_finite() && config.sigma >= 1.0) {
                return Err(OnlineError::InvalidSigma(config.sigma));
            }
            if !(config.lambda_thr.is_finite() && config.lambda_thr > 0.0) {
                return Err(OnlineError::InvalidThreshold(config.lambda_thr));
            }
        }
        let m = net.link_count();
        Ok(OnlineState {
            net,
            config,
            prices: PriceSystem::zeros(m),
            loads: vec![0.0; m],
            decisions: Vec::new(),
            min_granularity: None,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn config(&self) -> &OnlineConfig {
        &self.config
    }

    pub fn prices(&self) -> &PriceSystem {
        &self.prices
    }

    /// Cumulative admitted load `F(e, ·)` per link.
    pub fn loads(&self) -> &[f64] {
        &self.loads
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    pub fn min_granularity(&self) -> Option<f64> {
        self.min_granularity
    }

    /// Decides one arriving request.
    pub fn process_request(&mut self, r: &MulticastRequest) -> Result<&Decision, OnlineError> {
        r.validate().map_err(MinCostError::from)?;
        self.net.check_request(r).map_err(MinCostError::from)?;
        let prices_before = self.prices.as_slice().to_vec();
        let m = self.net.link_count();

        let kernel = match self.config.variant {
            Variant::Exact => mincost_exact(&self.net, r, &self.prices),
            Variant::Shifted => mincost_approx(&self.net, r, &self.prices),
        };
        let best = match kernel {
            Ok(best) => Some(best),
            Err(MinCostError::Infeasible(_)) => None,
            Err(e) => return Err(e.into()),
        };

        let decision = match best {
            Some(best) if best.cost <= self.config.threshold() => {
                let sigma = self.config.effective_sigma();
                let phi_share = self.config.phi / m as f64;
                let mut increments = vec![0.0; m];
                for (e, link) in self.net.links().iter().enumerate() {
                    let f = best.flow.link_flow[e];
                    if f > 0.0 {
                        let added = f * r.size;
                        increments[e] = added;
                        self.loads[e] += added;
                        let a = added / (sigma * link.capacity);
                        let p = self.prices.get(e);
                        self.prices.set(e, p * (1.0 + a) + phi_share * a);
                    }
                }
                self.min_granularity = Some(
                    self.min_granularity
                        .map_or(best.granularity, |g| g.min(best.granularity)),
                );
                Decision {
                    request_id: r.id.clone(),
                    size: r.size,
                    accepted: true,
                    cost: Some(best.cost),
                    z: r.size * (1.0 - best.cost / sigma),
                    link_flow: Some(best.flow.link_flow),
                    increments,
                    granularity: Some(best.granularity),
                    prices_before,
                    prices_after: self.prices.as_slice().to_vec(),
                }
            }
            other => Decision {
                request_id: r.id.clone(),
                size: r.size,
                accepted: false,
                cost: other.map(|b| b.cost),
                z: 0.0,
                link_flow: None,
                increments: vec![0.0; m],
                granularity: None,
                prices_after: prices_before.clone(),
                prices_before,
            },
        };
        self.decisions.push(decision);
        Ok(self.decisions.last().expect("just pushed"))
    }

    /// Processes a whole arrival sequence in order.
    pub fn run<'a>(
        &mut self,
        trace: impl IntoIterator<Item = &'a MulticastRequest>,
    ) -> Result<(), OnlineError> {
        for r in trace {
            self.process_request(r)?;
        }
        Ok(())
    }

    /// Price bound `B`: `(1+φ)/F_min` for the exact variant and
    /// `(2λ_thr + φ)/F_min` for the shifted one, with `F_min` the smallest
    /// granularity among admitted flows.
    pub fn price_bound(&self) -> Option<f64> {
        let fmin = self.min_granularity?;
        Some(match self.config.variant {
            Variant::Exact => (1.0 + self.config.phi) / fmin,
            Variant::Shifted => (2.0 * self.config.lambda_thr + self.config.phi) / fmin,
        })
    }

    /// `log(Bm/φ + 1)`.
    pub fn log_bound(&self) -> Option<f64> {
        let b = self.price_bound()?;
        Some((b * self.net.link_count() as f64 / self.config.phi + 1.0).ln())
    }

    /// Bound on `F(e,·)/c_e`: the log bound, times `σ` for the shifted variant.
    pub fn utilization_bound(&self) -> Option<f64> {
        Some(self.config.effective_sigma() * self.log_bound()?)
    }

    pub fn metrics(&self) -> OnlineMetrics {
        let total = self.decisions.len();
        let accepted = self.decisions.iter().filter(|d| d.accepted).count();
        let utilization: Vec<f64> = self
            .loads
            .iter()
            .zip(self.net.links())
            .map(|(f, l)| f / l.capacity)
            .collect();
        let bottleneck =
            utilization
                .iter()
                .enumerate()
                .fold(None, |best: Option<(usize, f64)>, (e, &u)| match best {
                    Some((_, b)) if b >= u => best,
                    _ => Some((e, u)),
                });
        let per_request = self
            .decisions
            .iter()
            .filter(|d| d.accepted)
            .map(|d| RequestAccounting {
                request_id: d.request_id.clone(),
                delta_primal: d.primal_increase(),
                delta_dual: d.dual_increase(&self.net),
            })
            .collect();
        OnlineMetrics {
            total,
            accepted,
            acceptance_ratio: if total == 0 {
                0.0
            } else {
                accepted as f64 / total as f64
            },
            violation_ratio: bottleneck.map_or(0.0, |(_, u)| u),
            bottleneck: bottleneck
                .filter(|(_, u)| *u > 0.0)
                .map(|(e, _)| self.net.link(e).id.clone()),
            utilization,
            min_granularity: self.min_granularity,
            price_bound: self.price_bound(),
            log_bound: self.log_bound(),
            utilization_bound: self.utilization_bound(),
            competitive_bound: self.config.competitive_bound(),
            per_request,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestAccounting {
    pub request_id: String,
    pub delta_primal: f64,
    pub delta_dual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineMetrics {
    pub total: usize,
    pub accepted: usize,
    pub acceptance_ratio: f64,
    /// `max_e F(e,·)/c_e`.
    pub violation_ratio: f64,
    /// Link attaining the violation ratio.
    pub bottleneck: Option<String>,
    pub utilization: Vec<f64>,
    pub min_granularity: Option<f64>,
    pub price_bound: Option<f64>,
    pub log_bound: Option<f64>,
    pub utilization_bound: Option<f64>,
    pub competitive_bound: f64,
    pub per_request: Vec<RequestAccounting>,
}

/// Re-derives the online guarantees from the per-request snapshots:
/// (a) dual feasibility of each admitted flow at decision time,
/// (b) `ΔD/ΔP` within the competitive bound, (c) final prices at most `B`,
/// (d) utilization within the logarithmic bound, and (e) prices and loads
/// never decrease along the trace.
pub fn verify_online_certificates(state: &OnlineState) -> CertificateReport {
    let net = &state.net;
    let mut report = CertificateReport::default();
    let accepted: Vec<&Decision> = state.decisions.iter().filter(|d| d.accepted).collect();

    let failure = accepted.iter().find_map(|d| {
        let flow = d.link_flow.as_ref()?;
        let priced: f64 = d.prices_before.iter().zip(flow).map(|(p, f)| p * f).sum();
        let lhs = d.z + d.size * priced;
        (lhs < d.size * (1.0 - 1e-9) || d.z < -1e-12).then(|| {
            format!(
                "request {}: z + d*sum(p f) = {lhs} < d = {} (z = {})",
                d.request_id, d.size, d.z
            )
        })
    });
    report.push(
        "dual_feasibility",
        failure,
        format!("{} admitted requests dual feasible", accepted.len()),
    );

    let bound = state.config.competitive_bound();
    let mut worst = 0.0f64;
    let failure = accepted.iter().find_map(|d| {
        let ratio = d.dual_increase(net) / d.primal_increase();
        worst = worst.max(ratio);
        (ratio > bound + 1e-9)
            .then(|| format!("request {}: dD/dP = {ratio} > {bound}", d.request_id))
    });
    report.push(
        "competitive_ratio",
        failure,
        format!("max dD/dP {worst} <= {bound}"),
    );

    match (state.price_bound(), state.utilization_bound()) {
        (Some(b), Some(util_bound)) => {
            let failure = state
                .prices
                .as_slice()
                .iter()
                .enumerate()
                .find(|(_, &p)| p > b * (1.0 + 1e-12))
                .map(|(e, p)| format!("link {} price {p} > B = {b}", net.link(e).id));
            report.push("price_bound", failure, format!("all prices <= B = {b}"));

            let failure = state
                .loads
                .iter()
                .zip(net.links())
                .find(|(f, l)| *f / l.capacity > util_bound + 1e-12)
                .map(|(f, l)| {
                    format!(
                        "link {} utilization {} > {util_bound}",
                        l.id,
                        f / l.capacity
                    )
                });
            report.push(
                "utilization_bound",
                failure,
                format!("all utilizations <= {util_bound}"),
            );
        }
        _ => {
            report.push("price_bound", None, "no admitted requests".into());
            report.push("utilization_bound", None, "no admitted requests".into());
        }
    }

    let mut failure = None;
    let mut previous: Vec<f64> = vec![0.0; net.link_count()];
    let mut load_prev: Vec<f64> = vec![0.0; net.link_count()];
    'trace: for d in &state.decisions {
        for e in 0..net.link_count() {
            let id = &net.link(e).id;
            if d.prices_before[e] < previous[e] || d.prices_after[e] < d.prices_before[e] {
                failure = Some(format!(
                    "price of link {id} decreases at request {}",
                    d.request_id
                ));
                break 'trace;
            }
            let load = load_prev[e] + d.increments[e];
            if d.increments[e] < 0.0 || (!d.accepted && d.increments[e] != 0.0) {
                failure = Some(format!(
                    "load of link {id} changes wrongly at request {}",
                    d.request_id
                ));
                break 'trace;
            }
            load_prev[e] = load;
        }
        previous.copy_from_slice(&d.prices_after);
    }
    if failure.is_none() {
        if let Some(e) = (0..net.link_count()).find(|&e| previous[e] > state.prices.get(e)) {
            failure = Some(format!(
                "final price of link {} below trace",
                net.link(e).id
            ));
        }
    }
    report.push(
        "monotonicity",
        failure,
        format!("{} decisions monotone", state.decisions.len()),
    );
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::LinkSpec;

    fn line(capacity: f64) -> Network {
        Network::new([1, 2], [LinkSpec::new("e1", 1, 2, capacity)]).unwrap()
    }

    #[test]
    fn init_validates_phi() {
        let state = OnlineState::new(line(1.0), OnlineConfig::exact(1.0)).unwrap();
        assert!(state.prices().as_slice().iter().all(|&p| p == 0.0));
        assert_eq!(
            OnlineState::new(line(1.0), OnlineConfig::exact(0.0)).unwrap_err(),
            OnlineError::InvalidPhi(0.0)
        );
        assert_eq!(OnlineConfig::shifted(1.0).sigma, 2.0);
    }

    #[test]
    fn fresh_metrics() {
        let state = OnlineState::new(line(1.0), OnlineConfig::exact(1.0)).unwrap();
        let m = state.metrics();
        assert_eq!(m.acceptance_ratio, 0.0);
        assert_eq!(m.violation_ratio, 0.0);
        assert_eq!(m.bottleneck, None);
        assert!(verify_online_certificates(&state).all_passed());
    }

    #[test]
    fn zero_price_admission_and_full_link() {
        let mut state = OnlineState::new(line(3.0), OnlineConfig::exact(1.0)).unwrap();
        let r = MulticastRequest::new("r", 1, [2], 3.0).unwrap();
        let d = state.process_request(&r).unwrap();
        assert!(d.accepted);
        assert_eq!(d.cost, Some(0.0));
        assert_eq!(d.z, 3.0);
        let m = state.metrics();
        assert_eq!(m.violation_ratio, 1.0);
        assert_eq!(m.bottleneck.as_deref(), Some("e1"));
        // p = 0*(1+1) + (1/1)*1
        assert_eq!(state.prices().get(0), 1.0);
    }

    #[test]
    fn rejection_leaves_state_untouched() {
        let mut state = OnlineState::new(line(10.0), OnlineConfig::exact(1.0)).unwrap();
        let r = MulticastRequest::new("r", 1, [2], 1.0).unwrap();
        let mut rejected = None;
        for k in 0..100 {
            let prices = state.prices().clone();
            let loads = state.loads().to_vec();
            if !state.process_request(&r).unwrap().accepted {
                assert_eq!(state.prices(), &prices);
                assert_eq!(state.loads(), loads.as_slice());
                rejected = Some(k);
                break;
            }
        }
        assert!(rejected.is_some());
        assert!(verify_online_certificates(&state).all_passed());
    }

    #[test]
    fn infeasible_request_is_rejected() {
        let mut state = OnlineState::new(line(1.0), OnlineConfig::exact(1.0)).unwrap();
        let r = MulticastRequest::new("big", 1, [2], 2.0).unwrap();
        let d = state.process_request(&r).unwrap();
        assert!(!d.accepted);
        assert_eq!(d.cost, None);
        let backwards = MulticastRequest::new("back", 2, [1], 0.5).unwrap();
        assert!(!state.process_request(&backwards).unwrap().accepted);
    }

    #[test]
    fn unknown_nodes_are_errors() {
        let mut state = OnlineState::new(line(1.0), OnlineConfig::exact(1.0)).unwrap();
        let r = MulticastRequest::new("r", 1, [9], 1.0).unwrap();
        assert!(state.process_request(&r).is_err());
    }

    #[test]
    fn decreasing_price_fails_monotonicity() {
        let mut state = OnlineState::new(line(10.0), OnlineConfig::exact(1.0)).unwrap();
        let r = MulticastRequest::new("r", 1, [2], 1.0).unwrap();
        state.process_request(&r).unwrap();
        state.process_request(&r).unwrap();
        assert!(verify_online_certificates(&state).all_passed());
        state.decisions[1].prices_before[0] = 0.0;
        state.decisions[1].prices_after[0] = 0.0;
        let report = verify_online_certificates(&state);
        assert!(!report.check("monotonicity").unwrap().passed);
    }

    #[test]
    fn inflated_dual_fails_competitive_check() {
        let mut state = OnlineState::new(line(10.0), OnlineConfig::exact(1.0)).unwrap();
        let r = MulticastRequest::new("r", 1, [2], 1.0).unwrap();
        state.process_request(&r).unwrap();
        state.decisions[0].z = 5.0;
        let report = verify_online_certificates(&state);
        assert!(!report.check("competitive_ratio").unwrap().passed);
    }

    #[test]
    fn shifted_update_scales_by_sigma() {
        let mut state = OnlineState::new(line(3.0), OnlineConfig::shifted(1.0)).unwrap();
        let r = MulticastRequest::new("r", 1, [2], 3.0).unwrap();
        state.process_request(&r).unwrap();
        // a = 3/(2*3) = 0.5, p = 0 + 1 * 0.5
        assert_eq!(state.prices().get(0), 0.5);
        let d = &state.decisions()[0];
        assert_eq!(d.z, 3.0);
        assert!(verify_online_certificates(&state).all_passed());
    }
}
