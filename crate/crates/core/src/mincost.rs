//! Min-cost unit coded multicast for one session under a link price system.
//!
//! The program is solved in arc form: one unit flow `f_{i,·}` per receiver,
//! plus actual link flows `f_e` that dominate every receiver's conceptual flow
//! on that link and respect the scaled capacity `c_e / d_r`. The exact kernel
//! returns the basic optimal solution of that program. The approximate kernel
//! decomposes each receiver's flow into paths and moves every path carrying
//! less than `1/(2 w_i^2)` onto the receiver's largest path.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lpsolve::{solve_lp, LinearProgram, LpError, LpStatus, Relation};
use crate::netgraph::{GraphError, MulticastRequest, Network, NodeId};

/// Link loads above this count as positive.
pub const POSITIVE_LOAD: f64 = 1e-9;

const SNAP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MinCostError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("request `{0}` has an empty flow polytope")]
    Infeasible(String),
    #[error("price system has {got} entries, network has {expected} links")]
    PriceLength { expected: usize, got: usize },
    #[error("price of link {link} is {value}, prices must be finite and nonnegative")]
    InvalidPrice { link: usize, value: f64 },
    #[error("node {0} is not a receiver of this flow")]
    UnknownReceiver(NodeId),
    #[error("flow carries no positive load")]
    ZeroFlow,
    #[error("conceptual flow toward receiver {0} contains a cycle")]
    CycleResidual(NodeId),
    #[error("conceptual flow toward receiver {receiver} stops at node {node}")]
    DeadEnd { receiver: NodeId, node: NodeId },
    #[error("flow has no path decomposition")]
    MissingDecomposition,
}

/// Dual link prices `p_e >= 0`, indexed like the network's links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSystem {
    prices: Vec<f64>,
}

impl PriceSystem {
    pub fn new(prices: Vec<f64>) -> Result<Self, MinCostError> {
        if let Some((link, &value)) = prices
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(MinCostError::InvalidPrice { link, value });
        }
        Ok(PriceSystem { prices })
    }

    pub fn zeros(m: usize) -> Self {
        PriceSystem {
            prices: vec![0.0; m],
        }
    }

    pub fn uniform(m: usize, value: f64) -> Result<Self, MinCostError> {
        Self::new(vec![value; m])
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn get(&self, e: usize) -> f64 {
        self.prices[e]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.prices
    }

    /// `Σ_e p_e · loads_e`.
    pub fn cost_of(&self, loads: &[f64]) -> f64 {
        self.prices.iter().zip(loads).map(|(p, f)| p * f).sum()
    }

    pub(crate) fn set(&mut self, e: usize, value: f64) {
        debug_assert!(value >= 0.0 && value.is_finite());
        self.prices[e] = value;
    }

    fn check_against(&self, net: &Network) -> Result<(), MinCostError> {
        if self.prices.len() != net.link_count() {
            return Err(MinCostError::PriceLength {
                expected: net.link_count(),
                got: self.prices.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFlow {
    /// Link positions from source to receiver.
    pub links: Vec<usize>,
    pub flow: f64,
}

/// A unit-rate coded multicast flow for one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitExtremeFlow {
    pub request_id: String,
    pub source: NodeId,
    pub receivers: Vec<NodeId>,
    /// Actual (coded) flow `f_e` per link.
    pub link_flow: Vec<f64>,
    /// Conceptual flow `f_{i,e}`, one vector per receiver in `receivers` order.
    pub conceptual: Vec<Vec<f64>>,
    pub paths: Option<Vec<Vec<PathFlow>>>,
}

impl UnitExtremeFlow {
    fn receiver_slot(&self, receiver: NodeId) -> Result<usize, MinCostError> {
        self.receivers
            .iter()
            .position(|&t| t == receiver)
            .ok_or(MinCostError::UnknownReceiver(receiver))
    }

    /// Largest violation of the unit-flow, domination and scaled-capacity
    /// constraints, with capacities multiplied by `capacity_factor`.
    pub fn max_violation(&self, net: &Network, size: f64, capacity_factor: f64) -> f64 {
        let mut worst = 0.0f64;
        let source = net.node_index(self.source).ok();
        for (slot, &t) in self.receivers.iter().enumerate() {
            let sink = net.node_index(t).ok();
            let g = &self.conceptual[slot];
            for v in 0..net.node_count() {
                let inflow: f64 = net.in_links(v).iter().map(|&e| g[e]).sum();
                let outflow: f64 = net.out_links(v).iter().map(|&e| g[e]).sum();
                let want = if Some(v) == source {
                    -1.0
                } else if Some(v) == sink {
                    1.0
                } else {
                    0.0
                };
                worst = worst.max((inflow - outflow - want).abs());
            }
            for (ge, fe) in g.iter().zip(&self.link_flow) {
                worst = worst.max(ge - fe).max(-ge);
            }
        }
        for (e, link) in net.links().iter().enumerate() {
            worst = worst.max(self.link_flow[e] - capacity_factor * link.capacity / size);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criteria {
    /// Exact kernel, (1,1).
    Exact,
    /// Flow-shifted kernel, (2,2).
    Shifted,
}

impl Criteria {
    /// Cost factor η.
    pub fn eta(self) -> f64 {
        match self {
            Criteria::Exact => 1.0,
            Criteria::Shifted => 2.0,
        }
    }

    /// Capacity factor μ.
    pub fn mu(self) -> f64 {
        match self {
            Criteria::Exact => 1.0,
            Criteria::Shifted => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinCostResult {
    pub flow: UnitExtremeFlow,
    /// `L = Σ_e p_e f_e`.
    pub cost: f64,
    /// Smallest positive link load (`F_min`).
    pub granularity: f64,
    pub criteria: Criteria,
    /// The LP returned a basic solution.
    pub basic: bool,
    /// Path count `w_i` per receiver before shifting (shifted kernel only).
    pub path_counts: Option<Vec<usize>>,
}

/// Variable layout of the arc-form program built by [`build_mnc`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MncLayout {
    pub receivers: usize,
    pub links: usize,
}

impl MncLayout {
    pub fn conceptual(&self, slot: usize, e: usize) -> usize {
        slot * self.links + e
    }

    pub fn actual(&self, e: usize) -> usize {
        self.receivers * self.links + e
    }

    pub fn num_variables(&self) -> usize {
        (self.receivers + 1) * self.links
    }
}

/// Arc-form min-cost coded multicast program for `r` under prices `p`.
///
/// Variables are `f_{i,e}` (receiver-major) followed by `f_e`; see
/// [`MncLayout`]. Conservation rows are written for every node except the
/// source, whose row is implied by the others.
pub fn build_mnc(
    net: &Network,
    r: &MulticastRequest,
    p: &PriceSystem,
) -> Result<(LinearProgram, MncLayout), MinCostError> {
    net.check_request(r)?;
    p.check_against(net)?;
    let m = net.link_count();
    let layout = MncLayout {
        receivers: r.receivers.len(),
        links: m,
    };
    let mut lp = LinearProgram::new();
    for &t in &r.receivers {
        for link in net.links() {
            lp.add_variable(format!("f[{t},{}]", link.id), 0.0);
        }
    }
    for (e, link) in net.links().iter().enumerate() {
        lp.add_variable(format!("f[{}]", link.id), p.get(e));
    }

    let source = net.node_index(r.source)?;
    for (slot, &t) in r.receivers.iter().enumerate() {
        let sink = net.node_index(t)?;
        for v in (0..net.node_count()).filter(|&v| v != source) {
            let mut row: Vec<(usize, f64)> = net
                .in_links(v)
                .iter()
                .map(|&e| (layout.conceptual(slot, e), 1.0))
                .collect();
            row.extend(
                net.out_links(v)
                    .iter()
                    .map(|&e| (layout.conceptual(slot, e), -1.0)),
            );
            let rhs = if v == sink { 1.0 } else { 0.0 };
            lp.add_constraint(row, Relation::Eq, rhs)?;
        }
    }
    for slot in 0..layout.receivers {
        for e in 0..m {
            lp.add_constraint(
                vec![(layout.conceptual(slot, e), 1.0), (layout.actual(e), -1.0)],
                Relation::Le,
                0.0,
            )?;
        }
    }
    for (e, link) in net.links().iter().enumerate() {
        lp.add_constraint(
            vec![(layout.actual(e), 1.0)],
            Relation::Le,
            link.capacity / r.size,
        )?;
    }
    Ok((lp, layout))
}

/// Exact min-cost unit coded multicast (criteria (1,1)).
pub fn mincost_exact(
    net: &Network,
    r: &MulticastRequest,
    p: &PriceSystem,
) -> Result<MinCostResult, MinCostError> {
    r.validate()?;
    let (lp, layout) = build_mnc(net, r, p)?;
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(MinCostError::Infeasible(r.id.clone())),
        // Costs are nonnegative and flows bounded, so this cannot happen on a
        // well-formed program.
        LpStatus::Unbounded => return Err(MinCostError::Infeasible(r.id.clone())),
    }

    let m = net.link_count();
    let snap = |v: f64| if v.abs() < SNAP { 0.0 } else { v };
    let mut conceptual: Vec<Vec<f64>> = (0..layout.receivers)
        .map(|slot| {
            (0..m)
                .map(|e| snap(sol.value(layout.conceptual(slot, e))))
                .collect()
        })
        .collect();
    for g in conceptual.iter_mut() {
        cancel_cycles(net, g);
    }
    let link_flow = dominating_loads(&conceptual, m);

    let flow = UnitExtremeFlow {
        request_id: r.id.clone(),
        source: r.source,
        receivers: r.receivers.clone(),
        link_flow,
        conceptual,
        paths: None,
    };
    let cost = p.cost_of(&flow.link_flow);
    let granularity = granularity(&flow)?;
    Ok(MinCostResult {
        flow,
        cost,
        granularity,
        criteria: Criteria::Exact,
        basic: sol.basic,
        path_counts: None,
    })
}

/// Flow-shifted approximate min-cost unit coded multicast (criteria (2,2)).
pub fn mincost_approx(
    net: &Network,
    r: &MulticastRequest,
    p: &PriceSystem,
) -> Result<MinCostResult, MinCostError> {
    let exact = mincost_exact(net, r, p)?;
    let mut flow = exact.flow;
    let mut decomposed = Vec::with_capacity(flow.receivers.len());
    for &t in &flow.receivers {
        decomposed.push(decompose_paths(net, &flow, t)?);
    }
    let path_counts = decomposed.iter().map(Vec::len).collect();
    flow.paths = Some(decomposed);
    let shifted = shift_small_flows(net, &flow)?;
    let cost = p.cost_of(&shifted.link_flow);
    let granularity = granularity(&shifted)?;
    Ok(MinCostResult {
        flow: shifted,
        cost,
        granularity,
        criteria: Criteria::Shifted,
        basic: exact.basic,
        path_counts: Some(path_counts),
    })
}

/// Greedy bottleneck path decomposition of one receiver's conceptual flow.
/// From each node the first positive outgoing link in link order is taken.
pub fn decompose_paths(
    net: &Network,
    flow: &UnitExtremeFlow,
    receiver: NodeId,
) -> Result<Vec<PathFlow>, MinCostError> {
    let slot = flow.receiver_slot(receiver)?;
    let source = net.node_index(flow.source)?;
    let sink = net.node_index(receiver)?;
    let mut residual = flow.conceptual[slot].clone();
    let outflow = |res: &[f64]| -> f64 {
        net.out_links(source).iter().map(|&e| res[e]).sum::<f64>()
            - net.in_links(source).iter().map(|&e| res[e]).sum::<f64>()
    };
    if outflow(&residual) <= POSITIVE_LOAD {
        return Err(MinCostError::ZeroFlow);
    }

    let mut paths = Vec::new();
    while outflow(&residual) > POSITIVE_LOAD {
        let mut visited = vec![false; net.node_count()];
        let mut links = Vec::new();
        let mut u = source;
        visited[u] = true;
        while u != sink {
            let next = net
                .out_links(u)
                .iter()
                .copied()
                .find(|&e| residual[e] > SNAP)
                .ok_or(MinCostError::DeadEnd {
                    receiver,
                    node: net.nodes()[u],
                })?;
            links.push(next);
            u = net.link(next).head_index();
            if visited[u] {
                return Err(MinCostError::CycleResidual(receiver));
            }
            visited[u] = true;
        }
        let bottleneck = links
            .iter()
            .map(|&e| residual[e])
            .fold(f64::INFINITY, f64::min);
        for &e in &links {
            residual[e] -= bottleneck;
            if residual[e] < SNAP {
                residual[e] = 0.0;
            }
        }
        paths.push(PathFlow {
            links,
            flow: bottleneck,
        });
    }
    if residual.iter().any(|&v| v > POSITIVE_LOAD) {
        return Err(MinCostError::CycleResidual(receiver));
    }
    Ok(paths)
}

/// Moves every path flow below `1/(2 w_i^2)` onto the receiver's largest path
/// (first one on ties), then rebuilds conceptual and actual link flows.
pub fn shift_small_flows(
    net: &Network,
    flow: &UnitExtremeFlow,
) -> Result<UnitExtremeFlow, MinCostError> {
    let paths = flow
        .paths
        .as_ref()
        .ok_or(MinCostError::MissingDecomposition)?;
    let m = net.link_count();
    let mut new_paths = Vec::with_capacity(paths.len());
    for receiver_paths in paths {
        let w = receiver_paths.len();
        if w == 0 {
            return Err(MinCostError::ZeroFlow);
        }
        let threshold = 1.0 / (2.0 * (w * w) as f64);
        let small: f64 = receiver_paths
            .iter()
            .filter(|p| p.flow < threshold)
            .map(|p| p.flow)
            .sum();
        if small == 0.0 {
            new_paths.push(receiver_paths.clone());
            continue;
        }
        let largest = receiver_paths.iter().enumerate().fold(0, |best, (k, p)| {
            if p.flow > receiver_paths[best].flow {
                k
            } else {
                best
            }
        });
        let kept: Vec<PathFlow> = receiver_paths
            .iter()
            .enumerate()
            .filter(|(_, p)| p.flow >= threshold)
            .map(|(k, p)| PathFlow {
                links: p.links.clone(),
                flow: if k == largest { p.flow + small } else { p.flow },
            })
            .collect();
        new_paths.push(kept);
    }

    let conceptual: Vec<Vec<f64>> = new_paths
        .iter()
        .map(|ps| {
            let mut g = vec![0.0; m];
            for p in ps {
                for &e in &p.links {
                    g[e] += p.flow;
                }
            }
            g
        })
        .collect();
    let link_flow = dominating_loads(&conceptual, m);
    Ok(UnitExtremeFlow {
        request_id: flow.request_id.clone(),
        source: flow.source,
        receivers: flow.receivers.clone(),
        link_flow,
        conceptual,
        paths: Some(new_paths),
    })
}

/// Smallest positive link load of a flow.
pub fn granularity(flow: &UnitExtremeFlow) -> Result<f64, MinCostError> {
    flow.link_flow
        .iter()
        .copied()
        .filter(|&f| f > POSITIVE_LOAD)
        .fold(None, |acc: Option<f64>, f| {
            Some(acc.map_or(f, |a| a.min(f)))
        })
        .ok_or(MinCostError::ZeroFlow)
}

fn dominating_loads(conceptual: &[Vec<f64>], m: usize) -> Vec<f64> {
    (0..m)
        .map(|e| conceptual.iter().map(|g| g[e]).fold(0.0, f64::max))
        .collect()
}

/// Removes circulations from a conceptual flow. Only reduces link values, so
/// conservation and domination are preserved and cost never increases.
fn cancel_cycles(net: &Network, g: &mut [f64]) {
    while let Some(cycle) = find_cycle(net, g) {
        let amount = cycle.iter().map(|&e| g[e]).fold(f64::INFINITY, f64::min);
        for &e in &cycle {
            g[e] -= amount;
            if g[e] < SNAP {
                g[e] = 0.0;
            }
        }
    }
}

fn find_cycle(net: &Network, g: &[f64]) -> Option<Vec<usize>> {
    // 0 = unseen, 1 = on stack, 2 = done
    let n = net.node_count();
    let mut state = vec![0u8; n];
    let mut via: Vec<usize> = vec![usize::MAX; n];
    for root in 0..n {
        if state[root] != 0 {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        state[root] = 1;
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            let outs = net.out_links(u);
            if *next >= outs.len() {
                state[u] = 2;
                stack.pop();
                continue;
            }
            let e = outs[*next];
            *next += 1;
            if g[e] <= 0.0 {
                continue;
            }
            let v = net.link(e).head_index();
            match state[v] {
                0 => {
                    state[v] = 1;
                    via[v] = e;
                    stack.push((v, 0));
                }
                1 => {
                    let mut cycle = vec![e];
                    let mut w = u;
                    while w != v {
                        let back = via[w];
                        cycle.push(back);
                        w = net.link(back).tail_index();
                    }
                    cycle.reverse();
                    return Some(cycle);
                }
                _ => {}
            }
        }
    }
    None
}
