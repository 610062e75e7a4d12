//! Directed capacitated network, multicast requests, and the max-flow based
//! feasibility test for coded multicast.
//!
//! With intra-session coding a multicast rate is achievable iff every receiver
//! can individually be reached at that rate, so feasibility of a request reduces
//! to one s-t max-flow per receiver on capacities scaled by `1/d_r`.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = u32;

/// Absolute tolerance on the `max_flow >= 1` feasibility comparison.
pub const FEASIBILITY_TOL: f64 = 1e-9;

const FLOW_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("duplicate link id `{0}`")]
    DuplicateLink(String),
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("link `{link}` has nonpositive capacity {capacity}")]
    NonPositiveCapacity { link: String, capacity: f64 },
    #[error("source and sink are both node {0}")]
    SourceIsSink(NodeId),
    #[error("capacity vector has {got} entries, network has {expected} links")]
    CapacityLength { expected: usize, got: usize },
    #[error("invalid request `{id}`: {reason}")]
    InvalidRequest { id: String, reason: String },
}

/// Input description of one link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub id: String,
    pub from: NodeId,
    pub to: NodeId,
    pub capacity: f64,
}

impl LinkSpec {
    pub fn new(id: impl Into<String>, from: NodeId, to: NodeId, capacity: f64) -> Self {
        LinkSpec {
            id: id.into(),
            from,
            to,
            capacity,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: String,
    pub tail: NodeId,
    pub head: NodeId,
    pub capacity: f64,
    tail_idx: usize,
    head_idx: usize,
}

impl Link {
    pub fn tail_index(&self) -> usize {
        self.tail_idx
    }

    pub fn head_index(&self) -> usize {
        self.head_idx
    }
}

/// Orders link ids naturally, so `e2 < e10`.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    fn split(s: &str) -> (&str, Option<u64>) {
        let cut = s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        let (prefix, digits) = s.split_at(cut);
        (prefix, digits.parse().ok())
    }
    let (pa, na) = split(a);
    let (pb, nb) = split(b);
    pa.cmp(pb).then(na.cmp(&nb)).then_with(|| a.cmp(b))
}

/// A validated, immutable directed network. Links are kept sorted by id in
/// natural order and are addressed by their position in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<NodeId>,
    node_index: HashMap<NodeId, usize>,
    links: Vec<Link>,
    out_links: Vec<Vec<usize>>,
    in_links: Vec<Vec<usize>>,
}

impl Network {
    pub fn new(
        nodes: impl IntoIterator<Item = NodeId>,
        link_specs: impl IntoIterator<Item = LinkSpec>,
    ) -> Result<Self, GraphError> {
        let mut node_list = Vec::new();
        let mut node_index = HashMap::new();
        for id in nodes {
            if node_index.insert(id, node_list.len()).is_some() {
                return Err(GraphError::DuplicateNode(id));
            }
            node_list.push(id);
        }

        let mut specs: Vec<LinkSpec> = link_specs.into_iter().collect();
        specs.sort_by(|a, b| natural_cmp(&a.id, &b.id));

        let mut links = Vec::with_capacity(specs.len());
        let mut seen = HashSet::new();
        for spec in specs {
            if !seen.insert(spec.id.clone()) {
                return Err(GraphError::DuplicateLink(spec.id));
            }
            let tail_idx = *node_index
                .get(&spec.from)
                .ok_or(GraphError::UnknownNode(spec.from))?;
            let head_idx = *node_index
                .get(&spec.to)
                .ok_or(GraphError::UnknownNode(spec.to))?;
            if !(spec.capacity.is_finite() && spec.capacity > 0.0) {
                return Err(GraphError::NonPositiveCapacity {
                    link: spec.id,
                    capacity: spec.capacity,
                });
            }
            links.push(Link {
                id: spec.id,
                tail: spec.from,
                head: spec.to,
                capacity: spec.capacity,
                tail_idx,
                head_idx,
            });
        }

        let mut out_links = vec![Vec::new(); node_list.len()];
        let mut in_links = vec![Vec::new(); node_list.len()];
        for (e, link) in links.iter().enumerate() {
            out_links[link.tail_idx].push(e);
            in_links[link.head_idx].push(e);
        }

        Ok(Network {
            nodes: node_list,
            node_index,
            links,
            out_links,
            in_links,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, e: usize) -> &Link {
        &self.links[e]
    }

    pub fn link_position(&self, id: &str) -> Option<usize> {
        self.links.iter().position(|l| l.id == id)
    }

    pub fn capacities(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.capacity).collect()
    }

    pub fn node_index(&self, id: NodeId) -> Result<usize, GraphError> {
        self.node_index
            .get(&id)
            .copied()
            .ok_or(GraphError::UnknownNode(id))
    }

    /// Outgoing links of a node (by index), in link order.
    pub fn out_links(&self, node: usize) -> &[usize] {
        &self.out_links[node]
    }

    pub fn in_links(&self, node: usize) -> &[usize] {
        &self.in_links[node]
    }

    /// Maximum s-t flow value under the supplied per-link capacities
    /// (Edmonds-Karp on the residual graph).
    pub fn max_flow(&self, source: NodeId, sink: NodeId, caps: &[f64]) -> Result<f64, GraphError> {
        let s = self.node_index(source)?;
        let t = self.node_index(sink)?;
        if s == t {
            return Err(GraphError::SourceIsSink(source));
        }
        if caps.len() != self.links.len() {
            return Err(GraphError::CapacityLength {
                expected: self.links.len(),
                got: caps.len(),
            });
        }

        // Residual arcs: 2e is the forward copy of link e, 2e+1 its reverse.
        let mut residual: Vec<f64> = caps.iter().flat_map(|&c| [c.max(0.0), 0.0]).collect();
        let arc_head = |a: usize| {
            let link = &self.links[a / 2];
            if a.is_multiple_of(2) {
                link.head_idx
            } else {
                link.tail_idx
            }
        };
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for (e, link) in self.links.iter().enumerate() {
            adjacency[link.tail_idx].push(2 * e);
            adjacency[link.head_idx].push(2 * e + 1);
        }

        let mut total = 0.0;
        loop {
            let mut pred: Vec<Option<usize>> = vec![None; self.nodes.len()];
            let mut visited = vec![false; self.nodes.len()];
            visited[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for &a in &adjacency[u] {
                    let v = arc_head(a);
                    if !visited[v] && residual[a] > FLOW_EPS {
                        visited[v] = true;
                        pred[v] = Some(a);
                        queue.push_back(v);
                    }
                }
            }
            if !visited[t] {
                break;
            }

            let mut bottleneck = f64::INFINITY;
            let mut v = t;
            while let Some(a) = pred[v] {
                bottleneck = bottleneck.min(residual[a]);
                v = arc_head(a ^ 1);
            }
            let mut v = t;
            while let Some(a) = pred[v] {
                residual[a] -= bottleneck;
                residual[a ^ 1] += bottleneck;
                v = arc_head(a ^ 1);
            }
            total += bottleneck;
        }
        Ok(total)
    }

    /// Checks that a request only names declared nodes.
    pub fn check_request(&self, r: &MulticastRequest) -> Result<(), GraphError> {
        self.node_index(r.source)?;
        for &t in &r.receivers {
            self.node_index(t)?;
        }
        Ok(())
    }

    /// True iff the request's unit flow polytope is nonempty, i.e. every
    /// receiver admits a unit flow under capacities `c_e / d_r`.
    pub fn request_feasible(&self, r: &MulticastRequest) -> bool {
        if self.check_request(r).is_err() {
            return false;
        }
        let caps: Vec<f64> = self.links.iter().map(|l| l.capacity / r.size).collect();
        r.receivers.iter().all(|&t| {
            self.max_flow(r.source, t, &caps)
                .map(|v| v >= 1.0 - FEASIBILITY_TOL)
                .unwrap_or(false)
        })
    }
}

/// One coded multicast session `(s_r, T_r, d_r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticastRequest {
    pub id: String,
    pub source: NodeId,
    pub receivers: Vec<NodeId>,
    pub size: f64,
}

impl MulticastRequest {
    pub fn new(
        id: impl Into<String>,
        source: NodeId,
        receivers: impl IntoIterator<Item = NodeId>,
        size: f64,
    ) -> Result<Self, GraphError> {
        let r = MulticastRequest {
            id: id.into(),
            source,
            receivers: receivers.into_iter().collect(),
            size,
        };
        r.validate()?;
        Ok(r)
    }

    /// Structural checks that do not need a network.
    pub fn validate(&self) -> Result<(), GraphError> {
        let invalid = |reason: &str| GraphError::InvalidRequest {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.receivers.is_empty() {
            return Err(invalid("receiver set is empty"));
        }
        if self.receivers.contains(&self.source) {
            return Err(invalid("source is also a receiver"));
        }
        let distinct: HashSet<_> = self.receivers.iter().collect();
        if distinct.len() != self.receivers.len() {
            return Err(invalid("duplicate receiver"));
        }
        if !(self.size.is_finite() && self.size > 0.0) {
            return Err(invalid("size must be positive and finite"));
        }
        Ok(())
    }
}
