//! JSON instance documents.

use std::path::Path;

use misnc_core::{GraphError, LinkSpec, MulticastRequest, Network, NodeId, Variant};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::butterfly::{build_extended_butterfly, BUTTERFLY_LINKS};
use crate::trace::generate_online_trace;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    /// serde_json reports the offending field together with line and column.
    #[error("invalid instance document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid parameters: {0}")]
    Params(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Offline,
    Online,
    Mincost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub mode: Mode,
    pub network: NetworkSection,
    pub requests: Vec<RequestEntry>,
    #[serde(default)]
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub nodes: Vec<NodeId>,
    pub links: Vec<LinkEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEntry {
    pub id: String,
    pub from: NodeId,
    pub to: NodeId,
    pub capacity: f64,
    /// Carried through for reference only; routing costs come from prices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestEntry {
    pub id: String,
    pub source: NodeId,
    pub receivers: Vec<NodeId>,
    pub size: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_thr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Link prices for `mincost` runs, in link order; unit prices if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prices: Option<Vec<f64>>,
}

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_PHI: f64 = 1.0;
pub const DEFAULT_SEED: u64 = 1;

impl InstanceDocument {
    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let doc: InstanceDocument = serde_json::from_str(text)?;
        doc.params.validate()?;
        Ok(doc)
    }

    pub fn from_path(path: &Path) -> Result<Self, InstanceError> {
        let text = std::fs::read_to_string(path).map_err(|source| InstanceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance documents always serialize")
    }

    pub fn network(&self) -> Result<Network, InstanceError> {
        let specs = self
            .network
            .links
            .iter()
            .map(|l| LinkSpec::new(l.id.clone(), l.from, l.to, l.capacity));
        Ok(Network::new(self.network.nodes.iter().copied(), specs)?)
    }

    pub fn requests(&self) -> Result<Vec<MulticastRequest>, InstanceError> {
        self.requests
            .iter()
            .map(|r| {
                MulticastRequest::new(r.id.clone(), r.source, r.receivers.clone(), r.size)
                    .map_err(InstanceError::from)
            })
            .collect()
    }

    /// Offline butterfly instance with both sessions of size `d`.
    pub fn butterfly_offline(d: f64) -> Self {
        let (_, requests) = build_extended_butterfly(d);
        Self::butterfly(Mode::Offline, requests.iter())
    }

    /// Online butterfly instance with a seeded, shuffled arrival trace.
    pub fn butterfly_online(seed: u64, count_a: usize, count_b: usize, size: f64) -> Self {
        let trace = generate_online_trace(seed, count_a, count_b, size);
        let mut doc = Self::butterfly(Mode::Online, trace.iter());
        doc.params.seed = Some(seed);
        doc
    }

    /// Session A of size `d` under unit prices.
    pub fn butterfly_mincost(d: f64) -> Self {
        let (_, [a, _]) = build_extended_butterfly(d);
        let mut doc = Self::butterfly(Mode::Mincost, [a].iter());
        doc.params.prices = Some(vec![1.0; BUTTERFLY_LINKS.len()]);
        doc
    }

    fn butterfly<'a>(mode: Mode, requests: impl Iterator<Item = &'a MulticastRequest>) -> Self {
        let (net, _) = build_extended_butterfly(1.0);
        InstanceDocument {
            mode,
            network: NetworkSection {
                nodes: net.nodes().to_vec(),
                links: net
                    .links()
                    .iter()
                    .map(|l| LinkEntry {
                        id: l.id.clone(),
                        from: l.tail,
                        to: l.head,
                        capacity: l.capacity,
                        weight: Some(1.0),
                    })
                    .collect(),
            },
            requests: requests
                .map(|r| RequestEntry {
                    id: r.id.clone(),
                    source: r.source,
                    receivers: r.receivers.clone(),
                    size: r.size,
                })
                .collect(),
            params: Params::default(),
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.epsilon.is_some() && self.omega.is_some() {
            return Err(InstanceError::Params(
                "give either epsilon or omega, not both".to_string(),
            ));
        }
        Ok(())
    }

    pub fn phi_or_default(&self) -> f64 {
        self.phi.unwrap_or(DEFAULT_PHI)
    }

    pub fn variant_or_default(&self) -> Variant {
        self.variant.unwrap_or(Variant::Exact)
    }

    pub fn seed_or_default(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }
}
