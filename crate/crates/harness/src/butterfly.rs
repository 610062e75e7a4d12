//! The 12-node, 16-link extended butterfly with two coded sessions.

use misnc_core::{LinkSpec, MulticastRequest, Network, NodeId};

pub const BUTTERFLY_CAPACITY: f64 = 100.0;

/// `(id, from, to)` in link order.
pub const BUTTERFLY_LINKS: [(&str, NodeId, NodeId); 16] = [
    ("e1", 1, 3),
    ("e2", 1, 4),
    ("e3", 3, 8),
    ("e4", 3, 7),
    ("e5", 4, 7),
    ("e6", 4, 10),
    ("e7", 2, 5),
    ("e8", 2, 6),
    ("e9", 5, 12),
    ("e10", 7, 9),
    ("e11", 5, 7),
    ("e12", 6, 7),
    ("e13", 6, 10),
    ("e14", 9, 8),
    ("e15", 9, 10),
    ("e16", 9, 12),
];

pub fn butterfly_network() -> Network {
    let specs = BUTTERFLY_LINKS
        .iter()
        .map(|&(id, from, to)| LinkSpec::new(id, from, to, BUTTERFLY_CAPACITY));
    Network::new(1..=12, specs).expect("butterfly topology is well formed")
}

/// Session A is `1 -> {8, 10}` and session B is `2 -> {10, 12}`, both of size `d`.
pub fn session_a(id: impl Into<String>, d: f64) -> MulticastRequest {
    MulticastRequest::new(id, 1, [8, 10], d).expect("session A is well formed")
}

pub fn session_b(id: impl Into<String>, d: f64) -> MulticastRequest {
    MulticastRequest::new(id, 2, [10, 12], d).expect("session B is well formed")
}

pub fn build_extended_butterfly(d: f64) -> (Network, [MulticastRequest; 2]) {
    (
        butterfly_network(),
        [session_a("r1", d), session_b("r2", d)],
    )
}
