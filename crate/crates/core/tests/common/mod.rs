#![allow(dead_code)]

use misnc_core::{LinkSpec, MulticastRequest, Network, NodeId};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random directed network on nodes `1..=n` with integer capacities.
pub fn random_network(rng: &mut ChaCha8Rng, n: u32, density: f64) -> Network {
    let mut specs = Vec::new();
    for u in 1..=n {
        for v in 1..=n {
            if u != v && rng.gen_bool(density) {
                let cap = rng.gen_range(1..=10) as f64;
                specs.push(LinkSpec::new(format!("e{}", specs.len() + 1), u, v, cap));
            }
        }
    }
    Network::new(1..=n, specs).unwrap()
}

pub fn random_prices(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m)
        .map(|_| rng.gen_range(0..=50) as f64 / 10.0)
        .collect()
}

/// Draws requests until one is routable on `net`.
pub fn random_feasible_request(
    rng: &mut ChaCha8Rng,
    net: &Network,
    max_receivers: usize,
) -> Option<MulticastRequest> {
    let n = net.node_count() as u32;
    for _ in 0..50 {
        let source: NodeId = rng.gen_range(1..=n);
        let k = rng.gen_range(1..=max_receivers.min(n as usize - 1));
        let mut receivers = Vec::new();
        while receivers.len() < k {
            let t = rng.gen_range(1..=n);
            if t != source && !receivers.contains(&t) {
                receivers.push(t);
            }
        }
        let size = rng.gen_range(1..=20) as f64 / 10.0;
        let r = MulticastRequest::new("r", source, receivers, size).unwrap();
        if net.request_feasible(&r) {
            return Some(r);
        }
    }
    None
}

/// Butterfly with both sessions; every link has capacity 100.
pub fn butterfly(size: f64) -> (Network, Vec<MulticastRequest>) {
    let arcs = [
        (1, 3),
        (1, 4),
        (3, 8),
        (3, 7),
        (4, 7),
        (4, 10),
        (2, 5),
        (2, 6),
        (5, 12),
        (7, 9),
        (5, 7),
        (6, 7),
        (6, 10),
        (9, 8),
        (9, 10),
        (9, 12),
    ];
    let specs = arcs
        .iter()
        .enumerate()
        .map(|(i, &(u, v))| LinkSpec::new(format!("e{}", i + 1), u, v, 100.0));
    let net = Network::new(1..=12, specs).unwrap();
    let requests = vec![
        MulticastRequest::new("r1", 1, [8, 10], size).unwrap(),
        MulticastRequest::new("r2", 2, [10, 12], size).unwrap(),
    ];
    (net, requests)
}
