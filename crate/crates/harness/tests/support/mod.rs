#![allow(dead_code)]

use misnc_core::{LinkSpec, MulticastRequest, Network, NodeId};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_network(rng: &mut ChaCha8Rng, n: u32, density: f64) -> Network {
    let mut specs = Vec::new();
    for u in 1..=n {
        for v in 1..=n {
            if u != v && rng.gen_bool(density) {
                let cap = rng.gen_range(1..=100) as f64;
                specs.push(LinkSpec::new(format!("e{}", specs.len() + 1), u, v, cap));
            }
        }
    }
    Network::new(1..=n, specs).unwrap()
}

pub fn random_prices(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m)
        .map(|_| rng.gen_range(0..=100) as f64 / 10.0)
        .collect()
}

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
        let r =
            MulticastRequest::new("r", source, receivers, rng.gen_range(1..=50) as f64).unwrap();
        if net.request_feasible(&r) {
            return Some(r);
        }
    }
    None
}

/// Min-cost `s`-`t` flow of value `demand` by successive shortest paths
/// (Bellman-Ford on the residual graph).
pub fn ssp_min_cost(
    net: &Network,
    s: usize,
    t: usize,
    caps: &[f64],
    cost: &[f64],
    demand: f64,
) -> Option<f64> {
    let n = net.node_count();
    let mut flow = vec![0.0; net.link_count()];
    let (mut sent, mut total) = (0.0, 0.0);
    while demand - sent > 1e-12 {
        let mut dist = vec![f64::INFINITY; n];
        let mut pred: Vec<Option<(usize, bool)>> = vec![None; n];
        dist[s] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for (e, link) in net.links().iter().enumerate() {
                let (u, v) = (link.tail_index(), link.head_index());
                if caps[e] - flow[e] > 1e-12 && dist[u] + cost[e] < dist[v] - 1e-12 {
                    dist[v] = dist[u] + cost[e];
                    pred[v] = Some((e, true));
                    changed = true;
                }
                if flow[e] > 1e-12 && dist[v] - cost[e] < dist[u] - 1e-12 {
                    dist[u] = dist[v] - cost[e];
                    pred[u] = Some((e, false));
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if dist[t].is_infinite() {
            return None;
        }
        let mut push = demand - sent;
        let mut hops = Vec::new();
        let mut v = t;
        while v != s {
            let (e, fwd) = pred[v].unwrap();
            push = push.min(if fwd { caps[e] - flow[e] } else { flow[e] });
            hops.push((e, fwd));
            v = if fwd {
                net.link(e).tail_index()
            } else {
                net.link(e).head_index()
            };
        }
        for (e, fwd) in hops {
            flow[e] += if fwd { push } else { -push };
        }
        sent += push;
        total += push * dist[t];
    }
    Some(total)
}
