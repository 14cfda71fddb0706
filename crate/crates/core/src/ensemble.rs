//! Random network ensembles for experiments: `G(n, m)` conditioned on
//! connectivity, uniform random trees, and capacity draws.

use crate::error::{Error, Result};
use crate::network::{ChannelGraph, ChannelSpec, NetworkSpec};
use rand::Rng;

fn node_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("n{i}")).collect()
}

fn build(n: usize, edges: &[(usize, usize)], caps: &[i64]) -> Result<ChannelGraph> {
    let nodes = node_names(n);
    let channels = edges
        .iter()
        .zip(caps)
        .map(|(&(u, v), &cap)| ChannelSpec {
            ends: vec![nodes[u].clone(), nodes[v].clone()],
            cap,
        })
        .collect();
    ChannelGraph::build(&NetworkSpec { nodes, channels })
}

fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    if n == 0 {
        return true;
    }
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == n
}

/// Uniform simple graph with `n` nodes and `m` distinct edges, resampled
/// until connected. Capacities are uniform in `cap_range`.
pub fn random_connected_graph(
    n: usize,
    m: usize,
    cap_range: (i64, i64),
    rng: &mut impl Rng,
) -> Result<ChannelGraph> {
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two nodes".into()));
    }
    let max_edges = n * (n - 1) / 2;
    if m < n - 1 || m > max_edges {
        return Err(Error::InvalidParameter(format!(
            "m = {m} not in [{}, {max_edges}] for n = {n}",
            n - 1
        )));
    }
    let all_pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
        .collect();
    loop {
        let picked = rand::seq::index::sample(rng, all_pairs.len(), m);
        let edges: Vec<(usize, usize)> = picked.iter().map(|i| all_pairs[i]).collect();
        if !is_connected(n, &edges) {
            continue;
        }
        let caps: Vec<i64> = edges
            .iter()
            .map(|_| rng.random_range(cap_range.0..=cap_range.1))
            .collect();
        return build(n, &edges, &caps);
    }
}

/// Uniform random labelled tree (random attachment), capacities uniform in
/// `cap_range`.
pub fn random_tree(n: usize, cap_range: (i64, i64), rng: &mut impl Rng) -> Result<ChannelGraph> {
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two nodes".into()));
    }
    let mut edges = Vec::with_capacity(n - 1);
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.push((u, v));
    }
    let caps: Vec<i64> = edges
        .iter()
        .map(|_| rng.random_range(cap_range.0..=cap_range.1))
        .collect();
    build(n, &edges, &caps)
}

/// Single cycle through all `n` nodes.
pub fn cycle_graph(n: usize, cap: i64) -> Result<ChannelGraph> {
    if n < 3 {
        return Err(Error::InvalidParameter("a cycle needs three nodes".into()));
    }
    let edges: Vec<(usize, usize)> = (0..n).map(|u| (u, (u + 1) % n)).collect();
    let edges: Vec<(usize, usize)> = edges
        .iter()
        .map(|&(u, v)| if u < v { (u, v) } else { (v, u) })
        .collect();
    let caps = vec![cap; n];
    build(n, &edges, &caps)
}
