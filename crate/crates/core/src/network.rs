//! Core data model: channel graphs, liquidity states and wealth vectors.
//!
//! A network locks `cap(e)` coins into every channel `e`. A liquidity state
//! assigns each channel's capacity to its endpoints; the per-channel sums are
//! invariant under off-chain activity (conservation of liquidity). Wealth is
//! the per-node total over incident channel sides.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A single channel. `endpoints` holds node indices in ascending order; the
/// first endpoint is the "primary" side used by hyperbox coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Channel {
    pub id: String,
    pub endpoints: Vec<usize>,
    pub capacity: i64,
}

impl Channel {
    pub fn is_two_party(&self) -> bool {
        self.endpoints.len() == 2
    }
}

/// An undirected weighted (hyper)graph of peers and channels. Immutable after
/// construction; parallel channels over the same endpoint set are merged by
/// summing capacities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelGraph {
    nodes: Vec<String>,
    channels: Vec<Channel>,
    total_capacity: i64,
}

/// JSON form of a network: `{"nodes":[...],"channels":[{"ends":[...],"cap":N}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub nodes: Vec<String>,
    pub channels: Vec<ChannelSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub ends: Vec<String>,
    pub cap: i64,
}

impl ChannelGraph {
    /// Validates and builds a graph from a parsed description. Parallel
    /// channels are merged; endpoint lists are sorted by node index.
    pub fn build(spec: &NetworkSpec) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, name) in spec.nodes.iter().enumerate() {
            if name.contains(':') {
                return Err(Error::ReservedCharInNodeId(name.clone()));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::DuplicateNode(name.clone()));
            }
        }
        // merge parallel channels, keeping first-seen order
        let mut slot_of: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        let mut channels: Vec<Channel> = Vec::new();
        for ch in &spec.channels {
            if ch.ends.len() < 2 {
                return Err(Error::TooFewEndpoints);
            }
            if ch.cap <= 0 {
                return Err(Error::NonpositiveCapacity(ch.cap));
            }
            let mut ids = Vec::with_capacity(ch.ends.len());
            for end in &ch.ends {
                let &i = index
                    .get(end)
                    .ok_or_else(|| Error::UnknownNode(end.clone()))?;
                if ids.contains(&i) {
                    return Err(Error::RepeatedEndpoint(end.clone()));
                }
                ids.push(i);
            }
            ids.sort_unstable();
            match slot_of.get(&ids) {
                Some(&slot) => {
                    channels[slot].capacity = channels[slot]
                        .capacity
                        .checked_add(ch.cap)
                        .ok_or(Error::Overflow("merging channel capacities"))?;
                }
                None => {
                    slot_of.insert(ids.clone(), channels.len());
                    let id = ids
                        .iter()
                        .map(|&i| spec.nodes[i].as_str())
                        .collect::<Vec<_>>()
                        .join(":");
                    channels.push(Channel {
                        id,
                        endpoints: ids,
                        capacity: ch.cap,
                    });
                }
            }
        }
        let mut total: i64 = 0;
        for ch in &channels {
            total = total
                .checked_add(ch.capacity)
                .ok_or(Error::Overflow("summing total capacity"))?;
        }
        Ok(ChannelGraph {
            nodes: spec.nodes.clone(),
            channels,
            total_capacity: total,
        })
    }

    /// Convenience constructor for two-party networks given as
    /// `(name, name, capacity)` triples.
    pub fn from_pairs(nodes: &[&str], pairs: &[(&str, &str, i64)]) -> Result<Self> {
        let spec = NetworkSpec {
            nodes: nodes.iter().map(|s| s.to_string()).collect(),
            channels: pairs
                .iter()
                .map(|&(a, b, cap)| ChannelSpec {
                    ends: vec![a.to_string(), b.to_string()],
                    cap,
                })
                .collect(),
        };
        Self::build(&spec)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let spec: NetworkSpec = serde_json::from_str(json)?;
        Self::build(&spec)
    }

    pub fn to_spec(&self) -> NetworkSpec {
        NetworkSpec {
            nodes: self.nodes.clone(),
            channels: self
                .channels
                .iter()
                .map(|ch| ChannelSpec {
                    ends: ch.endpoints.iter().map(|&i| self.nodes[i].clone()).collect(),
                    cap: ch.capacity,
                })
                .collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn node_name(&self, i: usize) -> &str {
        &self.nodes[i]
    }

    pub fn node_index(&self, name: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    /// Total number of coins locked in the network.
    pub fn total_capacity(&self) -> i64 {
        self.total_capacity
    }

    pub fn is_two_party(&self) -> bool {
        self.channels.iter().all(Channel::is_two_party)
    }

    /// Index of the two-party channel joining `u` and `v`, if any.
    pub fn channel_between(&self, u: usize, v: usize) -> Option<usize> {
        let key = if u < v { [u, v] } else { [v, u] };
        self.channels
            .iter()
            .position(|ch| ch.endpoints.len() == 2 && ch.endpoints[0] == key[0] && ch.endpoints[1] == key[1])
    }

    /// Number of liquidity states. For two-party graphs this is the hyperbox
    /// volume `prod(c_i + 1)`; a k-party channel contributes the number of
    /// compositions of its capacity into k parts.
    pub fn state_volume(&self) -> u128 {
        let mut vol: u128 = 1;
        for ch in &self.channels {
            let per = compositions_count(ch.capacity as u128, ch.endpoints.len() as u128);
            vol = vol.saturating_mul(per);
        }
        vol
    }

    /// Connected components; returns a component id per node.
    pub fn components(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut comp = vec![usize::MAX; n];
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for ch in &self.channels {
            for &u in &ch.endpoints {
                for &v in &ch.endpoints {
                    if u != v {
                        adj[u].push(v);
                    }
                }
            }
        }
        let mut next = 0;
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            comp[start] = next;
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn component_count(&self) -> usize {
        self.components().iter().copied().max().map_or(0, |m| m + 1)
    }
}

/// Number of ways to write `c` as an ordered sum of `k` nonnegative parts,
/// saturating at `u128::MAX`.
fn compositions_count(c: u128, k: u128) -> u128 {
    // binom(c + k - 1, k - 1)
    let mut acc: u128 = 1;
    for i in 0..k.saturating_sub(1) {
        acc = match acc.checked_mul(c + i + 1) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Assignment of every channel's capacity to its endpoints.
/// `per_channel[e][j]` is the liquidity of `graph.channels()[e].endpoints[j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiquidityState {
    per_channel: Vec<Vec<i64>>,
}

impl LiquidityState {
    pub fn new(graph: &ChannelGraph, per_channel: Vec<Vec<i64>>) -> Result<Self> {
        if per_channel.len() != graph.channel_count() {
            return Err(Error::InvalidLiquidity(format!(
                "expected {} channels, got {}",
                graph.channel_count(),
                per_channel.len()
            )));
        }
        for (e, (vals, ch)) in per_channel.iter().zip(graph.channels()).enumerate() {
            if vals.len() != ch.endpoints.len() {
                return Err(Error::InvalidLiquidity(format!(
                    "channel {e} has {} endpoints but {} liquidity entries",
                    ch.endpoints.len(),
                    vals.len()
                )));
            }
            let mut sum: i64 = 0;
            for &v in vals {
                if v < 0 {
                    return Err(Error::InvalidLiquidity(format!(
                        "negative liquidity {v} on channel {}",
                        ch.id
                    )));
                }
                sum = sum
                    .checked_add(v)
                    .ok_or(Error::Overflow("summing channel liquidity"))?;
            }
            if sum != ch.capacity {
                return Err(Error::InvalidLiquidity(format!(
                    "channel {} liquidity sums to {sum}, capacity is {}",
                    ch.id, ch.capacity
                )));
            }
        }
        Ok(LiquidityState { per_channel })
    }

    /// Two-party state from one value per channel: the liquidity of the first
    /// (lower-indexed) endpoint. This is the hyperbox coordinate system.
    pub fn from_primary(graph: &ChannelGraph, primary: &[i64]) -> Result<Self> {
        if !graph.is_two_party() {
            return Err(Error::HyperchannelPresent);
        }
        if primary.len() != graph.channel_count() {
            return Err(Error::InvalidLiquidity(format!(
                "expected {} coordinates, got {}",
                graph.channel_count(),
                primary.len()
            )));
        }
        let per_channel = graph
            .channels()
            .iter()
            .zip(primary)
            .map(|(ch, &x)| vec![x, ch.capacity - x])
            .collect();
        Self::new(graph, per_channel)
    }

    /// Splits every channel in half, floor on the primary side's partner:
    /// the first endpoint gets `ceil(c/2)`... see `half_split`.
    pub fn half_split(graph: &ChannelGraph) -> Self {
        // Lower-indexed endpoint takes the remainder.
        let per_channel = graph
            .channels()
            .iter()
            .map(|ch| {
                let k = ch.endpoints.len() as i64;
                let base = ch.capacity / k;
                let mut rem = ch.capacity - base * k;
                ch.endpoints
                    .iter()
                    .map(|_| {
                        let extra = if rem > 0 { 1 } else { 0 };
                        rem -= extra;
                        base + extra
                    })
                    .collect()
            })
            .collect();
        LiquidityState { per_channel }
    }

    pub fn channel(&self, e: usize) -> &[i64] {
        &self.per_channel[e]
    }

    /// Liquidity of node `v` in channel `e`; zero when `v` is not a member.
    pub fn get(&self, graph: &ChannelGraph, e: usize, v: usize) -> i64 {
        graph.channels()[e]
            .endpoints
            .iter()
            .position(|&u| u == v)
            .map_or(0, |j| self.per_channel[e][j])
    }

    /// Primary hyperbox coordinates (two-party graphs).
    pub fn primary(&self) -> Vec<i64> {
        self.per_channel.iter().map(|vals| vals[0]).collect()
    }

    /// Flat coordinates in `Z^(2m)` for two-party graphs, ordered
    /// `(e_0 u, e_0 v, e_1 u, ...)`.
    pub fn flat(&self) -> Vec<i64> {
        self.per_channel.iter().flatten().copied().collect()
    }

    pub fn from_flat(graph: &ChannelGraph, flat: &[i64]) -> Result<Self> {
        let mut per_channel = Vec::with_capacity(graph.channel_count());
        let mut it = flat.iter();
        for ch in graph.channels() {
            let vals: Vec<i64> = it.by_ref().take(ch.endpoints.len()).copied().collect();
            per_channel.push(vals);
        }
        Self::new(graph, per_channel)
    }

    /// JSON form keyed by channel id: `{"x:y":{"x":0,"y":3}}`.
    pub fn to_json(&self, graph: &ChannelGraph) -> String {
        let map: BTreeMap<String, BTreeMap<String, i64>> = graph
            .channels()
            .iter()
            .enumerate()
            .map(|(e, ch)| {
                let inner = ch
                    .endpoints
                    .iter()
                    .zip(&self.per_channel[e])
                    .map(|(&v, &x)| (graph.node_name(v).to_string(), x))
                    .collect();
                (ch.id.clone(), inner)
            })
            .collect();
        serde_json::to_string(&map).expect("liquidity serializes")
    }

    pub fn from_json(graph: &ChannelGraph, json: &str) -> Result<Self> {
        let map: BTreeMap<String, BTreeMap<String, i64>> = serde_json::from_str(json)?;
        let mut per_channel = Vec::with_capacity(graph.channel_count());
        for ch in graph.channels() {
            let inner = map.get(&ch.id).ok_or_else(|| {
                Error::InvalidLiquidity(format!("missing channel `{}`", ch.id))
            })?;
            let mut vals = Vec::with_capacity(ch.endpoints.len());
            for &v in &ch.endpoints {
                let name = graph.node_name(v);
                let &x = inner.get(name).ok_or_else(|| {
                    Error::InvalidLiquidity(format!("channel `{}` missing node `{name}`", ch.id))
                })?;
                vals.push(x);
            }
            per_channel.push(vals);
        }
        Self::new(graph, per_channel)
    }
}

/// Per-node coin totals summing to the network capacity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WealthVector {
    omega: Vec<i64>,
    total: i64,
}

impl WealthVector {
    pub fn new(graph: &ChannelGraph, omega: Vec<i64>) -> Result<Self> {
        if omega.len() != graph.node_count() {
            return Err(Error::InvalidParameter(format!(
                "wealth vector has {} entries for {} nodes",
                omega.len(),
                graph.node_count()
            )));
        }
        let mut total: i64 = 0;
        for (v, &w) in omega.iter().enumerate() {
            if w < 0 {
                return Err(Error::NegativeWealth(w, graph.node_name(v).to_string()));
            }
            total = total
                .checked_add(w)
                .ok_or(Error::Overflow("summing wealth"))?;
        }
        if total != graph.total_capacity() {
            return Err(Error::WealthTotalMismatch {
                expected: graph.total_capacity(),
                got: total,
            });
        }
        Ok(WealthVector { omega, total })
    }

    /// Unchecked against a graph; used by samplers that draw from `W(C,n)`.
    pub fn from_raw(omega: Vec<i64>) -> Self {
        let total = omega.iter().sum();
        WealthVector { omega, total }
    }

    pub fn get(&self, v: usize) -> i64 {
        self.omega[v]
    }

    pub fn values(&self) -> &[i64] {
        &self.omega
    }

    pub fn total(&self) -> i64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// The post-payment vector `w + a*b_payee - a*b_payer`; does not validate
    /// the payer's balance.
    pub fn shifted(&self, payer: usize, payee: usize, amount: i64) -> WealthVector {
        let mut omega = self.omega.clone();
        omega[payer] -= amount;
        omega[payee] += amount;
        WealthVector {
            omega,
            total: self.total,
        }
    }

    pub fn to_json(&self, graph: &ChannelGraph) -> String {
        let map: BTreeMap<&str, i64> = self
            .omega
            .iter()
            .enumerate()
            .map(|(v, &w)| (graph.node_name(v), w))
            .collect();
        serde_json::to_string(&map).expect("wealth serializes")
    }

    pub fn from_json(graph: &ChannelGraph, json: &str) -> Result<Self> {
        let map: BTreeMap<String, i64> = serde_json::from_str(json)?;
        let mut omega = vec![0i64; graph.node_count()];
        for (name, w) in map {
            omega[graph.node_index(&name)?] = w;
        }
        Self::new(graph, omega)
    }
}

/// Directed flow network derived from a state of a two-party graph: each
/// channel `e=(u,v)` contributes arcs `u->v` with capacity `lambda(e,u)` and
/// `v->u` with capacity `lambda(e,v)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiquidityNetwork {
    pub node_count: usize,
    /// `(src, dst, capacity, channel index)`
    pub arcs: Vec<(usize, usize, i64, usize)>,
}

/// Builds `L(G, lambda)`. Errors on hyperchannels; their feasible moves are
/// covered by the bipartite expansion in the feasibility module.
pub fn liquidity_network(graph: &ChannelGraph, lam: &LiquidityState) -> Result<LiquidityNetwork> {
    if !graph.is_two_party() {
        return Err(Error::HyperchannelPresent);
    }
    let mut arcs = Vec::with_capacity(2 * graph.channel_count());
    for (e, ch) in graph.channels().iter().enumerate() {
        let (u, v) = (ch.endpoints[0], ch.endpoints[1]);
        let side = lam.channel(e);
        arcs.push((u, v, side[0], e));
        arcs.push((v, u, side[1], e));
    }
    Ok(LiquidityNetwork {
        node_count: graph.node_count(),
        arcs,
    })
}

/// The projection `pi`: wealth of each node is the sum of its channel sides.
pub fn wealth_of(graph: &ChannelGraph, lam: &LiquidityState) -> WealthVector {
    let mut omega = vec![0i64; graph.node_count()];
    for (e, ch) in graph.channels().iter().enumerate() {
        for (j, &v) in ch.endpoints.iter().enumerate() {
            omega[v] += lam.channel(e)[j];
        }
    }
    WealthVector {
        omega,
        total: graph.total_capacity(),
    }
}
