//! Fee potential and channel depletion.
//!
//! Routing nodes earn proportionally to the liquidity they hold on priced
//! channel sides, so within a wealth fiber the network drifts toward states
//! maximizing the total fee potential. With generic asymmetric fees that
//! optimum sits on the fiber boundary: channels deplete, except along cycles
//! whose signed fee differences cancel.

use crate::error::{Error, Result};
use crate::fibers::{apply_circulation, circuit_rank, Circulation};
use crate::flow::{self, FlowNetwork};
use crate::network::{ChannelGraph, LiquidityState};
use crate::stats::pearson;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Linear per-unit forwarding rates, one per channel side, in ppm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeeSchedule {
    /// `rates[e][j]` is the rate charged by `channels()[e].endpoints[j]`.
    rates: Vec<Vec<i64>>,
}

impl FeeSchedule {
    pub fn new(g: &ChannelGraph, rates: Vec<Vec<i64>>) -> Result<Self> {
        if rates.len() != g.channel_count() {
            return Err(Error::InvalidSchedule(format!(
                "expected {} channels, got {}",
                g.channel_count(),
                rates.len()
            )));
        }
        for (ch, r) in g.channels().iter().zip(&rates) {
            if r.len() != ch.endpoints.len() {
                return Err(Error::InvalidSchedule(format!(
                    "channel {} has {} endpoints, got {} rates",
                    ch.id,
                    ch.endpoints.len(),
                    r.len()
                )));
            }
            if r.iter().any(|&x| x < 0) {
                return Err(Error::InvalidSchedule("rates must be nonnegative".into()));
            }
        }
        Ok(FeeSchedule { rates })
    }

    /// One shared rate per channel, charged in both directions.
    pub fn symmetric(g: &ChannelGraph, per_channel: &[i64]) -> Result<Self> {
        let rates = g
            .channels()
            .iter()
            .zip(per_channel)
            .map(|(ch, &r)| vec![r; ch.endpoints.len()])
            .collect();
        Self::new(g, rates)
    }

    /// Generic random rates, uniform ppm in `[1, 1000]` per channel side.
    pub fn generic(g: &ChannelGraph, rng: &mut impl Rng) -> Self {
        let rates = g
            .channels()
            .iter()
            .map(|ch| {
                ch.endpoints
                    .iter()
                    .map(|_| rng.random_range(1..=1000))
                    .collect()
            })
            .collect();
        FeeSchedule { rates }
    }

    pub fn rate(&self, e: usize, slot: usize) -> i64 {
        self.rates[e][slot]
    }

    /// Rate charged by node `v` on channel `e`; `v` must be a member.
    pub fn rate_of(&self, g: &ChannelGraph, e: usize, v: usize) -> Result<i64> {
        let slot = g.channels()[e]
            .endpoints
            .iter()
            .position(|&u| u == v)
            .ok_or_else(|| Error::InvalidCycle(format!("node {v} not on channel {e}")))?;
        Ok(self.rates[e][slot])
    }
}

/// Fee potentials and depletion summary of one liquidity state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PotentialReport {
    /// Network fee potential: sum over channel sides of rate * liquidity.
    pub p_network: i64,
    /// Per-node fee potential; sums to `p_network`.
    pub p_node: Vec<i64>,
    /// Channels with at least one endpoint holding zero liquidity.
    pub depleted_channels: usize,
    pub circuit_rank: usize,
}

/// Exact integer fee potentials of `(g, lam)` under `fees`.
pub fn fee_potential(
    g: &ChannelGraph,
    lam: &LiquidityState,
    fees: &FeeSchedule,
) -> Result<PotentialReport> {
    let mut p_node = vec![0i64; g.node_count()];
    let mut depleted = 0usize;
    for (e, ch) in g.channels().iter().enumerate() {
        let side = lam.channel(e);
        if side.contains(&0) {
            depleted += 1;
        }
        for (j, &v) in ch.endpoints.iter().enumerate() {
            p_node[v] += fees.rate(e, j) * side[j];
        }
    }
    Ok(PotentialReport {
        p_network: p_node.iter().sum(),
        p_node,
        depleted_channels: depleted,
        circuit_rank: circuit_rank(g)?,
    })
}

/// Finds the fiber element of `wealth_of(lam0)` maximizing the network fee
/// potential, by canceling positive-gain rebalancing cycles: pushing one coin
/// from `u` to `v` on channel `e` changes the potential by
/// `rate(e,v) - rate(e,u)`, so the arc cost is the negated gain and a
/// min-cost circulation lands on the optimum. Optimality is certified by the
/// absence of negative-cost residual cycles.
pub fn maximize_potential(
    g: &ChannelGraph,
    lam0: &LiquidityState,
    fees: &FeeSchedule,
) -> Result<(LiquidityState, PotentialReport)> {
    if !g.is_two_party() {
        return Err(Error::HyperchannelPresent);
    }
    let mut net = FlowNetwork::new(g.node_count());
    let mut arcs = Vec::with_capacity(2 * g.channel_count());
    for (e, ch) in g.channels().iter().enumerate() {
        let (u, v) = (ch.endpoints[0], ch.endpoints[1]);
        let side = lam0.channel(e);
        let (fu, fv) = (fees.rate(e, 0), fees.rate(e, 1));
        // u -> v gains fv - fu per coin
        arcs.push((e, 1i64, net.add_arc(u, v, side[0], fu - fv)));
        arcs.push((e, -1i64, net.add_arc(v, u, side[1], fv - fu)));
    }
    let flow = flow::min_cost_circulation(&net)?;
    debug_assert!(flow::verify_no_negative_cycle(&net, &flow));
    let mut per_channel = vec![0i64; g.channel_count()];
    for &(e, sign, idx) in &arcs {
        per_channel[e] += sign * flow.per_arc[idx];
    }
    let circ = Circulation::new(g, lam0, per_channel)?;
    let best = apply_circulation(g, lam0, &circ)?;
    let report = fee_potential(g, &best, fees)?;
    Ok((best, report))
}

/// Signed sum of fee differences around a closed walk: for consecutive nodes
/// `v_i, v_{i+1}` joined by channel `e_i`, adds
/// `rate(e_i, v_i) - rate(e_i, v_{i+1})`. Zero for symmetric fees; at a
/// potential maximum it is zero on every fully-non-depleted cycle.
pub fn cycle_fee_gap(g: &ChannelGraph, fees: &FeeSchedule, cycle: &[usize]) -> Result<i64> {
    if cycle.len() < 3 {
        return Err(Error::InvalidCycle("need at least three nodes".into()));
    }
    let mut gap = 0i64;
    for i in 0..cycle.len() {
        let (a, b) = (cycle[i], cycle[(i + 1) % cycle.len()]);
        let e = g
            .channel_between(a, b)
            .ok_or_else(|| Error::InvalidCycle(format!("no channel between {a} and {b}")))?;
        gap += fees.rate_of(g, e, a)? - fees.rate_of(g, e, b)?;
    }
    Ok(gap)
}

/// All simple cycles of a two-party graph, as node sequences. Exponential in
/// general; used on small experiment instances.
pub fn simple_cycles(g: &ChannelGraph) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut adj = vec![Vec::new(); n];
    for ch in g.channels() {
        if ch.is_two_party() {
            adj[ch.endpoints[0]].push(ch.endpoints[1]);
            adj[ch.endpoints[1]].push(ch.endpoints[0]);
        }
    }
    let mut cycles = Vec::new();
    let mut path = Vec::new();
    for start in 0..n {
        path.push(start);
        dfs(start, start, &adj, &mut vec![false; n], &mut path, &mut cycles);
        path.pop();
    }
    return cycles;

    fn dfs(
        start: usize,
        u: usize,
        adj: &[Vec<usize>],
        used: &mut Vec<bool>,
        path: &mut Vec<usize>,
        cycles: &mut Vec<Vec<usize>>,
    ) {
        used[u] = true;
        for &v in &adj[u] {
            if v == start && path.len() >= 3 {
                // canonical orientation: second node smaller than last
                if path[1] < path[path.len() - 1] {
                    cycles.push(path.clone());
                }
            } else if !used[v] && v > start {
                path.push(v);
                dfs(start, v, adj, used, path, cycles);
                path.pop();
            }
        }
        used[u] = false;
    }
}

/// True when every cycle of fully-non-depleted channels has zero fee gap.
/// The signed per-hop difference `rate(e,u) - rate(e,v)` is antisymmetric,
/// so gaps vanish on all cycles of the non-depleted subgraph exactly when
/// the differences integrate to a node potential; checked in linear time via
/// a spanning forest of that subgraph.
pub fn non_depleted_gaps_vanish(
    g: &ChannelGraph,
    lam: &LiquidityState,
    fees: &FeeSchedule,
) -> Result<bool> {
    if !g.is_two_party() {
        return Err(Error::HyperchannelPresent);
    }
    let n = g.node_count();
    let mut adj: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
    for (e, ch) in g.channels().iter().enumerate() {
        if lam.channel(e).contains(&0) {
            continue;
        }
        let (u, v) = (ch.endpoints[0], ch.endpoints[1]);
        let w = fees.rate(e, 0) - fees.rate(e, 1); // gap contribution of u -> v
        adj[u].push((v, w));
        adj[v].push((u, -w));
    }
    let mut potential = vec![None; n];
    for root in 0..n {
        if potential[root].is_some() {
            continue;
        }
        potential[root] = Some(0i64);
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            let pu = potential[u].expect("assigned before push");
            for &(v, w) in &adj[u] {
                match potential[v] {
                    None => {
                        potential[v] = Some(pu + w);
                        stack.push(v);
                    }
                    Some(pv) => {
                        if pv != pu + w {
                            return Ok(false);
                        }
                    }
                }
            }
        }
    }
    Ok(true)
}

/// One trial of the depletion experiment.
#[derive(Debug, Clone)]
pub struct DepletionTrial {
    pub nodes: usize,
    pub channels: usize,
    pub circuit_rank: usize,
    pub depleted_channels: usize,
    pub p_network: i64,
}

/// Ensemble parameters: connected `G(n, m)` graphs with `m` drawn uniformly
/// per trial, uniform capacities, generic fees.
#[derive(Debug, Clone, Copy)]
pub struct DepletionEnsemble {
    pub nodes: usize,
    pub min_channels: usize,
    pub max_channels: usize,
    pub cap_range: (i64, i64),
}

/// Runs `trials` independent draws: sample a connected graph and generic
/// fees, take the wealth of the half-split state, maximize the fee potential
/// over its fiber, and record depletion against the circuit rank.
pub fn depletion_experiment(
    ensemble: &DepletionEnsemble,
    trials: u64,
    seed: u64,
) -> Result<Vec<DepletionTrial>> {
    if ensemble.min_channels > ensemble.max_channels {
        return Err(Error::InvalidParameter("empty channel range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trials as usize);
    for _ in 0..trials {
        let m = rng.random_range(ensemble.min_channels..=ensemble.max_channels);
        let g =
            crate::ensemble::random_connected_graph(ensemble.nodes, m, ensemble.cap_range, &mut rng)?;
        let fees = FeeSchedule::generic(&g, &mut rng);
        let lam0 = LiquidityState::half_split(&g);
        let (_, report) = maximize_potential(&g, &lam0, &fees)?;
        out.push(DepletionTrial {
            nodes: ensemble.nodes,
            channels: m,
            circuit_rank: report.circuit_rank,
            depleted_channels: report.depleted_channels,
            p_network: report.p_network,
        });
    }
    Ok(out)
}

/// Pearson correlation between depleted-channel counts and circuit ranks.
pub fn depletion_correlation(trials: &[DepletionTrial]) -> Option<f64> {
    let xs: Vec<f64> = trials.iter().map(|t| t.circuit_rank as f64).collect();
    let ys: Vec<f64> = trials.iter().map(|t| t.depleted_channels as f64).collect();
    pearson(&xs, &ys)
}
