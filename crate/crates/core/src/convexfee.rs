//! Tiered (discretely convex) fee schedules and their flow-control effect.
//!
//! Scarcity pricing makes the next-unit price of a channel side nonincreasing
//! in the sender's local liquidity. Along any cycle the one-unit gain of the
//! discrete potential is then nonincreasing in the push amount, so cycle
//! dynamics either stall at an interior sign change or run into a boundary
//! (depletion). Linear schedules have constant gain: generically boundary.

use crate::error::{Error, Result};
use crate::network::{ChannelGraph, LiquidityState};
use crate::stats::median;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Per-channel-side price tables: `price[e][j][t]` is the fee for
/// `channels()[e].endpoints[j]` to forward one unit outbound while holding
/// local liquidity `t`. Scarcity pricing: nonincreasing in `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TierSchedule {
    tables: Vec<Vec<Vec<i64>>>,
}

impl TierSchedule {
    /// Validates shape, nonnegativity and scarcity monotonicity.
    pub fn new(g: &ChannelGraph, tables: Vec<Vec<Vec<i64>>>) -> Result<Self> {
        if tables.len() != g.channel_count() {
            return Err(Error::InvalidSchedule(format!(
                "expected {} channels, got {}",
                g.channel_count(),
                tables.len()
            )));
        }
        for (e, (ch, sides)) in g.channels().iter().zip(&tables).enumerate() {
            if sides.len() != ch.endpoints.len() {
                return Err(Error::InvalidSchedule(format!(
                    "channel {} needs {} price tables",
                    ch.id,
                    ch.endpoints.len()
                )));
            }
            for table in sides {
                if table.len() != ch.capacity as usize + 1 {
                    return Err(Error::InvalidSchedule(format!(
                        "channel {e} tables must cover 0..={}",
                        ch.capacity
                    )));
                }
                if table.iter().any(|&p| p < 0) {
                    return Err(Error::InvalidSchedule("prices must be nonnegative".into()));
                }
                if table.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::InvalidSchedule(
                        "scarcity pricing requires prices nonincreasing in local liquidity".into(),
                    ));
                }
            }
        }
        Ok(TierSchedule { tables })
    }

    /// Constant next-unit price `ppm(e, j)` regardless of liquidity.
    pub fn linear(g: &ChannelGraph, ppm: &[Vec<i64>]) -> Result<Self> {
        let tables = g
            .channels()
            .iter()
            .zip(ppm)
            .map(|(ch, rates)| {
                rates
                    .iter()
                    .map(|&r| vec![r; ch.capacity as usize + 1])
                    .collect()
            })
            .collect();
        Self::new(g, tables)
    }

    /// Quadratic total fee `F(x) = floor(ppm * x^2 / c)` in the routed amount
    /// `x` (the remote side's accumulation); the next-unit price from local
    /// liquidity `t` is `F(c - t + 1) - F(c - t)`. Integer rounding keeps the
    /// table monotone only when `2 * ppm > c - 2`; smaller rates are
    /// rejected.
    pub fn quadratic(g: &ChannelGraph, ppm: &[Vec<i64>]) -> Result<Self> {
        let tables: Vec<Vec<Vec<i64>>> = g
            .channels()
            .iter()
            .zip(ppm)
            .map(|(ch, rates)| {
                let c = ch.capacity;
                rates
                    .iter()
                    .map(|&r| {
                        let f = |x: i64| r * x * x / c;
                        (0..=c).map(|t| f(c - t + 1) - f(c - t)).collect()
                    })
                    .collect()
            })
            .collect();
        Self::new(g, tables)
    }

    /// Same rate book for both constructors: one ppm per channel side.
    pub fn uniform_ppm(g: &ChannelGraph, ppm: i64) -> Vec<Vec<i64>> {
        g.channels()
            .iter()
            .map(|ch| vec![ppm; ch.endpoints.len()])
            .collect()
    }

    /// Next-unit price for side `(e, j)` at local liquidity `t`.
    pub fn price(&self, e: usize, slot: usize, t: i64) -> i64 {
        self.tables[e][slot][t as usize]
    }
}

/// Discrete potential: every unit held on a priced side contributes the
/// price it was (notionally) acquired at.
pub fn potential_phi(g: &ChannelGraph, lam: &LiquidityState, tiers: &TierSchedule) -> i64 {
    let mut phi = 0i64;
    for (e, ch) in g.channels().iter().enumerate() {
        for j in 0..ch.endpoints.len() {
            for t in 1..=lam.channel(e)[j] {
                phi += tiers.price(e, j, t);
            }
        }
    }
    phi
}

/// A simple oriented cycle over existing two-party channels with its feasible
/// push interval: pushing `x` moves `x` units from each `v_i` to `v_{i+1}`.
#[derive(Debug, Clone)]
pub struct CycleState {
    pub nodes: Vec<usize>,
    /// Per hop: `(channel, sender slot, receiver slot)`.
    pub hops: Vec<(usize, usize, usize)>,
    pub x_min: i64,
    pub x_max: i64,
}

impl CycleState {
    pub fn new(g: &ChannelGraph, lam: &LiquidityState, nodes: &[usize]) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::InvalidCycle("need at least three nodes".into()));
        }
        let mut hops = Vec::with_capacity(nodes.len());
        let mut x_max = i64::MAX;
        let mut x_min = i64::MIN;
        for i in 0..nodes.len() {
            let (a, b) = (nodes[i], nodes[(i + 1) % nodes.len()]);
            let e = g
                .channel_between(a, b)
                .ok_or_else(|| Error::InvalidCycle(format!("no channel between {a} and {b}")))?;
            let sa = g.channels()[e].endpoints.iter().position(|&u| u == a).expect("member");
            let sb = 1 - sa;
            x_max = x_max.min(lam.channel(e)[sa]);
            x_min = x_min.max(-lam.channel(e)[sb]);
            hops.push((e, sa, sb));
        }
        Ok(CycleState {
            nodes: nodes.to_vec(),
            hops,
            x_min,
            x_max,
        })
    }

    /// The state after pushing `x` units in cycle direction.
    pub fn pushed(&self, g: &ChannelGraph, lam: &LiquidityState, x: i64) -> Result<LiquidityState> {
        if x < self.x_min || x > self.x_max {
            return Err(Error::InvalidCycle(format!(
                "push {x} outside feasible interval [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        let mut per_channel: Vec<Vec<i64>> =
            (0..g.channel_count()).map(|e| lam.channel(e).to_vec()).collect();
        for &(e, sa, sb) in &self.hops {
            per_channel[e][sa] -= x;
            per_channel[e][sb] += x;
        }
        LiquidityState::new(g, per_channel)
    }
}

/// One-unit gain of the potential in cycle direction at push level `x`:
/// next-unit price charged into each receiver minus the price refunded at
/// each sender. Equals `phi(pushed(x+1)) - phi(pushed(x))` exactly.
pub fn delta_c(
    _g: &ChannelGraph,
    lam: &LiquidityState,
    tiers: &TierSchedule,
    cycle: &CycleState,
    x: i64,
) -> Result<i64> {
    if x < cycle.x_min || x + 1 > cycle.x_max {
        return Err(Error::InvalidCycle(format!(
            "gain undefined: x and x+1 must lie in [{}, {}]",
            cycle.x_min, cycle.x_max
        )));
    }
    let mut gain = 0i64;
    for &(e, sa, sb) in &cycle.hops {
        let sender = lam.channel(e)[sa] - x;
        let receiver = lam.channel(e)[sb] + x;
        gain += tiers.price(e, sb, receiver + 1) - tiers.price(e, sa, sender);
    }
    Ok(gain)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EquilibriumKind {
    Interior,
    BoundaryMin,
    BoundaryMax,
}

/// Where cycle pushes stall. With nonincreasing tiers the gain is
/// nonincreasing in `x`, so the potential along the cycle is concave: a sign
/// change `gain(x*) >= 0 >= gain(x*+1)` brackets the interior attractor;
/// otherwise the dynamics run to the boundary on the gain's side. A
/// identically-zero gain makes every push level an equilibrium.
pub fn cycle_equilibrium(
    g: &ChannelGraph,
    lam: &LiquidityState,
    tiers: &TierSchedule,
    cycle: &CycleState,
) -> Result<(EquilibriumKind, Vec<i64>)> {
    if cycle.x_min == cycle.x_max {
        return Ok((EquilibriumKind::Interior, vec![cycle.x_min]));
    }
    let gains: Vec<i64> = (cycle.x_min..cycle.x_max)
        .map(|x| delta_c(g, lam, tiers, cycle, x))
        .collect::<Result<_>>()?;
    if gains.iter().all(|&d| d == 0) {
        return Ok((
            EquilibriumKind::Interior,
            (cycle.x_min..=cycle.x_max).collect(),
        ));
    }
    if gains.iter().all(|&d| d > 0) {
        return Ok((EquilibriumKind::BoundaryMax, vec![cycle.x_max]));
    }
    if gains.iter().all(|&d| d < 0) {
        return Ok((EquilibriumKind::BoundaryMin, vec![cycle.x_min]));
    }
    // first bracket gain(x) >= 0 >= gain(x+1)
    for (i, w) in gains.windows(2).enumerate() {
        if w[0] >= 0 && w[1] <= 0 {
            let x = cycle.x_min + i as i64;
            return Ok((EquilibriumKind::Interior, vec![x, x + 1]));
        }
    }
    // gain crossed zero between a single pair: gain(x) >= 0 with the next
    // level out of range, or mixed signs without a bracketing pair can only
    // happen for non-monotone gains, which validated schedules exclude
    if gains[0] <= 0 {
        return Ok((EquilibriumKind::BoundaryMin, vec![cycle.x_min]));
    }
    Ok((EquilibriumKind::BoundaryMax, vec![cycle.x_max]))
}

/// Demand model for the routing simulation.
#[derive(Debug, Clone)]
pub enum Demand {
    /// Uniform over ordered node pairs: a circular economy in expectation.
    UniformPairs,
    /// Uniform over an explicit list of ordered pairs.
    Pairs(Vec<(usize, usize)>),
    /// Deterministic rotation through a list of ordered pairs: a circular
    /// economy exactly, with zero net wealth movement per round.
    RoundRobin(Vec<(usize, usize)>),
    /// Every pair exactly once per round, in fresh random order: still a
    /// circular economy per round, but without lockstep between demand and
    /// state.
    ShuffledRounds(Vec<(usize, usize)>),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Senders see live next-unit prices (and thereby liquidity); otherwise
    /// they price paths on the static schedule at half capacity.
    pub disclose_liquidity: bool,
    /// Failed attempts exclude the failing hop and retry until no route is
    /// left by the sender's information.
    pub retry_on_failure: bool,
}

/// Per-step record and aggregates of one simulation run.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub caps: Vec<i64>,
    /// Primary-side liquidity per channel after each step.
    pub liquidity: Vec<Vec<i64>>,
    /// Successful units forwarded per channel (either direction).
    pub flow_units: Vec<u64>,
    /// Fees earned per node.
    pub node_fees: Vec<i64>,
    /// Per-step: 1 on success plus the fee paid.
    pub outcomes: Vec<(bool, i64)>,
    pub successes: u64,
    pub failures: u64,
}

impl TimeSeries {
    pub fn network_fees(&self) -> i64 {
        self.node_fees.iter().sum()
    }
}

/// Runs `steps` unit payments under selfish source routing: each sender picks
/// the cheapest path by disclosed prices; the attempt succeeds iff every hop
/// has a unit of local liquidity. Failed payments leave the state unchanged
/// and are recorded, not raised.
pub fn routing_simulation(
    g: &ChannelGraph,
    tiers: &TierSchedule,
    demand: &Demand,
    steps: u64,
    seed: u64,
    config: &SimConfig,
) -> Result<TimeSeries> {
    if !g.is_two_party() {
        return Err(Error::HyperchannelPresent);
    }
    if g.node_count() < 2 {
        return Err(Error::InvalidParameter("need two nodes to route".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut round: Vec<(usize, usize)> = Vec::new();
    let mut lam: Vec<Vec<i64>> = (0..g.channel_count())
        .map(|e| LiquidityState::half_split(g).channel(e).to_vec())
        .collect();
    let mut series = TimeSeries {
        caps: g.channels().iter().map(|c| c.capacity).collect(),
        liquidity: Vec::with_capacity(steps as usize),
        flow_units: vec![0; g.channel_count()],
        node_fees: vec![0; g.node_count()],
        outcomes: Vec::with_capacity(steps as usize),
        successes: 0,
        failures: 0,
    };
    for step in 0..steps {
        let (src, dst) = match demand {
            Demand::UniformPairs => {
                let s = rng.random_range(0..g.node_count());
                let mut t = rng.random_range(0..g.node_count() - 1);
                if t >= s {
                    t += 1;
                }
                (s, t)
            }
            Demand::Pairs(pairs) => pairs[rng.random_range(0..pairs.len())],
            Demand::RoundRobin(pairs) => pairs[(step % pairs.len() as u64) as usize],
            Demand::ShuffledRounds(pairs) => {
                if round.is_empty() {
                    round = pairs.clone();
                    for i in (1..round.len()).rev() {
                        round.swap(i, rng.random_range(0..=i));
                    }
                }
                round.pop().expect("refilled above")
            }
        };
        let mut banned: Vec<(usize, usize)> = Vec::new();
        let mut paid = 0i64;
        let mut success = false;
        while let Some(path) = cheapest_path(g, &lam, tiers, src, dst, config, &banned) {
            // execution reveals the first dry hop
            let mut dry = None;
            for &(e, sa, _) in &path {
                if lam[e][sa] < 1 {
                    dry = Some((e, sa));
                    break;
                }
            }
            match dry {
                Some(hop) => {
                    if !config.retry_on_failure {
                        break;
                    }
                    banned.push(hop);
                }
                None => {
                    for &(e, sa, sb) in &path {
                        let fee = tiers.price(e, sa, lam[e][sa]);
                        let earner = g.channels()[e].endpoints[sa];
                        series.node_fees[earner] += fee;
                        paid += fee;
                        lam[e][sa] -= 1;
                        lam[e][sb] += 1;
                        series.flow_units[e] += 1;
                    }
                    success = true;
                    break;
                }
            }
        }
        if success {
            series.successes += 1;
        } else {
            series.failures += 1;
        }
        series.outcomes.push((success, paid));
        series
            .liquidity
            .push(lam.iter().map(|side| side[0]).collect());
    }
    Ok(series)
}

/// Dijkstra over channel arcs under the sender's price information.
fn cheapest_path(
    g: &ChannelGraph,
    lam: &[Vec<i64>],
    tiers: &TierSchedule,
    src: usize,
    dst: usize,
    config: &SimConfig,
    banned: &[(usize, usize)],
) -> Option<Vec<(usize, usize, usize)>> {
    let n = g.node_count();
    let mut dist = vec![i64::MAX; n];
    let mut prev: Vec<Option<(usize, usize, usize)>> = vec![None; n];
    let mut done = vec![false; n];
    dist[src] = 0;
    for _ in 0..n {
        let mut u = usize::MAX;
        let mut best = i64::MAX;
        for v in 0..n {
            if !done[v] && dist[v] < best {
                best = dist[v];
                u = v;
            }
        }
        if u == usize::MAX {
            break;
        }
        done[u] = true;
        if u == dst {
            break;
        }
        for (e, ch) in g.channels().iter().enumerate() {
            let Some(sa) = ch.endpoints.iter().position(|&w| w == u) else {
                continue;
            };
            let sb = 1 - sa;
            let v = ch.endpoints[sb];
            if done[v] || banned.contains(&(e, sa)) {
                continue;
            }
            let price = if config.disclose_liquidity {
                if lam[e][sa] < 1 {
                    continue; // visibly dry
                }
                tiers.price(e, sa, lam[e][sa])
            } else {
                tiers.price(e, sa, (ch.capacity + 1) / 2)
            };
            if dist[u].saturating_add(price) < dist[v] {
                dist[v] = dist[u] + price;
                prev[v] = Some((e, sa, sb));
            }
        }
    }
    if dist[dst] == i64::MAX {
        return None;
    }
    let mut path = Vec::new();
    let mut v = dst;
    while v != src {
        let (e, sa, sb) = prev[v].expect("reached");
        path.push((e, sa, sb));
        v = g.channels()[e].endpoints[sa];
    }
    path.reverse();
    Some(path)
}

/// Medians, fee totals and band occupancy over the steady-state suffix.
#[derive(Debug, Clone)]
pub struct LiquiditySummary {
    /// Median of `lambda(e, first endpoint) / cap(e)` per channel.
    pub median_relative: Vec<f64>,
    /// First step index of the detected steady state (window comparison of
    /// sliding means), or half the series when never steady.
    pub steady_state_start: usize,
    pub reached_steady_state: bool,
    pub node_fees: Vec<i64>,
    pub network_fees: i64,
    /// Fraction of channels with median relative liquidity in [0.4, 0.6]
    /// and in [0.1, 0.9].
    pub band_narrow: f64,
    pub band_wide: f64,
}

/// Window length for steady-state detection.
pub const STEADY_WINDOW: usize = 500;

pub fn summarize_liquidity(series: &TimeSeries) -> Result<LiquiditySummary> {
    let steps = series.liquidity.len();
    if steps == 0 {
        return Err(Error::EmptySeries);
    }
    let m = series.caps.len();
    let (start, steady) = steady_state_start(series);
    let median_relative: Vec<f64> = (0..m)
        .map(|e| {
            let rel: Vec<f64> = series.liquidity[start..]
                .iter()
                .map(|row| row[e] as f64 / series.caps[e] as f64)
                .collect();
            median(&rel).expect("nonempty suffix")
        })
        .collect();
    let in_band = |lo: f64, hi: f64| {
        median_relative.iter().filter(|&&r| r >= lo && r <= hi).count() as f64 / m as f64
    };
    Ok(LiquiditySummary {
        band_narrow: in_band(0.4, 0.6),
        band_wide: in_band(0.1, 0.9),
        median_relative,
        steady_state_start: start,
        reached_steady_state: steady,
        node_fees: series.node_fees.clone(),
        network_fees: series.network_fees(),
    })
}

/// Earliest step where consecutive sliding-window means differ by less than
/// 1% of capacity on every channel.
fn steady_state_start(series: &TimeSeries) -> (usize, bool) {
    let steps = series.liquidity.len();
    let w = STEADY_WINDOW;
    if steps < 2 * w {
        return (steps / 2, false);
    }
    let m = series.caps.len();
    'outer: for t in (w..steps - w + 1).step_by(w) {
        for e in 0..m {
            let mean = |range: std::ops::Range<usize>| {
                series.liquidity[range.clone()]
                    .iter()
                    .map(|row| row[e] as f64)
                    .sum::<f64>()
                    / range.len() as f64
            };
            let before = mean(t - w..t);
            let after = mean(t..t + w);
            if (after - before).abs() >= 0.01 * series.caps[e] as f64 {
                continue 'outer;
            }
        }
        return (t, true);
    }
    (steps / 2, false)
}

/// The reference three-node single-cycle comparison: identical rate book and
/// circular unit demand under a linear and a quadratic schedule. Directional
/// demand makes the linear regime drain the cycle onto the boundary, while
/// scarcity prices reroute against the drift and hold an interior state.
#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub cap: i64,
    pub ppm: i64,
    pub steps: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            cap: 100,
            ppm: 100,
            steps: 10_000,
        }
    }
}

/// Unit payments around the cycle: `n0 -> n1 -> n2 -> n0`, every pair once
/// per round in shuffled order.
pub fn circular_demand() -> Demand {
    Demand::ShuffledRounds(vec![(0, 1), (1, 2), (2, 0)])
}

/// Runs the benchmark under both schedules with a shared demand seed.
pub fn benchmark_pair(
    config: &BenchmarkConfig,
    seed: u64,
) -> Result<(TimeSeries, TimeSeries, ChannelGraph)> {
    let g = ChannelGraph::from_pairs(
        &["n0", "n1", "n2"],
        &[
            ("n0", "n1", config.cap),
            ("n1", "n2", config.cap),
            ("n0", "n2", config.cap),
        ],
    )?;
    let book = TierSchedule::uniform_ppm(&g, config.ppm);
    let linear = routing_simulation(
        &g,
        &TierSchedule::linear(&g, &book)?,
        &circular_demand(),
        config.steps,
        seed,
        &SimConfig {
            disclose_liquidity: false,
            retry_on_failure: true,
        },
    )?;
    let quadratic = routing_simulation(
        &g,
        &TierSchedule::quadratic(&g, &book)?,
        &circular_demand(),
        config.steps,
        seed,
        &SimConfig {
            disclose_liquidity: true,
            retry_on_failure: true,
        },
    )?;
    Ok((linear, quadratic, g))
}
