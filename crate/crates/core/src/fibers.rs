//! The fiber structure over wealth: liquidity states projecting to the same
//! wealth vector differ exactly by strict circulations on the liquidity
//! network. Rebalancing moves within a fiber; nothing else does.

use crate::error::{Error, Result};
use crate::feasibility::for_each_state;
use crate::network::{wealth_of, ChannelGraph, LiquidityState, WealthVector};

/// A strict circulation on the liquidity network of a two-party graph,
/// stored as one signed net flow per channel: positive means flow from the
/// channel's first endpoint to its second. One-sidedness (strictness) is
/// structural in this encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circulation {
    per_channel: Vec<i64>,
}

impl Circulation {
    /// Validates conservation at every node and capacity against `lam`:
    /// a positive flow consumes the first endpoint's liquidity.
    pub fn new(g: &ChannelGraph, lam: &LiquidityState, per_channel: Vec<i64>) -> Result<Self> {
        if !g.is_two_party() {
            return Err(Error::HyperchannelPresent);
        }
        if per_channel.len() != g.channel_count() {
            return Err(Error::InvalidCirculation(format!(
                "expected {} entries, got {}",
                g.channel_count(),
                per_channel.len()
            )));
        }
        let mut balance = vec![0i64; g.node_count()];
        for ((ch, &z), e) in g.channels().iter().zip(&per_channel).zip(0..) {
            let side = lam.channel(e);
            if z > side[0] {
                return Err(Error::InvalidCirculation(format!(
                    "flow {z} exceeds liquidity {} on channel {}",
                    side[0], ch.id
                )));
            }
            if -z > side[1] {
                return Err(Error::InvalidCirculation(format!(
                    "flow {} exceeds liquidity {} on channel {}",
                    -z, side[1], ch.id
                )));
            }
            balance[ch.endpoints[0]] -= z;
            balance[ch.endpoints[1]] += z;
        }
        if let Some(v) = balance.iter().position(|&b| b != 0) {
            return Err(Error::InvalidCirculation(format!(
                "flow not conserved at node {}",
                g.node_name(v)
            )));
        }
        Ok(Circulation { per_channel })
    }

    pub fn zero(g: &ChannelGraph) -> Self {
        Circulation {
            per_channel: vec![0; g.channel_count()],
        }
    }

    pub fn values(&self) -> &[i64] {
        &self.per_channel
    }

    pub fn is_zero(&self) -> bool {
        self.per_channel.iter().all(|&z| z == 0)
    }

    /// Net flow from the first endpoint to the second on channel `e`.
    pub fn net(&self, e: usize) -> i64 {
        self.per_channel[e]
    }
}

/// Applies a circulation: `lambda'(e,u) = lambda(e,u) - z_e` on the first
/// endpoint, mirrored on the second. The result stays in the state polytope
/// and projects to the same wealth vector; both are checked.
pub fn apply_circulation(
    g: &ChannelGraph,
    lam: &LiquidityState,
    f: &Circulation,
) -> Result<LiquidityState> {
    // re-validate against this state (capacity constraints depend on lam)
    let f = Circulation::new(g, lam, f.per_channel.clone())?;
    let primary: Vec<i64> = lam
        .primary()
        .iter()
        .zip(f.values())
        .map(|(&x, &z)| x - z)
        .collect();
    let next = LiquidityState::from_primary(g, &primary)?;
    debug_assert_eq!(
        wealth_of(g, lam).values(),
        wealth_of(g, &next).values(),
        "circulations preserve wealth"
    );
    Ok(next)
}

/// The circulation carrying `from` to `to` within one fiber.
pub fn circulation_between(
    g: &ChannelGraph,
    from: &LiquidityState,
    to: &LiquidityState,
) -> Result<Circulation> {
    let per_channel: Vec<i64> = from
        .primary()
        .iter()
        .zip(to.primary())
        .map(|(&a, b)| a - b)
        .collect();
    Circulation::new(g, from, per_channel)
}

/// All liquidity states projecting to `omega`, in lexicographic order of the
/// hyperbox coordinates. Empty when `omega` is infeasible.
pub fn fiber_enumerate(
    g: &ChannelGraph,
    omega: &WealthVector,
    bound: u128,
) -> Result<Vec<LiquidityState>> {
    let vol = g.state_volume();
    if vol > bound {
        return Err(Error::StateSpaceTooLarge { vol, bound });
    }
    let mut fiber = Vec::new();
    for_each_state(g, &mut |lam| {
        if wealth_of(g, lam).values() == omega.values() {
            fiber.push(lam.clone());
        }
        true
    });
    Ok(fiber)
}

/// All strict circulations on the liquidity network of `(g, lam)`, by direct
/// scan over per-channel net flows with conservation checks. Independent of
/// the fiber enumeration path.
pub fn strict_circulations_enumerate(
    g: &ChannelGraph,
    lam: &LiquidityState,
    bound: u128,
) -> Result<Vec<Circulation>> {
    if !g.is_two_party() {
        return Err(Error::HyperchannelPresent);
    }
    let vol = g.state_volume();
    if vol > bound {
        return Err(Error::StateSpaceTooLarge { vol, bound });
    }
    let m = g.channel_count();
    let ranges: Vec<(i64, i64)> = (0..m)
        .map(|e| {
            let side = lam.channel(e);
            (-side[1], side[0])
        })
        .collect();
    let mut out = Vec::new();
    let mut current = vec![0i64; m];
    scan(g, &ranges, 0, &mut current, &mut out);
    return Ok(out);

    fn scan(
        g: &ChannelGraph,
        ranges: &[(i64, i64)],
        e: usize,
        current: &mut Vec<i64>,
        out: &mut Vec<Circulation>,
    ) {
        if e == ranges.len() {
            let mut balance = vec![0i64; g.node_count()];
            for (ch, &z) in g.channels().iter().zip(current.iter()) {
                balance[ch.endpoints[0]] -= z;
                balance[ch.endpoints[1]] += z;
            }
            if balance.iter().all(|&b| b == 0) {
                out.push(Circulation {
                    per_channel: current.clone(),
                });
            }
            return;
        }
        for z in ranges[e].0..=ranges[e].1 {
            current[e] = z;
            scan(g, ranges, e + 1, current, out);
        }
        current[e] = 0;
    }
}

/// `m - n + #components` for two-party graphs: the number of independent
/// cycles, and the dimension of every nonempty fiber's ambient solution
/// space.
pub fn circuit_rank(g: &ChannelGraph) -> Result<usize> {
    if !g.is_two_party() {
        return Err(Error::HyperchannelPresent);
    }
    Ok(g.channel_count() + g.component_count() - g.node_count())
}
