//! Deciding whether a wealth vector is realizable by some liquidity state,
//! and whether payments keep it realizable.
//!
//! The decision runs as a max-flow problem on a bipartite expansion: a source
//! feeds each channel its capacity, channels distribute to their member
//! nodes, and each node drains its target wealth. The construction is
//! unchanged for k-party hyperchannels. Infeasibility is certified by a node
//! set whose cut interval is violated.

use crate::error::{Error, Result};
use crate::flow::{self, FlowNetwork};
use crate::network::{ChannelGraph, LiquidityState, WealthVector};

/// Verdict of a membership test, with a realizing state or a violated cut.
#[derive(Debug, Clone)]
pub struct FeasibilityResult {
    pub feasible: bool,
    /// A liquidity state projecting to the queried wealth vector.
    pub witness: Option<LiquidityState>,
    /// Node set `S` with `omega(S)` outside its cut interval.
    pub certificate_cut: Option<Vec<usize>>,
}

/// Default cap on exhaustive state enumeration.
pub const DEFAULT_ENUMERATION_BOUND: u128 = 10_000_000;

/// Tests `omega` for realizability on `g`.
pub fn is_feasible(g: &ChannelGraph, omega: &WealthVector) -> Result<FeasibilityResult> {
    if omega.len() != g.node_count() {
        return Err(Error::InvalidParameter(format!(
            "wealth vector has {} entries for {} nodes",
            omega.len(),
            g.node_count()
        )));
    }
    if omega.total() != g.total_capacity() {
        return Err(Error::WealthTotalMismatch {
            expected: g.total_capacity(),
            got: omega.total(),
        });
    }
    let n = g.node_count();
    let m = g.channel_count();
    let total = g.total_capacity();
    // nodes: 0..n graph nodes, n..n+m channel nodes, then source and sink
    let mut net = FlowNetwork::new(n + m + 2);
    let source = n + m;
    let sink = n + m + 1;
    let unbounded = total + 1;
    let mut member_arcs = Vec::new();
    for (e, ch) in g.channels().iter().enumerate() {
        net.add_arc(source, n + e, ch.capacity, 0);
        for &v in &ch.endpoints {
            member_arcs.push(net.add_arc(n + e, v, unbounded, 0));
        }
    }
    for v in 0..n {
        net.add_arc(v, sink, omega.get(v), 0);
    }
    let res = flow::max_flow(&net, source, sink)?;
    if res.value == total {
        let mut per_channel = Vec::with_capacity(m);
        let mut it = member_arcs.iter();
        for ch in g.channels() {
            let vals: Vec<i64> = it
                .by_ref()
                .take(ch.endpoints.len())
                .map(|&idx| res.flow.per_arc[idx])
                .collect();
            per_channel.push(vals);
        }
        let witness = LiquidityState::new(g, per_channel)?;
        Ok(FeasibilityResult {
            feasible: true,
            witness: Some(witness),
            certificate_cut: None,
        })
    } else {
        // Source-reachable graph nodes S satisfy omega(S) < lo(S): the coins
        // of channels internal to S cannot leave it.
        let cut: Vec<usize> = res.min_cut.iter().copied().filter(|&u| u < n).collect();
        Ok(FeasibilityResult {
            feasible: false,
            witness: None,
            certificate_cut: Some(cut),
        })
    }
}

/// Exhaustive oracle: scans every liquidity state and compares projections.
pub fn is_feasible_bruteforce(
    g: &ChannelGraph,
    omega: &WealthVector,
    bound: u128,
) -> Result<bool> {
    if omega.total() != g.total_capacity() {
        return Err(Error::WealthTotalMismatch {
            expected: g.total_capacity(),
            got: omega.total(),
        });
    }
    let vol = g.state_volume();
    if vol > bound {
        return Err(Error::StateSpaceTooLarge { vol, bound });
    }
    let mut found = false;
    for_each_state(g, &mut |lam| {
        if crate::network::wealth_of(g, lam).values() == omega.values() {
            found = true;
            false
        } else {
            true
        }
    });
    Ok(found)
}

/// Visits every liquidity state of `g` in lexicographic order of the
/// per-channel composition coordinates. The callback returns `false` to
/// stop. Enumeration is in place; memory stays linear in the channel count.
pub fn for_each_state(g: &ChannelGraph, visit: &mut dyn FnMut(&LiquidityState) -> bool) {
    let m = g.channel_count();
    // lexicographically smallest composition per channel: everything on the
    // last endpoint
    let mut per_channel: Vec<Vec<i64>> = g
        .channels()
        .iter()
        .map(|ch| {
            let mut comp = vec![0i64; ch.endpoints.len()];
            *comp.last_mut().expect("two endpoints minimum") = ch.capacity;
            comp
        })
        .collect();
    loop {
        let lam = LiquidityState::new(g, per_channel.clone()).expect("composition state valid");
        if !visit(&lam) {
            return;
        }
        // odometer over channels, least significant last
        let mut e = m;
        loop {
            if e == 0 {
                return;
            }
            e -= 1;
            if next_composition(&mut per_channel[e]) {
                break;
            }
            let cap = g.channels()[e].capacity;
            per_channel[e].fill(0);
            *per_channel[e].last_mut().expect("nonempty") = cap;
            if e == 0 {
                return;
            }
        }
    }
}

/// Advances a composition to its lexicographic successor in place; `false`
/// when it was already the last one (everything on the first part).
fn next_composition(comp: &mut [i64]) -> bool {
    let k = comp.len();
    // rightmost position that still has mass to its right
    let mut tail: i64 = 0;
    for j in (0..k - 1).rev() {
        tail += comp[j + 1];
        if tail > 0 {
            comp[j] += 1;
            for c in comp[j + 1..k - 1].iter_mut() {
                *c = 0;
            }
            comp[k - 1] = tail - 1;
            return true;
        }
    }
    false
}

/// Feasibility of a payment: shifts the wealth vector and re-tests
/// membership. Depends only on topology and wealth, not on the witness state.
pub fn payment_feasible(
    g: &ChannelGraph,
    omega: &WealthVector,
    payer: usize,
    payee: usize,
    amount: i64,
) -> Result<FeasibilityResult> {
    if amount < 0 {
        return Err(Error::NegativeAmount(amount));
    }
    if payer >= g.node_count() {
        return Err(Error::NodeOutOfRange(payer));
    }
    if payee >= g.node_count() {
        return Err(Error::NodeOutOfRange(payee));
    }
    if omega.get(payer) < amount {
        return Err(Error::InsufficientPayerBalance {
            payer: g.node_name(payer).to_string(),
            balance: omega.get(payer),
            amount,
        });
    }
    let shifted = omega.shifted(payer, payee, amount);
    is_feasible(g, &shifted)
}

/// The admissible interval for the total wealth of node set `s`:
/// `[lo, lo + width]` where `lo` sums internal channel capacities and the
/// width is the crossing cut capacity. A straddling hyperchannel contributes
/// its full capacity to the width.
pub fn cut_interval(g: &ChannelGraph, s: &[usize]) -> Result<(i64, i64)> {
    let n = g.node_count();
    let mut inside = vec![false; n];
    for &v in s {
        if v >= n {
            return Err(Error::NodeOutOfRange(v));
        }
        inside[v] = true;
    }
    let size = inside.iter().filter(|&&b| b).count();
    if size == 0 || size == n {
        return Err(Error::ImproperCut);
    }
    let mut lo = 0i64;
    let mut width = 0i64;
    for ch in g.channels() {
        let ins = ch.endpoints.iter().filter(|&&v| inside[v]).count();
        if ins == ch.endpoints.len() {
            lo += ch.capacity;
        } else if ins > 0 {
            width += ch.capacity;
        }
    }
    Ok((lo, lo + width))
}

/// Total wealth of a node set.
pub fn set_wealth(omega: &WealthVector, s: &[usize]) -> i64 {
    s.iter().map(|&v| omega.get(v)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::wealth_of;

    fn triangle() -> ChannelGraph {
        ChannelGraph::from_pairs(&["x", "y", "z"], &[("x", "y", 3), ("y", "z", 7), ("x", "z", 11)])
            .unwrap()
    }

    #[test]
    fn worked_example_feasible_with_fiber_witness() {
        let g = triangle();
        let omega = WealthVector::new(&g, vec![5, 6, 10]).unwrap();
        let res = is_feasible(&g, &omega).unwrap();
        assert!(res.feasible);
        let witness = res.witness.unwrap();
        assert_eq!(wealth_of(&g, &witness).values(), omega.values());
        // witness lies on the 1-parameter family (0,3,5) + t(1,1,-1)
        let p = witness.primary();
        let t = p[0];
        assert!((0..=3).contains(&t));
        assert_eq!(p, vec![t, 3 + t, 5 - t]);
    }

    #[test]
    fn worked_example_infeasible_target() {
        let g = triangle();
        let omega = WealthVector::new(&g, vec![15, 4, 2]).unwrap();
        let res = is_feasible(&g, &omega).unwrap();
        assert!(!res.feasible);
        let cut = res.certificate_cut.unwrap();
        assert!(!cut.is_empty() && cut.len() < 3);
        let (lo, hi) = cut_interval(&g, &cut).unwrap();
        let w = set_wealth(&omega, &cut);
        assert!(w < lo || w > hi, "certificate must violate its interval");
    }

    #[test]
    fn path_network_alice_cut() {
        let g = ChannelGraph::from_pairs(
            &["alice", "bob", "carol"],
            &[("alice", "bob", 10), ("bob", "carol", 11)],
        )
        .unwrap();
        let omega = WealthVector::new(&g, vec![21, 0, 0]).unwrap();
        let res = is_feasible(&g, &omega).unwrap();
        assert!(!res.feasible, "alice's cut width is 10");
        assert_eq!(cut_interval(&g, &[0]).unwrap(), (0, 10));
    }

    #[test]
    fn bruteforce_agrees_on_triangle() {
        let g = triangle();
        for (vec, expect) in [
            (vec![5, 6, 10], true),
            (vec![15, 4, 2], false),
            (vec![5, 4, 12], true),
            (vec![21, 0, 0], false),
            (vec![0, 10, 11], true),
        ] {
            let omega = WealthVector::new(&g, vec.clone()).unwrap();
            assert_eq!(
                is_feasible_bruteforce(&g, &omega, DEFAULT_ENUMERATION_BOUND).unwrap(),
                expect,
                "omega = {vec:?}"
            );
            assert_eq!(is_feasible(&g, &omega).unwrap().feasible, expect);
        }
    }

    #[test]
    fn bruteforce_bound_enforced() {
        let g = triangle();
        let omega = WealthVector::new(&g, vec![5, 6, 10]).unwrap();
        let err = is_feasible_bruteforce(&g, &omega, 10).unwrap_err();
        assert!(matches!(err, Error::StateSpaceTooLarge { .. }));
    }

    #[test]
    fn single_channel_all_splits_feasible() {
        let c = 9;
        let g = ChannelGraph::from_pairs(&["a", "b"], &[("a", "b", c)]).unwrap();
        for k in 0..=c {
            let omega = WealthVector::new(&g, vec![k, c - k]).unwrap();
            assert!(is_feasible(&g, &omega).unwrap().feasible);
            assert!(is_feasible_bruteforce(&g, &omega, 1000).unwrap());
        }
        assert!(WealthVector::new(&g, vec![c + 1, -1]).is_err());
    }

    #[test]
    fn payment_examples() {
        let g = triangle();
        let omega = WealthVector::new(&g, vec![5, 6, 10]).unwrap();
        // y pays z two coins
        let res = payment_feasible(&g, &omega, 1, 2, 2).unwrap();
        assert!(res.feasible);
        let shifted = omega.shifted(1, 2, 2);
        assert_eq!(shifted.values(), &[5, 4, 12]);
        // afterwards z cannot pay x ten coins
        let res = payment_feasible(&g, &shifted, 2, 0, 10).unwrap();
        assert!(!res.feasible);
        // zero amount is the identity payment
        assert!(payment_feasible(&g, &omega, 0, 2, 0).unwrap().feasible);
        // balance check
        let err = payment_feasible(&g, &omega, 1, 2, 7).unwrap_err();
        assert!(matches!(err, Error::InsufficientPayerBalance { .. }));
    }

    #[test]
    fn cut_interval_examples() {
        let g = triangle();
        // single node: lo = 0, hi = total incident capacity
        assert_eq!(cut_interval(&g, &[0]).unwrap(), (0, 14));
        assert_eq!(cut_interval(&g, &[1]).unwrap(), (0, 10));
        // S = {x, y}: internal channel (x,y), both others cross
        assert_eq!(cut_interval(&g, &[0, 1]).unwrap(), (3, 21));
        // complement mirrors the width
        let (lo1, hi1) = cut_interval(&g, &[2]).unwrap();
        assert_eq!(hi1 - lo1, 21 - 3);
        assert!(cut_interval(&g, &[]).is_err());
        assert!(cut_interval(&g, &[0, 1, 2]).is_err());
    }

    #[test]
    fn hyperchannel_straddle_counts_fully() {
        let spec = crate::network::NetworkSpec {
            nodes: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            channels: vec![
                crate::network::ChannelSpec {
                    ends: vec!["a".into(), "b".into(), "c".into()],
                    cap: 6,
                },
                crate::network::ChannelSpec {
                    ends: vec!["c".into(), "d".into()],
                    cap: 4,
                },
            ],
        };
        let g = ChannelGraph::build(&spec).unwrap();
        // {a}: hyperedge straddles, contributes all 6
        assert_eq!(cut_interval(&g, &[0]).unwrap(), (0, 6));
        // {a,b,c}: hyperedge internal, pair channel crosses
        assert_eq!(cut_interval(&g, &[0, 1, 2]).unwrap(), (6, 10));
        // hyper feasibility: all coins on a single member
        let omega = WealthVector::new(&g, vec![6, 0, 4, 0]).unwrap();
        assert!(is_feasible(&g, &omega).unwrap().feasible);
        let omega = WealthVector::new(&g, vec![6, 0, 0, 4]).unwrap();
        assert!(is_feasible(&g, &omega).unwrap().feasible);
        let omega = WealthVector::new(&g, vec![0, 0, 6, 4]).unwrap();
        assert!(is_feasible(&g, &omega).unwrap().feasible);
        // but d can never hold more than 4
        let omega = WealthVector::new(&g, vec![5, 0, 0, 5]).unwrap();
        assert!(!is_feasible(&g, &omega).unwrap().feasible);
    }

    #[test]
    fn randomized_agreement_with_bruteforce() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let mut cases = 0;
        while cases < 500 {
            let n = rng.random_range(2..=5usize);
            let mut pairs = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.random_range(0..10) < 6 {
                        pairs.push((u, v, rng.random_range(1..=6i64)));
                    }
                }
            }
            if pairs.is_empty() {
                continue;
            }
            let names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
            let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
            let pair_refs: Vec<(&str, &str, i64)> = pairs
                .iter()
                .map(|&(u, v, c)| (name_refs[u], name_refs[v], c))
                .collect();
            let g = ChannelGraph::from_pairs(&name_refs, &pair_refs).unwrap();
            if g.state_volume() > 100_000 {
                continue;
            }
            let omega = crate::sampling::sample_wealth(g.total_capacity(), n, &mut rng);
            let fast = is_feasible(&g, &omega).unwrap();
            let slow = is_feasible_bruteforce(&g, &omega, 100_000).unwrap();
            assert_eq!(fast.feasible, slow, "disagreement on {omega:?}");
            if fast.feasible {
                let w = wealth_of(&g, &fast.witness.unwrap());
                assert_eq!(w.values(), omega.values());
            } else {
                let cut = fast.certificate_cut.unwrap();
                let (lo, hi) = cut_interval(&g, &cut).unwrap();
                let w = set_wealth(&omega, &cut);
                assert!(w < lo || w > hi);
            }
            cases += 1;
        }
    }

    #[test]
    fn feasible_wealth_respects_all_cut_intervals() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let n = rng.random_range(3..=6usize);
            let mut pairs = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.random_range(0..10) < 5 {
                        pairs.push((u, v, rng.random_range(1..=8i64)));
                    }
                }
            }
            if pairs.is_empty() {
                continue;
            }
            let names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
            let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
            let pair_refs: Vec<(&str, &str, i64)> = pairs
                .iter()
                .map(|&(u, v, c)| (name_refs[u], name_refs[v], c))
                .collect();
            let g = ChannelGraph::from_pairs(&name_refs, &pair_refs).unwrap();
            // project a random state: guaranteed feasible
            let lam = random_state(&g, &mut rng);
            let omega = wealth_of(&g, &lam);
            for mask in 1..((1u32 << n) - 1) {
                let s: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
                let (lo, hi) = cut_interval(&g, &s).unwrap();
                let w = set_wealth(&omega, &s);
                assert!(lo <= w && w <= hi);
            }
        }
    }

    fn random_state(g: &ChannelGraph, rng: &mut impl rand::Rng) -> LiquidityState {
        let primary: Vec<i64> = g
            .channels()
            .iter()
            .map(|ch| rng.random_range(0..=ch.capacity))
            .collect();
        LiquidityState::from_primary(g, &primary).unwrap()
    }
}
