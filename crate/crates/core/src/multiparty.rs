//! Cut widths of random k-party channel topologies.
//!
//! A k-party channel is a k-uniform hyperedge that contributes its full
//! capacity to every cut it straddles. Closed forms for the straddle
//! probability are kept in exact rational arithmetic; Monte Carlo sweeps and
//! the coupled k-party/2-party dominance experiment validate them.

use crate::error::{Error, Result};
use crate::flow::{max_flow, FlowNetwork};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `binom(a, b)` as a big integer, zero when `b > a`.
pub fn big_binomial(a: u64, b: u64) -> BigInt {
    if b > a {
        return BigInt::zero();
    }
    let b = b.min(a - b);
    let mut acc = BigInt::one();
    for i in 0..b {
        acc = acc * BigInt::from(a - b + i + 1) / BigInt::from(i + 1);
    }
    acc
}

/// Probability that a uniform random 2-party channel crosses a cut of size
/// `s` in an `n`-node network: `2s(n-s) / (n(n-1))`.
pub fn q2(n: u64, s: u64) -> Result<BigRational> {
    if n < 2 || s == 0 || s >= n {
        return Err(Error::InvalidParameter(format!("q2 needs 1 <= s < n, got n={n} s={s}")));
    }
    Ok(BigRational::new(
        BigInt::from(2 * s * (n - s)),
        BigInt::from(n * (n - 1)),
    ))
}

/// Probability that a uniform random k-subset straddles a cut of size `s`:
/// `1 - [binom(s,k) + binom(n-s,k)] / binom(n,k)`.
pub fn qk(n: u64, k: u64, s: u64) -> Result<BigRational> {
    if n < 2 || s == 0 || s >= n || k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "qk needs 1 <= s < n and 1 <= k <= n, got n={n} k={k} s={s}"
        )));
    }
    let inside = big_binomial(s, k) + big_binomial(n - s, k);
    let all = big_binomial(n, k);
    Ok(BigRational::one() - BigRational::new(inside, all))
}

/// Random k-party topology: `m` channels of uniform capacity `c` over `n`
/// nodes, each drawn as a uniform k-subset.
#[derive(Debug, Clone, Copy)]
pub struct RandomTopologySpec {
    pub n: u64,
    pub m: u64,
    pub k: u64,
    pub c: i64,
}

impl RandomTopologySpec {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.k > self.n {
            return Err(Error::InvalidParameter(format!(
                "need 2 <= k <= n, got k={} n={}",
                self.k, self.n
            )));
        }
        if self.c <= 0 {
            return Err(Error::NonpositiveCapacity(self.c));
        }
        Ok(())
    }
}

/// Expected crossing capacity `m * c * q_k(s)` of a size-`s` cut, exact.
pub fn expected_cut_width(spec: &RandomTopologySpec, s: u64) -> Result<BigRational> {
    spec.validate()?;
    let q = qk(spec.n, spec.k, s)?;
    Ok(q * BigRational::from_integer(BigInt::from(spec.m) * BigInt::from(spec.c)))
}

/// Closed form vs Monte Carlo for one `(k, s)` cell.
#[derive(Debug, Clone)]
pub struct CutWidthReport {
    pub s: u64,
    pub q_closed: f64,
    pub q_mc: f64,
    pub expected_width_closed: f64,
    pub expected_width_mc: f64,
    pub samples: u64,
    /// Set when `binom(n, k) < m` forced duplicate hyperedges in a draw.
    pub duplicates_allowed: bool,
}

/// Draws `m` distinct k-subsets (uniform, without replacement across the
/// channels of one topology) unless fewer than `m` exist.
fn draw_topology(spec: &RandomTopologySpec, rng: &mut impl Rng) -> (Vec<u64>, bool) {
    let n = spec.n as usize;
    let k = spec.k as usize;
    let space = big_binomial(spec.n, spec.k);
    let with_replacement = space < BigInt::from(spec.m);
    let mut masks: Vec<u64> = Vec::with_capacity(spec.m as usize);
    while masks.len() < spec.m as usize {
        let subset = rand::seq::index::sample(rng, n, k);
        let mask = subset.iter().fold(0u64, |acc, i| acc | 1 << i);
        if with_replacement || !masks.contains(&mask) {
            masks.push(mask);
        }
    }
    (masks, with_replacement)
}

/// Estimates the straddle probability of a fixed cut `{0..s-1}` by sampling
/// whole topologies and measuring the straddling fraction.
pub fn mc_cut_width(
    spec: &RandomTopologySpec,
    s: u64,
    samples: u64,
    seed: u64,
) -> Result<CutWidthReport> {
    spec.validate()?;
    if s == 0 || s >= spec.n {
        return Err(Error::InvalidParameter("cut size out of range".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    if spec.n > 63 {
        return Err(Error::InvalidParameter("node masks support n <= 63".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cut_mask: u64 = (1 << s) - 1;
    let full_mask: u64 = (1 << spec.n) - 1;
    let mut straddles = 0u64;
    let mut duplicates = false;
    for _ in 0..samples {
        let (masks, dup) = draw_topology(spec, &mut rng);
        duplicates |= dup;
        for mask in masks {
            if mask & cut_mask != 0 && mask & (full_mask ^ cut_mask) != 0 {
                straddles += 1;
            }
        }
    }
    let q = qk(spec.n, spec.k, s)?;
    let q_closed = q.to_f64().expect("finite");
    let q_mc = straddles as f64 / (samples * spec.m) as f64;
    Ok(CutWidthReport {
        s,
        q_closed,
        q_mc,
        expected_width_closed: q_closed * (spec.m as f64) * (spec.c as f64),
        expected_width_mc: q_mc * (spec.m as f64) * (spec.c as f64),
        samples,
        duplicates_allowed: duplicates,
    })
}

/// One coupled draw: a k-party channel and a 2-party channel nested inside it.
#[derive(Debug, Clone, Copy)]
pub struct CoupledChannel {
    pub party_mask: u64,
    pub pair_mask: u64,
}

/// Samples `m` coupled channels: `P_e` a uniform k-subset, then `E_e` a
/// uniform pair inside `P_e`.
pub fn sample_coupled(spec: &RandomTopologySpec, rng: &mut impl Rng) -> Vec<CoupledChannel> {
    let n = spec.n as usize;
    let k = spec.k as usize;
    (0..spec.m)
        .map(|_| {
            let subset: Vec<usize> = rand::seq::index::sample(rng, n, k).into_vec();
            let party_mask = subset.iter().fold(0u64, |acc, &i| acc | 1 << i);
            let picked = rand::seq::index::sample(rng, k, 2);
            let pair_mask = (1u64 << subset[picked.index(0)]) | (1 << subset[picked.index(1)]);
            CoupledChannel { party_mask, pair_mask }
        })
        .collect()
}

/// Aggregate of the coupled-sampling dominance experiment.
#[derive(Debug, Clone, Default)]
pub struct DominanceReport {
    pub instances: u64,
    pub channel_samples: u64,
    pub cut_checks: u64,
    /// Indicator violations `1{A} < 1{B}`; the coupling guarantees zero.
    pub indicator_violations: u64,
    /// Per-instance failures of min-cut dominance over all cuts.
    pub mincut_violations: u64,
    /// Per-pair failures of max-flow dominance.
    pub maxflow_violations: u64,
}

fn straddle(mask: u64, cut: u64, full: u64) -> bool {
    mask & cut != 0 && mask & (full ^ cut) != 0
}

/// Runs `instances` coupled topology draws and checks, exhaustively over all
/// cuts: per-channel indicator dominance, cut-capacity dominance, min-cut
/// dominance, and s-t max-flow dominance (2-party flows via the flow engine,
/// k-party cut minima by enumeration).
pub fn coupled_dominance_check(
    spec: &RandomTopologySpec,
    instances: u64,
    seed: u64,
) -> Result<DominanceReport> {
    spec.validate()?;
    if spec.n > 16 {
        return Err(Error::InvalidParameter(
            "exhaustive cut enumeration supports n <= 16".into(),
        ));
    }
    let n = spec.n as usize;
    let full: u64 = (1 << n) - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = DominanceReport::default();
    for _ in 0..instances {
        let channels = sample_coupled(spec, &mut rng);
        report.instances += 1;
        report.channel_samples += channels.len() as u64;
        let mut min_k = i64::MAX;
        let mut min_2 = i64::MAX;
        for cut in 1..full {
            let mut cap_k = 0i64;
            let mut cap_2 = 0i64;
            for ch in &channels {
                let a = straddle(ch.party_mask, cut, full);
                let b = straddle(ch.pair_mask, cut, full);
                report.cut_checks += 1;
                if b && !a {
                    report.indicator_violations += 1;
                }
                if a {
                    cap_k += spec.c;
                }
                if b {
                    cap_2 += spec.c;
                }
            }
            min_k = min_k.min(cap_k);
            min_2 = min_2.min(cap_2);
        }
        if min_k < min_2 {
            report.mincut_violations += 1;
        }
        // max-flow dominance for every ordered pair
        for s in 0..n {
            for t in 0..n {
                if s == t {
                    continue;
                }
                let hyper = hyper_min_cut(&channels, spec.c, s, t, full);
                let two = pair_max_flow(&channels, spec.c, n, s, t)?;
                if hyper < two {
                    report.maxflow_violations += 1;
                }
            }
        }
    }
    Ok(report)
}

/// Minimum s-t cut of the hypergraph by exhaustive enumeration.
fn hyper_min_cut(channels: &[CoupledChannel], c: i64, s: usize, t: usize, full: u64) -> i64 {
    let mut best = i64::MAX;
    for cut in 1..full {
        if cut >> s & 1 == 1 && cut >> t & 1 == 0 {
            let cap: i64 = channels
                .iter()
                .filter(|ch| straddle(ch.party_mask, cut, full))
                .map(|_| c)
                .sum();
            best = best.min(cap);
        }
    }
    best
}

/// s-t max flow of the paired 2-party capacity graph (undirected channels as
/// antiparallel arcs).
fn pair_max_flow(
    channels: &[CoupledChannel],
    c: i64,
    n: usize,
    s: usize,
    t: usize,
) -> Result<i64> {
    let mut net = FlowNetwork::new(n);
    for ch in channels {
        let u = ch.pair_mask.trailing_zeros() as usize;
        let v = (63 - ch.pair_mask.leading_zeros()) as usize;
        net.add_arc(u, v, c, 0);
        net.add_arc(v, u, c, 0);
    }
    Ok(max_flow(&net, s, t)?.value)
}
