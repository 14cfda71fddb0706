//! Uniform sampling of wealth distributions and Monte Carlo estimators for
//! the feasible fraction `r(G)`, the infeasible-payment rate `rho`, and the
//! off-chain throughput law `S = zeta / rho`.
//!
//! Sampling is exactly uniform over the lattice: a wealth distribution of `C`
//! coins among `n` users corresponds to an `(n-1)`-subset of `C + n - 1` bar
//! positions, drawn without replacement. Estimators are reproducible
//! bit-exactly from `(seed, samples)`: work is split into fixed-size batches
//! and batch `i` runs on stream `i` of a seeded ChaCha8 generator, so results
//! do not depend on the number of worker threads.

use crate::error::{Error, Result};
use crate::feasibility::is_feasible;
use crate::network::{ChannelGraph, WealthVector};
use num_rational::Ratio;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Samples per deterministic batch/stream.
pub const BATCH: u64 = 4096;

/// Retry budget for rejection-sampling a feasible wealth vector.
pub const DEFAULT_REJECTION_BUDGET: u64 = 10_000;

/// A Monte Carlo estimate of a proportion.
#[derive(Debug, Clone, Serialize)]
pub struct EstimatorReport {
    pub estimate: f64,
    pub sample_count: u64,
    pub standard_error: f64,
    pub seed: u64,
}

impl EstimatorReport {
    fn from_counts(hits: u64, samples: u64, seed: u64) -> Self {
        let p = hits as f64 / samples as f64;
        EstimatorReport {
            estimate: p,
            sample_count: samples,
            standard_error: (p * (1.0 - p) / samples as f64).sqrt(),
            seed,
        }
    }
}

/// `binom(a, b)` with overflow checking.
pub fn binomial(a: u64, b: u64) -> Result<u128> {
    if b > a {
        return Ok(0);
    }
    let b = b.min(a - b);
    let mut acc: u128 = 1;
    for i in 0..b {
        acc = acc
            .checked_mul((a - b + i + 1) as u128)
            .ok_or(Error::Overflow("computing binomial coefficient"))?
            / (i + 1) as u128;
    }
    Ok(acc)
}

/// Number of wealth distributions of `coins` among `users`:
/// `binom(C + n - 1, n - 1)` by stars and bars.
pub fn count_wealth_distributions(coins: u64, users: u64) -> Result<u128> {
    if users == 0 {
        return Err(Error::InvalidParameter("need at least one user".into()));
    }
    binomial(coins + users - 1, users - 1)
}

/// Draws exactly uniformly from `W(C, n)`.
pub fn sample_wealth(coins: i64, users: usize, rng: &mut impl Rng) -> WealthVector {
    debug_assert!(coins >= 0 && users >= 1);
    if users == 1 {
        return WealthVector::from_raw(vec![coins]);
    }
    // coins stars and users-1 bars: choose bar positions among C + n - 1 slots
    let slots = coins as usize + users - 1;
    let mut bars = rand::seq::index::sample(rng, slots, users - 1).into_vec();
    bars.sort_unstable();
    let mut omega = Vec::with_capacity(users);
    let mut prev = 0usize;
    for &b in &bars {
        omega.push((b - prev) as i64);
        prev = b + 1;
    }
    omega.push((slots - prev) as i64);
    WealthVector::from_raw(omega)
}

/// Enumerates all of `W(C, n)` in lexicographic order.
pub fn for_each_wealth(coins: i64, users: usize, visit: &mut dyn FnMut(&WealthVector)) {
    fn rec(prefix: &mut Vec<i64>, left: i64, slots: usize, visit: &mut dyn FnMut(&WealthVector)) {
        if slots == 1 {
            prefix.push(left);
            visit(&WealthVector::from_raw(prefix.clone()));
            prefix.pop();
            return;
        }
        for take in 0..=left {
            prefix.push(take);
            rec(prefix, left - take, slots - 1, visit);
            prefix.pop();
        }
    }
    rec(&mut Vec::with_capacity(users), coins, users, visit);
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `samples` batched trials; `trial` returns the number of hits for one
/// batch given its rng. Deterministic in `(seed, samples)` alone.
fn batched_hits<F>(samples: u64, seed: u64, threads: usize, trial: F) -> u64
where
    F: Fn(&mut ChaCha8Rng, u64) -> u64 + Sync,
{
    let batches: Vec<(u64, u64)> = (0..samples.div_ceil(BATCH))
        .map(|i| (i, BATCH.min(samples - i * BATCH)))
        .collect();
    if threads <= 1 {
        return batches
            .iter()
            .map(|&(i, len)| trial(&mut stream_rng(seed, i), len))
            .sum();
    }
    let trial = &trial;
    std::thread::scope(|scope| {
        let chunk = batches.len().div_ceil(threads);
        batches
            .chunks(chunk.max(1))
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|&(i, len)| trial(&mut stream_rng(seed, i), len))
                        .sum::<u64>()
                })
            })
            .collect::<Vec<_>>()
            .into_iter()
            .map(|h| h.join().expect("worker"))
            .sum()
    })
}

/// Estimates the relative feasible volume `r(G)` by uniform sampling from
/// `W(C, n)`.
pub fn estimate_r(g: &ChannelGraph, samples: u64, seed: u64, threads: usize) -> Result<EstimatorReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    let coins = g.total_capacity();
    let users = g.node_count();
    let hits = batched_hits(samples, seed, threads, |rng, len| {
        let mut h = 0;
        for _ in 0..len {
            let omega = sample_wealth(coins, users, rng);
            if is_feasible(g, &omega).expect("valid sample").feasible {
                h += 1;
            }
        }
        h
    });
    Ok(EstimatorReport::from_counts(hits, samples, seed))
}

/// Exhaustive `r(G)` for small instances: `(feasible, total)`.
pub fn exact_r(g: &ChannelGraph, bound: u128) -> Result<(u128, u128)> {
    let total = count_wealth_distributions(g.total_capacity() as u64, g.node_count() as u64)?;
    if total > bound {
        return Err(Error::StateSpaceTooLarge { vol: total, bound });
    }
    let mut feasible: u128 = 0;
    for_each_wealth(g.total_capacity(), g.node_count(), &mut |omega| {
        if is_feasible(g, omega).expect("enumerated vector valid").feasible {
            feasible += 1;
        }
    });
    Ok((feasible, total))
}

/// How payment requests are drawn: payer/payee uniform over ordered pairs,
/// amount fixed or uniform over a list.
#[derive(Debug, Clone)]
pub struct PaymentModel {
    pub amounts: Vec<i64>,
}

impl PaymentModel {
    pub fn fixed(amount: i64) -> Self {
        PaymentModel {
            amounts: vec![amount],
        }
    }

    fn draw(&self, users: usize, rng: &mut impl Rng) -> (usize, usize, i64) {
        let payer = rng.random_range(0..users);
        let mut payee = rng.random_range(0..users - 1);
        if payee >= payer {
            payee += 1;
        }
        let amount = self.amounts[rng.random_range(0..self.amounts.len())];
        (payer, payee, amount)
    }
}

/// Estimates `rho`, the expected rate of infeasible payments: draws feasible
/// wealth vectors by rejection, then random payments, and counts how often
/// the shifted vector leaves the feasible set (or the payer lacks balance).
pub fn estimate_rho(
    g: &ChannelGraph,
    model: &PaymentModel,
    samples: u64,
    seed: u64,
    threads: usize,
) -> Result<EstimatorReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    if model.amounts.is_empty() || model.amounts.iter().any(|&a| a < 0) {
        return Err(Error::InvalidParameter(
            "payment amounts must be nonnegative and nonempty".into(),
        ));
    }
    if g.node_count() < 2 {
        return Err(Error::InvalidParameter("need at least two users".into()));
    }
    let coins = g.total_capacity();
    let users = g.node_count();
    let budget = DEFAULT_REJECTION_BUDGET;
    // first failure (if any) aborts with the retry-budget error
    let result = std::sync::Mutex::new(Ok(()));
    let hits = batched_hits(samples, seed, threads, |rng, len| {
        let mut h = 0;
        'outer: for _ in 0..len {
            let mut omega = None;
            for _ in 0..budget {
                let cand = sample_wealth(coins, users, rng);
                if is_feasible(g, &cand).expect("valid sample").feasible {
                    omega = Some(cand);
                    break;
                }
            }
            let Some(omega) = omega else {
                *result.lock().expect("poisoned") = Err(Error::RetryBudgetExceeded { budget });
                break 'outer;
            };
            let (payer, payee, amount) = model.draw(users, rng);
            let infeasible = omega.get(payer) < amount
                || !is_feasible(g, &omega.shifted(payer, payee, amount))
                    .expect("shift keeps totals")
                    .feasible;
            if infeasible {
                h += 1;
            }
        }
        h
    });
    result.into_inner().expect("poisoned")?;
    Ok(EstimatorReport::from_counts(hits, samples, seed))
}

/// Exhaustive `rho` over all feasible wealth vectors and ordered pairs for a
/// fixed amount: `(infeasible_cases, total_cases)`.
pub fn exact_rho(g: &ChannelGraph, amount: i64, bound: u128) -> Result<(u128, u128)> {
    let total_vectors =
        count_wealth_distributions(g.total_capacity() as u64, g.node_count() as u64)?;
    if total_vectors > bound {
        return Err(Error::StateSpaceTooLarge {
            vol: total_vectors,
            bound,
        });
    }
    let users = g.node_count();
    let mut infeasible: u128 = 0;
    let mut total: u128 = 0;
    for_each_wealth(g.total_capacity(), users, &mut |omega| {
        if !is_feasible(g, omega).expect("valid").feasible {
            return;
        }
        for payer in 0..users {
            for payee in 0..users {
                if payer == payee {
                    continue;
                }
                total += 1;
                let bad = omega.get(payer) < amount
                    || !is_feasible(g, &omega.shifted(payer, payee, amount))
                        .expect("valid")
                        .feasible;
                if bad {
                    infeasible += 1;
                }
            }
        }
    });
    Ok((infeasible, total))
}

/// Sustainable off-chain payment rate given on-chain bandwidth `zeta` and
/// infeasible-payment rate `rho`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Throughput {
    PerSecond(f64),
    /// `rho = 0`: every payment stays off-chain.
    Unbounded,
}

pub fn throughput(zeta: f64, rho: f64) -> Result<Throughput> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!(
            "rho must lie in [0, 1], got {rho}"
        )));
    }
    if zeta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "zeta must be nonnegative, got {zeta}"
        )));
    }
    if rho == 0.0 {
        return Ok(Throughput::Unbounded);
    }
    Ok(Throughput::PerSecond(zeta / rho))
}

/// Exact rational form of the throughput law; `None` means unbounded.
pub fn throughput_exact(zeta: Ratio<i64>, rho: Ratio<i64>) -> Result<Option<Ratio<i64>>> {
    let zero = Ratio::from_integer(0);
    let one = Ratio::from_integer(1);
    if rho < zero || rho > one {
        return Err(Error::InvalidParameter("rho must lie in [0, 1]".into()));
    }
    if zeta < zero {
        return Err(Error::InvalidParameter("zeta must be nonnegative".into()));
    }
    if rho == zero {
        return Ok(None);
    }
    Ok(Some(zeta / rho))
}
