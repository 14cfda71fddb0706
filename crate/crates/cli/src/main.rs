//! `pcn`: feasibility, fibers, estimators and depletion experiments for
//! payment channel networks.
//!
//! Verdicts print as JSON on stdout; series print as CSV. Every stochastic
//! command takes a mandatory `--seed` and reproduces its output byte for
//! byte. Infeasible verdicts are data, not errors: the exit status is
//! nonzero only for invalid input.

use clap::{Args, Parser, Subcommand};
use num_rational::Ratio;
use pcn_core::convexfee::{
    circular_demand, routing_simulation, summarize_liquidity, BenchmarkConfig, SimConfig,
    TierSchedule,
};
use pcn_core::depletion::{depletion_correlation, depletion_experiment, DepletionEnsemble};
use pcn_core::feasibility::{is_feasible, DEFAULT_ENUMERATION_BOUND};
use pcn_core::fibers::fiber_enumerate;
use pcn_core::multiparty::{mc_cut_width, RandomTopologySpec};
use pcn_core::replenish::{replenish, replenish_report, ReplenishmentProblem};
use pcn_core::sampling::{
    estimate_r, estimate_rho, throughput, throughput_exact, PaymentModel, Throughput,
};
use pcn_core::{ChannelGraph, LiquidityState, WealthVector};
use serde::Serialize;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "pcn", version, about = "liquidity geometry of payment channel networks")]
struct Cli {
    /// Worker threads for sampling sweeps (default: PCN_THREADS or 1).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether a wealth distribution is realizable on a network.
    Feasible(FeasibleArgs),
    /// Count (and optionally list) the liquidity states over a wealth vector.
    Fiber(FiberArgs),
    /// Estimate the feasible fraction r(G) of wealth distributions.
    #[command(name = "estimate-r")]
    EstimateR(EstimateRArgs),
    /// Estimate the infeasible-payment rate rho for given amounts.
    #[command(name = "estimate-rho")]
    EstimateRho(EstimateRhoArgs),
    /// Off-chain throughput S = zeta / rho.
    Throughput(ThroughputArgs),
    /// Closed-form vs Monte Carlo cut widths of random k-party topologies.
    Cutwidth(CutwidthArgs),
    /// Fee-potential maximization over random networks: depletion vs rank.
    Depletion(DepletionArgs),
    /// Routing simulation under linear or quadratic (scarcity) fees.
    Convexsim(ConvexsimArgs),
    /// Move liquidity to the fiber element nearest a target state.
    Replenish(ReplenishArgs),
    /// State-space volumes: per network, or the equal-split sweep.
    Volume(VolumeArgs),
}

#[derive(Args)]
struct FeasibleArgs {
    /// Network JSON: {"nodes":[...],"channels":[{"ends":[...],"cap":N}]}.
    #[arg(long)]
    network: PathBuf,
    /// Wealth JSON: {"node": coins, ...}.
    #[arg(long)]
    wealth: PathBuf,
}

#[derive(Args)]
struct FiberArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    wealth: PathBuf,
    /// List every state instead of only counting.
    #[arg(long)]
    enumerate: bool,
    /// Abort above this state-space volume.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_BOUND)]
    bound: u128,
}

#[derive(Args)]
struct EstimateRArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    samples: u64,
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct EstimateRhoArgs {
    #[arg(long)]
    network: PathBuf,
    /// Payment amounts, comma separated; one CSV row per amount.
    #[arg(long, value_delimiter = ',')]
    amount: Vec<i64>,
    #[arg(long)]
    samples: u64,
    #[arg(long)]
    seed: u64,
    /// On-chain transactions per second feeding the S column.
    #[arg(long, default_value_t = 7.0)]
    zeta: f64,
}

#[derive(Args)]
struct ThroughputArgs {
    /// On-chain rate; accepts decimals or exact fractions like 7/1.
    #[arg(long)]
    zeta: String,
    /// Infeasible-payment rate; accepts decimals or fractions like 7/47000.
    #[arg(long)]
    rho: String,
}

#[derive(Args)]
struct CutwidthArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    m: u64,
    #[arg(long, default_value_t = 1)]
    c: i64,
    /// Party sizes to sweep, inclusive range like 2..6.
    #[arg(long, default_value = "2..4")]
    k_range: String,
    /// Cut sizes to sweep, inclusive range like 1..5.
    #[arg(long, default_value = "1..3")]
    s_range: String,
    #[arg(long)]
    samples: u64,
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct DepletionArgs {
    #[arg(long)]
    n: usize,
    /// Maximum channel count; each trial draws m uniformly from [n-1, this].
    #[arg(long)]
    m: usize,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    cap_min: i64,
    #[arg(long, default_value_t = 20)]
    cap_max: i64,
}

#[derive(Args)]
struct ConvexsimArgs {
    /// "linear" or "quadratic".
    #[arg(long)]
    schedule: String,
    #[arg(long, default_value_t = 100)]
    ppm: i64,
    #[arg(long, default_value_t = 10_000)]
    steps: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    cap: i64,
    /// Write the per-step CSV time series here.
    #[arg(long)]
    series: Option<PathBuf>,
}

#[derive(Args)]
struct ReplenishArgs {
    #[arg(long)]
    network: PathBuf,
    /// Current liquidity JSON: {"chan": {"node": coins, ...}, ...}.
    #[arg(long)]
    liquidity: PathBuf,
    /// Target liquidity JSON (same shape, fractional values allowed);
    /// defaults to the half-split.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Write the before/after band CSV here.
    #[arg(long)]
    bands: Option<PathBuf>,
}

#[derive(Args)]
struct VolumeArgs {
    /// Network JSON; prints its exact state-space volume.
    #[arg(long)]
    network: Option<PathBuf>,
    /// Total coins for the equal-split sweep.
    #[arg(long, value_delimiter = ',')]
    coins: Vec<i64>,
    /// Channel counts for the equal-split sweep.
    #[arg(long, value_delimiter = ',')]
    channels: Vec<u32>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| {
            std::env::var("PCN_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(1)
        .max(1);
    match run(cli.command, threads) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command, threads: usize) -> Result<(), String> {
    match command {
        Command::Feasible(args) => cmd_feasible(args),
        Command::Fiber(args) => cmd_fiber(args),
        Command::EstimateR(args) => cmd_estimate_r(args, threads),
        Command::EstimateRho(args) => cmd_estimate_rho(args, threads),
        Command::Throughput(args) => cmd_throughput(args),
        Command::Cutwidth(args) => cmd_cutwidth(args),
        Command::Depletion(args) => cmd_depletion(args),
        Command::Convexsim(args) => cmd_convexsim(args),
        Command::Replenish(args) => cmd_replenish(args),
        Command::Volume(args) => cmd_volume(args),
    }
}

fn load_network(path: &PathBuf) -> Result<ChannelGraph, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    ChannelGraph::from_json(&text).map_err(|e| e.to_string())
}

fn load_wealth(g: &ChannelGraph, path: &PathBuf) -> Result<WealthVector, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    WealthVector::from_json(g, &text).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct FeasibleOutput {
    feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate_cut: Option<Vec<String>>,
}

fn cmd_feasible(args: FeasibleArgs) -> Result<(), String> {
    let g = load_network(&args.network)?;
    let omega = load_wealth(&g, &args.wealth)?;
    let res = is_feasible(&g, &omega).map_err(|e| e.to_string())?;
    let out = FeasibleOutput {
        feasible: res.feasible,
        witness: res
            .witness
            .map(|w| serde_json::from_str(&w.to_json(&g)).expect("valid json")),
        certificate_cut: res.certificate_cut.map(|cut| {
            cut.iter().map(|&v| g.node_name(v).to_string()).collect()
        }),
    };
    println!("{}", serde_json::to_string(&out).expect("serializable"));
    Ok(())
}

#[derive(Serialize)]
struct FiberOutput {
    count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    states: Option<Vec<serde_json::Value>>,
}

fn cmd_fiber(args: FiberArgs) -> Result<(), String> {
    let g = load_network(&args.network)?;
    let omega = load_wealth(&g, &args.wealth)?;
    let fiber = fiber_enumerate(&g, &omega, args.bound).map_err(|e| e.to_string())?;
    let out = FiberOutput {
        count: fiber.len(),
        states: args.enumerate.then(|| {
            fiber
                .iter()
                .map(|s| serde_json::from_str(&s.to_json(&g)).expect("valid json"))
                .collect()
        }),
    };
    println!("{}", serde_json::to_string(&out).expect("serializable"));
    Ok(())
}

fn cmd_estimate_r(args: EstimateRArgs, threads: usize) -> Result<(), String> {
    let g = load_network(&args.network)?;
    let report = estimate_r(&g, args.samples, args.seed, threads).map_err(|e| e.to_string())?;
    println!("{}", serde_json::to_string(&report).expect("serializable"));
    Ok(())
}

fn cmd_estimate_rho(args: EstimateRhoArgs, threads: usize) -> Result<(), String> {
    if args.amount.is_empty() {
        return Err("need at least one --amount".into());
    }
    let g = load_network(&args.network)?;
    println!("amount,rho,stderr,S");
    for (i, &a) in args.amount.iter().enumerate() {
        let report = estimate_rho(
            &g,
            &PaymentModel::fixed(a),
            args.samples,
            args.seed.wrapping_add(i as u64),
            threads,
        )
        .map_err(|e| e.to_string())?;
        let s = match throughput(args.zeta, report.estimate).map_err(|e| e.to_string())? {
            Throughput::PerSecond(s) => format!("{s}"),
            Throughput::Unbounded => "inf".to_string(),
        };
        println!("{a},{},{},{s}", report.estimate, report.standard_error);
    }
    Ok(())
}

fn parse_ratio(text: &str) -> Result<Ratio<i64>, String> {
    if let Some((num, den)) = text.split_once('/') {
        let num: i64 = num.trim().parse().map_err(|e| format!("{text}: {e}"))?;
        let den: i64 = den.trim().parse().map_err(|e| format!("{text}: {e}"))?;
        if den == 0 {
            return Err(format!("{text}: zero denominator"));
        }
        Ok(Ratio::new(num, den))
    } else {
        Err("not a fraction".into())
    }
}

#[derive(Serialize)]
struct ThroughputOutput {
    supported_payments_per_second: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<String>,
}

fn cmd_throughput(args: ThroughputArgs) -> Result<(), String> {
    let rational = (parse_ratio(&args.zeta), parse_ratio(&args.rho));
    let out = if let (Ok(zeta), Ok(rho)) = rational {
        match throughput_exact(zeta, rho).map_err(|e| e.to_string())? {
            Some(s) => ThroughputOutput {
                supported_payments_per_second: serde_json::json!(ratio_to_f64(s)),
                exact: Some(format!("{}/{}", s.numer(), s.denom())),
            },
            None => ThroughputOutput {
                supported_payments_per_second: serde_json::json!("unbounded"),
                exact: None,
            },
        }
    } else {
        let zeta: f64 = args.zeta.parse().map_err(|e| format!("--zeta: {e}"))?;
        let rho: f64 = args.rho.parse().map_err(|e| format!("--rho: {e}"))?;
        match throughput(zeta, rho).map_err(|e| e.to_string())? {
            Throughput::PerSecond(s) => ThroughputOutput {
                supported_payments_per_second: serde_json::json!(s),
                exact: None,
            },
            Throughput::Unbounded => ThroughputOutput {
                supported_payments_per_second: serde_json::json!("unbounded"),
                exact: None,
            },
        }
    };
    println!("{}", serde_json::to_string(&out).expect("serializable"));
    Ok(())
}

fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn parse_range(text: &str) -> Result<(u64, u64), String> {
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| format!("range `{text}` must look like 2..5"))?;
    let lo: u64 = lo.parse().map_err(|e| format!("{text}: {e}"))?;
    let hi: u64 = hi.parse().map_err(|e| format!("{text}: {e}"))?;
    if lo > hi {
        return Err(format!("range `{text}` is empty"));
    }
    Ok((lo, hi))
}

fn cmd_cutwidth(args: CutwidthArgs) -> Result<(), String> {
    let (k_lo, k_hi) = parse_range(&args.k_range)?;
    let (s_lo, s_hi) = parse_range(&args.s_range)?;
    println!("k,s,q_closed,q_mc,width_closed,width_mc");
    for k in k_lo..=k_hi {
        for s in s_lo..=s_hi {
            let spec = RandomTopologySpec {
                n: args.n,
                m: args.m,
                k,
                c: args.c,
            };
            let report =
                mc_cut_width(&spec, s, args.samples, args.seed.wrapping_add(k * 1000 + s))
                    .map_err(|e| e.to_string())?;
            println!(
                "{k},{s},{},{},{},{}",
                report.q_closed,
                report.q_mc,
                report.expected_width_closed,
                report.expected_width_mc
            );
        }
    }
    Ok(())
}

fn cmd_depletion(args: DepletionArgs) -> Result<(), String> {
    let ensemble = DepletionEnsemble {
        nodes: args.n,
        min_channels: args.n.saturating_sub(1),
        max_channels: args.m,
        cap_range: (args.cap_min, args.cap_max),
    };
    let trials = depletion_experiment(&ensemble, args.trials, args.seed)
        .map_err(|e| e.to_string())?;
    println!("trial,circuit_rank,depleted,p_network");
    for (i, t) in trials.iter().enumerate() {
        println!("{i},{},{},{}", t.circuit_rank, t.depleted_channels, t.p_network);
    }
    let r = depletion_correlation(&trials);
    eprintln!(
        "pearson(depleted, circuit_rank) = {}",
        r.map_or("undefined".to_string(), |v| v.to_string())
    );
    Ok(())
}

#[derive(Serialize)]
struct ConvexOutput {
    schedule: String,
    successes: u64,
    failures: u64,
    network_fees: i64,
    node_fees: Vec<i64>,
    median_relative_liquidity: Vec<f64>,
    steady_state_start: usize,
    reached_steady_state: bool,
    band_narrow: f64,
    band_wide: f64,
}

fn cmd_convexsim(args: ConvexsimArgs) -> Result<(), String> {
    let config = BenchmarkConfig {
        cap: args.cap,
        ppm: args.ppm,
        steps: args.steps,
    };
    let g = ChannelGraph::from_pairs(
        &["n0", "n1", "n2"],
        &[("n0", "n1", args.cap), ("n1", "n2", args.cap), ("n0", "n2", args.cap)],
    )
    .map_err(|e| e.to_string())?;
    let book = TierSchedule::uniform_ppm(&g, args.ppm);
    let series = match args.schedule.as_str() {
        "linear" => routing_simulation(
            &g,
            &TierSchedule::linear(&g, &book).map_err(|e| e.to_string())?,
            &circular_demand(),
            config.steps,
            args.seed,
            &SimConfig {
                disclose_liquidity: false,
                retry_on_failure: true,
            },
        ),
        "quadratic" => routing_simulation(
            &g,
            &TierSchedule::quadratic(&g, &book).map_err(|e| e.to_string())?,
            &circular_demand(),
            config.steps,
            args.seed,
            &SimConfig {
                disclose_liquidity: true,
                retry_on_failure: true,
            },
        ),
        other => return Err(format!("unknown schedule `{other}` (linear|quadratic)")),
    }
    .map_err(|e| e.to_string())?;
    if let Some(path) = &args.series {
        let mut csv = String::from("step,success,fee_paid");
        for e in 0..g.channel_count() {
            csv.push_str(&format!(",{}", g.channels()[e].id));
        }
        csv.push('\n');
        for (step, ((ok, fee), row)) in series
            .outcomes
            .iter()
            .zip(&series.liquidity)
            .enumerate()
        {
            csv.push_str(&format!("{step},{},{fee}", u8::from(*ok)));
            for v in row {
                csv.push_str(&format!(",{v}"));
            }
            csv.push('\n');
        }
        fs::write(path, csv).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    let summary = summarize_liquidity(&series).map_err(|e| e.to_string())?;
    let out = ConvexOutput {
        schedule: args.schedule,
        successes: series.successes,
        failures: series.failures,
        network_fees: summary.network_fees,
        node_fees: summary.node_fees,
        median_relative_liquidity: summary.median_relative,
        steady_state_start: summary.steady_state_start,
        reached_steady_state: summary.reached_steady_state,
        band_narrow: summary.band_narrow,
        band_wide: summary.band_wide,
    };
    println!("{}", serde_json::to_string(&out).expect("serializable"));
    Ok(())
}

#[derive(Serialize)]
struct ReplenishOutput {
    dist_relaxed: f64,
    dist_integer: f64,
    delta: i64,
    widenings: u32,
    fallback_to_current: bool,
    kkt_residual: f64,
    band_narrow_before: f64,
    band_narrow_after: f64,
    band_wide_before: f64,
    band_wide_after: f64,
    capacity_moved_fraction: f64,
    moved_units: i64,
    liquidity_after: serde_json::Value,
}

fn cmd_replenish(args: ReplenishArgs) -> Result<(), String> {
    let g = load_network(&args.network)?;
    let text = fs::read_to_string(&args.liquidity)
        .map_err(|e| format!("{}: {e}", args.liquidity.display()))?;
    let lam = LiquidityState::from_json(&g, &text).map_err(|e| e.to_string())?;
    let prob = match &args.target {
        None => ReplenishmentProblem::half_target(g.clone(), lam).map_err(|e| e.to_string())?,
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let target = parse_target(&g, &text)?;
            ReplenishmentProblem::new(g.clone(), lam, target).map_err(|e| e.to_string())?
        }
    };
    let result = replenish(&prob).map_err(|e| e.to_string())?;
    let report = replenish_report(&prob, &result).map_err(|e| e.to_string())?;
    if let Some(path) = &args.bands {
        let csv = format!(
            "when,band_40_60,band_10_90\nbefore,{},{}\nafter,{},{}\n",
            report.band_narrow_before,
            report.band_wide_before,
            report.band_narrow_after,
            report.band_wide_after
        );
        fs::write(path, csv).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    let out = ReplenishOutput {
        dist_relaxed: result.dist_rho,
        dist_integer: result.dist_int,
        delta: result.delta,
        widenings: result.widenings,
        fallback_to_current: result.fallback_to_current,
        kkt_residual: result.kkt_residual,
        band_narrow_before: report.band_narrow_before,
        band_narrow_after: report.band_narrow_after,
        band_wide_before: report.band_wide_before,
        band_wide_after: report.band_wide_after,
        capacity_moved_fraction: report.capacity_moved_fraction,
        moved_units: report.moved_units,
        liquidity_after: serde_json::from_str(&result.x_int.to_json(&g)).expect("valid json"),
    };
    println!("{}", serde_json::to_string(&out).expect("serializable"));
    Ok(())
}

/// Parses a liquidity-shaped JSON file with fractional values into flat
/// target coordinates.
fn parse_target(g: &ChannelGraph, text: &str) -> Result<Vec<f64>, String> {
    let map: std::collections::BTreeMap<String, std::collections::BTreeMap<String, f64>> =
        serde_json::from_str(text).map_err(|e| e.to_string())?;
    let mut flat = Vec::with_capacity(2 * g.channel_count());
    for ch in g.channels() {
        let inner = map
            .get(&ch.id)
            .ok_or_else(|| format!("target missing channel `{}`", ch.id))?;
        for &v in &ch.endpoints {
            let name = g.node_name(v);
            let &x = inner
                .get(name)
                .ok_or_else(|| format!("target channel `{}` missing node `{name}`", ch.id))?;
            flat.push(x);
        }
    }
    Ok(flat)
}

#[derive(Serialize)]
struct VolumeOutput {
    vol: String,
}

fn cmd_volume(args: VolumeArgs) -> Result<(), String> {
    if let Some(path) = &args.network {
        let g = load_network(path)?;
        let out = VolumeOutput {
            vol: g.state_volume().to_string(),
        };
        println!("{}", serde_json::to_string(&out).expect("serializable"));
        return Ok(());
    }
    if args.coins.is_empty() || args.channels.is_empty() {
        return Err("need --network, or both --coins and --channels".into());
    }
    println!("coins,channels,volume");
    for &coins in &args.coins {
        for &m in &args.channels {
            if coins < 0 || m == 0 || coins % m as i64 != 0 {
                continue;
            }
            let per = coins / m as i64 + 1;
            let vol = (per as u128).pow(m);
            println!("{coins},{m},{vol}");
        }
    }
    Ok(())
}
