//! Exact integer flow algorithms: Dinic max-flow with canonical min cut,
//! multi-source transshipment, and cycle-canceling min-cost circulation.
//!
//! All capacities and costs are 64-bit integers; returned flows are integral.

use crate::error::{Error, Result};
use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: i64,
    cost: i64,
    rev: usize,
    /// true for the forward direction of an added arc
    forward: bool,
}

/// Directed flow network with optional per-node supplies (positive = source).
#[derive(Debug, Clone, Default)]
pub struct FlowNetwork {
    adj: Vec<Vec<Arc>>,
    supplies: Vec<i64>,
    arc_index: Vec<(usize, usize)>,
}

/// A feasible integral flow, reported per added arc in insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    pub per_arc: Vec<i64>,
}

#[derive(Debug, Clone)]
pub struct MaxFlowResult {
    pub value: i64,
    pub flow: Flow,
    /// Source side of a minimum cut: the nodes reachable from the source in
    /// the final residual graph (canonical, deterministic).
    pub min_cut: Vec<usize>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); nodes],
            supplies: vec![0; nodes],
            arc_index: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn add_node(&mut self) -> usize {
        self.adj.push(Vec::new());
        self.supplies.push(0);
        self.adj.len() - 1
    }

    /// Adds a directed arc and returns its index.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: i64, cost: i64) -> usize {
        debug_assert!(cap >= 0);
        let (rf, rt) = (self.adj[to].len(), self.adj[from].len());
        self.adj[from].push(Arc {
            to,
            cap,
            cost,
            rev: rf,
            forward: true,
        });
        self.adj[to].push(Arc {
            to: from,
            cap: 0,
            cost: -cost,
            rev: rt,
            forward: false,
        });
        self.arc_index.push((from, rt));
        self.arc_index.len() - 1
    }

    pub fn set_supply(&mut self, node: usize, supply: i64) {
        self.supplies[node] = supply;
    }

    pub fn arc_count(&self) -> usize {
        self.arc_index.len()
    }

    pub fn supplies(&self) -> &[i64] {
        &self.supplies
    }
}

/// Reads committed flow off a residual graph, per original arc.
fn extract_flow(residual: &[Vec<Arc>], original: &FlowNetwork) -> Flow {
    let per_arc = original
        .arc_index
        .iter()
        .map(|&(from, slot)| original.adj[from][slot].cap - residual[from][slot].cap)
        .collect();
    Flow { per_arc }
}

struct Dinic {
    adj: Vec<Vec<Arc>>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl Dinic {
    fn new(adj: Vec<Vec<Arc>>) -> Self {
        let n = adj.len();
        Dinic {
            adj,
            level: vec![-1; n],
            iter: vec![0; n],
        }
    }

    fn bfs(&mut self, s: usize) {
        self.level.fill(-1);
        let mut q = VecDeque::new();
        self.level[s] = 0;
        q.push_back(s);
        while let Some(u) = q.pop_front() {
            for a in &self.adj[u] {
                if a.cap > 0 && self.level[a.to] < 0 {
                    self.level[a.to] = self.level[u] + 1;
                    q.push_back(a.to);
                }
            }
        }
    }

    fn dfs(&mut self, u: usize, t: usize, pushed: i64) -> i64 {
        if u == t {
            return pushed;
        }
        while self.iter[u] < self.adj[u].len() {
            let i = self.iter[u];
            let (to, cap) = (self.adj[u][i].to, self.adj[u][i].cap);
            if cap > 0 && self.level[u] < self.level[to] {
                let d = self.dfs(to, t, pushed.min(cap));
                if d > 0 {
                    self.adj[u][i].cap -= d;
                    let rev = self.adj[u][i].rev;
                    self.adj[to][rev].cap += d;
                    return d;
                }
            }
            self.iter[u] += 1;
        }
        0
    }

    fn run(&mut self, s: usize, t: usize) -> i64 {
        let mut total: i64 = 0;
        loop {
            self.bfs(s);
            if self.level[t] < 0 {
                return total;
            }
            self.iter.fill(0);
            loop {
                let f = self.dfs(s, t, i64::MAX);
                if f == 0 {
                    break;
                }
                total += f;
            }
        }
    }

    fn residual_reachable(&self, s: usize) -> Vec<usize> {
        let mut seen = vec![false; self.adj.len()];
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            for a in &self.adj[u] {
                if a.cap > 0 && !seen[a.to] {
                    seen[a.to] = true;
                    stack.push(a.to);
                }
            }
        }
        (0..self.adj.len()).filter(|&u| seen[u]).collect()
    }
}

/// Maximum `source -> sink` flow via blocking flows, with the canonical
/// minimum cut (source-reachable residual set). The returned value always
/// equals the returned cut's capacity.
pub fn max_flow(net: &FlowNetwork, source: usize, sink: usize) -> Result<MaxFlowResult> {
    let n = net.node_count();
    if source >= n {
        return Err(Error::NodeOutOfRange(source));
    }
    if sink >= n {
        return Err(Error::NodeOutOfRange(sink));
    }
    if source == sink {
        return Err(Error::InvalidParameter("source equals sink".into()));
    }
    let mut dinic = Dinic::new(net.adj.clone());
    let value = dinic.run(source, sink);
    let min_cut = dinic.residual_reachable(source);
    let flow = extract_flow(&dinic.adj, net);
    Ok(MaxFlowResult { value, flow, min_cut })
}

/// Capacity of the directed cut leaving `side` (set given as a sorted list).
pub fn cut_capacity(net: &FlowNetwork, side: &[usize]) -> i64 {
    let mut inside = vec![false; net.node_count()];
    for &u in side {
        inside[u] = true;
    }
    let mut total = 0i64;
    for (u, arcs) in net.adj.iter().enumerate() {
        if !inside[u] {
            continue;
        }
        for a in arcs {
            if a.forward && !inside[a.to] {
                total += a.cap;
            }
        }
    }
    total
}

/// Outcome of a supply/demand routing attempt.
#[derive(Debug, Clone)]
pub enum Transshipment {
    Feasible(Flow),
    /// Certificate: a node set whose net supply exceeds its outgoing cut
    /// capacity (derived from the final residual graph).
    Infeasible { cut: Vec<usize>, deficit: i64 },
}

/// Routes declared supplies to demands, or proves that no feasible flow
/// exists. Uses a super-source/super-sink reduction.
pub fn feasible_transshipment(net: &FlowNetwork) -> Result<Transshipment> {
    let total: i64 = net.supplies.iter().sum();
    if total != 0 {
        return Err(Error::InvalidParameter(format!(
            "supplies sum to {total}, expected 0"
        )));
    }
    let n = net.node_count();
    let mut work = net.clone();
    let s = work.add_node();
    let t = work.add_node();
    let mut need: i64 = 0;
    for v in 0..n {
        let sup = net.supplies[v];
        if sup > 0 {
            work.add_arc(s, v, sup, 0);
            need += sup;
        } else if sup < 0 {
            work.add_arc(v, t, -sup, 0);
        }
    }
    let mut dinic = Dinic::new(work.adj.clone());
    let value = dinic.run(s, t);
    if value == need {
        let flow = extract_flow(&dinic.adj, net);
        Ok(Transshipment::Feasible(flow))
    } else {
        let cut: Vec<usize> = dinic
            .residual_reachable(s)
            .into_iter()
            .filter(|&u| u < n)
            .collect();
        Ok(Transshipment::Infeasible {
            cut,
            deficit: need - value,
        })
    }
}

/// Minimum-cost circulation by negative-cycle canceling. Terminates because
/// every cancellation strictly decreases the (integer) total cost.
pub fn min_cost_circulation(net: &FlowNetwork) -> Result<Flow> {
    if net.supplies.iter().any(|&s| s != 0) {
        return Err(Error::InvalidParameter(
            "min-cost circulation expects zero supplies".into(),
        ));
    }
    let mut adj = net.adj.clone();
    while let Some(cycle) = find_negative_cycle(&adj) {
        let bottleneck = cycle
            .iter()
            .map(|&(u, i)| adj[u][i].cap)
            .min()
            .expect("cycle nonempty");
        debug_assert!(bottleneck > 0);
        for (u, i) in cycle {
            adj[u][i].cap -= bottleneck;
            let (to, rev) = (adj[u][i].to, adj[u][i].rev);
            adj[to][rev].cap += bottleneck;
        }
    }
    Ok(extract_flow(&adj, net))
}

/// Bellman-Ford negative-cycle detection over residual arcs. Returns the
/// cycle as `(node, arc slot)` pairs, or `None` when optimal.
fn find_negative_cycle(adj: &[Vec<Arc>]) -> Option<Vec<(usize, usize)>> {
    let n = adj.len();
    let mut dist = vec![0i64; n];
    let mut pred: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut touched = None;
    for _ in 0..n {
        touched = None;
        for u in 0..n {
            for (i, a) in adj[u].iter().enumerate() {
                if a.cap > 0 && dist[u] + a.cost < dist[a.to] {
                    dist[a.to] = dist[u] + a.cost;
                    pred[a.to] = Some((u, i));
                    touched = Some(a.to);
                }
            }
        }
        touched?;
    }
    // A vertex updated in the n-th pass lies on or downstream of a negative
    // cycle; walk predecessors n times to land on the cycle itself.
    let mut v = touched.expect("relaxed in last round");
    for _ in 0..n {
        v = pred[v].expect("predecessor exists").0;
    }
    let mut cycle = Vec::new();
    let start = v;
    loop {
        let (u, i) = pred[v].expect("on cycle");
        cycle.push((u, i));
        v = u;
        if v == start {
            break;
        }
    }
    cycle.reverse();
    Some(cycle)
}

/// True when the residual graph of `flow` on `net` contains no
/// negative-cost cycle; certifies min-cost optimality.
pub fn verify_no_negative_cycle(net: &FlowNetwork, flow: &Flow) -> bool {
    let mut adj = net.adj.clone();
    for (idx, &(from, slot)) in net.arc_index.iter().enumerate() {
        let f = flow.per_arc[idx];
        let to = adj[from][slot].to;
        let rev = adj[from][slot].rev;
        adj[from][slot].cap -= f;
        adj[to][rev].cap += f;
    }
    find_negative_cycle(&adj).is_none()
}

/// Checks `0 <= f <= cap` and node balance against declared supplies.
pub fn verify_flow(net: &FlowNetwork, flow: &Flow) -> bool {
    if flow.per_arc.len() != net.arc_count() {
        return false;
    }
    let mut balance = vec![0i64; net.node_count()];
    for (idx, &(from, slot)) in net.arc_index.iter().enumerate() {
        let arc = &net.adj[from][slot];
        let f = flow.per_arc[idx];
        if f < 0 || f > arc.cap {
            return false;
        }
        balance[from] += f;
        balance[arc.to] -= f;
    }
    balance
        .iter()
        .zip(&net.supplies)
        .all(|(&b, &s)| b == s)
}

/// Total cost of a flow.
pub fn flow_cost(net: &FlowNetwork, flow: &Flow) -> i64 {
    net.arc_index
        .iter()
        .enumerate()
        .map(|(idx, &(from, slot))| net.adj[from][slot].cost * flow.per_arc[idx])
        .sum()
}
