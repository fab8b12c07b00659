//! Exact congestion and maximum fractional density, by two independent
//! methods: exhaustive vertex-subset enumeration and a parametric min-cut.
//!
//! Congestion is max over subgraphs J with an edge of 1 − (|J|−1)/|E(J)|; it
//! is zero exactly on forests. The optimum over subgraphs on a fixed vertex
//! set S always takes all edges inside S (dropping an edge lowers the ratio),
//! so both methods range over vertex subsets only; this reduction is covered
//! by a test, not assumed silently.

use crate::exact::{midpoint, rat, rint, Rat};
use crate::graph::Graph;
use num::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default vertex-count ceiling for the exhaustive method.
pub const EXHAUSTIVE_LIMIT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exhaustive,
    ParametricCut,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CongestionError {
    #[error("exhaustive method limited to {limit} vertices, graph has {n}")]
    ExhaustiveLimitExceeded { n: usize, limit: usize },
    #[error("graph has no edge")]
    EdgelessGraph,
}

/// A subgraph given by its vertex set and edge set, both ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgraphWitness {
    pub vertices: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CongestionResult {
    /// Exact congestion, in [0, 1).
    #[serde(with = "crate::exact::rat_string")]
    pub value: Rat,
    /// Max |E(J)|/(|J|−1); absent when the graph has no edge.
    #[serde(with = "crate::exact::rat_string_opt")]
    pub gamma: Option<Rat>,
    /// Subgraph attaining gamma; absent when the graph has no edge.
    pub witness: Option<SubgraphWitness>,
}

impl CongestionResult {
    /// Re-checks the witness and both rationals from scratch.
    pub fn verify(&self, g: &Graph) -> bool {
        match (&self.witness, &self.gamma) {
            (None, None) => g.edge_count() == 0 && self.value.is_zero(),
            (Some(w), Some(gamma)) => {
                if g.edge_count() == 0 {
                    return false;
                }
                let mut verts = w.vertices.clone();
                verts.sort_unstable();
                verts.dedup();
                if verts != w.vertices || verts.iter().any(|&v| v >= g.n()) {
                    return false;
                }
                if w.edges.is_empty() || w.vertices.len() < 2 {
                    return false;
                }
                for &(u, v) in &w.edges {
                    if !g.has_edge(u, v) || u >= v {
                        return false;
                    }
                    if !w.vertices.contains(&u) || !w.vertices.contains(&v) {
                        return false;
                    }
                }
                let mut edges = w.edges.clone();
                edges.sort_unstable();
                edges.dedup();
                if edges != w.edges {
                    return false;
                }
                let e = rint(w.edges.len() as i64);
                let s1 = rint(w.vertices.len() as i64 - 1);
                if *gamma != &e / &s1 {
                    return false;
                }
                if self.value != Rat::one() - s1 / e {
                    return false;
                }
                if self.value < Rat::zero() || self.value >= Rat::one() {
                    return false;
                }
                let forest = Graph::from_edges(
                    g.n(),
                    &w.edges.iter().copied().collect::<Vec<_>>(),
                )
                .is_forest();
                self.value.is_zero() == forest
            }
            _ => false,
        }
    }
}

/// Congestion with the default exhaustive limit.
pub fn congestion(g: &Graph, method: Method) -> Result<CongestionResult, CongestionError> {
    congestion_with_limit(g, method, EXHAUSTIVE_LIMIT)
}

pub fn congestion_with_limit(
    g: &Graph,
    method: Method,
    limit: usize,
) -> Result<CongestionResult, CongestionError> {
    if g.edge_count() == 0 {
        return Ok(CongestionResult { value: Rat::zero(), gamma: None, witness: None });
    }
    let (gamma, vertices) = match method {
        Method::Exhaustive => {
            if g.n() > limit || g.n() > 63 {
                return Err(CongestionError::ExhaustiveLimitExceeded {
                    n: g.n(),
                    limit: limit.min(63),
                });
            }
            densest_subset_exhaustive(g)
        }
        Method::ParametricCut => densest_subset_parametric(g),
    };
    let sub = g.subgraph(&vertices);
    let mut edges = Vec::new();
    for i in 0..vertices.len() {
        for j in i + 1..vertices.len() {
            if sub.has_edge(i, j) {
                edges.push((vertices[i], vertices[j]));
            }
        }
    }
    let value = Rat::one() - gamma.recip();
    Ok(CongestionResult {
        value,
        gamma: Some(gamma),
        witness: Some(SubgraphWitness { vertices, edges }),
    })
}

/// Maximum of |E(J)|/(|J|−1) with a vertex set attaining it. Chooses the
/// exhaustive route when it is allowed, the parametric cut otherwise.
pub fn max_density(g: &Graph) -> Result<(Rat, Vec<usize>), CongestionError> {
    if g.edge_count() == 0 {
        return Err(CongestionError::EdgelessGraph);
    }
    if g.n() <= EXHAUSTIVE_LIMIT {
        Ok(densest_subset_exhaustive(g))
    } else {
        Ok(densest_subset_parametric(g))
    }
}

/// Enumerates every vertex subset; ties broken by lexicographically smallest
/// vertex set. Caller guarantees an edge exists and n ≤ 63.
fn densest_subset_exhaustive(g: &Graph) -> (Rat, Vec<usize>) {
    let n = g.n();
    let adj: Vec<u64> = (0..n).map(|v| g.row(v)[0]).collect();
    // best = (edges, size-1, vertex list)
    let mut best: Option<(u64, u64, Vec<usize>)> = None;
    for mask in 1u64..1 << n {
        let s = mask.count_ones() as u64;
        if s < 2 {
            continue;
        }
        let mut twice_e = 0u64;
        let mut mm = mask;
        while mm != 0 {
            let v = mm.trailing_zeros() as usize;
            twice_e += (adj[v] & mask).count_ones() as u64;
            mm &= mm - 1;
        }
        let e = twice_e / 2;
        if e == 0 {
            continue;
        }
        let verts = || (0..n).filter(|&v| mask >> v & 1 == 1).collect::<Vec<_>>();
        match &mut best {
            None => best = Some((e, s - 1, verts())),
            Some((be, bs, bverts)) => {
                let lhs = e as u128 * *bs as u128;
                let rhs = *be as u128 * (s - 1) as u128;
                if lhs > rhs {
                    best = Some((e, s - 1, verts()));
                } else if lhs == rhs {
                    let v = verts();
                    if v < *bverts {
                        *be = e;
                        *bs = s - 1;
                        *bverts = v;
                    }
                }
            }
        }
    }
    let (e, s1, verts) = best.expect("graph has an edge");
    (rat(e as i64, s1 as i64), verts)
}

/// Binary search on q deciding "max density > q" with a rooted min-cut. The
/// candidate densities have denominator ≤ n−1, so distinct values differ by
/// more than 1/((n−1)(n−2)); once the bracket is narrower than that, the
/// density of the last accepting cut is exact.
fn densest_subset_parametric(g: &Graph) -> (Rat, Vec<usize>) {
    let edges = g.edges();
    let m = edges.len();
    if g.is_forest() {
        // density 1 is attained by any single edge; pick the smallest
        let (u, v) = edges[0];
        return (Rat::one(), vec![u, v]);
    }
    let n = g.n(); // ≥ 3 here: a cycle exists
    let sep = rat(1, ((n - 1) * (n - 2)) as i64);
    let mut lo = rat(1, 1);
    let mut hi = rint(m as i64);
    // invariant: gamma > lo (holds: non-forest), gamma ≤ hi, witness from decide(lo)
    let mut witness = decide_density_above(g, &edges, &lo).expect("cycle exceeds density 1");
    while &hi - &lo >= sep {
        let mid = midpoint(&lo, &hi);
        match decide_density_above(g, &edges, &mid) {
            Some(w) => {
                witness = w;
                lo = mid;
            }
            None => hi = mid,
        }
    }
    let sub = g.subgraph(&witness);
    let gamma = rat(sub.edge_count() as i64, witness.len() as i64 - 1);
    (gamma, witness)
}

/// Is there S (|S| ≥ 2) with e(S)/(|S|−1) > q? For each root r the min cut of
/// the edge-node network computes max over S containing r of b·e(S) − a(|S|−1)
/// where q = a/b; the maximum over roots is ≥ 1 iff the density exceeds q.
/// Returns the source-side vertex set of the first accepting root.
fn decide_density_above(g: &Graph, edges: &[(usize, usize)], q: &Rat) -> Option<Vec<usize>> {
    let a = q.numer().to_i128().expect("numerator fits");
    let b = q.denom().to_i128().expect("denominator fits");
    let n = g.n();
    let m = edges.len();
    let inf = b * m as i128 + a * n as i128 + 1;
    for r in 0..n {
        // nodes: 0 = source, 1 = sink, 2..2+m edge nodes, 2+m.. vertex nodes
        let vnode = |v: usize| 2 + m + v;
        let mut net = Dinic::new(2 + m + n);
        for (ei, &(u, v)) in edges.iter().enumerate() {
            net.add_edge(0, 2 + ei, b);
            net.add_edge(2 + ei, vnode(u), inf);
            net.add_edge(2 + ei, vnode(v), inf);
        }
        for v in 0..n {
            if v != r {
                net.add_edge(vnode(v), 1, a);
            }
        }
        let flow = net.max_flow(0, 1);
        if b * m as i128 - flow >= 1 {
            let reach = net.residual_reachable(0);
            let mut s: Vec<usize> = (0..n).filter(|&v| v == r || reach[vnode(v)]).collect();
            s.sort_unstable();
            return Some(s);
        }
    }
    None
}

struct Dinic {
    to: Vec<usize>,
    cap: Vec<i128>,
    head: Vec<Vec<usize>>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl Dinic {
    fn new(n: usize) -> Self {
        Dinic { to: Vec::new(), cap: Vec::new(), head: vec![Vec::new(); n], level: vec![0; n], iter: vec![0; n] }
    }

    fn add_edge(&mut self, u: usize, v: usize, c: i128) {
        let id = self.to.len();
        self.to.push(v);
        self.cap.push(c);
        self.head[u].push(id);
        self.to.push(u);
        self.cap.push(0);
        self.head[v].push(id + 1);
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &id in &self.head[v] {
                if self.cap[id] > 0 && self.level[self.to[id]] < 0 {
                    self.level[self.to[id]] = self.level[v] + 1;
                    queue.push_back(self.to[id]);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, v: usize, t: usize, f: i128) -> i128 {
        if v == t {
            return f;
        }
        while self.iter[v] < self.head[v].len() {
            let id = self.head[v][self.iter[v]];
            let u = self.to[id];
            if self.cap[id] > 0 && self.level[u] == self.level[v] + 1 {
                let d = self.dfs(u, t, f.min(self.cap[id]));
                if d > 0 {
                    self.cap[id] -= d;
                    self.cap[id ^ 1] += d;
                    return d;
                }
            }
            self.iter[v] += 1;
        }
        0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> i128 {
        let mut flow = 0;
        while self.bfs(s, t) {
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, i128::MAX);
                if f == 0 {
                    break;
                }
                flow += f;
            }
        }
        flow
    }

    fn residual_reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.head.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &id in &self.head[v] {
                let u = self.to[id];
                if self.cap[id] > 0 && !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen
    }
}
