//! Bitset-backed simple graphs: constructors, deterministic random graphs,
//! induced-embedding search, and exact pure-pair search.

use crate::exact::Rat;
use num::ToPrimitive;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

const WORD: usize = 64;

fn words_for(n: usize) -> usize {
    n.div_ceil(WORD)
}

/// Finite simple undirected graph on vertices `0..n`.
///
/// Adjacency rows are bitsets, one row per vertex; the relation is kept
/// symmetric and irreflexive by construction.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    n: usize,
    words: usize,
    rows: Vec<u64>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("budget must be positive")]
    ZeroBudget,
    #[error("parse error: {0}")]
    Parse(String),
}

impl Graph {
    pub fn new(n: usize) -> Self {
        let words = words_for(n);
        Graph { n, words, rows: vec![0; n * words] }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Graph::new(n);
        for &(u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_null(&self) -> bool {
        self.n == 0
    }

    pub fn add_edge(&mut self, u: usize, v: usize) {
        assert!(u != v, "loops are not allowed");
        assert!(u < self.n && v < self.n, "vertex out of range");
        self.rows[u * self.words + v / WORD] |= 1 << (v % WORD);
        self.rows[v * self.words + u / WORD] |= 1 << (u % WORD);
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) {
        assert!(u < self.n && v < self.n, "vertex out of range");
        self.rows[u * self.words + v / WORD] &= !(1 << (v % WORD));
        self.rows[v * self.words + u / WORD] &= !(1 << (u % WORD));
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        if u == v {
            return false;
        }
        self.rows[u * self.words + v / WORD] >> (v % WORD) & 1 == 1
    }

    pub(crate) fn row(&self, v: usize) -> &[u64] {
        &self.rows[v * self.words..(v + 1) * self.words]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.row(v).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        let total: usize = self.rows.iter().map(|w| w.count_ones() as usize).sum();
        total / 2
    }

    /// All edges `(u, v)` with `u < v`, ascending.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for u in 0..self.n {
            for v in self.neighbors(u) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Neighbors of `v`, ascending.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.degree(v));
        for (wi, &w) in self.row(v).iter().enumerate() {
            let mut w = w;
            while w != 0 {
                let b = w.trailing_zeros() as usize;
                out.push(wi * WORD + b);
                w &= w - 1;
            }
        }
        out
    }

    pub fn complement(&self) -> Graph {
        let mut g = Graph::new(self.n);
        for u in 0..self.n {
            for v in u + 1..self.n {
                if !self.has_edge(u, v) {
                    g.add_edge(u, v);
                }
            }
        }
        g
    }

    /// Induced subgraph on the given vertices, relabeled `0..k` in ascending
    /// vertex order. Input is canonicalized (sorted, deduplicated).
    pub fn subgraph(&self, vertices: &[usize]) -> Graph {
        let mut verts = vertices.to_vec();
        verts.sort_unstable();
        verts.dedup();
        assert!(verts.iter().all(|&v| v < self.n), "vertex out of range");
        let mut g = Graph::new(verts.len());
        for i in 0..verts.len() {
            for j in i + 1..verts.len() {
                if self.has_edge(verts[i], verts[j]) {
                    g.add_edge(i, j);
                }
            }
        }
        g
    }

    /// Graph with vertex `v` deleted and the rest relabeled in order.
    pub fn delete_vertex(&self, v: usize) -> Graph {
        let keep: Vec<usize> = (0..self.n).filter(|&u| u != v).collect();
        self.subgraph(&keep)
    }

    /// Connected components as ascending vertex lists, ordered by minimum vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            let mut comp = vec![s];
            seen[s] = true;
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for u in self.neighbors(v) {
                    if !seen[u] {
                        seen[u] = true;
                        comp.push(u);
                        stack.push(u);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// True iff the graph has no cycle.
    pub fn is_forest(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut v: usize) -> usize {
            while parent[v] != v {
                parent[v] = parent[parent[v]];
                v = parent[v];
            }
            v
        }
        for (u, v) in self.edges() {
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            if ru == rv {
                return false;
            }
            parent[ru] = rv;
        }
        true
    }

    /// Order-independent 64-bit fingerprint of the labeled graph.
    pub fn fingerprint(&self) -> u64 {
        let mut h = mix(0x9e37_79b9_7f4a_7c15, self.n as u64);
        for (u, v) in self.edges() {
            h = mix(h, (u as u64) << 32 | v as u64);
        }
        h
    }

    // ----- named constructors -----

    /// Path with `n` vertices (`n - 1` edges).
    pub fn path(n: usize) -> Graph {
        let mut g = Graph::new(n);
        for v in 1..n {
            g.add_edge(v - 1, v);
        }
        g
    }

    /// Cycle with `n ≥ 3` vertices.
    pub fn cycle(n: usize) -> Graph {
        assert!(n >= 3, "cycles need at least 3 vertices");
        let mut g = Graph::path(n);
        g.add_edge(n - 1, 0);
        g
    }

    pub fn complete(n: usize) -> Graph {
        Graph::new(n).complement()
    }

    pub fn edgeless(n: usize) -> Graph {
        Graph::new(n)
    }

    /// Complete bipartite graph with sides `0..a` and `a..a+b`.
    pub fn complete_bipartite(a: usize, b: usize) -> Graph {
        let mut g = Graph::new(a + b);
        for u in 0..a {
            for v in a..a + b {
                g.add_edge(u, v);
            }
        }
        g
    }

    /// Petersen graph: outer cycle 0-4, inner pentagram 5-9, spokes i-(i+5).
    pub fn petersen() -> Graph {
        let mut g = Graph::new(10);
        for i in 0..5 {
            g.add_edge(i, (i + 1) % 5);
            g.add_edge(5 + i, 5 + (i + 2) % 5);
            g.add_edge(i, i + 5);
        }
        g
    }

    /// Named constructor lookup: `p4`, `c5`, `k6`, `k3,3`, `e7`, `petersen`.
    pub fn named(name: &str) -> Result<Graph, GraphError> {
        let s = name.trim().to_ascii_lowercase();
        let bad = || GraphError::Parse(format!("unknown graph name {name:?}"));
        if s == "petersen" {
            return Ok(Graph::petersen());
        }
        let (kind, rest) = s.split_at(1);
        let parse_n = |t: &str| t.parse::<usize>().map_err(|_| bad());
        match kind {
            "p" => Ok(Graph::path(parse_n(rest)?)),
            "c" => {
                let n = parse_n(rest)?;
                if n < 3 {
                    return Err(bad());
                }
                Ok(Graph::cycle(n))
            }
            "e" => Ok(Graph::edgeless(parse_n(rest)?)),
            "k" => {
                if let Some((a, b)) = rest.split_once(',') {
                    Ok(Graph::complete_bipartite(parse_n(a)?, parse_n(b)?))
                } else {
                    Ok(Graph::complete(parse_n(rest)?))
                }
            }
            _ => Err(bad()),
        }
    }

    // ----- text formats -----

    /// Parses "n m" followed by m lines "u v" (0-based).
    pub fn parse_edge_list(text: &str) -> Result<Graph, GraphError> {
        let mut tokens = text.split_whitespace();
        let mut next_num = |what: &str| -> Result<usize, GraphError> {
            tokens
                .next()
                .ok_or_else(|| GraphError::Parse(format!("missing {what}")))?
                .parse()
                .map_err(|_| GraphError::Parse(format!("bad {what}")))
        };
        let n = next_num("vertex count")?;
        let m = next_num("edge count")?;
        let mut g = Graph::new(n);
        for k in 0..m {
            let u = next_num("endpoint")?;
            let v = next_num("endpoint")?;
            if u == v || u >= n || v >= n {
                return Err(GraphError::Parse(format!("bad edge {u} {v}")));
            }
            if g.has_edge(u, v) {
                return Err(GraphError::Parse(format!("duplicate edge {u} {v} (line {})", k + 2)));
            }
            g.add_edge(u, v);
        }
        if tokens.next().is_some() {
            return Err(GraphError::Parse("trailing tokens".into()));
        }
        Ok(g)
    }

    pub fn to_edge_list(&self) -> String {
        let edges = self.edges();
        let mut out = format!("{} {}\n", self.n, edges.len());
        for (u, v) in edges {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }

    /// Parses the graph6 format for n ≤ 62.
    pub fn parse_graph6(s: &str) -> Result<Graph, GraphError> {
        let bytes = s.trim().as_bytes();
        let err = |m: &str| GraphError::Parse(format!("graph6: {m}"));
        if bytes.is_empty() {
            return Err(err("empty"));
        }
        if !(63..=125).contains(&bytes[0]) {
            return Err(err("unsupported header"));
        }
        let n = (bytes[0] - 63) as usize;
        if n >= 63 {
            return Err(err("only n <= 62 supported"));
        }
        let needed = (n * (n - 1) / 2).div_ceil(6);
        if bytes.len() != 1 + needed {
            return Err(err("wrong length"));
        }
        let mut g = Graph::new(n);
        let mut bit = 0usize;
        for v in 1..n {
            for u in 0..v {
                let byte = bytes[1 + bit / 6];
                if !(63..=126).contains(&byte) {
                    return Err(err("bad byte"));
                }
                if (byte - 63) >> (5 - bit % 6) & 1 == 1 {
                    g.add_edge(u, v);
                }
                bit += 1;
            }
        }
        Ok(g)
    }

    // ----- random graphs -----

    /// G(n, p) with exact rational p, deterministic in `seed`. Each unordered
    /// pair is decided by a counter-based generator keyed on (seed, pair
    /// index), so the result is independent of iteration order.
    pub fn gnp(n: usize, p: &Rat, seed: u64) -> Graph {
        assert!(*p >= crate::exact::zero() && *p <= crate::exact::one(), "p out of [0,1]");
        let scale = Rat::from(num::BigInt::from(1u128 << 64));
        let threshold: u128 = (p * scale).round().to_integer().to_u128().expect("threshold fits");
        let mut g = Graph::new(n);
        let mut idx = 0u64;
        for v in 1..n {
            for u in 0..v {
                let value = mix(seed, idx) as u128;
                if value < threshold {
                    g.add_edge(u, v);
                }
                idx += 1;
            }
        }
        g
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(n={}, edges={:?})", self.n, self.edges())
    }
}

/// Serde adapter keeping graphs as edge-list strings in config files.
pub mod edge_list_string {
    use super::Graph;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(g: &Graph, s: S) -> Result<S::Ok, S::Error> {
        g.to_edge_list().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Graph, D::Error> {
        let text = String::deserialize(d)?;
        Graph::parse_edge_list(&text).map_err(serde::de::Error::custom)
    }
}

/// splitmix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic 64-bit mix of a seed and a counter; used for pair sampling,
/// per-trial seed derivation, and fingerprints.
pub fn mix(seed: u64, k: u64) -> u64 {
    splitmix64(seed ^ splitmix64(k))
}

// ----- embeddings and pure pairs -----

/// Injective map from pattern vertices to host vertices preserving adjacency
/// in both directions (induced).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    pub map: Vec<usize>,
}

impl Embedding {
    /// Re-checks injectivity, range, and induced adjacency from scratch.
    pub fn verify(&self, host: &Graph, pattern: &Graph) -> bool {
        if self.map.len() != pattern.n() {
            return false;
        }
        if self.map.iter().any(|&v| v >= host.n()) {
            return false;
        }
        let mut sorted = self.map.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.map.len() {
            return false;
        }
        for i in 0..self.map.len() {
            for j in i + 1..self.map.len() {
                if host.has_edge(self.map[i], self.map[j]) != pattern.has_edge(i, j) {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    Complete,
    Anticomplete,
}

/// Disjoint nonempty vertex sets that are complete or anticomplete to each other.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PurePair {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub kind: PairKind,
}

impl PurePair {
    /// Re-checks disjointness, nonemptiness, and the claimed kind from scratch.
    pub fn verify(&self, g: &Graph) -> bool {
        if self.a.is_empty() || self.b.is_empty() {
            return false;
        }
        if self.a.iter().chain(&self.b).any(|&v| v >= g.n()) {
            return false;
        }
        let mut all: Vec<usize> = self.a.iter().chain(&self.b).copied().collect();
        all.sort_unstable();
        all.dedup();
        if all.len() != self.a.len() + self.b.len() {
            return false;
        }
        let want = matches!(self.kind, PairKind::Complete);
        self.a.iter().all(|&u| self.b.iter().all(|&v| g.has_edge(u, v) == want))
    }
}

/// Outcome of an exact bounded search: a witness, a proof of absence (the
/// search space was exhausted), or budget exhaustion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Search<T> {
    Found(T),
    Absent,
    Inconclusive,
}

impl<T> Search<T> {
    pub fn found(&self) -> Option<&T> {
        match self {
            Search::Found(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_absent(&self) -> bool {
        matches!(self, Search::Absent)
    }
}

impl Graph {
    /// True iff every vertex has degree < eps·n, compared exactly.
    pub fn is_sparse(&self, eps: &Rat) -> bool {
        assert!(*eps > crate::exact::zero(), "eps must be positive");
        let bound = eps * Rat::from(num::BigInt::from(self.n));
        (0..self.n).all(|v| Rat::from(num::BigInt::from(self.degree(v))) < bound)
    }

    /// First induced embedding of `h` in lexicographic map order, if any.
    pub fn contains(&self, h: &Graph) -> Option<Embedding> {
        if h.n() > self.n {
            return None;
        }
        let mut map = Vec::with_capacity(h.n());
        let mut used = vec![false; self.n];
        if self.extend_embedding(h, &mut map, &mut used) {
            Some(Embedding { map })
        } else {
            None
        }
    }

    fn extend_embedding(&self, h: &Graph, map: &mut Vec<usize>, used: &mut [bool]) -> bool {
        let k = map.len();
        if k == h.n() {
            return true;
        }
        'cand: for cand in 0..self.n {
            if used[cand] {
                continue;
            }
            for j in 0..k {
                if self.has_edge(map[j], cand) != h.has_edge(j, k) {
                    continue 'cand;
                }
            }
            map.push(cand);
            used[cand] = true;
            if self.extend_embedding(h, map, used) {
                return true;
            }
            map.pop();
            used[cand] = false;
        }
        false
    }

    /// Exact bounded search for an anticomplete pair with `|a| ≥ a_min`,
    /// `|b| ≥ b_min`. `Absent` is returned only when the search space was
    /// exhausted within budget.
    pub fn find_anticomplete_pair(
        &self,
        a_min: usize,
        b_min: usize,
        budget: u64,
    ) -> Result<Search<PurePair>, GraphError> {
        assert!(a_min >= 1 && b_min >= 1, "side minima must be positive");
        if budget == 0 {
            return Err(GraphError::ZeroBudget);
        }
        // Enumerating the smaller side X at exactly its minimum size is
        // complete: Y may be anything outside X ∪ N(X).
        let swap = a_min > b_min;
        let (x_min, y_min) = if swap { (b_min, a_min) } else { (a_min, b_min) };
        let outcome = self.anticomplete_fixed_side(x_min, y_min, budget);
        Ok(match outcome {
            Search::Found((x, y)) => {
                let (a, b) = if swap { (y, x) } else { (x, y) };
                Search::Found(PurePair { a, b, kind: PairKind::Anticomplete })
            }
            Search::Absent => Search::Absent,
            Search::Inconclusive => Search::Inconclusive,
        })
    }

    fn anticomplete_fixed_side(
        &self,
        x_min: usize,
        y_min: usize,
        budget: u64,
    ) -> Search<(Vec<usize>, Vec<usize>)> {
        if x_min + y_min > self.n {
            return Search::Absent;
        }
        // blocked = X ∪ N(X), maintained per depth; it only grows, so running
        // out of free vertices prunes the whole subtree.
        let mut blocked = vec![vec![0u64; self.words.max(1)]; x_min + 1];
        let mut chosen = Vec::with_capacity(x_min);
        let mut nodes = 0u64;
        self.anticomplete_rec(x_min, y_min, 0, &mut chosen, &mut blocked, &mut nodes, budget)
    }

    #[allow(clippy::too_many_arguments)]
    fn anticomplete_rec(
        &self,
        x_min: usize,
        y_min: usize,
        start: usize,
        chosen: &mut Vec<usize>,
        blocked: &mut [Vec<u64>],
        nodes: &mut u64,
        budget: u64,
    ) -> Search<(Vec<usize>, Vec<usize>)> {
        let depth = chosen.len();
        if depth == x_min {
            let free = self.free_vertices(&blocked[depth], y_min);
            if free.len() >= y_min {
                return Search::Found((chosen.clone(), free));
            }
            return Search::Absent;
        }
        for v in start..self.n {
            if self.n - v < x_min - depth {
                break;
            }
            *nodes += 1;
            if *nodes > budget {
                return Search::Inconclusive;
            }
            let (lo, hi) = blocked.split_at_mut(depth + 1);
            let next = &mut hi[0];
            next.copy_from_slice(&lo[depth]);
            for (w, r) in next.iter_mut().zip(self.row(v)) {
                *w |= r;
            }
            next[v / WORD] |= 1 << (v % WORD);
            // trailing bits past n stay zero, so popcount is exact
            let blocked_count: usize = next.iter().map(|w| w.count_ones() as usize).sum();
            if self.n - blocked_count < y_min {
                continue;
            }
            chosen.push(v);
            match self.anticomplete_rec(x_min, y_min, v + 1, chosen, blocked, nodes, budget) {
                Search::Found(p) => return Search::Found(p),
                Search::Inconclusive => return Search::Inconclusive,
                Search::Absent => {}
            }
            chosen.pop();
        }
        Search::Absent
    }

    fn free_vertices(&self, blocked: &[u64], limit: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(limit);
        for v in 0..self.n {
            if blocked[v / WORD] >> (v % WORD) & 1 == 0 {
                out.push(v);
                if out.len() == limit {
                    break;
                }
            }
        }
        out
    }

    /// Pure pair with both sides ≥ t: anticomplete search on the graph, then
    /// on the complement (a complete pair is anticomplete there).
    pub fn find_pure_pair(&self, t: usize, budget: u64) -> Result<Search<PurePair>, GraphError> {
        let anti = self.find_anticomplete_pair(t, t, budget)?;
        if let Search::Found(p) = anti {
            return Ok(Search::Found(p));
        }
        let comp = self.complement().find_anticomplete_pair(t, t, budget)?;
        Ok(match comp {
            Search::Found(p) => Search::Found(PurePair { kind: PairKind::Complete, ..p }),
            Search::Absent if anti.is_absent() => Search::Absent,
            _ => Search::Inconclusive,
        })
    }
}
