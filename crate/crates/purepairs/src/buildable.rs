//! Branch decompositions and constructive certificates for weak and strong
//! β-buildability.
//!
//! A build starts from the null graph (weak mode) or two isolated base
//! vertices (strong mode) and grows by two moves: adding a subleaf (a new
//! vertex of degree ≤ 1) and adding a handle (a new induced path of length
//! ≥ β whose interior is fresh and whose ends are existing nonadjacent
//! vertices). Since neither move ever creates an edge between two existing
//! vertices, peeling moves in reverse order is sound, and the searches below
//! enumerate exactly the reverse moves.

use crate::congestion::{congestion, Method, SubgraphWitness, EXHAUSTIVE_LIMIT};
use crate::exact::{floor_int, rat, Rat};
use crate::graph::Graph;
use num::ToPrimitive;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

/// Vertex-count ceiling for the exhaustive weak-certificate search.
pub const WEAK_SEARCH_LIMIT: usize = 14;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BuildError {
    #[error("exhaustive certificate search limited to {limit} vertices, graph has {n}")]
    LimitExceeded { n: usize, limit: usize },
    #[error("xi must lie in (0, 1/3]")]
    XiOutOfRange,
    #[error("graph is null")]
    NullGraph,
    #[error("congestion {congestion} exceeds the bound")]
    CongestionTooLarge { congestion: Rat, witness: SubgraphWitness },
    #[error("peeling stuck with {} vertices left", remaining.len())]
    PeelStuck { remaining: Vec<usize> },
    #[error("no weak certificate exists")]
    NoWeakCertificate,
    #[error("bad certificate: {0}")]
    BadCertificate(String),
    #[error("step {index} invalid: {reason}")]
    InvalidStep { index: usize, reason: String },
    #[error("internal re-verification failed: {0}")]
    Internal(String),
}

/// One branch of the edge partition: a path whose interior has degree 2 and
/// whose distinct ends have degree ≠ 2, or a cycle with at most one vertex of
/// degree ≠ 2 (the anchor).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Branch {
    Path { ends: (usize, usize), interior: Vec<usize> },
    Cycle { anchor: Option<usize>, vertices: Vec<usize> },
}

impl Branch {
    /// Number of edges in the branch.
    pub fn length(&self) -> usize {
        match self {
            Branch::Path { interior, .. } => interior.len() + 1,
            Branch::Cycle { vertices, .. } => vertices.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchDecomposition {
    pub branches: Vec<Branch>,
}

impl BranchDecomposition {
    /// Every edge of `g` lies in exactly one branch.
    pub fn verify(&self, g: &Graph) -> bool {
        let mut seen = HashSet::new();
        for b in &self.branches {
            let path: Vec<usize> = match b {
                Branch::Path { ends, interior } => {
                    let mut p = vec![ends.0];
                    p.extend(interior);
                    p.push(ends.1);
                    p
                }
                Branch::Cycle { vertices, .. } => {
                    let mut p = vertices.clone();
                    p.push(vertices[0]);
                    p
                }
            };
            for w in path.windows(2) {
                if !g.has_edge(w[0], w[1]) {
                    return false;
                }
                if !seen.insert((w[0].min(w[1]), w[0].max(w[1]))) {
                    return false;
                }
            }
        }
        seen.len() == g.edge_count()
    }
}

/// Partition of the edges into branches.
pub fn branches(g: &Graph) -> BranchDecomposition {
    let n = g.n();
    let deg: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let norm = |u: usize, v: usize| (u.min(v), u.max(v));
    let mut out = Vec::new();
    // walks leaving each degree-≠2 vertex
    for w in 0..n {
        if deg[w] == 2 {
            continue;
        }
        for x0 in g.neighbors(w) {
            if seen.contains(&norm(w, x0)) {
                continue;
            }
            let mut interior = Vec::new();
            let mut prev = w;
            let mut cur = x0;
            while deg[cur] == 2 {
                interior.push(cur);
                let nb = g.neighbors(cur);
                let next = if nb[0] == prev { nb[1] } else { nb[0] };
                prev = cur;
                cur = next;
            }
            seen.insert(norm(w, x0));
            for pair in interior.windows(2) {
                seen.insert(norm(pair[0], pair[1]));
            }
            if let Some(&last) = interior.last() {
                seen.insert(norm(last, cur));
            }
            if cur == w {
                let mut vertices = vec![w];
                vertices.extend(interior);
                out.push(Branch::Cycle { anchor: Some(w), vertices });
            } else {
                let (ends, interior) = if w <= cur {
                    ((w, cur), interior)
                } else {
                    ((cur, w), interior.into_iter().rev().collect())
                };
                out.push(Branch::Path { ends, interior });
            }
        }
    }
    // components where every vertex has degree 2 are chordless cycles
    for v in 0..n {
        if deg[v] != 2 {
            continue;
        }
        let first = g.neighbors(v)[0];
        if seen.contains(&norm(v, first)) {
            continue;
        }
        let mut vertices = vec![v];
        let mut prev = v;
        let mut cur = first;
        while cur != v {
            vertices.push(cur);
            let nb = g.neighbors(cur);
            let next = if nb[0] == prev { nb[1] } else { nb[0] };
            prev = cur;
            cur = next;
        }
        for i in 0..vertices.len() {
            seen.insert(norm(vertices[i], vertices[(i + 1) % vertices.len()]));
        }
        out.push(Branch::Cycle { anchor: None, vertices });
    }
    BranchDecomposition { branches: out }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildMode {
    Weak,
    Strong,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BuildStep {
    /// New vertex of degree ≤ 1, optionally attached to an existing vertex.
    Subleaf { vertex: usize, attach: Option<usize> },
    /// New induced path end1 – interior… – end2; interior vertices are fresh,
    /// ends exist already and are nonadjacent.
    Handle { end1: usize, end2: usize, interior: Vec<usize> },
}

impl BuildStep {
    /// Edge count of the step (1 for a subleaf with an attachment).
    pub fn length(&self) -> usize {
        match self {
            BuildStep::Subleaf { attach, .. } => usize::from(attach.is_some()),
            BuildStep::Handle { interior, .. } => interior.len() + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildCertificate {
    pub beta: usize,
    pub mode: BuildMode,
    pub steps: Vec<BuildStep>,
}

/// Replays a certificate from its base graph, validating every step; the
/// result carries the exact labels recorded in the steps.
pub fn replay(cert: &BuildCertificate) -> Result<Graph, BuildError> {
    if cert.beta < 2 {
        return Err(BuildError::BadCertificate("beta must be at least 2".into()));
    }
    let base = match cert.mode {
        BuildMode::Weak => 0,
        BuildMode::Strong => 2,
    };
    let mut max_label = base;
    for step in &cert.steps {
        match step {
            BuildStep::Subleaf { vertex, attach } => {
                max_label = max_label.max(vertex + 1).max(attach.map_or(0, |u| u + 1));
            }
            BuildStep::Handle { end1, end2, interior } => {
                max_label = max_label.max(end1 + 1).max(end2 + 1);
                max_label = max_label.max(interior.iter().map(|x| x + 1).max().unwrap_or(0));
            }
        }
    }
    let mut g = Graph::new(max_label);
    let mut present = vec![false; max_label];
    for b in 0..base {
        present[b] = true;
    }
    let fail = |index: usize, reason: &str| BuildError::InvalidStep { index, reason: reason.into() };
    for (i, step) in cert.steps.iter().enumerate() {
        match step {
            BuildStep::Subleaf { vertex, attach } => {
                if matches!(cert.mode, BuildMode::Strong) {
                    return Err(fail(i, "subleaf step in a strong certificate"));
                }
                if present[*vertex] {
                    return Err(fail(i, "subleaf vertex already present"));
                }
                if let Some(u) = attach {
                    if !present[*u] {
                        return Err(fail(i, "attachment vertex missing"));
                    }
                    present[*vertex] = true;
                    g.add_edge(*vertex, *u);
                } else {
                    present[*vertex] = true;
                }
            }
            BuildStep::Handle { end1, end2, interior } => {
                if interior.len() + 1 < cert.beta {
                    return Err(fail(i, "handle shorter than beta"));
                }
                if end1 == end2 || !present[*end1] || !present[*end2] {
                    return Err(fail(i, "handle ends must be distinct existing vertices"));
                }
                if g.has_edge(*end1, *end2) {
                    return Err(fail(i, "handle ends are adjacent"));
                }
                for x in interior {
                    if present[*x] {
                        return Err(fail(i, "interior vertex already present"));
                    }
                    present[*x] = true;
                }
                let mut prev = *end1;
                for &x in interior {
                    g.add_edge(prev, x);
                    prev = x;
                }
                g.add_edge(prev, *end2);
            }
        }
    }
    if let Some(v) = (0..max_label).find(|&v| !present[v]) {
        return Err(BuildError::BadCertificate(format!("vertex {v} never added")));
    }
    Ok(g)
}

// ----- reverse-move enumeration -----

/// Maximal run of degree-2 vertices: an open chain with its two outer
/// attachment vertices, or a full chordless cycle.
enum Run {
    Chain { left: usize, verts: Vec<usize>, right: usize },
    Loop { verts: Vec<usize> },
}

fn collect_runs(g: &Graph) -> Vec<Run> {
    let n = g.n();
    let deg: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let mut visited = vec![false; n];
    let mut runs = Vec::new();
    for s in 0..n {
        if deg[s] != 2 || visited[s] {
            continue;
        }
        visited[s] = true;
        let nbs = g.neighbors(s);
        let mut right = Vec::new();
        let mut prev = s;
        let mut cur = nbs[0];
        let mut closed = false;
        while deg[cur] == 2 {
            if cur == s {
                closed = true;
                break;
            }
            visited[cur] = true;
            right.push(cur);
            let nb = g.neighbors(cur);
            let next = if nb[0] == prev { nb[1] } else { nb[0] };
            prev = cur;
            cur = next;
        }
        if closed {
            // neighbors are ascending, so starting toward nbs[0] is canonical
            let mut verts = vec![s];
            verts.extend(right);
            runs.push(Run::Loop { verts });
            continue;
        }
        let outer_right = cur;
        let mut left = Vec::new();
        prev = s;
        cur = nbs[1];
        while deg[cur] == 2 {
            visited[cur] = true;
            left.push(cur);
            let nb = g.neighbors(cur);
            let next = if nb[0] == prev { nb[1] } else { nb[0] };
            prev = cur;
            cur = next;
        }
        let outer_left = cur;
        let mut verts: Vec<usize> = left.into_iter().rev().collect();
        verts.push(s);
        verts.extend(right);
        let (mut l, mut r) = (outer_left, outer_right);
        if verts[0] > verts[verts.len() - 1] || (verts.len() == 1 && l > r) {
            verts.reverse();
            std::mem::swap(&mut l, &mut r);
        }
        runs.push(Run::Chain { left: l, verts, right: r });
    }
    runs
}

/// All reverse-handle moves: (end1, end2, interior) where the interior is a
/// degree-2 window of length ≥ beta−1 and the ends are distinct, present, and
/// nonadjacent. Sorted longest first, then by interior, then ends.
fn handle_moves(g: &Graph, beta: usize) -> Vec<(usize, usize, Vec<usize>)> {
    let mut out = Vec::new();
    let mut push = |mut e1: usize, mut e2: usize, mut interior: Vec<usize>| {
        if e2 < e1 {
            std::mem::swap(&mut e1, &mut e2);
            interior.reverse();
        }
        out.push((e1, e2, interior));
    };
    for run in collect_runs(g) {
        match run {
            Run::Chain { left, verts, right } => {
                let t = verts.len();
                for i in 0..t {
                    for j in i..t {
                        if j - i + 2 < beta {
                            continue;
                        }
                        let e1 = if i == 0 { left } else { verts[i - 1] };
                        let e2 = if j == t - 1 { right } else { verts[j + 1] };
                        if e1 == e2 || g.has_edge(e1, e2) {
                            continue;
                        }
                        push(e1, e2, verts[i..=j].to_vec());
                    }
                }
            }
            Run::Loop { verts } => {
                let l = verts.len();
                for k in 1..=l.saturating_sub(3) {
                    if k + 1 < beta {
                        continue;
                    }
                    for start in 0..l {
                        let interior: Vec<usize> = (0..k).map(|d| verts[(start + d) % l]).collect();
                        let e1 = verts[(start + l - 1) % l];
                        let e2 = verts[(start + k) % l];
                        if e1 == e2 || g.has_edge(e1, e2) {
                            continue;
                        }
                        push(e1, e2, interior);
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| {
        b.2.len().cmp(&a.2.len()).then_with(|| a.2.cmp(&b.2)).then_with(|| (a.0, a.1).cmp(&(b.0, b.1)))
    });
    out
}

// ----- exhaustive weak-certificate search -----

/// Exhaustive search for a weak β-build of `h`, memoized on the set of
/// remaining vertices. `Ok(None)` proves no certificate exists.
pub fn weak_certificate(h: &Graph, beta: usize) -> Result<Option<BuildCertificate>, BuildError> {
    weak_certificate_with_limit(h, beta, WEAK_SEARCH_LIMIT)
}

pub fn weak_certificate_with_limit(
    h: &Graph,
    beta: usize,
    limit: usize,
) -> Result<Option<BuildCertificate>, BuildError> {
    assert!(beta >= 2, "beta must be at least 2");
    if h.n() > limit || h.n() > 63 {
        return Err(BuildError::LimitExceeded { n: h.n(), limit: limit.min(63) });
    }
    let full: u64 = if h.n() == 0 { 0 } else { (1u64 << h.n()) - 1 };
    let mut failed: HashSet<u64> = HashSet::new();
    let mut steps: Vec<BuildStep> = Vec::new();
    if peel_search(h, beta, full, &mut steps, &mut failed) {
        steps.reverse();
        let cert = BuildCertificate { beta, mode: BuildMode::Weak, steps };
        debug_assert_eq!(replay(&cert).as_ref(), Ok(h));
        Ok(Some(cert))
    } else {
        Ok(None)
    }
}

fn peel_search(
    h: &Graph,
    beta: usize,
    mask: u64,
    steps: &mut Vec<BuildStep>,
    failed: &mut HashSet<u64>,
) -> bool {
    if mask == 0 {
        return true;
    }
    if failed.contains(&mask) {
        return false;
    }
    let labels: Vec<usize> = (0..h.n()).filter(|&v| mask >> v & 1 == 1).collect();
    let sub = h.subgraph(&labels);
    for (sv, &orig) in labels.iter().enumerate() {
        if sub.degree(sv) > 1 {
            continue;
        }
        let attach = sub.neighbors(sv).first().map(|&u| labels[u]);
        steps.push(BuildStep::Subleaf { vertex: orig, attach });
        if peel_search(h, beta, mask & !(1 << orig), steps, failed) {
            return true;
        }
        steps.pop();
    }
    for (e1, e2, interior) in handle_moves(&sub, beta) {
        let mut next = mask;
        for &x in &interior {
            next &= !(1 << labels[x]);
        }
        steps.push(BuildStep::Handle {
            end1: labels[e1],
            end2: labels[e2],
            interior: interior.iter().map(|&x| labels[x]).collect(),
        });
        if peel_search(h, beta, next, steps, failed) {
            return true;
        }
        steps.pop();
    }
    failed.insert(mask);
    false
}

// ----- constructive peeling under a congestion bound -----

/// Weak certificate built by direct peeling: subleaves first, otherwise the
/// longest removable handle derived from the branch decomposition (a branch
/// is trimmed by one vertex when its ends are adjacent or coincide, so the
/// removed path always has nonadjacent ends). beta = floor(1/(3·xi)) + 1.
pub fn longbranch_witness(h: &Graph, xi: &Rat) -> Result<BuildCertificate, BuildError> {
    if h.is_null() {
        return Err(BuildError::NullGraph);
    }
    if *xi <= rat(0, 1) || *xi > rat(1, 3) {
        return Err(BuildError::XiOutOfRange);
    }
    let method =
        if h.n() <= EXHAUSTIVE_LIMIT { Method::Exhaustive } else { Method::ParametricCut };
    let result = congestion(h, method).expect("method fits graph");
    if result.value > *xi {
        return Err(BuildError::CongestionTooLarge {
            congestion: result.value,
            witness: result.witness.expect("positive congestion has a witness"),
        });
    }
    let beta = (floor_int(&(rat(1, 1) / (rat(3, 1) * xi))).to_usize().expect("beta fits")) + 1;

    let mut alive: Vec<usize> = (0..h.n()).collect();
    let mut steps = Vec::new();
    while !alive.is_empty() {
        let sub = h.subgraph(&alive);
        let labels = alive.clone();
        if let Some(sv) = (0..sub.n()).find(|&v| sub.degree(v) <= 1) {
            let orig = labels[sv];
            let attach = sub.neighbors(sv).first().map(|&u| labels[u]);
            steps.push(BuildStep::Subleaf { vertex: orig, attach });
            alive.retain(|&v| v != orig);
            continue;
        }
        // candidates: (length, interior in original labels, end1, end2)
        let mut cand: Vec<(usize, Vec<usize>, usize, usize)> = Vec::new();
        for b in branches(&sub).branches {
            let c = match b {
                Branch::Path { ends, interior } => {
                    if !sub.has_edge(ends.0, ends.1) {
                        Some((interior.len() + 1, interior, ends.0, ends.1))
                    } else if interior.len() >= 2 {
                        let k = interior.len();
                        Some((k, interior[..k - 1].to_vec(), ends.0, interior[k - 1]))
                    } else {
                        None
                    }
                }
                Branch::Cycle { anchor: Some(_), vertices } => {
                    let l = vertices.len();
                    if l >= 4 {
                        Some((l - 2, vertices[2..l - 1].to_vec(), vertices[1], vertices[l - 1]))
                    } else {
                        None
                    }
                }
                Branch::Cycle { anchor: None, vertices } => {
                    let l = vertices.len();
                    if l >= 4 {
                        Some((l - 2, vertices[1..l - 2].to_vec(), vertices[0], vertices[l - 2]))
                    } else {
                        None
                    }
                }
            };
            if let Some((len, interior, e1, e2)) = c {
                if len >= beta {
                    let interior: Vec<usize> = interior.iter().map(|&x| labels[x]).collect();
                    let (mut a, mut b2) = (labels[e1], labels[e2]);
                    let mut interior = interior;
                    if b2 < a {
                        std::mem::swap(&mut a, &mut b2);
                        interior.reverse();
                    }
                    cand.push((len, interior, a, b2));
                }
            }
        }
        cand.sort_by(|x, y| y.0.cmp(&x.0).then_with(|| x.1.cmp(&y.1)));
        let Some((_, interior, e1, e2)) = cand.into_iter().next() else {
            return Err(BuildError::PeelStuck { remaining: alive });
        };
        alive.retain(|v| !interior.contains(v));
        steps.push(BuildStep::Handle { end1: e1, end2: e2, interior });
    }
    steps.reverse();
    let cert = BuildCertificate { beta, mode: BuildMode::Weak, steps };
    let rebuilt = replay(&cert)?;
    if &rebuilt != h {
        return Err(BuildError::Internal("peeling certificate does not replay to input".into()));
    }
    Ok(cert)
}

// ----- embedding into a strongly buildable host -----

#[derive(Debug, Clone)]
pub struct EmbedOutcome {
    pub host: Graph,
    pub cert: BuildCertificate,
    pub embedding: crate::graph::Embedding,
}

struct HostBuilder {
    adj: Vec<std::collections::BTreeSet<usize>>,
}

impl HostBuilder {
    fn new() -> Self {
        HostBuilder { adj: vec![Default::default(), Default::default()] }
    }

    fn n(&self) -> usize {
        self.adj.len()
    }

    fn fresh(&mut self) -> usize {
        self.adj.push(Default::default());
        self.adj.len() - 1
    }

    fn add_edge(&mut self, u: usize, v: usize) {
        self.adj[u].insert(v);
        self.adj[v].insert(u);
    }

    fn adjacent(&self, u: usize, v: usize) -> bool {
        self.adj[u].contains(&v)
    }

    fn add_path(&mut self, end1: usize, interior: &[usize], end2: usize) {
        let mut prev = end1;
        for &x in interior {
            self.add_edge(prev, x);
            prev = x;
        }
        self.add_edge(prev, end2);
    }

    fn graph(&self) -> Graph {
        let mut g = Graph::new(self.n());
        for (u, nbs) in self.adj.iter().enumerate() {
            for &v in nbs {
                if u < v {
                    g.add_edge(u, v);
                }
            }
        }
        g
    }
}

/// Builds a strongly β-buildable host containing `h` as an induced subgraph.
///
/// The weak certificate of `h` is transferred step by step: handles are
/// copied verbatim between embedded ends; an attached subleaf becomes the
/// first interior vertex of a fresh handle of length max(4, β) from its
/// attachment to a nonadjacent host vertex; an isolated subleaf claims an
/// unused base vertex when one is left (base vertices never become adjacent
/// to embedded vertices) and otherwise rides the second interior slot of a
/// fresh handle between the base vertices.
pub fn embed_in_buildable(h: &Graph, beta: usize) -> Result<EmbedOutcome, BuildError> {
    let weak = weak_certificate(h, beta)?.ok_or(BuildError::NoWeakCertificate)?;
    let hl = beta.max(4); // replacement handle length
    let mut host = HostBuilder::new();
    let mut claimed = [false, false];
    let mut emb: Vec<Option<usize>> = vec![None; h.n()];
    let mut steps: Vec<BuildStep> = Vec::new();

    for step in &weak.steps {
        match step {
            BuildStep::Handle { end1, end2, interior } => {
                let e1 = emb[*end1].expect("handle end embedded");
                let e2 = emb[*end2].expect("handle end embedded");
                let ivs: Vec<usize> = interior
                    .iter()
                    .map(|&hv| {
                        let x = host.fresh();
                        emb[hv] = Some(x);
                        x
                    })
                    .collect();
                host.add_path(e1, &ivs, e2);
                steps.push(BuildStep::Handle { end1: e1, end2: e2, interior: ivs });
            }
            BuildStep::Subleaf { vertex, attach: Some(u) } => {
                let eu = emb[*u].expect("attachment embedded");
                let mut partner = (0..host.n()).find(|&x| x != eu && !host.adjacent(eu, x));
                if partner.is_none() {
                    // base vertices are never adjacent: room for a spacer
                    let pads: Vec<usize> = (0..hl - 1).map(|_| host.fresh()).collect();
                    host.add_path(0, &pads, 1);
                    steps.push(BuildStep::Handle { end1: 0, end2: 1, interior: pads });
                    partner = (0..host.n()).find(|&x| x != eu && !host.adjacent(eu, x));
                }
                let partner = partner.expect("spacer guarantees a nonadjacent vertex");
                let img = host.fresh();
                emb[*vertex] = Some(img);
                let mut interior = vec![img];
                interior.extend((0..hl - 2).map(|_| host.fresh()));
                host.add_path(eu, &interior, partner);
                steps.push(BuildStep::Handle { end1: eu, end2: partner, interior });
            }
            BuildStep::Subleaf { vertex, attach: None } => {
                if let Some(b) = (0..2).find(|&b| !claimed[b]) {
                    claimed[b] = true;
                    emb[*vertex] = Some(b);
                } else {
                    let mut interior = vec![host.fresh()];
                    let img = host.fresh();
                    emb[*vertex] = Some(img);
                    interior.push(img);
                    interior.extend((0..hl - 3).map(|_| host.fresh()));
                    host.add_path(0, &interior, 1);
                    steps.push(BuildStep::Handle { end1: 0, end2: 1, interior });
                }
            }
        }
    }

    let host_graph = host.graph();
    let cert = BuildCertificate { beta, mode: BuildMode::Strong, steps };
    let embedding = crate::graph::Embedding {
        map: emb.into_iter().map(|x| x.expect("every input vertex embedded")).collect(),
    };
    let rebuilt = replay(&cert)?;
    if rebuilt != host_graph {
        return Err(BuildError::Internal("host certificate does not replay to host".into()));
    }
    if !embedding.verify(&host_graph, h) {
        return Err(BuildError::Internal("embedding is not induced".into()));
    }
    Ok(EmbedOutcome { host: host_graph, cert, embedding })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;

    #[test]
    fn branch_examples() {
        let d = branches(&Graph::cycle(6));
        assert_eq!(d.branches.len(), 1);
        assert!(matches!(&d.branches[0], Branch::Cycle { anchor: None, vertices } if vertices.len() == 6));
        assert!(d.verify(&Graph::cycle(6)));

        let d = branches(&Graph::path(5));
        assert_eq!(d.branches.len(), 1);
        match &d.branches[0] {
            Branch::Path { ends, interior } => {
                assert_eq!(*ends, (0, 4));
                assert_eq!(interior, &[1, 2, 3]);
            }
            other => panic!("expected path branch, got {other:?}"),
        }
        assert!(d.verify(&Graph::path(5)));

        let d = branches(&Graph::complete(4));
        assert_eq!(d.branches.len(), 6);
        assert!(d.branches.iter().all(|b| b.length() == 1));
        assert!(d.verify(&Graph::complete(4)));
    }

    #[test]
    fn branch_anchored_cycle() {
        // triangle with a pendant edge: one anchored cycle + one path branch
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (0, 2), (0, 3)]);
        let d = branches(&g);
        assert!(d.verify(&g));
        assert_eq!(d.branches.len(), 2);
        assert!(d
            .branches
            .iter()
            .any(|b| matches!(b, Branch::Cycle { anchor: Some(0), vertices } if vertices.len() == 3)));
    }

    #[test]
    fn branch_partition_on_random_graphs() {
        for seed in 0..30 {
            let g = Graph::gnp(9, &rat(1, 3), 500 + seed);
            assert!(branches(&g).verify(&g), "partition fails on {g:?}");
        }
    }

    #[test]
    fn replay_examples() {
        let empty = BuildCertificate { beta: 3, mode: BuildMode::Weak, steps: vec![] };
        assert_eq!(replay(&empty).unwrap(), Graph::new(0));

        let one_handle = BuildCertificate {
            beta: 5,
            mode: BuildMode::Strong,
            steps: vec![BuildStep::Handle { end1: 0, end2: 1, interior: vec![2, 3, 4, 5] }],
        };
        let g = replay(&one_handle).unwrap();
        assert_eq!(g.n(), 6);
        assert_eq!(g.edge_count(), 5);
        assert!(g.contains(&Graph::path(6)).is_some(), "path-shaped");
    }

    #[test]
    fn replay_rejects_bad_steps() {
        let short = BuildCertificate {
            beta: 4,
            mode: BuildMode::Strong,
            steps: vec![BuildStep::Handle { end1: 0, end2: 1, interior: vec![2, 3] }],
        };
        assert!(matches!(replay(&short), Err(BuildError::InvalidStep { index: 0, .. })));

        let subleaf_in_strong = BuildCertificate {
            beta: 2,
            mode: BuildMode::Strong,
            steps: vec![BuildStep::Subleaf { vertex: 2, attach: Some(0) }],
        };
        assert!(replay(&subleaf_in_strong).is_err());

        let adjacent_ends = BuildCertificate {
            beta: 2,
            mode: BuildMode::Weak,
            steps: vec![
                BuildStep::Subleaf { vertex: 0, attach: None },
                BuildStep::Subleaf { vertex: 1, attach: Some(0) },
                BuildStep::Handle { end1: 0, end2: 1, interior: vec![2] },
            ],
        };
        assert!(replay(&adjacent_ends).is_err());
    }

    #[test]
    fn weak_certificate_forest() {
        let tree = Graph::from_edges(6, &[(0, 1), (1, 2), (1, 3), (3, 4), (0, 5)]);
        let cert = weak_certificate(&tree, 5).unwrap().expect("forests peel leaf by leaf");
        assert!(cert.steps.iter().all(|s| matches!(s, BuildStep::Subleaf { .. })));
        assert_eq!(replay(&cert).unwrap(), tree);
    }

    #[test]
    fn weak_certificate_c6() {
        let c6 = Graph::cycle(6);
        let cert = weak_certificate(&c6, 3).unwrap().expect("C6 is weakly 3-buildable");
        assert_eq!(replay(&cert).unwrap(), c6);
        assert!(cert.steps.iter().any(|s| matches!(s, BuildStep::Handle { .. })));
    }

    #[test]
    fn weak_certificate_k4_absent() {
        assert_eq!(weak_certificate(&Graph::complete(4), 2).unwrap(), None);
    }

    #[test]
    fn weak_certificate_respects_congestion_bound() {
        // existence of a weak beta-certificate forces congestion ≤ 1/beta
        for seed in 0..80 {
            let g = Graph::gnp(7, &rat(1, 4), 900 + seed);
            for beta in [2usize, 3] {
                if let Some(cert) = weak_certificate(&g, beta).unwrap() {
                    assert_eq!(replay(&cert).unwrap(), g);
                    let c = congestion(&g, Method::Exhaustive).unwrap();
                    assert!(
                        c.value <= rat(1, beta as i64),
                        "congestion {} > 1/{beta} on {g:?}",
                        c.value
                    );
                }
            }
        }
    }

    #[test]
    fn search_limit_reported() {
        let g = Graph::edgeless(20);
        assert!(matches!(
            weak_certificate(&g, 2),
            Err(BuildError::LimitExceeded { n: 20, limit: 14 })
        ));
    }

    #[test]
    fn longbranch_examples() {
        let c6 = Graph::cycle(6);
        let cert = longbranch_witness(&c6, &rat(1, 6)).unwrap();
        assert_eq!(cert.beta, 3);
        assert_eq!(replay(&cert).unwrap(), c6);

        let p4 = Graph::path(4);
        let cert = longbranch_witness(&p4, &rat(1, 3)).unwrap();
        assert_eq!(cert.beta, 2);
        assert!(cert.steps.iter().all(|s| matches!(s, BuildStep::Subleaf { .. })));
        assert_eq!(replay(&cert).unwrap(), p4);

        match longbranch_witness(&Graph::complete(4), &rat(1, 3)) {
            Err(BuildError::CongestionTooLarge { congestion, witness }) => {
                assert_eq!(congestion, rat(1, 2));
                assert_eq!(witness.vertices, vec![0, 1, 2, 3]);
            }
            other => panic!("expected congestion error, got {other:?}"),
        }
    }

    #[test]
    fn longbranch_on_small_low_congestion_graphs() {
        for seed in 0..200 {
            let n = 4 + (seed as usize % 4);
            let g = Graph::gnp(n, &rat(1, 3), 1300 + seed);
            let c = congestion(&g, Method::Exhaustive).unwrap();
            for xi in [rat(1, 6), rat(1, 9)] {
                if g.is_null() || c.value > xi {
                    continue;
                }
                let cert = longbranch_witness(&g, &xi).expect("peeling succeeds in hypothesis");
                assert_eq!(replay(&cert).unwrap(), g);
            }
        }
    }

    #[test]
    fn longbranch_rejects_bad_xi() {
        assert!(matches!(
            longbranch_witness(&Graph::path(3), &rat(1, 2)),
            Err(BuildError::XiOutOfRange)
        ));
        assert!(matches!(longbranch_witness(&Graph::new(0), &rat(1, 6)), Err(BuildError::NullGraph)));
    }

    #[test]
    fn embed_two_isolated_vertices_is_base_case() {
        let out = embed_in_buildable(&Graph::edgeless(2), 4).unwrap();
        assert_eq!(out.host, Graph::edgeless(2));
        assert!(out.cert.steps.is_empty());
        assert!(out.embedding.verify(&out.host, &Graph::edgeless(2)));
    }

    #[test]
    fn embed_single_vertex() {
        let h = Graph::edgeless(1);
        let out = embed_in_buildable(&h, 4).unwrap();
        assert_eq!(replay(&out.cert).unwrap(), out.host);
        assert!(out.embedding.verify(&out.host, &h));
    }

    #[test]
    fn embed_c6() {
        let c6 = Graph::cycle(6);
        let out = embed_in_buildable(&c6, 3).unwrap();
        assert!(matches!(out.cert.mode, BuildMode::Strong));
        assert!(out.cert.steps.iter().all(|s| s.length() >= 3));
        assert_eq!(replay(&out.cert).unwrap(), out.host);
        assert!(out.embedding.verify(&out.host, &c6));
    }

    #[test]
    fn embed_various_buildable_graphs() {
        // trees and sparse graphs with certificates embed with verified output
        for seed in 0..40 {
            let g = Graph::gnp(6, &rat(1, 5), 2100 + seed);
            for beta in [2usize, 4] {
                match embed_in_buildable(&g, beta) {
                    Ok(out) => {
                        assert_eq!(replay(&out.cert).unwrap(), out.host);
                        assert!(out.embedding.verify(&out.host, &g));
                        assert!(out.cert.steps.iter().all(|s| s.length() >= beta));
                    }
                    Err(BuildError::NoWeakCertificate) => {}
                    Err(e) => panic!("unexpected error {e:?}"),
                }
            }
        }
    }

    #[test]
    fn certificate_serde_round_trip() {
        let cert = weak_certificate(&Graph::cycle(6), 3).unwrap().unwrap();
        let json = serde_json::to_string(&cert).unwrap();
        let back: BuildCertificate = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cert);
    }
}
