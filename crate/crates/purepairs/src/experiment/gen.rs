//! Seeded input generators for campaigns: canonical small-graph enumeration,
//! random trees and cyclic graphs, and random build certificates.

use crate::buildable::{BuildCertificate, BuildMode, BuildStep};
use crate::exact::rat;
use crate::graph::Graph;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// All graphs on exactly `n` vertices up to isomorphism, each as the
/// lexicographically least adjacency mask of its class.
pub fn all_graphs(n: usize) -> Vec<Graph> {
    assert!((1..=7).contains(&n), "enumeration is sized for n in 1..=7");
    let pairs: Vec<(usize, usize)> =
        (1..n).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
    let m = pairs.len();
    let index = |a: usize, b: usize| b * (b - 1) / 2 + a;
    // one pair-relabelling table per permutation; identity excluded
    let tables: Vec<Vec<usize>> = permutations(n)
        .into_iter()
        .filter(|p| p.iter().enumerate().any(|(i, &v)| i != v))
        .map(|p| {
            pairs
                .iter()
                .map(|&(i, j)| index(p[i].min(p[j]), p[i].max(p[j])))
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    'mask: for mask in 0u32..1 << m {
        for t in &tables {
            let mut relabeled = 0u32;
            let mut rest = mask;
            while rest != 0 {
                relabeled |= 1 << t[rest.trailing_zeros() as usize];
                rest &= rest - 1;
            }
            if relabeled < mask {
                continue 'mask;
            }
        }
        let mut g = Graph::new(n);
        for (b, &(i, j)) in pairs.iter().enumerate() {
            if mask >> b & 1 == 1 {
                g.add_edge(i, j);
            }
        }
        out.push(g);
    }
    out
}

/// All graphs with `1 <= n <= nmax` up to isomorphism.
pub fn all_graphs_up_to(nmax: usize) -> Vec<Graph> {
    (1..=nmax).flat_map(all_graphs).collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    fn rec(k: usize, items: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            rec(k + 1, items, out);
            items.swap(k, i);
        }
    }
    rec(0, &mut items, &mut out);
    out
}

/// Uniform random recursive tree on `n >= 1` vertices.
pub fn random_tree(n: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::new(n);
    for v in 1..n {
        g.add_edge(v, rng.gen_range(0..v));
    }
    g
}

/// A random graph guaranteed to contain a cycle (`n >= 3`).
pub fn random_cyclic(n: usize, seed: u64) -> Graph {
    assert!(n >= 3);
    let mut g = Graph::gnp(n, &rat(2, n as i64), seed);
    if g.is_forest() {
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        g.add_edge(0, 2);
    }
    g
}

fn nonadjacent_pairs(g: &Graph) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for u in 0..g.n() {
        for v in u + 1..g.n() {
            if !g.has_edge(u, v) {
                out.push((u, v));
            }
        }
    }
    out
}

fn grow_handle(g: &Graph, end1: usize, end2: usize, interior: &[usize]) -> Graph {
    let mut g2 = Graph::new(g.n() + interior.len());
    for (u, v) in g.edges() {
        g2.add_edge(u, v);
    }
    let mut prev = end1;
    for &w in interior {
        g2.add_edge(prev, w);
        prev = w;
    }
    g2.add_edge(prev, end2);
    g2
}

/// A random strong certificate: one to three handles of length `beta` to
/// `beta + 2` over the two-vertex base, at most `vmax` vertices total.
pub fn random_strong_certificate(beta: usize, vmax: usize, seed: u64) -> BuildCertificate {
    assert!(beta >= 3 && vmax >= beta + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::new(2);
    let mut steps = Vec::new();
    for _ in 0..rng.gen_range(1..=3usize) {
        let len = rng.gen_range(beta..=beta + 2);
        if g.n() + len - 1 > vmax {
            break;
        }
        let pairs = nonadjacent_pairs(&g);
        if pairs.is_empty() {
            break;
        }
        let (end1, end2) = pairs[rng.gen_range(0..pairs.len())];
        let interior: Vec<usize> = (g.n()..g.n() + len - 1).collect();
        g = grow_handle(&g, end1, end2, &interior);
        steps.push(BuildStep::Handle { end1, end2, interior });
    }
    BuildCertificate { beta, mode: BuildMode::Strong, steps }
}

/// A random weak certificate on one to `vmax` vertices: subleaves with an
/// occasional handle of length `beta` or more.
pub fn random_weak_certificate(beta: usize, vmax: usize, seed: u64) -> BuildCertificate {
    assert!(beta >= 2 && vmax >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = rng.gen_range(1..=vmax);
    let mut g = Graph::new(0);
    let mut steps = Vec::new();
    while g.n() < target {
        let room = target - g.n();
        if g.n() >= 2 && room >= beta - 1 && rng.gen_range(0..3) == 0 {
            let pairs = nonadjacent_pairs(&g);
            if !pairs.is_empty() {
                let (end1, end2) = pairs[rng.gen_range(0..pairs.len())];
                let il = rng.gen_range(beta - 1..=(beta + 1).min(room));
                let interior: Vec<usize> = (g.n()..g.n() + il).collect();
                g = grow_handle(&g, end1, end2, &interior);
                steps.push(BuildStep::Handle { end1, end2, interior });
                continue;
            }
        }
        let vertex = g.n();
        let attach =
            if vertex == 0 || rng.gen_range(0..4) == 0 { None } else { Some(rng.gen_range(0..vertex)) };
        let mut g2 = Graph::new(vertex + 1);
        for (u, v) in g.edges() {
            g2.add_edge(u, v);
        }
        if let Some(a) = attach {
            g2.add_edge(a, vertex);
        }
        g = g2;
        steps.push(BuildStep::Subleaf { vertex, attach });
    }
    BuildCertificate { beta, mode: BuildMode::Weak, steps }
}
