//! Reduction of a host to a vertex set on which one side is sparse.

use crate::exact::Rat;
use crate::graph::Graph;
use num::bigint::BigInt;
use num::Signed;
use serde::{Deserialize, Serialize};

const EXHAUSTIVE_LIMIT: usize = 16;

/// Which side of the reduction is sparse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparseSide {
    Graph,
    Complement,
}

/// A vertex set on which the graph or its complement has every degree below
/// `eta` times the set size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseReduction {
    pub vertices: Vec<usize>,
    pub side: SparseSide,
}

/// Searches for a large vertex set `X` so that `G[X]` or its complement is
/// `eta`-sparse.  Exhaustive when the budget covers every subset, otherwise
/// greedy: degree pruning on both sides plus greedy independent-set and
/// clique candidates.  `None` is inconclusive, never a disproof.  A returned
/// set is always re-checked against the definition before it leaves.
pub fn reduce_to_sparse(g: &Graph, eta: &Rat, budget: u64) -> Option<SparseReduction> {
    if !eta.is_positive() {
        return None;
    }
    let n = g.n();
    if n <= EXHAUSTIVE_LIMIT && 1u64.checked_shl(n as u32).is_some_and(|m| m <= budget) {
        exhaustive(g, eta)
    } else {
        greedy(g, eta)
    }
}

/// Every vertex of `xs` has side-degree strictly below `eta |xs|`.
fn side_sparse(g: &Graph, xs: &[usize], side: SparseSide, eta: &Rat) -> bool {
    let len = xs.len();
    xs.iter().all(|&v| {
        let within = xs.iter().filter(|&&w| w != v && g.has_edge(v, w)).count();
        let deg = match side {
            SparseSide::Graph => within,
            SparseSide::Complement => len - 1 - within,
        };
        BigInt::from(deg) * eta.denom() < eta.numer() * BigInt::from(len)
    })
}

fn exhaustive(g: &Graph, eta: &Rat) -> Option<SparseReduction> {
    let n = g.n();
    let mut best: Option<SparseReduction> = None;
    for mask in 0u32..1 << n {
        let xs: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        if best.as_ref().is_some_and(|b| xs.len() <= b.vertices.len()) {
            continue;
        }
        for side in [SparseSide::Graph, SparseSide::Complement] {
            if side_sparse(g, &xs, side, eta) {
                best = Some(SparseReduction { vertices: xs, side });
                break;
            }
        }
    }
    best
}

fn greedy(g: &Graph, eta: &Rat) -> Option<SparseReduction> {
    let candidates = [
        (prune(g, SparseSide::Graph, eta), SparseSide::Graph),
        (prune(g, SparseSide::Complement, eta), SparseSide::Complement),
        (greedy_independent(g), SparseSide::Graph),
        (greedy_clique(g), SparseSide::Complement),
    ];
    let mut best: Option<SparseReduction> = None;
    for (xs, side) in candidates {
        if side_sparse(g, &xs, side, eta)
            && best.as_ref().is_none_or(|b| xs.len() > b.vertices.len())
        {
            best = Some(SparseReduction { vertices: xs, side });
        }
    }
    best
}

/// Removes the max-degree vertex (ties to the smallest index) until the
/// side-degree condition holds; a single vertex always satisfies it.
fn prune(g: &Graph, side: SparseSide, eta: &Rat) -> Vec<usize> {
    let mut xs: Vec<usize> = (0..g.n()).collect();
    while !xs.is_empty() {
        let len = xs.len();
        let (imax, dmax) = xs
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let within = xs.iter().filter(|&&w| w != v && g.has_edge(v, w)).count();
                match side {
                    SparseSide::Graph => (i, within),
                    SparseSide::Complement => (i, len - 1 - within),
                }
            })
            .max_by_key(|&(i, d)| (d, std::cmp::Reverse(i)))
            .unwrap();
        if BigInt::from(dmax) * eta.denom() < eta.numer() * BigInt::from(len) {
            break;
        }
        xs.remove(imax);
    }
    xs
}

fn degree(g: &Graph, v: usize) -> usize {
    (0..g.n()).filter(|&w| w != v && g.has_edge(v, w)).count()
}

fn greedy_independent(g: &Graph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.sort_by_key(|&v| (degree(g, v), v));
    let mut xs: Vec<usize> = Vec::new();
    for v in order {
        if xs.iter().all(|&w| !g.has_edge(v, w)) {
            xs.push(v);
        }
    }
    xs.sort_unstable();
    xs
}

fn greedy_clique(g: &Graph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(degree(g, v)), v));
    let mut xs: Vec<usize> = Vec::new();
    for v in order {
        if xs.iter().all(|&w| g.has_edge(v, w)) {
            xs.push(v);
        }
    }
    xs.sort_unstable();
    xs
}
