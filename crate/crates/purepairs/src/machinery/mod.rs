//! Layered structures over blockades: levellings, gradings, bi-levellings,
//! and the constructions that produce them.
//!
//! Every structure type carries an independent checker that re-derives its
//! invariants from the definitions alone; constructions re-verify their own
//! output through these checkers before returning.

use crate::blockade::Blockade;
use crate::exact::{self, Rat};
use crate::graph::Graph;
use num::{BigInt, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use thiserror::Error;

pub mod bigrade;
pub mod bilevel;
pub mod cycles;
pub mod expand;
pub mod gen;
pub mod level;
pub mod select;

pub use bigrade::{
    bigrade_constants, bigrade_induction, build_bigrading, selection_ladder, BigradeConstants,
};
pub use bilevel::{
    build_bilevelling, connecting_path, exact_bilevelling, extend_bilevelling,
    required_ambient_length, rho_for, BilevelOutput, BilevelPack, ExtendParams,
};
pub use cycles::{
    exhaustive_induced_cycle, find_induced_cycle, verify_induced_cycle, CycleOutcome,
};
pub use expand::{check_expanding, expanding_contraction, rainbow_path, ExpandVerdict};
pub use level::{build_grading, build_levelling, GradingOutput, LevellingOutput};
pub use select::{selective_cover, SelectiveClass, SelectiveOutcome};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MachineryError {
    /// A stated hypothesis fails on the given input; the message names the
    /// inequality or structural condition and a concrete witness when one
    /// exists.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    /// A divergence precondition could not be decided within budget.  The
    /// operation refuses to certify rather than assume.
    #[error("divergence check inconclusive: {0}")]
    DivergenceInconclusive(String),
    /// A construction stage ran out of material.  Carries the stage name so
    /// failures locate themselves.
    #[error("stage {stage}: {detail}")]
    Stage { stage: &'static str, detail: String },
    /// Output failed its own independent checker.  Either a bug or a
    /// consequence of running past a skipped numeric hypothesis; surfaced
    /// loudly either way.
    #[error("certification failure: {0}")]
    Certification(String),
    #[error("resource limit: {0}")]
    ResourceLimit(String),
}

/// Strict mode enforces every numeric hypothesis verbatim before running;
/// relaxed mode checks only the structural preconditions a construction
/// actually consumes and lets the output checkers arbitrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckLevel {
    Strict,
    Relaxed,
}

/// The quantity `coeff * n^exp` for a host of size `n`, kept symbolic so
/// thresholds with fractional exponents compare exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scaled {
    #[serde(with = "crate::exact::rat_string")]
    pub coeff: Rat,
    #[serde(with = "crate::exact::rat_string")]
    pub exp: Rat,
}

impl Scaled {
    pub fn new(coeff: Rat, exp: Rat) -> Scaled {
        Scaled { coeff, exp }
    }

    pub fn constant(coeff: Rat) -> Scaled {
        Scaled { coeff, exp: exact::zero() }
    }

    /// Compares `coeff * n^exp` with `rhs` exactly.
    pub fn cmp_at(&self, n: u64, rhs: &Rat) -> Ordering {
        if self.coeff.is_zero() || n == 0 {
            return self.coeff.cmp(rhs);
        }
        exact::cmp_scaled_power(n, &self.coeff, &self.exp, rhs)
    }

    pub fn le_at(&self, n: u64, rhs: &Rat) -> bool {
        self.cmp_at(n, rhs) != Ordering::Greater
    }

    pub fn ge_at(&self, n: u64, rhs: &Rat) -> bool {
        self.cmp_at(n, rhs) != Ordering::Less
    }

    pub fn times(&self, r: &Rat) -> Scaled {
        Scaled { coeff: &self.coeff * r, exp: self.exp.clone() }
    }

    /// Floating approximation for display only.
    pub fn approx(&self, n: u64) -> f64 {
        let c = self.coeff.to_f64().unwrap_or(f64::NAN);
        let e = self.exp.to_f64().unwrap_or(f64::NAN);
        c * (n as f64).powf(e)
    }
}

// ---------------------------------------------------------------------------
// bitset plumbing shared by the constructions
// ---------------------------------------------------------------------------

pub(crate) fn word_count(n: usize) -> usize {
    n.div_ceil(64)
}

pub(crate) fn mask_of(n: usize, vs: &[usize]) -> Vec<u64> {
    let mut m = vec![0u64; word_count(n).max(1)];
    for &v in vs {
        m[v / 64] |= 1 << (v % 64);
    }
    m
}

pub(crate) fn mask_has(mask: &[u64], v: usize) -> bool {
    mask[v / 64] >> (v % 64) & 1 == 1
}

pub(crate) fn or_into(acc: &mut [u64], row: &[u64]) {
    for (a, r) in acc.iter_mut().zip(row) {
        *a |= r;
    }
}

pub(crate) fn intersects(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).any(|(x, y)| x & y != 0)
}

pub(crate) fn count_and(a: &[u64], b: &[u64]) -> usize {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones() as usize).sum()
}

/// Union of adjacency rows over `vs`.
pub(crate) fn neighborhood(host: &Graph, vs: &[usize]) -> Vec<u64> {
    let mut m = vec![0u64; word_count(host.n()).max(1)];
    for &v in vs {
        or_into(&mut m, host.row(v));
    }
    m
}

pub(crate) fn covers(host: &Graph, upper: &[usize], lower: &[usize]) -> bool {
    let um = mask_of(host.n(), upper);
    lower.iter().all(|&v| intersects(host.row(v), &um))
}

pub(crate) fn anticomplete(host: &Graph, xs: &[usize], ys: &[usize]) -> bool {
    let ym = mask_of(host.n(), ys);
    xs.iter().all(|&v| !intersects(host.row(v), &ym))
}

/// Exact fraction |of ∩ N(v)| case helper: counts neighbors of v inside `mask`.
pub(crate) fn degree_into(host: &Graph, v: usize, mask: &[u64]) -> usize {
    count_and(host.row(v), mask)
}

// ---------------------------------------------------------------------------
// levelling
// ---------------------------------------------------------------------------

/// Layered vertex sets `(L_0, ..., L_k)`: a single apex, each layer covered by
/// the one before it, layers two or more apart anticomplete, all disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Levelling {
    pub layers: Vec<Vec<usize>>,
}

impl Levelling {
    pub fn new(layers: Vec<Vec<usize>>) -> Levelling {
        Levelling { layers }
    }

    pub fn apex(&self) -> usize {
        self.layers[0][0]
    }

    /// Number of edges on any apex-to-base chain.
    pub fn height(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn base(&self) -> &[usize] {
        self.layers.last().unwrap()
    }

    pub fn vertex_count(&self) -> usize {
        self.layers.iter().map(|l| l.len()).sum()
    }

    pub fn all_vertices(&self) -> Vec<usize> {
        let mut vs: Vec<usize> = self.layers.iter().flatten().copied().collect();
        vs.sort_unstable();
        vs
    }

    /// Re-derives every defining condition from scratch.
    pub fn verify(&self, host: &Graph) -> Result<(), MachineryError> {
        let bad = |msg: String| Err(MachineryError::Certification(msg));
        if self.layers.len() < 2 {
            return bad("levelling needs at least two layers".into());
        }
        if self.layers[0].len() != 1 {
            return bad(format!("first layer has {} vertices, wanted 1", self.layers[0].len()));
        }
        let n = host.n();
        let mut seen = vec![false; n];
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.is_empty() {
                return bad(format!("layer {i} is empty"));
            }
            for &v in layer {
                if v >= n {
                    return bad(format!("vertex {v} outside host"));
                }
                if seen[v] {
                    return bad(format!("vertex {v} appears in two layers"));
                }
                seen[v] = true;
            }
        }
        for i in 1..self.layers.len() {
            if !covers(host, &self.layers[i - 1], &self.layers[i]) {
                return bad(format!("layer {} does not cover layer {}", i - 1, i));
            }
            for j in 0..i.saturating_sub(1) {
                if !anticomplete(host, &self.layers[j], &self.layers[i]) {
                    return bad(format!("layers {j} and {i} are not anticomplete"));
                }
            }
        }
        Ok(())
    }

    /// Checks that appending `targets` as one more layer would stay a
    /// levelling: the base covers every target and all earlier layers are
    /// anticomplete to them.
    pub fn verify_reaches(&self, host: &Graph, targets: &[usize]) -> Result<(), MachineryError> {
        let bad = |msg: String| Err(MachineryError::Certification(msg));
        let own = mask_of(host.n(), &self.all_vertices());
        if targets.iter().any(|&v| mask_has(&own, v)) {
            return bad("target set meets the levelling".into());
        }
        if !covers(host, self.base(), targets) {
            return bad("base does not cover the target set".into());
        }
        for (i, layer) in self.layers[..self.layers.len() - 1].iter().enumerate() {
            if !anticomplete(host, layer, targets) {
                return bad(format!("layer {i} is not anticomplete to the target set"));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// grading
// ---------------------------------------------------------------------------

/// A levelling whose base carries nested witness sets ordering a block
/// family: the witness at position `g` covers every block from `g` onward and
/// is anticomplete to every earlier one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grading {
    pub levelling: Levelling,
    /// Graded blocks listed in grading order.
    pub blocks: Vec<Vec<usize>>,
    /// `witnesses[g]` lives in the levelling base and orders position `g`.
    pub witnesses: Vec<Vec<usize>>,
}

impl Grading {
    pub fn verify(&self, host: &Graph) -> Result<(), MachineryError> {
        self.levelling.verify(host)?;
        let family: Vec<usize> = self.blocks.iter().flatten().copied().collect();
        self.levelling.verify_reaches(host, &family)?;
        verify_grades_forwards(host, self.levelling.base(), &self.blocks, &self.witnesses)
    }
}

/// Forwards-grading witness conditions: `witnesses[g] ⊆ base`, covers every
/// block at position `>= g`, anticomplete to every block before `g`.
pub fn verify_grades_forwards(
    host: &Graph,
    base: &[usize],
    blocks: &[Vec<usize>],
    witnesses: &[Vec<usize>],
) -> Result<(), MachineryError> {
    verify_grades(host, base, blocks, witnesses, true)
}

/// Backwards grading: the witness at position `g` covers every block at
/// position `<= g` and is anticomplete to every later one.
pub fn verify_grades_backwards(
    host: &Graph,
    base: &[usize],
    blocks: &[Vec<usize>],
    witnesses: &[Vec<usize>],
) -> Result<(), MachineryError> {
    verify_grades(host, base, blocks, witnesses, false)
}

fn verify_grades(
    host: &Graph,
    base: &[usize],
    blocks: &[Vec<usize>],
    witnesses: &[Vec<usize>],
    forwards: bool,
) -> Result<(), MachineryError> {
    let bad = |msg: String| Err(MachineryError::Certification(msg));
    if blocks.len() != witnesses.len() {
        return bad(format!("{} blocks but {} witnesses", blocks.len(), witnesses.len()));
    }
    if blocks.iter().any(|b| b.is_empty()) {
        return bad("graded block is empty".into());
    }
    let mut all: Vec<usize> = blocks.iter().flatten().copied().collect();
    all.sort_unstable();
    let before = all.len();
    all.dedup();
    if all.len() != before {
        return bad("graded blocks overlap".into());
    }
    let base_mask = mask_of(host.n(), base);
    for (g, w) in witnesses.iter().enumerate() {
        if w.is_empty() {
            return bad(format!("witness {g} is empty"));
        }
        if w.iter().any(|&v| !mask_has(&base_mask, v)) {
            return bad(format!("witness {g} leaves the levelling base"));
        }
        for (h, block) in blocks.iter().enumerate() {
            let covered = if forwards { h >= g } else { h <= g };
            if covered {
                if !covers(host, w, block) {
                    return bad(format!("witness {g} misses block {h}"));
                }
            } else if !anticomplete(host, w, block) {
                return bad(format!("witness {g} touches block {h}"));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// bi-levelling
// ---------------------------------------------------------------------------

/// Two levellings sharing an apex, parallel away from it, both reaching a
/// common block family which the first grades forwards.  When `witnesses_m`
/// is present the second grades the family backwards and the structure is a
/// bi-grading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiLevelling {
    pub l: Levelling,
    pub m: Levelling,
    /// Block family in forwards order for `l`.
    pub blocks: Vec<Vec<usize>>,
    pub witnesses_l: Vec<Vec<usize>>,
    pub witnesses_m: Option<Vec<Vec<usize>>>,
    /// Construction stage notes, for diagnostics only.
    pub audit: Vec<String>,
}

impl BiLevelling {
    pub fn length(&self) -> usize {
        self.blocks.len()
    }

    pub fn height(&self) -> usize {
        self.l.height() + self.m.height()
    }

    pub fn is_bigrading(&self) -> bool {
        self.witnesses_m.is_some()
    }

    /// Smallest `|C_i| / |ambient block containing C_i|` over the family.
    pub fn family_size(&self, ambient: &Blockade) -> Result<Rat, MachineryError> {
        let mut best: Option<Rat> = None;
        for c in &self.blocks {
            let pos = containing_block(ambient, c).ok_or_else(|| {
                MachineryError::Certification("family block not inside one ambient block".into())
            })?;
            let frac = exact::rat(c.len() as i64, ambient.vertices(pos).len() as i64);
            best = Some(match best {
                None => frac,
                Some(b) => b.min(frac),
            });
        }
        best.ok_or_else(|| MachineryError::Certification("empty block family".into()))
    }

    /// Full invariant check against the ambient blockade.
    pub fn verify(&self, host: &Graph, ambient: &Blockade) -> Result<(), MachineryError> {
        let bad = |msg: String| Err(MachineryError::Certification(msg));
        self.l.verify(host)?;
        self.m.verify(host)?;
        if self.l.apex() != self.m.apex() {
            return bad("levellings do not share an apex".into());
        }
        // parallelism: away from the apex the two levellings are disjoint and
        // anticomplete
        let lv: Vec<usize> = self.l.layers[1..].iter().flatten().copied().collect();
        let mv: Vec<usize> = self.m.layers[1..].iter().flatten().copied().collect();
        let lm = mask_of(host.n(), &lv);
        if mv.iter().any(|&v| mask_has(&lm, v)) {
            return bad("levellings overlap away from the apex".into());
        }
        for (i, li) in self.l.layers.iter().enumerate().skip(1) {
            for (j, mj) in self.m.layers.iter().enumerate().skip(1) {
                if !anticomplete(host, li, mj) {
                    return bad(format!("layers l[{i}] and m[{j}] are not anticomplete"));
                }
            }
        }
        let family: Vec<usize> = self.blocks.iter().flatten().copied().collect();
        self.l.verify_reaches(host, &family)?;
        self.m.verify_reaches(host, &family)?;
        verify_grades_forwards(host, self.l.base(), &self.blocks, &self.witnesses_l)?;
        if let Some(wm) = &self.witnesses_m {
            verify_grades_backwards(host, self.m.base(), &self.blocks, wm)?;
        }
        // rainbow placement: every structure set inside its own ambient block
        let mut sets: Vec<&[usize]> = Vec::new();
        for layer in &self.l.layers {
            sets.push(layer);
        }
        for layer in &self.m.layers[1..] {
            sets.push(layer);
        }
        for c in &self.blocks {
            sets.push(c);
        }
        let mut used = std::collections::BTreeSet::new();
        for set in sets {
            match containing_block(ambient, set) {
                None => return bad("structure set not inside one ambient block".into()),
                Some(pos) => {
                    if !used.insert(pos) {
                        return bad(format!("two structure sets share ambient block {pos}"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Position of the unique ambient block containing every vertex of `set`,
/// if there is one.
pub fn containing_block(ambient: &Blockade, set: &[usize]) -> Option<usize> {
    let first = *set.first()?;
    let pos = (0..ambient.len()).find(|&p| ambient.vertices(p).contains(&first))?;
    let block = ambient.vertices(pos);
    set.iter().all(|v| block.contains(v)).then_some(pos)
}

// ---------------------------------------------------------------------------
// shared construction helpers
// ---------------------------------------------------------------------------

/// Exact comparison `num_a / den_a  vs  num_b / den_b` on machine-sized
/// counts, without building rationals.
pub(crate) fn frac_cmp(num_a: usize, den_a: usize, num_b: usize, den_b: usize) -> Ordering {
    let lhs = BigInt::from(num_a) * BigInt::from(den_b);
    let rhs = BigInt::from(num_b) * BigInt::from(den_a);
    lhs.cmp(&rhs)
}

pub(crate) fn frac_ge(num_a: usize, den_a: usize, num_b: usize, den_b: usize) -> bool {
    frac_cmp(num_a, den_a, num_b, den_b) != Ordering::Less
}

/// `count / size >= r` exactly.
pub(crate) fn ratio_ge(count: usize, size: usize, r: &Rat) -> bool {
    let lhs = BigInt::from(count) * r.denom();
    let rhs = BigInt::from(size) * r.numer();
    lhs >= rhs
}

/// `count / size < r` exactly.
pub(crate) fn ratio_lt(count: usize, size: usize, r: &Rat) -> bool {
    !ratio_ge(count, size, r)
}

pub(crate) fn positive_proper(name: &str, r: &Rat) -> Result<(), MachineryError> {
    if !r.is_positive() || r > &exact::one() {
        return Err(MachineryError::Hypothesis(format!("{name} = {r} must lie in (0, 1]")));
    }
    Ok(())
}

pub(crate) fn big_to_usize(b: &BigInt, what: &str) -> Result<usize, MachineryError> {
    b.to_usize()
        .ok_or_else(|| MachineryError::ResourceLimit(format!("{what} = {b} exceeds usize")))
}

/// Ceil of `r * count` as a usize.
pub(crate) fn ceil_frac_of(r: &Rat, count: usize) -> Result<usize, MachineryError> {
    let v = exact::ceil_int(&(r * exact::rint(count as i64)));
    big_to_usize(&v, "scaled count")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockade::Blockade;
    use crate::graph::Graph;

    fn star_levelling() -> (Graph, Levelling) {
        // apex 0, middle {1,2}, base {3,4}: 0-1, 0-2, 1-3, 2-4
        let g = Graph::from_edges(5, &[(0, 1), (0, 2), (1, 3), (2, 4)]);
        let lev = Levelling::new(vec![vec![0], vec![1, 2], vec![3, 4]]);
        (g, lev)
    }

    #[test]
    fn levelling_checker_accepts_and_rejects() {
        let (g, lev) = star_levelling();
        assert!(lev.verify(&g).is_ok());
        assert_eq!(lev.apex(), 0);
        assert_eq!(lev.height(), 2);

        // skip edge 0-3 breaks the anticompleteness between layers 0 and 2
        let mut bad = g.clone();
        bad.add_edge(0, 3);
        assert!(lev.verify(&bad).is_err());

        // removing 1-3 leaves vertex 3 uncovered
        let mut uncov = g.clone();
        uncov.remove_edge(1, 3);
        assert!(lev.verify(&uncov).is_err());

        // duplicate vertex across layers
        let dup = Levelling::new(vec![vec![0], vec![1, 2], vec![2]]);
        assert!(dup.verify(&g).is_err());

        let single = Levelling::new(vec![vec![0]]);
        assert!(single.verify(&g).is_err());
    }

    #[test]
    fn reach_check_separates_layers_from_targets() {
        let (_, lev) = star_levelling();
        let mut g = Graph::from_edges(7, &[(0, 1), (0, 2), (1, 3), (2, 4), (3, 5), (4, 6)]);
        assert!(lev.verify_reaches(&g, &[5, 6]).is_ok());
        // an edge from the apex to a target breaks the reach condition
        g.add_edge(0, 5);
        assert!(lev.verify_reaches(&g, &[5, 6]).is_err());
        assert!(lev.verify_reaches(&g, &[3, 5]).is_err(), "target meets the levelling");
    }

    #[test]
    fn grading_witness_conditions() {
        // base {3,4}; blocks C_0 = {5}, C_1 = {6}; witness 0 = {3,4} covers
        // both, witness 1 = {4} covers block 1 and avoids block 0
        let g = Graph::from_edges(7, &[(0, 1), (0, 2), (1, 3), (2, 4), (3, 5), (4, 6)]);
        let lev = Levelling::new(vec![vec![0], vec![1, 2], vec![3, 4]]);
        let grading = Grading {
            levelling: lev,
            blocks: vec![vec![5], vec![6]],
            witnesses: vec![vec![3, 4], vec![4]],
        };
        assert!(grading.verify(&g).is_ok());

        // witness 1 touching block 0 must be rejected
        let mut touch = g.clone();
        touch.add_edge(4, 5);
        assert!(grading.verify(&touch).is_err());

        // backwards direction: same data graded in reverse order
        assert!(verify_grades_backwards(
            &g,
            &[3, 4],
            &[vec![6], vec![5]],
            &[vec![4], vec![3, 4]],
        )
        .is_ok());
    }

    #[test]
    fn bilevelling_checker_full_conditions() {
        // l: 0 -> {1} -> {2,7}; m: 0 -> {3} -> {4,8}; family {5},{6} reached
        // by both bases; witness {7} grades {6} while avoiding {5}
        let mut g = Graph::from_edges(
            9,
            &[
                (0, 1),
                (1, 2),
                (1, 7),
                (0, 3),
                (3, 4),
                (3, 8),
                (2, 5),
                (7, 6),
                (4, 5),
                (8, 6),
            ],
        );
        let bl = BiLevelling {
            l: Levelling::new(vec![vec![0], vec![1], vec![2, 7]]),
            m: Levelling::new(vec![vec![0], vec![3], vec![4, 8]]),
            blocks: vec![vec![5], vec![6]],
            witnesses_l: vec![vec![2, 7], vec![7]],
            witnesses_m: None,
            audit: Vec::new(),
        };
        let ambient = Blockade::from_vertex_sets(vec![
            vec![0],
            vec![1],
            vec![2, 7],
            vec![3],
            vec![4, 8],
            vec![5],
            vec![6],
        ]);
        assert!(bl.verify(&g, &ambient).is_ok());
        assert_eq!(bl.height(), 4);
        assert_eq!(bl.length(), 2);
        assert_eq!(bl.family_size(&ambient).unwrap(), exact::one());

        // an edge between the two levellings breaks parallelism
        g.add_edge(1, 3);
        assert!(bl.verify(&g, &ambient).is_err());
        g.remove_edge(1, 3);
        assert!(bl.verify(&g, &ambient).is_ok());

        // two structure sets in one ambient block break the rainbow condition
        let squashed = Blockade::from_vertex_sets(vec![
            vec![0],
            vec![1, 3],
            vec![2, 7],
            vec![4, 8],
            vec![5],
            vec![6],
        ]);
        assert!(bl.verify(&g, &squashed).is_err());
    }

    #[test]
    fn scaled_comparisons_are_exact() {
        // 2 * 8^(1/3) = 4 exactly
        let s = Scaled::new(exact::rint(2), exact::rat(1, 3));
        assert_eq!(s.cmp_at(8, &exact::rint(4)), Ordering::Equal);
        assert!(s.ge_at(8, &exact::rat(7, 2)));
        assert!(s.le_at(8, &exact::rat(9, 2)));
        // n^(-1/2) at n = 49 is 1/7
        let t = Scaled::new(exact::one(), exact::rat(-1, 2));
        assert_eq!(t.cmp_at(49, &exact::rat(1, 7)), Ordering::Equal);
        assert_eq!(t.times(&exact::rint(2)).cmp_at(49, &exact::rat(2, 7)), Ordering::Equal);
    }
}
