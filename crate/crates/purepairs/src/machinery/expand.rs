//! Expansion checking, expanding contractions, and short rainbow paths.

use super::{
    frac_ge, mask_of, neighborhood, positive_proper, ratio_ge, CheckLevel, MachineryError,
};
use crate::blockade::{is_divergent, Blockade};
use crate::exact::{self, Rat};
use crate::graph::{mix, Graph, Search};
use num::BigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Outcome of an expansion check.  `SampledPass` means at least one block was
/// too large to enumerate and randomized subsets were used instead.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExpandVerdict {
    Pass,
    Fail { i: usize, j: usize, x: Vec<usize> },
    SampledPass { samples: u64 },
}

impl ExpandVerdict {
    pub fn passed(&self) -> bool {
        !matches!(self, ExpandVerdict::Fail { .. })
    }
}

/// Does `|N(X) ∩ B_j| / |B_j| >= min(tau |X| / |B_i|, 1/4)` hold, exactly?
fn expands(count: usize, bj: usize, x: usize, bi: usize, tau: &Rat) -> bool {
    if frac_ge(count, bj, 1, 4) {
        return true;
    }
    // count/bj >= tau * x/bi  <=>  count*bi*q >= p*x*bj  for tau = p/q
    let lhs = BigInt::from(count) * BigInt::from(bi) * tau.denom();
    let rhs = tau.numer() * BigInt::from(x) * BigInt::from(bj);
    lhs >= rhs
}

/// Enumerates every nonempty subset of `bi` depth-first with an incremental
/// neighborhood union, returning the first subset whose expansion into
/// `bj_mask` fails `pred`.
fn exhaustive_witness(
    host: &Graph,
    bi: &[usize],
    bj_mask: &[u64],
    bj_len: usize,
    fails: &dyn Fn(usize, usize, usize) -> bool,
) -> Option<Vec<usize>> {
    fn rec(
        host: &Graph,
        bi: &[usize],
        bj_mask: &[u64],
        bj_len: usize,
        fails: &dyn Fn(usize, usize, usize) -> bool,
        from: usize,
        chosen: &mut Vec<usize>,
        union: &Vec<u64>,
    ) -> Option<Vec<usize>> {
        for idx in from..bi.len() {
            let v = bi[idx];
            let mut next = union.clone();
            super::or_into(&mut next, host.row(v));
            chosen.push(v);
            let count = super::count_and(&next, bj_mask);
            if fails(count, chosen.len(), bj_len) {
                return Some(chosen.clone());
            }
            if let Some(w) = rec(host, bi, bj_mask, bj_len, fails, idx + 1, chosen, &next) {
                return Some(w);
            }
            chosen.pop();
        }
        None
    }
    let empty = vec![0u64; bj_mask.len()];
    let mut chosen = Vec::new();
    rec(host, bi, bj_mask, bj_len, fails, 0, &mut chosen, &empty)
}

/// Deterministic sampled search for a failing subset: all singletons, then
/// random subsets across a geometric ladder of sizes.
fn sampled_witness(
    host: &Graph,
    bi: &[usize],
    bj_mask: &[u64],
    bj_len: usize,
    fails: &dyn Fn(usize, usize, usize) -> bool,
    seed: u64,
    samples: &mut u64,
) -> Option<Vec<usize>> {
    for &v in bi {
        *samples += 1;
        let count = super::count_and(host.row(v), bj_mask);
        if fails(count, 1, bj_len) {
            return Some(vec![v]);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut size = 2usize;
    while size <= bi.len() {
        for _ in 0..24 {
            let picks = rand::seq::index::sample(&mut rng, bi.len(), size);
            let xs: Vec<usize> = picks.iter().map(|p| bi[p]).collect();
            *samples += 1;
            let union = neighborhood(host, &xs);
            let count = super::count_and(&union, bj_mask);
            if fails(count, xs.len(), bj_len) {
                let mut xs = xs;
                xs.sort_unstable();
                return Some(xs);
            }
        }
        size *= 2;
    }
    None
}

/// Verifies the expansion predicate over every ordered block pair:
/// exhaustively when the source block has at most `exhaustive_limit`
/// vertices, by deterministic sampling otherwise.
pub fn check_expanding(
    host: &Graph,
    b: &Blockade,
    tau: &Rat,
    exhaustive_limit: usize,
) -> ExpandVerdict {
    let fp = host.fingerprint();
    let mut samples = 0u64;
    let mut any_sampled = false;
    for i in 0..b.len() {
        let bi = b.vertices(i);
        for j in 0..b.len() {
            if i == j {
                continue;
            }
            let bj = b.vertices(j);
            let bj_mask = mask_of(host.n(), bj);
            let fails = |count: usize, x: usize, bj_len: usize| !expands(count, bj_len, x, bi.len(), tau);
            let witness = if bi.len() <= exhaustive_limit {
                exhaustive_witness(host, bi, &bj_mask, bj.len(), &fails)
            } else {
                any_sampled = true;
                let seed = mix(fp, ((i as u64) << 24) ^ j as u64);
                sampled_witness(host, bi, &bj_mask, bj.len(), &fails, seed, &mut samples)
            };
            if let Some(x) = witness {
                return ExpandVerdict::Fail { i, j, x };
            }
        }
    }
    if any_sampled {
        ExpandVerdict::SampledPass { samples }
    } else {
        ExpandVerdict::Pass
    }
}

/// Contracts each block by carving out the directed bad sets `Z_{i,j}`,
/// grown monotonically from expansion-failure witnesses until none remain.
/// Returns the contraction and its expansion factor `tau = 1/(4 delta)`.
///
/// Strict mode certifies non-divergence exhaustively first; relaxed mode
/// skips that and instead validates the output through `check_expanding`.
pub fn expanding_contraction(
    host: &Graph,
    a: &Blockade,
    delta: &Rat,
    level: CheckLevel,
    exhaustive_limit: usize,
    budget: u64,
) -> Result<(Blockade, Rat), MachineryError> {
    let k = a.len();
    if k < 2 {
        return Err(MachineryError::Hypothesis(format!("length {k} < 2")));
    }
    positive_proper("delta", delta)?;
    a.validate(host)
        .map_err(|e| MachineryError::Hypothesis(format!("invalid blockade: {e}")))?;
    if level == CheckLevel::Strict {
        let dk = delta * exact::rint(k as i64);
        if dk > exact::rat(1, 4) {
            return Err(MachineryError::Hypothesis(format!(
                "delta * K = {dk} exceeds 1/4"
            )));
        }
        match is_divergent(host, a, delta, &exact::rat(1, 8), budget)
            .map_err(|e| MachineryError::Hypothesis(format!("divergence check: {e}")))?
        {
            Search::Found(w) => {
                return Err(MachineryError::Hypothesis(format!(
                    "({delta}, 1/8)-divergent: blocks {} and {} carry an anticomplete pair",
                    w.i, w.j
                )))
            }
            Search::Inconclusive => {
                return Err(MachineryError::DivergenceInconclusive(format!(
                    "budget {budget} exhausted certifying non-divergence"
                )))
            }
            Search::Absent => {}
        }
    }

    // z[i][j] ⊆ A_i, bad in the direction of block j
    let mut z: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); k]; k];
    let tau = exact::one() / (exact::rat(4, 1) * delta);
    // violation threshold against the *original* block sizes:
    // |N(X) ∩ (A_j \ Z_j)| / |A_j| >= min(|X| / (3 delta |A_i|), 1/4)
    let three_delta = exact::rat(3, 1) * delta;
    loop {
        let z_union: Vec<Vec<usize>> = (0..k)
            .map(|i| {
                let mut u: Vec<usize> = z[i].iter().flatten().copied().collect();
                u.sort_unstable();
                u.dedup();
                u
            })
            .collect();
        let blocks: Vec<Vec<usize>> = (0..k)
            .map(|i| {
                let zm = mask_of(host.n(), &z_union[i]);
                a.vertices(i).iter().copied().filter(|&v| !super::mask_has(&zm, v)).collect()
            })
            .collect();
        let mut augmented = false;
        'pairs: for i in 0..k {
            let ai_len = a.vertices(i).len();
            let bi = &blocks[i];
            if bi.is_empty() {
                return Err(MachineryError::Hypothesis(format!(
                    "block {i} fully consumed by bad sets"
                )));
            }
            for j in 0..k {
                if i == j {
                    continue;
                }
                let aj_len = a.vertices(j).len();
                let bj_mask = mask_of(host.n(), &blocks[j]);
                let threshold_den = &three_delta * exact::rint(ai_len as i64);
                let fails = |count: usize, x: usize, aj: usize| {
                    if frac_ge(count, aj, 1, 4) {
                        return false;
                    }
                    // count/aj >= x / (3 delta ai) ?
                    let lhs = BigInt::from(count) * threshold_den.numer();
                    let rhs = BigInt::from(x) * BigInt::from(aj) * threshold_den.denom();
                    lhs < rhs
                };
                let fp = host.fingerprint();
                let witness = if bi.len() <= exhaustive_limit {
                    exhaustive_witness(host, bi, &bj_mask, aj_len, &fails)
                } else {
                    let mut s = 0u64;
                    let seed = mix(fp, 0x5eed ^ ((i as u64) << 24) ^ j as u64);
                    sampled_witness(host, bi, &bj_mask, aj_len, &fails, seed, &mut s)
                };
                if let Some(x) = witness {
                    let mut grown = z[i][j].clone();
                    grown.extend_from_slice(&x);
                    grown.sort_unstable();
                    grown.dedup();
                    // goodness cap |Z_{i,j}| < delta |A_i|
                    if ratio_ge(grown.len(), ai_len, delta) {
                        return Err(MachineryError::Hypothesis(format!(
                            "pair ({i}, {j}): non-expanding set of size {} cannot be absorbed; \
                             witness {:?}",
                            x.len(),
                            x
                        )));
                    }
                    z[i][j] = grown;
                    augmented = true;
                    break 'pairs;
                }
            }
        }
        if !augmented {
            let mut contraction = a.clone();
            for (pos, set) in blocks.into_iter().enumerate() {
                contraction.blocks[pos].vertices = set;
            }
            // independent validation of the advertised expansion
            match check_expanding(host, &contraction, &tau, exhaustive_limit) {
                ExpandVerdict::Fail { i, j, x } => {
                    return Err(MachineryError::Certification(format!(
                        "contraction not {tau}-expanding: pair ({i}, {j}), witness {x:?}"
                    )))
                }
                _ => {}
            }
            if level == CheckLevel::Strict {
                let floor = exact::one() - delta * exact::rint(k as i64);
                for pos in 0..k {
                    let kept = contraction.vertices(pos).len();
                    let orig = a.vertices(pos).len();
                    if !ratio_ge(kept, orig, &floor) {
                        return Err(MachineryError::Certification(format!(
                            "block {pos} kept {kept}/{orig}, below 1 - delta*K = {floor}"
                        )));
                    }
                }
            }
            return Ok((contraction, tau));
        }
    }
}

/// Layered reachability from `v` through the contraction blocks in position
/// order `[i1, middle ascending, i2]`, then an induced path extracted from
/// the parent walk by chord shortcutting.
pub fn rainbow_path(
    host: &Graph,
    a: &Blockade,
    contraction: &Blockade,
    i1: usize,
    v: usize,
    i2: usize,
    y: &[usize],
    gamma: &Rat,
    delta: &Rat,
    level: CheckLevel,
) -> Result<Vec<usize>, MachineryError> {
    let rho = a.len();
    if rho < 2 || i1 >= rho || i2 >= rho || i1 == i2 {
        return Err(MachineryError::Hypothesis(format!(
            "need two distinct block positions inside a blockade of length {rho}"
        )));
    }
    if contraction.len() != rho {
        return Err(MachineryError::Hypothesis(
            "contraction length differs from the blockade".into(),
        ));
    }
    for pos in 0..rho {
        let inner = contraction.vertices(pos);
        let outer = a.vertices(pos);
        if !inner.iter().all(|w| outer.contains(w)) {
            return Err(MachineryError::Hypothesis(format!(
                "contraction block {pos} is not inside its parent block"
            )));
        }
    }
    if !contraction.vertices(i1).contains(&v) {
        return Err(MachineryError::Hypothesis(format!(
            "vertex {v} is not in contraction block {i1}"
        )));
    }
    if y.is_empty() || !y.iter().all(|w| contraction.vertices(i2).contains(w)) {
        return Err(MachineryError::Hypothesis(format!(
            "target set must be a nonempty subset of contraction block {i2}"
        )));
    }
    if level == CheckLevel::Strict {
        positive_proper("gamma", gamma)?;
        positive_proper("delta", delta)?;
        if gamma > &exact::rat(1, 8) {
            return Err(MachineryError::Hypothesis(format!("gamma = {gamma} exceeds 1/8")));
        }
        if !ratio_ge(y.len(), a.vertices(i2).len(), gamma) {
            return Err(MachineryError::Hypothesis(format!(
                "target set of size {} is below gamma = {gamma} of its parent block",
                y.len()
            )));
        }
        let spread = exact::powi(&(exact::rat(4, 1) * delta), rho as i64)
            * exact::rint(host.n() as i64);
        if spread > exact::rat(3, 1) {
            return Err(MachineryError::Hypothesis(format!(
                "(4 delta)^rho * n = {spread} exceeds 3"
            )));
        }
    }

    let mut order = vec![i1];
    let mut middle: Vec<usize> = (0..rho).filter(|p| *p != i1 && *p != i2).collect();
    middle.sort_unstable();
    order.extend(middle);
    order.push(i2);

    // parent[s][w] = predecessor of w in layer s, walking back to v
    let mut layers: Vec<Vec<usize>> = vec![vec![v]];
    let mut parents: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
    for step in 1..rho {
        let prev = &layers[step - 1];
        let reach = neighborhood(host, prev);
        let block = contraction.vertices(order[step]);
        let mut layer = Vec::new();
        let mut par = Vec::new();
        for &w in block {
            if super::mask_has(&reach, w) {
                let &p = prev
                    .iter()
                    .find(|&&p| host.has_edge(p, w))
                    .expect("reachable vertex has a parent");
                layer.push(w);
                par.push((w, p));
            }
        }
        if layer.is_empty() {
            return Err(MachineryError::Stage {
                stage: "rainbow_path",
                detail: format!("layer {step} is empty"),
            });
        }
        layers.push(layer);
        parents.push(par);
    }
    let y_mask = mask_of(host.n(), y);
    let target = layers[rho - 1]
        .iter()
        .copied()
        .find(|&w| super::mask_has(&y_mask, w))
        .ok_or(MachineryError::Stage {
            stage: "rainbow_path",
            detail: format!("layer {} reaches no target vertex", rho - 1),
        })?;

    // reconstruct the parent walk v .. target
    let mut walk = vec![target];
    let mut cur = target;
    for step in (1..rho).rev() {
        let &(_, p) = parents[step].iter().find(|(w, _)| *w == cur).unwrap();
        walk.push(p);
        cur = p;
    }
    walk.reverse();

    // chord shortcut: from each vertex jump to its last neighbor on the walk
    let mut path = vec![walk[0]];
    let mut at = 0usize;
    while at + 1 < walk.len() {
        let next = (at + 1..walk.len())
            .rev()
            .find(|&j| host.has_edge(walk[at], walk[j]))
            .expect("consecutive walk vertices are adjacent");
        path.push(walk[next]);
        at = next;
    }

    verify_rainbow_path(host, contraction, &path, v, y)?;
    Ok(path)
}

/// Independent re-check: induced path, at most one vertex per block, stated
/// endpoints.
fn verify_rainbow_path(
    host: &Graph,
    b: &Blockade,
    path: &[usize],
    v: usize,
    y: &[usize],
) -> Result<(), MachineryError> {
    let bad = |msg: String| Err(MachineryError::Certification(msg));
    if path.first() != Some(&v) {
        return bad("path does not start at the source".into());
    }
    match path.last() {
        Some(end) if y.contains(end) => {}
        _ => return bad("path does not end in the target set".into()),
    }
    for s in 0..path.len() {
        for t in s + 1..path.len() {
            let adjacent = host.has_edge(path[s], path[t]);
            if t == s + 1 && !adjacent {
                return bad(format!("consecutive vertices {} {} not adjacent", path[s], path[t]));
            }
            if t > s + 1 && adjacent {
                return bad(format!("chord {} {}", path[s], path[t]));
            }
        }
    }
    let mut used = std::collections::BTreeSet::new();
    for &w in path {
        let pos = (0..b.len()).find(|&p| b.vertices(p).contains(&w));
        match pos {
            None => return bad(format!("vertex {w} outside every block")),
            Some(p) => {
                if !used.insert(p) {
                    return bad(format!("two path vertices in block {p}"));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockade::equipartition;
    use crate::graph::Graph;

    fn two_complete_blocks() -> (Graph, Blockade) {
        // blocks {0..5} and {5..10}, complete between, empty inside
        let mut g = Graph::new(10);
        for u in 0..5 {
            for v in 5..10 {
                g.add_edge(u, v);
            }
        }
        let b = Blockade::from_vertex_sets(vec![(0..5).collect(), (5..10).collect()]);
        (g, b)
    }

    #[test]
    fn complete_pair_expands_for_any_tau() {
        let (g, b) = two_complete_blocks();
        assert_eq!(check_expanding(&g, &b, &exact::rint(100), 12), ExpandVerdict::Pass);
    }

    #[test]
    fn anticomplete_pair_fails_with_singleton() {
        let g = Graph::new(8);
        let b = Blockade::from_vertex_sets(vec![(0..4).collect(), (4..8).collect()]);
        match check_expanding(&g, &b, &exact::one(), 12) {
            ExpandVerdict::Fail { i: 0, j: 1, x } => assert_eq!(x, vec![0]),
            other => panic!("wanted a singleton failure, got {other:?}"),
        }
    }

    #[test]
    fn sampled_mode_reports_sample_count() {
        let (g, b) = two_complete_blocks();
        match check_expanding(&g, &b, &exact::rint(2), 3) {
            ExpandVerdict::SampledPass { samples } => assert!(samples > 0),
            other => panic!("wanted sampled pass, got {other:?}"),
        }
    }

    #[test]
    fn contraction_of_complete_pair_is_identity() {
        let (g, a) = two_complete_blocks();
        let (b, tau) =
            expanding_contraction(&g, &a, &exact::rat(1, 8), CheckLevel::Strict, 12, 100_000)
                .unwrap();
        assert_eq!(tau, exact::rint(2));
        for pos in 0..a.len() {
            assert_eq!(a.vertices(pos), b.vertices(pos));
        }
    }

    #[test]
    fn divergent_input_is_rejected_with_witness() {
        let g = Graph::new(8);
        let a = Blockade::from_vertex_sets(vec![(0..4).collect(), (4..8).collect()]);
        let err =
            expanding_contraction(&g, &a, &exact::rat(1, 8), CheckLevel::Strict, 12, 100_000)
                .unwrap_err();
        match err {
            MachineryError::Hypothesis(msg) => assert!(msg.contains("divergent"), "{msg}"),
            other => panic!("wanted hypothesis error, got {other}"),
        }
    }

    #[test]
    fn random_nondivergent_contraction_expands_exhaustively() {
        let (g, a) = crate::machinery::gen::dense_matched_blocks(&[10, 10, 10], 7);
        let delta = exact::rat(1, 12);
        match expanding_contraction(&g, &a, &delta, CheckLevel::Strict, 12, 1_000_000) {
            Ok((b, tau)) => {
                assert_eq!(tau, exact::rint(3));
                assert_eq!(check_expanding(&g, &b, &tau, 12), ExpandVerdict::Pass);
                assert!(b.validate(&g).is_ok());
            }
            Err(e) => panic!("seed-7 instance should contract cleanly: {e}"),
        }
    }

    #[test]
    fn rainbow_path_single_edge() {
        let (g, a) = two_complete_blocks();
        let y: Vec<usize> = (5..10).collect();
        let p = rainbow_path(
            &g,
            &a,
            &a,
            0,
            0,
            1,
            &y,
            &exact::rat(1, 8),
            &exact::rat(1, 16),
            CheckLevel::Relaxed,
        )
        .unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[0], 0);
        assert!(y.contains(&p[1]));
    }

    #[test]
    fn isolated_source_fails_at_layer_one() {
        let g = Graph::new(6);
        let a = Blockade::from_vertex_sets(vec![vec![0, 1, 2], vec![3, 4, 5]]);
        let err = rainbow_path(
            &g,
            &a,
            &a,
            0,
            0,
            1,
            &[3, 4, 5],
            &exact::rat(1, 8),
            &exact::rat(1, 16),
            CheckLevel::Relaxed,
        )
        .unwrap_err();
        assert_eq!(
            err,
            MachineryError::Stage { stage: "rainbow_path", detail: "layer 1 is empty".into() }
        );
    }

    #[test]
    fn three_block_chain_gives_length_two_path() {
        // chain structure: block 0 = {0,1}, block 1 = {2,3}, block 2 = {4,5};
        // edges only 0-2, 1-3, 2-4, 3-5, so the path must thread the middle
        let g = Graph::from_edges(6, &[(0, 2), (1, 3), (2, 4), (3, 5)]);
        let a = Blockade::from_vertex_sets(vec![vec![0, 1], vec![2, 3], vec![4, 5]]);
        let p = rainbow_path(
            &g,
            &a,
            &a,
            0,
            0,
            2,
            &[4, 5],
            &exact::rat(1, 8),
            &exact::rat(1, 16),
            CheckLevel::Relaxed,
        )
        .unwrap();
        assert_eq!(p, vec![0, 2, 4]);

        // cross-check against the exhaustive rainbow-copy search
        let path3 = Graph::path(3);
        assert!(crate::blockade::find_rainbow_copy(&g, &a, &path3, None).is_some());
    }

    #[test]
    fn chord_shortcut_keeps_path_induced() {
        // walk 0-2-4 exists but 0-4 is also an edge: path must shortcut to 0-4
        let g = Graph::from_edges(6, &[(0, 2), (2, 4), (0, 4)]);
        let a = Blockade::from_vertex_sets(vec![vec![0, 1], vec![2, 3], vec![4, 5]]);
        let p = rainbow_path(
            &g,
            &a,
            &a,
            0,
            0,
            2,
            &[4],
            &exact::rat(1, 8),
            &exact::rat(1, 16),
            CheckLevel::Relaxed,
        )
        .unwrap();
        assert_eq!(p, vec![0, 4]);
    }
}
