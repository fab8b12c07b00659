//! Selective covering: partitions a covering set or extracts a subset with
//! two-sided neighbourhood density bounds on k blocks.

use super::{
    frac_cmp, intersects, mask_has, mask_of, CheckLevel, MachineryError, Scaled,
};
use crate::blockade::Blockade;
use crate::exact::{self, Rat};
use crate::graph::Graph;
use num::{BigInt, Signed};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;

/// One class of the partition variant: a piece of the covering set together
/// with k blocks its neighbourhood misses almost entirely.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectiveClass {
    pub x: Vec<usize>,
    pub j_set: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectiveOutcome {
    /// The covering set was absorbed completely: a partition into at most
    /// `K^k` classes, each with `|N(X) ∩ B_j| < K^k alpha |B_j|` on its
    /// blocks.
    Partition { classes: Vec<SelectiveClass> },
    /// A subset X and k blocks with
    /// `|G|^{-c} alpha <= |N(X) ∩ B_j| / |B_j| < K^k alpha + eps`.
    Pair { x: Vec<usize>, j_set: Vec<usize> },
}

fn count_in(host: &Graph, xs: &[usize], block_mask: &[u64]) -> usize {
    let nb = super::neighborhood(host, xs);
    super::count_and(&nb, block_mask)
}

#[allow(clippy::too_many_arguments)]
pub fn selective_cover(
    host: &Graph,
    a_set: &[usize],
    b: &Blockade,
    k: usize,
    c: &Rat,
    alpha: &Rat,
    eps: &Rat,
    level: CheckLevel,
) -> Result<SelectiveOutcome, MachineryError> {
    let hyp = |msg: String| Err(MachineryError::Hypothesis(msg));
    b.validate(host)
        .map_err(|e| MachineryError::Hypothesis(format!("invalid blockade: {e}")))?;
    let kk = b.len();
    if k == 0 || k > kk {
        return hyp(format!("need 1 <= k <= length, got k = {k} with length {kk}"));
    }
    let mut a: Vec<usize> = a_set.to_vec();
    a.sort_unstable();
    a.dedup();
    if a.len() != a_set.len() {
        return hyp("covering set repeats vertices".into());
    }
    if a.is_empty() {
        return hyp("empty covering set does not cover the blockade".into());
    }
    let all_b: Vec<usize> = (0..kk).flat_map(|i| b.vertices(i).iter().copied()).collect();
    let bm = mask_of(host.n(), &all_b);
    if a.iter().any(|&v| v >= host.n() || mask_has(&bm, v)) {
        return hyp("covering set meets the blockade".into());
    }
    let am = mask_of(host.n(), &a);
    if let Some(&w) = all_b.iter().find(|&&w| !intersects(host.row(w), &am)) {
        return hyp(format!("vertex {w} of the blockade has no neighbour in the covering set"));
    }
    // the pair variant's upper bound consumes this degree cap, so it is
    // checked in both modes
    for &v in &a {
        for i in 0..kk {
            let bi = b.vertices(i);
            let deg = bi.iter().filter(|&&w| host.has_edge(v, w)).count();
            if BigInt::from(deg) * eps.denom() > eps.numer() * BigInt::from(bi.len()) {
                return hyp(format!(
                    "vertex {v} has {deg} neighbours in block {i}, above eps = {eps}"
                ));
            }
        }
    }
    if level == CheckLevel::Strict {
        for (name, r) in [("c", c), ("alpha", alpha), ("eps", eps)] {
            if !r.is_positive() {
                return hyp(format!("{name} = {r} must be positive"));
            }
        }
        let need = (exact::rat(2, 1) + exact::one() / c) * exact::rint(k as i64 - 1);
        if exact::rint(kk as i64) < need {
            return hyp(format!("length {kk} below (2 + 1/c)(k - 1) = {need}"));
        }
    }

    let n_host = host.n() as u64;
    let block_masks: Vec<Vec<u64>> = (0..kk).map(|i| mask_of(host.n(), b.vertices(i))).collect();
    let kpow = exact::powi(&exact::rint(kk as i64), k as i64);
    // cap on the density ladder: the hypotheses force t < 1 + 1/c
    let t_cap = {
        let bound = exact::one() + exact::one() / c;
        let f = exact::floor_int(&bound);
        super::big_to_usize(&f, "t cap")? + 2
    };

    // per k-subset state, keyed by the sorted block positions
    let mut state: BTreeMap<Vec<usize>, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    let mut y_mask = vec![0u64; super::word_count(host.n()).max(1)];
    let mut next = 0usize;
    while next < a.len() {
        let v = a[next];
        next += 1;
        let fresh: Vec<Vec<usize>> = (0..kk)
            .map(|i| {
                b.vertices(i)
                    .iter()
                    .copied()
                    .filter(|&w| host.has_edge(v, w) && !mask_has(&y_mask, w))
                    .collect()
            })
            .collect();
        let mut order: Vec<usize> = (0..kk).collect();
        order.sort_by(|&p, &q| {
            frac_cmp(fresh[p].len(), b.vertices(p).len(), fresh[q].len(), b.vertices(q).len())
                .then(p.cmp(&q))
        });
        if fresh[order[k - 1]].is_empty() {
            // nothing fresh on the k sparsest blocks: absorb v there
            let mut j: Vec<usize> = order[..k].to_vec();
            j.sort_unstable();
            state.entry(j).or_default().0.push(v);
            continue;
        }
        // largest t whose window start still clears |G|^{-1+(t-1)c}
        let ratio_at = |idx: usize| {
            exact::rat(fresh[order[idx]].len() as i64, b.vertices(order[idx]).len() as i64)
        };
        let mut t_star = None;
        for t in 1..=t_cap {
            let lo = t * (k - 1);
            if lo >= kk {
                break;
            }
            let thr = Scaled::new(exact::one(), exact::rint(-1) + exact::rint(t as i64 - 1) * c);
            if thr.cmp_at(n_host, &ratio_at(lo)) != Ordering::Greater {
                t_star = Some(t);
            }
        }
        let t = t_star.expect("t = 1 always qualifies when the k-th count is positive");
        let lo = t * (k - 1);
        let hi = (t + 1) * (k - 1);
        if hi >= kk {
            return Err(MachineryError::Stage {
                stage: "selective_cover",
                detail: format!(
                    "density window for vertex {v} needs position {} of {kk} blocks",
                    hi + 1
                ),
            });
        }
        // the window spans at most a |G|^c density factor; needed to keep the
        // balance invariant
        for p in lo..=hi {
            for q in lo..=hi {
                if p == q {
                    continue;
                }
                let lhs = Scaled::new(ratio_at(p), c.clone());
                if lhs.cmp_at(n_host, &ratio_at(q)) == Ordering::Less {
                    return Err(MachineryError::Stage {
                        stage: "selective_cover",
                        detail: format!("density window around vertex {v} spans beyond |G|^c"),
                    });
                }
            }
        }
        let mut j: Vec<usize> = order[lo..=hi].to_vec();
        j.sort_unstable();
        let entry = state.entry(j.clone()).or_default();
        // would the augmented catch stay below alpha on every window block?
        let mut overflow = None;
        for &jj in &j {
            let held = entry.1.iter().filter(|&&w| mask_has(&block_masks[jj], w)).count();
            let grown = held + fresh[jj].len();
            if BigInt::from(grown) * alpha.denom()
                >= alpha.numer() * BigInt::from(b.vertices(jj).len())
            {
                overflow = Some(jj);
                break;
            }
        }
        if overflow.is_none() {
            entry.0.push(v);
            for &jj in &j {
                for &w in &fresh[jj] {
                    y_mask[w / 64] |= 1 << (w % 64);
                    entry.1.push(w);
                }
            }
            continue;
        }
        // the catch tipped past alpha: X(J) plus v satisfies both bounds
        let mut x = entry.0.clone();
        x.push(v);
        x.sort_unstable();
        for &jj in &j {
            let cnt = count_in(host, &x, &block_masks[jj]);
            let size = b.vertices(jj).len();
            let ratio = exact::rat(cnt as i64, size as i64);
            let lower = Scaled::new(alpha.clone(), -c.clone());
            if lower.cmp_at(n_host, &ratio) == Ordering::Greater {
                return Err(MachineryError::Certification(format!(
                    "block {jj}: density {cnt}/{size} below |G|^-c alpha"
                )));
            }
            let upper = &kpow * alpha + eps;
            if ratio >= upper {
                return Err(MachineryError::Certification(format!(
                    "block {jj}: density {cnt}/{size} reaches K^k alpha + eps = {upper}"
                )));
            }
        }
        return Ok(SelectiveOutcome::Pair { x, j_set: j });
    }

    // everything absorbed: report the partition and re-verify its bounds
    let mut classes = Vec::new();
    let mut total = 0usize;
    for (j, (x, _)) in state.iter() {
        if x.is_empty() {
            continue;
        }
        total += x.len();
        let mut x = x.clone();
        x.sort_unstable();
        for &jj in j {
            let cnt = count_in(host, &x, &block_masks[jj]);
            let cap = &kpow * alpha * exact::rint(b.vertices(jj).len() as i64);
            if exact::rint(cnt as i64) >= cap {
                return Err(MachineryError::Certification(format!(
                    "partition class on block {jj} reaches K^k alpha"
                )));
            }
        }
        classes.push(SelectiveClass { x, j_set: j.clone() });
    }
    if total != a.len() {
        return Err(MachineryError::Certification(
            "partition classes do not cover the covering set".into(),
        ));
    }
    Ok(SelectiveOutcome::Partition { classes })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `blocks` of size `bs` plus `|A| = extra` covering vertices appended
    /// after them; `adj[a]` lists which block vertices each covering vertex
    /// sees (by global index).
    fn covering_instance(blocks: usize, bs: usize, adj: &[Vec<usize>]) -> (Graph, Blockade, Vec<usize>) {
        let nb = blocks * bs;
        let n = nb + adj.len();
        let mut g = Graph::new(n);
        let mut a = Vec::new();
        for (i, nbrs) in adj.iter().enumerate() {
            let av = nb + i;
            a.push(av);
            for &w in nbrs {
                g.add_edge(av, w);
            }
        }
        let sets = (0..blocks).map(|i| (i * bs..(i + 1) * bs).collect()).collect();
        (g, Blockade::from_vertex_sets(sets), a)
    }

    #[test]
    fn single_vertex_seeing_everything_yields_the_pair_variant() {
        let (g, b, a) = covering_instance(2, 3, &[(0..6).collect()]);
        let out = selective_cover(
            &g,
            &a,
            &b,
            1,
            &exact::one(),
            &exact::rat(1, 2),
            &exact::rat(2, 1),
            CheckLevel::Strict,
        )
        .unwrap();
        match out {
            SelectiveOutcome::Pair { x, j_set } => {
                assert_eq!(x, a);
                assert_eq!(j_set.len(), 1);
            }
            other => panic!("wanted the pair variant, got {other:?}"),
        }
    }

    #[test]
    fn empty_covering_set_is_rejected() {
        let (g, b, _) = covering_instance(2, 3, &[(0..6).collect()]);
        let err = selective_cover(
            &g,
            &[],
            &b,
            1,
            &exact::one(),
            &exact::rat(1, 2),
            &exact::one(),
            CheckLevel::Strict,
        )
        .unwrap_err();
        match err {
            MachineryError::Hypothesis(msg) => assert!(msg.contains("cover"), "{msg}"),
            other => panic!("wanted hypothesis error, got {other}"),
        }
    }

    #[test]
    fn one_neighbour_each_absorbs_into_a_partition() {
        // covering vertex a_w sees exactly block vertex w, so the two blocks
        // it misses always absorb it with nothing caught
        let adj: Vec<Vec<usize>> = (0..12).map(|w| vec![w]).collect();
        let (g, b, a) = covering_instance(3, 4, &adj);
        let out = selective_cover(
            &g,
            &a,
            &b,
            2,
            &exact::one(),
            &exact::rat(1, 2),
            &exact::rat(1, 2),
            CheckLevel::Strict,
        )
        .unwrap();
        match out {
            SelectiveOutcome::Partition { classes } => {
                assert_eq!(classes.len(), 3);
                let total: usize = classes.iter().map(|c| c.x.len()).sum();
                assert_eq!(total, 12);
                for class in &classes {
                    assert_eq!(class.j_set.len(), 2);
                }
            }
            other => panic!("wanted the partition variant, got {other:?}"),
        }
    }

    #[test]
    fn seeded_instance_returns_a_verified_variant() {
        // block vertex w is seen by covering vertices w and w+1 (mod 12);
        // catches accumulate until the pair variant fires
        let adj: Vec<Vec<usize>> = (0..12).map(|i| vec![i, (i + 1) % 12]).collect();
        let (g, b, a) = covering_instance(3, 4, &adj);
        let out = selective_cover(
            &g,
            &a,
            &b,
            2,
            &exact::one(),
            &exact::rat(1, 4),
            &exact::rat(3, 4),
            CheckLevel::Strict,
        )
        .unwrap();
        match out {
            SelectiveOutcome::Pair { x, j_set } => {
                assert!(!x.is_empty());
                assert_eq!(j_set.len(), 2);
            }
            SelectiveOutcome::Partition { classes } => {
                assert!(!classes.is_empty());
            }
        }
    }
}
