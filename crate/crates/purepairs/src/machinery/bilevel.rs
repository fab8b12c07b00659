//! Bi-levellings over a blockade: building one from scratch, walking its
//! connecting paths, extending it a level at a time, and stacking extensions
//! until the height is exact.

use super::{
    big_to_usize, build_grading, build_levelling, containing_block, count_and,
    expanding_contraction, intersects, mask_has, mask_of, neighborhood, or_into, selective_cover,
    BiLevelling, CheckLevel, Grading, Levelling, MachineryError, SelectiveOutcome,
};
use crate::blockade::{is_divergent, Blockade};
use crate::exact::{self, Rat};
use crate::graph::{Graph, Search};
use num::BigInt;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Divergence, expansion and linkage thresholds for the builder.  Relaxed
/// runs pick whatever values suit the instance; strict mode checks them
/// against the derivation's inequalities before starting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BilevelPack {
    #[serde(with = "crate::exact::rat_string")]
    pub gamma: Rat,
    /// Also fixes the expansion rate `1/(4 delta)` of the first contraction.
    #[serde(with = "crate::exact::rat_string")]
    pub delta: Rat,
    #[serde(with = "crate::exact::rat_string")]
    pub lambda: Rat,
    /// Expansion parameter for the contraction of the graded family;
    /// `None` derives `32 K delta / 3`.  Strict mode insists on the derived
    /// value.
    #[serde(with = "crate::exact::rat_string_opt", default)]
    pub delta_family: Option<Rat>,
}

/// Thresholds consumed by a single extension step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtendParams {
    #[serde(with = "crate::exact::rat_string")]
    pub delta: Rat,
    #[serde(with = "crate::exact::rat_string")]
    pub lambda: Rat,
    #[serde(with = "crate::exact::rat_string")]
    pub gamma: Rat,
    /// Family-size floor: every family block keeps at least `eta` times its
    /// ambient block.
    #[serde(with = "crate::exact::rat_string")]
    pub eta: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BilevelOutput {
    pub bilevelling: BiLevelling,
    /// Ambient position of each family block, aligned with `blocks`.
    pub positions: Vec<usize>,
}

fn stage(stage: &'static str, detail: String) -> MachineryError {
    MachineryError::Stage { stage, detail }
}

/// Layer budget tied to the density exponent: `rho = ceil(1 + 1/c)`.
pub fn rho_for(c: &Rat) -> Result<usize, MachineryError> {
    if !num::Signed::is_positive(c) {
        return Err(MachineryError::Hypothesis(format!("c = {c} must be positive")));
    }
    big_to_usize(&exact::ceil_int(&(exact::one() + c.recip())), "rho")
}

/// Blockade length the strict exact-height construction demands:
/// `ceil(k (3 + 1/c)^(ell + 2))`.
pub fn required_ambient_length(k: usize, c: &Rat, ell: usize) -> Result<BigInt, MachineryError> {
    if !num::Signed::is_positive(c) {
        return Err(MachineryError::Hypothesis(format!("c = {c} must be positive")));
    }
    let grow = exact::powi(&(exact::rint(3) + c.recip()), ell as i64 + 2);
    Ok(exact::ceil_int(&(exact::rint(k as i64) * grow)))
}

fn gate_divergence(
    host: &Graph,
    a: &Blockade,
    gamma: &Rat,
    delta: &Rat,
    budget: u64,
) -> Result<(), MachineryError> {
    match is_divergent(host, a, gamma, delta, budget) {
        Ok(Search::Absent) => Ok(()),
        Ok(Search::Found(w)) => Err(MachineryError::Hypothesis(format!(
            "blockade is ({gamma}, {delta})-divergent between blocks {} and {}",
            w.i, w.j
        ))),
        Ok(Search::Inconclusive) => Err(MachineryError::DivergenceInconclusive(format!(
            "non-divergence at ({gamma}, {delta}) not settled within budget {budget}"
        ))),
        Err(e) => Err(MachineryError::Hypothesis(format!("divergence check: {e}"))),
    }
}

fn gate_linkage(host: &Graph, a: &Blockade, lambda: &Rat) -> Result<(), MachineryError> {
    let met = a
        .metrics(host)
        .map_err(|e| MachineryError::Hypothesis(format!("metrics: {e}")))?;
    if &met.linkage > lambda {
        return Err(MachineryError::Hypothesis(format!(
            "measured linkage {} exceeds lambda = {lambda}",
            met.linkage
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// connector search
// ---------------------------------------------------------------------------

/// Minimum-length induced path from `u` through distinct candidate blocks to
/// a vertex with a neighbour in `target`.  Interior vertices must avoid
/// `target` entirely, so the result's non-endpoint vertices are anticomplete
/// to it.  Smallest depth first, then smallest block and vertex.
fn search_connector(
    host: &Graph,
    b: &Blockade,
    cand: &[usize],
    u: usize,
    target: &[u64],
    max_edges: usize,
) -> Option<Vec<usize>> {
    for depth in 1..=max_edges {
        let mut path = vec![u];
        let mut used = vec![false; cand.len()];
        if connector_dfs(host, b, cand, target, depth, &mut path, &mut used) {
            return Some(path);
        }
    }
    None
}

fn connector_dfs(
    host: &Graph,
    b: &Blockade,
    cand: &[usize],
    target: &[u64],
    remaining: usize,
    path: &mut Vec<usize>,
    used: &mut [bool],
) -> bool {
    let last = *path.last().unwrap();
    for (ci, &pos) in cand.iter().enumerate() {
        if used[ci] {
            continue;
        }
        for &x in b.vertices(pos) {
            if !host.has_edge(last, x) {
                continue;
            }
            if path[..path.len() - 1].iter().any(|&p| host.has_edge(p, x)) {
                continue;
            }
            let touches = intersects(host.row(x), target);
            if remaining == 1 {
                if touches {
                    path.push(x);
                    return true;
                }
                continue;
            }
            if touches {
                continue;
            }
            path.push(x);
            used[ci] = true;
            if connector_dfs(host, b, cand, target, remaining - 1, path, used) {
                return true;
            }
            used[ci] = false;
            path.pop();
        }
    }
    false
}

// ---------------------------------------------------------------------------
// chain typing
// ---------------------------------------------------------------------------

/// Walks the smallest-index chain from `f` up through the grading layers to
/// the apex, finds the first chain vertex with a neighbour on the connector
/// past its start, and returns the `(suffix, climb)` type: how much of the
/// connector and of the chain the glued path keeps.
fn chain_type_for(
    host: &Graph,
    f: usize,
    witness: &[usize],
    layers: &[Vec<usize>],
    p_path: &[usize],
) -> Option<(usize, usize)> {
    let t = layers.len() - 1;
    let mut chain = Vec::with_capacity(t + 1);
    chain.push(witness.iter().copied().find(|&z| host.has_edge(f, z))?);
    for li in (0..t).rev() {
        let cur = *chain.last().unwrap();
        chain.push(layers[li].iter().copied().find(|&z| host.has_edge(cur, z))?);
    }
    let s_idx = chain
        .iter()
        .position(|&z| p_path[1..].iter().any(|&p| host.has_edge(z, p)))?;
    let qs = chain[s_idx];
    let r = (1..p_path.len()).rev().find(|&ri| host.has_edge(qs, p_path[ri]))?;
    Some((p_path.len() - r, s_idx + 2))
}

// ---------------------------------------------------------------------------
// the build pipeline
// ---------------------------------------------------------------------------

struct PipelineOut {
    bl: BiLevelling,
    positions: Vec<usize>,
}

#[allow(clippy::too_many_arguments)]
fn bilevel_pipeline(
    host: &Graph,
    a: &Blockade,
    rho: usize,
    pack: &BilevelPack,
    level: CheckLevel,
    exhaustive_limit: usize,
    budget: u64,
) -> Result<PipelineOut, MachineryError> {
    let kk = a.len();
    let n = host.n();
    if kk <= rho {
        return Err(MachineryError::Hypothesis(format!(
            "blockade length {kk} leaves nothing beyond the {rho} grading blocks"
        )));
    }
    let mut audit: Vec<String> = Vec::new();

    // trim every block to its expanding core
    let (b_blk, tau) = expanding_contraction(host, a, &pack.delta, level, exhaustive_limit, budget)?;
    audit.push(format!("expanding contraction at rate {tau}"));

    // grade the family from an apex in the first rho blocks
    let h1: Vec<usize> = (0..rho).collect();
    let mut found: Option<(usize, usize, Grading, Vec<usize>)> = None;
    let mut last_err = stage("grading", "no usable apex candidate".into());
    let mut attempts = 0usize;
    'apex: for &h0 in &h1 {
        let others: Vec<usize> = h1
            .iter()
            .filter(|&&h| h != h0)
            .flat_map(|&h| b_blk.vertices(h).iter().copied())
            .collect();
        let om = mask_of(n, &others);
        for &u in b_blk.vertices(h0) {
            if !intersects(host.row(u), &om) {
                continue;
            }
            attempts += 1;
            if attempts > 8 {
                break 'apex;
            }
            match build_grading(host, &b_blk, &h1, h0, u, rho, &tau, level, exhaustive_limit) {
                Ok(g) => {
                    found = Some((h0, u, g.grading, g.j_set));
                    break 'apex;
                }
                Err(e) => last_err = e,
            }
        }
    }
    let (h_1, u, grading, j1) = found.ok_or(last_err)?;
    let t = grading.levelling.height();
    let n1 = grading.blocks.len();
    audit.push(format!(
        "grading: apex {u} in block {h_1}, height {t}, {n1} graded blocks"
    ));
    if n1 < rho {
        return Err(stage(
            "family contraction",
            format!("only {n1} graded blocks, need at least rho = {rho}"),
        ));
    }

    // contract the graded family at the derived (or supplied) rate
    let delta2 = match &pack.delta_family {
        Some(d) => d.clone(),
        None => exact::rat(32, 3) * exact::rint(kk as i64) * &pack.delta,
    };
    let c_blk = Blockade::from_vertex_sets(grading.blocks.clone());
    let (d_blk, tau2) =
        expanding_contraction(host, &c_blk, &delta2, level, exhaustive_limit, budget)?;
    audit.push(format!("family contraction at rate {tau2}"));

    // connector: an induced path from the apex, through spare blocks, to a
    // vertex seeing the first rho - 1 contracted grades
    let taken: BTreeSet<usize> = h1.iter().chain(j1.iter()).copied().collect();
    let h2: Vec<usize> = (0..kk).filter(|p| !taken.contains(p)).take(rho - 2).collect();
    if h2.len() + 2 < rho {
        return Err(stage(
            "connector",
            format!("only {} spare blocks, need rho - 2 = {}", h2.len(), rho - 2),
        ));
    }
    let mut dh3 = vec![0u64; super::word_count(n).max(1)];
    for g in 0..rho - 1 {
        or_into(&mut dh3, &mask_of(n, d_blk.vertices(g)));
    }
    if intersects(host.row(u), &dh3) {
        return Err(stage("connector", format!("apex {u} already meets the contracted grades")));
    }
    let p_path = search_connector(host, &b_blk, &h2, u, &dh3, rho.saturating_sub(2))
        .ok_or_else(|| {
            stage(
                "connector",
                format!("no induced connector within {} edges", rho.saturating_sub(2)),
            )
        })?;
    let v = *p_path.last().unwrap();
    let h_2 = *h2
        .iter()
        .find(|&&h| b_blk.vertices(h).contains(&v))
        .expect("connector endpoint lies in a candidate block");
    audit.push(format!("connector {:?} ends in block {h_2}", p_path));

    // level the contracted grades from the connector's endpoint
    let mut d_sets: Vec<Vec<usize>> = (0..n1).map(|g| d_blk.vertices(g).to_vec()).collect();
    d_sets.push(b_blk.vertices(h_2).to_vec());
    let d2 = Blockade::from_vertex_sets(d_sets);
    let apex_pos = n1;
    let h_lev: Vec<usize> = (0..rho - 1).chain(std::iter::once(apex_pos)).collect();
    let lout = build_levelling(host, &d2, &h_lev, apex_pos, v, rho, &tau2, level, exhaustive_limit)?;
    let inner_height = lout.levelling.height() - 1;
    let m_inner: Vec<Vec<usize>> =
        lout.levelling.layers[..lout.levelling.layers.len() - 1].to_vec();
    audit.push(format!(
        "inner levelling from {v}: height {inner_height}, {} candidate blocks",
        lout.blocks.len()
    ));

    // drop everything the connector's neighbourhood touches, then bucket the
    // survivors by glued-path type
    let pmask = neighborhood(host, &p_path);
    let glayers = &grading.levelling.layers;
    let mut per_grade: Vec<(usize, (usize, usize), Vec<usize>)> = Vec::new();
    for (idx, &g) in lout.j_set.iter().enumerate() {
        let fs: Vec<usize> = lout.blocks[idx]
            .iter()
            .copied()
            .filter(|&f| !mask_has(&pmask, f))
            .collect();
        let mut buckets: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for &f in &fs {
            if let Some(ty) = chain_type_for(host, f, &grading.witnesses[g], glayers, &p_path) {
                buckets.entry(ty).or_default().push(f);
            }
        }
        if let Some((ty, members)) = buckets
            .into_iter()
            .max_by(|x, y| x.1.len().cmp(&y.1.len()).then(y.0.cmp(&x.0)))
        {
            per_grade.push((g, ty, members));
        }
    }
    if per_grade.is_empty() {
        return Err(stage(
            "types",
            "the connector's neighbourhood swallows every candidate block".into(),
        ));
    }
    let mut by_type: BTreeMap<(usize, usize), Vec<(usize, Vec<usize>)>> = BTreeMap::new();
    for (g, ty, fs) in per_grade {
        by_type.entry(ty).or_default().push((g, fs));
    }
    let ((a_ty, b_ty), group) = by_type
        .into_iter()
        .max_by(|x, y| x.1.len().cmp(&y.1.len()).then(y.0.cmp(&x.0)))
        .unwrap();
    audit.push(format!("majority type ({a_ty}, {b_ty}) over {} grades", group.len()));

    // the kept connector suffix, apex first
    let lp = p_path.len();
    if a_ty >= lp + 1 || a_ty == 0 {
        return Err(stage("types", format!("suffix type {a_ty} out of range for {lp} vertices")));
    }
    let w_idx = lp - a_ty;
    let w = p_path[w_idx];
    let p_prime = &p_path[w_idx..];

    // parallel levelling: climb back up the grading layers from w, shunning
    // the suffix, landing in the lowest surviving grade's witness
    let pp_mask = mask_of(n, p_prime);
    let pp_tail_mask = mask_of(n, &p_prime[1..]);
    let j_low = group[0].0;
    let mut n_layers: Vec<Vec<usize>> = vec![vec![w]];
    for i in 1..b_ty {
        let li = t + 1 + i - b_ty;
        let avoid = if i == 1 { &pp_tail_mask } else { &pp_mask };
        let prev_mask = mask_of(n, n_layers.last().unwrap());
        let mut layer: Vec<usize> = glayers[li]
            .iter()
            .copied()
            .filter(|&z| !intersects(host.row(z), avoid) && intersects(host.row(z), &prev_mask))
            .collect();
        if i + 1 == b_ty {
            let ym = mask_of(n, &grading.witnesses[j_low]);
            layer.retain(|&z| mask_has(&ym, z));
        }
        if layer.is_empty() {
            return Err(stage("parallel levelling", format!("layer {i} is empty")));
        }
        n_layers.push(layer);
    }

    // per-grade witnesses inside the new base; keep only family vertices the
    // right witness still covers
    let base_mask = mask_of(n, n_layers.last().unwrap());
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut witnesses: Vec<Vec<usize>> = Vec::new();
    let mut grades: Vec<usize> = Vec::new();
    for (g, fs) in &group {
        let wg: Vec<usize> = grading.witnesses[*g]
            .iter()
            .copied()
            .filter(|&z| mask_has(&base_mask, z))
            .collect();
        if wg.is_empty() {
            continue;
        }
        let wm = mask_of(n, &wg);
        let kept: Vec<usize> =
            fs.iter().copied().filter(|&f| intersects(host.row(f), &wm)).collect();
        if kept.is_empty() {
            continue;
        }
        blocks.push(kept);
        witnesses.push(wg);
        grades.push(*g);
    }
    if blocks.is_empty() {
        return Err(stage("parallel levelling", "no grade survives the new base".into()));
    }

    // second levelling: the connector suffix as singleton layers, then the
    // inner levelling below its endpoint
    let mut m2_layers: Vec<Vec<usize>> =
        p_prime[..p_prime.len() - 1].iter().map(|&z| vec![z]).collect();
    m2_layers.extend(m_inner);

    let bl = BiLevelling {
        l: Levelling::new(n_layers),
        m: Levelling::new(m2_layers),
        blocks,
        witnesses_l: witnesses,
        witnesses_m: None,
        audit,
    };
    bl.verify(host, a)?;
    let positions: Vec<usize> = grades.iter().map(|&g| j1[g]).collect();
    Ok(PipelineOut { bl, positions })
}

fn trim_family(mut bl: BiLevelling, mut positions: Vec<usize>, k: usize) -> (BiLevelling, Vec<usize>) {
    bl.blocks.truncate(k);
    bl.witnesses_l.truncate(k);
    if let Some(wm) = &mut bl.witnesses_m {
        wm.truncate(k);
    }
    positions.truncate(k);
    (bl, positions)
}

/// Builds a bi-levelling with at least `k` family blocks over a non-divergent
/// blockade, trimmed to exactly `k`.  The height never exceeds
/// `3 rho - 3` and must fit the budget `ell`.
#[allow(clippy::too_many_arguments)]
pub fn build_bilevelling(
    host: &Graph,
    a: &Blockade,
    k: usize,
    c: &Rat,
    ell: usize,
    pack: &BilevelPack,
    level: CheckLevel,
    exhaustive_limit: usize,
    budget: u64,
) -> Result<BilevelOutput, MachineryError> {
    let hyp = |msg: String| Err(MachineryError::Hypothesis(msg));
    if k == 0 {
        return hyp("k must be at least 1".into());
    }
    let rho = rho_for(c)?;
    let kk = a.len();
    if level == CheckLevel::Strict {
        let want = k * rho.pow(4);
        if kk != want {
            return hyp(format!("strict mode needs k rho^4 = {want} blocks, got {kk}"));
        }
        if ell + 3 < 3 * rho {
            return hyp(format!("height budget ell = {ell} below 3 rho - 3 = {}", 3 * rho - 3));
        }
        let rr = exact::rint(rho as i64);
        let kb = exact::rint(kk as i64);
        let lam_cap = exact::one() / (exact::rint(512) * &rr * &rr * &kb);
        if pack.lambda > lam_cap {
            return hyp(format!("lambda = {} above 1/(512 rho^2 K) = {lam_cap}", pack.lambda));
        }
        let gam_cap = exact::rint(3) / (exact::rint(256) * &kb);
        if pack.gamma > gam_cap {
            return hyp(format!("gamma = {} above 3/(256 K) = {gam_cap}", pack.gamma));
        }
        let del_cap = exact::rint(3) * &rr / (exact::rint(128) * &kb * &kb);
        if pack.delta > del_cap {
            return hyp(format!("delta = {} above 3 rho/(128 K^2) = {del_cap}", pack.delta));
        }
        if pack.delta_family.is_some() {
            return hyp("strict mode derives the family contraction rate itself".into());
        }
        gate_linkage(host, a, &pack.lambda)?;
        gate_divergence(host, a, &pack.gamma, &pack.delta, budget)?;
    }
    let pipe = bilevel_pipeline(host, a, rho, pack, level, exhaustive_limit, budget)?;
    if pipe.bl.length() < k {
        return Err(stage(
            "types",
            format!("pipeline yields {} family blocks, need {k}", pipe.bl.length()),
        ));
    }
    let (bl, positions) = trim_family(pipe.bl, pipe.positions, k);
    bl.verify(host, a)?;
    let h = bl.height();
    if h > ell {
        return Err(MachineryError::Certification(format!(
            "height {h} exceeds the budget ell = {ell}"
        )));
    }
    if level == CheckLevel::Strict {
        if h + 3 > 3 * rho {
            return Err(MachineryError::Certification(format!(
                "height {h} exceeds 3 rho - 3 = {}",
                3 * rho - 3
            )));
        }
        let scale = BigInt::from(64usize) * BigInt::from(rho).pow(3) * BigInt::from(kk);
        for (cset, &pos) in bl.blocks.iter().zip(&positions) {
            let amb = a.vertices(pos).len();
            if BigInt::from(cset.len()) * &scale < BigInt::from(amb) {
                return Err(MachineryError::Certification(format!(
                    "family block at ambient position {pos} keeps {} of {amb} vertices, below 1/(64 rho^3 K)",
                    cset.len()
                )));
            }
        }
    }
    Ok(BilevelOutput { bilevelling: bl, positions })
}

// ---------------------------------------------------------------------------
// connecting paths
// ---------------------------------------------------------------------------

/// The induced path from `x` in the second levelling's base, up to the shared
/// apex, and back down to `y` in the first levelling's base.  Its length is
/// exactly the bi-levelling's height and its interior avoids every family
/// block.
pub fn connecting_path(
    host: &Graph,
    bl: &BiLevelling,
    x: usize,
    y: usize,
) -> Result<Vec<usize>, MachineryError> {
    let climb = |lev: &Levelling, from: usize, side: &str| -> Result<Vec<usize>, MachineryError> {
        if !lev.base().contains(&from) {
            return Err(MachineryError::Hypothesis(format!(
                "vertex {from} is not in the {side} base"
            )));
        }
        let mut out = vec![from];
        for li in (0..lev.layers.len() - 1).rev() {
            let cur = *out.last().unwrap();
            let parent = lev.layers[li]
                .iter()
                .copied()
                .find(|&z| host.has_edge(cur, z))
                .ok_or_else(|| {
                    MachineryError::Certification(format!(
                        "vertex {cur} has no parent in {side} layer {li}"
                    ))
                })?;
            out.push(parent);
        }
        Ok(out)
    };
    let up = climb(&bl.m, x, "second")?;
    let down = climb(&bl.l, y, "first")?;
    let mut path = up;
    path.extend(down.iter().rev().skip(1));

    // certify: induced, right length, interior clear of the family
    if path.len() != bl.height() + 1 {
        return Err(MachineryError::Certification(format!(
            "path has {} vertices, height {} demands {}",
            path.len(),
            bl.height(),
            bl.height() + 1
        )));
    }
    for i in 0..path.len() {
        for j in i + 1..path.len() {
            if path[i] == path[j] {
                return Err(MachineryError::Certification(format!(
                    "vertex {} repeats on the path",
                    path[i]
                )));
            }
            if host.has_edge(path[i], path[j]) != (j == i + 1) {
                return Err(MachineryError::Certification(format!(
                    "vertices {} and {} break the induced path",
                    path[i], path[j]
                )));
            }
        }
    }
    let fam: Vec<usize> = bl.blocks.iter().flatten().copied().collect();
    let fm = mask_of(host.n(), &fam);
    for &p in &path[1..path.len() - 1] {
        if intersects(host.row(p), &fm) {
            return Err(MachineryError::Certification(format!(
                "interior vertex {p} touches the family"
            )));
        }
    }
    Ok(path)
}

// ---------------------------------------------------------------------------
// extension
// ---------------------------------------------------------------------------

/// Grows the second levelling one layer through one family block, keeping `k`
/// of the remaining blocks at at least half size.  Height goes up by exactly
/// one.
#[allow(clippy::too_many_arguments)]
pub fn extend_bilevelling(
    host: &Graph,
    a: &Blockade,
    bl: &BiLevelling,
    k: usize,
    c: &Rat,
    params: &ExtendParams,
    level: CheckLevel,
    budget: u64,
) -> Result<BilevelOutput, MachineryError> {
    let hyp = |msg: String| Err(MachineryError::Hypothesis(msg));
    if k == 0 {
        return hyp("k must be at least 1".into());
    }
    if !num::Signed::is_positive(c) {
        return hyp(format!("c = {c} must be positive"));
    }
    bl.verify(host, a)?;
    let kk = bl.length();
    if kk <= k {
        return hyp(format!("cannot keep {k} of {kk} family blocks"));
    }
    let n = host.n();
    let npow = exact::ceil_pow(n, c);
    if level == CheckLevel::Strict {
        let need = (exact::rint(2) + c.recip()) * exact::rint(k as i64);
        if exact::rint(kk as i64) < need {
            return hyp(format!("family length {kk} below (2 + 1/c) k = {need}"));
        }
        let spend = exact::powi(&exact::rint(kk as i64), k as i64 + 1)
            * &params.delta
            * Rat::from(npow.clone())
            + &params.lambda
            + &params.gamma;
        if exact::rat(1, 2) * &params.eta < spend {
            return hyp(format!(
                "eta/2 = {} cannot pay K^(k+1) delta |G|^c + lambda + gamma = {spend}",
                exact::rat(1, 2) * &params.eta
            ));
        }
        let fam = bl.family_size(a)?;
        if fam < params.eta {
            return hyp(format!("family size {fam} below eta = {}", params.eta));
        }
        gate_linkage(host, a, &params.lambda)?;
        gate_divergence(host, a, &params.gamma, &params.delta, budget)?;
    }
    let alpha = &params.delta * Rat::from(npow) / &params.eta;
    let eps = &params.lambda / &params.eta;
    let c_blk = Blockade::from_vertex_sets(bl.blocks.clone());
    let outcome = selective_cover(host, bl.m.base(), &c_blk, k + 1, c, &alpha, &eps, level)?;

    let (x_set, through, j_rest, variant) = match outcome {
        SelectiveOutcome::Pair { x, j_set } => {
            let through = j_set[0];
            (x, through, j_set[1..].to_vec(), "pair")
        }
        SelectiveOutcome::Partition { classes } => {
            let c0m = mask_of(n, &bl.blocks[0]);
            let mut best = 0usize;
            let mut bite = 0usize;
            for (i, cl) in classes.iter().enumerate() {
                let nb = neighborhood(host, &cl.x);
                let cnt = count_and(&nb, &c0m);
                if cnt > bite {
                    best = i;
                    bite = cnt;
                }
            }
            if bite == 0 {
                return Err(stage("extension", "no partition class reaches the first block".into()));
            }
            let cl = classes[best].clone();
            let j_rest: Vec<usize> = if cl.j_set.contains(&0) {
                cl.j_set.iter().copied().filter(|&j| j != 0).collect()
            } else {
                cl.j_set[..k].to_vec()
            };
            (cl.x, 0, j_rest, "partition")
        }
    };

    let xm = neighborhood(host, &x_set);
    let m_set: Vec<usize> =
        bl.blocks[through].iter().copied().filter(|&z| mask_has(&xm, z)).collect();
    if m_set.is_empty() {
        return Err(stage(
            "extension",
            format!("the selected set misses block {through} entirely"),
        ));
    }
    let mm = neighborhood(host, &m_set);
    let mut new_blocks: Vec<Vec<usize>> = Vec::new();
    for &j in &j_rest {
        let kept: Vec<usize> = bl.blocks[j]
            .iter()
            .copied()
            .filter(|&z| !mask_has(&xm, z) && mask_has(&mm, z))
            .collect();
        if kept.is_empty() {
            return Err(stage(
                "extension",
                format!("family block {j} is exhausted by the extension filters"),
            ));
        }
        new_blocks.push(kept);
    }

    // base of the first levelling shrinks to the witness of the lowest kept
    // block, which is anticomplete to everything below it
    let base2 = bl.witnesses_l[j_rest[0]].clone();
    let mut l_layers = bl.l.layers[..bl.l.layers.len() - 1].to_vec();
    l_layers.push(base2.clone());

    // second levelling grows: old base shrinks to the selected set, then the
    // bite it takes out of the chosen block
    let mut x_sorted = x_set.clone();
    x_sorted.sort_unstable();
    let mut m_layers = bl.m.layers[..bl.m.layers.len() - 1].to_vec();
    m_layers.push(x_sorted);
    m_layers.push(m_set.clone());

    // maximal witnesses inside the new base
    let mut wits: Vec<Vec<usize>> = Vec::new();
    let mut running = vec![0u64; super::word_count(n).max(1)];
    for kept in &new_blocks {
        let wg: Vec<usize> = base2
            .iter()
            .copied()
            .filter(|&z| !intersects(host.row(z), &running))
            .collect();
        wits.push(wg);
        or_into(&mut running, &mask_of(n, kept));
    }

    let mut audit = bl.audit.clone();
    audit.push(format!(
        "extended by the {variant} variant through block {through}: {} selectors, bite {}",
        x_set.len(),
        m_set.len()
    ));
    let bl2 = BiLevelling {
        l: Levelling::new(l_layers),
        m: Levelling::new(m_layers),
        blocks: new_blocks,
        witnesses_l: wits,
        witnesses_m: None,
        audit,
    };
    bl2.verify(host, a)?;
    if bl2.height() != bl.height() + 1 {
        return Err(MachineryError::Certification(format!(
            "height went from {} to {}, expected one more",
            bl.height(),
            bl2.height()
        )));
    }
    if level == CheckLevel::Strict {
        for (kept, &j) in bl2.blocks.iter().zip(&j_rest) {
            if 2 * kept.len() < bl.blocks[j].len() {
                return Err(MachineryError::Certification(format!(
                    "family block {j} kept {} of {} vertices, below half",
                    kept.len(),
                    bl.blocks[j].len()
                )));
            }
        }
    }
    let positions = bl2
        .blocks
        .iter()
        .map(|cb| {
            containing_block(a, cb).ok_or_else(|| {
                MachineryError::Certification("family block left its ambient block".into())
            })
        })
        .collect::<Result<Vec<usize>, _>>()?;
    Ok(BilevelOutput { bilevelling: bl2, positions })
}

// ---------------------------------------------------------------------------
// exact height
// ---------------------------------------------------------------------------

/// Builds a bi-levelling of height exactly `ell`: run the pipeline, measure
/// the height it reaches, then extend one level at a time until the budget is
/// spent, sizing the family ladder so `k` blocks survive at the end.
#[allow(clippy::too_many_arguments)]
pub fn exact_bilevelling(
    host: &Graph,
    a: &Blockade,
    k: usize,
    c: &Rat,
    ell: usize,
    pack: &BilevelPack,
    level: CheckLevel,
    exhaustive_limit: usize,
    budget: u64,
) -> Result<BilevelOutput, MachineryError> {
    let hyp = |msg: String| Err(MachineryError::Hypothesis(msg));
    if k == 0 {
        return hyp("k must be at least 1".into());
    }
    let rho = rho_for(c)?;
    if ell + 2 < 3 * rho {
        return hyp(format!("need ell >= 3 rho - 2 = {}, got {ell}", 3 * rho - 2));
    }
    let kk = a.len();
    let n = host.n();
    let npow = exact::ceil_pow(n, c);
    let mut run_pack = pack.clone();
    if level == CheckLevel::Strict {
        let kreq = required_ambient_length(k, c, ell)?;
        if BigInt::from(kk) != kreq {
            return hyp(format!("strict mode needs exactly {kreq} blocks, got {kk}"));
        }
        let rr = exact::rint(rho as i64);
        let kb = exact::rint(kk as i64);
        let cap = exact::powi(&exact::rat(1, 2), ell as i64 + 8) / (&rr * &rr * &rr * &kb);
        for (name, v) in [("lambda", &pack.lambda), ("gamma", &pack.gamma)] {
            if v > &cap {
                return hyp(format!("{name} = {v} above 2^-(8+ell)/(rho^3 K) = {cap}"));
            }
        }
        // the derivation's own expansion rate; formed only once the length
        // matches, since K^-K is astronomically small
        run_pack.delta = exact::powi(&kb, -(kk as i64)) / Rat::from(npow.clone());
        run_pack.delta_family = None;
        gate_linkage(host, a, &pack.lambda)?;
        gate_divergence(host, a, &pack.gamma, &run_pack.delta, budget)?;
    }

    let pipe = bilevel_pipeline(host, a, rho, &run_pack, level, exhaustive_limit, budget)?;
    let h0 = pipe.bl.height();
    if h0 > ell {
        return Err(stage("ladder", format!("pipeline height {h0} already exceeds ell = {ell}")));
    }
    let t = ell - h0;

    // family ladder: each extension spends one block plus selection overhead
    let step = exact::rint(2) + c.recip();
    let mut ks: Vec<BigInt> = vec![BigInt::from(k)];
    for _ in 0..t {
        let next = exact::ceil_int(&(&step * Rat::from(ks.last().unwrap().clone())));
        ks.push(next);
    }
    let k_start = big_to_usize(ks.last().unwrap(), "ladder length")?;
    if pipe.bl.length() < k_start {
        return Err(stage(
            "ladder",
            format!(
                "pipeline yields {} family blocks, the {t}-step ladder needs {k_start}",
                pipe.bl.length()
            ),
        ));
    }
    let (mut cur, mut positions) = trim_family(pipe.bl, pipe.positions, k_start);
    cur.verify(host, a)?;

    let rung_lambda = match level {
        CheckLevel::Strict => pack.lambda.clone(),
        CheckLevel::Relaxed => {
            a.metrics(host)
                .map_err(|e| MachineryError::Hypothesis(format!("metrics: {e}")))?
                .linkage
        }
    };
    let floor_scale =
        exact::rint(rho as i64).pow(3) * exact::rint(kk as i64);
    for s in (1..=t).rev() {
        let k_next = big_to_usize(&ks[s - 1], "ladder rung")?;
        let eta_s = match level {
            CheckLevel::Strict => {
                exact::powi(&exact::rat(1, 2), (t - s) as i64 + 6) / &floor_scale
            }
            CheckLevel::Relaxed => cur.family_size(a)?,
        };
        let params = ExtendParams {
            delta: run_pack.delta.clone(),
            lambda: rung_lambda.clone(),
            gamma: pack.gamma.clone(),
            eta: eta_s,
        };
        let out = extend_bilevelling(host, a, &cur, k_next, c, &params, level, budget)?;
        cur = out.bilevelling;
        positions = out.positions;
    }

    if cur.height() != ell {
        return Err(MachineryError::Certification(format!(
            "final height {} misses ell = {ell}",
            cur.height()
        )));
    }
    if cur.length() != k {
        return Err(MachineryError::Certification(format!(
            "final length {} misses k = {k}",
            cur.length()
        )));
    }
    if level == CheckLevel::Strict {
        let floor = exact::powi(&exact::rat(1, 2), t as i64 + 6) / &floor_scale;
        let fam = cur.family_size(a)?;
        if fam < floor {
            return Err(MachineryError::Certification(format!(
                "family size {fam} below 2^-(t+6)/(rho^3 K) = {floor}"
            )));
        }
        cur.audit.push(format!("family floor 2^-{}/(rho^3 K) attained", t + 6));
    }
    Ok(BilevelOutput { bilevelling: cur, positions })
}

#[cfg(test)]
mod tests {
    use super::super::gen::{planted_bilevel_instance, regular_cross_blocks};
    use super::*;
    use crate::exact::rat;

    #[test]
    fn layer_budget_from_the_exponent() {
        assert_eq!(rho_for(&rat(1, 1)).unwrap(), 2);
        assert_eq!(rho_for(&rat(1, 2)).unwrap(), 3);
        assert_eq!(rho_for(&rat(2, 3)).unwrap(), 3);
        assert_eq!(rho_for(&rat(1, 3)).unwrap(), 4);
        assert!(rho_for(&rat(0, 1)).is_err());
    }

    #[test]
    fn required_length_pins() {
        assert_eq!(required_ambient_length(1, &rat(1, 1), 7).unwrap(), BigInt::from(262144));
        assert_eq!(required_ambient_length(2, &rat(1, 1), 0).unwrap(), BigInt::from(32));
        assert_eq!(
            required_ambient_length(1, &rat(1, 2), 1).unwrap(),
            BigInt::from(125)
        );
    }

    fn tiny_bilevelling() -> (Graph, Blockade, BiLevelling) {
        // apex 0, first levelling down to 1, second down to 2, family {5}
        let g = Graph::from_edges(6, &[(0, 1), (0, 2), (1, 5), (2, 5)]);
        let ambient = Blockade::from_vertex_sets(vec![vec![0], vec![1], vec![2], vec![5]]);
        let bl = BiLevelling {
            l: Levelling::new(vec![vec![0], vec![1]]),
            m: Levelling::new(vec![vec![0], vec![2]]),
            blocks: vec![vec![5]],
            witnesses_l: vec![vec![1]],
            witnesses_m: None,
            audit: vec![],
        };
        (g, ambient, bl)
    }

    #[test]
    fn connecting_path_crosses_the_apex() {
        let (g, ambient, bl) = tiny_bilevelling();
        bl.verify(&g, &ambient).unwrap();
        let path = connecting_path(&g, &bl, 2, 1).unwrap();
        assert_eq!(path, vec![2, 0, 1]);
        assert_eq!(path.len(), bl.height() + 1);
    }

    #[test]
    fn connecting_path_rejects_vertices_outside_the_bases() {
        let (g, _, bl) = tiny_bilevelling();
        let err = connecting_path(&g, &bl, 5, 1).unwrap_err();
        assert!(matches!(err, MachineryError::Hypothesis(_)), "{err}");
    }

    #[test]
    fn strict_build_rejects_wrong_ambient_length() {
        let (host, a) = regular_cross_blocks(6, 8, 3, 1);
        let pack = BilevelPack {
            gamma: rat(1, 1000),
            delta: rat(1, 1000),
            lambda: rat(1, 100000),
            delta_family: None,
        };
        let err = build_bilevelling(
            &host,
            &a,
            1,
            &rat(1, 2),
            6,
            &pack,
            CheckLevel::Strict,
            4,
            1000,
        )
        .unwrap_err();
        match err {
            MachineryError::Hypothesis(msg) => assert!(msg.contains("81"), "{msg}"),
            other => panic!("expected a length complaint, got {other}"),
        }
    }

    #[test]
    fn exact_height_needs_room_for_the_pipeline() {
        let (host, a) = regular_cross_blocks(6, 8, 3, 1);
        let pack = BilevelPack {
            gamma: rat(1, 8),
            delta: rat(1, 24),
            lambda: rat(1, 2),
            delta_family: None,
        };
        let err = exact_bilevelling(
            &host,
            &a,
            1,
            &rat(1, 2),
            5,
            &pack,
            CheckLevel::Relaxed,
            4,
            1000,
        )
        .unwrap_err();
        match err {
            MachineryError::Hypothesis(msg) => assert!(msg.contains("3 rho - 2"), "{msg}"),
            other => panic!("expected the height floor, got {other}"),
        }
    }

    #[test]
    fn strict_exact_height_pins_the_required_length() {
        let (host, a) = regular_cross_blocks(6, 8, 3, 1);
        let pack = BilevelPack {
            gamma: rat(1, 100000),
            delta: rat(1, 100000),
            lambda: rat(1, 100000),
            delta_family: None,
        };
        let err = exact_bilevelling(
            &host,
            &a,
            1,
            &rat(1, 1),
            7,
            &pack,
            CheckLevel::Strict,
            4,
            1000,
        )
        .unwrap_err();
        match err {
            MachineryError::Hypothesis(msg) => assert!(msg.contains("262144"), "{msg}"),
            other => panic!("expected the ladder length, got {other}"),
        }
    }

    fn planted_extension_host(pair_variant: bool) -> (Graph, Blockade, BiLevelling) {
        // apex w=0; first-levelling base {1,2,3}; second base {4,5,6};
        // family blocks {7..10}, {11..14}, {15..18}
        let mut edges: Vec<(usize, usize)> = vec![(0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (0, 6)];
        let c0: Vec<usize> = (7..11).collect();
        let c1: Vec<usize> = (11..15).collect();
        let c2: Vec<usize> = (15..19).collect();
        for &v in &c0 {
            edges.push((1, v));
        }
        for &v in &c1 {
            edges.push((2, v));
        }
        for &v in &c2 {
            edges.push((3, v));
        }
        // the selectors: 4 sees the first block (only three of its vertices
        // in the pair variant, plus half the second), 5 the second, 6 the
        // third
        if pair_variant {
            for v in [7, 8, 9, 11, 12] {
                edges.push((4, v));
            }
            edges.push((5, 10));
        } else {
            for &v in &c0 {
                edges.push((4, v));
            }
        }
        for &v in &c1 {
            edges.push((5, v));
        }
        for &v in &c2 {
            edges.push((6, v));
        }
        // vertex 7 funnels the other blocks so bites stay reachable
        for &v in c1.iter().chain(&c2) {
            edges.push((7, v));
        }
        let g = Graph::from_edges(19, &edges);
        let ambient = Blockade::from_vertex_sets(vec![
            vec![0],
            vec![1, 2, 3],
            vec![4, 5, 6],
            c0.clone(),
            c1.clone(),
            c2.clone(),
        ]);
        let bl = BiLevelling {
            l: Levelling::new(vec![vec![0], vec![1, 2, 3]]),
            m: Levelling::new(vec![vec![0], vec![4, 5, 6]]),
            blocks: vec![c0, c1, c2],
            witnesses_l: vec![vec![1, 2, 3], vec![2, 3], vec![3]],
            witnesses_m: None,
            audit: vec![],
        };
        (g, ambient, bl)
    }

    #[test]
    fn extension_partition_variant_adds_a_level() {
        let (g, ambient, bl) = planted_extension_host(false);
        bl.verify(&g, &ambient).unwrap();
        let params = ExtendParams {
            delta: rat(1, 1000),
            lambda: rat(1, 1),
            gamma: rat(1, 8),
            eta: rat(1, 1),
        };
        let out = extend_bilevelling(&g, &ambient, &bl, 1, &rat(1, 1), &params, CheckLevel::Relaxed, 100)
            .unwrap();
        let bl2 = out.bilevelling;
        assert_eq!(bl2.height(), bl.height() + 1);
        assert_eq!(bl2.length(), 1);
        assert!(bl2.audit.iter().any(|line| line.contains("partition")));
        assert!(bl2.blocks[0].iter().all(|v| (11..15).contains(v)));
        assert_eq!(out.positions, vec![4]);
    }

    #[test]
    fn extension_pair_variant_adds_a_level() {
        let (g, ambient, bl) = planted_extension_host(true);
        bl.verify(&g, &ambient).unwrap();
        let params = ExtendParams {
            delta: rat(1, 1000),
            lambda: rat(1, 1),
            gamma: rat(1, 8),
            eta: rat(1, 1),
        };
        let out = extend_bilevelling(&g, &ambient, &bl, 1, &rat(1, 1), &params, CheckLevel::Relaxed, 100)
            .unwrap();
        let bl2 = out.bilevelling;
        assert_eq!(bl2.height(), bl.height() + 1);
        assert_eq!(bl2.length(), 1);
        assert!(bl2.audit.iter().any(|line| line.contains("pair")));
        assert_eq!(bl2.blocks[0], vec![13, 14]);
        assert_eq!(out.positions, vec![4]);
    }

    #[test]
    fn relaxed_build_on_a_planted_instance() {
        let (host, a) = planted_bilevel_instance(11);
        let pack = BilevelPack {
            gamma: rat(1, 8),
            delta: rat(1, 24),
            lambda: rat(1, 2),
            delta_family: Some(rat(1, 24)),
        };
        let out = build_bilevelling(&host, &a, 1, &rat(1, 2), 3, &pack, CheckLevel::Relaxed, 8, 2000)
            .unwrap();
        let bl = out.bilevelling;
        bl.verify(&host, &a).unwrap();
        assert_eq!(bl.length(), 1);
        assert_eq!(bl.height(), 3);
        assert_eq!(bl.l.height(), 2);
        // the kept family block sits in ambient block 3, graded by a single
        // witness out of the first levelling's base
        assert_eq!(out.positions, vec![3]);
        assert!(bl.blocks[0].iter().all(|&v| (360..480).contains(&v)));
        assert_eq!(bl.witnesses_l.len(), 1);
        assert_eq!(bl.witnesses_l[0].len(), 1);
        assert!((120..240).contains(&bl.witnesses_l[0][0]));
        // the connecting path climbs connector -> apex -> witness
        let x = bl.m.base()[0];
        let y = bl.l.base()[0];
        let path = connecting_path(&host, &bl, x, y).unwrap();
        assert_eq!(path.len(), 4);
    }
}
