//! The executable side of a constants ledger: drive the grading machinery
//! until the pattern's handle decomposition is embedded rainbow.

use super::{ForcingParams, LedgerValue};
use crate::blockade::{find_rainbow_copy, Blockade, RainbowEmbedding};
use crate::buildable::{replay, BuildCertificate, BuildStep};
use crate::exact::{self, Rat};
use crate::graph::{Embedding, Graph};
use crate::machinery::{build_bigrading, connecting_path, BilevelPack, CheckLevel};
use num::bigint::BigInt;
use num::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

const DIVERGENCE_EXHAUSTIVE: usize = 16;
const DIVERGENCE_BUDGET: u64 = 200_000;

/// Result of the forcing pipeline: a verified rainbow embedding, or the
/// stage that ran dry.  An `Absent` is a proof of absence only when its
/// stage says the exhaustive fallback ran out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ForceOutcome {
    Found(RainbowEmbedding),
    Absent { stage: String },
}

/// Embeds a rainbow copy of `h` into the blockade `a` by walking the
/// certificate's handles: each level builds a backwards grading over the
/// current blockade, places the smaller pattern first-end-lowest and
/// last-end-highest inside the refined family, and closes the handle with a
/// connecting path whose interior avoids every family block.
///
/// Strict mode enforces the ledger hypotheses on the host (floor, length,
/// shrinkage, linkage; coherence is arbitrated by the divergence gates the
/// pipeline runs internally) and reports the first stage that fails.
/// Relaxed mode runs the same pipeline but falls back to exhaustive search,
/// so its verdict on small instances is exact.  A returned embedding is
/// always re-verified before it leaves.
pub fn force_rainbow_copy(
    g: &Graph,
    a: &Blockade,
    h: &Graph,
    cert: &BuildCertificate,
    params: &ForcingParams,
    mode: CheckLevel,
) -> ForceOutcome {
    let absent = |stage: String| ForceOutcome::Absent { stage };
    let rebuilt = match replay(cert) {
        Ok(gr) => gr,
        Err(e) => return absent(format!("certificate: {e}")),
    };
    if rebuilt != *h {
        return absent("certificate: replay does not reproduce the pattern".into());
    }
    if let Err(e) = params.validate() {
        return absent(format!("hypothesis: {e}"));
    }
    if h.n() > a.len() {
        return absent(format!(
            "pigeonhole: pattern needs {} distinct blocks, blockade has {}",
            h.n(),
            a.len()
        ));
    }
    if let Err(e) = a.validate(g) {
        return absent(format!("hypothesis: {e}"));
    }
    if mode == CheckLevel::Strict {
        if let Err(stage) = strict_gates(g, a, params) {
            return absent(stage);
        }
    }
    match pipeline(g, a, cert, params, mode) {
        Ok(emb) => ForceOutcome::Found(emb),
        Err(stage) => match mode {
            CheckLevel::Strict => absent(stage),
            CheckLevel::Relaxed => match find_rainbow_copy(g, a, h, None) {
                Some(emb) if emb.verify(g, a, h, None) => ForceOutcome::Found(emb),
                _ => absent(format!("{stage}; exhaustive fallback found nothing")),
            },
        },
    }
}

/// The numeric hypotheses of the forcing statement, checked exactly.
fn strict_gates(g: &Graph, a: &Blockade, params: &ForcingParams) -> Result<(), String> {
    let n = g.n();
    if LedgerValue::int(n as i64).compare(&params.n) == Ordering::Less {
        return Err(format!(
            "hypothesis: host has {n} vertices, the constants demand at least {}",
            params.n
        ));
    }
    if LedgerValue::int(a.len() as i64).compare(&params.k) != Ordering::Equal {
        return Err(format!(
            "hypothesis: blockade length {} differs from K = {}",
            a.len(),
            params.k
        ));
    }
    let metrics = a.metrics(g).map_err(|e| format!("hypothesis: {e}"))?;
    // shrinkage: width >= |G|^(1 - sigma), exactly
    let p = params.sigma.numer();
    let q = params.sigma.denom();
    if p < q {
        let (pu, qu) = match (p.to_u32(), q.to_u32()) {
            (Some(pu), Some(qu)) => (pu, qu),
            _ => return Err("hypothesis: shrinkage exponent too fine to check exactly".into()),
        };
        let lhs = BigInt::from(metrics.width).pow(qu);
        let rhs = BigInt::from(n).pow(qu - pu);
        if lhs < rhs {
            return Err(format!(
                "hypothesis: width {} is below |G|^(1 - sigma) at sigma = {}",
                metrics.width, params.sigma
            ));
        }
    }
    if metrics.linkage > params.lambda {
        return Err(format!(
            "hypothesis: linkage {} exceeds lambda = {}",
            metrics.linkage, params.lambda
        ));
    }
    Ok(())
}

struct Ctx<'a> {
    g: &'a Graph,
    cert: &'a BuildCertificate,
    patterns: Vec<Graph>,
    sig: Vec<Rat>,
    c: Rat,
    lambda: Rat,
    mode: CheckLevel,
}

fn pipeline(
    g: &Graph,
    a: &Blockade,
    cert: &BuildCertificate,
    params: &ForcingParams,
    mode: CheckLevel,
) -> Result<RainbowEmbedding, String> {
    let m = cert.steps.len();
    let mut patterns = Vec::with_capacity(m + 1);
    for i in 0..=m {
        let prefix = BuildCertificate {
            beta: cert.beta,
            mode: cert.mode.clone(),
            steps: cert.steps[..i].to_vec(),
        };
        patterns.push(replay(&prefix).map_err(|e| format!("certificate: {e}"))?);
    }
    // prefix patterns must be the honest subpatterns, so handle labels have
    // to extend the previous label range contiguously
    for (i, s) in cert.steps.iter().enumerate() {
        if let BuildStep::Handle { interior, .. } = s {
            if patterns[i + 1].n() != patterns[i].n() + interior.len() {
                return Err(
                    "certificate: handle labels are not contiguous with the prefix pattern".into(),
                );
            }
        }
    }
    let has_handles = cert.steps.iter().any(|s| matches!(s, BuildStep::Handle { .. }));
    let mut sig = vec![params.sigma.clone(); m + 1];
    if has_handles {
        if cert.beta < 6 {
            return Err(format!(
                "hypothesis: beta = {} admits no coherence exponent",
                cert.beta
            ));
        }
        let bound = exact::rat(1, ((cert.beta - 3) / 3) as i64);
        let cbound = &params.c - &bound;
        if cbound <= params.sigma {
            return Err(format!(
                "hypothesis: c - 1/floor((beta-3)/3) = {cbound} leaves no room above sigma = {}",
                params.sigma
            ));
        }
        for i in (0..m).rev() {
            sig[i] = exact::midpoint(&sig[i + 1], &cbound);
        }
    }
    let lambda = if params.lambda > exact::one() { exact::one() } else { params.lambda.clone() };
    let ctx = Ctx { g, cert, patterns, sig, c: params.c.clone(), lambda, mode };
    force_level(&ctx, m, a, None)
}

fn force_level(
    ctx: &Ctx,
    level: usize,
    blockade: &Blockade,
    constraints: Option<(usize, usize)>,
) -> Result<RainbowEmbedding, String> {
    if level == 0 {
        return find_rainbow_copy(ctx.g, blockade, &ctx.patterns[0], constraints).ok_or_else(|| {
            "base stage: no rainbow copy of the base pattern in the refined family".to_string()
        });
    }
    let BuildStep::Handle { end1, end2, interior } = &ctx.cert.steps[level - 1] else {
        return Err("certificate: subleaf steps have no connecting stage".into());
    };
    let len = interior.len() + 1;
    if len < 6 {
        return Err(format!(
            "hypothesis: handle of length {len} is too short for a graded connection (needs length at least 6)"
        ));
    }
    let ell = len - 2;
    let sigma = &ctx.sig[level];
    let sigma_p = &ctx.sig[level - 1];
    let sigma_mid = exact::midpoint(sigma, sigma_p);
    let c_bs = &ctx.c - sigma;
    let bound = exact::rat(1, ((ell - 1) / 3) as i64);
    if c_bs <= bound {
        return Err(format!(
            "hypothesis: c - sigma = {c_bs} does not clear 1/floor((ell-1)/3) = {bound}"
        ));
    }
    let c_p = exact::midpoint(&bound, &c_bs);
    let d = exact::midpoint(&exact::zero(), &(&sigma_mid - sigma));
    let k_fam = ctx.patterns[level - 1].n().max(1);
    // relaxed divergence targets scale with the shrunk coherence exponent
    let n = ctx.g.n().max(1);
    let div = exact::one() / Rat::from(exact::ceil_pow(n, &c_bs));
    let pack = BilevelPack {
        gamma: div.clone(),
        delta: div,
        lambda: ctx.lambda.clone(),
        delta_family: None,
    };
    let bg = build_bigrading(
        ctx.g,
        blockade,
        k_fam,
        &c_p,
        ell,
        &d,
        &ctx.lambda,
        &pack,
        ctx.mode,
        DIVERGENCE_EXHAUSTIVE,
        DIVERGENCE_BUDGET,
    )
    .map_err(|e| format!("grading stage: {e}"))?;
    let bl = &bg.bilevelling;
    if bl.blocks.len() < ctx.patterns[level - 1].n() {
        return Err(format!(
            "grading stage: family has {} blocks, the inner pattern needs {}",
            bl.blocks.len(),
            ctx.patterns[level - 1].n()
        ));
    }
    let fam = Blockade::from_vertex_sets(bl.blocks.clone());
    let inner = force_level(ctx, level - 1, &fam, Some((*end1, *end2)))?;

    let phi_u = inner.embedding.map[*end1];
    let phi_v = inner.embedding.map[*end2];
    let copy = &inner.embedding.map;
    // pendant selectors: x sees the first handle end and nothing else of the
    // copy, y the last end; the connecting path certifies the rest
    let x = pick_pendant(ctx.g, bl.m.base(), copy, phi_u, usize::MAX).ok_or_else(|| {
        "connection stage: no second-base vertex pendant on the first handle end".to_string()
    })?;
    let y = pick_pendant(ctx.g, bl.l.base(), copy, phi_v, x).ok_or_else(|| {
        "connection stage: no first-base vertex pendant on the last handle end".to_string()
    })?;
    let path = connecting_path(ctx.g, bl, x, y).map_err(|e| format!("connection stage: {e}"))?;
    if path.len() != len - 1 {
        return Err(format!(
            "connection stage: path carries {} vertices, the handle interior needs {}",
            path.len(),
            len - 1
        ));
    }
    if path.iter().any(|pv| copy.contains(pv)) {
        return Err("connection stage: the connecting path re-enters the copy".into());
    }

    let prev_n = ctx.patterns[level - 1].n();
    let total_n = ctx.patterns[level].n();
    let mut map = vec![usize::MAX; total_n];
    let mut block_of = vec![usize::MAX; total_n];
    for v in 0..prev_n {
        map[v] = inner.embedding.map[v];
        block_of[v] = bg.positions[inner.block_of[v]];
    }
    for (j, &iv) in interior.iter().enumerate() {
        map[iv] = path[j];
        block_of[iv] = ambient_position(blockade, path[j]).ok_or_else(|| {
            format!("connection stage: path vertex {} lies outside the blockade", path[j])
        })?;
    }
    let emb = RainbowEmbedding { embedding: Embedding { map }, block_of };
    if !emb.verify(ctx.g, blockade, &ctx.patterns[level], constraints) {
        return Err("certification: assembled embedding failed re-verification".into());
    }
    Ok(emb)
}

fn pick_pendant(
    g: &Graph,
    base: &[usize],
    copy: &[usize],
    attach: usize,
    exclude: usize,
) -> Option<usize> {
    base.iter().copied().find(|&x| {
        x != exclude
            && !copy.contains(&x)
            && g.has_edge(x, attach)
            && copy.iter().all(|&w| w == attach || !g.has_edge(x, w))
    })
}

fn ambient_position(b: &Blockade, v: usize) -> Option<usize> {
    (0..b.len()).find(|&i| b.vertices(i).contains(&v))
}
