//! The constant derivations behind a handle decomposition.
//!
//! Free choices inside open intervals are resolved to midpoints and every
//! `choose N large enough` becomes the smallest admissible power of two, so
//! the same certificate always produces the same ledger.

use super::{
    ceil_log2, ceil_log2_rat, ConstantsLedger, ForcingError, ForcingParams, LedgerStep,
    LedgerValue, Rel,
};
use crate::buildable::{replay, BuildCertificate, BuildMode, BuildStep};
use crate::exact::{self, Rat};
use crate::machinery::selection_ladder;
use num::bigint::BigInt;
use num::{One, Signed, ToPrimitive, Zero};

/// Ladders beyond this many rungs are not materialized; a chain that asks
/// for one is reporting its own infeasibility.
const LADDER_CAP: usize = 100_000;

/// Hard cap on the binary exponent of a threshold that must be written out
/// as an exact rational.
const MATERIALIZE_CAP: u64 = 10_000_000;

fn ex(r: &Rat) -> LedgerValue {
    LedgerValue::Exact(r.clone())
}

fn big(b: &BigInt) -> LedgerValue {
    LedgerValue::big(b.clone())
}

/// Declared constants of the covering refinement, used as an axiom node:
/// `K = (K_in + 1)^2`, `lambda = lambda_in / (8K)`, `N = 4K^2`.
fn leaf_cover(
    k_in: &BigInt,
    c: &Rat,
    sigma: &Rat,
    sigma_p: &Rat,
    lambda_in: &Rat,
) -> Result<(BigInt, Rat, BigInt, LedgerStep), ForcingError> {
    let mut step = LedgerStep::new("leaf-cover");
    step.input("K'", big(k_in));
    step.input("c", ex(c));
    step.input("sigma", ex(sigma));
    step.input("sigma'", ex(sigma_p));
    step.input("lambda'", ex(lambda_in));
    let zero = LedgerValue::int(0);
    let one = LedgerValue::int(1);
    step.claim("K' is nonnegative", big(k_in), Rel::Ge, zero.clone())?;
    step.claim("sigma is positive", ex(sigma), Rel::Gt, zero.clone())?;
    step.claim("sigma below sigma'", ex(sigma), Rel::Lt, ex(sigma_p))?;
    step.claim("sigma' below c", ex(sigma_p), Rel::Lt, ex(c))?;
    step.claim("c at most 1", ex(c), Rel::Le, one.clone())?;
    step.claim("lambda' is positive", ex(lambda_in), Rel::Gt, zero)?;
    step.claim("lambda' at most 1", ex(lambda_in), Rel::Le, one)?;
    let k = (k_in + BigInt::one()).pow(2);
    let lambda = lambda_in / (exact::rint(8) * Rat::from(k.clone()));
    let n = BigInt::from(4) * &k * &k;
    step.output("K", big(&k));
    step.output("lambda", ex(&lambda));
    step.output("N", big(&n));
    Ok((k, lambda, n, step))
}

/// Output of [`ledger_bigrade_shrink`]: the linkage budget, host floor and
/// ambient blockade length under which the grading machinery runs, plus the
/// recorded step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShrinkConstants {
    pub lambda: Rat,
    pub n: LedgerValue,
    pub k: BigInt,
    pub step: LedgerStep,
}

/// Exchanges a divergence budget for graded structure: a handle of inner
/// height `ell`, exponents `sigma < sigma_p`, a target family length `k_p`
/// and linkage `lambda_p` determine the ambient blockade length `K`, linkage
/// `lambda` and host floor `N`.  The ladder is shared with the machinery
/// that later consumes it, so the two lengths agree by construction.  `N`
/// comes back as a power of two because its third demand pits it against
/// `K^K`, which is compared through bit counts and never written out.
pub fn ledger_bigrade_shrink(
    ell: usize,
    c: &Rat,
    sigma: &Rat,
    sigma_p: &Rat,
    k_p: &BigInt,
    lambda_p: &Rat,
) -> Result<ShrinkConstants, ForcingError> {
    if ell < 4 {
        return Err(ForcingError::Precondition(format!(
            "inner height ell = {ell} needs floor((ell-1)/3) >= 1, so ell >= 4"
        )));
    }
    let mut step = LedgerStep::new("bigrade-shrink");
    step.input("ell", LedgerValue::int(ell as i64));
    step.input("c", ex(c));
    step.input("sigma", ex(sigma));
    step.input("sigma'", ex(sigma_p));
    step.input("K'", big(k_p));
    step.input("lambda'", ex(lambda_p));

    let zero = LedgerValue::int(0);
    let one = LedgerValue::int(1);
    let bound = exact::rat(1, ((ell - 1) / 3) as i64);
    step.claim("K' is at least 1", big(k_p), Rel::Ge, one.clone())?;
    step.claim("lambda' is positive", ex(lambda_p), Rel::Gt, zero.clone())?;
    step.claim("lambda' at most 1", ex(lambda_p), Rel::Le, one.clone())?;
    step.claim("c above 1/floor((ell-1)/3)", ex(c), Rel::Gt, ex(&bound))?;
    step.claim("sigma is positive", ex(sigma), Rel::Gt, zero.clone())?;
    step.claim("sigma below sigma'", ex(sigma), Rel::Lt, ex(sigma_p))?;

    // free choices resolve to midpoints of their admissible intervals
    let c_p = exact::midpoint(&bound, c);
    let gap = sigma_p - sigma;
    let d = exact::midpoint(&exact::zero(), &gap);
    step.output("c'", ex(&c_p));
    step.output("d", ex(&d));
    step.claim("c' above 1/floor((ell-1)/3)", ex(&c_p), Rel::Gt, ex(&bound))?;
    step.claim("c' below c", ex(&c_p), Rel::Lt, ex(c))?;
    step.claim("d is positive", ex(&d), Rel::Gt, zero)?;
    step.claim("d below sigma' - sigma", ex(&d), Rel::Lt, ex(&gap))?;

    // selection ladder, shared with the machinery that will consume it
    let k_small = k_p
        .to_usize()
        .filter(|&v| v <= LADDER_CAP)
        .ok_or_else(|| {
            ForcingError::Resource(format!(
                "selection ladder with {k_p} rungs cannot be materialized"
            ))
        })?;
    let ladder =
        selection_ladder(k_small, &d).map_err(|e| ForcingError::Precondition(e.to_string()))?;
    let k0 = ladder[0].clone();
    // ambient length ceil(K_0 (3 + 1/c')^(ell + 2)); the ladder head outgrows
    // usize here, so the machinery formula is mirrored on big values
    let grow = exact::powi(&(exact::rint(3) + c_p.recip()), ell as i64 + 2);
    let k_out = exact::ceil_int(&(Rat::from(k0.clone()) * grow));
    let eta = exact::powi(&exact::rint(2), 6 - 2 * ell as i64) / Rat::from(k_out.clone());
    let lambda = lambda_p * &eta
        / (exact::rint(8)
            * Rat::from(k_p.clone())
            * Rat::from(BigInt::one() << k_small));

    // host floor: the smallest power of two 2^e clearing all three demands,
    // each relaxed to bit counts so K^K never has to be written out
    let cl_kp = ceil_log2(k_p);
    let cl_k = ceil_log2(&k_out);
    let need1 = Rat::from(BigInt::from(6 + 2 * ell as i64) + &cl_kp);
    let need2 = Rat::from(k_p * &cl_kp);
    let need3 = Rat::from(BigInt::from(2 * ell as i64) + k_p + &cl_k * &k_out);
    let slack3 = &gap - &d;
    let e1 = exact::ceil_int(&(&need1 / c));
    let e2 = exact::ceil_int(&(&need2 / (c - &c_p)));
    let e3 = exact::ceil_int(&(&need3 / &slack3));
    let e = e1.max(e2).max(e3).max(BigInt::one());
    let er = Rat::from(e.clone());
    step.claim("K' fits its bit count", big(k_p), Rel::Le, LedgerValue::PowTwo(cl_kp))?;
    step.claim("K fits its bit count", big(&k_out), Rel::Le, LedgerValue::PowTwo(cl_k))?;
    step.claim("e c covers 2^(6+2 ell) K'", ex(&(&er * c)), Rel::Ge, ex(&need1))?;
    step.claim("e (c - c') covers K'^K'", ex(&(&er * (c - &c_p))), Rel::Ge, ex(&need2))?;
    step.claim(
        "e (sigma' - sigma - d) covers 2^(K' + 2 ell) K^K",
        ex(&(&er * &slack3)),
        Rel::Ge,
        ex(&need3),
    )?;

    step.output("ladder head", big(&k0));
    step.output("K", big(&k_out));
    step.output("eta", ex(&eta));
    step.output("lambda", ex(&lambda));
    step.output("N", LedgerValue::PowTwo(e.clone()));
    Ok(ShrinkConstants { lambda, n: LedgerValue::PowTwo(e), k: k_out, step })
}

/// Running constants while a chain is walked: the pattern so far is forced
/// at level `sigma` with blockade length `k`, linkage `lambda`, host floor
/// `n`.
struct Forced {
    n: LedgerValue,
    k: BigInt,
    sigma: Rat,
    lambda: Rat,
}

/// Two pendant leaves at the attachment points: refines a forcing of the
/// leafless pattern into a first/last forcing at the lower level `sigma`,
/// through an inner and an outer covering step, each fed one spare block.
fn two_leaves(
    prev: &Forced,
    sigma: &Rat,
    c: &Rat,
    steps: &mut Vec<LedgerStep>,
) -> Result<Forced, ForcingError> {
    let mut step = LedgerStep::new("two-leaves");
    step.input("K'", big(&prev.k));
    step.input("N'", prev.n.clone());
    step.input("sigma'", ex(&prev.sigma));
    step.input("lambda'", ex(&prev.lambda));
    step.input("sigma", ex(sigma));
    step.input("c", ex(c));
    step.claim("sigma is positive", ex(sigma), Rel::Gt, LedgerValue::int(0))?;
    step.claim("sigma below sigma'", ex(sigma), Rel::Lt, ex(&prev.sigma))?;
    let sigma_mid = exact::midpoint(sigma, &prev.sigma);
    step.output("sigma''", ex(&sigma_mid));
    let (k_in, lambda_in, n_in, s_in) =
        leaf_cover(&(&prev.k + BigInt::one()), c, &sigma_mid, &prev.sigma, &prev.lambda)?;
    let (k_out, lambda_out, n0, s_out) =
        leaf_cover(&(&k_in + BigInt::one()), c, sigma, &sigma_mid, &lambda_in)?;
    let n = LedgerValue::big(n0)
        .max(LedgerValue::big(n_in))
        .max(prev.n.clone());
    step.output("K", big(&k_out));
    step.output("lambda", ex(&lambda_out));
    step.output("N", n.clone());
    steps.push(s_in);
    steps.push(s_out);
    steps.push(step);
    Ok(Forced { n, k: k_out, sigma: sigma.clone(), lambda: lambda_out })
}

/// One connecting handle of inner height `ell` between the two marked
/// pendant leaves, paid for by a divergence shrink at exponent `c - sigma`.
fn add_handle(
    prev: &Forced,
    ell: usize,
    sigma: &Rat,
    c: &Rat,
    steps: &mut Vec<LedgerStep>,
) -> Result<Forced, ForcingError> {
    let mut step = LedgerStep::new("handle");
    step.input("ell", LedgerValue::int(ell as i64));
    step.input("K'", big(&prev.k));
    step.input("N'", prev.n.clone());
    step.input("sigma'", ex(&prev.sigma));
    step.input("lambda'", ex(&prev.lambda));
    step.input("sigma", ex(sigma));
    step.input("c", ex(c));
    step.claim("sigma below sigma'", ex(sigma), Rel::Lt, ex(&prev.sigma))?;
    let shrink = ledger_bigrade_shrink(ell, &(c - sigma), sigma, &prev.sigma, &prev.k, &prev.lambda)?;
    let n = shrink.n.clone().max(prev.n.clone());
    step.claim("host floor covers the inner forcing", n.clone(), Rel::Ge, prev.n.clone())?;
    step.output("K", big(&shrink.k));
    step.output("lambda", ex(&shrink.lambda));
    step.output("N", n.clone());
    steps.push(shrink.step.clone());
    steps.push(step);
    Ok(Forced { n, k: shrink.k, sigma: sigma.clone(), lambda: shrink.lambda })
}

/// A full handle of length `len`: grows two pendant leaves at the handle's
/// attachment points, then connects them across the remaining height.
fn add_real_handle(
    prev: &Forced,
    len: usize,
    sigma: &Rat,
    c: &Rat,
    steps: &mut Vec<LedgerStep>,
) -> Result<Forced, ForcingError> {
    if len < 6 {
        return Err(ForcingError::Precondition(format!(
            "handle of length {len} admits no coherence exponent (length must be at least 6)"
        )));
    }
    let ell = len - 2;
    let mut step = LedgerStep::new("real-handle");
    step.input("length", LedgerValue::int(len as i64));
    step.input("sigma'", ex(&prev.sigma));
    step.input("sigma", ex(sigma));
    step.input("c", ex(c));
    let sigma_mid = exact::midpoint(sigma, &prev.sigma);
    step.output("sigma''", ex(&sigma_mid));
    step.claim("sigma below sigma''", ex(sigma), Rel::Lt, ex(&sigma_mid))?;
    step.claim("sigma'' below sigma'", ex(&sigma_mid), Rel::Lt, ex(&prev.sigma))?;
    let leaves = two_leaves(prev, &sigma_mid, c, steps)?;
    let out = add_handle(&leaves, ell, sigma, c, steps)?;
    step.output("K", big(&out.k));
    step.output("lambda", ex(&out.lambda));
    step.output("N", out.n.clone());
    steps.push(step);
    Ok(out)
}

/// Walks a strong-mode certificate bottom-up and derives the constants that
/// force the full pattern at shrinkage `sigma` and coherence exponent `c`.
/// Certificates with two or more handles are honest about infeasibility:
/// their second ladder asks for more rungs than any machine holds and comes
/// back as a resource error.
pub fn ledger_chain(
    cert: &BuildCertificate,
    c: &Rat,
    sigma: &Rat,
) -> Result<ConstantsLedger, ForcingError> {
    if cert.mode != BuildMode::Strong {
        return Err(ForcingError::Precondition(
            "constants ledgers need a strong-mode certificate".into(),
        ));
    }
    replay(cert).map_err(|e| ForcingError::Certificate(e.to_string()))?;

    let mut steps = Vec::new();
    let mut base = LedgerStep::new("base");
    base.input("order", LedgerValue::int(2));
    base.claim("base pattern has at most two vertices", LedgerValue::int(2), Rel::Le, LedgerValue::int(2))?;
    base.claim("sigma is positive", ex(sigma), Rel::Gt, LedgerValue::int(0))?;
    base.output("N", LedgerValue::int(1));
    base.output("K", LedgerValue::int(2));
    base.output("lambda", ex(&exact::rat(1, 2)));

    if cert.steps.is_empty() {
        base.claim("sigma below c", ex(sigma), Rel::Lt, ex(c))?;
        steps.push(base);
        let params = ForcingParams {
            n: LedgerValue::int(1),
            k: LedgerValue::int(2),
            sigma: sigma.clone(),
            lambda: exact::rat(1, 2),
            c: c.clone(),
        };
        params.validate()?;
        return Ok(ConstantsLedger { steps, params });
    }

    let beta = cert.beta;
    if beta < 6 {
        return Err(ForcingError::Precondition(format!(
            "beta = {beta} admits no coherence exponent: 1/floor((beta-3)/3) is unbounded"
        )));
    }
    let bound = exact::rat(1, ((beta - 3) / 3) as i64);
    base.claim(
        "coherence margin c - sigma above 1/floor((beta-3)/3)",
        ex(&(c - sigma)),
        Rel::Gt,
        ex(&bound),
    )?;
    let cbound = c - &bound;

    // level walk: the full pattern sits at sigma, each inner pattern at the
    // midpoint toward c - 1/floor((beta-3)/3)
    let m = cert.steps.len();
    let mut sig = vec![Rat::from(BigInt::zero()); m + 1];
    sig[m] = sigma.clone();
    for i in (0..m).rev() {
        sig[i] = exact::midpoint(&sig[i + 1], &cbound);
    }
    base.output("sigma", ex(&sig[0]));
    steps.push(base);

    let mut cur = Forced {
        n: LedgerValue::int(1),
        k: BigInt::from(2),
        sigma: sig[0].clone(),
        lambda: exact::rat(1, 2),
    };
    for (i, s) in cert.steps.iter().enumerate() {
        let BuildStep::Handle { interior, .. } = s else {
            return Err(ForcingError::Certificate(
                "subleaf step in a strong-mode certificate".into(),
            ));
        };
        cur = add_real_handle(&cur, interior.len() + 1, &sig[i + 1], c, &mut steps)?;
    }
    let params = ForcingParams {
        n: cur.n,
        k: LedgerValue::big(cur.k),
        sigma: cur.sigma,
        lambda: cur.lambda,
        c: c.clone(),
    };
    params.validate()?;
    Ok(ConstantsLedger { steps, params })
}

/// The largest `eps = 2^-t` under which an `eps`-sparse coherent host of
/// more than `1/eps` vertices meets every demand of the certificate's
/// forcing constants, with the shrinkage level defaulted to the midpoint of
/// its admissible interval.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SparseEpsilon {
    #[serde(with = "crate::exact::rat_string")]
    pub eps: Rat,
    pub exponent: u64,
    pub ledger: ConstantsLedger,
}

pub fn epsilon_for_sparse(cert: &BuildCertificate, c: &Rat) -> Result<SparseEpsilon, ForcingError> {
    if !c.is_positive() {
        return Err(ForcingError::Precondition(format!("c = {c} must be positive")));
    }
    let sigma = if cert.steps.is_empty() {
        exact::midpoint(&exact::zero(), c)
    } else {
        if cert.beta < 6 {
            return Err(ForcingError::Precondition(format!(
                "beta = {} admits no coherence exponent: 1/floor((beta-3)/3) is unbounded",
                cert.beta
            )));
        }
        let bound = exact::rat(1, ((cert.beta - 3) / 3) as i64);
        let margin = c - &bound;
        if !margin.is_positive() {
            return Err(ForcingError::Precondition(format!(
                "c = {c} leaves no margin over 1/floor((beta-3)/3) = {bound}"
            )));
        }
        exact::midpoint(&exact::zero(), &margin)
    };
    let mut ledger = ledger_chain(cert, c, &sigma)?;

    let k = match &ledger.params.k {
        LedgerValue::Exact(r) => r.clone(),
        LedgerValue::PowTwo(_) => {
            return Err(ForcingError::Resource(
                "blockade length in power form cannot seed the threshold search".into(),
            ))
        }
    };
    let two_k = exact::rint(2) * &k;
    let lambda = ledger.params.lambda.clone();
    // three demands pin t: 2^t >= K, 2^(t p) >= (2K)^q for sigma = p/q,
    // and 2^t >= 2K / lambda
    let t1 = ceil_log2_rat(&k);
    let p = ledger.params.sigma.numer().clone();
    let q = ledger
        .params
        .sigma
        .denom()
        .to_u32()
        .filter(|&v| v <= 4096)
        .ok_or_else(|| {
            ForcingError::Resource("shrinkage denominator too large for the threshold search".into())
        })?;
    let pow_2k = exact::ceil_int(&two_k).pow(q);
    let t2 = exact::ceil_int(&(Rat::from(ceil_log2(&pow_2k)) / Rat::from(p.clone())));
    let t3 = ceil_log2_rat(&(&two_k / &lambda));
    let t = t1.max(t2).max(t3).max(BigInt::one());
    let exponent = t
        .to_u64()
        .filter(|&v| v <= MATERIALIZE_CAP)
        .ok_or_else(|| {
            ForcingError::Resource(format!("threshold exponent {t} cannot be materialized"))
        })?;
    let eps = exact::powi(&exact::rat(1, 2), exponent as i64);

    let mut step = LedgerStep::new("sparse-threshold");
    step.input("t", LedgerValue::big(t.clone()));
    step.claim("eps at most 1/K", ex(&(&eps * &k)), Rel::Le, LedgerValue::int(1))?;
    step.claim(
        "eps^sigma at most 1/(2K)",
        LedgerValue::big(pow_2k),
        Rel::Le,
        LedgerValue::PowTwo(&t * &p),
    )?;
    step.claim("eps at most lambda/(2K)", ex(&(&eps * &two_k)), Rel::Le, ex(&lambda))?;
    step.output("eps", ex(&eps));
    ledger.steps.push(step);
    Ok(SparseEpsilon { eps, exponent, ledger })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{one, rat, rint};
    use crate::machinery::bigrade_constants;

    fn handle_cert(beta: usize, handles: &[usize]) -> BuildCertificate {
        // each handle runs between the two base vertices; labels stay
        // contiguous so prefix replays are the honest subpatterns
        let mut steps = Vec::new();
        let mut next = 2;
        for &len in handles {
            let interior: Vec<usize> = (next..next + len - 1).collect();
            next += len - 1;
            steps.push(BuildStep::Handle { end1: 0, end2: 1, interior });
        }
        BuildCertificate { beta, mode: BuildMode::Strong, steps }
    }

    #[test]
    fn shrink_matches_the_machinery_ladder() {
        let out = ledger_bigrade_shrink(7, &one(), &rat(1, 4), &rat(1, 2), &BigInt::one(), &one())
            .unwrap();
        // same inputs through the machinery derivation: c' = 3/4, d = 1/8
        let consts = bigrade_constants(1, &rat(3, 4), 7, &rat(1, 8), &one()).unwrap();
        assert_eq!(out.k, consts.length);
        assert_eq!(out.lambda, consts.lambda);
        assert!(out.step.claims.iter().all(|c| c.holds()));
        // the third demand dominates: e = 8 (15 + ceil_log2(K) K)
        let cl = ceil_log2(&consts.length);
        let want = BigInt::from(8) * (BigInt::from(15) + cl * &consts.length);
        assert_eq!(out.n, LedgerValue::PowTwo(want));
    }

    #[test]
    fn shrink_rejects_a_flat_exponent() {
        // c must clear 1/floor((ell-1)/3) strictly
        let err = ledger_bigrade_shrink(7, &rat(1, 2), &rat(1, 4), &rat(1, 3), &BigInt::one(), &one())
            .unwrap_err();
        assert!(matches!(err, ForcingError::Claim(ref m) if m.contains("1/floor((ell-1)/3)")));
        assert!(matches!(
            ledger_bigrade_shrink(3, &one(), &rat(1, 4), &rat(1, 2), &BigInt::one(), &one()),
            Err(ForcingError::Precondition(_))
        ));
    }

    #[test]
    fn shrink_refuses_unmaterializable_ladders() {
        let huge = BigInt::from(10u8).pow(9);
        let err = ledger_bigrade_shrink(7, &one(), &rat(1, 4), &rat(1, 2), &huge, &one())
            .unwrap_err();
        assert!(matches!(err, ForcingError::Resource(_)));
    }

    #[test]
    fn chain_reproduces_the_fifteen_handle_trace() {
        let cert = handle_cert(15, &[15]);
        let ledger = ledger_chain(&cert, &rat(1, 2), &rat(1, 8)).unwrap();
        ledger.verify().unwrap();
        let tags: Vec<&str> = ledger.steps.iter().map(|s| s.tag.as_str()).collect();
        assert_eq!(
            tags,
            ["base", "leaf-cover", "leaf-cover", "two-leaves", "bigrade-shrink", "handle", "real-handle"]
        );
        let find = |tag: &str, name: &str| -> LedgerValue {
            ledger
                .steps
                .iter()
                .find(|s| s.tag == tag)
                .unwrap()
                .outputs
                .iter()
                .find(|(n, _)| n == name)
                .unwrap()
                .1
                .clone()
        };
        // base level 3/16, leaves level 5/32, inner cover split at 11/64
        assert_eq!(find("base", "sigma"), LedgerValue::Exact(rat(3, 16)));
        assert_eq!(find("real-handle", "sigma''"), LedgerValue::Exact(rat(5, 32)));
        assert_eq!(find("two-leaves", "sigma''"), LedgerValue::Exact(rat(11, 64)));
        // inner cover K'' = 16, outer K = 324 with lambda 1/663552, N 419904
        assert_eq!(ledger.steps[1].outputs[0].1, LedgerValue::int(16));
        assert_eq!(ledger.steps[2].outputs[0].1, LedgerValue::int(324));
        assert_eq!(find("two-leaves", "K"), LedgerValue::int(324));
        assert_eq!(find("two-leaves", "lambda"), LedgerValue::Exact(rat(1, 663552)));
        assert_eq!(find("two-leaves", "N"), LedgerValue::int(419904));
        // the shrink resolves its choices to c' = 5/16 and d = 1/64
        assert_eq!(find("bigrade-shrink", "c'"), LedgerValue::Exact(rat(5, 16)));
        assert_eq!(find("bigrade-shrink", "d"), LedgerValue::Exact(rat(1, 64)));
        // ambient length: 324 rungs of step 66, grown through (3 + 16/5)^15
        let ladder = selection_ladder(324, &rat(1, 64)).unwrap();
        let grow = exact::powi(&(rint(3) + rat(16, 5)), 15);
        let want_k = exact::ceil_int(&(Rat::from(ladder[0].clone()) * grow));
        assert_eq!(ledger.params.k, LedgerValue::big(want_k.clone()));
        assert!(want_k > BigInt::from(10u8).pow(500));
        // host floor: the K^K demand dominates at slack 1/64
        let need = BigInt::from(350) + ceil_log2(&want_k) * &want_k;
        assert_eq!(ledger.params.n, LedgerValue::PowTwo(BigInt::from(64) * need));
        assert_eq!(ledger.params.sigma, rat(1, 8));
        assert!(ledger.params.lambda.is_positive());
    }

    #[test]
    fn chain_without_handles_is_the_base_assertion() {
        let cert = BuildCertificate { beta: 2, mode: BuildMode::Strong, steps: vec![] };
        let ledger = ledger_chain(&cert, &one(), &rat(1, 4)).unwrap();
        assert_eq!(ledger.steps.len(), 1);
        assert_eq!(ledger.steps[0].tag, "base");
        assert_eq!(ledger.params.n, LedgerValue::int(1));
        assert_eq!(ledger.params.k, LedgerValue::int(2));
        assert_eq!(ledger.params.lambda, rat(1, 2));
        ledger.verify().unwrap();
    }

    #[test]
    fn chain_demands_its_margin() {
        let cert = handle_cert(15, &[15]);
        // beta = 15 needs c > 1/4: the margin claim fails at c = 1/4
        let err = ledger_chain(&cert, &rat(1, 4), &rat(1, 8)).unwrap_err();
        assert!(matches!(err, ForcingError::Claim(ref m) if m.contains("coherence margin")));
        assert!(ledger_chain(&cert, &rat(5, 16), &rat(1, 64)).is_ok());
        // weak certificates carry no handle chain
        let weak = BuildCertificate {
            beta: 2,
            mode: BuildMode::Weak,
            steps: vec![BuildStep::Subleaf { vertex: 0, attach: None }],
        };
        assert!(matches!(
            ledger_chain(&weak, &one(), &rat(1, 4)),
            Err(ForcingError::Precondition(_))
        ));
        // short beta leaves the bound unbounded
        let short = handle_cert(5, &[15]);
        assert!(matches!(
            ledger_chain(&short, &one(), &rat(1, 4)),
            Err(ForcingError::Precondition(ref m)) if m.contains("beta = 5")
        ));
    }

    #[test]
    fn second_handle_hits_the_resource_wall() {
        let cert = handle_cert(15, &[15, 15]);
        let err = ledger_chain(&cert, &rat(1, 2), &rat(1, 8)).unwrap_err();
        assert!(matches!(err, ForcingError::Resource(ref m) if m.contains("rungs")));
    }

    #[test]
    fn ledgers_replay_bit_identically() {
        let cert = handle_cert(15, &[15]);
        let a = ledger_chain(&cert, &rat(1, 2), &rat(1, 8)).unwrap();
        let b = ledger_chain(&cert, &rat(1, 2), &rat(1, 8)).unwrap();
        let sa = serde_json::to_string(&a).unwrap();
        let sb = serde_json::to_string(&b).unwrap();
        assert_eq!(sa, sb);
        let back: ConstantsLedger = serde_json::from_str(&sa).unwrap();
        assert_eq!(back, a);
        back.verify().unwrap();
    }

    #[test]
    fn epsilon_is_tight_at_its_exponent() {
        let cert = handle_cert(15, &[15]);
        let out = epsilon_for_sparse(&cert, &rat(1, 2)).unwrap();
        out.ledger.verify().unwrap();
        assert_eq!(out.ledger.steps.last().unwrap().tag, "sparse-threshold");
        assert_eq!(out.eps, exact::powi(&rat(1, 2), out.exponent as i64));
        // one step larger violates at least one of the three demands
        let k = match &out.ledger.params.k {
            LedgerValue::Exact(r) => r.clone(),
            _ => unreachable!(),
        };
        let lambda = &out.ledger.params.lambda;
        let sigma = &out.ledger.params.sigma;
        let loose = &out.eps * rint(2);
        let i1 = &loose * &k <= one();
        let q = sigma.denom().to_u32().unwrap();
        let p = sigma.numer().to_u64().unwrap();
        let lhs = exact::ceil_int(&(rint(2) * &k)).pow(q);
        let t = BigInt::from(out.exponent - 1) * BigInt::from(p);
        let i2 = super::super::cmp_pow_two(&t, &Rat::from(lhs)) != std::cmp::Ordering::Less;
        let i3 = &loose * rint(2) * &k <= *lambda;
        assert!(!(i1 && i2 && i3));
    }

    #[test]
    fn epsilon_grows_with_the_exponent_budget() {
        let cert = handle_cert(15, &[15]);
        let cs = [rat(5, 16), rat(3, 8), rat(1, 2), one()];
        let exps: Vec<u64> =
            cs.iter().map(|c| epsilon_for_sparse(&cert, c).unwrap().exponent).collect();
        for w in exps.windows(2) {
            assert!(w[0] >= w[1], "larger c must not shrink eps: {exps:?}");
        }
        assert!(exps[0] > exps[3]);
    }

    #[test]
    fn epsilon_rejects_a_hollow_margin() {
        let cert = handle_cert(15, &[15]);
        assert!(matches!(
            epsilon_for_sparse(&cert, &rat(1, 4)),
            Err(ForcingError::Precondition(ref m)) if m.contains("margin")
        ));
        assert!(matches!(
            epsilon_for_sparse(&cert, &rat(0, 1)),
            Err(ForcingError::Precondition(_))
        ));
    }
}
