//! Constants ledgers and the executable forcing pipeline.
//!
//! A handle decomposition turns into a chain of constant derivations: each
//! handle costs two covering refinements, a pendant-leaves step, and a
//! divergence shrink whose ambient length comes from the backwards-grading
//! ladder.  Every step records the inequalities it relied on as exact
//! claims, so a finished ledger can be re-verified or replayed bit for bit.
//! Quantities like the blockade length `K` or the host floor `N` outgrow
//! every fixed-width type; ledgers carry them either as exact rationals or
//! as powers of two compared through bit-length windows, never as floats.

mod force;
mod ledger;
mod sparse;

pub use force::{force_rainbow_copy, ForceOutcome};
pub use ledger::{
    epsilon_for_sparse, ledger_bigrade_shrink, ledger_chain, ShrinkConstants, SparseEpsilon,
};
pub use sparse::{reduce_to_sparse, SparseReduction, SparseSide};

use crate::exact::{self, Rat};
use num::bigint::BigInt;
use num::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ForcingError {
    /// An input fails a stated precondition; the message names it.
    #[error("precondition: {0}")]
    Precondition(String),
    /// A recorded claim does not hold on the given inputs.  The failing
    /// inequality is spelled out with both sides evaluated.
    #[error("claim failed: {0}")]
    Claim(String),
    /// The certificate is malformed or replays to something unexpected.
    #[error("certificate: {0}")]
    Certificate(String),
    /// The derivation is sound but its constants cannot be materialized;
    /// chains with two or more handles end here by nature, not by bug.
    #[error("resource limit: {0}")]
    Resource(String),
}

/// Exact scalar in a ledger: a rational written out in full, or a power of
/// two kept as its exponent when writing the digits out would itself be
/// infeasible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "form", content = "value", rename_all = "snake_case")]
pub enum LedgerValue {
    Exact(#[serde(with = "crate::exact::rat_string")] Rat),
    PowTwo(#[serde(with = "crate::exact::bigint_string")] BigInt),
}

impl LedgerValue {
    pub fn int(v: i64) -> LedgerValue {
        LedgerValue::Exact(exact::rint(v))
    }

    pub fn big(v: BigInt) -> LedgerValue {
        LedgerValue::Exact(Rat::from(v))
    }

    /// Numeric order across both forms.  `Exact(32)` and `PowTwo(5)` compare
    /// equal despite being distinct values of the enum, which is why this is
    /// an inherent method and not an `Ord` impl.
    pub fn compare(&self, other: &LedgerValue) -> Ordering {
        match (self, other) {
            (LedgerValue::Exact(a), LedgerValue::Exact(b)) => a.cmp(b),
            (LedgerValue::PowTwo(e), LedgerValue::PowTwo(f)) => e.cmp(f),
            (LedgerValue::PowTwo(e), LedgerValue::Exact(r)) => cmp_pow_two(e, r),
            (LedgerValue::Exact(r), LedgerValue::PowTwo(e)) => cmp_pow_two(e, r).reverse(),
        }
    }

    pub fn max(self, other: LedgerValue) -> LedgerValue {
        if self.compare(&other) == Ordering::Less {
            other
        } else {
            self
        }
    }
}

/// `2^e` versus `p/q` without materializing the power.  The product `q 2^e`
/// sits in `[2^(e+bits(q)-1), 2^(e+bits(q)))`, so unless the bit windows of
/// the two sides overlap the order is already decided; the overlap band
/// forces the exponent down to a machine-sized shift, where the comparison
/// happens exactly.
fn cmp_pow_two(e: &BigInt, r: &Rat) -> Ordering {
    if !r.is_positive() {
        return Ordering::Greater;
    }
    let p = r.numer();
    let q = r.denom();
    if e.is_negative() {
        // q 2^e vs p  <=>  q vs p 2^(-e)
        cmp_shifted(p, &-e, q).reverse()
    } else {
        cmp_shifted(q, e, p)
    }
}

/// `a 2^sh` versus `b` for positive `a`, `b` and `sh >= 0`.
fn cmp_shifted(a: &BigInt, sh: &BigInt, b: &BigInt) -> Ordering {
    let ba = BigInt::from(a.bits());
    let bb = BigInt::from(b.bits());
    if sh + &ba - 1 >= bb {
        // a 2^sh >= 2^(sh + bits(a) - 1) >= 2^bits(b) > b
        return Ordering::Greater;
    }
    if sh + &ba <= &bb - 1 {
        // a 2^sh < 2^(sh + bits(a)) <= 2^(bits(b) - 1) <= b
        return Ordering::Less;
    }
    // the windows overlap only when sh is within two of bits(b) - bits(a),
    // which is machine sized for any materialized b
    let sh = sh.to_usize().expect("overlap band exponent fits a shift");
    (a << sh).cmp(b)
}

impl fmt::Display for LedgerValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LedgerValue::Exact(r) => {
                if r.numer().bits().max(r.denom().bits()) <= 128 {
                    write!(f, "{r}")
                } else {
                    // human-facing cue only; serialization keeps every digit
                    let scale = r.numer().bits() as i128 - r.denom().bits() as i128;
                    write!(f, "~2^{scale}")
                }
            }
            LedgerValue::PowTwo(e) => write!(f, "2^{e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rel {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl fmt::Display for Rel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Eq => "=",
            Rel::Ge => ">=",
            Rel::Gt => ">",
        };
        f.write_str(s)
    }
}

/// One recorded inequality; [`Claim::holds`] re-checks it from the stored
/// values alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub note: String,
    pub lhs: LedgerValue,
    pub rel: Rel,
    pub rhs: LedgerValue,
}

impl Claim {
    pub fn holds(&self) -> bool {
        let ord = self.lhs.compare(&self.rhs);
        match self.rel {
            Rel::Lt => ord == Ordering::Less,
            Rel::Le => ord != Ordering::Greater,
            Rel::Eq => ord == Ordering::Equal,
            Rel::Ge => ord != Ordering::Less,
            Rel::Gt => ord == Ordering::Greater,
        }
    }
}

/// One derivation step: which rule fired, the scalars it consumed and
/// produced, and the inequalities it relied on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerStep {
    pub tag: String,
    pub inputs: Vec<(String, LedgerValue)>,
    pub outputs: Vec<(String, LedgerValue)>,
    pub claims: Vec<Claim>,
}

impl LedgerStep {
    pub(crate) fn new(tag: &str) -> LedgerStep {
        LedgerStep { tag: tag.into(), inputs: vec![], outputs: vec![], claims: vec![] }
    }

    pub(crate) fn input(&mut self, name: &str, v: LedgerValue) {
        self.inputs.push((name.into(), v));
    }

    pub(crate) fn output(&mut self, name: &str, v: LedgerValue) {
        self.outputs.push((name.into(), v));
    }

    /// Records a claim and fails loudly when it does not hold; a false claim
    /// is a violated precondition, never a recoverable state.
    pub(crate) fn claim(
        &mut self,
        note: &str,
        lhs: LedgerValue,
        rel: Rel,
        rhs: LedgerValue,
    ) -> Result<(), ForcingError> {
        let c = Claim { note: note.into(), lhs, rel, rhs };
        let ok = c.holds();
        let msg = format!("{}: {} {} {}", c.note, c.lhs, c.rel, c.rhs);
        self.claims.push(c);
        if ok {
            Ok(())
        } else {
            Err(ForcingError::Claim(msg))
        }
    }
}

/// The forcing constants attached to a pattern: hosts with at least `n`
/// vertices carrying a blockade of length `k`, shrinkage at most `sigma` and
/// linkage at most `lambda` contain a rainbow copy, at coherence exponent
/// `c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForcingParams {
    #[serde(rename = "N")]
    pub n: LedgerValue,
    #[serde(rename = "K")]
    pub k: LedgerValue,
    #[serde(with = "crate::exact::rat_string")]
    pub sigma: Rat,
    #[serde(with = "crate::exact::rat_string")]
    pub lambda: Rat,
    #[serde(with = "crate::exact::rat_string")]
    pub c: Rat,
}

impl ForcingParams {
    pub fn validate(&self) -> Result<(), ForcingError> {
        let one = LedgerValue::int(1);
        if self.n.compare(&one) == Ordering::Less {
            return Err(ForcingError::Precondition(format!(
                "host floor N = {} must be at least 1",
                self.n
            )));
        }
        if self.k.compare(&one) == Ordering::Less {
            return Err(ForcingError::Precondition(format!(
                "blockade length K = {} must be at least 1",
                self.k
            )));
        }
        if !self.sigma.is_positive() || self.sigma >= self.c {
            return Err(ForcingError::Precondition(format!(
                "need 0 < sigma < c, got sigma = {}, c = {}",
                self.sigma, self.c
            )));
        }
        if !self.lambda.is_positive() {
            return Err(ForcingError::Precondition(format!(
                "lambda = {} must be positive",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Complete derivation chain for one certificate: every step with its
/// claims, plus the resulting constants.  Rebuilding from the same inputs
/// reproduces the ledger bit for bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    pub steps: Vec<LedgerStep>,
    pub params: ForcingParams,
}

impl ConstantsLedger {
    /// Re-checks every recorded claim and the final parameter invariants.
    pub fn verify(&self) -> Result<(), ForcingError> {
        for step in &self.steps {
            for c in &step.claims {
                if !c.holds() {
                    return Err(ForcingError::Claim(format!(
                        "step {}: {}: {} {} {}",
                        step.tag, c.note, c.lhs, c.rel, c.rhs
                    )));
                }
            }
        }
        self.params.validate()
    }
}

/// Smallest `t` with `2^t >= x`, for `x >= 1`.
pub(crate) fn ceil_log2(x: &BigInt) -> BigInt {
    debug_assert!(x.is_positive());
    let b = BigInt::from(x.bits());
    if (x & &(x - 1)).is_zero() {
        b - 1
    } else {
        b
    }
}

/// Smallest nonnegative `t` with `2^t >= r`.
pub(crate) fn ceil_log2_rat(r: &Rat) -> BigInt {
    if *r <= exact::one() {
        return BigInt::zero();
    }
    ceil_log2(&exact::ceil_int(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;

    fn ex(p: i64, q: i64) -> LedgerValue {
        LedgerValue::Exact(rat(p, q))
    }

    fn pw(e: i64) -> LedgerValue {
        LedgerValue::PowTwo(BigInt::from(e))
    }

    #[test]
    fn mixed_forms_compare_numerically() {
        assert_eq!(pw(5).compare(&ex(32, 1)), Ordering::Equal);
        assert_eq!(pw(5).compare(&ex(33, 1)), Ordering::Less);
        assert_eq!(pw(5).compare(&ex(31, 1)), Ordering::Greater);
        assert_eq!(ex(31, 1).compare(&pw(5)), Ordering::Less);
        assert_eq!(pw(-3).compare(&ex(1, 8)), Ordering::Equal);
        assert_eq!(pw(-3).compare(&ex(1, 7)), Ordering::Less);
        assert_eq!(pw(-3).compare(&ex(1, 9)), Ordering::Greater);
        assert_eq!(pw(0).compare(&ex(1, 1)), Ordering::Equal);
        // powers of two dominate any nonpositive rational
        assert_eq!(pw(-100).compare(&ex(0, 1)), Ordering::Greater);
        assert_eq!(pw(-100).compare(&ex(-7, 2)), Ordering::Greater);
    }

    #[test]
    fn astronomical_exponents_stay_in_window_space() {
        // 2^(10^30) against a few hundred digits: decided by bit windows
        let huge = LedgerValue::PowTwo(BigInt::from(10u8).pow(30));
        let big_rat = LedgerValue::Exact(Rat::from(BigInt::from(10u8).pow(200)));
        assert_eq!(huge.compare(&big_rat), Ordering::Greater);
        assert_eq!(big_rat.compare(&huge), Ordering::Less);
        let tiny = LedgerValue::PowTwo(-BigInt::from(10u8).pow(30));
        let small_rat = LedgerValue::Exact(exact::one() / Rat::from(BigInt::from(10u8).pow(200)));
        assert_eq!(tiny.compare(&small_rat), Ordering::Less);
        assert_eq!(
            LedgerValue::PowTwo(BigInt::from(10u8).pow(30))
                .compare(&LedgerValue::PowTwo(BigInt::from(10u8).pow(29))),
            Ordering::Greater
        );
    }

    #[test]
    fn claims_check_their_relation() {
        let mk = |rel| Claim { note: "t".into(), lhs: ex(1, 2), rel, rhs: ex(3, 4) };
        assert!(mk(Rel::Lt).holds());
        assert!(mk(Rel::Le).holds());
        assert!(!mk(Rel::Eq).holds());
        assert!(!mk(Rel::Ge).holds());
        assert!(!mk(Rel::Gt).holds());
        let eq = Claim { note: "t".into(), lhs: pw(5), rel: Rel::Eq, rhs: ex(32, 1) };
        assert!(eq.holds());
    }

    #[test]
    fn serde_keeps_both_forms_exact() {
        let v = ex(-7, 3);
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"form":"exact","value":"-7/3"}"#);
        assert_eq!(serde_json::from_str::<LedgerValue>(&s).unwrap(), v);
        let p = LedgerValue::PowTwo(BigInt::from(10u8).pow(25));
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"form":"pow_two","value":"10000000000000000000000000"}"#);
        assert_eq!(serde_json::from_str::<LedgerValue>(&s).unwrap(), p);
    }

    #[test]
    fn display_abbreviates_what_serialization_keeps() {
        assert_eq!(ex(3, 4).to_string(), "3/4");
        assert_eq!(pw(100).to_string(), "2^100");
        let huge = LedgerValue::Exact(Rat::from(BigInt::from(2u8).pow(1000)));
        assert_eq!(huge.to_string(), "~2^1000");
    }

    #[test]
    fn ceil_log2_is_exact_at_powers() {
        assert_eq!(ceil_log2(&BigInt::from(1)), BigInt::from(0));
        assert_eq!(ceil_log2(&BigInt::from(2)), BigInt::from(1));
        assert_eq!(ceil_log2(&BigInt::from(3)), BigInt::from(2));
        assert_eq!(ceil_log2(&BigInt::from(4)), BigInt::from(2));
        assert_eq!(ceil_log2(&BigInt::from(5)), BigInt::from(3));
        assert_eq!(ceil_log2_rat(&rat(1, 2)), BigInt::from(0));
        assert_eq!(ceil_log2_rat(&rat(9, 2)), BigInt::from(3));
    }

    #[test]
    fn params_validate_their_window() {
        let good = ForcingParams {
            n: LedgerValue::int(1),
            k: LedgerValue::int(2),
            sigma: rat(1, 8),
            lambda: rat(1, 2),
            c: rat(1, 2),
        };
        assert!(good.validate().is_ok());
        let mut bad = good.clone();
        bad.sigma = rat(1, 2);
        assert!(matches!(bad.validate(), Err(ForcingError::Precondition(_))));
        let mut bad = good.clone();
        bad.k = LedgerValue::int(0);
        assert!(bad.validate().is_err());
        let mut bad = good;
        bad.lambda = rat(0, 1);
        assert!(bad.validate().is_err());
    }
}
