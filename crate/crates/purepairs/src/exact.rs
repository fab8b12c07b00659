//! Exact rational arithmetic: parsing, midpoints, and comparisons against
//! scaled fractional powers of integers. No floating point anywhere.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;

/// Exact rational used across all public interfaces.
pub type Rat = BigRational;

/// `p/q` as an exact rational. Panics when `q == 0`.
pub fn rat(p: i64, q: i64) -> Rat {
    assert!(q != 0, "zero denominator");
    Rat::new(BigInt::from(p), BigInt::from(q))
}

/// Integer as a rational.
pub fn rint(p: i64) -> Rat {
    Rat::from(BigInt::from(p))
}

/// Exact midpoint of two rationals.
pub fn midpoint(a: &Rat, b: &Rat) -> Rat {
    (a + b) / rat(2, 1)
}

/// Smallest integer ≥ r.
pub fn ceil_int(r: &Rat) -> BigInt {
    r.ceil().to_integer()
}

/// Largest integer ≤ r.
pub fn floor_int(r: &Rat) -> BigInt {
    r.floor().to_integer()
}

/// Exact integer power with negative exponents allowed (base must then be nonzero).
pub fn powi(base: &Rat, e: i64) -> Rat {
    if e >= 0 {
        num::pow(base.clone(), e as usize)
    } else {
        assert!(!base.is_zero(), "negative power of zero");
        num::pow(base.clone(), (-e) as usize).recip()
    }
}

/// Smallest integer `m` with `m >= n^c`, for `n >= 1` and rational `c >= 0`.
/// Computed as the exact ceiling of the `q`-th root of `n^p` where `c = p/q`.
pub fn ceil_pow(n: usize, c: &Rat) -> BigInt {
    assert!(n >= 1, "ceil_pow needs n >= 1");
    assert!(!c.is_negative(), "ceil_pow needs c >= 0");
    if c.is_zero() || n == 1 {
        return BigInt::one();
    }
    let p = c.numer().to_u32().expect("power numerator too large");
    let q = c.denom().to_u32().expect("power denominator too large");
    let np = BigInt::from(n).pow(p);
    let root = num::integer::Roots::nth_root(&np, q);
    if num::pow(root.clone(), q as usize) == np {
        root
    } else {
        root + BigInt::one()
    }
}

/// Parses "p/q", a plain integer, or a decimal such as "0.25".
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty rational".into());
    }
    if let Some((num, den)) = s.split_once('/') {
        let p: BigInt = num.trim().parse().map_err(|_| format!("bad numerator {num:?}"))?;
        let q: BigInt = den.trim().parse().map_err(|_| format!("bad denominator {den:?}"))?;
        if q.is_zero() {
            return Err("zero denominator".into());
        }
        return Ok(Rat::new(p, q));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("bad decimal {s:?}"));
        }
        let negative = int_part.starts_with('-');
        let int_digits = int_part.trim_start_matches(['-', '+']);
        let whole: BigInt = if int_digits.is_empty() {
            BigInt::zero()
        } else {
            int_digits.parse().map_err(|_| format!("bad decimal {s:?}"))?
        };
        let frac: BigInt = frac_part.parse().map_err(|_| format!("bad decimal {s:?}"))?;
        let scale = num::pow(BigInt::from(10), frac_part.len());
        let magnitude = Rat::new(whole * &scale + frac, scale);
        return Ok(if negative { -magnitude } else { magnitude });
    }
    let p: BigInt = s.parse().map_err(|_| format!("bad rational {s:?}"))?;
    Ok(Rat::from(p))
}

/// Exact comparison of `coeff · n^exp` with `rhs`, where `exp` is rational.
/// Requires `n ≥ 1`, `coeff ≥ 0`, `rhs ≥ 0`; exponent components must be small
/// enough to materialize the integer powers.
pub fn cmp_scaled_power(n: u64, coeff: &Rat, exp: &Rat, rhs: &Rat) -> Ordering {
    assert!(n >= 1, "power base must be positive");
    assert!(!coeff.is_negative() && !rhs.is_negative(), "signed comparison unsupported");
    let q = exp.denom().to_usize().expect("exponent denominator too large");
    let p_abs = exp.numer().abs().to_usize().expect("exponent numerator too large");
    // coeff·n^{p/q} vs rhs  ⟺  coeff^q·n^p vs rhs^q  (q > 0, both sides ≥ 0)
    let lhs_q = num::pow(coeff.clone(), q);
    let rhs_q = num::pow(rhs.clone(), q);
    let n_pow = Rat::from(num::pow(BigInt::from(n), p_abs));
    if exp.numer().is_negative() {
        lhs_q.cmp(&(rhs_q * n_pow))
    } else {
        (lhs_q * n_pow).cmp(&rhs_q)
    }
}

/// True iff `coeff · n^exp ≥ rhs`, exactly.
pub fn scaled_power_ge(n: u64, coeff: &Rat, exp: &Rat, rhs: &Rat) -> bool {
    cmp_scaled_power(n, coeff, exp, rhs) != Ordering::Less
}

/// One as a rational.
pub fn one() -> Rat {
    Rat::one()
}

/// Zero as a rational.
pub fn zero() -> Rat {
    Rat::zero()
}

/// Floating approximation, for display only.
pub fn approx(r: &Rat) -> f64 {
    use num::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// serde adapter storing rationals as "p/q" strings.
pub mod rat_string {
    use super::{parse_rat, Rat};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let s = String::deserialize(d)?;
        parse_rat(&s).map_err(serde::de::Error::custom)
    }
}

/// serde adapter for big integers as decimal strings.
pub mod bigint_string {
    use num::bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&b.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let s = String::deserialize(d)?;
        s.trim().parse::<BigInt>().map_err(serde::de::Error::custom)
    }
}

/// serde adapter for optional rationals as "p/q" strings.
pub mod rat_string_opt {
    use super::{parse_rat, Rat};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(r: &Option<Rat>, s: S) -> Result<S::Ok, S::Error> {
        r.as_ref().map(|v| v.to_string()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rat>, D::Error> {
        let s: Option<String> = Option::deserialize(d)?;
        s.map(|v| parse_rat(&v).map_err(serde::de::Error::custom)).transpose()
    }
}
