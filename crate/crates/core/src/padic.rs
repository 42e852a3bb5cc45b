//! Exact p-adic valuation arithmetic over the rationals.
//!
//! Every element of ℚₚ handled by this crate is a rational number; the
//! valuation, norm and residue operations below are exact.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{ClabError, Result};

/// Arbitrary-precision fraction, always in lowest terms with positive denominator.
pub type ExactRational = BigRational;

/// A prime together with the exponent bound used by metric grids.
///
/// The bound never affects arithmetic; it limits how deep the Chabauty grid
/// `{p^k : -K <= k <= 0}` and the enumeration oracles look.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PrimeContext {
    p: u64,
    precision: u32,
}

impl PrimeContext {
    pub fn new(p: u64, precision: u32) -> Result<Self> {
        if !is_prime(p) {
            return Err(ClabError::Domain(format!("{p} is not prime")));
        }
        if precision == 0 {
            return Err(ClabError::Domain("precision exponent K must be >= 1".into()));
        }
        Ok(PrimeContext { p, precision })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// The exponent bound K.
    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn with_precision(&self, precision: u32) -> Result<Self> {
        PrimeContext::new(self.p, precision)
    }

    pub fn valuation(&self, x: &ExactRational) -> Valuation {
        valuation(x, self.p)
    }

    pub fn norm(&self, x: &ExactRational) -> ExactRational {
        norm_p(x, self.p)
    }

    /// `p^k` as an exact rational.
    pub fn pow(&self, k: i64) -> ExactRational {
        p_power(self.p, k)
    }
}

/// A p-adic valuation: an integer, or +∞ for zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Valuation {
    Finite(i64),
    Infinite,
}

impl Valuation {
    pub fn finite(self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Valuation::Infinite)
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinite => write!(f, "+inf"),
        }
    }
}

/// Deterministic trial-division primality check.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Strips every factor `p` from `n`, returning the count.
fn strip_factor(n: &mut BigInt, p: &BigInt) -> i64 {
    let mut count = 0;
    loop {
        let (q, r) = n.div_rem(p);
        if !r.is_zero() {
            return count;
        }
        *n = q;
        count += 1;
    }
}

/// Exponent `n` with `x = p^n * c/d`, `gcd(c, p) = gcd(d, p) = 1`; +∞ for zero.
pub fn valuation(x: &ExactRational, p: u64) -> Valuation {
    if x.is_zero() {
        return Valuation::Infinite;
    }
    let pb = BigInt::from(p);
    let mut num = x.numer().clone();
    let mut den = x.denom().clone();
    let up = strip_factor(&mut num, &pb);
    let down = strip_factor(&mut den, &pb);
    Valuation::Finite(up - down)
}

/// Finite valuation of a nonzero rational. Panics on zero.
pub(crate) fn val(x: &ExactRational, p: u64) -> i64 {
    valuation(x, p)
        .finite()
        .expect("valuation of zero requested where a unit was expected")
}

/// `|x|_p = p^{-v_p(x)}`, with `|0|_p = 0`.
pub fn norm_p(x: &ExactRational, p: u64) -> ExactRational {
    match valuation(x, p) {
        Valuation::Infinite => ExactRational::zero(),
        Valuation::Finite(v) => p_power(p, -v),
    }
}

/// `p^k` for any integer `k`.
pub fn p_power(p: u64, k: i64) -> ExactRational {
    let base = BigInt::from(p);
    let mag = num_traits::pow(base, k.unsigned_abs() as usize);
    if k >= 0 {
        ExactRational::from_integer(mag)
    } else {
        ExactRational::new(BigInt::one(), mag)
    }
}

/// Splits a nonzero `x` as `p^v * u` with `|u|_p = 1`.
pub fn unit_part(x: &ExactRational, p: u64) -> Option<(i64, ExactRational)> {
    let v = valuation(x, p).finite()?;
    Some((v, x / p_power(p, v)))
}

pub fn add(x: &ExactRational, y: &ExactRational) -> ExactRational {
    x + y
}

pub fn negate(x: &ExactRational) -> ExactRational {
    -x
}

pub fn multiply(x: &ExactRational, y: &ExactRational) -> ExactRational {
    x * y
}

pub fn invert(x: &ExactRational) -> Result<ExactRational> {
    if x.is_zero() {
        return Err(ClabError::Domain("inverse of zero".into()));
    }
    Ok(x.recip())
}

/// Inverse of `a` modulo `m` for `gcd(a, m) = 1`.
fn mod_inverse(a: &BigInt, m: &BigInt) -> BigInt {
    let e = a.mod_floor(m).extended_gcd(m);
    debug_assert!(e.gcd.is_one());
    e.x.mod_floor(m)
}

/// Canonical representative of `x` modulo `p^k ℤₚ`.
///
/// Returns 0 when `v(x) >= k`; otherwise `p^w * m` with `w = v(x)` and
/// `0 < m < p^(k-w)` the integer congruent to the unit part of `x`.
pub fn residue_rep(x: &ExactRational, p: u64, k: i64) -> ExactRational {
    let w = match valuation(x, p) {
        Valuation::Infinite => return ExactRational::zero(),
        Valuation::Finite(w) if w >= k => return ExactRational::zero(),
        Valuation::Finite(w) => w,
    };
    let u = x / p_power(p, w);
    let modulus = num_traits::pow(BigInt::from(p), (k - w) as usize);
    let m = (u.numer() * mod_inverse(u.denom(), &modulus)).mod_floor(&modulus);
    ExactRational::from_integer(m) * p_power(p, w)
}

/// Residue of a p-integral rational modulo `p^k` as a nonnegative integer.
pub fn reduce_mod_power(x: &ExactRational, p: u64, k: u32) -> Option<BigInt> {
    if matches!(valuation(x, p), Valuation::Finite(v) if v < 0) {
        return None;
    }
    let modulus = num_traits::pow(BigInt::from(p), k as usize);
    Some((x.numer() * mod_inverse(x.denom(), &modulus)).mod_floor(&modulus))
}

/// Exact string form: `"n"` for integers, `"n/d"` otherwise.
pub fn fmt_rational(x: &ExactRational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Writes `x` as `"p^k"` when it is a power of `p`, falling back to `"n/d"`.
pub fn fmt_p_power(x: &ExactRational, p: u64) -> String {
    if x.is_zero() {
        return "0".into();
    }
    if x.is_one() {
        return "1".into();
    }
    if let Some((v, u)) = unit_part(x, p) {
        if u.is_one() {
            return format!("{p}^{v}");
        }
    }
    fmt_rational(x)
}

/// Parses `"n"`, `"n/d"`, or `"b^e"` (signed exponent) into an exact rational.
pub fn parse_rational(s: &str) -> Result<ExactRational> {
    let s = s.trim();
    let bad = || ClabError::Malformed(format!("not an exact rational: {s:?}"));
    if let Some((base, exp)) = s.split_once('^') {
        let base = BigInt::from_str(base.trim()).map_err(|_| bad())?;
        let exp: i64 = exp.trim().parse().map_err(|_| bad())?;
        if base.is_zero() {
            return Err(bad());
        }
        let mag = num_traits::pow(base, exp.unsigned_abs() as usize);
        return Ok(if exp >= 0 {
            ExactRational::from_integer(mag)
        } else {
            ExactRational::new(BigInt::one(), mag)
        });
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(ClabError::Domain(format!("zero denominator in {s:?}")));
        }
        return Ok(ExactRational::new(n, d));
    }
    let n = BigInt::from_str(s).map_err(|_| bad())?;
    Ok(ExactRational::from_integer(n))
}

/// Convenience constructor `n/d`.
pub fn q(n: i64, d: i64) -> ExactRational {
    ExactRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> ExactRational {
    ExactRational::from_integer(BigInt::from(n))
}

/// `floor(log_p(1/r))`-style helper: the smallest `j` with `p^{-j} <= r`, for `r > 0`.
pub fn ball_exponent(r: &ExactRational, p: u64) -> i64 {
    debug_assert!(r.is_positive());
    // start from the valuation estimate and correct by one step either way
    let approx = -(r.numer().bits() as i64 - r.denom().bits() as i64);
    let pf = p as f64;
    let mut j = (approx as f64 / pf.log2()).floor() as i64;
    while p_power(p, -j) > *r {
        j += 1;
    }
    while p_power(p, -(j - 1)) <= *r {
        j -= 1;
    }
    j
}

/// Lossy conversion for display only.
pub fn to_f64(x: &ExactRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
