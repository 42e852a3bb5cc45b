//! Rigorous rational interval enclosures of `arctan` and `π/2`.
//!
//! Series terms are rounded outward onto a dyadic grid, so endpoints stay
//! small while every enclosure remains rigorous.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{ClabError, Result};
use crate::padic::{q, ExactRational as Q};

/// Closed interval `[lo, hi]` with rational endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    pub lo: Q,
    pub hi: Q,
}

/// Precision schedule: start here and double on undecided comparisons.
pub const START_BITS: u32 = 48;
pub const MAX_BITS: u32 = 4096;

impl Interval {
    pub fn point(x: Q) -> Self {
        Interval { lo: x.clone(), hi: x }
    }

    pub fn width(&self) -> Q {
        &self.hi - &self.lo
    }

    pub fn add(&self, o: &Interval) -> Interval {
        Interval { lo: &self.lo + &o.lo, hi: &self.hi + &o.hi }
    }

    pub fn sub(&self, o: &Interval) -> Interval {
        Interval { lo: &self.lo - &o.hi, hi: &self.hi - &o.lo }
    }

    pub fn neg(&self) -> Interval {
        Interval { lo: -self.hi.clone(), hi: -self.lo.clone() }
    }

    pub fn scale(&self, k: i64) -> Interval {
        let k = Q::from_integer(BigInt::from(k));
        if k.is_negative() {
            Interval { lo: &self.hi * &k, hi: &self.lo * &k }
        } else {
            Interval { lo: &self.lo * &k, hi: &self.hi * &k }
        }
    }

    /// Enclosure of `|x|` for `x` in the interval.
    pub fn abs(&self) -> Interval {
        if !self.lo.is_negative() {
            self.clone()
        } else if !self.hi.is_positive() {
            self.neg()
        } else {
            Interval { lo: Q::zero(), hi: self.hi.clone().max(-self.lo.clone()) }
        }
    }

    /// Outward rounding to multiples of `2^{-bits}`.
    pub fn round_out(&self, bits: u32) -> Interval {
        let scale = Q::from_integer(BigInt::one() << bits);
        let lo = (&self.lo * &scale).floor() / &scale;
        let hi = (&self.hi * &scale).ceil() / &scale;
        Interval { lo, hi }
    }

    pub fn strictly_below(&self, x: &Q) -> bool {
        &self.hi < x
    }

    pub fn strictly_above(&self, x: &Q) -> bool {
        &self.lo > x
    }
}

/// `arctan(y)` for `|y| <= 1/2` by the alternating Taylor series.
///
/// Each term is rounded outward onto a grid 2^{-work} finer than the target,
/// so the lower and upper partial sums bracket the exact partial sum.
fn atan_small(y: &Q, bits: u32) -> Interval {
    debug_assert!(y.abs() <= q(1, 2));
    if y.is_zero() {
        return Interval::point(Q::zero());
    }
    let work = bits + 24;
    let scale = Q::from_integer(BigInt::one() << work);
    let target = Q::new(BigInt::one(), BigInt::one() << (bits + 2));
    let y2 = y * y;
    let mut power = y.clone();
    let (mut lo, mut hi) = (Q::zero(), Q::zero());
    let mut k: i64 = 0;
    loop {
        let term = &power / Q::from_integer(BigInt::from(2 * k + 1));
        let signed = if k % 2 == 0 { term } else { -term };
        lo += (&signed * &scale).floor() / &scale;
        hi += (&signed * &scale).ceil() / &scale;
        power *= &y2;
        k += 1;
        let next = (&power / Q::from_integer(BigInt::from(2 * k + 1))).abs();
        if next <= target {
            // alternating series with decreasing terms: remainder below the next term
            return Interval { lo: lo - &next, hi: hi + &next }.round_out(bits + 1);
        }
    }
}

/// Enclosure of `π/2 = 2(arctan(1/2) + arctan(1/3))` with width below `2^{-bits+2}`.
pub fn half_pi(bits: u32) -> Interval {
    let a = atan_small(&q(1, 2), bits + 3);
    let b = atan_small(&q(1, 3), bits + 3);
    a.add(&b).scale(2).round_out(bits + 1)
}

/// Enclosure of `arctan(x)` for any rational `x`, width below `2^{-bits+3}`.
pub fn atan(x: &Q, bits: u32) -> Interval {
    if x.is_negative() {
        return atan(&-x.clone(), bits).neg();
    }
    let half = q(1, 2);
    if *x <= half {
        atan_small(x, bits)
    } else if *x <= Q::one() {
        // arctan x = arctan(1/2) + arctan((2x - 1)/(2 + x))
        let two = Q::from_integer(BigInt::from(2));
        let y = (&two * x - Q::one()) / (&two + x);
        atan_small(&half, bits + 1).add(&atan_small(&y, bits + 1)).round_out(bits + 1)
    } else {
        // arctan x = π/2 - arctan(1/x)
        half_pi(bits + 1).sub(&atan(&x.recip(), bits + 1)).round_out(bits + 1)
    }
}

/// Enclosure of `|arctan(x) - arctan(y)|`.
pub fn atan_gap(x: &Q, y: &Q, bits: u32) -> Interval {
    if x == y {
        return Interval::point(Q::zero());
    }
    atan(x, bits).sub(&atan(y, bits)).abs()
}

/// Decides `value < threshold` for an interval-valued computation, escalating
/// precision until the enclosure clears the threshold one way or the other.
pub fn decide_below<F>(threshold: &Q, mut eval: F) -> Result<(bool, Interval)>
where
    F: FnMut(u32) -> Interval,
{
    let mut bits = START_BITS;
    loop {
        let iv = eval(bits);
        if iv.strictly_below(threshold) {
            return Ok((true, iv));
        }
        if iv.lo >= *threshold {
            return Ok((false, iv));
        }
        if bits >= MAX_BITS {
            return Err(ClabError::PrecisionExhausted { bits });
        }
        bits *= 2;
    }
}

/// Largest power of two not exceeding `x` (for `x > 0`), as `(2^{-e}, e)`.
pub fn pow2_floor(x: &Q) -> (Q, i64) {
    assert!(x.is_positive());
    let mut e: i64 = 0;
    let mut v = Q::one();
    while v > *x {
        v /= Q::from_integer(BigInt::from(2));
        e += 1;
    }
    while &v * Q::from_integer(BigInt::from(2)) <= *x {
        v *= Q::from_integer(BigInt::from(2));
        e -= 1;
    }
    (v, e)
}
