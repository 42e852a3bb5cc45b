//! Closed subgroups of the supported ambient groups.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{ClabError, Result};
use crate::linalg;
use crate::module::{ball_module, QpModule, Slot};
use crate::padic::{
    ball_exponent, fmt_rational, is_prime, p_power, reduce_mod_power, val, valuation,
    ExactRational as Q, PrimeContext, Valuation,
};

/// The locally compact group a subgroup lives in.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AmbientGroup {
    Integers,
    Reals,
    Circle,
    PAdicLine(PrimeContext),
    PAdicSpace(PrimeContext, usize),
    /// `ℚ_{p_1} × ⋯ × ℚ_{p_n}` for distinct primes.
    PrimeProduct(Vec<PrimeContext>),
    /// `F^{(-ℕ)} × F^{ℕ_0}` with `|F| = order`, metric evaluated on `-window..=window`.
    ShiftGroup { order: u32, window: i64 },
}

impl AmbientGroup {
    pub fn product(primes: &[u64], precision: u32) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut ctxs = Vec::with_capacity(primes.len());
        for &p in primes {
            if !seen.insert(p) {
                return Err(ClabError::Malformed(format!("prime {p} repeated in product")));
            }
            ctxs.push(PrimeContext::new(p, precision)?);
        }
        if ctxs.is_empty() {
            return Err(ClabError::Malformed("product needs at least one prime".into()));
        }
        Ok(AmbientGroup::PrimeProduct(ctxs))
    }

    pub fn shift(order: u32, window: i64) -> Result<Self> {
        if order < 2 || window < 1 {
            return Err(ClabError::Malformed("shift group needs order >= 2 and window >= 1".into()));
        }
        Ok(AmbientGroup::ShiftGroup { order, window })
    }

    pub fn is_ultrametric(&self) -> bool {
        matches!(
            self,
            AmbientGroup::PAdicLine(_)
                | AmbientGroup::PAdicSpace(..)
                | AmbientGroup::PrimeProduct(_)
                | AmbientGroup::ShiftGroup { .. }
        )
    }

    pub fn name(&self) -> String {
        match self {
            AmbientGroup::Integers => "Z".into(),
            AmbientGroup::Reals => "R".into(),
            AmbientGroup::Circle => "circle".into(),
            AmbientGroup::PAdicLine(c) => format!("Q_{}", c.p()),
            AmbientGroup::PAdicSpace(c, n) => format!("Q_{}^{}", c.p(), n),
            AmbientGroup::PrimeProduct(cs) => cs
                .iter()
                .map(|c| format!("Q_{}", c.p()))
                .collect::<Vec<_>>()
                .join(" x "),
            AmbientGroup::ShiftGroup { order, window } => format!("shift(f={order}, W={window})"),
        }
    }

    pub fn primes(&self) -> Vec<u64> {
        match self {
            AmbientGroup::PAdicLine(c) | AmbientGroup::PAdicSpace(c, _) => vec![c.p()],
            AmbientGroup::PrimeProduct(cs) => cs.iter().map(|c| c.p()).collect(),
            _ => vec![],
        }
    }

    pub fn precision(&self) -> Option<u32> {
        match self {
            AmbientGroup::PAdicLine(c) | AmbientGroup::PAdicSpace(c, _) => Some(c.precision()),
            AmbientGroup::PrimeProduct(cs) => cs.first().map(|c| c.precision()),
            AmbientGroup::ShiftGroup { window, .. } => Some(*window as u32),
            _ => None,
        }
    }
}

/// An element of an ambient group.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Element {
    /// ℤ, ℝ, ℚₚ, or the circle ℝ/ℤ (as a representative angle).
    Scalar(Q),
    /// ℚₚⁿ or a product of ℚ_{pᵢ}.
    Vector(Vec<Q>),
    /// Finitely supported shift-group element: coordinate -> nonzero residue mod f.
    Shift(BTreeMap<i64, u32>),
}

/// Closed subgroups of ℝ: `{0}`, `αℤ` or ℝ.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RealSubgroup {
    Trivial,
    Spacing(Q),
    Full,
}

/// Closed subgroups of the circle: finite cyclic `C_n` or the whole circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CircleSubgroup {
    Cyclic(u64),
    Full,
}

/// Closed subgroups of ℚₚ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QpSubgroup {
    Zero,
    /// `p^k ℤₚ`
    Lattice(i64),
    Full,
}

/// The compact subgroup `H_S` of elements supported on `S`, where `S` is a finite
/// set plus an optional tail `[tail, ∞)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ShiftSubgroup {
    support: BTreeSet<i64>,
    tail: Option<i64>,
}

impl ShiftSubgroup {
    pub fn new(support: impl IntoIterator<Item = i64>, tail: Option<i64>) -> Self {
        let mut support: BTreeSet<i64> = support.into_iter().collect();
        if let Some(t) = tail {
            support.retain(|&n| n < t);
        }
        ShiftSubgroup { support, tail }
    }

    pub fn trivial() -> Self {
        ShiftSubgroup::new([], None)
    }

    pub fn support(&self) -> &BTreeSet<i64> {
        &self.support
    }

    pub fn tail(&self) -> Option<i64> {
        self.tail
    }

    pub fn contains_coord(&self, n: i64) -> bool {
        self.support.contains(&n) || self.tail.is_some_and(|t| n >= t)
    }

    /// Coordinates of the support inside `-window..=window`.
    pub fn truncated(&self, window: i64) -> BTreeSet<i64> {
        let mut s: BTreeSet<i64> = self.support.range(-window..=window).copied().collect();
        if let Some(t) = self.tail {
            s.extend(t.max(-window)..=window);
        }
        s
    }

    pub fn shifted(&self, s: i64, window: i64) -> Result<Self> {
        let support: BTreeSet<i64> = self.support.iter().map(|n| n + s).collect();
        if let (Some(lo), Some(hi)) = (support.first(), support.last()) {
            if *lo < -window || *hi > window {
                return Err(ClabError::Truncation(format!(
                    "support {{{}..{}}} leaves window -{window}..{window}",
                    lo, hi
                )));
            }
        }
        Ok(ShiftSubgroup { support, tail: self.tail.map(|t| t + s) })
    }

    /// `H_S ∩ B̄(0, 2^{-j})`: only coordinates `n >= j` have norm `2^{-n} <= 2^{-j}`.
    pub fn ball(&self, j: i64) -> Self {
        ShiftSubgroup::new(self.support.range(j..).copied(), self.tail.map(|t| t.max(j)))
    }

    pub fn min_coord(&self) -> Option<i64> {
        match (self.support.first(), self.tail) {
            (Some(&a), Some(t)) => Some(a.min(t)),
            (Some(&a), None) => Some(a),
            (None, t) => t,
        }
    }
}

/// A closed subgroup of one of the ambient groups.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ClosedSubgroup {
    /// `nℤ`, with 0 meaning the trivial subgroup.
    Int(u64),
    Real(RealSubgroup),
    Circle(CircleSubgroup),
    Qp(QpSubgroup),
    Module(QpModule),
    Product(Vec<QpSubgroup>),
    Shift(ShiftSubgroup),
}

impl ClosedSubgroup {
    pub fn kind(&self) -> &'static str {
        match self {
            ClosedSubgroup::Int(_) => "int",
            ClosedSubgroup::Real(_) => "real",
            ClosedSubgroup::Circle(_) => "circle",
            ClosedSubgroup::Qp(_) => "qp",
            ClosedSubgroup::Module(_) => "module",
            ClosedSubgroup::Product(_) => "product",
            ClosedSubgroup::Shift(_) => "shift",
        }
    }

    /// The trivial subgroup of `ambient`.
    pub fn trivial(ambient: &AmbientGroup) -> Self {
        match ambient {
            AmbientGroup::Integers => ClosedSubgroup::Int(0),
            AmbientGroup::Reals => ClosedSubgroup::Real(RealSubgroup::Trivial),
            AmbientGroup::Circle => ClosedSubgroup::Circle(CircleSubgroup::Cyclic(1)),
            AmbientGroup::PAdicLine(_) => ClosedSubgroup::Qp(QpSubgroup::Zero),
            AmbientGroup::PAdicSpace(_, n) => ClosedSubgroup::Module(QpModule::zero(*n)),
            AmbientGroup::PrimeProduct(cs) => ClosedSubgroup::Product(vec![QpSubgroup::Zero; cs.len()]),
            AmbientGroup::ShiftGroup { .. } => ClosedSubgroup::Shift(ShiftSubgroup::trivial()),
        }
    }

    /// The whole ambient group (for the shift group: the compact part `H_{[0,∞)}`
    /// is not the whole group, so the full group is not representable there).
    pub fn full(ambient: &AmbientGroup) -> Result<Self> {
        Ok(match ambient {
            AmbientGroup::Integers => ClosedSubgroup::Int(1),
            AmbientGroup::Reals => ClosedSubgroup::Real(RealSubgroup::Full),
            AmbientGroup::Circle => ClosedSubgroup::Circle(CircleSubgroup::Full),
            AmbientGroup::PAdicLine(_) => ClosedSubgroup::Qp(QpSubgroup::Full),
            AmbientGroup::PAdicSpace(_, n) => ClosedSubgroup::Module(QpModule::full(*n)),
            AmbientGroup::PrimeProduct(cs) => ClosedSubgroup::Product(vec![QpSubgroup::Full; cs.len()]),
            AmbientGroup::ShiftGroup { .. } => {
                return Err(ClabError::NotApplicable(
                    "the shift group is not compact; only H_S subgroups are modelled".into(),
                ))
            }
        })
    }

    /// Checks that the subgroup is well formed and belongs to `ambient`.
    pub fn validate(&self, ambient: &AmbientGroup) -> Result<()> {
        let ok = match (self, ambient) {
            (ClosedSubgroup::Int(_), AmbientGroup::Integers) => true,
            (ClosedSubgroup::Real(r), AmbientGroup::Reals) => {
                if let RealSubgroup::Spacing(a) = r {
                    if !a.is_positive() {
                        return Err(ClabError::Malformed("spacing must be positive".into()));
                    }
                }
                true
            }
            (ClosedSubgroup::Circle(c), AmbientGroup::Circle) => {
                if *c == CircleSubgroup::Cyclic(0) {
                    return Err(ClabError::Malformed("cyclic order must be >= 1".into()));
                }
                true
            }
            (ClosedSubgroup::Qp(_), AmbientGroup::PAdicLine(_)) => true,
            (ClosedSubgroup::Module(m), AmbientGroup::PAdicSpace(_, n)) => m.dim() == *n,
            (ClosedSubgroup::Product(c), AmbientGroup::PrimeProduct(cs)) => c.len() == cs.len(),
            (ClosedSubgroup::Shift(s), AmbientGroup::ShiftGroup { window, .. }) => {
                if let (Some(lo), Some(hi)) = (s.support.first(), s.support.last()) {
                    if *lo < -window || *hi > *window {
                        return Err(ClabError::Truncation("support escapes the window".into()));
                    }
                }
                true
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(ClabError::AmbientMismatch(format!(
                "{} subgroup in ambient {}",
                self.kind(),
                ambient.name()
            )))
        }
    }
}

impl fmt::Display for QpSubgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QpSubgroup::Zero => write!(f, "0"),
            QpSubgroup::Lattice(k) => write!(f, "p^{k}Z_p"),
            QpSubgroup::Full => write!(f, "Q_p"),
        }
    }
}

impl fmt::Display for ClosedSubgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClosedSubgroup::Int(n) => write!(f, "{n}Z"),
            ClosedSubgroup::Real(RealSubgroup::Trivial) => write!(f, "{{0}}"),
            ClosedSubgroup::Real(RealSubgroup::Spacing(a)) => write!(f, "({})Z", fmt_rational(a)),
            ClosedSubgroup::Real(RealSubgroup::Full) => write!(f, "R"),
            ClosedSubgroup::Circle(CircleSubgroup::Cyclic(n)) => write!(f, "C_{n}"),
            ClosedSubgroup::Circle(CircleSubgroup::Full) => write!(f, "T"),
            ClosedSubgroup::Qp(q) => write!(f, "{q}"),
            ClosedSubgroup::Module(m) => {
                let col = |c: &Vec<Q>| {
                    format!("({})", c.iter().map(fmt_rational).collect::<Vec<_>>().join(","))
                };
                let v: Vec<_> = m.vectors().iter().map(col).collect();
                let l: Vec<_> = m.lattice_gens().iter().map(col).collect();
                write!(f, "V[{}] + L[{}]", v.join(" "), l.join(" "))
            }
            ClosedSubgroup::Product(cs) => {
                let parts: Vec<_> = cs.iter().map(|c| c.to_string()).collect();
                write!(f, "({})", parts.join(", "))
            }
            ClosedSubgroup::Shift(s) => {
                let parts: Vec<_> = s.support.iter().map(|n| n.to_string()).collect();
                match s.tail {
                    Some(t) => write!(f, "H{{{}; {t}..}}", parts.join(",")),
                    None => write!(f, "H{{{}}}", parts.join(",")),
                }
            }
        }
    }
}

fn qp_of_valuation(v: Valuation) -> QpSubgroup {
    match v {
        Valuation::Infinite => QpSubgroup::Zero,
        Valuation::Finite(k) => QpSubgroup::Lattice(k),
    }
}

/// Closure of the cyclic subgroup generated by `x`.
pub fn closure_of_cyclic(ambient: &AmbientGroup, x: &Element) -> Result<ClosedSubgroup> {
    match (ambient, x) {
        (AmbientGroup::Integers, Element::Scalar(a)) => {
            if !a.is_integer() {
                return Err(ClabError::Domain(format!("{} is not an integer", fmt_rational(a))));
            }
            let n = a.numer().abs().to_u64().ok_or_else(|| ClabError::Domain("integer too large".into()))?;
            Ok(ClosedSubgroup::Int(n))
        }
        (AmbientGroup::Reals, Element::Scalar(a)) => Ok(ClosedSubgroup::Real(if a.is_zero() {
            RealSubgroup::Trivial
        } else {
            RealSubgroup::Spacing(a.abs())
        })),
        (AmbientGroup::Circle, Element::Scalar(a)) => {
            let d = a.denom().to_u64().ok_or_else(|| ClabError::Domain("denominator too large".into()))?;
            Ok(ClosedSubgroup::Circle(CircleSubgroup::Cyclic(d)))
        }
        (AmbientGroup::PAdicLine(c), Element::Scalar(a)) => {
            Ok(ClosedSubgroup::Qp(qp_of_valuation(valuation(a, c.p()))))
        }
        (AmbientGroup::PAdicSpace(c, n), Element::Vector(v)) if v.len() == *n => Ok(ClosedSubgroup::Module(
            QpModule::lattice(*n, vec![v.clone()])?.canonicalize(c.p()),
        )),
        (AmbientGroup::PrimeProduct(_), Element::Vector(_)) => {
            Ok(ClosedSubgroup::Product(decompose_product(ambient, std::slice::from_ref(x))?.components))
        }
        (AmbientGroup::ShiftGroup { .. }, Element::Shift(_)) => Err(ClabError::NotImplemented(
            "cyclic subgroups of the shift group are finite and not of the form H_S".into(),
        )),
        _ => Err(ClabError::AmbientMismatch(format!("element does not belong to {}", ambient.name()))),
    }
}

/// Canonical form of a subgroup (only modules carry a nontrivial normal form).
pub fn canonicalize(ambient: &AmbientGroup, h: &ClosedSubgroup) -> Result<ClosedSubgroup> {
    h.validate(ambient)?;
    Ok(match (h, ambient) {
        (ClosedSubgroup::Module(m), AmbientGroup::PAdicSpace(c, _)) => ClosedSubgroup::Module(m.canonicalize(c.p())),
        _ => h.clone(),
    })
}

fn qp_member(p: u64, x: &Q, h: QpSubgroup) -> bool {
    match h {
        QpSubgroup::Zero => x.is_zero(),
        QpSubgroup::Full => true,
        QpSubgroup::Lattice(k) => valuation(x, p) >= Valuation::Finite(k),
    }
}

/// Exact membership test.
pub fn member(ambient: &AmbientGroup, x: &Element, h: &ClosedSubgroup) -> Result<bool> {
    h.validate(ambient)?;
    let mismatch = || ClabError::AmbientMismatch(format!("element does not belong to {}", ambient.name()));
    match (h, x) {
        (ClosedSubgroup::Int(n), Element::Scalar(a)) => {
            if !a.is_integer() {
                return Err(mismatch());
            }
            Ok(if *n == 0 { a.is_zero() } else { (a.numer() % BigInt::from(*n)).is_zero() })
        }
        (ClosedSubgroup::Real(r), Element::Scalar(a)) => Ok(match r {
            RealSubgroup::Trivial => a.is_zero(),
            RealSubgroup::Full => true,
            RealSubgroup::Spacing(s) => (a / s).is_integer(),
        }),
        (ClosedSubgroup::Circle(c), Element::Scalar(a)) => Ok(match c {
            CircleSubgroup::Full => true,
            CircleSubgroup::Cyclic(n) => (a * Q::from_integer(BigInt::from(*n))).is_integer(),
        }),
        (ClosedSubgroup::Qp(q), Element::Scalar(a)) => Ok(qp_member(ambient.primes()[0], a, *q)),
        (ClosedSubgroup::Module(m), Element::Vector(v)) => {
            m.contains_point(ambient.primes()[0], v)
        }
        (ClosedSubgroup::Product(cs), Element::Vector(v)) => {
            if v.len() != cs.len() {
                return Err(mismatch());
            }
            let primes = ambient.primes();
            Ok(cs.iter().zip(v).zip(&primes).all(|((c, x), &p)| qp_member(p, x, *c)))
        }
        (ClosedSubgroup::Shift(s), Element::Shift(e)) => Ok(e
            .iter()
            .filter(|(_, &val)| val != 0)
            .all(|(n, _)| s.contains_coord(*n))),
        _ => Err(mismatch()),
    }
}

fn qp_contains(a: QpSubgroup, b: QpSubgroup) -> bool {
    match (a, b) {
        (_, QpSubgroup::Zero) | (QpSubgroup::Full, _) => true,
        (QpSubgroup::Lattice(k), QpSubgroup::Lattice(l)) => l >= k,
        _ => false,
    }
}

/// `b ⊆ a`.
pub fn contains(ambient: &AmbientGroup, a: &ClosedSubgroup, b: &ClosedSubgroup) -> Result<bool> {
    a.validate(ambient)?;
    b.validate(ambient)?;
    Ok(match (a, b) {
        (ClosedSubgroup::Int(m), ClosedSubgroup::Int(n)) => match (m, n) {
            (_, 0) => true,
            (0, _) => false,
            _ => n % m == 0,
        },
        (ClosedSubgroup::Real(x), ClosedSubgroup::Real(y)) => match (x, y) {
            (_, RealSubgroup::Trivial) | (RealSubgroup::Full, _) => true,
            (RealSubgroup::Spacing(s), RealSubgroup::Spacing(t)) => (t / s).is_integer(),
            _ => false,
        },
        (ClosedSubgroup::Circle(x), ClosedSubgroup::Circle(y)) => match (x, y) {
            (CircleSubgroup::Full, _) => true,
            (CircleSubgroup::Cyclic(m), CircleSubgroup::Cyclic(n)) => m % n == 0,
            _ => false,
        },
        (ClosedSubgroup::Qp(x), ClosedSubgroup::Qp(y)) => qp_contains(*x, *y),
        (ClosedSubgroup::Module(x), ClosedSubgroup::Module(y)) => x.contains(ambient.primes()[0], y)?,
        (ClosedSubgroup::Product(x), ClosedSubgroup::Product(y)) => {
            x.iter().zip(y).all(|(a, b)| qp_contains(*a, *b))
        }
        (ClosedSubgroup::Shift(x), ClosedSubgroup::Shift(y)) => {
            let w = match ambient {
                AmbientGroup::ShiftGroup { window, .. } => *window,
                _ => unreachable!(),
            };
            y.truncated(w).is_subset(&x.truncated(w))
        }
        _ => unreachable!("validated against the same ambient"),
    })
}

/// Equality by mutual inclusion.
pub fn equal(ambient: &AmbientGroup, a: &ClosedSubgroup, b: &ClosedSubgroup) -> Result<bool> {
    Ok(contains(ambient, a, b)? && contains(ambient, b, a)?)
}

/// Result of [`decompose_product`]: the per-factor closures plus the
/// multiplier lifts showing each factor component lies in the closure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductDecomposition {
    pub components: Vec<QpSubgroup>,
    pub lifts: Vec<Option<FactorLift>>,
}

/// Evidence that `p_i^{e} e_i` is a limit of integer multiples of a generator.
///
/// With `l = (∏ p_j) / p_i`, `l^k ≡ 1 (mod p_i^precision)` and `v_{p_j}(l^k) = k`
/// for `j ≠ i`, so `c · l^k · g` agrees with the target up to `p_i^{-(e+precision)}`
/// in factor `i` and is divisible by `p_j^{precision}` in every other factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorLift {
    pub prime: u64,
    pub generator: usize,
    pub multiplier: BigUint,
    pub exponent: BigUint,
    pub unit_inverse: BigInt,
    pub own_error_valuation: i64,
    pub other_valuation: BigInt,
}

/// Closure of the subgroup generated by `gens` in `∏ ℚ_{pᵢ}`, as a product.
pub fn decompose_product(ambient: &AmbientGroup, gens: &[Element]) -> Result<ProductDecomposition> {
    let AmbientGroup::PrimeProduct(ctxs) = ambient else {
        return Err(ClabError::AmbientMismatch("decompose_product needs a prime product".into()));
    };
    let primes: Vec<u64> = ctxs.iter().map(|c| c.p()).collect();
    let precision = ctxs[0].precision();
    let mut vecs = Vec::with_capacity(gens.len());
    for g in gens {
        match g {
            Element::Vector(v) if v.len() == primes.len() => vecs.push(v.clone()),
            _ => return Err(ClabError::AmbientMismatch("generator is not in the product".into())),
        }
    }
    let mut components = Vec::with_capacity(primes.len());
    let mut lifts = Vec::with_capacity(primes.len());
    for (i, &p) in primes.iter().enumerate() {
        let best = vecs
            .iter()
            .enumerate()
            .filter(|(_, v)| !v[i].is_zero())
            .min_by_key(|(j, v)| (val(&v[i], p), *j));
        match best {
            None => {
                components.push(QpSubgroup::Zero);
                lifts.push(None);
            }
            Some((j, v)) => {
                components.push(QpSubgroup::Lattice(val(&v[i], p)));
                lifts.push(Some(factor_lift(&primes, i, j, v, precision)?));
            }
        }
    }
    Ok(ProductDecomposition { components, lifts })
}

fn factor_lift(primes: &[u64], i: usize, gen: usize, g: &[Q], precision: u32) -> Result<FactorLift> {
    let p = primes[i];
    let l: BigUint = primes.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &q)| BigUint::from(q)).product();
    let modulus = BigUint::from(p).pow(precision);
    let order = multiplicative_order(&l, p, precision);
    // the other factors need l^k to overwhelm the most negative valuation there
    let min_other = primes
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .filter(|(j, _)| !g[*j].is_zero())
        .map(|(j, &q)| val(&g[j], q))
        .min()
        .unwrap_or(0);
    let needed = (precision as i64 - min_other).max(1) as u64;
    let reps = needed.div_ceil(order.to_u64().unwrap_or(u64::MAX).max(1)).max(1);
    let exponent = &order * BigUint::from(reps);
    if !l.modpow(&exponent, &modulus).is_one() && primes.len() > 1 {
        return Err(ClabError::Domain("multiplier order computation failed".into()));
    }
    let e = val(&g[i], p);
    let unit = &g[i] / p_power(p, e);
    let unit_inverse = reduce_mod_power(&unit.recip(), p, precision)
        .ok_or_else(|| ClabError::Domain("unit part is not p-integral".into()))?;
    // c·u ≡ 1 mod p^precision, so the factor-i error has valuation >= e + precision
    let cu = Q::from_integer(unit_inverse.clone()) * &unit - Q::one();
    let err_val = match valuation(&cu, p) {
        Valuation::Infinite => i64::MAX,
        Valuation::Finite(v) => v,
    };
    let own_error_valuation = e + err_val.min(precision as i64);
    let other_valuation = BigInt::from(exponent.clone()) + BigInt::from(min_other);
    Ok(FactorLift {
        prime: p,
        generator: gen,
        multiplier: l,
        exponent,
        unit_inverse,
        own_error_valuation,
        other_valuation,
    })
}

impl FactorLift {
    /// Re-checks the lift symbolically at absolute precision `p^{-precision}` relative to the target.
    pub fn verify(&self, primes: &[u64], precision: u32) -> bool {
        let modulus = BigUint::from(self.prime).pow(precision);
        let lk_is_one = primes.len() == 1 || self.multiplier.modpow(&self.exponent, &modulus).is_one();
        lk_is_one && self.other_valuation >= BigInt::from(precision)
    }
}

/// Order of `l` in `(ℤ/p^k)^*` (1 when `l ≡ 1`).
pub fn multiplicative_order(l: &BigUint, p: u64, k: u32) -> BigUint {
    let modulus = BigUint::from(p).pow(k);
    if (l % &modulus).is_one() {
        return BigUint::one();
    }
    // |(ℤ/p^k)^*| = p^{k-1}(p-1)
    let mut order = BigUint::from(p).pow(k - 1) * BigUint::from(p - 1);
    let mut factors: Vec<u64> = prime_factors(p - 1);
    if k > 1 {
        factors.push(p);
    }
    factors.sort_unstable();
    factors.dedup();
    for f in factors {
        let fb = BigUint::from(f);
        while (&order % &fb).is_zero() {
            let cand = &order / &fb;
            if l.modpow(&cand, &modulus).is_one() {
                order = cand;
            } else {
                break;
            }
        }
    }
    order
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    debug_assert!(out.iter().all(|&f| is_prime(f)));
    out
}

/// `H ∩ B̄(0, r)` for ultrametric ambients.
pub fn module_ball(ambient: &AmbientGroup, h: &ClosedSubgroup, r: &Q) -> Result<ClosedSubgroup> {
    if !r.is_positive() {
        return Err(ClabError::Domain("ball radius must be positive".into()));
    }
    h.validate(ambient)?;
    let qp_ball = |p: u64, q: QpSubgroup| {
        let j = ball_exponent(r, p);
        match q {
            QpSubgroup::Zero => QpSubgroup::Zero,
            QpSubgroup::Full => QpSubgroup::Lattice(j),
            QpSubgroup::Lattice(k) => QpSubgroup::Lattice(k.max(j)),
        }
    };
    Ok(match h {
        ClosedSubgroup::Qp(q) => ClosedSubgroup::Qp(qp_ball(ambient.primes()[0], *q)),
        ClosedSubgroup::Module(m) => {
            let p = ambient.primes()[0];
            ClosedSubgroup::Module(ball_module(p, m, ball_exponent(r, p)))
        }
        ClosedSubgroup::Product(cs) => ClosedSubgroup::Product(
            cs.iter().zip(ambient.primes()).map(|(c, p)| qp_ball(p, *c)).collect(),
        ),
        ClosedSubgroup::Shift(s) => ClosedSubgroup::Shift(s.ball(ball_exponent(r, 2))),
        _ => {
            return Err(ClabError::NotApplicable(format!(
                "balls are not subgroups in {}; use the coordinate metric",
                ambient.name()
            )))
        }
    })
}

/// Representatives of `(H ∩ B̄(0,R)) / (H ∩ B̄(0,ε))`, refusing to list more than `budget`.
pub fn coset_reps(
    ambient: &AmbientGroup,
    h: &ClosedSubgroup,
    big: &Q,
    small: &Q,
    budget: usize,
) -> Result<Vec<Element>> {
    if !small.is_positive() || small > big {
        return Err(ClabError::Domain("need 0 < eps <= R".into()));
    }
    h.validate(ambient)?;
    // each direction: (generator at radius R, number of steps to reach radius ε)
    let mut dirs: Vec<(Element, BigUint)> = Vec::new();
    let zero_elem: Element;
    match (h, ambient) {
        (ClosedSubgroup::Qp(q), AmbientGroup::PAdicLine(c)) => {
            zero_elem = Element::Scalar(Q::zero());
            let p = c.p();
            if let Some((a, b)) = qp_ball_range(*q, ball_exponent(big, p), ball_exponent(small, p)) {
                dirs.push((Element::Scalar(p_power(p, a)), BigUint::from(p).pow((b - a) as u32)));
            }
        }
        (ClosedSubgroup::Module(m), AmbientGroup::PAdicSpace(c, n)) => {
            zero_elem = Element::Vector(linalg::zero_vec(*n));
            let p = c.p();
            let f = m.frame(p);
            let (jr, je) = (ball_exponent(big, p), ball_exponent(small, p));
            for (i, (a, b)) in f.ball_exponents(jr).into_iter().zip(f.ball_exponents(je)).enumerate() {
                if let (Some(a), Some(b)) = (a, b) {
                    if b > a {
                        let g = linalg::scale(&f.direction(i), &p_power(p, a));
                        dirs.push((Element::Vector(g), BigUint::from(p).pow((b - a) as u32)));
                    }
                }
            }
        }
        (ClosedSubgroup::Product(cs), AmbientGroup::PrimeProduct(ctxs)) => {
            let n = cs.len();
            zero_elem = Element::Vector(linalg::zero_vec(n));
            for (i, (q, c)) in cs.iter().zip(ctxs).enumerate() {
                let p = c.p();
                if let Some((a, b)) = qp_ball_range(*q, ball_exponent(big, p), ball_exponent(small, p)) {
                    let mut g = linalg::zero_vec(n);
                    g[i] = p_power(p, a);
                    dirs.push((Element::Vector(g), BigUint::from(p).pow((b - a) as u32)));
                }
            }
        }
        (ClosedSubgroup::Shift(s), AmbientGroup::ShiftGroup { order, window }) => {
            zero_elem = Element::Shift(BTreeMap::new());
            let (jr, je) = (ball_exponent(big, 2), ball_exponent(small, 2));
            for coord in jr..je {
                if coord > *window {
                    return Err(ClabError::Truncation(format!("coordinate {coord} beyond window")));
                }
                if s.contains_coord(coord) {
                    dirs.push((Element::Shift(BTreeMap::from([(coord, 1)])), BigUint::from(*order)));
                }
            }
        }
        _ => {
            return Err(ClabError::NotApplicable(format!(
                "coset representatives need an ultrametric ambient, got {}",
                ambient.name()
            )))
        }
    }
    let total: BigUint = dirs.iter().map(|(_, k)| k.clone()).product();
    if total > BigUint::from(budget) {
        return Err(ClabError::BudgetExceeded { index: total.to_string(), cap: budget });
    }
    let mut out = vec![zero_elem];
    for (g, count) in &dirs {
        let count = count.to_u64().expect("bounded by budget");
        let mut next = Vec::with_capacity(out.len() * count as usize);
        for base in &out {
            for t in 0..count {
                next.push(add_multiple(base, g, t, ambient));
            }
        }
        out = next;
    }
    Ok(out)
}

fn qp_ball_range(q: QpSubgroup, jr: i64, je: i64) -> Option<(i64, i64)> {
    let (a, b) = match q {
        QpSubgroup::Zero => return None,
        QpSubgroup::Full => (jr, je),
        QpSubgroup::Lattice(k) => (k.max(jr), k.max(je)),
    };
    (b > a).then_some((a, b))
}

fn add_multiple(base: &Element, g: &Element, t: u64, ambient: &AmbientGroup) -> Element {
    let tq = Q::from_integer(BigInt::from(t));
    match (base, g) {
        (Element::Scalar(b), Element::Scalar(x)) => Element::Scalar(b + x * &tq),
        (Element::Vector(b), Element::Vector(x)) => {
            Element::Vector(b.iter().zip(x).map(|(b, x)| b + x * &tq).collect())
        }
        (Element::Shift(b), Element::Shift(x)) => {
            let f = match ambient {
                AmbientGroup::ShiftGroup { order, .. } => *order as u64,
                _ => unreachable!(),
            };
            let mut out = b.clone();
            for (n, v) in x {
                let e = out.entry(*n).or_insert(0);
                *e = ((*e as u64 + *v as u64 * t) % f) as u32;
                if *e == 0 {
                    out.remove(n);
                }
            }
            Element::Shift(out)
        }
        _ => unreachable!("generators share the ambient"),
    }
}

/// Max norm of an element of an ultrametric ambient.
pub fn element_norm(ambient: &AmbientGroup, x: &Element) -> Result<Q> {
    let pnorm = |x: &Q, p: u64| match valuation(x, p) {
        Valuation::Infinite => Q::zero(),
        Valuation::Finite(v) => p_power(p, -v),
    };
    match (ambient, x) {
        (AmbientGroup::PAdicLine(c), Element::Scalar(a)) => Ok(pnorm(a, c.p())),
        (AmbientGroup::PAdicSpace(c, _), Element::Vector(v)) => {
            Ok(v.iter().map(|a| pnorm(a, c.p())).max().unwrap_or_else(Q::zero))
        }
        (AmbientGroup::PrimeProduct(cs), Element::Vector(v)) => {
            Ok(v.iter().zip(cs).map(|(a, c)| pnorm(a, c.p())).max().unwrap_or_else(Q::zero))
        }
        (AmbientGroup::ShiftGroup { .. }, Element::Shift(s)) => Ok(s
            .iter()
            .filter(|(_, &v)| v != 0)
            .map(|(n, _)| p_power(2, -n))
            .max()
            .unwrap_or_else(Q::zero)),
        _ => Err(ClabError::NotApplicable("norm needs an ultrametric ambient".into())),
    }
}

/// Frame slot exponents rewritten as per-factor subgroups (used for 1-D views of modules).
pub fn module_as_qp(m: &QpModule, p: u64) -> Option<QpSubgroup> {
    if m.dim() != 1 {
        return None;
    }
    let f = m.frame(p);
    Some(match f.slots()[0] {
        Slot::Vector => QpSubgroup::Full,
        Slot::Lattice(a) => QpSubgroup::Lattice(a),
        Slot::Absent => QpSubgroup::Zero,
    })
}

/// `g mod p^k` for an integer.
pub fn int_mod(g: &BigInt, m: &BigInt) -> BigInt {
    g.mod_floor(m)
}
