//! Expansivity of the induced action on subgroup spaces.
//!
//! Positive answers are exact certificates `δ` backed by a finite case analysis.
//! Negative answers are pairs of distinct subgroups whose separation stays
//! below `δ` on a window and, by a closed-form tail bound, outside it too.

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::chabauty::{chabauty_dist, Distance, MetricConfig};
use crate::dynamics::{rat_pow, Automorphism, QpMatrix};
use crate::error::{ClabError, Result};
use crate::interval::{self, pow2_floor};
use crate::module::QpModule;
use crate::padic::{fmt_p_power, fmt_rational, p_power, qi, val, valuation, ExactRational as Q, Valuation};
use crate::subgroups::{
    decompose_product, equal, AmbientGroup, CircleSubgroup, ClosedSubgroup, Element, QpSubgroup,
    RealSubgroup, ShiftSubgroup,
};

/// Closed-form bound on `d(Tⁿ H₁, Tⁿ H₂)` for all `|n| > N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TailBound {
    pub bound: Q,
    pub derivation: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparationReport {
    pub pair: (ClosedSubgroup, ClosedSubgroup),
    pub horizon: u32,
    /// `(n, d(Tⁿ H₁, Tⁿ H₂))` for `n = -N..=N`.
    pub distances: Vec<(i64, Distance)>,
    pub sup: Distance,
    pub argmax: i64,
    pub tail: Option<TailBound>,
}

/// Windowed separation of a pair under `T`, with a tail bound when one is registered.
pub fn separation(
    ambient: &AmbientGroup,
    t: &Automorphism,
    h1: &ClosedSubgroup,
    h2: &ClosedSubgroup,
    horizon: u32,
    cfg: &MetricConfig,
) -> Result<SeparationReport> {
    t.validate(ambient)?;
    h1.validate(ambient)?;
    h2.validate(ambient)?;
    if horizon < 1 {
        return Err(ClabError::Domain("separation horizon must be >= 1".into()));
    }
    let n = horizon as i64;
    let distances: Vec<(i64, Distance)> = (-n..=n)
        .into_par_iter()
        .map(|k| {
            let tk = t.power(k);
            let a = tk.apply(ambient, h1)?;
            let b = tk.apply(ambient, h2)?;
            Ok((k, chabauty_dist(ambient, &a, &b, cfg)?))
        })
        .collect::<Result<_>>()?;
    let (argmax, sup) = window_max(&distances);
    let tail = tail_bound(ambient, t, h1, h2, horizon, cfg)?;
    Ok(SeparationReport { pair: (h1.clone(), h2.clone()), horizon, distances, sup, argmax, tail })
}

/// Largest reported value; ties go to the smallest `|n|`, then the smaller `n`.
fn window_max(distances: &[(i64, Distance)]) -> (i64, Distance) {
    let mut best: Option<&(i64, Distance)> = None;
    for e in distances {
        best = match best {
            None => Some(e),
            Some(b) => {
                let better = e.1.upper > b.1.upper
                    || (e.1.upper == b.1.upper && (e.0.abs(), e.0) < (b.0.abs(), b.0));
                Some(if better { e } else { b })
            }
        };
    }
    let (n, d) = best.expect("window is nonempty");
    (*n, d.clone())
}

fn tail_bound(
    ambient: &AmbientGroup,
    t: &Automorphism,
    h1: &ClosedSubgroup,
    h2: &ClosedSubgroup,
    horizon: u32,
    cfg: &MetricConfig,
) -> Result<Option<TailBound>> {
    if equal(ambient, h1, h2)? {
        return Ok(Some(TailBound { bound: Q::zero(), derivation: "identical pair" }));
    }
    if !matches!(t, Automorphism::Shift(_))
        && equal(ambient, &t.apply(ambient, h1)?, h1)?
        && equal(ambient, &t.apply(ambient, h2)?, h2)?
    {
        let d = chabauty_dist(ambient, h1, h2, cfg)?;
        return Ok(Some(TailBound { bound: d.upper, derivation: "fixed pair: the distance is constant in n" }));
    }
    let n = horizon as i64;
    Ok(match (ambient, t, h1, h2) {
        (AmbientGroup::PAdicLine(c), Automorphism::QpScalar { q, .. }, ClosedSubgroup::Qp(a), ClosedSubgroup::Qp(b)) => {
            Some(TailBound {
                bound: qp_scalar_tail(c.p(), val(q, c.p()), *a, *b, n, cfg)?,
                derivation: QP_SCALAR_TAIL,
            })
        }
        (AmbientGroup::PrimeProduct(ctxs), Automorphism::Product { scalars, .. }, ClosedSubgroup::Product(a), ClosedSubgroup::Product(b)) => {
            let mut bound = Q::zero();
            for ((c, s), (x, y)) in ctxs.iter().zip(scalars).zip(a.iter().zip(b)) {
                if x != y {
                    bound = bound.max(qp_scalar_tail(c.p(), val(s, c.p()), *x, *y, n, cfg)?);
                }
            }
            Some(TailBound { bound, derivation: "product: max of the factor tails (qp scalar rule)" })
        }
        (AmbientGroup::Reals, Automorphism::RealScalar(alpha), ClosedSubgroup::Real(RealSubgroup::Spacing(s)), ClosedSubgroup::Real(RealSubgroup::Spacing(u))) => {
            Some(TailBound { bound: real_spacing_tail(alpha, s, u, n), derivation: REAL_TAIL })
        }
        (AmbientGroup::PAdicSpace(_, 2), Automorphism::QpMatrix(m), ClosedSubgroup::Module(x), ClosedSubgroup::Module(y))
            if m.is_diagonal() && is_line(x) && is_line(y) =>
        {
            Some(TailBound { bound: line_tail(m, &x.vectors()[0], &y.vectors()[0], n, cfg.precision), derivation: LINE_TAIL })
        }
        _ => None,
    })
}

const QP_SCALAR_TAIL: &str =
    "qp scalar: exponents drift by v(q) per step and the distance is monotone once all exponents share a sign";
const REAL_TAIL: &str = "mean value: |atan(kx) - atan(x)| <= (k-1) min(x, 1/x), x = |alpha|^n s";
const LINE_TAIL: &str =
    "diagonal lines: w(n) = v(det) + n(k1+k2) - minval(Dⁿx) - minval(Dⁿy) is convex, d = p^-floor(w/2)";

fn is_line(m: &QpModule) -> bool {
    m.vector_dim() == 1 && m.lattice_gens().is_empty()
}

fn shift_qp(x: QpSubgroup, v: i64) -> QpSubgroup {
    match x {
        QpSubgroup::Lattice(k) => QpSubgroup::Lattice(k + v),
        other => other,
    }
}

/// Exact sup over `|n| > N` of the reported distance of `(p^{nm} A, p^{nm} B)`.
fn qp_scalar_tail(p: u64, m: i64, a: QpSubgroup, b: QpSubgroup, n: i64, cfg: &MetricConfig) -> Result<Q> {
    let amb = AmbientGroup::PAdicLine(crate::padic::PrimeContext::new(p, cfg.precision)?);
    let dist = |k: i64| -> Result<Q> {
        let (x, y) = (shift_qp(a, k * m), shift_qp(b, k * m));
        Ok(chabauty_dist(&amb, &ClosedSubgroup::Qp(x), &ClosedSubgroup::Qp(y), cfg)?.upper)
    };
    if m == 0 {
        return dist(0);
    }
    let mut sup = Q::zero();
    for dir in [1i64, -1] {
        let rising = dir * m > 0;
        let mut k = dir * (n + 1);
        loop {
            sup = sup.max(dist(k)?);
            let exps: Vec<i64> = [shift_qp(a, k * m), shift_qp(b, k * m)]
                .iter()
                .filter_map(|x| match x {
                    QpSubgroup::Lattice(e) => Some(*e),
                    _ => None,
                })
                .collect();
            let settled = if rising { exps.iter().all(|e| *e >= 0) } else { exps.iter().all(|e| *e <= 0) };
            if settled {
                break;
            }
            k += dir;
        }
    }
    Ok(sup)
}

/// `(k-1) r^{N+1} max(s, 1/s)` with `k = max(s,u)/min(s,u)` and `r = min(|α|, 1/|α|)`.
fn real_spacing_tail(alpha: &Q, s: &Q, u: &Q, n: i64) -> Q {
    let a = alpha.abs();
    let r = if a > Q::one() { a.recip() } else { a };
    let (lo, hi) = if s < u { (s, u) } else { (u, s) };
    let k = hi / lo;
    (k - Q::one()) * rat_pow(&r, n + 1) * lo.clone().max(lo.recip())
}

fn min_val(p: u64, ks: &[i64], v: &[Q], n: i64) -> i64 {
    v.iter()
        .zip(ks)
        .filter(|(c, _)| !c.is_zero())
        .map(|(c, k)| n * k + val(c, p))
        .min()
        .expect("nonzero direction")
}

/// Chordal valuation of `(Dⁿx, Dⁿy)` for a diagonal `D`.
fn line_w(p: u64, ks: &[i64], det_v: i64, x: &[Q], y: &[Q], n: i64) -> i64 {
    det_v + n * ks.iter().sum::<i64>() - min_val(p, ks, x, n) - min_val(p, ks, y, n)
}

fn line_tail(d: &QpMatrix, x: &[Q], y: &[Q], n: i64, precision: u32) -> Q {
    let p = d.p();
    let ks: Vec<i64> = (0..2).map(|i| val(&d.entries()[i][i], p)).collect();
    let det = &x[0] * &y[1] - &x[1] * &y[0];
    let det_v = val(&det, p);
    let mut cands = vec![n + 1, -(n + 1)];
    if ks[0] != ks[1] {
        for v in [x, y] {
            if v.iter().all(|c| !c.is_zero()) {
                let num = val(&v[1], p) - val(&v[0], p);
                let den = ks[0] - ks[1];
                let f = num.div_euclid(den);
                cands.extend([f, f + 1]);
            }
        }
    }
    let wmin = cands
        .into_iter()
        .filter(|c| c.abs() > n)
        .map(|c| line_w(p, &ks, det_v, x, y, c))
        .min()
        .expect("boundary candidates");
    p_power(p, -(wmin.div_euclid(2)).min(precision as i64))
}

/// One orbit class of pairs in the certificate case analysis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseEntry {
    pub class: String,
    /// The worst-aligned representative of the class.
    pub pair: (ClosedSubgroup, ClosedSubgroup),
    /// Exact minimal sup-separation over the class.
    pub min_sup: Q,
    /// A time at which the representative attains it.
    pub time: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub delta: Q,
    pub reduction: Vec<String>,
    pub cases: Vec<CaseEntry>,
    pub notes: Vec<String>,
}

/// For exponents moving in steps of `s`, the worst residue class of the
/// starting exponent: `(residue, best exponent e, c attaining it)` where the
/// class sup is `p^{-e}` and `e(c)` is the per-time distance exponent.
fn worst_residue(s: i64, lo: i64, hi: i64, e: impl Fn(i64) -> i64) -> (i64, i64, i64) {
    (0..s)
        .map(|r| {
            let (c, best) = (lo..=hi)
                .filter(|c| (c - r).rem_euclid(s) == 0)
                .map(|c| (c, e(c)))
                .min_by_key(|&(c, v)| (v, c.abs()))
                .expect("range covers every residue");
            (r, best, c)
        })
        .max_by_key(|&(r, v, _)| (v, -r))
        .expect("s >= 1")
}

/// Certificate for `x ↦ q x` on `ℚₚ` with `v_p(q) ≠ 0`.
pub fn certify_qp_scalar(p: u64, q: &Q) -> Result<Certificate> {
    if q.is_zero() {
        return Err(ClabError::Malformed("scalar must be nonzero".into()));
    }
    let m = val(q, p);
    if m == 0 {
        return Err(ClabError::NotExpansive {
            prime: Some(p),
            reason: format!("{} is a {p}-adic unit, so every lattice is fixed; see refute_fixed_points", fmt_rational(q)),
        });
    }
    let unit = q / p_power(p, m);
    let s = m.abs();
    let reduction = vec![
        format!("q = {p}^{m} * {}", fmt_rational(&unit)),
        "the unit part preserves every closed subgroup of Q_p, so T acts as p^m Id".into(),
        format!("lattice exponents move by {m} per step; pairs are classified by gap and residue mod {s}"),
    ];
    let lat = |k: i64| ClosedSubgroup::Qp(QpSubgroup::Lattice(k));
    let time = |c: i64, r: i64| (c - r) / m;
    let mut cases = vec![CaseEntry {
        class: "zero-full".into(),
        pair: (ClosedSubgroup::Qp(QpSubgroup::Zero), ClosedSubgroup::Qp(QpSubgroup::Full)),
        min_sup: Q::one(),
        time: 0,
    }];
    // d(p^cZp, 0) = p^-max(0,c): escape backward
    let (r, e, c) = worst_residue(s, -s, s, |c| c.max(0));
    cases.push(CaseEntry {
        class: "lattice-zero".into(),
        pair: (lat(r), ClosedSubgroup::Qp(QpSubgroup::Zero)),
        min_sup: p_power(p, -e),
        time: time(c, r),
    });
    // d(p^cZp, Qp) = p^-max(0,-c): escape forward
    let (r, e, c) = worst_residue(s, -s, s, |c| (-c).max(0));
    cases.push(CaseEntry {
        class: "lattice-full".into(),
        pair: (lat(r), ClosedSubgroup::Qp(QpSubgroup::Full)),
        min_sup: p_power(p, -e),
        time: time(c, r),
    });
    // gaps l > s always meet the aligned window [-l, 0]
    for l in 1..=s {
        let (r, e, c) = worst_residue(s, -l - s, s, |c| 0.max(c).max(-c - l));
        cases.push(CaseEntry {
            class: format!("lattice-lattice gap {l}"),
            pair: (lat(r), lat(r + l)),
            min_sup: p_power(p, -e),
            time: time(c, r),
        });
    }
    let floor = cases.iter().map(|c| c.min_sup.clone()).min().expect("cases");
    let delta = floor / Q::from_integer(p.into());
    Ok(Certificate { delta, reduction, cases, notes: Vec::new() })
}

/// Certificate for a diagonal scalar action on `∏ ℚ_{pᵢ}` under the max metric.
pub fn certify_product(ambient: &AmbientGroup, t: &Automorphism) -> Result<Certificate> {
    t.validate(ambient)?;
    let Automorphism::Product { primes, scalars } = t else {
        return Err(ClabError::NotApplicable("certify_product needs a product automorphism".into()));
    };
    let mut out = Certificate { delta: Q::one(), reduction: Vec::new(), cases: Vec::new(), notes: Vec::new() };
    for (p, s) in primes.iter().zip(scalars) {
        let c = certify_qp_scalar(*p, s)?;
        out.delta = out.delta.min(c.delta.clone());
        out.reduction.extend(c.reduction.into_iter().map(|r| format!("Q_{p}: {r}")));
        out.cases.extend(c.cases.into_iter().map(|e| CaseEntry { class: format!("Q_{p}: {}", e.class), ..e }));
    }
    out.notes.push("distinct pairs differ in some factor, where that factor's delta applies".into());
    out.notes.extend(factorization_checks(ambient, primes)?);
    Ok(out)
}

/// Spot checks that closed subgroups of the product split factorwise.
fn factorization_checks(ambient: &AmbientGroup, primes: &[u64]) -> Result<Vec<String>> {
    let precision = ambient.precision().unwrap_or(24);
    let ones = vec![Q::one(); primes.len()];
    let ps: Vec<Q> = primes.iter().map(|p| Q::from_integer((*p).into())).collect();
    let inv: Vec<Q> = ps.iter().map(|x| x.recip()).collect();
    let mut notes = Vec::new();
    for gens in [vec![ones], vec![ps.clone()], vec![inv, ps]] {
        let dec = decompose_product(ambient, &gens.iter().cloned().map(Element::Vector).collect::<Vec<_>>())?;
        if !dec.lifts.iter().flatten().all(|l| l.verify(primes, precision)) {
            return Err(ClabError::Domain("factor lift failed verification".into()));
        }
        let shown: Vec<String> = gens
            .iter()
            .map(|g| format!("({})", g.iter().map(fmt_rational).collect::<Vec<_>>().join(", ")))
            .collect();
        let comps: Vec<String> = dec.components.iter().map(|c| c.to_string()).collect();
        notes.push(format!(
            "closure of <{}> = {} (lifts verified to precision {precision})",
            shown.join(", "),
            comps.join(" x ")
        ));
    }
    Ok(notes)
}

/// Certificate for the automorphisms where one exists: ℚₚ scalars and products.
pub fn certify(ambient: &AmbientGroup, t: &Automorphism) -> Result<Certificate> {
    t.validate(ambient)?;
    match (ambient, t) {
        (AmbientGroup::PAdicLine(_), Automorphism::QpScalar { p, q }) => certify_qp_scalar(*p, q),
        (AmbientGroup::PAdicLine(c), Automorphism::QpMatrix(m)) => certify_qp_scalar(c.p(), &m.entries()[0][0]),
        (AmbientGroup::PrimeProduct(_), Automorphism::Product { .. }) => certify_product(ambient, t),
        _ => Err(ClabError::OutOfScope(format!("no certificate for {} on {}", t.kind(), ambient.name()))),
    }
}

/// A pair whose separation stays below `δ` for every `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefutationWitness {
    pub delta: Q,
    pub pair: (ClosedSubgroup, ClosedSubgroup),
    pub family: String,
    pub parameters: Vec<(String, String)>,
    pub separation: SeparationReport,
    pub tail: TailBound,
}

impl RefutationWitness {
    /// Re-checks distinctness, the window and the tail against `δ`.
    pub fn check(&self, ambient: &AmbientGroup) -> Result<bool> {
        Ok(!equal(ambient, &self.pair.0, &self.pair.1)?
            && self.separation.distances.iter().all(|(_, d)| d.below(&self.delta))
            && self.tail.bound < self.delta)
    }
}

fn witness(
    ambient: &AmbientGroup,
    delta: &Q,
    report: SeparationReport,
    family: String,
    parameters: Vec<(String, String)>,
) -> Result<RefutationWitness> {
    let tail = report
        .tail
        .clone()
        .ok_or_else(|| ClabError::Domain("witness pair has no registered tail bound".into()))?;
    let w = RefutationWitness { delta: delta.clone(), pair: report.pair.clone(), family, parameters, separation: report, tail };
    if !w.check(ambient)? {
        return Err(ClabError::Domain(format!(
            "witness pair ({}, {}) does not stay below delta = {}",
            w.pair.0,
            w.pair.1,
            fmt_rational(delta)
        )));
    }
    Ok(w)
}

fn check_delta(delta: &Q) -> Result<()> {
    if !delta.is_positive() {
        return Err(ClabError::Domain("delta must be positive".into()));
    }
    Ok(())
}

/// Two `T`-fixed members of `family` at distance below `δ`.
pub fn refute_fixed_points(
    ambient: &AmbientGroup,
    t: &Automorphism,
    family: &[ClosedSubgroup],
    delta: &Q,
    horizon: u32,
    cfg: &MetricConfig,
) -> Result<RefutationWitness> {
    check_delta(delta)?;
    t.validate(ambient)?;
    if family.len() < 2 {
        return Err(ClabError::Domain("a fixed-point family needs at least two members".into()));
    }
    for h in family {
        if !equal(ambient, &t.apply(ambient, h)?, h)? {
            return Err(ClabError::Domain(format!("family member {h} is not fixed by T")));
        }
    }
    for (i, a) in family.iter().enumerate() {
        for b in &family[i + 1..] {
            if equal(ambient, a, b)? {
                return Err(ClabError::Domain(format!("family members {a} and {b} coincide")));
            }
        }
    }
    let mut min_seen: Option<Distance> = None;
    for w in family.windows(2) {
        let d = chabauty_dist(ambient, &w[0], &w[1], cfg)?;
        let below = match (&w[0], &w[1]) {
            (ClosedSubgroup::Real(x), ClosedSubgroup::Real(y)) => {
                interval::decide_below(delta, |bits| crate::chabauty::real_dist_interval(x, y, bits))?.0
            }
            _ => d.below(delta),
        };
        if below {
            let report = separation(ambient, t, &w[0], &w[1], horizon, cfg)?;
            return witness(ambient, delta, report, "T-fixed subgroups".into(), Vec::new());
        }
        if min_seen.as_ref().is_none_or(|m| d.upper < m.upper) {
            min_seen = Some(d);
        }
    }
    let m = min_seen.expect("family has a pair");
    Err(ClabError::FamilyTooSparse { min_achieved: m.fmt_endpoint(&m.upper) })
}

/// A family of `T`-fixed subgroups that accumulates fast enough for `δ`.
pub fn fixed_family(ambient: &AmbientGroup, t: &Automorphism, delta: &Q, size: usize) -> Result<Vec<ClosedSubgroup>> {
    check_delta(delta)?;
    t.validate(ambient)?;
    let start = delta.recip().ceil().to_integer();
    let start: u64 = start.try_into().map_err(|_| ClabError::Domain("delta too small".into()))?;
    let range = (start.max(1)..).take(size);
    let unit = |q: &Q, p: u64| val(q, p) == 0;
    Ok(match (ambient, t) {
        (AmbientGroup::Integers, Automorphism::IntSign(_)) => range.map(ClosedSubgroup::Int).collect(),
        (AmbientGroup::Circle, Automorphism::CircleSign(_)) => {
            range.map(|n| ClosedSubgroup::Circle(CircleSubgroup::Cyclic(n))).collect()
        }
        (AmbientGroup::Reals, Automorphism::RealScalar(a)) if a.abs().is_one() => {
            range.map(|n| ClosedSubgroup::Real(RealSubgroup::Spacing(Q::from_integer(n.into())))).collect()
        }
        (AmbientGroup::PAdicLine(c), Automorphism::QpScalar { q, .. }) if unit(q, c.p()) => {
            (0..size as i64).map(|k| ClosedSubgroup::Qp(QpSubgroup::Lattice(k))).collect()
        }
        (AmbientGroup::PrimeProduct(cs), Automorphism::Product { scalars, .. })
            if cs.iter().zip(scalars).any(|(c, s)| unit(s, c.p())) =>
        {
            // lattices in the unit factors, zero elsewhere: all fixed
            let units: Vec<bool> = cs.iter().zip(scalars).map(|(c, s)| unit(s, c.p())).collect();
            (0..size as i64)
                .map(|k| {
                    ClosedSubgroup::Product(
                        units.iter().map(|&u| if u { QpSubgroup::Lattice(k) } else { QpSubgroup::Zero }).collect(),
                    )
                })
                .collect()
        }
        (AmbientGroup::PAdicSpace(c, 2), Automorphism::QpMatrix(m)) if m.is_diagonal() && m.entries()[0][0] == m.entries()[1][1] => {
            (0..size as i64).map(|i| line_a(c.p(), &p_power(c.p(), i))).collect::<Result<_>>()?
        }
        _ => {
            return Err(ClabError::NotApplicable(format!(
                "no fixed family registered for {} on {}",
                t.kind(),
                ambient.name()
            )))
        }
    })
}

/// The line `(a, 1) ℚₚ`.
pub fn line_a(p: u64, a: &Q) -> Result<ClosedSubgroup> {
    Ok(ClosedSubgroup::Module(QpModule::line(vec![a.clone(), Q::one()])?.canonicalize(p)))
}

/// Witness `(ℤ, (1+η)ℤ)` for a real scalar with `|α| ≠ 1`.
pub fn refute_real_scalar(alpha: &Q, delta: &Q, horizon: u32, cfg: &MetricConfig) -> Result<RefutationWitness> {
    check_delta(delta)?;
    if alpha.is_zero() {
        return Err(ClabError::Malformed("scalar must be nonzero".into()));
    }
    if alpha.abs().is_one() {
        return Err(ClabError::NotApplicable("|alpha| = 1 fixes every subgroup; use refute_fixed_points".into()));
    }
    let contracting = if alpha.abs() < Q::one() { alpha.abs() } else { alpha.abs().recip() };
    // |atan(x(1+η)) - atan(x)| <= η/2, so η <= δ/3 leaves room for the enclosures
    let (eta, e) = pow2_floor(&(delta / qi(3)));
    let k = Q::one() + &eta;
    let t = Automorphism::RealScalar(alpha.clone());
    let report = separation(
        &AmbientGroup::Reals,
        &t,
        &ClosedSubgroup::Real(RealSubgroup::Spacing(Q::one())),
        &ClosedSubgroup::Real(RealSubgroup::Spacing(k.clone())),
        horizon,
        cfg,
    )?;
    let params = vec![
        ("contracting |alpha|".into(), fmt_rational(&contracting)),
        ("eta".into(), format!("2^-{e}")),
        ("k'".into(), fmt_rational(&k)),
    ];
    witness(&AmbientGroup::Reals, delta, report, "lattices (Z, k'Z)".into(), params)
}

/// Witness among the lines `(a,1)ℚₚ` for a diagonal map on `ℚₚ²`.
pub fn refute_qp2_diag(
    ambient: &AmbientGroup,
    d: &QpMatrix,
    delta: &Q,
    horizon: u32,
    cfg: &MetricConfig,
) -> Result<RefutationWitness> {
    check_delta(delta)?;
    let t = Automorphism::QpMatrix(d.clone());
    t.validate(ambient)?;
    if d.dim() != 2 || !d.is_diagonal() {
        return Err(ClabError::NotApplicable("refute_qp2_diag needs a 2x2 diagonal map".into()));
    }
    let p = d.p();
    // smallest t with p^-t < δ
    let mut target = 0i64;
    while p_power(p, -target) >= *delta {
        target += 1;
    }
    if target > cfg.precision as i64 {
        return Err(ClabError::Truncation(format!(
            "delta is below the grid floor {}; raise the precision",
            fmt_p_power(&p_power(p, -(cfg.precision as i64)), p)
        )));
    }
    let ratio = &d.entries()[0][0] / &d.entries()[1][1];
    if ratio.is_one() {
        let family = fixed_family(ambient, &t, delta, 2 * target as usize + 2)?;
        let mut w = refute_fixed_points(ambient, &t, &family, delta, horizon, cfg)?;
        w.family = "lines (p^i, 1)Q_p, all fixed by a scalar map".into();
        return Ok(w);
    }
    let k = match valuation(&ratio, p) {
        Valuation::Finite(k) => k,
        Valuation::Infinite => unreachable!("ratio is nonzero"),
    };
    let b = Q::one() + p_power(p, 2 * target);
    let report = separation(ambient, &t, &line_a(p, &Q::one())?, &line_a(p, &b)?, horizon, cfg)?;
    let params = vec![
        ("v_p(l1/l2)".into(), k.to_string()),
        ("a".into(), "1".into()),
        ("b".into(), format!("1 + {}", fmt_p_power(&p_power(p, 2 * target), p))),
    ];
    witness(ambient, delta, report, "lines (a, 1)Q_p".into(), params)
}

/// Distance curve of one `H_S` under the shift.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftCurve {
    pub subgroup: ShiftSubgroup,
    /// `d(Tⁿ H_S, {e})` for `n = 0..=N`.
    pub distances: Vec<Distance>,
    pub closed_form: bool,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftDemo {
    pub horizon: u32,
    pub curves: Vec<ShiftCurve>,
    pub note: &'static str,
}

/// Forward asymptotics `Tⁿ(H_S) → {e}` for the unit right shift.
pub fn shift_asymptotic_demo(ambient: &AmbientGroup, family: &[ShiftSubgroup], horizon: u32) -> Result<ShiftDemo> {
    let AmbientGroup::ShiftGroup { window, .. } = ambient else {
        return Err(ClabError::AmbientMismatch("shift demo needs the shift group".into()));
    };
    if horizon as i64 > *window {
        return Err(ClabError::Domain(format!("horizon {horizon} exceeds the window {window}")));
    }
    let trivial = ClosedSubgroup::Shift(ShiftSubgroup::trivial());
    let cfg = MetricConfig::default();
    let curves = family
        .par_iter()
        .map(|h| {
            let mut distances = Vec::with_capacity(horizon as usize + 1);
            let mut closed_form = true;
            for n in 0..=horizon as i64 {
                let hn = h.shifted(n, *window)?;
                let d = chabauty_dist(ambient, &ClosedSubgroup::Shift(hn.clone()), &trivial, &cfg)?;
                closed_form &= d.upper == shift_closed_form(&hn, *window);
                distances.push(d);
            }
            let monotone = distances.windows(2).all(|w| w[1].upper <= w[0].upper);
            Ok(ShiftCurve { subgroup: h.clone(), distances, closed_form, monotone })
        })
        .collect::<Result<_>>()?;
    Ok(ShiftDemo {
        horizon,
        curves,
        note: "one-sided asymptotics only; two-sided delta-pairs in this family are unresolved",
    })
}

/// `2^{-min(W, k*)}` with `k*` the largest `k` such that no support point lies in `[-k, k)`.
fn shift_closed_form(h: &ShiftSubgroup, window: i64) -> Q {
    let first = h.truncated(window).iter().map(|&c| if c >= 0 { c } else { -c - 1 }).min();
    match first {
        None => Q::zero(),
        Some(k) => p_power(2, -k.min(window)),
    }
}

/// Sup-separations of all distinct pairs from `{0, ℚₚ, p^kℤₚ : |k| <= kmax}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanReport {
    pub pairs: usize,
    pub min_sup: Q,
    pub min_pair: (ClosedSubgroup, ClosedSubgroup),
    pub delta: Q,
    pub all_above: bool,
}

/// Exhaustive check of a certificate over the desk-scale lattice family.
pub fn exhaustive_scan(p: u64, q: &Q, kmax: i64, horizon: u32, cfg: &MetricConfig) -> Result<ScanReport> {
    let cert = certify_qp_scalar(p, q)?;
    let amb = AmbientGroup::PAdicLine(crate::padic::PrimeContext::new(p, cfg.precision)?);
    let t = Automorphism::QpScalar { p, q: q.clone() };
    let mut family = vec![QpSubgroup::Zero, QpSubgroup::Full];
    family.extend((-kmax..=kmax).map(QpSubgroup::Lattice));
    let pairs: Vec<(QpSubgroup, QpSubgroup)> = family
        .iter()
        .enumerate()
        .flat_map(|(i, a)| family[i + 1..].iter().map(move |b| (*a, *b)))
        .collect();
    let sups: Vec<(Q, (QpSubgroup, QpSubgroup))> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let r = separation(&amb, &t, &ClosedSubgroup::Qp(a), &ClosedSubgroup::Qp(b), horizon, cfg)?;
            Ok((r.sup.upper, (a, b)))
        })
        .collect::<Result<_>>()?;
    let (min_sup, (a, b)) = sups.iter().min_by(|x, y| x.0.cmp(&y.0)).cloned().expect("pairs");
    Ok(ScanReport {
        pairs: pairs.len(),
        all_above: sups.iter().all(|(s, _)| *s > cert.delta),
        min_sup,
        min_pair: (ClosedSubgroup::Qp(a), ClosedSubgroup::Qp(b)),
        delta: cert.delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::{q, PrimeContext};

    fn qp(p: u64) -> AmbientGroup {
        AmbientGroup::PAdicLine(PrimeContext::new(p, 24).unwrap())
    }

    fn qp2(p: u64) -> AmbientGroup {
        AmbientGroup::PAdicSpace(PrimeContext::new(p, 24).unwrap(), 2)
    }

    fn lat(k: i64) -> ClosedSubgroup {
        ClosedSubgroup::Qp(QpSubgroup::Lattice(k))
    }

    #[test]
    fn scalar_separation_peaks_at_zero() {
        let t = Automorphism::QpScalar { p: 3, q: qi(3) };
        let r = separation(&qp(3), &t, &lat(0), &lat(1), 3, &MetricConfig::default()).unwrap();
        assert_eq!(r.sup.upper, Q::one());
        assert_eq!(r.argmax, 0);
        // oracle: reported distance of each window member recomputed directly
        for (n, d) in &r.distances {
            let direct = chabauty_dist(&qp(3), &lat(*n), &lat(n + 1), &MetricConfig::default()).unwrap();
            assert_eq!(*d, direct);
        }
        let tail = r.tail.unwrap();
        let beyond = (4..40)
            .flat_map(|n| [n, -n])
            .map(|n| chabauty_dist(&qp(3), &lat(n), &lat(n + 1), &MetricConfig::default()).unwrap().upper)
            .max()
            .unwrap();
        assert_eq!(tail.bound, beyond);
    }

    #[test]
    fn identical_pair_has_zero_sup() {
        let t = Automorphism::QpScalar { p: 5, q: q(1, 5) };
        let r = separation(&qp(5), &t, &lat(2), &lat(2), 4, &MetricConfig::default()).unwrap();
        assert!(r.sup.is_zero());
        assert_eq!(r.tail.unwrap().bound, Q::zero());
    }

    #[test]
    fn scalar_tails_dominate_a_long_run() {
        let cfg = MetricConfig::default();
        let subs = [QpSubgroup::Zero, QpSubgroup::Full, QpSubgroup::Lattice(-3), QpSubgroup::Lattice(0), QpSubgroup::Lattice(4)];
        for m in [-2i64, 1, 3] {
            let qv = p_power(2, m);
            let t = Automorphism::QpScalar { p: 2, q: qv };
            for (i, a) in subs.iter().enumerate() {
                for b in &subs[i + 1..] {
                    let n = 2;
                    let tail = qp_scalar_tail(2, m, *a, *b, n, &cfg).unwrap();
                    let long = separation(&qp(2), &t, &ClosedSubgroup::Qp(*a), &ClosedSubgroup::Qp(*b), 30, &cfg).unwrap();
                    let outside = long.distances.iter().filter(|(k, _)| k.abs() > n).map(|(_, d)| d.upper.clone()).max().unwrap();
                    assert_eq!(tail, outside, "m={m} {a} {b}");
                }
            }
        }
    }

    #[test]
    fn line_tail_matches_direct_evaluation() {
        let cfg = MetricConfig::default();
        let d = QpMatrix::diagonal(3, vec![qi(3), qi(1)]).unwrap();
        let t = Automorphism::QpMatrix(d.clone());
        for (a, b) in [(qi(1), Q::one() + p_power(3, 5)), (q(1, 3), qi(2)), (qi(0), qi(9))] {
            let (la, lb) = (line_a(3, &a).unwrap(), line_a(3, &b).unwrap());
            let long = separation(&qp2(3), &t, &la, &lb, 24, &cfg).unwrap();
            let short = separation(&qp2(3), &t, &la, &lb, 3, &cfg).unwrap();
            let outside = long.distances.iter().filter(|(k, _)| k.abs() > 3).map(|(_, d)| d.upper.clone()).max().unwrap();
            assert!(short.tail.as_ref().unwrap().bound >= outside);
            assert_eq!(short.tail.unwrap().derivation, LINE_TAIL);
        }
    }

    #[test]
    fn diag_separation_bound() {
        let d = QpMatrix::diagonal(3, vec![qi(3), qi(1)]).unwrap();
        let t = Automorphism::QpMatrix(d);
        let b = Q::one() + p_power(3, 9);
        let r = separation(&qp2(3), &t, &line_a(3, &qi(1)).unwrap(), &line_a(3, &b).unwrap(), 100, &MetricConfig::default())
            .unwrap();
        assert!(r.sup.upper <= p_power(3, -4));
        assert!(r.tail.unwrap().bound <= p_power(3, -4));
    }

    #[test]
    fn certificates() {
        let c = certify_qp_scalar(3, &qi(3)).unwrap();
        assert_eq!(c.delta, q(1, 3));
        assert_eq!(c.cases.len(), 4);
        assert!(c.cases.iter().all(|e| e.min_sup.is_one()));
        assert_eq!(certify_qp_scalar(3, &qi(18)).unwrap().delta, q(1, 3));
        assert_eq!(certify_qp_scalar(2, &q(1, 8)).unwrap().delta, q(1, 4));
        assert!(matches!(certify_qp_scalar(3, &qi(4)), Err(ClabError::NotExpansive { prime: Some(3), .. })));
    }

    #[test]
    fn certificate_cases_match_separation() {
        let cfg = MetricConfig::default();
        for m in [1i64, 3, -4] {
            let c = certify_qp_scalar(2, &p_power(2, m)).unwrap();
            let t = Automorphism::QpScalar { p: 2, q: p_power(2, m) };
            for e in &c.cases {
                let r = separation(&qp(2), &t, &e.pair.0, &e.pair.1, 12, &cfg).unwrap();
                assert_eq!(r.sup.upper, e.min_sup, "{}", e.class);
                let at = &r.distances.iter().find(|(n, _)| *n == e.time).unwrap().1;
                assert_eq!(at.upper, e.min_sup);
            }
        }
    }

    #[test]
    fn exhaustive_scan_small() {
        let cfg = MetricConfig::default();
        for (p, qv) in [(3, qi(3)), (2, q(1, 8))] {
            let s = exhaustive_scan(p, &qv, 6, 20, &cfg).unwrap();
            assert!(s.all_above);
            assert_eq!(s.pairs, 15 * 14 / 2);
        }
    }

    #[test]
    fn product_certificate() {
        let amb = AmbientGroup::product(&[2, 3], 24).unwrap();
        let t = Automorphism::Product { primes: vec![2, 3], scalars: vec![qi(2), qi(3)] };
        let c = certify_product(&amb, &t).unwrap();
        assert_eq!(c.delta, q(1, 3));
        assert_eq!(c.cases.len(), 8);
        let bad = Automorphism::Product { primes: vec![2, 3], scalars: vec![qi(2), qi(2)] };
        assert!(matches!(certify_product(&amb, &bad), Err(ClabError::NotExpansive { prime: Some(3), .. })));
    }

    #[test]
    fn fixed_point_witnesses() {
        let cfg = MetricConfig::default();
        let circle = AmbientGroup::Circle;
        let t = Automorphism::CircleSign(-1);
        let delta = q(1, 1000);
        let fam = fixed_family(&circle, &t, &delta, 4).unwrap();
        let w = refute_fixed_points(&circle, &t, &fam, &delta, 5, &cfg).unwrap();
        assert_eq!(
            w.pair,
            (ClosedSubgroup::Circle(CircleSubgroup::Cyclic(1000)), ClosedSubgroup::Circle(CircleSubgroup::Cyclic(1001)))
        );
        let t = Automorphism::IntSign(1);
        let fam = fixed_family(&AmbientGroup::Integers, &t, &q(1, 10), 3).unwrap();
        let w = refute_fixed_points(&AmbientGroup::Integers, &t, &fam, &q(1, 10), 5, &cfg).unwrap();
        assert_eq!(w.pair, (ClosedSubgroup::Int(10), ClosedSubgroup::Int(11)));
    }

    #[test]
    fn unit_scalar_families() {
        let cfg = MetricConfig::default();
        let t = Automorphism::QpScalar { p: 3, q: qi(4) };
        // Zero and Full only: the family is too sparse
        let sparse = [ClosedSubgroup::Qp(QpSubgroup::Zero), ClosedSubgroup::Qp(QpSubgroup::Full)];
        match refute_fixed_points(&qp(3), &t, &sparse, &q(1, 10), 5, &cfg) {
            Err(ClabError::FamilyTooSparse { min_achieved }) => assert_eq!(min_achieved, "1"),
            other => panic!("{other:?}"),
        }
        let fam = fixed_family(&qp(3), &t, &q(1, 10), 6).unwrap();
        let w = refute_fixed_points(&qp(3), &t, &fam, &q(1, 10), 5, &cfg).unwrap();
        assert_eq!(w.pair, (lat(3), lat(4)));
        assert!(matches!(
            refute_fixed_points(&qp(3), &Automorphism::QpScalar { p: 3, q: qi(3) }, &fam, &q(1, 10), 5, &cfg),
            Err(ClabError::Domain(_))
        ));
    }

    #[test]
    fn product_with_a_unit_factor() {
        let cfg = MetricConfig::default();
        let amb = AmbientGroup::product(&[2, 3], 24).unwrap();
        let t = Automorphism::Product { primes: vec![2, 3], scalars: vec![qi(2), qi(4)] };
        let fam = fixed_family(&amb, &t, &q(1, 10), 8).unwrap();
        let w = refute_fixed_points(&amb, &t, &fam, &q(1, 10), 10, &cfg).unwrap();
        assert_eq!(
            w.pair,
            (
                ClosedSubgroup::Product(vec![QpSubgroup::Zero, QpSubgroup::Lattice(3)]),
                ClosedSubgroup::Product(vec![QpSubgroup::Zero, QpSubgroup::Lattice(4)])
            )
        );
    }

    #[test]
    fn real_witnesses() {
        let cfg = MetricConfig::default();
        let w = refute_real_scalar(&q(1, 2), &q(1, 1000), 64, &cfg).unwrap();
        assert_eq!(w.parameters[2].1, "4097/4096");
        assert!(w.separation.sup.upper < q(1, 1000));
        let w = refute_real_scalar(&qi(2), &q(1, 10), 8, &cfg).unwrap();
        assert_eq!(w.parameters[2].1, "33/32");
        assert!(matches!(refute_real_scalar(&qi(-1), &q(1, 10), 8, &cfg), Err(ClabError::NotApplicable(_))));
    }

    #[test]
    fn real_tail_bounds_long_run() {
        let cfg = MetricConfig::default();
        let t = Automorphism::RealScalar(q(2, 3));
        let (a, b) = (RealSubgroup::Spacing(qi(1)), RealSubgroup::Spacing(q(17, 16)));
        let long = separation(&AmbientGroup::Reals, &t, &ClosedSubgroup::Real(a.clone()), &ClosedSubgroup::Real(b.clone()), 30, &cfg).unwrap();
        let bound = real_spacing_tail(&q(2, 3), &qi(1), &q(17, 16), 5);
        for (n, d) in &long.distances {
            if n.abs() > 5 {
                assert!(d.lower <= bound, "n = {n}");
            }
        }
    }

    #[test]
    fn qp2_witnesses() {
        let cfg = MetricConfig::default();
        let d = QpMatrix::diagonal(3, vec![qi(3), qi(1)]).unwrap();
        let w = refute_qp2_diag(&qp2(3), &d, &p_power(3, -6), 200, &cfg).unwrap();
        assert_eq!(w.pair.1, line_a(3, &(Q::one() + p_power(3, 14))).unwrap());
        assert!(w.separation.distances.iter().all(|(_, d)| d.upper < p_power(3, -6)));

        let scalar = QpMatrix::diagonal(5, vec![qi(5), qi(5)]).unwrap();
        let w = refute_qp2_diag(&qp2(5), &scalar, &p_power(5, -2), 10, &cfg).unwrap();
        let t = Automorphism::QpMatrix(scalar);
        for h in [&w.pair.0, &w.pair.1] {
            assert!(equal(&qp2(5), &t.apply(&qp2(5), h).unwrap(), h).unwrap());
        }

        let unit = QpMatrix::diagonal(2, vec![qi(3), qi(1)]).unwrap();
        let w = refute_qp2_diag(&qp2(2), &unit, &q(1, 4), 10, &cfg).unwrap();
        assert!(w.check(&qp2(2)).unwrap());
    }

    #[test]
    fn shift_demo_closed_form() {
        let amb = AmbientGroup::shift(2, 32).unwrap();
        let fam = [ShiftSubgroup::new([0], None), ShiftSubgroup::trivial(), ShiftSubgroup::new([3, 5, 16], None)];
        let demo = shift_asymptotic_demo(&amb, &fam, 8).unwrap();
        let first: Vec<Q> = demo.curves[0].distances.iter().map(|d| d.upper.clone()).collect();
        assert_eq!(first, (0..=8).map(|n| p_power(2, -n)).collect::<Vec<_>>());
        assert!(demo.curves[1].distances.iter().all(|d| d.is_zero()));
        assert!(demo.curves.iter().all(|c| c.closed_form && c.monotone));
        assert!(shift_asymptotic_demo(&amb, &fam, 40).is_err());
    }
}
