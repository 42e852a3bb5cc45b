//! Automorphisms acting on subgroups, expansivity on the group, contraction groups.

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::error::{ClabError, Result};
use crate::linalg::{self, Matrix};
use crate::module::{QpModule, Slot};
use crate::padic::{fmt_rational, p_power, val, valuation, ExactRational as Q, Valuation};
use crate::subgroups::{equal, AmbientGroup, ClosedSubgroup, QpSubgroup, RealSubgroup};

/// An invertible matrix over ℚ acting on ℚₚⁿ, with a verified rational eigenbasis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QpMatrix {
    p: u64,
    entries: Matrix,
    eigen: Vec<(Q, Vec<Q>)>,
}

impl QpMatrix {
    /// Checks invertibility and every supplied eigenpair `A v = λ v` exactly.
    pub fn new(p: u64, entries: Matrix, eigen: Vec<(Q, Vec<Q>)>) -> Result<Self> {
        let n = entries.len();
        if n == 0 || entries.iter().any(|r| r.len() != n) {
            return Err(ClabError::Malformed("matrix must be square and nonempty".into()));
        }
        if linalg::determinant(&entries).is_zero() {
            return Err(ClabError::Malformed("matrix is singular".into()));
        }
        if eigen.len() != n {
            return Err(ClabError::Malformed(format!(
                "need a rational eigen-decomposition with {n} eigenpairs, got {}",
                eigen.len()
            )));
        }
        for (lambda, v) in &eigen {
            if v.len() != n || linalg::is_zero_vec(v) {
                return Err(ClabError::Malformed("eigenvector has wrong length or is zero".into()));
            }
            if linalg::mat_vec(&entries, v) != linalg::scale(v, lambda) {
                return Err(ClabError::Malformed(format!(
                    "A·v != {}·v for a supplied eigenpair",
                    fmt_rational(lambda)
                )));
            }
        }
        let vecs: Vec<Vec<Q>> = eigen.iter().map(|(_, v)| v.clone()).collect();
        if linalg::rank(&vecs, n) < n {
            return Err(ClabError::Malformed("eigenvectors do not span; matrix must be diagonalizable".into()));
        }
        Ok(QpMatrix { p, entries, eigen })
    }

    /// `diag(d_1, …, d_n)` with its standard eigenbasis.
    pub fn diagonal(p: u64, diag: Vec<Q>) -> Result<Self> {
        let n = diag.len();
        let mut entries = vec![linalg::zero_vec(n); n];
        for (i, d) in diag.iter().enumerate() {
            entries[i][i] = d.clone();
        }
        let eigen = diag.into_iter().enumerate().map(|(i, d)| (d, linalg::unit_vec(n, i))).collect();
        QpMatrix::new(p, entries, eigen)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn eigen(&self) -> &[(Q, Vec<Q>)] {
        &self.eigen
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries
            .iter()
            .enumerate()
            .all(|(i, r)| r.iter().enumerate().all(|(j, x)| i == j || x.is_zero()))
    }

    fn power(&self, n: i64) -> QpMatrix {
        let base = if n < 0 { linalg::inverse(&self.entries).expect("invertible") } else { self.entries.clone() };
        let entries = linalg::mat_pow(&base, n.unsigned_abs());
        let eigen = self.eigen.iter().map(|(l, v)| (rat_pow(l, n), v.clone())).collect();
        QpMatrix { p: self.p, entries, eigen }
    }
}

/// An automorphism of one of the ambient groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Automorphism {
    IntSign(i8),
    RealScalar(Q),
    CircleSign(i8),
    QpScalar { p: u64, q: Q },
    QpMatrix(QpMatrix),
    /// One scalar per prime factor of `∏ ℚ_{pᵢ}`.
    Product { primes: Vec<u64>, scalars: Vec<Q> },
    /// The `s`-fold right shift.
    Shift(i64),
}

pub fn rat_pow(x: &Q, n: i64) -> Q {
    let base = if n < 0 { x.recip() } else { x.clone() };
    num_traits::pow(base, n.unsigned_abs() as usize)
}

impl Automorphism {
    pub fn kind(&self) -> &'static str {
        match self {
            Automorphism::IntSign(_) => "int_sign",
            Automorphism::RealScalar(_) => "real_scalar",
            Automorphism::CircleSign(_) => "circle_sign",
            Automorphism::QpScalar { .. } => "qp_scalar",
            Automorphism::QpMatrix(_) => "qp_matrix",
            Automorphism::Product { .. } => "product",
            Automorphism::Shift(_) => "shift",
        }
    }

    /// Checks that the automorphism is well formed and acts on `ambient`.
    pub fn validate(&self, ambient: &AmbientGroup) -> Result<()> {
        let bad = |msg: String| Err(ClabError::Malformed(msg));
        match self {
            Automorphism::IntSign(s) | Automorphism::CircleSign(s) if s.abs() != 1 => {
                return bad("sign must be +1 or -1".into())
            }
            Automorphism::RealScalar(a) if a.is_zero() => return bad("scalar must be nonzero".into()),
            Automorphism::QpScalar { q, .. } if q.is_zero() => return bad("scalar must be nonzero".into()),
            Automorphism::Product { primes, scalars } => {
                if primes.len() != scalars.len() {
                    return bad("one scalar per prime factor".into());
                }
                if scalars.iter().any(|s| s.is_zero()) {
                    return bad("scalars must be nonzero".into());
                }
            }
            _ => {}
        }
        let ok = match (self, ambient) {
            (Automorphism::IntSign(_), AmbientGroup::Integers) => true,
            (Automorphism::RealScalar(_), AmbientGroup::Reals) => true,
            (Automorphism::CircleSign(_), AmbientGroup::Circle) => true,
            (Automorphism::QpScalar { p, .. }, AmbientGroup::PAdicLine(c) | AmbientGroup::PAdicSpace(c, _)) => *p == c.p(),
            (Automorphism::QpMatrix(m), AmbientGroup::PAdicSpace(c, n)) => m.p == c.p() && m.dim() == *n,
            (Automorphism::QpMatrix(m), AmbientGroup::PAdicLine(c)) => m.p == c.p() && m.dim() == 1,
            (Automorphism::Product { primes, .. }, AmbientGroup::PrimeProduct(cs)) => {
                primes.len() == cs.len() && primes.iter().zip(cs).all(|(p, c)| *p == c.p())
            }
            (Automorphism::Shift(_), AmbientGroup::ShiftGroup { .. }) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(ClabError::AmbientMismatch(format!("{} automorphism on {}", self.kind(), ambient.name())))
        }
    }

    /// `T^n` for any integer `n`.
    pub fn power(&self, n: i64) -> Automorphism {
        match self {
            Automorphism::IntSign(s) => Automorphism::IntSign(if n % 2 == 0 { 1 } else { *s }),
            Automorphism::CircleSign(s) => Automorphism::CircleSign(if n % 2 == 0 { 1 } else { *s }),
            Automorphism::RealScalar(a) => Automorphism::RealScalar(rat_pow(a, n)),
            Automorphism::QpScalar { p, q } => Automorphism::QpScalar { p: *p, q: rat_pow(q, n) },
            Automorphism::QpMatrix(m) => Automorphism::QpMatrix(m.power(n)),
            Automorphism::Product { primes, scalars } => Automorphism::Product {
                primes: primes.clone(),
                scalars: scalars.iter().map(|s| rat_pow(s, n)).collect(),
            },
            Automorphism::Shift(s) => Automorphism::Shift(s * n),
        }
    }

    pub fn inverse(&self) -> Automorphism {
        self.power(-1)
    }

    /// Exact image `T(H)` in canonical form.
    pub fn apply(&self, ambient: &AmbientGroup, h: &ClosedSubgroup) -> Result<ClosedSubgroup> {
        self.validate(ambient)?;
        h.validate(ambient)?;
        let shift_qp = |q: QpSubgroup, v: i64| match q {
            QpSubgroup::Lattice(k) => QpSubgroup::Lattice(k + v),
            other => other,
        };
        Ok(match (self, h) {
            (Automorphism::IntSign(_), ClosedSubgroup::Int(_)) | (Automorphism::CircleSign(_), ClosedSubgroup::Circle(_)) => h.clone(),
            (Automorphism::RealScalar(a), ClosedSubgroup::Real(r)) => ClosedSubgroup::Real(match r {
                RealSubgroup::Spacing(s) => RealSubgroup::Spacing(s * a.abs()),
                other => other.clone(),
            }),
            (Automorphism::QpScalar { p, q }, ClosedSubgroup::Qp(x)) => ClosedSubgroup::Qp(shift_qp(*x, val(q, *p))),
            (Automorphism::QpScalar { p, q }, ClosedSubgroup::Module(m)) => {
                let n = m.dim();
                let scal: Matrix = (0..n).map(|i| linalg::scale(&linalg::unit_vec(n, i), q)).collect();
                ClosedSubgroup::Module(m.transform(&scal).canonicalize(*p))
            }
            (Automorphism::QpMatrix(t), ClosedSubgroup::Module(m)) => {
                ClosedSubgroup::Module(m.transform(&t.entries).canonicalize(t.p))
            }
            (Automorphism::QpMatrix(t), ClosedSubgroup::Qp(x)) => {
                ClosedSubgroup::Qp(shift_qp(*x, val(&t.entries[0][0], t.p)))
            }
            (Automorphism::Product { primes, scalars }, ClosedSubgroup::Product(cs)) => ClosedSubgroup::Product(
                cs.iter()
                    .zip(primes.iter().zip(scalars))
                    .map(|(c, (p, s))| shift_qp(*c, val(s, *p)))
                    .collect(),
            ),
            (Automorphism::Shift(s), ClosedSubgroup::Shift(x)) => {
                let AmbientGroup::ShiftGroup { window, .. } = ambient else { unreachable!() };
                ClosedSubgroup::Shift(x.shifted(*s, *window)?)
            }
            _ => return Err(ClabError::AmbientMismatch(format!("{} cannot act on a {} subgroup", self.kind(), h.kind()))),
        })
    }

    /// `T^n(H)` for `n = -N..=N`, indexed by `n`.
    pub fn orbit(&self, ambient: &AmbientGroup, h: &ClosedSubgroup, horizon: u32) -> Result<Vec<(i64, ClosedSubgroup)>> {
        if horizon < 1 {
            return Err(ClabError::Domain("orbit horizon must be >= 1".into()));
        }
        let n = horizon as i64;
        (-n..=n)
            .into_par_iter()
            .map(|k| Ok((k, self.power(k).apply(ambient, h)?)))
            .collect()
    }
}

/// Outcome of the expansivity test on the group itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupExpansivity {
    pub expansive: bool,
    /// Which analytic rule decided the verdict.
    pub rule: &'static str,
    /// `(prime, eigenvalue, valuation)` for p-adic automorphisms.
    pub eigen_valuations: Vec<(u64, Q, i64)>,
    pub shrinkage: Option<Shrinkage>,
}

/// Finite-horizon shrinkage of `∩_{|n|<=N} T^n(U)` for `U` the unit ball.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shrinkage {
    pub horizon: u32,
    /// Largest norm of an element of the intersection at horizons `N` and `2N`.
    pub norm_at_horizon: Q,
    pub norm_at_double: Q,
    pub shrinks: bool,
}

/// Analytic expansivity rule on `G`, cross-checked by the shrinkage test for p-adic maps.
pub fn is_expansive_on_g(t: &Automorphism, horizon: u32) -> Result<GroupExpansivity> {
    let mut eigen_valuations = Vec::new();
    let (expansive, rule) = match t {
        Automorphism::IntSign(_) => (true, "discrete group: U = {0}"),
        Automorphism::CircleSign(_) => (false, "isometry of a compact connected group"),
        Automorphism::RealScalar(a) => (a.abs() != Q::one(), "real scalar: |alpha| != 1"),
        Automorphism::Shift(s) => (*s != 0, "shift: nonzero shift separates coordinates"),
        Automorphism::QpScalar { p, q } => {
            let v = val(q, *p);
            eigen_valuations.push((*p, q.clone(), v));
            (v != 0, "p-adic scalar: v_p(q) != 0")
        }
        Automorphism::QpMatrix(m) => {
            for (l, _) in &m.eigen {
                eigen_valuations.push((m.p, l.clone(), val(l, m.p)));
            }
            (eigen_valuations.iter().all(|e| e.2 != 0), "p-adic matrix: no eigenvalue of norm 1")
        }
        Automorphism::Product { primes, scalars } => {
            for (p, s) in primes.iter().zip(scalars) {
                eigen_valuations.push((*p, s.clone(), val(s, *p)));
            }
            (eigen_valuations.iter().all(|e| e.2 != 0), "product: every factor expansive")
        }
    };
    let shrinkage = match t {
        Automorphism::QpScalar { .. } | Automorphism::QpMatrix(_) | Automorphism::Product { .. } => {
            Some(shrinkage_test(t, horizon)?)
        }
        _ => None,
    };
    if let Some(s) = &shrinkage {
        if s.shrinks != expansive {
            return Err(ClabError::Domain(format!(
                "eigenvalue rule ({expansive}) disagrees with the shrinkage test ({})",
                s.shrinks
            )));
        }
    }
    Ok(GroupExpansivity { expansive, rule, eigen_valuations, shrinkage })
}

/// Largest norm in `∩_{|n|<=N} A^n(ℤₚⁿ)`, computed through the dual lattice
/// `Σ_{|n|<=N} (A^{-n})^T ℤₚⁿ`: if its Smith exponents are `a_i`, the answer is `p^{max a_i}`.
fn intersection_norm(p: u64, a: &Matrix, horizon: u32) -> Q {
    let n = a.len();
    let a_inv = linalg::inverse(a).expect("invertible");
    let (at, ait) = (linalg::transpose(a), linalg::transpose(&a_inv));
    let mut gens: Vec<Vec<Q>> = linalg::identity(n);
    let (mut fwd, mut bwd) = (linalg::identity(n), linalg::identity(n));
    for _ in 0..horizon {
        fwd = linalg::mat_mul(&fwd, &ait);
        bwd = linalg::mat_mul(&bwd, &at);
        for m in [&fwd, &bwd] {
            gens.extend(linalg::transpose(m));
        }
    }
    let dual = QpModule::lattice(n, gens).expect("well formed").canonicalize(p);
    let frame = dual.frame(p);
    let max_a = frame
        .slots()
        .iter()
        .map(|s| match s {
            Slot::Lattice(a) => *a,
            _ => unreachable!("the dual sum contains ℤₚⁿ"),
        })
        .max()
        .unwrap_or(0);
    p_power(p, max_a)
}

/// Shrinkage test at horizons `N` and `2N`.
pub fn shrinkage_test(t: &Automorphism, horizon: u32) -> Result<Shrinkage> {
    let horizon = horizon.max(1);
    let norm = |h: u32| -> Result<Q> {
        Ok(match t {
            Automorphism::QpScalar { p, q } => intersection_norm(*p, &vec![vec![q.clone()]], h),
            Automorphism::QpMatrix(m) => intersection_norm(m.p, &m.entries, h),
            Automorphism::Product { primes, scalars } => primes
                .iter()
                .zip(scalars)
                .map(|(p, s)| intersection_norm(*p, &vec![vec![s.clone()]], h))
                .max()
                .unwrap_or_else(Q::zero),
            _ => return Err(ClabError::NotApplicable("shrinkage test needs a p-adic automorphism".into())),
        })
    };
    let (a, b) = (norm(horizon)?, norm(2 * horizon)?);
    Ok(Shrinkage { horizon, shrinks: b < a, norm_at_horizon: a, norm_at_double: b })
}

/// `C(T)`, `C(T^{-1})` and `M(T)` for linear p-adic automorphisms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractionReport {
    pub c_t: ClosedSubgroup,
    pub c_tinv: ClosedSubgroup,
    pub m_t: ClosedSubgroup,
    pub product_open: bool,
    pub decomposition_holds: bool,
    /// All three subgroups are `T`-invariant (checked with `apply`).
    pub invariant: bool,
    /// For products: `T` maps each prime factor onto itself.
    pub factor_invariance: Vec<bool>,
}

pub fn contraction_group(ambient: &AmbientGroup, t: &Automorphism) -> Result<ContractionReport> {
    t.validate(ambient)?;
    let pick = |v: i64| (v > 0, v < 0, v == 0);
    let (c_t, c_tinv, m_t, decomposition_holds) = match t {
        Automorphism::QpScalar { p, q } => {
            let v = val(q, *p);
            let side = |b: bool| match ambient {
                AmbientGroup::PAdicSpace(_, n) => {
                    ClosedSubgroup::Module(if b { QpModule::full(*n) } else { QpModule::zero(*n) })
                }
                _ => ClosedSubgroup::Qp(if b { QpSubgroup::Full } else { QpSubgroup::Zero }),
            };
            let (c, ci, m) = pick(v);
            (side(c), side(ci), side(m), v != 0)
        }
        Automorphism::QpMatrix(mat) => {
            let n = mat.dim();
            let span = |f: &dyn Fn(i64) -> bool| -> Result<QpModule> {
                let vecs = mat.eigen.iter().filter(|(l, _)| f(val(l, mat.p))).map(|(_, v)| v.clone()).collect();
                Ok(QpModule::new(n, vecs, vec![])?.canonicalize(mat.p))
            };
            let (c, ci, m) = (span(&|v| v > 0)?, span(&|v| v < 0)?, span(&|v| v == 0)?);
            let holds = c.vector_dim() + ci.vector_dim() == n;
            (ClosedSubgroup::Module(c), ClosedSubgroup::Module(ci), ClosedSubgroup::Module(m), holds)
        }
        Automorphism::Product { primes, scalars } => {
            let vals: Vec<i64> = primes.iter().zip(scalars).map(|(p, s)| val(s, *p)).collect();
            let side = |f: &dyn Fn(i64) -> bool| {
                ClosedSubgroup::Product(
                    vals.iter().map(|&v| if f(v) { QpSubgroup::Full } else { QpSubgroup::Zero }).collect(),
                )
            };
            (side(&|v| v > 0), side(&|v| v < 0), side(&|v| v == 0), vals.iter().all(|&v| v != 0))
        }
        _ => {
            return Err(ClabError::NotApplicable(format!(
                "contraction groups are computed for p-adic linear maps, not {}",
                t.kind()
            )))
        }
    };
    let mut invariant = true;
    for h in [&c_t, &c_tinv, &m_t] {
        invariant &= equal(ambient, &t.apply(ambient, h)?, h)?;
    }
    let product_open = is_trivial(&m_t);
    let factor_invariance = match (ambient, t) {
        (AmbientGroup::PrimeProduct(cs), Automorphism::Product { .. }) => (0..cs.len())
            .map(|i| {
                let f = ClosedSubgroup::Product(
                    (0..cs.len()).map(|j| if i == j { QpSubgroup::Full } else { QpSubgroup::Zero }).collect(),
                );
                equal(ambient, &t.apply(ambient, &f)?, &f)
            })
            .collect::<Result<Vec<_>>>()?,
        _ => vec![],
    };
    Ok(ContractionReport { c_t, c_tinv, m_t, product_open, decomposition_holds, invariant, factor_invariance })
}

fn is_trivial(h: &ClosedSubgroup) -> bool {
    match h {
        ClosedSubgroup::Qp(q) => *q == QpSubgroup::Zero,
        ClosedSubgroup::Module(m) => m.is_zero(),
        ClosedSubgroup::Product(cs) => cs.iter().all(|c| *c == QpSubgroup::Zero),
        _ => false,
    }
}

/// Coordinates spanned by `h` when it is a coordinate subspace.
fn coordinate_support(h: &QpModule, p: u64) -> Option<Vec<usize>> {
    let c = h.canonicalize(p);
    if !c.lattice_gens().is_empty() {
        return None;
    }
    let mut coords = Vec::new();
    for v in c.vectors() {
        let nz: Vec<usize> = v.iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(i, _)| i).collect();
        if nz.len() != 1 {
            return None;
        }
        coords.push(nz[0]);
    }
    Some(coords)
}

fn check_invariant(t: &QpMatrix, h: &QpModule) -> Result<()> {
    for g in h.vectors().iter().chain(h.lattice_gens()) {
        let img = linalg::mat_vec(&t.entries, g);
        if !h.contains_point(t.p, &img)? {
            let s: Vec<String> = img.iter().map(fmt_rational).collect();
            return Err(ClabError::NotInvariant { image: format!("({})", s.join(", ")) });
        }
    }
    // the image of a vector part must stay in the vector part
    for g in h.vectors() {
        if !h.in_vector_span(&linalg::mat_vec(&t.entries, g)) {
            return Err(ClabError::NotInvariant { image: "vector part not preserved".into() });
        }
    }
    Ok(())
}

fn submatrix_action(t: &QpMatrix, coords: &[usize]) -> Result<Automorphism> {
    let entries: Matrix = coords.iter().map(|&i| coords.iter().map(|&j| t.entries[i][j].clone()).collect()).collect();
    if coords.len() == 1 {
        return Ok(Automorphism::QpScalar { p: t.p, q: entries[0][0].clone() });
    }
    // projections of eigenvectors onto the kept coordinates are eigenvectors of the block
    let mut eigen: Vec<(Q, Vec<Q>)> = Vec::new();
    for (l, v) in &t.eigen {
        let proj: Vec<Q> = coords.iter().map(|&i| v[i].clone()).collect();
        if linalg::is_zero_vec(&proj) || linalg::mat_vec(&entries, &proj) != linalg::scale(&proj, l) {
            continue;
        }
        let mut cand: Vec<Vec<Q>> = eigen.iter().map(|(_, w)| w.clone()).collect();
        cand.push(proj.clone());
        if linalg::rank(&cand, coords.len()) == cand.len() {
            eigen.push((l.clone(), proj));
        }
    }
    Ok(Automorphism::QpMatrix(QpMatrix::new(t.p, entries, eigen)?))
}

/// The induced automorphism on `ℚₚⁿ / H` for a `T`-invariant coordinate subspace `H`.
pub fn quotient_action(t: &QpMatrix, h: &QpModule) -> Result<Automorphism> {
    check_invariant(t, h)?;
    let coords = coordinate_support(h, t.p)
        .ok_or_else(|| ClabError::NotApplicable("quotients are taken by coordinate subspaces".into()))?;
    let rest: Vec<usize> = (0..t.dim()).filter(|i| !coords.contains(i)).collect();
    if rest.is_empty() {
        return Err(ClabError::NotApplicable("quotient by the whole space is trivial".into()));
    }
    submatrix_action(t, &rest)
}

/// The restriction of `T` to a `T`-invariant coordinate subspace `H`.
pub fn restriction_action(t: &QpMatrix, h: &QpModule) -> Result<Automorphism> {
    check_invariant(t, h)?;
    let coords = coordinate_support(h, t.p)
        .ok_or_else(|| ClabError::NotApplicable("restrictions are taken to coordinate subspaces".into()))?;
    if coords.is_empty() {
        return Err(ClabError::NotApplicable("restriction to the zero subspace is trivial".into()));
    }
    submatrix_action(t, &coords)
}

/// Valuation of a nonzero rational as an `i64`, for reports.
pub fn scalar_valuation(q: &Q, p: u64) -> Option<i64> {
    match valuation(q, p) {
        Valuation::Finite(v) => Some(v),
        Valuation::Infinite => None,
    }
}

/// `p^m · u` split of a nonzero scalar.
pub fn split_unit(q: &Q, p: u64) -> (i64, Q) {
    let m = val(q, p);
    (m, q / p_power(p, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::{q, qi, PrimeContext};

    fn qp(p: u64) -> AmbientGroup {
        AmbientGroup::PAdicLine(PrimeContext::new(p, 24).unwrap())
    }

    fn qp2(p: u64) -> AmbientGroup {
        AmbientGroup::PAdicSpace(PrimeContext::new(p, 24).unwrap(), 2)
    }

    fn line(a: Q) -> ClosedSubgroup {
        ClosedSubgroup::Module(QpModule::line(vec![a, qi(1)]).unwrap().canonicalize(3))
    }

    #[test]
    fn apply_examples() {
        let t = Automorphism::QpScalar { p: 3, q: qi(3) };
        let a = qp(3);
        assert_eq!(t.apply(&a, &ClosedSubgroup::Qp(QpSubgroup::Lattice(0))).unwrap(), ClosedSubgroup::Qp(QpSubgroup::Lattice(1)));
        assert_eq!(t.apply(&a, &ClosedSubgroup::Qp(QpSubgroup::Full)).unwrap(), ClosedSubgroup::Qp(QpSubgroup::Full));
        let d = Automorphism::QpMatrix(QpMatrix::diagonal(3, vec![qi(3), qi(1)]).unwrap());
        let img = d.apply(&qp2(3), &line(qi(2))).unwrap();
        assert!(equal(&qp2(3), &img, &line(qi(6))).unwrap());
    }

    #[test]
    fn orbit_examples() {
        let a = qp(5);
        let t = Automorphism::QpScalar { p: 5, q: qi(5) };
        let orb = t.orbit(&a, &ClosedSubgroup::Qp(QpSubgroup::Lattice(0)), 2).unwrap();
        let ks: Vec<_> = orb.iter().map(|(_, h)| h.clone()).collect();
        assert_eq!(ks, (-2..=2).map(|k| ClosedSubgroup::Qp(QpSubgroup::Lattice(k))).collect::<Vec<_>>());
        let amb = AmbientGroup::shift(2, 8).unwrap();
        let orb = Automorphism::Shift(1)
            .orbit(&amb, &ClosedSubgroup::Shift(crate::subgroups::ShiftSubgroup::new([3], None)), 3)
            .unwrap();
        let firsts: Vec<i64> = orb
            .iter()
            .map(|(_, h)| match h {
                ClosedSubgroup::Shift(s) => *s.support().first().unwrap(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(firsts, vec![0, 1, 2, 3, 4, 5, 6]);
        let d = Automorphism::QpMatrix(QpMatrix::diagonal(3, vec![qi(3), qi(1)]).unwrap());
        let orb = d.orbit(&qp2(3), &line(qi(1)), 1).unwrap();
        for ((_, h), expect) in orb.iter().zip([q(1, 3), qi(1), qi(3)]) {
            assert!(equal(&qp2(3), h, &line(expect)).unwrap());
        }
    }

    #[test]
    fn inverse_round_trip() {
        let a2 = qp2(3);
        let m = QpMatrix::new(
            3,
            vec![vec![qi(3), qi(1)], vec![qi(0), q(1, 3)]],
            vec![(qi(3), vec![qi(1), qi(0)]), (q(1, 3), vec![qi(-3), qi(8)])],
        )
        .unwrap();
        let t = Automorphism::QpMatrix(m);
        let h = ClosedSubgroup::Module(QpModule::lattice(2, vec![vec![qi(1), qi(2)], vec![qi(0), qi(9)]]).unwrap());
        let back = t.inverse().apply(&a2, &t.apply(&a2, &h).unwrap()).unwrap();
        assert!(equal(&a2, &back, &h).unwrap());
    }

    #[test]
    fn bad_eigenpairs_rejected() {
        let e = QpMatrix::new(3, vec![vec![qi(1), qi(1)], vec![qi(0), qi(1)]], vec![(qi(1), vec![qi(1), qi(0)])]);
        assert!(e.is_err());
        let e = QpMatrix::new(3, vec![vec![qi(2), qi(0)], vec![qi(0), qi(1)]], vec![(qi(2), vec![qi(1), qi(0)]), (qi(2), vec![qi(0), qi(1)])]);
        assert!(e.is_err());
    }

    #[test]
    fn expansivity_on_g() {
        let v = is_expansive_on_g(&Automorphism::QpScalar { p: 3, q: qi(3) }, 6).unwrap();
        assert!(v.expansive && v.shrinkage.unwrap().shrinks);
        let v = is_expansive_on_g(&Automorphism::QpScalar { p: 3, q: qi(4) }, 6).unwrap();
        assert!(!v.expansive);
        assert_eq!(v.shrinkage.unwrap().norm_at_double, qi(1));
        let d = Automorphism::QpMatrix(QpMatrix::diagonal(5, vec![qi(5), q(1, 5)]).unwrap());
        assert!(is_expansive_on_g(&d, 6).unwrap().expansive);
        assert!(is_expansive_on_g(&Automorphism::RealScalar(q(1, 2)), 6).unwrap().expansive);
        assert!(!is_expansive_on_g(&Automorphism::RealScalar(qi(-1)), 6).unwrap().expansive);
    }

    #[test]
    fn shrinkage_matches_diagonal_closed_form() {
        // ∩ T^n(ℤₚ²) = ⊕ p^{N|v_i|} ℤₚ, so the largest norm is p^{-N min|v_i|}
        let p = 2;
        for (a, b) in [(2i64, 1i64), (4, 1), (2, 1), (8, 3)] {
            for flip in [false, true] {
                let d1 = qi(a);
                let d2 = if flip { q(1, b.max(2)) } else { qi(b) };
                let m = Automorphism::QpMatrix(QpMatrix::diagonal(p, vec![d1.clone(), d2.clone()]).unwrap());
                let s = shrinkage_test(&m, 4).unwrap();
                let minv = val(&d1, p).abs().min(val(&d2, p).abs());
                assert_eq!(s.norm_at_horizon, p_power(p, -4 * minv));
            }
        }
    }

    #[test]
    fn contraction_examples() {
        let r = contraction_group(&qp(3), &Automorphism::QpScalar { p: 3, q: qi(3) }).unwrap();
        assert_eq!(r.c_t, ClosedSubgroup::Qp(QpSubgroup::Full));
        assert_eq!(r.c_tinv, ClosedSubgroup::Qp(QpSubgroup::Zero));
        assert!(r.product_open && r.decomposition_holds && r.invariant);
        let prod = AmbientGroup::product(&[2, 3], 24).unwrap();
        let t = Automorphism::Product { primes: vec![2, 3], scalars: vec![qi(2), q(1, 3)] };
        let r = contraction_group(&prod, &t).unwrap();
        assert_eq!(r.c_t, ClosedSubgroup::Product(vec![QpSubgroup::Full, QpSubgroup::Zero]));
        assert_eq!(r.c_tinv, ClosedSubgroup::Product(vec![QpSubgroup::Zero, QpSubgroup::Full]));
        assert!(r.decomposition_holds && r.factor_invariance == vec![true, true]);
        let d = Automorphism::QpMatrix(QpMatrix::diagonal(3, vec![qi(3), qi(1)]).unwrap());
        let r = contraction_group(&qp2(3), &d).unwrap();
        let axis2 = QpModule::coordinate_subspace(2, &[1]).unwrap();
        assert!(equal(&qp2(3), &r.m_t, &ClosedSubgroup::Module(axis2)).unwrap());
        assert!(!r.product_open);
    }

    #[test]
    fn contraction_points_converge() {
        // orbit oracle: points of C(T) shrink under T^n, points of C(T^{-1}) grow
        let p = 2;
        let t = Automorphism::Product { primes: vec![2, 3], scalars: vec![qi(2), q(1, 3)] };
        let Automorphism::Product { scalars, .. } = t.power(24) else { unreachable!() };
        assert!(val(&(q(5, 7) * &scalars[0]), p) >= 24);
        assert!(val(&(q(5, 7) * &scalars[1]), 3) <= -24);
    }

    #[test]
    fn quotient_examples() {
        let pid = QpMatrix::diagonal(3, vec![qi(3), qi(3)]).unwrap();
        let axis1 = QpModule::coordinate_subspace(2, &[0]).unwrap();
        assert_eq!(quotient_action(&pid, &axis1).unwrap(), Automorphism::QpScalar { p: 3, q: qi(3) });
        let d = QpMatrix::diagonal(3, vec![qi(3), qi(1)]).unwrap();
        let axis2 = QpModule::coordinate_subspace(2, &[1]).unwrap();
        assert_eq!(quotient_action(&d, &axis2).unwrap(), Automorphism::QpScalar { p: 3, q: qi(3) });
        let diag_line = QpModule::line(vec![qi(1), qi(1)]).unwrap();
        match quotient_action(&d, &diag_line) {
            Err(ClabError::NotInvariant { image }) => assert_eq!(image, "(3, 1)"),
            other => panic!("{other:?}"),
        }
    }
}
