//! Closed subgroups of ℚₚⁿ as (vector part) ⊕ (ℤₚ-lattice part).
//!
//! A closed subgroup of ℚₚⁿ is a closed ℤₚ-submodule, which always splits as a
//! ℚₚ-subspace `V` plus a finitely generated ℤₚ-lattice meeting `V` only in 0.
//! Two normal forms are kept:
//!
//! * the canonical (Hermite) form, used for equality, membership and reports;
//! * the adapted frame (Smith form over ℤₚ), a unimodular basis `u_1..u_n` of
//!   ℤₚⁿ in which the module is `⊕ ℚₚ u_i ⊕ ⊕ p^{a_i} ℤₚ u_i`. Because the frame
//!   is unimodular it is an isometry for the max norm, so distances and ball
//!   intersections are read off coordinate by coordinate.

use num_traits::Zero;

use crate::error::{ClabError, Result};
use crate::linalg::{self, Matrix};
use crate::padic::{self, p_power, residue_rep, val, valuation, ExactRational as Q, Valuation};

/// Pivot convention recorded in reports.
pub const PIVOT_RULE: &str = "top-row/lowest-column/min-valuation/unit-normalized-v1";

/// A closed subgroup of ℚₚⁿ given by generators.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QpModule {
    dim: usize,
    vectors: Vec<Vec<Q>>,
    lattice: Vec<Vec<Q>>,
    canonical: bool,
}

/// How a frame direction contributes to the module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// The whole line `ℚₚ u_i`.
    Vector,
    /// The lattice `p^a ℤₚ u_i`.
    Lattice(i64),
    /// Not present.
    Absent,
}

/// A norm-adapted frame for a module: columns of `basis` are `u_i`.
#[derive(Debug, Clone)]
pub struct Frame {
    p: u64,
    basis: Matrix,
    coords: Matrix,
    slots: Vec<Slot>,
}

impl QpModule {
    /// Builds a module from vector-part and lattice-part generator columns.
    ///
    /// Vector generators must be linearly independent; lattice generators may
    /// be redundant (they are reduced by [`QpModule::canonicalize`]).
    pub fn new(dim: usize, vectors: Vec<Vec<Q>>, lattice: Vec<Vec<Q>>) -> Result<Self> {
        if dim == 0 {
            return Err(ClabError::Malformed("dimension must be >= 1".into()));
        }
        for c in vectors.iter().chain(&lattice) {
            if c.len() != dim {
                return Err(ClabError::Malformed(format!(
                    "generator of length {} in dimension {dim}",
                    c.len()
                )));
            }
        }
        let vectors: Vec<_> = vectors.into_iter().collect();
        if linalg::rank(&vectors, dim) < vectors.len() {
            return Err(ClabError::Malformed("vector generators are linearly dependent".into()));
        }
        let lattice = lattice.into_iter().filter(|c| !linalg::is_zero_vec(c)).collect();
        Ok(QpModule { dim, vectors, lattice, canonical: false })
    }

    pub fn zero(dim: usize) -> Self {
        QpModule { dim, vectors: vec![], lattice: vec![], canonical: true }
    }

    pub fn full(dim: usize) -> Self {
        QpModule { dim, vectors: linalg::identity(dim), lattice: vec![], canonical: true }
    }

    /// The line `ℚₚ · dir`.
    pub fn line(dir: Vec<Q>) -> Result<Self> {
        if linalg::is_zero_vec(&dir) {
            return Err(ClabError::Malformed("a line needs a nonzero direction".into()));
        }
        QpModule::new(dir.len(), vec![dir], vec![])
    }

    /// The ℤₚ-span of the given generators.
    pub fn lattice(dim: usize, gens: Vec<Vec<Q>>) -> Result<Self> {
        QpModule::new(dim, vec![], gens)
    }

    /// `span(e_i : i in coords)`.
    pub fn coordinate_subspace(dim: usize, coords: &[usize]) -> Result<Self> {
        if coords.iter().any(|&i| i >= dim) {
            return Err(ClabError::Malformed("coordinate index out of range".into()));
        }
        let mut idx = coords.to_vec();
        idx.sort_unstable();
        idx.dedup();
        QpModule::new(dim, idx.iter().map(|&i| linalg::unit_vec(dim, i)).collect(), vec![])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vectors(&self) -> &[Vec<Q>] {
        &self.vectors
    }

    pub fn lattice_gens(&self) -> &[Vec<Q>] {
        &self.lattice
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    pub fn vector_dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_zero(&self) -> bool {
        self.vectors.is_empty() && self.lattice.is_empty()
    }

    /// Deterministic normal form; equal closed subgroups give identical output.
    pub fn canonicalize(&self, p: u64) -> QpModule {
        if self.canonical {
            return self.clone();
        }
        let n = self.dim;
        let (vectors, vpivots) = column_rref(&self.vectors, n);
        let mut lat: Vec<Vec<Q>> = self
            .lattice
            .iter()
            .map(|l| project_off(l, &vectors, &vpivots))
            .filter(|l| !linalg::is_zero_vec(l))
            .collect();

        let mut done: Vec<(usize, i64, Vec<Q>)> = Vec::new();
        for row in 0..n {
            if vpivots.contains(&row) || lat.is_empty() {
                continue;
            }
            let best = lat
                .iter()
                .enumerate()
                .filter(|(_, c)| !c[row].is_zero())
                .min_by_key(|(i, c)| (val(&c[row], p), *i))
                .map(|(i, _)| i);
            let Some(bi) = best else { continue };
            let mut piv = lat.remove(bi);
            let v = val(&piv[row], p);
            let pv = p_power(p, v);
            let unit = &piv[row] / &pv;
            piv = linalg::scale(&piv, &unit.recip());
            for c in lat.iter_mut() {
                if !c[row].is_zero() {
                    let f = &c[row] / &pv;
                    linalg::axpy_sub(c, &f, &piv);
                }
            }
            lat.retain(|c| !linalg::is_zero_vec(c));
            for (_, _, c) in done.iter_mut() {
                let e = c[row].clone();
                let rep = residue_rep(&e, p, v);
                let f = (e - rep) / &pv;
                linalg::axpy_sub(c, &f, &piv);
            }
            done.push((row, v, piv));
        }
        debug_assert!(lat.is_empty());
        QpModule {
            dim: n,
            vectors,
            lattice: done.into_iter().map(|(_, _, c)| c).collect(),
            canonical: true,
        }
    }

    /// True when `x` lies in the vector part `V`.
    pub fn in_vector_span(&self, x: &[Q]) -> bool {
        let (vectors, pivots) = column_rref(&self.vectors, self.dim);
        linalg::is_zero_vec(&project_off(x, &vectors, &pivots))
    }

    /// Exact membership test.
    pub fn contains_point(&self, p: u64, x: &[Q]) -> Result<bool> {
        if x.len() != self.dim {
            return Err(ClabError::AmbientMismatch(format!(
                "point of length {} against module in dimension {}",
                x.len(),
                self.dim
            )));
        }
        let c = self.canonicalize(p);
        let (_, vpivots) = column_rref(&c.vectors, c.dim);
        let mut r = project_off(x, &c.vectors, &vpivots);
        for l in &c.lattice {
            let row = first_nonzero(l).expect("canonical lattice columns are nonzero");
            if r[row].is_zero() {
                continue;
            }
            let coeff = &r[row] / &l[row];
            if matches!(valuation(&coeff, p), Valuation::Finite(v) if v < 0) {
                return Ok(false);
            }
            linalg::axpy_sub(&mut r, &coeff, l);
        }
        Ok(linalg::is_zero_vec(&r))
    }

    /// `other ⊆ self`.
    pub fn contains(&self, p: u64, other: &QpModule) -> Result<bool> {
        if other.dim != self.dim {
            return Err(ClabError::AmbientMismatch("modules of different dimension".into()));
        }
        for v in &other.vectors {
            if !self.in_vector_span(v) {
                return Ok(false);
            }
        }
        for l in &other.lattice {
            if !self.contains_point(p, l)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Equality by mutual inclusion.
    pub fn equals(&self, p: u64, other: &QpModule) -> Result<bool> {
        Ok(self.contains(p, other)? && other.contains(p, self)?)
    }

    /// Image under a linear map given as a matrix (rows).
    pub fn transform(&self, m: &Matrix) -> QpModule {
        QpModule {
            dim: self.dim,
            vectors: self.vectors.iter().map(|v| linalg::mat_vec(m, v)).collect(),
            lattice: self.lattice.iter().map(|v| linalg::mat_vec(m, v)).collect(),
            canonical: false,
        }
    }

    /// Norm-adapted (Smith) frame of the module.
    pub fn frame(&self, p: u64) -> Frame {
        Frame::compute(p, self)
    }
}

fn first_nonzero(v: &[Q]) -> Option<usize> {
    v.iter().position(|x| !x.is_zero())
}

/// Reduced column echelon form: each column has a 1 in its (topmost) pivot row
/// and every other column is zero there. Returns columns sorted by pivot row.
fn column_rref(cols: &[Vec<Q>], n: usize) -> (Vec<Vec<Q>>, Vec<usize>) {
    let mut remaining: Vec<Vec<Q>> = cols.to_vec();
    let mut done: Vec<Vec<Q>> = Vec::new();
    let mut pivots = Vec::new();
    for row in 0..n {
        let Some(j) = remaining.iter().position(|c| !c[row].is_zero()) else {
            continue;
        };
        let mut piv = remaining.remove(j);
        let inv = piv[row].recip();
        piv = linalg::scale(&piv, &inv);
        for c in remaining.iter_mut().chain(done.iter_mut()) {
            if !c[row].is_zero() {
                let f = c[row].clone();
                linalg::axpy_sub(c, &f, &piv);
            }
        }
        done.push(piv);
        pivots.push(row);
    }
    (done, pivots)
}

/// Projects `x` along the span of RREF columns onto the non-pivot coordinates.
fn project_off(x: &[Q], rref: &[Vec<Q>], pivots: &[usize]) -> Vec<Q> {
    let mut r = x.to_vec();
    for (c, &row) in rref.iter().zip(pivots) {
        if !r[row].is_zero() {
            let f = r[row].clone();
            linalg::axpy_sub(&mut r, &f, c);
        }
    }
    r
}

impl Frame {
    fn compute(p: u64, m: &QpModule) -> Frame {
        let n = m.dim;
        // rows of the working matrices; `g` accumulates the row operations
        let mut g = linalg::identity(n);
        let mut vcols: Vec<Vec<Q>> = m.vectors.clone();
        let mut lcols: Vec<Vec<Q>> = m.lattice.clone();

        let swap_rows = |a: usize, b: usize, g: &mut Matrix, vc: &mut Vec<Vec<Q>>, lc: &mut Vec<Vec<Q>>| {
            if a == b {
                return;
            }
            g.swap(a, b);
            for c in vc.iter_mut().chain(lc.iter_mut()) {
                c.swap(a, b);
            }
        };
        // row_t -> row_i - f * row_t applied to everything
        let row_sub = |i: usize, t: usize, f: &Q, g: &mut Matrix, vc: &mut Vec<Vec<Q>>, lc: &mut Vec<Vec<Q>>| {
            let grow = g[t].clone();
            linalg::axpy_sub(&mut g[i], f, &grow);
            for c in vc.iter_mut().chain(lc.iter_mut()) {
                if !c[t].is_zero() {
                    let d = f * &c[t];
                    c[i] -= d;
                }
            }
        };

        let dv = vcols.len();
        for t in 0..dv {
            let (r, j) = min_val_entry(p, &vcols[t..], t, n).expect("independent vector generators");
            let j = j + t;
            swap_rows(t, r, &mut g, &mut vcols, &mut lcols);
            vcols.swap(t, j);
            let inv = vcols[t][t].recip();
            vcols[t] = linalg::scale(&vcols[t], &inv);
            for i in t + 1..n {
                if !vcols[t][i].is_zero() {
                    let f = vcols[t][i].clone();
                    row_sub(i, t, &f, &mut g, &mut vcols, &mut lcols);
                }
            }
            let pivot = vcols[t].clone();
            for c in vcols[t + 1..].iter_mut().chain(lcols.iter_mut()) {
                if !c[t].is_zero() {
                    let f = c[t].clone();
                    linalg::axpy_sub(c, &f, &pivot);
                }
            }
        }

        lcols.retain(|c| !linalg::is_zero_vec(c));
        let mut slots = vec![Slot::Absent; n];
        for s in slots.iter_mut().take(dv) {
            *s = Slot::Vector;
        }
        let mut t = dv;
        let mut k = 0;
        while k < lcols.len() && t < n {
            let Some((r, j)) = min_val_entry(p, &lcols[k..], t, n) else {
                break;
            };
            let j = j + k;
            swap_rows(t, r, &mut g, &mut vcols, &mut lcols);
            lcols.swap(k, j);
            let a = val(&lcols[k][t], p);
            let pa = p_power(p, a);
            let unit = &lcols[k][t] / &pa;
            lcols[k] = linalg::scale(&lcols[k], &unit.recip());
            for i in t + 1..n {
                if !lcols[k][i].is_zero() {
                    let f = &lcols[k][i] / &pa;
                    row_sub(i, t, &f, &mut g, &mut vcols, &mut lcols);
                }
            }
            let pivot = lcols[k].clone();
            for c in lcols[k + 1..].iter_mut() {
                if !c[t].is_zero() {
                    let f = &c[t] / &pa;
                    linalg::axpy_sub(c, &f, &pivot);
                }
            }
            slots[t] = Slot::Lattice(a);
            t += 1;
            k += 1;
        }
        let basis = linalg::inverse(&g).expect("row operations are invertible");
        Frame { p, basis, coords: g, slots }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// Frame vector `u_i` (a column of a matrix in GL_n(ℤₚ)).
    pub fn direction(&self, i: usize) -> Vec<Q> {
        self.basis.iter().map(|r| r[i].clone()).collect()
    }

    /// Coordinates of `x` in the frame.
    pub fn coordinates(&self, x: &[Q]) -> Vec<Q> {
        linalg::mat_vec(&self.coords, x)
    }

    /// `min_{h in H} |x - h|` in the max norm.
    pub fn dist_point(&self, x: &[Q]) -> Q {
        let c = self.coordinates(x);
        let mut best = Q::zero();
        for (ci, slot) in c.iter().zip(&self.slots) {
            let contrib = match (slot, valuation(ci, self.p)) {
                (_, Valuation::Infinite) | (Slot::Vector, _) => continue,
                (Slot::Lattice(a), Valuation::Finite(v)) if v >= *a => continue,
                (_, Valuation::Finite(v)) => p_power(self.p, -v),
            };
            if contrib > best {
                best = contrib;
            }
        }
        best
    }

    /// Exponents `s_i` with `H ∩ B̄(0, p^{-j}) = ⊕ p^{s_i} ℤₚ u_i`.
    pub fn ball_exponents(&self, j: i64) -> Vec<Option<i64>> {
        self.slots
            .iter()
            .map(|s| match s {
                Slot::Vector => Some(j),
                Slot::Lattice(a) => Some((*a).max(j)),
                Slot::Absent => None,
            })
            .collect()
    }

    /// ℤₚ-generators of `H ∩ B̄(0, p^{-j})`.
    pub fn ball_generators(&self, j: i64) -> Vec<Vec<Q>> {
        self.ball_exponents(j)
            .into_iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|s| linalg::scale(&self.direction(i), &p_power(self.p, s))))
            .collect()
    }

    /// Largest norm of an element of the module, `None` when unbounded.
    pub fn sup_norm(&self) -> Option<Q> {
        let mut best = Q::zero();
        for s in &self.slots {
            match s {
                Slot::Vector => return None,
                Slot::Lattice(a) => {
                    let nrm = p_power(self.p, -a);
                    if nrm > best {
                        best = nrm;
                    }
                }
                Slot::Absent => {}
            }
        }
        Some(best)
    }

    pub fn lattice_exponents(&self) -> Vec<i64> {
        self.slots
            .iter()
            .filter_map(|s| match s {
                Slot::Lattice(a) => Some(*a),
                _ => None,
            })
            .collect()
    }
}

/// Entry of minimal valuation among `cols` restricted to rows `>= from`;
/// ties broken by (row, column). Returns (row, column index in `cols`).
fn min_val_entry(p: u64, cols: &[Vec<Q>], from: usize, n: usize) -> Option<(usize, usize)> {
    let mut best: Option<(i64, usize, usize)> = None;
    for (j, c) in cols.iter().enumerate() {
        for (r, x) in c.iter().enumerate().take(n).skip(from) {
            if x.is_zero() {
                continue;
            }
            let v = val(x, p);
            let key = (v, r, j);
            if best.as_ref().is_none_or(|b| key < *b) {
                best = Some(key);
            }
        }
    }
    best.map(|(_, r, j)| (r, j))
}

/// Unit check helper for callers building frames by hand.
pub fn is_unimodular(p: u64, m: &Matrix) -> bool {
    let det = linalg::determinant(m);
    if det.is_zero() {
        return false;
    }
    m.iter().flatten().all(|x| padic::valuation(x, p) >= Valuation::Finite(0))
        && valuation(&det, p) == Valuation::Finite(0)
}

/// `H ∩ B̄(0, p^{-j})` as a canonical lattice module.
pub fn ball_module(p: u64, m: &QpModule, j: i64) -> QpModule {
    let f = m.frame(p);
    QpModule {
        dim: m.dim,
        vectors: vec![],
        lattice: f.ball_generators(j),
        canonical: false,
    }
    .canonicalize(p)
}
