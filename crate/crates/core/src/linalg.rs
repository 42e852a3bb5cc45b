//! Small exact linear algebra over ℚ: column lists and square matrices.

use num_traits::{One, Zero};

use crate::padic::ExactRational as Q;

/// A square or rectangular matrix stored as rows.
pub type Matrix = Vec<Vec<Q>>;

pub fn zero_vec(n: usize) -> Vec<Q> {
    vec![Q::zero(); n]
}

pub fn unit_vec(n: usize, i: usize) -> Vec<Q> {
    let mut v = zero_vec(n);
    v[i] = Q::one();
    v
}

pub fn identity(n: usize) -> Matrix {
    (0..n).map(|i| unit_vec(n, i)).collect()
}

pub fn is_zero_vec(v: &[Q]) -> bool {
    v.iter().all(|x| x.is_zero())
}

pub fn scale(v: &[Q], c: &Q) -> Vec<Q> {
    v.iter().map(|x| x * c).collect()
}

/// `a -= c * b`
pub fn axpy_sub(a: &mut [Q], c: &Q, b: &[Q]) {
    if c.is_zero() {
        return;
    }
    for (x, y) in a.iter_mut().zip(b) {
        if !y.is_zero() {
            *x -= c * y;
        }
    }
}

pub fn sub(a: &[Q], b: &[Q]) -> Vec<Q> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn mat_vec(m: &Matrix, x: &[Q]) -> Vec<Q> {
    m.iter()
        .map(|row| {
            row.iter()
                .zip(x)
                .filter(|(a, b)| !a.is_zero() && !b.is_zero())
                .fold(Q::zero(), |acc, (a, b)| acc + a * b)
        })
        .collect()
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..n)
                .map(|j| {
                    row.iter()
                        .zip(b)
                        .fold(Q::zero(), |acc, (x, brow)| acc + x * &brow[j])
                })
                .collect()
        })
        .collect()
}

pub fn transpose(m: &Matrix) -> Matrix {
    let cols = m.first().map_or(0, |r| r.len());
    (0..cols)
        .map(|j| m.iter().map(|r| r[j].clone()).collect())
        .collect()
}

/// Matrix whose columns are the given vectors.
pub fn from_columns(cols: &[Vec<Q>], n: usize) -> Matrix {
    (0..n)
        .map(|i| cols.iter().map(|c| c[i].clone()).collect())
        .collect()
}

/// Exact inverse by Gauss-Jordan elimination; `None` when singular.
pub fn inverse(m: &Matrix) -> Option<Matrix> {
    let n = m.len();
    let mut a: Matrix = m.clone();
    let mut inv = identity(n);
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let piv = a[col][col].clone();
        for j in 0..n {
            a[col][j] /= &piv;
            inv[col][j] /= &piv;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                let (arow, invrow) = (a[col].clone(), inv[col].clone());
                axpy_sub(&mut a[r], &f, &arow);
                axpy_sub(&mut inv[r], &f, &invrow);
            }
        }
    }
    Some(inv)
}

pub fn determinant(m: &Matrix) -> Q {
    let n = m.len();
    let mut a = m.clone();
    let mut det = Q::one();
    for col in 0..n {
        let Some(pivot) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return Q::zero();
        };
        if pivot != col {
            a.swap(col, pivot);
            det = -det;
        }
        let piv = a[col][col].clone();
        det *= &piv;
        for r in col + 1..n {
            if !a[r][col].is_zero() {
                let f = &a[r][col] / &piv;
                let prow = a[col].clone();
                axpy_sub(&mut a[r], &f, &prow);
            }
        }
    }
    det
}

/// Rank of a list of column vectors of length `n`.
pub fn rank(cols: &[Vec<Q>], n: usize) -> usize {
    let mut rows = transpose(&from_columns(cols, n));
    let mut r = 0;
    let width = n;
    for c in 0..width {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let prow = rows[r].clone();
        for row in rows.iter_mut().skip(r + 1) {
            if !row[c].is_zero() {
                let f = &row[c] / &prow[c];
                axpy_sub(row, &f, &prow);
            }
        }
        r += 1;
    }
    r
}

pub fn mat_pow(m: &Matrix, k: u64) -> Matrix {
    let mut result = identity(m.len());
    let mut base = m.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            result = mat_mul(&result, &base);
        }
        base = mat_mul(&base, &base);
        e >>= 1;
    }
    result
}
