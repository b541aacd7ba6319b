//! Small dense complex linear-algebra helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Mat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(d: usize) -> Mat {
    Mat::identity(d, d)
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Row-major vectorisation: entry `(j,k)` goes to index `j*d + k`.
pub fn vectorize(x: &Mat) -> CVec {
    let (n, m) = x.shape();
    CVec::from_iterator(n * m, (0..n).flat_map(|j| (0..m).map(move |k| x[(j, k)])))
}

pub fn unvectorize(v: &CVec, d: usize) -> Mat {
    Mat::from_fn(d, d, |j, k| v[j * d + k])
}

/// `(1/d) tr(A† B)`.
pub fn hs_inner(a: &Mat, b: &Mat) -> C64 {
    let d = a.nrows() as f64;
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.conj() * y)
        .sum::<C64>()
        / d
}

pub fn max_abs(x: &Mat) -> f64 {
    x.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_vec(x: &CVec) -> f64 {
    x.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest singular value.
pub fn op_norm(x: &Mat) -> f64 {
    x.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Ratio of extreme singular values; infinite for singular input.
pub fn condition_number(x: &Mat) -> f64 {
    let sv = x.clone().singular_values();
    let hi = sv.iter().cloned().fold(0.0, f64::max);
    let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// `λ^n` for integer `n` by repeated multiplication or division.
pub fn ipow(z: C64, n: i64) -> C64 {
    let mut acc = C64::new(1.0, 0.0);
    let base = if n < 0 { C64::new(1.0, 0.0) / z } else { z };
    for _ in 0..n.unsigned_abs() {
        acc *= base;
    }
    acc
}

/// Phase in `(-π, π]`, with round-off imaginary parts treated as zero.
pub fn phase(z: C64) -> f64 {
    if z.im.abs() <= 1e-12 * z.norm().max(1e-300) {
        if z.re < 0.0 {
            std::f64::consts::PI
        } else {
            0.0
        }
    } else {
        z.arg()
    }
}

pub fn to_pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn from_pair(p: [f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

pub fn mat_to_rows(m: &Mat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| to_pair(m[(i, j)])).collect())
        .collect()
}

pub fn rows_to_mat(rows: &[Vec<[f64; 2]>]) -> Result<Mat, String> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err("ragged matrix".into());
    }
    Ok(Mat::from_fn(n, m, |i, j| from_pair(rows[i][j])))
}

pub fn vec_to_pairs(v: &CVec) -> Vec<[f64; 2]> {
    v.iter().map(|z| to_pair(*z)).collect()
}

pub fn pairs_to_vec(p: &[[f64; 2]]) -> CVec {
    CVec::from_iterator(p.len(), p.iter().map(|x| from_pair(*x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vectorisation_is_row_major() {
        let x = Mat::from_fn(2, 2, |j, k| r((10 * j + k) as f64));
        let v = vectorize(&x);
        assert_eq!(v[1], r(1.0));
        assert_eq!(v[2], r(10.0));
        assert_eq!(unvectorize(&v, 2), x);
    }

    #[test]
    fn integer_powers() {
        assert_eq!(ipow(r(-0.5), 3), r(-0.125));
        assert_eq!(ipow(r(-0.5), -2), r(4.0));
        assert_eq!(ipow(r(0.0), 0), r(1.0));
    }

    #[test]
    fn phase_cleanup() {
        assert_eq!(phase(c(-0.5, -1e-18)), std::f64::consts::PI);
        assert_eq!(phase(c(0.5, 1e-18)), 0.0);
    }
}
