//! Fusion map `F(X,Y) = V†(X⊗Y)V`, its structure constants in an
//! eigenbasis, the star product they define, and the derived 0/1 fusion ring.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, c, CVec, Mat, C64};
use crate::spectral::{Isometry3Box, SpectralData};

pub const TOL_FUSION: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("no isometry in model")]
    NoIsometry,
    #[error("fusion tensor shape mismatch: {0}")]
    Shape(String),
}

/// Structure constants `f^{αβ}_γ`, stored densely in `[α][β][γ]` order.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionTensor {
    labels: Vec<String>,
    coeffs: Vec<C64>,
}

impl FusionTensor {
    pub fn new(labels: Vec<String>, coeffs: Vec<C64>) -> Result<Self, FusionError> {
        let n = labels.len();
        if coeffs.len() != n * n * n {
            return Err(FusionError::Shape(format!(
                "{} entries for {n} labels",
                coeffs.len()
            )));
        }
        Ok(Self { labels, coeffs })
    }

    /// From nested `[α][β][γ]` arrays.
    pub fn from_nested(labels: Vec<String>, f: &[Vec<Vec<C64>>]) -> Result<Self, FusionError> {
        let n = labels.len();
        let ok = f.len() == n
            && f.iter()
                .all(|a| a.len() == n && a.iter().all(|b| b.len() == n));
        if !ok {
            return Err(FusionError::Shape(format!("expected {n}x{n}x{n}")));
        }
        Self::new(labels, f.iter().flatten().flatten().copied().collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, a: usize, b: usize, g: usize) -> C64 {
        let n = self.len();
        self.coeffs[(a * n + b) * n + g]
    }

    /// The matrix `[f^α]_{βγ}`.
    pub fn slice(&self, a: usize) -> Mat {
        Mat::from_fn(self.len(), self.len(), |b, g| self.get(a, b, g))
    }

    pub fn nested(&self) -> Vec<Vec<Vec<C64>>> {
        let n = self.len();
        (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| (0..n).map(|g| self.get(a, b, g)).collect())
                    .collect()
            })
            .collect()
    }

    pub fn to_doc(&self) -> FusionDoc {
        FusionDoc {
            labels: self.labels.clone(),
            coefficients: self
                .nested()
                .iter()
                .map(|a| {
                    a.iter()
                        .map(|b| b.iter().map(|z| linalg::to_pair(*z)).collect())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: &FusionDoc) -> Result<Self, FusionError> {
        let nested: Vec<Vec<Vec<C64>>> = doc
            .coefficients
            .iter()
            .map(|a| {
                a.iter()
                    .map(|b| b.iter().map(|p| linalg::from_pair(*p)).collect())
                    .collect()
            })
            .collect();
        Self::from_nested(doc.labels.clone(), &nested)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionDoc {
    pub labels: Vec<String>,
    pub coefficients: Vec<Vec<Vec<[f64; 2]>>>,
}

pub fn fuse(v: &Isometry3Box, x: &Mat, y: &Mat) -> Mat {
    v.fuse(x, y)
}

/// `f^{αβ}_γ = (ν^γ, F(μ^α, μ^β))`.
pub fn fusion_coefficients(
    v: &Isometry3Box,
    s: &SpectralData,
    labels: Vec<String>,
) -> FusionTensor {
    let n = s.len();
    let mus: Vec<Mat> = (0..n).map(|a| s.mu(a)).collect();
    let mut coeffs = Vec::with_capacity(n * n * n);
    for ma in &mus {
        for mb in &mus {
            coeffs.extend(s.expand(&v.fuse(ma, mb)));
        }
    }
    FusionTensor { labels, coeffs }
}

/// `a ⋆ b = Σ a_α b_β f^{αβ}_γ e_γ`.
pub fn star_product(a: &CVec, b: &CVec, f: &FusionTensor) -> CVec {
    let n = f.len();
    let mut out = CVec::zeros(n);
    for (i, x) in a.iter().enumerate() {
        if *x == c(0.0, 0.0) {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            if *y == c(0.0, 0.0) {
                continue;
            }
            let w = x * y;
            for g in 0..n {
                out[g] += w * f.get(i, j, g);
            }
        }
    }
    out
}

/// Support pattern of `f` and the integer matrices it defines.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionRing {
    pub labels: Vec<String>,
    /// `N^{αβ}_γ` in `[α][β][γ]` order.
    pub n_tensor: Vec<Vec<Vec<u8>>>,
    /// `[N^α]_{βγ} = N^{αβ}_γ`.
    pub ring_matrices: Vec<Vec<Vec<i64>>>,
    /// Associativity of the support pattern read over the boolean semiring.
    pub is_associative: bool,
    /// Associativity of the integer algebra `φ_α φ_β = Σ N^{αβ}_γ φ_γ`.
    pub is_associative_integer: bool,
    pub is_commutative: bool,
    pub matrices_commute: bool,
    /// Associativity of the complex algebra with structure constants `f`.
    pub complex_associative: bool,
}

impl FusionRing {
    pub fn n(&self, a: usize, b: usize, g: usize) -> u8 {
        self.n_tensor[a][b][g]
    }
}

pub fn build_ring(f: &FusionTensor) -> FusionRing {
    build_ring_with_tol(f, TOL_FUSION)
}

pub fn build_ring_with_tol(f: &FusionTensor, tol: f64) -> FusionRing {
    let n = f.len();
    let nt: Vec<Vec<Vec<u8>>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    (0..n)
                        .map(|g| (f.get(a, b, g).norm() > tol) as u8)
                        .collect()
                })
                .collect()
        })
        .collect();
    let ring_matrices: Vec<Vec<Vec<i64>>> = nt
        .iter()
        .map(|m| {
            m.iter()
                .map(|r| r.iter().map(|&x| x as i64).collect())
                .collect()
        })
        .collect();

    // (a b) c versus a (b c), both read as sums over intermediate labels.
    let mut assoc_bool = true;
    let mut assoc_int = true;
    let mut assoc_complex = true;
    let complex_scale = f.coeffs.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for a in 0..n {
        for b in 0..n {
            for cc in 0..n {
                for e in 0..n {
                    let mut lhs = 0i64;
                    let mut rhs = 0i64;
                    let mut lz = c(0.0, 0.0);
                    let mut rz = c(0.0, 0.0);
                    for m in 0..n {
                        lhs += nt[a][b][m] as i64 * nt[m][cc][e] as i64;
                        rhs += nt[b][cc][m] as i64 * nt[a][m][e] as i64;
                        lz += f.get(a, b, m) * f.get(m, cc, e);
                        rz += f.get(b, cc, m) * f.get(a, m, e);
                    }
                    assoc_bool &= (lhs > 0) == (rhs > 0);
                    assoc_int &= lhs == rhs;
                    assoc_complex &= (lz - rz).norm() <= 1e-9 * complex_scale * complex_scale;
                }
            }
        }
    }
    let is_commutative = (0..n).all(|a| (0..n).all(|b| nt[a][b] == nt[b][a]));
    let mats: Vec<Mat> = (0..n)
        .map(|a| Mat::from_fn(n, n, |b, g| c(nt[a][b][g] as f64, 0.0)))
        .collect();
    let matrices_commute = mats.iter().all(|x| mats.iter().all(|y| x * y == y * x));
    FusionRing {
        labels: f.labels.clone(),
        n_tensor: nt,
        ring_matrices,
        is_associative: assoc_bool,
        is_associative_integer: assoc_int,
        is_commutative,
        matrices_commute,
        complex_associative: assoc_complex,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::r;

    fn trivial(n: usize) -> FusionTensor {
        // φ_a ⋆ φ_b = φ_{a+b mod n}
        let labels = (0..n).map(|i| i.to_string()).collect();
        let mut coeffs = vec![c(0.0, 0.0); n * n * n];
        for a in 0..n {
            for b in 0..n {
                coeffs[(a * n + b) * n + (a + b) % n] = r(1.0);
            }
        }
        FusionTensor::new(labels, coeffs).unwrap()
    }

    #[test]
    fn group_algebra_ring() {
        let ring = build_ring(&trivial(3));
        assert!(ring.is_associative && ring.is_associative_integer && ring.is_commutative);
        assert!(ring.matrices_commute && ring.complex_associative);
        assert_eq!(
            ring.ring_matrices[0],
            vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]
        );
    }

    #[test]
    fn star_basis_case() {
        let f = trivial(3);
        let e = |i: usize| {
            let mut v = CVec::zeros(3);
            v[i] = r(1.0);
            v
        };
        assert_eq!(star_product(&e(1), &e(2), &f), e(0));
        assert_eq!(star_product(&e(0), &e(2), &f), e(2));
    }

    #[test]
    fn shape_mismatch() {
        assert!(FusionTensor::new(vec!["a".into()], vec![]).is_err());
        let bad = vec![vec![vec![r(1.0)], vec![r(1.0)]]];
        assert!(FusionTensor::from_nested(vec!["a".into()], &bad).is_err());
    }
}
