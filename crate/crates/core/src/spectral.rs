//! The ascending channel `E(X) = V†(X⊗I)V` of a 3-box isometry and its
//! biorthonormal eigensystem.
//!
//! Operators on `ℂ^d` are stored as row-major vectors of length `d²`, so the
//! channel is a `d²×d²` matrix over the matrix units `E_jk`. Abstract models
//! supply an `n×n` channel directly; their "operators" are plain coordinate
//! vectors and the pairing drops the `1/d`.

use nalgebra::linalg::{Schur, SVD};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    self, c, identity, kron, max_abs, phase, unvectorize, vectorize, CVec, Mat, C64,
};

pub const TOL_ISOMETRY: f64 = 1e-12;
pub const TOL_ZERO: f64 = 1e-12;
pub const COND_LIMIT: f64 = 1e8;
const TOL_CLUSTER: f64 = 1e-7;
const TOL_NULL: f64 = 1e-7;
const TOL_PIVOT: f64 = 1e-8;
const TOL_EIGEN: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("not an isometry: residual ‖V†V − I‖ = {residual:.3e}")]
    NotAnIsometry { residual: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("defective or near-defective channel (condition number {condition:.3e})")]
    Defective { condition: f64 },
    #[error("eigenvalue solver did not converge")]
    NoConvergence,
    #[error("zero ascending weight excluded")]
    ZeroWeight,
    #[error("pinned basis element {index} is not an eigenvector (residual {residual:.3e})")]
    PinnedNotEigen { index: usize, residual: f64 },
    #[error("pinned basis must start with the identity")]
    PinnedNoIdentity,
    #[error("invalid document: {0}")]
    Document(String),
}

pub type Result<T> = std::result::Result<T, SpectralError>;

// ---------------------------------------------------------------------------

/// An isometry `V: ℂ^d → ℂ^d ⊗ ℂ^d`, entry `⟨jk|V|l⟩` at row `j*d + k`, column `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct Isometry3Box {
    d: usize,
    v: Mat,
    vt: Mat,
}

impl Isometry3Box {
    pub fn new(d: usize, v: Mat) -> Result<Self> {
        if d < 2 {
            return Err(SpectralError::Shape(format!("local dimension {d} < 2")));
        }
        if v.shape() != (d * d, d) {
            return Err(SpectralError::Shape(format!(
                "expected {}x{d}, got {:?}",
                d * d,
                v.shape()
            )));
        }
        let residual = max_abs(&(v.adjoint() * &v - identity(d)));
        if !(residual <= TOL_ISOMETRY) {
            return Err(SpectralError::NotAnIsometry { residual });
        }
        let vt = v.adjoint();
        Ok(Self { d, v, vt })
    }

    /// Builds from a function of `(j, k, l)` giving `⟨jk|V|l⟩`.
    pub fn from_fn(d: usize, f: impl Fn(usize, usize, usize) -> C64) -> Result<Self> {
        Self::new(d, Mat::from_fn(d * d, d, |row, l| f(row / d, row % d, l)))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &Mat {
        &self.v
    }

    pub fn entry(&self, j: usize, k: usize, l: usize) -> C64 {
        self.v[(j * self.d + k, l)]
    }

    /// `V†(X⊗Y)V`.
    pub fn fuse(&self, x: &Mat, y: &Mat) -> Mat {
        &self.vt * kron(x, y) * &self.v
    }

    /// `E(X) = V†(X⊗I)V`: an operator on the left child ascends.
    pub fn ascend_left(&self, x: &Mat) -> Mat {
        self.fuse(x, &identity(self.d))
    }

    /// `E'(X) = V†(I⊗X)V`: an operator on the right child ascends.
    pub fn ascend_right(&self, x: &Mat) -> Mat {
        self.fuse(&identity(self.d), x)
    }

    /// Largest deviation `|⟨jk|V|l⟩ − ⟨kj|V|l⟩|`.
    pub fn swap_deviation(&self) -> f64 {
        let d = self.d;
        let mut dev: f64 = 0.0;
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    dev = dev.max((self.entry(j, k, l) - self.entry(k, j, l)).norm());
                }
            }
        }
        dev
    }

    pub fn is_swap_symmetric(&self) -> bool {
        self.swap_deviation() <= 1e-12
    }
}

// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelOrigin {
    Isometry,
    Abstract,
}

/// Linear map on operator space, stored over a fixed basis.
#[derive(Clone, Debug, PartialEq)]
pub struct AscendingChannel {
    matrix: Mat,
    local_dim: Option<usize>,
    origin: ChannelOrigin,
}

pub fn build_channel(v: &Isometry3Box) -> AscendingChannel {
    let d = v.d();
    let n = d * d;
    let mut m = Mat::zeros(n, n);
    for j in 0..d {
        for k in 0..d {
            let mut e = Mat::zeros(d, d);
            e[(j, k)] = c(1.0, 0.0);
            m.set_column(j * d + k, &vectorize(&v.ascend_left(&e)));
        }
    }
    AscendingChannel {
        matrix: m,
        local_dim: Some(d),
        origin: ChannelOrigin::Isometry,
    }
}

impl AscendingChannel {
    /// A channel given directly by its matrix over label coordinates.
    pub fn abstract_channel(matrix: Mat) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(SpectralError::Shape(format!(
                "channel matrix must be square, got {:?}",
                matrix.shape()
            )));
        }
        Ok(Self {
            matrix,
            local_dim: None,
            origin: ChannelOrigin::Abstract,
        })
    }

    /// An operator-space channel given by its `d²×d²` matrix over matrix units.
    pub fn operator_channel(d: usize, matrix: Mat) -> Result<Self> {
        if matrix.shape() != (d * d, d * d) {
            return Err(SpectralError::Shape(format!(
                "expected {0}x{0}, got {1:?}",
                d * d,
                matrix.shape()
            )));
        }
        Ok(Self {
            matrix,
            local_dim: Some(d),
            origin: ChannelOrigin::Isometry,
        })
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn local_dim(&self) -> Option<usize> {
        self.local_dim
    }

    pub fn origin(&self) -> ChannelOrigin {
        self.origin
    }

    /// Scale of the pairing `(a,b) = s·a†b`: `1/d` on operator space, 1 otherwise.
    pub fn pairing_scale(&self) -> f64 {
        self.local_dim.map_or(1.0, |d| 1.0 / d as f64)
    }

    /// The identity operator, or the first label coordinate for abstract channels.
    pub fn unit_vector(&self) -> CVec {
        match self.local_dim {
            Some(d) => vectorize(&identity(d)),
            None => {
                let mut v = CVec::zeros(self.dim());
                v[0] = c(1.0, 0.0);
                v
            }
        }
    }

    pub fn apply_vec(&self, v: &CVec) -> CVec {
        &self.matrix * v
    }

    /// `E(X)` on a `d×d` operator.
    pub fn apply(&self, x: &Mat) -> Mat {
        let d = self.local_dim.expect("operator channel");
        unvectorize(&self.apply_vec(&vectorize(x)), d)
    }

    /// `max |E(I) − I|`.
    pub fn unitality_residual(&self) -> f64 {
        let u = self.unit_vector();
        linalg::max_abs_vec(&(self.apply_vec(&u) - &u))
    }

    /// Eigenvalues from a Schur form, without any diagonalisability requirement.
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        let s = Schur::try_new(self.matrix.clone(), f64::EPSILON, 0)
            .ok_or(SpectralError::NoConvergence)?;
        let (_, t) = s.unpack();
        Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
    }
}

// ---------------------------------------------------------------------------

/// Eigenvalues with right eigenvectors `μ^α` and biorthonormal duals `ν^α`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralData {
    eigenvalues: Vec<C64>,
    right: Vec<CVec>,
    left: Vec<CVec>,
    zero_mask: Vec<bool>,
    local_dim: Option<usize>,
    pinned: bool,
}

impl SpectralData {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, a: usize) -> C64 {
        self.eigenvalues[a]
    }

    pub fn zero_mask(&self) -> &[bool] {
        &self.zero_mask
    }

    pub fn is_pinned(&self) -> bool {
        self.pinned
    }

    pub fn local_dim(&self) -> Option<usize> {
        self.local_dim
    }

    pub fn pairing_scale(&self) -> f64 {
        self.local_dim.map_or(1.0, |d| 1.0 / d as f64)
    }

    pub fn right_vec(&self, a: usize) -> &CVec {
        &self.right[a]
    }

    pub fn left_vec(&self, a: usize) -> &CVec {
        &self.left[a]
    }

    /// `μ^α` as a `d×d` matrix.
    pub fn mu(&self, a: usize) -> Mat {
        unvectorize(&self.right[a], self.local_dim.expect("operator spectrum"))
    }

    /// `ν^α` as a `d×d` matrix.
    pub fn nu(&self, a: usize) -> Mat {
        unvectorize(&self.left[a], self.local_dim.expect("operator spectrum"))
    }

    pub fn pair(&self, a: &CVec, b: &CVec) -> C64 {
        a.dotc(b) * self.pairing_scale()
    }

    /// Coefficients `c_α = (ν^α, v)`.
    pub fn expand_vec(&self, v: &CVec) -> Vec<C64> {
        self.left.iter().map(|l| self.pair(l, v)).collect()
    }

    pub fn expand(&self, m: &Mat) -> Vec<C64> {
        self.expand_vec(&vectorize(m))
    }

    pub fn reconstruct_vec(&self, coeffs: &[C64]) -> CVec {
        let mut v = CVec::zeros(self.right[0].len());
        for (c, r) in coeffs.iter().zip(&self.right) {
            v += r * *c;
        }
        v
    }

    pub fn reconstruct(&self, coeffs: &[C64]) -> Mat {
        unvectorize(
            &self.reconstruct_vec(coeffs),
            self.local_dim.expect("operator spectrum"),
        )
    }

    /// Right eigenvectors supplied by the caller (in the given order), duals
    /// from the inverse, eigenvalues from the biorthogonal Rayleigh quotient.
    pub fn from_pinned_basis(e: &AscendingChannel, basis: &[CVec]) -> Result<Self> {
        let n = e.dim();
        if basis.len() != n || basis.iter().any(|b| b.len() != n) {
            return Err(SpectralError::Shape(format!(
                "pinned basis needs {n} vectors of length {n}"
            )));
        }
        if e.local_dim.is_some() && linalg::max_abs_vec(&(&basis[0] - e.unit_vector())) > 1e-14 {
            return Err(SpectralError::PinnedNoIdentity);
        }
        let mut s = assemble(e, basis.to_vec())?;
        for a in 0..n {
            let res =
                linalg::max_abs_vec(&(e.apply_vec(&s.right[a]) - &s.right[a] * s.eigenvalues[a]));
            if res > TOL_EIGEN {
                return Err(SpectralError::PinnedNotEigen {
                    index: a,
                    residual: res,
                });
            }
        }
        s.pinned = true;
        Ok(s)
    }
}

/// Builds duals and eigenvalues for a chosen right basis.
fn assemble(e: &AscendingChannel, right: Vec<CVec>) -> Result<SpectralData> {
    let n = e.dim();
    let x = Mat::from_columns(&right);
    let condition = linalg::condition_number(&x);
    if !(condition <= COND_LIMIT) {
        return Err(SpectralError::Defective { condition });
    }
    let inv = x.try_inverse().ok_or(SpectralError::Defective {
        condition: f64::INFINITY,
    })?;
    let scale = e.pairing_scale();
    let left: Vec<CVec> = (0..n)
        .map(|a| inv.row(a).adjoint() / c(scale, 0.0))
        .collect();
    let mut eigenvalues: Vec<C64> = (0..n)
        .map(|a| (inv.row(a) * e.apply_vec(&right[a]))[(0, 0)])
        .collect();
    let unit = e.unit_vector();
    if e.local_dim.is_some() && right[0] == unit {
        eigenvalues[0] = c(1.0, 0.0);
    }
    let zero_mask = eigenvalues.iter().map(|l| l.norm() <= TOL_ZERO).collect();
    Ok(SpectralData {
        eigenvalues,
        right,
        left,
        zero_mask,
        local_dim: e.local_dim,
        pinned: false,
    })
}

/// Sort key: descending modulus, then ascending phase, each with a tolerance.
fn order(a: C64, b: C64) -> std::cmp::Ordering {
    let (ma, mb) = (a.norm(), b.norm());
    if (ma - mb).abs() > TOL_CLUSTER {
        return mb.total_cmp(&ma);
    }
    let (pa, pb) = (phase(a), phase(b));
    if (pa - pb).abs() > TOL_CLUSTER {
        return pa.total_cmp(&pb);
    }
    std::cmp::Ordering::Equal
}

/// Reduced row echelon form of the rows of `rows` (k vectors of length n);
/// returns the canonical rows in pivot order.
fn rref(mut rows: Vec<CVec>) -> Vec<CVec> {
    let k = rows.len();
    let n = rows.first().map_or(0, |r| r.len());
    let mut pivot_row = 0;
    for col in 0..n {
        if pivot_row == k {
            break;
        }
        let (best, val) =
            (pivot_row..k)
                .map(|r| (r, rows[r][col].norm()))
                .fold(
                    (pivot_row, -1.0),
                    |acc, x| if x.1 > acc.1 { x } else { acc },
                );
        if val <= TOL_PIVOT {
            continue;
        }
        rows.swap(pivot_row, best);
        let p = rows[pivot_row][col];
        rows[pivot_row] /= p;
        rows[pivot_row][col] = c(1.0, 0.0);
        for r in 0..k {
            if r != pivot_row {
                let f = rows[r][col];
                if f != c(0.0, 0.0) {
                    let sub = &rows[pivot_row] * f;
                    rows[r] -= sub;
                    rows[r][col] = c(0.0, 0.0);
                }
            }
        }
        pivot_row += 1;
    }
    rows.truncate(pivot_row);
    rows
}

/// Generic eigendecomposition; see the module docs for conventions.
pub fn eigendecompose(e: &AscendingChannel) -> Result<SpectralData> {
    let n = e.dim();
    let a = e.matrix();
    let scale = e.pairing_scale();
    let norm_a = linalg::op_norm(a).max(1.0);
    let mut values = e.eigenvalues()?;
    values.sort_by(|x, y| {
        order(*x, *y)
            .then(x.re.total_cmp(&y.re))
            .then(x.im.total_cmp(&y.im))
    });

    // Single-linkage clusters of numerically equal eigenvalues.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= TOL_CLUSTER * norm_a {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut clusters: Vec<Vec<C64>> = Vec::new();
    let mut root_of: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_of[r] {
            Some(ci) => clusters[ci].push(values[i]),
            None => {
                root_of[r] = Some(clusters.len());
                clusters.push(vec![values[i]]);
            }
        }
    }
    let mut means: Vec<(C64, usize)> = clusters
        .iter()
        .map(|cl| (cl.iter().sum::<C64>() / c(cl.len() as f64, 0.0), cl.len()))
        .collect();
    let unit = e.unit_vector();
    let is_unit_cluster = |m: C64| (m - c(1.0, 0.0)).norm() <= TOL_CLUSTER * norm_a;
    means.sort_by(|x, y| {
        is_unit_cluster(y.0)
            .cmp(&is_unit_cluster(x.0))
            .then(order(x.0, y.0))
            .then(x.0.re.total_cmp(&y.0.re))
            .then(x.0.im.total_cmp(&y.0.im))
    });

    let mut right: Vec<CVec> = Vec::with_capacity(n);
    for (lambda, k) in means {
        let shifted = a - Mat::identity(n, n) * lambda;
        let svd = SVD::new(shifted, false, true);
        let vt = svd.v_t.as_ref().ok_or(SpectralError::NoConvergence)?;
        let sv = &svd.singular_values;
        if sv[n - k] > TOL_NULL * norm_a {
            return Err(SpectralError::Defective {
                condition: f64::INFINITY,
            });
        }
        // Rows of V^T are conjugated right singular vectors.
        let null: Vec<CVec> = (n - k..n).map(|i| vt.row(i).adjoint()).collect();
        let mut candidates = Vec::new();
        let seeded = e.origin() == ChannelOrigin::Isometry && is_unit_cluster(lambda);
        if seeded {
            candidates.push(unit.clone());
        }
        candidates.extend(rref(null));
        let mut basis: Vec<CVec> = Vec::new();
        for mut v in candidates {
            for b in &basis {
                let p = b.dotc(&v) * scale;
                v -= b * p;
            }
            let nv = (v.dotc(&v).re * scale).sqrt();
            if nv <= TOL_PIVOT {
                continue;
            }
            v /= c(nv, 0.0);
            basis.push(v);
            if basis.len() == k {
                break;
            }
        }
        if basis.len() < k {
            return Err(SpectralError::Defective {
                condition: f64::INFINITY,
            });
        }
        for (i, mut v) in basis.into_iter().enumerate() {
            if !(seeded && i == 0) {
                let big = linalg::max_abs_vec(&v);
                if let Some(z) = v.iter().find(|z| z.norm() > 1e-9 * big).copied() {
                    v *= z.conj() / c(z.norm(), 0.0);
                }
            }
            right.push(v);
        }
    }
    assemble(e, right)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingDimension {
    pub h_real: f64,
    pub phase: f64,
}

/// `h = −log₂|λ|` with the phase of `λ` reported separately.
pub fn scaling_dimension(lambda: C64) -> Result<ScalingDimension> {
    if lambda.norm() <= TOL_ZERO {
        return Err(SpectralError::ZeroWeight);
    }
    Ok(ScalingDimension {
        h_real: -lambda.norm().log2(),
        phase: phase(lambda),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusReport {
    pub holds: bool,
    pub spectral_radius: f64,
    pub bound: f64,
}

/// `max|λ| ≤ ‖E(I)‖_∞ + 1e-10`. For abstract channels `E(I)` is the image of
/// the first label coordinate and the norm is its largest entry.
pub fn spectral_radius_check(e: &AscendingChannel) -> Result<RadiusReport> {
    let spectral_radius = e
        .eigenvalues()?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let image = e.apply_vec(&e.unit_vector());
    let bound = match e.local_dim() {
        Some(d) => linalg::op_norm(&unvectorize(&image, d)),
        None => linalg::max_abs_vec(&image),
    };
    Ok(RadiusReport {
        holds: spectral_radius <= bound + 1e-10,
        spectral_radius,
        bound,
    })
}

// ---------------------------------------------------------------------------
// JSON documents

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelDoc {
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_dimension: Option<usize>,
    pub origin: ChannelOrigin,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl AscendingChannel {
    pub fn to_doc(&self) -> ChannelDoc {
        ChannelDoc {
            dimension: self.dim(),
            local_dimension: self.local_dim,
            origin: self.origin,
            matrix: linalg::mat_to_rows(&self.matrix),
        }
    }

    pub fn from_doc(doc: &ChannelDoc) -> Result<Self> {
        let m = linalg::rows_to_mat(&doc.matrix).map_err(SpectralError::Document)?;
        if m.shape() != (doc.dimension, doc.dimension) {
            return Err(SpectralError::Document(
                "matrix does not match dimension".into(),
            ));
        }
        match doc.local_dimension {
            Some(d) => Self::operator_channel(d, m),
            None => Self::abstract_channel(m),
        }
        .map(|mut ch| {
            ch.origin = doc.origin;
            ch
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumDoc {
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_dimension: Option<usize>,
    pub pinned_basis: bool,
    pub eigenvalues: Vec<[f64; 2]>,
    pub right: Vec<Vec<[f64; 2]>>,
    pub left: Vec<Vec<[f64; 2]>>,
    pub zero_mask: Vec<bool>,
}

impl SpectralData {
    pub fn to_doc(&self) -> SpectrumDoc {
        SpectrumDoc {
            dimension: self.len(),
            local_dimension: self.local_dim,
            pinned_basis: self.pinned,
            eigenvalues: self
                .eigenvalues
                .iter()
                .map(|z| linalg::to_pair(*z))
                .collect(),
            right: self.right.iter().map(linalg::vec_to_pairs).collect(),
            left: self.left.iter().map(linalg::vec_to_pairs).collect(),
            zero_mask: self.zero_mask.clone(),
        }
    }

    pub fn from_doc(doc: &SpectrumDoc) -> Result<Self> {
        let n = doc.dimension;
        let ok = doc.eigenvalues.len() == n
            && doc.right.len() == n
            && doc.left.len() == n
            && doc.zero_mask.len() == n
            && doc.right.iter().chain(&doc.left).all(|v| v.len() == n);
        if !ok {
            return Err(SpectralError::Document(
                "inconsistent spectrum dimensions".into(),
            ));
        }
        Ok(Self {
            eigenvalues: doc
                .eigenvalues
                .iter()
                .map(|p| linalg::from_pair(*p))
                .collect(),
            right: doc.right.iter().map(|v| linalg::pairs_to_vec(v)).collect(),
            left: doc.left.iter().map(|v| linalg::pairs_to_vec(v)).collect(),
            zero_mask: doc.zero_mask.clone(),
            local_dim: doc.local_dimension,
            pinned: doc.pinned_basis,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::r;

    fn copy_isometry(d: usize) -> Isometry3Box {
        Isometry3Box::from_fn(d, |j, k, l| r((j == l && k == l) as u8 as f64)).unwrap()
    }

    #[test]
    fn rejects_non_isometry() {
        let v = Mat::from_element(4, 2, r(1.0));
        assert!(matches!(
            Isometry3Box::new(2, v),
            Err(SpectralError::NotAnIsometry { .. })
        ));
        assert!(matches!(
            Isometry3Box::new(2, Mat::zeros(3, 2)),
            Err(SpectralError::Shape(_))
        ));
    }

    #[test]
    fn copy_isometry_gives_diagonal_projection() {
        let v = copy_isometry(2);
        let e = build_channel(&v);
        let x = Mat::from_fn(2, 2, |j, k| c(j as f64 + 1.0, k as f64 - 0.5));
        let mut expect = Mat::zeros(2, 2);
        expect[(0, 0)] = x[(0, 0)];
        expect[(1, 1)] = x[(1, 1)];
        assert_eq!(e.apply(&x), expect);
        assert!(e.unitality_residual() < 1e-15);
    }

    #[test]
    fn identity_channel() {
        let e = AscendingChannel::operator_channel(2, Mat::identity(4, 4)).unwrap();
        let s = eigendecompose(&e).unwrap();
        assert!(s
            .eigenvalues()
            .iter()
            .all(|l| (l - c(1.0, 0.0)).norm() < 1e-14));
        assert_eq!(s.mu(0), identity(2));
        for a in 0..4 {
            for b in 0..4 {
                let p = s.pair(s.left_vec(a), s.right_vec(b));
                assert!((p - r((a == b) as u8 as f64)).norm() < 1e-12);
            }
        }
        assert!(spectral_radius_check(&e).unwrap().holds);
    }

    #[test]
    fn jordan_block_is_rejected() {
        let m = Mat::from_row_slice(2, 2, &[r(1.0), r(1.0), r(0.0), r(1.0)]);
        let e = AscendingChannel::abstract_channel(m).unwrap();
        assert!(matches!(
            eigendecompose(&e),
            Err(SpectralError::Defective { .. })
        ));
    }

    #[test]
    fn scaling_dimensions() {
        let h = scaling_dimension(r(1.0)).unwrap();
        assert_eq!((h.h_real, h.phase), (0.0, 0.0));
        let h = scaling_dimension(r(-0.5)).unwrap();
        assert_eq!((h.h_real, h.phase), (1.0, std::f64::consts::PI));
        assert_eq!(scaling_dimension(r(0.0)), Err(SpectralError::ZeroWeight));
    }

    #[test]
    fn rref_is_basis_independent() {
        let a = CVec::from_vec(vec![r(1.0), r(2.0), r(0.0)]);
        let b = CVec::from_vec(vec![r(0.0), r(1.0), c(0.0, 1.0)]);
        let one = rref(vec![a.clone(), b.clone()]);
        let two = rref(vec![&a + &b * c(2.0, 1.0), &a * c(0.0, 3.0) - &b]);
        for (x, y) in one.iter().zip(&two) {
            assert!(linalg::max_abs_vec(&(x - y)) < 1e-12);
        }
    }
}
