//! Vacuum functionals of tree tensor-network states.
//!
//! A binary tree `t` with an isometry `V` on every caret defines
//! `Φ(t): ℂ^d → (ℂ^d)^{⊗n}`. The vacuum functional is
//! `ω(M) = (1/d) tr(Φ(t)† M Φ(t))`, evaluated here by ascending operators
//! from the leaves: each caret maps its children `A, B` to `V†(A⊗B)V`.
//!
//! [`RootState::Cup`] is the alternative where the root caret carries the
//! maximally entangled pair `(1/√d) Σ|jj⟩` instead of `V` and a trace.
//! This is the vacuum *vector* used for rotation invariance.
//!
//! The oracle builds the full state vector and is only used to check the
//! engine on small trees.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::{self, BinaryTree, DyadicPartition, StdInterval};
use crate::fusion::{star_product, FusionTensor};
use crate::linalg::{self, c, identity, CVec, Mat, C64};
use crate::spectral::{Isometry3Box, SpectralData};

/// Default cap on the oracle's state-vector length `d^n`.
pub const DEFAULT_ORACLE_CAP: usize = 1 << 20;
/// Environment variable overriding [`DEFAULT_ORACLE_CAP`].
pub const ORACLE_CAP_ENV: &str = "TFT_ORACLE_CAP";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("oracle size exceeded: d^n = {needed} > cap {cap}")]
    OracleSizeExceeded { needed: f64, cap: usize },
    #[error("leaf {0} not in forest")]
    LeafNotInForest(usize),
    #[error("label {0} not found among the leaves")]
    LabelNotFound(String),
    #[error("two operators placed on leaf {0}")]
    DuplicateLeaf(usize),
    #[error("the cup root needs at least one caret")]
    CupNeedsCaret,
    #[error("eigen-operator ascent through a right child needs a SWAP-symmetric isometry")]
    NotSwapSymmetric,
    #[error("invalid forest: {0}")]
    InvalidForest(String),
    #[error("unknown operator {0:?}")]
    UnknownOperator(String),
}

pub type Result<T> = std::result::Result<T, TreeError>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RootState {
    /// `V` at the root, closed by `(1/d) tr`.
    #[default]
    Trace,
    /// `(1/√d) Σ|jj⟩` on the two children of the root.
    Cup,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LeafLabel {
    Interval(StdInterval),
    Opaque(String),
}

impl std::fmt::Display for LeafLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LeafLabel::Interval(i) => write!(f, "{i}"),
            LeafLabel::Opaque(s) => write!(f, "{s}"),
        }
    }
}

/// A tree with a label and an optional operator on every leaf.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelledTree {
    tree: BinaryTree,
    labels: Vec<LeafLabel>,
    ops: Vec<Option<Mat>>,
}

impl LabelledTree {
    pub fn new(tree: BinaryTree, labels: Vec<LeafLabel>, ops: Vec<Option<Mat>>) -> Result<Self> {
        let n = tree.leaf_count();
        if labels.len() != n || ops.len() != n {
            return Err(TreeError::DimensionMismatch(format!(
                "{n} leaves, {} labels, {} ops",
                labels.len(),
                ops.len()
            )));
        }
        Ok(Self { tree, labels, ops })
    }

    /// Leaves labelled by the tree's own partition, all identity.
    pub fn natural(tree: BinaryTree) -> Self {
        let labels = tree
            .intervals()
            .into_iter()
            .map(LeafLabel::Interval)
            .collect::<Vec<_>>();
        let ops = vec![None; labels.len()];
        Self { tree, labels, ops }
    }

    /// Leaves labelled by arbitrary intervals (an image partition), all identity.
    pub fn with_labels(tree: BinaryTree, labels: &[StdInterval]) -> Result<Self> {
        let labels = labels
            .iter()
            .cloned()
            .map(LeafLabel::Interval)
            .collect::<Vec<_>>();
        let n = labels.len();
        Self::new(tree, labels, vec![None; n])
    }

    pub fn tree(&self) -> &BinaryTree {
        &self.tree
    }

    pub fn labels(&self) -> &[LeafLabel] {
        &self.labels
    }

    pub fn ops(&self) -> &[Option<Mat>] {
        &self.ops
    }

    pub fn leaf_count(&self) -> usize {
        self.labels.len()
    }

    pub fn set_op(&mut self, leaf: usize, op: Mat) -> Result<()> {
        let slot = self
            .ops
            .get_mut(leaf)
            .ok_or(TreeError::LabelNotFound(format!("leaf #{leaf}")))?;
        if slot.is_some() {
            return Err(TreeError::DuplicateLeaf(leaf));
        }
        *slot = Some(op);
        Ok(())
    }

    /// Puts `op` on the leaf labelled `interval`.
    pub fn place(&mut self, interval: &StdInterval, op: Mat) -> Result<()> {
        let want = LeafLabel::Interval(interval.clone());
        let leaf = self
            .labels
            .iter()
            .position(|l| *l == want)
            .ok_or_else(|| TreeError::LabelNotFound(interval.to_string()))?;
        self.set_op(leaf, op)
    }

    pub fn clear_ops(&mut self) {
        self.ops.iter_mut().for_each(|o| *o = None);
    }
}

// ---------------------------------------------------------------------------
// Engine

fn check_ops(ops: &[Option<Mat>], d: usize) -> Result<()> {
    for (i, op) in ops.iter().enumerate() {
        if let Some(m) = op {
            if m.shape() != (d, d) {
                return Err(TreeError::DimensionMismatch(format!(
                    "leaf {i} op is {:?}, expected {d}x{d}",
                    m.shape()
                )));
            }
        }
    }
    Ok(())
}

fn ascend(t: &BinaryTree, ops: &[Option<Mat>], next: &mut usize, v: &Isometry3Box) -> Option<Mat> {
    match t {
        BinaryTree::Leaf => {
            *next += 1;
            ops[*next - 1].clone()
        }
        BinaryTree::Caret(l, r) => {
            let a = ascend(l, ops, next, v);
            let b = ascend(r, ops, next, v);
            if a.is_none() && b.is_none() {
                return None;
            }
            let id = identity(v.d());
            Some(v.fuse(a.as_ref().unwrap_or(&id), b.as_ref().unwrap_or(&id)))
        }
    }
}

/// Engine evaluation on a bare tree with per-leaf operators.
pub fn evaluate(
    tree: &BinaryTree,
    ops: &[Option<Mat>],
    v: &Isometry3Box,
    root: RootState,
) -> Result<C64> {
    if ops.len() != tree.leaf_count() {
        return Err(TreeError::DimensionMismatch(format!(
            "{} ops for {} leaves",
            ops.len(),
            tree.leaf_count()
        )));
    }
    let d = v.d();
    check_ops(ops, d)?;
    let mut next = 0;
    match root {
        RootState::Trace => Ok(match ascend(tree, ops, &mut next, v) {
            None => c(1.0, 0.0),
            Some(m) => m.trace() / d as f64,
        }),
        RootState::Cup => {
            let BinaryTree::Caret(l, r) = tree else {
                return Err(TreeError::CupNeedsCaret);
            };
            let id = identity(d);
            let a = ascend(l, ops, &mut next, v).unwrap_or_else(|| id.clone());
            let b = ascend(r, ops, &mut next, v).unwrap_or(id);
            Ok((a * b.transpose()).trace() / d as f64)
        }
    }
}

/// `ω(M) = (1/d) tr(Φ(t)† M Φ(t))` by bottom-up operator ascent.
pub fn vacuum_expectation(t: &LabelledTree, v: &Isometry3Box) -> Result<C64> {
    evaluate(&t.tree, &t.ops, v, RootState::Trace)
}

pub fn vacuum_expectation_with_root(
    t: &LabelledTree,
    v: &Isometry3Box,
    root: RootState,
) -> Result<C64> {
    evaluate(&t.tree, &t.ops, v, root)
}

/// The state represented by a vacuum tree of `shape` whose leaves sit on
/// `image_labels`; `insertions` are placed by label.
pub fn transformed_expectation(
    shape: &BinaryTree,
    image_labels: &[StdInterval],
    insertions: &[(StdInterval, Mat)],
    v: &Isometry3Box,
) -> Result<C64> {
    transformed_expectation_with_root(shape, image_labels, insertions, v, RootState::Trace)
}

pub fn transformed_expectation_with_root(
    shape: &BinaryTree,
    image_labels: &[StdInterval],
    insertions: &[(StdInterval, Mat)],
    v: &Isometry3Box,
    root: RootState,
) -> Result<C64> {
    let mut t = LabelledTree::with_labels(shape.clone(), image_labels)?;
    for (i, op) in insertions {
        t.place(i, op.clone())?;
    }
    vacuum_expectation_with_root(&t, v, root)
}

/// The same ascent written in eigen-coordinates: leaves carry coefficient
/// vectors over the field labels (absent = the identity label 0), carets
/// multiply with the star product, and the root pairs with `moments`.
pub fn coefficient_expectation(
    tree: &BinaryTree,
    leaves: &[Option<CVec>],
    f: &FusionTensor,
    moments: &[C64],
) -> Result<C64> {
    let n = f.len();
    if leaves.len() != tree.leaf_count() {
        return Err(TreeError::DimensionMismatch(format!(
            "{} leaves given for {}",
            leaves.len(),
            tree.leaf_count()
        )));
    }
    if moments.len() != n || leaves.iter().flatten().any(|x| x.len() != n) {
        return Err(TreeError::DimensionMismatch(format!(
            "coefficient vectors must have length {n}"
        )));
    }
    let mut unit = CVec::zeros(n);
    unit[0] = c(1.0, 0.0);
    fn go(
        t: &BinaryTree,
        leaves: &[Option<CVec>],
        next: &mut usize,
        f: &FusionTensor,
        unit: &CVec,
    ) -> Option<CVec> {
        match t {
            BinaryTree::Leaf => {
                *next += 1;
                leaves[*next - 1].clone()
            }
            BinaryTree::Caret(l, r) => {
                let a = go(l, leaves, next, f, unit);
                let b = go(r, leaves, next, f, unit);
                if a.is_none() && b.is_none() {
                    return None;
                }
                Some(star_product(
                    a.as_ref().unwrap_or(unit),
                    b.as_ref().unwrap_or(unit),
                    f,
                ))
            }
        }
    }
    let mut next = 0;
    Ok(match go(tree, leaves, &mut next, f, &unit) {
        None => moments[0],
        Some(v) => v.iter().zip(moments).map(|(a, b)| a * b).sum(),
    })
}

// ---------------------------------------------------------------------------
// Oracle

/// Current oracle cap, honouring the environment override.
pub fn oracle_cap() -> usize {
    std::env::var(ORACLE_CAP_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_ORACLE_CAP)
}

/// Full state vectors of a tree network.
#[derive(Clone, Debug)]
pub struct OracleState {
    d: usize,
    n: usize,
    /// Trace root: `Φ(t)|i⟩` for each `i`, weighted `1/d`. Cup root: a single vector.
    vectors: Vec<CVec>,
    weight: f64,
}

fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    let nb = b.len();
    CVec::from_fn(a.len() * nb, |i, _| a[i / nb] * b[i % nb])
}

fn column_states(t: &BinaryTree, v: &Isometry3Box) -> Vec<CVec> {
    let d = v.d();
    match t {
        BinaryTree::Leaf => (0..d)
            .map(|i| {
                let mut e = CVec::zeros(d);
                e[i] = c(1.0, 0.0);
                e
            })
            .collect(),
        BinaryTree::Caret(l, r) => {
            let ls = column_states(l, v);
            let rs = column_states(r, v);
            let len = ls[0].len() * rs[0].len();
            let mut out = vec![CVec::zeros(len); d];
            for j in 0..d {
                for k in 0..d {
                    let prod = kron_vec(&ls[j], &rs[k]);
                    for (i, o) in out.iter_mut().enumerate() {
                        let w = v.entry(j, k, i);
                        if w != c(0.0, 0.0) {
                            o.axpy(w, &prod, c(1.0, 0.0));
                        }
                    }
                }
            }
            out
        }
    }
}

impl OracleState {
    pub fn build(tree: &BinaryTree, v: &Isometry3Box, root: RootState) -> Result<Self> {
        Self::build_with_cap(tree, v, root, oracle_cap())
    }

    pub fn build_with_cap(
        tree: &BinaryTree,
        v: &Isometry3Box,
        root: RootState,
        cap: usize,
    ) -> Result<Self> {
        let d = v.d();
        let n = tree.leaf_count();
        let needed = (d as f64).powi(n as i32);
        if needed > cap as f64 {
            return Err(TreeError::OracleSizeExceeded { needed, cap });
        }
        let (vectors, weight) = match root {
            RootState::Trace => (column_states(tree, v), 1.0 / d as f64),
            RootState::Cup => {
                let BinaryTree::Caret(l, r) = tree else {
                    return Err(TreeError::CupNeedsCaret);
                };
                let ls = column_states(l, v);
                let rs = column_states(r, v);
                let mut psi = CVec::zeros(ls[0].len() * rs[0].len());
                for j in 0..d {
                    psi += kron_vec(&ls[j], &rs[j]);
                }
                psi /= c((d as f64).sqrt(), 0.0);
                (vec![psi], 1.0)
            }
        };
        Ok(Self {
            d,
            n,
            vectors,
            weight,
        })
    }

    /// Applies `a` to tensor factor `site` (0 = leftmost leaf).
    fn apply_site(&self, psi: &CVec, site: usize, a: &Mat) -> CVec {
        let d = self.d;
        let right = d.pow((self.n - site - 1) as u32);
        let left = d.pow(site as u32);
        let mut out = CVec::zeros(psi.len());
        for x in 0..left {
            for y in 0..right {
                for i in 0..d {
                    let mut acc = c(0.0, 0.0);
                    for j in 0..d {
                        acc += a[(i, j)] * psi[(x * d + j) * right + y];
                    }
                    out[(x * d + i) * right + y] = acc;
                }
            }
        }
        out
    }

    /// `Σ w ⟨ψ| M |ψ⟩` with `M` the tensor product of the leaf operators.
    pub fn expectation(&self, ops: &[Option<Mat>]) -> Result<C64> {
        if ops.len() != self.n {
            return Err(TreeError::DimensionMismatch(format!(
                "{} ops for {} leaves",
                ops.len(),
                self.n
            )));
        }
        check_ops(ops, self.d)?;
        let mut total = c(0.0, 0.0);
        for psi in &self.vectors {
            let mut phi = psi.clone();
            for (s, op) in ops.iter().enumerate() {
                if let Some(a) = op {
                    phi = self.apply_site(&phi, s, a);
                }
            }
            total += psi.dotc(&phi);
        }
        Ok(total * self.weight)
    }

    /// Reduced density matrix on the given increasing sites, by partial trace
    /// of the full state. Indices follow the order of `sites`.
    pub fn reduced_density(&self, sites: &[usize]) -> Mat {
        let d = self.d;
        let k = sites.len();
        let dk = d.pow(k as u32);
        let rest = d.pow((self.n - k) as u32);
        let kept_site: Vec<bool> = (0..self.n).map(|s| sites.contains(&s)).collect();
        // (kept, other) coordinates of every basis index.
        let coords: Vec<(usize, usize)> = (0..d.pow(self.n as u32))
            .map(|x| {
                let (mut kept, mut other, mut y, mut kw, mut ow) = (0, 0, x, 1, 1);
                for s in (0..self.n).rev() {
                    let dg = y % d;
                    y /= d;
                    if kept_site[s] {
                        kept += dg * kw;
                        kw *= d;
                    } else {
                        other += dg * ow;
                        ow *= d;
                    }
                }
                (kept, other)
            })
            .collect();
        let mut rho = Mat::zeros(dk, dk);
        for psi in &self.vectors {
            let mut blocks = Mat::zeros(dk, rest);
            for (x, &(kept, other)) in coords.iter().enumerate() {
                blocks[(kept, other)] = psi[x];
            }
            rho += &blocks * blocks.adjoint();
        }
        rho * c(self.weight, 0.0)
    }
}

/// Brute-force `(1/d) Σ_i ⟨Φ(t)i| M |Φ(t)i⟩`.
pub fn oracle_expectation(t: &LabelledTree, v: &Isometry3Box) -> Result<C64> {
    oracle_expectation_with_root(t, v, RootState::Trace)
}

pub fn oracle_expectation_with_root(
    t: &LabelledTree,
    v: &Isometry3Box,
    root: RootState,
) -> Result<C64> {
    OracleState::build(&t.tree, v, root)?.expectation(&t.ops)
}

// ---------------------------------------------------------------------------
// Forests

/// Trees hanging below the intervals of a coarse partition; their leaves,
/// read left to right, form a finer partition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Forest {
    trees: Vec<BinaryTree>,
}

impl Forest {
    pub fn new(trees: Vec<BinaryTree>) -> Result<Self> {
        if trees.is_empty() {
            return Err(TreeError::InvalidForest("empty forest".into()));
        }
        Ok(Self { trees })
    }

    /// The forest taking `coarse` to `fine`; `fine` must refine `coarse`.
    pub fn between(coarse: &DyadicPartition, fine: &DyadicPartition) -> Result<Self> {
        if !dyadic::is_refinement(coarse, fine) {
            return Err(TreeError::InvalidForest(format!(
                "{fine} does not refine {coarse}"
            )));
        }
        let mut trees = Vec::with_capacity(coarse.len());
        let ivs = fine.intervals();
        let mut start = 0;
        for root in coarse.intervals() {
            let end = start
                + ivs[start..]
                    .iter()
                    .take_while(|i| i.is_within(root))
                    .count();
            let t = dyadic::tree_below(&ivs[start..end], root)
                .map_err(|e| TreeError::InvalidForest(e.to_string()))?;
            trees.push(t);
            start = end;
        }
        Ok(Self { trees })
    }

    pub fn trees(&self) -> &[BinaryTree] {
        &self.trees
    }

    pub fn leaf_count(&self) -> usize {
        self.trees.iter().map(BinaryTree::leaf_count).sum()
    }

    /// Root index and the left(false)/right(true) steps from the leaf upwards.
    fn path(&self, leaf: usize) -> Result<(usize, Vec<bool>)> {
        fn down(t: &BinaryTree, k: usize, steps: &mut Vec<bool>) {
            if let BinaryTree::Caret(l, r) = t {
                let nl = l.leaf_count();
                if k < nl {
                    down(l, k, steps);
                    steps.push(false);
                } else {
                    down(r, k - nl, steps);
                    steps.push(true);
                }
            }
        }
        let mut k = leaf;
        for (i, t) in self.trees.iter().enumerate() {
            let n = t.leaf_count();
            if k < n {
                let mut steps = Vec::new();
                down(t, k, &mut steps);
                return Ok((i, steps));
            }
            k -= n;
        }
        Err(TreeError::LeafNotInForest(leaf))
    }
}

pub enum ForestOp<'a> {
    /// The eigen-operator `μ^α`.
    Eigen {
        label: usize,
        spectral: &'a SpectralData,
    },
    General(Mat),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ascent {
    pub root: usize,
    /// Power of `λ_α` picked up (0 for general operators).
    pub power: u32,
    pub op: Mat,
}

/// Conjugates an operator at a fine leaf by the forest's isometries.
pub fn ascend_through_forest(
    op: ForestOp<'_>,
    leaf: usize,
    forest: &Forest,
    v: &Isometry3Box,
) -> Result<Ascent> {
    let (root, steps) = forest.path(leaf)?;
    match op {
        ForestOp::Eigen { label, spectral } => {
            if steps.iter().any(|&right| right) && !v.is_swap_symmetric() {
                return Err(TreeError::NotSwapSymmetric);
            }
            Ok(Ascent {
                root,
                power: steps.len() as u32,
                op: spectral.mu(label),
            })
        }
        ForestOp::General(mut m) => {
            check_ops(&[Some(m.clone())], v.d())?;
            for right in steps {
                m = if right {
                    v.ascend_right(&m)
                } else {
                    v.ascend_left(&m)
                };
            }
            Ok(Ascent {
                root,
                power: 0,
                op: m,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// JSON

/// Operator slot in a serialized tree: absent, a named field, or a matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OpDoc {
    Named(String),
    Matrix(Vec<Vec<[f64; 2]>>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabelledTreeDoc {
    pub tree: BinaryTree,
    pub labels: Vec<String>,
    pub ops: Vec<Option<OpDoc>>,
}

impl LabelledTree {
    pub fn to_doc(&self) -> LabelledTreeDoc {
        LabelledTreeDoc {
            tree: self.tree.clone(),
            labels: self.labels.iter().map(ToString::to_string).collect(),
            ops: self
                .ops
                .iter()
                .map(|o| o.as_ref().map(|m| OpDoc::Matrix(linalg::mat_to_rows(m))))
                .collect(),
        }
    }

    /// Named operators are looked up with `resolve`.
    pub fn from_doc(doc: &LabelledTreeDoc, resolve: impl Fn(&str) -> Option<Mat>) -> Result<Self> {
        let labels = doc
            .labels
            .iter()
            .map(|s| match s.parse::<StdInterval>() {
                Ok(i) => LeafLabel::Interval(i),
                Err(_) => LeafLabel::Opaque(s.clone()),
            })
            .collect();
        let ops = doc
            .ops
            .iter()
            .map(|o| match o {
                None => Ok(None),
                Some(OpDoc::Named(s)) => resolve(s)
                    .map(Some)
                    .ok_or_else(|| TreeError::UnknownOperator(s.clone())),
                Some(OpDoc::Matrix(rows)) => linalg::rows_to_mat(rows)
                    .map(Some)
                    .map_err(TreeError::DimensionMismatch),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(doc.tree.clone(), labels, ops)
    }
}
