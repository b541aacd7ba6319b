//! Correlation functions of renormalised field insertions.
//!
//! A field of type `α` at `x` is represented on a partition `P` by
//! `λ_α^{log₂|I|} μ^α` on the interval `I ∈ P` containing `x`. On any partition
//! that separates the insertion points this gives the same vacuum value, so
//! the minimal supporting partition is used by default.
//!
//! All powers of `λ` are integer powers.

use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::{
    common_refinement, minimal_supporting_partition, BinaryTree, CirclePoint, DyadicError,
    DyadicPartition, DyadicRational, StdInterval, DEFAULT_MAX_LEVEL,
};
use crate::fusion::{FusionError, TOL_FUSION};
use crate::linalg::{self, c, ipow, CVec, Mat, C64};
use crate::models::{Model, ModelError, ModelKind};
use crate::spectral::TOL_ZERO;
use crate::thompson::{ThompsonElement, ThompsonError};
use crate::treestate::{self, OracleState, RootState, TreeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrelatorError {
    #[error("zero ascending weight excluded (field {0})")]
    ZeroWeight(String),
    #[error("field index {0} out of range")]
    LabelRange(usize),
    #[error("vacuum moments required")]
    MomentsRequired,
    #[error("closed form requires dyadic points")]
    NotDyadic,
    #[error("index out of range: {0}")]
    IndexRange(String),
    #[error("good partition search exhausted")]
    SearchExhausted,
    #[error("partition does not separate the insertions")]
    NotSupporting,
    #[error("invalid request: {0}")]
    Request(String),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Thompson(#[from] ThompsonError),
}

pub type Result<T> = std::result::Result<T, CorrelatorError>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldInsertion {
    pub position: CirclePoint,
    pub label: usize,
}

impl FieldInsertion {
    pub fn new(position: CirclePoint, label: usize) -> Self {
        Self { position, label }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum CorrelatorState {
    #[default]
    Vacuum,
    Transformed(ThompsonElement),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorrelatorRequest {
    pub insertions: Vec<FieldInsertion>,
    pub state: CorrelatorState,
}

/// A value together with the partition it was evaluated on (range side for
/// transformed states).
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub value: C64,
    pub partition: DyadicPartition,
}

fn check_labels(insertions: &[FieldInsertion], model: &Model) -> Result<()> {
    for ins in insertions {
        if ins.label >= model.len() {
            return Err(CorrelatorError::LabelRange(ins.label));
        }
        if model.eigenvalue(ins.label).norm() <= TOL_ZERO {
            return Err(CorrelatorError::ZeroWeight(
                model.labels()[ins.label].clone(),
            ));
        }
    }
    Ok(())
}

fn positions(insertions: &[FieldInsertion]) -> Vec<CirclePoint> {
    insertions.iter().map(|i| i.position.clone()).collect()
}

/// Evaluates insertions placed by label on a tree whose leaves carry `labels`
/// (in leaf order). Each insertion goes to the label containing it with
/// weight `λ^{−level}`.
fn evaluate_placed(
    shape: &BinaryTree,
    labels: &[StdInterval],
    insertions: &[FieldInsertion],
    model: &Model,
) -> Result<C64> {
    let mut slots: Vec<Option<(usize, i64)>> = vec![None; labels.len()];
    for ins in insertions {
        let k = labels
            .iter()
            .position(|j| j.contains_point(&ins.position))
            .ok_or_else(|| TreeError::LabelNotFound(ins.position.to_string()))?;
        if slots[k].is_some() {
            return Err(CorrelatorError::NotSupporting);
        }
        slots[k] = Some((ins.label, labels[k].level() as i64));
    }
    match (model.kind(), model.isometry()) {
        (ModelKind::Isometry, Some(v)) => {
            let ops: Vec<Option<Mat>> = slots
                .iter()
                .map(|s| s.map(|(a, l)| model.spectral().mu(a) * ipow(model.eigenvalue(a), -l)))
                .collect();
            Ok(treestate::evaluate(shape, &ops, v, RootState::Trace)?)
        }
        _ => {
            let moments = model
                .moments()
                .map_err(|_| CorrelatorError::MomentsRequired)?;
            let n = model.len();
            let leaves: Vec<Option<CVec>> = slots
                .iter()
                .map(|s| {
                    s.map(|(a, l)| {
                        let mut e = CVec::zeros(n);
                        e[a] = ipow(model.eigenvalue(a), -l);
                        e
                    })
                })
                .collect();
            Ok(treestate::coefficient_expectation(
                shape,
                &leaves,
                model.fusion(),
                &moments,
            )?)
        }
    }
}

/// Value on a caller-chosen partition that separates the points.
pub fn n_point_on(
    insertions: &[FieldInsertion],
    p: &DyadicPartition,
    model: &Model,
) -> Result<C64> {
    check_labels(insertions, model)?;
    if !p.supports(&positions(insertions)) {
        return Err(CorrelatorError::NotSupporting);
    }
    evaluate_placed(&p.to_tree(), p.intervals(), insertions, model)
}

/// Vacuum correlator on the minimal supporting partition.
pub fn n_point_vacuum(insertions: &[FieldInsertion], model: &Model) -> Result<C64> {
    Ok(n_point_vacuum_eval(insertions, model)?.value)
}

fn n_point_vacuum_eval(insertions: &[FieldInsertion], model: &Model) -> Result<Evaluation> {
    check_labels(insertions, model)?;
    let p = minimal_supporting_partition(&positions(insertions))?;
    let value = evaluate_placed(&p.to_tree(), p.intervals(), insertions, model)?;
    Ok(Evaluation {
        value,
        partition: p,
    })
}

/// Direct evaluation in the transformed state `π(f)Ω`: the vacuum tree is
/// built on the pulled-back partition and its leaves are relabelled by their
/// images, on which the insertions are placed.
pub fn n_point_transformed(
    f: &ThompsonElement,
    insertions: &[FieldInsertion],
    model: &Model,
) -> Result<Evaluation> {
    check_labels(insertions, model)?;
    let f = f.reduce();
    let msp = minimal_supporting_partition(&positions(insertions))?;
    let r = common_refinement(&msp, &f.range_partition());
    let pulled = f.pullback(&r)?;
    if pulled.iter().any(|p| p.0.level() > DEFAULT_MAX_LEVEL) {
        return Err(CorrelatorError::SearchExhausted);
    }
    let shape = DyadicPartition::new(pulled.iter().map(|p| p.0.clone()).collect())?.to_tree();
    let labels: Vec<StdInterval> = pulled.into_iter().map(|p| p.1).collect();
    let value = evaluate_placed(&shape, &labels, insertions, model)?;
    Ok(Evaluation {
        value,
        partition: r,
    })
}

pub fn n_point(req: &CorrelatorRequest, model: &Model) -> Result<Evaluation> {
    match &req.state {
        CorrelatorState::Vacuum => n_point_vacuum_eval(&req.insertions, model),
        CorrelatorState::Transformed(f) => n_point_transformed(f, &req.insertions, model),
    }
}

/// The same request evaluated by full state-vector contraction.
pub fn oracle_n_point(req: &CorrelatorRequest, model: &Model) -> Result<C64> {
    let v = model.require_isometry()?;
    check_labels(&req.insertions, model)?;
    let (shape, labels) = match &req.state {
        CorrelatorState::Vacuum => {
            let p = minimal_supporting_partition(&positions(&req.insertions))?;
            (p.to_tree(), p.intervals().to_vec())
        }
        CorrelatorState::Transformed(f) => {
            let f = f.reduce();
            let msp = minimal_supporting_partition(&positions(&req.insertions))?;
            let r = common_refinement(&msp, &f.range_partition());
            let pulled = f.pullback(&r)?;
            let shape =
                DyadicPartition::new(pulled.iter().map(|x| x.0.clone()).collect())?.to_tree();
            (shape, pulled.into_iter().map(|x| x.1).collect())
        }
    };
    let mut ops: Vec<Option<Mat>> = vec![None; labels.len()];
    for ins in &req.insertions {
        let k = labels
            .iter()
            .position(|j| j.contains_point(&ins.position))
            .expect("labels cover [0,1)");
        let l = labels[k].level() as i64;
        ops[k] = Some(model.spectral().mu(ins.label) * ipow(model.eigenvalue(ins.label), -l));
    }
    let state = OracleState::build(&shape, v, RootState::Trace)?;
    Ok(state.expectation(&ops)?)
}

// ---------------------------------------------------------------------------
// Closed forms

/// `Σ_γ λ_γ^{−1} D^{log₂λ_α + log₂λ_β − log₂λ_γ} f^{αβ}_γ v_γ` with
/// `D = 2^{−l−1}`, i.e. `(λ_αλ_β)^{−l−1} Σ_γ λ_γ^{l} f^{αβ}_γ v_γ`.
pub fn two_point_closed(
    x: &CirclePoint,
    y: &CirclePoint,
    a: usize,
    b: usize,
    model: &Model,
) -> Result<C64> {
    if x.as_dyadic().is_none() || y.as_dyadic().is_none() {
        return Err(CorrelatorError::NotDyadic);
    }
    if x == y {
        return Err(DyadicError::CoincidentInsertions(x.to_string()).into());
    }
    check_labels(
        &[
            FieldInsertion::new(x.clone(), a),
            FieldInsertion::new(y.clone(), b),
        ],
        model,
    )?;
    let (a, b) = if x < y { (a, b) } else { (b, a) };
    let l = x.common_prefix_len(y)? as i64;
    let moments = model
        .moments()
        .map_err(|_| CorrelatorError::MomentsRequired)?;
    let f = model.fusion();
    let mut sum = c(0.0, 0.0);
    for (g, m) in moments.iter().enumerate() {
        if f.get(a, b, g) == c(0.0, 0.0) || *m == c(0.0, 0.0) {
            continue;
        }
        sum += ipow(model.eigenvalue(g), l) * f.get(a, b, g) * m;
    }
    Ok(ipow(model.eigenvalue(a) * model.eigenvalue(b), -l - 1) * sum)
}

/// Unrenormalised two-point value of `μ^α, μ^β` on leaves `j < k` of the
/// regular depth-`m` tree:
/// `(λ_αλ_β)^{m+κ} Σ_γ f^{αβ}_γ λ_γ^{−κ−1} v_γ` with `κ = ⌊log₂(y⊖x)⌋`.
pub fn regular_two_point(m: u32, j: u64, k: u64, a: usize, b: usize, model: &Model) -> Result<C64> {
    if m > 62 || j >= k || k >= (1u64 << m) {
        return Err(CorrelatorError::IndexRange(format!(
            "need 0 ≤ j < k < 2^{m}, got j={j}, k={k}"
        )));
    }
    for &x in &[a, b] {
        if x >= model.len() {
            return Err(CorrelatorError::LabelRange(x));
        }
    }
    let kappa = (63 - (j ^ k).leading_zeros()) as i64 - m as i64;
    let moments = model
        .moments()
        .map_err(|_| CorrelatorError::MomentsRequired)?;
    let f = model.fusion();
    let mut sum = c(0.0, 0.0);
    for (g, v) in moments.iter().enumerate() {
        if f.get(a, b, g) == c(0.0, 0.0) || *v == c(0.0, 0.0) {
            continue;
        }
        sum += f.get(a, b, g) * ipow(model.eigenvalue(g), -kappa - 1) * v;
    }
    Ok(ipow(model.eigenvalue(a) * model.eigenvalue(b), m as i64 + kappa) * sum)
}

/// The same quantity by direct ascent on the regular tree.
pub fn regular_two_point_engine(
    m: u32,
    j: usize,
    k: usize,
    a: usize,
    b: usize,
    model: &Model,
) -> Result<C64> {
    let v = model.require_isometry()?;
    let n = 1usize << m;
    if j >= k || k >= n {
        return Err(CorrelatorError::IndexRange(format!(
            "need 0 ≤ j < k < 2^{m}, got j={j}, k={k}"
        )));
    }
    let mut ops = vec![None; n];
    ops[j] = Some(model.spectral().mu(a));
    ops[k] = Some(model.spectral().mu(b));
    Ok(treestate::evaluate(
        &BinaryTree::regular(m),
        &ops,
        v,
        RootState::Trace,
    )?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpeTerm {
    pub gamma: usize,
    pub label: String,
    #[serde(with = "pair")]
    pub coefficient: C64,
    /// `h_γ − h_α − h_β` with `h = −log₂|λ|`.
    pub exponent: f64,
    /// `(1/d) tr(μ^γ† F(μ^α, μ^β))`, the overlap with the undualised
    /// eigen-operator; only for isometry models.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_pair")]
    pub overlap: Option<C64>,
}

mod pair {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(C64::new(re, im))
    }
}

mod opt_pair {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    pub fn serialize<S: Serializer>(z: &Option<C64>, s: S) -> Result<S::Ok, S::Error> {
        z.map(|z| [z.re, z.im]).serialize(s)
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<C64>, D::Error> {
        Ok(Option::<[f64; 2]>::deserialize(d)?.map(|[re, im]| C64::new(re, im)))
    }
}

/// `φ^α(x) φ^β(y) ∼ Σ_γ f^{αβ}_γ D(x,y)^{h_γ−h_α−h_β} φ^γ(y)`, most divergent
/// term first; zero coefficients are dropped.
pub fn ope_terms(a: usize, b: usize, model: &Model) -> Result<Vec<OpeTerm>> {
    for &x in &[a, b] {
        if x >= model.len() {
            return Err(CorrelatorError::LabelRange(x));
        }
    }
    let h = |g: usize| -> Result<f64> {
        Ok(model
            .scaling_dimension(g)
            .map_err(|_| CorrelatorError::ZeroWeight(model.labels()[g].clone()))?
            .h_real)
    };
    let (ha, hb) = (h(a)?, h(b)?);
    let product = model
        .isometry()
        .map(|v| v.fuse(&model.spectral().mu(a), &model.spectral().mu(b)));
    let f = model.fusion();
    let mut terms = Vec::new();
    for g in 0..model.len() {
        let coefficient = f.get(a, b, g);
        if coefficient.norm() <= TOL_FUSION || model.eigenvalue(g).norm() <= TOL_ZERO {
            continue;
        }
        terms.push(OpeTerm {
            gamma: g,
            label: model.labels()[g].clone(),
            coefficient,
            exponent: h(g)? - ha - hb,
            overlap: product
                .as_ref()
                .map(|p| linalg::hs_inner(&model.spectral().mu(g), p)),
        });
    }
    terms.sort_by(|x, y| {
        x.exponent
            .total_cmp(&y.exponent)
            .then(x.gamma.cmp(&y.gamma))
    });
    Ok(terms)
}

// ---------------------------------------------------------------------------
// Smearing

/// Piecewise-constant operator-valued function: `values[i]` on
/// `[breakpoints[i], breakpoints[i+1])`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimpleFunction {
    pub breakpoints: Vec<DyadicRational>,
    pub values: Vec<Mat>,
}

impl SimpleFunction {
    pub fn constant(m: Mat) -> Self {
        Self {
            breakpoints: vec![DyadicRational::zero()],
            values: vec![m],
        }
    }

    pub fn new(breakpoints: Vec<DyadicRational>, values: Vec<Mat>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() || !breakpoints[0].is_zero()
        {
            return Err(CorrelatorError::Request(
                "pieces must start at 0 with one value each".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CorrelatorError::Request("breakpoints must increase".into()));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }
}

/// `ω(φ_P(f))` with `φ_P(f) = Σ_α Σ_{I∈P} f̄_α(I) λ_α^{log₂|I|} μ^α_I` and
/// `f̄_α(I) = ∫_I (ν^α, f(x)) dx`.
pub fn smeared_expectation(f: &SimpleFunction, p: &DyadicPartition, model: &Model) -> Result<C64> {
    let v = model.require_isometry()?;
    let s = model.spectral();
    let n = f.breakpoints.len();
    let tree = p.to_tree();
    let leaves = p.len();
    let mut total = c(0.0, 0.0);
    for (idx, iv) in p.intervals().iter().enumerate() {
        for a in 0..s.len() {
            let lam = s.eigenvalue(a);
            if lam.norm() <= TOL_ZERO {
                continue;
            }
            let nu = s.nu(a);
            let mut fbar = c(0.0, 0.0);
            for i in 0..n {
                let lo = f.breakpoints[i].to_rational();
                let hi = if i + 1 < n {
                    f.breakpoints[i + 1].to_rational()
                } else {
                    num_rational::BigRational::from_integer(1.into())
                };
                let w = iv.overlap(&lo, &hi).to_f64().unwrap_or(0.0);
                if w != 0.0 {
                    fbar += linalg::hs_inner(&nu, &f.values[i]) * w;
                }
            }
            if fbar == c(0.0, 0.0) {
                continue;
            }
            let mut ops = vec![None; leaves];
            ops[idx] = Some(s.mu(a));
            let one = treestate::evaluate(&tree, &ops, v, RootState::Trace)?;
            total += fbar * ipow(lam, -(iv.level() as i64)) * one;
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Staircase

#[derive(Clone, Debug, PartialEq)]
pub struct StaircaseRow {
    pub y: DyadicRational,
    pub value: C64,
}

/// Two-point values `C(x_fixed, y)` for `y = k/2^grid`, each evaluated on the
/// minimal supporting partition refined to the regular level `depth`. The
/// grid point equal to `x_fixed`, if any, is skipped.
pub fn staircase_samples(
    x_fixed: &CirclePoint,
    a: usize,
    b: usize,
    depth: u32,
    grid: u32,
    model: &Model,
) -> Result<Vec<StaircaseRow>> {
    if grid > 24 || depth > 24 {
        return Err(CorrelatorError::Request(
            "grid and depth are limited to 24".into(),
        ));
    }
    let regular = DyadicPartition::regular(depth);
    let rows: Vec<Result<Option<StaircaseRow>>> = (0u64..(1u64 << grid))
        .into_par_iter()
        .map(|k| {
            let y = DyadicRational::new(k, grid)?;
            let yp = y.to_point();
            if &yp == x_fixed {
                return Ok(None);
            }
            let mut ins = vec![
                FieldInsertion::new(x_fixed.clone(), a),
                FieldInsertion::new(yp, b),
            ];
            ins.sort_by(|p, q| p.position.cmp(&q.position));
            let msp = minimal_supporting_partition(&positions(&ins))?;
            let p = common_refinement(&msp, &regular);
            Ok(Some(StaircaseRow {
                y,
                value: n_point_on(&ins, &p, model)?,
            }))
        })
        .collect();
    rows.into_iter().filter_map(|r| r.transpose()).collect()
}

pub fn staircase_csv(rows: &[StaircaseRow]) -> String {
    let mut out = String::from("y,re,im,abs\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.y,
            r.value.re,
            r.value.im,
            r.value.norm()
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Requests as JSON

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InsertionDoc {
    /// `"p/q"`, `"a/2^l"` or a binary fraction `"0.bbb"`.
    pub at: String,
    /// Field name, alias or index.
    pub field: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestDoc {
    pub insertions: Vec<InsertionDoc>,
    /// A generator word, tree-pair object or breakpoint table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<serde_json::Value>,
}

impl RequestDoc {
    pub fn resolve(&self, model: &Model) -> Result<CorrelatorRequest> {
        let mut insertions = Vec::with_capacity(self.insertions.len());
        for i in &self.insertions {
            let position: CirclePoint = i.at.parse()?;
            insertions.push(FieldInsertion::new(position, model.label_index(&i.field)?));
        }
        let state = match &self.transform {
            None => CorrelatorState::Vacuum,
            Some(serde_json::Value::String(w)) => {
                CorrelatorState::Transformed(ThompsonElement::parse(w)?)
            }
            Some(v) => CorrelatorState::Transformed(ThompsonElement::parse(&v.to_string())?),
        };
        Ok(CorrelatorRequest { insertions, state })
    }
}

pub fn parse_request(json: &str, model: &Model) -> Result<CorrelatorRequest> {
    let doc: RequestDoc =
        serde_json::from_str(json).map_err(|e| CorrelatorError::Request(e.to_string()))?;
    doc.resolve(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::thompson::generator;

    fn pt(s: &str) -> CirclePoint {
        s.parse().unwrap()
    }

    fn ins(at: &str, label: usize) -> FieldInsertion {
        FieldInsertion::new(pt(at), label)
    }

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    fn split(p: &DyadicPartition, k: usize) -> DyadicPartition {
        let mut v = p.intervals().to_vec();
        let (l, r) = v[k].children();
        v.splice(k..=k, [l, r]);
        DyadicPartition::new(v).unwrap()
    }

    #[test]
    fn identity_fields_give_one() {
        let m = models::qutrit();
        let req = vec![ins("1/7", 0), ins("1/2", 0), ins("0.1101", 0)];
        assert!(close(n_point_vacuum(&req, &m).unwrap(), c(1.0, 0.0), 1e-12));
        for g in ["A", "B", "C", "S"] {
            let e = n_point_transformed(&generator(g).unwrap(), &req, &m).unwrap();
            assert!(close(e.value, c(1.0, 0.0), 1e-12), "{g}");
        }
        assert!(close(
            two_point_closed(&pt("0"), &pt("3/8"), 0, 0, &m).unwrap(),
            c(1.0, 0.0),
            1e-12
        ));
        assert!(close(
            regular_two_point(3, 1, 6, 0, 0, &m).unwrap(),
            c(1.0, 0.0),
            1e-12
        ));
    }

    #[test]
    fn closed_forms_agree_with_engine_and_oracle() {
        let m = models::qutrit();
        let d1 = m.label_index("δ¹").unwrap();
        for (x, y) in [
            ("0", "1/2"),
            ("1/4", "5/16"),
            ("3/8", "7/8"),
            ("0.0101", "0.0110"),
        ] {
            let req = CorrelatorRequest {
                insertions: vec![ins(x, d1), ins(y, d1)],
                state: CorrelatorState::Vacuum,
            };
            let engine = n_point(&req, &m).unwrap().value;
            let oracle = oracle_n_point(&req, &m).unwrap();
            let closed = two_point_closed(&pt(x), &pt(y), d1, d1, &m).unwrap();
            assert!(close(engine, oracle, 1e-10), "{x} {y}");
            assert!(
                close(engine, closed, 1e-10),
                "{x} {y}: {engine} vs {closed}"
            );
        }
        // Regular tree, all label pairs; the fixture has moments beyond γ = 1.
        let fx = models::fixture();
        for (j, k) in [(0, 7), (2, 5), (6, 7), (1, 2)] {
            for a in 0..fx.len() {
                for b in 0..fx.len() {
                    let e = regular_two_point_engine(3, j, k, a, b, &fx).unwrap();
                    let r = regular_two_point(3, j as u64, k as u64, a, b, &fx).unwrap();
                    assert!(close(e, r, 1e-10), "{j} {k} {a} {b}: {e} vs {r}");
                }
            }
        }
        for a in 0..m.len() {
            for b in 0..m.len() {
                let e = regular_two_point_engine(3, 2, 5, a, b, &m).unwrap();
                let r = regular_two_point(3, 2, 5, a, b, &m).unwrap();
                assert!(close(e, r, 1e-10), "{a} {b}: {e} vs {r}");
            }
        }
    }

    #[test]
    fn end_to_end_values() {
        let m = models::qutrit();
        let moments = m.moments().unwrap();
        let end_to_end = |mm: i64, a: usize, b: usize| {
            let mut s = c(0.0, 0.0);
            for (g, v) in moments.iter().enumerate() {
                s += m.fusion().get(a, b, g) * ipow(m.eigenvalue(g), -1) * v;
            }
            ipow(m.eigenvalue(a) * m.eigenvalue(b), mm - 1) * s
        };
        for a in 0..m.len() {
            for b in 0..m.len() {
                let r = regular_two_point(5, 0, 31, a, b, &m).unwrap();
                assert!(close(r, end_to_end(5, a, b), 1e-10));
                let lam = ipow(m.eigenvalue(a) * m.eigenvalue(b), 4);
                let closed = two_point_closed(&pt("0"), &pt("15/16"), a, b, &m).unwrap();
                assert!(close(closed * lam, end_to_end(4, a, b), 1e-10));
            }
        }
    }

    #[test]
    fn delta_pair_at_half() {
        let m = models::qutrit();
        let d1 = m.label_index("δ¹").unwrap();
        let v = two_point_closed(&pt("0"), &pt("1/2"), d1, d1, &m).unwrap();
        let expected = ipow(m.eigenvalue(d1), -2) * m.fusion().get(d1, d1, 0);
        assert!(close(v, expected, 1e-12));
        let req = CorrelatorRequest {
            insertions: vec![ins("0", d1), ins("1/2", d1)],
            state: CorrelatorState::Vacuum,
        };
        assert!(close(oracle_n_point(&req, &m).unwrap(), expected, 1e-10));
    }

    #[test]
    fn example_partition_and_refinements() {
        let m = models::qutrit();
        let labels: Vec<usize> = ["β¹", "β²", "β³"]
            .iter()
            .map(|s| m.label_index(s).unwrap())
            .collect();
        let req = CorrelatorRequest {
            insertions: vec![
                ins("1/7", labels[0]),
                ins("2/3", labels[1]),
                ins("5/6", labels[2]),
            ],
            state: CorrelatorState::Vacuum,
        };
        let e = n_point(&req, &m).unwrap();
        let want: DyadicPartition = DyadicPartition::new(vec![
            StdInterval::new(0u32, 1).unwrap(),
            StdInterval::new(2u32, 2).unwrap(),
            StdInterval::new(3u32, 2).unwrap(),
        ])
        .unwrap();
        assert_eq!(e.partition, want);
        let mut p = want.clone();
        for k in [0, 2, 1, 4, 0] {
            p = split(&p, k);
            let v = n_point_on(&req.insertions, &p, &m).unwrap();
            assert!(close(v, e.value, 1e-12), "{v} vs {}", e.value);
        }
        assert!(close(oracle_n_point(&req, &m).unwrap(), e.value, 1e-10));
    }

    #[test]
    fn errors() {
        let m = models::qutrit();
        assert!(matches!(
            n_point_vacuum(&[ins("1/2", 1), ins("1/2", 2)], &m),
            Err(CorrelatorError::Dyadic(_))
        ));
        assert_eq!(
            two_point_closed(&pt("1/3"), &pt("1/2"), 1, 1, &m),
            Err(CorrelatorError::NotDyadic)
        );
        assert_eq!(
            n_point_vacuum(&[ins("1/2", 9)], &m),
            Err(CorrelatorError::LabelRange(9))
        );
        assert!(matches!(
            regular_two_point(3, 5, 2, 0, 0, &m),
            Err(CorrelatorError::IndexRange(_))
        ));
        let fib = models::fibonacci();
        let err = n_point_vacuum(&[ins("0", 1), ins("1/2", 1)], &fib).unwrap_err();
        assert_eq!(err.to_string(), "vacuum moments required");
    }

    #[test]
    fn fibonacci_ope() {
        let m = models::fibonacci();
        let tau = m.label_index("τ").unwrap();
        let terms = ope_terms(tau, tau, &m).unwrap();
        let h = m.scaling_dimension(tau).unwrap().h_real;
        let s5 = 5f64.sqrt();
        assert_eq!(terms.len(), 2);
        assert_eq!(terms[0].label, "1");
        assert!(close(terms[0].coefficient, c(s5 - 2.0, 0.0), 1e-10));
        assert!((terms[0].exponent + 2.0 * h).abs() < 1e-12);
        assert_eq!(terms[1].label, "τ");
        assert!(close(terms[1].coefficient, c(5.0 - 2.0 * s5, 0.0), 1e-10));
        assert!((terms[1].exponent + h).abs() < 1e-12);
        assert!(terms.iter().all(|t| t.overlap.is_none()));
    }

    #[test]
    fn identity_exponent_rule() {
        let m = models::qutrit();
        for a in 0..m.len() {
            for b in 0..m.len() {
                let ha = m.scaling_dimension(a).unwrap().h_real;
                let hb = m.scaling_dimension(b).unwrap().h_real;
                for t in ope_terms(a, b, &m).unwrap().iter().filter(|t| t.gamma == 0) {
                    assert!((t.exponent + ha + hb).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn smeared() {
        let m = models::qutrit();
        let one = SimpleFunction::constant(linalg::identity(3));
        for p in [
            DyadicPartition::trivial(),
            DyadicPartition::regular(2),
            split(&DyadicPartition::regular(1), 1),
        ] {
            assert!(close(
                smeared_expectation(&one, &p, &m).unwrap(),
                c(1.0, 0.0),
                1e-12
            ));
        }
        // Indicator of one interval, normalised by its length.
        let fx = models::fixture();
        let p = DyadicPartition::regular(2);
        let iv = p.intervals()[1].clone();
        for a in 0..fx.len() {
            let mu = fx.spectral().mu(a);
            let z = Mat::zeros(3, 3);
            let f = SimpleFunction::new(
                vec![
                    DyadicRational::zero(),
                    iv.left_end(),
                    DyadicRational::new(2u32, 2).unwrap(),
                ],
                vec![z.clone(), mu * c(4.0, 0.0), z],
            )
            .unwrap();
            let smeared = smeared_expectation(&f, &p, &fx).unwrap();
            let direct = n_point_on(&[ins("1/4", a)], &p, &fx).unwrap();
            assert!(close(smeared, direct, 1e-10), "{a}: {smeared} vs {direct}");
        }
    }

    #[test]
    fn staircase() {
        let m = models::qutrit();
        let rows = staircase_samples(&pt("0"), 0, 0, 3, 4, &m).unwrap();
        assert_eq!(rows.len(), 15);
        assert!(rows.iter().all(|r| close(r.value, c(1.0, 0.0), 1e-12)));

        let d1 = m.label_index("δ¹").unwrap();
        let x = pt("0");
        let rows = staircase_samples(&x, d1, d1, 2, 5, &m).unwrap();
        for r in &rows {
            for s in &rows {
                let (lr, ls) = (
                    x.common_prefix_len(&r.y.to_point()).unwrap(),
                    x.common_prefix_len(&s.y.to_point()).unwrap(),
                );
                if lr == ls {
                    assert!(close(r.value, s.value, 1e-12));
                }
            }
        }
        let x = pt("5/8");
        let rows = staircase_samples(&x, d1, d1, 0, 4, &m).unwrap();
        let at = |s: &str| {
            rows.iter()
                .find(|r| r.y == s.parse().unwrap())
                .unwrap()
                .value
        };
        assert!(!close(at("11/16"), at("9/16"), 1e-6));
        let csv = staircase_csv(&rows);
        assert!(csv.starts_with("y,re,im,abs\n"));
        assert_eq!(csv.lines().count(), 16);
    }

    #[test]
    fn json_requests() {
        let m = models::qutrit();
        let r = parse_request(r#"{"insertions":[{"at":"1/4","field":"delta1"},{"at":"0.11","field":"δ^2"}],"transform":"A C"}"#, &m)
            .unwrap();
        assert_eq!(r.insertions[0].label, 1);
        assert_eq!(r.insertions[1].position, pt("3/4"));
        assert_eq!(
            r.state,
            CorrelatorState::Transformed(generator("S").unwrap())
        );
        assert!(parse_request(r#"{"insertions":[],"extra":1}"#, &m).is_err());
        let r = parse_request(r#"{"insertions":[{"at":"3/2^3","field":"2"}]}"#, &m).unwrap();
        assert_eq!(r.insertions[0].position, pt("3/8"));
        assert_eq!(r.state, CorrelatorState::Vacuum);
    }
}
