//! Model registry: presets, user-supplied JSON models, and the tensor
//! checkers (perfectness, SWAP symmetry, rotation invariance).
//!
//! A model is either backed by a 3-box isometry, in which case channel,
//! spectrum and fusion data are derived, or abstract, in which case the
//! channel matrix and fusion tensor are ingested as given. Abstract labels are
//! matched to eigenvalues in the solver's order (descending modulus).

use nalgebra::linalg::SVD;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::{self, build_ring, FusionDoc, FusionError, FusionRing, FusionTensor};
use crate::linalg::{self, c, r, vectorize, CVec, Mat, C64};
use crate::spectral::{
    build_channel, eigendecompose, scaling_dimension, AscendingChannel, Isometry3Box,
    ScalingDimension, SpectralData, SpectralError,
};

pub const TOL_PERFECT: f64 = 1e-10;
pub const TOL_SWAP: f64 = 1e-12;
pub const TOL_ROTATION: f64 = 1e-10;
const TOL_UNITAL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown preset {0:?} (expected qutrit, fibonacci or fixture)")]
    UnknownPreset(String),
    #[error("unknown field label {0:?}")]
    UnknownLabel(String),
    #[error("vacuum moments required")]
    MomentsRequired,
    #[error("{0}")]
    Spectral(#[from] SpectralError),
    #[error("{0}")]
    Fusion(#[from] FusionError),
    #[error("invalid model document: {0}")]
    Schema(String),
    #[error("{0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Isometry,
    Abstract,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    name: String,
    kind: ModelKind,
    isometry: Option<Isometry3Box>,
    channel: AscendingChannel,
    spectral: SpectralData,
    fusion: FusionTensor,
    moments: Option<Vec<C64>>,
    pinned: Option<Vec<Mat>>,
}

impl Model {
    /// Builds an isometry-backed model, optionally with a pinned eigenbasis
    /// (which must start with the identity) and label names.
    pub fn from_isometry(
        name: &str,
        v: Isometry3Box,
        pinned: Option<Vec<Mat>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let d = v.d();
        let channel = build_channel(&v);
        let spectral = match &pinned {
            Some(basis) => {
                if basis.iter().any(|m| m.shape() != (d, d)) {
                    return Err(ModelError::Schema(format!(
                        "pinned basis matrices must be {d}x{d}"
                    )));
                }
                let vecs: Vec<CVec> = basis.iter().map(vectorize).collect();
                SpectralData::from_pinned_basis(&channel, &vecs)?
            }
            None => eigendecompose(&channel)?,
        };
        let labels = match labels {
            Some(l) if l.len() != spectral.len() => {
                return Err(ModelError::Schema(format!(
                    "{} labels for {} fields",
                    l.len(),
                    spectral.len()
                )))
            }
            Some(l) => l,
            None => default_labels(spectral.len()),
        };
        let fusion = fusion::fusion_coefficients(&v, &spectral, labels);
        Ok(Self {
            name: name.into(),
            kind: ModelKind::Isometry,
            isometry: Some(v),
            channel,
            spectral,
            fusion,
            moments: None,
            pinned,
        })
    }

    /// Builds an abstract model from its channel matrix and fusion tensor.
    pub fn from_abstract(
        name: &str,
        channel: Mat,
        fusion: FusionTensor,
        moments: Option<Vec<C64>>,
    ) -> Result<Self> {
        let channel = AscendingChannel::abstract_channel(channel)?;
        let n = channel.dim();
        if fusion.len() != n {
            return Err(FusionError::Shape(format!(
                "{} labels for a {n}-dimensional channel",
                fusion.len()
            ))
            .into());
        }
        let res = channel.unitality_residual();
        if res > TOL_UNITAL {
            return Err(ModelError::Invariant(format!(
                "channel not unital (residual {res:.3e})"
            )));
        }
        if let Some(m) = &moments {
            if m.len() != n {
                return Err(ModelError::Schema(format!(
                    "{} moments for {n} fields",
                    m.len()
                )));
            }
        }
        let spectral = eigendecompose(&channel)?;
        Ok(Self {
            name: name.into(),
            kind: ModelKind::Abstract,
            isometry: None,
            channel,
            spectral,
            fusion,
            moments,
            pinned: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn isometry(&self) -> Option<&Isometry3Box> {
        self.isometry.as_ref()
    }

    pub fn require_isometry(&self) -> std::result::Result<&Isometry3Box, FusionError> {
        self.isometry.as_ref().ok_or(FusionError::NoIsometry)
    }

    pub fn channel(&self) -> &AscendingChannel {
        &self.channel
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    pub fn fusion(&self) -> &FusionTensor {
        &self.fusion
    }

    pub fn ring(&self) -> FusionRing {
        build_ring(&self.fusion)
    }

    pub fn labels(&self) -> &[String] {
        self.fusion.labels()
    }

    pub fn len(&self) -> usize {
        self.fusion.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fusion.is_empty()
    }

    pub fn eigenvalue(&self, a: usize) -> C64 {
        self.spectral.eigenvalue(a)
    }

    pub fn scaling_dimension(
        &self,
        a: usize,
    ) -> std::result::Result<ScalingDimension, SpectralError> {
        scaling_dimension(self.eigenvalue(a))
    }

    /// Single-site vacuum values `v_γ` of the fields: supplied for abstract
    /// models, `(1/d) tr μ^γ` for isometry models.
    pub fn moments(&self) -> Result<Vec<C64>> {
        if let Some(m) = &self.moments {
            return Ok(m.clone());
        }
        match (self.kind, self.spectral.local_dim()) {
            (ModelKind::Isometry, Some(d)) => Ok((0..self.spectral.len())
                .map(|a| self.spectral.mu(a).trace() / d as f64)
                .collect()),
            _ => Err(ModelError::MomentsRequired),
        }
    }

    /// The operator `μ^α` of an isometry model.
    pub fn field_operator(&self, a: usize) -> std::result::Result<Mat, FusionError> {
        self.require_isometry()?;
        Ok(self.spectral.mu(a))
    }

    /// Resolves a field label: a name or alias first, then `#k` or a bare index.
    pub fn label_index(&self, s: &str) -> Result<usize> {
        resolve_label(self.labels(), s).ok_or_else(|| ModelError::UnknownLabel(s.into()))
    }

    pub fn to_doc(&self) -> ModelDoc {
        ModelDoc {
            name: self.name.clone(),
            kind: self.kind,
            d: self.isometry.as_ref().map(|v| v.d()),
            labels: Some(self.labels().to_vec()),
            isometry: self
                .isometry
                .as_ref()
                .map(|v| linalg::mat_to_rows(v.matrix())),
            channel: match self.kind {
                ModelKind::Abstract => Some(linalg::mat_to_rows(self.channel.matrix())),
                ModelKind::Isometry => None,
            },
            fusion: match self.kind {
                ModelKind::Abstract => Some(self.fusion.to_doc()),
                ModelKind::Isometry => None,
            },
            moments: self
                .moments
                .as_ref()
                .map(|m| m.iter().map(|z| linalg::to_pair(*z)).collect()),
            pinned_basis: self
                .pinned
                .as_ref()
                .map(|b| b.iter().map(linalg::mat_to_rows).collect()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("model documents serialise")
    }
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            if i == 0 {
                "1".to_string()
            } else {
                format!("#{i}")
            }
        })
        .collect()
}

fn normalise_label(s: &str) -> String {
    let mut out = String::new();
    for ch in s.trim().chars() {
        let mapped = match ch {
            '⁰' | '₀' => '0',
            '¹' | '₁' => '1',
            '²' | '₂' => '2',
            '³' | '₃' => '3',
            '⁴' | '₄' => '4',
            '⁵' | '₅' => '5',
            '⁶' | '₆' => '6',
            '⁷' | '₇' => '7',
            '⁸' | '₈' => '8',
            '⁹' | '₉' => '9',
            '^' | '_' | ' ' => continue,
            other => other,
        };
        out.extend(mapped.to_lowercase());
    }
    for (word, greek) in [
        ("delta", "δ"),
        ("alpha", "α"),
        ("beta", "β"),
        ("tau", "τ"),
        ("identity", "1"),
        ("id", "1"),
    ] {
        if let Some(rest) = out.strip_prefix(word) {
            out = format!("{greek}{rest}");
            break;
        }
    }
    out
}

/// Label lookup shared by models and requests.
pub fn resolve_label(labels: &[String], s: &str) -> Option<usize> {
    if let Some(i) = labels.iter().position(|l| l == s) {
        return Some(i);
    }
    let key = normalise_label(s);
    if let Some(i) = labels.iter().position(|l| normalise_label(l) == key) {
        return Some(i);
    }
    let digits = s.trim().strip_prefix('#').unwrap_or(s.trim());
    digits.parse::<usize>().ok().filter(|&i| i < labels.len())
}

// ---------------------------------------------------------------------------
// Presets

pub const QUTRIT_LABELS: [&str; 9] = ["1", "δ¹", "δ²", "β¹", "β²", "β³", "α¹", "α²", "α³"];

/// `⟨jk|V|l⟩ = 1/√2` when j, k, l are pairwise distinct, else 0.
pub fn qutrit_isometry() -> Isometry3Box {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Isometry3Box::from_fn(3, |j, k, l| {
        if j != k && k != l && l != j {
            r(s)
        } else {
            r(0.0)
        }
    })
    .expect("qutrit tensor is an isometry")
}

/// The nine eigen-operators in the order of [`QUTRIT_LABELS`].
pub fn qutrit_basis() -> Vec<Mat> {
    let m = |entries: &[(usize, usize, f64)]| {
        let mut x = Mat::zeros(3, 3);
        for &(i, j, v) in entries {
            x[(i, j)] = r(v);
        }
        x
    };
    vec![
        linalg::identity(3),
        m(&[(0, 0, -1.0), (2, 2, 1.0)]),
        m(&[(0, 0, -1.0), (1, 1, 1.0)]),
        m(&[(1, 2, 1.0), (2, 1, 1.0)]),
        m(&[(0, 2, 1.0), (2, 0, 1.0)]),
        m(&[(0, 1, 1.0), (1, 0, 1.0)]),
        m(&[(1, 2, -1.0), (2, 1, 1.0)]),
        m(&[(0, 2, -1.0), (2, 0, 1.0)]),
        m(&[(0, 1, -1.0), (1, 0, 1.0)]),
    ]
}

pub fn qutrit() -> Model {
    Model::from_isometry(
        "qutrit",
        qutrit_isometry(),
        Some(qutrit_basis()),
        Some(QUTRIT_LABELS.iter().map(|s| s.to_string()).collect()),
    )
    .expect("qutrit preset is consistent")
}

/// `(3−√5)/2`.
pub fn fibonacci_lambda() -> f64 {
    (3.0 - 5f64.sqrt()) / 2.0
}

pub fn fibonacci() -> Model {
    let l = fibonacci_lambda();
    let s5 = 5f64.sqrt();
    let channel = Mat::from_row_slice(2, 2, &[r(1.0), r(l), r(0.0), r(l)]);
    // [α][β][γ]: f¹ = diag(1, λ), f^τ = [[0, λ], [√5−2, 5−2√5]].
    let nested = vec![
        vec![vec![r(1.0), r(0.0)], vec![r(0.0), r(l)]],
        vec![vec![r(0.0), r(l)], vec![r(s5 - 2.0), r(5.0 - 2.0 * s5)]],
    ];
    let fusion = FusionTensor::from_nested(vec!["1".into(), "τ".into()], &nested).expect("2x2x2");
    Model::from_abstract("fibonacci", channel, fusion, None)
        .expect("fibonacci preset is consistent")
}

/// A SWAP-symmetric qutrit isometry that is neither perfect nor rotation
/// invariant: its columns are a fixed orthonormal triple in the symmetric
/// subspace of `ℂ³⊗ℂ³`.
pub fn fixture_isometry() -> Isometry3Box {
    let d = 3;
    // Orthonormal basis of Sym²(ℂ³): |jj⟩ and (|jk⟩+|kj⟩)/√2.
    let mut sym: Vec<CVec> = Vec::new();
    for j in 0..d {
        for k in j..d {
            let mut v = CVec::zeros(d * d);
            if j == k {
                v[j * d + j] = r(1.0);
            } else {
                v[j * d + k] = r(std::f64::consts::FRAC_1_SQRT_2);
                v[k * d + j] = r(std::f64::consts::FRAC_1_SQRT_2);
            }
            sym.push(v);
        }
    }
    let basis = Mat::from_columns(&sym);
    let coeffs = Mat::from_fn(sym.len(), d, |i, l| {
        let t = (7 * i + 3 * l + 1) as f64;
        c((1.3 * t).sin(), 0.4 * (0.7 * t).cos())
    });
    let q = (basis * coeffs).qr().q();
    Isometry3Box::new(d, q).expect("orthonormal columns")
}

pub fn fixture() -> Model {
    Model::from_isometry("fixture", fixture_isometry(), None, None)
        .expect("fixture preset is consistent")
}

pub fn preset(name: &str) -> Result<Model> {
    match name.trim().to_lowercase().as_str() {
        "qutrit" => Ok(qutrit()),
        "fibonacci" | "fib" => Ok(fibonacci()),
        "fixture" => Ok(fixture()),
        _ => Err(ModelError::UnknownPreset(name.into())),
    }
}

pub const PRESET_NAMES: [&str; 3] = ["qutrit", "fibonacci", "fixture"];

// ---------------------------------------------------------------------------
// Checkers

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    /// The leg taken alone: 0 and 1 are the outputs, 2 the input.
    pub leg: usize,
    pub passes: bool,
    /// Common singular value of the reshaped tensor (the largest one when
    /// the check fails).
    pub constant: f64,
    /// `(σ_max − σ_min)/σ_max`.
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerfectReport {
    pub pairings: Vec<PairingReport>,
    pub perfect: bool,
}

/// The tensor `T_{jkl} = ⟨jk|V|l⟩` as a `d × d²` matrix with `leg` as the row index.
fn leg_matrix(v: &Isometry3Box, leg: usize) -> Mat {
    let d = v.d();
    Mat::from_fn(d, d * d, |i, col| {
        let (a, b) = (col / d, col % d);
        let (j, k, l) = match leg {
            0 => (i, a, b),
            1 => (a, i, b),
            _ => (a, b, i),
        };
        v.entry(j, k, l)
    })
}

/// Each of the three leg bipartitions must be proportional to an isometry,
/// i.e. have equal singular values.
pub fn check_perfect(v: &Isometry3Box) -> PerfectReport {
    let pairings: Vec<PairingReport> = (0..3)
        .map(|leg| {
            let sv = SVD::new(leg_matrix(v, leg), false, false).singular_values;
            let hi = sv.iter().cloned().fold(0.0, f64::max);
            let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
            let deviation = if hi > 0.0 { (hi - lo) / hi } else { 1.0 };
            PairingReport {
                leg,
                passes: hi > 0.0 && deviation <= TOL_PERFECT,
                constant: hi,
                deviation,
            }
        })
        .collect();
    let perfect = pairings.iter().all(|p| p.passes);
    PerfectReport { pairings, perfect }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub holds: bool,
    pub deviation: f64,
}

/// `⟨jk|V|l⟩ = ⟨kj|V|l⟩`.
pub fn check_swap(v: &Isometry3Box) -> SymmetryReport {
    let deviation = v.swap_deviation();
    SymmetryReport {
        holds: deviation <= TOL_SWAP,
        deviation,
    }
}

/// Invariance of `T_{jkl}` under the cyclic leg shift `T_{jkl} ↦ T_{klj}`,
/// legs being bent with the unnormalised-index cup and cap.
pub fn check_rotation(v: &Isometry3Box) -> SymmetryReport {
    let d = v.d();
    let mut deviation: f64 = 0.0;
    for j in 0..d {
        for k in 0..d {
            for l in 0..d {
                deviation = deviation.max((v.entry(j, k, l) - v.entry(k, l, j)).norm());
            }
        }
    }
    SymmetryReport {
        holds: deviation <= TOL_ROTATION,
        deviation,
    }
}

// ---------------------------------------------------------------------------
// Documents

/// JSON model schema; complex numbers are `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub name: String,
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    /// `d² × d` rows, row `j*d + k`, column `l`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isometry: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fusion: Option<FusionDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinned_basis: Option<Vec<Vec<Vec<[f64; 2]>>>>,
}

impl ModelDoc {
    pub fn build(&self) -> Result<Model> {
        let moments = self
            .moments
            .as_ref()
            .map(|m| m.iter().map(|p| linalg::from_pair(*p)).collect::<Vec<_>>());
        match self.kind {
            ModelKind::Isometry => {
                let rows = self.isometry.as_ref().ok_or_else(|| {
                    ModelError::Schema("isometry models need \"isometry\"".into())
                })?;
                let m = linalg::rows_to_mat(rows).map_err(ModelError::Schema)?;
                let d = self.d.unwrap_or(m.ncols());
                if self.channel.is_some() || self.fusion.is_some() {
                    return Err(ModelError::Schema(
                        "isometry models derive \"channel\" and \"fusion\"".into(),
                    ));
                }
                let v = Isometry3Box::new(d, m)?;
                let pinned = match &self.pinned_basis {
                    Some(b) => Some(
                        b.iter()
                            .map(|rows| linalg::rows_to_mat(rows).map_err(ModelError::Schema))
                            .collect::<Result<Vec<_>>>()?,
                    ),
                    None => None,
                };
                let mut model = Model::from_isometry(&self.name, v, pinned, self.labels.clone())?;
                if let Some(m) = moments {
                    if m.len() != model.len() {
                        return Err(ModelError::Schema(format!(
                            "{} moments for {} fields",
                            m.len(),
                            model.len()
                        )));
                    }
                    model.moments = Some(m);
                }
                Ok(model)
            }
            ModelKind::Abstract => {
                if self.isometry.is_some() || self.pinned_basis.is_some() {
                    return Err(ModelError::Schema(
                        "abstract models take no \"isometry\" or \"pinned_basis\"".into(),
                    ));
                }
                let rows = self
                    .channel
                    .as_ref()
                    .ok_or_else(|| ModelError::Schema("abstract models need \"channel\"".into()))?;
                let ch = linalg::rows_to_mat(rows).map_err(ModelError::Schema)?;
                let fd = self
                    .fusion
                    .as_ref()
                    .ok_or_else(|| ModelError::Schema("abstract models need \"fusion\"".into()))?;
                let mut f = FusionTensor::from_doc(fd)?;
                if let Some(l) = &self.labels {
                    if l.len() != f.len() {
                        return Err(FusionError::Shape(format!(
                            "{} labels for {} fusion labels",
                            l.len(),
                            f.len()
                        ))
                        .into());
                    }
                    f = FusionTensor::from_nested(l.clone(), &f.nested())?;
                }
                Model::from_abstract(&self.name, ch, f, moments)
            }
        }
    }
}

/// Parses and validates a JSON model document.
pub fn load_model(json: &str) -> Result<Model> {
    let doc: ModelDoc =
        serde_json::from_str(json).map_err(|e| ModelError::Schema(e.to_string()))?;
    doc.build()
}

/// A preset name or a path to a JSON model file.
pub fn load_model_ref(reference: &str) -> Result<Model> {
    if let Ok(m) = preset(reference) {
        return Ok(m);
    }
    let text = std::fs::read_to_string(reference).map_err(|e| {
        ModelError::Schema(format!(
            "{reference:?} is neither a preset nor a readable file: {e}"
        ))
    })?;
    load_model(&text)
}
