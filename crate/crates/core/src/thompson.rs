//! Thompson's groups F and T as tree-pair fractions with a cyclic leaf
//! rotation, and as piecewise-linear dyadic maps.
//!
//! An element `(D, R, r)` sends the `i`-th leaf interval of `D` affinely onto
//! the `(i + r mod n)`-th leaf interval of `R`. Elements of F have `r = 0`.
//! Products follow function composition: `compose(g, h) = g∘h`, so `h` acts
//! first and the word "A C" is the map `x ↦ A(C(x))`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correlator::{self, CorrelatorError, FieldInsertion};
use crate::dyadic::{
    common_refinement, is_refinement, BinaryTree, CirclePoint, DyadicError, DyadicPartition,
    DyadicRational, StdInterval,
};
use crate::linalg::{ipow, Mat, C64};
use crate::models::{self, Model};
use crate::spectral::{build_channel, eigendecompose, Isometry3Box, SpectralData};
use crate::treestate::{self, RootState, TreeError};

pub const TOL_INVARIANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThompsonError {
    #[error("not a Thompson map: {0}")]
    NotThompsonMap(String),
    #[error("domain and range trees have {0} and {1} leaves")]
    LeafCountMismatch(usize, usize),
    #[error("rotation {rotation} out of range for {leaves} leaves")]
    BadRotation { rotation: usize, leaves: usize },
    #[error("unknown generator {0:?} (expected A, B, C or S)")]
    UnknownGenerator(String),
    #[error("cannot parse element: {0}")]
    Parse(String),
    #[error("partition {0} is not good for the element")]
    NotGood(String),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

pub type Result<T> = std::result::Result<T, ThompsonError>;

fn rat(n: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(n.into())
}

fn pow2_rat(k: i64) -> BigRational {
    let p = BigInt::one() << k.unsigned_abs();
    if k >= 0 {
        BigRational::from_integer(p)
    } else {
        BigRational::new(BigInt::one(), p)
    }
}

fn interval_at(left: &BigRational, level: u32) -> StdInterval {
    let n = (left * pow2_rat(level as i64))
        .to_integer()
        .to_biguint()
        .expect("non-negative");
    StdInterval::new(n, level).expect("inside [0,1)")
}

/// Level of a standard interval `[x, x+len)` or `None` if it is not standard.
fn standard_level(x: &BigRational, len: &BigRational) -> Option<u32> {
    if !len.numer().is_one() || len.denom().to_biguint()?.count_ones() != 1 {
        return None;
    }
    let level = len.denom().to_biguint()?.bits() as u32 - 1;
    let scaled = x * pow2_rat(level as i64);
    (scaled.is_integer() && !x.is_negative() && &(x + len) <= &rat(1)).then_some(level)
}

// ---------------------------------------------------------------------------

/// Tree-pair fraction with a leaf rotation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ThompsonElement {
    domain: BinaryTree,
    range: BinaryTree,
    rotation: usize,
}

impl ThompsonElement {
    /// Validates leaf counts and the rotation; does not reduce.
    pub fn new(domain: BinaryTree, range: BinaryTree, rotation: usize) -> Result<Self> {
        let (n, m) = (domain.leaf_count(), range.leaf_count());
        if n != m {
            return Err(ThompsonError::LeafCountMismatch(n, m));
        }
        if rotation >= n {
            return Err(ThompsonError::BadRotation {
                rotation,
                leaves: n,
            });
        }
        Ok(Self {
            domain,
            range,
            rotation,
        })
    }

    pub fn identity() -> Self {
        Self {
            domain: BinaryTree::Leaf,
            range: BinaryTree::Leaf,
            rotation: 0,
        }
    }

    pub fn domain(&self) -> &BinaryTree {
        &self.domain
    }

    pub fn range(&self) -> &BinaryTree {
        &self.range
    }

    pub fn rotation(&self) -> usize {
        self.rotation
    }

    pub fn leaf_count(&self) -> usize {
        self.domain.leaf_count()
    }

    pub fn is_identity(&self) -> bool {
        self.reduce() == Self::identity()
    }

    /// Whether the element fixes 0, i.e. lies in F.
    pub fn in_f(&self) -> bool {
        self.rotation == 0
    }

    pub fn domain_partition(&self) -> DyadicPartition {
        self.domain.to_partition()
    }

    pub fn range_partition(&self) -> DyadicPartition {
        self.range.to_partition()
    }

    /// `(domain leaf, range leaf)` pairs in domain order.
    pub fn pairs(&self) -> Vec<(StdInterval, StdInterval)> {
        let d = self.domain.intervals();
        let r = self.range.intervals();
        let n = d.len();
        d.into_iter()
            .enumerate()
            .map(|(i, di)| (di, r[(i + self.rotation) % n].clone()))
            .collect()
    }

    /// Inverse of [`pairs`](Self::pairs); the pairs may come in any order but
    /// must preserve the cyclic order of the circle.
    pub fn from_pairs(mut pairs: Vec<(StdInterval, StdInterval)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(ThompsonError::NotThompsonMap("no leaves".into()));
        }
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        let dom: Vec<StdInterval> = pairs.iter().map(|p| p.0.clone()).collect();
        let mut ran: Vec<StdInterval> = pairs.iter().map(|p| p.1.clone()).collect();
        ran.sort();
        let domain = DyadicPartition::new(dom)
            .map_err(|e| ThompsonError::NotThompsonMap(e.to_string()))?
            .to_tree();
        let range_p = DyadicPartition::new(ran.clone())
            .map_err(|e| ThompsonError::NotThompsonMap(e.to_string()))?;
        let n = ran.len();
        let rotation = ran.iter().position(|x| *x == pairs[0].1).expect("present");
        for (i, p) in pairs.iter().enumerate() {
            if ran[(i + rotation) % n] != p.1 {
                return Err(ThompsonError::NotThompsonMap(
                    "leaf order is not cyclic".into(),
                ));
            }
        }
        Ok(Self {
            domain,
            range: range_p.to_tree(),
            rotation,
        })
    }

    /// Removes opposite caret pairs until none is left.
    pub fn reduce(&self) -> Self {
        let mut pairs = self.pairs();
        loop {
            let hit = pairs.windows(2).position(|w| {
                let (d0, r0) = &w[0];
                let (d1, r1) = &w[1];
                d0.is_left_child()
                    && r0.is_left_child()
                    && d0.parent() == d1.parent()
                    && r0.parent() == r1.parent()
                    && !d1.is_left_child()
                    && !r1.is_left_child()
            });
            match hit {
                Some(i) => {
                    let d = pairs[i].0.parent().expect("child");
                    let r = pairs[i].1.parent().expect("child");
                    pairs.splice(i..i + 2, [(d, r)]);
                }
                None => break,
            }
        }
        Self::from_pairs(pairs).expect("reduction preserves validity")
    }

    pub fn is_reduced(&self) -> bool {
        self.reduce() == *self
    }

    /// Pairs refined so that the range side is exactly `u`, which must refine
    /// the range partition.
    pub fn pullback(&self, u: &DyadicPartition) -> Result<Vec<(StdInterval, StdInterval)>> {
        if !is_refinement(&self.range_partition(), u) {
            return Err(ThompsonError::NotGood(u.to_string()));
        }
        Ok(refine_side(&self.pairs(), u, false))
    }

    /// Pairs refined so that the domain side is exactly `p`, which must refine
    /// the domain partition.
    pub fn pushforward(&self, p: &DyadicPartition) -> Result<Vec<(StdInterval, StdInterval)>> {
        if !is_refinement(&self.domain_partition(), p) {
            return Err(ThompsonError::NotGood(p.to_string()));
        }
        Ok(refine_side(&self.pairs(), p, true))
    }

    /// `f(P)` for a good partition `P`.
    pub fn image_partition(&self, p: &DyadicPartition) -> Result<DyadicPartition> {
        let mut img: Vec<StdInterval> = self.pushforward(p)?.into_iter().map(|x| x.1).collect();
        img.sort();
        Ok(DyadicPartition::new(img)?)
    }

    pub fn inverse(&self) -> Self {
        Self::from_pairs(self.pairs().into_iter().map(|(d, r)| (r, d)).collect())
            .expect("inverse of a valid element")
            .reduce()
    }

    pub fn pow(&self, k: i64) -> Self {
        let base = if k < 0 { self.inverse() } else { self.reduce() };
        (0..k.unsigned_abs()).fold(Self::identity(), |acc, _| compose(&acc, &base))
    }

    fn locate(&self, x: &CirclePoint) -> (StdInterval, StdInterval) {
        self.pairs()
            .into_iter()
            .find(|(d, _)| d.contains_point(x))
            .expect("domain leaves cover [0,1)")
    }

    /// Exact image of a point.
    pub fn apply(&self, x: &CirclePoint) -> CirclePoint {
        let (d, r) = self.locate(x);
        let scale = pow2_rat(d.level() as i64 - r.level() as i64);
        let y = r.left_end().to_rational() + (x.value() - d.left_end().to_rational()) * scale;
        CirclePoint::from_rational(y).expect("image lies in its range leaf")
    }

    pub fn apply_inverse(&self, y: &CirclePoint) -> CirclePoint {
        self.inverse().apply(y)
    }

    /// `c` with `f'(x⁺) = 2^c`.
    pub fn slope_right(&self, x: &CirclePoint) -> i64 {
        let (d, r) = self.locate(x);
        d.level() as i64 - r.level() as i64
    }

    pub fn to_piecewise(&self) -> PiecewiseLinearMap {
        let pairs = self.pairs();
        let mut breakpoints = Vec::new();
        let mut slopes: Vec<i64> = Vec::new();
        let mut prev: Option<(i64, BigRational)> = None;
        for (d, r) in &pairs {
            let c = d.level() as i64 - r.level() as i64;
            let start = r.left_end().to_rational();
            let continues = matches!(&prev, Some((pc, end)) if *pc == c && *end == start);
            if !continues {
                breakpoints.push(d.left_end());
                slopes.push(c);
            }
            prev = Some((c, r.right_end()));
        }
        PiecewiseLinearMap {
            breakpoints,
            slopes,
            shift: pairs[0].1.left_end(),
        }
    }

    pub fn from_piecewise(m: &PiecewiseLinearMap) -> Result<Self> {
        m.validate()?;
        let n = m.breakpoints.len();
        let mut pairs = Vec::new();
        let mut y = m.shift.to_rational();
        for i in 0..n {
            let lo = m.breakpoints[i].to_rational();
            let hi = if i + 1 < n {
                m.breakpoints[i + 1].to_rational()
            } else {
                rat(1)
            };
            let slope = pow2_rat(m.slopes[i]);
            for j in maximal_cover(&lo, &hi) {
                split_until_standard(&j, &lo, &y, &slope, &mut pairs);
            }
            y = wrap01(y + (hi - lo) * slope);
        }
        Ok(Self::from_pairs(pairs)?.reduce())
    }

    /// Atoms `(x_j, 2(c₊ − c₋))` at every slope change; 0 is included for
    /// elements outside F, comparing against the slope just below 1.
    pub fn schwarzian_measure(&self) -> Vec<(DyadicRational, i64)> {
        let pairs = self.pairs();
        let c: Vec<i64> = pairs
            .iter()
            .map(|(d, r)| d.level() as i64 - r.level() as i64)
            .collect();
        let mut out = Vec::new();
        if !self.in_f() && c[0] != c[c.len() - 1] {
            out.push((DyadicRational::zero(), 2 * (c[0] - c[c.len() - 1])));
        }
        for i in 1..pairs.len() {
            if c[i] != c[i - 1] {
                out.push((pairs[i].0.left_end(), 2 * (c[i] - c[i - 1])));
            }
        }
        out
    }

    /// `P` is good iff it refines the domain partition of the reduced form.
    pub fn good_partition(&self, p: &DyadicPartition) -> bool {
        is_refinement(&self.reduce().domain_partition(), p)
    }

    /// Coarsest good refinement of `p0`.
    pub fn find_good(&self, p0: &DyadicPartition) -> DyadicPartition {
        common_refinement(p0, &self.reduce().domain_partition())
    }

    pub fn to_doc(&self) -> ElementDoc {
        let r = self.reduce();
        ElementDoc {
            domain: r.domain,
            range: r.range,
            rotation: r.rotation,
        }
    }

    /// Parses a generator word, a tree-pair object `{"domain","range","rotation"}`
    /// or a breakpoint table `{"breakpoints","slopes","shift"}`.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.starts_with('{') {
            let v: serde_json::Value =
                serde_json::from_str(t).map_err(|e| ThompsonError::Parse(e.to_string()))?;
            if v.get("breakpoints").is_some() {
                let m: PiecewiseLinearMap =
                    serde_json::from_value(v).map_err(|e| ThompsonError::Parse(e.to_string()))?;
                return Self::from_piecewise(&m);
            }
            let d: ElementDoc =
                serde_json::from_value(v).map_err(|e| ThompsonError::Parse(e.to_string()))?;
            return Ok(Self::new(d.domain, d.range, d.rotation)?.reduce());
        }
        parse_word(t)
    }
}

fn wrap01(y: BigRational) -> BigRational {
    let f = y.floor();
    y - f
}

/// Maximal standard dyadic intervals tiling `[lo, hi)`.
fn maximal_cover(lo: &BigRational, hi: &BigRational) -> Vec<StdInterval> {
    let mut out = Vec::new();
    let mut x = lo.clone();
    while &x < hi {
        let mut level = 0u32;
        loop {
            let len = pow2_rat(-(level as i64));
            if (&x * pow2_rat(level as i64)).is_integer() && &(&x + &len) <= hi {
                break;
            }
            level += 1;
        }
        out.push(interval_at(&x, level));
        x += pow2_rat(-(level as i64));
    }
    out
}

/// Splits `j` (inside a piece starting at `lo` with image start `y0` and
/// slope `slope`) until each part maps onto a standard interval.
fn split_until_standard(
    j: &StdInterval,
    lo: &BigRational,
    y0: &BigRational,
    slope: &BigRational,
    out: &mut Vec<(StdInterval, StdInterval)>,
) {
    let start = wrap01(y0 + (j.left_end().to_rational() - lo) * slope);
    let len = pow2_rat(-(j.level() as i64)) * slope;
    match standard_level(&start, &len) {
        Some(level) => out.push((j.clone(), interval_at(&start, level))),
        None => {
            let (a, b) = j.children();
            split_until_standard(&a, lo, y0, slope, out);
            split_until_standard(&b, lo, y0, slope, out);
        }
    }
}

/// Refines `pairs` along `u` on the domain side (`by_domain`) or range side.
fn refine_side(
    pairs: &[(StdInterval, StdInterval)],
    u: &DyadicPartition,
    by_domain: bool,
) -> Vec<(StdInterval, StdInterval)> {
    let ivs = u.intervals();
    let mut out = Vec::with_capacity(ivs.len());
    for (d, r) in pairs {
        let (from, to) = if by_domain { (d, r) } else { (r, d) };
        let first = ivs.partition_point(|x| x.left_end() < from.left_end());
        for sub in ivs[first..].iter().take_while(|x| x.is_within(from)) {
            let depth = sub.level() - from.level();
            let other = to.descend(depth, &from.offset_of(sub));
            out.push(if by_domain {
                (sub.clone(), other)
            } else {
                (other, sub.clone())
            });
        }
    }
    out
}

/// `g∘h`, reduced.
pub fn compose(g: &ThompsonElement, h: &ThompsonElement) -> ThompsonElement {
    let u = common_refinement(&h.range_partition(), &g.domain_partition());
    let hp = refine_side(&h.pairs(), &u, false);
    let gp: HashMap<StdInterval, StdInterval> =
        refine_side(&g.pairs(), &u, true).into_iter().collect();
    let pairs = hp
        .into_iter()
        .map(|(d, mid)| (d, gp[&mid].clone()))
        .collect();
    ThompsonElement::from_pairs(pairs)
        .expect("composition of valid elements")
        .reduce()
}

pub fn reduce(e: &ThompsonElement) -> ThompsonElement {
    e.reduce()
}

pub fn inverse(e: &ThompsonElement) -> ThompsonElement {
    e.inverse()
}

fn tree(s: &str) -> BinaryTree {
    s.parse().expect("literal tree")
}

/// The generators A, B, C and the half rotation S = A·C.
pub fn generator(name: &str) -> Result<ThompsonElement> {
    let (d, r, rot) = match name.trim() {
        "A" | "a" => ("[[],[[],[]]]", "[[[],[]],[]]", 0),
        "B" | "b" => ("[[],[[],[[],[]]]]", "[[],[[[],[]],[]]]", 0),
        "C" | "c" => ("[[],[[],[]]]", "[[],[[],[]]]", 2),
        "S" | "s" => ("[[],[]]", "[[],[]]", 1),
        other => return Err(ThompsonError::UnknownGenerator(other.into())),
    };
    ThompsonElement::new(tree(d), tree(r), rot)
}

fn superscript_digit(c: char) -> Option<u32> {
    "⁰¹²³⁴⁵⁶⁷⁸⁹".chars().position(|s| s == c).map(|p| p as u32)
}

/// Parses words such as `A B A^-1`, `AC`, `B⁻¹ A²`. An empty word, `1`, `e`
/// or `id` is the identity.
pub fn parse_word(s: &str) -> Result<ThompsonElement> {
    let t = s.trim();
    if t.is_empty() || t == "1" || t == "e" || t == "id" {
        return Ok(ThompsonElement::identity());
    }
    let chars: Vec<char> = t.chars().collect();
    let mut i = 0;
    let mut acc = ThompsonElement::identity();
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() || ch == '·' || ch == '*' || ch == '.' {
            i += 1;
            continue;
        }
        let g = generator(&ch.to_string())
            .map_err(|_| ThompsonError::Parse(format!("unexpected {ch:?} in {s:?}")))?;
        i += 1;
        let mut exp: i64 = 1;
        if i < chars.len() && chars[i] == '^' {
            i += 1;
            let neg = i < chars.len() && chars[i] == '-';
            if i < chars.len() && (chars[i] == '-' || chars[i] == '+') {
                i += 1;
            }
            let startd = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[startd..i].iter().collect();
            exp = digits
                .parse()
                .map_err(|_| ThompsonError::Parse(format!("bad exponent in {s:?}")))?;
            if neg {
                exp = -exp;
            }
        } else if i < chars.len() && (chars[i] == '⁻' || superscript_digit(chars[i]).is_some()) {
            let neg = chars[i] == '⁻';
            if neg {
                i += 1;
            }
            let mut v: i64 = 0;
            let startd = i;
            while i < chars.len() {
                match superscript_digit(chars[i]) {
                    Some(dg) => v = v * 10 + dg as i64,
                    None => break,
                }
                i += 1;
            }
            if i == startd {
                return Err(ThompsonError::Parse(format!("bad exponent in {s:?}")));
            }
            exp = if neg { -v } else { v };
        }
        acc = compose(&acc, &g.pow(exp));
    }
    Ok(acc)
}

impl FromStr for ThompsonElement {
    type Err = ThompsonError;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl fmt::Display for ThompsonElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.domain, self.range, self.rotation)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementDoc {
    pub domain: BinaryTree,
    pub range: BinaryTree,
    #[serde(default)]
    pub rotation: usize,
}

impl Serialize for ThompsonElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_doc().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ThompsonElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = ElementDoc::deserialize(d)?;
        Self::new(doc.domain, doc.range, doc.rotation)
            .map(|e| e.reduce())
            .map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------

/// Maximal pieces `[b_i, b_{i+1})` on which the map is affine into `[0,1)`
/// with slope `2^{c_i}`; `shift` is `f(0)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiecewiseLinearMap {
    pub breakpoints: Vec<DyadicRational>,
    pub slopes: Vec<i64>,
    pub shift: DyadicRational,
}

impl PiecewiseLinearMap {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ThompsonError::NotThompsonMap(m.into()));
        if self.breakpoints.is_empty() || self.breakpoints.len() != self.slopes.len() {
            return bad("need one slope per piece");
        }
        if !self.breakpoints[0].is_zero() {
            return bad("first breakpoint must be 0");
        }
        if self.breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return bad("breakpoints must increase");
        }
        if self.slopes.iter().any(|c| c.abs() > 1024) {
            return bad("slope exponent out of range");
        }
        let n = self.breakpoints.len();
        let mut total = BigRational::zero();
        for i in 0..n {
            let lo = self.breakpoints[i].to_rational();
            let hi = if i + 1 < n {
                self.breakpoints[i + 1].to_rational()
            } else {
                rat(1)
            };
            total += (hi - lo) * pow2_rat(self.slopes[i]);
        }
        if total != rat(1) {
            return bad(&format!("image length {total} is not 1"));
        }
        Ok(())
    }

    /// Exact evaluation, reduced mod 1.
    pub fn eval(&self, x: &CirclePoint) -> CirclePoint {
        let n = self.breakpoints.len();
        let mut y = self.shift.to_rational();
        for i in 0..n {
            let lo = self.breakpoints[i].to_rational();
            let hi = if i + 1 < n {
                self.breakpoints[i + 1].to_rational()
            } else {
                rat(1)
            };
            if x.value() < &hi {
                return CirclePoint::wrap(y + (x.value() - lo) * pow2_rat(self.slopes[i]));
            }
            y += (hi - lo) * pow2_rat(self.slopes[i]);
        }
        unreachable!("x < 1")
    }
}

// ---------------------------------------------------------------------------
// Correlators and invariance

/// `C_f(z) = Π_j λ_{α_j}^{c_j} · C(f⁻¹(z))`, where `2^{c_j}` is the right
/// slope of `f` at `f⁻¹(z_j)`. The factor `λ^{c}` is the exact integer-power
/// form of `(f')^{−h}`; it is what direct evaluation of the transformed state
/// produces.
pub fn transformed_correlator(
    f: &ThompsonElement,
    insertions: &[FieldInsertion],
    model: &Model,
) -> std::result::Result<C64, CorrelatorError> {
    let inv = f.inverse();
    let mut pulled: Vec<FieldInsertion> = Vec::with_capacity(insertions.len());
    let mut factor = C64::new(1.0, 0.0);
    for ins in insertions {
        let x = inv.apply(&ins.position);
        factor *= ipow(model.eigenvalue(ins.label), f.slope_right(&x));
        pulled.push(FieldInsertion {
            position: x,
            label: ins.label,
        });
    }
    pulled.sort_by(|a, b| a.position.cmp(&b.position));
    Ok(factor * correlator::n_point_vacuum(&pulled, model)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub invariant: bool,
    pub max_deviation: f64,
    pub insertions_checked: usize,
    /// Reported alongside, not assumed.
    pub rotation_invariant: bool,
    pub level: u32,
}

/// Compares `ω(π(f)* M π(f))` with `ω(M)` for the vacuum vector (cup root)
/// on every single and double insertion of eigen-operators at `level`.
pub fn vacuum_invariance_check(
    f: &ThompsonElement,
    v: &Isometry3Box,
    level: u32,
) -> Result<InvarianceReport> {
    let s = eigendecompose(&build_channel(v))
        .map_err(|e| ThompsonError::NotThompsonMap(e.to_string()))?;
    vacuum_invariance_check_with(f, v, &s, level)
}

pub fn vacuum_invariance_check_with(
    f: &ThompsonElement,
    v: &Isometry3Box,
    s: &SpectralData,
    level: u32,
) -> Result<InvarianceReport> {
    let f = f.reduce();
    let r = common_refinement(&DyadicPartition::regular(level), &f.range_partition());
    let n = r.len();
    let d = v.d();
    let needed = (d as f64).powi(n as i32);
    let cap = treestate::oracle_cap();
    if needed > cap as f64 {
        return Err(TreeError::OracleSizeExceeded { needed, cap }.into());
    }
    let pairs = f.pullback(&r)?;
    let shape = DyadicPartition::new(pairs.iter().map(|p| p.0.clone()).collect())?.to_tree();
    // Shape leaf carrying the k-th interval of r.
    let slot: Vec<usize> = r
        .intervals()
        .iter()
        .map(|j| {
            pairs
                .iter()
                .position(|p| &p.1 == j)
                .expect("pullback covers r")
        })
        .collect();
    let plain = r.to_tree();
    let ops: Vec<Mat> = (1..s.len()).map(|a| s.mu(a)).collect();

    let mut max_dev: f64 = 0.0;
    let mut count = 0usize;
    let mut check = |placed: &[(usize, &Mat)]| -> Result<()> {
        let mut a = vec![None; n];
        let mut b = vec![None; n];
        for (k, m) in placed {
            a[*k] = Some((*m).clone());
            b[slot[*k]] = Some((*m).clone());
        }
        let w = treestate::evaluate(&plain, &a, v, RootState::Cup)?;
        let wf = treestate::evaluate(&shape, &b, v, RootState::Cup)?;
        max_dev = max_dev.max((w - wf).norm());
        count += 1;
        Ok(())
    };
    for k in 0..n {
        for m in &ops {
            check(&[(k, m)])?;
        }
    }
    for k in 0..n {
        for l in k + 1..n {
            for m1 in &ops {
                for m2 in &ops {
                    check(&[(k, m1), (l, m2)])?;
                }
            }
        }
    }
    Ok(InvarianceReport {
        invariant: max_dev <= TOL_INVARIANCE,
        max_deviation: max_dev,
        insertions_checked: count,
        rotation_invariant: models::check_rotation(v).holds,
        level,
    })
}
