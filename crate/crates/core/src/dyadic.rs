//! Exact arithmetic on the circle `[0,1)`: dyadic rationals, rational points
//! with lazily generated binary digits, standard dyadic intervals, standard
//! dyadic partitions and the binary trees that index them.
//!
//! All intervals are half-open, including the last one of a partition.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Deepest partition level accepted unless a caller asks for more.
pub const DEFAULT_MAX_LEVEL: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DyadicError {
    #[error("level underflow: {value} is not representable at level {level}")]
    LevelUnderflow { value: String, level: u32 },
    #[error("coincident points")]
    CoincidentPoints,
    #[error("coincident insertions at {0}")]
    CoincidentInsertions(String),
    #[error("unordered tuple: {0} does not precede {1}")]
    UnorderedTuple(String, String),
    #[error("empty tuple")]
    EmptyTuple,
    #[error("level limit exceeded: level {needed} requested, limit is {max}")]
    LevelLimit { needed: u32, max: u32 },
    #[error("value {0} outside [0,1)")]
    OutOfRange(String),
    #[error("not a dyadic rational: {0}")]
    NotDyadic(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("cannot parse {0:?}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, DyadicError>;

fn pow2(l: u32) -> BigUint {
    BigUint::one() << l
}

fn bit_len(n: &BigUint) -> u64 {
    n.bits()
}

// ---------------------------------------------------------------------------
// DyadicRational

/// `a / 2^l` in `[0,1)`, stored in canonical form (`a` odd or `l = 0`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DyadicRational {
    num: BigUint,
    level: u32,
}

impl DyadicRational {
    pub fn new(num: impl Into<BigUint>, level: u32) -> Result<Self> {
        let num = num.into();
        if num >= pow2(level) {
            return Err(DyadicError::OutOfRange(format!("{num}/2^{level}")));
        }
        Ok(Self::canonical(num, level))
    }

    fn canonical(mut num: BigUint, mut level: u32) -> Self {
        if num.is_zero() {
            return Self { num, level: 0 };
        }
        let tz = num.trailing_zeros().unwrap_or(0).min(level as u64) as u32;
        num >>= tz;
        level -= tz;
        Self { num, level }
    }

    pub fn zero() -> Self {
        Self {
            num: BigUint::zero(),
            level: 0,
        }
    }

    pub fn numerator(&self) -> &BigUint {
        &self.num
    }

    /// Level of the canonical form.
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Numerator of the same value written over `2^level`.
    pub fn numerator_at(&self, level: u32) -> Result<BigUint> {
        if level < self.level {
            return Err(DyadicError::LevelUnderflow {
                value: self.to_string(),
                level,
            });
        }
        Ok(&self.num << (level - self.level))
    }

    /// `⌊log₂ x⌋` from the position of the leading bit; `None` for zero.
    pub fn floor_log2(&self) -> Option<i64> {
        if self.num.is_zero() {
            None
        } else {
            Some(bit_len(&self.num) as i64 - 1 - self.level as i64)
        }
    }

    /// `2^(-l)` for `l ≥ 1`.
    pub fn pow2_neg(l: u32) -> Self {
        assert!(l > 0, "2^0 is not in [0,1)");
        Self {
            num: BigUint::one(),
            level: l,
        }
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(
            BigInt::from(self.num.clone()),
            BigInt::from(pow2(self.level)),
        )
    }

    pub fn from_rational(r: &BigRational) -> Result<Self> {
        CirclePoint::from_rational(r.clone())?
            .as_dyadic()
            .ok_or_else(|| DyadicError::NotDyadic(r.to_string()))
    }

    pub fn to_f64(&self) -> f64 {
        self.to_rational().to_f64().unwrap_or(f64::NAN)
    }

    pub fn to_point(&self) -> CirclePoint {
        CirclePoint {
            value: self.to_rational(),
        }
    }

    /// Binary expansion `0.b1b2…bl`.
    pub fn to_binary_string(&self) -> String {
        if self.level == 0 {
            return "0.0".to_string();
        }
        let digits = self.num.to_str_radix(2);
        format!(
            "0.{}{}",
            "0".repeat(self.level as usize - digits.len()),
            digits
        )
    }
}

impl Ord for DyadicRational {
    fn cmp(&self, other: &Self) -> Ordering {
        let l = self.level.max(other.level);
        let a = &self.num << (l - self.level);
        let b = &other.num << (l - other.level);
        a.cmp(&b)
    }
}

impl PartialOrd for DyadicRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.num.is_zero() {
            write!(f, "0")
        } else {
            write!(f, "{}/{}", self.num, pow2(self.level))
        }
    }
}

impl FromStr for DyadicRational {
    type Err = DyadicError;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((a, l)) = s.split_once("/2^") {
            let a: BigUint = a.trim().parse().map_err(|_| DyadicError::Parse(s.into()))?;
            let l: u32 = l.trim().parse().map_err(|_| DyadicError::Parse(s.into()))?;
            return Self::new(a, l);
        }
        let p: CirclePoint = s.parse()?;
        p.as_dyadic()
            .ok_or_else(|| DyadicError::NotDyadic(s.into()))
    }
}

impl Serialize for DyadicRational {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for DyadicRational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// CirclePoint

/// Exact rational point `p/q` of `[0,1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CirclePoint {
    value: BigRational,
}

impl CirclePoint {
    pub fn new(p: impl Into<BigInt>, q: impl Into<BigInt>) -> Result<Self> {
        let q = q.into();
        if q.is_zero() {
            return Err(DyadicError::Parse("zero denominator".into()));
        }
        Self::from_rational(BigRational::new(p.into(), q))
    }

    pub fn from_rational(value: BigRational) -> Result<Self> {
        if value < BigRational::zero() || value >= BigRational::one() {
            return Err(DyadicError::OutOfRange(value.to_string()));
        }
        Ok(Self { value })
    }

    /// Reduces any rational into `[0,1)`.
    pub fn wrap(value: BigRational) -> Self {
        let fl = value.floor();
        Self { value: value - fl }
    }

    pub fn zero() -> Self {
        Self {
            value: BigRational::zero(),
        }
    }

    pub fn value(&self) -> &BigRational {
        &self.value
    }

    pub fn to_f64(&self) -> f64 {
        self.value.to_f64().unwrap_or(f64::NAN)
    }

    /// `⌊2^k x⌋`, i.e. the first `k` binary digits read as an integer.
    pub fn prefix(&self, k: u32) -> BigUint {
        let num = self.value.numer().to_biguint().expect("non-negative");
        let den = self.value.denom().to_biguint().expect("positive");
        (num << k) / den
    }

    /// The `k`-th binary digit (`k ≥ 1`).
    pub fn digit(&self, k: u32) -> bool {
        self.prefix(k).bit(0)
    }

    /// Lazily generated binary digits `b1, b2, …` by repeated doubling.
    pub fn digits(&self) -> impl Iterator<Item = bool> {
        let mut num = self.value.numer().to_biguint().expect("non-negative");
        let den = self.value.denom().to_biguint().expect("positive");
        std::iter::from_fn(move || {
            num <<= 1;
            let bit = num >= den;
            if bit {
                num -= &den;
            }
            Some(bit)
        })
    }

    pub fn as_dyadic(&self) -> Option<DyadicRational> {
        let den = self.value.denom().to_biguint()?;
        if den.count_ones() != 1 {
            return None;
        }
        let level = (bit_len(&den) - 1) as u32;
        Some(DyadicRational::canonical(
            self.value.numer().to_biguint()?,
            level,
        ))
    }

    /// Length of the common binary prefix of two distinct points.
    pub fn common_prefix_len(&self, other: &Self) -> Result<u32> {
        if self == other {
            return Err(DyadicError::CoincidentPoints);
        }
        let n = self
            .digits()
            .zip(other.digits())
            .take_while(|(a, b)| a == b)
            .count();
        Ok(n as u32)
    }
}

impl Ord for CirclePoint {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value.cmp(&other.value)
    }
}

impl PartialOrd for CirclePoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<DyadicRational> for CirclePoint {
    fn from(x: DyadicRational) -> Self {
        x.to_point()
    }
}

impl fmt::Display for CirclePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.value.is_zero() {
            write!(f, "0")
        } else {
            write!(f, "{}/{}", self.value.numer(), self.value.denom())
        }
    }
}

impl FromStr for CirclePoint {
    type Err = DyadicError;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let err = || DyadicError::Parse(s.to_string());
        if let Some(bits) = s.strip_prefix("0.") {
            if bits.is_empty() || !bits.chars().all(|c| c == '0' || c == '1') {
                return Err(err());
            }
            let num = BigUint::parse_bytes(bits.as_bytes(), 2).ok_or_else(err)?;
            let den = pow2(bits.len() as u32);
            return Self::from_rational(BigRational::new(num.into(), den.into()));
        }
        if let Some((a, l)) = s.split_once("/2^") {
            let d: DyadicRational = format!("{}/2^{}", a, l).parse()?;
            return Ok(d.to_point());
        }
        let (p, q) = s.split_once('/').unwrap_or((s, "1"));
        let p: BigInt = p.trim().parse().map_err(|_| err())?;
        let q: BigInt = q.trim().parse().map_err(|_| err())?;
        Self::new(p, q)
    }
}

impl Serialize for CirclePoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for CirclePoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// StdInterval

/// Standard dyadic interval `[a/2^l, (a+1)/2^l)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StdInterval {
    left: BigUint,
    level: u32,
}

impl StdInterval {
    pub fn new(left: impl Into<BigUint>, level: u32) -> Result<Self> {
        let left = left.into();
        if left >= pow2(level) {
            return Err(DyadicError::OutOfRange(format!("{left}/2^{level}")));
        }
        Ok(Self { left, level })
    }

    pub fn unit() -> Self {
        Self {
            left: BigUint::zero(),
            level: 0,
        }
    }

    pub fn left_numerator(&self) -> &BigUint {
        &self.left
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// `log₂|I| = -level`.
    pub fn log2_len(&self) -> i64 {
        -(self.level as i64)
    }

    pub fn left_end(&self) -> DyadicRational {
        DyadicRational::canonical(self.left.clone(), self.level)
    }

    /// Right endpoint as a rational (may equal 1).
    pub fn right_end(&self) -> BigRational {
        BigRational::new(
            BigInt::from(&self.left + 1u32),
            BigInt::from(pow2(self.level)),
        )
    }

    pub fn children(&self) -> (Self, Self) {
        let l: BigUint = &self.left << 1u32;
        (
            Self {
                left: l.clone(),
                level: self.level + 1,
            },
            Self {
                left: l + 1u32,
                level: self.level + 1,
            },
        )
    }

    pub fn parent(&self) -> Option<Self> {
        (self.level > 0).then(|| Self {
            left: &self.left >> 1,
            level: self.level - 1,
        })
    }

    pub fn is_left_child(&self) -> bool {
        self.level > 0 && !self.left.bit(0)
    }

    pub fn contains_point(&self, x: &CirclePoint) -> bool {
        x.prefix(self.level) == self.left
    }

    /// `self ⊆ other`.
    pub fn is_within(&self, other: &Self) -> bool {
        self.level >= other.level && (&self.left >> (self.level - other.level)) == other.left
    }

    pub fn overlap(&self, lo: &BigRational, hi: &BigRational) -> BigRational {
        let a = self.left_end().to_rational();
        let b = self.right_end();
        let lo = if &a > lo { a } else { lo.clone() };
        let hi = if &b < hi { b } else { hi.clone() };
        if hi > lo {
            hi - lo
        } else {
            BigRational::zero()
        }
    }

    /// Position of `sub ⊆ self` read as the sub-interval offset at `sub`'s level.
    pub(crate) fn offset_of(&self, sub: &Self) -> BigUint {
        &sub.left - (&self.left << (sub.level - self.level))
    }

    /// Sub-interval of `self` at relative depth `depth` and offset `offset`.
    pub(crate) fn descend(&self, depth: u32, offset: &BigUint) -> Self {
        Self {
            left: (&self.left << depth) + offset,
            level: self.level + depth,
        }
    }
}

impl Ord for StdInterval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.left_end()
            .cmp(&other.left_end())
            .then(self.level.cmp(&other.level))
    }
}

impl PartialOrd for StdInterval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for StdInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.left, self.level)
    }
}

impl FromStr for StdInterval {
    type Err = DyadicError;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let (a, l) = t
            .split_once("/2^")
            .ok_or_else(|| DyadicError::Parse(s.into()))?;
        let a: BigUint = a.trim().parse().map_err(|_| DyadicError::Parse(s.into()))?;
        let l: u32 = l.trim().parse().map_err(|_| DyadicError::Parse(s.into()))?;
        Self::new(a, l)
    }
}

impl Serialize for StdInterval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for StdInterval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// BinaryTree

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BinaryTree {
    Leaf,
    Caret(Box<BinaryTree>, Box<BinaryTree>),
}

impl BinaryTree {
    pub fn caret(l: BinaryTree, r: BinaryTree) -> Self {
        BinaryTree::Caret(Box::new(l), Box::new(r))
    }

    /// Complete binary tree with `2^depth` leaves.
    pub fn regular(depth: u32) -> Self {
        if depth == 0 {
            BinaryTree::Leaf
        } else {
            let t = Self::regular(depth - 1);
            Self::caret(t.clone(), t)
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            BinaryTree::Leaf => 1,
            BinaryTree::Caret(l, r) => l.leaf_count() + r.leaf_count(),
        }
    }

    pub fn caret_count(&self) -> usize {
        self.leaf_count() - 1
    }

    pub fn depth(&self) -> u32 {
        match self {
            BinaryTree::Leaf => 0,
            BinaryTree::Caret(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Smallest tree containing both (the tree of the common refinement).
    pub fn union(&self, other: &Self) -> Self {
        match (self, other) {
            (BinaryTree::Leaf, t) | (t, BinaryTree::Leaf) => t.clone(),
            (BinaryTree::Caret(a, b), BinaryTree::Caret(c, d)) => {
                Self::caret(a.union(c), b.union(d))
            }
        }
    }

    /// Leaf intervals in left-to-right order.
    pub fn intervals(&self) -> Vec<StdInterval> {
        fn go(t: &BinaryTree, at: StdInterval, out: &mut Vec<StdInterval>) {
            match t {
                BinaryTree::Leaf => out.push(at),
                BinaryTree::Caret(l, r) => {
                    let (a, b) = at.children();
                    go(l, a, out);
                    go(r, b, out);
                }
            }
        }
        let mut out = Vec::with_capacity(self.leaf_count());
        go(self, StdInterval::unit(), &mut out);
        out
    }

    pub fn to_partition(&self) -> DyadicPartition {
        DyadicPartition {
            intervals: self.intervals(),
        }
    }

    /// All trees with exactly `n` leaves, in a fixed order.
    pub fn all_with_leaves(n: usize) -> Vec<BinaryTree> {
        if n == 1 {
            return vec![BinaryTree::Leaf];
        }
        let mut out = Vec::new();
        for k in 1..n {
            let ls = Self::all_with_leaves(k);
            let rs = Self::all_with_leaves(n - k);
            for l in &ls {
                for r in &rs {
                    out.push(Self::caret(l.clone(), r.clone()));
                }
            }
        }
        out
    }

    fn write_nested(&self, out: &mut String) {
        match self {
            BinaryTree::Leaf => out.push_str("[]"),
            BinaryTree::Caret(l, r) => {
                out.push('[');
                l.write_nested(out);
                out.push(',');
                r.write_nested(out);
                out.push(']');
            }
        }
    }

    fn from_json(v: &serde_json::Value) -> std::result::Result<Self, String> {
        let arr = v.as_array().ok_or("tree nodes must be arrays")?;
        match arr.len() {
            0 => Ok(BinaryTree::Leaf),
            2 => Ok(Self::caret(
                Self::from_json(&arr[0])?,
                Self::from_json(&arr[1])?,
            )),
            n => Err(format!("tree node with {n} children")),
        }
    }
}

/// Nested-array notation: a leaf is `[]`, a caret is `[left,right]`.
impl fmt::Display for BinaryTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write_nested(&mut s);
        f.write_str(&s)
    }
}

impl FromStr for BinaryTree {
    type Err = DyadicError;
    fn from_str(s: &str) -> Result<Self> {
        let v: serde_json::Value =
            serde_json::from_str(s).map_err(|_| DyadicError::Parse(s.into()))?;
        Self::from_json(&v).map_err(DyadicError::Parse)
    }
}

impl Serialize for BinaryTree {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: serde_json::Value =
            serde_json::from_str(&self.to_string()).expect("nested arrays are valid JSON");
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for BinaryTree {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        Self::from_json(&v).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// DyadicPartition

/// A standard dyadic partition of `[0,1)`, intervals in increasing order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DyadicPartition {
    intervals: Vec<StdInterval>,
}

impl DyadicPartition {
    pub fn trivial() -> Self {
        Self {
            intervals: vec![StdInterval::unit()],
        }
    }

    pub fn regular(level: u32) -> Self {
        BinaryTree::regular(level).to_partition()
    }

    /// Validates that the intervals tile `[0,1)` in order.
    pub fn new(intervals: Vec<StdInterval>) -> Result<Self> {
        let tree = Self::build_tree(&intervals)?;
        debug_assert_eq!(tree.leaf_count(), intervals.len());
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> &[StdInterval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn max_level(&self) -> u32 {
        self.intervals.iter().map(|i| i.level).max().unwrap_or(0)
    }

    pub fn to_tree(&self) -> BinaryTree {
        Self::build_tree(&self.intervals).expect("validated on construction")
    }

    fn build_tree(intervals: &[StdInterval]) -> Result<BinaryTree> {
        tree_below(intervals, &StdInterval::unit())
    }

    /// `self ⪯ q`: every interval of `q` lies inside an interval of `self`.
    pub fn is_refined_by(&self, q: &DyadicPartition) -> bool {
        is_refinement(self, q)
    }

    /// Index of the interval containing `x`.
    pub fn locate(&self, x: &CirclePoint) -> usize {
        self.intervals
            .iter()
            .position(|i| i.contains_point(x))
            .expect("a partition covers [0,1)")
    }

    pub fn supports(&self, points: &[CirclePoint]) -> bool {
        let mut seen = vec![false; self.len()];
        for p in points {
            let k = self.locate(p);
            if seen[k] {
                return false;
            }
            seen[k] = true;
        }
        true
    }
}

/// Tree whose leaves are `intervals`, which must tile `at` in order.
pub fn tree_below(intervals: &[StdInterval], at: &StdInterval) -> Result<BinaryTree> {
    fn go(ivs: &[StdInterval], at: &StdInterval) -> Result<BinaryTree> {
        match ivs {
            [] => Err(DyadicError::InvalidPartition(format!("gap at {at}"))),
            [one] if one == at => Ok(BinaryTree::Leaf),
            _ => {
                if ivs.iter().any(|i| i.level <= at.level) {
                    return Err(DyadicError::InvalidPartition(format!(
                        "overlap inside {at}"
                    )));
                }
                let (a, b) = at.children();
                let split = ivs
                    .iter()
                    .position(|i| !i.is_within(&a))
                    .unwrap_or(ivs.len());
                if ivs[split..].iter().any(|i| !i.is_within(&b)) {
                    return Err(DyadicError::InvalidPartition(format!(
                        "intervals out of order inside {at}"
                    )));
                }
                Ok(BinaryTree::caret(
                    go(&ivs[..split], &a)?,
                    go(&ivs[split..], &b)?,
                ))
            }
        }
    }
    go(intervals, at)
}

impl fmt::Display for DyadicPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.intervals.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl FromStr for DyadicPartition {
    type Err = DyadicError;
    fn from_str(s: &str) -> Result<Self> {
        let t = s
            .trim()
            .trim_start_matches(['{', '['])
            .trim_end_matches(['}', ']']);
        let ivs = t
            .split(',')
            .filter(|x| !x.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<StdInterval>>>()?;
        Self::new(ivs)
    }
}

impl Serialize for DyadicPartition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.intervals.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DyadicPartition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<StdInterval>::deserialize(d)?;
        Self::new(v).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Operations

/// `y ⊖ x`: digit-wise XOR of the binary expansions.
pub fn xor_sub(y: &DyadicRational, x: &DyadicRational) -> DyadicRational {
    let l = y.level.max(x.level);
    let a = (&y.num << (l - y.level)) ^ (&x.num << (l - x.level));
    DyadicRational::canonical(a, l)
}

/// Distance between two leaves of the regular tree with `2^level` leaves,
/// by the recursive definition (strip the last digit until equal).
pub fn tree_metric(x: &DyadicRational, y: &DyadicRational, level: u32) -> Result<u32> {
    let mut a = x.numerator_at(level)?;
    let mut b = y.numerator_at(level)?;
    let mut d = 0;
    while a != b {
        a >>= 1;
        b >>= 1;
        d += 1;
    }
    Ok(d)
}

/// `l + 1 + ⌊log₂(y ⊖ x)⌋`.
pub fn tree_metric_formula(x: &DyadicRational, y: &DyadicRational, level: u32) -> Result<u32> {
    x.numerator_at(level)?;
    y.numerator_at(level)?;
    let lg = xor_sub(y, x)
        .floor_log2()
        .ok_or(DyadicError::CoincidentPoints)?;
    Ok((level as i64 + 1 + lg) as u32)
}

/// `D(x,y) = 2^(-l-1)` where `l` is the length of the common binary prefix.
pub fn coarse_grain_distance(x: &CirclePoint, y: &CirclePoint) -> Result<DyadicRational> {
    let l = x.common_prefix_len(y)?;
    Ok(DyadicRational::pow2_neg(l + 1))
}

fn check_ordered(points: &[CirclePoint]) -> Result<()> {
    if points.is_empty() {
        return Err(DyadicError::EmptyTuple);
    }
    for w in points.windows(2) {
        match w[0].cmp(&w[1]) {
            Ordering::Less => {}
            Ordering::Equal => return Err(DyadicError::CoincidentInsertions(w[0].to_string())),
            Ordering::Greater => {
                return Err(DyadicError::UnorderedTuple(
                    w[0].to_string(),
                    w[1].to_string(),
                ))
            }
        }
    }
    Ok(())
}

/// Coarsest standard dyadic partition with at most one point per interval.
pub fn minimal_supporting_partition(points: &[CirclePoint]) -> Result<DyadicPartition> {
    minimal_supporting_partition_with_limit(points, DEFAULT_MAX_LEVEL)
}

pub fn minimal_supporting_partition_with_limit(
    points: &[CirclePoint],
    max_level: u32,
) -> Result<DyadicPartition> {
    check_ordered(points)?;
    // Descend while a node holds two or more points; the points are sorted,
    // so each child's points form a contiguous run.
    fn go(
        pts: &[CirclePoint],
        at: StdInterval,
        max_level: u32,
        out: &mut Vec<StdInterval>,
    ) -> Result<()> {
        if pts.len() <= 1 {
            out.push(at);
            return Ok(());
        }
        if at.level >= max_level {
            return Err(DyadicError::LevelLimit {
                needed: at.level + 1,
                max: max_level,
            });
        }
        let (a, b) = at.children();
        let split = pts
            .iter()
            .position(|p| !a.contains_point(p))
            .unwrap_or(pts.len());
        go(&pts[..split], a, max_level, out)?;
        go(&pts[split..], b, max_level, out)
    }
    let mut out = Vec::new();
    go(points, StdInterval::unit(), max_level, &mut out)?;
    Ok(DyadicPartition { intervals: out })
}

/// `P ⪯ Q`.
pub fn is_refinement(p: &DyadicPartition, q: &DyadicPartition) -> bool {
    let mut k = 0;
    for j in &q.intervals {
        while k < p.intervals.len() && !j.is_within(&p.intervals[k]) {
            if p.intervals[k].left_end() > j.left_end() {
                return false;
            }
            k += 1;
        }
        if k == p.intervals.len() {
            return false;
        }
    }
    true
}

pub fn common_refinement(p: &DyadicPartition, q: &DyadicPartition) -> DyadicPartition {
    p.to_tree().union(&q.to_tree()).to_partition()
}

pub fn tree_to_partition(t: &BinaryTree) -> DyadicPartition {
    t.to_partition()
}

pub fn partition_to_tree(p: &DyadicPartition) -> BinaryTree {
    p.to_tree()
}

pub fn containing_interval(p: &DyadicPartition, x: &CirclePoint) -> StdInterval {
    p.intervals[p.locate(x)].clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> DyadicRational {
        s.parse().unwrap()
    }

    fn pt(s: &str) -> CirclePoint {
        s.parse().unwrap()
    }

    fn part(s: &str) -> DyadicPartition {
        s.parse().unwrap()
    }

    #[test]
    fn xor_examples() {
        assert_eq!(xor_sub(&d("15/32"), &d("13/32")), d("1/16"));
        assert_eq!(xor_sub(&d("0.01111"), &d("0.01101")), d("0.0001"));
        let x = d("5/8");
        assert_eq!(xor_sub(&x, &x), DyadicRational::zero());
        assert_eq!(xor_sub(&x, &DyadicRational::zero()), x);
    }

    #[test]
    fn metric_examples() {
        assert_eq!(tree_metric(&d("13/32"), &d("15/32"), 5).unwrap(), 2);
        assert_eq!(tree_metric_formula(&d("13/32"), &d("15/32"), 5).unwrap(), 2);
        assert_eq!(tree_metric(&d("0"), &d("1/2"), 1).unwrap(), 1);
        assert_eq!(tree_metric(&d("3/8"), &d("3/8"), 4).unwrap(), 0);
        assert_eq!(tree_metric_formula(&d("0"), &d("1/64"), 6).unwrap(), 1);
        assert!(matches!(
            tree_metric(&d("1/8"), &d("0"), 2),
            Err(DyadicError::LevelUnderflow { .. })
        ));
        assert_eq!(
            tree_metric_formula(&d("1/8"), &d("1/8"), 3),
            Err(DyadicError::CoincidentPoints)
        );
    }

    #[test]
    fn coarse_distance() {
        assert_eq!(
            coarse_grain_distance(&pt("0"), &pt("1/2")).unwrap(),
            d("1/2")
        );
        assert_eq!(
            coarse_grain_distance(&pt("3/8"), &pt("1/2")).unwrap(),
            d("1/2")
        );
        assert_eq!(
            coarse_grain_distance(&pt("3/8"), &pt("2/8")).unwrap(),
            d("1/8")
        );
        // 5/8 = 0.101, 11/16 = 0.1011: common prefix 101
        assert_eq!(
            coarse_grain_distance(&pt("5/8"), &pt("11/16")).unwrap(),
            d("1/16")
        );
        assert_eq!(
            coarse_grain_distance(&pt("1/3"), &pt("1/3")),
            Err(DyadicError::CoincidentPoints)
        );
    }

    #[test]
    fn supporting_partition_example() {
        let pts = [pt("1/7"), pt("2/3"), pt("5/6")];
        let p = minimal_supporting_partition(&pts).unwrap();
        assert_eq!(p, part("{0/2^1, 2/2^2, 3/2^2}"));
        assert_eq!(
            minimal_supporting_partition(&[pt("1/3")]).unwrap(),
            DyadicPartition::trivial()
        );
        assert!(matches!(
            minimal_supporting_partition(&[pt("1/3"), pt("1/3")]),
            Err(DyadicError::CoincidentInsertions(_))
        ));
        assert!(matches!(
            minimal_supporting_partition(&[pt("2/3"), pt("1/3")]),
            Err(DyadicError::UnorderedTuple(..))
        ));
        assert!(matches!(
            minimal_supporting_partition_with_limit(&[pt("0"), pt("1/1024")], 8),
            Err(DyadicError::LevelLimit { .. })
        ));
    }

    #[test]
    fn refinement_and_union() {
        let p = part("{0/2^1, 1/2^1}");
        let q = part("{0/2^1, 2/2^2, 3/2^2}");
        assert!(is_refinement(&p, &q));
        assert!(!is_refinement(&q, &p));
        assert!(is_refinement(&p, &p));
        assert!(is_refinement(&DyadicPartition::trivial(), &q));
        let r = part("{0/2^2, 1/2^2, 1/2^1}");
        assert_eq!(
            common_refinement(&q, &r),
            part("{0/2^2, 1/2^2, 2/2^2, 3/2^2}")
        );
        assert_eq!(common_refinement(&DyadicPartition::trivial(), &q), q);
    }

    #[test]
    fn tree_bijection_examples() {
        assert_eq!(BinaryTree::Leaf.to_partition(), DyadicPartition::trivial());
        let t = BinaryTree::caret(BinaryTree::Leaf, BinaryTree::Leaf);
        assert_eq!(t.to_partition(), part("{0/2^1, 1/2^1}"));
        let t = BinaryTree::caret(
            BinaryTree::caret(BinaryTree::Leaf, BinaryTree::Leaf),
            BinaryTree::Leaf,
        );
        assert_eq!(t.to_partition(), part("{0/2^2, 1/2^2, 1/2^1}"));
        assert_eq!(t.to_partition().to_tree(), t);
        assert_eq!(t.to_string(), "[[[],[]],[]]");
        assert_eq!(t.to_string().parse::<BinaryTree>().unwrap(), t);
    }

    #[test]
    fn containing() {
        let p = part("{0/2^1, 1/2^1}");
        assert_eq!(
            containing_interval(&p, &pt("1/2")),
            "1/2^1".parse().unwrap()
        );
        let q = part("{0/2^1, 2/2^2, 3/2^2}");
        assert_eq!(
            containing_interval(&q, &pt("2/3")),
            "2/2^2".parse().unwrap()
        );
        assert_eq!(
            containing_interval(&DyadicPartition::trivial(), &pt("5/6")),
            StdInterval::unit()
        );
    }

    #[test]
    fn invalid_partitions() {
        assert!("{0/2^1}".parse::<DyadicPartition>().is_err());
        assert!("{0/2^1, 0/2^1, 1/2^1}".parse::<DyadicPartition>().is_err());
        assert!("{1/2^1, 0/2^1}".parse::<DyadicPartition>().is_err());
        assert!("{0/2^2, 1/2^1, 1/2^2}".parse::<DyadicPartition>().is_err());
    }

    #[test]
    fn parse_round_trip() {
        for s in ["0", "1/2", "13/32", "1/7", "5/6"] {
            assert_eq!(pt(s).to_string(), s);
        }
        assert_eq!(pt("0.01101"), pt("13/32"));
        assert_eq!(d("13/32").to_binary_string(), "0.01101");
        assert_eq!(d("0.01101").to_string(), "13/32");
        assert_eq!(d("3/2^3"), d("3/8"));
        assert!("1/3".parse::<DyadicRational>().is_err());
        assert!("3/2".parse::<CirclePoint>().is_err());
        assert!("4/2^2".parse::<StdInterval>().is_err());
        let i: StdInterval = "5/2^3".parse().unwrap();
        assert_eq!(i.to_string(), "5/2^3");
        let p = part("{0/2^1, 2/2^2, 3/2^2}");
        assert_eq!(p.to_string().parse::<DyadicPartition>().unwrap(), p);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<DyadicPartition>(&json).unwrap(), p);
    }

    #[test]
    fn digits_by_doubling() {
        let x = pt("1/3");
        let got: Vec<bool> = x.digits().take(6).collect();
        assert_eq!(got, [false, true, false, true, false, true]);
        assert_eq!(x.prefix(4), BigUint::from(5u32));
        assert!(!x.digit(1) && x.digit(2));
    }

    #[test]
    fn catalan_counts() {
        let counts: Vec<usize> = (1..=8)
            .map(|n| BinaryTree::all_with_leaves(n).len())
            .collect();
        assert_eq!(counts, [1, 1, 2, 5, 14, 42, 132, 429]);
    }
}
