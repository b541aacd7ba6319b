#![allow(dead_code)]

use tft_core::dyadic::{CirclePoint, DyadicPartition};
use tft_core::thompson::{compose, generator, ThompsonElement};

pub const LETTERS: [&str; 4] = ["A", "B", "C", "S"];

/// Product of generators and inverses; letter `k` is `LETTERS[k / 2]`,
/// inverted when `k` is odd.
pub fn word(letters: &[u8]) -> ThompsonElement {
    letters.iter().fold(ThompsonElement::identity(), |acc, &k| {
        let g = generator(LETTERS[(k as usize / 2) % 4]).unwrap();
        let g = if k % 2 == 1 { g.inverse() } else { g };
        compose(&acc, &g)
    })
}

/// Splits intervals chosen by `picks`, skipping those already at `max_level`.
pub fn refine(p: &DyadicPartition, picks: &[usize], max_level: u32) -> DyadicPartition {
    let mut v = p.intervals().to_vec();
    for &k in picks {
        let k = k % v.len();
        if v[k].level() >= max_level {
            continue;
        }
        let (l, r) = v[k].children();
        v.splice(k..=k, [l, r]);
    }
    DyadicPartition::new(v).unwrap()
}

/// Distinct sorted points `n/q`; `q` is a power of two or odd.
pub fn points(raw: &[(u32, u32)]) -> Vec<CirclePoint> {
    let mut pts: Vec<CirclePoint> = raw
        .iter()
        .map(|&(n, q)| {
            let q = q.max(1);
            CirclePoint::new(n % q, q).unwrap()
        })
        .collect();
    pts.sort();
    pts.dedup();
    pts
}
