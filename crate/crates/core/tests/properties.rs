mod common;

use common::{points, refine, word};
use num_rational::BigRational;
use num_traits::Signed;
use proptest::prelude::*;
use tft_core::correlator::{
    n_point_on, n_point_transformed, n_point_vacuum, two_point_closed, CorrelatorRequest,
    CorrelatorState, FieldInsertion,
};
use tft_core::dyadic::{
    common_refinement, is_refinement, minimal_supporting_partition, tree_metric,
    tree_metric_formula, xor_sub, CirclePoint, DyadicPartition, DyadicRational,
};
use tft_core::models;
use tft_core::thompson::{compose, transformed_correlator, ThompsonElement};

fn dyadic(n: u64, l: u32) -> DyadicRational {
    DyadicRational::new(n % (1u64 << l), l).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn xor_difference_dominates(a in 0u64..1 << 16, b in 0u64..1 << 16) {
        prop_assume!(a != b);
        let (x, y) = (dyadic(a.min(b), 16), dyadic(a.max(b), 16));
        prop_assert!(xor_sub(&y, &x).to_rational() >= y.to_rational() - x.to_rational());
    }

    #[test]
    fn metric_matches_formula(l in 1u32..14, a in any::<u64>(), b in any::<u64>()) {
        let (x, y) = (dyadic(a, l), dyadic(b, l));
        prop_assume!(x != y);
        prop_assert_eq!(tree_metric(&x, &y, l).unwrap(), tree_metric_formula(&x, &y, l).unwrap());
        prop_assert_eq!(tree_metric(&x, &y, l).unwrap(), tree_metric(&y, &x, l).unwrap());
    }

    #[test]
    fn supporting_partition_separates(raw in prop::collection::vec((0u32..64, 1u32..40), 1..6)) {
        let pts = points(&raw);
        let p = minimal_supporting_partition(&pts).unwrap();
        prop_assert!(p.supports(&pts));
        // Merging any sibling pair puts two points together.
        let iv = p.intervals();
        for k in 0..iv.len().saturating_sub(1) {
            if iv[k].parent().is_some() && iv[k].parent() == iv[k + 1].parent() {
                let mut v = iv.to_vec();
                v.splice(k..=k + 1, [iv[k].parent().unwrap()]);
                prop_assert!(!DyadicPartition::new(v).unwrap().supports(&pts));
            }
        }
    }

    #[test]
    fn common_refinement_refines_both(a in prop::collection::vec(any::<usize>(), 0..8), b in prop::collection::vec(any::<usize>(), 0..8)) {
        let p = refine(&DyadicPartition::trivial(), &a, 8);
        let q = refine(&DyadicPartition::trivial(), &b, 8);
        let r = common_refinement(&p, &q);
        prop_assert!(is_refinement(&p, &r) && is_refinement(&q, &r));
        prop_assert_eq!(r.clone(), common_refinement(&q, &p));
    }

    #[test]
    fn group_laws(x in prop::collection::vec(0u8..8, 0..5), y in prop::collection::vec(0u8..8, 0..5), z in prop::collection::vec(0u8..8, 0..5)) {
        let (f, g, h) = (word(&x), word(&y), word(&z));
        prop_assert!(f.is_reduced());
        prop_assert_eq!(compose(&compose(&f, &g), &h), compose(&f, &compose(&g, &h)));
        prop_assert!(compose(&f, &f.inverse()).is_identity());
        prop_assert!(compose(&f.inverse(), &f).is_identity());
        prop_assert_eq!(compose(&f, &ThompsonElement::identity()), f.clone());
    }

    #[test]
    fn composition_is_pointwise(x in prop::collection::vec(0u8..8, 0..5), y in prop::collection::vec(0u8..8, 0..5), n in 0u32..97, q in 1u32..97) {
        let (f, g) = (word(&x), word(&y));
        let p = CirclePoint::new(n % q, q).unwrap();
        prop_assert_eq!(compose(&f, &g).apply(&p), f.apply(&g.apply(&p)));
        prop_assert_eq!(f.apply_inverse(&f.apply(&p)), p);
    }

    #[test]
    fn piecewise_round_trip(x in prop::collection::vec(0u8..8, 0..6)) {
        let f = word(&x);
        let pw = f.to_piecewise();
        prop_assert_eq!(ThompsonElement::from_piecewise(&pw).unwrap(), f.clone());
        for k in 0..16u32 {
            let p = CirclePoint::new(2 * k + 1, 32).unwrap();
            prop_assert_eq!(pw.eval(&p), f.apply(&p));
        }
    }

    #[test]
    fn find_good_is_good(x in prop::collection::vec(0u8..8, 0..5), picks in prop::collection::vec(any::<usize>(), 0..6)) {
        let f = word(&x);
        let p0 = refine(&DyadicPartition::trivial(), &picks, 6);
        let p = f.find_good(&p0);
        prop_assert!(f.good_partition(&p) && is_refinement(&p0, &p));
        // Images of a good partition's intervals are standard.
        prop_assert!(f.image_partition(&p).is_ok());
    }
}

fn close(a: num_complex::Complex64, b: num_complex::Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + b.norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn refinement_stability(
        raw in prop::collection::vec((0u32..64, 1u32..24), 1..4),
        labels in prop::collection::vec(0usize..9, 4),
        picks in prop::collection::vec(any::<usize>(), 0..8),
    ) {
        let m = models::qutrit();
        let pts = points(&raw);
        let ins: Vec<FieldInsertion> = pts.iter().zip(&labels).map(|(p, &a)| FieldInsertion::new(p.clone(), a)).collect();
        let base = n_point_vacuum(&ins, &m).unwrap();
        let p = minimal_supporting_partition(&pts).unwrap();
        let v = n_point_on(&ins, &refine(&p, &picks, 10), &m).unwrap();
        prop_assert!((v - base).norm() <= 1e-12, "{} vs {}", v, base);
    }

    #[test]
    fn covariance_law(
        x in prop::collection::vec(0u8..8, 0..5),
        raw in prop::collection::vec((0u32..64, 1u32..24), 1..3),
        labels in prop::collection::vec(0usize..9, 2),
        fixture in any::<bool>(),
    ) {
        let m = if fixture { models::fixture() } else { models::qutrit() };
        let f = word(&x);
        let pts = points(&raw);
        let ins: Vec<FieldInsertion> = pts.iter().zip(&labels).map(|(p, &a)| FieldInsertion::new(p.clone(), a)).collect();
        let direct = n_point_transformed(&f, &ins, &m).unwrap().value;
        let law = transformed_correlator(&f, &ins, &m).unwrap();
        prop_assert!(close(law, direct, 1e-10), "{} vs {}", law, direct);
    }

    #[test]
    fn closed_form_on_dyadic_pairs(a in 0u64..256, b in 0u64..256, al in 0usize..9, be in 0usize..9) {
        prop_assume!(a != b);
        let m = models::fixture();
        let (x, y) = (dyadic(a.min(b), 8).to_point(), dyadic(a.max(b), 8).to_point());
        let closed = two_point_closed(&x, &y, al, be, &m).unwrap();
        let req = CorrelatorRequest {
            insertions: vec![FieldInsertion::new(x, al), FieldInsertion::new(y, be)],
            state: CorrelatorState::Vacuum,
        };
        let engine = tft_core::correlator::n_point(&req, &m).unwrap().value;
        prop_assert!(close(closed, engine, 1e-10), "{} vs {}", closed, engine);
    }
}

#[test]
fn negative_rationals_wrap() {
    let third = BigRational::new((-1).into(), 3.into());
    assert!(third.is_negative());
    assert_eq!(CirclePoint::wrap(third), CirclePoint::new(2, 3).unwrap());
}
