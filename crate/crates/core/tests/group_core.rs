mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use common::*;
use equin::group::{
    enumerate_subgroup, exp_map, left_translate, log_map, metric_dg, sample_haar, AlgebraVector,
    FiniteSubgroupSpec, GroupElement, GroupError, GroupSet, GroupSpec, SubgroupKind,
};
use equin::random_stream;
use proptest::prelude::*;
use rand::Rng;

fn rot2(t: f64) -> GroupElement<f64> {
    GroupElement::rotation2(t)
}

#[test]
fn identity_matrices() {
    for (spec, n) in [
        (GroupSpec::So2, 2),
        (GroupSpec::So3, 3),
        (GroupSpec::Torus(2), 4),
    ] {
        let e = GroupElement::<f64>::identity(&spec);
        for i in 0..n {
            for j in 0..n {
                assert_eq!(e.matrix()[i * n + j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }
    assert_eq!(
        GroupElement::<f64>::identity(&GroupSpec::So2).params(),
        &[0.0]
    );
    assert_eq!(
        GroupElement::<f64>::identity(&GroupSpec::So3).params()[3],
        0.0
    );
    assert_eq!(
        GroupElement::<f64>::identity(&GroupSpec::Torus(2)).params(),
        &[0.0, 0.0]
    );
}

#[test]
fn compose_examples() {
    let g = rot2(PI / 3.0).compose(&rot2(PI / 3.0)).unwrap();
    assert!((g.params()[0] - 2.0 * PI / 3.0).abs() < 1e-12);

    let h = GroupElement::rotation3([0.3, -0.2, 0.9], 1.1);
    let e = GroupElement::identity(&GroupSpec::So3);
    assert!(max_abs_diff(h.compose(&e).unwrap().matrix(), h.matrix()) < 1e-12);

    let q = GroupElement::rotation3([0.0, 0.0, 1.0], FRAC_PI_2);
    let half = q.compose(&q).unwrap();
    let expected = matmul(q.matrix(), q.matrix());
    assert!(max_abs_diff(half.matrix(), &expected) < 1e-12);
    assert!(
        max_abs_diff(
            half.matrix(),
            GroupElement::rotation3([0.0, 0.0, 1.0], PI).matrix()
        ) < 1e-12
    );

    let err = rot2(0.1)
        .compose(&GroupElement::identity(&GroupSpec::So3))
        .unwrap_err();
    assert!(matches!(err, GroupError::SpecMismatch { .. }));
}

#[test]
fn inverse_examples() {
    let e = GroupElement::<f64>::identity(&GroupSpec::So3);
    assert_eq!(e.inverse(), e);
    assert!((rot2(FRAC_PI_2).inverse().params()[0] - 3.0 * FRAC_PI_2).abs() < 1e-12);

    let r = GroupElement::rotation3([1.0, 0.0, 0.0], 1.0);
    let inv = r.inverse();
    assert!(
        max_abs_diff(
            inv.matrix(),
            GroupElement::rotation3([1.0, 0.0, 0.0], -1.0).matrix()
        ) < 1e-12
    );
    assert!(max_abs_diff(inv.matrix(), &transpose(r.matrix())) < 1e-12);
    assert!(orthogonality_defect(r.matrix()) < 1e-12);
}

#[test]
fn exp_examples() {
    let z = exp_map(&GroupSpec::So3, &AlgebraVector::<f64>::zero(GroupSpec::So3)).unwrap();
    assert_eq!(z, GroupElement::identity(&GroupSpec::So3));

    let v = AlgebraVector::new(GroupSpec::So2, vec![FRAC_PI_2]).unwrap();
    let r = exp_map(&GroupSpec::So2, &v).unwrap();
    assert!(max_abs_diff(r.matrix(), &[0.0, -1.0, 1.0, 0.0]) < 1e-12);

    let v = AlgebraVector::new(GroupSpec::So3, vec![0.0, 0.0, PI]).unwrap();
    let r = exp_map(&GroupSpec::So3, &v).unwrap();
    assert!(max_abs_diff(r.matrix(), &[-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0]) < 1e-12);

    let v = AlgebraVector::new(GroupSpec::So2, vec![f64::NAN]).unwrap();
    assert!(matches!(
        exp_map(&GroupSpec::So2, &v),
        Err(GroupError::NonFinite(_))
    ));
    assert!(AlgebraVector::new(GroupSpec::So3, vec![1.0]).is_err());
}

#[test]
fn log_examples() {
    let e = GroupElement::<f64>::identity(&GroupSpec::So3);
    assert_eq!(log_map(&e).unwrap().coords(), &[0.0, 0.0, 0.0]);
    assert!((log_map(&rot2(1.2)).unwrap().coords()[0] - 1.2).abs() < 1e-14);

    let v = AlgebraVector::new(GroupSpec::So3, vec![0.0, 0.7, 0.0]).unwrap();
    let back = log_map(&exp_map(&GroupSpec::So3, &v).unwrap()).unwrap();
    assert!(max_abs_diff(back.coords(), &[0.0, 0.7, 0.0]) < 1e-12);

    let flip = GroupElement::rotation3([0.0, 1.0, 0.0], PI);
    assert!(matches!(log_map(&flip), Err(GroupError::BranchCut { .. })));
    let near = GroupElement::rotation3([0.0, 1.0, 0.0], PI - 1e-7);
    assert!(log_map(&near).is_err());
    let ok = GroupElement::rotation3([0.0, 1.0, 0.0], PI - 1e-5);
    assert!(log_map(&ok).is_ok());
}

#[test]
fn metric_examples() {
    let g = GroupElement::rotation3([0.1, 0.5, 0.2], 2.0);
    assert_eq!(metric_dg(&g, &g).unwrap(), 0.0);
    assert!((metric_dg(&rot2(0.0), &rot2(PI)).unwrap() - 8.0).abs() < 1e-12);

    let mut rng = random_stream(11);
    for spec in group_kinds() {
        for _ in 0..100 {
            let (a, b, h) = (
                sample_haar::<f64, _>(&spec, &mut rng),
                sample_haar::<f64, _>(&spec, &mut rng),
                sample_haar::<f64, _>(&spec, &mut rng),
            );
            let d = metric_dg(&a, &b).unwrap();
            let dh = metric_dg(&h.compose(&a).unwrap(), &h.compose(&b).unwrap()).unwrap();
            assert!((d - dh).abs() < 1e-9);
            assert!((d - metric_dg(&b, &a).unwrap()).abs() < 1e-15);
        }
    }
}

#[test]
fn haar_so2_mean_cosine() {
    let mut rng = random_stream(3);
    let n = 100_000;
    let mean: f64 = (0..n)
        .map(|_| sample_haar::<f64, _>(&GroupSpec::So2, &mut rng).params()[0].cos())
        .sum::<f64>()
        / n as f64;
    assert!(mean.abs() < 0.02, "{mean}");
}

#[test]
fn haar_so3_mean_trace() {
    let mut rng = random_stream(4);
    let n = 100_000;
    let (mut total, mut total_sq) = (0.0, 0.0);
    for _ in 0..n {
        let g = sample_haar::<f64, _>(&GroupSpec::So3, &mut rng);
        let m = g.matrix();
        assert!((determinant(m) - 1.0).abs() < 1e-10);
        let tr = m[0] + m[4] + m[8];
        total += tr;
        total_sq += tr * tr;
    }
    // The defining representation is irreducible: E[tr] = 0 and E[tr²] = 1.
    let mean = total / n as f64;
    let mean_sq = total_sq / n as f64;
    assert!(mean.abs() < 0.05, "{mean}");
    assert!((mean_sq - 1.0).abs() < 0.05, "{mean_sq}");
}

fn assert_closed(set: &GroupSet<f64>) {
    let contains = |g: &GroupElement<f64>| set.iter().any(|e| metric_dg(e, g).unwrap() < 1e-10);
    assert!(contains(&GroupElement::identity(set.spec())));
    for a in set {
        assert!(contains(&a.inverse()));
        for b in set {
            assert!(contains(&a.compose(b).unwrap()));
        }
    }
}

#[test]
fn subgroups_are_closed() {
    let subs = [
        FiniteSubgroupSpec::cyclic(1),
        FiniteSubgroupSpec::cyclic(5),
        FiniteSubgroupSpec::cyclic_product(3, 5),
        FiniteSubgroupSpec::polyhedral(SubgroupKind::Tetrahedral),
        FiniteSubgroupSpec::polyhedral(SubgroupKind::Octahedral),
        FiniteSubgroupSpec::polyhedral(SubgroupKind::Icosahedral),
    ];
    for sub in subs {
        let set = enumerate_subgroup::<f64>(&sub);
        assert_eq!(set.len(), sub.order(), "{sub}");
        assert_closed(&set);
        // no duplicates
        for (i, a) in set.iter().enumerate() {
            for b in &set.elements()[i + 1..] {
                assert!(metric_dg(a, b).unwrap() > 1e-6);
            }
        }
    }
}

#[test]
fn subgroup_enumeration_is_deterministic() {
    let sub = FiniteSubgroupSpec::polyhedral(SubgroupKind::Icosahedral);
    assert_eq!(
        enumerate_subgroup::<f64>(&sub),
        enumerate_subgroup::<f64>(&sub)
    );
}

#[test]
fn left_translate_examples() {
    let a = enumerate_subgroup::<f64>(&FiniteSubgroupSpec::cyclic(3));
    let e = GroupElement::identity(&GroupSpec::So2);
    let same = left_translate(&e, &a).unwrap();
    for (x, y) in same.iter().zip(&a) {
        assert!(metric_dg(x, y).unwrap() < 1e-24);
    }
    let g = rot2(0.4);
    let single = left_translate(&g, &GroupSet::singleton(e)).unwrap();
    assert_eq!(single.elements()[0], g);
}

#[test]
fn float32_instantiation() {
    let g = GroupElement::<f32>::rotation3([0.0, 0.0, 1.0], 0.5);
    let h = g.compose(&g.inverse()).unwrap();
    let d = h
        .distance_sq(&GroupElement::identity(&GroupSpec::So3))
        .unwrap();
    assert!(d < 1e-10);
    let v = AlgebraVector::new(GroupSpec::So3, vec![0.1f32, 0.2, 0.3]).unwrap();
    let r = exp_map(&GroupSpec::So3, &v).unwrap();
    assert!((log_map(&r).unwrap().coords()[2] - 0.3).abs() < 1e-5);
}

fn algebra_strategy() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (0usize..4, proptest::collection::vec(-PI..PI, 5))
}

fn element_from(spec: &GroupSpec, raw: &[f64]) -> GroupElement<f64> {
    let coords = raw[..spec.algebra_dim()].to_vec();
    exp_map(spec, &AlgebraVector::new(spec.clone(), coords).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn group_axioms((kind, a) in algebra_strategy(), b in proptest::collection::vec(-PI..PI, 5), c in proptest::collection::vec(-PI..PI, 5)) {
        let spec = &group_kinds()[kind];
        let (x, y, z) = (element_from(spec, &a), element_from(spec, &b), element_from(spec, &c));
        let e = GroupElement::identity(spec);
        let left = x.compose(&y).unwrap().compose(&z).unwrap();
        let right = x.compose(&y.compose(&z).unwrap()).unwrap();
        prop_assert!(max_abs_diff(left.matrix(), right.matrix()) < 1e-10);
        prop_assert!(max_abs_diff(x.compose(&e).unwrap().matrix(), x.matrix()) < 1e-10);
        prop_assert!(max_abs_diff(e.compose(&x).unwrap().matrix(), x.matrix()) < 1e-10);
        prop_assert!(max_abs_diff(x.compose(&x.inverse()).unwrap().matrix(), e.matrix()) < 1e-10);
        prop_assert!(max_abs_diff(x.inverse().compose(&x).unwrap().matrix(), e.matrix()) < 1e-10);
        prop_assert!(max_abs_diff(rebuild(&left).matrix(), left.matrix()) < 1e-10);
    }

    #[test]
    fn exp_matches_taylor_and_is_orthogonal((kind, a) in algebra_strategy()) {
        let spec = &group_kinds()[kind];
        let mut coords = a[..spec.algebra_dim()].to_vec();
        // keep ‖v‖ ≤ π on SO(3) factors
        for slot in spec.slots() {
            if slot.factor == equin::group::Factor::So3 {
                let v = &mut coords[slot.algebra..slot.algebra + 3];
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > PI { v.iter_mut().for_each(|x| *x *= PI / n); }
            }
        }
        let v = AlgebraVector::new(spec.clone(), coords).unwrap();
        let g = exp_map(spec, &v).unwrap();
        prop_assert!(max_abs_diff(g.matrix(), &taylor_exp(&v, 20)) < 1e-8);
        prop_assert!(orthogonality_defect(g.matrix()) < 1e-10);
        prop_assert!((determinant(g.matrix()) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn log_inverts_exp((kind, a) in algebra_strategy()) {
        let spec = &group_kinds()[kind];
        let g = element_from(spec, &a);
        if let Ok(v) = log_map(&g) {
            let back = exp_map(spec, &v).unwrap();
            prop_assert!(max_abs_diff(back.matrix(), g.matrix()) < 1e-8);
        }
    }

    #[test]
    fn translation_is_associative(seed in 0u64..1000) {
        let mut rng = random_stream(seed);
        let spec = group_kinds()[rng.random_range(0..4)].clone();
        let set = GroupSet::new((0..4).map(|_| sample_haar(&spec, &mut rng)).collect()).unwrap();
        let (g, h) = (sample_haar::<f64, _>(&spec, &mut rng), sample_haar::<f64, _>(&spec, &mut rng));
        let nested = left_translate(&g, &left_translate(&h, &set).unwrap()).unwrap();
        let direct = left_translate(&g.compose(&h).unwrap(), &set).unwrap();
        for (x, y) in nested.iter().zip(&direct) {
            prop_assert!(max_abs_diff(x.matrix(), y.matrix()) < 1e-10);
        }
    }
}
