use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use proptest::prelude::*;

use chern_currents::charclass::{BundleSlot, CharClassAlgebra, CharClassPoly, Variable};
use chern_currents::currents::{bump_form_with, pair, BumpSpec, Composition, TestForm};
use chern_currents::forms::{ddc, levi_matrix, Chart, FormField, LocalForm, Mask, Region, ScalarField};
use chern_currents::harness::{segre_from_chern, PartitionOfUnity};
use chern_currents::linalg::hermitian_eigenvalues;
use chern_currents::metrics::catalog::{analytic_eps_metric, l_plus_l_sections, MetricSpec};
use chern_currents::metrics::{chern_forms, dual_metric, first_chern_via_det, from_sections, Degeneracy};
use chern_currents::projbundle::{default_rule, SegreEvaluator};
use chern_currents::regularize::{diagnose_schedule, CalibratedKernel, Kernel, RegularizationFamily};

type C = Complex64;

fn chart(n: usize, res: usize) -> Arc<Chart> {
    Arc::new(Chart::polydisc(n, 1.0, res).unwrap())
}

fn diff(a: &LocalForm, b: &LocalForm) -> f64 {
    a.plus(&b.times(C::new(-1.0, 0.0))).max_abs()
}

fn weights(rows: usize, n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.1f64..1.5, n), rows)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn round_trip_at_every_degree(k in 1usize..=10) {
        let alg = CharClassAlgebra::new(10);
        let s = alg.segre_to_chern(k).unwrap();
        let back = s.substitute(|v: &Variable| alg.chern_to_segre(v.index as usize).unwrap());
        prop_assert_eq!(back, CharClassPoly::var(Variable::segre(k as u32)));
        prop_assert!(s.all_integer() && alg.chern_to_segre(k).unwrap().all_integer());
        prop_assert_eq!(s.homogeneous_grade(), Some(k as u32));
    }

    #[test]
    fn character_denominators_divide_factorial(k in 1usize..=8, rank in 1usize..=4) {
        let ch = CharClassAlgebra::new(10).chern_character(k, rank);
        let fact: BigInt = (1..=k).map(BigInt::from).product();
        for (_, c) in ch.terms() {
            prop_assert!((&fact % c.denom()) == BigInt::from(0));
        }
        prop_assert_eq!(ch.homogeneous_grade(), Some(k as u32));
    }

    #[test]
    fn whitney_sum_is_symmetric(k in 1usize..=8, r1 in 1usize..4, r2 in 1usize..4) {
        let alg = CharClassAlgebra::new(10);
        let (e, f) = (BundleSlot::new("E", r1).unwrap(), BundleSlot::new("F", r2).unwrap());
        let swap = |p: &CharClassPoly| p.substitute(|v: &Variable| CharClassPoly::var(v.in_slot(1 - v.slot)));
        prop_assert_eq!(swap(&alg.whitney_sum(k, &e, &f)), alg.whitney_sum(k, &f, &e));
        prop_assert_eq!(alg.whitney_sum(k, &e, &f).homogeneous_grade(), Some(k as u32));
    }

    #[test]
    fn wedge_is_graded_commutative(
        a in (0usize..4, 0usize..4, -1.0f64..1.0, -1.0f64..1.0),
        b in (0usize..4, 0usize..4, -1.0f64..1.0, -1.0f64..1.0),
    ) {
        let x = LocalForm::term(a.0 as Mask, a.1 as Mask, C::new(a.2, a.3));
        let y = LocalForm::term(b.0 as Mask, b.1 as Mask, C::new(b.2, b.3));
        let deg = |m: usize| m.count_ones() as usize;
        let sign = if ((deg(a.0) + deg(a.1)) * (deg(b.0) + deg(b.1))) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!(diff(&x.wedge(&y), &y.wedge(&x).times(C::new(sign, 0.0))) < 1e-15);
    }

    #[test]
    fn ddc_is_hermitian_and_detects_positivity(a in 0.2f64..2.0, b in 0.2f64..2.0, t in -0.3f64..0.3) {
        let ch = chart(2, 12);
        // strictly psh plus a pluriharmonic term
        let u = ScalarField::from_fn(ch.clone(), move |z: &[C]| {
            a * z[0].norm_sqr() + b * z[1].norm_sqr() + t * (z[0] * z[1]).re + (z[0] * z[0] * z[1]).re
        });
        let w = ddc(&u).unwrap();
        for node in [0usize, 777, ch.node_count() / 2, ch.node_count() - 1] {
            let m = levi_matrix(&w, node);
            prop_assert!((m[1] - m[2].conj()).norm() < 1e-12);
            let ev = hermitian_eigenvalues(2, &m);
            prop_assert!(ev[0] > 0.0, "{ev:?}");
        }
    }

    #[test]
    fn leibniz_on_polynomials(p in prop::collection::vec(-1.0f64..1.0, 4)) {
        let ch = chart(2, 12);
        let q = p.clone();
        let f = FormField::from_scalar(&ScalarField::from_fn(ch.clone(), move |z: &[C]| q[0] * z[0].re + q[1] * z[1].im));
        let g = FormField::from_scalar(&ScalarField::from_fn(ch.clone(), move |z: &[C]| 1.0 + p[2] * z[1].re + p[3] * z[0].im));
        let lhs = f.wedge(&g).unwrap().dbar().unwrap();
        let rhs = f.dbar().unwrap().wedge(&g).unwrap().add(&f.wedge(&g.dbar().unwrap()).unwrap()).unwrap();
        let defect = lhs.add(&rhs.scale(C::new(-1.0, 0.0))).unwrap().max_abs();
        prop_assert!(defect < 1e-10 * lhs.max_abs().max(1.0));
    }

    #[test]
    fn dual_is_an_involution_and_flips_chern_forms(w in weights(2, 2)) {
        let ch = chart(2, 9);
        let h = MetricSpec::DiagExp { weights: w }.build(ch.clone()).unwrap();
        let dd = dual_metric(&dual_metric(&h).unwrap()).unwrap();
        let cs = chern_forms(&h, 2).unwrap();
        let cd = chern_forms(&dual_metric(&h).unwrap(), 2).unwrap();
        for node in [0usize, 1234, ch.node_count() - 1] {
            let (a, b) = (h.matrix_at(node), dd.matrix_at(node));
            prop_assert!((a - b).max_abs() <= 1e-10 * a.max_abs());
            for k in 0..=2 {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                prop_assert!(diff(&cd[k].local(node), &cs[k].local(node).times(C::new(sign, 0.0))) < 1e-10);
            }
        }
    }

    #[test]
    fn whitney_and_det_at_form_level(w in weights(2, 2)) {
        let ch = chart(2, 9);
        let h = MetricSpec::DiagExp { weights: w.clone() }.build(ch.clone()).unwrap();
        let l1 = MetricSpec::DiagExp { weights: vec![w[0].clone()] }.build(ch.clone()).unwrap();
        let l2 = MetricSpec::DiagExp { weights: vec![w[1].clone()] }.build(ch.clone()).unwrap();
        let c = chern_forms(&h, 2).unwrap();
        let a = chern_forms(&l1, 1).unwrap();
        let b = chern_forms(&l2, 1).unwrap();
        let det = first_chern_via_det(&h).unwrap();
        for node in [0usize, 999, ch.node_count() - 1] {
            let c1 = a[1].local(node).plus(&b[1].local(node));
            let c2 = a[1].local(node).wedge(&b[1].local(node));
            prop_assert!(diff(&c[1].local(node), &c1) < 1e-10);
            prop_assert!(diff(&c[2].local(node), &c2) < 1e-10);
            prop_assert!(diff(&c[1].local(node), &det.local(node)) < 1e-6);
        }
    }

    #[test]
    fn segre_forms_invert_chern_forms(w in weights(2, 2), node in 0usize..6561) {
        let ch = chart(2, 9);
        let h = MetricSpec::DiagExp { weights: w }.build(ch).unwrap();
        let rule = default_rule(2, 2).unwrap();
        let s = SegreEvaluator::new(&h, &rule, 2).unwrap().at(node).unwrap();
        let r = segre_from_chern(&h, node, 2).unwrap();
        for k in 0..=2 {
            prop_assert!(diff(&s[k], &r[k]) <= 1e-3 * r[k].max_abs().max(1e-12));
        }
    }

    #[test]
    fn analytic_families_increase_and_stay_positive(e0 in 0.2f64..0.5, ratio in 0.4f64..0.9) {
        let ch = chart(2, 9);
        let schedule: Vec<f64> = (0..4).map(|j| e0 * ratio.powi(j)).collect();
        let family = RegularizationFamily::analytic(ch, &l_plus_l_sections(), schedule.clone())
            .unwrap()
            .with_degeneracy(Degeneracy::coordinate(2, &[0, 1]).unwrap());
        let rep = diagnose_schedule(&family, &schedule, &Region::Chart, 400, 3).unwrap();
        prop_assert!(rep.monotonicity_violations == 0 && rep.griffiths_passed);
        prop_assert!(rep.monotonicity_checks >= 1000);
    }

    #[test]
    fn kernels_have_unit_mass(width in 0.2f64..1.0, dim in 1usize..=3) {
        for k in [Kernel::Bump, Kernel::TruncatedGaussian { width }] {
            let cal = CalibratedKernel::new(k, dim).unwrap();
            prop_assert!(cal.mass_error < 1e-10);
        }
    }

    #[test]
    fn pairings_see_only_test_form_values(scale in 0.4f64..0.9, eps in 0.1f64..0.5) {
        let ch = chart(2, 12);
        let t = &chern_forms(&analytic_eps_metric(ch.clone(), &l_plus_l_sections(), eps).unwrap(), 1).unwrap()[1];
        let spec = BumpSpec::new(vec![C::new(0.0, 0.0); 2], 1, scale);
        let a: TestForm = bump_form_with(ch.clone(), &spec, Composition::Product).unwrap().into();
        let b: TestForm = bump_form_with(ch.clone(), &spec, Composition::Logarithmic).unwrap().into();
        let (x, y) = (pair(t, &a).unwrap(), pair(t, &b).unwrap());
        prop_assert!((x - y).norm() <= 1e-12 * x.norm().max(1.0));
    }

    #[test]
    fn partitions_of_unity_sum_to_one(inner in 0.7f64..0.95, width in 0.1f64..0.4, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let p = PartitionOfUnity { inner, outer: inner + width };
        let z = C::new(re, im);
        prop_assume!(z.norm() > 1e-3);
        prop_assert!((p.psi0(z) + p.psi1(z.inv()) - 1.0).abs() < 1e-14);
        prop_assert!((0.0..=1.0).contains(&p.psi0(z)));
        if z.norm() <= inner {
            prop_assert_eq!(p.psi0(z), 1.0);
        }
        if z.norm() >= inner + width {
            prop_assert_eq!(p.psi0(z), 0.0);
        }
    }
}

#[test]
fn section_metrics_are_griffiths_positive_off_v() {
    let ch = chart(2, 9);
    let (_, h) = from_sections(ch, &l_plus_l_sections(), Some(Degeneracy::coordinate(2, &[0, 1]).unwrap())).unwrap();
    let rep = chern_currents::metrics::griffiths_diagnostic(&h, 64, 5);
    assert!(rep.passed, "{rep:?}");
}
