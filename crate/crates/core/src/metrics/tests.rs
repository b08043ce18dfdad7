use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::catalog::*;
use super::*;
use crate::forms::{ddc, ddc_factor, Chart, Quadrature, Region, Rule, ScalarField};
use crate::linalg::CMat;

type C = Complex64;

fn chart(n: usize, r: f64, res: usize) -> Arc<Chart> {
    Arc::new(Chart::polydisc(n, r, res).unwrap())
}

fn c(re: f64) -> C {
    C::new(re, 0.0)
}

#[test]
fn dual_of_identity_and_diagonal() {
    let ch = chart(1, 1.0, 8);
    let id = flat(ch.clone(), 2).unwrap();
    let d = dual_metric(&id).unwrap();
    assert!((d.matrix_at(5) - CMat::identity(2)).max_abs() < 1e-15);
    let diag = constant(ch, CMat::diag(&[c(2.0), c(4.0)])).unwrap();
    let m = dual_metric(&diag).unwrap().matrix_at(0);
    assert!((m - CMat::diag(&[c(0.5), c(0.25)])).max_abs() < 1e-15);
}

#[test]
fn dual_of_random_positive_matrix_is_conjugate_inverse() {
    let mut rng = StdRng::seed_from_u64(7);
    let ch = chart(1, 1.0, 8);
    for _ in 0..20 {
        let a: Vec<C> = (0..9).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let a = CMat::from_rows(3, &a);
        let g = a * a.adjoint() + CMat::identity(3).scale(c(0.1));
        let h = constant(ch.clone(), g).unwrap();
        let d = dual_metric(&h).unwrap().matrix_at(3);
        // independent oracle: Gauss-Jordan inverse, then conjugate
        let oracle = g.inverse().unwrap().conj();
        assert!((d - oracle).max_abs() < 1e-12 * oracle.max_abs());
        let back = dual_metric(&dual_metric(&h).unwrap()).unwrap().matrix_at(3);
        assert!((back - g).max_abs() < 1e-12 * g.max_abs());
    }
}

#[test]
fn sampled_dual_flags_degenerate_nodes() {
    let ch = chart(1, 1.0, 9);
    let len = ch.node_count();
    let values: Vec<C> = (0..len).map(|k| c(ch.coords(k)[0].norm_sqr())).collect();
    let h = MetricField::sampled(ch.clone(), 1, vec![values], Regularity::Singular, Provenance::Catalog {
        name: "test".into(),
        params: serde_json::Value::Null,
    })
    .unwrap();
    let d = dual_metric(&h).unwrap();
    let origin = ch.node_index(&[4, 4]);
    assert!(d.is_flagged(origin));
    assert!(matches!(d.jet_at(origin), Err(crate::Error::FlaggedNode { .. })));
    assert!((d.matrix_at(0).get(0, 0) - c(0.5)).norm() < 1e-15);
}

#[test]
fn section_metrics() {
    let ch = chart(2, 1.0, 8);
    let z = [C::new(0.3, 0.1), C::new(-0.5, 0.2)];
    let r2 = z[0].norm_sqr() + z[1].norm_sqr();
    let (hstar, h) = from_sections(ch.clone(), &l_plus_l_sections(), Some(Degeneracy::coordinate(2, &[0, 1]).unwrap())).unwrap();
    let g = hstar.matrix_at_point(&z).unwrap();
    assert!((g - CMat::identity(2).scale(c(r2))).max_abs() < 1e-15);
    assert!((h.matrix_at_point(&z).unwrap() - CMat::identity(2).scale(c(1.0 / r2))).max_abs() < 1e-12);
    assert_eq!(h.degeneracy().unwrap().codim, 2);
    let report = hstar.degeneracy().unwrap().check(&hstar, 0.2, 50, 1);
    assert!(report.passed, "{report:?}");

    let (hstar, _) = from_sections(ch.clone(), &divisor_sections(), Some(Degeneracy::coordinate(2, &[0]).unwrap())).unwrap();
    let g = hstar.matrix_at_point(&z).unwrap();
    assert!((g - CMat::diag(&[c(1.0), c(z[0].norm_sqr())])).max_abs() < 1e-15);
    assert!(hstar.degeneracy().unwrap().check(&hstar, 0.2, 50, 2).passed);

    let ident = crate::metrics::SectionMatrix::new(2, 2, vec![
        ZPoly::constant(2, c(1.0)),
        ZPoly::zero(2),
        ZPoly::zero(2),
        ZPoly::constant(2, c(1.0)),
    ])
    .unwrap();
    let (hstar, h) = from_sections(ch, &ident, None).unwrap();
    assert!((hstar.matrix_at(3) - CMat::identity(2)).max_abs() < 1e-15);
    assert!((h.matrix_at(3) - CMat::identity(2)).max_abs() < 1e-15);
}

#[test]
fn wrong_degeneracy_declaration_fails_check() {
    let ch = chart(2, 1.0, 8);
    let (hstar, _) = from_sections(ch, &l_plus_l_sections(), None).unwrap();
    let wrong = Degeneracy::coordinate(2, &[0]).unwrap();
    assert!(!wrong.check(&hstar, 0.2, 50, 3).passed);
}

#[test]
fn constant_metric_is_flat() {
    let ch = chart(2, 1.0, 8);
    let theta = curvature(&flat(ch.clone(), 2).unwrap()).unwrap();
    assert!(theta.iter().all(|t| t.max_abs() == 0.0));
    let cs = chern_forms(&flat(ch, 2).unwrap(), 2).unwrap();
    assert!(cs[1].max_abs() == 0.0 && cs[2].max_abs() == 0.0);
    assert!((cs[0].local(0).get(0, 0) - c(1.0)).norm() == 0.0);
}

#[test]
fn line_bundle_curvature_matches_ddc() {
    let ch = chart(1, 1.0, 16);
    let h = MetricSpec::DiagExp { weights: vec![vec![1.0]] }.build(ch.clone()).unwrap();
    let c1 = &chern_forms(&h, 1).unwrap()[1];
    let phi = ScalarField::from_fn(ch.clone(), |z| z[0].norm_sqr());
    let direct = ddc(&phi).unwrap();
    for node in 0..ch.node_count() {
        assert!((c1.local(node).get(1, 1) - direct.local(node).get(1, 1)).norm() < 1e-10);
    }
}

#[test]
fn diagonal_rank_two_decouples() {
    let ch = chart(2, 1.0, 8);
    let h = MetricSpec::DiagExp { weights: vec![vec![1.0, 0.5], vec![0.3, 2.0]] }.build(ch.clone()).unwrap();
    let theta = curvature(&h).unwrap();
    let cs = chern_forms(&h, 2).unwrap();
    // oracle: c_1 = ddc φ_1 + ddc φ_2, c_2 = ddc φ_1 ∧ ddc φ_2 with constant Levi matrices
    let f = ddc_factor(1);
    let l1 = crate::forms::LocalForm::from_matrix(2, &[f * 1.0, c(0.0), c(0.0), f * 0.5]);
    let l2 = crate::forms::LocalForm::from_matrix(2, &[f * 0.3, c(0.0), c(0.0), f * 2.0]);
    for node in [0, 100, 2000] {
        assert!(theta[1].local(node).is_zero() && theta[2].local(node).is_zero());
        let e1 = cs[1].local(node).plus(&l1.plus(&l2).times(c(-1.0)));
        assert!(e1.max_abs() < 1e-12);
        let e2 = cs[2].local(node).plus(&l1.wedge(&l2).times(c(-1.0)));
        assert!(e2.max_abs() < 1e-12);
    }
}

#[test]
fn fubini_study_c1_integral() {
    let r = 0.9;
    let ch = chart(1, 1.0, 257);
    let c1 = &chern_forms(&fubini_study_o1(ch.clone()).unwrap(), 1).unwrap()[1];
    let q = Quadrature::new(&ch, &Region::Ball { center: vec![c(0.0)], radius: r }, Rule::Trapezoid).unwrap();
    let v = c1.integrate(&q).unwrap();
    assert!((v.re - r * r / (1.0 + r * r)).abs() < 1e-4, "{v}");
}

#[test]
fn first_chern_via_det_examples() {
    let ch = chart(1, 1.0, 64);
    assert!(first_chern_via_det(&flat(ch.clone(), 2).unwrap()).unwrap().max_abs() < 1e-12);
    let h = MetricSpec::DiagExp { weights: vec![vec![1.0], vec![1.0]] }.build(ch.clone()).unwrap();
    let w = first_chern_via_det(&h).unwrap();
    let expected = 2.0 / (2.0 * PI);
    for node in 0..ch.node_count() {
        assert!((w.local(node).get(1, 1) - C::new(0.0, expected)).norm() < 1e-8);
    }
}

#[test]
fn chern_forms_rejects_singular_and_large_degree() {
    let ch = chart(2, 1.0, 8);
    let (_, h) = from_sections(ch.clone(), &l_plus_l_sections(), None).unwrap();
    assert!(matches!(chern_forms(&h, 1), Err(crate::Error::NotSmooth(_))));
    assert!(matches!(chern_forms(&flat(ch, 1).unwrap(), 2), Err(crate::Error::DegreeOverflow { .. })));
}

#[test]
fn griffiths_examples() {
    let ch = chart(2, 1.0, 16);
    let flat_report = griffiths_diagnostic(&flat(ch.clone(), 2).unwrap(), 50, 1);
    assert!(flat_report.passed && flat_report.min_levi.abs() < 1e-12);
    let (_, h) = from_sections(ch.clone(), &l_plus_l_sections(), None).unwrap();
    assert!(griffiths_diagnostic(&h, 200, 2).passed);
    let (_, h) = from_sections(ch.clone(), &o_plus_l_sections(), None).unwrap();
    assert!(griffiths_diagnostic(&h, 200, 3).passed);
    let bad = MetricSpec::DiagExp { weights: vec![vec![-1.0, -1.0]] }.build(ch).unwrap();
    assert!(!griffiths_diagnostic(&bad, 200, 4).passed);
}

#[test]
fn sampled_metric_curvature_matches_analytic() {
    let ch = chart(2, 1.0, 16);
    let spec = MetricSpec::DiagExp { weights: vec![vec![1.0, 0.5], vec![0.3, 1.0]] };
    let analytic = spec.build(ch.clone()).unwrap();
    let r = 2;
    let mut entries = vec![vec![c(0.0); ch.node_count()]; r * r];
    for node in 0..ch.node_count() {
        let m = analytic.matrix_at(node);
        for k in 0..r * r {
            entries[k][node] = m.get(k / r, k % r);
        }
    }
    let sampled = MetricField::sampled(ch.clone(), r, entries, Regularity::Smooth, analytic.provenance().clone()).unwrap();
    let a = chern_forms(&analytic, 2).unwrap();
    let s = chern_forms(&sampled, 2).unwrap();
    let interior = |node: usize| ch.is_interior(node, 2);
    let diff = a[2].add(&s[2].scale(c(-1.0))).unwrap().max_abs_where(interior);
    assert!(diff < 1e-3 * a[2].max_abs(), "{diff}");
}
