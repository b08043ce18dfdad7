use std::sync::Arc;

use num_complex::Complex64;

use super::*;
use crate::forms::{Chart, FormField, LocalForm, Rule};
use crate::metrics::catalog::*;
use crate::metrics::{chern_forms, Degeneracy, MetricField};
use crate::projbundle::{default_rule, segre_form};
use crate::regularize::{geometric_schedule, DeclaredConvergence, FamilyMode, RegularizationFamily};
use crate::Error;

type C = Complex64;

fn chart(n: usize, r: f64, res: usize) -> Arc<Chart> {
    Arc::new(Chart::polydisc(n, r, res).unwrap())
}

fn origin(n: usize) -> Vec<C> {
    vec![C::new(0.0, 0.0); n]
}

/// `-∫ χ'(r) f(r) dr` for the radial cut-off of radius `rho`, composite Simpson.
fn radial_oracle(rho: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (a, b) = (0.5 * rho, rho);
    let m = 4000;
    let h = (b - a) / m as f64;
    let g = |r: f64| -smooth_step_derivative((r - a) / (0.5 * rho)) / (0.5 * rho) * f(r);
    let mut s = g(a) + g(b);
    for i in 1..m {
        s += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn schedule() -> Vec<f64> {
    geometric_schedule(0.4, 0.5f64.sqrt(), 5).unwrap()
}

fn smooth_family(h: MetricField, schedule: Vec<f64>) -> RegularizationFamily {
    let fixed = h.clone();
    RegularizationFamily::new(
        h,
        FamilyMode::Custom {
            name: "constant".into(),
            member: Arc::new(move |_| Ok(fixed.clone())),
        },
        schedule,
        DeclaredConvergence::Both,
    )
    .unwrap()
}

fn point_family(res: usize) -> RegularizationFamily {
    let ch = chart(1, 1.0, res);
    RegularizationFamily::analytic(ch, &point_sections(), schedule())
        .unwrap()
        .with_degeneracy(Degeneracy::coordinate(1, &[0]).unwrap())
}

#[test]
fn bump_degree_zero_cases() {
    let ch = chart(1, 1.0, 21);
    let b = bump_form(ch.clone(), &origin(1), 1, 0.6).unwrap();
    assert_eq!(b.field.bidegree(), (0, 0));
    let c = ch.node_index(&[10, 10]);
    assert!((b.field.local(c).get(0, 0) - 1.0).norm() < 1e-15);
    let ch2 = chart(2, 1.0, 9);
    let b2 = bump_form(ch2.clone(), &origin(2), 2, 0.6).unwrap();
    assert_eq!(b2.field.bidegree(), (0, 0));
    assert!(b2.field.local(ch2.node_index(&[4, 4, 4, 4])).get(0, 0).re > 0.0);
    assert!(positivity_check(&b2.field, 200, 1) >= 0.0);
}

#[test]
fn bump_is_strongly_positive_and_dominates() {
    let ch = chart(2, 1.0, 11);
    let b = bump_form(ch.clone(), &origin(2), 1, 0.7).unwrap();
    assert_eq!(b.field.bidegree(), (1, 1));
    assert!(positivity_check(&b.field, 1000, 7) >= -1e-14);
    // near the point β = ω, so β - C ω is positive for C = 1/p! = 1
    let centre = ch.node_index(&[5, 5, 5, 5]);
    let omega = LocalForm::from_matrix(2, &[C::new(0.0, 1.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 1.0)]);
    let diff = b.field.local(centre).plus(&omega.times(C::new(-b.constant, 0.0)));
    assert!(diff.max_abs() < 1e-14);
}

#[test]
fn bump_support_is_checked() {
    let ch = chart(1, 1.0, 11);
    assert!(matches!(bump_form(ch.clone(), &origin(1), 1, 1.0), Err(Error::SupportOutsideChart)));
    assert!(matches!(bump_form(ch.clone(), &origin(1), 2, 0.5), Err(Error::DegreeMismatch(_))));
    let spec = BumpSpec {
        delta: 1.5,
        ..BumpSpec::new(origin(1), 1, 0.5)
    };
    assert!(bump_form_with(ch, &spec, Composition::Product).is_err());
}

#[test]
fn pairing_is_linear_and_checks_degrees() {
    let ch = chart(1, 1.0, 41);
    let beta: TestForm = bump_form(ch.clone(), &origin(1), 1, 0.6).unwrap().into();
    let zero = FormField::zeros(ch.clone(), 1, 1).unwrap();
    assert_eq!(pair(&zero, &beta).unwrap(), C::new(0.0, 0.0));
    let h = fubini_study_o1(ch.clone()).unwrap();
    let c1 = chern_forms(&h, 1).unwrap().pop().unwrap();
    let a = pair(&c1, &beta).unwrap();
    let twice = pair(&c1.add(&c1).unwrap(), &beta).unwrap();
    assert!((twice - a * 2.0).norm() < 1e-13);
    let wrong = FormField::zeros(ch, 0, 0).unwrap();
    assert!(matches!(pair(&wrong, &beta), Err(Error::DegreeMismatch(_))));
}

#[test]
fn poincare_lelong_pairings_follow_the_radial_closed_form() {
    let fam = point_family(161);
    let rho = 0.8;
    let beta: TestForm = bump_form(fam.source().chart().clone(), &origin(1), 1, rho).unwrap().into();
    let spec = CurrentProductSpec::single(fam.clone(), 1, LimitMode::Simultaneous).unwrap();
    let rep = simultaneous_limit(&spec, &beta, &LimitOptions::default()).unwrap();
    for (e, p) in rep.schedule.iter().zip(&rep.pairings) {
        let want = radial_oracle(rho, |r| r * r / (r * r + e * e));
        assert!((p.re - want).abs() < 1e-6, "eps {e}: {} vs {want}", p.re);
        assert!(p.im.abs() < 1e-10);
    }
    assert!(rep.converged(), "{rep:?}");
    assert!((rep.limit.re - 1.0).abs() < 1e-3);

    // s_1 = -c_1 for a line bundle
    let spec = CurrentProductSpec::single(fam.clone(), 1, LimitMode::Iterated).unwrap();
    let s1 = iterated_segre_limit(&spec, &beta, &LimitOptions::default()).unwrap();
    assert!((s1.limit.re + 1.0).abs() < 1e-3);
    let c1 = chern_current(1, &fam, &beta, &LimitOptions::default()).unwrap();
    assert!((c1.report.limit - rep.limit).norm() < 1e-3);
    assert_eq!(c1.constituents.len(), 1);
    assert_eq!(c1.constituents[0].coefficient, -1.0);
}

#[test]
fn smooth_families_give_constant_pairings() {
    let ch = chart(1, 1.0, 41);
    let h = fubini_study_o1(ch.clone()).unwrap();
    let beta: TestForm = bump_form(ch.clone(), &origin(1), 1, 0.6).unwrap().into();
    let direct = pair(&chern_forms(&h, 1).unwrap().pop().unwrap(), &beta).unwrap();
    let fam = smooth_family(h.clone(), vec![0.2, 0.1, 0.05]);
    let opts = LimitOptions::default();
    let spec = CurrentProductSpec::single(fam.clone(), 1, LimitMode::Simultaneous).unwrap();
    let rep = simultaneous_limit(&spec, &beta, &opts).unwrap();
    assert!(rep.pairings.iter().all(|p| (p - direct).norm() < 1e-12));
    assert!(rep.converged());

    let rule = default_rule(1, 1).unwrap();
    let s1 = pair(&segre_form(&h, 1, &rule).unwrap(), &beta).unwrap();
    let spec = CurrentProductSpec::single(fam.clone(), 1, LimitMode::Iterated).unwrap();
    let it = iterated_segre_limit(&spec, &beta, &opts).unwrap();
    assert!((it.limit - s1).norm() < 1e-10);

    let top: TestForm = bump_form(ch.clone(), &origin(1), 0, 0.6).unwrap().into();
    let mass = test_form_mass(&top).unwrap();
    assert!(mass.re > 0.0);
    let ch0 = chern_character_current(0, &fam, &top, &opts).unwrap();
    assert_eq!(ch0.report.limit, mass);
    let ch1 = chern_character_current(1, &fam, &beta, &opts).unwrap();
    assert!((ch1.report.limit - direct).norm() < 1e-12);
    let tr = chern_character_direct(1, &fam, &beta, &opts).unwrap();
    assert!((tr.limit - direct).norm() < 1e-12);
}

#[test]
fn codimension_and_declared_convergence_are_enforced() {
    let ch = chart(2, 1.0, 9);
    let fam = RegularizationFamily::analytic(ch.clone(), &divisor_sections(), vec![0.2, 0.1]).unwrap();
    let beta: TestForm = bump_form(ch.clone(), &origin(2), 2, 0.5).unwrap().into();
    let opts = LimitOptions::default();
    assert!(matches!(chern_current(2, &fam, &beta, &opts), Err(Error::Config(_))));
    let fam = fam.with_degeneracy(Degeneracy::coordinate(2, &[0]).unwrap());
    assert!(matches!(
        chern_current(2, &fam, &beta, &opts),
        Err(Error::Codimension { codim: 1, k: 2 })
    ));
    let spec = CurrentProductSpec::single(fam.clone(), 2, LimitMode::Simultaneous).unwrap();
    assert!(matches!(simultaneous_limit(&spec, &beta, &opts), Err(Error::Codimension { .. })));

    let h = flat(ch.clone(), 2).unwrap();
    let fixed = h.clone();
    let uniform_only = RegularizationFamily::new(
        h,
        FamilyMode::Custom {
            name: "flat".into(),
            member: Arc::new(move |_| Ok(fixed.clone())),
        },
        vec![0.2, 0.1],
        DeclaredConvergence::LocallyUniformOutsideV,
    )
    .unwrap();
    let spec = CurrentProductSpec::single(uniform_only, 1, LimitMode::Iterated).unwrap();
    let beta1: TestForm = bump_form(ch, &origin(2), 1, 0.5).unwrap().into();
    assert!(matches!(iterated_segre_limit(&spec, &beta1, &opts), Err(Error::Config(_))));
}

#[test]
fn pairings_depend_only_on_test_form_values() {
    let fam = point_family(81);
    let ch = fam.source().chart().clone();
    let spec = BumpSpec::new(origin(1), 1, 0.7);
    let a: TestForm = bump_form_with(ch.clone(), &spec, Composition::Product).unwrap().into();
    let b: TestForm = bump_form_with(ch, &spec, Composition::Logarithmic).unwrap().into();
    let opts = LimitOptions::default();
    let s = CurrentProductSpec::single(fam, 1, LimitMode::Simultaneous).unwrap();
    let ra = simultaneous_limit(&s, &a, &opts).unwrap();
    let rb = simultaneous_limit(&s, &b, &opts).unwrap();
    for (x, y) in ra.pairings.iter().zip(&rb.pairings) {
        assert!((x - y).norm() < 1e-12);
    }
}

#[test]
fn point_mass_table_is_flat() {
    let fam = point_family(161);
    let ch = fam.source().chart().clone();
    let opts = LimitOptions::default();
    // the schedule shrinks with the ball so that ε / radius stays fixed
    let table = mass_estimate(&[0.8, 0.6, 0.4], |r| {
        let scaled: Vec<f64> = fam.schedule().iter().map(|e| e * r / 0.8).collect();
        let spec = CurrentProductSpec::single(fam.with_schedule(scaled)?, 1, LimitMode::Simultaneous)?;
        let beta: TestForm = bump_form(ch.clone(), &origin(1), 1, r)?.into();
        simultaneous_limit(&spec, &beta, &opts)
    })
    .unwrap();
    assert_eq!(table.rows[0].radius, 0.8);
    assert!(table.rows.iter().all(|r| (r.mass - 1.0).abs() < 2e-3), "{table:?}");
    assert!(table.locally_finite, "{table:?}");

    // a smooth density loses mass as the ball shrinks
    let h = fubini_study_o1(ch.clone()).unwrap();
    let fam = smooth_family(h, vec![0.2, 0.1]);
    let spec = CurrentProductSpec::single(fam, 1, LimitMode::Simultaneous).unwrap();
    let table = mass_estimate(&[0.8, 0.4, 0.2], |r| {
        let beta: TestForm = bump_form(ch.clone(), &origin(1), 1, r)?.into();
        simultaneous_limit(&spec, &beta, &opts)
    })
    .unwrap();
    assert!(table.rows.windows(2).all(|w| w[1].mass < w[0].mass));
    assert!(table.rows[2].mass < 0.05);
}

#[test]
fn exact_forms_are_annihilated() {
    let ch = chart(2, 1.0, 17);
    let h = fubini_study_potential_metric(&ch);
    let c1 = chern_forms(&h, 1).unwrap().pop().unwrap();
    let ex = exact_test_form(ch.clone(), &origin(2), 0.8, 1).unwrap();
    assert_eq!(ex.bidegree(), (1, 1));
    let beta = TestForm::new(ex, Rule::Trapezoid).unwrap();
    let v = pair(&c1, &beta).unwrap();
    let scale: TestForm = bump_form(ch.clone(), &origin(2), 1, 0.8).unwrap().into();
    let reference = pair(&c1, &scale).unwrap().norm();
    assert!(v.norm() < 1e-3 * reference, "{v} vs {reference}");
    assert!(exact_test_form(ch, &origin(2), 0.8, 2).is_err());
}

fn fubini_study_potential_metric(ch: &Arc<Chart>) -> MetricField {
    let s = l_plus_l_sections();
    analytic_eps_metric(ch.clone(), &s, 0.5).unwrap()
}

#[test]
fn segre_signs_for_a_positive_line_bundle() {
    let fam = point_family(81);
    let beta: TestForm = bump_form(fam.source().chart().clone(), &origin(1), 1, 0.7).unwrap().into();
    let parts = segre_sign_structure(1, &fam, &beta, &LimitOptions::default()).unwrap();
    assert_eq!(parts.len(), 1);
    assert!(parts[0].coefficient * parts[0].report.limit.re > 0.99);
}
