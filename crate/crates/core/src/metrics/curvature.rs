use std::sync::Arc;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{MetricField, Regularity};
use super::jet::Jet;
use crate::error::{Error, Result};
use crate::forms::{ddc, ddc_factor, Chart, FormField, LocalForm, ScalarField};
use crate::linalg::{hermitian_eigenvalues, CMat};

type C = Complex64;

/// Curvature coefficients `Θ_ab` (each `r×r`, index `a*n + b`) of the Chern connection,
/// `Θ = sum Θ_ab dz_a ∧ dzbar_b = ∂bar(H^{-1} ∂H)`.
pub fn curvature_local(jet: &Jet) -> Option<Vec<CMat>> {
    let n = jet.dim();
    let hinv = jet.h.hpd_inverse()?;
    let mut theta = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let m = hinv * jet.dd[a * n + b] - hinv * jet.dbar(b) * hinv * jet.d[a];
            theta.push(m.scale(C::new(-1.0, 0.0)));
        }
    }
    Some(theta)
}

/// Entry `(i, j)` of `(i/2π) Θ` as a (1,1)-form.
fn entry_form(theta: &[CMat], n: usize, i: usize, j: usize) -> LocalForm {
    let f = ddc_factor(1);
    let m: Vec<C> = (0..n * n).map(|k| theta[k].get(i, j) * f).collect();
    LocalForm::from_matrix(n, &m)
}

fn permutations(items: &[usize]) -> Vec<(Vec<usize>, f64)> {
    if items.len() <= 1 {
        return vec![(items.to_vec(), 1.0)];
    }
    let mut out = Vec::new();
    for (k, &first) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for (mut p, s) in permutations(&rest) {
            p.insert(0, first);
            out.push((p, s * sign));
        }
    }
    out
}

fn subsets_of(r: usize, k: usize) -> Vec<Vec<usize>> {
    crate::forms::multiindex::subsets(r, k)
        .into_iter()
        .map(crate::forms::multiindex::elements)
        .collect()
}

/// `c_0..=c_kmax` at a point: degree-`k` parts of `det(Id + (i/2π)Θ)`, expanded over
/// principal `k×k` minors with wedge products of the form-valued entries.
pub fn chern_local(theta: &[CMat], n: usize, r: usize, kmax: usize) -> Vec<LocalForm> {
    let entries: Vec<LocalForm> = (0..r * r).map(|k| entry_form(theta, n, k / r, k % r)).collect();
    let mut out = vec![LocalForm::one()];
    for k in 1..=kmax {
        let mut ck = LocalForm::zero();
        if k <= r {
            for p in subsets_of(r, k) {
                for (perm, sign) in permutations(&p) {
                    let mut prod = LocalForm::scalar(C::new(sign, 0.0));
                    for (row, col) in p.iter().zip(&perm) {
                        prod = prod.wedge(&entries[row * r + col]);
                        if prod.is_zero() {
                            break;
                        }
                    }
                    ck = ck.plus(&prod);
                }
            }
        }
        out.push(ck);
    }
    out
}

fn require_smooth(h: &MetricField) -> Result<()> {
    match h.regularity() {
        Regularity::Smooth => Ok(()),
        Regularity::Singular => Err(Error::NotSmooth(
            "curvature is only formed for smooth metrics; regularize first".into(),
        )),
    }
}

/// Assembles several form fields from per-node local forms.
pub fn forms_from_nodes<F>(chart: &Arc<Chart>, bidegrees: &[(usize, usize)], f: F) -> Result<Vec<FormField>>
where
    F: Fn(usize) -> Result<Vec<LocalForm>> + Sync,
{
    let len = chart.node_count();
    let locals: Vec<Vec<LocalForm>> = (0..len)
        .into_par_iter()
        .with_min_len(256)
        .map(&f)
        .collect::<Result<_>>()?;
    let mut fields = Vec::with_capacity(bidegrees.len());
    for (k, &(p, q)) in bidegrees.iter().enumerate() {
        let mut field = FormField::zeros(chart.clone(), p, q)?;
        let mut comps: std::collections::BTreeMap<(u16, u16), Vec<C>> = Default::default();
        for (node, forms) in locals.iter().enumerate() {
            for &(i, j, c) in forms[k].terms() {
                comps.entry((i, j)).or_insert_with(|| vec![C::new(0.0, 0.0); len])[node] = c;
            }
        }
        for ((i, j), v) in comps {
            field.set_component(i, j, v)?;
        }
        fields.push(field);
    }
    Ok(fields)
}

/// The `r×r` matrix of curvature (1,1)-forms, row-major.
pub fn curvature(h: &MetricField) -> Result<Vec<FormField>> {
    require_smooth(h)?;
    let (n, r) = (h.dim(), h.rank());
    forms_from_nodes(h.chart(), &vec![(1, 1); r * r], |node| {
        let jet = h.jet_at(node)?;
        let theta = curvature_local(&jet).ok_or(Error::FlaggedNode { node })?;
        Ok((0..r * r)
            .map(|k| {
                let m: Vec<C> = (0..n * n).map(|ab| theta[ab].get(k / r, k % r)).collect();
                LocalForm::from_matrix(n, &m)
            })
            .collect())
    })
}

/// Chern forms `c_0..=c_k`.
pub fn chern_forms(h: &MetricField, up_to: usize) -> Result<Vec<FormField>> {
    require_smooth(h)?;
    let (n, r) = (h.dim(), h.rank());
    let max = n.min(r);
    if up_to > max {
        return Err(Error::DegreeOverflow { degree: up_to, max });
    }
    let bidegrees: Vec<(usize, usize)> = (0..=up_to).map(|k| (k, k)).collect();
    forms_from_nodes(h.chart(), &bidegrees, |node| {
        let jet = h.jet_at(node)?;
        let theta = curvature_local(&jet).ok_or(Error::FlaggedNode { node })?;
        Ok(chern_local(&theta, n, r, up_to))
    })
}

/// `dd^c log det h*` from sampled determinants and finite differences.
pub fn first_chern_via_det(h: &MetricField) -> Result<FormField> {
    let chart = h.chart().clone();
    let mut values = Vec::with_capacity(chart.node_count());
    for node in 0..chart.node_count() {
        let det = h.matrix_at(node).det().re;
        if !(det > 0.0 && det.is_finite()) {
            return Err(Error::FlaggedNode { node });
        }
        values.push(-det.ln());
    }
    ddc(&ScalarField::from_values(chart, values)?)
}

/// Sampled evidence for Griffiths positivity of `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GriffithsReport {
    pub samples: usize,
    /// Smallest eigenvalue of the Levi form of `‖u‖²_{h*}` over sampled nodes and sections `u`.
    pub min_levi: f64,
    pub max_levi: f64,
    pub violations: usize,
    pub worst_node: Option<usize>,
    pub passed: bool,
}

/// Samples constant sections `u` and nodes, and records the Levi form of `‖u‖²_{h*}`.
/// Psh of every such function (the dual being Griffiths negative) is what positivity of `h` means.
pub fn griffiths_diagnostic(h: &MetricField, samples: usize, seed: u64) -> GriffithsReport {
    let (n, r) = (h.dim(), h.rank());
    let chart = h.chart();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut min_levi = f64::INFINITY;
    let mut max_levi = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut worst = None;
    let mut taken = 0;
    let mut attempts = 0;
    // analytic metrics need no stencil room
    let margin = if h.analytic_jet().is_some() { 0 } else { 4 };
    let axes = chart.axes();
    if (0..axes).any(|ax| chart.axis_len(ax) <= 2 * margin) {
        attempts = usize::MAX;
    }
    let mut multi = vec![0; axes];
    while taken < samples && attempts < 20 * samples.max(1) {
        attempts += 1;
        for (ax, m) in multi.iter_mut().enumerate() {
            *m = rng.gen_range(margin..chart.axis_len(ax) - margin);
        }
        let node = chart.node_index(&multi);
        let Ok(g) = h.dual_jet_at(node) else { continue };
        let u: Vec<C> = (0..r)
            .map(|_| C::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm: f64 = u.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let u: Vec<C> = u.iter().map(|v| v / norm).collect();
        let levi: Vec<C> = (0..n * n).map(|ab| g.dd[ab].quad_form(&u)).collect();
        let ev = hermitian_eigenvalues(n, &levi);
        let scale = g.h.max_abs().max(1e-300);
        let lo = ev[0] / scale;
        if lo < min_levi {
            min_levi = lo;
            worst = Some(node);
        }
        max_levi = max_levi.max(ev[n - 1] / scale);
        if lo < -1e-9 {
            violations += 1;
        }
        taken += 1;
    }
    GriffithsReport {
        samples: taken,
        min_levi,
        max_levi,
        violations,
        worst_node: worst,
        passed: violations == 0 && taken > 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_signs() {
        let p = permutations(&[0, 1, 2]);
        assert_eq!(p.len(), 6);
        let total: f64 = p.iter().map(|(_, s)| s).sum();
        assert_eq!(total, 0.0);
        assert!(p.contains(&(vec![1, 0, 2], -1.0)));
        assert!(p.contains(&(vec![1, 2, 0], 1.0)));
    }
}
