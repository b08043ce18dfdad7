use num_complex::Complex64;
use rayon::prelude::*;

use super::fiber::{FiberRule, FiberScheme};
use super::phi::{hessian_into, normalize};
use crate::error::{Error, Result};
use crate::forms::multiindex::{elements, subsets, Mask};
use crate::forms::{ddc_factor, FormField, LocalForm};
use crate::linalg::det_in_place;
use crate::metrics::{forms_from_nodes, Jet, MetricField, Regularity};

type C = Complex64;

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Fiber rule exact for the Segre integrands up to degree `kmax` after normalization.
pub fn default_rule(rank: usize, kmax: usize) -> Result<FiberRule> {
    FiberRule::new(rank, FiberScheme::for_degree(rank, 2 * kmax + 2))
}

/// `s_0..=s_kmax` at one base point from the jet of `G = h*`, computed as
/// `(-1)^k π_*(Φ^{k+r-1})` with `Φ = dd^c log(w^H G w)`.
///
/// The top power is expanded symbolically: the coefficient of
/// `dz_A ∧ dzbar_B ∧ dt_F ∧ dtbar_F` in `Φ^m` is `(i/2π)^m (-1)^{m(m-1)/2} m! det H[A∪F, B∪F]`,
/// and the fiber integral is taken against the normalized Fubini-Study measure.
pub fn segre_local(g: &Jet, rule: &FiberRule, kmax: usize) -> Option<Vec<LocalForm>> {
    let n = g.dim();
    let r = g.rank();
    let f = r - 1;
    let g = normalize(g)?;
    let m_full = n + f;
    let blocks: Vec<Vec<(Mask, Mask)>> = (0..=kmax)
        .map(|k| {
            let s = subsets(n, k);
            s.iter().flat_map(|&a| s.iter().map(move |&b| (a, b))).collect()
        })
        .collect();
    let minors: Vec<Vec<(Vec<usize>, Vec<usize>)>> = blocks
        .iter()
        .map(|pairs| {
            pairs
                .iter()
                .map(|&(a, b)| {
                    let rows = elements(a).into_iter().chain(n..m_full).collect();
                    let cols = elements(b).into_iter().chain(n..m_full).collect();
                    (rows, cols)
                })
                .collect()
        })
        .collect();
    let mut sums: Vec<Vec<C>> = blocks.iter().map(|b| vec![C::new(0.0, 0.0); b.len()]).collect();
    let mut buf = Vec::with_capacity(m_full * m_full);
    let mut h = vec![C::new(0.0, 0.0); m_full * m_full];
    for node in rule.nodes() {
        hessian_into(&g, node, &mut h);
        let scale = node.q().powi(r as i32) * node.weight;
        for (k, pairs) in minors.iter().enumerate() {
            let m = k + f;
            for (slot, (rows, cols)) in pairs.iter().enumerate() {
                buf.clear();
                for &i in rows {
                    for &j in cols {
                        buf.push(h[i * m_full + j]);
                    }
                }
                sums[k][slot] += det_in_place(&mut buf, m) * scale;
            }
        }
    }
    let mut out = Vec::with_capacity(kmax + 1);
    for (k, pairs) in blocks.iter().enumerate() {
        let m = k + f;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let tri = if (k * k.saturating_sub(1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let coef = ddc_factor(k) * (sign * tri * factorial(m) / factorial(f));
        let mut form = LocalForm::zero();
        for (slot, &(a, b)) in pairs.iter().enumerate() {
            form.add_term(a, b, sums[k][slot] * coef);
        }
        out.push(form);
    }
    Some(out)
}

fn check(h: &MetricField, k: usize) -> Result<()> {
    if h.regularity() != Regularity::Smooth {
        return Err(Error::NotSmooth("Segre forms are formed for smooth metrics only".into()));
    }
    if k > h.dim() {
        return Err(Error::DegreeOverflow { degree: k, max: h.dim() });
    }
    Ok(())
}

/// `s_k(E, h)` via the projectivized bundle.
pub fn segre_form(h: &MetricField, k: usize, rule: &FiberRule) -> Result<FormField> {
    Ok(segre_forms(h, k, rule)?.pop().expect("k + 1 forms"))
}

/// `s_0..=s_k(E, h)`.
pub fn segre_forms(h: &MetricField, k: usize, rule: &FiberRule) -> Result<Vec<FormField>> {
    check(h, k)?;
    if rule.rank() != h.rank() {
        return Err(Error::RankMismatch {
            expected: h.rank(),
            got: rule.rank(),
        });
    }
    let bidegrees: Vec<(usize, usize)> = (0..=k).map(|j| (j, j)).collect();
    forms_from_nodes(h.chart(), &bidegrees, |node| {
        let g = h.dual_jet_at(node)?;
        segre_local(&g, rule, k).ok_or(Error::FlaggedNode { node })
    })
}

/// Nodewise Segre evaluation without storing grid forms.
pub struct SegreEvaluator<'a> {
    h: &'a MetricField,
    rule: &'a FiberRule,
    kmax: usize,
}

impl<'a> SegreEvaluator<'a> {
    pub fn new(h: &'a MetricField, rule: &'a FiberRule, kmax: usize) -> Result<Self> {
        check(h, kmax)?;
        Ok(SegreEvaluator { h, rule, kmax })
    }

    pub fn at(&self, node: usize) -> Result<Vec<LocalForm>> {
        let g = self.h.dual_jet_at(node)?;
        segre_local(&g, self.rule, self.kmax).ok_or(Error::FlaggedNode { node })
    }

    /// Evaluates at many nodes in parallel, preserving order.
    pub fn at_nodes(&self, nodes: &[usize]) -> Result<Vec<Vec<LocalForm>>> {
        nodes.par_iter().map(|&n| self.at(n)).collect()
    }
}
