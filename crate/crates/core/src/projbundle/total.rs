use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::fiber::FiberRule;
use super::phi::{hessian, InducedPhi};
use crate::error::{Error, Result};
use crate::forms::multiindex::{degree, Mask};
use crate::forms::{ddc_factor, Chart, FormField, LocalForm};
use crate::metrics::forms_from_nodes;

type C = Complex64;

/// A form on `P(E)` over a chart, sampled at (base node, fiber node) pairs.
///
/// Variables `0..n` are the base coordinates and `n..n+r-1` the affine fiber
/// coordinates of each fiber node's chart. Fiber coordinates at a base node are taken
/// in the frame where `h*` is the identity at that node.
#[derive(Debug, Clone)]
pub struct TotalSpaceForm {
    chart: Arc<Chart>,
    rule: Arc<FiberRule>,
    values: Vec<LocalForm>,
}

impl TotalSpaceForm {
    pub fn from_fn<F>(chart: Arc<Chart>, rule: Arc<FiberRule>, f: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> Result<LocalForm> + Sync,
    {
        let nf = rule.nodes().len();
        let values = (0..chart.node_count() * nf)
            .into_par_iter()
            .map(|i| f(i / nf, i % nf))
            .collect::<Result<Vec<_>>>()?;
        Ok(TotalSpaceForm { chart, rule, values })
    }

    /// `π^* γ`.
    pub fn pullback(gamma: &FormField, rule: Arc<FiberRule>) -> Result<Self> {
        Self::from_fn(gamma.chart().clone(), rule, |b, _| Ok(gamma.local(b)))
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn rule(&self) -> &Arc<FiberRule> {
        &self.rule
    }

    pub fn get(&self, base: usize, fiber: usize) -> &LocalForm {
        &self.values[base * self.rule.nodes().len() + fiber]
    }

    fn compatible(&self, other: &TotalSpaceForm) -> Result<()> {
        if self.chart != other.chart {
            return Err(Error::ChartMismatch);
        }
        if !Arc::ptr_eq(&self.rule, &other.rule) {
            return Err(Error::Config("total-space forms use different fiber rules".into()));
        }
        Ok(())
    }

    pub fn wedge(&self, other: &TotalSpaceForm) -> Result<Self> {
        self.compatible(other)?;
        let values = self
            .values
            .par_iter()
            .zip(&other.values)
            .map(|(a, b)| a.wedge(b))
            .collect();
        Ok(TotalSpaceForm {
            chart: self.chart.clone(),
            rule: self.rule.clone(),
            values,
        })
    }

    pub fn power(&self, m: usize) -> Self {
        let values = self
            .values
            .par_iter()
            .map(|a| (0..m).fold(LocalForm::one(), |acc, _| acc.wedge(a)))
            .collect();
        TotalSpaceForm {
            chart: self.chart.clone(),
            rule: self.rule.clone(),
            values,
        }
    }

    /// Integration along the fibers. Only terms containing every fiber differential
    /// contribute; the result has bidegree `(p - r + 1, q - r + 1)`.
    pub fn fiber_pushforward(&self, p: usize, q: usize, tolerance: f64) -> Result<FormField> {
        self.rule.check(tolerance)?;
        let n = self.chart.dim();
        let r = self.rule.rank();
        let f = r - 1;
        if p < f || q < f || p > n + f || q > n + f {
            return Err(Error::BidegreeOverflow { p, q, n: n + f });
        }
        let fiber_mask: Mask = (((1u32 << f) - 1) << n) as Mask;
        let base_mask: Mask = ((1u32 << n) - 1) as Mask;
        let tri = if (f * f.saturating_sub(1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let c = C::new(0.0, -2.0).powu(f as u32) * (tri * PI.powi(f as i32) / factorial(f));
        let nodes = self.rule.nodes();
        let fields = forms_from_nodes(&self.chart, &[(p - f, q - f)], |b| {
            let mut out = LocalForm::zero();
            for (k, node) in nodes.iter().enumerate() {
                let scale = node.weight * node.q().powi(r as i32);
                for &(i, j, v) in self.get(b, k).terms() {
                    if degree(i) != p || degree(j) != q {
                        return Err(Error::WrongBidegree {
                            expected_p: p,
                            expected_q: q,
                            p: degree(i),
                            q: degree(j),
                        });
                    }
                    if i & fiber_mask != fiber_mask || j & fiber_mask != fiber_mask {
                        continue;
                    }
                    let bj = j & base_mask;
                    let sign = if (f * degree(bj)) % 2 == 0 { 1.0 } else { -1.0 };
                    out.add_term(i & base_mask, bj, v * c * (sign * scale));
                }
            }
            Ok(vec![out])
        })?;
        Ok(fields.into_iter().next().expect("one field"))
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// `Φ = dd^c φ` on the total space.
pub fn phi_form(phi: &InducedPhi, rule: Arc<FiberRule>) -> Result<TotalSpaceForm> {
    let h = phi.hstar();
    if rule.rank() != h.rank() {
        return Err(Error::RankMismatch {
            expected: h.rank(),
            got: rule.rank(),
        });
    }
    let m = h.dim() + h.rank() - 1;
    let jets = (0..h.chart().node_count())
        .into_par_iter()
        .map(|b| phi.normalized_jet(b))
        .collect::<Result<Vec<_>>>()?;
    let nodes = rule.nodes().to_vec();
    TotalSpaceForm::from_fn(h.chart().clone(), rule, |b, k| {
        let hess = hessian(&jets[b], &nodes[k]);
        Ok(LocalForm::from_matrix(m, &hess).times(ddc_factor(1)))
    })
}
