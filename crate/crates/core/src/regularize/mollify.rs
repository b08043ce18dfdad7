use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::kernel::{CalibratedKernel, Kernel};
use crate::error::{Error, Result};
use crate::forms::Chart;
use crate::linalg::CMat;
use crate::metrics::jet::{DualJet, PolyMatrixJet};
use crate::metrics::{dual_metric, Jet, MetricData, MetricField, MetricJet, Provenance, Regularity, ZPoly};
use crate::projbundle::{FiberRule, FiberScheme};

type C = Complex64;

/// Largest admissible mollification radius: half the smallest chart radius.
pub fn chart_margin(chart: &Chart) -> f64 {
    0.5 * chart.radius().iter().cloned().fold(f64::INFINITY, f64::min)
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Exact convolution of `p` with the radius-`ε` radial kernel.
///
/// For a unitarily invariant law `E[x^γ xbar^δ] = 0` unless `γ = δ`, and
/// `E|x^γ|² = E|x|^{2|γ|} γ! (n-1)! / (|γ| + n - 1)!`.
pub fn mollify_poly(p: &ZPoly, eps: f64, kernel: &CalibratedKernel) -> Result<ZPoly> {
    let n = p.dim();
    let mut out = ZPoly::zero(n);
    for (alpha, beta, c) in p.terms() {
        // every γ <= min(α, β)
        let bound: Vec<u32> = alpha.iter().zip(beta).map(|(a, b)| *a.min(b)).collect();
        let mut gamma = vec![0u32; n];
        loop {
            let g: usize = gamma.iter().map(|&x| x as usize).sum();
            let mut coef = kernel.moment(g, eps)? * factorial(n - 1) / factorial(g + n - 1);
            for j in 0..n {
                coef *= factorial(gamma[j] as usize) * binomial(alpha[j], gamma[j]) * binomial(beta[j], gamma[j]);
            }
            let a: Vec<u32> = alpha.iter().zip(&gamma).map(|(x, y)| x - y).collect();
            let b: Vec<u32> = beta.iter().zip(&gamma).map(|(x, y)| x - y).collect();
            out.add_term(a, b, c * coef);
            // odometer over the box 0..=bound
            let mut j = 0;
            while j < n {
                if gamma[j] < bound[j] {
                    gamma[j] += 1;
                    break;
                }
                gamma[j] = 0;
                j += 1;
            }
            if j == n {
                break;
            }
        }
    }
    Ok(out)
}

/// Convolution of an analytic matrix jet by a fixed cubature on the ball.
#[derive(Debug, Clone)]
pub struct MollifiedJet {
    inner: Arc<dyn MetricJet>,
    points: Vec<(Vec<C>, f64)>,
}

impl MollifiedJet {
    pub fn new(inner: Arc<dyn MetricJet>, eps: f64, kernel: &CalibratedKernel) -> Result<Self> {
        let n = inner.dim();
        let (ts, tw) = kernel.radial_rule(12);
        let (dirs, phases): (Vec<(Vec<C>, f64)>, usize) = if n == 1 {
            (vec![(vec![C::new(1.0, 0.0)], 1.0)], 16)
        } else {
            let rule = FiberRule::new(n, FiberScheme::for_degree(n, 4))?;
            (rule.nodes().iter().map(|f| (f.v.clone(), f.weight)).collect(), 7)
        };
        let mut points = Vec::with_capacity(ts.len() * dirs.len() * phases);
        for (t, wt) in ts.iter().zip(&tw) {
            for (v, wv) in &dirs {
                for m in 0..phases {
                    let rot = C::from_polar(1.0, 2.0 * PI * (m as f64 + 0.5) / phases as f64);
                    let x: Vec<C> = v.iter().map(|c| c * rot * (t * eps)).collect();
                    points.push((x, wt * wv / phases as f64));
                }
            }
        }
        Ok(MollifiedJet { inner, points })
    }
}

impl MetricJet for MollifiedJet {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn rank(&self) -> usize {
        self.inner.rank()
    }
    fn eval(&self, z: &[C]) -> Option<Jet> {
        let (n, r) = (self.dim(), self.rank());
        let mut acc = Jet::constant(CMat::zeros(r), n);
        let mut w = z.to_vec();
        for (x, weight) in &self.points {
            for j in 0..n {
                w[j] = z[j] + x[j];
            }
            let jet = self.inner.eval(&w)?;
            acc.h = acc.h + jet.h * *weight;
            for (a, d) in acc.d.iter_mut().zip(&jet.d) {
                *a = *a + *d * *weight;
            }
            for (a, d) in acc.dd.iter_mut().zip(&jet.dd) {
                *a = *a + *d * *weight;
            }
        }
        Some(acc)
    }
}

fn check_eps(chart: &Chart, eps: f64) -> Result<()> {
    let margin = chart_margin(chart);
    if !(eps > 0.0) {
        return Err(Error::InvalidSchedule(format!("ε must be positive, got {eps}")));
    }
    if eps >= margin {
        return Err(Error::EpsTooLarge { eps, margin });
    }
    Ok(())
}

/// `h_ε` with the default bump kernel.
pub fn mollify(h: &MetricField, eps: f64) -> Result<MetricField> {
    mollify_with(h, eps, &CalibratedKernel::new(Kernel::Bump, h.dim())?)
}

/// Entrywise convolution of `h*` with the radius-`ε` kernel, then dualized.
///
/// Polynomial `h*` is convolved exactly through the kernel moments; other analytic
/// metrics by a ball cubature; sampled metrics by a discrete convolution on the grid
/// (nodes whose kernel ball leaves the chart are flagged).
pub fn mollify_with(h: &MetricField, eps: f64, kernel: &CalibratedKernel) -> Result<MetricField> {
    let chart = h.chart().clone();
    check_eps(&chart, eps)?;
    if kernel.dim != h.dim() {
        return Err(Error::Config("kernel dimension differs from the chart".into()));
    }
    kernel.require_calibrated(1e-10)?;
    let provenance = Provenance::Mollified {
        source: Box::new(h.provenance().clone()),
        eps,
        kernel: kernel.kernel.name(),
    };
    match h.data() {
        MetricData::Analytic(jet) => {
            let g: Arc<dyn MetricJet> = match jet.dual_source() {
                Some(g) => g,
                None => Arc::new(DualJet { inner: jet.clone() }),
            };
            let smoothed: Arc<dyn MetricJet> = match g.polynomial() {
                Some(p) => Arc::new(PolyMatrixJet {
                    n: p.n,
                    r: p.r,
                    entries: p
                        .entries
                        .iter()
                        .map(|e| mollify_poly(e, eps, kernel))
                        .collect::<Result<_>>()?,
                }),
                None => Arc::new(MollifiedJet::new(g, eps, kernel)?),
            };
            MetricField::analytic(chart, Arc::new(DualJet { inner: smoothed }), Regularity::Smooth, provenance)
        }
        MetricData::Sampled(_) => {
            let g = dual_metric(h)?;
            let entries = grid_convolve(&g, eps, kernel);
            let gs = MetricField::sampled(chart, h.rank(), entries, Regularity::Smooth, provenance.clone())?;
            let out = dual_metric(&gs)?;
            let rank = out.rank();
            let entries = match out.data() {
                MetricData::Sampled(e) => e.as_ref().clone(),
                MetricData::Analytic(_) => unreachable!("dual of sampled is sampled"),
            };
            MetricField::sampled(out.chart().clone(), rank, entries, Regularity::Smooth, provenance)
        }
    }
}

/// Discrete normalized convolution of every entry of a sampled metric.
fn grid_convolve(g: &MetricField, eps: f64, kernel: &CalibratedKernel) -> Vec<Vec<C>> {
    let chart = g.chart();
    let axes = chart.axes();
    let r = g.rank();
    let reach: Vec<isize> = (0..axes)
        .map(|ax| (eps / chart.axis_spacing(ax)).floor() as isize)
        .collect();
    // offsets inside the ball with their kernel weights
    let mut offsets: Vec<(Vec<isize>, f64)> = Vec::new();
    let mut o: Vec<isize> = reach.iter().map(|r| -r).collect();
    loop {
        let rho2: f64 = o
            .iter()
            .enumerate()
            .map(|(ax, &k)| (k as f64 * chart.axis_spacing(ax)).powi(2))
            .sum();
        let w = kernel.density(rho2.sqrt(), eps);
        if w > 0.0 {
            offsets.push((o.clone(), w));
        }
        let mut ax = 0;
        while ax < axes {
            if o[ax] < reach[ax] {
                o[ax] += 1;
                break;
            }
            o[ax] = -reach[ax];
            ax += 1;
        }
        if ax == axes {
            break;
        }
    }
    let mats: Vec<CMat> = (0..chart.node_count()).map(|k| g.matrix_at(k)).collect();
    let out: Vec<CMat> = (0..chart.node_count())
        .into_par_iter()
        .map(|node| {
            let idx = chart.multi_index(node);
            let fits = (0..axes).all(|ax| {
                idx[ax] as isize >= reach[ax] && (idx[ax] as isize + reach[ax]) < chart.axis_len(ax) as isize
            });
            if !fits {
                return CMat::zeros(r).scale(C::new(f64::NAN, 0.0));
            }
            let mut acc = CMat::zeros(r);
            let mut total = 0.0;
            let mut m = idx.clone();
            for (off, w) in &offsets {
                for ax in 0..axes {
                    m[ax] = (idx[ax] as isize + off[ax]) as usize;
                }
                let v = mats[chart.node_index(&m)];
                if v.is_finite() {
                    acc = acc + v * *w;
                    total += w;
                }
            }
            acc * (1.0 / total)
        })
        .collect();
    (0..r * r)
        .map(|e| out.iter().map(|m| m.get(e / r, e % r)).collect())
        .collect()
}
