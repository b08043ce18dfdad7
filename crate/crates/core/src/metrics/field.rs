use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::jet::{DualJet, Jet, MetricJet};
use super::poly::{SectionMatrix, ZPoly};
use crate::error::{Error, Result};
use crate::forms::{diff, Chart};
use crate::linalg::{CMat, MAX};

type C = Complex64;
const ZERO: C = C { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularity {
    Smooth,
    Singular,
}

/// Where a metric came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    Catalog { name: String, params: serde_json::Value },
    SectionInduced { sections: SectionMatrix },
    DualOf { source: Box<Provenance> },
    Mollified { source: Box<Provenance>, eps: f64, kernel: String },
    AnalyticEps { sections: SectionMatrix, eps: f64 },
    DirectSum { parts: Vec<Provenance> },
}

/// A declared degeneracy variety `V = {p_1 = ... = p_m = 0}` with its claimed codimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Degeneracy {
    pub equations: Vec<ZPoly>,
    pub codim: usize,
}

/// Outcome of checking a declared degeneracy variety against a metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyReport {
    /// Largest `|det h*|` at sampled points of `V`.
    pub max_det_on_v: f64,
    /// Smallest `det h*` at grid nodes farther than `delta` from `V`.
    pub min_det_off_v: f64,
    pub samples_on_v: usize,
    pub nodes_off_v: usize,
    pub passed: bool,
}

impl Degeneracy {
    pub fn new(equations: Vec<ZPoly>, codim: usize) -> Result<Self> {
        if equations.is_empty() || equations.len() > MAX {
            return Err(Error::Config(format!("a degeneracy variety needs 1..={MAX} equations")));
        }
        if equations.iter().any(|p| !p.is_holomorphic()) {
            return Err(Error::Config("degeneracy equations must be holomorphic".into()));
        }
        Ok(Degeneracy { equations, codim })
    }

    /// `V = {z_i = 0 for i in axes}`.
    pub fn coordinate(n: usize, axes: &[usize]) -> Result<Self> {
        Degeneracy::new(axes.iter().map(|&a| ZPoly::coordinate(n, a)).collect(), axes.len())
    }

    pub fn residual(&self, z: &[C]) -> f64 {
        self.equations.iter().map(|p| p.eval(z).norm()).fold(0.0, f64::max)
    }

    /// Gauss-Newton projection onto `V` with minimum-norm steps.
    pub fn project(&self, z0: &[C]) -> Option<Vec<C>> {
        let m = self.equations.len();
        let n = z0.len();
        let grads: Vec<Vec<ZPoly>> = self
            .equations
            .iter()
            .map(|p| (0..n).map(|a| p.derivative(a)).collect())
            .collect();
        let mut z = z0.to_vec();
        for _ in 0..60 {
            let f: Vec<C> = self.equations.iter().map(|p| p.eval(&z)).collect();
            if f.iter().all(|v| v.norm() < 1e-13) {
                return Some(z);
            }
            let jac: Vec<Vec<C>> = grads.iter().map(|g| g.iter().map(|p| p.eval(&z)).collect()).collect();
            let mut jjh = CMat::zeros(m);
            for i in 0..m {
                for k in 0..m {
                    let v: C = (0..n).map(|a| jac[i][a] * jac[k][a].conj()).sum();
                    jjh.set(i, k, v);
                }
                jjh.set(i, i, jjh.get(i, i) + C::new(1e-14, 0.0));
            }
            let inv = jjh.inverse()?;
            let y: Vec<C> = (0..m).map(|i| (0..m).map(|k| inv.get(i, k) * f[k]).sum()).collect();
            for a in 0..n {
                let step: C = (0..m).map(|i| jac[i][a].conj() * y[i]).sum();
                z[a] -= step;
            }
        }
        (self.residual(&z) < 1e-10).then_some(z)
    }

    /// Distance from `z` to its projection onto `V` (an upper bound for the true distance).
    pub fn distance(&self, z: &[C]) -> f64 {
        match self.project(z) {
            Some(p) => p.iter().zip(z).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt(),
            None => f64::INFINITY,
        }
    }

    /// Checks that `det h*` vanishes on `V` and stays positive at nodes farther than `delta`.
    pub fn check(&self, hstar: &MetricField, delta: f64, samples: usize, seed: u64) -> DegeneracyReport {
        let chart = hstar.chart();
        let n = chart.dim();
        let mut rng = StdRng::seed_from_u64(seed);
        let mut max_on = 0.0f64;
        let mut on = 0;
        for _ in 0..samples {
            let z0: Vec<C> = (0..n)
                .map(|j| {
                    let r = chart.radius()[j];
                    chart.center()[j] + C::new(rng.gen_range(-r..r), rng.gen_range(-r..r))
                })
                .collect();
            if let Some(p) = self.project(&z0) {
                if chart.contains(&p) {
                    if let Some(m) = hstar.matrix_at_point(&p) {
                        max_on = max_on.max(m.det().norm());
                        on += 1;
                    }
                }
            }
        }
        let mut min_off = f64::INFINITY;
        let mut off = 0;
        let stride = (chart.node_count() / 4096).max(1);
        for node in (0..chart.node_count()).step_by(stride) {
            let z = chart.coords(node);
            if self.distance(&z) > delta {
                min_off = min_off.min(hstar.matrix_at(node).det().re);
                off += 1;
            }
        }
        let scale = min_off.abs().max(1e-300);
        DegeneracyReport {
            max_det_on_v: max_on,
            min_det_off_v: min_off,
            samples_on_v: on,
            nodes_off_v: off,
            passed: on > 0 && max_on < 1e-10 * scale.max(1.0) && min_off > 0.0,
        }
    }
}

#[derive(Clone)]
pub enum MetricData {
    Analytic(Arc<dyn MetricJet>),
    /// Entries `H_ij` as grid arrays, row-major in `(i, j)`.
    Sampled(Arc<Vec<Vec<C>>>),
}

impl fmt::Debug for MetricData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricData::Analytic(j) => write!(f, "Analytic({j:?})"),
            MetricData::Sampled(v) => write!(f, "Sampled({} entries)", v.len()),
        }
    }
}

/// A hermitian metric on the trivial bundle of rank `r` over a chart.
#[derive(Debug, Clone)]
pub struct MetricField {
    chart: Arc<Chart>,
    rank: usize,
    data: MetricData,
    regularity: Regularity,
    degeneracy: Option<Degeneracy>,
    provenance: Provenance,
}

impl MetricField {
    pub fn analytic(
        chart: Arc<Chart>,
        jet: Arc<dyn MetricJet>,
        regularity: Regularity,
        provenance: Provenance,
    ) -> Result<Self> {
        if jet.dim() != chart.dim() {
            return Err(Error::ChartMismatch);
        }
        if jet.rank() == 0 || jet.rank() > MAX {
            return Err(Error::RankMismatch {
                expected: MAX,
                got: jet.rank(),
            });
        }
        Ok(MetricField {
            rank: jet.rank(),
            chart,
            data: MetricData::Analytic(jet),
            regularity,
            degeneracy: None,
            provenance,
        })
    }

    /// Metric from sampled entries; the matrix must be hermitian at every finite node.
    pub fn sampled(
        chart: Arc<Chart>,
        rank: usize,
        entries: Vec<Vec<C>>,
        regularity: Regularity,
        provenance: Provenance,
    ) -> Result<Self> {
        if rank == 0 || rank > MAX || entries.len() != rank * rank {
            return Err(Error::RankMismatch {
                expected: rank * rank,
                got: entries.len(),
            });
        }
        let len = chart.node_count();
        if entries.iter().any(|e| e.len() != len) {
            return Err(Error::ChartMismatch);
        }
        for node in 0..len {
            for i in 0..rank {
                for j in i..rank {
                    let (a, b) = (entries[i * rank + j][node], entries[j * rank + i][node]);
                    if a.re.is_finite() && (a - b.conj()).norm() > 1e-12 * (1.0 + a.norm()) {
                        return Err(Error::NotSmooth(format!("entry matrix not hermitian at node {node}")));
                    }
                }
            }
        }
        Ok(MetricField {
            chart,
            rank,
            data: MetricData::Sampled(Arc::new(entries)),
            regularity,
            degeneracy: None,
            provenance,
        })
    }

    pub fn with_degeneracy(mut self, v: Degeneracy) -> Self {
        self.degeneracy = Some(v);
        self
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn regularity(&self) -> Regularity {
        self.regularity
    }

    pub fn degeneracy(&self) -> Option<&Degeneracy> {
        self.degeneracy.as_ref()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn data(&self) -> &MetricData {
        &self.data
    }

    pub fn analytic_jet(&self) -> Option<&Arc<dyn MetricJet>> {
        match &self.data {
            MetricData::Analytic(j) => Some(j),
            MetricData::Sampled(_) => None,
        }
    }

    /// The metric matrix at a node (non-finite entries where the metric is undefined).
    pub fn matrix_at(&self, node: usize) -> CMat {
        match &self.data {
            MetricData::Analytic(j) => match j.eval(&self.chart.coords(node)) {
                Some(jet) => jet.h,
                None => nan_matrix(self.rank),
            },
            MetricData::Sampled(e) => {
                let r = self.rank;
                let rows: Vec<C> = (0..r * r).map(|k| e[k][node]).collect();
                CMat::from_rows(r, &rows)
            }
        }
    }

    /// The metric matrix at an arbitrary point; analytic metrics only.
    pub fn matrix_at_point(&self, z: &[C]) -> Option<CMat> {
        self.analytic_jet()?.eval(z).map(|j| j.h)
    }

    /// True where the metric matrix is not positive definite (or undefined).
    pub fn is_flagged(&self, node: usize) -> bool {
        self.matrix_at(node).cholesky().is_none()
    }

    /// Value and derivatives at a node: analytic when available, finite differences otherwise.
    pub fn jet_at(&self, node: usize) -> Result<Jet> {
        match &self.data {
            MetricData::Analytic(j) => j.eval(&self.chart.coords(node)).ok_or(Error::FlaggedNode { node }),
            MetricData::Sampled(e) => self.sampled_jet(e, node),
        }
    }

    fn sampled_jet(&self, e: &[Vec<C>], node: usize) -> Result<Jet> {
        let (r, n) = (self.rank, self.dim());
        let chart = &self.chart;
        let mut jet = Jet::constant(self.matrix_at(node), n);
        if !jet.h.is_finite() {
            return Err(Error::FlaggedNode { node });
        }
        for i in 0..r {
            for j in 0..r {
                let data = &e[i * r + j];
                for a in 0..n {
                    let fx = diff::first_at(chart, data, 2 * a, node);
                    let fy = diff::first_at(chart, data, 2 * a + 1, node);
                    if !(fx.re.is_finite() && fx.im.is_finite() && fy.re.is_finite() && fy.im.is_finite()) {
                        return Err(Error::SingularStencil { node });
                    }
                    jet.d[a].set(i, j, (fx - C::new(0.0, 1.0) * fy) * 0.5);
                    let xx = diff::second_at(chart, data, 2 * a, node);
                    let yy = diff::second_at(chart, data, 2 * a + 1, node);
                    jet.dd[a * n + a].set(i, j, (xx + yy) * 0.25);
                    for b in 0..n {
                        if b == a {
                            continue;
                        }
                        let xaxb = diff::mixed_at(chart, data, 2 * a, 2 * b, node);
                        let yayb = diff::mixed_at(chart, data, 2 * a + 1, 2 * b + 1, node);
                        let xayb = diff::mixed_at(chart, data, 2 * a, 2 * b + 1, node);
                        let yaxb = diff::mixed_at(chart, data, 2 * a + 1, 2 * b, node);
                        let v = (xaxb + yayb + C::new(0.0, 1.0) * (xayb - yaxb)) * 0.25;
                        jet.dd[a * n + b].set(i, j, v);
                    }
                }
            }
        }
        Ok(jet)
    }

    /// Jet of the dual metric at a node, avoiding a round-trip inversion when the
    /// metric is itself a dual of an analytic metric.
    pub fn dual_jet_at(&self, node: usize) -> Result<Jet> {
        if let MetricData::Analytic(j) = &self.data {
            if let Some(src) = j.dual_source() {
                return src.eval(&self.chart.coords(node)).ok_or(Error::FlaggedNode { node });
            }
        }
        self.jet_at(node)?.dual().ok_or(Error::FlaggedNode { node })
    }

    pub(crate) fn replace_data(&self, data: MetricData, regularity: Regularity, provenance: Provenance) -> Self {
        MetricField {
            chart: self.chart.clone(),
            rank: self.rank,
            data,
            regularity,
            degeneracy: self.degeneracy.clone(),
            provenance,
        }
    }
}

fn nan_matrix(r: usize) -> CMat {
    CMat::from_rows(r, &vec![C::new(f64::NAN, f64::NAN); r * r])
}

/// The dual metric `conj(H^{-1})`; degenerate nodes are flagged (non-finite), never inverted.
pub fn dual_metric(h: &MetricField) -> Result<MetricField> {
    let provenance = Provenance::DualOf {
        source: Box::new(h.provenance.clone()),
    };
    match &h.data {
        MetricData::Analytic(j) => {
            let dual: Arc<dyn MetricJet> = match j.dual_source() {
                Some(src) => src,
                None => Arc::new(DualJet { inner: j.clone() }),
            };
            Ok(h.replace_data(MetricData::Analytic(dual), h.regularity, provenance))
        }
        MetricData::Sampled(_) => {
            let r = h.rank;
            let len = h.chart.node_count();
            let mut entries = vec![vec![ZERO; len]; r * r];
            for node in 0..len {
                let m = h.matrix_at(node);
                match m.hpd_inverse() {
                    Some(k) => {
                        for i in 0..r {
                            for j in 0..r {
                                entries[i * r + j][node] = k.get(i, j).conj();
                            }
                        }
                    }
                    None => {
                        for e in entries.iter_mut() {
                            e[node] = C::new(f64::NAN, f64::NAN);
                        }
                    }
                }
            }
            Ok(h.replace_data(MetricData::Sampled(Arc::new(entries)), h.regularity, provenance))
        }
    }
}

/// Dual pair `(h*, h)` induced by sections: `h* = S^H S`, `h = conj((h*)^{-1})` off `V`.
pub fn from_sections(
    chart: Arc<Chart>,
    sections: &SectionMatrix,
    degeneracy: Option<Degeneracy>,
) -> Result<(MetricField, MetricField)> {
    if sections.dim() != chart.dim() {
        return Err(Error::ChartMismatch);
    }
    let r = sections.cols();
    let gram: Arc<dyn MetricJet> = Arc::new(super::jet::PolyMatrixJet {
        n: chart.dim(),
        r,
        entries: sections.gram(0.0),
    });
    let prov = Provenance::SectionInduced {
        sections: sections.clone(),
    };
    let mut hstar = MetricField::analytic(chart.clone(), gram.clone(), Regularity::Singular, prov.clone())?;
    let mut h = MetricField::analytic(
        chart,
        Arc::new(DualJet { inner: gram }),
        Regularity::Singular,
        Provenance::DualOf { source: Box::new(prov) },
    )?;
    if let Some(v) = degeneracy {
        hstar = hstar.with_degeneracy(v.clone());
        h = h.with_degeneracy(v);
    }
    Ok((hstar, h))
}
