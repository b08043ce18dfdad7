use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bump::{radial_cutoff, smooth_step_derivative, TestForm};
use super::extrapolate::{LevelReport, PairingReport, Verdict};
use super::pair::pair_nodewise;
use crate::charclass::{rational_to_f64, CharClassAlgebra};
use crate::error::{Error, Result};
use crate::forms::multiindex::subsets;
use crate::forms::{ddc_factor, Chart, FormField, LocalForm};
use crate::metrics::{chern_local, curvature_local, MetricField, Regularity};
use crate::projbundle::{default_rule, segre_local, FiberRule};
use crate::regularize::RegularizationFamily;

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitOptions {
    /// Relative change below which a limit counts as converged.
    pub tolerance: f64,
    /// Extra `ε` values an unstable inner level may receive.
    pub max_refinements: usize,
    /// Smallest admissible `ε`; `None` means twice the largest grid spacing.
    pub eps_floor: Option<f64>,
    /// Calibration tolerance of the fiber rule.
    pub fiber_tolerance: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        LimitOptions {
            tolerance: 1e-3,
            max_refinements: 8,
            eps_floor: None,
            fiber_tolerance: 1e-4,
        }
    }
}

impl LimitOptions {
    fn floor(&self, chart: &Chart) -> f64 {
        self.eps_floor
            .unwrap_or_else(|| 2.0 * (0..chart.dim()).map(|j| chart.spacing(j)).fold(0.0, f64::max))
    }
}

#[derive(Debug, Clone)]
pub struct CurrentFactor {
    pub family: RegularizationFamily,
    pub degree: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitMode {
    Simultaneous,
    Iterated,
}

/// `c_{k_1}(E_1) ∧ ... ∧ c_{k_m}(E_m)` (simultaneous) or `s_{k_1} ∧ ... ∧ s_{k_m}` (iterated).
#[derive(Debug, Clone)]
pub struct CurrentProductSpec {
    pub factors: Vec<CurrentFactor>,
    pub mode: LimitMode,
}

impl CurrentProductSpec {
    pub fn new(factors: Vec<CurrentFactor>, mode: LimitMode) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Config("a current product needs at least one factor".into()));
        }
        let chart = factors[0].family.source().chart();
        if factors.iter().any(|f| f.family.source().chart() != chart) {
            return Err(Error::ChartMismatch);
        }
        Ok(CurrentProductSpec { factors, mode })
    }

    pub fn single(family: RegularizationFamily, degree: usize, mode: LimitMode) -> Result<Self> {
        Self::new(vec![CurrentFactor { family, degree }], mode)
    }

    pub fn total_degree(&self) -> usize {
        self.factors.iter().map(|f| f.degree).sum()
    }

    pub fn chart(&self) -> &std::sync::Arc<Chart> {
        self.factors[0].family.source().chart()
    }

    /// Degree and codimension preconditions.
    pub fn validate(&self) -> Result<()> {
        let k = self.total_degree();
        let n = self.chart().dim();
        if k > n {
            return Err(Error::DegreeOverflow { degree: k, max: n });
        }
        for f in &self.factors {
            check_codim(f.family.source(), k)?;
            let declared = f.family.convergence();
            let ok = match self.mode {
                LimitMode::Simultaneous => declared.locally_uniform(),
                LimitMode::Iterated => declared.increasing(),
            };
            if !ok {
                return Err(Error::Config(format!(
                    "family {} is declared {declared:?}, which does not support {:?} limits",
                    f.family.mode().label(),
                    self.mode
                )));
            }
        }
        Ok(())
    }
}

/// A singular source must declare `V` with `codim V >= k`.
pub fn check_codim(source: &MetricField, k: usize) -> Result<()> {
    if source.regularity() == Regularity::Smooth || k == 0 {
        return Ok(());
    }
    match source.degeneracy() {
        Some(v) if v.codim >= k => Ok(()),
        Some(v) => Err(Error::Codimension { codim: v.codim, k }),
        None => Err(Error::Config(
            "a singular metric needs a declared degeneracy locus V before limits are taken".into(),
        )),
    }
}

fn chern_at(h: &MetricField, node: usize, kmax: usize) -> Result<Vec<LocalForm>> {
    let jet = h.jet_at(node)?;
    let theta = curvature_local(&jet).ok_or(Error::FlaggedNode { node })?;
    Ok(chern_local(&theta, h.dim(), h.rank(), kmax))
}

fn members(family: &RegularizationFamily, schedule: &[f64]) -> Result<Vec<MetricField>> {
    schedule.par_iter().map(|&e| family.member(e)).collect()
}

fn same_schedule(spec: &CurrentProductSpec) -> Result<Vec<f64>> {
    let s = spec.factors[0].family.schedule().to_vec();
    if spec.factors.iter().any(|f| f.family.schedule() != s.as_slice()) {
        return Err(Error::InvalidSchedule("simultaneous limits need one common schedule".into()));
    }
    Ok(s)
}

fn product_label(prefix: &str, spec: &CurrentProductSpec) -> String {
    let parts: Vec<String> = spec.factors.iter().map(|f| format!("{prefix}{}", f.degree)).collect();
    parts.join("^")
}

/// `lim_ε ⟨c_{k_1}(h¹_ε) ∧ ... ∧ c_{k_m}(h^m_ε), β⟩` with one `ε` for all factors.
pub fn simultaneous_limit(spec: &CurrentProductSpec, beta: &TestForm, opts: &LimitOptions) -> Result<PairingReport> {
    spec.validate()?;
    let schedule = same_schedule(spec)?;
    let k = spec.total_degree();
    let all: Vec<Vec<MetricField>> = spec
        .factors
        .iter()
        .map(|f| members(&f.family, &schedule))
        .collect::<Result<_>>()?;
    let pairings = pair_nodewise(beta, (k, k), schedule.len(), |node, out| {
        for (j, o) in out.iter_mut().enumerate() {
            let mut form = LocalForm::one();
            for (f, m) in spec.factors.iter().zip(&all) {
                let c = chern_at(&m[j], node, f.degree)?;
                form = form.wedge(&c[f.degree]);
            }
            *o = form;
        }
        Ok(())
    })?;
    Ok(PairingReport::assess(product_label("c", spec), &schedule, pairings, opts.tolerance))
}

/// Pairings against `β` of a form built node by node from the members of one family.
pub fn family_pairing<F>(
    label: &str,
    family: &RegularizationFamily,
    degree: usize,
    beta: &TestForm,
    opts: &LimitOptions,
    local: F,
) -> Result<PairingReport>
where
    F: Fn(&MetricField, usize) -> Result<LocalForm> + Sync,
{
    let schedule = family.schedule().to_vec();
    let ms = members(family, &schedule)?;
    let pairings = pair_nodewise(beta, (degree, degree), schedule.len(), |node, out| {
        for (o, m) in out.iter_mut().zip(&ms) {
            *o = local(m, node)?;
        }
        Ok(())
    })?;
    Ok(PairingReport::assess(label, &schedule, pairings, opts.tolerance))
}


/// Reduces the innermost axis level by level; returns the final report and the first
/// level (0-based) with an unstable inner limit.
fn nest(label: &str, values: Vec<C>, schedules: &[Vec<f64>], tol: f64) -> (PairingReport, Option<usize>) {
    let m = schedules.len();
    let mut current = values;
    let mut levels = Vec::new();
    let mut unstable = None;
    for l in 0..m - 1 {
        let s = &schedules[l];
        let outer: usize = current.len() / s.len();
        let mut next = Vec::with_capacity(outer);
        for o in 0..outer {
            let slice: Vec<C> = current[o * s.len()..(o + 1) * s.len()].to_vec();
            let report = PairingReport::assess(label, s, slice, tol);
            // ε of the outer factors for this slice
            let mut rest = o;
            let outer_eps: Vec<f64> = schedules[l + 1..]
                .iter()
                .map(|sch| {
                    let e = sch[rest % sch.len()];
                    rest /= sch.len();
                    e
                })
                .collect();
            if !report.converged() && unstable.is_none() {
                unstable = Some(l);
            }
            next.push(report.limit);
            levels.push(LevelReport {
                level: l + 1,
                outer_eps,
                schedule: s.clone(),
                pairings: report.pairings,
                extrapolation: super::extrapolate::Extrapolation {
                    limit: report.limit,
                    error_estimate: report.error_estimate,
                    relative_change: report.relative_change,
                },
                verdict: report.verdict,
            });
        }
        current = next;
    }
    let mut report = PairingReport::assess(label, &schedules[m - 1], current, tol);
    if !report.converged() && unstable.is_none() {
        unstable = Some(m - 1);
    }
    if unstable.is_some() {
        report.verdict = Verdict::Inconclusive;
    }
    report.levels = levels;
    (report, unstable)
}

/// One iterated Segre product: `(family index, degree)` per factor, innermost first.
type Product = Vec<(usize, usize)>;

/// Iterated limits of several Segre products sharing families and a test form.
///
/// Pairings are cached per `ε` tuple, so refining one level only evaluates the new grid
/// points, and every `(family, ε)` Segre form is computed once per node for all products.
fn iterated_products(
    labels: &[String],
    families: &[&RegularizationFamily],
    products: &[Product],
    beta: &TestForm,
    opts: &LimitOptions,
) -> Result<Vec<PairingReport>> {
    let chart = families[0].source().chart();
    let floor = opts.floor(chart);
    let k: usize = products[0].iter().map(|f| f.1).sum();
    if products.iter().any(|p| p.iter().map(|f| f.1).sum::<usize>() != k) {
        return Err(Error::Config("products of one pass must share their total degree".into()));
    }
    let kmax: Vec<usize> = (0..families.len())
        .map(|i| products.iter().flatten().filter(|f| f.0 == i).map(|f| f.1).max().unwrap_or(0))
        .collect();
    let rules: Vec<FiberRule> = families
        .iter()
        .zip(&kmax)
        .map(|(f, &km)| {
            let rule = default_rule(f.source().rank(), km.max(1))?;
            rule.check(opts.fiber_tolerance)?;
            Ok(rule)
        })
        .collect::<Result<_>>()?;
    let mut schedules: Vec<Vec<Vec<f64>>> = products
        .iter()
        .map(|p| p.iter().map(|f| families[f.0].schedule().to_vec()).collect())
        .collect();
    let mut refinements = vec![0usize; products.len()];
    let mut done: Vec<Option<PairingReport>> = vec![None; products.len()];
    let mut cache: HashMap<(usize, Vec<u64>), C> = HashMap::new();
    let mut members: HashMap<(usize, u64), MetricField> = HashMap::new();
    loop {
        let mut missing: Vec<(usize, Vec<f64>)> = Vec::new();
        for (pi, sch) in schedules.iter().enumerate() {
            if done[pi].is_some() {
                continue;
            }
            let sizes: Vec<usize> = sch.iter().map(|s| s.len()).collect();
            let count: usize = sizes.iter().product();
            if count > 4096 {
                return Err(Error::InvalidSchedule("iterated schedule grid too large".into()));
            }
            for idx in 0..count {
                let eps = grid_point(sch, idx);
                let key = (pi, eps.iter().map(|e| e.to_bits()).collect());
                if !cache.contains_key(&key) {
                    missing.push((pi, eps));
                }
            }
        }
        if !missing.is_empty() {
            let mut evals: Vec<(usize, f64)> = Vec::new();
            for (pi, eps) in &missing {
                for (f, e) in products[*pi].iter().zip(eps) {
                    if !evals.iter().any(|x| x.0 == f.0 && x.1 == *e) {
                        evals.push((f.0, *e));
                    }
                }
            }
            let fresh: Vec<(usize, f64)> = evals
                .iter()
                .filter(|(fi, e)| !members.contains_key(&(*fi, e.to_bits())))
                .copied()
                .collect();
            let built: Vec<MetricField> = fresh
                .par_iter()
                .map(|&(fi, e)| families[fi].member(e))
                .collect::<Result<_>>()?;
            for ((fi, e), m) in fresh.into_iter().zip(built) {
                members.insert((fi, e.to_bits()), m);
            }
            let eval_members: Vec<&MetricField> = evals.iter().map(|(fi, e)| &members[&(*fi, e.to_bits())]).collect();
            let slots: Vec<Vec<usize>> = missing
                .iter()
                .map(|(pi, eps)| {
                    products[*pi]
                        .iter()
                        .zip(eps)
                        .map(|(f, e)| evals.iter().position(|x| x.0 == f.0 && x.1 == *e).expect("collected"))
                        .collect()
                })
                .collect();
            let values = pair_nodewise(beta, (k, k), missing.len(), |node, out| {
                let segre: Vec<Vec<LocalForm>> = evals
                    .iter()
                    .zip(&eval_members)
                    .map(|((fi, _), m)| {
                        let g = m.dual_jet_at(node)?;
                        segre_local(&g, &rules[*fi], kmax[*fi]).ok_or(Error::FlaggedNode { node })
                    })
                    .collect::<Result<_>>()?;
                for ((o, (pi, _)), slot) in out.iter_mut().zip(&missing).zip(&slots) {
                    let mut form = LocalForm::one();
                    for (f, &sl) in products[*pi].iter().zip(slot) {
                        form = form.wedge(&segre[sl][f.1]);
                    }
                    *o = form;
                }
                Ok(())
            })?;
            for ((pi, eps), v) in missing.into_iter().zip(values) {
                cache.insert((pi, eps.iter().map(|e| e.to_bits()).collect()), v);
            }
        }
        for pi in 0..products.len() {
            if done[pi].is_some() {
                continue;
            }
            let sch = &schedules[pi];
            let count: usize = sch.iter().map(|s| s.len()).product();
            let values: Vec<C> = (0..count)
                .map(|idx| cache[&(pi, grid_point(sch, idx).iter().map(|e| e.to_bits()).collect::<Vec<_>>())])
                .collect();
            let (report, unstable) = nest(&labels[pi], values, sch, opts.tolerance);
            let extend = unstable.and_then(|l| {
                let s = &sch[l];
                let next = if s.len() >= 2 {
                    s[s.len() - 1] * s[s.len() - 1] / s[s.len() - 2]
                } else {
                    s[0] / 2.0
                };
                (refinements[pi] < opts.max_refinements && next >= floor).then_some((l, next))
            });
            match extend {
                Some((l, next)) => {
                    schedules[pi][l].push(next);
                    refinements[pi] += 1;
                }
                None => done[pi] = Some(report),
            }
        }
        if done.iter().all(|d| d.is_some()) {
            return Ok(done.into_iter().map(|d| d.expect("all done")).collect());
        }
    }
}

/// `ε` values of grid point `idx`, factor 0 fastest.
fn grid_point(schedules: &[Vec<f64>], idx: usize) -> Vec<f64> {
    let mut rest = idx;
    schedules
        .iter()
        .map(|s| {
            let e = s[rest % s.len()];
            rest /= s.len();
            e
        })
        .collect()
}

/// `lim_{ε^m} ... lim_{ε¹} ⟨s_{k_1}(h_{ε¹}) ∧ ... ∧ s_{k_m}(h_{ε^m}), β⟩`.
///
/// Each level is extrapolated with the outer `ε` frozen. A level that fails to stabilize
/// gets its schedule extended (at most `max_refinements` times, never below the floor);
/// if it still fails the verdict is inconclusive.
pub fn iterated_segre_limit(spec: &CurrentProductSpec, beta: &TestForm, opts: &LimitOptions) -> Result<PairingReport> {
    spec.validate()?;
    let families: Vec<&RegularizationFamily> = spec.factors.iter().map(|f| &f.family).collect();
    let product: Product = spec.factors.iter().enumerate().map(|(i, f)| (i, f.degree)).collect();
    let mut out = iterated_products(&[product_label("s", spec)], &families, &[product], beta, opts)?;
    Ok(out.pop().expect("one product"))
}

/// Iterated limits of `s_K` for several partitions `K` of one family.
fn iterated_partitions(
    family: &RegularizationFamily,
    partitions: &[Vec<usize>],
    beta: &TestForm,
    opts: &LimitOptions,
) -> Result<Vec<PairingReport>> {
    for p in partitions {
        spec_for(family, p, LimitMode::Iterated)?.validate()?;
    }
    let labels: Vec<String> = partitions
        .iter()
        .map(|p| p.iter().map(|d| format!("s{d}")).collect::<Vec<_>>().join("^"))
        .collect();
    let products: Vec<Product> = partitions.iter().map(|p| p.iter().map(|&d| (0, d)).collect()).collect();
    iterated_products(&labels, &[family], &products, beta, opts)
}

/// `∫ β` for a top-degree test form.
pub fn test_form_mass(beta: &TestForm) -> Result<C> {
    pair_nodewise(beta, (0, 0), 1, |_, out| {
        out[0] = LocalForm::one();
        Ok(())
    })
    .map(|v| v[0])
}

/// A Chern or Chern-character current assembled from product constituents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssembledCurrent {
    pub report: PairingReport,
    pub constituents: Vec<Constituent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constituent {
    pub partition: Vec<usize>,
    pub coefficient: f64,
    pub report: PairingReport,
}

fn assemble(label: &str, constituents: Vec<Constituent>, tol: f64) -> AssembledCurrent {
    let parts: Vec<(f64, &PairingReport)> = constituents.iter().map(|c| (c.coefficient, &c.report)).collect();
    AssembledCurrent {
        report: PairingReport::combine(label, &parts, tol),
        constituents,
    }
}

fn spec_for(family: &RegularizationFamily, parts: &[usize], mode: LimitMode) -> Result<CurrentProductSpec> {
    CurrentProductSpec::new(
        parts
            .iter()
            .map(|&d| CurrentFactor {
                family: family.clone(),
                degree: d,
            })
            .collect(),
        mode,
    )
}

/// `c_k(E, h)` as `sum_K a_K s_{k_1} ∧ ... ∧ s_{k_m}` with iterated Segre limits.
pub fn chern_current(k: usize, family: &RegularizationFamily, beta: &TestForm, opts: &LimitOptions) -> Result<AssembledCurrent> {
    let label = format!("c{k}");
    check_codim(family.source(), k)?;
    if k == 0 {
        let mass = test_form_mass(beta)?;
        return Ok(AssembledCurrent {
            report: PairingReport::exact(label, mass, opts.tolerance),
            constituents: Vec::new(),
        });
    }
    let coeffs = CharClassAlgebra::default().chern_segre_coefficients(k)?;
    let parts: Vec<Vec<usize>> = coeffs.iter().map(|(p, _)| p.parts().to_vec()).collect();
    let reports = iterated_partitions(family, &parts, beta, opts)?;
    let constituents = coeffs
        .into_iter()
        .zip(reports)
        .map(|((p, a), report)| Constituent {
            partition: p.parts().to_vec(),
            coefficient: rational_to_f64(&a),
            report,
        })
        .collect();
    Ok(assemble(&label, constituents, opts.tolerance))
}

/// `ch_k(E, h) = sum_K b_K c_{k_1} ∧ ... ∧ c_{k_m}` with simultaneous limits of the products.
pub fn chern_character_current(
    k: usize,
    family: &RegularizationFamily,
    beta: &TestForm,
    opts: &LimitOptions,
) -> Result<AssembledCurrent> {
    let label = format!("ch{k}");
    check_codim(family.source(), k)?;
    let rank = family.source().rank();
    if k == 0 {
        let mass = test_form_mass(beta)?;
        return Ok(AssembledCurrent {
            report: PairingReport::exact(label, mass * rank as f64, opts.tolerance),
            constituents: Vec::new(),
        });
    }
    let coeffs = CharClassAlgebra::default().character_chern_coefficients(k, rank);
    let mut constituents = Vec::new();
    for (partition, b) in coeffs {
        let spec = spec_for(family, partition.parts(), LimitMode::Simultaneous)?;
        let report = simultaneous_limit(&spec, beta, opts)?;
        constituents.push(Constituent {
            partition: partition.parts().to_vec(),
            coefficient: rational_to_f64(&b),
            report,
        });
    }
    Ok(assemble(&label, constituents, opts.tolerance))
}

/// `tr((i/2π Θ)^k) / k!` at one node.
pub fn chern_character_local(h: &MetricField, node: usize, k: usize) -> Result<LocalForm> {
    let (n, r) = (h.dim(), h.rank());
    let jet = h.jet_at(node)?;
    let theta = curvature_local(&jet).ok_or(Error::FlaggedNode { node })?;
    let entry = |i: usize, j: usize| {
        let m: Vec<C> = theta.iter().map(|t| t.get(i, j)).collect();
        LocalForm::from_matrix(n, &m).times(ddc_factor(1))
    };
    let a: Vec<LocalForm> = (0..r * r).map(|e| entry(e / r, e % r)).collect();
    let mut power: Vec<LocalForm> = (0..r * r)
        .map(|e| if e / r == e % r { LocalForm::one() } else { LocalForm::zero() })
        .collect();
    for _ in 0..k {
        let mut next = vec![LocalForm::zero(); r * r];
        for i in 0..r {
            for j in 0..r {
                for l in 0..r {
                    next[i * r + j] = next[i * r + j].plus(&power[i * r + l].wedge(&a[l * r + j]));
                }
            }
        }
        power = next;
    }
    let fact: f64 = (1..=k).map(|v| v as f64).product();
    let tr = (0..r).fold(LocalForm::zero(), |acc, i| acc.plus(&power[i * r + i]));
    Ok(tr.times(C::new(1.0 / fact, 0.0)))
}

/// `ch_k` pairing computed directly from the trace of curvature powers.
pub fn chern_character_direct(k: usize, family: &RegularizationFamily, beta: &TestForm, opts: &LimitOptions) -> Result<PairingReport> {
    check_codim(family.source(), k)?;
    family_pairing(&format!("tr-ch{k}"), family, k, beta, opts, |m, node| chern_character_local(m, node, k))
}

/// `∂γ_1 + dbar γ_2` for `γ_1 = χ dz_{I'} ∧ dzbar_J`, `γ_2 = χ dz_J ∧ dzbar_{I'}`, with
/// `|J| = n - k`, `|I'| = n - k - 1` and `χ` a radial cut-off: an exact `(n-k, n-k)` test form.
pub fn exact_test_form(chart: std::sync::Arc<Chart>, center: &[C], scale: f64, k: usize) -> Result<FormField> {
    let n = chart.dim();
    if k >= n {
        return Err(Error::DegreeMismatch(format!("no exact ({0},{0})-test forms pair with degree {k} in dimension {n}", n - k.min(n))));
    }
    let p = n - k;
    let j_mask = subsets(n, p)[0];
    let i_mask = subsets(n, p - 1)[0];
    let g1 = LocalForm::term(i_mask, j_mask, C::new(1.0, 0.0));
    let g2 = LocalForm::term(j_mask, i_mask, C::new(1.0, 0.0));
    let center = center.to_vec();
    let delta = 0.5;
    FormField::from_fn(chart, p, p, move |z| {
        let dist = z.iter().zip(&center).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let mut out = LocalForm::zero();
        if dist == 0.0 || radial_cutoff(dist, scale, delta) == 0.0 {
            return out;
        }
        let t = (dist - (1.0 - delta) * scale) / (delta * scale);
        let ds = smooth_step_derivative(t) / (delta * scale);
        for a in 0..n {
            // ∂_a |z - c| = conj(z_a - c_a) / (2 |z - c|)
            let da = (z[a] - center[a]).conj() * (ds / (2.0 * dist));
            out = out.plus(&LocalForm::dz(a).wedge(&g1).times(da));
            out = out.plus(&LocalForm::dzbar(a).wedge(&g2).times(da.conj()));
        }
        out
    })
}

/// Lelong-style mass table over shrinking bumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassTable {
    pub rows: Vec<MassRow>,
    pub locally_finite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassRow {
    pub radius: f64,
    pub mass: f64,
    pub error_estimate: f64,
    pub verdict: Verdict,
}

/// Runs `pairing` for each radius (largest first). Locally finite iff every pairing
/// converged and no smaller ball carries more mass than the largest one.
pub fn mass_estimate(radii: &[f64], mut pairing: impl FnMut(f64) -> Result<PairingReport>) -> Result<MassTable> {
    let mut sorted = radii.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::with_capacity(sorted.len());
    for r in sorted {
        let rep = pairing(r)?;
        rows.push(MassRow {
            radius: r,
            mass: rep.limit.re,
            error_estimate: rep.error_estimate,
            verdict: rep.verdict,
        });
    }
    let bound = rows.first().map(|r| r.mass.abs() * (1.0 + 1e-2) + 1e-3).unwrap_or(0.0);
    let locally_finite = rows
        .iter()
        .all(|r| r.verdict == Verdict::Converged && r.mass.is_finite() && r.mass.abs() <= bound);
    Ok(MassTable { rows, locally_finite })
}

/// `(-1)^k ⟨s_{k_1} ∧ ... ∧ s_{k_m}, β⟩` for every partition of `k`.
pub fn segre_sign_structure(
    k: usize,
    family: &RegularizationFamily,
    beta: &TestForm,
    opts: &LimitOptions,
) -> Result<Vec<Constituent>> {
    if k == 0 {
        return Err(Error::DegreeMismatch("Segre products need a positive degree".into()));
    }
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let parts: Vec<Vec<usize>> = crate::charclass::partitions(k).iter().map(|p| p.parts().to_vec()).collect();
    let reports = iterated_partitions(family, &parts, beta, opts)?;
    Ok(parts
        .into_iter()
        .zip(reports)
        .map(|(partition, report)| Constituent {
            partition,
            coefficient: sign,
            report,
        })
        .collect())
}
