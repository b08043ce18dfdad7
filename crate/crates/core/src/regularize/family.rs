use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{CalibratedKernel, Kernel};
use super::mollify::{chart_margin, mollify_with};
use crate::error::{Error, Result};
use crate::forms::{Chart, Quadrature, Region, Rule};
use crate::metrics::catalog::analytic_eps_metric;
use crate::metrics::{from_sections, griffiths_diagnostic, Degeneracy, MetricField, SectionMatrix};

type C = Complex64;

/// Smooth metric `h_ε` dual to `h*_ε = S^H S + ε² Id`.
pub fn analytic_eps(chart: Arc<Chart>, s: &SectionMatrix, eps: f64) -> Result<MetricField> {
    if !(eps > 0.0) {
        return Err(Error::InvalidSchedule(format!("ε must be positive, got {eps}")));
    }
    analytic_eps_metric(chart, s, eps)
}

/// `ε_j = start · ratio^j`, `j < count`.
pub fn geometric_schedule(start: f64, ratio: f64, count: usize) -> Result<Vec<f64>> {
    if !(start > 0.0) || !(ratio > 0.0 && ratio < 1.0) || count == 0 {
        return Err(Error::InvalidSchedule(format!(
            "need start > 0, 0 < ratio < 1, count > 0; got {start}:{ratio}:{count}"
        )));
    }
    Ok((0..count).map(|j| start * ratio.powi(j as i32)).collect())
}

/// Parses `start:ratio:count`.
pub fn parse_schedule(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::InvalidSchedule(format!("expected start:ratio:count, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let ratio: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    geometric_schedule(start, ratio, count)
}

/// `ε_0 = R/8`, halving, six steps.
pub fn default_schedule(chart: &Chart) -> Vec<f64> {
    let r = chart.radius().iter().cloned().fold(f64::INFINITY, f64::min);
    geometric_schedule(r / 8.0, 0.5, 6).expect("valid by construction")
}

pub fn validate_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::InvalidSchedule("empty schedule".into()));
    }
    if schedule.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidSchedule("ε values must be positive".into()));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidSchedule("schedule must be strictly decreasing".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeclaredConvergence {
    IncreasingPointwise,
    LocallyUniformOutsideV,
    Both,
}

impl DeclaredConvergence {
    pub fn increasing(self) -> bool {
        matches!(self, DeclaredConvergence::IncreasingPointwise | DeclaredConvergence::Both)
    }

    pub fn locally_uniform(self) -> bool {
        matches!(self, DeclaredConvergence::LocallyUniformOutsideV | DeclaredConvergence::Both)
    }
}

pub type MemberFn = Arc<dyn Fn(f64) -> Result<MetricField> + Send + Sync>;

#[derive(Clone)]
pub enum FamilyMode {
    Mollify(CalibratedKernel),
    AnalyticEps(SectionMatrix),
    Custom { name: String, member: MemberFn },
}

impl fmt::Debug for FamilyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyMode::Mollify(k) => write!(f, "Mollify({})", k.kernel.name()),
            FamilyMode::AnalyticEps(_) => write!(f, "AnalyticEps"),
            FamilyMode::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl FamilyMode {
    pub fn label(&self) -> String {
        match self {
            FamilyMode::Mollify(k) => format!("mollify:{}", k.kernel.name()),
            FamilyMode::AnalyticEps(_) => "analytic-eps".into(),
            FamilyMode::Custom { name, .. } => format!("custom:{name}"),
        }
    }
}

/// A decreasing sequence of smooth metrics `h_ε` approximating `source`.
#[derive(Debug, Clone)]
pub struct RegularizationFamily {
    source: MetricField,
    mode: FamilyMode,
    schedule: Vec<f64>,
    convergence: DeclaredConvergence,
}

impl RegularizationFamily {
    pub fn new(
        source: MetricField,
        mode: FamilyMode,
        schedule: Vec<f64>,
        convergence: DeclaredConvergence,
    ) -> Result<Self> {
        validate_schedule(&schedule)?;
        if let FamilyMode::Mollify(k) = &mode {
            let margin = chart_margin(source.chart());
            if schedule[0] >= margin {
                return Err(Error::EpsTooLarge {
                    eps: schedule[0],
                    margin,
                });
            }
            if k.dim != source.dim() {
                return Err(Error::Config("kernel dimension differs from the chart".into()));
            }
        }
        Ok(RegularizationFamily {
            source,
            mode,
            schedule,
            convergence,
        })
    }

    /// Mollification family; declared increasing and locally uniform.
    pub fn mollified(source: MetricField, kernel: Kernel, schedule: Vec<f64>) -> Result<Self> {
        let k = CalibratedKernel::new(kernel, source.dim())?;
        Self::new(source, FamilyMode::Mollify(k), schedule, DeclaredConvergence::Both)
    }

    /// `S^H S + ε² Id` family; the source is the singular section metric.
    pub fn analytic(chart: Arc<Chart>, s: &SectionMatrix, schedule: Vec<f64>) -> Result<Self> {
        let (_, h) = from_sections(chart, s, None)?;
        Self::new(h, FamilyMode::AnalyticEps(s.clone()), schedule, DeclaredConvergence::Both)
    }

    pub fn source(&self) -> &MetricField {
        &self.source
    }

    /// Declares the degeneracy locus of the source metric.
    pub fn with_degeneracy(mut self, v: Degeneracy) -> Self {
        self.source = self.source.with_degeneracy(v);
        self
    }

    pub fn mode(&self) -> &FamilyMode {
        &self.mode
    }

    pub fn schedule(&self) -> &[f64] {
        &self.schedule
    }

    pub fn convergence(&self) -> DeclaredConvergence {
        self.convergence
    }

    pub fn with_schedule(&self, schedule: Vec<f64>) -> Result<Self> {
        Self::new(self.source.clone(), self.mode.clone(), schedule, self.convergence)
    }

    /// The member at an arbitrary `ε` (not necessarily on the schedule).
    pub fn member(&self, eps: f64) -> Result<MetricField> {
        match &self.mode {
            FamilyMode::Mollify(k) => mollify_with(&self.source, eps, k),
            FamilyMode::AnalyticEps(s) => analytic_eps(self.source.chart().clone(), s, eps),
            FamilyMode::Custom { member, .. } => member(eps),
        }
    }

    pub fn members(&self) -> Result<Vec<MetricField>> {
        self.schedule.par_iter().map(|&e| self.member(e)).collect()
    }
}

/// Outcome of [`convergence_diagnostic`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub schedule: Vec<f64>,
    /// Per member: largest relative entry difference `|h_ε - h| / |h|` over the region.
    pub sup_differences: Vec<f64>,
    /// Least-squares slope of `log difference` against `log ε`.
    pub observed_order: Option<f64>,
    pub monotonicity_checks: usize,
    pub monotonicity_violations: usize,
    /// Most negative relative value of `ξ^H (h_{ε'} - h_ε) ξ`.
    pub worst_violation: f64,
    pub griffiths_passed: bool,
    pub passed: bool,
}

/// Diagnoses the family's own schedule; see [`diagnose_schedule`].
pub fn convergence_diagnostic(
    family: &RegularizationFamily,
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    diagnose_schedule(family, family.schedule(), region, samples, seed)
}

const MONOTONE_TOL: f64 = 1e-10;

/// Sup-norm differences to the source, pointwise monotonicity along `schedule` on
/// `samples` random (node, vector) pairs per step, and Griffiths positivity of every member.
///
/// The schedule is taken as given, so a shuffled order shows up as monotonicity violations.
pub fn diagnose_schedule(
    family: &RegularizationFamily,
    schedule: &[f64],
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    let source = family.source();
    let chart = source.chart();
    let quad = Quadrature::new(chart, region, Rule::Trapezoid)?;
    let nodes: Vec<usize> = quad
        .nodes()
        .map(|(k, _)| k)
        .filter(|&k| {
            region.contains(chart, &chart.coords(k)) && !source.is_flagged(k) && source.matrix_at(k).is_finite()
        })
        .collect();
    if nodes.is_empty() {
        return Err(Error::Config("diagnostic region contains no regular nodes".into()));
    }
    let members: Vec<MetricField> = schedule.par_iter().map(|&e| family.member(e)).collect::<Result<_>>()?;
    let sup_differences: Vec<f64> = members
        .par_iter()
        .map(|m| {
            nodes
                .iter()
                .map(|&k| {
                    let h = source.matrix_at(k);
                    (m.matrix_at(k) - h).max_abs() / h.max_abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let mut rng = StdRng::seed_from_u64(seed);
    let r = source.rank();
    let mut checks = 0;
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for pair in members.windows(2) {
        for _ in 0..samples {
            let node = *nodes.choose(&mut rng).expect("non-empty");
            let xi: Vec<C> = (0..r)
                .map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let before = pair[0].matrix_at(node).quad_form(&xi).re;
            let after = pair[1].matrix_at(node).quad_form(&xi).re;
            let rel = (after - before) / before.abs().max(f64::MIN_POSITIVE);
            checks += 1;
            if rel < -MONOTONE_TOL {
                violations += 1;
            }
            worst = worst.min(rel);
        }
    }
    let griffiths_passed = members
        .iter()
        .enumerate()
        .all(|(j, m)| griffiths_diagnostic(m, 64, seed.wrapping_add(j as u64)).passed);
    let decreasing = sup_differences
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-14);
    let observed_order = fit_order(schedule, &sup_differences);
    Ok(ConvergenceReport {
        schedule: schedule.to_vec(),
        sup_differences,
        observed_order,
        monotonicity_checks: checks,
        monotonicity_violations: violations,
        worst_violation: worst,
        griffiths_passed,
        passed: violations == 0 && decreasing && griffiths_passed,
    })
}

fn fit_order(eps: &[f64], diffs: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(diffs)
        .filter(|(_, d)| **d > 1e-14)
        .map(|(e, d)| (e.ln(), d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(num / den)
}
