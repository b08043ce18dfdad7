use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::currents::{pair, simultaneous_limit, smooth_step, CurrentFactor, CurrentProductSpec, LimitMode, LimitOptions, PairingReport, TestForm};
use crate::error::{Error, Result};
use crate::forms::{Chart, FormField, LocalForm, Rule};
use crate::metrics::catalog::{analytic_eps_metric, flat, fubini_study_o1, point_sections};
use crate::metrics::{chern_forms, Degeneracy, MetricField, SectionMatrix, ZPoly};
use crate::regularize::{DeclaredConvergence, FamilyMode, RegularizationFamily};

type C = Complex64;

/// `ψ_0 = 1` on `|z| <= inner`, `0` on `|z| >= outer`; `ψ_1(w) = 1 - ψ_0(1/w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionOfUnity {
    pub inner: f64,
    pub outer: f64,
}

impl PartitionOfUnity {
    pub fn psi0(&self, z: C) -> f64 {
        smooth_step((z.norm() - self.inner) / (self.outer - self.inner))
    }

    pub fn psi1(&self, w: C) -> f64 {
        if w.norm() == 0.0 {
            return 1.0;
        }
        1.0 - self.psi0(w.inv())
    }
}

/// `P¹` covered by `U_0 = {z}` and `U_1 = {w = 1/z}`, each a polydisc chart of radius `R`.
/// The bundle `O(1)` has frames related by `e_1 = w e_0`, so `h_1(w) = |w|^{-2} h_0(1/w)`.
#[derive(Debug, Clone)]
pub struct ManifoldAtlas {
    pub charts: [Arc<Chart>; 2],
    pub partition: PartitionOfUnity,
}

impl ManifoldAtlas {
    pub fn p1(radius: f64, resolution: usize, partition: PartitionOfUnity) -> Result<Self> {
        let p = partition;
        if !(0.0 < p.inner && p.inner < p.outer && p.outer < radius && 1.0 / p.inner < radius) {
            return Err(Error::Config(format!(
                "partition of unity ({}, {}) needs 0 < inner < outer < R and 1/inner < R = {radius}",
                p.inner, p.outer
            )));
        }
        let chart = Arc::new(Chart::polydisc(1, radius, resolution)?);
        Ok(ManifoldAtlas {
            charts: [chart.clone(), chart],
            partition,
        })
    }

    /// `ψ_i` as a compactly supported `(0,0)` test form on chart `i`.
    pub fn cutoff(&self, i: usize) -> Result<TestForm> {
        let p = self.partition;
        let field = FormField::from_fn(self.charts[i].clone(), 0, 0, move |z| {
            let v = if i == 0 { p.psi0(z[0]) } else { p.psi1(z[0]) };
            LocalForm::scalar(C::new(v, 0.0))
        })?;
        TestForm::new(field, Rule::Trapezoid)
    }

    /// Largest relative defect of `h_1(w) = |w|^{-2} h_0(1/w)` over chart-1 nodes whose image lies
    /// in chart 0.
    pub fn transition_residual(&self, h0: &MetricField, h1: &MetricField) -> f64 {
        let ch = &self.charts[1];
        let mut worst: f64 = 0.0;
        for node in 0..ch.node_count() {
            let w = ch.coords(node)[0];
            if w.norm() < 1e-12 {
                continue;
            }
            let z = w.inv();
            if !self.charts[0].contains(&[z]) {
                continue;
            }
            let (Some(a), Some(b)) = (h0.matrix_at_point(&[z]), h1.matrix_at_point(&[w])) else {
                continue;
            };
            let pulled = a.get(0, 0).re / w.norm_sqr();
            let here = b.get(0, 0).re;
            worst = worst.max((pulled - here).abs() / here.abs().max(pulled.abs()));
        }
        worst
    }
}

/// Metric on `O(1)` over `P¹`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum P1Metric {
    /// `h_0 = 1/(1+|z|²)`, `h_1 = 1/(1+|w|²)`.
    FubiniStudy,
    /// Induced by the section `z` alone: `h_0 = 1/|z|²` (singular at `z = 0`), `h_1 = 1`.
    /// Regularized by `h_0 = 1/(|z|²+ε²)`, `h_1 = 1/(1+ε²|w|²)`.
    PointSingular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohomologyConfig {
    pub k: usize,
    pub radius: f64,
    pub resolution: usize,
    /// The first partition is used for the integrals; the others check independence.
    pub partitions: Vec<PartitionOfUnity>,
    pub smooth_tolerance: f64,
    pub singular_tolerance: f64,
    pub partition_tolerance: f64,
    pub transition_tolerance: f64,
}

impl Default for CohomologyConfig {
    fn default() -> Self {
        CohomologyConfig {
            k: 1,
            radius: 1.5,
            resolution: 129,
            partitions: vec![
                PartitionOfUnity { inner: 0.8, outer: 1.25 },
                PartitionOfUnity { inner: 0.75, outer: 1.1 },
            ],
            smooth_tolerance: 1e-4,
            singular_tolerance: 1e-3,
            partition_tolerance: 1e-6,
            transition_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohomologyReport {
    /// `∫_{P¹} c_1` of the Fubini-Study metric, one value per partition of unity.
    pub smooth: Vec<f64>,
    pub partition_spread: f64,
    /// Summed chart pairings of the regularized singular metric.
    pub singular: PairingReport,
    pub transition_residual: f64,
    pub smooth_passed: bool,
    pub singular_passed: bool,
    pub partition_passed: bool,
    pub passed: bool,
}

fn chart_metrics(atlas: &ManifoldAtlas, metric: P1Metric) -> Result<[MetricField; 2]> {
    Ok(match metric {
        P1Metric::FubiniStudy => [fubini_study_o1(atlas.charts[0].clone())?, fubini_study_o1(atlas.charts[1].clone())?],
        P1Metric::PointSingular => [
            crate::metrics::from_sections(
                atlas.charts[0].clone(),
                &point_sections(),
                Some(Degeneracy::coordinate(1, &[0])?),
            )?
            .1,
            flat(atlas.charts[1].clone(), 1)?,
        ],
    })
}

/// Regularized point-singular metric on both charts.
pub fn point_singular_members(atlas: &ManifoldAtlas, eps: f64) -> Result<[MetricField; 2]> {
    let h0 = analytic_eps_metric(atlas.charts[0].clone(), &point_sections(), eps)?;
    let w = ZPoly::coordinate(1, 0).scale(C::new(eps, 0.0));
    let s1 = SectionMatrix::new(1, 1, vec![w])?;
    let h1 = analytic_eps_metric(atlas.charts[1].clone(), &s1, 1.0)?;
    Ok([h0, h1])
}

fn fs_integral(atlas: &ManifoldAtlas) -> Result<f64> {
    let hs = chart_metrics(atlas, P1Metric::FubiniStudy)?;
    let mut total = 0.0;
    for (i, h) in hs.iter().enumerate() {
        let c1 = chern_forms(h, 1)?.pop().expect("c_1");
        total += pair(&c1, &atlas.cutoff(i)?)?.re;
    }
    Ok(total)
}

/// `∫_{P¹} c_1(O(1), h)` for the Fubini-Study metric and the point-singular metric.
pub fn cohomology_check(cfg: &CohomologyConfig, schedule: &[f64], opts: &LimitOptions) -> Result<CohomologyReport> {
    if cfg.k != 1 {
        return Err(Error::DegreeOverflow { degree: cfg.k, max: 1 });
    }
    let first = *cfg
        .partitions
        .first()
        .ok_or_else(|| Error::Config("at least one partition of unity is required".into()))?;
    let atlas = ManifoldAtlas::p1(cfg.radius, cfg.resolution, first)?;

    let [f0, f1] = chart_metrics(&atlas, P1Metric::FubiniStudy)?;
    let mut residual = atlas.transition_residual(&f0, &f1);
    for &e in schedule {
        let [g0, g1] = point_singular_members(&atlas, e)?;
        residual = residual.max(atlas.transition_residual(&g0, &g1));
    }
    if residual > cfg.transition_tolerance {
        return Err(Error::Transition {
            residual,
            tolerance: cfg.transition_tolerance,
        });
    }

    let mut smooth = Vec::new();
    for p in &cfg.partitions {
        let a = ManifoldAtlas::p1(cfg.radius, cfg.resolution, *p)?;
        smooth.push(fs_integral(&a)?);
    }
    let spread = smooth.iter().map(|v| (v - smooth[0]).abs()).fold(0.0, f64::max);

    let [s0, s1] = chart_metrics(&atlas, P1Metric::PointSingular)?;
    let mut summed: Option<PairingReport> = None;
    for (i, source) in [s0, s1].into_iter().enumerate() {
        let at = atlas.clone();
        let member: crate::regularize::MemberFn = Arc::new(move |e| Ok(point_singular_members(&at, e)?[i].clone()));
        let family = RegularizationFamily::new(
            source,
            FamilyMode::Custom {
                name: format!("p1-chart{i}"),
                member,
            },
            schedule.to_vec(),
            DeclaredConvergence::Both,
        )?;
        let spec = CurrentProductSpec::new(vec![CurrentFactor { family, degree: 1 }], LimitMode::Simultaneous)?;
        let rep = simultaneous_limit(&spec, &atlas.cutoff(i)?, opts)?;
        summed = Some(match summed {
            None => rep,
            Some(prev) => {
                let pairings = prev.pairings.iter().zip(&rep.pairings).map(|(a, b)| a + b).collect();
                PairingReport::assess("c1", schedule, pairings, opts.tolerance)
            }
        });
    }
    let singular = summed.expect("two charts");
    let smooth_passed = (smooth[0] - 1.0).abs() <= cfg.smooth_tolerance;
    let singular_passed = singular.converged() && (singular.limit.re - 1.0).abs() <= cfg.singular_tolerance;
    let partition_passed = spread <= cfg.partition_tolerance;
    Ok(CohomologyReport {
        smooth,
        partition_spread: spread,
        singular,
        transition_residual: residual,
        smooth_passed,
        singular_passed,
        partition_passed,
        passed: smooth_passed && singular_passed && partition_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_sums_to_one() {
        let p = PartitionOfUnity { inner: 0.8, outer: 1.25 };
        for z in [C::new(0.3, 0.1), C::new(0.9, -0.2), C::new(1.1, 0.4), C::new(3.0, 1.0)] {
            assert!((p.psi0(z) + p.psi1(z.inv()) - 1.0).abs() < 1e-15);
        }
        assert!(ManifoldAtlas::p1(1.2, 33, p).is_err());
    }

    #[test]
    fn transitions_are_consistent() {
        let atlas = ManifoldAtlas::p1(1.5, 41, PartitionOfUnity { inner: 0.8, outer: 1.25 }).unwrap();
        let [a, b] = chart_metrics(&atlas, P1Metric::FubiniStudy).unwrap();
        assert!(atlas.transition_residual(&a, &b) < 1e-12);
        let [a, b] = point_singular_members(&atlas, 0.3).unwrap();
        assert!(atlas.transition_residual(&a, &b) < 1e-12);
        // the flat metric on both charts is not a metric on O(1)
        let f = flat(atlas.charts[0].clone(), 1).unwrap();
        assert!(atlas.transition_residual(&f, &f) > 0.1);
    }

    #[test]
    fn degree_two_is_refused() {
        let cfg = CohomologyConfig { k: 2, ..Default::default() };
        assert!(matches!(
            cohomology_check(&cfg, &[0.2, 0.1], &LimitOptions::default()),
            Err(Error::DegreeOverflow { degree: 2, max: 1 })
        ));
    }
}
