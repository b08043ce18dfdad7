use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use rayon::prelude::*;
use serde_json::json;

use super::atlas::cohomology_check;
use super::config::{ExampleData, ExperimentConfig, FamilyKind, Pipeline};
use crate::charclass::{CharClassAlgebra, CharClassPoly, Variable};
use crate::currents::{
    bump_form_with, chern_current, mass_estimate, simultaneous_limit, Composition, CurrentProductSpec,
    LimitMode, PairingReport, TestForm, Verdict,
};
use crate::error::{Error, Result};
use crate::forms::{stencil_interior, FormField, LocalForm};
use crate::metrics::{
    chern_forms, chern_local, curvature_local, first_chern_via_det, griffiths_diagnostic, MetricField, Regularity,
};
use crate::projbundle::{default_rule, SegreEvaluator};
use crate::regularize::{CalibratedKernel, DeclaredConvergence, FamilyMode, RegularizationFamily};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    /// 0 on pass, 2 when inconclusive, 1 otherwise.
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Inconclusive => 2,
            Outcome::Fail => 1,
        }
    }

    fn worst(self, other: Outcome) -> Outcome {
        match (self, other) {
            (Outcome::Fail, _) | (_, Outcome::Fail) => Outcome::Fail,
            (Outcome::Inconclusive, _) | (_, Outcome::Inconclusive) => Outcome::Inconclusive,
            _ => Outcome::Pass,
        }
    }
}

/// One named comparison `value <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub outcome: Outcome,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        let outcome = if value <= tolerance { Outcome::Pass } else { Outcome::Fail };
        Check {
            name: name.into(),
            value,
            tolerance,
            outcome,
        }
    }

    /// Like [`Check::new`], but inconclusive when the inputs did not converge.
    pub fn given(name: impl Into<String>, value: f64, tolerance: f64, converged: bool) -> Self {
        let mut c = Check::new(name, value, tolerance);
        if !converged {
            c.outcome = Outcome::Inconclusive;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingRecord {
    pub family: String,
    pub bump: usize,
    /// Segre partition for constituents of an assembled current.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<usize>>,
    pub report: PairingReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationRow {
    pub family: String,
    pub bump: usize,
    pub label: String,
    pub limit: [f64; 2],
    pub error_estimate: f64,
    pub relative_change: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub pipeline: Pipeline,
    pub config: ExperimentConfig,
    pub calibration: serde_json::Value,
    pub pairings: Vec<PairingRecord>,
    pub extrapolation: Vec<ExtrapolationRow>,
    pub checks: Vec<Check>,
    pub details: serde_json::Value,
    pub verdict: Outcome,
    /// Seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    fn new(pipeline: Pipeline, config: &ExperimentConfig) -> Self {
        RunReport {
            pipeline,
            config: config.clone(),
            calibration: json!({}),
            pairings: Vec::new(),
            extrapolation: Vec::new(),
            checks: Vec::new(),
            details: json!({}),
            verdict: Outcome::Pass,
            timings: BTreeMap::new(),
        }
    }

    fn record(&mut self, family: &str, bump: usize, partition: Option<Vec<usize>>, report: &PairingReport) {
        if partition.is_none() {
            self.extrapolation.push(ExtrapolationRow {
                family: family.into(),
                bump,
                label: report.label.clone(),
                limit: [report.limit.re, report.limit.im],
                error_estimate: report.error_estimate,
                relative_change: report.relative_change,
                verdict: report.verdict,
            });
        }
        self.pairings.push(PairingRecord {
            family: family.into(),
            bump,
            partition,
            report: report.clone(),
        });
    }

    fn finish(&mut self) {
        let mut v = Outcome::Pass;
        for c in &self.checks {
            v = v.worst(c.outcome);
        }
        for r in &self.extrapolation {
            if r.verdict == Verdict::Inconclusive {
                v = v.worst(Outcome::Inconclusive);
            }
        }
        self.verdict = v;
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// `report.json` and `pairings.csv` in `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(dir.join("report.json"), text)?;
        let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("pairings.csv"))?);
        writeln!(out, "family,bump,label,partition,eps,re,im")?;
        for rec in &self.pairings {
            let part = rec
                .partition
                .as_ref()
                .map(|p| p.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("+"))
                .unwrap_or_default();
            for (e, v) in rec.report.schedule.iter().zip(&rec.report.pairings) {
                writeln!(out, "{},{},{},{},{},{},{}", rec.family, rec.bump, rec.report.label, part, e, v.re, v.im)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Regularization family of the given kind for an example.
pub fn build_family(kind: FamilyKind, data: &ExampleData, schedule: Vec<f64>) -> Result<RegularizationFamily> {
    let h = &data.metric;
    let family = match kind {
        FamilyKind::AnalyticEps => {
            let s = data
                .sections
                .as_ref()
                .ok_or_else(|| Error::Config("analytic-eps needs a section-induced example".into()))?;
            RegularizationFamily::analytic(h.chart().clone(), s, schedule)?
        }
        FamilyKind::Bump | FamilyKind::Gaussian => {
            // ε is the per-coordinate RMS width of the kernel, E|x_j|² = ε²
            let kernel = kind.kernel().expect("mollifier");
            let m1 = CalibratedKernel::new(kernel.clone(), h.dim())?.moment(1, 1.0)?;
            let stretch = (h.dim() as f64 / m1).sqrt();
            let radii = schedule.iter().map(|e| e * stretch).collect();
            RegularizationFamily::mollified(h.clone(), kernel, radii)?
        }
        FamilyKind::Identity => {
            if h.regularity() != Regularity::Smooth {
                return Err(Error::NotSmooth("the identity family needs a smooth metric".into()));
            }
            let fixed = h.clone();
            RegularizationFamily::new(
                h.clone(),
                FamilyMode::Custom {
                    name: "identity".into(),
                    member: Arc::new(move |_| Ok(fixed.clone())),
                },
                schedule,
                DeclaredConvergence::Both,
            )?
        }
    };
    Ok(match h.degeneracy() {
        Some(v) => family.with_degeneracy(v.clone()),
        None => family,
    })
}

fn bumps(cfg: &ExperimentConfig, data: &ExampleData, k_plus_q: usize) -> Result<Vec<TestForm>> {
    let chart = data.metric.chart();
    cfg.bumps
        .iter()
        .map(|b| Ok(bump_form_with(chart.clone(), &b.spec(chart, k_plus_q)?, Composition::Product)?.into()))
        .collect()
}

fn kernel_calibration(kinds: &[FamilyKind], dim: usize) -> Result<serde_json::Value> {
    let mut out = serde_json::Map::new();
    for k in kinds {
        if let Some(kernel) = k.kernel() {
            let c = CalibratedKernel::new(kernel, dim)?;
            out.insert(k.name().into(), json!({ "mass_error": c.mass_error, "normalization": c.normalization }));
        }
    }
    Ok(serde_json::Value::Object(out))
}

/// Runs one pipeline and writes its report files to `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, pipeline: Pipeline, out_dir: &Path) -> Result<RunReport> {
    cfg.validate(pipeline)?;
    let start = Instant::now();
    let mut report = RunReport::new(pipeline, cfg);
    match pipeline {
        Pipeline::Symbolic => symbolic(cfg, &mut report, out_dir)?,
        Pipeline::ChernForms => chern_forms_pipeline(cfg, &mut report, out_dir)?,
        Pipeline::Segre => segre_pipeline(cfg, &mut report)?,
        Pipeline::Converge => converge(cfg, &mut report)?,
        Pipeline::Iterated => iterated(cfg, &mut report)?,
        Pipeline::Mass => mass(cfg, &mut report)?,
        Pipeline::Cohomology => cohomology(cfg, &mut report)?,
    }
    report.timings.insert("total".into(), start.elapsed().as_secs_f64());
    report.finish();
    report.write(out_dir)?;
    Ok(report)
}

/// The `s_k`, `c_k` and `ch_k` tables printed by the `symbolic` pipeline.
pub fn symbolic_tables(max_degree: usize, rank: usize) -> Result<String> {
    let alg = CharClassAlgebra::new(max_degree);
    let mut text = String::new();
    for k in 1..=max_degree {
        text.push_str(&format!("s{k} = {}\n", alg.segre_to_chern(k)?));
    }
    for k in 1..=max_degree {
        text.push_str(&format!("c{k} = {}\n", alg.chern_to_segre(k)?));
    }
    for k in 1..=max_degree {
        text.push_str(&format!("ch{k} = {}\n", alg.chern_character(k, rank)));
    }
    Ok(text)
}

/// Number of degrees `1..=max_degree` at which substituting one expansion into the other
/// fails to return the variable.
pub fn round_trip_failures(max_degree: usize) -> Result<usize> {
    let alg = CharClassAlgebra::new(max_degree);
    let mut bad = 0;
    for k in 1..=max_degree {
        let s_of_c = alg.segre_to_chern(k)?;
        let c_of_s = alg.chern_to_segre(k)?;
        let back = s_of_c.substitute(|v: &Variable| alg.chern_to_segre(v.index as usize).expect("in range"));
        let forth = c_of_s.substitute(|v: &Variable| alg.segre_to_chern(v.index as usize).expect("in range"));
        if back.to_string() != format!("s{k}") || forth.to_string() != format!("c{k}") {
            bad += 1;
        }
    }
    Ok(bad)
}

fn symbolic(cfg: &ExperimentConfig, report: &mut RunReport, out_dir: &Path) -> Result<()> {
    let t = Instant::now();
    let (d, rank) = (cfg.symbolic.max_degree, cfg.symbolic.rank);
    let text = symbolic_tables(d, rank)?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join(format!("symbolic_{d}.txt")), &text)?;
    report.checks.push(Check::new("round-trip", round_trip_failures(d)? as f64, 0.0));

    let alg = CharClassAlgebra::new(d);
    let product = &alg.total_chern() * &alg.total_segre_in_chern()?;
    let defect = product.truncate(d as u32).terms().filter(|(m, _)| m.grade() > 0).count();
    report.checks.push(Check::new("total-inverse", defect as f64, 0.0));
    report.details = json!({ "tables": text.lines().collect::<Vec<_>>() });
    report.timings.insert("symbolic".into(), t.elapsed().as_secs_f64());
    Ok(())
}

fn smooth_example(cfg: &ExperimentConfig) -> Result<MetricField> {
    let data = cfg.example.build(cfg.chart()?)?;
    if data.metric.regularity() != Regularity::Smooth {
        return Err(Error::NotSmooth(format!(
            "{} is singular; this pipeline needs a smooth metric",
            cfg.example.label()
        )));
    }
    Ok(data.metric)
}

/// Largest `|c_{JI} - (-1)^p conj(c_{IJ})|` of a `(p, p)`-form: zero for a real form.
pub fn reality_defect(form: &FormField, keep: impl Fn(usize) -> bool) -> f64 {
    let (p, _) = form.bidegree();
    let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
    let mut worst: f64 = 0.0;
    for node in 0..form.chart().node_count() {
        if !keep(node) {
            continue;
        }
        let l = form.local(node);
        for &(i, j, c) in l.terms() {
            worst = worst.max((l.get(j, i) - c.conj() * sign).norm());
        }
    }
    worst
}

fn chern_forms_pipeline(cfg: &ExperimentConfig, report: &mut RunReport, out_dir: &Path) -> Result<()> {
    let h = smooth_example(cfg)?;
    let chart = h.chart().clone();
    let t = Instant::now();
    let forms = chern_forms(&h, cfg.degree)?;
    report.timings.insert("chern_forms".into(), t.elapsed().as_secs_f64());
    let interior = |node: usize| stencil_interior(&chart, node);
    for (k, c) in forms.iter().enumerate().skip(1) {
        c.write_csv(&out_dir.join(format!("c{k}")))?;
        let scale = c.max_abs().max(1e-300);
        report.checks.push(Check::new(
            format!("c{k}-real"),
            reality_defect(c, interior) / scale,
            cfg.tolerance,
        ));
        if c.bidegree().1 < chart.dim() {
            let dc = c.dbar()?.max_abs_where(|n| chart.is_interior(n, 8));
            report.checks.push(Check::new(format!("c{k}-closed"), dc / scale, cfg.tolerance));
        }
    }
    if forms.len() > 1 {
        let via_det = first_chern_via_det(&h)?;
        let diff = forms[1].add(&via_det.scale(C::new(-1.0, 0.0)))?;
        let scale = forms[1].max_abs().max(1e-300);
        report
            .checks
            .push(Check::new("c1-trace-vs-det", diff.max_abs_where(interior) / scale, cfg.tolerance));
    }
    let g = griffiths_diagnostic(&h, 200, cfg.seed);
    report.details = json!({ "griffiths": g, "nodes": chart.node_count() });
    Ok(())
}

/// `s_k` from the Chern forms at a node through the symbolic identity.
pub fn segre_from_chern(h: &MetricField, node: usize, kmax: usize) -> Result<Vec<LocalForm>> {
    let jet = h.jet_at(node)?;
    let theta = curvature_local(&jet).ok_or(Error::FlaggedNode { node })?;
    let c = chern_local(&theta, h.dim(), h.rank(), kmax);
    let alg = CharClassAlgebra::new(kmax.max(1));
    (0..=kmax)
        .map(|k| {
            let p: CharClassPoly = alg.segre_to_chern(k)?;
            Ok(p.evaluate(&LocalForm::one(), |v: &Variable| c[v.index as usize].clone()))
        })
        .collect()
}

fn segre_pipeline(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let h = smooth_example(cfg)?;
    let chart = h.chart().clone();
    let kmax = cfg.degree;
    let rule = default_rule(h.rank(), kmax)?;
    let cal = rule.require_calibrated(2 * kmax + 2, cfg.regularization.fiber_tolerance)?;
    report.calibration = json!({ "fiber": cal });
    let nodes: Vec<usize> = (0..chart.node_count()).filter(|&n| stencil_interior(&chart, n)).collect();
    let eval = SegreEvaluator::new(&h, &rule, kmax)?;
    let mut diff = vec![0.0f64; kmax + 1];
    let mut scale = vec![0.0f64; kmax + 1];
    let (mut t_segre, mut t_chern) = (0.0, 0.0);
    // chunks keep memory bounded on large grids
    for chunk in nodes.chunks(1 << 15) {
        let t = Instant::now();
        let streamed = eval.at_nodes(chunk)?;
        t_segre += t.elapsed().as_secs_f64();
        let t = Instant::now();
        let reference: Vec<Vec<LocalForm>> =
            chunk.par_iter().map(|&node| segre_from_chern(&h, node, kmax)).collect::<Result<_>>()?;
        t_chern += t.elapsed().as_secs_f64();
        for (s, r) in streamed.iter().zip(&reference) {
            for k in 0..=kmax {
                diff[k] = diff[k].max(s[k].plus(&r[k].times(C::new(-1.0, 0.0))).max_abs());
                scale[k] = scale[k].max(r[k].max_abs());
            }
        }
    }
    report.timings.insert("segre".into(), t_segre);
    report.timings.insert("chern-route".into(), t_chern);
    let mut errors = Vec::new();
    for k in 0..=kmax {
        let rel = if scale[k] > 0.0 { diff[k] / scale[k] } else { diff[k] };
        errors.push(rel);
        report.checks.push(Check::new(format!("s{k}-vs-chern"), rel, cfg.tolerance));
    }
    report.details = json!({ "interior_nodes": nodes.len(), "relative_errors": errors });
    Ok(())
}

fn singular_data(cfg: &ExperimentConfig) -> Result<(ExampleData, Vec<FamilyKind>)> {
    let data = cfg.example.build(cfg.chart()?)?;
    let kinds = cfg.families(data.metric.regularity());
    Ok((data, kinds))
}

/// `|a - b|` and the allowance `3 (err_a + err_b)`; errors are floored at `1e-8` of the scale.
fn within_errors(a: &PairingReport, b: &PairingReport) -> (f64, f64) {
    let floor = 1e-8 * a.limit.norm().max(b.limit.norm()).max(1.0);
    let allowed = 3.0 * (a.error_estimate.max(floor) + b.error_estimate.max(floor));
    ((a.limit - b.limit).norm(), allowed)
}

fn converge(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let (data, kinds) = singular_data(cfg)?;
    let schedule = cfg.schedule()?;
    let opts = cfg.limit_options();
    report.calibration = json!({ "kernels": kernel_calibration(&kinds, data.metric.dim())? });
    let betas = bumps(cfg, &data, cfg.degree)?;
    for (b, beta) in betas.iter().enumerate() {
        let mut limits: Vec<(FamilyKind, PairingReport)> = Vec::new();
        for &kind in &kinds {
            let t = Instant::now();
            let family = build_family(kind, &data, schedule.clone())?;
            let spec = CurrentProductSpec::single(family, cfg.degree, LimitMode::Simultaneous)?;
            let rep = simultaneous_limit(&spec, beta, &opts)?;
            report
                .timings
                .insert(format!("{}-bump{b}", kind.name()), t.elapsed().as_secs_f64());
            report.record(kind.name(), b, None, &rep);
            if let Some(e) = cfg.expected {
                report.checks.push(Check::given(
                    format!("{}-bump{b}-expected", kind.name()),
                    (rep.limit - C::new(e, 0.0)).norm(),
                    cfg.expected_tolerance,
                    rep.converged(),
                ));
            }
            limits.push((kind, rep));
        }
        for i in 0..limits.len() {
            for j in (i + 1)..limits.len() {
                let (a, b_) = (&limits[i].1, &limits[j].1);
                let (gap, allowed) = within_errors(a, b_);
                report.checks.push(Check::given(
                    format!("{}-vs-{}-bump{b}", limits[i].0.name(), limits[j].0.name()),
                    gap,
                    allowed,
                    a.converged() && b_.converged(),
                ));
            }
        }
    }
    Ok(())
}

fn iterated(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let (data, kinds) = singular_data(cfg)?;
    let kind = kinds[0];
    let schedule = cfg.schedule()?;
    let opts = cfg.limit_options();
    let family = build_family(kind, &data, schedule)?;
    let betas = bumps(cfg, &data, cfg.degree)?;
    for (b, beta) in betas.iter().enumerate() {
        let t = Instant::now();
        let spec = CurrentProductSpec::single(family.clone(), cfg.degree, LimitMode::Simultaneous)?;
        let sim = simultaneous_limit(&spec, beta, &opts)?;
        report.timings.insert(format!("simultaneous-bump{b}"), t.elapsed().as_secs_f64());
        let t = Instant::now();
        let mut it = chern_current(cfg.degree, &family, beta, &opts)?;
        report.timings.insert(format!("iterated-bump{b}"), t.elapsed().as_secs_f64());
        it.report.label = format!("{} (iterated)", it.report.label);
        report.record(kind.name(), b, None, &sim);
        report.record(kind.name(), b, None, &it.report);
        for c in &it.constituents {
            report.record(kind.name(), b, Some(c.partition.clone()), &c.report);
        }
        let both = sim.converged() && it.report.converged();
        report.checks.push(Check::given(
            format!("agreement-bump{b}"),
            (sim.limit - it.report.limit).norm(),
            cfg.agreement_tolerance,
            both,
        ));
        if let Some(e) = cfg.expected {
            for (name, r) in [("simultaneous", &sim), ("iterated", &it.report)] {
                report.checks.push(Check::given(
                    format!("{name}-bump{b}-expected"),
                    (r.limit - C::new(e, 0.0)).norm(),
                    cfg.expected_tolerance,
                    r.converged(),
                ));
            }
        }
    }
    Ok(())
}

fn mass(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let (data, kinds) = singular_data(cfg)?;
    let kind = kinds[0];
    let schedule = cfg.schedule()?;
    let opts = cfg.limit_options();
    let chart = data.metric.chart().clone();
    let base = cfg.bumps[0].clone();
    let largest = cfg.mass.radii.iter().copied().fold(0.0, f64::max);
    let t = Instant::now();
    let mut reports = Vec::new();
    let table = mass_estimate(&cfg.mass.radii, |r| {
        // the ε range shrinks with the support so each radius sees the same relative resolution
        let scaled: Vec<f64> = schedule.iter().map(|e| e * r / largest).collect();
        let family = build_family(kind, &data, scaled)?;
        let spec = super::config::BumpConfig { scale: r, ..base.clone() }.spec(&chart, cfg.degree)?;
        let beta: TestForm = bump_form_with(chart.clone(), &spec, Composition::Product)?.into();
        let rep = simultaneous_limit(&CurrentProductSpec::single(family, cfg.degree, LimitMode::Simultaneous)?, &beta, &opts)?;
        reports.push(rep.clone());
        Ok(rep)
    })?;
    report.timings.insert("mass".into(), t.elapsed().as_secs_f64());
    for (b, rep) in reports.iter().enumerate() {
        report.record(kind.name(), b, None, rep);
    }
    let all = table.rows.iter().all(|r| r.verdict == Verdict::Converged);
    report.checks.push(Check::given(
        "locally-finite",
        if table.locally_finite { 0.0 } else { 1.0 },
        0.0,
        all,
    ));
    if let (Some(e), Some(first)) = (cfg.expected, table.rows.first()) {
        report.checks.push(Check::given(
            "largest-radius-expected",
            (first.mass - e).abs(),
            cfg.expected_tolerance,
            first.verdict == Verdict::Converged,
        ));
    }
    report.details = json!({ "mass_table": table });
    Ok(())
}

fn cohomology(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let schedule = cfg.schedule()?;
    let t = Instant::now();
    let rep = cohomology_check(&cfg.cohomology, &schedule, &cfg.limit_options())?;
    report.timings.insert("cohomology".into(), t.elapsed().as_secs_f64());
    let c = &cfg.cohomology;
    report.record("p1-point-singular", 0, None, &rep.singular);
    report
        .checks
        .push(Check::new("fubini-study", (rep.smooth[0] - 1.0).abs(), c.smooth_tolerance));
    report.checks.push(Check::given(
        "point-singular",
        (rep.singular.limit.re - 1.0).abs(),
        c.singular_tolerance,
        rep.singular.converged(),
    ));
    report
        .checks
        .push(Check::new("partition-independence", rep.partition_spread, c.partition_tolerance));
    report.details = json!({ "cohomology": rep });
    Ok(())
}
