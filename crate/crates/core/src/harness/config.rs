use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::atlas::CohomologyConfig;
use crate::currents::{BumpSpec, LimitOptions};
use crate::error::{Error, Result};
use crate::forms::Chart;
use crate::metrics::catalog::{divisor_sections, l_plus_l_sections, o_plus_l_sections, point_sections, MonomialSpec};
use crate::metrics::{from_sections, Degeneracy, MetricField, MetricSpec, Regularity, SectionMatrix};
use crate::regularize::{geometric_schedule, parse_schedule, validate_schedule, Kernel};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Symbolic,
    ChernForms,
    Segre,
    Converge,
    Iterated,
    Mass,
    Cohomology,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Symbolic => "symbolic",
            Pipeline::ChernForms => "chern-forms",
            Pipeline::Segre => "segre",
            Pipeline::Converge => "converge",
            Pipeline::Iterated => "iterated",
            Pipeline::Mass => "mass",
            Pipeline::Cohomology => "cohomology",
        }
    }
}

/// Named catalog example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Example {
    /// `h* = |z|²` on `C`: `c_1 = [0]`.
    PoincareLelong,
    /// `h* = |z|² Id₂` on `C²`.
    LPlusL,
    /// `h* = diag(1, |z|²)` on `C²`.
    OPlusL,
    /// `h* = diag(1, |z_1|²)` on `C²`; degenerate in codimension 1.
    Divisor,
    FubiniStudy,
    Flat {
        dim: usize,
        rank: usize,
    },
    DiagExp {
        weights: Vec<Vec<f64>>,
    },
    /// Sections given monomial by monomial; `V` is cut out by the listed coordinates.
    Sections {
        dim: usize,
        entries: Vec<Vec<Vec<MonomialSpec>>>,
        #[serde(default)]
        degeneracy_axes: Option<Vec<usize>>,
    },
}

impl Default for Example {
    fn default() -> Self {
        Example::PoincareLelong
    }
}

/// A built example: the metric `h` and, for section-induced examples, the sections.
#[derive(Debug, Clone)]
pub struct ExampleData {
    pub metric: MetricField,
    pub sections: Option<SectionMatrix>,
}

impl Example {
    pub fn label(&self) -> &'static str {
        match self {
            Example::PoincareLelong => "poincare-lelong",
            Example::LPlusL => "l-plus-l",
            Example::OPlusL => "o-plus-l",
            Example::Divisor => "divisor",
            Example::FubiniStudy => "fubini-study",
            Example::Flat { .. } => "flat",
            Example::DiagExp { .. } => "diag-exp",
            Example::Sections { .. } => "sections",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Example::PoincareLelong | Example::FubiniStudy => 1,
            Example::LPlusL | Example::OPlusL | Example::Divisor => 2,
            Example::Flat { dim, .. } | Example::Sections { dim, .. } => *dim,
            Example::DiagExp { weights } => weights.first().map(|w| w.len()).unwrap_or(0),
        }
    }

    fn section_data(&self) -> Result<Option<(SectionMatrix, Vec<usize>)>> {
        Ok(match self {
            Example::PoincareLelong => Some((point_sections(), vec![0])),
            Example::LPlusL => Some((l_plus_l_sections(), vec![0, 1])),
            Example::OPlusL => Some((o_plus_l_sections(), vec![0, 1])),
            Example::Divisor => Some((divisor_sections(), vec![0])),
            Example::Sections {
                dim,
                entries,
                degeneracy_axes,
            } => Some((
                SectionMatrix::from_coefficients(*dim, entries)?,
                degeneracy_axes.clone().unwrap_or_default(),
            )),
            _ => None,
        })
    }

    pub fn build(&self, chart: Arc<Chart>) -> Result<ExampleData> {
        if chart.dim() != self.dim() {
            return Err(Error::Config(format!(
                "example {} lives in dimension {}, the chart has dimension {}",
                self.label(),
                self.dim(),
                chart.dim()
            )));
        }
        if let Some((s, axes)) = self.section_data()? {
            let v = if axes.is_empty() {
                None
            } else {
                Some(Degeneracy::coordinate(chart.dim(), &axes)?)
            };
            let (_, h) = from_sections(chart, &s, v)?;
            return Ok(ExampleData {
                metric: h,
                sections: Some(s),
            });
        }
        let spec = match self {
            Example::FubiniStudy => MetricSpec::FubiniStudyO1,
            Example::Flat { rank, .. } => MetricSpec::Flat { rank: *rank },
            Example::DiagExp { weights } => MetricSpec::DiagExp { weights: weights.clone() },
            _ => unreachable!("section examples handled above"),
        };
        Ok(ExampleData {
            metric: spec.build(chart)?,
            sections: None,
        })
    }

    pub fn is_singular(&self) -> bool {
        matches!(
            self,
            Example::PoincareLelong | Example::LPlusL | Example::OPlusL | Example::Divisor | Example::Sections { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChartConfig {
    pub radius: f64,
    pub resolution: usize,
}

impl Default for ChartConfig {
    fn default() -> Self {
        ChartConfig {
            radius: 1.0,
            resolution: 64,
        }
    }
}

/// A regularization route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// `h*_ε = S^H S + ε² Id` (section examples only).
    AnalyticEps,
    /// Mollification of `h*` with the compact bump kernel.
    Bump,
    /// Mollification of `h*` with the truncated Gaussian kernel.
    Gaussian,
    /// The metric itself at every `ε` (smooth examples only).
    Identity,
}

impl FamilyKind {
    pub fn kernel(self) -> Option<Kernel> {
        match self {
            FamilyKind::Bump => Some(Kernel::Bump),
            FamilyKind::Gaussian => Some(Kernel::gaussian()),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::AnalyticEps => "analytic-eps",
            FamilyKind::Bump => "bump",
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::Identity => "identity",
        }
    }
}

/// ε schedule as an explicit list or `"start:ratio:count"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSpec {
    List(Vec<f64>),
    Geometric(String),
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec::Geometric("0.2:0.8408964152537145:5".into())
    }
}

impl ScheduleSpec {
    pub fn resolve(&self) -> Result<Vec<f64>> {
        match self {
            ScheduleSpec::List(v) => {
                validate_schedule(v)?;
                Ok(v.clone())
            }
            ScheduleSpec::Geometric(s) => parse_schedule(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularizationConfig {
    /// Empty means: analytic-eps, bump and gaussian for singular examples, identity otherwise.
    pub families: Vec<FamilyKind>,
    pub schedule: ScheduleSpec,
    pub max_refinements: usize,
    pub eps_floor: Option<f64>,
    pub fiber_tolerance: f64,
}

impl Default for RegularizationConfig {
    fn default() -> Self {
        RegularizationConfig {
            families: Vec::new(),
            schedule: ScheduleSpec::default(),
            max_refinements: 8,
            eps_floor: None,
            fiber_tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BumpConfig {
    /// `[re, im]` per coordinate; the chart centre when empty.
    pub center: Vec<[f64; 2]>,
    pub scale: f64,
    pub complement_scale: Option<f64>,
    pub delta: f64,
}

impl Default for BumpConfig {
    fn default() -> Self {
        BumpConfig {
            center: Vec::new(),
            scale: 0.9,
            complement_scale: None,
            delta: 0.5,
        }
    }
}

impl BumpConfig {
    pub fn spec(&self, chart: &Chart, k_plus_q: usize) -> Result<BumpSpec> {
        let point: Vec<C> = if self.center.is_empty() {
            chart.center().to_vec()
        } else {
            self.center.iter().map(|p| C::new(p[0], p[1])).collect()
        };
        if point.len() != chart.dim() {
            return Err(Error::Config(format!(
                "bump centre has {} coordinates, the chart has dimension {}",
                point.len(),
                chart.dim()
            )));
        }
        Ok(BumpSpec {
            complement_scale: self.complement_scale.unwrap_or(self.scale),
            delta: self.delta,
            ..BumpSpec::new(point, k_plus_q, self.scale)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SymbolicConfig {
    pub max_degree: usize,
    pub rank: usize,
}

impl Default for SymbolicConfig {
    fn default() -> Self {
        SymbolicConfig { max_degree: 5, rank: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MassConfig {
    pub radii: Vec<f64>,
}

impl Default for MassConfig {
    fn default() -> Self {
        MassConfig { radii: vec![0.9, 0.7, 0.5] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: Option<Pipeline>,
    pub example: Example,
    pub chart: ChartConfig,
    pub regularization: RegularizationConfig,
    pub bumps: Vec<BumpConfig>,
    /// Current degree `k`.
    pub degree: usize,
    /// Expected limit of every pairing, when known in closed form.
    pub expected: Option<f64>,
    /// Allowed distance from `expected`.
    pub expected_tolerance: f64,
    /// Allowed distance between simultaneous and iterated limits.
    pub agreement_tolerance: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub output: PathBuf,
    pub symbolic: SymbolicConfig,
    pub mass: MassConfig,
    pub cohomology: CohomologyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            pipeline: None,
            example: Example::default(),
            chart: ChartConfig::default(),
            regularization: RegularizationConfig::default(),
            bumps: vec![BumpConfig::default()],
            degree: 1,
            expected: None,
            expected_tolerance: 1e-3,
            agreement_tolerance: 1e-2,
            tolerance: 1e-3,
            seed: 7,
            output: PathBuf::from("out"),
            symbolic: SymbolicConfig::default(),
            mass: MassConfig::default(),
            cohomology: CohomologyConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Built-in configuration for a pipeline.
    pub fn preset(pipeline: Pipeline) -> Self {
        let base = ExperimentConfig {
            pipeline: Some(pipeline),
            ..Default::default()
        };
        match pipeline {
            Pipeline::Symbolic | Pipeline::Cohomology => base,
            Pipeline::ChernForms | Pipeline::Segre => ExperimentConfig {
                example: Example::DiagExp {
                    weights: vec![vec![1.0, 0.5], vec![0.3, 1.2]],
                },
                chart: ChartConfig {
                    radius: 1.0,
                    resolution: 24,
                },
                degree: 2,
                ..base
            },
            Pipeline::Converge | Pipeline::Mass => ExperimentConfig {
                chart: ChartConfig {
                    radius: 1.0,
                    resolution: 161,
                },
                expected: Some(1.0),
                ..base
            },
            Pipeline::Iterated => ExperimentConfig {
                example: Example::LPlusL,
                chart: ChartConfig {
                    radius: 1.0,
                    resolution: 32,
                },
                degree: 2,
                regularization: RegularizationConfig {
                    families: vec![FamilyKind::AnalyticEps],
                    ..Default::default()
                },
                expected: Some(1.0),
                expected_tolerance: 2e-2,
                ..base
            },
        }
    }

    pub fn chart(&self) -> Result<Arc<Chart>> {
        Ok(Arc::new(Chart::polydisc(
            self.example.dim(),
            self.chart.radius,
            self.chart.resolution,
        )?))
    }

    pub fn schedule(&self) -> Result<Vec<f64>> {
        self.regularization.schedule.resolve()
    }

    pub fn limit_options(&self) -> LimitOptions {
        LimitOptions {
            tolerance: self.tolerance,
            max_refinements: self.regularization.max_refinements,
            eps_floor: self.regularization.eps_floor,
            fiber_tolerance: self.regularization.fiber_tolerance,
        }
    }

    /// Families actually used: the configured list or the default for the example.
    pub fn families(&self, regularity: Regularity) -> Vec<FamilyKind> {
        if !self.regularization.families.is_empty() {
            return self.regularization.families.clone();
        }
        match regularity {
            Regularity::Smooth => vec![FamilyKind::Identity],
            Regularity::Singular => vec![FamilyKind::AnalyticEps, FamilyKind::Bump, FamilyKind::Gaussian],
        }
    }

    /// Preconditions checked before any numerical work.
    pub fn validate(&self, pipeline: Pipeline) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        match pipeline {
            Pipeline::Symbolic => {
                if self.symbolic.max_degree == 0 {
                    return Err(Error::Config("symbolic max_degree must be at least 1".into()));
                }
                Ok(())
            }
            Pipeline::Cohomology => {
                if self.cohomology.k != 1 {
                    return Err(Error::DegreeOverflow {
                        degree: self.cohomology.k,
                        max: 1,
                    });
                }
                self.schedule().map(|_| ())
            }
            _ => {
                let n = self.example.dim();
                if n == 0 {
                    return Err(Error::Config("example has no coordinates".into()));
                }
                if self.degree > n {
                    return Err(Error::DegreeOverflow {
                        degree: self.degree,
                        max: n,
                    });
                }
                self.schedule()?;
                if matches!(pipeline, Pipeline::Converge | Pipeline::Iterated | Pipeline::Mass) {
                    if self.bumps.is_empty() {
                        return Err(Error::Config("at least one bump is required".into()));
                    }
                    let chart = self.chart()?;
                    let data = self.example.build(chart)?;
                    crate::currents::check_codim(&data.metric, self.degree)?;
                    let families = self.families(data.metric.regularity());
                    for f in families {
                        match f {
                            FamilyKind::AnalyticEps if data.sections.is_none() => {
                                return Err(Error::Config(format!(
                                    "analytic-eps needs a section-induced example, not {}",
                                    self.example.label()
                                )))
                            }
                            FamilyKind::Identity if data.metric.regularity() != Regularity::Smooth => {
                                return Err(Error::Config("the identity family needs a smooth metric".into()))
                            }
                            _ => {}
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

/// The default acceptance schedule `0.2 · 2^{-j/4}`, `j = 0..5`.
pub fn acceptance_schedule() -> Vec<f64> {
    geometric_schedule(0.2, 0.5f64.powf(0.25), 5).expect("valid schedule")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        for p in [Pipeline::Symbolic, Pipeline::Converge, Pipeline::Iterated, Pipeline::Segre] {
            let cfg = ExperimentConfig::preset(p);
            let text = cfg.to_toml().unwrap();
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn parses_a_hand_written_config() {
        let text = r#"
            pipeline = "converge"
            degree = 1
            expected = 1.0

            [example]
            name = "sections"
            dim = 1
            entries = [[[[[1], 1.0, 0.0]]]]
            degeneracy_axes = [0]

            [chart]
            radius = 1.0
            resolution = 41

            [regularization]
            families = ["analytic-eps", "bump"]
            schedule = [0.3, 0.2, 0.1]

            [[bumps]]
            center = [[0.0, 0.0]]
            scale = 0.8
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.pipeline, Some(Pipeline::Converge));
        assert_eq!(cfg.schedule().unwrap(), vec![0.3, 0.2, 0.1]);
        assert_eq!(cfg.bumps[0].scale, 0.8);
        cfg.validate(Pipeline::Converge).unwrap();
        let data = cfg.example.build(cfg.chart().unwrap()).unwrap();
        assert_eq!(data.metric.rank(), 1);
        assert!(ExperimentConfig::from_toml("degree = \"two\"").is_err());
    }

    #[test]
    fn codimension_is_checked_before_running() {
        let cfg = ExperimentConfig {
            example: Example::Divisor,
            degree: 2,
            chart: ChartConfig {
                radius: 1.0,
                resolution: 9,
            },
            ..ExperimentConfig::preset(Pipeline::Converge)
        };
        assert!(matches!(
            cfg.validate(Pipeline::Converge),
            Err(Error::Codimension { codim: 1, k: 2 })
        ));
        let cfg = ExperimentConfig {
            degree: 3,
            ..cfg
        };
        assert!(matches!(cfg.validate(Pipeline::Converge), Err(Error::DegreeOverflow { .. })));
    }

    #[test]
    fn geometric_schedule_strings() {
        let s = ScheduleSpec::default().resolve().unwrap();
        assert_eq!(s.len(), 5);
        assert!((s[4] - 0.1).abs() < 1e-12);
        assert!(s.iter().zip(acceptance_schedule()).all(|(a, b)| (a - b).abs() < 1e-15));
        assert!(ScheduleSpec::List(vec![0.1, 0.2]).resolve().is_err());
    }
}
