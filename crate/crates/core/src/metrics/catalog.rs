use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::{from_sections, Degeneracy, MetricField, Provenance, Regularity};
use super::jet::{ConstantJet, DiagExpJet, DualJet, LinePotentialJet, MetricJet, PolyMatrixJet};
use super::poly::{SectionMatrix, ZPoly};
use crate::error::{Error, Result};
use crate::forms::{Chart, JetFn, ScalarJet};
use crate::linalg::CMat;

type C = Complex64;

/// A monomial `c z^α` as `[exponents, re, im]`.
pub type MonomialSpec = (Vec<u32>, f64, f64);

/// Catalog metric addressed by name and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum MetricSpec {
    /// Identity metric of the given rank.
    Flat { rank: usize },
    /// `diag(exp(-sum_j w_ij |z_j|²))`, one weight row per line.
    DiagExp { weights: Vec<Vec<f64>> },
    /// `e^{-φ}` with `φ = log(1 + |z|²)` on the affine chart of projective space.
    FubiniStudyO1,
    /// Metric `h` dual to `h* = S^H S (+ eps² Id)`.
    Sections {
        /// `entries[i][j]` lists the monomials of `S_ij`.
        entries: Vec<Vec<Vec<MonomialSpec>>>,
        #[serde(default)]
        eps: Option<f64>,
        /// Declared degeneracy variety: coordinate axes whose vanishing defines `V`.
        #[serde(default)]
        degeneracy_axes: Option<Vec<usize>>,
    },
}

impl MetricSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MetricSpec::Flat { .. } => "flat",
            MetricSpec::DiagExp { .. } => "diag-exp",
            MetricSpec::FubiniStudyO1 => "fubini-study-o1",
            MetricSpec::Sections { .. } => "sections",
        }
    }

    pub fn section_matrix(&self, n: usize) -> Option<Result<SectionMatrix>> {
        match self {
            MetricSpec::Sections { entries, .. } => Some(SectionMatrix::from_coefficients(n, entries)),
            _ => None,
        }
    }

    pub fn build(&self, chart: Arc<Chart>) -> Result<MetricField> {
        let n = chart.dim();
        let params = serde_json::to_value(self).unwrap_or(serde_json::Value::Null);
        let prov = Provenance::Catalog {
            name: self.name().into(),
            params,
        };
        match self {
            MetricSpec::Flat { rank } => flat(chart, *rank),
            MetricSpec::DiagExp { weights } => {
                if weights.is_empty() || weights.iter().any(|w| w.len() != n) {
                    return Err(Error::Config(format!("diag-exp needs one weight per coordinate ({n})")));
                }
                MetricField::analytic(
                    chart,
                    Arc::new(DiagExpJet {
                        weights: weights.clone(),
                    }),
                    Regularity::Smooth,
                    prov,
                )
            }
            MetricSpec::FubiniStudyO1 => fubini_study_o1(chart),
            MetricSpec::Sections {
                eps,
                degeneracy_axes,
                ..
            } => {
                let s = self.section_matrix(n).expect("sections variant")?;
                let v = match degeneracy_axes {
                    Some(axes) => Some(Degeneracy::coordinate(n, axes)?),
                    None => None,
                };
                match eps {
                    Some(e) if *e > 0.0 => analytic_eps_metric(chart, &s, *e),
                    _ => Ok(from_sections(chart, &s, v)?.1),
                }
            }
        }
    }
}

pub fn flat(chart: Arc<Chart>, rank: usize) -> Result<MetricField> {
    let n = chart.dim();
    if rank == 0 || rank > crate::linalg::MAX {
        return Err(Error::RankMismatch {
            expected: crate::linalg::MAX,
            got: rank,
        });
    }
    MetricField::analytic(
        chart,
        Arc::new(ConstantJet {
            n,
            h: CMat::identity(rank),
        }),
        Regularity::Smooth,
        Provenance::Catalog {
            name: "flat".into(),
            params: serde_json::json!({ "rank": rank }),
        },
    )
}

pub fn constant(chart: Arc<Chart>, h: CMat) -> Result<MetricField> {
    let n = chart.dim();
    if h.cholesky().is_none() {
        return Err(Error::NotSmooth("constant metric must be positive definite".into()));
    }
    MetricField::analytic(
        chart,
        Arc::new(ConstantJet { n, h }),
        Regularity::Smooth,
        Provenance::Catalog {
            name: "flat".into(),
            params: serde_json::json!({ "rank": h.size(), "matrix": h.to_rows().iter().map(|c| [c.re, c.im]).collect::<Vec<_>>() }),
        },
    )
}

/// Potential `log(1 + |z|²)` with its jet.
pub fn fubini_study_potential(n: usize) -> JetFn {
    Arc::new(move |z: &[C]| {
        let s: f64 = 1.0 + z.iter().map(|w| w.norm_sqr()).sum::<f64>();
        let mut levi = vec![C::new(0.0, 0.0); n * n];
        for a in 0..n {
            for b in 0..n {
                let mut v = -z[a].conj() * z[b] / (s * s);
                if a == b {
                    v += 1.0 / s;
                }
                levi[a * n + b] = v;
            }
        }
        ScalarJet {
            value: s.ln(),
            del: z.iter().map(|w| w.conj() / s).collect(),
            levi,
        }
    })
}

pub fn fubini_study_o1(chart: Arc<Chart>) -> Result<MetricField> {
    let n = chart.dim();
    MetricField::analytic(
        chart,
        Arc::new(LinePotentialJet {
            n,
            phi: fubini_study_potential(n),
        }),
        Regularity::Smooth,
        Provenance::Catalog {
            name: "fubini-study-o1".into(),
            params: serde_json::Value::Null,
        },
    )
}

/// Smooth metric `h_ε` dual to `h*_ε = S^H S + ε² Id`.
pub fn analytic_eps_metric(chart: Arc<Chart>, s: &SectionMatrix, eps: f64) -> Result<MetricField> {
    let gram: Arc<dyn MetricJet> = Arc::new(PolyMatrixJet {
        n: chart.dim(),
        r: s.cols(),
        entries: s.gram(eps),
    });
    MetricField::analytic(
        chart,
        Arc::new(DualJet { inner: gram }),
        Regularity::Smooth,
        Provenance::AnalyticEps {
            sections: s.clone(),
            eps,
        },
    )
}

/// Sections `[[z_1,0],[z_2,0],[0,z_1],[0,z_2]]` on `C²`: `h* = |z|² Id₂`, `E = L ⊕ L`.
pub fn l_plus_l_sections() -> SectionMatrix {
    let z1 = ZPoly::coordinate(2, 0);
    let z2 = ZPoly::coordinate(2, 1);
    let o = ZPoly::zero(2);
    SectionMatrix::new(
        4,
        2,
        vec![z1.clone(), o.clone(), z2.clone(), o.clone(), o.clone(), z1, o, z2],
    )
    .expect("well-formed")
}

/// Sections `[[1,0],[0,z_1],[0,z_2]]` on `C²`: `E = O ⊕ L`.
pub fn o_plus_l_sections() -> SectionMatrix {
    let one = ZPoly::constant(2, C::new(1.0, 0.0));
    let o = ZPoly::zero(2);
    SectionMatrix::new(
        3,
        2,
        vec![one, o.clone(), o.clone(), ZPoly::coordinate(2, 0), o, ZPoly::coordinate(2, 1)],
    )
    .expect("well-formed")
}

/// Sections `[[1,0],[0,z_1]]` on `C²`: degenerate along the divisor `z_1 = 0`.
pub fn divisor_sections() -> SectionMatrix {
    let one = ZPoly::constant(2, C::new(1.0, 0.0));
    let o = ZPoly::zero(2);
    SectionMatrix::new(2, 2, vec![one, o.clone(), o, ZPoly::coordinate(2, 0)]).expect("well-formed")
}

/// The single section `z` on `C`: `h* = |z|²`, the Poincaré-Lelong example.
pub fn point_sections() -> SectionMatrix {
    SectionMatrix::new(1, 1, vec![ZPoly::coordinate(1, 0)]).expect("well-formed")
}
