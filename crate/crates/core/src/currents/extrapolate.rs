use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type C = Complex64;

/// Fits `P(ε) = L + sum_j a_j ε^{p_j}` through `powers.len() + 1` points and returns `L`.
pub fn richardson(eps: &[f64], values: &[C], powers: &[i32]) -> Option<C> {
    let m = powers.len() + 1;
    if eps.len() != m || values.len() != m {
        return None;
    }
    let a = nalgebra::DMatrix::from_fn(m, m, |i, j| if j == 0 { 1.0 } else { eps[i].powi(powers[j - 1]) });
    let lu = a.lu();
    let re = lu.solve(&nalgebra::DVector::from_iterator(m, values.iter().map(|v| v.re)))?;
    let im = lu.solve(&nalgebra::DVector::from_iterator(m, values.iter().map(|v| v.im)))?;
    Some(C::new(re[0], im[0]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Converged,
    Inconclusive,
}

/// Limit estimate from a schedule of pairings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub limit: C,
    /// Distance to the estimate one step earlier.
    pub error_estimate: f64,
    /// `error_estimate / max(|L|, max_j |P_j|)`.
    pub relative_change: f64,
}

const FLOOR: f64 = 1e-12;

/// Richardson on the last three points with `ε²`, `ε⁴` terms, compared against the same
/// fit one point earlier (or lower-order fits for short schedules).
pub fn extrapolate(eps: &[f64], values: &[C]) -> Extrapolation {
    let len = eps.len().min(values.len());
    let (eps, values) = (&eps[..len], &values[..len]);
    let fit = |end: usize, k: usize| -> Option<C> {
        let s = end - k;
        let powers: Vec<i32> = (1..k as i32).map(|j| 2 * j).collect();
        richardson(&eps[s..end], &values[s..end], &powers)
    };
    let (limit, previous) = match len {
        0 => {
            return Extrapolation {
                limit: C::new(f64::NAN, 0.0),
                error_estimate: f64::INFINITY,
                relative_change: f64::INFINITY,
            }
        }
        1 => (Some(values[0]), None),
        2 => (fit(2, 2), Some(values[1])),
        3 => (fit(3, 3), fit(3, 2)),
        _ => (fit(len, 3), fit(len - 1, 3)),
    };
    let limit = limit.unwrap_or(C::new(f64::NAN, 0.0));
    let scale = values.iter().map(|v| v.norm()).fold(limit.norm(), f64::max);
    let error_estimate = previous.map(|p| (limit - p).norm()).unwrap_or(f64::INFINITY);
    let relative_change = if scale < FLOOR {
        if error_estimate.is_finite() {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        error_estimate / scale
    };
    Extrapolation {
        limit,
        error_estimate,
        relative_change,
    }
}

/// Stabilization record of one level of an iterated limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    /// 1 for the innermost factor.
    pub level: usize,
    /// `ε` values of the outer factors held fixed for this inner limit.
    pub outer_eps: Vec<f64>,
    pub schedule: Vec<f64>,
    pub pairings: Vec<C>,
    pub extrapolation: Extrapolation,
    pub verdict: Verdict,
}

/// Pairings `⟨T_ε, β⟩` along a schedule with their extrapolated limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub label: String,
    pub schedule: Vec<f64>,
    pub pairings: Vec<C>,
    pub limit: C,
    pub error_estimate: f64,
    pub relative_change: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<LevelReport>,
}

impl PairingReport {
    pub fn assess(label: impl Into<String>, schedule: &[f64], pairings: Vec<C>, tolerance: f64) -> Self {
        let ex = extrapolate(schedule, &pairings);
        let finite = pairings.iter().all(|p| p.re.is_finite() && p.im.is_finite());
        let verdict = if finite && ex.relative_change < tolerance {
            Verdict::Converged
        } else {
            Verdict::Inconclusive
        };
        PairingReport {
            label: label.into(),
            schedule: schedule.to_vec(),
            pairings,
            limit: ex.limit,
            error_estimate: ex.error_estimate,
            relative_change: ex.relative_change,
            tolerance,
            verdict,
            levels: Vec::new(),
        }
    }

    /// A report for a quantity that does not depend on `ε`.
    pub fn exact(label: impl Into<String>, value: C, tolerance: f64) -> Self {
        PairingReport {
            label: label.into(),
            schedule: Vec::new(),
            pairings: vec![value],
            limit: value,
            error_estimate: 0.0,
            relative_change: 0.0,
            tolerance,
            verdict: Verdict::Converged,
            levels: Vec::new(),
        }
    }

    /// `sum_i c_i R_i`; pairings combine elementwise when all schedules agree.
    pub fn combine(label: impl Into<String>, parts: &[(f64, &PairingReport)], tolerance: f64) -> Self {
        let limit: C = parts.iter().map(|(c, r)| r.limit * *c).sum();
        let error_estimate: f64 = parts.iter().map(|(c, r)| c.abs() * r.error_estimate).sum();
        let same = parts
            .windows(2)
            .all(|w| w[0].1.schedule == w[1].1.schedule && w[0].1.pairings.len() == w[1].1.pairings.len());
        let (schedule, pairings) = if same && !parts.is_empty() {
            let len = parts[0].1.pairings.len();
            (
                parts[0].1.schedule.clone(),
                (0..len).map(|j| parts.iter().map(|(c, r)| r.pairings[j] * *c).sum()).collect(),
            )
        } else {
            (Vec::new(), Vec::new())
        };
        let scale = pairings.iter().map(|p: &C| p.norm()).fold(limit.norm(), f64::max);
        let scale = parts
            .iter()
            .map(|(c, r)| c.abs() * r.limit.norm())
            .fold(scale, f64::max);
        let relative_change = if scale < FLOOR { 0.0 } else { error_estimate / scale };
        let all = parts.iter().all(|(_, r)| r.verdict == Verdict::Converged);
        PairingReport {
            label: label.into(),
            schedule,
            pairings,
            limit,
            error_estimate,
            relative_change,
            tolerance,
            verdict: if all { Verdict::Converged } else { Verdict::Inconclusive },
            levels: Vec::new(),
        }
    }

    pub fn converged(&self) -> bool {
        self.verdict == Verdict::Converged
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    /// One row per `ε`: `label,eps,re,im`.
    pub fn write_csv_rows(&self, out: &mut impl Write) -> Result<()> {
        for (e, p) in self.schedule.iter().zip(&self.pairings) {
            writeln!(out, "{},{:e},{:e},{:e}", self.label, e, p.re, p.im)?;
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "label,eps,re,im")?;
        self.write_csv_rows(&mut f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C {
        C::new(x, 0.0)
    }

    #[test]
    fn richardson_recovers_even_polynomials() {
        let eps = [0.4, 0.2, 0.1];
        let f = |e: f64| c(1.0 - 3.0 * e * e + 5.0 * e.powi(4));
        let v: Vec<C> = eps.iter().map(|&e| f(e)).collect();
        let l = richardson(&eps, &v, &[2, 4]).unwrap();
        assert!((l - 1.0).norm() < 1e-12);
    }

    #[test]
    fn rational_closed_form_extrapolates() {
        // ρ²/(ρ²+ε²) with ρ = 0.8 on the acceptance schedule
        let eps: Vec<f64> = (0..5).map(|j| 0.4 * 2f64.powf(-(j as f64) / 2.0)).collect();
        let v: Vec<C> = eps.iter().map(|e| c(0.64 / (0.64 + e * e))).collect();
        let ex = extrapolate(&eps, &v);
        assert!((ex.limit - 1.0).norm() < 1e-3);
        assert!(ex.relative_change < 1e-3);
    }

    #[test]
    fn constant_and_short_schedules() {
        let r = PairingReport::assess("k", &[0.3, 0.2, 0.1], vec![c(2.0); 3], 1e-3);
        assert!(r.converged());
        assert!((r.limit - 2.0).norm() < 1e-12);
        let r = PairingReport::assess("one", &[0.3], vec![c(2.0)], 1e-3);
        assert!(!r.converged());
        let z = PairingReport::assess("zero", &[0.3, 0.2, 0.1], vec![c(0.0); 3], 1e-3);
        assert!(z.converged());
    }

    #[test]
    fn combination_and_serialization() {
        let a = PairingReport::assess("a", &[0.3, 0.2, 0.1], vec![c(1.0); 3], 1e-3);
        let b = PairingReport::assess("b", &[0.3, 0.2, 0.1], vec![c(2.0); 3], 1e-3);
        let s = PairingReport::combine("a-b", &[(1.0, &a), (-1.0, &b)], 1e-3);
        assert!((s.limit + 1.0).norm() < 1e-12);
        assert_eq!(s.pairings.len(), 3);
        let json = s.to_json().unwrap();
        let back: PairingReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let mut buf = Vec::new();
        s.write_csv_rows(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }
}
