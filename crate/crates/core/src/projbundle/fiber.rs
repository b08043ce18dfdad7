use std::f64::consts::PI;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type C = Complex64;

/// Quadrature on `P^{r-1}` for the normalized Fubini-Study measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FiberScheme {
    /// Gauss-Legendre in the moment-map simplex times the trapezoid rule in the
    /// relative phases; exact for polynomials in `v, vbar` of bidegree `< phases`
    /// with `x`-degree `<= 2 gauss - 1`.
    Product { gauss: usize, phases: usize },
    /// Uniform samples on the unit sphere with a fixed seed.
    MonteCarlo { samples: usize, seed: u64 },
}

impl FiberScheme {
    /// Product rule exact for bidegree up to `degree`, or Monte Carlo for rank above 3.
    pub fn for_degree(rank: usize, degree: usize) -> Self {
        if rank <= 3 {
            FiberScheme::Product {
                gauss: degree / 2 + 2,
                phases: degree + 1,
            }
        } else {
            FiberScheme::MonteCarlo {
                samples: 20_000,
                seed: 0x5e9e,
            }
        }
    }
}

/// One quadrature point on `P^{r-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberNode {
    /// Unit representative in `C^r`.
    pub v: Vec<C>,
    /// Affine chart `w_chart = 1` used at this node (the largest coordinate).
    pub chart: usize,
    /// `w = v / v_chart`.
    pub w: Vec<C>,
    /// Probability weight; weights sum to 1.
    pub weight: f64,
}

impl FiberNode {
    fn new(v: Vec<C>, weight: f64) -> Self {
        let chart = (0..v.len())
            .max_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm()))
            .unwrap_or(0);
        let w = v.iter().map(|x| x / v[chart]).collect();
        FiberNode { v, chart, w, weight }
    }

    /// Slots of the affine coordinates `t_1..t_{r-1}` (all slots but the chart).
    pub fn fiber_slots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.v.len()).filter(move |&s| s != self.chart)
    }

    /// `|w|² = 1 + |t|²`.
    pub fn q(&self) -> f64 {
        self.w.iter().map(|x| x.norm_sqr()).sum()
    }
}

/// Calibration of a fiber rule against exactly known integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// `|∫ ω_FS^{r-1} - 1|`.
    pub mass_error: f64,
    /// Largest error on the moments `E|v^α|²` of total degree up to the checked degree.
    pub moment_error: f64,
    pub moment_degree: usize,
    /// Error on `∫ (dd^c log v^H A v)^{r-1} = 1` for fixed non-identity `A` (informational).
    pub off_identity_error: f64,
    pub nodes: usize,
}

impl Calibration {
    pub fn worst(&self) -> f64 {
        self.mass_error.max(self.moment_error)
    }
}

#[derive(Debug, Clone)]
pub struct FiberRule {
    rank: usize,
    scheme: FiberScheme,
    nodes: Vec<FiberNode>,
}

/// `(P_p(t), P_{p-1}(t))`.
fn legendre(p: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    for k in 2..=p {
        let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
fn gauss_legendre(p: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; p];
    let mut w = vec![0.0; p];
    for i in 0..p {
        let mut t = (PI * (i as f64 + 0.75) / (p as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (pn, pm) = legendre(p, t);
            let dt = pn / (p as f64 * (t * pn - pm) / (t * t - 1.0));
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (pn, pm) = legendre(p, t);
        let dp = p as f64 * (t * pn - pm) / (t * t - 1.0);
        x[i] = 0.5 * (1.0 - t);
        w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

impl FiberRule {
    pub fn new(rank: usize, scheme: FiberScheme) -> Result<Self> {
        if rank == 0 {
            return Err(Error::RankMismatch { expected: 1, got: 0 });
        }
        let nodes = match scheme {
            _ if rank == 1 => vec![FiberNode::new(vec![C::new(1.0, 0.0)], 1.0)],
            FiberScheme::Product { gauss, phases } => {
                if rank > 3 {
                    return Err(Error::Config("product fiber rule supports rank up to 3".into()));
                }
                if gauss == 0 || phases == 0 {
                    return Err(Error::Config("fiber rule orders must be positive".into()));
                }
                Self::product_nodes(rank, gauss, phases)
            }
            FiberScheme::MonteCarlo { samples, seed } => {
                if samples == 0 {
                    return Err(Error::Config("Monte Carlo fiber rule needs samples".into()));
                }
                let mut rng = StdRng::seed_from_u64(seed);
                (0..samples)
                    .map(|_| {
                        let g: Vec<C> = (0..rank)
                            .map(|_| C::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                            .collect();
                        let norm = g.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                        FiberNode::new(g.iter().map(|x| x / norm).collect(), 1.0 / samples as f64)
                    })
                    .collect()
            }
        };
        Ok(FiberRule { rank, scheme, nodes })
    }

    fn product_nodes(rank: usize, gauss: usize, phases: usize) -> Vec<FiberNode> {
        let (gx, gw) = gauss_legendre(gauss);
        // points of the simplex {x_j >= 0, sum x_j = 1} with probability weights
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::new();
        match rank {
            2 => {
                for (x, w) in gx.iter().zip(&gw) {
                    simplex.push((vec![*x, 1.0 - x], *w));
                }
            }
            3 => {
                // collapsed coordinates x_1 = u, x_2 = (1-u) s with Jacobian (1-u), density 2
                let (gx2, gw2) = gauss_legendre(gauss + 1);
                for (u, wu) in gx2.iter().zip(&gw2) {
                    for (s, ws) in gx.iter().zip(&gw) {
                        let x1 = *u;
                        let x2 = (1.0 - u) * s;
                        simplex.push((vec![x1, x2, 1.0 - x1 - x2], 2.0 * wu * ws * (1.0 - u)));
                    }
                }
            }
            _ => unreachable!(),
        }
        let mut nodes = Vec::new();
        let phase_count = phases.pow((rank - 1) as u32);
        for (x, wx) in &simplex {
            for k in 0..phase_count {
                let mut rest = k;
                let mut v = Vec::with_capacity(rank);
                v.push(C::new(x[0].sqrt(), 0.0));
                for xj in x.iter().skip(1) {
                    let m = rest % phases;
                    rest /= phases;
                    let theta = 2.0 * PI * (m as f64 + 0.5) / phases as f64;
                    v.push(C::from_polar(xj.sqrt(), theta));
                }
                nodes.push(FiberNode::new(v, wx / phase_count as f64));
            }
        }
        nodes
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn scheme(&self) -> FiberScheme {
        self.scheme
    }

    pub fn nodes(&self) -> &[FiberNode] {
        &self.nodes
    }

    /// `E_FS[f]`.
    pub fn expect(&self, f: impl Fn(&FiberNode) -> C) -> C {
        self.nodes.iter().map(|n| f(n) * n.weight).sum()
    }

    /// Checks the rule against the FS mass and the moments `E|v^α|² = (r-1)! α! / (|α|+r-1)!`.
    pub fn calibrate(&self, moment_degree: usize) -> Calibration {
        let r = self.rank;
        let mass_error = (self.expect(|_| C::new(1.0, 0.0)).re - 1.0).abs();
        let mut moment_error = 0.0f64;
        let mut alpha = vec![0usize; r];
        loop {
            let total: usize = alpha.iter().sum();
            if total <= moment_degree {
                let exact = factorial(r - 1) * alpha.iter().map(|&a| factorial(a)).product::<f64>()
                    / factorial(total + r - 1);
                let got = self
                    .expect(|n| {
                        C::new(
                            n.v.iter().zip(&alpha).map(|(x, &a)| x.norm_sqr().powi(a as i32)).product(),
                            0.0,
                        )
                    })
                    .re;
                moment_error = moment_error.max((got - exact).abs());
                // off-diagonal phase moments v^α vbar^β with α ≠ β must vanish
                if total >= 1 && r > 1 {
                    let got = self.expect(|n| {
                        let mut m = n.v[0].conj().powu(total as u32);
                        for (x, &a) in n.v.iter().zip(&alpha) {
                            m *= x.powu(a as u32);
                        }
                        m
                    });
                    if alpha[0] != total {
                        moment_error = moment_error.max(got.norm());
                    }
                }
            }
            let mut i = 0;
            loop {
                if i == r {
                    return Calibration {
                        mass_error,
                        moment_error,
                        moment_degree,
                        off_identity_error: self.off_identity_error(),
                        nodes: self.nodes.len(),
                    };
                }
                alpha[i] += 1;
                if alpha.iter().sum::<usize>() <= moment_degree {
                    break;
                }
                alpha[i] = 0;
                i += 1;
            }
        }
    }

    /// `|E_FS[det A / (v^H A v)^r] - 1|` for `A = diag(1, 1.5, 2, ...)`.
    fn off_identity_error(&self) -> f64 {
        let r = self.rank;
        let diag: Vec<f64> = (0..r).map(|k| 1.0 + 0.5 * k as f64).collect();
        let det: f64 = diag.iter().product();
        let e = self.expect(|n| {
            let q: f64 = n.v.iter().zip(&diag).map(|(x, d)| d * x.norm_sqr()).sum();
            C::new(det / q.powi(r as i32), 0.0)
        });
        (e.re - 1.0).abs()
    }

    /// Calibration gate used before fiber integration: mass and the moments the rule
    /// claims to integrate exactly for product rules, mass alone for Monte Carlo.
    pub fn check(&self, tolerance: f64) -> Result<Calibration> {
        match self.scheme {
            FiberScheme::Product { gauss, phases } => {
                self.require_calibrated((phases - 1).min(2 * gauss - 1).max(1), tolerance)
            }
            FiberScheme::MonteCarlo { .. } => {
                let cal = self.calibrate(2);
                if cal.mass_error > tolerance {
                    Err(Error::NotCalibrated {
                        error: cal.mass_error,
                        tolerance,
                    })
                } else {
                    Ok(cal)
                }
            }
        }
    }

    /// Fails unless the rule reproduces mass and moments within `tolerance`.
    pub fn require_calibrated(&self, moment_degree: usize, tolerance: f64) -> Result<Calibration> {
        let cal = self.calibrate(moment_degree);
        if cal.worst() > tolerance {
            Err(Error::NotCalibrated {
                error: cal.worst(),
                tolerance,
            })
        } else {
            Ok(cal)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(4);
        for deg in 0..8 {
            let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            assert!((v - 1.0 / (deg + 1) as f64).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn product_rules_are_exact_on_moments() {
        for rank in [2, 3] {
            let rule = FiberRule::new(rank, FiberScheme::Product { gauss: 4, phases: 7 }).unwrap();
            let cal = rule.calibrate(6);
            assert!(cal.mass_error < 1e-14 && cal.moment_error < 1e-13, "{cal:?}");
        }
    }

    #[test]
    fn monte_carlo_mass_is_exact_and_moments_approximate() {
        let rule = FiberRule::new(4, FiberScheme::MonteCarlo { samples: 20_000, seed: 3 }).unwrap();
        let cal = rule.calibrate(2);
        assert!(cal.mass_error < 1e-12);
        assert!(cal.moment_error < 2e-2);
        assert!(rule.require_calibrated(2, 1e-6).is_err());
    }

    #[test]
    fn rank_one_is_a_point() {
        let rule = FiberRule::new(1, FiberScheme::for_degree(1, 4)).unwrap();
        assert_eq!(rule.nodes().len(), 1);
        assert_eq!(rule.calibrate(3).worst(), 0.0);
    }
}
