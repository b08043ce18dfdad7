use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radial mollifier shape on the unit ball of `R^{2n}`, scaled to radius `ε` on use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Kernel {
    /// `exp(1 / (t² - 1))` for `t < 1`.
    Bump,
    /// `exp(-t² / (2 w²))` cut off at `t = 1` and renormalized.
    TruncatedGaussian { width: f64 },
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Bump
    }
}

impl Kernel {
    pub fn gaussian() -> Self {
        Kernel::TruncatedGaussian { width: 0.4 }
    }

    pub fn name(&self) -> String {
        match self {
            Kernel::Bump => "bump".into(),
            Kernel::TruncatedGaussian { width } => format!("truncated-gaussian({width})"),
        }
    }

    /// Unnormalized profile at `t = |x| / ε`.
    pub fn profile(&self, t: f64) -> f64 {
        if !(0.0..1.0).contains(&t) {
            return 0.0;
        }
        match self {
            Kernel::Bump => (1.0 / (t * t - 1.0)).exp(),
            Kernel::TruncatedGaussian { width } => (-t * t / (2.0 * width * width)).exp(),
        }
    }
}

pub(crate) fn gauss_legendre(p: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; p];
    let mut w = vec![0.0; p];
    let legendre = |t: f64| {
        let (mut p0, mut p1) = (1.0, t);
        for k in 2..=p {
            let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        (p1, p0)
    };
    for i in 0..p {
        let mut t = (PI * (i as f64 + 0.75) / (p as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (pn, pm) = legendre(t);
            let dt = pn / (p as f64 * (t * pn - pm) / (t * t - 1.0));
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (pn, pm) = legendre(t);
        let dp = p as f64 * (t * pn - pm) / (t * t - 1.0);
        x[i] = 0.5 * (1.0 - t);
        w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Area of the unit sphere `S^{2n-1}`.
fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powi(n as i32) / factorial(n - 1)
}

/// A kernel normalized on `C^n` with its radial moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedKernel {
    pub kernel: Kernel,
    pub dim: usize,
    /// Constant `c` with `∫ c k(|x|) dλ(x) = 1` on the unit ball.
    pub normalization: f64,
    /// `m_j = E|x|^{2j}` for the unit-radius kernel.
    pub moments: Vec<f64>,
    /// `|mass - 1|` measured with an independent radial rule.
    pub mass_error: f64,
}

const RADIAL_NODES: usize = 160;
const MAX_MOMENT: usize = 24;

fn radial_integral(kernel: &Kernel, dim: usize, power: usize, nodes: usize) -> f64 {
    // substitution t = 1 - (1 - u)^2 clusters nodes near the flat edge of the bump
    let (x, w) = gauss_legendre(nodes);
    x.iter()
        .zip(&w)
        .map(|(&u, &wu)| {
            let t = 1.0 - (1.0 - u) * (1.0 - u);
            let dt = 2.0 * (1.0 - u);
            wu * dt * kernel.profile(t) * t.powi((2 * dim - 1 + power) as i32)
        })
        .sum()
}

impl CalibratedKernel {
    pub fn new(kernel: Kernel, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("kernel dimension must be positive".into()));
        }
        if let Kernel::TruncatedGaussian { width } = kernel {
            if !(width > 0.0) {
                return Err(Error::Config("gaussian width must be positive".into()));
            }
        }
        let base = radial_integral(&kernel, dim, 0, RADIAL_NODES);
        let normalization = 1.0 / (sphere_area(dim) * base);
        let moments = (0..=MAX_MOMENT)
            .map(|j| radial_integral(&kernel, dim, 2 * j, RADIAL_NODES) / base)
            .collect();
        let check = radial_integral(&kernel, dim, 0, 2 * RADIAL_NODES + 7) * sphere_area(dim) * normalization;
        Ok(CalibratedKernel {
            kernel,
            dim,
            normalization,
            moments,
            mass_error: (check - 1.0).abs(),
        })
    }

    /// Density of the radius-`ε` kernel at `|x| = rho`.
    pub fn density(&self, rho: f64, eps: f64) -> f64 {
        self.normalization * self.kernel.profile(rho / eps) / eps.powi(2 * self.dim as i32)
    }

    /// `E|x|^{2j}` for the radius-`ε` kernel.
    pub fn moment(&self, j: usize, eps: f64) -> Result<f64> {
        self.moments
            .get(j)
            .map(|m| m * eps.powi(2 * j as i32))
            .ok_or(Error::DegreeOverflow { degree: j, max: MAX_MOMENT })
    }

    /// Fails unless the mass is 1 within `tolerance`.
    pub fn require_calibrated(&self, tolerance: f64) -> Result<()> {
        if self.mass_error > tolerance {
            Err(Error::NotCalibrated {
                error: self.mass_error,
                tolerance,
            })
        } else {
            Ok(())
        }
    }

    /// Radial nodes `t_i` and probability weights of the radial law of `|x|` (unit radius).
    pub fn radial_rule(&self, nodes: usize) -> (Vec<f64>, Vec<f64>) {
        let (x, w) = gauss_legendre(nodes);
        let mut ts = Vec::with_capacity(nodes);
        let mut ws = Vec::with_capacity(nodes);
        for (&u, &wu) in x.iter().zip(&w) {
            let t = 1.0 - (1.0 - u) * (1.0 - u);
            let dt = 2.0 * (1.0 - u);
            ts.push(t);
            ws.push(wu * dt * self.kernel.profile(t) * t.powi((2 * self.dim - 1) as i32));
        }
        let total: f64 = ws.iter().sum();
        ws.iter_mut().for_each(|w| *w /= total);
        (ts, ws)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_is_calibrated() {
        for k in [Kernel::Bump, Kernel::gaussian()] {
            for n in 1..=3 {
                let c = CalibratedKernel::new(k, n).unwrap();
                assert!(c.mass_error < 1e-10, "{k:?} n={n}: {}", c.mass_error);
                assert!(c.require_calibrated(1e-10).is_ok());
            }
        }
    }

    #[test]
    fn mass_on_a_cartesian_grid() {
        // independent oracle: 2D midpoint sum of the normalized bump
        let c = CalibratedKernel::new(Kernel::Bump, 1).unwrap();
        let m = 800;
        let h = 2.0 / m as f64;
        let mut total = 0.0;
        for i in 0..m {
            for j in 0..m {
                let x = -1.0 + (i as f64 + 0.5) * h;
                let y = -1.0 + (j as f64 + 0.5) * h;
                total += c.density((x * x + y * y).sqrt(), 1.0) * h * h;
            }
        }
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn moments_of_uniform_profile_limit() {
        // wide gaussian approaches the uniform law on the disc: E|x|^2 -> 1/2
        let c = CalibratedKernel::new(Kernel::TruncatedGaussian { width: 1e3 }, 1).unwrap();
        assert!((c.moments[1] - 0.5).abs() < 1e-6);
        assert!((c.moments[2] - 1.0 / 3.0).abs() < 1e-6);
        assert_eq!(c.moments[0], 1.0);
        assert!(c.moment(1, 0.1).unwrap() < 0.01);
    }

    #[test]
    fn radial_rule_reproduces_moments() {
        let c = CalibratedKernel::new(Kernel::Bump, 2).unwrap();
        let (t, w) = c.radial_rule(40);
        let m2: f64 = t.iter().zip(&w).map(|(t, w)| w * t.powi(4)).sum();
        assert!((m2 - c.moments[2]).abs() < 1e-10);
    }
}
