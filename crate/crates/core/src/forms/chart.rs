use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible number of grid points per real axis.
pub const MIN_RESOLUTION: usize = 8;

/// A polydisc chart in `C^n` sampled on a uniform rectangular grid.
///
/// Complex coordinate `z_j` spans the square `center_j + [-radius_j, radius_j]^2`
/// with `resolution_j` points on each of its two real axes. Real axes are ordered
/// `x_1, y_1, x_2, y_2, ...`; the last axis varies fastest in the node index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChartSpec", into = "ChartSpec")]
pub struct Chart {
    center: Vec<Complex64>,
    radius: Vec<f64>,
    resolution: Vec<usize>,
    strides: Vec<usize>,
}

/// Serialized form of a [`Chart`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartSpec {
    pub center: Vec<[f64; 2]>,
    pub radius: Vec<f64>,
    pub resolution: Vec<usize>,
}

impl TryFrom<ChartSpec> for Chart {
    type Error = Error;

    fn try_from(s: ChartSpec) -> Result<Chart> {
        Chart::new(
            s.center.iter().map(|c| Complex64::new(c[0], c[1])).collect(),
            s.radius,
            s.resolution,
        )
    }
}

impl From<Chart> for ChartSpec {
    fn from(c: Chart) -> ChartSpec {
        ChartSpec {
            center: c.center.iter().map(|z| [z.re, z.im]).collect(),
            radius: c.radius,
            resolution: c.resolution,
        }
    }
}

impl Chart {
    pub fn new(center: Vec<Complex64>, radius: Vec<f64>, resolution: Vec<usize>) -> Result<Self> {
        let n = center.len();
        if n == 0 || radius.len() != n || resolution.len() != n {
            return Err(Error::InvalidChart(
                "center, radius and resolution must have the same positive length".into(),
            ));
        }
        if n > 6 {
            return Err(Error::InvalidChart("dimension above 6 is not supported".into()));
        }
        if radius.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidChart("radii must be positive".into()));
        }
        if resolution.iter().any(|&m| m < MIN_RESOLUTION) {
            return Err(Error::InvalidChart(format!(
                "resolution must be at least {MIN_RESOLUTION} per axis"
            )));
        }
        let mut chart = Chart {
            center,
            radius,
            resolution,
            strides: Vec::new(),
        };
        chart.strides = chart.compute_strides();
        Ok(chart)
    }

    /// Chart centred at the origin with equal radius and resolution on every axis.
    pub fn polydisc(n: usize, radius: f64, resolution: usize) -> Result<Self> {
        Chart::new(
            vec![Complex64::new(0.0, 0.0); n],
            vec![radius; n],
            vec![resolution; n],
        )
    }

    fn compute_strides(&self) -> Vec<usize> {
        let axes = 2 * self.dim();
        let mut strides = vec![1usize; axes];
        for ax in (0..axes.saturating_sub(1)).rev() {
            strides[ax] = strides[ax + 1] * self.axis_len(ax + 1);
        }
        strides
    }

    fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[Complex64] {
        &self.center
    }

    pub fn radius(&self) -> &[f64] {
        &self.radius
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn axes(&self) -> usize {
        2 * self.dim()
    }

    pub fn axis_len(&self, ax: usize) -> usize {
        self.resolution[ax / 2]
    }

    pub fn axis_stride(&self, ax: usize) -> usize {
        self.strides()[ax]
    }

    /// Grid spacing of complex coordinate `j` (shared by its two real axes).
    pub fn spacing(&self, j: usize) -> f64 {
        2.0 * self.radius[j] / (self.resolution[j] - 1) as f64
    }

    pub fn axis_spacing(&self, ax: usize) -> f64 {
        self.spacing(ax / 2)
    }

    pub fn node_count(&self) -> usize {
        (0..self.axes()).map(|ax| self.axis_len(ax)).product()
    }

    /// Real coordinate of grid index `i` along real axis `ax`.
    pub fn axis_coord(&self, ax: usize, i: usize) -> f64 {
        let j = ax / 2;
        let c = if ax % 2 == 0 {
            self.center[j].re
        } else {
            self.center[j].im
        };
        c - self.radius[j] + i as f64 * self.spacing(j)
    }

    pub fn axis_index(&self, node: usize, ax: usize) -> usize {
        (node / self.axis_stride(ax)) % self.axis_len(ax)
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        (0..self.axes()).map(|ax| self.axis_index(node, ax)).collect()
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .enumerate()
            .map(|(ax, &i)| i * self.axis_stride(ax))
            .sum()
    }

    pub fn coords_into(&self, node: usize, out: &mut [Complex64]) {
        for (j, z) in out.iter_mut().enumerate().take(self.dim()) {
            let x = self.axis_coord(2 * j, self.axis_index(node, 2 * j));
            let y = self.axis_coord(2 * j + 1, self.axis_index(node, 2 * j + 1));
            *z = Complex64::new(x, y);
        }
    }

    pub fn coords(&self, node: usize) -> Vec<Complex64> {
        let mut z = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.coords_into(node, &mut z);
        z
    }

    /// True if the node lies at least `margin` grid cells from every chart edge.
    pub fn is_interior(&self, node: usize, margin: usize) -> bool {
        (0..self.axes()).all(|ax| {
            let i = self.axis_index(node, ax);
            i >= margin && i + margin < self.axis_len(ax)
        })
    }

    /// True if `z` lies in the closed chart box.
    pub fn contains(&self, z: &[Complex64]) -> bool {
        z.iter().enumerate().all(|(j, w)| {
            let d = w - self.center[j];
            d.re.abs() <= self.radius[j] * (1.0 + 1e-12) && d.im.abs() <= self.radius[j] * (1.0 + 1e-12)
        })
    }

    /// Volume of one grid cell in the real Lebesgue measure of `C^n = R^{2n}`.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.spacing(j).powi(2)).product()
    }

    /// Chart for the coordinates listed in `indices`, in that order.
    pub fn factor(&self, indices: &[usize]) -> Result<Chart> {
        for &i in indices {
            if i >= self.dim() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    dim: self.dim(),
                });
            }
        }
        Chart::new(
            indices.iter().map(|&i| self.center[i]).collect(),
            indices.iter().map(|&i| self.radius[i]).collect(),
            indices.iter().map(|&i| self.resolution[i]).collect(),
        )
    }

    /// Same geometry at a different resolution.
    pub fn with_resolution(&self, resolution: Vec<usize>) -> Result<Chart> {
        Chart::new(self.center.clone(), self.radius.clone(), resolution)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trips() {
        let chart = Chart::new(
            vec![Complex64::new(0.5, -1.0), Complex64::new(0.0, 0.0)],
            vec![1.0, 2.0],
            vec![8, 9],
        )
        .unwrap();
        assert_eq!(chart.node_count(), 8 * 8 * 9 * 9);
        for node in [0, 17, 400, chart.node_count() - 1] {
            assert_eq!(chart.node_index(&chart.multi_index(node)), node);
        }
        assert!((chart.spacing(0) - 2.0 / 7.0).abs() < 1e-15);
        let z = chart.coords(0);
        assert!((z[0] - Complex64::new(-0.5, -2.0)).norm() < 1e-15);
        assert!((z[1] - Complex64::new(-2.0, -2.0)).norm() < 1e-15);
    }

    #[test]
    fn serde_round_trip_rebuilds_strides() {
        let chart = Chart::polydisc(2, 1.5, 10).unwrap();
        let text = serde_json::to_string(&chart).unwrap();
        let back: Chart = serde_json::from_str(&text).unwrap();
        assert_eq!(back, chart);
        assert!(serde_json::from_str::<Chart>(r#"{"center":[[0,0]],"radius":[1],"resolution":[3]}"#).is_err());
    }

    #[test]
    fn rejects_coarse_grids() {
        assert!(Chart::polydisc(1, 1.0, 7).is_err());
        assert!(Chart::polydisc(1, -1.0, 16).is_err());
        assert!(Chart::polydisc(2, 1.0, 8).is_ok());
    }
}
