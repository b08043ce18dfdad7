use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chart::Chart;
use crate::error::{Error, Result};

type C = Complex64;

/// Integration domain inside a chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Region {
    /// The whole chart.
    Chart,
    /// Nodes at least `margin` cells away from every edge.
    Interior { margin: usize },
    /// Real coordinate box, bounds listed per real axis `x_1, y_1, x_2, ...`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Euclidean ball in `C^n`.
    Ball { center: Vec<C>, radius: f64 },
    /// Product of discs.
    Polydisc { center: Vec<C>, radii: Vec<f64> },
    /// `inner <= |z - center| <= outer`.
    Annulus { center: Vec<C>, inner: f64, outer: f64 },
}

impl Region {
    /// Whether a point lies in the closed region (`Interior` is judged on the grid).
    pub fn contains(&self, chart: &Chart, z: &[C]) -> bool {
        let dist = |center: &[C]| -> f64 {
            z.iter().zip(center).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
        };
        match self {
            Region::Chart => chart.contains(z),
            Region::Interior { margin } => {
                chart.contains(z)
                    && (0..chart.axes()).all(|ax| {
                        let j = ax / 2;
                        let x = if ax % 2 == 0 { z[j].re } else { z[j].im };
                        let lo = chart.axis_coord(ax, 0);
                        let hi = chart.axis_coord(ax, chart.axis_len(ax) - 1);
                        let m = *margin as f64 * chart.axis_spacing(ax);
                        x >= lo + m - 1e-12 && x <= hi - m + 1e-12
                    })
            }
            Region::Box { lo, hi } => (0..lo.len()).all(|ax| {
                let j = ax / 2;
                let x = if ax % 2 == 0 { z[j].re } else { z[j].im };
                x >= lo[ax] && x <= hi[ax]
            }),
            Region::Ball { center, radius } => dist(center) <= *radius,
            Region::Polydisc { center, radii } => z
                .iter()
                .zip(center)
                .zip(radii)
                .all(|((a, b), r)| (a - b).norm() <= *r),
            Region::Annulus { center, inner, outer } => {
                let d = dist(center);
                d >= *inner && d <= *outer
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    #[default]
    Trapezoid,
    Simpson,
}

/// Summation block for the fixed pairwise tree.
const BLOCK: usize = 64;
const CHUNK: usize = 1 << 14;

/// Pairwise sum with a fixed tree shape.
pub fn pairwise_sum(values: &[C]) -> C {
    if values.len() <= BLOCK {
        return values.iter().fold(C::new(0.0, 0.0), |a, b| a + b);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Per-node weights of a region, stored sparsely.
///
/// Weights already include the cell volume, so `sum w_i f(x_i)` approximates
/// `∫ f dλ` over the region in real Lebesgue measure.
#[derive(Debug, Clone)]
pub struct Quadrature {
    nodes: Vec<u32>,
    weights: Vec<f64>,
}

impl Quadrature {
    pub fn new(chart: &Chart, region: &Region, rule: Rule) -> Result<Self> {
        if chart.node_count() > u32::MAX as usize {
            return Err(Error::InvalidChart("grid too large".into()));
        }
        match region {
            Region::Chart => Self::rectangular(chart, &full_bounds(chart), rule),
            Region::Interior { margin } => {
                let axes = chart.axes();
                let mut bounds = Vec::with_capacity(axes);
                for ax in 0..axes {
                    let len = chart.axis_len(ax);
                    if 2 * margin + 2 > len {
                        return Err(Error::InvalidChart("margin leaves no interior".into()));
                    }
                    bounds.push((*margin, len - 1 - margin));
                }
                Self::rectangular(chart, &bounds, rule)
            }
            Region::Box { lo, hi } => {
                if lo.len() != chart.axes() || hi.len() != chart.axes() {
                    return Err(Error::InvalidChart("box bounds must list every real axis".into()));
                }
                let mut bounds = Vec::new();
                for ax in 0..chart.axes() {
                    let h = chart.axis_spacing(ax);
                    let x0 = chart.axis_coord(ax, 0);
                    let len = chart.axis_len(ax);
                    let a = ((lo[ax] - x0) / h - 1e-9).ceil().max(0.0) as usize;
                    let b = (((hi[ax] - x0) / h + 1e-9).floor().max(0.0) as usize).min(len - 1);
                    if b <= a {
                        return Err(Error::InvalidChart("box contains no grid cell".into()));
                    }
                    bounds.push((a, b));
                }
                Self::rectangular(chart, &bounds, rule)
            }
            _ => Self::curved(chart, region),
        }
    }

    fn rectangular(chart: &Chart, bounds: &[(usize, usize)], rule: Rule) -> Result<Self> {
        let tables: Vec<Vec<f64>> = bounds
            .iter()
            .enumerate()
            .map(|(ax, &(a, b))| weights_1d(b - a, chart.axis_spacing(ax), rule))
            .collect();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let axes = chart.axes();
        let mut idx: Vec<usize> = bounds.iter().map(|b| b.0).collect();
        loop {
            let w: f64 = (0..axes).map(|ax| tables[ax][idx[ax] - bounds[ax].0]).product();
            nodes.push(chart.node_index(&idx) as u32);
            weights.push(w);
            let mut ax = axes;
            loop {
                if ax == 0 {
                    return Ok(Quadrature { nodes, weights });
                }
                ax -= 1;
                if idx[ax] < bounds[ax].1 {
                    idx[ax] += 1;
                    break;
                }
                idx[ax] = bounds[ax].0;
            }
        }
    }

    fn curved(chart: &Chart, region: &Region) -> Result<Self> {
        let n = chart.dim();
        let center = match region {
            Region::Ball { center, .. } | Region::Polydisc { center, .. } | Region::Annulus { center, .. } => center,
            _ => unreachable!(),
        };
        if center.len() != n {
            return Err(Error::InvalidChart("region center has wrong dimension".into()));
        }
        let sub = match n {
            1 => 32,
            2 => 6,
            _ => 3,
        };
        let candidates: Vec<(u32, f64)> = (0..chart.node_count())
            .into_par_iter()
            .with_min_len(4096)
            .filter_map(|node| {
                let cell = cell_box(chart, node);
                let frac = match region {
                    Region::Ball { radius, .. } => ball_coverage(&cell, center, *radius, sub),
                    Region::Annulus { inner, outer, .. } => {
                        ball_coverage(&cell, center, *outer, sub) - ball_coverage(&cell, center, *inner, sub)
                    }
                    Region::Polydisc { radii, .. } => (0..n)
                        .map(|j| ball_coverage(&cell[2 * j..2 * j + 2], &center[j..j + 1], radii[j], 32))
                        .product(),
                    _ => unreachable!(),
                };
                let full: f64 = cell.iter().map(|(a, b)| b - a).product();
                let w = frac * full;
                (w > 0.0).then_some((node as u32, w))
            })
            .collect();
        let (nodes, weights) = candidates.into_iter().unzip();
        Ok(Quadrature { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().zip(&self.weights).map(|(&n, &w)| (n as usize, w))
    }

    /// The same rule with only the nodes satisfying `keep`.
    pub fn restricted(&self, keep: impl Fn(usize) -> bool) -> Quadrature {
        let (nodes, weights) = self
            .nodes
            .iter()
            .zip(&self.weights)
            .filter(|(&n, _)| keep(n as usize))
            .map(|(&n, &w)| (n, w))
            .unzip();
        Quadrature { nodes, weights }
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `sum_i w_i f(node_i)` with a deterministic reduction order.
    pub fn sum<F>(&self, f: F) -> C
    where
        F: Fn(usize) -> C + Sync,
    {
        let partial: Vec<C> = self
            .nodes
            .par_chunks(CHUNK)
            .zip(self.weights.par_chunks(CHUNK))
            .map(|(ns, ws)| {
                let vals: Vec<C> = ns.iter().zip(ws).map(|(&n, &w)| f(n as usize) * w).collect();
                pairwise_sum(&vals)
            })
            .collect();
        pairwise_sum(&partial)
    }

    /// Like [`Quadrature::sum`] for several integrands evaluated together.
    pub fn sum_many<F>(&self, count: usize, f: F) -> Vec<C>
    where
        F: Fn(usize, &mut [C]) + Sync,
    {
        let partial: Vec<Vec<C>> = self
            .nodes
            .par_chunks(CHUNK)
            .zip(self.weights.par_chunks(CHUNK))
            .map(|(ns, ws)| {
                let mut cols = vec![Vec::with_capacity(ns.len()); count];
                let mut buf = vec![C::new(0.0, 0.0); count];
                for (&n, &w) in ns.iter().zip(ws) {
                    buf.iter_mut().for_each(|b| *b = C::new(0.0, 0.0));
                    f(n as usize, &mut buf);
                    for (col, v) in cols.iter_mut().zip(&buf) {
                        col.push(v * w);
                    }
                }
                cols.iter().map(|c| pairwise_sum(c)).collect()
            })
            .collect();
        (0..count)
            .map(|k| {
                let col: Vec<C> = partial.iter().map(|p| p[k]).collect();
                pairwise_sum(&col)
            })
            .collect()
    }
}

fn full_bounds(chart: &Chart) -> Vec<(usize, usize)> {
    (0..chart.axes()).map(|ax| (0, chart.axis_len(ax) - 1)).collect()
}

/// Composite weights on `intervals + 1` equispaced nodes.
fn weights_1d(intervals: usize, h: f64, rule: Rule) -> Vec<f64> {
    let mut w = vec![0.0; intervals + 1];
    match rule {
        Rule::Trapezoid => {
            for k in 0..intervals {
                w[k] += h / 2.0;
                w[k + 1] += h / 2.0;
            }
        }
        Rule::Simpson => {
            let (simpson, tail) = if intervals % 2 == 0 || intervals < 3 {
                (intervals - intervals % 2, intervals % 2)
            } else {
                (intervals - 3, 3)
            };
            for k in (0..simpson).step_by(2) {
                w[k] += h / 3.0;
                w[k + 1] += 4.0 * h / 3.0;
                w[k + 2] += h / 3.0;
            }
            match tail {
                3 => {
                    let s = simpson;
                    for (o, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
                        w[s + o] += 3.0 * h / 8.0 * c;
                    }
                }
                1 => {
                    w[intervals - 1] += h / 2.0;
                    w[intervals] += h / 2.0;
                }
                _ => {}
            }
        }
    }
    w
}

/// The dual cell of a node clipped to the chart, as intervals per real axis.
fn cell_box(chart: &Chart, node: usize) -> Vec<(f64, f64)> {
    (0..chart.axes())
        .map(|ax| {
            let i = chart.axis_index(node, ax);
            let x = chart.axis_coord(ax, i);
            let h = chart.axis_spacing(ax);
            let lo = if i == 0 { x } else { x - h / 2.0 };
            let hi = if i + 1 == chart.axis_len(ax) { x } else { x + h / 2.0 };
            (lo, hi)
        })
        .collect()
}

/// Fraction of an axis-aligned box inside a Euclidean ball, by midpoint supersampling
/// of cells that straddle the sphere.
fn ball_coverage(cell: &[(f64, f64)], center: &[C], radius: f64, sub: usize) -> f64 {
    let c = |ax: usize| {
        if ax % 2 == 0 {
            center[ax / 2].re
        } else {
            center[ax / 2].im
        }
    };
    let mut near = 0.0;
    let mut far = 0.0;
    for (ax, &(a, b)) in cell.iter().enumerate() {
        let x = c(ax);
        let dn = if x < a {
            a - x
        } else if x > b {
            x - b
        } else {
            0.0
        };
        let df = (x - a).abs().max((x - b).abs());
        near += dn * dn;
        far += df * df;
    }
    let r2 = radius * radius;
    if far <= r2 {
        return 1.0;
    }
    if near >= r2 {
        return 0.0;
    }
    let dims = cell.len();
    let total = sub.pow(dims as u32);
    let mut inside = 0usize;
    let mut idx = vec![0usize; dims];
    for _ in 0..total {
        let mut d2 = 0.0;
        for ax in 0..dims {
            let (a, b) = cell[ax];
            let x = a + (b - a) * (idx[ax] as f64 + 0.5) / sub as f64;
            d2 += (x - c(ax)).powi(2);
        }
        if d2 <= r2 {
            inside += 1;
        }
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < sub {
                break;
            }
            *slot = 0;
        }
    }
    inside as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_and_trapezoid_weights_sum_to_length() {
        for intervals in [2, 3, 5, 8, 9] {
            for rule in [Rule::Trapezoid, Rule::Simpson] {
                let w = weights_1d(intervals, 0.5, rule);
                assert!((w.iter().sum::<f64>() - 0.5 * intervals as f64).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn simpson_integrates_cubics() {
        let chart = Chart::polydisc(1, 1.0, 10).unwrap();
        let q = Quadrature::new(&chart, &Region::Chart, Rule::Simpson).unwrap();
        let v = q.sum(|n| {
            let z = chart.coords(n)[0];
            C::new(z.re.powi(3) + z.re * z.re * z.im * z.im, 0.0)
        });
        assert!((v.re - 4.0 / 9.0).abs() < 1e-13);
    }

    #[test]
    fn disc_area() {
        let chart = Chart::polydisc(1, 1.0, 64).unwrap();
        let q = Quadrature::new(
            &chart,
            &Region::Ball {
                center: vec![C::new(0.0, 0.0)],
                radius: 0.8,
            },
            Rule::Trapezoid,
        )
        .unwrap();
        let area = std::f64::consts::PI * 0.64;
        assert!((q.total_weight() - area).abs() < 1e-4 * area);
    }

    #[test]
    fn pairwise_sum_is_order_fixed() {
        let vals: Vec<C> = (0..1000).map(|k| C::new(1.0 / (k + 1) as f64, 0.0)).collect();
        assert_eq!(pairwise_sum(&vals), pairwise_sum(&vals.clone()));
    }
}
