//! Fourth-order finite differences along the real axes of a chart.

use std::ops::{Add, Mul};

use rayon::prelude::*;

use super::chart::Chart;

const D1_CENTRAL: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const D1_EDGE0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
const D1_EDGE1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];

const D2_CENTRAL: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
const D2_EDGE0: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
const D2_EDGE1: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];

pub trait Sample: Copy + Send + Sync + Default + Add<Output = Self> + Mul<f64, Output = Self> {}
impl<T> Sample for T where T: Copy + Send + Sync + Default + Add<Output = T> + Mul<f64, Output = T> {}

/// Offsets (relative to the node, in grid steps) and weights of the stencil used
/// at index `i` of an axis of length `len`.
fn first_stencil(i: usize, len: usize) -> (isize, &'static [f64], bool) {
    if i == 0 {
        (0, &D1_EDGE0, false)
    } else if i == 1 {
        (-1, &D1_EDGE1, false)
    } else if i == len - 2 {
        (1, &D1_EDGE1, true)
    } else if i == len - 1 {
        (0, &D1_EDGE0, true)
    } else {
        (-2, &D1_CENTRAL, false)
    }
}

fn second_stencil(i: usize, len: usize) -> (isize, &'static [f64], bool) {
    if i == 0 {
        (0, &D2_EDGE0, false)
    } else if i == 1 {
        (-1, &D2_EDGE1, false)
    } else if i == len - 2 {
        (1, &D2_EDGE1, true)
    } else if i == len - 1 {
        (0, &D2_EDGE0, true)
    } else {
        (-2, &D2_CENTRAL, false)
    }
}

/// Applies a stencil; mirrored stencils run backwards from `start`.
#[inline]
fn apply<T: Sample>(data: &[T], node: usize, stride: usize, start: isize, w: &[f64], mirrored: bool) -> T {
    let mut acc = T::default();
    for (k, &wk) in w.iter().enumerate() {
        let off = if mirrored {
            start - k as isize
        } else {
            start + k as isize
        };
        let idx = (node as isize + off * stride as isize) as usize;
        acc = acc + data[idx] * wk;
    }
    acc
}

/// `∂f/∂x_ax` at one node.
pub fn first_at<T: Sample>(chart: &Chart, data: &[T], ax: usize, node: usize) -> T {
    let len = chart.axis_len(ax);
    let i = chart.axis_index(node, ax);
    let (start, w, mirrored) = first_stencil(i, len);
    let sign = if mirrored { -1.0 } else { 1.0 };
    apply(data, node, chart.axis_stride(ax), start, w, mirrored) * (sign / (12.0 * chart.axis_spacing(ax)))
}

/// `∂²f/∂x_ax²` at one node.
pub fn second_at<T: Sample>(chart: &Chart, data: &[T], ax: usize, node: usize) -> T {
    let len = chart.axis_len(ax);
    let i = chart.axis_index(node, ax);
    let (start, w, mirrored) = second_stencil(i, len);
    let h = chart.axis_spacing(ax);
    apply(data, node, chart.axis_stride(ax), start, w, mirrored) * (1.0 / (12.0 * h * h))
}

/// `∂²f/∂x_ax1 ∂x_ax2` at one node for distinct axes, composing first-derivative stencils.
pub fn mixed_at<T: Sample>(chart: &Chart, data: &[T], ax1: usize, ax2: usize, node: usize) -> T {
    let len = chart.axis_len(ax2);
    let i = chart.axis_index(node, ax2);
    let (start, w, mirrored) = first_stencil(i, len);
    let stride = chart.axis_stride(ax2) as isize;
    let sign = if mirrored { -1.0 } else { 1.0 };
    let mut acc = T::default();
    for (k, &wk) in w.iter().enumerate() {
        if wk == 0.0 {
            continue;
        }
        let off = if mirrored { start - k as isize } else { start + k as isize };
        let other = (node as isize + off * stride) as usize;
        acc = acc + first_at(chart, data, ax1, other) * wk;
    }
    acc * (sign / (12.0 * chart.axis_spacing(ax2)))
}

/// `∂f/∂x_ax` on the whole grid.
pub fn first<T: Sample>(chart: &Chart, data: &[T], ax: usize) -> Vec<T> {
    (0..data.len())
        .into_par_iter()
        .with_min_len(4096)
        .map(|node| first_at(chart, data, ax, node))
        .collect()
}

/// `∂²f/∂x_ax²` on the whole grid.
pub fn second<T: Sample>(chart: &Chart, data: &[T], ax: usize) -> Vec<T> {
    (0..data.len())
        .into_par_iter()
        .with_min_len(4096)
        .map(|node| second_at(chart, data, ax, node))
        .collect()
}

/// Largest grid index distance touched by any stencil.
pub const STENCIL_REACH: usize = 4;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencils_are_exact_on_quartics() {
        let chart = Chart::polydisc(1, 1.3, 11).unwrap();
        let f = |x: f64, y: f64| 0.3 * x.powi(4) - x.powi(3) * y + 2.0 * y * y - 1.0;
        let fx = |x: f64, y: f64| 1.2 * x.powi(3) - 3.0 * x * x * y;
        let fyy = |_x: f64, _y: f64| 4.0;
        let data: Vec<f64> = (0..chart.node_count())
            .map(|n| {
                let z = chart.coords(n)[0];
                f(z.re, z.im)
            })
            .collect();
        let dx = first(&chart, &data, 0);
        let dyy = second(&chart, &data, 1);
        for n in 0..chart.node_count() {
            let z = chart.coords(n)[0];
            assert!((dx[n] - fx(z.re, z.im)).abs() < 1e-11, "node {n}");
            assert!((dyy[n] - fyy(z.re, z.im)).abs() < 1e-9, "node {n}");
        }
    }

    #[test]
    fn mixed_stencil_exact_on_products() {
        let chart = Chart::polydisc(2, 1.0, 8).unwrap();
        let data: Vec<f64> = (0..chart.node_count())
            .map(|n| {
                let z = chart.coords(n);
                z[0].re.powi(3) * z[1].im * z[1].im
            })
            .collect();
        for n in (0..chart.node_count()).step_by(37) {
            let z = chart.coords(n);
            let exact = 3.0 * z[0].re * z[0].re * 2.0 * z[1].im;
            assert!((mixed_at(&chart, &data, 0, 3, n) - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn second_stencil_exact_on_quintic_rows_away_from_edges() {
        let chart = Chart::polydisc(1, 1.0, 12).unwrap();
        let data: Vec<f64> = (0..chart.node_count())
            .map(|n| chart.coords(n)[0].re.powi(3))
            .collect();
        let d = second(&chart, &data, 0);
        for n in 0..chart.node_count() {
            let x = chart.coords(n)[0].re;
            assert!((d[n] - 6.0 * x).abs() < 1e-9);
        }
    }
}
