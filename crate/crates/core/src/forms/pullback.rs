use std::sync::Arc;

use num_complex::Complex64;

use super::chart::Chart;
use super::field::{ScalarField, ScalarJet};
use crate::error::{Error, Result};

type C = Complex64;

/// Pulls a field on the factor `C^{|I|}` back along the coordinate projection
/// `z ↦ (z_i)_{i ∈ I}` onto `chart`.
///
/// The factor chart must agree with `chart` on the selected coordinates.
pub fn coordinate_projection_pullback(
    g: &ScalarField,
    indices: &[usize],
    chart: &Arc<Chart>,
) -> Result<ScalarField> {
    let n = chart.dim();
    for &i in indices {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, dim: n });
        }
    }
    let factor = chart.factor(indices)?;
    if factor != **g.chart() {
        return Err(Error::ChartMismatch);
    }
    let src = g.chart().clone();
    let sub: Vec<usize> = indices.to_vec();
    if let Some(jet) = g.jet().cloned() {
        let sub = sub.clone();
        let lifted = Arc::new(move |z: &[C]| {
            let w: Vec<C> = sub.iter().map(|&i| z[i]).collect();
            let j = jet(&w);
            let mut del = vec![C::new(0.0, 0.0); n];
            let mut levi = vec![C::new(0.0, 0.0); n * n];
            let k = sub.len();
            for (a, &ia) in sub.iter().enumerate() {
                del[ia] = j.del[a];
                for (b, &ib) in sub.iter().enumerate() {
                    levi[ia * n + ib] = j.levi[a * k + b];
                }
            }
            ScalarJet {
                value: j.value,
                del,
                levi,
            }
        });
        return Ok(ScalarField::with_jet(chart.clone(), lifted));
    }
    let values: Vec<f64> = (0..chart.node_count())
        .map(|node| {
            let mut idx = Vec::with_capacity(2 * sub.len());
            for &i in &sub {
                idx.push(chart.axis_index(node, 2 * i));
                idx.push(chart.axis_index(node, 2 * i + 1));
            }
            g.value(src.node_index(&idx))
        })
        .collect();
    ScalarField::from_values(chart.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pullback_is_constant_along_complement() {
        let chart = Arc::new(Chart::polydisc(2, 1.0, 9).unwrap());
        let factor = Arc::new(chart.factor(&[0]).unwrap());
        let g = ScalarField::from_fn(factor, |z| z[0].re + 2.0 * z[0].im);
        let u = coordinate_projection_pullback(&g, &[0], &chart).unwrap();
        for node in 0..chart.node_count() {
            let z = chart.coords(node);
            assert!((u.value(node) - (z[0].re + 2.0 * z[0].im)).abs() < 1e-14);
        }
        assert!(matches!(
            coordinate_projection_pullback(&g, &[2], &chart),
            Err(Error::IndexOutOfRange { .. })
        ));
    }
}
