use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::chart::Chart;
use super::diff::{self, STENCIL_REACH};
use super::local::LocalForm;
use super::multiindex::{degree, elements, full, merge_sign, wedge_sign, Mask};
use super::quadrature::Quadrature;
use crate::error::{Error, Result};

type C = Complex64;

const ZERO: C = C { re: 0.0, im: 0.0 };

/// Value, holomorphic gradient `∂_a u` and Levi matrix `∂_a∂bar_b u` (row-major)
/// of a real function at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarJet {
    pub value: f64,
    pub del: Vec<C>,
    pub levi: Vec<C>,
}

pub type JetFn = Arc<dyn Fn(&[C]) -> ScalarJet + Send + Sync>;

/// A real function sampled on a chart, with optional analytic derivatives.
///
/// Non-finite samples are flagged singular.
#[derive(Clone)]
pub struct ScalarField {
    chart: Arc<Chart>,
    values: Vec<f64>,
    singular: Vec<bool>,
    jet: Option<JetFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("chart", &self.chart)
            .field("nodes", &self.values.len())
            .field("singular", &self.singular_count())
            .field("analytic", &self.jet.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn from_fn<F>(chart: Arc<Chart>, f: F) -> Self
    where
        F: Fn(&[C]) -> f64 + Sync,
    {
        let n = chart.dim();
        let values: Vec<f64> = (0..chart.node_count())
            .into_par_iter()
            .with_min_len(4096)
            .map_init(
                || vec![ZERO; n],
                |z, node| {
                    chart.coords_into(node, z);
                    f(z)
                },
            )
            .collect();
        Self::from_values(chart, values).expect("length matches by construction")
    }

    pub fn from_values(chart: Arc<Chart>, values: Vec<f64>) -> Result<Self> {
        if values.len() != chart.node_count() {
            return Err(Error::ChartMismatch);
        }
        let singular = values.iter().map(|v| !v.is_finite()).collect();
        Ok(ScalarField {
            chart,
            values,
            singular,
            jet: None,
        })
    }

    /// Field whose values and derivatives come from an analytic jet.
    pub fn with_jet(chart: Arc<Chart>, jet: JetFn) -> Self {
        let j = jet.clone();
        let mut field = Self::from_fn(chart, move |z| j(z).value);
        field.jet = Some(jet);
        field
    }

    pub fn constant(chart: Arc<Chart>, c: f64) -> Self {
        let n = chart.dim();
        Self::with_jet(
            chart,
            Arc::new(move |_| ScalarJet {
                value: c,
                del: vec![ZERO; n],
                levi: vec![ZERO; n * n],
            }),
        )
    }

    /// Marks nodes singular, e.g. those on a declared degeneracy variety.
    pub fn flag_singular(mut self, pred: impl Fn(&[C]) -> bool) -> Self {
        for node in 0..self.values.len() {
            if pred(&self.chart.coords(node)) {
                self.singular[node] = true;
            }
        }
        self
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn is_singular(&self, node: usize) -> bool {
        self.singular[node]
    }

    pub fn singular_count(&self) -> usize {
        self.singular.iter().filter(|s| **s).count()
    }

    pub fn jet(&self) -> Option<&JetFn> {
        self.jet.as_ref()
    }

    /// Drops analytic derivatives so that differentiation uses finite differences.
    pub fn without_jet(mut self) -> Self {
        self.jet = None;
        self
    }
}

/// A `(p,q)`-form sampled on a chart. Only nonzero components are stored.
#[derive(Debug, Clone)]
pub struct FormField {
    chart: Arc<Chart>,
    p: usize,
    q: usize,
    comps: BTreeMap<(Mask, Mask), Vec<C>>,
}

fn check_bidegree(n: usize, p: usize, q: usize) -> Result<()> {
    if p > n || q > n {
        Err(Error::BidegreeOverflow { p, q, n })
    } else {
        Ok(())
    }
}

impl FormField {
    pub fn zeros(chart: Arc<Chart>, p: usize, q: usize) -> Result<Self> {
        check_bidegree(chart.dim(), p, q)?;
        Ok(FormField {
            chart,
            p,
            q,
            comps: BTreeMap::new(),
        })
    }

    pub fn from_scalar(u: &ScalarField) -> Self {
        let mut f = FormField::zeros(u.chart.clone(), 0, 0).expect("(0,0) always fits");
        f.comps
            .insert((0, 0), u.values.iter().map(|&v| C::new(v, 0.0)).collect());
        f
    }

    /// Samples a form given pointwise; terms outside bidegree `(p,q)` are rejected.
    pub fn from_fn<F>(chart: Arc<Chart>, p: usize, q: usize, f: F) -> Result<Self>
    where
        F: Fn(&[C]) -> LocalForm + Sync,
    {
        check_bidegree(chart.dim(), p, q)?;
        let n = chart.dim();
        let locals: Vec<LocalForm> = (0..chart.node_count())
            .into_par_iter()
            .with_min_len(1024)
            .map_init(
                || vec![ZERO; n],
                |z, node| {
                    chart.coords_into(node, z);
                    f(z)
                },
            )
            .collect();
        let mut out = FormField::zeros(chart, p, q)?;
        let len = locals.len();
        for (node, form) in locals.iter().enumerate() {
            for &(i, j, c) in form.terms() {
                if degree(i) != p || degree(j) != q {
                    return Err(Error::WrongBidegree {
                        expected_p: p,
                        expected_q: q,
                        p: degree(i),
                        q: degree(j),
                    });
                }
                out.comps.entry((i, j)).or_insert_with(|| vec![ZERO; len])[node] = c;
            }
        }
        Ok(out)
    }

    /// A form with constant coefficients.
    pub fn constant(chart: Arc<Chart>, form: &LocalForm) -> Result<Self> {
        let (p, q) = form.bidegree().unwrap_or((0, 0));
        let mut out = FormField::zeros(chart, p, q)?;
        let len = out.chart.node_count();
        for &(i, j, c) in form.terms() {
            if degree(i) != p || degree(j) != q {
                return Err(Error::DegreeMismatch("constant form is not homogeneous".into()));
            }
            out.comps.insert((i, j), vec![c; len]);
        }
        Ok(out)
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn bidegree(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn degree(&self) -> usize {
        self.p + self.q
    }

    pub fn components(&self) -> impl Iterator<Item = (Mask, Mask, &[C])> {
        self.comps.iter().map(|(&(i, j), v)| (i, j, v.as_slice()))
    }

    pub fn component(&self, i: Mask, j: Mask) -> Option<&[C]> {
        self.comps.get(&(i, j)).map(|v| v.as_slice())
    }

    pub fn set_component(&mut self, i: Mask, j: Mask, values: Vec<C>) -> Result<()> {
        if degree(i) != self.p || degree(j) != self.q {
            return Err(Error::WrongBidegree {
                expected_p: self.p,
                expected_q: self.q,
                p: degree(i),
                q: degree(j),
            });
        }
        if values.len() != self.chart.node_count() {
            return Err(Error::ChartMismatch);
        }
        self.comps.insert((i, j), values);
        Ok(())
    }

    pub fn local(&self, node: usize) -> LocalForm {
        let mut f = LocalForm::zero();
        for (&(i, j), v) in &self.comps {
            f.add_term(i, j, v[node]);
        }
        f
    }

    fn same_chart(&self, other: &FormField) -> Result<()> {
        if Arc::ptr_eq(&self.chart, &other.chart) || *self.chart == *other.chart {
            Ok(())
        } else {
            Err(Error::ChartMismatch)
        }
    }

    pub fn wedge(&self, other: &FormField) -> Result<FormField> {
        self.same_chart(other)?;
        let n = self.chart.dim();
        check_bidegree(n, self.p + other.p, self.q + other.q)?;
        let mut out = FormField::zeros(self.chart.clone(), self.p + other.p, self.q + other.q)?;
        let len = self.chart.node_count();
        for (&(i1, j1), a) in &self.comps {
            for (&(i2, j2), b) in &other.comps {
                let s = wedge_sign(i1, j1, i2, j2);
                if s == 0.0 {
                    continue;
                }
                let target = out
                    .comps
                    .entry((i1 | i2, j1 | j2))
                    .or_insert_with(|| vec![ZERO; len]);
                target
                    .par_iter_mut()
                    .with_min_len(4096)
                    .zip(a.par_iter().zip(b.par_iter()))
                    .for_each(|(t, (x, y))| *t += x * y * s);
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &FormField) -> Result<FormField> {
        self.same_chart(other)?;
        if self.bidegree() != other.bidegree() {
            return Err(Error::WrongBidegree {
                expected_p: self.p,
                expected_q: self.q,
                p: other.p,
                q: other.q,
            });
        }
        let mut out = self.clone();
        for (&key, b) in &other.comps {
            match out.comps.get_mut(&key) {
                Some(a) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
                None => {
                    out.comps.insert(key, b.clone());
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: C) -> FormField {
        let mut out = self.clone();
        for v in out.comps.values_mut() {
            v.iter_mut().for_each(|x| *x *= c);
        }
        out
    }

    /// `∂a` by finite differences.
    pub fn del(&self) -> Result<FormField> {
        self.differentiate(true)
    }

    /// `∂bar a` by finite differences.
    pub fn dbar(&self) -> Result<FormField> {
        self.differentiate(false)
    }

    fn differentiate(&self, holomorphic: bool) -> Result<FormField> {
        let n = self.chart.dim();
        let (p, q) = if holomorphic {
            (self.p + 1, self.q)
        } else {
            (self.p, self.q + 1)
        };
        let mut out = FormField::zeros(self.chart.clone(), p, q)?;
        let len = self.chart.node_count();
        for (&(i, j), f) in &self.comps {
            for a in 0..n {
                let bit: Mask = 1 << a;
                let (target, sign) = if holomorphic {
                    if i & bit != 0 {
                        continue;
                    }
                    ((i | bit, j), merge_sign(bit, i))
                } else {
                    if j & bit != 0 {
                        continue;
                    }
                    let parity = if self.p % 2 == 0 { 1.0 } else { -1.0 };
                    ((i, j | bit), parity * merge_sign(bit, j))
                };
                let fx = diff::first(&self.chart, f, 2 * a);
                let fy = diff::first(&self.chart, f, 2 * a + 1);
                // ∂_a = (∂_x - i∂_y)/2, ∂bar_a = (∂_x + i∂_y)/2
                let iy = if holomorphic { C::new(0.0, -1.0) } else { C::new(0.0, 1.0) };
                let entry = out.comps.entry(target).or_insert_with(|| vec![ZERO; len]);
                entry
                    .par_iter_mut()
                    .with_min_len(4096)
                    .zip(fx.par_iter().zip(fy.par_iter()))
                    .for_each(|(t, (x, y))| *t += (x + iy * y) * (0.5 * sign));
            }
        }
        Ok(out)
    }

    /// Largest coefficient modulus over all nodes with `keep(node)`.
    pub fn max_abs_where(&self, keep: impl Fn(usize) -> bool + Sync) -> f64 {
        self.comps
            .values()
            .map(|v| {
                v.par_iter()
                    .enumerate()
                    .filter(|(node, _)| keep(*node))
                    .map(|(_, c)| c.norm())
                    .reduce(|| 0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs_where(|_| true)
    }

    /// `∫_region a` for a top-degree form.
    pub fn integrate(&self, quad: &Quadrature) -> Result<C> {
        let n = self.chart.dim();
        if self.bidegree() != (n, n) {
            return Err(Error::WrongBidegree {
                expected_p: n,
                expected_q: n,
                p: self.p,
                q: self.q,
            });
        }
        let top = full(n);
        Ok(match self.comps.get(&(top, top)) {
            Some(f) => top_form_factor(n) * quad.sum(|node| f[node]),
            None => ZERO,
        })
    }

    /// Writes one CSV per stored component: real coordinates then `re,im`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let n = self.chart.dim();
        for (&(i, j), v) in &self.comps {
            let name = format!(
                "dz{}_dzb{}.csv",
                index_label(i),
                index_label(j)
            );
            let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join(name))?);
            let header: Vec<String> = (1..=n).flat_map(|k| [format!("x{k}"), format!("y{k}")]).collect();
            writeln!(out, "{},re,im", header.join(","))?;
            for (node, c) in v.iter().enumerate() {
                let z = self.chart.coords(node);
                let coords: Vec<String> = z.iter().flat_map(|w| [w.re.to_string(), w.im.to_string()]).collect();
                writeln!(out, "{},{},{}", coords.join(","), c.re, c.im)?;
            }
        }
        Ok(())
    }
}

fn index_label(m: Mask) -> String {
    let e = elements(m);
    if e.is_empty() {
        "0".into()
    } else {
        e.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join("")
    }
}

/// `∫ f dz_1∧..∧dz_n∧dzbar_1∧..∧dzbar_n = (-1)^{n(n-1)/2} (-2i)^n ∫ f dλ`.
pub fn top_form_factor(n: usize) -> C {
    let sign = if (n * (n.saturating_sub(1)) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    C::new(0.0, -2.0).powu(n as u32) * sign
}

/// `(i/2π)^k` as a complex number.
pub fn ddc_factor(k: usize) -> C {
    C::new(0.0, 1.0 / (2.0 * std::f64::consts::PI)).powu(k as u32)
}

/// Levi matrix `∂_a∂bar_b u` at every node, by finite differences.
fn levi_fd(u: &ScalarField) -> Result<Vec<Vec<C>>> {
    let chart = &u.chart;
    let n = chart.dim();
    let len = chart.node_count();
    if u.singular.iter().any(|s| *s) {
        let node = u.singular.iter().position(|s| *s).unwrap_or(0);
        return Err(Error::SingularStencil { node });
    }
    let data = &u.values;
    let mut levi = vec![vec![ZERO; len]; n * n];
    for a in 0..n {
        let xx = diff::second(chart, data, 2 * a);
        let yy = diff::second(chart, data, 2 * a + 1);
        levi[a * n + a]
            .par_iter_mut()
            .enumerate()
            .for_each(|(k, t)| *t = C::new(0.25 * (xx[k] + yy[k]), 0.0));
    }
    for a in 0..n {
        let dxa = diff::first(chart, data, 2 * a);
        let dya = diff::first(chart, data, 2 * a + 1);
        for b in (a + 1)..n {
            let xx = diff::first(chart, &dxa, 2 * b);
            let yy = diff::first(chart, &dya, 2 * b + 1);
            let xy = diff::first(chart, &dxa, 2 * b + 1);
            let yx = diff::first(chart, &dya, 2 * b);
            // ∂_a∂bar_b = ¼[(∂xa∂xb + ∂ya∂yb) + i(∂xa∂yb - ∂ya∂xb)]
            let entry: Vec<C> = (0..len)
                .into_par_iter()
                .map(|k| C::new(0.25 * (xx[k] + yy[k]), 0.25 * (xy[k] - yx[k])))
                .collect();
            levi[b * n + a] = entry.iter().map(|c| c.conj()).collect();
            levi[a * n + b] = entry;
        }
    }
    Ok(levi)
}

/// `dd^c u = (i/2π) ∂∂bar u`; analytic derivatives are used when the field carries them.
pub fn ddc(u: &ScalarField) -> Result<FormField> {
    let chart = u.chart.clone();
    let n = chart.dim();
    let len = chart.node_count();
    let levi = match &u.jet {
        Some(jet) => {
            if let Some(node) = u.singular.iter().position(|s| *s) {
                return Err(Error::SingularStencil { node });
            }
            let rows: Vec<Vec<C>> = (0..len)
                .into_par_iter()
                .with_min_len(1024)
                .map_init(
                    || vec![ZERO; n],
                    |z, node| {
                        chart.coords_into(node, z);
                        jet(z).levi
                    },
                )
                .collect();
            let mut levi = vec![vec![ZERO; len]; n * n];
            for (node, m) in rows.iter().enumerate() {
                for a in 0..n {
                    levi[a * n + a][node] = C::new(m[a * n + a].re, 0.0);
                    for b in (a + 1)..n {
                        levi[a * n + b][node] = m[a * n + b];
                        levi[b * n + a][node] = m[a * n + b].conj();
                    }
                }
            }
            levi
        }
        None => levi_fd(u)?,
    };
    let mut out = FormField::zeros(chart, 1, 1)?;
    let factor = ddc_factor(1);
    for a in 0..n {
        for b in 0..n {
            let v: Vec<C> = levi[a * n + b].iter().map(|c| c * factor).collect();
            out.comps.insert((1 << a, 1 << b), v);
        }
    }
    Ok(out)
}

/// The hermitian matrix `M` with `ddc u = (i/2π) sum M_ab dz_a∧dzbar_b` at a node.
pub fn levi_matrix(form: &FormField, node: usize) -> Vec<C> {
    let n = form.chart.dim();
    let inv = ddc_factor(1).inv();
    let mut m = vec![ZERO; n * n];
    for a in 0..n {
        for b in 0..n {
            if let Some(v) = form.component(1 << a, 1 << b) {
                m[a * n + b] = v[node] * inv;
            }
        }
    }
    m
}

/// True if all finite-difference stencils at `node` stay inside the grid interior
/// used for acceptance checks.
pub fn stencil_interior(chart: &Chart, node: usize) -> bool {
    chart.is_interior(node, STENCIL_REACH)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::quadrature::{Region, Rule};
    use std::f64::consts::PI;

    fn chart1(res: usize, r: f64) -> Arc<Chart> {
        Arc::new(Chart::polydisc(1, r, res).unwrap())
    }

    #[test]
    fn ddc_of_modulus_squared() {
        let chart = chart1(16, 1.0);
        let u = ScalarField::from_fn(chart.clone(), |z| z[0].norm_sqr());
        let w = ddc(&u).unwrap();
        for node in 0..chart.node_count() {
            let c = w.component(1, 1).unwrap()[node];
            assert!((c - C::new(0.0, 1.0 / (2.0 * PI))).norm() < 1e-10);
        }
    }

    #[test]
    fn pluriharmonic_has_vanishing_ddc() {
        let chart = chart1(64, 1.0);
        let u = ScalarField::from_fn(chart.clone(), |z| z[0].powu(3).re);
        assert!(ddc(&u).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn unit_disc_constant_form() {
        let chart = chart1(128, 1.0);
        let w = FormField::constant(chart.clone(), &LocalForm::term(1, 1, ddc_factor(1))).unwrap();
        let q = Quadrature::new(
            &chart,
            &Region::Ball {
                center: vec![ZERO],
                radius: 1.0,
            },
            Rule::Trapezoid,
        )
        .unwrap();
        let v = w.integrate(&q).unwrap();
        assert!((v.re - 1.0).abs() < 1e-4 && v.im.abs() < 1e-14);
    }

    #[test]
    fn integrate_rejects_non_top_forms() {
        let chart = chart1(8, 1.0);
        let f = FormField::constant(chart.clone(), &LocalForm::one()).unwrap();
        let q = Quadrature::new(&chart, &Region::Chart, Rule::Trapezoid).unwrap();
        assert!(matches!(f.integrate(&q), Err(Error::WrongBidegree { .. })));
    }

    #[test]
    fn singular_node_without_jet_is_refused() {
        let chart = chart1(9, 1.0);
        let u = ScalarField::from_fn(chart, |z| z[0].norm_sqr().ln());
        assert!(u.singular_count() == 1);
        assert!(matches!(ddc(&u), Err(Error::SingularStencil { .. })));
    }
}
