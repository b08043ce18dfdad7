use std::sync::Arc;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::multiindex::{degree, elements, subsets, Mask};
use crate::forms::{Chart, FormField, LocalForm, Quadrature, Rule};
use crate::linalg::det_in_place;

type C = Complex64;

fn flat(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

fn flat_prime(x: f64) -> f64 {
    if x > 0.0 {
        flat(x) / (x * x)
    } else {
        0.0
    }
}

/// Smooth step, 1 for `t <= 0` and 0 for `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    let (a, b) = (flat(1.0 - t), flat(t));
    a / (a + b)
}

pub fn smooth_step_derivative(t: f64) -> f64 {
    let (a, b) = (flat(1.0 - t), flat(t));
    let (da, db) = (-flat_prime(1.0 - t), flat_prime(t));
    (da * b - a * db) / ((a + b) * (a + b))
}

/// `1` on `|x| <= (1 - δ) R`, `0` on `|x| >= R`.
pub fn radial_cutoff(dist: f64, radius: f64, delta: f64) -> f64 {
    smooth_step((dist - (1.0 - delta) * radius) / (delta * radius))
}

/// How the two cut-off factors are combined; both give the same values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Composition {
    #[default]
    Product,
    /// `exp(log χ_1 + log χ_2)`.
    Logarithmic,
}

/// Shape parameters of a bump form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub point: Vec<C>,
    pub k_plus_q: usize,
    /// `B'`: radius of the cut-off in the `I` coordinates.
    pub scale: f64,
    /// `B''`: radius of the cut-off in the complementary coordinates.
    pub complement_scale: f64,
    /// Relative width of the transition layer.
    pub delta: f64,
}

impl BumpSpec {
    pub fn new(point: Vec<C>, k_plus_q: usize, scale: f64) -> Self {
        BumpSpec {
            point,
            k_plus_q,
            scale,
            complement_scale: scale,
            delta: 0.5,
        }
    }
}

/// A strongly positive `(p, p)` test form, `p = n - k - q`:
/// `sum_{|I| = p} χ_I(z_I) χ_{I^c}(z_{I^c}) ∧_{i∈I} (i dz_i ∧ dzbar_i)`.
#[derive(Debug, Clone)]
pub struct BumpForm {
    pub spec: BumpSpec,
    pub field: FormField,
    /// `β >= constant · ω^p` near the point, with `ω = i sum dz_a ∧ dzbar_a`.
    pub constant: f64,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// `i^p (-1)^{p(p-1)/2}`: coefficient of `dz_I ∧ dzbar_I` in `∧_{i∈I} i dz_i ∧ dzbar_i`.
pub fn volume_coefficient(p: usize) -> C {
    let sign = if (p * p.saturating_sub(1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    C::new(0.0, 1.0).powu(p as u32) * sign
}

fn partial_dist(z: &[C], a: &[C], mask: Mask) -> f64 {
    elements(mask).iter().map(|&j| (z[j] - a[j]).norm_sqr()).sum::<f64>().sqrt()
}

pub fn bump_form(chart: Arc<Chart>, point: &[C], k_plus_q: usize, scale: f64) -> Result<BumpForm> {
    bump_form_with(chart, &BumpSpec::new(point.to_vec(), k_plus_q, scale), Composition::Product)
}

pub fn bump_form_with(chart: Arc<Chart>, spec: &BumpSpec, composition: Composition) -> Result<BumpForm> {
    let n = chart.dim();
    if spec.point.len() != n {
        return Err(Error::ChartMismatch);
    }
    if spec.k_plus_q > n {
        return Err(Error::DegreeMismatch(format!("k + q = {} exceeds dimension {n}", spec.k_plus_q)));
    }
    if !(spec.scale > 0.0 && spec.complement_scale > 0.0 && spec.delta > 0.0 && spec.delta < 1.0) {
        return Err(Error::Config("bump radii must be positive and 0 < δ < 1".into()));
    }
    let reach = spec.scale.max(spec.complement_scale);
    for j in 0..n {
        let d = spec.point[j] - chart.center()[j];
        if d.re.abs() + reach >= chart.radius()[j] || d.im.abs() + reach >= chart.radius()[j] {
            return Err(Error::SupportOutsideChart);
        }
    }
    let p = n - spec.k_plus_q;
    let full: Mask = ((1u32 << n) - 1) as Mask;
    let vol = volume_coefficient(p);
    let spec_c = spec.clone();
    let field = FormField::from_fn(chart, p, p, move |z| {
        let mut form = LocalForm::zero();
        for i in subsets(n, p) {
            let c1 = if i == 0 {
                1.0
            } else {
                radial_cutoff(partial_dist(z, &spec_c.point, i), spec_c.scale, spec_c.delta)
            };
            let rest = full & !i;
            let c2 = if rest == 0 {
                1.0
            } else {
                radial_cutoff(partial_dist(z, &spec_c.point, rest), spec_c.complement_scale, spec_c.delta)
            };
            let v = match composition {
                Composition::Product => c1 * c2,
                Composition::Logarithmic => {
                    if c1 == 0.0 || c2 == 0.0 {
                        0.0
                    } else {
                        (c1.ln() + c2.ln()).exp()
                    }
                }
            };
            if v != 0.0 {
                form.add_term(i, i, vol * v);
            }
        }
        form
    })?;
    Ok(BumpForm {
        spec: spec.clone(),
        field,
        constant: 1.0 / factorial(p),
    })
}

/// A compactly supported test form with its quadrature restricted to the support.
#[derive(Debug, Clone)]
pub struct TestForm {
    pub field: FormField,
    quad: Quadrature,
}

impl TestForm {
    pub fn new(field: FormField, rule: Rule) -> Result<Self> {
        let chart = field.chart().clone();
        let full = Quadrature::new(&chart, &crate::forms::Region::Chart, rule)?;
        let comps: Vec<&[C]> = field.components().map(|(_, _, v)| v).collect();
        let quad = full.restricted(|k| comps.iter().any(|c| c[k] != C::new(0.0, 0.0)));
        Ok(TestForm { field, quad })
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quad
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.field.chart()
    }

    pub fn bidegree(&self) -> (usize, usize) {
        self.field.bidegree()
    }
}

impl From<BumpForm> for TestForm {
    fn from(b: BumpForm) -> Self {
        TestForm::new(b.field, Rule::Trapezoid).expect("chart quadrature exists")
    }
}

/// Smallest value of `β(v_1..v_p, vbar_1..vbar_p)` over random simple `p`-vectors at
/// random support nodes; nonnegative for a (weakly) positive form.
pub fn positivity_check(beta: &FormField, samples: usize, seed: u64) -> f64 {
    let (p, q) = beta.bidegree();
    assert_eq!(p, q, "positivity is defined for (p, p)-forms");
    let chart = beta.chart();
    let n = chart.dim();
    let mut rng = StdRng::seed_from_u64(seed);
    let norm = volume_coefficient(p).inv();
    let mut worst = f64::INFINITY;
    let support: Vec<usize> = (0..chart.node_count())
        .filter(|&k| beta.components().any(|(_, _, v)| v[k] != C::new(0.0, 0.0)))
        .collect();
    if support.is_empty() {
        return 0.0;
    }
    let mut buf = Vec::with_capacity(p * p);
    for _ in 0..samples {
        let node = support[rng.gen_range(0..support.len())];
        let v: Vec<Vec<C>> = (0..p)
            .map(|_| (0..n).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
            .collect();
        let minor = |mask: Mask, buf: &mut Vec<C>| {
            buf.clear();
            for row in &v {
                for &j in &elements(mask) {
                    buf.push(row[j]);
                }
            }
            det_in_place(buf, degree(mask))
        };
        let mut value = C::new(0.0, 0.0);
        for &(i, j, c) in beta.local(node).terms() {
            value += c * norm * minor(i, &mut buf) * minor(j, &mut buf).conj();
        }
        worst = worst.min(value.re);
    }
    worst
}
