use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::poly::ZPoly;
use crate::forms::JetFn;
use crate::linalg::CMat;

type C = Complex64;
const ZERO: C = C { re: 0.0, im: 0.0 };

/// Metric matrix `H` with `‖ξ‖² = ξ^H H ξ`, its holomorphic derivatives `∂_a H`
/// and mixed derivatives `∂_a ∂bar_b H` (index `a*n + b`) at one point.
///
/// `∂bar_b H = (∂_b H)^H` since `H` is hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub h: CMat,
    pub d: Vec<CMat>,
    pub dd: Vec<CMat>,
}

impl Jet {
    pub fn constant(h: CMat, n: usize) -> Self {
        let r = h.size();
        Jet {
            h,
            d: vec![CMat::zeros(r); n],
            dd: vec![CMat::zeros(r); n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn rank(&self) -> usize {
        self.h.size()
    }

    pub fn dbar(&self, b: usize) -> CMat {
        self.d[b].adjoint()
    }

    /// Jet of the dual metric `conj(H^{-1})`, or `None` if `H` is not positive definite.
    pub fn dual(&self) -> Option<Jet> {
        let n = self.dim();
        let k = self.h.hpd_inverse()?;
        let dbk: Vec<CMat> = (0..n)
            .map(|b| (k * self.dbar(b) * k).scale(C::new(-1.0, 0.0)))
            .collect();
        let mut dd = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                // ∂_b ∂bar_a K, then conjugate
                let ga = self.d[b];
                let gb = self.dbar(a);
                let m = k * ga * k * gb * k + k * gb * k * ga * k - k * self.dd[b * n + a] * k;
                dd.push(m.conj());
            }
        }
        Some(Jet {
            h: k.conj(),
            d: dbk.iter().map(|m| m.conj()).collect(),
            dd,
        })
    }

    /// Block-diagonal sum of two jets on the same base.
    pub fn direct_sum(&self, other: &Jet) -> Jet {
        let (r1, r2) = (self.rank(), other.rank());
        let block = |a: &CMat, b: &CMat| {
            let mut m = CMat::zeros(r1 + r2);
            for i in 0..r1 {
                for j in 0..r1 {
                    m.set(i, j, a.get(i, j));
                }
            }
            for i in 0..r2 {
                for j in 0..r2 {
                    m.set(r1 + i, r1 + j, b.get(i, j));
                }
            }
            m
        };
        Jet {
            h: block(&self.h, &other.h),
            d: self.d.iter().zip(&other.d).map(|(a, b)| block(a, b)).collect(),
            dd: self.dd.iter().zip(&other.dd).map(|(a, b)| block(a, b)).collect(),
        }
    }
}

/// A metric given by closed-form derivatives.
pub trait MetricJet: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn rank(&self) -> usize;
    /// `None` where the matrix can not be formed (degenerate point of a dual).
    fn eval(&self, z: &[C]) -> Option<Jet>;
    /// The metric this one is the dual of, if known.
    fn dual_source(&self) -> Option<Arc<dyn MetricJet>> {
        None
    }
    /// The matrix when it does not depend on `z`.
    fn constant_value(&self) -> Option<CMat> {
        None
    }
    /// The polynomial entries, when the matrix is a polynomial in `z, zbar`.
    fn polynomial(&self) -> Option<PolyMatrixJet> {
        let h = self.constant_value()?;
        let (n, r) = (self.dim(), self.rank());
        let entries = (0..r * r).map(|k| ZPoly::constant(n, h.get(k / r, k % r))).collect();
        Some(PolyMatrixJet { n, r, entries })
    }
}

#[derive(Debug, Clone)]
pub struct ConstantJet {
    pub n: usize,
    pub h: CMat,
}

impl MetricJet for ConstantJet {
    fn dim(&self) -> usize {
        self.n
    }
    fn constant_value(&self) -> Option<CMat> {
        Some(self.h)
    }
    fn rank(&self) -> usize {
        self.h.size()
    }
    fn eval(&self, _z: &[C]) -> Option<Jet> {
        Some(Jet::constant(self.h, self.n))
    }
}

/// `H = diag(exp(-φ_i))` with `φ_i = sum_j w_ij |z_j|²`.
#[derive(Debug, Clone)]
pub struct DiagExpJet {
    pub weights: Vec<Vec<f64>>,
}

impl MetricJet for DiagExpJet {
    fn dim(&self) -> usize {
        self.weights[0].len()
    }
    fn rank(&self) -> usize {
        self.weights.len()
    }
    fn eval(&self, z: &[C]) -> Option<Jet> {
        let (r, n) = (self.rank(), self.dim());
        let mut jet = Jet::constant(CMat::zeros(r), n);
        for (i, w) in self.weights.iter().enumerate() {
            let phi: f64 = w.iter().zip(z).map(|(wj, zj)| wj * zj.norm_sqr()).sum();
            let e = (-phi).exp();
            jet.h.set(i, i, C::new(e, 0.0));
            for a in 0..n {
                jet.d[a].set(i, i, -z[a].conj() * w[a] * e);
                for b in 0..n {
                    let mut v = z[a].conj() * z[b] * (w[a] * w[b]);
                    if a == b {
                        v -= w[a];
                    }
                    jet.dd[a * n + b].set(i, i, v * e);
                }
            }
        }
        Some(jet)
    }
}

/// Rank-one metric `e^{-φ}` from an analytic potential.
#[derive(Clone)]
pub struct LinePotentialJet {
    pub n: usize,
    pub phi: JetFn,
}

impl fmt::Debug for LinePotentialJet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LinePotentialJet(n={})", self.n)
    }
}

impl MetricJet for LinePotentialJet {
    fn dim(&self) -> usize {
        self.n
    }
    fn rank(&self) -> usize {
        1
    }
    fn eval(&self, z: &[C]) -> Option<Jet> {
        let n = self.n;
        let p = (self.phi)(z);
        if !p.value.is_finite() {
            return None;
        }
        let e = (-p.value).exp();
        let one = |v: C| CMat::from_rows(1, &[v]);
        Some(Jet {
            h: one(C::new(e, 0.0)),
            d: (0..n).map(|a| one(-p.del[a] * e)).collect(),
            dd: (0..n)
                .flat_map(|a| (0..n).map(move |b| (a, b)))
                .map(|(a, b)| one((-p.levi[a * n + b] + p.del[a] * p.del[b].conj()) * e))
                .collect(),
        })
    }
}

/// Hermitian matrix of polynomials in `z, zbar`.
#[derive(Debug, Clone)]
pub struct PolyMatrixJet {
    pub n: usize,
    pub r: usize,
    pub entries: Vec<ZPoly>,
}

impl MetricJet for PolyMatrixJet {
    fn dim(&self) -> usize {
        self.n
    }
    fn polynomial(&self) -> Option<PolyMatrixJet> {
        Some(self.clone())
    }
    fn rank(&self) -> usize {
        self.r
    }
    fn eval(&self, z: &[C]) -> Option<Jet> {
        let (n, r) = (self.n, self.r);
        let mut jet = Jet::constant(CMat::zeros(r), n);
        let mut del = vec![ZERO; n];
        let mut levi = vec![ZERO; n * n];
        for i in 0..r {
            for j in i..r {
                let mut value = ZERO;
                del.iter_mut().for_each(|v| *v = ZERO);
                levi.iter_mut().for_each(|v| *v = ZERO);
                self.entries[i * r + j].jet_into(z, &mut value, &mut del, &mut levi);
                if i == j {
                    value = C::new(value.re, 0.0);
                }
                jet.h.set(i, j, value);
                jet.h.set(j, i, value.conj());
                for a in 0..n {
                    jet.d[a].set(i, j, del[a]);
                    for b in 0..n {
                        jet.dd[a * n + b].set(i, j, levi[a * n + b]);
                    }
                }
            }
        }
        // lower triangle from the conjugate polynomial H_ji = conj(H_ij)
        if r > 1 {
            for i in 0..r {
                for j in (i + 1)..r {
                    let mut dbar = vec![ZERO; n];
                    let conj_poly = self.entries[i * r + j].conj();
                    let mut v = ZERO;
                    let mut levi_c = vec![ZERO; n * n];
                    conj_poly.jet_into(z, &mut v, &mut dbar, &mut levi_c);
                    for a in 0..n {
                        jet.d[a].set(j, i, dbar[a]);
                        for b in 0..n {
                            jet.dd[a * n + b].set(j, i, levi_c[a * n + b]);
                        }
                    }
                }
            }
        }
        Some(jet)
    }
}

/// Dual metric `conj(H^{-1})` of another analytic metric.
#[derive(Debug, Clone)]
pub struct DualJet {
    pub inner: Arc<dyn MetricJet>,
}

impl MetricJet for DualJet {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn rank(&self) -> usize {
        self.inner.rank()
    }
    fn eval(&self, z: &[C]) -> Option<Jet> {
        self.inner.eval(z)?.dual()
    }
    fn dual_source(&self) -> Option<Arc<dyn MetricJet>> {
        Some(self.inner.clone())
    }
    fn constant_value(&self) -> Option<CMat> {
        Some(self.inner.constant_value()?.hpd_inverse()?.conj())
    }
}

/// Block-diagonal direct sum.
#[derive(Debug, Clone)]
pub struct DirectSumJet {
    pub parts: Vec<Arc<dyn MetricJet>>,
}

impl MetricJet for DirectSumJet {
    fn dim(&self) -> usize {
        self.parts[0].dim()
    }
    fn rank(&self) -> usize {
        self.parts.iter().map(|p| p.rank()).sum()
    }
    fn eval(&self, z: &[C]) -> Option<Jet> {
        let mut it = self.parts.iter();
        let mut jet = it.next()?.eval(z)?;
        for p in it {
            jet = jet.direct_sum(&p.eval(z)?);
        }
        Some(jet)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Finite-difference oracle for a jet at a point.
    fn fd_check(m: &dyn MetricJet, z: &[C]) {
        let n = m.dim();
        let h = 1e-4;
        let jet = m.eval(z).unwrap();
        let at = |dz: &[(usize, C)]| {
            let mut w = z.to_vec();
            for (a, v) in dz {
                w[*a] += v;
            }
            m.eval(&w).unwrap().h
        };
        for a in 0..n {
            let dx = (at(&[(a, C::new(h, 0.0))]) - at(&[(a, C::new(-h, 0.0))])) * (0.5 / h);
            let dy = (at(&[(a, C::new(0.0, h))]) - at(&[(a, C::new(0.0, -h))])) * (0.5 / h);
            let del = (dx - dy.scale(C::new(0.0, 1.0))) * 0.5;
            assert!((del - jet.d[a]).max_abs() < 1e-6, "∂_{a}");
            let lap = (at(&[(a, C::new(h, 0.0))]) + at(&[(a, C::new(-h, 0.0))]) + at(&[(a, C::new(0.0, h))])
                + at(&[(a, C::new(0.0, -h))])
                - jet.h * 4.0)
                * (0.25 / (h * h));
            assert!((lap - jet.dd[a * n + a]).max_abs() < 1e-5, "∂_{a}∂bar_{a}");
        }
    }

    #[test]
    fn diag_exp_derivatives() {
        let m = DiagExpJet {
            weights: vec![vec![1.0, 0.5], vec![-0.3, 2.0]],
        };
        fd_check(&m, &[C::new(0.3, -0.4), C::new(0.1, 0.7)]);
    }

    #[test]
    fn dual_jet_derivatives_and_involution() {
        let z1 = ZPoly::coordinate(2, 0);
        let z2 = ZPoly::coordinate(2, 1);
        let one = ZPoly::constant(2, C::new(1.0, 0.0));
        let entries = vec![
            one.plus(&z1.conj().times(&z1)),
            z1.conj().times(&z2),
            z2.conj().times(&z1),
            one.plus(&z2.conj().times(&z2)).plus(&z1.conj().times(&z1)),
        ];
        let g: Arc<dyn MetricJet> = Arc::new(PolyMatrixJet { n: 2, r: 2, entries });
        let z = [C::new(0.3, -0.4), C::new(0.1, 0.7)];
        fd_check(g.as_ref(), &z);
        let dual = DualJet { inner: g.clone() };
        fd_check(&dual, &z);
        let back = dual.eval(&z).unwrap().dual().unwrap();
        let orig = g.eval(&z).unwrap();
        assert!((back.h - orig.h).max_abs() < 1e-12);
        for k in 0..4 {
            assert!((back.dd[k] - orig.dd[k]).max_abs() < 1e-11);
        }
    }

    #[test]
    fn line_potential_matches_diag_exp() {
        let n = 1;
        let phi: JetFn = Arc::new(|z: &[C]| crate::forms::ScalarJet {
            value: z[0].norm_sqr(),
            del: vec![z[0].conj()],
            levi: vec![C::new(1.0, 0.0)],
        });
        let a = LinePotentialJet { n, phi }.eval(&[C::new(0.2, 0.5)]).unwrap();
        let b = DiagExpJet { weights: vec![vec![1.0]] }.eval(&[C::new(0.2, 0.5)]).unwrap();
        assert!((a.h - b.h).max_abs() < 1e-15);
        assert!((a.d[0] - b.d[0]).max_abs() < 1e-15);
        assert!((a.dd[0] - b.dd[0]).max_abs() < 1e-15);
    }
}
