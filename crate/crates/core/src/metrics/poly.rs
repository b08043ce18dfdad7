use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type C = Complex64;
const ZERO: C = C { re: 0.0, im: 0.0 };

/// A polynomial `sum c z^α zbar^β` in `n` complex variables and their conjugates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ZPoly {
    n: usize,
    terms: Vec<(Vec<u32>, Vec<u32>, C)>,
}

/// Values of a polynomial together with `∂_a p` and `∂_a ∂bar_b p` (row-major).
#[derive(Debug, Clone)]
pub struct PolyJet {
    pub value: C,
    pub del: Vec<C>,
    pub levi: Vec<C>,
}

impl ZPoly {
    pub fn zero(n: usize) -> Self {
        ZPoly { n, terms: Vec::new() }
    }

    pub fn constant(n: usize, c: C) -> Self {
        let mut p = ZPoly::zero(n);
        p.add_term(vec![0; n], vec![0; n], c);
        p
    }

    /// The coordinate `z_a`.
    pub fn coordinate(n: usize, a: usize) -> Self {
        let mut alpha = vec![0; n];
        alpha[a] = 1;
        let mut p = ZPoly::zero(n);
        p.add_term(alpha, vec![0; n], C::new(1.0, 0.0));
        p
    }

    /// Holomorphic polynomial from `(exponents, coefficient)` pairs.
    pub fn holomorphic(n: usize, terms: &[(Vec<u32>, C)]) -> Result<Self> {
        let mut p = ZPoly::zero(n);
        for (alpha, c) in terms {
            if alpha.len() != n {
                return Err(Error::Config(format!(
                    "monomial exponent list {alpha:?} has length {} but the chart has dimension {n}",
                    alpha.len()
                )));
            }
            p.add_term(alpha.clone(), vec![0; n], *c);
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(Vec<u32>, Vec<u32>, C)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_holomorphic(&self) -> bool {
        self.terms.iter().all(|(_, b, _)| b.iter().all(|&e| e == 0))
    }

    pub fn add_term(&mut self, alpha: Vec<u32>, beta: Vec<u32>, c: C) {
        if c == ZERO {
            return;
        }
        match self
            .terms
            .iter_mut()
            .position(|(a, b, _)| *a == alpha && *b == beta)
        {
            Some(k) => {
                self.terms[k].2 += c;
                if self.terms[k].2.norm() == 0.0 {
                    self.terms.remove(k);
                }
            }
            None => self.terms.push((alpha, beta, c)),
        }
    }

    pub fn plus(&self, other: &ZPoly) -> ZPoly {
        let mut out = self.clone();
        for (a, b, c) in &other.terms {
            out.add_term(a.clone(), b.clone(), *c);
        }
        out
    }

    pub fn times(&self, other: &ZPoly) -> ZPoly {
        let mut acc: BTreeMap<(Vec<u32>, Vec<u32>), C> = BTreeMap::new();
        for (a1, b1, c1) in &self.terms {
            for (a2, b2, c2) in &other.terms {
                let a: Vec<u32> = a1.iter().zip(a2).map(|(x, y)| x + y).collect();
                let b: Vec<u32> = b1.iter().zip(b2).map(|(x, y)| x + y).collect();
                *acc.entry((a, b)).or_insert(ZERO) += c1 * c2;
            }
        }
        let mut out = ZPoly::zero(self.n);
        for ((a, b), c) in acc {
            out.add_term(a, b, c);
        }
        out
    }

    pub fn scale(&self, c: C) -> ZPoly {
        let mut out = ZPoly::zero(self.n);
        for (a, b, v) in &self.terms {
            out.add_term(a.clone(), b.clone(), v * c);
        }
        out
    }

    /// Complex conjugate: swaps `z` and `zbar` exponents.
    pub fn conj(&self) -> ZPoly {
        ZPoly {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|(a, b, c)| (b.clone(), a.clone(), c.conj()))
                .collect(),
        }
    }

    /// Largest total degree in `z` and `zbar` together.
    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|(a, b, _)| a.iter().sum::<u32>() + b.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, z: &[C]) -> C {
        self.terms
            .iter()
            .map(|(a, b, c)| {
                let mut m = *c;
                for j in 0..self.n {
                    if a[j] > 0 {
                        m *= z[j].powu(a[j]);
                    }
                    if b[j] > 0 {
                        m *= z[j].conj().powu(b[j]);
                    }
                }
                m
            })
            .sum()
    }

    pub fn jet(&self, z: &[C]) -> PolyJet {
        let n = self.n;
        let mut out = PolyJet {
            value: ZERO,
            del: vec![ZERO; n],
            levi: vec![ZERO; n * n],
        };
        self.jet_into(z, &mut out.value, &mut out.del, &mut out.levi);
        out
    }

    /// Accumulates value, `∂_a` and `∂_a∂bar_b` into the given buffers.
    pub fn jet_into(&self, z: &[C], value: &mut C, del: &mut [C], levi: &mut [C]) {
        let n = self.n;
        let pow = |w: C, e: u32| if e == 0 { C::new(1.0, 0.0) } else { w.powu(e) };
        for (a, b, c) in &self.terms {
            let zp: Vec<C> = (0..n).map(|j| pow(z[j], a[j])).collect();
            let wp: Vec<C> = (0..n).map(|j| pow(z[j].conj(), b[j])).collect();
            let full: C = c * zp.iter().product::<C>() * wp.iter().product::<C>();
            *value += full;
            for p in 0..n {
                if a[p] == 0 {
                    continue;
                }
                // ∂_p z^α = α_p z^{α-e_p}
                let mut dz = *c * a[p] as f64;
                for j in 0..n {
                    let e = if j == p { a[j] - 1 } else { a[j] };
                    dz *= pow(z[j], e) * wp[j];
                }
                del[p] += dz;
                for q in 0..n {
                    if b[q] == 0 {
                        continue;
                    }
                    let mut d2 = *c * (a[p] * b[q]) as f64;
                    for j in 0..n {
                        let ea = if j == p { a[j] - 1 } else { a[j] };
                        let eb = if j == q { b[j] - 1 } else { b[j] };
                        d2 *= pow(z[j], ea) * pow(z[j].conj(), eb);
                    }
                    levi[p * n + q] += d2;
                }
            }
        }
    }

    /// Holomorphic derivative `∂_a p` as a polynomial.
    pub fn derivative(&self, a: usize) -> ZPoly {
        let mut out = ZPoly::zero(self.n);
        for (alpha, beta, c) in &self.terms {
            if alpha[a] > 0 {
                let mut al = alpha.clone();
                al[a] -= 1;
                out.add_term(al, beta.clone(), c * alpha[a] as f64);
            }
        }
        out
    }
}

/// An `m×r` matrix of holomorphic polynomials: sections `s_1..s_m` of `E^*` read as rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<ZPoly>,
}

impl SectionMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<ZPoly>) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::Config("section matrix shape does not match its entries".into()));
        }
        let n = entries[0].dim();
        if entries.iter().any(|p| p.dim() != n || !p.is_holomorphic()) {
            return Err(Error::Config("section entries must be holomorphic polynomials in the chart dimension".into()));
        }
        if cols > crate::linalg::MAX {
            return Err(Error::RankMismatch {
                expected: crate::linalg::MAX,
                got: cols,
            });
        }
        Ok(SectionMatrix { rows, cols, entries })
    }

    /// Matrix from coefficient lists: `entries[i][j]` is a list of `(exponents, re, im)` monomials.
    pub fn from_coefficients(n: usize, entries: &[Vec<Vec<(Vec<u32>, f64, f64)>>]) -> Result<Self> {
        let rows = entries.len();
        let cols = entries.first().map(|r| r.len()).unwrap_or(0);
        let mut flat = Vec::new();
        for row in entries {
            if row.len() != cols {
                return Err(Error::Config("ragged section matrix".into()));
            }
            for cell in row {
                let terms: Vec<(Vec<u32>, C)> = cell.iter().map(|(e, re, im)| (e.clone(), C::new(*re, *im))).collect();
                flat.push(ZPoly::holomorphic(n, &terms)?);
            }
        }
        SectionMatrix::new(rows, cols, flat)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// The bundle rank `r`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.entries[0].dim()
    }

    pub fn entry(&self, i: usize, j: usize) -> &ZPoly {
        &self.entries[i * self.cols + j]
    }

    /// `S^H S + ε² Id` as an `r×r` matrix of polynomials (row-major).
    pub fn gram(&self, eps: f64) -> Vec<ZPoly> {
        let (r, n) = (self.cols, self.dim());
        let mut g = vec![ZPoly::zero(n); r * r];
        for i in 0..r {
            for j in 0..r {
                let mut acc = ZPoly::zero(n);
                for k in 0..self.rows {
                    acc = acc.plus(&self.entry(k, i).conj().times(self.entry(k, j)));
                }
                if i == j && eps != 0.0 {
                    acc = acc.plus(&ZPoly::constant(n, C::new(eps * eps, 0.0)));
                }
                g[i * r + j] = acc;
            }
        }
        g
    }

    pub fn eval(&self, z: &[C]) -> Vec<C> {
        self.entries.iter().map(|p| p.eval(z)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_of_modulus_squared() {
        let z1 = ZPoly::coordinate(2, 0);
        let p = z1.conj().times(&z1).times(&ZPoly::coordinate(2, 1));
        let z = [C::new(0.3, -0.2), C::new(1.1, 0.4)];
        let j = p.jet(&z);
        assert!((j.value - z[0].norm_sqr() * z[1]).norm() < 1e-15);
        assert!((j.del[0] - z[0].conj() * z[1]).norm() < 1e-15);
        assert!((j.del[1] - C::new(z[0].norm_sqr(), 0.0)).norm() < 1e-15);
        assert!((j.levi[0] - z[1]).norm() < 1e-15);
        assert!((j.levi[2] - z[0]).norm() < 1e-15);
        assert_eq!(j.levi[1], ZERO);
    }

    #[test]
    fn gram_of_l_plus_l() {
        let z1 = ZPoly::coordinate(2, 0);
        let z2 = ZPoly::coordinate(2, 1);
        let o = ZPoly::zero(2);
        let s = SectionMatrix::new(4, 2, vec![z1.clone(), o.clone(), z2.clone(), o.clone(), o.clone(), z1, o, z2]).unwrap();
        let g = s.gram(0.0);
        let z = [C::new(0.5, 0.1), C::new(-0.2, 0.7)];
        let r2 = z[0].norm_sqr() + z[1].norm_sqr();
        assert!((g[0].eval(&z) - r2).norm() < 1e-15);
        assert!(g[1].eval(&z).norm() < 1e-15);
        assert!((g[3].eval(&z) - r2).norm() < 1e-15);
    }

    #[test]
    fn sections_must_be_holomorphic() {
        let zb = ZPoly::coordinate(1, 0).conj();
        assert!(SectionMatrix::new(1, 1, vec![zb]).is_err());
    }
}
