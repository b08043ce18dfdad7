//! Small dense complex matrices for per-node work.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

type C = Complex64;

const ZERO: C = C { re: 0.0, im: 0.0 };
const ONE: C = C { re: 1.0, im: 0.0 };

/// Largest supported matrix size.
pub const MAX: usize = 4;

/// A square complex matrix of size at most [`MAX`], stored row-major on the stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CMat {
    n: usize,
    a: [C; MAX * MAX],
}

impl Default for CMat {
    fn default() -> Self {
        CMat::zeros(0)
    }
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        assert!(n <= MAX, "matrix size {n} exceeds {MAX}");
        CMat {
            n,
            a: [ZERO; MAX * MAX],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n);
        for i in 0..n {
            m.a[i * MAX + i] = ONE;
        }
        m
    }

    pub fn from_rows(n: usize, rows: &[C]) -> Self {
        let mut m = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[i * MAX + j] = rows[i * n + j];
            }
        }
        m
    }

    pub fn diag(d: &[C]) -> Self {
        let mut m = CMat::zeros(d.len());
        for (i, v) in d.iter().enumerate() {
            m.a[i * MAX + i] = *v;
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C {
        self.a[i * MAX + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C) {
        self.a[i * MAX + j] = v;
    }

    pub fn to_rows(&self) -> Vec<C> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let mut m = CMat::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m.a[i * MAX + j] = self.a[j * MAX + i].conj();
            }
        }
        m
    }

    pub fn conj(&self) -> Self {
        let mut m = *self;
        m.a.iter_mut().for_each(|v| *v = v.conj());
        m
    }

    pub fn transpose(&self) -> Self {
        self.adjoint().conj()
    }

    pub fn scale(&self, c: C) -> Self {
        let mut m = *self;
        m.a.iter_mut().for_each(|v| *v *= c);
        m
    }

    pub fn trace(&self) -> C {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `x^H M x`.
    pub fn quad_form(&self, x: &[C]) -> C {
        let mut acc = ZERO;
        for i in 0..self.n {
            let mut row = ZERO;
            for j in 0..self.n {
                row += self.get(i, j) * x[j];
            }
            acc += x[i].conj() * row;
        }
        acc
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest deviation from hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        (*self - self.adjoint()).max_abs()
    }

    /// Lower-triangular `L` with `M = L L^H`, or `None` if `M` is not positive definite.
    pub fn cholesky(&self) -> Option<CMat> {
        let n = self.n;
        let mut l = CMat::zeros(n);
        let scale = (0..n).map(|i| self.get(i, i).re.abs()).fold(0.0, f64::max);
        for j in 0..n {
            let mut d = self.get(j, j).re;
            for k in 0..j {
                d -= l.get(j, k).norm_sqr();
            }
            if !(d > 1e-14 * scale) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l.set(j, j, C::new(djj, 0.0));
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k).conj();
                }
                l.set(i, j, s / djj);
            }
        }
        Some(l)
    }

    /// Inverse of a lower-triangular matrix.
    pub fn lower_inverse(&self) -> CMat {
        let n = self.n;
        let mut inv = CMat::zeros(n);
        for j in 0..n {
            inv.set(j, j, ONE / self.get(j, j));
            for i in (j + 1)..n {
                let mut s = ZERO;
                for k in j..i {
                    s += self.get(i, k) * inv.get(k, j);
                }
                inv.set(i, j, -s / self.get(i, i));
            }
        }
        inv
    }

    /// Inverse of a hermitian positive-definite matrix via Cholesky.
    pub fn hpd_inverse(&self) -> Option<CMat> {
        let li = self.cholesky()?.lower_inverse();
        Some(li.adjoint() * li)
    }

    /// General inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Option<CMat> {
        let n = self.n;
        let mut a = *self;
        let mut inv = CMat::identity(n);
        for col in 0..n {
            let piv = (col..n).max_by(|&x, &y| a.get(x, col).norm().total_cmp(&a.get(y, col).norm()))?;
            if a.get(piv, col).norm() < 1e-300 {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    a.a.swap(piv * MAX + j, col * MAX + j);
                    inv.a.swap(piv * MAX + j, col * MAX + j);
                }
            }
            let p = ONE / a.get(col, col);
            for j in 0..n {
                a.a[col * MAX + j] *= p;
                inv.a[col * MAX + j] *= p;
            }
            for i in 0..n {
                if i != col {
                    let f = a.get(i, col);
                    if f != ZERO {
                        for j in 0..n {
                            let (ac, ic) = (a.get(col, j), inv.get(col, j));
                            a.a[i * MAX + j] -= f * ac;
                            inv.a[i * MAX + j] -= f * ic;
                        }
                    }
                }
            }
        }
        Some(inv)
    }

    pub fn det(&self) -> C {
        let mut buf: Vec<C> = self.to_rows();
        det_in_place(&mut buf, self.n)
    }
}

/// Determinant of an `m×m` row-major matrix, destroying the buffer.
pub fn det_in_place(a: &mut [C], m: usize) -> C {
    match m {
        0 => return ONE,
        1 => return a[0],
        2 => return a[0] * a[3] - a[1] * a[2],
        3 => {
            return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => {}
    }
    let mut det = ONE;
    for col in 0..m {
        let mut piv = col;
        let mut best = a[col * m + col].norm();
        for r in (col + 1)..m {
            let v = a[r * m + col].norm();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return ZERO;
        }
        if piv != col {
            for j in 0..m {
                a.swap(piv * m + j, col * m + j);
            }
            det = -det;
        }
        let p = a[col * m + col];
        det *= p;
        for r in (col + 1)..m {
            let f = a[r * m + col] / p;
            if f != ZERO {
                for j in col..m {
                    let v = a[col * m + j];
                    a[r * m + j] -= f * v;
                }
            }
        }
    }
    det
}

/// Eigenvalues of a hermitian matrix, ascending.
pub fn hermitian_eigenvalues(n: usize, rows: &[C]) -> Vec<f64> {
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        let v = 0.5 * (rows[i * n + j] + rows[j * n + i].conj());
        nalgebra::Complex::new(v.re, v.im)
    });
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

impl Add for CMat {
    type Output = CMat;
    fn add(mut self, rhs: CMat) -> CMat {
        if self.n == 0 {
            return rhs;
        }
        if rhs.n == 0 {
            return self;
        }
        debug_assert_eq!(self.n, rhs.n);
        self.a.iter_mut().zip(rhs.a.iter()).for_each(|(x, y)| *x += y);
        self
    }
}

impl Sub for CMat {
    type Output = CMat;
    fn sub(self, rhs: CMat) -> CMat {
        self + rhs.scale(C::new(-1.0, 0.0))
    }
}

impl Mul for CMat {
    type Output = CMat;
    fn mul(self, rhs: CMat) -> CMat {
        let n = self.n;
        let mut m = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let x = self.a[i * MAX + k];
                if x == ZERO {
                    continue;
                }
                for j in 0..n {
                    m.a[i * MAX + j] += x * rhs.a[k * MAX + j];
                }
            }
        }
        m
    }
}

impl Mul<f64> for CMat {
    type Output = CMat;
    fn mul(mut self, rhs: f64) -> CMat {
        self.a.iter_mut().for_each(|v| *v *= rhs);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CMat {
        CMat::from_rows(
            3,
            &[
                C::new(4.0, 0.0),
                C::new(1.0, 1.0),
                C::new(0.0, -0.5),
                C::new(1.0, -1.0),
                C::new(3.0, 0.0),
                C::new(0.2, 0.0),
                C::new(0.0, 0.5),
                C::new(0.2, 0.0),
                C::new(2.0, 0.0),
            ],
        )
    }

    #[test]
    fn inverses_agree() {
        let g = sample();
        let a = g.hpd_inverse().unwrap();
        let b = g.inverse().unwrap();
        assert!((a - b).max_abs() < 1e-14);
        assert!((g * a - CMat::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn determinant_matches_cholesky() {
        let g = sample();
        let l = g.cholesky().unwrap();
        let d: f64 = (0..3).map(|i| l.get(i, i).re.powi(2)).product();
        assert!((g.det() - C::new(d, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn small_determinants_match_elimination() {
        let g = sample();
        let mut buf = g.to_rows();
        let closed = det_in_place(&mut buf, 3);
        let mut four = CMat::identity(4);
        for i in 0..3 {
            for j in 0..3 {
                four.set(i, j, g.get(i, j));
            }
        }
        assert!((closed - four.det()).norm() < 1e-13);
    }

    #[test]
    fn indefinite_is_rejected() {
        let m = CMat::diag(&[C::new(1.0, 0.0), C::new(-1.0, 0.0)]);
        assert!(m.cholesky().is_none());
        assert_eq!(hermitian_eigenvalues(2, &m.to_rows()), vec![-1.0, 1.0]);
    }
}
