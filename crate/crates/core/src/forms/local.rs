use num_complex::Complex64;
use num_rational::BigRational;

use super::multiindex::{degree, wedge_sign, Mask};
use crate::charclass::{rational_to_f64, ClassAlgebra};

type C = Complex64;

/// A complex differential form at a single point of `C^n`, stored sparsely as
/// `sum c_{IJ} dz_I ∧ dzbar_J` with terms sorted by `(I, J)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LocalForm {
    terms: Vec<(Mask, Mask, C)>,
}

impl LocalForm {
    pub fn zero() -> Self {
        LocalForm { terms: Vec::new() }
    }

    pub fn scalar(c: C) -> Self {
        LocalForm::term(0, 0, c)
    }

    pub fn one() -> Self {
        LocalForm::scalar(C::new(1.0, 0.0))
    }

    pub fn term(i: Mask, j: Mask, c: C) -> Self {
        let mut f = LocalForm::zero();
        f.add_term(i, j, c);
        f
    }

    /// `dz_a`.
    pub fn dz(a: usize) -> Self {
        LocalForm::term(1 << a, 0, C::new(1.0, 0.0))
    }

    /// `dzbar_a`.
    pub fn dzbar(a: usize) -> Self {
        LocalForm::term(0, 1 << a, C::new(1.0, 0.0))
    }

    /// The (1,1)-form `sum_{a,b} m[a][b] dz_a ∧ dzbar_b` of an `n×n` row-major matrix.
    pub fn from_matrix(n: usize, m: &[C]) -> Self {
        let mut f = LocalForm::zero();
        for a in 0..n {
            for b in 0..n {
                f.add_term(1 << a, 1 << b, m[a * n + b]);
            }
        }
        f
    }

    pub fn terms(&self) -> &[(Mask, Mask, C)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, i: Mask, j: Mask) -> C {
        match self.terms.binary_search_by(|t| (t.0, t.1).cmp(&(i, j))) {
            Ok(pos) => self.terms[pos].2,
            Err(_) => C::new(0.0, 0.0),
        }
    }

    pub fn add_term(&mut self, i: Mask, j: Mask, c: C) {
        if c == C::new(0.0, 0.0) {
            return;
        }
        match self.terms.binary_search_by(|t| (t.0, t.1).cmp(&(i, j))) {
            Ok(pos) => {
                self.terms[pos].2 += c;
                if self.terms[pos].2 == C::new(0.0, 0.0) {
                    self.terms.remove(pos);
                }
            }
            Err(pos) => self.terms.insert(pos, (i, j, c)),
        }
    }

    pub fn plus(&self, other: &LocalForm) -> LocalForm {
        let mut out = self.clone();
        for &(i, j, c) in &other.terms {
            out.add_term(i, j, c);
        }
        out
    }

    pub fn times(&self, c: C) -> LocalForm {
        if c == C::new(0.0, 0.0) {
            return LocalForm::zero();
        }
        LocalForm {
            terms: self.terms.iter().map(|&(i, j, v)| (i, j, v * c)).collect(),
        }
    }

    pub fn wedge(&self, other: &LocalForm) -> LocalForm {
        let mut out = LocalForm::zero();
        for &(i1, j1, a) in &self.terms {
            for &(i2, j2, b) in &other.terms {
                let s = wedge_sign(i1, j1, i2, j2);
                if s != 0.0 {
                    out.add_term(i1 | i2, j1 | j2, a * b * s);
                }
            }
        }
        out
    }

    /// Part of bidegree exactly `(p, q)`.
    pub fn component(&self, p: usize, q: usize) -> LocalForm {
        LocalForm {
            terms: self
                .terms
                .iter()
                .copied()
                .filter(|&(i, j, _)| degree(i) == p && degree(j) == q)
                .collect(),
        }
    }

    /// `(p, q)` if homogeneous and nonzero.
    pub fn bidegree(&self) -> Option<(usize, usize)> {
        let (i0, j0, _) = *self.terms.first()?;
        let bd = (degree(i0), degree(j0));
        self.terms
            .iter()
            .all(|&(i, j, _)| (degree(i), degree(j)) == bd)
            .then_some(bd)
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.iter().map(|t| t.2.norm()).fold(0.0, f64::max)
    }
}

impl ClassAlgebra for LocalForm {
    fn add(&self, other: &Self) -> Self {
        self.plus(other)
    }

    fn mul(&self, other: &Self) -> Self {
        self.wedge(other)
    }

    fn scale(&self, c: &BigRational) -> Self {
        self.times(C::new(rational_to_f64(c), 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C {
        C::new(re, 0.0)
    }

    #[test]
    fn repeated_differential_vanishes() {
        assert!(LocalForm::dz(0).wedge(&LocalForm::dz(0)).is_zero());
    }

    #[test]
    fn graded_commutativity_of_one_forms() {
        let a = LocalForm::dz(0);
        let b = LocalForm::dzbar(0);
        assert_eq!(a.wedge(&b).get(1, 1), c(1.0));
        assert_eq!(b.wedge(&a).get(1, 1), c(-1.0));
    }

    #[test]
    fn unit_and_bidegree() {
        let w = LocalForm::from_matrix(2, &[c(1.0), c(2.0), c(3.0), c(4.0)]);
        assert_eq!(LocalForm::one().wedge(&w), w);
        assert_eq!(w.bidegree(), Some((1, 1)));
        // (Σ m_ab dz_a∧dzbar_b)^2 = -2 det(m) dz_1∧dz_2∧dzbar_1∧dzbar_2
        let sq = w.wedge(&w);
        assert!((sq.get(3, 3) - c(-2.0 * (1.0 * 4.0 - 2.0 * 3.0))).norm() < 1e-14);
    }
}
