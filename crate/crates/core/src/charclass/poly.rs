use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Which characteristic-class family a formal variable belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Chern,
    Segre,
    Character,
}

impl Family {
    fn prefix(self) -> &'static str {
        match self {
            Family::Chern => "c",
            Family::Segre => "s",
            Family::Character => "ch",
        }
    }
}

/// A formal variable `c_i`, `s_i` or `ch_i` attached to a bundle slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variable {
    pub slot: u8,
    pub family: Family,
    pub index: u32,
}

impl Variable {
    pub fn chern(index: u32) -> Self {
        Variable {
            slot: 0,
            family: Family::Chern,
            index,
        }
    }

    pub fn segre(index: u32) -> Self {
        Variable {
            slot: 0,
            family: Family::Segre,
            index,
        }
    }

    pub fn character(index: u32) -> Self {
        Variable {
            slot: 0,
            family: Family::Character,
            index,
        }
    }

    pub fn in_slot(self, slot: u8) -> Self {
        Variable { slot, ..self }
    }
}

/// A product of variables with positive exponents, sorted by variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    factors: Vec<(Variable, u32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Monomial::default()
    }

    pub fn var(v: Variable) -> Self {
        Monomial {
            factors: vec![(v, 1)],
        }
    }

    pub fn factors(&self) -> &[(Variable, u32)] {
        &self.factors
    }

    /// Weighted degree: variable index `i` contributes `i` per power.
    pub fn grade(&self) -> u32 {
        self.factors.iter().map(|(v, e)| v.index * e).sum()
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut map: BTreeMap<Variable, u32> = self.factors.iter().copied().collect();
        for &(v, e) in &other.factors {
            *map.entry(v).or_insert(0) += e;
        }
        Monomial {
            factors: map.into_iter().collect(),
        }
    }

    fn exponent(&self, v: &Variable) -> u32 {
        self.factors
            .iter()
            .find(|(w, _)| w == v)
            .map(|(_, e)| *e)
            .unwrap_or(0)
    }
}

impl Ord for Monomial {
    /// Graded reverse-lexicographic order on `(slot, family, index)`.
    fn cmp(&self, other: &Self) -> Ordering {
        match self.grade().cmp(&other.grade()) {
            Ordering::Equal => {}
            o => return o,
        }
        let mut vars: Vec<Variable> = self
            .factors
            .iter()
            .chain(other.factors.iter())
            .map(|(v, _)| *v)
            .collect();
        vars.sort_unstable();
        vars.dedup();
        for v in vars.iter().rev() {
            let (a, b) = (self.exponent(v), other.exponent(v));
            if a != b {
                // smaller power of the last variable ranks higher
                return b.cmp(&a);
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact-rational polynomial in characteristic-class variables.
#[derive(Debug, Clone, Default)]
pub struct CharClassPoly {
    terms: BTreeMap<Monomial, BigRational>,
    labels: Vec<String>,
}

impl PartialEq for CharClassPoly {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}

impl Eq for CharClassPoly {}

impl CharClassPoly {
    pub fn zero() -> Self {
        CharClassPoly::default()
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = CharClassPoly::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn integer(c: i64) -> Self {
        Self::constant(BigRational::from_integer(BigInt::from(c)))
    }

    pub fn var(v: Variable) -> Self {
        let mut p = CharClassPoly::zero();
        p.add_term(Monomial::var(v), BigRational::one());
        p
    }

    /// Attaches slot labels used only for rendering.
    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = labels;
        self
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            Entry::Occupied(mut slot) => {
                *slot.get_mut() += c;
                if slot.get().is_zero() {
                    slot.remove();
                }
            }
            Entry::Vacant(slot) => {
                slot.insert(c);
            }
        }
    }

    /// `Some(g)` if every monomial has grade `g` (the zero polynomial has every grade).
    pub fn homogeneous_grade(&self) -> Option<u32> {
        let mut grades = self.terms.keys().map(Monomial::grade);
        match grades.next() {
            None => Some(0),
            Some(g) => grades.all(|h| h == g).then_some(g),
        }
    }

    /// Drops every monomial of grade above `max_grade`.
    pub fn truncate(&self, max_grade: u32) -> Self {
        CharClassPoly {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.grade() <= max_grade)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
            labels: self.labels.clone(),
        }
    }

    /// Homogeneous part of grade `g`.
    pub fn graded_part(&self, g: u32) -> Self {
        CharClassPoly {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.grade() == g)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        let mut out = CharClassPoly::zero().with_labels(self.labels.clone());
        for (m, v) in &self.terms {
            out.add_term(m.clone(), v * c);
        }
        out
    }

    pub fn all_integer(&self) -> bool {
        self.terms.values().all(|c| c.is_integer())
    }

    /// Evaluates the polynomial in any commutative algebra.
    pub fn evaluate<T: ClassAlgebra>(&self, one: &T, mut assign: impl FnMut(&Variable) -> T) -> T {
        let mut cache: BTreeMap<Variable, T> = BTreeMap::new();
        let mut total = one.scale(&BigRational::zero());
        for (m, c) in &self.terms {
            let mut prod = one.clone();
            for (v, e) in m.factors() {
                let value = cache.entry(*v).or_insert_with(|| assign(v)).clone();
                for _ in 0..*e {
                    prod = prod.mul(&value);
                }
            }
            total = total.add(&prod.scale(c));
        }
        total
    }

    /// Substitutes a polynomial for every variable.
    pub fn substitute(&self, assign: impl FnMut(&Variable) -> CharClassPoly) -> CharClassPoly {
        self.evaluate(&CharClassPoly::one(), assign)
            .with_labels(self.labels.clone())
    }

    fn render_var(&self, v: &Variable) -> String {
        let mut s = format!("{}{}", v.family.prefix(), v.index);
        if !self.labels.is_empty() {
            let label = self
                .labels
                .get(v.slot as usize)
                .cloned()
                .unwrap_or_else(|| format!("E{}", v.slot));
            s.push('(');
            s.push_str(&label);
            s.push(')');
        }
        s
    }
}

impl fmt::Display for CharClassPoly {
    /// Canonical ASCII form, leading monomial first, e.g. `c1^2 - c2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let negative = c.is_negative();
            let abs = c.abs();
            if i == 0 {
                if negative {
                    write!(f, "-")?;
                }
            } else if negative {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let body: Vec<String> = m
                .factors()
                .iter()
                .map(|(v, e)| {
                    if *e == 1 {
                        self.render_var(v)
                    } else {
                        format!("{}^{}", self.render_var(v), e)
                    }
                })
                .collect();
            if m.is_one() {
                write!(f, "{abs}")?;
            } else if abs.is_one() {
                write!(f, "{}", body.join("*"))?;
            } else {
                write!(f, "{}*{}", abs, body.join("*"))?;
            }
        }
        Ok(())
    }
}

impl Add for &CharClassPoly {
    type Output = CharClassPoly;
    fn add(self, rhs: &CharClassPoly) -> CharClassPoly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        if out.labels.is_empty() {
            out.labels = rhs.labels.clone();
        }
        out
    }
}

impl Sub for &CharClassPoly {
    type Output = CharClassPoly;
    fn sub(self, rhs: &CharClassPoly) -> CharClassPoly {
        self + &(-rhs)
    }
}

impl Neg for &CharClassPoly {
    type Output = CharClassPoly;
    fn neg(self) -> CharClassPoly {
        self.scale(&-BigRational::one())
    }
}

impl Mul for &CharClassPoly {
    type Output = CharClassPoly;
    fn mul(self, rhs: &CharClassPoly) -> CharClassPoly {
        let mut out = CharClassPoly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out.labels = if self.labels.is_empty() {
            rhs.labels.clone()
        } else {
            self.labels.clone()
        };
        out
    }
}

/// Commutative algebras a characteristic-class polynomial can be evaluated in.
pub trait ClassAlgebra: Clone {
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn scale(&self, c: &BigRational) -> Self;
}

impl ClassAlgebra for CharClassPoly {
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, c: &BigRational) -> Self {
        CharClassPoly::scale(self, c)
    }
}

impl ClassAlgebra for BigRational {
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, c: &BigRational) -> Self {
        self * c
    }
}

impl ClassAlgebra for f64 {
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, c: &BigRational) -> Self {
        self * rational_to_f64(c)
    }
}

impl ClassAlgebra for Complex64 {
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, c: &BigRational) -> Self {
        self * rational_to_f64(c)
    }
}

pub fn rational_to_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or(f64::NAN)
}

pub fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancellation_removes_terms() {
        let c1 = CharClassPoly::var(Variable::chern(1));
        let zero = &c1 - &c1;
        assert!(zero.is_zero());
        assert_eq!(zero.to_string(), "0");
    }

    #[test]
    fn rendering_is_canonical() {
        let c1 = CharClassPoly::var(Variable::chern(1));
        let c2 = CharClassPoly::var(Variable::chern(2));
        let p = &(&c1 * &c1) - &c2;
        assert_eq!(p.to_string(), "c1^2 - c2");
        let q = &c2 - &(&c1 * &c1);
        assert_eq!(q.to_string(), "-c1^2 + c2");
        let half = p.scale(&rational(1, 2));
        assert_eq!(half.to_string(), "1/2*c1^2 - 1/2*c2");
    }

    #[test]
    fn grevlex_prefers_smaller_last_exponent() {
        let c1 = Monomial::var(Variable::chern(1));
        let c2 = Monomial::var(Variable::chern(2));
        let c1c1 = c1.mul(&c1);
        assert!(c1c1 > c2);
        assert!(c1 < c2);
    }
}
