//! Exact symbolic algebra of characteristic classes.
//!
//! Polynomials live in formal variables `c_i`, `s_i` and `ch_i`, one family per
//! bundle slot. Coefficients are exact rationals; nothing here touches floating
//! point except the optional evaluation into `f64`/`Complex64` algebras.

mod partition;
mod poly;

pub use partition::{partitions, Partition};
pub use poly::{
    rational, rational_to_f64, CharClassPoly, ClassAlgebra, Family, Monomial, Variable,
};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_DEGREE: usize = 10;

/// A bundle taking part in a multi-bundle identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleSlot {
    pub label: String,
    pub rank: usize,
}

impl BundleSlot {
    pub fn new(label: impl Into<String>, rank: usize) -> Result<Self> {
        if rank == 0 {
            return Err(Error::Config("bundle rank must be at least 1".into()));
        }
        Ok(BundleSlot {
            label: label.into(),
            rank,
        })
    }
}

/// Characteristic-class identities up to a fixed maximum degree.
#[derive(Debug, Clone, Copy)]
pub struct CharClassAlgebra {
    max_degree: usize,
}

impl Default for CharClassAlgebra {
    fn default() -> Self {
        CharClassAlgebra {
            max_degree: DEFAULT_MAX_DEGREE,
        }
    }
}

fn chern_in(slot: u8, i: usize) -> CharClassPoly {
    if i == 0 {
        CharClassPoly::one()
    } else {
        CharClassPoly::var(Variable::chern(i as u32).in_slot(slot))
    }
}

fn segre_in(slot: u8, i: usize) -> CharClassPoly {
    if i == 0 {
        CharClassPoly::one()
    } else {
        CharClassPoly::var(Variable::segre(i as u32).in_slot(slot))
    }
}

impl CharClassAlgebra {
    pub fn new(max_degree: usize) -> Self {
        CharClassAlgebra { max_degree }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    fn check(&self, k: usize) -> Result<()> {
        if k > self.max_degree {
            Err(Error::DegreeOverflow {
                degree: k,
                max: self.max_degree,
            })
        } else {
            Ok(())
        }
    }

    /// Inverts `1 + x_1 + x_2 + ...` up to degree `k`: returns `y_0..=y_k` with
    /// `y_j = -(x_1 y_{j-1} + ... + x_j)`.
    fn invert_series(k: usize, x: impl Fn(usize) -> CharClassPoly) -> Vec<CharClassPoly> {
        let mut y = vec![CharClassPoly::one()];
        for j in 1..=k {
            let mut acc = CharClassPoly::zero();
            for i in 1..=j {
                acc = &acc + &(&x(i) * &y[j - i]);
            }
            y.push(-&acc);
        }
        y
    }

    /// `s_k` in terms of `c_1..c_k`.
    pub fn segre_to_chern(&self, k: usize) -> Result<CharClassPoly> {
        self.check(k)?;
        Ok(Self::invert_series(k, |i| chern_in(0, i)).swap_remove(k))
    }

    /// `c_k` in terms of `s_1..s_k`.
    pub fn chern_to_segre(&self, k: usize) -> Result<CharClassPoly> {
        self.check(k)?;
        Ok(Self::invert_series(k, |i| segre_in(0, i)).swap_remove(k))
    }

    /// The coefficients `a_K` of `c_k = sum_K a_K s_{k_1} ... s_{k_m}`, one per partition of `k`.
    pub fn chern_segre_coefficients(&self, k: usize) -> Result<Vec<(Partition, BigRational)>> {
        let poly = self.chern_to_segre(k)?;
        Ok(partition_coefficients(&poly))
    }

    /// `ch_k` in terms of `c_1..c_k` for a bundle of rank `rank` (Newton's identities).
    pub fn chern_character(&self, k: usize, rank: usize) -> CharClassPoly {
        Self::chern_character_in(0, k, rank)
    }

    fn chern_character_in(slot: u8, k: usize, rank: usize) -> CharClassPoly {
        // power sums p_j of the Chern roots
        let mut p: Vec<CharClassPoly> = vec![CharClassPoly::integer(rank as i64)];
        for j in 1..=k {
            let mut acc = CharClassPoly::zero();
            for i in 1..j {
                let term = &chern_in(slot, i) * &p[j - i];
                acc = if (i - 1) % 2 == 0 {
                    &acc + &term
                } else {
                    &acc - &term
                };
            }
            let last = chern_in(slot, j).scale(&BigRational::from_integer(BigInt::from(j)));
            acc = if (j - 1) % 2 == 0 {
                &acc + &last
            } else {
                &acc - &last
            };
            p.push(acc);
        }
        let factorial: BigInt = (1..=k).map(BigInt::from).product();
        p.swap_remove(k)
            .scale(&BigRational::new(BigInt::one(), factorial))
    }

    /// The coefficients `b_K` of `ch_k = sum_K b_K c_{k_1} ... c_{k_m}`.
    pub fn character_chern_coefficients(&self, k: usize, rank: usize) -> Vec<(Partition, BigRational)> {
        partition_coefficients(&self.chern_character(k, rank))
    }

    /// `c_k(E ⊕ F) = sum_j c_j(E) c_{k-j}(F)`.
    pub fn whitney_sum(&self, k: usize, first: &BundleSlot, second: &BundleSlot) -> CharClassPoly {
        let mut acc = CharClassPoly::zero();
        for j in 0..=k {
            acc = &acc + &(&chern_in(0, j) * &chern_in(1, k - j));
        }
        acc.with_labels(vec![first.label.clone(), second.label.clone()])
    }

    /// `c_k(E^*) = (-1)^k c_k(E)`.
    pub fn dual_class(&self, k: usize) -> CharClassPoly {
        let c = chern_in(0, k);
        if k % 2 == 0 {
            c
        } else {
            -&c
        }
    }

    /// `ch_k(E ⊗ F) = sum_j ch_j(E) ch_{k-j}(F)`, expanded in Chern variables.
    pub fn ch_tensor(&self, k: usize, first: &BundleSlot, second: &BundleSlot) -> CharClassPoly {
        let mut acc = CharClassPoly::zero();
        for j in 0..=k {
            let a = Self::chern_character_in(0, j, first.rank);
            let b = Self::chern_character_in(1, k - j, second.rank);
            acc = &acc + &(&a * &b);
        }
        acc.with_labels(vec![first.label.clone(), second.label.clone()])
    }

    /// Total Chern class `1 + c_1 + ... + c_N` with `N` the maximum degree.
    pub fn total_chern(&self) -> CharClassPoly {
        (0..=self.max_degree).fold(CharClassPoly::zero(), |acc, i| &acc + &chern_in(0, i))
    }

    /// Total Segre class expressed in Chern variables, truncated at the maximum degree.
    pub fn total_segre_in_chern(&self) -> Result<CharClassPoly> {
        let mut acc = CharClassPoly::zero();
        for i in 0..=self.max_degree {
            acc = &acc + &self.segre_to_chern(i)?;
        }
        Ok(acc)
    }
}

/// Reads a single-slot polynomial as `sum_K a_K x_{k_1}...x_{k_m}`, indexing each
/// monomial by the partition of its variable indices.
pub fn partition_coefficients(poly: &CharClassPoly) -> Vec<(Partition, BigRational)> {
    let mut out: Vec<(Partition, BigRational)> = poly
        .terms()
        .map(|(m, c)| {
            let mut parts = Vec::new();
            for (v, e) in m.factors() {
                for _ in 0..*e {
                    parts.push(v.index as usize);
                }
            }
            (Partition::new(parts), c.clone())
        })
        .collect();
    out.sort_by(|a, b| b.0.cmp(&a.0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alg() -> CharClassAlgebra {
        CharClassAlgebra::default()
    }

    #[test]
    fn low_degree_segre_classes() {
        let a = alg();
        assert_eq!(a.segre_to_chern(1).unwrap().to_string(), "-c1");
        assert_eq!(a.segre_to_chern(2).unwrap().to_string(), "c1^2 - c2");
        assert_eq!(
            a.segre_to_chern(3).unwrap().to_string(),
            "-c1^3 + 2*c1*c2 - c3"
        );
        assert_eq!(a.chern_to_segre(1).unwrap().to_string(), "-s1");
        assert_eq!(a.chern_to_segre(2).unwrap().to_string(), "s1^2 - s2");
        assert_eq!(
            a.chern_to_segre(3).unwrap().to_string(),
            "-s1^3 + 2*s1*s2 - s3"
        );
    }

    #[test]
    fn degree_overflow_is_reported() {
        let a = CharClassAlgebra::new(4);
        assert_eq!(
            a.segre_to_chern(5),
            Err(Error::DegreeOverflow { degree: 5, max: 4 })
        );
        assert!(a.chern_to_segre(4).is_ok());
    }

    #[test]
    fn chern_character_low_degrees() {
        let a = alg();
        assert_eq!(a.chern_character(0, 3).to_string(), "3");
        assert_eq!(a.chern_character(1, 5).to_string(), "c1");
        assert_eq!(a.chern_character(2, 2).to_string(), "1/2*c1^2 - c2");
    }

    #[test]
    fn whitney_and_duality() {
        let a = alg();
        let e = BundleSlot::new("E", 2).unwrap();
        let f = BundleSlot::new("F", 3).unwrap();
        assert_eq!(a.whitney_sum(0, &e, &f).to_string(), "1");
        assert_eq!(a.whitney_sum(1, &e, &f).to_string(), "c1(E) + c1(F)");
        assert_eq!(
            a.whitney_sum(2, &e, &f).to_string(),
            "c2(E) + c1(E)*c1(F) + c2(F)"
        );
        assert_eq!(a.dual_class(1).to_string(), "-c1");
        assert_eq!(a.dual_class(2).to_string(), "c2");
        assert_eq!(a.dual_class(0).to_string(), "1");
    }

    #[test]
    fn ch_tensor_low_degrees() {
        let a = alg();
        let e = BundleSlot::new("E", 2).unwrap();
        let f = BundleSlot::new("F", 3).unwrap();
        assert_eq!(a.ch_tensor(0, &e, &f).to_string(), "6");
        assert_eq!(a.ch_tensor(1, &e, &f).to_string(), "3*c1(E) + 2*c1(F)");
        let expected = "3/2*c1(E)^2 - 3*c2(E) + c1(E)*c1(F) + c1(F)^2 - 2*c2(F)";
        assert_eq!(a.ch_tensor(2, &e, &f).to_string(), expected);
    }

    #[test]
    fn partition_coefficients_of_c3() {
        let a = alg();
        let coeffs = a.chern_segre_coefficients(3).unwrap();
        let rendered: Vec<String> = coeffs
            .iter()
            .map(|(p, c)| format!("{p}:{c}"))
            .collect();
        assert_eq!(rendered, vec!["(3):-1", "(2,1):2", "(1,1,1):-1"]);
    }

    #[test]
    fn bundle_slot_rank_positive() {
        assert!(BundleSlot::new("E", 0).is_err());
    }
}
