//! Strictly increasing multi-indices stored as bit masks.

/// Bit mask of a strictly increasing index set; bit `i` set means index `i` present.
pub type Mask = u16;

pub fn degree(m: Mask) -> usize {
    m.count_ones() as usize
}

/// Sign `(-1)^{#{(a,b) : a in A, b in B, a > b}}` of merging two sorted index lists.
pub fn merge_sign(a: Mask, b: Mask) -> f64 {
    let mut inversions = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        // elements of a strictly above j
        let above = if j >= 15 { 0 } else { a & !((1u16 << (j + 1)) - 1) };
        inversions += above.count_ones();
        rest &= rest - 1;
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Sign of `dz_{I1} ∧ dzbar_{J1} ∧ dz_{I2} ∧ dzbar_{J2}` relative to
/// `dz_{I1 ∪ I2} ∧ dzbar_{J1 ∪ J2}`; zero if an index repeats.
pub fn wedge_sign(i1: Mask, j1: Mask, i2: Mask, j2: Mask) -> f64 {
    if i1 & i2 != 0 || j1 & j2 != 0 {
        return 0.0;
    }
    let swap = if (degree(j1) * degree(i2)) % 2 == 0 {
        1.0
    } else {
        -1.0
    };
    swap * merge_sign(i1, i2) * merge_sign(j1, j2)
}

/// All masks over `n` indices with exactly `p` elements, increasing numerically.
pub fn subsets(n: usize, p: usize) -> Vec<Mask> {
    (0..(1u32 << n))
        .filter(|m| m.count_ones() as usize == p)
        .map(|m| m as Mask)
        .collect()
}

pub fn full(n: usize) -> Mask {
    ((1u32 << n) - 1) as Mask
}

pub fn elements(m: Mask) -> Vec<usize> {
    (0..16).filter(|i| m & (1 << i) != 0).collect()
}

pub fn from_elements(items: &[usize]) -> Mask {
    items.iter().fold(0, |m, &i| m | (1 << i))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_sign_counts_inversions() {
        assert_eq!(merge_sign(0b01, 0b10), 1.0);
        assert_eq!(merge_sign(0b10, 0b01), -1.0);
        assert_eq!(merge_sign(0b110, 0b001), 1.0);
        assert_eq!(merge_sign(0b100, 0b011), 1.0);
        assert_eq!(merge_sign(0b010, 0b101), -1.0);
    }

    #[test]
    fn wedge_of_one_forms() {
        // dz_1 ∧ dzbar_1 in basis order is +1; dzbar_1 ∧ dz_1 is -1
        assert_eq!(wedge_sign(0b1, 0, 0, 0b1), 1.0);
        assert_eq!(wedge_sign(0, 0b1, 0b1, 0), -1.0);
        assert_eq!(wedge_sign(0b1, 0, 0b1, 0), 0.0);
    }

    #[test]
    fn subsets_have_binomial_counts() {
        assert_eq!(subsets(4, 2).len(), 6);
        assert_eq!(subsets(3, 0), vec![0]);
        assert_eq!(elements(0b1010), vec![1, 3]);
        assert_eq!(from_elements(&[0, 2]), 0b101);
    }
}
