use super::{NilpotentPolynomial, STRUCTURE_TOL};
use crate::error::{Error, Result};

/// A split of the atoms `0..num_atoms` into two nonempty complementary parts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bipartition {
    num_atoms: usize,
    part_a: u64,
}

impl Bipartition {
    pub fn new(num_atoms: usize, part_a: &[usize]) -> Result<Self> {
        if num_atoms == 0 || num_atoms > super::MAX_ATOMS {
            return Err(Error::InvalidBipartition(format!("{num_atoms} atoms")));
        }
        let mut mask = 0u64;
        for &a in part_a {
            if a >= num_atoms {
                return Err(Error::AtomOutOfRange { index: a, num_atoms });
            }
            if mask & (1 << a) != 0 {
                return Err(Error::InvalidBipartition(format!("atom {a} listed twice")));
            }
            mask |= 1 << a;
        }
        Self::from_mask(num_atoms, mask)
    }

    pub fn from_mask(num_atoms: usize, part_a: u64) -> Result<Self> {
        let full = full_mask(num_atoms);
        if part_a & !full != 0 {
            return Err(Error::InvalidBipartition("part A contains atoms out of range".into()));
        }
        if part_a == 0 || part_a == full {
            return Err(Error::InvalidBipartition("both parts must be nonempty".into()));
        }
        Ok(Self { num_atoms, part_a })
    }

    /// Atoms `0..size_a` in part A, the rest in part B.
    pub fn leading(num_atoms: usize, size_a: usize) -> Result<Self> {
        Self::from_mask(num_atoms, full_mask(size_a.min(num_atoms)))
    }

    pub fn num_atoms(&self) -> usize {
        self.num_atoms
    }

    pub fn mask_a(&self) -> u64 {
        self.part_a
    }

    pub fn mask_b(&self) -> u64 {
        full_mask(self.num_atoms) & !self.part_a
    }

    pub fn size_a(&self) -> usize {
        self.part_a.count_ones() as usize
    }

    pub fn size_b(&self) -> usize {
        self.num_atoms - self.size_a()
    }

    /// Every nontrivial cut of `num_atoms` atoms, each listed once.
    pub fn all(num_atoms: usize) -> Vec<Bipartition> {
        let full = full_mask(num_atoms);
        // fix the last atom in part B so each cut appears once
        let top = 1u64 << (num_atoms - 1);
        (1..top)
            .filter(|m| m & full == *m)
            .map(|m| Bipartition { num_atoms, part_a: m })
            .collect()
    }
}

pub(crate) fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl NilpotentPolynomial {
    /// Separability of a nilpotential across `cut`: true iff no monomial with
    /// coefficient above [`STRUCTURE_TOL`] touches both sides.
    pub fn is_separable(&self, cut: &Bipartition) -> bool {
        let (a, b) = (cut.mask_a(), cut.mask_b());
        self.terms()
            .filter(|(_, c)| c.norm() > STRUCTURE_TOL)
            .all(|(m, _)| m.mask() & a == 0 || m.mask() & b == 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nilpotent::Monomial;
    use num_complex::Complex64 as C64;

    fn poly(n: usize, terms: &[(&[usize], f64)]) -> NilpotentPolynomial {
        NilpotentPolynomial::from_terms(n, 0, terms.iter().map(|(a, c)| (Monomial::new(a, 0), C64::new(*c, 0.0))))
            .unwrap()
    }

    #[test]
    fn separability_examples() {
        let cut = Bipartition::new(2, &[0]).unwrap();
        assert!(poly(2, &[(&[0], 1.0), (&[1], 1.0)]).is_separable(&cut));
        assert!(!poly(2, &[(&[0, 1], 1.0)]).is_separable(&cut));
        let cut = Bipartition::new(3, &[0, 1]).unwrap();
        assert!(poly(3, &[(&[0, 1], 1.0), (&[2], 1.0)]).is_separable(&cut));
    }

    #[test]
    fn tiny_cross_terms_are_ignored() {
        let cut = Bipartition::new(2, &[0]).unwrap();
        assert!(poly(2, &[(&[0, 1], 1e-13)]).is_separable(&cut));
        assert!(!poly(2, &[(&[0, 1], 1e-11)]).is_separable(&cut));
    }

    #[test]
    fn invalid_cuts() {
        assert!(Bipartition::new(2, &[]).is_err());
        assert!(Bipartition::new(2, &[0, 1]).is_err());
        assert!(Bipartition::new(2, &[2]).is_err());
        assert!(Bipartition::new(3, &[0, 0]).is_err());
    }

    #[test]
    fn enumerates_each_cut_once() {
        assert_eq!(Bipartition::all(2).len(), 1);
        assert_eq!(Bipartition::all(4).len(), 7);
        assert_eq!(Bipartition::all(5).len(), 15);
    }
}
