use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64 as C64;

use super::{factorial, Bipartition, Monomial, NilpotentPolynomial, STRUCTURE_TOL};
use crate::error::{Error, Result};

/// Polynomial `Σ β_{k,l} (σ⁺_A)ᵏ (σ⁺_B)ˡ` in the collective variables
/// `σ⁺_X = Σ_{n∈X} σ⁺ₙ` of two ensembles.
#[derive(Clone, Debug, PartialEq)]
pub struct CollectivePolynomial {
    sizes: (usize, usize),
    terms: BTreeMap<(u32, u32), C64>,
}

impl CollectivePolynomial {
    pub fn sizes(&self) -> (usize, usize) {
        self.sizes
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32), &C64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, k: u32, l: u32) -> C64 {
        self.terms.get(&(k, l)).copied().unwrap_or_default()
    }

    /// Whether any term couples both ensembles above `tol`.
    pub fn has_cross_terms(&self, tol: f64) -> bool {
        self.terms.iter().any(|(&(k, l), c)| k > 0 && l > 0 && c.norm() > tol)
    }

    /// Rewrites a polynomial that is symmetric within each part of `split` in
    /// collective variables, using `(σ⁺_X)ᵏ = k! Σ_{|S|=k} Π_{n∈S} σ⁺ₙ`.
    pub fn from_atomic(p: &NilpotentPolynomial, split: &Bipartition) -> Result<Self> {
        if p.max_photon_power() > 0 {
            return Err(Error::InvalidParameter("collective form needs a photon-free polynomial".into()));
        }
        if p.num_atoms() != split.num_atoms() {
            return Err(Error::DimensionMismatch(format!(
                "{}-atom polynomial, {}-atom split",
                p.num_atoms(),
                split.num_atoms()
            )));
        }
        let (mask_a, mask_b) = (split.mask_a(), split.mask_b());
        let (na, nb) = (split.size_a(), split.size_b());

        let mut groups: HashMap<(u32, u32), Vec<C64>> = HashMap::new();
        for (m, c) in p.terms() {
            let k = (m.mask() & mask_a).count_ones();
            let l = (m.mask() & mask_b).count_ones();
            groups.entry((k, l)).or_default().push(*c);
        }

        let mut terms = BTreeMap::new();
        let mut deviation: f64 = 0.0;
        for ((k, l), coeffs) in groups {
            let expected = binomial(na, k as usize) * binomial(nb, l as usize);
            let reference = coeffs[0];
            for c in &coeffs {
                deviation = deviation.max((c - reference).norm());
            }
            if (coeffs.len() as f64) < expected {
                // missing monomials are zero coefficients
                deviation = deviation.max(coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max));
            }
            let beta = reference / (factorial(k) * factorial(l));
            if beta.norm() > 0.0 {
                terms.insert((k, l), beta);
            }
        }
        if deviation > STRUCTURE_TOL {
            return Err(Error::Asymmetric(deviation));
        }
        Ok(Self { sizes: (na, nb), terms })
    }

    /// Expands back into atomic variables.
    pub fn to_atomic(&self, split: &Bipartition) -> Result<NilpotentPolynomial> {
        if (split.size_a(), split.size_b()) != self.sizes {
            return Err(Error::DimensionMismatch(format!(
                "collective sizes {:?} vs split sizes {:?}",
                self.sizes,
                (split.size_a(), split.size_b())
            )));
        }
        let subs_a = submasks(split.mask_a());
        let subs_b = submasks(split.mask_b());
        let mut p = NilpotentPolynomial::zero(split.num_atoms(), 0);
        for (&(k, l), beta) in &self.terms {
            let c = beta * (factorial(k) * factorial(l));
            for sa in subs_a.iter().filter(|m| m.count_ones() == k) {
                for sb in subs_b.iter().filter(|m| m.count_ones() == l) {
                    p.add_term(Monomial::from_mask(sa | sb, 0), c)?;
                }
            }
        }
        Ok(p)
    }
}

fn submasks(mask: u64) -> Vec<u64> {
    let mut out = vec![0];
    let mut sub = mask;
    while sub != 0 {
        out.push(sub);
        sub = (sub - 1) & mask;
    }
    out
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl NilpotentPolynomial {
    pub fn to_collective(&self, split: &Bipartition) -> Result<CollectivePolynomial> {
        CollectivePolynomial::from_atomic(self, split)
    }
}
