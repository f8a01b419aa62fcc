//! Joint atoms + cavity state `exp[a†Ô + Ĝ]|O⟩` with `Ô = Σ Iₙσ⁺ₙ` and
//! `Ĝ = Σ_{n<m} (Iₙₘ + Iₘₙ) σ⁺ₙσ⁺ₘ`, its exact norm, and the Gaussian
//! normalization estimate built from the matrices `M` and `B`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::coupling::CouplingCoefficients;
use crate::error::{Error, Result};
use crate::nilpotent::{fmt_f64, Monomial, NilpotentPolynomial, PhotonOverflow};

/// Condition number above which `M` counts as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Debug)]
pub struct JointState {
    /// Unnormalized expansion; the vacuum coefficient is 1.
    pub polynomial: NilpotentPolynomial,
    pub norm: f64,
    pub coefficients: CouplingCoefficients,
}

/// `a† Ô`: the part of the exponent that creates photons.
pub fn photon_operator(c: &CouplingCoefficients) -> Result<NilpotentPolynomial> {
    let n = c.num_atoms();
    NilpotentPolynomial::from_terms(n, n as u32, (0..n).map(|i| (Monomial::new(&[i], 1), c.linear[i])))
}

/// `Ô = Σ Iₙ σ⁺ₙ` as an atomic polynomial.
pub fn atomic_operator(c: &CouplingCoefficients) -> Result<NilpotentPolynomial> {
    let n = c.num_atoms();
    NilpotentPolynomial::from_terms(n, 0, (0..n).map(|i| (Monomial::atom(i), c.linear[i])))
}

/// `Ĝ` as an atomic polynomial with cap `photon_cap`.
pub fn pair_operator(c: &CouplingCoefficients, photon_cap: u32) -> Result<NilpotentPolynomial> {
    let n = c.num_atoms();
    let mut g = NilpotentPolynomial::zero(n, photon_cap);
    for i in 0..n {
        for j in i + 1..n {
            g.add_term(Monomial::new(&[i, j], 0), c.pair_weight(i, j))?;
        }
    }
    Ok(g)
}

pub fn build_joint_state(c: &CouplingCoefficients) -> Result<JointState> {
    let n = c.num_atoms();
    let exponent = photon_operator(c)?.try_add(&pair_operator(c, n as u32)?)?;
    // each a† comes with a distinct σ⁺, so the photon power never exceeds N
    let polynomial = exponent.exp(PhotonOverflow::Error)?;
    debug_assert!(polynomial.terms().all(|(m, _)| m.photons() <= m.atom_degree()));
    let norm = polynomial.state_norm_sqr().sqrt();
    Ok(JointState { polynomial, norm, coefficients: c.clone() })
}

impl JointState {
    pub fn num_atoms(&self) -> usize {
        self.polynomial.num_atoms()
    }

    pub fn exact_norm(&self) -> f64 {
        self.norm
    }

    /// Probability that `atom` is excited in the normalized state.
    pub fn excitation_probability(&self, atom: usize) -> Result<f64> {
        if atom >= self.num_atoms() {
            return Err(Error::AtomOutOfRange { index: atom, num_atoms: self.num_atoms() });
        }
        let excited: f64 = self
            .polynomial
            .terms()
            .filter(|(m, _)| m.contains(atom))
            .map(|(m, c)| c.norm_sqr() * crate::nilpotent::factorial(m.photons()))
            .sum();
        Ok(excited / (self.norm * self.norm))
    }

    /// Born probability of finding `d` photons.
    pub fn photon_probability(&self, d: u32) -> f64 {
        self.polynomial.photon_shell(d).state_norm_sqr() * crate::nilpotent::factorial(d) / (self.norm * self.norm)
    }

    /// Small JSON object with the norm and per-atom excitation probabilities.
    pub fn summary_json(&self) -> String {
        let mut out = String::from("{");
        write!(out, "\"num_atoms\":{},\"norm\":{},\"excitation_probabilities\":[", self.num_atoms(), fmt_f64(self.norm))
            .unwrap();
        for i in 0..self.num_atoms() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(self.excitation_probability(i).unwrap_or(f64::NAN)));
        }
        out.push_str("]}");
        out
    }
}

pub fn exact_norm(s: &JointState) -> f64 {
    s.exact_norm()
}

/// The matrices entering `|A|² ≈ det M⁻¹ / det B`.
#[derive(Clone, Debug)]
pub struct GaussianNormInputs {
    /// `2N×2N`, Hermitian.
    pub m: DMatrix<C64>,
    /// Swap block `[[0, 1], [1, 0]]`, the same size as `M`.
    pub v: DMatrix<C64>,
    /// `[[V, V], [V, V − M⁻¹]]`.
    pub b: DMatrix<C64>,
    pub condition: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct GaussianNorm {
    /// `|det M⁻¹ / det B|`.
    pub value: f64,
    /// The complex ratio before taking the modulus.
    pub ratio: C64,
    pub condition: f64,
}

/// Assembles `M`, `V` and `B`. The printed swap block carries identity
/// blocks of size `2N`, which cannot be combined with the `2N×2N` inverse
/// `M⁻¹`; the swap block is therefore sized to match `M`.
pub fn gaussian_inputs(c: &CouplingCoefficients) -> Result<GaussianNormInputs> {
    let n = c.num_atoms();
    let lin = &c.linear;
    let pair = c.symmetrized_pair();
    let m = DMatrix::from_fn(2 * n, 2 * n, |r, col| match (r < n, col < n) {
        (true, true) => lin[r] * lin[col].conj() * 0.5,
        (true, false) => pair[(r, col - n)],
        (false, true) => pair[(col, r - n)].conj(),
        (false, false) => lin[col - n] * lin[r - n].conj() * 0.5,
    });
    let sv = m.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::DegenerateNorm { condition });
    }
    let m_inv = m.clone().try_inverse().ok_or(Error::DegenerateNorm { condition })?;
    let one = C64::new(1.0, 0.0);
    let v = DMatrix::from_fn(2 * n, 2 * n, |r, col| if (r + n) % (2 * n) == col { one } else { C64::default() });
    let mut b = DMatrix::zeros(4 * n, 4 * n);
    b.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&v);
    b.view_mut((0, 2 * n), (2 * n, 2 * n)).copy_from(&v);
    b.view_mut((2 * n, 0), (2 * n, 2 * n)).copy_from(&v);
    b.view_mut((2 * n, 2 * n), (2 * n, 2 * n)).copy_from(&(&v - &m_inv));
    Ok(GaussianNormInputs { m, v, b, condition })
}

/// Gaussian estimate of the squared normalization. Diagnostic only: the
/// exact norm comes from [`JointState::exact_norm`].
pub fn gaussian_norm(c: &CouplingCoefficients) -> Result<GaussianNorm> {
    let inputs = gaussian_inputs(c)?;
    let det_m = inputs.m.clone().determinant();
    let det_b = inputs.b.clone().determinant();
    let ratio = (det_m * det_b).inv();
    if !ratio.re.is_finite() || !ratio.im.is_finite() {
        return Err(Error::DegenerateNorm { condition: inputs.condition });
    }
    Ok(GaussianNorm { value: ratio.norm(), ratio, condition: inputs.condition })
}
