//! Sparse polynomials in commuting nilpotent atomic raising variables
//! σ⁺₀ … σ⁺ₙ₋₁ (with (σ⁺ₙ)² = 0) and a single photon raising variable a†
//! whose power is capped per polynomial.
//!
//! A polynomial `F` stands for the (unnormalized) state `F |O⟩`, where `|O⟩`
//! is the joint vacuum. The atomic variables are stored as a bitmask, so a
//! monomial can never contain the same atom twice. Atom indices are 0-based.

mod canonical;
mod collective;
mod partition;

pub use canonical::{canonicalize, CanonicalForm, CanonicalizeSettings, LocalUnitary};
pub use collective::{binomial, CollectivePolynomial};
pub use partition::Bipartition;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Maximum number of atoms representable by the bitmask encoding.
pub const MAX_ATOMS: usize = 64;

/// Default prune threshold: coefficients with smaller magnitude are dropped.
pub const DEFAULT_PRUNE_EPS: f64 = 1e-300;

/// Coefficient magnitude below which a term counts as absent in structural
/// decisions (separability, symmetry).
pub const STRUCTURE_TOL: f64 = 1e-12;

/// A product `σ⁺_{i₁} σ⁺_{i₂} … (a†)^k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    atoms: u64,
    photons: u32,
}

impl Monomial {
    pub const ONE: Monomial = Monomial { atoms: 0, photons: 0 };

    pub fn new(atoms: &[usize], photons: u32) -> Self {
        let mut mask = 0u64;
        for &a in atoms {
            assert!(a < MAX_ATOMS, "atom index {a} exceeds bitmask width");
            mask |= 1 << a;
        }
        Self { atoms: mask, photons }
    }

    pub fn from_mask(atoms: u64, photons: u32) -> Self {
        Self { atoms, photons }
    }

    pub fn atom(index: usize) -> Self {
        Self::new(&[index], 0)
    }

    pub fn photon(power: u32) -> Self {
        Self { atoms: 0, photons: power }
    }

    pub fn mask(&self) -> u64 {
        self.atoms
    }

    pub fn photons(&self) -> u32 {
        self.photons
    }

    pub fn atom_degree(&self) -> u32 {
        self.atoms.count_ones()
    }

    pub fn contains(&self, atom: usize) -> bool {
        atom < MAX_ATOMS && self.atoms & (1 << atom) != 0
    }

    pub fn atoms(&self) -> impl Iterator<Item = usize> + '_ {
        let mut rest = self.atoms;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }

    /// Product of two monomials, `None` if they share an atom.
    pub fn mul(&self, other: &Monomial) -> Option<Monomial> {
        if self.atoms & other.atoms != 0 {
            None
        } else {
            Some(Monomial { atoms: self.atoms | other.atoms, photons: self.photons + other.photons })
        }
    }
}

// Canonical order: ascending atom-index lists compared lexicographically,
// then photon power.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.atoms().cmp(other.atoms()).then(self.photons.cmp(&other.photons))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for a in self.atoms() {
            if !first {
                f.write_char('·')?;
            }
            write!(f, "s{a}")?;
            first = false;
        }
        if self.photons > 0 {
            if !first {
                f.write_char('·')?;
            }
            write!(f, "a^{}", self.photons)?;
            first = false;
        }
        if first {
            f.write_char('1')?;
        }
        Ok(())
    }
}

/// What to do when a product produces a photon power above the cap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhotonOverflow {
    Error,
    Truncate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CombineMode {
    Add,
    Mul,
}

/// Largest atom count for the dense subset recursion in `log`.
const SUBSET_LOG_MAX_ATOMS: usize = 14;

/// Sparse complex polynomial over nilpotent atomic variables and one capped
/// photon variable.
#[derive(Clone, Debug, PartialEq)]
pub struct NilpotentPolynomial {
    num_atoms: usize,
    photon_cap: u32,
    prune_eps: f64,
    terms: BTreeMap<Monomial, C64>,
}

impl NilpotentPolynomial {
    pub fn zero(num_atoms: usize, photon_cap: u32) -> Self {
        assert!(num_atoms > 0 && num_atoms <= MAX_ATOMS, "num_atoms must be in 1..={MAX_ATOMS}");
        Self { num_atoms, photon_cap, prune_eps: DEFAULT_PRUNE_EPS, terms: BTreeMap::new() }
    }

    pub fn one(num_atoms: usize, photon_cap: u32) -> Self {
        Self::constant(num_atoms, photon_cap, C64::new(1.0, 0.0))
    }

    pub fn constant(num_atoms: usize, photon_cap: u32, c: C64) -> Self {
        let mut p = Self::zero(num_atoms, photon_cap);
        p.add_term(Monomial::ONE, c).expect("constant always fits");
        p
    }

    /// `c σ⁺_atom`
    pub fn atom(num_atoms: usize, photon_cap: u32, atom: usize, c: C64) -> Result<Self> {
        let mut p = Self::zero(num_atoms, photon_cap);
        p.add_term(Monomial::atom(atom), c)?;
        Ok(p)
    }

    /// Builds a polynomial from `(monomial, coefficient)` pairs, summing repeats.
    pub fn from_terms<I>(num_atoms: usize, photon_cap: u32, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Monomial, C64)>,
    {
        let mut p = Self::zero(num_atoms, photon_cap);
        for (m, c) in terms {
            p.add_term(m, c)?;
        }
        Ok(p)
    }

    pub fn with_prune_eps(mut self, eps: f64) -> Self {
        self.prune_eps = eps;
        self.prune();
        self
    }

    pub fn num_atoms(&self) -> usize {
        self.num_atoms
    }

    pub fn photon_cap(&self) -> u32 {
        self.photon_cap
    }

    pub fn prune_eps(&self) -> f64 {
        self.prune_eps
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in canonical monomial order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> C64 {
        self.terms.get(m).copied().unwrap_or_default()
    }

    pub fn constant_term(&self) -> C64 {
        self.coeff(&Monomial::ONE)
    }

    pub fn max_photon_power(&self) -> u32 {
        self.terms.keys().map(|m| m.photons).max().unwrap_or(0)
    }

    pub fn max_atom_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.atom_degree()).max().unwrap_or(0)
    }

    /// Same polynomial re-homed with a different photon cap.
    pub fn with_photon_cap(&self, cap: u32) -> Result<Self> {
        if self.max_photon_power() > cap {
            return Err(Error::PhotonOverflow { power: self.max_photon_power(), cap });
        }
        let mut p = self.clone();
        p.photon_cap = cap;
        Ok(p)
    }

    fn check_monomial(&self, m: &Monomial) -> Result<()> {
        if self.num_atoms < MAX_ATOMS && m.atoms >> self.num_atoms != 0 {
            let index = (63 - m.atoms.leading_zeros()) as usize;
            return Err(Error::AtomOutOfRange { index, num_atoms: self.num_atoms });
        }
        if m.photons > self.photon_cap {
            return Err(Error::PhotonOverflow { power: m.photons, cap: self.photon_cap });
        }
        Ok(())
    }

    /// Adds `c · m` in place.
    pub fn add_term(&mut self, m: Monomial, c: C64) -> Result<()> {
        self.check_monomial(&m)?;
        let eps = self.prune_eps;
        let entry = self.terms.entry(m).or_default();
        *entry += c;
        if entry.norm() <= eps {
            self.terms.remove(&m);
        }
        Ok(())
    }

    fn prune(&mut self) {
        let eps = self.prune_eps;
        self.terms.retain(|_, c| c.norm() > eps);
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.num_atoms != other.num_atoms || self.photon_cap != other.photon_cap {
            return Err(Error::DimensionMismatch(format!(
                "({} atoms, cap {}) vs ({} atoms, cap {})",
                self.num_atoms, self.photon_cap, other.num_atoms, other.photon_cap
            )));
        }
        Ok(())
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut p = self.clone();
        for v in p.terms.values_mut() {
            *v *= c;
        }
        p.prune();
        p
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut p = self.clone();
        for (m, c) in &other.terms {
            p.add_term(*m, *c)?;
        }
        Ok(p)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.try_add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Product with `(σ⁺ₙ)² = 0`; photon overflow handled per `overflow`.
    pub fn try_mul(&self, other: &Self, overflow: PhotonOverflow) -> Result<Self> {
        self.check_compatible(other)?;
        let mut acc: HashMap<Monomial, C64> = HashMap::with_capacity(self.len() * other.len());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let Some(m) = ma.mul(mb) else { continue };
                if m.photons > self.photon_cap {
                    match overflow {
                        PhotonOverflow::Truncate => continue,
                        PhotonOverflow::Error => {
                            return Err(Error::PhotonOverflow { power: m.photons, cap: self.photon_cap })
                        }
                    }
                }
                *acc.entry(m).or_default() += ca * cb;
            }
        }
        let eps = self.prune_eps;
        Ok(Self {
            num_atoms: self.num_atoms,
            photon_cap: self.photon_cap,
            prune_eps: eps,
            terms: acc.into_iter().filter(|(_, c)| c.norm() > eps).collect(),
        })
    }

    /// Exact sum or product of two polynomials sharing the same space.
    pub fn combine(&self, other: &Self, mode: CombineMode, overflow: PhotonOverflow) -> Result<Self> {
        match mode {
            CombineMode::Add => self.try_add(other),
            CombineMode::Mul => self.try_mul(other, overflow),
        }
    }

    /// Longest possible chain of products of terms without constant part.
    fn nilpotency_bound(&self) -> usize {
        self.num_atoms + self.photon_cap as usize
    }

    /// `exp(f) = Σ fᵏ / k!` for `f` without constant term. The series
    /// terminates because every product raises the total degree.
    pub fn exp(&self, overflow: PhotonOverflow) -> Result<Self> {
        let c0 = self.constant_term();
        if c0 != C64::default() {
            return Err(Error::NonzeroConstant(format!("{c0}")));
        }
        let mut result = Self::one(self.num_atoms, self.photon_cap).with_prune_eps(self.prune_eps);
        let mut power = result.clone();
        for k in 1..=self.nilpotency_bound() {
            power = power.try_mul(self, overflow)?.scale(C64::new(1.0 / k as f64, 0.0));
            if power.is_empty() {
                break;
            }
            result = result.try_add(&power)?;
        }
        Ok(result)
    }

    /// Nilpotential: `f` with zero constant term such that `exp(f) = F / F(vacuum)`.
    pub fn log(&self, overflow: PhotonOverflow) -> Result<Self> {
        let c0 = self.constant_term();
        if c0.norm() == 0.0 {
            return Err(Error::ZeroVacuum);
        }
        if self.max_photon_power() == 0 && self.num_atoms <= SUBSET_LOG_MAX_ATOMS {
            return Ok(self.log_by_subsets(c0));
        }
        let mut x = self.scale(c0.inv());
        x.terms.remove(&Monomial::ONE);
        let mut result = Self::zero(self.num_atoms, self.photon_cap).with_prune_eps(self.prune_eps);
        let mut power = Self::one(self.num_atoms, self.photon_cap).with_prune_eps(self.prune_eps);
        for k in 1..=self.nilpotency_bound() {
            power = power.try_mul(&x, overflow)?;
            if power.is_empty() {
                break;
            }
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            result = result.try_add(&power.scale(C64::new(sign / k as f64, 0.0)))?;
        }
        Ok(result)
    }

    /// Photon-free logarithm from `∂ₚF = (∂ₚf) F`: with `p` the lowest atom
    /// of `S`, `F_S = Σ_{p ∈ T ⊆ S} f_T F_{S∖T}`. Unlike the alternating
    /// series, a product state leaves only single rounding errors on the
    /// cross terms.
    fn log_by_subsets(&self, c0: C64) -> Self {
        let dim = 1usize << self.num_atoms;
        let mut big = vec![C64::default(); dim];
        for (m, c) in &self.terms {
            big[m.mask() as usize] = c / c0;
        }
        let mut f = vec![C64::default(); dim];
        for s in 1..dim {
            let p = s & s.wrapping_neg();
            let rest = s ^ p;
            let mut acc = big[s];
            // T = {p} ∪ U over proper subsets U of rest
            let mut u = rest;
            while u != 0 {
                u = (u - 1) & rest;
                let (ft, fr) = (f[p | u], big[rest ^ u]);
                if ft != C64::default() && fr != C64::default() {
                    acc -= ft * fr;
                }
            }
            f[s] = acc;
        }
        let mut out = Self::zero(self.num_atoms, self.photon_cap).with_prune_eps(self.prune_eps);
        for (mask, c) in f.into_iter().enumerate().skip(1) {
            if c != C64::default() {
                out.add_term(Monomial::from_mask(mask as u64, 0), c).expect("photon-free");
            }
        }
        out
    }

    /// Terms with photon power `d`, with the photon variable removed.
    pub fn photon_shell(&self, d: u32) -> Self {
        let mut p = Self::zero(self.num_atoms, 0).with_prune_eps(self.prune_eps);
        for (m, c) in &self.terms {
            if m.photons == d {
                p.terms.insert(Monomial::from_mask(m.atoms, 0), *c);
            }
        }
        p
    }

    /// Largest coefficient-wise distance to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for (m, c) in &self.terms {
            worst = worst.max((c - other.coeff(m)).norm());
        }
        for (m, c) in &other.terms {
            if !self.terms.contains_key(m) {
                worst = worst.max(c.norm());
            }
        }
        worst
    }

    /// Squared norm of the state `F|O⟩`, using ⟨0|aᵏ(a†)ᵏ|0⟩ = k!.
    pub fn state_norm_sqr(&self) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| c.norm_sqr() * factorial(m.photons))
            .sum()
    }

    /// Relabels atoms: atom `i` becomes `perm[i]`.
    pub fn permute_atoms(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_atoms {
            return Err(Error::DimensionMismatch(format!(
                "permutation of length {} for {} atoms",
                perm.len(),
                self.num_atoms
            )));
        }
        let mut p = Self::zero(self.num_atoms, self.photon_cap).with_prune_eps(self.prune_eps);
        for (m, c) in &self.terms {
            let mut mask = 0u64;
            for a in m.atoms() {
                mask |= 1 << perm[a];
            }
            p.add_term(Monomial::from_mask(mask, m.photons), *c)?;
        }
        Ok(p)
    }

    /// Amplitude vector over the 2ᴺ atomic basis (index bit n = atom n
    /// excited). Requires a photon-free polynomial.
    pub fn to_atomic_amplitudes(&self) -> Result<Vec<C64>> {
        if self.max_photon_power() > 0 {
            return Err(Error::InvalidParameter("polynomial contains the photon variable".into()));
        }
        if self.num_atoms > 30 {
            return Err(Error::InvalidParameter(format!("{} atoms too many for a dense vector", self.num_atoms)));
        }
        let mut v = vec![C64::default(); 1 << self.num_atoms];
        for (m, c) in &self.terms {
            v[m.atoms as usize] = *c;
        }
        Ok(v)
    }

    pub fn from_atomic_amplitudes(num_atoms: usize, amplitudes: &[C64]) -> Result<Self> {
        if amplitudes.len() != 1 << num_atoms {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for {} atoms",
                amplitudes.len(),
                num_atoms
            )));
        }
        let mut p = Self::zero(num_atoms, 0);
        for (mask, c) in amplitudes.iter().enumerate() {
            if c.norm() > p.prune_eps {
                p.terms.insert(Monomial::from_mask(mask as u64, 0), *c);
            }
        }
        Ok(p)
    }

    /// One term per line: `re im photon_power atom_indices…`, in canonical
    /// order, with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (m, c) in &self.terms {
            write!(out, "{} {} {}", fmt_f64(c.re), fmt_f64(c.im), m.photons).unwrap();
            for a in m.atoms() {
                write!(out, " {a}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(num_atoms: usize, photon_cap: u32, text: &str) -> Result<Self> {
        let mut p = Self::zero(num_atoms, photon_cap);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::Config(format!("line {}: {what}", lineno + 1));
            let mut fields = line.split_whitespace();
            let re: f64 = fields.next().ok_or_else(|| bad("missing re"))?.parse().map_err(|_| bad("bad re"))?;
            let im: f64 = fields.next().ok_or_else(|| bad("missing im"))?.parse().map_err(|_| bad("bad im"))?;
            let photons: u32 = fields
                .next()
                .ok_or_else(|| bad("missing photon power"))?
                .parse()
                .map_err(|_| bad("bad photon power"))?;
            let atoms = fields
                .map(|f| f.parse::<usize>().map_err(|_| bad("bad atom index")))
                .collect::<Result<Vec<_>>>()?;
            if let Some(&a) = atoms.iter().find(|&&a| a >= num_atoms) {
                return Err(Error::AtomOutOfRange { index: a, num_atoms });
            }
            let m = Monomial::new(&atoms, photons);
            if m.atom_degree() as usize != atoms.len() {
                return Err(bad("repeated atom index"));
            }
            p.add_term(m, C64::new(re, im))?;
        }
        Ok(p)
    }
}

impl fmt::Display for NilpotentPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                f.write_str(" + ")?;
            }
            write!(f, "({:.6}{:+.6}i) {}", c.re, c.im, m)?;
            first = false;
        }
        Ok(())
    }
}

/// `k!` as a float.
pub fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Fixed 17-significant-digit float formatting used by every text output.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // normalizes -0.0 as well
        return "0".to_string();
    }
    format!("{:.16e}", x)
}
