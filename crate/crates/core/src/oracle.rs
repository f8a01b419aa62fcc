//! Brute-force state vectors over `(Fock cutoff) ⊗ 2ᴺ`.
//!
//! Basis index `photons · 2ᴺ + atom_mask`, bit `n` of the mask set when atom
//! `n` is excited. The atom–cavity Hamiltonian
//! `H = ω₀a†a + Σₙ[ωₙσᶻₙ/2 + 𝓔Cₙ(σ⁺ₙ + σ⁻ₙ)(a† + a)]` is taken literally
//! as a Schrödinger-picture operator, counter-rotating terms included.
//! Propagation exponentiates each piecewise-constant segment exactly by
//! Hermitian eigendecomposition.
//!
//! In this frame the amplitude of `|1⟩|1ₙ⟩` relative to the vacuum is
//! `−Iₙ` at first order; the joint state of the analytic expansion
//! therefore corresponds to [`CouplingCoefficients::negated`].
//!
//! [`CouplingCoefficients::negated`]: crate::coupling::CouplingCoefficients::negated

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::control::{KerrParams, PostSelectedState};
use crate::coupling::{integrate_with, ControlSchedule, CouplingCoefficients, PairConvention};
use crate::error::{Error, Result};
use crate::nilpotent::{factorial, NilpotentPolynomial};

/// Largest population tolerated on the top Fock level.
pub const CUTOFF_TOLERANCE: f64 = 1e-8;
/// Largest `max |U†U − 1|` tolerated per propagator.
pub const UNITARITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    pub amplitudes: Vec<C64>,
    pub fock_cutoff: usize,
    pub num_atoms: usize,
}

impl DenseState {
    pub fn vacuum(num_atoms: usize, fock_cutoff: usize) -> Self {
        let mut amplitudes = vec![C64::default(); fock_cutoff << num_atoms];
        amplitudes[0] = C64::new(1.0, 0.0);
        Self { amplitudes, fock_cutoff, num_atoms }
    }

    /// Dense image of `F|O⟩`, with `(a†)ᵏ|0⟩ = √k! |k⟩`.
    pub fn from_polynomial(p: &NilpotentPolynomial, fock_cutoff: usize) -> Result<Self> {
        let mut s = Self { amplitudes: vec![C64::default(); fock_cutoff << p.num_atoms()], fock_cutoff, num_atoms: p.num_atoms() };
        for (m, c) in p.terms() {
            let k = m.photons() as usize;
            if k >= fock_cutoff {
                return Err(Error::CutoffInadequate { cutoff: fock_cutoff, population: c.norm_sqr() });
            }
            let idx = s.index(k, m.mask() as usize);
            s.amplitudes[idx] = c * factorial(k as u32).sqrt();
        }
        Ok(s)
    }

    pub fn dim_atoms(&self) -> usize {
        1 << self.num_atoms
    }

    pub fn index(&self, photons: usize, mask: usize) -> usize {
        (photons << self.num_atoms) | mask
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self { amplitudes: self.amplitudes.iter().map(|c| c / n).collect(), ..self.clone() }
    }

    pub fn photon_population(&self, k: usize) -> f64 {
        let a = self.dim_atoms();
        self.amplitudes[k * a..(k + 1) * a].iter().map(|c| c.norm_sqr()).sum::<f64>() / self.norm().powi(2)
    }

    pub fn top_population(&self) -> f64 {
        self.photon_population(self.fock_cutoff - 1)
    }

    /// Unnormalized atomic amplitudes of the `k`-photon component.
    pub fn photon_component(&self, k: usize) -> Vec<C64> {
        let a = self.dim_atoms();
        self.amplitudes[k * a..(k + 1) * a].to_vec()
    }

    /// `|⟨self|other⟩|` of the normalized vectors.
    pub fn fidelity(&self, other: &DenseState) -> Result<f64> {
        if self.amplitudes.len() != other.amplitudes.len() {
            return Err(Error::DimensionMismatch(format!(
                "dense states of length {} and {}",
                self.amplitudes.len(),
                other.amplitudes.len()
            )));
        }
        Ok(overlap(&self.amplitudes, &other.amplitudes))
    }

    fn check_cutoff(&self) -> Result<()> {
        let population = self.top_population();
        if population > CUTOFF_TOLERANCE {
            return Err(Error::CutoffInadequate { cutoff: self.fock_cutoff, population });
        }
        Ok(())
    }

    /// Applies a `cutoff × cutoff` field operator, identity on the atoms.
    pub fn apply_field(&self, u: &DMatrix<C64>) -> DenseState {
        let a = self.dim_atoms();
        let mut out = vec![C64::default(); self.amplitudes.len()];
        for p in 0..self.fock_cutoff {
            for q in 0..self.fock_cutoff {
                let w = u[(p, q)];
                if w == C64::default() {
                    continue;
                }
                for m in 0..a {
                    out[p * a + m] += w * self.amplitudes[q * a + m];
                }
            }
        }
        DenseState { amplitudes: out, ..self.clone() }
    }
}

/// `|⟨a|b⟩| / (‖a‖‖b‖)`.
pub fn overlap(a: &[C64], b: &[C64]) -> f64 {
    let ip: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na = a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    ip.norm() / (na * nb)
}

/// `exp(−iHt)` of a Hermitian matrix.
pub fn expm_hermitian(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new(0.0, -l * t).exp()));
    v * phases * v.adjoint()
}

fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let d = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for i in 0..d.nrows() {
        for j in 0..d.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((d[(i, j)] - target).norm());
        }
    }
    worst
}

/// Annihilation operator on `cutoff` Fock levels.
pub fn annihilation(cutoff: usize) -> DMatrix<C64> {
    DMatrix::from_fn(cutoff, cutoff, |r, c| if c == r + 1 { C64::new((c as f64).sqrt(), 0.0) } else { C64::default() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationSettings {
    pub fock_cutoff: usize,
    /// Return the state in the frame rotating with `ω₀a†a + Σ ωₙσᶻₙ/2`.
    pub interaction_picture: bool,
    /// Also propagate with every segment split in two halves and report
    /// the fidelity change (it is zero up to rounding because each segment
    /// is exponentiated exactly).
    pub step_halving_check: bool,
}

impl PropagationSettings {
    pub fn for_atoms(num_atoms: usize) -> Self {
        Self { fock_cutoff: num_atoms + 5, interaction_picture: false, step_halving_check: false }
    }
}

#[derive(Clone, Debug)]
pub struct Propagation {
    pub state: DenseState,
    /// Largest per-segment `max |U†U − 1|`.
    pub unitarity_defect: f64,
    /// `1 − |⟨ψ_full|ψ_halved⟩|` when requested.
    pub step_halving_change: Option<f64>,
}

/// Segment Hamiltonian on the full space.
pub fn segment_hamiltonian(s: &ControlSchedule, segment: usize, fock_cutoff: usize) -> DMatrix<C64> {
    let n = s.num_atoms();
    let a = 1usize << n;
    let dim = fock_cutoff * a;
    let seg = &s.segments[segment];
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for p in 0..fock_cutoff {
        for m in 0..a {
            let mut e = s.omega_cavity * p as f64;
            for (i, w) in s.omega_atoms.iter().enumerate() {
                e += if m >> i & 1 == 1 { 0.5 * w } else { -0.5 * w };
            }
            h[(p * a + m, p * a + m)] = C64::new(e, 0.0);
        }
    }
    for (i, &ci) in seg.couplings.iter().enumerate() {
        let g = seg.laser_amplitude * ci;
        if g == 0.0 {
            continue;
        }
        for p in 0..fock_cutoff - 1 {
            let amp = C64::new(g * ((p + 1) as f64).sqrt(), 0.0);
            for m in 0..a {
                // σˣ flips atom i; a† raises p → p + 1
                let from = p * a + m;
                let to = (p + 1) * a + (m ^ (1 << i));
                h[(to, from)] += amp;
                h[(from, to)] += amp;
            }
        }
    }
    h
}

pub fn propagate(s: &ControlSchedule, settings: &PropagationSettings) -> Result<Propagation> {
    propagate_from(&DenseState::vacuum(s.num_atoms(), settings.fock_cutoff), s, settings)
}

pub fn propagate_from(initial: &DenseState, s: &ControlSchedule, settings: &PropagationSettings) -> Result<Propagation> {
    s.validate()?;
    let n = s.num_atoms();
    if initial.num_atoms != n || initial.fock_cutoff != settings.fock_cutoff {
        return Err(Error::DimensionMismatch("initial state does not match schedule and cutoff".into()));
    }
    if settings.fock_cutoff < n + 4 {
        return Err(Error::InvalidParameter(format!("Fock cutoff {} below N + 4 = {}", settings.fock_cutoff, n + 4)));
    }
    let mut psi = nalgebra::DVector::from_vec(initial.amplitudes.clone());
    let mut halved = settings.step_halving_check.then(|| psi.clone());
    let mut defect: f64 = 0.0;
    for k in 0..s.segments.len() {
        let h = segment_hamiltonian(s, k, settings.fock_cutoff);
        let dt = s.segments[k].duration;
        let u = expm_hermitian(&h, dt);
        defect = defect.max(unitarity_defect(&u));
        psi = &u * psi;
        if let Some(v) = halved.as_mut() {
            let half = expm_hermitian(&h, 0.5 * dt);
            *v = &half * (&half * &*v);
        }
    }
    if defect > UNITARITY_TOLERANCE {
        return Err(Error::UnitarityBreach(defect));
    }
    let total = s.total_time();
    let mut state = DenseState { amplitudes: psi.as_slice().to_vec(), fock_cutoff: settings.fock_cutoff, num_atoms: n };
    let step_halving_change = halved.map(|v| 1.0 - overlap(&state.amplitudes, v.as_slice()));
    if settings.interaction_picture {
        let a = state.dim_atoms();
        for p in 0..settings.fock_cutoff {
            for m in 0..a {
                let mut e = s.omega_cavity * p as f64;
                for (i, w) in s.omega_atoms.iter().enumerate() {
                    e += if m >> i & 1 == 1 { 0.5 * w } else { -0.5 * w };
                }
                state.amplitudes[p * a + m] *= C64::new(0.0, e * total).exp();
            }
        }
    }
    state.check_cutoff()?;
    Ok(Propagation { state, unitarity_defect: defect, step_halving_change })
}

/// Field operators with an exact dense exponential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FieldOp {
    /// `exp(λa† − λ*a)`.
    Displace(C64),
    /// `exp[(g a² − g a†²) t]`, real `g`.
    Squeeze { g: f64, t: f64 },
    /// `exp(−i H_c t)` with `H_c = δ a†a + κ[(a†a)² + (a + a†)𝓔³]`.
    Kerr { params: KerrParams, detuning: f64, t: f64 },
}

impl FieldOp {
    /// Kerr evolution at the parameters' own detuning `ω_c − ω_L`.
    pub fn kerr(params: KerrParams, t: f64) -> Self {
        FieldOp::Kerr { params, detuning: params.detuning(), t }
    }

    /// The operator on `cutoff` Fock levels.
    pub fn matrix(&self, cutoff: usize) -> DMatrix<C64> {
        let a = annihilation(cutoff);
        let ad = a.adjoint();
        let i = C64::new(0.0, 1.0);
        match *self {
            FieldOp::Displace(lambda) => {
                // exp(K) = exp(−i H) with H = iK Hermitian
                let k = &ad * lambda - &a * lambda.conj();
                expm_hermitian(&(k * i), 1.0)
            }
            FieldOp::Squeeze { g, t } => {
                let k = (&a * &a - &ad * &ad) * C64::new(g * t, 0.0);
                expm_hermitian(&(k * i), 1.0)
            }
            FieldOp::Kerr { params, detuning, t } => expm_hermitian(&kerr_hamiltonian(&params, detuning, cutoff), t),
        }
    }
}

/// `H_c = δ a†a + κ(a†a)² + κ𝓔³(a + a†)` on `cutoff` levels.
pub fn kerr_hamiltonian(k: &KerrParams, detuning: f64, cutoff: usize) -> DMatrix<C64> {
    let a = annihilation(cutoff);
    let mut h = (&a + a.adjoint()) * C64::new(k.drive(), 0.0);
    for n in 0..cutoff {
        let nf = n as f64;
        h[(n, n)] += C64::new(detuning * nf + k.kappa * nf * nf, 0.0);
    }
    h
}

pub fn exact_field_op(op: &FieldOp, s: &DenseState) -> Result<DenseState> {
    s.check_cutoff()?;
    let out = s.apply_field(&op.matrix(s.fock_cutoff));
    out.check_cutoff()?;
    Ok(out)
}

/// `⟨0|U|k⟩` for `k ≤ max_photons`, converged in the Fock cutoff.
#[derive(Clone, Debug)]
pub struct VacuumRow {
    pub amplitudes: Vec<C64>,
    pub cutoff: usize,
}

pub fn vacuum_row(op: &FieldOp, max_photons: usize) -> Result<VacuumRow> {
    let row = |cutoff: usize| -> Vec<C64> {
        let u = op.matrix(cutoff);
        (0..=max_photons).map(|k| u[(0, k)]).collect()
    };
    let mut cutoff = max_photons + 16;
    let mut prev = row(cutoff);
    while cutoff < 1024 {
        let next_cutoff = cutoff * 2;
        let next = row(next_cutoff);
        let diff = prev.iter().zip(&next).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let scale = next.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if diff <= 1e-13 * scale.max(1e-300) {
            return Ok(VacuumRow { amplitudes: next, cutoff: next_cutoff });
        }
        prev = next;
        cutoff = next_cutoff;
    }
    Err(Error::CutoffInadequate { cutoff, population: f64::NAN })
}

/// Oracle-vs-closed-form comparison of one photon-count outcome.
#[derive(Clone, Copy, Debug)]
pub struct ProjectionDelta {
    pub fidelity: f64,
    pub probability_oracle: f64,
    pub probability_analytic: f64,
    pub probability_delta: f64,
}

pub fn project_and_compare(dense: &DenseState, d: usize, analytic: &PostSelectedState) -> Result<ProjectionDelta> {
    if dense.num_atoms != analytic.num_atoms() {
        return Err(Error::DimensionMismatch(format!("{} vs {} atoms", dense.num_atoms, analytic.num_atoms())));
    }
    if d >= dense.fock_cutoff {
        return Err(Error::InvalidParameter(format!("photon number {d} outside cutoff {}", dense.fock_cutoff)));
    }
    let component = dense.photon_component(d);
    let probability_oracle = component.iter().map(|c| c.norm_sqr()).sum::<f64>() / dense.norm().powi(2);
    if probability_oracle < 1e-300 {
        return Err(Error::ImpossibleOutcome(probability_oracle));
    }
    let fidelity = overlap(&component, &analytic.amplitudes()?);
    Ok(ProjectionDelta {
        fidelity,
        probability_oracle,
        probability_analytic: analytic.success_probability,
        probability_delta: probability_oracle - analytic.success_probability,
    })
}

/// Numerically located `|0⟩ ↔ |N⟩` resonance of the driven Kerr oscillator.
#[derive(Clone, Copy, Debug)]
pub struct KerrCalibration {
    /// Detuning `ω_c − ω_L` at the avoided crossing (includes light shifts).
    pub detuning: f64,
    pub bare_detuning: f64,
    /// Minimum splitting of the two dressed states.
    pub splitting: f64,
    /// Half the minimum splitting: the `|0⟩ ↔ |N⟩` Rabi frequency.
    pub rabi_frequency: f64,
    /// `π / (2 t*)` from the first maximum `t*` of the `|N⟩` population.
    pub rabi_frequency_dynamic: f64,
    /// Largest population of levels `1..N−1` over one transfer period.
    pub max_intermediate_population: f64,
    pub cutoff: usize,
}

fn crossing_splitting(k: &KerrParams, detuning: f64, cutoff: usize) -> f64 {
    let n = k.photon_gap as usize;
    let eig = kerr_hamiltonian(k, detuning, cutoff).symmetric_eigen();
    let v = &eig.eigenvectors;
    let weight = |level: usize, j: usize| v[(level, j)].norm_sqr();
    let a = (0..cutoff).max_by(|&i, &j| weight(0, i).total_cmp(&weight(0, j))).unwrap();
    let b = (0..cutoff).filter(|&j| j != a).max_by(|&i, &j| weight(n, i).total_cmp(&weight(n, j))).unwrap();
    (eig.eigenvalues[a] - eig.eigenvalues[b]).abs()
}

/// Finds the detuning minimizing the dressed `0/N` splitting by golden
/// section search, then measures the transfer dynamically.
pub fn calibrate_kerr(k: &KerrParams, cutoff: usize) -> Result<KerrCalibration> {
    let n = k.photon_gap as usize;
    if cutoff < n + 4 {
        return Err(Error::InvalidParameter(format!("Kerr cutoff {cutoff} below N + 4")));
    }
    let bare = -k.kappa * n as f64;
    let eps = k.drive();
    let width = 20.0 * eps * eps * (n as f64 + 1.0) / (k.kappa * n as f64) + 10.0 * k.effective_coupling().abs() + 1e-300;
    let (mut lo, mut hi) = (bare - width, bare + width);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = crossing_splitting(k, x1, cutoff);
    let mut f2 = crossing_splitting(k, x2, cutoff);
    for _ in 0..200 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = crossing_splitting(k, x1, cutoff);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = crossing_splitting(k, x2, cutoff);
        }
        if hi - lo <= 1e-15 * (1.0 + bare.abs()) {
            break;
        }
    }
    let detuning = 0.5 * (lo + hi);
    let splitting = crossing_splitting(k, detuning, cutoff);
    let rabi = 0.5 * splitting;

    // |0⟩ evolved in the eigenbasis
    let eig = kerr_hamiltonian(k, detuning, cutoff).symmetric_eigen();
    let v = &eig.eigenvectors;
    let evolve = |t: f64| -> Vec<C64> {
        let coeffs: Vec<C64> =
            (0..cutoff).map(|j| v[(0, j)].conj() * C64::new(0.0, -eig.eigenvalues[j] * t).exp()).collect();
        (0..cutoff).map(|level| (0..cutoff).map(|j| v[(level, j)] * coeffs[j]).sum()).collect()
    };
    let period = std::f64::consts::PI / rabi;
    let samples = 4000;
    let mut best = (0.0, 0.0);
    let mut intermediate: f64 = 0.0;
    let mut top: f64 = 0.0;
    for i in 0..=samples {
        let t = period * i as f64 / samples as f64;
        let psi = evolve(t);
        let pn = psi[n].norm_sqr();
        if pn > best.1 && t <= 0.75 * period {
            best = (t, pn);
        }
        intermediate = intermediate.max((1..n).map(|l| psi[l].norm_sqr()).sum());
        top = top.max(psi[cutoff - 1].norm_sqr());
    }
    if top > CUTOFF_TOLERANCE {
        return Err(Error::CutoffInadequate { cutoff, population: top });
    }
    // refine the maximum of the |N⟩ population
    let dt = period / samples as f64;
    let (mut a, mut b) = ((best.0 - dt).max(0.0), best.0 + dt);
    for _ in 0..100 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if evolve(m1)[n].norm_sqr() < evolve(m2)[n].norm_sqr() {
            a = m1;
        } else {
            b = m2;
        }
    }
    let t_star = 0.5 * (a + b);
    Ok(KerrCalibration {
        detuning,
        bare_detuning: bare,
        splitting,
        rabi_frequency: rabi,
        rabi_frequency_dynamic: std::f64::consts::FRAC_PI_2 / t_star,
        max_intermediate_population: intermediate,
        cutoff,
    })
}

/// `exp(a†Ô + Ĝ)|O⟩` summed as a dense Taylor series of the generator
/// matrix, without going through the polynomial algebra. The series ends
/// after `N` terms because every application excites at least one atom.
/// The vacuum amplitude is 1.
pub fn exponential_state(c: &CouplingCoefficients, fock_cutoff: usize) -> Result<DenseState> {
    let n = c.num_atoms();
    if fock_cutoff < n + 1 {
        return Err(Error::InvalidParameter(format!("Fock cutoff {fock_cutoff} below N + 1 = {}", n + 1)));
    }
    let a = 1usize << n;
    let dim = fock_cutoff * a;
    let mut x = DMatrix::<C64>::zeros(dim, dim);
    for p in 0..fock_cutoff {
        for m in 0..a {
            let from = p * a + m;
            for i in (0..n).filter(|i| m >> i & 1 == 0) {
                if p + 1 < fock_cutoff {
                    x[((p + 1) * a + (m | 1 << i), from)] += c.linear[i] * ((p + 1) as f64).sqrt();
                }
                for j in (i + 1..n).filter(|j| m >> j & 1 == 0) {
                    x[(p * a + (m | 1 << i | 1 << j), from)] += c.pair_weight(i, j);
                }
            }
        }
    }
    let mut term = nalgebra::DVector::<C64>::zeros(dim);
    term[0] = C64::new(1.0, 0.0);
    let mut sum = term.clone();
    for k in 1..=n {
        term = (&x * term) / C64::new(k as f64, 0.0);
        sum += &term;
    }
    Ok(DenseState { amplitudes: sum.as_slice().to_vec(), fock_cutoff, num_atoms: n })
}

/// Atomic amplitudes `Σₖ rowₖ · (k-photon component)` left by the field bra
/// `Σₖ rowₖ ⟨k|`.
pub fn project_onto_row(dense: &DenseState, row: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::default(); dense.dim_atoms()];
    for (k, &f) in row.iter().enumerate().take(dense.fock_cutoff) {
        for (o, c) in out.iter_mut().zip(dense.photon_component(k)) {
            *o += f * c;
        }
    }
    out
}

/// Pair amplitude `⟨0|⟨1₀1₁|ψ⟩ / ⟨0|⟨O|ψ⟩` of a propagated two-atom state
/// next to the two analytic pair placements (coefficients negated, as the
/// frame requires).
#[derive(Clone, Copy, Debug)]
pub struct PairConventionCheck {
    pub oracle: C64,
    pub appendix_a: C64,
    pub swapped: C64,
}

impl PairConventionCheck {
    pub fn relative_errors(&self) -> (f64, f64) {
        let scale = self.oracle.norm();
        ((self.appendix_a - self.oracle).norm() / scale, (self.swapped - self.oracle).norm() / scale)
    }
}

pub fn pair_convention_check(s: &ControlSchedule, fock_cutoff: usize) -> Result<PairConventionCheck> {
    if s.num_atoms() != 2 {
        return Err(Error::InvalidParameter("pair convention check uses two atoms".into()));
    }
    let settings = PropagationSettings { fock_cutoff, interaction_picture: false, step_halving_check: false };
    let st = propagate(s, &settings)?.state;
    let oracle = st.amplitudes[st.index(0, 3)] / st.amplitudes[0];
    let placed = |conv| -> Result<C64> { Ok(integrate_with(s, conv)?.negated().pair_weight(0, 1)) };
    Ok(PairConventionCheck {
        oracle,
        appendix_a: placed(PairConvention::EarlierOnFirst)?,
        swapped: placed(PairConvention::SwappedCouplings)?,
    })
}
