//! Field manipulations followed by photon counting.
//!
//! Every primitive maps a [`JointState`] `Σₖ (a†)ᵏ Pₖ |O⟩` to a normalized
//! atomic state. Writing the post-measurement field bra as `⟨F| = Σₖ fₖ⟨k|`,
//! the atomic state is `Σₖ fₖ √k! Pₖ |O⟩` and its squared norm over `⟨Ψ|Ψ⟩`
//! is the Born probability of the outcome.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::nilpotent::{factorial, NilpotentPolynomial, PhotonOverflow};
use crate::oracle::{self, FieldOp};
use crate::state::{atomic_operator, pair_operator, JointState};

/// Which primitive produced a [`PostSelectedState`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Primitive {
    PhotonCount { d: u32 },
    Displace { lambda: C64 },
    Squeeze { g: f64, t: f64 },
    Kerr { b: C64, c: C64 },
    KerrRotation { v0n: f64, t: f64 },
}

#[derive(Clone, Debug)]
pub struct PostSelectedState {
    /// Photon-free polynomial of unit state norm.
    pub polynomial: NilpotentPolynomial,
    pub success_probability: f64,
    pub primitive: Primitive,
    /// Secondary values worth reporting (closed-form probabilities, printed
    /// prefactors), in insertion order.
    pub diagnostics: Vec<(&'static str, f64)>,
}

impl PostSelectedState {
    fn from_unnormalized(u: NilpotentPolynomial, total_norm: f64, primitive: Primitive) -> Result<Self> {
        let n2 = u.state_norm_sqr();
        let p = n2 / (total_norm * total_norm);
        if !(n2 > 1e-300) {
            return Err(Error::ImpossibleOutcome(p));
        }
        Ok(Self { polynomial: u.scale(C64::new(1.0 / n2.sqrt(), 0.0)), success_probability: p, primitive, diagnostics: vec![] })
    }

    pub fn num_atoms(&self) -> usize {
        self.polynomial.num_atoms()
    }

    pub fn amplitudes(&self) -> Result<Vec<C64>> {
        self.polynomial.to_atomic_amplitudes()
    }

    pub fn nilpotential(&self) -> Result<NilpotentPolynomial> {
        self.polynomial.log(PhotonOverflow::Error)
    }

    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }
}

/// Unnormalized atomic state `Σₖ fₖ √k! Pₖ` left by the field bra
/// `⟨F| = Σₖ fₖ ⟨k|`.
pub fn project_field(s: &JointState, bra: impl Fn(u32) -> C64) -> NilpotentPolynomial {
    let mut out = NilpotentPolynomial::zero(s.num_atoms(), 0);
    for k in 0..=s.polynomial.max_photon_power() {
        let f = bra(k);
        if f != C64::default() {
            let shell = s.polynomial.photon_shell(k).scale(f * factorial(k).sqrt());
            out = out.try_add(&shell).expect("same space");
        }
    }
    out
}

pub fn measure_photon_number(s: &JointState, d: u32) -> Result<PostSelectedState> {
    if d > s.polynomial.photon_cap() {
        return Err(Error::PhotonOverflow { power: d, cap: s.polynomial.photon_cap() });
    }
    let u = project_field(s, |k| if k == d { C64::new(1.0, 0.0) } else { C64::default() });
    PostSelectedState::from_unnormalized(u, s.norm, Primitive::PhotonCount { d })
}

/// Born probabilities of every photon number `0..=photon_cap`.
pub fn photon_number_distribution(s: &JointState) -> Vec<f64> {
    (0..=s.polynomial.photon_cap()).map(|d| s.photon_probability(d)).collect()
}

/// Displacement `D(λ)` then vacuum detection.
///
/// The atomic state is `exp(−λ*Ô) exp(Ĝ)|O⟩`; the success probability is
/// taken from the dense displacement operator. The Gaussian identity
/// `⟨0|D(λ)|k⟩ = e^{−|λ|²/2}(−λ*)ᵏ/√k!` gives the `closed_form_probability`
/// diagnostic.
pub fn displace_then_vacuum(s: &JointState, lambda: C64) -> Result<PostSelectedState> {
    let u = project_field(s, |k| (-lambda.conj()).powu(k) / factorial(k).sqrt());
    let closed = u.state_norm_sqr() * (-lambda.norm_sqr()).exp() / (s.norm * s.norm);
    let row = oracle::vacuum_row(&FieldOp::Displace(lambda), s.polynomial.max_photon_power() as usize)?;
    let exact = project_field(s, |k| row.amplitudes[k as usize]);
    let p_oracle = exact.state_norm_sqr() / (s.norm * s.norm);
    let mut out = PostSelectedState::from_unnormalized(u, s.norm, Primitive::Displace { lambda })?;
    out.success_probability = p_oracle;
    out.diagnostics.push(("closed_form_probability", closed));
    out.diagnostics.push(("oracle_cutoff", row.cutoff as f64));
    Ok(out)
}

/// Parametric squeezing `exp[(g a² − g a†²) t]` with real `g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezeParams {
    pub g: f64,
    pub t: f64,
}

impl SqueezeParams {
    pub fn new(g: f64, t: f64) -> Result<Self> {
        if !g.is_finite() || !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidParameter(format!("squeezing needs finite g and t ≥ 0 (g={g}, t={t})")));
        }
        Ok(Self { g, t })
    }

    pub fn gt(&self) -> f64 {
        self.g * self.t
    }

    /// Printed prefactor `√(2π) / √(1 + e^{2gt})`.
    pub fn r(&self) -> f64 {
        (2.0 * std::f64::consts::PI).sqrt() / (1.0 + (2.0 * self.gt()).exp()).sqrt()
    }

    pub fn eta(&self) -> f64 {
        self.gt()
    }

    /// Printed `ζ = 2 tanh(gt) − gt`.
    pub fn zeta(&self) -> f64 {
        2.0 * self.gt().tanh() - self.gt()
    }

    /// `ζ` from `⟨0|S = (cosh 2gt)^{-1/2} ⟨0| exp(½ tanh(2gt) a²)`. Agrees
    /// with [`Self::zeta`] to first order in `gt`.
    pub fn zeta_exact(&self) -> f64 {
        0.5 * (2.0 * self.gt()).tanh()
    }

    /// Exact vacuum-to-vacuum amplitude `(cosh 2gt)^{-1/2}`.
    pub fn vacuum_amplitude(&self) -> f64 {
        1.0 / (2.0 * self.gt()).cosh().sqrt()
    }
}

/// Squeezing then vacuum detection. The atomic state is
/// `exp(ζ Ô² + Ĝ)|O⟩` with the printed `ζ`; the success probability comes
/// from the dense squeezing operator. Diagnostics carry the exact Gaussian
/// probability and the printed bookkeeping weight `r² e^{2η} ‖·‖² / ‖Ψ‖²`.
pub fn squeeze_then_vacuum(s: &JointState, p: SqueezeParams) -> Result<PostSelectedState> {
    let c = &s.coefficients;
    let o = atomic_operator(c)?;
    let o2 = o.try_mul(&o, PhotonOverflow::Error)?;
    let g = pair_operator(c, 0)?;
    let build = |zeta: f64| -> Result<NilpotentPolynomial> {
        o2.scale(C64::new(zeta, 0.0)).try_add(&g)?.exp(PhotonOverflow::Error)
    };
    let u = build(p.zeta())?;
    let exact_state = build(p.zeta_exact())?;
    let total2 = s.norm * s.norm;
    let closed = p.vacuum_amplitude().powi(2) * exact_state.state_norm_sqr() / total2;
    let printed_weight = (p.r() * p.eta().exp()).powi(2) * u.state_norm_sqr() / total2;

    let row = oracle::vacuum_row(&FieldOp::Squeeze { g: p.g, t: p.t }, s.polynomial.max_photon_power() as usize)?;
    let exact = project_field(s, |k| row.amplitudes[k as usize]);
    let p_oracle = exact.state_norm_sqr() / total2;

    let mut out = PostSelectedState::from_unnormalized(u, s.norm, Primitive::Squeeze { g: p.g, t: p.t })?;
    out.success_probability = p_oracle;
    out.diagnostics.push(("closed_form_probability", closed));
    out.diagnostics.push(("printed_weight", printed_weight));
    out.diagnostics.push(("zeta", p.zeta()));
    out.diagnostics.push(("zeta_exact", p.zeta_exact()));
    out.diagnostics.push(("oracle_cutoff", row.cutoff as f64));
    Ok(out)
}

/// Kerr medium driven by a laser, in the frame rotating at `omega_laser`:
/// `H = (ω_c − ω_L) a†a + κ[(a†a)² + (a + a†)𝓔³]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KerrParams {
    pub kappa: f64,
    pub laser_amplitude: f64,
    pub omega_cavity: f64,
    pub omega_laser: f64,
    pub photon_gap: u32,
}

impl KerrParams {
    /// Checks the multiphoton resonance `(ω_c − ω_L)N + κN² = 0`.
    pub fn new(kappa: f64, laser_amplitude: f64, omega_cavity: f64, omega_laser: f64, photon_gap: u32) -> Result<Self> {
        if !(kappa > 0.0) || !laser_amplitude.is_finite() || !omega_cavity.is_finite() || !omega_laser.is_finite() {
            return Err(Error::InvalidParameter("Kerr parameters must be finite with κ > 0".into()));
        }
        if photon_gap < 2 {
            return Err(Error::InvalidParameter(format!("photon gap {photon_gap} < 2")));
        }
        let n = photon_gap as f64;
        let mismatch = (omega_cavity - omega_laser) * n + kappa * n * n;
        let scale = kappa * n * n + omega_cavity.abs() * n;
        if mismatch.abs() > 1e-9 * scale {
            return Err(Error::InvalidParameter(format!("0 ↔ {photon_gap} photons not resonant: mismatch {mismatch:e}")));
        }
        Ok(Self { kappa, laser_amplitude, omega_cavity, omega_laser, photon_gap })
    }

    /// Picks `ω_L = ω_c + κN`, the resonant laser frequency.
    pub fn resonant(kappa: f64, laser_amplitude: f64, omega_cavity: f64, photon_gap: u32) -> Result<Self> {
        Self::new(kappa, laser_amplitude, omega_cavity, omega_cavity + kappa * photon_gap as f64, photon_gap)
    }

    /// Chooses `𝓔` so that the multiphoton coupling equals `v0n`.
    pub fn with_coupling(kappa: f64, v0n: f64, omega_cavity: f64, photon_gap: u32) -> Result<Self> {
        let unit = Self::resonant(kappa, 1.0, omega_cavity, photon_gap)?;
        let drive = (v0n / unit.effective_coupling_for_drive(1.0)).powf(1.0 / photon_gap as f64);
        Self::resonant(kappa, (drive / kappa).cbrt(), omega_cavity, photon_gap)
    }

    /// `ω_c − ω_L`.
    pub fn detuning(&self) -> f64 {
        self.omega_cavity - self.omega_laser
    }

    /// Linear drive strength `κ𝓔³`.
    pub fn drive(&self) -> f64 {
        self.kappa * self.laser_amplitude.powi(3)
    }

    /// Rotating-frame energy of `|n⟩`: `(ω_c − ω_L)n + κn²`.
    pub fn level_energy(&self, n: u32) -> f64 {
        let n = n as f64;
        self.detuning() * n + self.kappa * n * n
    }

    /// `|0⟩ ↔ |N⟩` matrix element at lowest order: the drive `κ𝓔³(a + a†)`
    /// climbs the ladder through `N − 1` virtual levels,
    /// `V = (κ𝓔³)ᴺ √N! / Π_{n=1}^{N−1} (E₀ − Eₙ)`.
    pub fn effective_coupling(&self) -> f64 {
        self.effective_coupling_for_drive(self.drive())
    }

    fn effective_coupling_for_drive(&self, drive: f64) -> f64 {
        let n = self.photon_gap;
        let denom: f64 = (1..n).map(|k| self.level_energy(0) - self.level_energy(k)).product();
        drive.powi(n as i32) * factorial(n).sqrt() / denom
    }

    /// The printed closed form `𝓔^{3N} / (√N! Π_{n=1}^{N} (n − ω_L/κ))`.
    pub fn printed_coupling(&self) -> Result<f64> {
        let n = self.photon_gap;
        let ratio = self.omega_laser / self.kappa;
        let mut denom = factorial(n).sqrt();
        for k in 1..=n {
            let f = k as f64 - ratio;
            if f.abs() < 1e-12 * (1.0 + ratio.abs()) {
                return Err(Error::ResonanceCollision { n: k as usize });
            }
            denom *= f;
        }
        Ok(self.laser_amplitude.powi(3 * n as i32) / denom)
    }
}

/// Projection onto `B|0⟩ + C|N⟩` followed by atomic read-out.
pub fn kerr_project(s: &JointState, k: &KerrParams, b: C64, c: C64) -> Result<PostSelectedState> {
    let n = k.photon_gap;
    if n as usize != s.num_atoms() {
        return Err(Error::InvalidParameter(format!("photon gap {n} differs from {} atoms", s.num_atoms())));
    }
    if n > s.polynomial.photon_cap() {
        return Err(Error::PhotonOverflow { power: n, cap: s.polynomial.photon_cap() });
    }
    let len = (b.norm_sqr() + c.norm_sqr()).sqrt();
    if !(len > 0.0) || !len.is_finite() {
        return Err(Error::InvalidParameter("B and C both vanish".into()));
    }
    let (b, c) = (b / len, c / len);
    let u = project_field(s, |d| if d == 0 { b.conj() } else if d == n { c.conj() } else { C64::default() });
    PostSelectedState::from_unnormalized(u, s.norm, Primitive::Kerr { b, c })
}

/// Effective coupling and switching time of the Kerr stage.
#[derive(Clone, Copy, Debug)]
pub struct KerrTiming {
    pub v0n: f64,
    /// `None` when the printed closed form hits its pole.
    pub v0n_printed: Option<f64>,
    /// Smallest `t ≥ 0` with `tan(t |V|) = |C*/B*|`.
    pub t_kerr: f64,
    pub t_kerr_printed: Option<f64>,
}

pub fn kerr_dynamics_params(k: &KerrParams, ratio: f64) -> Result<KerrTiming> {
    if !ratio.is_finite() || ratio < 0.0 {
        return Err(Error::InvalidParameter(format!("|C*/B*| = {ratio} must be finite and ≥ 0")));
    }
    let v0n = k.effective_coupling();
    let v0n_printed = k.printed_coupling().ok();
    let angle = ratio.atan();
    Ok(KerrTiming {
        v0n,
        v0n_printed,
        t_kerr: angle / v0n.abs(),
        t_kerr_printed: v0n_printed.map(|v| angle / v.abs()),
    })
}

/// Two-level Rabi model of the Kerr stage: `⟨0|U(t) = cos(Vt)⟨0| − i sin(Vt)⟨N|`,
/// then vacuum detection.
pub fn kerr_rotate_then_vacuum(s: &JointState, v0n: f64, t: f64) -> Result<PostSelectedState> {
    let n = s.num_atoms() as u32;
    if n > s.polynomial.photon_cap() {
        return Err(Error::PhotonOverflow { power: n, cap: s.polynomial.photon_cap() });
    }
    let th = v0n * t;
    let u = project_field(s, |d| {
        if d == 0 {
            C64::new(th.cos(), 0.0)
        } else if d == n {
            C64::new(0.0, -th.sin())
        } else {
            C64::default()
        }
    });
    PostSelectedState::from_unnormalized(u, s.norm, Primitive::KerrRotation { v0n, t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::CouplingCoefficients;
    use crate::nilpotent::Monomial;
    use crate::state::build_joint_state;
    use nalgebra::DMatrix;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn vacuum_outcome_keeps_pair_exponent() {
        let mut pair = DMatrix::zeros(3, 3);
        pair[(0, 1)] = C64::new(0.1, 0.05);
        pair[(1, 2)] = c(-0.2);
        let coeffs = CouplingCoefficients::new(vec![c(0.0); 3], pair).unwrap();
        let s = build_joint_state(&coeffs).unwrap();
        let f = measure_photon_number(&s, 0).unwrap().nilpotential().unwrap();
        assert!((f.coeff(&Monomial::new(&[0, 1], 0)) - C64::new(0.1, 0.05)).norm() < 1e-15);
        assert!((f.coeff(&Monomial::new(&[1, 2], 0)) - c(-0.2)).norm() < 1e-15);
        assert_eq!(f.len(), 2);
    }

    #[test]
    fn two_atom_photon_shells() {
        let k = C64::new(0.3, 0.4);
        let s = build_joint_state(&CouplingCoefficients::uniform(2, k)).unwrap();
        let a = k.norm_sqr();
        let one = measure_photon_number(&s, 1).unwrap();
        assert!((one.success_probability - 2.0 * a / (1.0 + 2.0 * a + 2.0 * a * a)).abs() < 1e-15);
        let amps = one.amplitudes().unwrap();
        // (|10⟩ + |01⟩)/√2 up to a global phase
        assert!((amps[1].norm() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((amps[1] - amps[2]).norm() < 1e-15);
        let two = measure_photon_number(&s, 2).unwrap();
        assert!((two.amplitudes().unwrap()[3].norm() - 1.0).abs() < 1e-15);
        let total: f64 = photon_number_distribution(&s).iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!(measure_photon_number(&s, 3).is_err());
    }

    #[test]
    fn zero_displacement_is_vacuum_projection() {
        let s = build_joint_state(&CouplingCoefficients::uniform(3, C64::new(0.2, 0.1))).unwrap();
        let d = displace_then_vacuum(&s, C64::default()).unwrap();
        let m = measure_photon_number(&s, 0).unwrap();
        assert!(d.polynomial.max_abs_diff(&m.polynomial) < 1e-15);
        assert!((d.success_probability - m.success_probability).abs() < 1e-12);
    }

    #[test]
    fn single_atom_displacement() {
        let k = C64::new(0.3, 0.0);
        let lambda = C64::new(0.5, -0.7);
        let s = build_joint_state(&CouplingCoefficients::uniform(1, k)).unwrap();
        let d = displace_then_vacuum(&s, lambda).unwrap();
        let ratio = d.polynomial.coeff(&Monomial::atom(0)) / d.polynomial.constant_term();
        assert!((ratio - (-lambda.conj() * k)).norm() < 1e-15);
        let closed = d.diagnostic("closed_form_probability").unwrap();
        assert!((closed - d.success_probability).abs() < 1e-12, "{closed} vs {}", d.success_probability);
    }

    #[test]
    fn no_squeezing_is_vacuum_projection() {
        let s = build_joint_state(&CouplingCoefficients::uniform(2, c(0.3))).unwrap();
        let q = squeeze_then_vacuum(&s, SqueezeParams::new(0.7, 0.0).unwrap()).unwrap();
        let m = measure_photon_number(&s, 0).unwrap();
        assert!(q.polynomial.max_abs_diff(&m.polynomial) < 1e-15);
        assert!((q.success_probability - m.success_probability).abs() < 1e-12);
    }

    #[test]
    fn squeeze_parameters() {
        let p = SqueezeParams::new(0.5, 0.01).unwrap();
        assert!((p.zeta() - 0.005).abs() < 1e-7);
        assert!((p.zeta_exact() - 0.005).abs() < 1e-6);
        assert!((p.zeta() - p.zeta_exact()).abs() < (p.gt()).powi(3));
        assert!((SqueezeParams::new(1.0, 0.0).unwrap().r() - std::f64::consts::PI.sqrt()).abs() < 1e-15);
        assert!(SqueezeParams::new(1.0, -1.0).is_err());
    }

    #[test]
    fn squeezing_probability_matches_gaussian_identity() {
        let s = build_joint_state(&CouplingCoefficients::uniform(3, C64::new(0.4, 0.2))).unwrap();
        let q = squeeze_then_vacuum(&s, SqueezeParams::new(1.0, 0.3).unwrap()).unwrap();
        let closed = q.diagnostic("closed_form_probability").unwrap();
        assert!((closed - q.success_probability).abs() < 1e-12, "{closed} vs {}", q.success_probability);
    }

    #[test]
    fn kerr_projection_with_c_zero_is_vacuum() {
        let s = build_joint_state(&CouplingCoefficients::uniform(3, c(0.5))).unwrap();
        let k = KerrParams::resonant(1.0, 0.1, 5.0, 3).unwrap();
        let p = kerr_project(&s, &k, c(1.0), c(0.0)).unwrap();
        let m = measure_photon_number(&s, 0).unwrap();
        assert!(p.polynomial.max_abs_diff(&m.polynomial) < 1e-15);
        assert!((p.success_probability - m.success_probability).abs() < 1e-15);
    }

    #[test]
    fn kerr_params_enforce_resonance() {
        assert!(KerrParams::new(1.0, 0.1, 5.0, 5.5, 3).is_err());
        let k = KerrParams::new(1.0, 0.1, 5.0, 8.0, 3).unwrap();
        assert_eq!(k.level_energy(3), k.level_energy(0));
        // ω_L/κ = 2 collides with the printed product
        let k = KerrParams::resonant(1.0, 0.1, -1.0, 3).unwrap();
        assert!(matches!(k.printed_coupling(), Err(Error::ResonanceCollision { n: 2 })));
    }

    #[test]
    fn effective_coupling_three_photons() {
        let k = KerrParams::resonant(2.0, 0.3, 1.0, 3).unwrap();
        let eps = k.drive();
        // E₀ − E₁ = E₀ − E₂ = 2κ
        let expected = eps.powi(3) * 6f64.sqrt() / (4.0 * k.kappa * k.kappa);
        assert!((k.effective_coupling() - expected).abs() < 1e-15 * expected);
        let k = KerrParams::with_coupling(1.0, 0.01, 1.0, 3).unwrap();
        assert!((k.effective_coupling() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn switching_time_branch() {
        let k = KerrParams::with_coupling(1.0, 0.01, 1.0, 3).unwrap();
        assert_eq!(kerr_dynamics_params(&k, 0.0).unwrap().t_kerr, 0.0);
        let t = kerr_dynamics_params(&k, 1.0).unwrap().t_kerr;
        assert!((t - std::f64::consts::FRAC_PI_4 / 0.01).abs() < 1e-9);
        let t = kerr_dynamics_params(&k, 6f64.sqrt()).unwrap().t_kerr;
        assert!((t - 6f64.sqrt().atan() / 0.01).abs() < 1e-9);
    }
}
