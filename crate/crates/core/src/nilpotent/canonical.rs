//! Local-unitary ascent toward the atomic vacuum.
//!
//! The canonic state is the point on the local-unitary orbit with the largest
//! vacuum amplitude. For fixed rotations on all other atoms the vacuum
//! amplitude is linear in the first row of the remaining atom's rotation, so
//! each coordinate step is solved exactly: the new first row is the
//! normalized conjugate of the two-component vector `(⟨0…0|φ⟩, ⟨0…1ₖ…0|φ⟩)`.
//! Sweeps repeat until every single-excitation amplitude vanishes, which is
//! the stationarity condition of the vacuum amplitude.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{NilpotentPolynomial, PhotonOverflow};
use crate::error::{Error, Result};

/// 2×2 unitary acting on one atom, row-major in the basis (|0⟩, |1⟩).
pub type LocalUnitary = [[C64; 2]; 2];

pub const IDENTITY: LocalUnitary = [
    [C64 { re: 1.0, im: 0.0 }, C64 { re: 0.0, im: 0.0 }],
    [C64 { re: 0.0, im: 0.0 }, C64 { re: 1.0, im: 0.0 }],
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CanonicalizeSettings {
    /// Number of starting points; the first is always the identity.
    pub restarts: usize,
    pub max_sweeps: usize,
    /// Convergence threshold on max |single-excitation amplitude| / |vacuum amplitude|.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for CanonicalizeSettings {
    fn default() -> Self {
        Self { restarts: 8, max_sweeps: 500, tolerance: 1e-11, seed: 0x5eed }
    }
}

#[derive(Clone, Debug)]
pub struct CanonicalForm {
    /// Nilpotential of the canonic state. Defined up to the per-atom phase
    /// freedom σ⁺ₙ → e^{iφₙ} σ⁺ₙ.
    pub tanglemeter: NilpotentPolynomial,
    /// Rotation applied to each atom.
    pub locals: Vec<LocalUnitary>,
    /// |⟨O|canonic⟩|² of the normalized state.
    pub vacuum_probability: f64,
    pub converged: bool,
    pub sweeps: usize,
    /// Final max single-excitation ratio; zero at an exact stationary point.
    pub residual: f64,
}

/// Finds the canonic state of a photon-free polynomial state by coordinate
/// ascent with random restarts. A non-converged result is still returned,
/// flagged through [`CanonicalForm::converged`].
pub fn canonicalize(state: &NilpotentPolynomial, settings: &CanonicalizeSettings) -> Result<CanonicalForm> {
    if state.max_photon_power() > 0 {
        return Err(Error::InvalidParameter("canonicalize needs a photon-free state".into()));
    }
    let n = state.num_atoms();
    let mut psi = state.to_atomic_amplitudes()?;
    let norm = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidParameter("state is not normalizable".into()));
    }
    for c in psi.iter_mut() {
        *c /= norm;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut best: Option<Ascent> = None;
    for start in 0..settings.restarts.max(1) {
        let locals: Vec<LocalUnitary> =
            if start == 0 { vec![IDENTITY; n] } else { (0..n).map(|_| haar_su2(&mut rng)).collect() };
        let run = ascend(&psi, n, locals, settings);
        let better = match &best {
            None => true,
            Some(b) => run.vacuum_probability > b.vacuum_probability + 1e-12,
        };
        if better {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    let poly = NilpotentPolynomial::from_atomic_amplitudes(n, &best.state)?;
    let tanglemeter = poly.log(PhotonOverflow::Error)?;
    Ok(CanonicalForm {
        tanglemeter,
        locals: best.locals,
        vacuum_probability: best.vacuum_probability,
        converged: best.converged,
        sweeps: best.sweeps,
        residual: best.residual,
    })
}

struct Ascent {
    state: Vec<C64>,
    locals: Vec<LocalUnitary>,
    vacuum_probability: f64,
    converged: bool,
    sweeps: usize,
    residual: f64,
}

fn ascend(psi: &[C64], n: usize, mut locals: Vec<LocalUnitary>, settings: &CanonicalizeSettings) -> Ascent {
    let mut phi = psi.to_vec();
    for (k, u) in locals.iter().enumerate() {
        apply_local(&mut phi, k, u);
    }
    let mut sweeps = 0;
    let mut residual = single_excitation_ratio(&phi, n);
    while residual > settings.tolerance && sweeps < settings.max_sweeps {
        for k in 0..n {
            let v = [phi[0], phi[1 << k]];
            if let Some(w) = vacuum_aligning_rotation(v) {
                apply_local(&mut phi, k, &w);
                locals[k] = matmul(&w, &locals[k]);
            }
        }
        sweeps += 1;
        residual = single_excitation_ratio(&phi, n);
    }
    Ascent {
        vacuum_probability: phi[0].norm_sqr(),
        converged: residual <= settings.tolerance,
        state: phi,
        locals,
        sweeps,
        residual,
    }
}

fn single_excitation_ratio(phi: &[C64], n: usize) -> f64 {
    let vac = phi[0].norm();
    let worst = (0..n).map(|k| phi[1 << k].norm()).fold(0.0, f64::max);
    if vac == 0.0 {
        if worst == 0.0 { f64::INFINITY } else { worst / f64::MIN_POSITIVE }
    } else {
        worst / vac
    }
}

/// Rotation `W` with `W v = ‖v‖ e₀`, equal to a pure phase when `v ∝ e₀`.
fn vacuum_aligning_rotation(v: [C64; 2]) -> Option<LocalUnitary> {
    let len = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    if len == 0.0 {
        return None;
    }
    let phase = if v[0].norm() > 0.0 { v[0] / v[0].norm() } else { C64::new(1.0, 0.0) };
    let a = v[0].norm() / len;
    let b = (v[1] * phase.conj()).conj() / len;
    let rot = [[C64::new(a, 0.0), b], [-b.conj(), C64::new(a, 0.0)]];
    let p = phase.conj();
    Some([[rot[0][0] * p, rot[0][1] * p], [rot[1][0] * p, rot[1][1] * p]])
}

/// Applies `u` to atom `k` of a dense atomic amplitude vector.
pub(crate) fn apply_local(phi: &mut [C64], k: usize, u: &LocalUnitary) {
    let bit = 1usize << k;
    for i in 0..phi.len() {
        if i & bit == 0 {
            let (x0, x1) = (phi[i], phi[i | bit]);
            phi[i] = u[0][0] * x0 + u[0][1] * x1;
            phi[i | bit] = u[1][0] * x0 + u[1][1] * x1;
        }
    }
}

fn matmul(a: &LocalUnitary, b: &LocalUnitary) -> LocalUnitary {
    let mut out = [[C64::default(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub(crate) fn haar_su2<R: rand::Rng>(rng: &mut R) -> LocalUnitary {
    let mut g = || -> f64 { StandardNormal.sample(rng) };
    let (a, b) = (C64::new(g(), g()), C64::new(g(), g()));
    let len = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let (a, b) = (a / len, b / len);
    [[a, b], [-b.conj(), a.conj()]]
}
