//! Dicke, GHZ and two-ensemble constructions, and fidelities against the
//! standard target states.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::control::{
    kerr_dynamics_params, kerr_project, kerr_rotate_then_vacuum, measure_photon_number, project_field,
    squeeze_then_vacuum, KerrParams, PostSelectedState, SqueezeParams,
};
use crate::coupling::CouplingCoefficients;
use crate::error::{Error, Result};
use crate::nilpotent::{binomial, factorial, Bipartition, Monomial, NilpotentPolynomial, PhotonOverflow};
use crate::oracle::{self, calibrate_kerr, DenseState, FieldOp, KerrCalibration};
use crate::state::build_joint_state;

/// Target states with positive real amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub enum TargetState {
    /// `(|0…0⟩ + |1…1⟩)/√2`
    Ghz,
    /// `|1, N⟩` Dicke state.
    W,
    /// Symmetric state with `M` excitations.
    Dicke(usize),
    Custom(NilpotentPolynomial),
}

impl TargetState {
    /// Normalized amplitudes over the `2ᴺ` atomic basis.
    pub fn amplitudes(&self, num_atoms: usize) -> Result<Vec<C64>> {
        if num_atoms == 0 || num_atoms > 30 {
            return Err(Error::InvalidParameter(format!("{num_atoms} atoms")));
        }
        let dim = 1usize << num_atoms;
        let mut v = vec![C64::default(); dim];
        match self {
            TargetState::Ghz => {
                let h = 0.5f64.sqrt();
                v[0] = C64::new(h, 0.0);
                v[dim - 1] = C64::new(h, 0.0);
            }
            TargetState::W => return TargetState::Dicke(1).amplitudes(num_atoms),
            TargetState::Dicke(m) => {
                if *m > num_atoms {
                    return Err(Error::InvalidParameter(format!("Dicke excitation {m} > {num_atoms} atoms")));
                }
                let a = 1.0 / binomial(num_atoms, *m).sqrt();
                for (mask, amp) in v.iter_mut().enumerate() {
                    if mask.count_ones() as usize == *m {
                        *amp = C64::new(a, 0.0);
                    }
                }
            }
            TargetState::Custom(p) => {
                if p.num_atoms() != num_atoms {
                    return Err(Error::DimensionMismatch(format!("custom target on {} atoms", p.num_atoms())));
                }
                v = p.to_atomic_amplitudes()?;
                let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                if n == 0.0 {
                    return Err(Error::InvalidParameter("zero custom target".into()));
                }
                v.iter_mut().for_each(|c| *c /= n);
            }
        }
        Ok(v)
    }
}

/// `|⟨target|state⟩|` for normalized states.
pub fn fidelity_to(state: &PostSelectedState, target: &TargetState) -> Result<f64> {
    fidelity_of(&state.polynomial, target)
}

pub fn fidelity_of(state: &NilpotentPolynomial, target: &TargetState) -> Result<f64> {
    let t = target.amplitudes(state.num_atoms())?;
    Ok(oracle::overlap(&t, &state.to_atomic_amplitudes()?))
}

/// Which success-probability formula to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DickeFormula {
    /// Printed: weights `i! N!/(N−i)! |c|^{2i}`, normalization summed from `i = 1`.
    Printed,
    /// From the expansion: weights `N!/(N−i)! |c|^{2i}`, summed from `i = 0`.
    Exact,
}

fn dicke_weight(n: usize, i: usize, c2: f64, formula: DickeFormula) -> f64 {
    let falling: f64 = (n - i + 1..=n).map(|k| k as f64).product();
    let w = falling * c2.powi(i as i32);
    match formula {
        DickeFormula::Printed => w * factorial(i as u32),
        DickeFormula::Exact => w,
    }
}

/// Probability of detecting `M` photons from the symmetric resonant state
/// `exp(c a† Σ σ⁺ₙ)|O⟩`, which leaves the atoms in `|M, N⟩`.
pub fn dicke_success_probability(n: usize, m: usize, c: C64, formula: DickeFormula) -> Result<f64> {
    if m > n {
        return Err(Error::InvalidParameter(format!("M = {m} > N = {n}")));
    }
    let c2 = c.norm_sqr();
    let start = if formula == DickeFormula::Printed { 1 } else { 0 };
    let total: f64 = (start..=n).map(|i| dicke_weight(n, i, c2, formula)).sum();
    Ok(dicke_weight(n, m, c2, formula) / total)
}

/// Same probability obtained by building the joint state and measuring.
pub fn dicke_success_probability_expanded(n: usize, m: usize, c: C64) -> Result<f64> {
    let s = build_joint_state(&CouplingCoefficients::uniform(n, c))?;
    Ok(s.photon_probability(m as u32))
}

/// Post-selected state after detecting `M` photons from the symmetric state.
pub fn dicke_state(n: usize, m: usize, c: C64) -> Result<PostSelectedState> {
    let s = build_joint_state(&CouplingCoefficients::uniform(n, c))?;
    measure_photon_number(&s, m as u32)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DickeRow {
    pub n: usize,
    pub m: usize,
    pub c_abs: f64,
    pub p_printed: f64,
    pub p_exact: f64,
}

/// Shape of one `P(M, |c|)` curve on the sweep grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveShape {
    pub m: usize,
    pub argmax_c: f64,
    pub max: f64,
    /// Strict local maxima strictly inside the grid.
    pub interior_maxima: usize,
    pub monotone_increasing: bool,
    pub monotone_decreasing: bool,
}

impl CurveShape {
    fn of(m: usize, grid: &[f64], values: &[f64]) -> Self {
        let (imax, &max) = values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("nonempty grid");
        let interior_maxima = (1..values.len().saturating_sub(1))
            .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
            .count();
        Self {
            m,
            argmax_c: grid[imax],
            max,
            interior_maxima,
            monotone_increasing: values.windows(2).all(|w| w[1] >= w[0]),
            monotone_decreasing: values.windows(2).all(|w| w[1] <= w[0]),
        }
    }

    /// A single maximum that is not at either end of the grid.
    pub fn has_unique_interior_maximum(&self, grid: &[f64]) -> bool {
        self.interior_maxima == 1 && self.argmax_c > grid[0] && self.argmax_c < grid[grid.len() - 1]
    }
}

#[derive(Clone, Debug)]
pub struct DickeSweep {
    pub n: usize,
    pub grid: Vec<f64>,
    /// Rows ordered by `M` then grid index.
    pub rows: Vec<DickeRow>,
    pub exact_shapes: Vec<CurveShape>,
    pub printed_shapes: Vec<CurveShape>,
}

impl DickeSweep {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,M,c_abs,P_printed,P_exact\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.n,
                r.m,
                crate::nilpotent::fmt_f64(r.c_abs),
                crate::nilpotent::fmt_f64(r.p_printed),
                crate::nilpotent::fmt_f64(r.p_exact)
            ));
        }
        out
    }

    /// Maximum exact probability of `|M,N⟩` against `|N−M,N⟩`, for each `M`
    /// on the sweep whose partner is also on it.
    pub fn mirror_maxima(&self) -> Vec<(usize, f64, f64)> {
        self.exact_shapes
            .iter()
            .filter_map(|s| {
                let partner = self.exact_shapes.iter().find(|p| p.m == self.n - s.m)?;
                Some((s.m, s.max, partner.max))
            })
            .collect()
    }
}

/// Evenly spaced grid of `points` values on `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![lo];
    }
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

pub fn dicke_sweep(n: usize, ms: &[usize], grid: &[f64]) -> Result<DickeSweep> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty |c| grid".into()));
    }
    if let Some(m) = ms.iter().find(|&&m| m > n) {
        return Err(Error::InvalidParameter(format!("M = {m} > N = {n}")));
    }
    let points: Vec<(usize, f64)> = ms.iter().flat_map(|&m| grid.iter().map(move |&c| (m, c))).collect();
    let rows: Vec<DickeRow> = points
        .par_iter()
        .map(|&(m, c)| {
            let c = C64::new(c, 0.0);
            DickeRow {
                n,
                m,
                c_abs: c.re,
                p_printed: dicke_success_probability(n, m, c, DickeFormula::Printed).expect("m ≤ n"),
                p_exact: dicke_success_probability(n, m, c, DickeFormula::Exact).expect("m ≤ n"),
            }
        })
        .collect();
    let mut exact_shapes = vec![];
    let mut printed_shapes = vec![];
    for (k, &m) in ms.iter().enumerate() {
        let block = &rows[k * grid.len()..(k + 1) * grid.len()];
        let exact: Vec<f64> = block.iter().map(|r| r.p_exact).collect();
        let printed: Vec<f64> = block.iter().map(|r| r.p_printed).collect();
        exact_shapes.push(CurveShape::of(m, grid, &exact));
        printed_shapes.push(CurveShape::of(m, grid, &printed));
    }
    Ok(DickeSweep { n, grid: grid.to_vec(), rows, exact_shapes, printed_shapes })
}

/// How the GHZ balance `C*/B*` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GhzCondition {
    /// `B*√N! = C* Π Iₙ` as printed.
    Printed,
    /// `B* = C* √N! Π Iₙ`, which equalizes the two projected amplitudes
    /// because `(Σ Iₙσ⁺ₙ)ᴺ = N! Π Iₙσ⁺ₙ`.
    Exact,
}

/// `C*/B*` for the given couplings.
pub fn ghz_ratio(couplings: &[C64], condition: GhzCondition) -> Result<C64> {
    let prod: C64 = couplings.iter().product();
    if prod.norm() == 0.0 {
        return Err(Error::InvalidParameter("every Iₙ must be nonzero for the GHZ projection".into()));
    }
    let root = factorial(couplings.len() as u32).sqrt();
    Ok(match condition {
        GhzCondition::Printed => root / prod,
        GhzCondition::Exact => (prod * root).inv(),
    })
}

/// Multiplies every amplitude with `atom` excited by `phase`.
pub fn apply_phase(p: &NilpotentPolynomial, atom: usize, phase: C64) -> NilpotentPolynomial {
    let mut out = NilpotentPolynomial::zero(p.num_atoms(), p.photon_cap());
    for (m, c) in p.terms() {
        let f = if m.contains(atom) { phase } else { C64::new(1.0, 0.0) };
        out.add_term(*m, c * f).expect("same space");
    }
    out
}

#[derive(Clone, Debug)]
pub struct GhzDynamic {
    pub v0n: f64,
    pub v0n_printed: Option<f64>,
    pub t_kerr: f64,
    /// Phase `e^{iφ}` applied to atom 0 to remove the `−i` of the rotation
    /// and the phase of `Π Iₙ`.
    pub local_phase: f64,
    pub fidelity: f64,
    pub success_probability: f64,
}

#[derive(Clone, Debug)]
pub struct GhzReport {
    pub num_atoms: usize,
    pub condition: GhzCondition,
    pub ratio: C64,
    pub symbolic_fidelity: f64,
    pub symbolic_probability: f64,
    /// Symbolic-path fidelity under the other condition, for comparison.
    pub alternative_fidelity: f64,
    pub dynamic: GhzDynamic,
}

fn ghz_local_phase(couplings: &[C64], v0n: f64) -> f64 {
    let prod: C64 = couplings.iter().product();
    let rotation = C64::new(0.0, -v0n.signum());
    -(rotation * prod).arg()
}

pub fn ghz_protocol(couplings: &[C64], kerr: &KerrParams, condition: GhzCondition) -> Result<GhzReport> {
    let n = couplings.len();
    if kerr.photon_gap as usize != n {
        return Err(Error::InvalidParameter(format!("photon gap {} differs from N = {n}", kerr.photon_gap)));
    }
    let s = build_joint_state(&CouplingCoefficients::linear_only(couplings.to_vec())?)?;
    let symbolic = |cond| -> Result<PostSelectedState> {
        let r = ghz_ratio(couplings, cond)?;
        // ⟨F| = B*⟨0| + C*⟨N| with B* = 1, C* = r
        kerr_project(&s, kerr, C64::new(1.0, 0.0), r.conj())
    };
    let main = symbolic(condition)?;
    let other = symbolic(match condition {
        GhzCondition::Exact => GhzCondition::Printed,
        GhzCondition::Printed => GhzCondition::Exact,
    })?;
    let ratio = ghz_ratio(couplings, condition)?;

    let timing = kerr_dynamics_params(kerr, ratio.norm())?;
    let rotated = kerr_rotate_then_vacuum(&s, timing.v0n, timing.t_kerr)?;
    let local_phase = ghz_local_phase(couplings, timing.v0n);
    let corrected = apply_phase(&rotated.polynomial, 0, C64::from_polar(1.0, local_phase));
    Ok(GhzReport {
        num_atoms: n,
        condition,
        ratio,
        symbolic_fidelity: fidelity_to(&main, &TargetState::Ghz)?,
        symbolic_probability: main.success_probability,
        alternative_fidelity: fidelity_to(&other, &TargetState::Ghz)?,
        dynamic: GhzDynamic {
            v0n: timing.v0n,
            v0n_printed: timing.v0n_printed,
            t_kerr: timing.t_kerr,
            local_phase,
            fidelity: fidelity_of(&corrected, &TargetState::Ghz)?,
            success_probability: rotated.success_probability,
        },
    })
}

/// Full dense Kerr evolution of the joint state followed by vacuum detection.
#[derive(Clone, Debug)]
pub struct GhzOracleRun {
    pub calibration: KerrCalibration,
    pub t_kerr: f64,
    pub fidelity: f64,
    pub success_probability: f64,
    /// Measured Rabi frequency over the lowest-order `V₀ₙ`.
    pub rabi_ratio: f64,
    pub rabi_ratio_printed: Option<f64>,
}

/// Runs the Kerr stage on the dense oracle at the numerically calibrated
/// resonance, for the switching time predicted from `V₀ₙ`.
pub fn ghz_oracle_dynamic(couplings: &[C64], kerr: &KerrParams, condition: GhzCondition, cutoff: usize) -> Result<GhzOracleRun> {
    let n = couplings.len();
    let s = build_joint_state(&CouplingCoefficients::linear_only(couplings.to_vec())?)?;
    let ratio = ghz_ratio(couplings, condition)?;
    let timing = kerr_dynamics_params(kerr, ratio.norm())?;
    let calibration = calibrate_kerr(kerr, cutoff)?;
    let dense = DenseState::from_polynomial(&s.polynomial, cutoff)?;
    let evolved = oracle::exact_field_op(&FieldOp::Kerr { params: *kerr, detuning: calibration.detuning, t: timing.t_kerr }, &dense)?;
    let vac = evolved.photon_component(0);
    let success_probability = vac.iter().map(|c| c.norm_sqr()).sum::<f64>() / dense.norm().powi(2);
    let atomic = NilpotentPolynomial::from_atomic_amplitudes(n, &vac)?;
    let corrected = apply_phase(&atomic, 0, C64::from_polar(1.0, ghz_local_phase(couplings, timing.v0n)));
    Ok(GhzOracleRun {
        t_kerr: timing.t_kerr,
        fidelity: fidelity_of(&corrected, &TargetState::Ghz)?,
        success_probability,
        rabi_ratio: calibration.rabi_frequency / timing.v0n.abs(),
        rabi_ratio_printed: timing.v0n_printed.map(|v| calibration.rabi_frequency / v.abs()),
        calibration,
    })
}

#[derive(Clone, Debug)]
pub struct TwoEnsembleReport {
    pub per_ensemble: usize,
    pub mu: C64,
    pub squeeze: SqueezeParams,
    /// Collective nilpotential `Σ β_{k,l} (σ⁺_A)ᵏ (σ⁺_B)ˡ`.
    pub beta: Vec<((u32, u32), C64)>,
    pub beta_11: C64,
    /// `2ζμ²` with the printed `ζ`.
    pub beta_11_expected: C64,
    pub separable: bool,
    pub success_probability: f64,
    /// `|⟨closed form|exact squeeze + vacuum⟩|`.
    pub oracle_fidelity: f64,
}

pub fn two_ensemble_protocol(per_ensemble: usize, mu: C64, p: SqueezeParams) -> Result<TwoEnsembleReport> {
    if per_ensemble == 0 {
        return Err(Error::InvalidParameter("empty ensemble".into()));
    }
    let n = 2 * per_ensemble;
    let s = build_joint_state(&CouplingCoefficients::uniform(n, mu))?;
    let out = squeeze_then_vacuum(&s, p)?;
    let f = out.polynomial.log(PhotonOverflow::Error)?;
    let split = Bipartition::leading(n, per_ensemble)?;
    let collective = f.to_collective(&split)?;
    let row = oracle::vacuum_row(&FieldOp::Squeeze { g: p.g, t: p.t }, n)?;
    let exact = project_field(&s, |k| row.amplitudes[k as usize]);
    let oracle_fidelity = oracle::overlap(&exact.to_atomic_amplitudes()?, &out.amplitudes()?);
    Ok(TwoEnsembleReport {
        per_ensemble,
        mu,
        squeeze: p,
        beta: collective.terms().map(|(k, c)| (*k, *c)).collect(),
        beta_11: collective.coeff(1, 1),
        beta_11_expected: mu * mu * 2.0 * p.zeta(),
        separable: f.is_separable(&split),
        success_probability: out.success_probability,
        oracle_fidelity,
    })
}

/// Fidelity to `target` after displacement and vacuum detection, for each
/// `λ` on a grid.
pub fn displacement_scan(
    couplings: &CouplingCoefficients,
    target: &TargetState,
    lambdas: &[C64],
) -> Result<Vec<(C64, f64, f64)>> {
    let s = build_joint_state(couplings)?;
    lambdas
        .par_iter()
        .map(|&l| {
            let out = crate::control::displace_then_vacuum(&s, l)?;
            Ok((l, fidelity_to(&out, target)?, out.success_probability))
        })
        .collect()
}

/// `|1…1⟩` coefficient over the vacuum coefficient of a polynomial state.
pub fn top_to_vacuum_ratio(p: &NilpotentPolynomial) -> C64 {
    let all: Vec<usize> = (0..p.num_atoms()).collect();
    p.coeff(&Monomial::new(&all, 0)) / p.constant_term()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn dicke_examples() {
        let k = c(0.3);
        let a = 0.09;
        let p = dicke_success_probability(2, 1, k, DickeFormula::Exact).unwrap();
        assert!((p - 2.0 * a / (1.0 + 2.0 * a + 2.0 * a * a)).abs() < 1e-16);
        let p = dicke_success_probability(2, 1, k, DickeFormula::Printed).unwrap();
        assert!((p - 1.0 / (1.0 + 2.0 * a)).abs() < 1e-15);
        assert!((dicke_success_probability(4, 0, c(1e-9), DickeFormula::Exact).unwrap() - 1.0).abs() < 1e-15);
        let p = dicke_success_probability(1, 1, c(2.0), DickeFormula::Exact).unwrap();
        assert!((p - 0.8).abs() < 1e-16);
        for n in 1..=6 {
            for m in 0..=n {
                let e = dicke_success_probability(n, m, C64::new(0.4, 0.3), DickeFormula::Exact).unwrap();
                let x = dicke_success_probability_expanded(n, m, C64::new(0.4, 0.3)).unwrap();
                assert!((e - x).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn dicke_post_selection_gives_dicke_state() {
        for m in 0..=5 {
            let st = dicke_state(5, m, C64::new(0.2, -0.5)).unwrap();
            assert!((fidelity_to(&st, &TargetState::Dicke(m)).unwrap() - 1.0).abs() < 1e-13);
        }
        let w = dicke_state(4, 1, c(0.3)).unwrap();
        assert!((fidelity_to(&w, &TargetState::W).unwrap() - 1.0).abs() < 1e-13);
        assert!(fidelity_to(&w, &TargetState::Ghz).unwrap() < 1e-15);
    }

    #[test]
    fn sweep_shapes() {
        let grid = linear_grid(0.0, 2.0, 201);
        let sw = dicke_sweep(10, &[0, 1, 2, 3], &grid).unwrap();
        assert_eq!(sw.rows.len(), 4 * 201);
        assert!(sw.exact_shapes[0].monotone_decreasing);
        for s in &sw.exact_shapes[1..] {
            assert!(s.has_unique_interior_maximum(&grid), "{s:?}");
        }
        assert!(sw.to_csv().starts_with("N,M,c_abs,P_printed,P_exact\n10,0,0,"));
    }

    #[test]
    fn ghz_exact_condition() {
        let k = KerrParams::with_coupling(1.0, 0.01, 1.0, 3).unwrap();
        let r = ghz_protocol(&[c(1.0); 3], &k, GhzCondition::Exact).unwrap();
        assert!((r.symbolic_fidelity - 1.0).abs() < 1e-14);
        assert!((r.dynamic.fidelity - 1.0).abs() < 1e-12);
        // the printed balance leaves |000⟩ + 6|111⟩
        assert!((r.alternative_fidelity - 7.0 / 74f64.sqrt()).abs() < 1e-14);
        let k = KerrParams::with_coupling(1.0, 0.01, 1.0, 2).unwrap();
        let r = ghz_protocol(&[C64::new(0.3, 0.2), C64::new(-0.1, 0.5)], &k, GhzCondition::Exact).unwrap();
        assert!((r.symbolic_fidelity - 1.0).abs() < 1e-14);
        assert!((r.dynamic.fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_ensembles() {
        let mu = C64::new(0.2, 0.1);
        let r = two_ensemble_protocol(2, mu, SqueezeParams::new(1.0, 0.03).unwrap()).unwrap();
        assert!((r.beta_11 - r.beta_11_expected).norm() < 1e-12);
        assert!(!r.separable);
        assert!(r.oracle_fidelity > 1.0 - 1e-6);
        let r = two_ensemble_protocol(2, mu, SqueezeParams::new(1.0, 0.0).unwrap()).unwrap();
        assert!(r.separable && r.beta_11.norm() == 0.0);
        let r = two_ensemble_protocol(3, c(0.0), SqueezeParams::new(1.0, 0.02).unwrap()).unwrap();
        assert!(r.separable && r.beta.is_empty());
    }
}
