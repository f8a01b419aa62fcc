//! Inverse problem: laser amplitudes for a sequence of on/off windows that
//! reproduce targeted coupling coefficients.
//!
//! Each window has a fixed duration and a fixed set of atoms inside the
//! cavity; its laser amplitude `xᵥ` is the unknown. The linear coefficients
//! are linear in `x` and the pair weights are quadratic forms in `x`, so the
//! maps are assembled once from unit-amplitude integrations and the system is
//! solved by damped Gauss–Newton iterations, each a linear least-squares
//! solve.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{integrate_coefficients, ControlSchedule, CouplingCoefficients, Segment};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub atoms: Vec<usize>,
    pub duration: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleTemplate {
    pub omega_cavity: f64,
    pub omega_atoms: Vec<f64>,
    /// Coupling of an atom while it is inside the cavity.
    #[serde(default = "one")]
    pub coupling: f64,
    pub windows: Vec<Window>,
}

fn one() -> f64 {
    1.0
}

impl ScheduleTemplate {
    /// One window per atom pair, the simplest complete setting.
    pub fn pairwise(num_atoms: usize, omega_cavity: f64, omega_atoms: Vec<f64>, duration: f64) -> Self {
        let mut windows = Vec::new();
        for n in 0..num_atoms {
            for m in n + 1..num_atoms {
                windows.push(Window { atoms: vec![n, m], duration });
            }
        }
        Self { omega_cavity, omega_atoms, coupling: 1.0, windows }
    }

    pub fn num_atoms(&self) -> usize {
        self.omega_atoms.len()
    }

    /// Schedule with the given window amplitudes.
    pub fn schedule(&self, amplitudes: &[f64]) -> ControlSchedule {
        let n = self.num_atoms();
        ControlSchedule {
            omega_cavity: self.omega_cavity,
            omega_atoms: self.omega_atoms.clone(),
            segments: self
                .windows
                .iter()
                .zip(amplitudes)
                .map(|(w, &x)| {
                    let mut couplings = vec![0.0; n];
                    for &a in &w.atoms {
                        couplings[a] = self.coupling;
                    }
                    Segment { duration: w.duration, laser_amplitude: x, couplings }
                })
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_atoms();
        if self.windows.is_empty() {
            return Err(Error::InvalidSchedule("template has no windows".into()));
        }
        for (i, w) in self.windows.iter().enumerate() {
            if let Some(&a) = w.atoms.iter().find(|&&a| a >= n) {
                return Err(Error::AtomOutOfRange { index: a, num_atoms: n });
            }
            if !(w.duration > 0.0) {
                return Err(Error::InvalidSchedule(format!("window {i}: duration must be positive")));
            }
        }
        Ok(())
    }
}

/// A coefficient that can be targeted. `Pair(n, m)` addresses the weight
/// `Iₙₘ + Iₘₙ` of `σ⁺ₙσ⁺ₘ`, the only combination visible in any state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CoefficientKey {
    Linear(usize),
    Pair(usize, usize),
}

impl CoefficientKey {
    pub fn read(&self, c: &CouplingCoefficients) -> C64 {
        match *self {
            CoefficientKey::Linear(n) => c.linear[n],
            CoefficientKey::Pair(n, m) => c.pair_weight(n, m),
        }
    }

    /// Every linear coefficient and every pair `n < m`: N(N+1)/2 keys.
    pub fn all(num_atoms: usize) -> Vec<CoefficientKey> {
        let mut keys: Vec<_> = (0..num_atoms).map(CoefficientKey::Linear).collect();
        for n in 0..num_atoms {
            for m in n + 1..num_atoms {
                keys.push(CoefficientKey::Pair(n, m));
            }
        }
        keys
    }
}

#[derive(Clone, Debug)]
pub struct ScheduleSolution {
    pub amplitudes: Vec<f64>,
    pub schedule: ControlSchedule,
    pub residual_norm: f64,
    /// Residual norm over target norm (absolute when the target is zero).
    pub relative_residual: f64,
    /// Condition number of the Jacobian at the solution.
    pub condition: f64,
}

/// Coefficients as polynomials in the window amplitudes:
/// `value = Σ_w lin[w]·x_w + Σ_{j≤k} quad[j][k]·x_j·x_k`.
struct CoefficientMap {
    lin: Vec<Vec<C64>>,
    quad: Vec<Vec<Vec<C64>>>,
}

impl CoefficientMap {
    fn build(template: &ScheduleTemplate, keys: &[CoefficientKey]) -> Result<Self> {
        let w = template.windows.len();
        let eval = |x: &[f64]| -> Result<Vec<C64>> {
            let c = integrate_coefficients(&template.schedule(x))?;
            Ok(keys.iter().map(|k| k.read(&c)).collect())
        };
        let unit = |j: usize, k: usize| {
            let mut x = vec![0.0; w];
            x[j] += 1.0;
            x[k] += 1.0;
            x
        };
        let mut single = Vec::with_capacity(w);
        let mut lin = Vec::with_capacity(w);
        let mut quad = vec![vec![vec![C64::default(); keys.len()]; w]; w];
        for j in 0..w {
            let mut x = vec![0.0; w];
            x[j] = 1.0;
            let plus = eval(&x)?;
            x[j] = -1.0;
            let minus = eval(&x)?;
            // odd part is linear, even part quadratic
            lin.push(plus.iter().zip(&minus).map(|(p, m)| (p - m) * 0.5).collect::<Vec<_>>());
            quad[j][j] = plus.iter().zip(&minus).map(|(p, m)| (p + m) * 0.5).collect();
            single.push(plus);
        }
        for j in 0..w {
            for k in j + 1..w {
                let both = eval(&unit(j, k))?;
                quad[j][k] = (0..keys.len()).map(|i| both[i] - single[j][i] - single[k][i]).collect();
            }
        }
        Ok(Self { lin, quad })
    }

    fn values(&self, x: &[f64], nkeys: usize) -> Vec<C64> {
        let w = x.len();
        let mut v = vec![C64::default(); nkeys];
        for j in 0..w {
            for i in 0..nkeys {
                v[i] += self.lin[j][i] * x[j];
            }
            for k in j..w {
                let xx = x[j] * x[k];
                if xx != 0.0 {
                    for i in 0..nkeys {
                        v[i] += self.quad[j][k][i] * xx;
                    }
                }
            }
        }
        v
    }

    /// Complex Jacobian, one row per key, one column per window.
    fn jacobian(&self, x: &[f64], nkeys: usize) -> Vec<Vec<C64>> {
        let w = x.len();
        let mut jac = vec![vec![C64::default(); w]; nkeys];
        for (i, row) in jac.iter_mut().enumerate() {
            for (col, entry) in row.iter_mut().enumerate() {
                let mut d = self.lin[col][i];
                for j in 0..w {
                    let (a, b) = if j <= col { (j, col) } else { (col, j) };
                    let q = self.quad[a][b][i];
                    d += if j == col { q * 2.0 * x[col] } else { q * x[j] };
                }
                *entry = d;
            }
        }
        jac
    }
}

/// Stacks real and imaginary parts, dropping rows that vanish identically.
fn real_system(rows: &[Vec<C64>], keep: &[bool]) -> DMatrix<f64> {
    let w = rows.first().map_or(0, Vec::len);
    let kept: Vec<Vec<f64>> = rows
        .iter()
        .flat_map(|r| [r.iter().map(|c| c.re).collect::<Vec<_>>(), r.iter().map(|c| c.im).collect()])
        .zip(keep)
        .filter(|(_, &k)| k)
        .map(|(r, _)| r)
        .collect();
    DMatrix::from_fn(kept.len(), w, |i, j| kept[i][j])
}

fn real_residual(values: &[C64], target: &[C64], keep: &[bool]) -> DVector<f64> {
    let r: Vec<f64> = values
        .iter()
        .zip(target)
        .flat_map(|(v, t)| [(v - t).re, (v - t).im])
        .zip(keep)
        .filter(|(_, &k)| k)
        .map(|(r, _)| r)
        .collect();
    DVector::from_vec(r)
}

const MAX_ITERATIONS: usize = 200;
const STARTS: usize = 12;

/// Finds window amplitudes whose coefficients match `targets`.
///
/// Fails with [`Error::RankDeficient`] when there are fewer windows than
/// targeted coefficients and with [`Error::Singular`] when the Jacobian at
/// the best solution is rank deficient.
pub fn solve_schedule(template: &ScheduleTemplate, targets: &[(CoefficientKey, C64)]) -> Result<ScheduleSolution> {
    template.validate()?;
    let n = template.num_atoms();
    for (key, _) in targets {
        let bad = match *key {
            CoefficientKey::Linear(a) => a >= n,
            CoefficientKey::Pair(a, b) => a >= n || b >= n || a == b,
        };
        if bad {
            return Err(Error::InvalidParameter(format!("cannot target {key:?} with {n} atoms")));
        }
    }
    let w = template.windows.len();
    if w < targets.len() {
        return Err(Error::RankDeficient { unknowns: w, targets: targets.len() });
    }
    let keys: Vec<CoefficientKey> = targets.iter().map(|(k, _)| *k).collect();
    let goal: Vec<C64> = targets.iter().map(|(_, v)| *v).collect();
    let target_norm = goal.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();

    let map = CoefficientMap::build(template, &keys)?;
    let nk = keys.len();

    // real/imaginary rows that no amplitude can ever move
    let scale_lin = map.lin.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
    let scale_quad = map.quad.iter().flatten().flatten().map(|c| c.norm()).fold(0.0, f64::max);
    let structural = 1e-14 * scale_lin.max(scale_quad).max(f64::MIN_POSITIVE);
    let mut keep = vec![false; 2 * nk];
    for i in 0..nk {
        for part in 0..2 {
            let pick = |c: &C64| if part == 0 { c.re } else { c.im };
            let moves = (0..w).any(|j| pick(&map.lin[j][i]).abs() > structural)
                || (0..w).any(|j| (j..w).any(|k| pick(&map.quad[j][k][i]).abs() > structural));
            keep[2 * i + part] = moves;
        }
    }
    // a target in a frozen direction is unreachable
    for i in 0..nk {
        if (!keep[2 * i] && goal[i].re.abs() > structural) || (!keep[2 * i + 1] && goal[i].im.abs() > structural) {
            return Err(Error::Singular { condition: f64::INFINITY });
        }
    }

    if target_norm == 0.0 {
        let x = vec![0.0; w];
        return finish(template, &map, x, &goal, &keep, nk, target_norm);
    }

    let typical = {
        let lin_scale = if scale_lin > 0.0 { target_norm / scale_lin } else { 0.0 };
        let quad_scale = if scale_quad > 0.0 { (target_norm / scale_quad).sqrt() } else { 0.0 };
        lin_scale.max(quad_scale).max(1e-12)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x5c4ed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in 0..STARTS {
        let x0: Vec<f64> = (0..w)
            .map(|j| match start {
                0 => typical,
                1 => if j % 2 == 0 { typical } else { -typical },
                _ => typical * rng.gen_range(-2.0..2.0),
            })
            .collect();
        let x = gauss_newton(&map, x0, &goal, &keep, nk);
        let r = real_residual(&map.values(&x, nk), &goal, &keep).norm();
        if best.as_ref().map_or(true, |(b, _)| r < *b) {
            best = Some((r, x));
        }
        if r <= 1e-13 * target_norm {
            break;
        }
    }
    let (_, x) = best.expect("at least one start");
    finish(template, &map, x, &goal, &keep, nk, target_norm)
}

fn finish(
    template: &ScheduleTemplate,
    map: &CoefficientMap,
    x: Vec<f64>,
    goal: &[C64],
    keep: &[bool],
    nk: usize,
    target_norm: f64,
) -> Result<ScheduleSolution> {
    let jac = real_system(&map.jacobian(&x, nk), keep);
    let condition = condition_number(&jac);
    let residual_norm = real_residual(&map.values(&x, nk), goal, keep).norm();
    let relative_residual = if target_norm > 0.0 { residual_norm / target_norm } else { residual_norm };
    // the all-zero target is met exactly by switching every window off
    if target_norm > 0.0 && condition > 1e12 {
        return Err(Error::Singular { condition });
    }
    Ok(ScheduleSolution {
        schedule: template.schedule(&x),
        amplitudes: x,
        residual_norm,
        relative_residual,
        condition,
    })
}

fn gauss_newton(map: &CoefficientMap, mut x: Vec<f64>, goal: &[C64], keep: &[bool], nk: usize) -> Vec<f64> {
    let mut r = real_residual(&map.values(&x, nk), goal, keep);
    let mut damping = 1e-6;
    for _ in 0..MAX_ITERATIONS {
        let jac = real_system(&map.jacobian(&x, nk), keep);
        let jt = jac.transpose();
        let mut normal = &jt * &jac;
        let diag_scale = normal.diagonal().max().max(f64::MIN_POSITIVE);
        for i in 0..normal.nrows() {
            normal[(i, i)] += damping * diag_scale;
        }
        let rhs = -(&jt * &r);
        let Some(step) = normal.cholesky().map(|c| c.solve(&rhs)) else {
            damping *= 10.0;
            continue;
        };
        let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let r_trial = real_residual(&map.values(&trial, nk), goal, keep);
        if r_trial.norm() < r.norm() {
            let converged = (r.norm() - r_trial.norm()) <= 1e-15 * r.norm().max(1e-300);
            x = trial;
            r = r_trial;
            damping = (damping * 0.1).max(1e-15);
            if converged || r.norm() < 1e-300 {
                break;
            }
        } else {
            damping *= 10.0;
            if damping > 1e12 {
                break;
            }
        }
    }
    x
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let rank_dim = m.nrows().min(m.ncols());
    let max = sv.max();
    // singular values come unsorted from nalgebra only in degenerate cases
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // columns beyond the row count are free directions, not defects
    let min = s[..rank_dim].last().copied().unwrap_or(0.0);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_window_pair_target() {
        let template = ScheduleTemplate {
            omega_cavity: 3.0,
            omega_atoms: vec![1.0, 1.5, -0.5],
            coupling: 1.0,
            windows: vec![Window { atoms: vec![0, 1], duration: 0.8 }],
        };
        // unit window: weight q, so amplitude x gives x² q
        let q = CoefficientKey::Pair(0, 1).read(&integrate_coefficients(&template.schedule(&[1.0])).unwrap());
        let v = q * 0.09;
        let sol = solve_schedule(&template, &[(CoefficientKey::Pair(0, 1), v)]).unwrap();
        assert!((sol.amplitudes[0].abs() - 0.3).abs() < 1e-10, "{:?}", sol.amplitudes);
        let got = CoefficientKey::Pair(0, 1).read(&integrate_coefficients(&sol.schedule).unwrap());
        assert!((got - v).norm() < 1e-12);
    }

    #[test]
    fn zero_target_switches_everything_off() {
        let mut template = ScheduleTemplate::pairwise(3, 2.0, vec![0.3, -0.2, 0.1], 0.5);
        for a in 0..3 {
            template.windows.push(Window { atoms: vec![a], duration: 0.5 });
        }
        let targets: Vec<_> = CoefficientKey::all(3).into_iter().map(|k| (k, C64::default())).collect();
        let sol = solve_schedule(&template, &targets).unwrap();
        assert!(sol.amplitudes.iter().all(|&x| x == 0.0));
        assert_eq!(sol.residual_norm, 0.0);
    }

    #[test]
    fn too_few_windows_is_rank_deficient() {
        let template = ScheduleTemplate::pairwise(3, 2.0, vec![0.3, -0.2, 0.1], 0.5);
        // three windows, six coefficients
        let targets: Vec<_> = CoefficientKey::all(3).into_iter().map(|k| (k, C64::new(0.01, 0.0))).collect();
        assert_eq!(
            solve_schedule(&template, &targets).unwrap_err(),
            Error::RankDeficient { unknowns: 3, targets: 6 }
        );
    }

    #[test]
    fn duplicated_windows_are_singular() {
        let template = ScheduleTemplate {
            omega_cavity: 5.0,
            omega_atoms: vec![-5.0, -5.0],
            coupling: 1.0,
            windows: vec![Window { atoms: vec![0, 1], duration: 1.0 }, Window { atoms: vec![0, 1], duration: 1.0 }],
        };
        let targets = [
            (CoefficientKey::Linear(0), C64::new(0.0, 0.1)),
            (CoefficientKey::Linear(1), C64::new(0.0, 0.3)),
        ];
        assert!(matches!(solve_schedule(&template, &targets), Err(Error::Singular { .. })));
    }
}
