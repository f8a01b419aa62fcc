//! Coupling coefficients `Iₙ` and `Iₙₘ` of the weak-excitation joint state,
//! computed in closed form from piecewise-constant control schedules.
//!
//! With `Ωₙ = ω₀ + ωₙ`,
//!
//! ```text
//! Iₙ  = i ∫₀ᵀ e^{iΩₙ(τ−T)} Cₙ(τ) 𝓔(τ) dτ
//! Iₙₘ = ∫₀ᵀ dτ ∫₀^τ dθ 𝓔(τ)𝓔(θ) Cₙ(θ) Cₘ(τ) e^{−i(τ(ω₀−ωₘ) + T(ωₙ+ωₘ) − θ(ωₙ+ω₀))}
//! ```
//!
//! The pair integral places the earlier time `θ` on atom `n`. An alternative
//! placement (`Cₙ(τ) Cₘ(θ)` with the same exponent) is available through
//! [`PairConvention::SwappedCouplings`] for comparison against the dense
//! oracle.

pub mod integrals;
mod solve;

pub use solve::{solve_schedule, CoefficientKey, ScheduleSolution, ScheduleTemplate, Window};

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nilpotent::fmt_f64;
use integrals::{moment, nested_moment};

/// Default flag threshold for the estimated single-atom excitation probability.
pub const DEFAULT_EXCITATION_BOUND: f64 = 0.2;

/// Resonance threshold on `|ω₀ + ωₙ| · T`.
pub const RESONANCE_THRESHOLD: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub duration: f64,
    pub laser_amplitude: f64,
    /// Raman coupling of each atom during this segment; zero means the atom
    /// is outside the cavity.
    pub couplings: Vec<f64>,
}

/// Piecewise-constant laser amplitude and per-atom couplings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSchedule {
    pub omega_cavity: f64,
    pub omega_atoms: Vec<f64>,
    pub segments: Vec<Segment>,
}

impl ControlSchedule {
    pub fn num_atoms(&self) -> usize {
        self.omega_atoms.len()
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_atoms();
        if n == 0 {
            return Err(Error::InvalidSchedule("no atoms".into()));
        }
        if self.segments.is_empty() {
            return Err(Error::InvalidSchedule("no segments".into()));
        }
        if !self.omega_cavity.is_finite() || self.omega_atoms.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidSchedule("non-finite frequency".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.duration > 0.0) || !s.duration.is_finite() {
                return Err(Error::InvalidSchedule(format!("segment {i}: duration must be positive")));
            }
            if s.couplings.len() != n {
                return Err(Error::InvalidSchedule(format!(
                    "segment {i}: {} couplings for {n} atoms",
                    s.couplings.len()
                )));
            }
            if !s.laser_amplitude.is_finite() || s.couplings.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidSchedule(format!("segment {i}: non-finite value")));
            }
        }
        Ok(())
    }

    /// Start time of each segment.
    pub fn segment_starts(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.segments
            .iter()
            .map(|s| {
                let start = t;
                t += s.duration;
                start
            })
            .collect()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schedule serializes")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PairConvention {
    /// Earlier time on atom `n`: `Cₙ(θ) Cₘ(τ)`.
    #[default]
    EarlierOnFirst,
    /// `Cₙ(τ) Cₘ(θ)` with the same exponent.
    SwappedCouplings,
}

/// `Iₙ` and `Iₙₘ` at the end of a schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingCoefficients {
    pub linear: Vec<C64>,
    /// Full `N×N` matrix as integrated; only `Iₙₘ + Iₘₙ` reaches any state.
    pub pair: DMatrix<C64>,
    pub evaluated_at: f64,
}

impl CouplingCoefficients {
    pub fn new(linear: Vec<C64>, pair: DMatrix<C64>) -> Result<Self> {
        let n = linear.len();
        if n == 0 || pair.nrows() != n || pair.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} linear coefficients with a {}x{} pair matrix",
                pair.nrows(),
                pair.ncols()
            )));
        }
        if linear.iter().chain(pair.iter()).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coupling coefficient".into()));
        }
        Ok(Self { linear, pair, evaluated_at: 0.0 })
    }

    /// Linear coefficients only, pair terms zero.
    pub fn linear_only(linear: Vec<C64>) -> Result<Self> {
        let n = linear.len();
        Self::new(linear, DMatrix::zeros(n, n))
    }

    pub fn uniform(num_atoms: usize, c: C64) -> Self {
        Self::linear_only(vec![c; num_atoms]).expect("finite")
    }

    pub fn num_atoms(&self) -> usize {
        self.linear.len()
    }

    /// Symmetric part `(Iₙₘ + Iₘₙ)/2` with zero diagonal. The antisymmetric
    /// remainder and the diagonal multiply `σ⁺ₙσ⁺ₘ − σ⁺ₘσ⁺ₙ = 0` and
    /// `(σ⁺ₙ)² = 0`, so dropping them changes no state.
    pub fn symmetrized_pair(&self) -> DMatrix<C64> {
        let n = self.num_atoms();
        DMatrix::from_fn(n, n, |i, j| if i == j { C64::default() } else { (self.pair[(i, j)] + self.pair[(j, i)]) * 0.5 })
    }

    /// Coefficient of `σ⁺ₙσ⁺ₘ` (n ≠ m) in the exponent: `Iₙₘ + Iₘₙ`.
    pub fn pair_weight(&self, n: usize, m: usize) -> C64 {
        if n == m {
            C64::default()
        } else {
            self.pair[(n, m)] + self.pair[(m, n)]
        }
    }

    /// Norm of the discarded antisymmetric part.
    pub fn antisymmetric_norm(&self) -> f64 {
        let n = self.num_atoms();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += ((self.pair[(i, j)] - self.pair[(j, i)]) * 0.5).norm_sqr();
            }
        }
        s.sqrt()
    }

    /// First-order estimate of the excitation probability of each atom.
    pub fn excitation_estimates(&self) -> Vec<f64> {
        let n = self.num_atoms();
        (0..n)
            .map(|i| {
                let lin = self.linear[i].norm_sqr();
                let pairs: f64 = (0..n).map(|j| self.pair_weight(i, j).norm_sqr()).sum();
                lin + pairs
            })
            .collect()
    }

    /// Atoms whose excitation estimate exceeds `bound`.
    pub fn flagged_atoms(&self, bound: f64) -> Vec<usize> {
        self.excitation_estimates()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > bound)
            .map(|(i, _)| i)
            .collect()
    }

    /// All coefficients negated. Maps the coefficients to the amplitudes
    /// produced by `e^{−iHt}` evolution under the atom–cavity Hamiltonian.
    pub fn negated(&self) -> Self {
        Self {
            linear: self.linear.iter().map(|c| -c).collect(),
            pair: -self.pair.clone(),
            evaluated_at: self.evaluated_at,
        }
    }

    /// CSV with header `n,m,re,im`; linear rows leave `m` empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,m,re,im\n");
        for (i, c) in self.linear.iter().enumerate() {
            writeln!(out, "{i},,{},{}", fmt_f64(c.re), fmt_f64(c.im)).unwrap();
        }
        let n = self.num_atoms();
        for i in 0..n {
            for j in 0..n {
                let c = self.pair[(i, j)];
                writeln!(out, "{i},{j},{},{}", fmt_f64(c.re), fmt_f64(c.im)).unwrap();
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("n,m,re,im") {
            return Err(Error::Config("coefficient CSV must start with header n,m,re,im".into()));
        }
        let mut linear: Vec<(usize, C64)> = Vec::new();
        let mut pairs: Vec<(usize, usize, C64)> = Vec::new();
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Config(format!("coefficient CSV line {}: malformed", k + 2));
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(bad());
            }
            let n: usize = f[0].parse().map_err(|_| bad())?;
            let re: f64 = f[2].parse().map_err(|_| bad())?;
            let im: f64 = f[3].parse().map_err(|_| bad())?;
            if f[1].is_empty() {
                linear.push((n, C64::new(re, im)));
            } else {
                pairs.push((n, f[1].parse().map_err(|_| bad())?, C64::new(re, im)));
            }
        }
        let num = linear.iter().map(|(n, _)| n + 1).max().unwrap_or(0);
        let mut lin = vec![C64::default(); num];
        for (n, c) in linear {
            lin[n] = c;
        }
        let mut pair = DMatrix::zeros(num, num);
        for (n, m, c) in pairs {
            if n >= num || m >= num {
                return Err(Error::AtomOutOfRange { index: n.max(m), num_atoms: num });
            }
            pair[(n, m)] = c;
        }
        Self::new(lin, pair)
    }
}

/// Closed-form `Iₙ`, `Iₙₘ` for a piecewise-constant schedule.
pub fn integrate_coefficients(s: &ControlSchedule) -> Result<CouplingCoefficients> {
    integrate_with(s, PairConvention::EarlierOnFirst)
}

pub fn integrate_with(s: &ControlSchedule, convention: PairConvention) -> Result<CouplingCoefficients> {
    s.validate()?;
    let n = s.num_atoms();
    let total = s.total_time();
    let starts = s.segment_starts();
    let w0 = s.omega_cavity;
    let i = C64::new(0.0, 1.0);

    let linear: Vec<C64> = (0..n)
        .map(|a| {
            let omega = w0 + s.omega_atoms[a];
            let mut acc = C64::default();
            for (seg, &t0) in s.segments.iter().zip(&starts) {
                let amp = seg.couplings[a] * seg.laser_amplitude;
                if amp == 0.0 {
                    continue;
                }
                let l = seg.duration;
                acc += amp * (i * omega * (t0 - total)).exp() * l * moment(0, i * omega * l);
            }
            i * acc
        })
        .collect();

    let mut pair = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            // atom on the earlier time θ, atom on the later time τ
            let (early, late) = match convention {
                PairConvention::EarlierOnFirst => (a, b),
                PairConvention::SwappedCouplings => (b, a),
            };
            let alpha = -i * (w0 - s.omega_atoms[b]);
            let beta = i * (s.omega_atoms[a] + w0);
            let phase = (-i * total * (s.omega_atoms[a] + s.omega_atoms[b])).exp();

            // running sum of the θ-integrals over all earlier segments
            let mut earlier = C64::default();
            let mut acc = C64::default();
            for (seg, &t0) in s.segments.iter().zip(&starts) {
                let l = seg.duration;
                let e2 = seg.laser_amplitude * seg.laser_amplitude;
                let late_amp = seg.couplings[late] * seg.laser_amplitude;
                let early_amp = seg.couplings[early] * seg.laser_amplitude;
                if late_amp != 0.0 {
                    let tau_int = (alpha * t0).exp() * l * moment(0, alpha * l);
                    acc += late_amp * tau_int * earlier;
                    if early_amp != 0.0 {
                        let nested = ((alpha + beta) * t0).exp() * l * l * nested_moment(alpha * l, beta * l);
                        acc += e2 * seg.couplings[late] * seg.couplings[early] * nested;
                    }
                }
                if early_amp != 0.0 {
                    earlier += early_amp * (beta * t0).exp() * l * moment(0, beta * l);
                }
            }
            pair[(a, b)] = phase * acc;
        }
    }

    let mut c = CouplingCoefficients::new(linear, pair)?;
    c.evaluated_at = total;
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Resonant,
    Detuned,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtomRegime {
    pub atom: usize,
    /// `|ω₀ + ωₙ| · T`
    pub detuning_time: f64,
    pub regime: Regime,
    /// `maxₘ |Iₙₘ + Iₘₙ| / |Iₙ|`, infinite when `Iₙ = 0` and pairs are not.
    pub suppression_ratio: f64,
}

/// Classifies each atom as resonant or detuned and reports how strongly the
/// pair coefficients are suppressed relative to the linear one.
pub fn resonance_report(s: &ControlSchedule) -> Result<Vec<AtomRegime>> {
    let coeffs = integrate_coefficients(s)?;
    let total = s.total_time();
    let n = s.num_atoms();
    Ok((0..n)
        .map(|a| {
            let detuning_time = (s.omega_cavity + s.omega_atoms[a]).abs() * total;
            let regime = if detuning_time <= RESONANCE_THRESHOLD { Regime::Resonant } else { Regime::Detuned };
            let pair_max = (0..n).map(|b| coeffs.pair_weight(a, b).norm()).fold(0.0, f64::max);
            let lin = coeffs.linear[a].norm();
            let suppression_ratio = if lin > 0.0 {
                pair_max / lin
            } else if pair_max > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            AtomRegime { atom: a, detuning_time, regime, suppression_ratio }
        })
        .collect())
}
