//! Scenario files: one versioned TOML document describing a run — a source
//! of coupling coefficients, a pipeline of field primitives ending in a
//! measurement, and/or a named protocol — and its execution into CSV and
//! text outputs.
//!
//! Every float written by this module goes through [`fmt_f64`] and every
//! parallel computation is collected in input order, so a fixed
//! configuration produces byte-identical outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{
    displace_then_vacuum, kerr_project, measure_photon_number, squeeze_then_vacuum, KerrParams, PostSelectedState,
    SqueezeParams,
};
use crate::coupling::{
    integrate_coefficients, solve_schedule, CoefficientKey, ControlSchedule, CouplingCoefficients, ScheduleTemplate,
    Segment,
};
use crate::error::{Error, Result};
use crate::nilpotent::{canonicalize, fmt_f64, CanonicalizeSettings, NilpotentPolynomial};
use crate::oracle::{self, DenseState, FieldOp, PropagationSettings};
use crate::protocols::{
    dicke_success_probability, dicke_sweep, ghz_oracle_dynamic, ghz_protocol, linear_grid,
    two_ensemble_protocol, DickeFormula, GhzCondition,
};
use crate::state::{build_joint_state, gaussian_norm, JointState};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 0x5eed;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    /// Seed for every randomized component.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub validation: ValidationToggles,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ControlSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CoefficientsConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pipeline: Vec<Stage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Prepended to every output file name.
    #[serde(default)]
    pub prefix: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("cavent-out"), prefix: String::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationToggles {
    /// Cross-check pipeline results against the dense oracle.
    #[serde(default = "default_true")]
    pub oracle: bool,
    /// Tolerance for the pipeline cross-checks.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Whether a failed asserted check turns into a nonzero exit status.
    #[serde(default = "default_true")]
    pub fail_on_breach: bool,
}

fn default_tolerance() -> f64 {
    1e-10
}

impl Default for ValidationToggles {
    fn default() -> Self {
        Self { oracle: true, tolerance: default_tolerance(), fail_on_breach: true }
    }
}

/// Coupling coefficients given directly: complex numbers as `[re, im]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsConfig {
    pub linear: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<PairEntry>,
}

/// Weight `Iₙₘ + Iₘₙ` of `σ⁺ₙσ⁺ₘ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairEntry {
    pub atoms: [usize; 2],
    pub value: [f64; 2],
}

impl CoefficientsConfig {
    pub fn to_coefficients(&self) -> Result<CouplingCoefficients> {
        let n = self.linear.len();
        let mut pair = DMatrix::zeros(n, n);
        for e in &self.pairs {
            let [i, j] = e.atoms;
            if i >= n || j >= n {
                return Err(Error::AtomOutOfRange { index: i.max(j), num_atoms: n });
            }
            if i == j {
                return Err(Error::Config(format!("pair entry repeats atom {i}")));
            }
            pair[(i.min(j), i.max(j))] += cplx(e.value);
        }
        CouplingCoefficients::new(self.linear.iter().map(|&z| cplx(z)).collect(), pair)
    }
}

fn cplx(z: [f64; 2]) -> C64 {
    C64::new(z[0], z[1])
}

/// One pipeline step. The photon-count, displacement, squeezing and Kerr
/// stages end in a measurement; `canonicalize` post-processes the
/// measured atomic state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Stage {
    Measure {
        photons: u32,
    },
    Displace {
        lambda: [f64; 2],
    },
    Squeeze {
        g: f64,
        t: f64,
    },
    Kerr {
        kappa: f64,
        laser_amplitude: f64,
        omega_cavity: f64,
        photon_gap: u32,
        b: [f64; 2],
        c: [f64; 2],
    },
    Canonicalize {
        #[serde(default = "default_restarts")]
        restarts: usize,
        #[serde(default = "default_sweeps")]
        max_sweeps: usize,
    },
}

fn default_restarts() -> usize {
    CanonicalizeSettings::default().restarts
}

fn default_sweeps() -> usize {
    CanonicalizeSettings::default().max_sweeps
}

impl Stage {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, Stage::Canonicalize { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionChoice {
    Exact,
    Printed,
}

impl From<ConditionChoice> for GhzCondition {
    fn from(c: ConditionChoice) -> Self {
        match c {
            ConditionChoice::Exact => GhzCondition::Exact,
            ConditionChoice::Printed => GhzCondition::Printed,
        }
    }
}

/// A coefficient target: one atom addresses `Iₙ`, two address the pair weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetEntry {
    pub atoms: Vec<usize>,
    pub value: [f64; 2],
}

impl TargetEntry {
    fn key(&self) -> Result<CoefficientKey> {
        match self.atoms[..] {
            [n] => Ok(CoefficientKey::Linear(n)),
            [n, m] if n != m => Ok(CoefficientKey::Pair(n.min(m), n.max(m))),
            _ => Err(Error::Config(format!("target atoms {:?}: give one atom or two distinct atoms", self.atoms))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProtocolConfig {
    /// Dicke success probabilities on a `|c|` grid for each size.
    DickeSweep {
        sizes: Vec<usize>,
        /// Defaults to every `M` from 0 to `N`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        excitations: Option<Vec<usize>>,
        #[serde(default)]
        c_min: f64,
        #[serde(default = "default_c_max")]
        c_max: f64,
        #[serde(default = "default_points")]
        points: usize,
    },
    /// Kerr projection onto a GHZ state, symbolic path plus the two-level
    /// rotation; the dense Kerr evolution runs when `oracle_cutoff` is set.
    Ghz {
        couplings: Vec<[f64; 2]>,
        kappa: f64,
        laser_amplitude: f64,
        omega_cavity: f64,
        condition: ConditionChoice,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        oracle_cutoff: Option<usize>,
    },
    TwoEnsemble {
        per_ensemble: usize,
        mu: [f64; 2],
        g: f64,
        t: f64,
    },
    ScheduleSolve {
        template: ScheduleTemplate,
        targets: Vec<TargetEntry>,
    },
    /// Oracle comparisons and printed-formula discrepancies.
    Validate {
        #[serde(default = "default_gaussian_instances")]
        gaussian_instances: usize,
        /// Include the dense Kerr and weak-excitation propagations.
        #[serde(default = "default_true")]
        dynamics: bool,
    },
    /// Canonic form of a photon-free state given in polynomial text form
    /// (`re im photons atoms…` per line).
    Canonicalize {
        num_atoms: usize,
        state: String,
        #[serde(default = "default_restarts")]
        restarts: usize,
        #[serde(default = "default_sweeps")]
        max_sweeps: usize,
    },
}

fn default_c_max() -> f64 {
    2.0
}

fn default_points() -> usize {
    201
}

fn default_gaussian_instances() -> usize {
    50
}

/// Protocol names as used on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProtocolKind {
    DickeSweep,
    Ghz,
    TwoEnsemble,
    ScheduleSolve,
    Validate,
    Canonicalize,
}

impl ProtocolConfig {
    pub fn kind(&self) -> ProtocolKind {
        match self {
            ProtocolConfig::DickeSweep { .. } => ProtocolKind::DickeSweep,
            ProtocolConfig::Ghz { .. } => ProtocolKind::Ghz,
            ProtocolConfig::TwoEnsemble { .. } => ProtocolKind::TwoEnsemble,
            ProtocolConfig::ScheduleSolve { .. } => ProtocolKind::ScheduleSolve,
            ProtocolConfig::Validate { .. } => ProtocolKind::Validate,
            ProtocolConfig::Canonicalize { .. } => ProtocolKind::Canonicalize,
        }
    }

    /// A small working example of each protocol.
    pub fn example(kind: ProtocolKind) -> Self {
        match kind {
            ProtocolKind::DickeSweep => ProtocolConfig::DickeSweep {
                sizes: vec![10],
                excitations: Some(vec![1, 2, 3]),
                c_min: 0.0,
                c_max: 2.0,
                points: 201,
            },
            ProtocolKind::Ghz => ProtocolConfig::Ghz {
                couplings: vec![[0.3, 0.0]; 3],
                kappa: 1.0,
                laser_amplitude: 0.02f64.cbrt(),
                omega_cavity: 1.0,
                condition: ConditionChoice::Exact,
                oracle_cutoff: Some(11),
            },
            ProtocolKind::TwoEnsemble => ProtocolConfig::TwoEnsemble { per_ensemble: 2, mu: [0.3, 0.0], g: 1.0, t: 0.02 },
            ProtocolKind::ScheduleSolve => ProtocolConfig::ScheduleSolve {
                template: ScheduleTemplate::pairwise(3, 1.0, vec![-0.8, -1.0, -1.2], 4.0),
                targets: vec![
                    TargetEntry { atoms: vec![0], value: [0.0, 0.0] },
                    TargetEntry { atoms: vec![0, 1], value: [0.0, 0.0] },
                ],
            },
            ProtocolKind::Validate => ProtocolConfig::Validate { gaussian_instances: 50, dynamics: true },
            ProtocolKind::Canonicalize => ProtocolConfig::Canonicalize {
                num_atoms: 3,
                state: "1 0 0\n1 0 0 0 1 2\n".into(),
                restarts: default_restarts(),
                max_sweeps: default_sweeps(),
            },
        }
    }
}

impl ScenarioConfig {
    /// Configuration running `protocol` alone, with default settings.
    pub fn for_protocol(protocol: ProtocolConfig) -> Self {
        Self {
            version: SCHEMA_VERSION,
            seed: DEFAULT_SEED,
            output: OutputConfig::default(),
            validation: ValidationToggles::default(),
            schedule: None,
            coefficients: None,
            pipeline: vec![],
            protocol: Some(protocol),
        }
    }

    /// Parses and validates. Schema errors carry the line and field.
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.version)));
        }
        if self.schedule.is_some() && self.coefficients.is_some() {
            return Err(Error::Config("give either [schedule] or [coefficients], not both".into()));
        }
        if let Some(s) = &self.schedule {
            s.validate()?;
        }
        if self.pipeline.is_empty() && self.protocol.is_none() {
            return Err(Error::Config("pipeline has no terminal measurement".into()));
        }
        if !self.pipeline.is_empty() {
            let terminals: Vec<usize> =
                self.pipeline.iter().enumerate().filter(|(_, s)| s.is_terminal()).map(|(i, _)| i).collect();
            match terminals[..] {
                [] => return Err(Error::Config("pipeline has no terminal measurement".into())),
                [0] => {}
                [i] => {
                    return Err(Error::Config(format!(
                        "pipeline stage {i}: the measurement must be the first stage; only post-processing may follow"
                    )))
                }
                _ => {
                    return Err(Error::Config(format!(
                        "pipeline has {} terminal measurements (stages {terminals:?}); exactly one is allowed",
                        terminals.len()
                    )))
                }
            }
            if self.schedule.is_none() && self.coefficients.is_none() {
                return Err(Error::Config("pipeline needs a [schedule] or [coefficients] source".into()));
            }
        }
        if !(self.validation.tolerance > 0.0) {
            return Err(Error::Config("validation.tolerance must be positive".into()));
        }
        Ok(())
    }

    fn coefficients(&self) -> Result<Option<CouplingCoefficients>> {
        if let Some(s) = &self.schedule {
            return integrate_coefficients(s).map(Some);
        }
        self.coefficients.as_ref().map(|c| c.to_coefficients()).transpose()
    }
}

/// One row of the check table: `value ≤ tolerance` is the pass rule.
/// Rows without a tolerance are reported, not asserted.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: Option<f64>,
}

impl Check {
    pub fn asserted(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance: Some(tolerance) }
    }

    pub fn reported(name: impl Into<String>, value: f64) -> Self {
        Self { name: name.into(), value, tolerance: None }
    }

    pub fn passed(&self) -> Option<bool> {
        self.tolerance.map(|t| self.value <= t)
    }
}

pub fn checks_csv(checks: &[Check]) -> String {
    let mut out = String::from("check,value,tolerance,pass\n");
    for c in checks {
        let tol = c.tolerance.map(fmt_f64).unwrap_or_default();
        let pass = match c.passed() {
            Some(true) => "pass",
            Some(false) => "fail",
            None => "report",
        };
        writeln!(out, "{},{},{tol},{pass}", c.name, fmt_f64(c.value)).unwrap();
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

#[derive(Clone, Debug, Default)]
pub struct ProtocolReport {
    pub files: Vec<OutputFile>,
    pub checks: Vec<Check>,
    /// Human-readable lines for the terminal.
    pub summary: Vec<String>,
}

impl ProtocolReport {
    fn file(&mut self, name: &str, contents: String) {
        self.files.push(OutputFile { name: name.to_string(), contents });
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.passed() == Some(false)).collect()
    }

    pub fn get(&self, name: &str) -> Option<&OutputFile> {
        self.files.iter().find(|f| f.name == name)
    }

    /// Writes every output under `dir`, creating it if needed. Returns the
    /// written paths in order.
    pub fn write_to(&self, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut paths = vec![];
        for f in &self.files {
            let p = dir.join(format!("{prefix}{}", f.name));
            std::fs::write(&p, &f.contents)?;
            paths.push(p);
        }
        Ok(paths)
    }
}

fn key_value_csv(rows: &[(String, f64)]) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in rows {
        writeln!(out, "{k},{}", fmt_f64(*v)).unwrap();
    }
    out
}

/// Runs the pipeline (if any), then the protocol (if any). Writing files
/// is left to [`ProtocolReport::write_to`].
pub fn run_scenario(config: &ScenarioConfig) -> Result<ProtocolReport> {
    config.validate()?;
    let mut report = ProtocolReport::default();
    if let Some(c) = config.coefficients()? {
        let s = build_joint_state(&c)?;
        report.file("coefficients.csv", c.to_csv());
        report.file("joint_state.json", s.summary_json() + "\n");
        if !config.pipeline.is_empty() {
            run_pipeline(config, &s, &mut report)?;
        }
    }
    if let Some(p) = &config.protocol {
        run_protocol(p, config.seed, &mut report)?;
    }
    if !report.checks.is_empty() && !report.files.iter().any(|f| f.name == "validation.csv") {
        let csv = checks_csv(&report.checks);
        report.file("checks.csv", csv);
    }
    Ok(report)
}

fn run_pipeline(config: &ScenarioConfig, s: &JointState, report: &mut ProtocolReport) -> Result<()> {
    let n = s.num_atoms();
    let tol = config.validation.tolerance;
    let (out, oracle_row): (PostSelectedState, Option<Vec<C64>>) = match &config.pipeline[0] {
        Stage::Measure { photons } => {
            let row = (0..=*photons).map(|k| if k == *photons { C64::new(1.0, 0.0) } else { C64::default() }).collect();
            (measure_photon_number(s, *photons)?, Some(row))
        }
        Stage::Displace { lambda } => {
            let op = FieldOp::Displace(cplx(*lambda));
            (displace_then_vacuum(s, cplx(*lambda))?, Some(oracle::vacuum_row(&op, n)?.amplitudes))
        }
        Stage::Squeeze { g, t } => {
            let p = SqueezeParams::new(*g, *t)?;
            let op = FieldOp::Squeeze { g: *g, t: *t };
            (squeeze_then_vacuum(s, p)?, Some(oracle::vacuum_row(&op, n)?.amplitudes))
        }
        Stage::Kerr { kappa, laser_amplitude, omega_cavity, photon_gap, b, c } => {
            let k = KerrParams::resonant(*kappa, *laser_amplitude, *omega_cavity, *photon_gap)?;
            let out = kerr_project(s, &k, cplx(*b), cplx(*c))?;
            let len = (cplx(*b).norm_sqr() + cplx(*c).norm_sqr()).sqrt();
            let row = (0..=*photon_gap)
                .map(|d| {
                    if d == 0 {
                        cplx(*b).conj() / len
                    } else if d == *photon_gap {
                        cplx(*c).conj() / len
                    } else {
                        C64::default()
                    }
                })
                .collect();
            (out, Some(row))
        }
        Stage::Canonicalize { .. } => unreachable!("validated: the first stage is terminal"),
    };

    let mut rows = vec![("success_probability".to_string(), out.success_probability)];
    rows.extend(out.diagnostics.iter().map(|(k, v)| (k.to_string(), *v)));
    report.summary.push(format!("success probability {}", fmt_f64(out.success_probability)));

    if config.validation.oracle {
        if let Some(row) = oracle_row {
            let dense = oracle::exponential_state(&s.coefficients, n + 1)?;
            let projected = oracle::project_onto_row(&dense, &row);
            let p_oracle = projected.iter().map(|c| c.norm_sqr()).sum::<f64>() / dense.norm().powi(2);
            let fid = oracle::overlap(&projected, &out.amplitudes()?);
            report.checks.push(Check::asserted("pipeline/state_infidelity", 1.0 - fid, tol));
            // displacement and squeezing probabilities already come from the
            // exact operators; the row above is the same, so this compares the
            // two projections of the joint state
            report.checks.push(Check::asserted(
                "pipeline/probability_delta",
                (p_oracle - out.success_probability).abs(),
                tol,
            ));
        }
    }

    report.file("post_selected.txt", out.polynomial.to_text());
    if let Ok(f) = out.nilpotential() {
        report.file("nilpotential.txt", f.to_text());
    }
    for stage in &config.pipeline[1..] {
        if let Stage::Canonicalize { restarts, max_sweeps } = stage {
            let settings = CanonicalizeSettings {
                restarts: *restarts,
                max_sweeps: *max_sweeps,
                seed: config.seed,
                ..CanonicalizeSettings::default()
            };
            let form = canonicalize(&out.polynomial, &settings)?;
            rows.push(("canonical_vacuum_probability".into(), form.vacuum_probability));
            rows.push(("canonical_converged".into(), f64::from(u8::from(form.converged))));
            report.file("tanglemeter.txt", form.tanglemeter.to_text());
        }
    }
    report.file("pipeline.csv", key_value_csv(&rows));
    Ok(())
}

fn run_protocol(p: &ProtocolConfig, seed: u64, report: &mut ProtocolReport) -> Result<()> {
    match p {
        ProtocolConfig::DickeSweep { sizes, excitations, c_min, c_max, points } => {
            if sizes.is_empty() {
                return Err(Error::Config("dicke-sweep needs at least one size".into()));
            }
            let grid = linear_grid(*c_min, *c_max, *points);
            let mut shapes = String::from("N,M,formula,argmax_c,max,interior_maxima,unique_interior_maximum\n");
            for &n in sizes {
                let ms: Vec<usize> = excitations.clone().unwrap_or_else(|| (0..=n).collect());
                let sweep = dicke_sweep(n, &ms, &grid)?;
                report.file(&format!("dicke_sweep_N{n}.csv"), sweep.to_csv());
                for (label, list) in [("exact", &sweep.exact_shapes), ("printed", &sweep.printed_shapes)] {
                    for s in list {
                        writeln!(
                            shapes,
                            "{n},{},{label},{},{},{},{}",
                            s.m,
                            fmt_f64(s.argmax_c),
                            fmt_f64(s.max),
                            s.interior_maxima,
                            s.has_unique_interior_maximum(&grid)
                        )
                        .unwrap();
                    }
                }
                report.summary.push(format!("N = {n}: {} rows", sweep.rows.len()));
            }
            report.file("dicke_shapes.csv", shapes);
        }
        ProtocolConfig::Ghz { couplings, kappa, laser_amplitude, omega_cavity, condition, oracle_cutoff } => {
            let cs: Vec<C64> = couplings.iter().map(|&z| cplx(z)).collect();
            let k = KerrParams::resonant(*kappa, *laser_amplitude, *omega_cavity, cs.len() as u32)?;
            let r = ghz_protocol(&cs, &k, (*condition).into())?;
            let mut rows = vec![
                ("num_atoms".to_string(), r.num_atoms as f64),
                ("ratio_abs".into(), r.ratio.norm()),
                ("symbolic_fidelity".into(), r.symbolic_fidelity),
                ("symbolic_probability".into(), r.symbolic_probability),
                ("other_condition_fidelity".into(), r.alternative_fidelity),
                ("v0n".into(), r.dynamic.v0n),
                ("v0n_printed".into(), r.dynamic.v0n_printed.unwrap_or(f64::NAN)),
                ("t_kerr".into(), r.dynamic.t_kerr),
                ("two_level_fidelity".into(), r.dynamic.fidelity),
                ("two_level_probability".into(), r.dynamic.success_probability),
            ];
            if let Some(cutoff) = oracle_cutoff {
                let run = ghz_oracle_dynamic(&cs, &k, (*condition).into(), *cutoff)?;
                rows.extend([
                    ("oracle_fidelity".to_string(), run.fidelity),
                    ("oracle_probability".into(), run.success_probability),
                    ("oracle_detuning".into(), run.calibration.detuning),
                    ("oracle_rabi_frequency".into(), run.calibration.rabi_frequency),
                    ("rabi_over_v0n".into(), run.rabi_ratio),
                    ("rabi_over_v0n_printed".into(), run.rabi_ratio_printed.unwrap_or(f64::NAN)),
                    ("max_intermediate_population".into(), run.calibration.max_intermediate_population),
                ]);
            }
            report.summary.push(format!("GHZ fidelity (symbolic) {}", fmt_f64(r.symbolic_fidelity)));
            report.file("ghz.csv", key_value_csv(&rows));
        }
        ProtocolConfig::TwoEnsemble { per_ensemble, mu, g, t } => {
            let r = two_ensemble_protocol(*per_ensemble, cplx(*mu), SqueezeParams::new(*g, *t)?)?;
            let rows = vec![
                ("per_ensemble".to_string(), r.per_ensemble as f64),
                ("zeta".into(), r.squeeze.zeta()),
                ("zeta_exact".into(), r.squeeze.zeta_exact()),
                ("beta_11_re".into(), r.beta_11.re),
                ("beta_11_im".into(), r.beta_11.im),
                ("beta_11_expected_re".into(), r.beta_11_expected.re),
                ("beta_11_expected_im".into(), r.beta_11_expected.im),
                ("separable".into(), f64::from(u8::from(r.separable))),
                ("success_probability".into(), r.success_probability),
                ("oracle_fidelity".into(), r.oracle_fidelity),
            ];
            let mut beta = String::from("k,l,re,im\n");
            for ((k, l), c) in &r.beta {
                writeln!(beta, "{k},{l},{},{}", fmt_f64(c.re), fmt_f64(c.im)).unwrap();
            }
            report.summary.push(format!("A|B {}", if r.separable { "separable" } else { "entangled" }));
            report.file("two_ensemble.csv", key_value_csv(&rows));
            report.file("two_ensemble_beta.csv", beta);
        }
        ProtocolConfig::ScheduleSolve { template, targets } => {
            let t = targets.iter().map(|e| Ok((e.key()?, cplx(e.value)))).collect::<Result<Vec<_>>>()?;
            let sol = solve_schedule(template, &t)?;
            let achieved = integrate_coefficients(&sol.schedule)?;
            let mut rows = vec![
                ("residual_norm".to_string(), sol.residual_norm),
                ("relative_residual".into(), sol.relative_residual),
                ("condition".into(), sol.condition),
            ];
            for (i, x) in sol.amplitudes.iter().enumerate() {
                rows.push((format!("amplitude_{i}"), *x));
            }
            report.summary.push(format!("relative residual {}", fmt_f64(sol.relative_residual)));
            report.file("schedule_solve.csv", key_value_csv(&rows));
            report.file("schedule.toml", sol.schedule.to_toml());
            report.file("solved_coefficients.csv", achieved.to_csv());
        }
        ProtocolConfig::Validate { gaussian_instances, dynamics } => {
            let checks = validation_checks(seed, *gaussian_instances, *dynamics, report)?;
            let failed = checks.iter().filter(|c| c.passed() == Some(false)).count();
            report.summary.push(format!("{} checks, {failed} failed", checks.len()));
            report.file("validation.csv", checks_csv(&checks));
            report.checks.extend(checks);
        }
        ProtocolConfig::Canonicalize { num_atoms, state, restarts, max_sweeps } => {
            let p = NilpotentPolynomial::from_text(*num_atoms, 0, state)?;
            let settings =
                CanonicalizeSettings { restarts: *restarts, max_sweeps: *max_sweeps, seed, ..CanonicalizeSettings::default() };
            let form = canonicalize(&p, &settings)?;
            let rows = vec![
                ("vacuum_probability".to_string(), form.vacuum_probability),
                ("converged".into(), f64::from(u8::from(form.converged))),
                ("sweeps".into(), form.sweeps as f64),
                ("residual".into(), form.residual),
            ];
            report.summary.push(format!("canonic vacuum probability {}", fmt_f64(form.vacuum_probability)));
            report.file("canonical.csv", key_value_csv(&rows));
            report.file("tanglemeter.txt", form.tanglemeter.to_text());
        }
    }
    Ok(())
}

fn random_c64(rng: &mut ChaCha8Rng, scale: f64) -> C64 {
    C64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))
}

/// Random coefficients with `|Iₙ| ≤ scale` and pair weights `≤ scale²`.
pub fn random_coefficients(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CouplingCoefficients {
    let linear = (0..n).map(|_| random_c64(rng, scale)).collect();
    let mut pair = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            pair[(i, j)] = random_c64(rng, scale * scale);
        }
    }
    CouplingCoefficients::new(linear, pair).expect("finite entries")
}

/// Symmetric resonant drive of `n` atoms for the weak-excitation curve.
pub fn weak_drive_schedule(n: usize, amplitude: f64) -> ControlSchedule {
    ControlSchedule {
        omega_cavity: 1.0,
        omega_atoms: vec![-1.0; n],
        segments: vec![Segment { duration: 5.0, laser_amplitude: amplitude, couplings: vec![1.0; n] }],
    }
}

/// One point of the weak-excitation curve: mean excitation per atom of the
/// propagated state and its fidelity to the exponential joint state.
#[derive(Clone, Copy, Debug)]
pub struct WeakExcitationPoint {
    pub amplitude: f64,
    pub excitation: f64,
    pub fidelity: f64,
}

pub fn weak_excitation_point(n: usize, amplitude: f64, fock_cutoff: usize) -> Result<WeakExcitationPoint> {
    let s = weak_drive_schedule(n, amplitude);
    let settings = PropagationSettings { fock_cutoff, ..PropagationSettings::for_atoms(n) };
    let dense = oracle::propagate(&s, &settings)?.state;
    let joint = build_joint_state(&integrate_coefficients(&s)?.negated())?;
    let analytic = DenseState::from_polynomial(&joint.polynomial, fock_cutoff)?;
    let a = dense.dim_atoms();
    let norm2 = dense.norm().powi(2);
    let excitation = (0..dense.amplitudes.len())
        .map(|i| (i % a).count_ones() as f64 * dense.amplitudes[i].norm_sqr())
        .sum::<f64>()
        / (norm2 * n as f64);
    Ok(WeakExcitationPoint { amplitude, excitation, fidelity: dense.fidelity(&analytic)? })
}

pub const WEAK_DRIVE_AMPLITUDES: [f64; 8] = [0.002, 0.005, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06];

/// The full check table. Side files (Gaussian norm table, weak-excitation
/// curve) are added to `report`.
pub fn validation_checks(
    seed: u64,
    gaussian_instances: usize,
    dynamics: bool,
    report: &mut ProtocolReport,
) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = vec![];

    // exact norm against the dense Taylor expansion of the generator
    for n in 1..=5 {
        let c = random_coefficients(&mut rng, n, 0.4);
        let exact = build_joint_state(&c)?.exact_norm().powi(2);
        let dense = oracle::exponential_state(&c, n + 1)?.norm().powi(2);
        checks.push(Check::asserted(format!("joint_norm_vs_dense/N={n}"), (exact - dense).abs() / dense, 1e-12));
    }

    // Dicke probabilities: exact closed form against the dense expansion,
    // and the printed weights against the exact ones
    let (n_dicke, c_dicke) = (6, 0.7);
    let dense = oracle::exponential_state(&CouplingCoefficients::uniform(n_dicke, C64::new(c_dicke, 0.0)), n_dicke + 1)?;
    for m in 0..=n_dicke {
        let exact = dicke_success_probability(n_dicke, m, C64::new(c_dicke, 0.0), DickeFormula::Exact)?;
        let printed = dicke_success_probability(n_dicke, m, C64::new(c_dicke, 0.0), DickeFormula::Printed)?;
        checks.push(Check::asserted(
            format!("dicke_exact_vs_dense/N={n_dicke}/M={m}"),
            (exact - dense.photon_population(m)).abs(),
            1e-12,
        ));
        checks.push(Check::reported(format!("dicke_printed_over_exact/N={n_dicke}/M={m}"), printed / exact));
    }

    // pair placement on a detuned two-atom schedule
    let pair_schedule = ControlSchedule {
        omega_cavity: 1.0,
        omega_atoms: vec![-0.6, -1.4],
        segments: vec![
            Segment { duration: 2.5, laser_amplitude: 0.01, couplings: vec![1.0, 0.0] },
            Segment { duration: 2.0, laser_amplitude: 0.01, couplings: vec![0.0, 1.0] },
            Segment { duration: 1.5, laser_amplitude: 0.01, couplings: vec![1.0, 1.0] },
        ],
    };
    let (appendix_a, swapped) = oracle::pair_convention_check(&pair_schedule, 6)?.relative_errors();
    checks.push(Check::asserted("pair_placement/earlier_on_first_rel_error", appendix_a, 1e-2));
    checks.push(Check::reported("pair_placement/swapped_rel_error", swapped));

    // first-order amplitude of a single atom
    let single = weak_drive_schedule(1, 0.002);
    let st = oracle::propagate(&single, &PropagationSettings::for_atoms(1))?.state;
    let i1 = integrate_coefficients(&single)?.linear[0];
    let ratio = st.amplitudes[st.index(1, 1)] / st.amplitudes[0];
    checks.push(Check::asserted("first_order_amplitude/rel_error", (ratio + i1).norm() / i1.norm(), 1e-3));

    // squeezing: closed form (printed ζ) against the exact operator
    let sq_state = build_joint_state(&CouplingCoefficients::uniform(2, C64::new(0.3, 0.0)))?;
    for gt in [0.01, 0.02, 0.05, 0.1, 0.2, 0.5] {
        let p = SqueezeParams::new(1.0, gt)?;
        let out = squeeze_then_vacuum(&sq_state, p)?;
        let row = oracle::vacuum_row(&FieldOp::Squeeze { g: 1.0, t: gt }, 2)?;
        let exact = crate::control::project_field(&sq_state, |k| row.amplitudes[k as usize]);
        let infid = 1.0 - oracle::overlap(&exact.to_atomic_amplitudes()?, &out.amplitudes()?);
        let name = format!("squeeze_closed_form_infidelity/gt={gt}");
        checks.push(if gt <= 0.05 { Check::asserted(name, infid, 1e-6) } else { Check::reported(name, infid) });
        checks.push(Check::reported(format!("squeeze_zeta_printed_minus_exact/gt={gt}"), p.zeta() - p.zeta_exact()));
    }

    // displacement: closed-form probability against the exact operator
    let disp = displace_then_vacuum(&sq_state, C64::new(0.2, -0.1))?;
    let closed = disp.diagnostic("closed_form_probability").unwrap_or(f64::NAN);
    checks.push(Check::asserted("displacement_probability/closed_vs_oracle", (closed - disp.success_probability).abs(), 1e-10));

    // GHZ balance condition, printed and exact
    for n in [3usize, 4] {
        let cs: Vec<C64> = (0..n).map(|_| random_c64(&mut rng, 0.5) + C64::new(0.5, 0.0)).collect();
        let k = KerrParams::resonant(1.0, 0.1, 1.0, n as u32)?;
        let exact = ghz_protocol(&cs, &k, GhzCondition::Exact)?;
        checks.push(Check::asserted(format!("ghz_exact_condition_infidelity/N={n}"), 1.0 - exact.symbolic_fidelity, 1e-12));
        checks.push(Check::reported(format!("ghz_printed_condition_infidelity/N={n}"), 1.0 - exact.alternative_fidelity));
        if let Some(vp) = exact.dynamic.v0n_printed {
            checks.push(Check::reported(format!("kerr_v0n_printed_over_lowest_order/N={n}"), vp / exact.dynamic.v0n));
        }
    }

    // Gaussian normalization estimate: tabulated, no threshold
    let mut table = String::from("instance,N,gaussian,exact_norm_sqr,rel_delta,condition\n");
    for i in 0..gaussian_instances {
        let n = 1 + i % 3;
        let c = random_coefficients(&mut rng, n, 0.2);
        let exact = build_joint_state(&c)?.exact_norm().powi(2);
        match gaussian_norm(&c) {
            Ok(g) => {
                let rel = (g.value - exact) / exact;
                writeln!(table, "{i},{n},{},{},{},{}", fmt_f64(g.value), fmt_f64(exact), fmt_f64(rel), fmt_f64(g.condition))
                    .unwrap();
                checks.push(Check::reported(format!("gaussian_norm_rel_delta/instance={i}/N={n}"), rel));
            }
            Err(e) => {
                writeln!(table, "{i},{n},,{},,", fmt_f64(exact)).unwrap();
                checks.push(Check::reported(format!("gaussian_norm_failed/instance={i}/N={n}"), f64::NAN));
                report.summary.push(format!("gaussian_norm instance {i}: {e}"));
            }
        }
    }
    report.file("gaussian_norm.csv", table);

    if dynamics {
        // Kerr stage on the dense oracle
        for (n, drive) in [(3usize, 0.02f64), (4, 0.025)] {
            let k = KerrParams::resonant(1.0, drive.cbrt(), 1.0, n as u32)?;
            let cs = vec![C64::new(1.0, 0.0); n];
            let run = ghz_oracle_dynamic(&cs, &k, GhzCondition::Exact, n + 8)?;
            checks.push(Check::asserted(format!("kerr_ghz_infidelity/N={n}"), 1.0 - run.fidelity, 1e-2));
            checks.push(Check::asserted(format!("kerr_rabi_vs_lowest_order/N={n}"), (run.rabi_ratio - 1.0).abs(), 0.05));
            checks.push(Check::reported(
                format!("kerr_rabi_over_printed/N={n}"),
                run.rabi_ratio_printed.unwrap_or(f64::NAN),
            ));
            checks.push(Check::asserted(
                format!("kerr_intermediate_population/N={n}"),
                run.calibration.max_intermediate_population,
                1e-3,
            ));
        }

        // weak-excitation curve
        let points = WEAK_DRIVE_AMPLITUDES
            .par_iter()
            .map(|&a| weak_excitation_point(4, a, 12))
            .collect::<Result<Vec<_>>>()?;
        let mut curve = String::from("amplitude,excitation_per_atom,fidelity\n");
        for p in &points {
            writeln!(curve, "{},{},{}", fmt_f64(p.amplitude), fmt_f64(p.excitation), fmt_f64(p.fidelity)).unwrap();
            let name = format!("weak_excitation_infidelity/amplitude={}", p.amplitude);
            checks.push(if p.excitation <= 0.05 {
                Check::asserted(name, 1.0 - p.fidelity, 1e-2)
            } else {
                Check::reported(name, 1.0 - p.fidelity)
            });
        }
        let reversals = points.windows(2).filter(|w| w[1].fidelity > w[0].fidelity).count();
        checks.push(Check::asserted("weak_excitation/monotonicity_violations", reversals as f64, 0.0));
        report.file("weak_excitation.csv", curve);
    }
    Ok(checks)
}

/// Protocol failures that stem from the request itself rather than from
/// the configuration schema.
pub fn is_infeasible(e: &Error) -> bool {
    !matches!(e, Error::Config(_) | Error::Io(_))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_pipeline_is_rejected() {
        let text = "version = 1\n[coefficients]\nlinear = [[0.1, 0.0]]\n";
        let e = ScenarioConfig::from_toml(text).unwrap_err();
        assert_eq!(e, Error::Config("pipeline has no terminal measurement".into()));
    }

    #[test]
    fn unknown_keys_name_the_field() {
        let text = "version = 1\n[protocol]\nname = \"two-ensemble\"\nper_ensemble = 2\nmu = [0.3, 0.0]\ng = 1.0\ntt = 0.1\n";
        let msg = ScenarioConfig::from_toml(text).unwrap_err().to_string();
        assert!(msg.contains("tt") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn two_terminal_stages_are_rejected() {
        let text = "version = 1\n[coefficients]\nlinear = [[0.1, 0.0]]\n\
                    [[pipeline]]\nkind = \"measure\"\nphotons = 1\n[[pipeline]]\nkind = \"measure\"\nphotons = 0\n";
        assert!(matches!(ScenarioConfig::from_toml(text), Err(Error::Config(_))));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let text = "version = 2\n[protocol]\nname = \"validate\"\n";
        assert!(ScenarioConfig::from_toml(text).unwrap_err().to_string().contains("version"));
    }

    #[test]
    fn examples_round_trip_through_toml() {
        for kind in [
            ProtocolKind::DickeSweep,
            ProtocolKind::Ghz,
            ProtocolKind::TwoEnsemble,
            ProtocolKind::ScheduleSolve,
            ProtocolKind::Validate,
            ProtocolKind::Canonicalize,
        ] {
            let c = ScenarioConfig::for_protocol(ProtocolConfig::example(kind));
            let back = ScenarioConfig::from_toml(&c.to_toml()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn measurement_pipeline_passes_its_oracle_check() {
        let text = "version = 1\n[coefficients]\nlinear = [[0.2, 0.1], [0.3, 0.0], [-0.1, 0.2]]\n\
                    pairs = [{ atoms = [0, 2], value = [0.01, 0.0] }]\n\
                    [[pipeline]]\nkind = \"measure\"\nphotons = 1\n\
                    [[pipeline]]\nkind = \"canonicalize\"\n";
        let c = ScenarioConfig::from_toml(text).unwrap();
        let r = run_scenario(&c).unwrap();
        assert!(r.failed_checks().is_empty(), "{:?}", r.checks);
        assert!(r.get("pipeline.csv").unwrap().contents.starts_with("key,value\nsuccess_probability,"));
        assert!(r.get("tanglemeter.txt").is_some());
    }

    #[test]
    fn kerr_gap_mismatch_is_infeasible() {
        let text = "version = 1\n[coefficients]\nlinear = [[0.2, 0.0], [0.2, 0.0]]\n\
                    [[pipeline]]\nkind = \"kerr\"\nkappa = 1.0\nlaser_amplitude = 0.1\nomega_cavity = 1.0\n\
                    photon_gap = 3\nb = [1.0, 0.0]\nc = [1.0, 0.0]\n";
        let e = run_scenario(&ScenarioConfig::from_toml(text).unwrap()).unwrap_err();
        assert!(is_infeasible(&e), "{e}");
    }

    #[test]
    fn dicke_sweep_row_count() {
        let c = ScenarioConfig::for_protocol(ProtocolConfig::DickeSweep {
            sizes: vec![10],
            excitations: None,
            c_min: 0.0,
            c_max: 2.0,
            points: 21,
        });
        let r = run_scenario(&c).unwrap();
        let csv = &r.get("dicke_sweep_N10.csv").unwrap().contents;
        assert_eq!(csv.lines().count(), 1 + 11 * 21);
    }
}
