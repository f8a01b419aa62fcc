//! Acceptance criteria 1–10, one `criterion k: PASS|FAIL` line each,
//! followed by indented details. Runs without the libtest harness so the
//! lines always reach the output; the process fails if any criterion does.
//!
//! A criterion stated in terms of a printed formula is evaluated with that
//! formula. When it fails, the details show the same check with the
//! corrected formula next to it.

use std::path::PathBuf;
use std::process::ExitCode;

use cavent::control::{kerr_dynamics_params, KerrParams, SqueezeParams};
use cavent::coupling::CouplingCoefficients;
use cavent::nilpotent::{Bipartition, Monomial, NilpotentPolynomial, PhotonOverflow};
use cavent::oracle::{self, calibrate_kerr, DenseState, FieldOp};
use cavent::protocols::{
    dicke_state, dicke_success_probability, dicke_sweep, fidelity_of, fidelity_to, ghz_oracle_dynamic, ghz_protocol,
    ghz_ratio, linear_grid, two_ensemble_protocol, DickeFormula, GhzCondition, TargetState,
};
use cavent::scenario::{
    random_coefficients, run_scenario, weak_excitation_point, ProtocolConfig, ProtocolKind, ScenarioConfig,
    WEAK_DRIVE_AMPLITUDES,
};
use cavent::state::{build_joint_state, gaussian_norm};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, summary: impl Into<String>, details: Vec<String>) -> Self {
        Self { pass, summary: summary.into(), details }
    }
}

fn out_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).expect("output directory");
    dir
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn random_phase_c64(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> C64 {
    C64::from_polar(rng.gen_range(lo..hi), rng.gen_range(0.0..std::f64::consts::TAU))
}

fn dicke_correctness() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 1..=8 {
        for m in 0..=n {
            for k in [c(0.3), C64::new(0.5, -0.4), c(1.3)] {
                let s = dicke_state(n, m, k).expect("outcome possible");
                worst = worst.max(1.0 - fidelity_to(&s, &TargetState::Dicke(m)).unwrap());
            }
        }
    }
    Outcome::new(worst <= 1e-12, format!("max 1 − F = {worst:.2e} over N ≤ 8, all M, 3 couplings"), vec![])
}

fn dicke_probabilities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_dense: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for _ in 0..20 {
        let k = random_phase_c64(&mut rng, 0.05, 2.0);
        for n in 1..=6 {
            let dense = oracle::exponential_state(&CouplingCoefficients::uniform(n, k), n + 1).unwrap();
            let mut total = 0.0;
            for m in 0..=n {
                let p = dicke_success_probability(n, m, k, DickeFormula::Exact).unwrap();
                worst_dense = worst_dense.max((p - dense.photon_population(m)).abs());
                total += p;
            }
            worst_sum = worst_sum.max((total - 1.0).abs());
        }
    }
    let mut details = vec!["printed-formula probability over exact, N = 6, |c| = 0.7:".to_string()];
    for m in 0..=6 {
        let exact = dicke_success_probability(6, m, c(0.7), DickeFormula::Exact).unwrap();
        let printed = dicke_success_probability(6, m, c(0.7), DickeFormula::Printed).unwrap();
        details.push(format!("  M = {m}: P_printed / P_exact = {:.6}", printed / exact));
    }
    Outcome::new(
        worst_dense <= 1e-12 && worst_sum <= 1e-12,
        format!("max |P − P_dense| = {worst_dense:.2e}, max |Σ P − 1| = {worst_sum:.2e} (20 couplings, N ≤ 6)"),
        details,
    )
}

fn fig1_shapes() -> Outcome {
    let grid = linear_grid(0.0, 2.0, 401);
    let mut pass = true;
    let mut details = vec![];
    let dir = out_dir();
    for n in [10usize, 19] {
        let ms: Vec<usize> = (1..=n).collect();
        let sweep = dicke_sweep(n, &ms, &grid).unwrap();
        std::fs::write(dir.join(format!("dicke_sweep_N{n}.csv")), sweep.to_csv()).unwrap();
        let failing: Vec<usize> =
            sweep.exact_shapes.iter().filter(|s| !s.has_unique_interior_maximum(&grid)).map(|s| s.m).collect();
        if !failing.is_empty() {
            pass = false;
        }
        details.push(format!("N = {n}: M without a unique interior maximum: {failing:?}"));
        for s in sweep.exact_shapes.iter().filter(|s| failing.contains(&s.m)) {
            details.push(format!(
                "  M = {}: monotone increasing = {}, value at |c| = 2: {:.6}",
                s.m, s.monotone_increasing, s.max
            ));
        }
        let mirrors = sweep.mirror_maxima();
        let same: Vec<usize> =
            mirrors.iter().filter(|(m, a, b)| 2 * m != n && (a - b).abs() <= 1e-9 * a.max(*b)).map(|t| t.0).collect();
        if !same.is_empty() {
            pass = false;
        }
        details.push(format!("N = {n}: mirror pairs with equal maxima: {same:?}"));
        for (m, a, b) in mirrors.iter().filter(|t| t.0 <= 3) {
            details.push(format!("  max P(M = {m}) = {a:.6}, max P(M = {}) = {b:.6}", n - m));
        }
    }
    details.push("curves written to dicke_sweep_N10.csv and dicke_sweep_N19.csv".into());
    details.push(
        "P(N) = N!|c|^{2N} / Σᵢ N!/(N−i)! |c|^{2i} grows monotonically in |c|, so M = N has no interior maximum".into(),
    );
    Outcome::new(pass, "unique interior maximum for every M ≥ 1, distinct mirror maxima", details)
}

fn ghz_instances(condition: GhzCondition) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut best: f64 = 1.0;
    for i in 0..50 {
        let n = 2 + i % 7;
        let cs: Vec<C64> = (0..n).map(|_| random_phase_c64(&mut rng, 0.1, 1.0)).collect();
        let k = KerrParams::resonant(1.0, 0.1, 1.0, n as u32).unwrap();
        let r = ghz_protocol(&cs, &k, condition).unwrap();
        worst = worst.max(1.0 - r.symbolic_fidelity);
        best = best.min(1.0 - r.symbolic_fidelity);
    }
    (worst, best)
}

fn ghz_symbolic() -> Outcome {
    let (worst, best) = ghz_instances(GhzCondition::Printed);
    let (worst_exact, _) = ghz_instances(GhzCondition::Exact);
    Outcome::new(
        worst <= 1e-12,
        format!("printed balance B*√N! = C*ΠIₙ: 1 − F ranges over [{best:.3e}, {worst:.3e}] (50 instances, N = 2..8)"),
        vec![
            format!("corrected balance B* = C*√N!ΠIₙ: max 1 − F = {worst_exact:.2e} on the same instances"),
            "the two projected amplitudes are B* and C*√N!ΠIₙ because (ΣIₙσ⁺ₙ)ᴺ = N!ΠIₙσ⁺ₙ and ⟨N|(a†)ᴺ|0⟩ = √N!".into(),
            "the printed balance leaves them unequal by a factor N!, so the printed condition cannot give a GHZ state".into(),
        ],
    )
}

fn ghz_dynamic() -> Outcome {
    let mut pass = true;
    let mut details = vec![];
    for (n, drive) in [(3usize, 0.02f64), (4, 0.025)] {
        let cs = vec![c(1.0); n];
        let k = KerrParams::resonant(1.0, drive.cbrt(), 1.0, n as u32).unwrap();
        let cutoff = n + 8;
        let cal = calibrate_kerr(&k, cutoff).unwrap();
        let ratio_printed = ghz_ratio(&cs, GhzCondition::Printed).unwrap().norm();
        let timing = kerr_dynamics_params(&k, ratio_printed).unwrap();
        let (v_printed, t_printed) = match (timing.v0n_printed, timing.t_kerr_printed) {
            (Some(v), Some(t)) => (v, t),
            _ => {
                pass = false;
                details.push(format!("N = {n}: printed V₀ₙ has a pole at these parameters"));
                continue;
            }
        };
        // literal run: printed balance, printed V₀ₙ for the switching time
        let s = build_joint_state(&CouplingCoefficients::linear_only(cs.clone()).unwrap()).unwrap();
        let dense = DenseState::from_polynomial(&s.polynomial, cutoff).unwrap();
        let evolved = oracle::exact_field_op(&FieldOp::Kerr { params: k, detuning: cal.detuning, t: t_printed }, &dense)
            .unwrap();
        let vac = evolved.photon_component(0);
        let atomic = NilpotentPolynomial::from_atomic_amplitudes(n, &vac).unwrap();
        // best single-atom phase correction, so only the modulus structure counts
        let fid = (0..360)
            .map(|d| {
                let phase = C64::from_polar(1.0, (d as f64).to_radians());
                fidelity_of(&cavent::protocols::apply_phase(&atomic, 0, phase), &TargetState::Ghz).unwrap()
            })
            .fold(0.0, f64::max);
        let rabi_match = (cal.rabi_frequency / v_printed.abs() - 1.0).abs();
        let ok = fid >= 0.99 && rabi_match <= 0.05 && cal.max_intermediate_population <= 1e-3;
        pass &= ok;
        details.push(format!(
            "N = {n}, κ𝓔³ = {drive}: printed path F = {fid:.6}, Rabi/V₀ₙ(printed) = {:.4}, max intermediate population {:.2e}",
            cal.rabi_frequency / v_printed.abs(),
            cal.max_intermediate_population
        ));
        let corrected = ghz_oracle_dynamic(&cs, &k, GhzCondition::Exact, cutoff).unwrap();
        details.push(format!(
            "        corrected path F = {:.6}, Rabi/V₀ₙ(lowest order) = {:.6}, P = {:.4}",
            corrected.fidelity, corrected.rabi_ratio, corrected.success_probability
        ));
    }
    details.push("lowest-order coupling: V = (κ𝓔³)ᴺ√N! / Πₙ₌₁ᴺ⁻¹(E₀ − Eₙ) with Eₙ = κn(n − N) at resonance".into());
    details.push("the printed closed form lacks the κ scaling and runs its product to n = N, where it meets ω_L/κ".into());
    details.push("the printed form also depends on ω_c through ω_L/κ while the exact coupling does not; at ω_c = 1 it is 9× (N = 3) and 16× (N = 4) too small".into());
    Outcome::new(pass, "printed V₀ₙ and balance condition on the dense Kerr evolution", details)
}

fn two_ensembles() -> Outcome {
    let mut worst_beta: f64 = 0.0;
    let mut verdicts_ok = true;
    let mut worst_oracle: f64 = 0.0;
    let mut details = vec![];
    for per in [2usize, 3] {
        for mu in [c(0.3), C64::new(0.2, -0.25), c(0.0)] {
            for gt in [0.0, 0.01, 0.03, 0.05, -0.04] {
                let p = SqueezeParams::new(1.0_f64.copysign(gt), gt.abs()).unwrap();
                let r = two_ensemble_protocol(per, mu, p).unwrap();
                worst_beta = worst_beta.max((r.beta_11 - r.beta_11_expected).norm());
                let entangling = (mu * mu * p.zeta()).norm() != 0.0;
                verdicts_ok &= r.separable != entangling;
                worst_oracle = worst_oracle.max(1.0 - r.oracle_fidelity);
            }
        }
        details.push(format!("N_A = N_B = {per} done"));
    }
    Outcome::new(
        worst_beta <= 1e-10 && verdicts_ok && worst_oracle <= 1e-6,
        format!(
            "max |β₁₁ − 2ζμ²| = {worst_beta:.2e}, verdicts {}, max oracle 1 − F = {worst_oracle:.2e} (|gt| ≤ 0.05)",
            if verdicts_ok { "correct" } else { "WRONG" }
        ),
        details,
    )
}

fn weak_excitation() -> Outcome {
    let points: Vec<_> = WEAK_DRIVE_AMPLITUDES.iter().map(|&a| weak_excitation_point(4, a, 12).unwrap()).collect();
    let mut csv = String::from("amplitude,excitation_per_atom,fidelity\n");
    let mut details = vec![];
    let mut worst: f64 = 1.0;
    for p in &points {
        csv.push_str(&format!("{:e},{:e},{:e}\n", p.amplitude, p.excitation, p.fidelity));
        details.push(format!("amplitude {:.3}: excitation {:.4}, F = {:.9}", p.amplitude, p.excitation, p.fidelity));
        if p.excitation <= 0.05 {
            worst = worst.min(p.fidelity);
        }
    }
    std::fs::write(out_dir().join("weak_excitation.csv"), csv).unwrap();
    let monotone = points.windows(2).all(|w| w[1].fidelity <= w[0].fidelity && w[1].excitation > w[0].excitation);
    Outcome::new(
        worst >= 0.99 && monotone,
        format!("min F = {worst:.6} at excitation ≤ 0.05, monotone decay = {monotone}"),
        details,
    )
}

fn random_poly(rng: &mut ChaCha8Rng, n: usize) -> NilpotentPolynomial {
    // photon-free exponent with no constant term
    let mut f = NilpotentPolynomial::zero(n, 0);
    for mask in 1u64..(1 << n) {
        if rng.gen_bool(0.6) {
            f.add_term(Monomial::from_mask(mask, 0), random_phase_c64(rng, 0.01, 0.8)).unwrap();
        }
    }
    f
}

fn algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let f = random_poly(&mut rng, 1 + i % 6);
        let back = f.exp(PhotonOverflow::Error).unwrap().log(PhotonOverflow::Error).unwrap();
        worst = worst.max(back.max_abs_diff(&f));
    }
    let mut product_errors = 0;
    for i in 0..100 {
        let n = 2 + i % 5;
        let mut state = NilpotentPolynomial::one(n, 0);
        for a in 0..n {
            let factor = NilpotentPolynomial::constant(n, 0, random_phase_c64(&mut rng, 0.3, 1.0))
                .try_add(&NilpotentPolynomial::atom(n, 0, a, random_phase_c64(&mut rng, 0.0, 1.0)).unwrap())
                .unwrap();
            state = state.try_mul(&factor, PhotonOverflow::Error).unwrap();
        }
        let f = state.log(PhotonOverflow::Error).unwrap();
        product_errors += Bipartition::all(n).iter().filter(|cut| !f.is_separable(cut)).count();
    }
    let mut entangled_errors = 0;
    let mut cuts_checked = 0;
    for i in 0..100 {
        let n = 2 + i % 5;
        // α|0…0⟩ + β|y⟩ with at least two excited atoms in y
        let y = loop {
            let y = rng.gen_range(1u64..(1 << n));
            if y.count_ones() >= 2 {
                break y;
            }
        };
        let mut state = NilpotentPolynomial::constant(n, 0, random_phase_c64(&mut rng, 0.3, 1.0));
        state.add_term(Monomial::from_mask(y, 0), random_phase_c64(&mut rng, 0.3, 1.0)).unwrap();
        let f = state.log(PhotonOverflow::Error).unwrap();
        for cut in Bipartition::all(n) {
            let truth = y & cut.mask_a() == 0 || y & cut.mask_b() == 0;
            cuts_checked += 1;
            if f.is_separable(&cut) != truth {
                entangled_errors += 1;
            }
        }
    }
    Outcome::new(
        worst <= 1e-12 && product_errors == 0 && entangled_errors == 0,
        format!(
            "max |log(exp f) − f| = {worst:.2e} (200 instances), product-state misses {product_errors}, \
             two-term misclassified cuts {entangled_errors}/{cuts_checked}"
        ),
        vec![],
    )
}

fn gaussian_table() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = 0;
    let mut csv = String::from("instance,N,gaussian,exact_norm_sqr,rel_delta,condition\n");
    let mut details = vec!["instance  N  |detM⁻¹/detB|  ⟨Ψ|Ψ⟩  rel delta".to_string()];
    for i in 0..50 {
        let n = 1 + i % 3;
        let co = random_coefficients(&mut rng, n, 0.2);
        let exact = build_joint_state(&co).unwrap().exact_norm().powi(2);
        match gaussian_norm(&co) {
            Ok(g) if g.value.is_finite() => {
                let rel = (g.value - exact) / exact;
                csv.push_str(&format!("{i},{n},{:e},{:e},{:e},{:e}\n", g.value, exact, rel, g.condition));
                if i < 9 {
                    details.push(format!("{i:>8}  {n}  {:.12}  {exact:.6}  {rel:+.3e}", g.value));
                }
            }
            _ => failures += 1,
        }
    }
    details.push("(first 9 of 50 rows shown; full table in gaussian_norm.csv)".into());
    std::fs::write(out_dir().join("gaussian_norm.csv"), csv).unwrap();
    let degenerate = gaussian_norm(&CouplingCoefficients::uniform(2, c(0.0))).is_err();
    Outcome::new(
        failures == 0 && degenerate,
        format!("50 instances evaluated, {failures} numerical failures; all-zero input rejected = {degenerate}"),
        details,
    )
}

fn determinism() -> Outcome {
    let mut configs: Vec<ScenarioConfig> = [
        ProtocolKind::DickeSweep,
        ProtocolKind::Ghz,
        ProtocolKind::TwoEnsemble,
        ProtocolKind::ScheduleSolve,
        ProtocolKind::Canonicalize,
    ]
    .into_iter()
    .map(|k| ScenarioConfig::for_protocol(ProtocolConfig::example(k)))
    .collect();
    configs.push(ScenarioConfig::for_protocol(ProtocolConfig::Validate { gaussian_instances: 20, dynamics: false }));
    configs.push(
        ScenarioConfig::from_toml(
            "version = 1\nseed = 11\n[coefficients]\nlinear = [[0.2, 0.1], [0.3, 0.0], [-0.1, 0.2]]\n\
             [[pipeline]]\nkind = \"displace\"\nlambda = [0.1, -0.2]\n[[pipeline]]\nkind = \"canonicalize\"\n",
        )
        .unwrap(),
    );
    let mut differing = vec![];
    let mut files = 0;
    for config in &configs {
        let reparsed = ScenarioConfig::from_toml(&config.to_toml()).unwrap();
        let runs: Vec<_> = [1usize, 1, 4]
            .iter()
            .zip([config, config, &reparsed])
            .map(|(&threads, cfg)| {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
                pool.install(|| run_scenario(cfg).unwrap())
            })
            .collect();
        for f in &runs[0].files {
            files += 1;
            for other in &runs[1..] {
                if other.get(&f.name).map(|g| g.contents.as_bytes()) != Some(f.contents.as_bytes()) {
                    differing.push(f.name.clone());
                }
            }
        }
    }
    Outcome::new(
        differing.is_empty(),
        format!("{} scenarios, {files} files, three runs each (1 and 4 threads, re-parsed dump): {} differ", configs.len(), differing.len()),
        differing,
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 10] = [
        (1, dicke_correctness),
        (2, dicke_probabilities),
        (3, fig1_shapes),
        (4, ghz_symbolic),
        (5, ghz_dynamic),
        (6, two_ensembles),
        (7, weak_excitation),
        (8, algebra),
        (9, gaussian_table),
        (10, determinism),
    ];
    let mut failed = vec![];
    for (k, run) in criteria {
        let o = run();
        println!("criterion {k}: {} — {}", if o.pass { "PASS" } else { "FAIL" }, o.summary);
        for d in &o.details {
            println!("    {d}");
        }
        if !o.pass {
            failed.push(k);
        }
    }
    if failed.is_empty() {
        println!("all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("failing criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
