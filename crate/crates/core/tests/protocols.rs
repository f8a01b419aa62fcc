use cavent::control::{KerrParams, SqueezeParams};
use cavent::protocols::{
    dicke_success_probability, dicke_success_probability_expanded, ghz_oracle_dynamic, ghz_protocol,
    two_ensemble_protocol, DickeFormula, GhzCondition,
};
use cavent::Error;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn printed_coupling_has_a_pole_when_the_cavity_frequency_vanishes() {
    // resonance puts ω_L/κ = ω_c/κ + N, which hits the factor (N − ω_L/κ)
    let k = KerrParams::resonant(1.0, 0.3, 0.0, 3).unwrap();
    assert_eq!(k.printed_coupling().unwrap_err(), Error::ResonanceCollision { n: 3 });
    assert!(k.effective_coupling().is_finite());
    assert!(KerrParams::resonant(1.0, 0.3, 1.0, 3).unwrap().printed_coupling().is_ok());
}

#[test]
fn off_resonant_laser_is_rejected() {
    assert!(matches!(KerrParams::new(1.0, 0.3, 1.0, 3.0, 3), Err(Error::InvalidParameter(_))));
    assert!(matches!(KerrParams::resonant(1.0, 0.3, 1.0, 1), Err(Error::InvalidParameter(_))));
}

#[test]
fn exact_balance_gives_ghz_for_random_couplings() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for n in 2..=6u32 {
        let k = KerrParams::with_coupling(1.0, 0.01, 1.0, n).unwrap();
        let couplings: Vec<C64> =
            (0..n).map(|_| C64::from_polar(rng.gen_range(0.2..0.8), rng.gen_range(0.0..std::f64::consts::TAU))).collect();
        let r = ghz_protocol(&couplings, &k, GhzCondition::Exact).unwrap();
        assert!((r.symbolic_fidelity - 1.0).abs() < 1e-12, "N = {n}");
        assert!((r.dynamic.fidelity - 1.0).abs() < 1e-10, "N = {n}");
        // the printed balance is off by N! in the amplitude ratio
        assert!(r.alternative_fidelity < 0.96, "N = {n}: {}", r.alternative_fidelity);
    }
}

#[test]
fn dense_kerr_evolution_reaches_ghz() {
    let k = KerrParams::resonant(1.0, 0.02f64.cbrt(), 1.0, 3).unwrap();
    let run = ghz_oracle_dynamic(&[C64::new(0.3, 0.0); 3], &k, GhzCondition::Exact, 11).unwrap();
    assert!(run.fidelity > 0.99, "{}", run.fidelity);
    assert!((run.rabi_ratio - 1.0).abs() < 0.05, "{}", run.rabi_ratio);
}

#[test]
fn dicke_probabilities_agree_with_the_expansion() {
    for n in 1..=7 {
        let total: f64 = (0..=n).map(|m| dicke_success_probability(n, m, C64::new(0.6, 0.2), DickeFormula::Exact).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-14);
        for m in 0..=n {
            let e = dicke_success_probability(n, m, C64::new(0.6, 0.2), DickeFormula::Exact).unwrap();
            let x = dicke_success_probability_expanded(n, m, C64::new(0.6, 0.2)).unwrap();
            assert!((e - x).abs() < 1e-13);
        }
    }
    assert!(dicke_success_probability(3, 4, C64::new(0.5, 0.0), DickeFormula::Exact).is_err());
}

#[test]
fn squeezing_entangles_the_two_ensembles() {
    for per in 1..=3 {
        let mu = C64::new(0.25, -0.1);
        let r = two_ensemble_protocol(per, mu, SqueezeParams::new(0.5, 0.04).unwrap()).unwrap();
        assert!(!r.separable);
        assert!((r.beta_11 - r.beta_11_expected).norm() < 1e-12);
        assert!(r.oracle_fidelity > 1.0 - 1e-6);
        assert!(r.success_probability > 0.0 && r.success_probability <= 1.0);
    }
}
