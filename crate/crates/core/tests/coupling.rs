use cavent::coupling::{
    integrate_coefficients, solve_schedule, CoefficientKey, ControlSchedule, ScheduleTemplate, Segment,
};
use cavent::Error;
use num_complex::Complex64 as C64;

/// `n`-point Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

struct Quadrature {
    rule: Vec<(f64, f64)>,
    breaks: Vec<f64>,
}

impl Quadrature {
    fn new(s: &ControlSchedule) -> Self {
        let mut breaks = vec![0.0];
        for seg in &s.segments {
            breaks.push(breaks.last().unwrap() + seg.duration);
        }
        Self { rule: gauss_legendre(16), breaks }
    }

    /// ∫ₐᵇ f, split at segment boundaries and into pieces of length ≤ 0.25.
    fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> C64) -> C64 {
        let mut cuts = vec![a];
        cuts.extend(self.breaks.iter().copied().filter(|&t| t > a && t < b));
        cuts.push(b);
        let mut acc = C64::default();
        for w in cuts.windows(2) {
            let pieces = ((w[1] - w[0]) / 0.25).ceil().max(1.0) as usize;
            let h = (w[1] - w[0]) / pieces as f64;
            for p in 0..pieces {
                let (lo, hi) = (w[0] + p as f64 * h, w[0] + (p + 1) as f64 * h);
                for &(x, wt) in &self.rule {
                    acc += f(0.5 * (lo + hi) + 0.5 * (hi - lo) * x) * (0.5 * (hi - lo) * wt);
                }
            }
        }
        acc
    }
}

/// `𝓔(t) Cₙ(t)` of the piecewise-constant schedule.
fn drive(s: &ControlSchedule, atom: usize, t: f64) -> f64 {
    let mut start = 0.0;
    for seg in &s.segments {
        if t < start + seg.duration {
            return seg.laser_amplitude * seg.couplings[atom];
        }
        start += seg.duration;
    }
    0.0
}

fn test_schedule() -> ControlSchedule {
    ControlSchedule {
        omega_cavity: 1.3,
        omega_atoms: vec![-0.4, 0.7, -1.1],
        segments: vec![
            Segment { duration: 1.2, laser_amplitude: 0.3, couplings: vec![1.0, 0.0, 0.5] },
            Segment { duration: 0.7, laser_amplitude: -0.2, couplings: vec![0.8, 1.0, 0.0] },
            Segment { duration: 2.1, laser_amplitude: 0.5, couplings: vec![0.0, 0.6, 1.0] },
            Segment { duration: 0.9, laser_amplitude: 0.1, couplings: vec![1.0, 1.0, 1.0] },
        ],
    }
}

#[test]
fn closed_form_matches_quadrature() {
    let s = test_schedule();
    let q = Quadrature::new(&s);
    let total = s.total_time();
    let (w0, w) = (s.omega_cavity, &s.omega_atoms);
    let i = C64::new(0.0, 1.0);
    let c = integrate_coefficients(&s).unwrap();

    for a in 0..3 {
        let omega = w0 + w[a];
        let expect = i * q.integrate(0.0, total, |t| (i * omega * (t - total)).exp() * drive(&s, a, t));
        assert!((c.linear[a] - expect).norm() < 1e-10, "I_{a}: {} vs {expect}", c.linear[a]);
    }
    for a in 0..3 {
        for b in 0..3 {
            let expect = q.integrate(0.0, total, |tau| {
                let inner = q.integrate(0.0, tau, |th| drive(&s, a, th) * (i * th * (w[a] + w0)).exp());
                let outer = (-i * (tau * (w0 - w[b]) + total * (w[a] + w[b]))).exp();
                drive(&s, b, tau) * outer * inner
            });
            let got = c.pair[(a, b)];
            assert!((got - expect).norm() < 1e-10, "I_{a}{b}: {got} vs {expect}");
        }
    }
}

#[test]
fn solved_schedule_reproduces_reachable_targets() {
    let template = ScheduleTemplate::pairwise(3, 1.0, vec![-0.5, -1.5, 0.3], 2.0);
    let truth = integrate_coefficients(&template.schedule(&[0.12, -0.2, 0.07])).unwrap();
    let targets: Vec<_> = (0..3)
        .flat_map(|n| (n + 1..3).map(move |m| CoefficientKey::Pair(n, m)))
        .map(|k| (k, k.read(&truth)))
        .collect();
    let sol = solve_schedule(&template, &targets).unwrap();
    assert!(sol.relative_residual <= 1e-8, "{}", sol.relative_residual);
    let back = integrate_coefficients(&sol.schedule).unwrap();
    for (k, v) in &targets {
        assert!((k.read(&back) - v).norm() <= 1e-8 * v.norm().max(1e-12));
    }
}

#[test]
fn more_targets_than_windows_is_rank_deficient() {
    let template = ScheduleTemplate::pairwise(3, 1.0, vec![-0.5, -1.5, 0.3], 2.0);
    let targets: Vec<_> = CoefficientKey::all(3).into_iter().map(|k| (k, C64::new(0.01, 0.0))).collect();
    assert_eq!(solve_schedule(&template, &targets).unwrap_err(), Error::RankDeficient { unknowns: 3, targets: 6 });
}
