//! Closed-form exponential moments used by the segment integrals.
//!
//! `g_k(w) = ∫₀¹ sᵏ e^{ws} ds` and the nested moment
//! `h(a, b) = ∫₀¹ du e^{au} ∫₀ᵘ dv e^{bv}`, both evaluated without the
//! cancellation that the naive `(eʷ − 1)/w` forms suffer near zero.

use num_complex::Complex64 as C64;

const SERIES_RADIUS: f64 = 1.0;
const SERIES_TERMS: usize = 40;

/// `∫₀¹ sᵏ e^{ws} ds`
pub fn moment(k: usize, w: C64) -> C64 {
    if w.norm() <= SERIES_RADIUS {
        // Σ wʲ / (j! (j + k + 1))
        let mut term = C64::new(1.0, 0.0);
        let mut sum = C64::new(0.0, 0.0);
        for j in 0..SERIES_TERMS {
            sum += term / (j + k + 1) as f64;
            term *= w / (j + 1) as f64;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        sum
    } else {
        let ew = w.exp();
        let mut g = (ew - 1.0) / w;
        for i in 1..=k {
            g = (ew - g * i as f64) / w;
        }
        g
    }
}

/// `∫₀¹ du e^{au} ∫₀ᵘ dv e^{bv}`
pub fn nested_moment(a: C64, b: C64) -> C64 {
    let bn = b.norm();
    if bn <= SERIES_RADIUS && a.norm() <= SERIES_RADIUS {
        // inner integral Σ b^q u^{q+1} / (q+1)!
        let mut coef = C64::new(1.0, 0.0);
        let mut sum = C64::new(0.0, 0.0);
        for q in 0..SERIES_TERMS {
            coef /= (q + 1) as f64;
            let t = coef * moment(q + 1, a);
            sum += t;
            coef *= b;
            if coef.norm() < 1e-18 {
                break;
            }
        }
        sum
    } else if bn >= 1e-3 {
        (moment(0, a + b) - moment(0, a)) / b
    } else {
        // divided difference of g₀ expanded in b: Σ g_k(a) b^{k-1} / k!
        let mut sum = C64::new(0.0, 0.0);
        let mut bp = C64::new(1.0, 0.0);
        let mut fact = 1.0;
        for k in 1..=6 {
            fact *= k as f64;
            sum += moment(k, a) * bp / fact;
            bp *= b;
        }
        sum
    }
}
