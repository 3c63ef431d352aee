//! Sine and cosine integrals.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_MAX: f64 = 2.0;
const MAX_TERMS: usize = 10_000;

/// `(Si(x), Ci(x))` for `x > 0`: power series up to 2, continued fraction
/// for `E₁(ix)` beyond.
pub(crate) fn sici(x: f64) -> (f64, f64) {
    debug_assert!(x > 0.0);
    if x <= SERIES_MAX {
        let x2 = x * x;
        let (mut si, mut ci) = (x, 0.0);
        // term_k = (−1)^k x^{2k}/(2k)! built up one factor at a time
        let mut term = 1.0;
        for k in 1..60 {
            let kf = k as f64;
            term *= -x2 / ((2.0 * kf - 1.0) * (2.0 * kf));
            ci += term / (2.0 * kf);
            let odd = term * x / (2.0 * kf + 1.0);
            si += odd / (2.0 * kf + 1.0);
            if term.abs() < 1e-18 * ci.abs().max(1e-300) && odd.abs() < 1e-18 * si {
                break;
            }
        }
        return (si, ci + EULER_GAMMA + x.ln());
    }
    // Modified Lentz for E₁(ix) = e^{−ix}·1/(1+ix − 1/(3+ix − 4/(5+ix − …)))
    let tiny = 1e-300;
    let mut b = Complex64::new(1.0, x);
    let mut c = Complex64::new(1.0 / tiny, 0.0);
    let mut d = b.inv();
    let mut h = d;
    for i in 2..MAX_TERMS {
        let a = -(((i - 1) * (i - 1)) as f64);
        b += 2.0;
        d = (d * a + b).inv();
        c = b + c.inv() * a;
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            break;
        }
    }
    h *= Complex64::new(x.cos(), -x.sin());
    (FRAC_PI_2 + h.im, -h.re)
}
