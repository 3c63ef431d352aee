//! Adaptive Simpson quadrature for complex-valued integrands on finite intervals.
//!
//! The interval is first cut into panels no wider than `panel_width`, and each
//! panel is subdivided at least `min_depth` times before the Richardson error
//! test is trusted. Periodic integrands sampled only at the five points of a
//! coarse Simpson pair can otherwise look converged when they are not.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    /// Absolute error target for the whole integral.
    pub tol: f64,
    pub max_depth: u32,
    pub min_depth: u32,
    pub panel_width: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_depth: 40,
            min_depth: 3,
            panel_width: 1.0,
        }
    }
}

impl QuadratureSettings {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Integral value with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
}

impl Estimate {
    pub const ZERO: Estimate = Estimate {
        value: Complex64::new(0.0, 0.0),
        error: 0.0,
    };
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
        }
    }
}

const MAX_PANELS: usize = 1 << 20;
/// Local tolerances stop halving here, so integrable endpoint singularities
/// converge instead of chasing a target below their representable size.
const TOL_FLOOR: f64 = 1.0 / (1u64 << 30) as f64;

struct Ctx {
    min_depth: u32,
    max_depth: u32,
    tol_floor: f64,
    diverged: bool,
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F>(f: F, a: f64, b: f64, settings: &QuadratureSettings) -> Result<Estimate>
where
    F: Fn(f64) -> Complex64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "integration bounds must be finite, got [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(Estimate::ZERO);
    }
    if a > b {
        let r = integrate(f, b, a, settings)?;
        return Ok(Estimate {
            value: -r.value,
            error: r.error,
        });
    }
    let len = b - a;
    let panels = ((len / settings.panel_width).ceil() as usize).clamp(1, MAX_PANELS);
    let h = len / panels as f64;
    let mut ctx = Ctx {
        min_depth: settings.min_depth,
        max_depth: settings.max_depth,
        tol_floor: settings.tol / panels as f64 * TOL_FLOOR,
        diverged: false,
    };
    let mut total = Estimate::ZERO;
    let panel_tol = settings.tol / panels as f64;
    for k in 0..panels {
        let lo = a + h * k as f64;
        let hi = if k + 1 == panels { b } else { a + h * (k + 1) as f64 };
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total = total + simpson_step(&f, lo, flo, mid, fmid, hi, fhi, whole, panel_tol, 0, &mut ctx);
    }
    if ctx.diverged {
        return Err(Error::QuadratureDiverged {
            a,
            b,
            max_depth: settings.max_depth,
            partial: total.value,
            error_estimate: total.error,
        });
    }
    Ok(total)
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F>(f: F, a: f64, b: f64, settings: &QuadratureSettings) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate(|x| Complex64::new(f(x), 0.0), a, b, settings).map(|e| e.value.re)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(
    f: &F,
    a: f64,
    fa: Complex64,
    m: f64,
    fm: Complex64,
    b: f64,
    fb: Complex64,
    whole: Complex64,
    tol: f64,
    depth: u32,
    ctx: &mut Ctx,
) -> Estimate
where
    F: Fn(f64) -> Complex64,
{
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    let accepted = Estimate {
        value: left + right + delta / 15.0,
        error: delta.norm() / 15.0,
    };
    if depth >= ctx.min_depth {
        let roundoff = 64.0 * f64::EPSILON * (left.norm() + right.norm());
        if delta.norm() <= 15.0 * tol || delta.norm() <= roundoff {
            return accepted;
        }
    }
    // no representable midpoint left
    if lm <= a || rm >= b || m <= lm || m >= rm {
        return accepted;
    }
    if depth >= ctx.max_depth {
        ctx.diverged = true;
        return accepted;
    }
    let half = (0.5 * tol).max(ctx.tol_floor);
    simpson_step(f, a, fa, lm, flm, m, fm, left, half, depth + 1, ctx)
        + simpson_step(f, m, fm, rm, frm, b, fb, right, half, depth + 1, ctx)
}

const GL_DEGREE: usize = 20;
const GL_MAX_DOUBLINGS: u32 = 12;
/// Target phase change of `e^{iωx}` across one Gauss–Legendre piece.
const GL_PIECE_PHASE: f64 = 4.0;

fn gauss_legendre() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(GL_DEGREE).expect("nonzero degree")))
}

/// Composite Gauss–Legendre for integrands analytic near `[a, b]` that vary
/// on a length scale of about `1/frequency`.
///
/// The number of pieces is doubled until two successive sums agree to
/// `settings.tol`.
pub fn integrate_smooth<F>(f: F, a: f64, b: f64, frequency: f64, settings: &QuadratureSettings) -> Result<Estimate>
where
    F: Fn(f64) -> Complex64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidInput(format!("integration bounds must be finite, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(Estimate::ZERO);
    }
    let rule = gauss_legendre().as_node_weight_pairs();
    let composite = |m: usize| {
        let h = (b - a) / m as f64;
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 0..m {
            let left = a + h * k as f64;
            for &(x, w) in rule {
                sum += f(left + 0.5 * h * (x + 1.0)) * w;
            }
        }
        sum * (0.5 * h)
    };
    let pieces = ((b - a).abs() * frequency.abs().max(1.0) / GL_PIECE_PHASE).ceil();
    let mut m = pieces.max(1.0) as usize;
    let mut coarse = composite(m);
    let mut err = f64::INFINITY;
    for _ in 0..GL_MAX_DOUBLINGS {
        m *= 2;
        let fine = composite(m);
        err = (fine - coarse).norm();
        if err <= settings.tol {
            return Ok(Estimate { value: fine, error: err });
        }
        coarse = fine;
    }
    Err(Error::QuadratureDiverged {
        a,
        b,
        max_depth: GL_MAX_DOUBLINGS,
        partial: coarse,
        error_estimate: err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let q = QuadratureSettings::default();
        let r = integrate_real(|x| x * x * x - 2.0 * x, -1.0, 3.0, &q).unwrap();
        // x^4/4 - x^2 from -1 to 3
        assert!((r - ((81.0 / 4.0 - 9.0) - (0.25 - 1.0))).abs() < 1e-12);
    }

    #[test]
    fn periodic_integrand_is_not_aliased() {
        // every coarse Simpson node of cos(pi x) on integer panels sits on +-1
        let q = QuadratureSettings::default();
        let r = integrate_real(|x| (PI * x).cos(), -256.0, 256.0, &q).unwrap();
        assert!(r.abs() < 1e-9, "{r}");
    }

    #[test]
    fn sqrt_singularity_converges() {
        let q = QuadratureSettings::default();
        let r = integrate_real(f64::sqrt, 0.0, 1.0, &q).unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let q = QuadratureSettings::default();
        let r = integrate(|x| Complex64::new(0.0, x).exp(), 2.0, 0.0, &q).unwrap();
        let expect = -(Complex64::new(0.0, 2.0).exp() - 1.0) / Complex64::new(0.0, 1.0);
        assert!((r.value - expect).norm() < 1e-10);
    }

    #[test]
    fn shallow_depth_reports_partial_value() {
        let q = QuadratureSettings {
            tol: 1e-14,
            max_depth: 2,
            min_depth: 0,
            panel_width: 10.0,
        };
        match integrate_real(|x| (50.0 * x).sin().abs(), 0.0, 10.0, &q) {
            Err(Error::QuadratureDiverged { partial, .. }) => assert!(partial.re.is_finite()),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn smooth_rule_oscillatory() {
        let s = QuadratureSettings::default();
        let e = integrate_smooth(|x| Complex64::new(0.0, 40.0 * x).exp(), -1.0, 2.0, 40.0, &s).unwrap();
        let exact = (Complex64::new(0.0, 80.0).exp() - Complex64::new(0.0, -40.0).exp()) / Complex64::new(0.0, 40.0);
        assert!((e.value - exact).norm() < 1e-13);
    }
}
