//! Lévy–Khinchine characteristic functions of spectral pairs, the broken-line
//! decomposition of the kernel, and recovery of `γ`, `ψ`, the spectral
//! transform and the Khinchine functional from a characteristic function.
//!
//! The centering function is `sin(τx)/τ`. An atom of `G` at 0 with weight `w`
//! contributes the Gaussian exponent `−w t²/2`.

use std::cell::RefCell;

use num_complex::Complex64;

use crate::bv::{combine, stieltjes_integral_real, Atom, PiecewiseBV, Segment};
use crate::error::{Error, Result};
use crate::fourier::{fs_transform, CharacteristicFn, LogCf};
use crate::quadrature::{integrate, integrate_real, integrate_smooth, QuadratureSettings};
use crate::special::sici;

/// Below this `|x|` the kernel is evaluated from its Taylor series.
pub const KERNEL_SERIES_CUTOFF: f64 = 1e-4;

/// Truncation point of the `s`-integral in spectral-transform recovery.
pub const RECOVERY_S_MAX: f64 = 40.0;

/// Target for the error of the piecewise-constant approximation of `ρ`.
const RHO_MESH_TOL: f64 = 2e-8;
const RHO_MIN_SUBSEGMENTS: usize = 64;

/// Shift `γ`, spectral function `G` and centering scale `τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPair {
    pub gamma: f64,
    pub g: PiecewiseBV,
    pub tau: f64,
}

impl SpectralPair {
    pub fn new(gamma: f64, g: PiecewiseBV, tau: f64) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(Error::InvalidInput(format!("gamma must be finite, got {gamma}")));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidInput(format!("tau must be positive, got {tau}")));
        }
        Ok(Self { gamma, g, tau })
    }

    /// Pair whose log-CF is `iβt − σ²t²/2 + Σ m(e^{itx} − 1)`, i.e. the map
    /// `dG = x²/(1+x²) dν` for a finite atomic Lévy measure `ν` (masses may be
    /// negative).
    pub fn from_levy(
        shift: f64,
        levy_atoms: &[(f64, f64)],
        gaussian_variance: f64,
        tau: f64,
    ) -> Result<Self> {
        if let Some(&(x, _)) = levy_atoms.iter().find(|&&(x, _)| x == 0.0) {
            return Err(Error::InvalidInput(format!(
                "Levy measure atom at {x}: jumps of size 0 are not allowed"
            )));
        }
        let mut atoms: Vec<(f64, f64)> = levy_atoms
            .iter()
            .map(|&(x, m)| (x, m * x * x / (1.0 + x * x)))
            .collect();
        if gaussian_variance != 0.0 {
            atoms.push((0.0, gaussian_variance));
        }
        let g = PiecewiseBV::from_parts(&atoms, &[])?;
        let gamma = shift
            + levy_atoms
                .iter()
                .map(|&(x, m)| m * (tau * x).sin() / tau)
                .sum::<f64>();
        Self::new(gamma, g, tau)
    }

    /// Poisson law with rate `lambda` and unit jumps.
    pub fn poisson(lambda: f64, tau: f64) -> Result<Self> {
        Self::from_levy(0.0, &[(1.0, lambda)], 0.0, tau)
    }

    /// `exp{λ₁(e^{it}−1) − λ₂(e^{2it}−1)}`, a ratio of two Poisson-type laws.
    pub fn qid_ratio(lambda1: f64, lambda2: f64, tau: f64) -> Result<Self> {
        Self::from_levy(0.0, &[(1.0, lambda1), (2.0, -lambda2)], 0.0, tau)
    }

    /// `(γ, G⁺)` and `(0, G⁻)`, whose CFs have this pair's CF as quotient.
    pub fn jordan_factors(&self) -> (SpectralPair, SpectralPair) {
        let hj = self.g.hahn_jordan();
        (
            SpectralPair {
                gamma: self.gamma,
                g: hj.positive_part,
                tau: self.tau,
            },
            SpectralPair {
                gamma: 0.0,
                g: hj.negative_part,
                tau: self.tau,
            },
        )
    }

    /// Pair of the convolution of the two laws. Both must share `τ`.
    pub fn convolve(&self, other: &SpectralPair) -> Result<SpectralPair> {
        if self.tau != other.tau {
            return Err(Error::InvalidInput(format!(
                "cannot add pairs with different tau ({} and {})",
                self.tau, other.tau
            )));
        }
        Ok(SpectralPair {
            gamma: self.gamma + other.gamma,
            g: combine(1.0, &self.g, 1.0, &other.g),
            tau: self.tau,
        })
    }

    pub fn log_cf(&self, t: f64, quad: &QuadratureSettings) -> Result<Complex64> {
        log_cf(self, t, quad)
    }
}

impl CharacteristicFn for SpectralPair {
    fn eval(&self, t: f64) -> Result<Complex64> {
        cf(self, t)
    }
}

/// `(e^{itx} − 1 − (it/τ) sin τx)(1+x²)/x²`, continuous at `x = 0`.
pub fn kernel(t: f64, x: f64, tau: f64) -> Complex64 {
    if t == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let x2 = x * x;
    if x.abs() < KERNEL_SERIES_CUTOFF {
        let (t2, tau2) = (t * t, tau * tau);
        let re = -0.5 * t2 + t2 * t2 * x2 / 24.0;
        let im = -t * x * (t2 - tau2) / 6.0 + t * x * x2 * (t2 * t2 - tau2 * tau2) / 120.0;
        return Complex64::new(re, im) * (1.0 + x2);
    }
    let w = (1.0 + x2) / x2;
    let half = (0.5 * t * x).sin();
    Complex64::new(
        -2.0 * half * half * w,
        ((t * x).sin() - t / tau * (tau * x).sin()) * w,
    )
}

/// Segments whose phase span `len·max(|t|, τ, 1)` exceeds this use
/// [`kernel_segment_integral`] instead of quadrature.
pub const CLOSED_FORM_MIN_PHASE: f64 = 256.0;

/// `Ln f(t) = iγt + ∫ kernel(t, x, τ) dG(x)`; atoms are summed exactly.
pub fn log_cf(pair: &SpectralPair, t: f64, quad: &QuadratureSettings) -> Result<Complex64> {
    if t == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let tau = pair.tau;
    let mut sum = Complex64::new(0.0, pair.gamma * t);
    for a in pair.g.atoms() {
        sum += a.weight * kernel(t, a.location, tau);
    }
    let segments = pair.g.segments();
    let frequency = t.abs().max(tau);
    let n = segments.len().max(1) as f64;
    for s in segments {
        let part = if s.len() * frequency.max(1.0) > CLOSED_FORM_MIN_PHASE {
            kernel_segment_integral(t, tau, s.left, s.right)
        } else {
            let local = quad.with_tol(quad.tol / (n * s.slope.abs()));
            integrate_smooth(|x| kernel(t, x, tau), s.left, s.right, frequency, &local)?.value
        };
        sum += s.slope * part;
    }
    Ok(sum)
}

/// `A(x)/x` with `A(x) = e^{itx} − 1 − (it/τ) sin τx`, zero at `x = 0`.
fn kernel_numerator_over_x(t: f64, x: f64, tau: f64) -> Complex64 {
    if x == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let half = (0.5 * t * x).sin();
    Complex64::new(-2.0 * half * half, (t * x).sin() - t / tau * (tau * x).sin()) / x
}

/// Even antiderivative pieces `(Ci(|t||x|) − Ci(τ|x|), Si(|t|x))`.
fn sici_terms(t: f64, x: f64, tau: f64) -> (f64, f64) {
    if x == 0.0 {
        return ((t.abs() / tau).ln(), 0.0);
    }
    let (si_t, ci_t) = sici(t.abs() * x.abs());
    let (_, ci_tau) = sici(tau * x.abs());
    (ci_t - ci_tau, si_t * x.signum())
}

/// `∫_a^b kernel(t, x, τ) dx` in closed form via the sine and cosine integrals.
///
/// Splits the kernel as `A(x) + A(x)/x²` and integrates the second part by
/// parts: `∫A/x² = [−A/x] + it∫(cos tx − cos τx)/x dx − t∫sin(tx)/x dx`.
pub fn kernel_segment_integral(t: f64, tau: f64, a: f64, b: f64) -> Complex64 {
    if t == 0.0 || a == b {
        return Complex64::new(0.0, 0.0);
    }
    let i = Complex64::i();
    let plain = (Complex64::cis(t * b) - Complex64::cis(t * a)) / (i * t) - (b - a)
        + i * t * ((tau * b).cos() - (tau * a).cos()) / (tau * tau);
    let boundary = kernel_numerator_over_x(t, a, tau) - kernel_numerator_over_x(t, b, tau);
    let (fa, sa) = sici_terms(t, a, tau);
    let (fb, sb) = sici_terms(t, b, tau);
    let by_parts = i * t * (fb - fa) - t.abs() * (sb - sa);
    plain + boundary + by_parts
}

/// `f(t)` with default quadrature settings.
pub fn cf(pair: &SpectralPair, t: f64) -> Result<Complex64> {
    cf_with(pair, t, &QuadratureSettings::default())
}

pub fn cf_with(pair: &SpectralPair, t: f64, quad: &QuadratureSettings) -> Result<Complex64> {
    if t == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    Ok(log_cf(pair, t, quad)?.exp())
}

/// `U`, `ρ`, `V` and `W = U + V` such that the kernel at `(t, ·, τ)` is the
/// transform of `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaKernelParts {
    pub u: PiecewiseBV,
    /// Breakpoints `(s, ρ(s))`; `ρ` is linear between them and zero outside.
    pub rho_breakpoints: Vec<(f64, f64)>,
    /// `V(s) = ∫_{−∞}^s ρ`, with `ρ` replaced by its midpoint values on a
    /// fine mesh so that `V` is piecewise linear.
    pub v: PiecewiseBV,
    pub w: PiecewiseBV,
    pub support_bound: f64,
}

impl LemmaKernelParts {
    /// `ρ(s)` interpolated from the breakpoints.
    pub fn rho_at(&self, s: f64) -> f64 {
        let b = &self.rho_breakpoints;
        if b.is_empty() || s <= b[0].0 || s >= b[b.len() - 1].0 {
            return 0.0;
        }
        let i = b.partition_point(|p| p.0 <= s);
        let ((s0, r0), (s1, r1)) = (b[i - 1], b[i]);
        r0 + (r1 - r0) * (s - s0) / (s1 - s0)
    }

    /// `∫ e^{isx} dW(s)`.
    pub fn kernel_at(&self, x: f64) -> Complex64 {
        fs_transform(&self.w, x)
    }
}

/// `ρ(s) = −½(|s−t| − |s| − (t/2τ)(|s−τ| − |s+τ|))`.
pub fn rho(t: f64, tau: f64, s: f64) -> f64 {
    -0.5 * ((s - t).abs() - s.abs() - t / (2.0 * tau) * ((s - tau).abs() - (s + tau).abs()))
}

pub fn lemma_parts(t: f64, tau: f64) -> Result<LemmaKernelParts> {
    if !(t.is_finite() && tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidInput(format!(
            "lemma parts need finite t and positive tau, got t = {t}, tau = {tau}"
        )));
    }
    let c = t / (2.0 * tau);
    let u = PiecewiseBV::from_parts(&[(t, 1.0), (0.0, -1.0), (tau, -c), (-tau, c)], &[])?;
    let mut knots = vec![-tau, 0.0, t, tau];
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let rho_breakpoints: Vec<(f64, f64)> = if t == 0.0 {
        Vec::new()
    } else {
        knots.iter().map(|&s| (s, rho(t, tau, s))).collect()
    };
    let mut segments = Vec::new();
    for w in rho_breakpoints.windows(2) {
        let ((l, rl), (r, rr)) = (w[0], w[1]);
        let len = r - l;
        let slope = (rr - rl) / len;
        let n = ((len * (slope.abs() / (6.0 * RHO_MESH_TOL)).sqrt()).ceil() as usize)
            .max(RHO_MIN_SUBSEGMENTS);
        let h = len / n as f64;
        for j in 0..n {
            let a = l + h * j as f64;
            let b = if j + 1 == n { r } else { l + h * (j + 1) as f64 };
            segments.push(Segment {
                left: a,
                right: b,
                slope: rl + slope * (0.5 * (a + b) - l),
            });
        }
    }
    let v = PiecewiseBV::new(Vec::<Atom>::new(), segments)?;
    let w = combine(1.0, &u, 1.0, &v);
    Ok(LemmaKernelParts {
        u,
        rho_breakpoints,
        v,
        w,
        support_bound: t.abs().max(tau),
    })
}

/// The kernel computed as the transform of `W` from [`lemma_parts`].
pub fn kernel_via_w(t: f64, x: f64, tau: f64) -> Result<Complex64> {
    Ok(lemma_parts(t, tau)?.kernel_at(x))
}

/// `γ = Im Ln f(τ) / τ`.
pub fn recover_gamma<F: CharacteristicFn + ?Sized>(f: &F, tau: f64) -> Result<f64> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidInput(format!("tau must be positive, got {tau}")));
    }
    let table = LogCf::build(f, 0.0, tau)?;
    Ok(table.ln(tau)?.im / tau)
}

/// `ψ(t, s) = Ln f(t) − ½(Ln f(t−s) + Ln f(t+s))`.
pub fn psi<F: CharacteristicFn + ?Sized>(f: &F, t: f64, s: f64) -> Result<Complex64> {
    let table = LogCf::build(f, t - s.abs(), t + s.abs())?;
    psi_from_table(&table, t, s)
}

pub fn psi_from_table<F: CharacteristicFn + ?Sized>(
    table: &LogCf<'_, F>,
    t: f64,
    s: f64,
) -> Result<Complex64> {
    if s == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(table.ln(t)? - 0.5 * (table.ln(t - s)? + table.ln(t + s)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRecovery {
    pub value: Complex64,
    /// Bound on `|∫_{S}^∞ ψ(t,s) e^{−s} ds|` using the sampled majorant of `ψ`.
    pub truncation_bound: f64,
    pub quad_error: f64,
}

/// `∫₀^∞ ψ(t,s) e^{−s} ds`, which equals the transform of `G` at `t`.
pub fn recover_spectral_transform<F: CharacteristicFn + ?Sized>(
    f: &F,
    t: f64,
    quad: &QuadratureSettings,
) -> Result<Complex64> {
    let reach = t.abs() + RECOVERY_S_MAX;
    let table = LogCf::build(f, -reach, reach)?;
    recover_spectral_transform_from_table(&table, t, quad).map(|r| r.value)
}

/// As [`recover_spectral_transform`], reusing a table that covers
/// `[t − 40, t + 40]`.
pub fn recover_spectral_transform_from_table<F: CharacteristicFn + ?Sized>(
    table: &LogCf<'_, F>,
    t: f64,
    quad: &QuadratureSettings,
) -> Result<SpectralRecovery> {
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let integrand = |s: f64| match psi_from_table(table, t, s) {
        Ok(v) => v * (-s).exp(),
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            Complex64::new(0.0, 0.0)
        }
    };
    let est = integrate(integrand, 0.0, RECOVERY_S_MAX, quad);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let est = est?;
    let mut majorant: f64 = 0.0;
    for k in 1..=80 {
        let s = 0.5 * k as f64;
        majorant = majorant.max(psi_from_table(table, t, s)?.norm() / (0.5 * s * s + 1.0));
    }
    let big_s = RECOVERY_S_MAX;
    Ok(SpectralRecovery {
        value: est.value,
        truncation_bound: majorant * (-big_s).exp() * (0.5 * big_s * big_s + big_s + 2.0),
        quad_error: est.error,
    })
}

/// `χ_δ(f) = −(1/δ) ∫₀^δ ln|f(s)| ds`.
pub fn khinchine_functional<F: CharacteristicFn + ?Sized>(
    f: &F,
    delta: f64,
    quad: &QuadratureSettings,
) -> Result<f64> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
    }
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let integrand = |s: f64| match f.eval(s) {
        Ok(v) if v.norm() > 0.0 => v.norm().ln(),
        Ok(_) => {
            failure.borrow_mut().get_or_insert(Error::VanishingCf { t: s });
            0.0
        }
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let v = integrate_real(integrand, 0.0, delta, quad);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(-v? / delta)
}

/// Largest `δ = 2^{−k}` (`k ≥ 0`) with `|f| > 1e−6` on `[0, δ]`.
pub fn default_khinchine_delta<F: CharacteristicFn + ?Sized>(f: &F) -> Result<f64> {
    'outer: for k in 0..=40 {
        let delta = 0.5f64.powi(k);
        for j in 0..=1000 {
            if f.eval(delta * j as f64 / 1000.0)?.norm() <= 1e-6 {
                continue 'outer;
            }
        }
        return Ok(delta);
    }
    Err(Error::VanishingCf { t: 0.0 })
}

/// `(1 − sin(δx)/(δx))(1+x²)/x²`, equal to `δ²/6` at `x = 0`.
pub fn sinc_kernel(delta: f64, x: f64) -> f64 {
    let u = delta * x;
    let x2 = x * x;
    if u.abs() < 0.1 {
        let u2 = u * u;
        let d2 = delta * delta;
        d2 * (1.0 / 6.0 - u2 / 120.0 + u2 * u2 / 5040.0 - u2 * u2 * u2 / 362_880.0) * (1.0 + x2)
    } else {
        (1.0 - u.sin() / u) * (1.0 + x2) / x2
    }
}

/// `∫ sinc_kernel(δ, x) dG(x)`.
pub fn chi_identity_rhs(g: &PiecewiseBV, delta: f64, quad: &QuadratureSettings) -> Result<f64> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
    }
    stieltjes_integral_real(g, |x| sinc_kernel(delta, x), quad)
}

/// Numerical infimum and supremum of [`sinc_kernel`] over the line.
pub fn sinc_kernel_bounds(delta: f64) -> (f64, f64) {
    let log_grid = (0..=2000).map(|k| 10f64.powf(-4.0 + 10.0 * k as f64 / 2000.0));
    let fine_step = 1e-3 / delta;
    let fine_grid = (1..=((50.0 / delta) / fine_step) as usize).map(|k| k as f64 * fine_step);
    let candidates = log_grid
        .chain(fine_grid)
        .map(|x| sinc_kernel(delta, x))
        .chain([delta * delta / 6.0, 1.0]);
    candidates.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// Upper bound `t²/2 + 2` of `(1 − cos tx)(1+x²)/x²`.
pub fn real_kernel_bound(t: f64) -> f64 {
    0.5 * t * t + 2.0
}

/// Lower bound `exp{−(t²/2+2)‖G‖}` on `|f(t)|`, as a logarithm.
pub fn log_cf_lower_bound(g: &PiecewiseBV, t: f64) -> f64 {
    -real_kernel_bound(t) * g.total_variation()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::TransformSamples;
    use std::f64::consts::PI;

    fn poisson() -> SpectralPair {
        SpectralPair::poisson(1.0, 1.0).unwrap()
    }

    #[test]
    fn kernel_values() {
        assert_eq!(kernel(0.0, 3.3, 1.0), Complex64::new(0.0, 0.0));
        assert_eq!(kernel(3.0, 0.0, 0.7), Complex64::new(-4.5, 0.0));
        // direct evaluation at x = 1e-3, where cancellation is still mild
        let x: f64 = 1e-3;
        let (t, tau) = (3.0, 0.7);
        let direct = (Complex64::cis(t * x) - 1.0 - Complex64::new(0.0, t / tau * (tau * x).sin()))
            * (1.0 + x * x)
            / (x * x);
        // 50-digit values on either side of the series cutoff
        let below = Complex64::new(-4.500_000_011_026_124_8, -4.212_450_021_695_909_7e-4);
        let above = Complex64::new(-4.500_000_011_476_124_8, -4.297_550_023_037_556e-4);
        assert!((kernel(t, 0.99e-4, tau) - below).norm() < 1e-12);
        assert!((kernel(t, 1.01e-4, tau) - above).norm() < 1e-11);
        assert!((kernel(t, x, tau) - direct).norm() < 1e-8);
    }

    #[test]
    fn kernel_imaginary_part_vanishes_at_tau() {
        for x in [-7.3, -1e-5, 0.0, 2e-5, 0.4, 19.0] {
            assert_eq!(kernel(1.3, x, 1.3).im, 0.0);
        }
    }

    #[test]
    fn poisson_log_cf() {
        let q = QuadratureSettings::default();
        let v = log_cf(&poisson(), PI, &q).unwrap();
        assert!((v - Complex64::new(-2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn qid_ratio_log_cf() {
        let (l1, l2, tau) = (1.5, 0.4, 0.8);
        let pair = SpectralPair::qid_ratio(l1, l2, tau).unwrap();
        assert_eq!(
            pair.g,
            PiecewiseBV::from_parts(&[(1.0, l1 / 2.0), (2.0, -4.0 * l2 / 5.0)], &[]).unwrap()
        );
        let q = QuadratureSettings::default();
        for t in [-3.0, 0.2, 1.0, 5.5] {
            let expect = l1 * (Complex64::cis(t) - 1.0) - l2 * (Complex64::cis(2.0 * t) - 1.0);
            assert!((log_cf(&pair, t, &q).unwrap() - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn gaussian_atom() {
        let pair = SpectralPair::new(0.0, PiecewiseBV::step(0.0, 0.8), 1.0).unwrap();
        let v = cf(&pair, 2.0).unwrap();
        assert!((v.re - (-0.8f64 * 2.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn cf_lower_bound_poisson() {
        let v = cf(&poisson(), 2.0).unwrap();
        assert!(v.norm().ln() >= log_cf_lower_bound(&poisson().g, 2.0));
        assert!((v.norm() - (2f64.cos() - 1.0).exp()).abs() < 1e-14);
    }

    #[test]
    fn cf_of_segment_pair_matches_quadrature_free_check() {
        // G uniform on [1, 2] with density 1: imaginary part at t = τ is 0
        let pair = SpectralPair::new(0.25, PiecewiseBV::ramp(1.0, 2.0, 1.0), 1.0).unwrap();
        let l = log_cf(&pair, 1.0, &QuadratureSettings::default()).unwrap();
        assert!((l.im - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rho_values() {
        assert_eq!(rho(1.0, 1.0, 0.0), -0.5);
        for (t, tau) in [(1.0f64, 1.0f64), (-3.0, 0.5), (3.0, 2.0), (0.5, 2.0)] {
            let b = f64::max(t.abs(), tau) + 1.0;
            assert_eq!(rho(t, tau, b), 0.0);
            assert_eq!(rho(t, tau, -b), 0.0);
        }
    }

    #[test]
    fn lemma_parts_t_zero_is_empty() {
        let p = lemma_parts(0.0, 1.0).unwrap();
        assert!(p.u.is_zero() && p.v.is_zero() && p.w.is_zero());
    }

    #[test]
    fn lemma_identity_spot_checks() {
        let direct = kernel(1.0, 2.0, 1.0);
        assert!((kernel_via_w(1.0, 2.0, 1.0).unwrap() - direct).norm() < 1e-6);
        for t in [-3.0, 0.5, 3.0] {
            let m = kernel_via_w(t, 0.0, 1.0).unwrap();
            assert!((m.re + t * t / 2.0).abs() < 1e-6 && m.im.abs() < 1e-6);
        }
    }

    #[test]
    fn recover_gamma_round_trips() {
        let pair = SpectralPair::new(1.7, poisson().g, 1.0).unwrap();
        assert!((recover_gamma(&pair, 1.0).unwrap() - 1.7).abs() < 1e-10);

        let g = SpectralPair::qid_ratio(1.0, 0.3, 2.0).unwrap().g;
        let pair = SpectralPair::new(-0.3, g, 2.0).unwrap();
        assert!((recover_gamma(&pair, 2.0).unwrap() + 0.3).abs() < 1e-10);

        let shift = |t: f64| Complex64::cis(0.9 * t);
        assert!((recover_gamma(&shift, 1.0).unwrap() - 0.9).abs() < 1e-13);
    }

    #[test]
    fn psi_values() {
        let p = poisson();
        assert_eq!(psi(&p, 1.0, 0.0).unwrap(), Complex64::new(0.0, 0.0));
        assert!((psi(&p, 0.0, PI).unwrap() - 2.0).norm() < 1e-12);
    }

    #[test]
    fn spectral_transform_recovery_poisson() {
        let p = poisson();
        let q = QuadratureSettings::default();
        let table = LogCf::build(&p, -50.0, 50.0).unwrap();
        for k in -20..=20 {
            let t = 0.5 * k as f64;
            let r = recover_spectral_transform_from_table(&table, t, &q).unwrap();
            assert!((r.value - 0.5 * Complex64::cis(t)).norm() < 1e-4, "t = {t}");
            assert!(r.truncation_bound < 1e-12);
        }
        let shift = |t: f64| Complex64::cis(-0.6 * t);
        assert!(recover_spectral_transform(&shift, 2.0, &q).unwrap().norm() < 1e-10);
    }

    #[test]
    fn khinchine_values() {
        let q = QuadratureSettings::default();
        let one = |_t: f64| Complex64::new(1.0, 0.0);
        assert_eq!(khinchine_functional(&one, 1.0, &q).unwrap(), 0.0);
        let chi = khinchine_functional(&poisson(), 1.0, &q).unwrap();
        assert!((chi - (1.0 - 1f64.sin())).abs() < 1e-12);
        let rhs = chi_identity_rhs(&poisson().g, 1.0, &q).unwrap();
        assert!((chi - rhs).abs() < 1e-8);
        assert_eq!(chi_identity_rhs(&PiecewiseBV::zero(), 1.0, &q).unwrap(), 0.0);
    }

    #[test]
    fn default_delta() {
        assert_eq!(default_khinchine_delta(&poisson()).unwrap(), 1.0);
        let narrow = |t: f64| Complex64::new((-1e3 * t * t).exp(), 0.0);
        assert!(default_khinchine_delta(&narrow).unwrap() < 0.125);
    }

    #[test]
    fn sinc_bounds() {
        for delta in [0.5, 1.0, 2.0] {
            let (c, big) = sinc_kernel_bounds(delta);
            assert!(c > 0.0 && c <= f64::min(delta * delta / 6.0, 1.0) && big >= 1.0);
        }
        let (c, _) = sinc_kernel_bounds(1.0);
        assert!(c >= 0.16);
        assert!((sinc_kernel(1.0, 1e6) - 1.0).abs() < 1e-5);
        assert!((sinc_kernel(1.0, 0.0999) - 0.168_246_024_868_152_6).abs() < 1e-14);
        assert!((sinc_kernel(1.0, 0.1001) - 0.168_252_351_695_890_4).abs() < 1e-13);
    }

    #[test]
    fn samples_log_matches_exponent() {
        let pair = SpectralPair::qid_ratio(1.0, 0.2, 1.0).unwrap();
        let grid = crate::fourier::default_t_grid();
        let s = TransformSamples::sample(&pair, &grid).unwrap();
        let l = crate::fourier::distinguished_log(&s).unwrap();
        let q = QuadratureSettings::default();
        for (t, v) in l.iter().step_by(37) {
            assert!((v - log_cf(&pair, t, &q).unwrap()).norm() < 1e-9);
        }
    }

    #[test]
    fn segment_integral_oracles() {
        let cases = [
            (40.0, 1.0, -256.0, 256.0, -637.70588311306839815, 0.0),
            (0.01, 1.0, -300.0, 300.0, -571.79970482194255493, 0.0),
            (3.0, 0.7, -2.0, 5.0, -15.633169431733980916, -7.0574388661048246727),
            (-7.0, 2.0, 0.0, 50.0, -61.112619392013604054, 8.8262938691907319455),
            (0.5, 1.0, -100.0, 0.0, -101.30020790393574665, -0.34765310918032566086),
        ];
        for (t, tau, a, b, re, im) in cases {
            let v = kernel_segment_integral(t, tau, a, b);
            assert!((v - Complex64::new(re, im)).norm() < 1e-11, "({t}, {tau}, {a}, {b}): {v}");
        }
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let quad = QuadratureSettings::default();
        for (t, tau, a, b) in [(0.3, 1.0, -1.0, 2.0), (12.0, 0.5, 0.25, 3.0), (-2.0, 2.0, -4.0, -0.5)] {
            let q = integrate_smooth(|x| kernel(t, x, tau), a, b, 12.0, &quad).unwrap().value;
            assert!((kernel_segment_integral(t, tau, a, b) - q).norm() < 1e-12);
        }
    }
}
