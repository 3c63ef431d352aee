//! Fourier–Stieltjes transforms, distinguished logarithms and CDF inversion.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bv::PiecewiseBV;
use crate::error::{Error, Result};
use crate::quadrature::{integrate_real, QuadratureSettings};

/// Largest phase increment accepted between neighbouring samples.
pub const MAX_PHASE_STEP: f64 = 0.9 * PI;

/// Spacing of the default t-grid and of the base grid used by [`LogCf`].
pub const DEFAULT_T_STEP: f64 = 0.01;
pub const DEFAULT_T_MAX: f64 = 40.0;

const REFINE_PHASE: f64 = PI / 2.0;
const REFINE_FACTOR: usize = 10;
const REFINE_LEVELS: usize = 3;

/// Anything that can be evaluated as a characteristic function.
pub trait CharacteristicFn: Sync {
    fn eval(&self, t: f64) -> Result<Complex64>;
}

impl<F> CharacteristicFn for F
where
    F: Fn(f64) -> Complex64 + Sync,
{
    fn eval(&self, t: f64) -> Result<Complex64> {
        Ok(self(t))
    }
}

/// Complex values on a strictly increasing real grid containing 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformSamples {
    grid: Vec<f64>,
    values: Vec<Complex64>,
}

impl TransformSamples {
    pub fn new(grid: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "grid has {} points but {} values were given",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = grid.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidInput(format!("grid point {i} is not finite")));
        }
        if let Some(i) = grid.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "grid is not strictly increasing at index {}",
                i + 1
            )));
        }
        if !grid.contains(&0.0) {
            return Err(Error::MissingOrigin);
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` on `grid` in parallel.
    pub fn sample<F: CharacteristicFn + ?Sized>(f: &F, grid: &[f64]) -> Result<Self> {
        let values = grid
            .par_iter()
            .map(|&t| f.eval(t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid.to_vec(), values)
    }

    /// Samples the transform of `g`.
    pub fn of_transform(g: &PiecewiseBV, grid: &[f64]) -> Result<Self> {
        Self::new(grid.to_vec(), grid.iter().map(|&t| fs_transform(g, t)).collect())
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn origin_index(&self) -> usize {
        self.grid
            .binary_search_by(|t| t.total_cmp(&0.0))
            .expect("grid contains 0 by construction")
    }

    pub fn value_at(&self, t: f64) -> Option<Complex64> {
        self.grid
            .binary_search_by(|s| s.total_cmp(&t))
            .ok()
            .map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.grid.iter().copied().zip(self.values.iter().copied())
    }

    /// Pointwise map keeping the grid.
    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.iter().map(|(t, v)| f(t, v)).collect(),
        }
    }

    /// `sup_t |self(t) − other(t)|` over the grid points both contain.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.iter()
            .filter_map(|(t, v)| other.value_at(t).map(|w| (v - w).norm()))
            .fold(0.0, f64::max)
    }
}

/// Symmetric grid `k·step` on `[t_min, t_max]`; always contains 0.
pub fn uniform_grid(t_min: f64, t_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(t_min.is_finite() && t_max.is_finite() && step.is_finite()) || step <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "bad grid [{t_min}, {t_max}] with step {step}"
        )));
    }
    if t_min > 0.0 || t_max < 0.0 {
        return Err(Error::MissingOrigin);
    }
    let lo = (t_min / step).ceil() as i64;
    let hi = (t_max / step).floor() as i64;
    let inv = (1.0 / step).round();
    let exact_inverse = inv >= 1.0 && (inv * step - 1.0).abs() < 1e-12;
    Ok((lo..=hi)
        .map(|k| {
            if exact_inverse {
                k as f64 / inv
            } else {
                k as f64 * step
            }
        })
        .collect())
}

/// Uniform grid with spacing 0.01 on `[−40, 40]`.
pub fn default_t_grid() -> Vec<f64> {
    uniform_grid(-DEFAULT_T_MAX, DEFAULT_T_MAX, DEFAULT_T_STEP).expect("valid default grid")
}

/// `sin(u)/u` with the removable singularity filled in.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        1.0 - u2 / 6.0 + u2 * u2 / 120.0
    } else {
        u.sin() / u
    }
}

/// `∫ e^{itx} dG(x)` in closed form.
pub fn fs_transform(g: &PiecewiseBV, t: f64) -> Complex64 {
    let atoms: Complex64 = g
        .atoms()
        .iter()
        .map(|a| a.weight * Complex64::cis(t * a.location))
        .sum();
    let segments: Complex64 = g
        .segments()
        .iter()
        .map(|s| {
            let len = s.len();
            let mid = 0.5 * (s.left + s.right);
            s.slope * len * sinc(0.5 * t * len) * Complex64::cis(t * mid)
        })
        .sum();
    atoms + segments
}

fn checked_nonzero(t: f64, v: Complex64) -> Result<Complex64> {
    if v.norm() == 0.0 || !v.is_finite() {
        Err(Error::VanishingCf { t })
    } else {
        Ok(v)
    }
}

/// Unwraps phases outward from the origin. `values` must be nonzero.
/// Reduces an angle to `(−π, π]`.
fn wrap_phase(d: f64) -> f64 {
    let r = (d + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

fn unwrap_from_origin(grid: &[f64], values: &[Complex64], origin: usize) -> Result<Vec<Complex64>> {
    let mut out = vec![Complex64::new(0.0, 0.0); values.len()];
    out[origin] = Complex64::new(values[origin].norm().ln(), 0.0);
    let step = |from: usize, to: usize, out: &mut Vec<Complex64>| -> Result<()> {
        // Differencing arguments avoids the underflow of `v_to·conj(v_from)`.
        let d = wrap_phase(values[to].arg() - values[from].arg());
        if d.abs() >= MAX_PHASE_STEP {
            let (l, r) = if from < to { (from, to) } else { (to, from) };
            return Err(Error::GridTooCoarse {
                left: grid[l],
                right: grid[r],
                increment: d.abs(),
            });
        }
        out[to] = Complex64::new(values[to].norm().ln(), out[from].im + d);
        Ok(())
    };
    for i in origin..values.len().saturating_sub(1) {
        step(i, i + 1, &mut out)?;
    }
    for i in (1..=origin).rev() {
        step(i, i - 1, &mut out)?;
    }
    Ok(out)
}

/// Continuous-branch logarithm of sampled values with `Ln f(0) = 0`.
pub fn distinguished_log(samples: &TransformSamples) -> Result<TransformSamples> {
    for (t, v) in samples.iter() {
        checked_nonzero(t, v)?;
    }
    let origin = samples.origin_index();
    let v0 = samples.values[origin];
    if (v0 - 1.0).norm() > 1e-12 {
        return Err(Error::NotNormalized { value: v0 });
    }
    let logs = unwrap_from_origin(&samples.grid, &samples.values, origin)?;
    Ok(TransformSamples {
        grid: samples.grid.clone(),
        values: logs,
    })
}

/// Distinguished logarithm of an evaluator, tabulated on `[lo, hi]`.
///
/// The table holds unwrapped phases on a base grid of spacing 0.01, refined
/// tenfold (up to three times) wherever neighbouring phases differ by more
/// than π/2. Off-node queries take the principal logarithm of `f(t)` and add
/// the multiple of 2π closest to the linearly interpolated table phase.
pub struct LogCf<'a, F: CharacteristicFn + ?Sized> {
    f: &'a F,
    nodes: Vec<f64>,
    logs: Vec<Complex64>,
}

impl<'a, F: CharacteristicFn + ?Sized> LogCf<'a, F> {
    pub fn build(f: &'a F, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidInput(format!("bad log range [{lo}, {hi}]")));
        }
        let lo = lo.min(0.0);
        let hi = hi.max(0.0);
        let k_lo = (lo / DEFAULT_T_STEP).floor() as i64;
        let k_hi = (hi / DEFAULT_T_STEP).ceil() as i64;
        let inv = (1.0 / DEFAULT_T_STEP).round();
        let mut nodes: Vec<f64> = (k_lo..=k_hi).map(|k| k as f64 / inv).collect();
        let mut values = eval_all(f, &nodes)?;
        let origin = nodes.iter().position(|&t| t == 0.0).expect("0 is a node");
        if (values[origin] - 1.0).norm() > 1e-12 {
            return Err(Error::NotNormalized {
                value: values[origin],
            });
        }
        for _ in 0..REFINE_LEVELS {
            let coarse: Vec<usize> = (0..nodes.len() - 1)
                .filter(|&i| (values[i + 1] * values[i].conj()).arg().abs() > REFINE_PHASE)
                .collect();
            if coarse.is_empty() {
                break;
            }
            let extra: Vec<f64> = coarse
                .iter()
                .flat_map(|&i| {
                    let (a, b) = (nodes[i], nodes[i + 1]);
                    (1..REFINE_FACTOR).map(move |j| a + (b - a) * j as f64 / REFINE_FACTOR as f64)
                })
                .collect();
            let extra_values = eval_all(f, &extra)?;
            let mut merged: Vec<(f64, Complex64)> = nodes
                .into_iter()
                .zip(values)
                .chain(extra.into_iter().zip(extra_values))
                .collect();
            merged.sort_by(|a, b| a.0.total_cmp(&b.0));
            merged.dedup_by(|a, b| a.0 == b.0);
            (nodes, values) = merged.into_iter().unzip();
        }
        let origin = nodes.iter().position(|&t| t == 0.0).expect("0 is a node");
        let logs = unwrap_from_origin(&nodes, &values, origin)?;
        Ok(Self { f, nodes, logs })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().expect("nonempty"))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `Ln f(t)`.
    pub fn ln(&self, t: f64) -> Result<Complex64> {
        let (lo, hi) = self.range();
        if !(lo..=hi).contains(&t) {
            return Err(Error::InvalidInput(format!(
                "t = {t} is outside the tabulated range [{lo}, {hi}]"
            )));
        }
        let i = match self.nodes.binary_search_by(|s| s.total_cmp(&t)) {
            Ok(i) => return Ok(self.logs[i]),
            Err(i) => i,
        };
        let (t0, t1) = (self.nodes[i - 1], self.nodes[i]);
        let w = (t - t0) / (t1 - t0);
        let theta = (1.0 - w) * self.logs[i - 1].im + w * self.logs[i].im;
        let p = checked_nonzero(t, self.f.eval(t)?)?.ln();
        let k = ((theta - p.im) / (2.0 * PI)).round();
        Ok(Complex64::new(p.re, p.im + 2.0 * PI * k))
    }
}

fn eval_all<F: CharacteristicFn + ?Sized>(f: &F, ts: &[f64]) -> Result<Vec<Complex64>> {
    ts.par_iter()
        .map(|&t| f.eval(t).and_then(|v| checked_nonzero(t, v)))
        .collect()
}

/// Whether Gil–Pelaez may damp the integrand when the CF does not decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothing {
    /// Hard truncation if `|f|` has decayed by `t_max`, Gaussian window otherwise.
    Auto,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionSettings {
    pub quad: QuadratureSettings,
    pub t_max: f64,
    pub smoothing: Smoothing,
}

impl Default for InversionSettings {
    fn default() -> Self {
        Self {
            quad: QuadratureSettings::default(),
            t_max: 200.0,
            smoothing: Smoothing::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfEstimate {
    pub value: f64,
    /// Magnitude of the discarded tail, from the last lobe before `t_max`.
    pub tail_estimate: f64,
    /// Standard deviation of the Gaussian the law was convolved with, if any.
    pub smoothing_scale: Option<f64>,
    pub quad_error: f64,
}

const TAIL_NEGLIGIBLE: f64 = 1e-12;
const TAIL_UNSMOOTHED_MAX: f64 = 1e-8;
const MEAN_STEP: f64 = 1e-5;

/// `F(x)` by Gil–Pelaez inversion with default truncation and smoothing.
pub fn gil_pelaez_cdf<F: CharacteristicFn + ?Sized>(
    f: &F,
    x: f64,
    quad: &QuadratureSettings,
) -> Result<f64> {
    let settings = InversionSettings {
        quad: *quad,
        ..InversionSettings::default()
    };
    gil_pelaez_cdf_with(f, x, &settings).map(|e| e.value)
}

/// `F(x) = 1/2 − (1/π) ∫₀^T Im(e^{−itx} f(t))/t dt`.
///
/// When `|f|` has not decayed near `T` and smoothing is allowed, the integrand
/// is multiplied by `exp(−σ²t²/2)` with `σ` chosen so the window is `1e−12`
/// at `T`; the result is then the CDF of the law convolved with `N(0, σ²)`,
/// which agrees with `F(x)` at points further than a few `σ` from any atom.
pub fn gil_pelaez_cdf_with<F: CharacteristicFn + ?Sized>(
    f: &F,
    x: f64,
    settings: &InversionSettings,
) -> Result<CdfEstimate> {
    let t_max = settings.t_max;
    if !(x.is_finite() && t_max.is_finite() && t_max > 0.0) {
        return Err(Error::InvalidInput(format!(
            "Gil-Pelaez needs finite x and positive t_max, got x = {x}, t_max = {t_max}"
        )));
    }
    let max_tail = (0..=64)
        .map(|k| f.eval(t_max * (0.75 + 0.25 * k as f64 / 64.0)).map(|v| v.norm()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let lobe = max_tail * (4.0f64 / 3.0).ln() / PI;
    let sigma = match settings.smoothing {
        _ if max_tail <= TAIL_NEGLIGIBLE => None,
        Smoothing::Auto => Some((2.0 * (1.0 / TAIL_NEGLIGIBLE).ln()).sqrt() / t_max),
        Smoothing::Off => None,
    };
    let mean = f.eval(MEAN_STEP)?.ln().im / MEAN_STEP;

    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let integrand = |t: f64| {
        if t < 1e-8 {
            return mean - x;
        }
        let v = match f.eval(t) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                return 0.0;
            }
        };
        let window = sigma.map_or(1.0, |s| (-0.5 * s * s * t * t).exp());
        (Complex64::cis(-t * x) * v).im / t * window
    };
    let integral = integrate_real(integrand, 0.0, t_max, &settings.quad);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let (integral, quad_error) = match integral {
        Ok(v) => (v, 0.0),
        Err(Error::QuadratureDiverged {
            partial,
            error_estimate,
            ..
        }) => {
            return Err(Error::NonConvergentTail {
                partial: 0.5 - partial.re / PI,
                tail: error_estimate,
            })
        }
        Err(e) => return Err(e),
    };
    let value = 0.5 - integral / PI;
    let tail_estimate = match sigma {
        Some(_) => lobe * TAIL_NEGLIGIBLE,
        None => lobe,
    };
    if sigma.is_none() && max_tail > TAIL_UNSMOOTHED_MAX {
        return Err(Error::NonConvergentTail {
            partial: value,
            tail: tail_estimate,
        });
    }
    Ok(CdfEstimate {
        value: value.clamp(0.0, 1.0),
        tail_estimate,
        smoothing_scale: sigma,
        quad_error,
    })
}
