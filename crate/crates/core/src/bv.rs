//! Right-continuous signed functions of bounded variation vanishing at −∞.
//!
//! A [`PiecewiseBV`] is a finite sum of jumps (atoms) and a continuous part
//! whose density is constant on each of finitely many disjoint segments. This
//! class is closed under linear combination and keeps the variation, the
//! Hahn–Jordan split and the Fourier–Stieltjes transform in closed form.
//!
//! Representations are normalized on construction: atoms are sorted with
//! equal locations merged, overlapping segments are split and their slopes
//! summed, adjacent segments with identical slope are joined, and zero weights
//! or slopes are dropped. Two normalized values compare equal exactly when
//! they represent the same function through the same arithmetic.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, Estimate, QuadratureSettings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// Density `slope` on `[left, right]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub left: f64,
    pub right: f64,
    pub slope: f64,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.right - self.left
    }

    pub fn mass(&self) -> f64 {
        self.slope * self.len()
    }

    /// Length of `[left, right] ∩ (−∞, x]`.
    fn covered(&self, x: f64) -> f64 {
        if x <= self.left {
            0.0
        } else if x >= self.right {
            self.len()
        } else {
            x - self.left
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PiecewiseBV {
    atoms: Vec<Atom>,
    segments: Vec<Segment>,
}

/// Hahn–Jordan split `G = positive_part − negative_part` with
/// `|G| = positive_part + negative_part`.
#[derive(Debug, Clone, PartialEq)]
pub struct JordanPair {
    pub positive_part: PiecewiseBV,
    pub negative_part: PiecewiseBV,
}

impl PiecewiseBV {
    /// The zero function.
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(atoms: Vec<Atom>, segments: Vec<Segment>) -> Result<Self> {
        for (i, a) in atoms.iter().enumerate() {
            if !(a.location.is_finite() && a.weight.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "atom {i} is not finite: ({}, {})",
                    a.location, a.weight
                )));
            }
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.left.is_finite() && s.right.is_finite() && s.slope.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "segment {i} is not finite: ({}, {}, {})",
                    s.left, s.right, s.slope
                )));
            }
            if s.left >= s.right {
                return Err(Error::InvalidInput(format!(
                    "segment {i} needs left < right, got [{}, {}]",
                    s.left, s.right
                )));
            }
        }
        Ok(Self {
            atoms: normalize_atoms(atoms),
            segments: normalize_segments(segments),
        })
    }

    /// Builds from `(location, weight)` and `(left, right, slope)` tuples.
    pub fn from_parts(atoms: &[(f64, f64)], segments: &[(f64, f64, f64)]) -> Result<Self> {
        Self::new(
            atoms
                .iter()
                .map(|&(location, weight)| Atom { location, weight })
                .collect(),
            segments
                .iter()
                .map(|&(left, right, slope)| Segment { left, right, slope })
                .collect(),
        )
    }

    /// `weight · 1_{[location, ∞)}`.
    ///
    /// Panics if either argument is not finite.
    pub fn step(location: f64, weight: f64) -> Self {
        Self::from_parts(&[(location, weight)], &[]).expect("finite step")
    }

    /// Constant density `slope` on `[left, right]`.
    ///
    /// Panics unless `left < right` and all values are finite.
    pub fn ramp(left: f64, right: f64, slope: f64) -> Self {
        Self::from_parts(&[], &[(left, right, slope)]).expect("valid ramp")
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.segments.is_empty()
    }

    pub fn is_purely_atomic(&self) -> bool {
        self.segments.is_empty()
    }

    /// `G(x)`, right-continuous.
    pub fn eval(&self, x: f64) -> f64 {
        let jumps: f64 = self
            .atoms
            .iter()
            .take_while(|a| a.location <= x)
            .map(|a| a.weight)
            .sum();
        let cont: f64 = self
            .segments
            .iter()
            .take_while(|s| s.left < x)
            .map(|s| s.slope * s.covered(x))
            .sum();
        jumps + cont
    }

    /// `‖G‖`, the total variation on the whole line.
    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight.abs()).sum::<f64>()
            + self.segments.iter().map(|s| s.mass().abs()).sum::<f64>()
    }

    /// `|G|(x)`, the total variation on `(−∞, x]`.
    pub fn variation_function(&self, x: f64) -> f64 {
        let jumps: f64 = self
            .atoms
            .iter()
            .take_while(|a| a.location <= x)
            .map(|a| a.weight.abs())
            .sum();
        let cont: f64 = self
            .segments
            .iter()
            .take_while(|s| s.left < x)
            .map(|s| s.slope.abs() * s.covered(x))
            .sum();
        jumps + cont
    }

    /// `G(+∞)`.
    pub fn limit_at_infinity(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum::<f64>()
            + self.segments.iter().map(Segment::mass).sum::<f64>()
    }

    pub fn hahn_jordan(&self) -> JordanPair {
        let split = |sign: f64| PiecewiseBV {
            atoms: self
                .atoms
                .iter()
                .filter(|a| a.weight * sign > 0.0)
                .map(|a| Atom {
                    location: a.location,
                    weight: a.weight.abs(),
                })
                .collect(),
            segments: self
                .segments
                .iter()
                .filter(|s| s.slope * sign > 0.0)
                .map(|s| Segment {
                    slope: s.slope.abs(),
                    ..*s
                })
                .collect(),
        };
        JordanPair {
            positive_part: split(1.0),
            negative_part: split(-1.0),
        }
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.atoms.iter().all(|a| a.weight > 0.0) && self.segments.iter().all(|s| s.slope > 0.0)
    }

    /// `c · G`.
    pub fn scaled(&self, c: f64) -> Self {
        combine(c, self, 0.0, &PiecewiseBV::zero())
    }

    /// Smallest closed interval containing every atom and segment.
    pub fn support_hull(&self) -> Option<(f64, f64)> {
        let lo = self
            .atoms
            .first()
            .map(|a| a.location)
            .into_iter()
            .chain(self.segments.first().map(|s| s.left))
            .reduce(f64::min)?;
        let hi = self
            .atoms
            .last()
            .map(|a| a.location)
            .into_iter()
            .chain(self.segments.last().map(|s| s.right))
            .reduce(f64::max)?;
        Some((lo, hi))
    }

    pub fn has_atom_at(&self, x: f64) -> bool {
        self.atoms.iter().any(|a| a.location == x)
    }
}

impl JordanPair {
    /// Recombines `positive_part − negative_part`.
    pub fn recombine(&self) -> PiecewiseBV {
        combine(1.0, &self.positive_part, -1.0, &self.negative_part)
    }
}

/// `a·G + b·H`, exactly.
pub fn combine(a: f64, g: &PiecewiseBV, b: f64, h: &PiecewiseBV) -> PiecewiseBV {
    let mut atoms = Vec::with_capacity(g.atoms.len() + h.atoms.len());
    let mut segments = Vec::with_capacity(g.segments.len() + h.segments.len());
    for (c, f) in [(a, g), (b, h)] {
        if c == 0.0 {
            continue;
        }
        atoms.extend(f.atoms.iter().map(|x| Atom {
            location: x.location,
            weight: c * x.weight,
        }));
        segments.extend(f.segments.iter().map(|s| Segment {
            slope: c * s.slope,
            ..*s
        }));
    }
    PiecewiseBV {
        atoms: normalize_atoms(atoms),
        segments: normalize_segments(segments),
    }
}

/// `∫ h dG` over the line: atoms are summed exactly and each segment's
/// `slope · ∫ h` goes through adaptive quadrature.
///
/// On quadrature failure the error carries the partial total.
pub fn stieltjes_integral<H>(g: &PiecewiseBV, h: H, quad: &QuadratureSettings) -> Result<Estimate>
where
    H: Fn(f64) -> Complex64,
{
    stieltjes_with(g, &h, quad, |l, r, local| integrate(&h, l, r, local))
}

fn stieltjes_with<H, I>(g: &PiecewiseBV, h: &H, quad: &QuadratureSettings, integrate: I) -> Result<Estimate>
where
    H: Fn(f64) -> Complex64,
    I: Fn(f64, f64, &QuadratureSettings) -> Result<Estimate>,
{
    let mut total = Estimate {
        value: g.atoms.iter().map(|a| a.weight * h(a.location)).sum(),
        error: 0.0,
    };
    let n = g.segments.len().max(1) as f64;
    let mut failed = false;
    for s in &g.segments {
        let local = QuadratureSettings {
            tol: quad.tol / (n * s.slope.abs()),
            ..*quad
        };
        let part = match integrate(s.left, s.right, &local) {
            Ok(e) => e,
            Err(Error::QuadratureDiverged {
                partial,
                error_estimate,
                ..
            }) => {
                failed = true;
                Estimate {
                    value: partial,
                    error: error_estimate,
                }
            }
            Err(e) => return Err(e),
        };
        total = total
            + Estimate {
                value: s.slope * part.value,
                error: s.slope.abs() * part.error,
            };
    }
    if failed {
        let (a, b) = g.support_hull().unwrap_or((0.0, 0.0));
        return Err(Error::QuadratureDiverged {
            a,
            b,
            max_depth: quad.max_depth,
            partial: total.value,
            error_estimate: total.error,
        });
    }
    Ok(total)
}

/// Real-valued test function convenience wrapper.
pub fn stieltjes_integral_real<H>(g: &PiecewiseBV, h: H, quad: &QuadratureSettings) -> Result<f64>
where
    H: Fn(f64) -> f64,
{
    stieltjes_integral(g, |x| Complex64::new(h(x), 0.0), quad).map(|e| e.value.re)
}

fn normalize_atoms(mut atoms: Vec<Atom>) -> Vec<Atom> {
    atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match out.last_mut() {
            Some(last) if last.location == a.location => last.weight += a.weight,
            _ => out.push(a),
        }
    }
    out.retain(|a| a.weight != 0.0);
    out
}

fn normalize_segments(mut segments: Vec<Segment>) -> Vec<Segment> {
    segments.retain(|s| s.slope != 0.0);
    if segments.is_empty() {
        return segments;
    }
    segments.sort_by(|a, b| a.left.total_cmp(&b.left).then(a.right.total_cmp(&b.right)));
    let disjoint = segments.windows(2).all(|w| w[0].right <= w[1].left);
    let pieces = if disjoint {
        segments
    } else {
        split_overlaps(&segments)
    };
    let mut out: Vec<Segment> = Vec::with_capacity(pieces.len());
    for s in pieces {
        match out.last_mut() {
            Some(last) if last.right == s.left && last.slope == s.slope => last.right = s.right,
            _ => out.push(s),
        }
    }
    out
}

/// Elementary-interval sweep; slopes of the segments covering each piece are
/// summed directly so that exact cancellations stay exact.
fn split_overlaps(sorted: &[Segment]) -> Vec<Segment> {
    let mut points: Vec<f64> = sorted.iter().flat_map(|s| [s.left, s.right]).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut out = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    let mut next = 0;
    for w in points.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        active.retain(|&i| sorted[i].right > lo);
        while next < sorted.len() && sorted[next].left <= lo {
            if sorted[next].right > lo {
                active.push(next);
            }
            next += 1;
        }
        let slope: f64 = active.iter().map(|&i| sorted[i].slope).sum();
        if slope != 0.0 {
            out.push(Segment {
                left: lo,
                right: hi,
                slope,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn example1(n: f64) -> PiecewiseBV {
        combine(1.0, &PiecewiseBV::step(n, 1.0), -1.0, &PiecewiseBV::step(n + 1.0, 1.0))
    }

    fn example2(n: f64) -> PiecewiseBV {
        PiecewiseBV::from_parts(&[(0.0, n), (1.0 / (n * n), -n)], &[]).unwrap()
    }

    fn example4(n: f64) -> PiecewiseBV {
        PiecewiseBV::ramp(-n, n, 1.0 / n)
    }

    #[test]
    fn eval_examples() {
        let g = example1(3.0);
        assert_eq!(g.eval(3.5), 1.0);
        assert_eq!(g.eval(4.0), 0.0);
        assert_eq!(g.eval(3.0), 1.0);
        assert_eq!(g.eval(2.999), 0.0);
        assert_eq!(PiecewiseBV::zero().eval(17.0), 0.0);
        assert_eq!(example4(2.0).eval(0.0), 1.0);
        assert_eq!(example4(2.0).eval(5.0), 2.0);
        assert_eq!(example4(2.0).eval(-2.0), 0.0);
    }

    #[test]
    fn total_variation_examples() {
        for n in 1..=20 {
            assert_eq!(example1(n as f64).total_variation(), 2.0);
            assert_eq!(example2(n as f64).total_variation(), 2.0 * n as f64);
        }
        assert_eq!(PiecewiseBV::zero().total_variation(), 0.0);
    }

    #[test]
    fn variation_function_examples() {
        assert_eq!(example1(3.0).variation_function(3.5), 1.0);
        assert_eq!(example2(2.0).variation_function(10.0), 4.0);
        let g = PiecewiseBV::from_parts(&[(0.5, 0.25)], &[(-1.0, 1.0, 0.5)]).unwrap();
        for x in [-2.0, -0.3, 0.5, 0.7, 3.0] {
            assert_eq!(g.variation_function(x), g.eval(x));
        }
    }

    #[test]
    fn limit_at_infinity_examples() {
        assert_eq!(example1(7.0).limit_at_infinity(), 0.0);
        assert_eq!(example4(5.0).limit_at_infinity(), 2.0);
        let g = PiecewiseBV::from_parts(&[(0.5, 0.25)], &[(-1.0, 1.0, 0.5)]).unwrap();
        assert_eq!(g.limit_at_infinity(), g.total_variation());
    }

    #[test]
    fn hahn_jordan_examples() {
        let hj = example1(1.0).hahn_jordan();
        assert_eq!(hj.positive_part, PiecewiseBV::step(1.0, 1.0));
        assert_eq!(hj.negative_part, PiecewiseBV::step(2.0, 1.0));

        let g = PiecewiseBV::from_parts(&[(0.0, 2.0)], &[(1.0, 2.0, 0.5)]).unwrap();
        assert!(g.hahn_jordan().negative_part.is_zero());

        let hj = example2(3.0).hahn_jordan();
        assert_eq!(hj.positive_part.limit_at_infinity(), 3.0);
        assert_eq!(hj.negative_part.limit_at_infinity(), 3.0);
    }

    #[test]
    fn combine_examples() {
        let g = example2(3.0);
        assert!(combine(1.0, &g, -1.0, &g).is_zero());

        let h = PiecewiseBV::step(0.0, 1.0);
        assert_eq!(combine(1.0, &h, 1.0, &h), PiecewiseBV::step(0.0, 2.0));

        let sum = combine(1.0, &example1(1.0), 1.0, &example1(2.0));
        assert_eq!(sum, PiecewiseBV::from_parts(&[(1.0, 1.0), (3.0, -1.0)], &[]).unwrap());
    }

    #[test]
    fn overlapping_segments_are_split() {
        let g = PiecewiseBV::from_parts(&[], &[(0.0, 2.0, 1.0), (1.0, 3.0, 2.0)]).unwrap();
        assert_eq!(
            g.segments(),
            &[
                Segment { left: 0.0, right: 1.0, slope: 1.0 },
                Segment { left: 1.0, right: 2.0, slope: 3.0 },
                Segment { left: 2.0, right: 3.0, slope: 2.0 },
            ]
        );
        assert_eq!(g.eval(2.5), 1.0 + 3.0 + 1.0);
        let back = combine(1.0, &g, -1.0, &PiecewiseBV::ramp(1.0, 3.0, 2.0));
        assert_eq!(back, PiecewiseBV::ramp(0.0, 2.0, 1.0));
    }

    #[test]
    fn adjacent_equal_slopes_merge() {
        let g = PiecewiseBV::from_parts(&[], &[(0.0, 1.0, 0.5), (1.0, 2.0, 0.5)]).unwrap();
        assert_eq!(g, PiecewiseBV::ramp(0.0, 2.0, 0.5));
    }

    #[test]
    fn construction_rejects_bad_segments() {
        assert!(PiecewiseBV::from_parts(&[], &[(1.0, 1.0, 1.0)]).is_err());
        assert!(PiecewiseBV::from_parts(&[(f64::NAN, 1.0)], &[]).is_err());
    }

    #[test]
    fn stieltjes_examples() {
        let q = QuadratureSettings::default();
        for n in 1..=12 {
            let v = stieltjes_integral_real(&example1(n as f64), |x| (PI * x).cos(), &q).unwrap();
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert!((v - 2.0 * sign).abs() < 1e-12);
        }
        let hat = |x: f64| {
            if (0.0..=1.0).contains(&x) {
                x.sqrt()
            } else if (1.0..=2.0).contains(&x) {
                (2.0 - x).sqrt()
            } else {
                0.0
            }
        };
        for n in 1..=12 {
            let v = stieltjes_integral_real(&example2(n as f64), hat, &q).unwrap();
            assert!((v + 1.0).abs() < 1e-10);
        }
        let g = PiecewiseBV::from_parts(&[(0.3, -0.7)], &[(-2.0, 1.5, 0.4)]).unwrap();
        let v = stieltjes_integral_real(&g, |_| 1.0, &q).unwrap();
        assert!((v - g.limit_at_infinity()).abs() < 1e-12);
    }
}
