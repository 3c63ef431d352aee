//! Verdicts, statistic traces and their finite-sample classification.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::fourier::TransformSamples;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Confirmed,
    Refuted,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Confirmed => "confirmed",
            Verdict::Refuted => "refuted",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Undetermined,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Undetermined => "undetermined",
        })
    }
}

/// One statistic tracked over the realized indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestTrace {
    pub name: String,
    pub indices: Vec<u64>,
    pub values: Vec<f64>,
    pub threshold: f64,
    pub outcome: Outcome,
    /// Fitted exponent `p` of `value ~ n^p` on the late half of the trace.
    pub decay_exponent: Option<f64>,
    pub witness: Option<String>,
    /// Whether the outcome enters the verdict.
    pub gating: bool,
}

impl TestTrace {
    /// A trace that should tend to 0.
    pub fn decay(name: impl Into<String>, indices: Vec<u64>, values: Vec<f64>, tol: f64) -> Self {
        let (outcome, decay_exponent) = classify_decay(&indices, &values, tol);
        Self {
            name: name.into(),
            indices,
            values,
            threshold: tol,
            outcome,
            decay_exponent,
            witness: None,
            gating: true,
        }
    }

    /// A trace that should stay bounded.
    pub fn bounded(name: impl Into<String>, indices: Vec<u64>, values: Vec<f64>) -> Self {
        let (outcome, exponent) = classify_growth(&indices, &values);
        Self {
            name: name.into(),
            indices,
            values,
            threshold: f64::NAN,
            outcome,
            decay_exponent: exponent,
            witness: None,
            gating: true,
        }
    }

    pub fn informational(mut self) -> Self {
        self.gating = false;
        self
    }

    pub fn with_witness(mut self, witness: impl Into<String>) -> Self {
        self.witness = Some(witness.into());
        self
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }
}

/// Exponent at or below which a positive trace counts as decaying.
pub const DECAY_EXPONENT: f64 = -0.25;
/// Exponent at or above which a trace counts as flat.
pub const STAGNANT_EXPONENT: f64 = -0.05;
pub const BOUNDED_EXPONENT: f64 = 0.1;
pub const UNBOUNDED_EXPONENT: f64 = 0.5;

/// Classifies the tail-supremum envelope of `|values|`.
pub fn classify_decay(indices: &[u64], values: &[f64], tol: f64) -> (Outcome, Option<f64>) {
    let env = envelope(values);
    let exponent = fit_exponent(indices, &env);
    match env.last() {
        None => (Outcome::Undetermined, None),
        Some(&v) if v <= tol => (Outcome::Pass, exponent),
        Some(&v) if !v.is_finite() => (Outcome::Fail, exponent),
        _ => match exponent {
            Some(p) if p <= DECAY_EXPONENT => (Outcome::Pass, exponent),
            Some(p) if p >= STAGNANT_EXPONENT => (Outcome::Fail, exponent),
            _ => (Outcome::Undetermined, exponent),
        },
    }
}

pub fn classify_growth(indices: &[u64], values: &[f64]) -> (Outcome, Option<f64>) {
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    if abs.iter().any(|v| !v.is_finite()) {
        return (Outcome::Fail, None);
    }
    if abs.windows(2).all(|w| w[0] == w[1]) {
        return (Outcome::Pass, Some(0.0));
    }
    match fit_exponent(indices, &abs) {
        Some(p) if p <= BOUNDED_EXPONENT => (Outcome::Pass, Some(p)),
        Some(p) if p >= UNBOUNDED_EXPONENT => (Outcome::Fail, Some(p)),
        p => (Outcome::Undetermined, p),
    }
}

/// `e_k = max_{j ≥ k} |v_j|`.
pub fn envelope(values: &[f64]) -> Vec<f64> {
    let mut env = vec![0.0; values.len()];
    let mut run: f64 = 0.0;
    for (k, v) in values.iter().enumerate().rev() {
        run = if v.is_nan() { f64::NAN } else { run.max(v.abs()) };
        env[k] = run;
    }
    env
}

/// Least-squares slope of `ln v` against `ln n` over the late half of the
/// positive entries; `None` with fewer than three usable points.
pub fn fit_exponent(indices: &[u64], values: &[f64]) -> Option<f64> {
    let start = values.len() / 2;
    let pts: Vec<(f64, f64)> = indices[start..]
        .iter()
        .zip(&values[start..])
        .filter(|(_, v)| **v > 0.0 && v.is_finite())
        .map(|(&n, &v)| ((n as f64).ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedSamples {
    pub name: String,
    pub index: Option<u64>,
    pub samples: TransformSamples,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub title: String,
    pub verdict: Verdict,
    pub tests: Vec<TestTrace>,
    pub hypothesis_checks: BTreeMap<String, f64>,
    pub routes: BTreeMap<String, Verdict>,
    pub notes: Vec<String>,
    pub transforms: Vec<NamedSamples>,
}

impl ConvergenceReport {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            verdict: Verdict::Inconclusive,
            tests: Vec::new(),
            hypothesis_checks: BTreeMap::new(),
            routes: BTreeMap::new(),
            notes: Vec::new(),
            transforms: Vec::new(),
        }
    }

    pub fn test(&self, name: &str) -> Option<&TestTrace> {
        self.tests.iter().find(|t| t.name == name)
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// First failing gating test, if any.
    pub fn first_failure(&self) -> Option<&TestTrace> {
        self.tests.iter().find(|t| t.gating && t.outcome == Outcome::Fail)
    }

    /// Confirmed if every gating test passes, refuted if one fails with a
    /// witness, inconclusive otherwise.
    pub fn aggregate_gating(&self) -> Verdict {
        let gating = self.tests.iter().filter(|t| t.gating);
        let mut all_pass = true;
        for t in gating {
            match t.outcome {
                Outcome::Fail if t.witness.is_some() => return Verdict::Refuted,
                Outcome::Pass => {}
                _ => all_pass = false,
            }
        }
        if all_pass {
            Verdict::Confirmed
        } else {
            Verdict::Inconclusive
        }
    }

    /// Human-readable rendering.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("== {} ==\nverdict: {}\n", self.title, self.verdict));
        for (route, v) in &self.routes {
            out.push_str(&format!("route {route}: {v}\n"));
        }
        for t in &self.tests {
            out.push_str(&format!(
                "test {}{}: {}",
                t.name,
                if t.gating { "" } else { " (informational)" },
                t.outcome
            ));
            if let Some(p) = t.decay_exponent {
                out.push_str(&format!(", exponent {p:.3}"));
            }
            if t.threshold.is_finite() {
                out.push_str(&format!(", threshold {:e}", t.threshold));
            }
            out.push('\n');
            let trace: Vec<String> = t
                .indices
                .iter()
                .zip(&t.values)
                .map(|(n, v)| format!("{n}:{v:.6e}"))
                .collect();
            out.push_str(&format!("  trace {}\n", trace.join(" ")));
            if let Some(w) = &t.witness {
                out.push_str(&format!("  witness {w}\n"));
            }
        }
        for (k, v) in &self.hypothesis_checks {
            out.push_str(&format!("check {k} = {v}\n"));
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dyadic(k: u32) -> Vec<u64> {
        (0..k).map(|j| 1u64 << j).collect()
    }

    #[test]
    fn power_law_decay_passes() {
        let idx = dyadic(9);
        let v: Vec<f64> = idx.iter().map(|&n| 3.0 / n as f64).collect();
        let (o, p) = classify_decay(&idx, &v, 1e-6);
        assert_eq!(o, Outcome::Pass);
        assert!((p.unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn alternating_trace_is_stagnant() {
        let idx = dyadic(9);
        let v: Vec<f64> = idx.iter().map(|&n| if n % 2 == 0 { 2.0 } else { -2.0 }).collect();
        assert_eq!(classify_decay(&idx, &v, 1e-6).0, Outcome::Fail);
    }

    #[test]
    fn exact_zero_tail_passes() {
        let idx = dyadic(9);
        let mut v = vec![1.0; 9];
        v[8] = 0.0;
        v[7] = 0.0;
        assert_eq!(classify_decay(&idx, &v, 1e-6).0, Outcome::Pass);
    }

    #[test]
    fn slow_decay_is_undetermined() {
        let idx = dyadic(9);
        let v: Vec<f64> = idx.iter().map(|&n| (n as f64).powf(-0.15)).collect();
        assert_eq!(classify_decay(&idx, &v, 1e-6).0, Outcome::Undetermined);
    }

    #[test]
    fn growth_classes() {
        let idx = dyadic(9);
        let lin: Vec<f64> = idx.iter().map(|&n| 2.0 * n as f64).collect();
        assert_eq!(classify_growth(&idx, &lin).0, Outcome::Fail);
        assert_eq!(classify_growth(&idx, &[2.0; 9]).0, Outcome::Pass);
        assert_eq!(classify_growth(&idx, &[0.0; 9]).0, Outcome::Pass);
    }

    #[test]
    fn envelope_is_tail_sup() {
        assert_eq!(envelope(&[1.0, -3.0, 0.5, 0.25]), vec![3.0, 3.0, 0.5, 0.25]);
    }
}
