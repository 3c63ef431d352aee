//! Declarative descriptions of sequences of spectral pairs.
//!
//! The text form is TOML:
//!
//! ```toml
//! schema_version = 1
//! family = "atom_drift"
//! indices = [1, 2, 4, 8]
//!
//! [params]
//! weight = 0.5
//!
//! [[explicit]]          # only for family = "custom", one per index
//! gamma = 0.0
//! tau = 1.0
//! atoms = [[1.0, 0.5]]
//! segments = [[-1.0, 1.0, 0.25]]
//!
//! [limit]               # optional, same shape as an explicit entry
//! ```

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bv::{combine, PiecewiseBV};
use crate::error::{Error, Result};
use crate::levy_khinchine::SpectralPair;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Example1,
    Example2,
    Example3,
    Example4,
    AtomDrift,
    QidRatio,
    Poisson,
    Custom,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Example1 => "example1",
            Family::Example2 => "example2",
            Family::Example3 => "example3",
            Family::Example4 => "example4",
            Family::AtomDrift => "atom_drift",
            Family::QidRatio => "qid_ratio",
            Family::Poisson => "poisson",
            Family::Custom => "custom",
        }
    }

    /// Parameters the family accepts, with defaults.
    pub fn params(self) -> &'static [(&'static str, f64)] {
        match self {
            Family::Example1 | Family::Example2 | Family::Example3 | Family::Example4 => {
                &[("gamma", 0.0), ("tau", 1.0)]
            }
            Family::AtomDrift => &[
                ("weight", 0.5),
                ("location", 1.0),
                ("gamma", 0.0),
                ("tau", 1.0),
            ],
            Family::Poisson => &[("lambda", 1.0), ("shift", 0.0), ("tau", 1.0)],
            Family::QidRatio => &[
                ("lambda1", 1.0),
                ("lambda2", 0.25),
                ("shift", 0.0),
                ("tau", 1.0),
            ],
            Family::Custom => &[],
        }
    }
}

/// One spectral pair written out in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitPair {
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub atoms: Vec<[f64; 2]>,
    #[serde(default)]
    pub segments: Vec<[f64; 3]>,
}

fn default_tau() -> f64 {
    1.0
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

impl ExplicitPair {
    pub fn to_pair(&self) -> Result<SpectralPair> {
        let atoms: Vec<(f64, f64)> = self.atoms.iter().map(|a| (a[0], a[1])).collect();
        let segments: Vec<(f64, f64, f64)> = self.segments.iter().map(|s| (s[0], s[1], s[2])).collect();
        SpectralPair::new(self.gamma, PiecewiseBV::from_parts(&atoms, &segments)?, self.tau)
    }

    pub fn from_pair(pair: &SpectralPair) -> Self {
        Self {
            gamma: pair.gamma,
            tau: pair.tau,
            atoms: pair.g.atoms().iter().map(|a| [a.location, a.weight]).collect(),
            segments: pair
                .g
                .segments()
                .iter()
                .map(|s| [s.left, s.right, s.slope])
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub family: Family,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub indices: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<Vec<ExplicitPair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<ExplicitPair>,
}

/// Realized indices with their spectral functions.
#[derive(Debug, Clone, PartialEq)]
pub struct BvSequence {
    pub indices: Vec<u64>,
    pub elements: Vec<PiecewiseBV>,
}

impl BvSequence {
    pub fn new(indices: Vec<u64>, elements: Vec<PiecewiseBV>) -> Result<Self> {
        check_indices(&indices)?;
        if indices.len() != elements.len() {
            return Err(Error::InvalidInput(format!(
                "{} indices but {} elements",
                indices.len(),
                elements.len()
            )));
        }
        Ok(Self { indices, elements })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn last(&self) -> &PiecewiseBV {
        self.elements.last().expect("nonempty")
    }
}

/// Realized indices with their spectral pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct QidSequence {
    pub indices: Vec<u64>,
    pub pairs: Vec<SpectralPair>,
}

impl QidSequence {
    pub fn new(indices: Vec<u64>, pairs: Vec<SpectralPair>) -> Result<Self> {
        check_indices(&indices)?;
        if indices.len() != pairs.len() {
            return Err(Error::InvalidInput(format!(
                "{} indices but {} pairs",
                indices.len(),
                pairs.len()
            )));
        }
        Ok(Self { indices, pairs })
    }

    pub fn spectral_functions(&self) -> BvSequence {
        BvSequence {
            indices: self.indices.clone(),
            elements: self.pairs.iter().map(|p| p.g.clone()).collect(),
        }
    }

    pub fn last(&self) -> &SpectralPair {
        self.pairs.last().expect("nonempty")
    }
}

fn check_indices(indices: &[u64]) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::InvalidInput("indices must be nonempty".into()));
    }
    if indices[0] == 0 {
        return Err(Error::InvalidInput("indices start at 1".into()));
    }
    if let Some(i) = indices.windows(2).position(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(format!(
            "indices must be strictly increasing: indices[{}] = {} follows {}",
            i + 1,
            indices[i + 1],
            indices[i]
        )));
    }
    Ok(())
}

/// `1, 2, 4, …, 256`.
pub fn default_indices() -> Vec<u64> {
    (0..=8).map(|k| 1u64 << k).collect()
}

/// Example 1: `1_{[n,∞)} − 1_{[n+1,∞)}`.
pub fn example1(n: u64) -> PiecewiseBV {
    let n = n as f64;
    PiecewiseBV::from_parts(&[(n, 1.0), (n + 1.0, -1.0)], &[]).expect("finite")
}

/// Example 2: `n·1_{[0,∞)} − n·1_{[1/n²,∞)}`.
pub fn example2(n: u64) -> PiecewiseBV {
    let n = n as f64;
    PiecewiseBV::from_parts(&[(0.0, n), (1.0 / (n * n), -n)], &[]).expect("finite")
}

/// Example 3: `1_{[a_n,∞)} − 1_{[b_n,∞)}` with dyadic `a_n, b_n` sweeping `[0, 1]`.
pub fn example3(n: u64) -> PiecewiseBV {
    let (a, b) = example3_interval(n);
    PiecewiseBV::from_parts(&[(a, 1.0), (b, -1.0)], &[]).expect("finite")
}

/// `(a_n, b_n)` with `2^{k_n} ≤ n < 2^{k_n+1}`.
pub fn example3_interval(n: u64) -> (f64, f64) {
    assert!(n >= 1, "example 3 starts at n = 1");
    let k = 63 - n.leading_zeros();
    let p = (1u64 << k) as f64;
    let n = n as f64;
    ((n - p) / p, (n + 1.0 - p) / p)
}

/// Example 4: `0` left of `−n`, `1 + x/n` on `[−n, n]`, `2` right of `n`.
pub fn example4(n: u64) -> PiecewiseBV {
    let n = n as f64;
    PiecewiseBV::ramp(-n, n, 1.0 / n)
}

impl ScenarioSpec {
    pub fn new(family: Family, indices: Vec<u64>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            family,
            params: BTreeMap::new(),
            indices,
            explicit: None,
            limit: None,
        }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_scenario(text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Scenario(format!("cannot serialize: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Scenario(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        check_indices(&self.indices).map_err(|e| Error::Scenario(format!("field `indices`: {e}")))?;
        let allowed = self.family.params();
        for (name, value) in &self.params {
            if !allowed.iter().any(|(p, _)| p == name) {
                let names: Vec<&str> = allowed.iter().map(|(p, _)| *p).collect();
                return Err(Error::Scenario(format!(
                    "field `params.{name}` is not a parameter of family `{}` (accepted: [{}])",
                    self.family.name(),
                    names.join(", ")
                )));
            }
            if !value.is_finite() {
                return Err(Error::Scenario(format!("field `params.{name}` must be finite")));
            }
        }
        if self.param("tau") <= 0.0 {
            return Err(Error::Scenario("field `params.tau` must be positive".into()));
        }
        match (&self.explicit, self.family) {
            (None, Family::Custom) => {
                return Err(Error::Scenario("family `custom` requires `explicit` entries".into()))
            }
            (Some(list), Family::Custom) if list.len() != self.indices.len() => {
                return Err(Error::Scenario(format!(
                    "family `custom` has {} explicit entries for {} indices",
                    list.len(),
                    self.indices.len()
                )))
            }
            (Some(_), f) if f != Family::Custom => {
                return Err(Error::Scenario(format!(
                    "`explicit` entries are only allowed for family `custom`, not `{}`",
                    f.name()
                )))
            }
            _ => {}
        }
        for (i, e) in self.explicit.iter().flatten().enumerate() {
            e.to_pair()
                .map_err(|err| Error::Scenario(format!("entry explicit[{i}]: {err}")))?;
        }
        if let Some(l) = &self.limit {
            l.to_pair().map_err(|err| Error::Scenario(format!("entry `limit`: {err}")))?;
        }
        Ok(())
    }

    /// Parameter value or the family default.
    pub fn param(&self, name: &str) -> f64 {
        self.params.get(name).copied().unwrap_or_else(|| {
            self.family
                .params()
                .iter()
                .find(|(p, _)| *p == name)
                .map_or(if name == "tau" { 1.0 } else { 0.0 }, |(_, d)| *d)
        })
    }

    fn family_pair(&self, n: u64) -> Result<SpectralPair> {
        let tau = self.param("tau");
        let gamma = self.param("gamma");
        match self.family {
            Family::Example1 => SpectralPair::new(gamma, example1(n), tau),
            Family::Example2 => SpectralPair::new(gamma, example2(n), tau),
            Family::Example3 => SpectralPair::new(gamma, example3(n), tau),
            Family::Example4 => SpectralPair::new(gamma, example4(n), tau),
            Family::AtomDrift => {
                let loc = self.param("location") + 1.0 / n as f64;
                SpectralPair::new(
                    gamma + 1.0 / n as f64,
                    PiecewiseBV::from_parts(&[(loc, self.param("weight"))], &[])?,
                    tau,
                )
            }
            Family::Poisson => {
                let p = SpectralPair::poisson(self.param("lambda"), tau)?;
                SpectralPair::new(p.gamma + self.param("shift"), p.g, tau)
            }
            Family::QidRatio => {
                let p = SpectralPair::qid_ratio(self.param("lambda1"), self.param("lambda2"), tau)?;
                SpectralPair::new(p.gamma + self.param("shift"), p.g, tau)
            }
            Family::Custom => {
                let pos = self.indices.iter().position(|&m| m == n).ok_or_else(|| {
                    Error::Scenario(format!("index {n} is not listed in `indices`"))
                })?;
                let list = self
                    .explicit
                    .as_ref()
                    .ok_or_else(|| Error::Scenario("family `custom` requires `explicit`".into()))?;
                list[pos].to_pair()
            }
        }
    }

    pub fn realize_pairs(&self) -> Result<QidSequence> {
        self.validate()?;
        let pairs = self
            .indices
            .iter()
            .map(|&n| self.family_pair(n))
            .collect::<Result<Vec<_>>>()?;
        QidSequence::new(self.indices.clone(), pairs)
    }

    pub fn realize_bv(&self) -> Result<BvSequence> {
        Ok(self.realize_pairs()?.spectral_functions())
    }

    /// Closed-form limit pair of the family, or the declared `limit`.
    ///
    /// For Examples 1–4 this is the basic limit `(γ, 0)`.
    pub fn limit_pair(&self) -> Result<Option<SpectralPair>> {
        self.validate()?;
        if let Some(l) = &self.limit {
            return l.to_pair().map(Some);
        }
        let tau = self.param("tau");
        let gamma = self.param("gamma");
        Ok(match self.family {
            Family::Example1 | Family::Example2 | Family::Example3 | Family::Example4 => {
                Some(SpectralPair::new(gamma, PiecewiseBV::zero(), tau)?)
            }
            Family::AtomDrift => Some(SpectralPair::new(
                gamma,
                PiecewiseBV::step(self.param("location"), self.param("weight")),
                tau,
            )?),
            Family::Poisson | Family::QidRatio => Some(self.family_pair(1)?),
            Family::Custom => None,
        })
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioSpec> {
    if text.trim().is_empty() {
        return Err(Error::Scenario("empty scenario document".into()));
    }
    let spec: ScenarioSpec = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

/// A random convergent sequence with bounded negative part: positive atoms,
/// one negative atom and a positive segment, all drifting like `1/n`, with
/// the limit recorded in `limit`.
pub fn random_bnp_scenario(seed: u64) -> Result<ScenarioSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = 1.0;
    let gamma = rng.gen_range(-1.0..1.0);
    let k = rng.gen_range(2..=4);
    let mut atoms: Vec<(f64, f64)> = (0..k)
        .map(|_| (rng.gen_range(-3.0..3.0), rng.gen_range(0.05..0.5)))
        .collect();
    atoms.push((rng.gen_range(0.5..3.0), -rng.gen_range(0.01..0.1)));
    let segment = (rng.gen_range(-2.0..0.0), rng.gen_range(0.1..0.3));
    let indices = default_indices();
    let pair_at = |n: f64| -> Result<SpectralPair> {
        let moved: Vec<(f64, f64)> = atoms.iter().map(|&(x, w)| (x + 1.0 / n, w)).collect();
        let seg = [(segment.0, segment.0 + 1.0, segment.1 * (1.0 + 1.0 / n))];
        SpectralPair::new(gamma + 0.5 / n, PiecewiseBV::from_parts(&moved, &seg)?, tau)
    };
    let explicit = indices
        .iter()
        .map(|&n| pair_at(n as f64).map(|p| ExplicitPair::from_pair(&p)))
        .collect::<Result<Vec<_>>>()?;
    let limit = ExplicitPair::from_pair(&SpectralPair::new(
        gamma,
        PiecewiseBV::from_parts(&atoms, &[(segment.0, segment.0 + 1.0, segment.1)])?,
        tau,
    )?);
    let mut spec = ScenarioSpec::new(Family::Custom, indices);
    spec.explicit = Some(explicit);
    spec.limit = Some(limit);
    spec.validate()?;
    Ok(spec)
}

/// `a·G + b·H` over two realized sequences with equal indices.
pub fn combine_sequences(a: f64, g: &BvSequence, b: f64, h: &BvSequence) -> Result<BvSequence> {
    if g.indices != h.indices {
        return Err(Error::InvalidInput("sequences have different indices".into()));
    }
    BvSequence::new(
        g.indices.clone(),
        g.elements
            .iter()
            .zip(&h.elements)
            .map(|(x, y)| combine(a, x, b, y))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example2_scenario() {
        let s = parse_scenario("family = \"example2\"\nindices = [1, 2, 4]\n").unwrap();
        let seq = s.realize_bv().unwrap();
        for (n, g) in seq.indices.iter().zip(&seq.elements) {
            assert_eq!(*g, example2(*n));
            let nf = *n as f64;
            assert_eq!(g.atoms()[1].location, 1.0 / (nf * nf));
            assert_eq!(g.atoms()[0].weight, nf);
        }
    }

    #[test]
    fn custom_singleton() {
        let text = r#"
schema_version = 1
family = "custom"
indices = [1]

[[explicit]]
gamma = 0.3
atoms = [[1.0, 0.5]]
"#;
        let s = parse_scenario(text).unwrap();
        let seq = s.realize_pairs().unwrap();
        assert_eq!(seq.pairs.len(), 1);
        assert_eq!(seq.pairs[0].gamma, 0.3);
        assert_eq!(seq.pairs[0].tau, 1.0);
    }

    #[test]
    fn poisson_scenario() {
        let s = parse_scenario("family = \"poisson\"\nindices = [1]\n[params]\nlambda = 1.0\n").unwrap();
        let p = &s.realize_pairs().unwrap().pairs[0];
        assert_eq!(p.g, PiecewiseBV::step(1.0, 0.5));
        assert!((p.gamma - 1f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn parse_errors() {
        assert!(parse_scenario("").is_err());
        let e = parse_scenario("family = \"example9\"\nindices = [1]\n").unwrap_err();
        assert!(e.to_string().contains("example9"));
        let e = parse_scenario("family = \"example1\"\nindices = [2, 1]\n").unwrap_err();
        assert!(e.to_string().contains("indices"));
        let e = parse_scenario("family = \"example1\"\nindices = [1]\ncolour = 3\n").unwrap_err();
        assert!(e.to_string().contains("colour"));
        let e = parse_scenario(
            "family = \"custom\"\nindices = [1]\n[[explicit]]\nsegments = [[0.0, 1.0]]\n",
        )
        .unwrap_err();
        assert!(e.to_string().contains("line"), "{e}");
        let e = parse_scenario("family = \"poisson\"\nindices = [1]\n[params]\nlam = 1.0\n")
            .unwrap_err();
        assert!(e.to_string().contains("params.lam"));
        assert!(parse_scenario("family = \"custom\"\nindices = [1]\n").is_err());
    }

    #[test]
    fn round_trip() {
        let mut s = ScenarioSpec::new(Family::Custom, vec![1, 3]);
        s.explicit = Some(vec![
            ExplicitPair {
                gamma: 0.1,
                tau: 2.0,
                atoms: vec![[0.5, -0.25]],
                segments: vec![[-1.0, 2.0, 0.125]],
            },
            ExplicitPair {
                gamma: -1.0 / 3.0,
                tau: 1.0,
                atoms: vec![],
                segments: vec![],
            },
        ]);
        let text = s.to_toml().unwrap();
        assert_eq!(parse_scenario(&text).unwrap(), s);
    }

    #[test]
    fn example3_dyadic_sweep() {
        assert_eq!(example3_interval(1), (0.0, 1.0));
        assert_eq!(example3_interval(5), (0.25, 0.5));
        assert_eq!(example3_interval(7), (0.75, 1.0));
        assert_eq!(example3_interval(8), (0.0, 0.125));
    }

    #[test]
    fn random_scenario_is_deterministic() {
        let a = random_bnp_scenario(7).unwrap().to_toml().unwrap();
        let b = random_bnp_scenario(7).unwrap().to_toml().unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_bnp_scenario(8).unwrap().to_toml().unwrap());
    }
}
