//! Command-line driver: scenario files in, CSV traces and reports out.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use qid::convergence::scenario::{default_indices, random_bnp_scenario, Family, ScenarioSpec};
use qid::convergence::{
    check_difference_convergence, diagnose_basic, diagnose_qid_sequence,
    diagnose_weak_bv, recovery_probes, tightness_check, verify_criterion_sequence, avoid_atoms,
    ConvergenceReport, DiagnosticSettings, Outcome, QidMode, Verdict, DEFAULT_TOL, MASS,
    TRANSFORM_CAUCHY, TRANSFORM_LIMIT, DIFFERENCE,
};
use qid::fourier::{uniform_grid, LogCf, DEFAULT_T_MAX, DEFAULT_T_STEP};
use qid::levy_khinchine::{
    cf, kernel, kernel_via_w, recover_gamma, recover_spectral_transform_from_table, SpectralPair,
    RECOVERY_S_MAX,
};
use qid::{fs_transform, PiecewiseBV, TransformSamples};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_REFUTED: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

const LEMMA_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "qid", version, about = "Diagnostics for quasi-infinitely divisible laws")]
pub struct Cli {
    /// Directory for report.txt, CSV traces and meta.json.
    #[arg(long, env = "QID_OUTPUT_DIR", default_value = "qid-out", global = true)]
    pub output_dir: PathBuf,
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub t_min: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub t_max: Option<f64>,
    #[arg(long, global = true)]
    pub t_step: Option<f64>,
    /// Trace tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Characteristic functions of every pair in a scenario.
    CfEval { scenario: PathBuf },
    /// Fourier–Stieltjes transforms of every spectral function.
    Transform { scenario: PathBuf },
    /// Recover γ and the spectral transform from each CF.
    Recover { scenario: PathBuf },
    /// Run one convergence diagnostic on a scenario.
    Diagnose {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = Check::Basic)]
        check: Check,
    },
    /// Reproduce the classification of one of the four builtin examples.
    Example {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        id: u8,
    },
    /// Verify a weak-limit theorem end to end (5, 6, 8 or 10).
    Theorem {
        #[arg(long)]
        id: u8,
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Added to the candidate γ in theorems 8 and 10.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        gamma_offset: f64,
    },
    /// Residual of the kernel identity built from U, ρ and V.
    Lemma1 {
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        #[arg(long)]
        tau: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Basic,
    Weak,
    Difference,
    Tightness,
    QidBv,
    QidBnp,
    Criterion,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub output_dir: PathBuf,
    pub t_min: f64,
    pub t_max: f64,
    pub t_step: f64,
    pub tol: f64,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let cfg = Self {
            command: cli.command,
            output_dir: cli.output_dir,
            t_min: cli.t_min.unwrap_or(-DEFAULT_T_MAX),
            t_max: cli.t_max.unwrap_or(DEFAULT_T_MAX),
            t_step: cli.t_step.unwrap_or(DEFAULT_T_STEP),
            tol: cli.tol.unwrap_or(DEFAULT_TOL),
            seed: cli.seed,
        };
        if !(cfg.t_min < 0.0 && cfg.t_max > 0.0) {
            bail!("t-range must satisfy t_min < 0 < t_max, got [{}, {}]", cfg.t_min, cfg.t_max);
        }
        if !(cfg.t_step > 0.0 && cfg.t_step.is_finite()) {
            bail!("t-step must be positive, got {}", cfg.t_step);
        }
        if !(cfg.tol > 0.0 && cfg.tol.is_finite()) {
            bail!("tol must be positive, got {}", cfg.tol);
        }
        Ok(cfg)
    }

    fn settings(&self) -> Result<DiagnosticSettings> {
        Ok(DiagnosticSettings {
            tol: self.tol,
            t_grid: uniform_grid(self.t_min, self.t_max, self.t_step)?,
            ..DiagnosticSettings::default()
        })
    }
}

const SAMPLE_HEADER: &[&str] = &["n", "t", "re", "im"];

struct Csv {
    name: String,
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

#[derive(Default)]
struct Artifacts {
    reports: Vec<(String, ConvergenceReport)>,
    csvs: Vec<Csv>,
    text: String,
    status: i32,
}

impl Artifacts {
    fn add_samples(&mut self, name: &str, series: &[(u64, &TransformSamples)]) {
        let mut rows = Vec::new();
        for (n, s) in series {
            for (t, v) in s.iter() {
                rows.push(vec![n.to_string(), t.to_string(), v.re.to_string(), v.im.to_string()]);
            }
        }
        self.csvs.push(Csv { name: name.to_string(), header: SAMPLE_HEADER, rows });
    }

    fn add_report(&mut self, key: &str, report: ConvergenceReport) {
        for t in &report.tests {
            let rows = t.indices.iter().zip(&t.values).map(|(n, v)| vec![n.to_string(), v.to_string()]).collect();
            self.csvs.push(Csv {
                name: format!("{key}_{}", slug(&t.name)),
                header: &["n", "statistic"],
                rows,
            });
        }
        for s in &report.transforms {
            let mut name = format!("{key}_{}", slug(&s.name));
            if self.csvs.iter().any(|c| c.name == name && c.header != SAMPLE_HEADER) {
                name.push_str("_samples");
            }
            let n = s.index.unwrap_or(0);
            match self.csvs.iter_mut().find(|c| c.name == name) {
                Some(c) => c.rows.extend(s.samples.iter().map(|(t, v)| vec![n.to_string(), t.to_string(), v.re.to_string(), v.im.to_string()])),
                None => self.add_samples(&name, &[(n, &s.samples)]),
            }
        }
        self.reports.push((key.to_string(), report));
    }
}

fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
            out.push(c);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

fn status_of(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::Confirmed => EXIT_OK,
        Verdict::Refuted => EXIT_REFUTED,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn load(path: &Path) -> Result<ScenarioSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read scenario {}", path.display()))?;
    ScenarioSpec::parse(&text).with_context(|| format!("invalid scenario {}", path.display()))
}

fn limit_of(spec: &ScenarioSpec) -> Result<SpectralPair> {
    spec.limit_pair()?.with_context(|| {
        format!("family `{}` has no closed-form limit; add a [limit] table", spec.family.name())
    })
}

/// Runs one command and writes its artifacts. Returns the exit status.
pub fn run(cfg: &RunConfig) -> Result<i32> {
    let settings = cfg.settings()?;
    let mut art = Artifacts::default();
    match &cfg.command {
        Command::CfEval { scenario } => cf_eval(&load(scenario)?, &settings, &mut art)?,
        Command::Transform { scenario } => transform(&load(scenario)?, &settings, &mut art)?,
        Command::Recover { scenario } => recover(&load(scenario)?, &mut art)?,
        Command::Diagnose { scenario, check } => diagnose(&load(scenario)?, *check, &settings, &mut art)?,
        Command::Example { id } => example(*id, &settings, &mut art)?,
        Command::Theorem { id, scenario, gamma_offset } => {
            let spec = scenario.as_deref().map(load).transpose()?;
            theorem(*id, spec, *gamma_offset, cfg.seed, &settings, &mut art)?
        }
        Command::Lemma1 { t, tau } => lemma1(*t, *tau, &mut art)?,
    }
    write_outputs(cfg, &art)?;
    Ok(art.status)
}

fn cf_eval(spec: &ScenarioSpec, settings: &DiagnosticSettings, art: &mut Artifacts) -> Result<()> {
    let seq = spec.realize_pairs()?;
    let mut series = Vec::new();
    for (&n, p) in seq.indices.iter().zip(&seq.pairs) {
        let values = settings
            .t_grid
            .par_iter()
            .map(|&t| cf(p, t))
            .collect::<qid::Result<Vec<_>>>()
            .with_context(|| format!("cf evaluation at n = {n}"))?;
        series.push((n, TransformSamples::new(settings.t_grid.clone(), values)?));
        writeln!(art.text, "n = {n}: γ = {}, τ = {}, ‖G‖ = {}", p.gamma, p.tau, p.g.total_variation())?;
    }
    let refs: Vec<(u64, &TransformSamples)> = series.iter().map(|(n, s)| (*n, s)).collect();
    art.add_samples("cf", &refs);
    Ok(())
}

fn transform(spec: &ScenarioSpec, settings: &DiagnosticSettings, art: &mut Artifacts) -> Result<()> {
    let seq = spec.realize_bv()?;
    let series: Vec<(u64, TransformSamples)> = seq
        .indices
        .iter()
        .zip(&seq.elements)
        .map(|(&n, g)| Ok((n, TransformSamples::of_transform(g, &settings.t_grid)?)))
        .collect::<Result<_>>()?;
    for ((n, s), g) in series.iter().zip(&seq.elements) {
        writeln!(
            art.text,
            "n = {n}: g(0) = {}, ‖G‖ = {}, {} atoms, {} segments",
            s.value_at(0.0).map_or(f64::NAN, |v| v.re),
            g.total_variation(),
            g.atoms().len(),
            g.segments().len()
        )?;
    }
    let refs: Vec<(u64, &TransformSamples)> = series.iter().map(|(n, s)| (*n, s)).collect();
    art.add_samples("transform", &refs);
    Ok(())
}

fn recover(spec: &ScenarioSpec, art: &mut Artifacts) -> Result<()> {
    let seq = spec.realize_pairs()?;
    let probes = recovery_probes();
    let reach = probes[probes.len() - 1] + RECOVERY_S_MAX;
    let quad = qid::QuadratureSettings::default();
    let mut gamma_rows = Vec::new();
    let mut series = Vec::new();
    for (&n, p) in seq.indices.iter().zip(&seq.pairs) {
        let gamma = recover_gamma(p, p.tau).with_context(|| format!("γ recovery at n = {n}"))?;
        let table = LogCf::build(p, -reach, reach).with_context(|| format!("log table at n = {n}"))?;
        let values = probes
            .par_iter()
            .map(|&t| recover_spectral_transform_from_table(&table, t, &quad).map(|r| r.value))
            .collect::<qid::Result<Vec<_>>>()
            .with_context(|| format!("spectral recovery at n = {n}"))?;
        let err = probes
            .iter()
            .zip(&values)
            .map(|(&t, v)| (fs_transform(&p.g, t) - v).norm())
            .fold(0.0, f64::max);
        writeln!(
            art.text,
            "n = {n}: γ recovered {gamma} (error {:e}), spectral transform error {err:e}",
            (gamma - p.gamma).abs()
        )?;
        gamma_rows.push(vec![n.to_string(), gamma.to_string()]);
        series.push((n, TransformSamples::new(probes.clone(), values)?));
    }
    art.csvs.push(Csv { name: "gamma".into(), header: &["n", "statistic"], rows: gamma_rows });
    let refs: Vec<(u64, &TransformSamples)> = series.iter().map(|(n, s)| (*n, s)).collect();
    art.add_samples("recovered_transform", &refs);
    Ok(())
}

fn diagnose(spec: &ScenarioSpec, check: Check, settings: &DiagnosticSettings, art: &mut Artifacts) -> Result<()> {
    let report = match check {
        Check::Basic => {
            let limit = spec.limit_pair()?.map(|p| p.g);
            diagnose_basic(&spec.realize_bv()?, limit.as_ref(), settings)
        }
        Check::Weak => diagnose_weak_bv(&spec.realize_bv()?, &limit_of(spec)?.g, settings),
        Check::Difference => {
            let limit = limit_of(spec)?.g;
            let grid = avoid_atoms(&settings.x_grid, &limit);
            check_difference_convergence(&spec.realize_bv()?, &limit, &grid, settings.tol)?
        }
        Check::Tightness => {
            let seq = spec.realize_bv()?;
            let negative = seq.elements.iter().map(|g| g.hahn_jordan().negative_part).collect();
            let neg = qid::convergence::BvSequence::new(seq.indices.clone(), negative)?;
            tightness_check(&neg, settings.tol)?
        }
        Check::QidBv => diagnose_qid_sequence(&spec.realize_pairs()?, QidMode::BoundedVariation, settings)?,
        Check::QidBnp => diagnose_qid_sequence(&spec.realize_pairs()?, QidMode::BoundedNegativePart, settings)?,
        Check::Criterion => verify_criterion_sequence(&spec.realize_pairs()?, &limit_of(spec)?, settings)?,
    };
    art.status = status_of(report.verdict);
    art.add_report(&slug(&format!("{check:?}").to_lowercase()), report);
    Ok(())
}

fn example(id: u8, settings: &DiagnosticSettings, art: &mut Artifacts) -> Result<()> {
    let family = match id {
        1 => Family::Example1,
        2 => Family::Example2,
        3 => Family::Example3,
        4 => Family::Example4,
        _ => bail!("example id must be 1, 2, 3 or 4"),
    };
    let seq = ScenarioSpec::new(family, default_indices()).realize_bv()?;
    let zero = PiecewiseBV::zero();
    let basic = diagnose_basic(&seq, Some(&zero), settings);
    let weak = diagnose_weak_bv(&seq, &zero, settings);
    let route = |name: &str| basic.routes.get(name).copied().unwrap_or(Verdict::Inconclusive);
    let outcome = |r: &ConvergenceReport, name: &str| r.test(name).map(|t| t.outcome);

    let matches = match id {
        1 => weak.verdict == Verdict::Refuted
            && basic.verdict == Verdict::Confirmed
            && route("difference") == Verdict::Confirmed,
        2 => weak.verdict == Verdict::Refuted
            && basic.verdict == Verdict::Confirmed
            && route("difference") == Verdict::Confirmed
            && outcome(&basic, TRANSFORM_LIMIT) == Some(Outcome::Pass),
        3 => weak.verdict == Verdict::Confirmed
            && route("transform") == Verdict::Confirmed
            && outcome(&basic, DIFFERENCE) == Some(Outcome::Fail),
        _ => route("difference") == Verdict::Confirmed
            && settings
                .probes
                .iter()
                .all(|t| outcome(&basic, &format!("transform_at_t={t}")) == Some(Outcome::Pass))
            && basic.test(MASS).is_some_and(|m| m.values.iter().all(|&v| v == 2.0)),
    };
    writeln!(art.text, "example {id}")?;
    writeln!(art.text, "weak convergence to 0: {}", weak.verdict)?;
    writeln!(art.text, "basic convergence to 0: {}", basic.verdict)?;
    for (r, v) in &basic.routes {
        writeln!(art.text, "  basic route {r}: {v}")?;
    }
    if let Some(c) = basic.test(TRANSFORM_CAUCHY) {
        writeln!(art.text, "  transform Cauchy trace: {}", c.outcome)?;
    }
    writeln!(art.text, "matches the expected classification: {}", if matches { "yes" } else { "no" })?;
    art.status = if matches { EXIT_OK } else { EXIT_INCONCLUSIVE };
    art.add_report("weak", weak);
    art.add_report("basic", basic);
    Ok(())
}

fn theorem(
    id: u8,
    spec: Option<ScenarioSpec>,
    gamma_offset: f64,
    seed: u64,
    settings: &DiagnosticSettings,
    art: &mut Artifacts,
) -> Result<()> {
    let drift = || ScenarioSpec::new(Family::AtomDrift, (0..=30).map(|k| 1u64 << k).collect());
    let report = match id {
        5 => {
            let spec = spec.unwrap_or_else(drift);
            diagnose_qid_sequence(&spec.realize_pairs()?, QidMode::BoundedVariation, settings)?
        }
        6 => {
            let spec = match spec {
                Some(s) => s,
                None => random_bnp_scenario(seed)?,
            };
            writeln!(art.text, "scenario:\n{}", spec.to_toml()?)?;
            diagnose_qid_sequence(&spec.realize_pairs()?, QidMode::BoundedNegativePart, settings)?
        }
        8 | 10 => {
            let spec = spec.unwrap_or_else(drift);
            let mut candidate = limit_of(&spec)?;
            candidate.gamma += gamma_offset;
            writeln!(art.text, "candidate: γ = {}, G = {:?}", candidate.gamma, candidate.g)?;
            verify_criterion_sequence(&spec.realize_pairs()?, &candidate, settings)?
        }
        _ => bail!("theorem id must be 5, 6, 8 or 10, got {id}"),
    };
    art.status = status_of(report.verdict);
    art.add_report(&format!("theorem{id}"), report);
    Ok(())
}

fn lemma1(t: f64, tau: f64, art: &mut Artifacts) -> Result<()> {
    if !(tau > 0.0) {
        bail!("tau must be positive, got {tau}");
    }
    let xs: Vec<f64> = (0..=400).map(|j| j as f64 / 10.0 - 20.0).collect();
    let residuals = xs
        .par_iter()
        .map(|&x| Ok((kernel(t, x, tau) - kernel_via_w(t, x, tau)?).norm()))
        .collect::<qid::Result<Vec<f64>>>()
        .with_context(|| format!("kernel identity at t = {t}, tau = {tau}"))?;
    let max = residuals.iter().copied().fold(0.0, f64::max);
    writeln!(art.text, "kernel identity at t = {t}, tau = {tau}")?;
    writeln!(art.text, "max residual over {} x-points in [-20, 20]: {max:e}", xs.len())?;
    let pass = max < LEMMA_TOL;
    writeln!(art.text, "{} (threshold {LEMMA_TOL:e})", if pass { "pass" } else { "fail" })?;
    art.status = if pass { EXIT_OK } else { EXIT_REFUTED };
    art.csvs.push(Csv {
        name: "lemma1".into(),
        header: &["x", "residual"],
        rows: xs.iter().zip(&residuals).map(|(x, r)| vec![x.to_string(), r.to_string()]).collect(),
    });
    Ok(())
}

#[derive(Serialize)]
struct Meta<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    exit_status: i32,
    verdicts: Vec<(&'a str, Verdict)>,
    files: Vec<String>,
}

fn write_outputs(cfg: &RunConfig, art: &Artifacts) -> Result<()> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("cannot create output dir {}", dir.display()))?;
    let mut files = vec!["report.txt".to_string(), "meta.json".to_string()];
    for c in &art.csvs {
        let file = format!("{}.csv", c.name);
        let mut w = csv::Writer::from_path(dir.join(&file)).with_context(|| format!("cannot write {file}"))?;
        w.write_record(c.header)?;
        for r in &c.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        files.push(file);
    }
    let mut text = art.text.clone();
    for (_, r) in &art.reports {
        if !text.is_empty() {
            text.push('\n');
        }
        text.push_str(&r.render());
    }
    writeln!(text, "\nexit status: {}", art.status)?;
    fs::write(dir.join("report.txt"), text).context("cannot write report.txt")?;
    let meta = Meta {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        exit_status: art.status,
        verdicts: art.reports.iter().map(|(k, r)| (k.as_str(), r.verdict)).collect(),
        files,
    };
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n").context("cannot write meta.json")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("h=cos(1πx)"), "h_cos_1_x");
        assert_eq!(slug("transform_at_t=0.5"), "transform_at_t_0.5");
    }

    #[test]
    fn rejects_bad_grid() {
        let cli = Cli::parse_from(["qid", "--t-min", "1", "lemma1", "--t", "1", "--tau", "1"]);
        assert!(RunConfig::from_cli(cli).is_err());
    }
}
