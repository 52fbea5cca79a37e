//! Task dispatch and report writing.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{ExperimentConfig, Section, Task, Tolerances};
use super::plot::{emit_plot, PlotSpec, Series};
use crate::closed_forms::{circle_spectrum_series, interval_spectrum, shift_spectrum, OracleSpectrum};
use crate::conformal::{
    commutator_growth, conformal_identity_defect, unitarity_defect, CommutatorGrowth, MobiusMap, OperatorKind,
};
use crate::dini::{commutator_defect, dini_algebra_defect, geometric_t_grid, modulus_of_continuity, product_profiles};
use crate::error::{Error, Result};
use crate::form_engine::exact::{to_f64, ExactShiftForm};
use crate::form_engine::{
    assemble_form_matrix_with, solve_spectrum, trace_consistency, write_dense, AssemblyRule, BasisSet, EigenLevel,
    SpectralModel, SpectrumSource,
};
use crate::quadrature::{defect_sweep, lemma_checks, LemmaCheck};
use crate::spaces::{Point, Space, SpaceKind};
use crate::spectra::{heat_trace, log_growth_fit, trace_threshold, HeatTraceReport, LogGrowthFit, TraceInput, Verdict};

/// Files written by a run and the hard failures it flagged.
#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub failures: Vec<String>,
}

struct Outputs<'a> {
    dir: &'a Path,
    plot: bool,
    summary: RunSummary,
}

impl<'a> Outputs<'a> {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.summary.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, &s)
    }

    /// Plot failures are reported on stderr and never fail the run.
    fn plot(&mut self, name: &str, series: &[Series], spec: &PlotSpec) {
        if !self.plot {
            return;
        }
        let path = self.dir.join(name);
        match emit_plot(series, spec, &path) {
            Ok(()) => self.summary.files.push(path),
            Err(e) => eprintln!("warning: plot {} skipped: {e}", path.display()),
        }
    }

    fn fail(&mut self, message: String) {
        self.summary.failures.push(message);
    }
}

/// Runs one experiment and writes its reports into `config.out_dir`.
pub fn run_config(config: &ExperimentConfig) -> Result<RunSummary> {
    fs::create_dir_all(&config.out_dir)?;
    let mut out = Outputs { dir: &config.out_dir, plot: config.plot, summary: RunSummary::default() };
    match config.task {
        Task::Spectrum => spectrum_task(config, &mut out)?,
        Task::HeatTrace => heat_trace_task(config, &mut out)?,
        Task::Threshold => threshold_task(config, &mut out)?,
        Task::Dini => dini_task(config, &mut out)?,
        Task::Commutator => commutator_task(config, &mut out)?,
        Task::Conformal => conformal_task(config, &mut out)?,
        Task::VerifyAhlfors => ahlfors_task(config, &mut out)?,
    }
    Ok(out.summary)
}

fn param_err(p: &Section, key: &str, message: String) -> Error {
    Error::Config { line: p.get(key).map_or(p.line, |e| e.line), message }
}

// ---------------------------------------------------------------------------
// Test functions

/// Scalar coordinate of a point: the coordinate, the angle, or the address
/// `Σ (w_i - 1) N^{-i}` of a word.
pub fn coordinate(space: &Space, p: &Point) -> f64 {
    match (p, space.kind) {
        (Point::Word(w), SpaceKind::Shift { symbols, .. }) => {
            let n = symbols as f64;
            w.iter().rev().fold(0.0, |acc, &s| (acc + (s - 1) as f64) / n)
        }
        _ => p.scalar().unwrap_or(0.0),
    }
}

/// Named scalar functions of the coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum TestFunction {
    X,
    Abs,
    Power {
        exponent: f64,
    },
    LogPower {
        exponent: f64,
    },
    Cos,
    Sin,
    /// `scale |t - center|^exponent`.
    Shifted {
        scale: f64,
        center: f64,
        exponent: f64,
    },
}

impl TestFunction {
    pub const NAMES: &'static str = "x | abs | sqrt | power | log-power | cos | sin";

    pub fn parse(name: &str, exponent: Option<f64>) -> Option<Self> {
        Some(match name {
            "x" => TestFunction::X,
            "abs" => TestFunction::Abs,
            "sqrt" => TestFunction::Power { exponent: 0.5 },
            "power" => TestFunction::Power { exponent: exponent.unwrap_or(0.5) },
            "log-power" => TestFunction::LogPower { exponent: exponent.unwrap_or(2.0) },
            "cos" => TestFunction::Cos,
            "sin" => TestFunction::Sin,
            _ => return None,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TestFunction::X => t,
            TestFunction::Abs => t.abs(),
            TestFunction::Power { exponent } => t.abs().powf(exponent),
            TestFunction::LogPower { exponent } => {
                let s = t.abs().min(1.0);
                if s == 0.0 {
                    0.0
                } else {
                    (1.0 - s.ln()).powf(-exponent)
                }
            }
            TestFunction::Cos => t.cos(),
            TestFunction::Sin => t.sin(),
            TestFunction::Shifted { scale, center, exponent } => scale * (t - center).abs().powf(exponent),
        }
    }

    pub fn nodes(&self, space: &Space) -> Vec<f64> {
        space.quadrature.nodes.iter().map(|p| self.eval(coordinate(space, p))).collect()
    }
}

fn function_param(p: &Section, key: &str, exponent_key: &str, default: &str) -> Result<TestFunction> {
    let name = p.str_or(key, default);
    TestFunction::parse(name, p.f64_opt(exponent_key)?)
        .ok_or_else(|| param_err(p, key, format!("unknown function `{name}` (expected {})", TestFunction::NAMES)))
}

// ---------------------------------------------------------------------------
// Spectra

const SPECTRUM_KEYS: [&str; 8] =
    ["basis", "level", "max_degree", "max_freq", "rule", "exact", "oracle", "dump_matrices"];
/// Largest cylinder count certified in exact arithmetic by default.
const EXACT_AUTO_LIMIT: usize = 128;

struct GalerkinRun {
    model: SpectralModel,
    basis: BasisSet,
    rule: AssemblyRule,
    certified: Option<bool>,
    oracle: Option<SpectralModel>,
    trace_consistency: f64,
    matrices: Option<(nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>)>,
}

fn galerkin(space: &Space, p: &Section, tol: &Tolerances, keep_matrices: bool) -> Result<GalerkinRun> {
    let default_basis = match space.kind {
        SpaceKind::Shift { .. } => "cylinder",
        SpaceKind::Interval { .. } => "legendre",
        SpaceKind::Circle => "fourier",
    };
    let name = p.str_or("basis", default_basis);
    let basis = match (name, space.kind) {
        ("cylinder", SpaceKind::Shift { depth, .. }) => {
            BasisSet::cylinder_indicators(space, p.usize_or("level", depth)?)?
        }
        ("haar", SpaceKind::Shift { depth, .. }) => BasisSet::haar(space, p.usize_or("level", depth)?)?,
        ("legendre", SpaceKind::Interval { .. }) => BasisSet::legendre(space, p.usize_or("max_degree", 16)?)?,
        ("fourier", SpaceKind::Circle) => BasisSet::fourier(space, p.usize_or("max_freq", 16)?)?,
        ("nodal", _) => BasisSet::nodal(space)?,
        _ => {
            return Err(param_err(
                p,
                "basis",
                format!("basis `{name}` is not available on a {} space", space.kind.name()),
            ))
        }
    };
    let rule = match p.get("rule").map(|e| e.value.as_str()) {
        None => AssemblyRule::default_for(space, &basis),
        Some("node-pairs") => AssemblyRule::NodePairs,
        Some("point-adapted") => AssemblyRule::PointAdapted,
        Some(other) => {
            return Err(param_err(p, "rule", format!("unknown rule `{other}` (expected node-pairs | point-adapted)")))
        }
    };
    let fm = assemble_form_matrix_with(space, &basis, rule)?;
    let mut model = solve_spectrum(&fm, tol.multiplicity)?;
    let trace_consistency = trace_consistency(&fm, &model)?;

    let full_cylinders = match (basis.family, space.kind) {
        (crate::form_engine::BasisFamily::CylinderIndicators { level }, SpaceKind::Shift { depth, .. }) => {
            level == depth
        }
        (crate::form_engine::BasisFamily::Nodal, SpaceKind::Shift { .. }) => true,
        _ => false,
    };
    let exact = match p.bool_opt("exact")? {
        Some(true) if !full_cylinders => {
            return Err(param_err(p, "exact", "exact arithmetic needs the full cylinder basis of a shift".into()))
        }
        Some(e) => e,
        None => full_cylinders && basis.size() <= EXACT_AUTO_LIMIT,
    };
    let certified = if exact {
        let form = ExactShiftForm::assemble(space)?;
        let spectrum = form.certify_floats(&model.raw);
        if spectrum.complete {
            model.levels =
                spectrum.levels.iter().map(|(v, k)| EigenLevel { value: to_f64(v), multiplicity: *k as u64 }).collect();
        }
        Some(spectrum.complete)
    } else {
        None
    };

    let oracle = if p.bool_opt("oracle")?.unwrap_or(true) { oracle_for(space, &basis)? } else { None };
    let matrices = keep_matrices.then(|| (fm.e.clone(), fm.m.clone()));
    Ok(GalerkinRun { model, basis, rule, certified, oracle, trace_consistency, matrices })
}

/// Closed-form spectrum of the span of `basis`, when one is known.
fn oracle_for(space: &Space, basis: &BasisSet) -> Result<Option<SpectralModel>> {
    use crate::form_engine::BasisFamily as F;
    let shift_levels = |symbols: usize, levels: usize| -> Result<SpectralModel> {
        if levels == 0 {
            return Ok(SpectralModel::from_levels(
                vec![EigenLevel { value: 0.0, multiplicity: 1 }],
                SpectrumSource::ClosedForm,
            ));
        }
        shift_spectrum(symbols, levels - 1)
    };
    Ok(match (basis.family, space.kind) {
        (F::CylinderIndicators { level }, SpaceKind::Shift { symbols, .. }) => Some(shift_levels(symbols, level)?),
        (F::Haar { levels }, SpaceKind::Shift { symbols, .. }) => Some(shift_levels(symbols, levels)?),
        (F::Nodal, SpaceKind::Shift { symbols, depth, .. }) => Some(shift_levels(symbols, depth)?),
        (F::Legendre { max_degree }, SpaceKind::Interval { .. }) if max_degree >= 1 => {
            Some(interval_spectrum(max_degree)?)
        }
        (F::Fourier { max_freq }, SpaceKind::Circle) if max_freq >= 1 => Some(circle_spectrum_series(max_freq)?),
        _ => None,
    })
}

/// Largest `|λ - λ_oracle| / (1 + λ_oracle)`, infinite when the level
/// structures differ.
fn oracle_deviation(model: &SpectralModel, oracle: &SpectralModel) -> f64 {
    if model.levels.len() != oracle.levels.len()
        || model.levels.iter().zip(&oracle.levels).any(|(a, b)| a.multiplicity != b.multiplicity)
    {
        return f64::INFINITY;
    }
    model
        .levels
        .iter()
        .zip(&oracle.levels)
        .map(|(a, b)| (a.value - b.value).abs() / (1.0 + b.value.abs()))
        .fold(0.0, f64::max)
}

#[derive(Serialize)]
struct SpectrumSummary<'a> {
    space: SpaceKind,
    source: SpectrumSource,
    basis: &'a str,
    basis_size: usize,
    rule: AssemblyRule,
    tolerances: Tolerances,
    distinct_levels: usize,
    certified: Option<bool>,
    oracle_deviation: Option<f64>,
    trace_consistency: f64,
}

fn staircase(model: &SpectralModel, label: &str) -> Series {
    let values = model.expanded(100_000);
    Series::new(label, values.iter().enumerate().map(|(i, &v)| ((i + 1) as f64, v)).collect())
}

fn spectrum_task(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let p = &cfg.params;
    p.only("task", &SPECTRUM_KEYS)?;
    let space = cfg.space()?;
    let dump = p.bool_opt("dump_matrices")?.unwrap_or(false);
    let run = galerkin(&space, p, &cfg.tolerances, dump)?;
    let deviation = run.oracle.as_ref().map(|o| oracle_deviation(&run.model, o));
    out.write("spectrum.csv", &run.model.to_csv())?;
    if let Some(o) = &run.oracle {
        out.write("oracle_spectrum.csv", &o.to_csv())?;
    }
    if let Some((e, m)) = &run.matrices {
        let mut buf = Vec::new();
        write_dense(e, &mut buf)?;
        out.write("stiffness.txt", &String::from_utf8_lossy(&buf))?;
        buf.clear();
        write_dense(m, &mut buf)?;
        out.write("mass.txt", &String::from_utf8_lossy(&buf))?;
    }
    out.json(
        "spectrum.json",
        &SpectrumSummary {
            space: space.kind,
            source: run.model.source,
            basis: run.basis.name(),
            basis_size: run.basis.size(),
            rule: run.rule,
            tolerances: cfg.tolerances,
            distinct_levels: run.model.distinct_count(),
            certified: run.certified,
            oracle_deviation: deviation,
            trace_consistency: run.trace_consistency,
        },
    )?;
    let mut series = vec![staircase(&run.model, "galerkin")];
    if let Some(o) = &run.oracle {
        series.push(staircase(o, "oracle"));
    }
    let spec = PlotSpec {
        title: format!("eigenvalues, {} basis", run.basis.name()),
        x_label: "index".into(),
        y_label: "eigenvalue".into(),
        log_x: true,
        steps: true,
        ..PlotSpec::default()
    };
    out.plot("spectrum.svg", &series, &spec);

    if run.certified == Some(false) {
        out.fail("exact certification did not account for every eigenvalue".into());
    }
    if let Some(d) = deviation {
        if !(d <= cfg.tolerances.oracle) {
            out.fail(format!("spectrum deviates from its oracle by {d:e} (tolerance {:e})", cfg.tolerances.oracle));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Heat traces

enum ModelSource {
    Oracle(OracleSpectrum),
    Galerkin(SpectralModel),
}

fn trace_source(space: &Space, p: &Section, tol: &Tolerances, default_truncation: usize) -> Result<ModelSource> {
    match p.str_or("source", "oracle") {
        "oracle" => {
            Ok(ModelSource::Oracle(OracleSpectrum::for_space(space, p.usize_or("truncation", default_truncation)?)))
        }
        "galerkin" => Ok(ModelSource::Galerkin(galerkin(space, p, tol, false)?.model)),
        other => Err(param_err(p, "source", format!("unknown source `{other}` (expected oracle | galerkin)"))),
    }
}

#[derive(Serialize)]
struct HeatTraceSummary<'a> {
    source: &'a str,
    truncation: Option<usize>,
    t_grid: &'a [f64],
    levels: &'a [usize],
    /// Deepest partial sum at the first `t`.
    trace: f64,
    traces: Vec<f64>,
    verdicts: &'a [Verdict],
    t0_estimate: Option<f64>,
    t0_exact: Option<f64>,
    fit: Option<&'a LogGrowthFit>,
}

fn summarize<'a>(source: &'a ModelSource, report: &'a HeatTraceReport) -> HeatTraceSummary<'a> {
    let traces = report.traces();
    HeatTraceSummary {
        source: match source {
            ModelSource::Oracle(_) => "oracle",
            ModelSource::Galerkin(_) => "galerkin",
        },
        truncation: match source {
            ModelSource::Oracle(o) => Some(o.truncation),
            ModelSource::Galerkin(_) => None,
        },
        t_grid: &report.t_grid,
        levels: &report.levels,
        trace: traces[0],
        traces,
        verdicts: &report.verdicts,
        t0_estimate: report.t0_estimate,
        t0_exact: report.t0_exact,
        fit: report.fit.as_ref(),
    }
}

fn default_truncation(space: &Space, shift: usize, other: usize) -> usize {
    match space.kind {
        SpaceKind::Shift { .. } => shift,
        _ => other,
    }
}

fn run_heat_trace(source: &ModelSource, t: &[f64], levels: &[usize]) -> Result<HeatTraceReport> {
    match source {
        ModelSource::Oracle(o) => heat_trace(TraceInput::Oracle(o), t, levels),
        ModelSource::Galerkin(m) => heat_trace(TraceInput::Model(m), t, levels),
    }
}

fn trace_plot(report: &HeatTraceReport) -> (Vec<Series>, PlotSpec) {
    let series = report
        .t_grid
        .iter()
        .zip(&report.partial_sums)
        .take(6)
        .map(|(t, sums)| {
            Series::new(format!("t = {t}"), report.levels.iter().zip(sums).map(|(&l, &s)| (l as f64, s)).collect())
        })
        .collect();
    let spec = PlotSpec {
        title: "heat-trace partial sums".into(),
        x_label: "level".into(),
        y_label: "partial sum".into(),
        ..PlotSpec::default()
    };
    (series, spec)
}

fn heat_trace_task(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let p = &cfg.params;
    let mut keys = vec!["source", "truncation", "t", "levels"];
    keys.extend(SPECTRUM_KEYS);
    p.only("task", &keys)?;
    let space = cfg.space()?;
    let t = p.f64_list("t")?.unwrap_or_else(|| vec![1.0, 2.0]);
    if t.iter().any(|&v| !(v > 0.0)) {
        return Err(param_err(p, "t", "heat-trace times must be positive".into()));
    }
    let levels = p.usize_list("levels")?.unwrap_or_default();
    let source = trace_source(&space, p, &cfg.tolerances, default_truncation(&space, 40, 4096))?;
    let report = run_heat_trace(&source, &t, &levels)?;
    out.write("heat_trace.csv", &report.to_csv())?;
    out.json("heat_trace.json", &summarize(&source, &report))?;
    let (series, spec) = trace_plot(&report);
    out.plot("heat_trace.svg", &series, &spec);
    Ok(())
}

#[derive(Serialize)]
struct ThresholdSummary<'a> {
    source: &'a str,
    truncation: Option<usize>,
    flip_truncation: Option<usize>,
    t0_estimate: f64,
    t0_exact: Option<f64>,
    relative_error: Option<f64>,
    fit: LogGrowthFit,
    offset: f64,
    below: Verdict,
    above: Verdict,
    flips: bool,
}

fn threshold_task(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let p = &cfg.params;
    let mut keys = vec!["source", "truncation", "flip_truncation", "offset", "levels"];
    keys.extend(SPECTRUM_KEYS);
    p.only("task", &keys)?;
    let space = cfg.space()?;
    let offset = p.f64_or("offset", 0.1)?;
    let source = trace_source(&space, p, &cfg.tolerances, default_truncation(&space, 14, 500))?;
    let (model, t0_exact) = match &source {
        ModelSource::Oracle(o) => (o.model()?, Some(o.t0_exact())),
        ModelSource::Galerkin(m) => (m.clone(), None),
    };
    let fit = log_growth_fit(&model)?;
    let t0_estimate = trace_threshold(&model)?;
    let center = t0_exact.unwrap_or(t0_estimate);
    if !(offset > 0.0 && offset < center) {
        return Err(param_err(p, "offset", format!("offset must lie in (0, {center})")));
    }
    let levels = p.usize_list("levels")?.unwrap_or_default();
    // Verdicts need a full run of dyadic blocks, so the flip check reads a
    // deeper oracle than the fit.
    let flip_source = match &source {
        ModelSource::Oracle(o) => ModelSource::Oracle(OracleSpectrum::new(
            o.family,
            p.usize_or("flip_truncation", default_truncation(&space, 40, 1 << 17))?,
        )),
        ModelSource::Galerkin(m) => ModelSource::Galerkin(m.clone()),
    };
    let report = run_heat_trace(&flip_source, &[center - offset, center + offset], &levels)?;
    let (below, above) = (report.verdicts[0], report.verdicts[1]);
    let flips = below == Verdict::Diverging && above == Verdict::Converged;
    out.write("threshold.csv", &report.to_csv())?;
    let summary = summarize(&source, &report);
    let flip_truncation = match &flip_source {
        ModelSource::Oracle(o) => Some(o.truncation),
        ModelSource::Galerkin(_) => None,
    };
    out.json(
        "threshold.json",
        &ThresholdSummary {
            source: summary.source,
            truncation: summary.truncation,
            flip_truncation,
            t0_estimate,
            t0_exact,
            relative_error: t0_exact.map(|e| (t0_estimate - e).abs() / e),
            fit,
            offset,
            below,
            above,
            flips,
        },
    )?;
    let (series, spec) = trace_plot(&report);
    out.plot("threshold.svg", &series, &spec);
    if !flips {
        out.fail(format!(
            "verdicts do not flip across t0 = {center}: {} below, {} above",
            below.as_str(),
            above.as_str()
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Dini functions and commutators

#[derive(Serialize)]
struct ProfileSummary {
    function: TestFunction,
    dini_constant: f64,
    theta_sum: f64,
    sup_norm: f64,
    dini_norm: f64,
    sample_count: usize,
}

#[derive(Serialize)]
struct PairSummary {
    second: ProfileSummary,
    product_dini_norm: f64,
    algebra_defect: f64,
    submultiplicative: bool,
}

#[derive(Serialize)]
struct RandomPairs {
    count: usize,
    seed: u64,
    max_algebra_defect: f64,
    submultiplicative: bool,
}

#[derive(Serialize)]
struct DiniSummary {
    profile: ProfileSummary,
    pair: Option<PairSummary>,
    random_pairs: Option<RandomPairs>,
}

/// Absolute slack granted to `‖fg‖ <= ‖f‖ ‖g‖` and to the algebra defect.
const ALGEBRA_SLACK: f64 = 1e-12;

fn profile_summary(function: TestFunction, p: &crate::dini::DiniProfile) -> ProfileSummary {
    ProfileSummary {
        function,
        dini_constant: p.dini_constant,
        theta_sum: p.theta_sum,
        sup_norm: p.sup_norm,
        dini_norm: p.dini_norm,
        sample_count: p.sample_count,
    }
}

fn random_function(space: &Space, rng: &mut ChaCha8Rng) -> TestFunction {
    let (lo, hi) = match space.kind {
        SpaceKind::Interval { a, b } => (a, b),
        SpaceKind::Circle => (0.0, 2.0 * std::f64::consts::PI),
        SpaceKind::Shift { .. } => (0.0, 1.0),
    };
    TestFunction::Shifted {
        scale: rng.gen_range(-1.0..=1.0),
        center: rng.gen_range(lo..=hi),
        exponent: rng.gen_range(0.2..=1.0),
    }
}

fn dini_task(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let p = &cfg.params;
    p.only("task", &["function", "exponent", "second", "second_exponent", "refinement", "decades", "pairs"])?;
    let space = cfg.space()?;
    let f = function_param(p, "function", "exponent", "x")?;
    let t_grid = geometric_t_grid(p.usize_or("refinement", 4)?, p.usize_or("decades", 8)?);
    let fv = f.nodes(&space);
    let profile = modulus_of_continuity(&space, &fv, &t_grid)?;

    let pair = match p.get("second") {
        None => None,
        Some(_) => {
            let g = function_param(p, "second", "second_exponent", "x")?;
            let gv = g.nodes(&space);
            let [_, pg, pfg] = product_profiles(&space, &fv, &gv, &t_grid)?;
            let algebra_defect = dini_algebra_defect(&space, &fv, &gv, &t_grid)?;
            let submultiplicative = pfg.dini_norm <= profile.dini_norm * pg.dini_norm + ALGEBRA_SLACK;
            if algebra_defect > ALGEBRA_SLACK {
                out.fail(format!("algebra defect {algebra_defect:e} exceeds {ALGEBRA_SLACK:e}"));
            }
            if !submultiplicative {
                out.fail("Dini norm is not submultiplicative on the configured pair".into());
            }
            Some(PairSummary {
                second: profile_summary(g, &pg),
                product_dini_norm: pfg.dini_norm,
                algebra_defect,
                submultiplicative,
            })
        }
    };

    let count = p.usize_or("pairs", 0)?;
    let random_pairs = if count == 0 {
        None
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (mut worst, mut submult) = (f64::NEG_INFINITY, true);
        for _ in 0..count {
            let a = random_function(&space, &mut rng).nodes(&space);
            let b = random_function(&space, &mut rng).nodes(&space);
            let [pa, pb, pab] = product_profiles(&space, &a, &b, &t_grid)?;
            worst = worst.max(dini_algebra_defect(&space, &a, &b, &t_grid)?);
            submult &= pab.dini_norm <= pa.dini_norm * pb.dini_norm + ALGEBRA_SLACK;
        }
        if worst > ALGEBRA_SLACK {
            out.fail(format!("random pairs reach algebra defect {worst:e}"));
        }
        if !submult {
            out.fail("Dini norm is not submultiplicative on a random pair".into());
        }
        Some(RandomPairs { count, seed: cfg.seed, max_algebra_defect: worst, submultiplicative: submult })
    };

    let mut csv = String::from("t,omega\n");
    for (t, w) in profile.t_grid.iter().zip(&profile.omega) {
        csv.push_str(&format!("{t:?},{w:?}\n"));
    }
    out.write("dini.csv", &csv)?;
    out.json("dini.json", &DiniSummary { profile: profile_summary(f, &profile), pair, random_pairs })?;
    let spec = PlotSpec {
        title: "modulus of continuity".into(),
        x_label: "t".into(),
        y_label: "omega".into(),
        log_x: true,
        ..PlotSpec::default()
    };
    let pts = profile.t_grid.iter().copied().zip(profile.omega.iter().copied()).collect();
    out.plot("dini.svg", &[Series::new("omega", pts)], &spec);
    Ok(())
}

#[derive(Serialize)]
struct CommutatorSummary {
    multiplier: TestFunction,
    basis: &'static str,
    reports: Vec<crate::dini::CommutatorReport>,
    /// Last over first commutator norm.
    growth_ratio: f64,
    max_defect: f64,
}

fn commutator_task(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let p = &cfg.params;
    p.only("task", &["multiplier", "exponent", "sizes"])?;
    let space = cfg.space()?;
    let h = function_param(p, "multiplier", "exponent", "x")?;
    let sizes = match p.usize_list("sizes")? {
        Some(s) => s,
        None => match space.kind {
            SpaceKind::Shift { depth, .. } => (depth.saturating_sub(2).max(1)..=depth).collect(),
            SpaceKind::Interval { .. } => vec![6, 12, 24],
            SpaceKind::Circle => vec![4, 8, 16],
        },
    };
    let hf = |x: &Point| h.eval(coordinate(&space, x));
    let mut reports = Vec::with_capacity(sizes.len());
    let mut basis_name = "";
    for &k in &sizes {
        let basis = match space.kind {
            SpaceKind::Shift { .. } => BasisSet::haar(&space, k)?,
            SpaceKind::Interval { .. } => BasisSet::legendre(&space, k)?,
            SpaceKind::Circle => BasisSet::fourier(&space, k)?,
        };
        basis_name = basis.name();
        reports.push(commutator_defect(&space, &hf, &basis)?);
    }
    let mut csv = String::from("basis_size,commutator_norm,kernel_norm,defect\n");
    for r in &reports {
        csv.push_str(&format!("{},{:?},{:?},{:?}\n", r.basis_size, r.commutator_norm, r.kernel_norm, r.defect));
    }
    out.write("commutator.csv", &csv)?;
    let max_defect = reports.iter().map(|r| r.defect).fold(0.0, f64::max);
    let first = reports.first().map_or(0.0, |r| r.commutator_norm);
    let last = reports.last().map_or(0.0, |r| r.commutator_norm);
    let growth_ratio = if first > 0.0 { last / first } else { 1.0 };
    let pts = |f: fn(&crate::dini::CommutatorReport) -> f64| -> Vec<(f64, f64)> {
        reports.iter().map(|r| (r.basis_size as f64, f(r))).collect()
    };
    let series = [Series::new("commutator", pts(|r| r.commutator_norm)), Series::new("kernel", pts(|r| r.kernel_norm))];
    out.json(
        "commutator.json",
        &CommutatorSummary { multiplier: h, basis: basis_name, reports, growth_ratio, max_defect },
    )?;
    let spec = PlotSpec {
        title: "commutator norms".into(),
        x_label: "basis size".into(),
        y_label: "operator norm".into(),
        log_x: true,
        ..PlotSpec::default()
    };
    out.plot("commutator.svg", &series, &spec);
    if max_defect > cfg.tolerances.commutator {
        out.fail(format!("commutator defect {max_defect:e} exceeds tolerance {:e}", cfg.tolerances.commutator));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Conformal action

#[derive(Serialize)]
struct ConformalSummary {
    map: MobiusMap,
    identity_defect: f64,
    unitarity_defect: f64,
    unitarity_freq: usize,
    experiments: Vec<CommutatorGrowth>,
}

fn conformal_task(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let p = &cfg.params;
    p.only("task", &["a", "rotation", "kind", "alpha", "freqs", "samples", "unitarity_freq"])?;
    let a = p.f64_list("a")?.unwrap_or_else(|| vec![0.5, 0.0]);
    let a = match a[..] {
        [re] => Complex64::new(re, 0.0),
        [re, im] => Complex64::new(re, im),
        _ => return Err(param_err(p, "a", "`a` takes one or two numbers (re, im)".into())),
    };
    let map = MobiusMap::new(a, p.f64_or("rotation", 0.0)?).map_err(|e| param_err(p, "a", e.to_string()))?;
    let alpha = p.f64_or("alpha", 0.5)?;
    let kinds = match p.str_or("kind", "both") {
        "log" => vec![OperatorKind::Log],
        "fractional" => vec![OperatorKind::Fractional { alpha }],
        "both" => vec![OperatorKind::Log, OperatorKind::Fractional { alpha }],
        other => {
            return Err(param_err(p, "kind", format!("unknown kind `{other}` (expected log | fractional | both)")))
        }
    };
    let freqs = p.usize_list("freqs")?.unwrap_or_else(|| vec![32, 64, 128, 256]);
    let unitarity_freq = p.usize_or("unitarity_freq", 16)?;
    let identity_defect = conformal_identity_defect(&map, p.usize_or("samples", 64)?)?;
    let unitarity = unitarity_defect(&map, unitarity_freq, (8 * unitarity_freq).max(256))?;
    let experiments: Vec<CommutatorGrowth> =
        kinds.iter().map(|&k| commutator_growth(&map, k, &freqs)).collect::<Result<_>>()?;

    let mut csv = String::from("kind,max_freq,norm\n");
    let kind_name = |k: &OperatorKind| match k {
        OperatorKind::Log => "log".to_string(),
        OperatorKind::Fractional { alpha } => format!("fractional-{alpha}"),
    };
    for g in &experiments {
        for (k, n) in g.freq_list.iter().zip(&g.norms) {
            csv.push_str(&format!("{},{k},{n:?}\n", kind_name(&g.kind)));
        }
    }
    out.write("conformal.csv", &csv)?;
    let series: Vec<Series> = experiments
        .iter()
        .map(|g| {
            Series::new(kind_name(&g.kind), g.freq_list.iter().zip(&g.norms).map(|(&k, &n)| (k as f64, n)).collect())
        })
        .collect();
    out.json(
        "conformal.json",
        &ConformalSummary { map, identity_defect, unitarity_defect: unitarity, unitarity_freq, experiments },
    )?;
    let spec = PlotSpec {
        title: "commutator norms with the conformal unitary".into(),
        x_label: "K".into(),
        y_label: "operator norm".into(),
        log_x: true,
        ..PlotSpec::default()
    };
    out.plot("conformal.svg", &series, &spec);
    if identity_defect > cfg.tolerances.conformal {
        out.fail(format!("conformal identity defect {identity_defect:e} exceeds {:e}", cfg.tolerances.conformal));
    }
    if unitarity > cfg.tolerances.unitarity {
        out.fail(format!("unitarity defect {unitarity:e} exceeds {:e}", cfg.tolerances.unitarity));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Regularity

#[derive(Serialize)]
struct RegularitySummary {
    #[serde(rename = "estimated_C")]
    estimated_c: f64,
    delta: f64,
    diam: f64,
    regularity_constant: f64,
    sample_count: usize,
    seed: u64,
}

#[derive(Serialize)]
struct LemmaSummary {
    checks: Vec<LemmaCheck>,
    all_hold: bool,
}

fn ahlfors_task(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let p = &cfg.params;
    p.only("task", &["samples", "radii", "r_min", "r_max", "s"])?;
    let space = cfg.space()?;
    let samples = p.usize_or("samples", 100)?;
    let count = p.usize_or("radii", 13)?;
    let (r_min, r_max) = (p.f64_or("r_min", 1e-4)?, p.f64_or("r_max", 0.5)?);
    if samples == 0 || count < 2 || !(r_min > 0.0 && r_min < r_max && r_max <= 1.0) {
        return Err(param_err(
            p,
            "radii",
            "need samples >= 1, radii >= 2 and 0 < r_min < r_max <= 1 (fractions of the diameter)".into(),
        ));
    }
    let s_values = p.f64_list("s")?.unwrap_or_else(|| vec![0.25, 0.5, 1.0]);
    let radii: Vec<f64> =
        (0..count).map(|i| space.diam * r_min * (r_max / r_min).powf(i as f64 / (count - 1) as f64)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let centers = space.random_points(samples, &mut rng);
    let report = space.verify_ahlfors_at(&centers, &radii)?;
    let checks = lemma_checks(&space, &centers, &radii, &s_values)?;

    let mut csv = String::from("radius,min_ratio,max_ratio\n");
    for r in &report.per_radius {
        csv.push_str(&format!("{:?},{:?},{:?}\n", r.radius, r.min_ratio, r.max_ratio));
    }
    out.write("regularity.csv", &csv)?;
    out.json(
        "regularity.json",
        &RegularitySummary {
            estimated_c: report.estimated_c,
            delta: space.delta,
            diam: space.diam,
            regularity_constant: space.regularity_constant,
            sample_count: report.sample_count,
            seed: cfg.seed,
        },
    )?;

    let f = TestFunction::X.nodes(&space);
    let sweep_radii: Vec<f64> = radii.iter().copied().filter(|&r| r <= space.diam / 10.0 && r < 1.0).collect();
    let sweep = defect_sweep(&space, &f, &sweep_radii)?;
    let mut csv = String::from("r,defect\n");
    for (r, d) in &sweep {
        csv.push_str(&format!("{r:?},{d:?}\n"));
    }
    out.write("defect.csv", &csv)?;

    let all_hold = checks.iter().all(LemmaCheck::holds);
    for c in checks.iter().filter(|c| !c.holds()) {
        out.fail(format!("annulus estimate {:?} (s = {:?}) fails: observed {}", c.estimate, c.s, c.observed_max));
    }
    out.json("lemma.json", &LemmaSummary { checks, all_hold })?;
    if report.estimated_c > space.regularity_constant * (1.0 + 1e-9) {
        out.fail(format!("estimated regularity constant {} exceeds {}", report.estimated_c, space.regularity_constant));
    }
    let spec = PlotSpec {
        title: "ball measure over r^delta".into(),
        x_label: "r".into(),
        y_label: "ratio".into(),
        log_x: true,
        ..PlotSpec::default()
    };
    let pts = |f: fn(&crate::spaces::RadiusRatios) -> f64| -> Vec<(f64, f64)> {
        report.per_radius.iter().map(|r| (r.radius, f(r))).collect()
    };
    out.plot(
        "regularity.svg",
        &[Series::new("min", pts(|r| r.min_ratio)), Series::new("max", pts(|r| r.max_ratio))],
        &spec,
    );
    Ok(())
}
