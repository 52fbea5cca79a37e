//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use logdirichlet::cli::{run_config, ConfigFile, ExperimentConfig, Task};
use logdirichlet::closed_forms::{
    circle_spectrum, circle_spectrum_series, interval_spectrum, shift_spectrum, OracleFamily, OracleSpectrum,
};
use logdirichlet::conformal::{
    commutator_growth, conformal_identity_defect, unitarity_defect, MobiusMap, OperatorKind,
};
use logdirichlet::dini::{
    commutator_defect, dini_algebra_defect, geometric_t_grid, modulus_of_continuity, product_profiles,
};
use logdirichlet::form_engine::exact::ExactShiftForm;
use logdirichlet::form_engine::{
    apply_logdirichlet, assemble_form_matrix, solve_spectrum, BasisSet, DEFAULT_MULTIPLICITY_TOL,
};
use logdirichlet::quadrature::{lemma_checks, log_tail_integral, Estimate};
use logdirichlet::spaces::{Point, Space};
use logdirichlet::spectra::{heat_trace, singular_value_profile, trace_threshold, TraceInput, Verdict};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ratio(q: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(q), BigInt::from(d))
}

/// `P_0(x), ..., P_n(x)` by Bonnet's recursion.
fn legendre(n: usize, x: f64) -> Vec<f64> {
    let mut p = vec![1.0, x];
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p[k] - kf * p[k - 1]) / (kf + 1.0);
        p.push(next);
    }
    p.truncate(n + 1);
    p
}

fn harmonic(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

fn shift_oracle_equality() -> Outcome {
    let space = Space::shift(2, 2.0, 6).unwrap();
    let form = ExactShiftForm::assemble(&space).unwrap();
    let mut candidates = vec![ratio(0, 1)];
    candidates.extend((0..=5).map(|n| ratio(2 + n, 2)));
    let exact = form.certify(&candidates);
    let mut want = vec![(ratio(0, 1), 1usize)];
    want.extend((0..=5).map(|n| (ratio(2 + n as i64, 2), 1usize << n)));
    let exact_ok = exact.complete && exact.levels == want;

    let basis = BasisSet::cylinder_indicators(&space, 6).unwrap();
    let model = solve_spectrum(&assemble_form_matrix(&space, &basis).unwrap(), DEFAULT_MULTIPLICITY_TOL).unwrap();
    let mut expected = vec![0.0];
    for n in 0..=5usize {
        expected.extend(std::iter::repeat_n(1.0 + n as f64 / 2.0, 1 << n));
    }
    let float_err = model.raw.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let float_ok = model.raw.len() == expected.len() && float_err <= 1e-10;
    outcome(
        exact_ok && float_ok,
        format!("exact levels match: {exact_ok}, complete: {}, float max error {float_err:.2e}", exact.complete),
    )
}

fn tuck_identity() -> Outcome {
    let space = Space::interval(-1.0, 1.0, 2000).unwrap();
    let xs: Vec<f64> = (0..20).map(|i| -0.95 + 0.1 * i as f64).collect();
    let mut worst_rel: f64 = 0.0;
    let mut worst_sup: f64 = 0.0;
    for n in 0..=10usize {
        let p = move |pt: &Point| legendre(n, pt.scalar().unwrap())[n];
        let target_scale = 2.0 * harmonic(n);
        for &x in &xs {
            let got = apply_logdirichlet(&space, &p, &Point::Coordinate(x)).unwrap();
            let want = target_scale * legendre(n, x)[n];
            let err = (got - want).abs();
            worst_sup = worst_sup.max(err / target_scale.max(1.0));
            if want.abs() > 0.0 {
                worst_rel = worst_rel.max(err / want.abs());
            }
        }
    }
    let basis = BasisSet::legendre(&space, 10).unwrap();
    let model = solve_spectrum(&assemble_form_matrix(&space, &basis).unwrap(), DEFAULT_MULTIPLICITY_TOL).unwrap();
    let eig_err = model.raw.iter().enumerate().map(|(n, v)| (v - 2.0 * harmonic(n)).abs()).fold(0.0, f64::max);
    outcome(
        worst_rel <= 1e-6 && eig_err <= 1e-5 && model.raw.len() == 11,
        format!(
            "pointwise relative error {worst_rel:.2e} (sup-scaled {worst_sup:.2e}), eigenvalue error {eig_err:.2e}"
        ),
    )
}

fn trace_thresholds() -> Outcome {
    let two_ln2 = 2.0 * 2f64.ln();
    let cases = [
        ("shift", shift_spectrum(2, 14).unwrap(), two_ln2, OracleSpectrum::new(OracleFamily::Shift { symbols: 2 }, 40)),
        ("interval", interval_spectrum(500).unwrap(), 0.5, OracleSpectrum::new(OracleFamily::Interval, 1 << 17)),
        ("circle", circle_spectrum(500, 4000).unwrap(), 0.5, OracleSpectrum::new(OracleFamily::Circle, 1 << 17)),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, model, exact, flip_oracle) in cases {
        let t0 = trace_threshold(&model).unwrap();
        let rel = (t0 - exact).abs() / exact;
        let report = heat_trace(TraceInput::Oracle(&flip_oracle), &[exact - 0.1, exact + 0.1], &[]).unwrap();
        let flips = report.verdicts == [Verdict::Diverging, Verdict::Converged];
        pass &= rel <= 0.05 && flips;
        detail.push(format!("{name} t0={t0:.4} ({:.2}%) flip={flips}", 100.0 * rel));
    }
    outcome(pass, detail.join("; "))
}

fn shift_heat_trace() -> Outcome {
    let oracle = OracleSpectrum::new(OracleFamily::Shift { symbols: 2 }, 40);
    let report = heat_trace(TraceInput::Oracle(&oracle), &[2.0], &[]).unwrap();
    let got = report.traces()[0];
    let e = 1f64.exp();
    let want = 1.0 + (-2f64).exp() / (1.0 - 2.0 / e);
    outcome((got - want).abs() <= 1e-4, format!("trace {got:.8} vs {want:.8}"))
}

fn li_summability() -> Outcome {
    let count = 100_000;
    let cases = [
        ("shift", shift_spectrum(2, 17).unwrap()),
        ("interval", interval_spectrum(count).unwrap()),
        ("circle", circle_spectrum_series(count / 2).unwrap()),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, model) in cases {
        let profile = singular_value_profile(&model, count);
        // Independent tail ratio from the expanded eigenvalues.
        let values = model.expanded(count);
        let scaled: Vec<f64> =
            values.iter().enumerate().skip(9).map(|(i, l)| ((i + 3) as f64).ln() / (1.0 + l)).collect();
        let hi = scaled.iter().copied().fold(0.0, f64::max);
        let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        let ok = values.len() == count && profile.tail_ratio <= 4.0 && (hi / lo - profile.tail_ratio).abs() < 1e-9;
        pass &= ok;
        detail.push(format!("{name} ratio {:.3}", profile.tail_ratio));
    }
    outcome(pass, detail.join("; "))
}

fn annulus_estimates() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, space) in [
        ("shift2", Space::shift(2, 2.0, 10).unwrap()),
        ("shift3", Space::shift(3, 3.0, 6).unwrap()),
        ("interval", Space::interval(-1.0, 1.0, 64).unwrap()),
        ("circle", Space::circle(64).unwrap()),
    ] {
        let centers = space.random_points(100, &mut rng);
        let radii: Vec<f64> = (0..=15).map(|k| space.diam * 10f64.powf(-4.0 + 4.0 * k as f64 / 15.0)).collect();
        let mut checks = lemma_checks(&space, &centers, &radii, &[0.25, 0.5, 1.0]).unwrap();
        let tail_radii: Vec<f64> = (0..=12).map(|k| 10f64.powf(-4.0 + k as f64 / 4.0)).collect();
        let band = lemma_checks(&space, &centers, &tail_radii, &[1.0]).unwrap().pop().unwrap();
        assert_eq!(band.estimate, Estimate::LogTail);
        checks.push(band.clone());
        pass &= checks.iter().all(|c| c.holds());
        pass &= band.observed_min > 0.0 && band.observed_max / band.observed_min < 10.0;
        detail.push(format!("{name} band [{:.3}, {:.3}]", band.observed_min, band.observed_max));
    }
    // Closed-form anchors for the log tail.
    let iv = Space::interval(-1.0, 1.0, 16).unwrap();
    let a = log_tail_integral(&iv, &Point::Coordinate(0.0), 0.1).unwrap();
    let sh = Space::shift(2, 2.0, 8).unwrap();
    let b = log_tail_integral(&sh, sh.node(3), 2f64.powi(-6)).unwrap();
    let anchors = (a - 2.0 * 10f64.ln()).abs() < 1e-12 && (b - 3.0).abs() < 1e-12;
    pass &= anchors;
    detail.push(format!("anchors {anchors}"));
    outcome(pass, detail.join("; "))
}

fn commutator_identity() -> Outcome {
    let space = Space::shift(2, 2.0, 6).unwrap();
    let form = ExactShiftForm::assemble(&space).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h: Vec<BigRational> =
        (0..space.node_count()).map(|_| ratio(rng.gen_range(-50..=50), rng.gen_range(1..=9))).collect();
    let shift_defect = form.commutator_defect(&h);
    let shift_ok = shift_defect == ratio(0, 1);

    let iv = Space::interval(-1.0, 1.0, 256).unwrap();
    let hx = |p: &Point| p.scalar().unwrap();
    let mut norms = Vec::new();
    let mut worst: f64 = 0.0;
    for degree in [6, 12, 24] {
        let r = commutator_defect(&iv, &hx, &BasisSet::legendre(&iv, degree).unwrap()).unwrap();
        worst = worst.max(r.defect);
        norms.push(r.commutator_norm);
    }
    let hi = norms.iter().copied().fold(0.0, f64::max);
    let lo = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let bounded = hi / lo <= 1.1;
    outcome(
        shift_ok && worst <= 1e-3 && bounded,
        format!("shift exact defect {shift_defect}, interval defect {worst:.2e}, norms {norms:.4?}"),
    )
}

fn conformal_contrast() -> Outcome {
    let map = MobiusMap::new(Complex64::new(0.5, 0.0), 0.0).unwrap();
    let freqs = [32, 64, 128, 256];
    let log = commutator_growth(&map, OperatorKind::Log, &freqs).unwrap();
    let frac = commutator_growth(&map, OperatorKind::Fractional { alpha: 0.5 }, &freqs).unwrap();
    let range = |v: &[f64]| v.iter().copied().fold(0.0, f64::max) / v.iter().copied().fold(f64::INFINITY, f64::min);
    let log_ok = range(&log.norms) <= 2.0;
    let increasing = frac.norms.windows(2).all(|w| w[1] > w[0]);
    let growth = frac.norms[3] / frac.norms[0];
    let frac_ok = increasing && growth >= 4.0;
    let identity = conformal_identity_defect(&map, 128).unwrap();
    let unitarity = unitarity_defect(&map, 16, 512).unwrap();
    outcome(
        log_ok && frac_ok && identity <= 1e-10 && unitarity <= 1e-6,
        format!(
            "log range {:.4}, fractional final/initial {growth:.3} (increasing {increasing}), identity {identity:.1e}, unitarity {unitarity:.1e}",
            range(&log.norms)
        ),
    )
}

fn dini_suite() -> Outcome {
    let space = Space::interval(0.0, 1.0, 512).unwrap();
    let grid = geometric_t_grid(4, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = f64::NEG_INFINITY;
    let mut submult = true;
    let xs: Vec<f64> = space.quadrature.nodes.iter().map(|p| p.scalar().unwrap()).collect();
    for _ in 0..50 {
        let mut draw = || {
            let (c, p, s) = (rng.gen_range(0.0..1.0), rng.gen_range(0.1..1.0), rng.gen_range(-2.0..2.0));
            xs.iter().map(|x: &f64| s * (x - c).abs().powf(p)).collect::<Vec<f64>>()
        };
        let (f, g) = (draw(), draw());
        worst = worst.max(dini_algebra_defect(&space, &f, &g, &grid).unwrap());
        let [pf, pg, pfg] = product_profiles(&space, &f, &g, &grid).unwrap();
        submult &= pfg.dini_norm <= pf.dini_norm * pg.dini_norm * (1.0 + 1e-12);
    }
    let mut constants = Vec::new();
    for refinement in [4, 8, 16, 32] {
        let p = modulus_of_continuity(&space, &xs, &geometric_t_grid(refinement, 8)).unwrap();
        constants.push(p.dini_constant);
    }
    let din_ok = constants.iter().all(|c| (c - 1.0).abs() <= 0.02);
    outcome(
        worst <= 1e-12 && din_ok && submult,
        format!("max algebra defect {worst:.2e}, Din(x) over refinements {constants:.4?}, submultiplicative {submult}"),
    )
}

const CONFIGS: [(&str, Task, &str); 8] = [
    ("spectrum-shift", Task::Spectrum, "[space]\nkind = shift\nN = 2\ndepth = 4\n"),
    ("spectrum-interval", Task::Spectrum, "[space]\nkind = interval\nnodes = 128\n[task]\nmax_degree = 8\n"),
    ("heat-trace", Task::HeatTrace, "[space]\nkind = shift\nN = 2\n[task]\nt = 1, 2, 3\n"),
    ("threshold", Task::Threshold, "[space]\nkind = interval\nnodes = 32\n"),
    ("dini", Task::Dini, "[space]\nkind = interval\na = 0\nb = 1\nnodes = 256\n[task]\nsecond = sqrt\npairs = 5\n"),
    ("commutator", Task::Commutator, "[space]\nkind = interval\nnodes = 128\n[task]\nsizes = 4, 8\n"),
    ("conformal", Task::Conformal, "[task]\nfreqs = 8, 16\n"),
    ("verify-ahlfors", Task::VerifyAhlfors, "[space]\nkind = circle\nnodes = 64\n[task]\nsamples = 20\n"),
];

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut mismatched = Vec::new();
    for (name, task, text) in CONFIGS {
        let file = ConfigFile::parse(text).unwrap();
        let mut runs = Vec::new();
        for rep in 0..2 {
            let dir = root.path().join(format!("{name}-{rep}"));
            let cfg = ExperimentConfig::from_file(&file, task, Some(dir.clone()), Some(2024), true).unwrap();
            run_config(&cfg).unwrap();
            runs.push(snapshot(&dir));
        }
        if runs[0] != runs[1] || runs[0].is_empty() {
            mismatched.push(name);
        }
    }
    outcome(mismatched.is_empty(), format!("{} experiments, mismatched: {mismatched:?}", CONFIGS.len()))
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    let criteria: [Criterion; 10] = [
        ("shift oracle equality", shift_oracle_equality, Some(Duration::from_secs(10))),
        ("Legendre diagonalization", tuck_identity, Some(Duration::from_secs(60))),
        ("trace thresholds", trace_thresholds, None),
        ("shift heat trace value", shift_heat_trace, None),
        ("Li-summability profile", li_summability, None),
        ("annulus estimates", annulus_estimates, None),
        ("commutator identity", commutator_identity, None),
        ("conformal contrast", conformal_contrast, Some(Duration::from_secs(120))),
        ("Dini suite", dini_suite, None),
        ("determinism", determinism, None),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut result = run();
        let elapsed = start.elapsed();
        if let Some(limit) = limit {
            if elapsed > *limit {
                result.pass = false;
                result.detail.push_str(&format!("; runtime {elapsed:.1?} exceeds {limit:?}"));
            }
        }
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} [{:2}] {name}: {} ({elapsed:.2?})",
            if result.pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
