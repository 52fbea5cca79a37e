//! Heat traces, logarithmic growth fits and singular-value profiles.

use rayon::prelude::*;
use serde::Serialize;

use crate::closed_forms::{shift_eigenvalue, OracleFamily, OracleSpectrum};
use crate::dini::least_squares;
use crate::error::{domain_err, Error, Result};
use crate::form_engine::SpectralModel;

/// Largest relative fit residual accepted by [`log_growth_fit`].
pub const FIT_RESIDUAL_LIMIT: f64 = 0.1;
/// Cap on multiplicity expansion.
pub const EXPANSION_CAP: usize = 1_000_000;
/// Increments inspected by the generic verdict.
const WINDOW: usize = 10;
/// Largest ratio of consecutive increments counted as geometric decay.
const DECAY_RATIO: f64 = 0.98;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converged,
    Diverging,
    Undetermined,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::Diverging => "diverging",
            Verdict::Undetermined => "undetermined",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum TraceInput<'a> {
    Model(&'a SpectralModel),
    Oracle(&'a OracleSpectrum),
}

#[derive(Clone, Debug, Serialize)]
pub struct LogGrowthFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual divided by the range of the fitted eigenvalues.
    pub residual: f64,
    /// Expanded 1-based index window `[lo, hi]`.
    pub window: (u128, u128),
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct HeatTraceReport {
    pub t_grid: Vec<f64>,
    /// Truncation levels: number of eigenvalue groups beyond the first that
    /// enter each partial sum.
    pub levels: Vec<usize>,
    /// `partial_sums[i][j]` for `t_grid[i]` and `levels[j]`.
    pub partial_sums: Vec<Vec<f64>>,
    pub verdicts: Vec<Verdict>,
    pub t0_estimate: Option<f64>,
    pub t0_exact: Option<f64>,
    pub fit: Option<LogGrowthFit>,
}

impl HeatTraceReport {
    /// Partial sum at the deepest level for each `t`.
    pub fn traces(&self) -> Vec<f64> {
        self.partial_sums.iter().map(|s| *s.last().unwrap_or(&0.0)).collect()
    }

    /// Rows `(t, level, partial_sum, verdict)`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,level,partial_sum,verdict\n");
        for (i, t) in self.t_grid.iter().enumerate() {
            for (j, level) in self.levels.iter().enumerate() {
                s.push_str(&format!("{t:?},{level},{:?},{}\n", self.partial_sums[i][j], self.verdicts[i].as_str()));
            }
        }
        s
    }
}

/// Default truncation levels: every level for shift oracles and for models
/// with few groups, dyadic otherwise.
pub fn default_levels(distinct: usize, dyadic: bool) -> Vec<usize> {
    let top = distinct.saturating_sub(1);
    if !dyadic {
        return (0..=top).collect();
    }
    let mut v: Vec<usize> =
        std::iter::successors(Some(1usize), |l| l.checked_mul(2)).take_while(|&l| l <= top).collect();
    if v.last() != Some(&top) {
        v.push(top);
    }
    v
}

/// Heat-trace partial sums `Σ mult e^{-tλ}` and convergence verdicts.
pub fn heat_trace(input: TraceInput, t_grid: &[f64], levels: &[usize]) -> Result<HeatTraceReport> {
    if t_grid.iter().any(|&t| !(t > 0.0)) {
        return domain_err("heat trace needs t > 0");
    }
    let (model, oracle) = match input {
        TraceInput::Model(m) => (m.clone(), None),
        TraceInput::Oracle(o) => (o.model()?, Some(*o)),
    };
    if model.levels.is_empty() {
        return Err(Error::Data("spectral model is empty".into()));
    }
    let shift_symbols = match oracle.map(|o| o.family) {
        Some(OracleFamily::Shift { symbols }) => Some(symbols),
        _ => None,
    };
    let levels = if levels.is_empty() {
        default_levels(model.distinct_count(), shift_symbols.is_none())
    } else {
        let mut l = levels.to_vec();
        l.sort_unstable();
        l.dedup();
        l
    };
    if let Some(&bad) = levels.iter().find(|&&l| l >= model.distinct_count()) {
        return domain_err(format!("level {bad} exceeds the {} model groups", model.distinct_count()));
    }

    let rows: Vec<(Vec<f64>, Verdict)> = t_grid
        .par_iter()
        .map(|&t| {
            let sums = partial_sums(&model, t, &levels, shift_symbols);
            let verdict = match shift_symbols {
                Some(n) => shift_ratio_verdict(n, t),
                None => partial_sum_verdict(&sums),
            };
            (sums, verdict)
        })
        .collect();

    let fit = log_growth_fit(&model).ok();
    Ok(HeatTraceReport {
        t_grid: t_grid.to_vec(),
        levels,
        partial_sums: rows.iter().map(|r| r.0.clone()).collect(),
        verdicts: rows.iter().map(|r| r.1).collect(),
        t0_estimate: fit.as_ref().map(|f| 1.0 / f.slope),
        t0_exact: oracle.map(|o| o.t0_exact()),
        fit,
    })
}

fn partial_sums(model: &SpectralModel, t: f64, levels: &[usize], shift: Option<usize>) -> Vec<f64> {
    let mut out = Vec::with_capacity(levels.len());
    let mut acc = 0.0;
    let mut next = 0;
    for (g, level) in model.levels.iter().enumerate() {
        let term = match shift {
            // Group g >= 1 is wavelet level g - 1: N^{g-1}(N-1) e^{-tλ} in log space.
            Some(n) if g >= 1 => {
                let nf = n as f64;
                ((g - 1) as f64 * nf.ln() + (nf - 1.0).ln() - t * shift_eigenvalue(n, g - 1)).exp()
            }
            _ => level.multiplicity as f64 * (-t * level.value).exp(),
        };
        acc += term;
        while next < levels.len() && levels[next] == g {
            out.push(acc);
            next += 1;
        }
        if next == levels.len() {
            break;
        }
    }
    out
}

/// Exact verdict on the full shift: the level terms form a geometric series
/// of ratio `N e^{-t(1 - 1/N)}`.
pub fn shift_ratio_verdict(symbols: usize, t: f64) -> Verdict {
    let n = symbols as f64;
    if n * (-t * (1.0 - 1.0 / n)).exp() < 1.0 {
        Verdict::Converged
    } else {
        Verdict::Diverging
    }
}

/// Verdict from the increments of a sequence of partial sums.
///
/// Diverging when the last ten increments are nondecreasing; converged when
/// the final increment is below `1e-10` of the sum, or when the last ten
/// increments decay geometrically (each ratio at most 0.98); undetermined
/// otherwise.
pub fn partial_sum_verdict(sums: &[f64]) -> Verdict {
    let Some(&last) = sums.last() else { return Verdict::Undetermined };
    if !last.is_finite() {
        return Verdict::Diverging;
    }
    let inc: Vec<f64> = sums.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(&final_inc) = inc.last() {
        if final_inc < 1e-10 * last {
            return Verdict::Converged;
        }
    }
    if inc.len() < WINDOW {
        return Verdict::Undetermined;
    }
    let tail = &inc[inc.len() - WINDOW..];
    if tail.windows(2).all(|w| w[1] >= w[0]) {
        return Verdict::Diverging;
    }
    if tail.windows(2).all(|w| w[0] > 0.0 && w[1] <= DECAY_RATIO * w[0]) {
        return Verdict::Converged;
    }
    Verdict::Undetermined
}

/// Least-squares fit `λ_n ≈ c log n + b` on the expanded sequence, sampled
/// log-uniformly over `[⌊√L⌋, L]` for `L` expanded entries.
pub fn log_growth_fit(model: &SpectralModel) -> Result<LogGrowthFit> {
    let len = model.expanded_len();
    if len < 50 {
        return domain_err(format!("growth fit needs at least 50 eigenvalues, got {len}"));
    }
    let lo = ((len as f64).sqrt().floor() as u128).max(2);
    log_growth_fit_window(model, lo, len)
}

/// As [`log_growth_fit`] over the 1-based expanded index window `[lo, hi]`.
pub fn log_growth_fit_window(model: &SpectralModel, lo: u128, hi: u128) -> Result<LogGrowthFit> {
    if lo < 1 || hi <= lo || hi > model.expanded_len() {
        return domain_err(format!("invalid fit window [{lo}, {hi}]"));
    }
    const SAMPLES: usize = 4000;
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut idx: Vec<u128> = (0..SAMPLES)
        .map(|k| (a + (b - a) * k as f64 / (SAMPLES - 1) as f64).exp().round() as u128)
        .map(|i| i.clamp(lo, hi))
        .collect();
    idx.dedup();
    let xs: Vec<f64> = idx.iter().map(|&i| (i as f64).ln()).collect();
    let cumulative = model.cumulative_counts();
    let ys: Vec<f64> = idx.iter().map(|&i| model.levels[cumulative.partition_point(|&c| c < i)].value).collect();
    let span = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max) - ys.iter().copied().fold(f64::INFINITY, f64::min);
    if !(span > 0.0) {
        return Err(Error::Undetermined(format!("eigenvalues are constant over [{lo}, {hi}]; no growth to fit")));
    }
    let (slope, intercept) = least_squares(&xs, &ys);
    let rms =
        (xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
    let residual = rms / span;
    let fit = LogGrowthFit { slope, intercept, residual, window: (lo, hi), samples: xs.len() };
    if residual > FIT_RESIDUAL_LIMIT || !(slope > 0.0) {
        return Err(Error::Undetermined(format!(
            "log fit slope {slope:.6}, relative residual {residual:.4} over [{lo}, {hi}]"
        )));
    }
    Ok(fit)
}

/// Trace-class threshold estimate `1/c` from the logarithmic growth rate.
pub fn trace_threshold(model: &SpectralModel) -> Result<f64> {
    Ok(1.0 / log_growth_fit(model)?.slope)
}

#[derive(Clone, Debug, Serialize)]
pub struct SingularProfile {
    /// `s_n = 1/(1 + λ_n)` for `n = 1, 2, ...`.
    pub s: Vec<f64>,
    /// `max_n s_n log(n + 2)`.
    pub li_bound: f64,
    /// Max over min of `s_n log(n + 2)` for `n >= 10`.
    pub tail_ratio: f64,
}

/// Singular values of `(1 + Δ)^{-1}` over the first `count` expanded indices.
pub fn singular_value_profile(model: &SpectralModel, count: usize) -> SingularProfile {
    let s: Vec<f64> = model.expanded(count.min(EXPANSION_CAP)).iter().map(|l| 1.0 / (1.0 + l)).collect();
    let scaled: Vec<f64> = s.iter().enumerate().map(|(i, v)| v * ((i + 1) as f64 + 2.0).ln()).collect();
    let li_bound = scaled.iter().copied().fold(0.0, f64::max);
    let tail = scaled.get(9..).unwrap_or(&[]);
    let tail_ratio = if tail.is_empty() {
        1.0
    } else {
        tail.iter().copied().fold(0.0, f64::max) / tail.iter().copied().fold(f64::INFINITY, f64::min)
    };
    SingularProfile { s, li_bound, tail_ratio }
}

/// Range of `s_n((1 + Δ^{1/2})^{-1})² / s_n((1 + Δ)^{-1}) = (1 + λ)/(1 + √λ)²`.
pub fn square_root_relation(model: &SpectralModel, count: usize) -> (f64, f64) {
    model.expanded(count.min(EXPANSION_CAP)).iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &l| {
        let l = l.max(0.0);
        let r = (1.0 + l) / (1.0 + l.sqrt()).powi(2);
        (lo.min(r), hi.max(r))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::{interval_spectrum, shift_spectrum};

    fn shift_oracle(level: usize) -> OracleSpectrum {
        OracleSpectrum::new(OracleFamily::Shift { symbols: 2 }, level)
    }

    #[test]
    fn shift_trace_at_two() {
        let o = shift_oracle(60);
        let r = heat_trace(TraceInput::Oracle(&o), &[2.0], &[41, 60]).unwrap();
        let e = 1f64.exp();
        let want = 1.0 + (-2.0f64).exp() / (1.0 - 2.0 / e);
        // Tail after level 40 is e^{-2} (2/e)^41 / (1 - 2/e) < 1e-5.
        assert!((r.partial_sums[0][0] - want).abs() < 1e-5);
        assert!((r.partial_sums[0][1] - want).abs() < 1e-7);
        assert_eq!(r.verdicts[0], Verdict::Converged);
        let r = heat_trace(TraceInput::Oracle(&o), &[1.3], &[]).unwrap();
        assert_eq!(r.verdicts[0], Verdict::Diverging);
        assert!((r.t0_exact.unwrap() - 2.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn partial_sums_are_nondecreasing() {
        let m = interval_spectrum(300).unwrap();
        let r = heat_trace(TraceInput::Model(&m), &[0.3, 1.0], &[]).unwrap();
        for row in &r.partial_sums {
            assert!(row.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn generic_verdicts_match_ratio_test_on_shift() {
        let o = shift_oracle(60);
        let t0 = o.t0_exact();
        for t in [t0 - 0.3, t0 - 0.05, t0 + 0.05, t0 + 0.4, 3.0] {
            let r = heat_trace(TraceInput::Oracle(&o), &[t], &[]).unwrap();
            assert_eq!(partial_sum_verdict(&r.partial_sums[0]), r.verdicts[0], "t = {t}");
        }
    }

    #[test]
    fn verdict_rules() {
        let growing: Vec<f64> = (0..20).map(|i| (i * i) as f64).collect();
        assert_eq!(partial_sum_verdict(&growing), Verdict::Diverging);
        let settled: Vec<f64> = (0..20).map(|i| 2.0 - 0.5f64.powi(i)).collect();
        assert_eq!(partial_sum_verdict(&settled), Verdict::Converged);
        assert_eq!(partial_sum_verdict(&[1.0, 2.0]), Verdict::Undetermined);
    }

    #[test]
    fn fits() {
        let m = shift_spectrum(2, 14).unwrap();
        let f = log_growth_fit(&m).unwrap();
        assert!((f.slope - 0.5 / 2f64.ln()).abs() < 0.03, "{f:?}");
        let shifted = log_growth_fit(&m.shifted(5.0)).unwrap();
        assert!((shifted.slope - f.slope).abs() < 1e-9);
        assert!((shifted.intercept - f.intercept - 5.0).abs() < 1e-9);
        let i = interval_spectrum(2000).unwrap();
        assert!((log_growth_fit(&i).unwrap().slope - 2.0).abs() < 0.05);
        assert!(log_growth_fit(&interval_spectrum(10).unwrap()).is_err());
    }

    #[test]
    fn singular_profiles() {
        for m in [shift_spectrum(2, 20).unwrap(), interval_spectrum(1000).unwrap()] {
            let p = singular_value_profile(&m, 1000);
            assert_eq!(p.s[0], 1.0);
            assert!(p.s.windows(2).all(|w| w[1] <= w[0]));
            assert!(p.li_bound.is_finite());
        }
        let p = singular_value_profile(&shift_spectrum(2, 20).unwrap(), 100_000);
        assert!(p.li_bound <= 3.2);
        let (lo, hi) = square_root_relation(&interval_spectrum(1000).unwrap(), 1000);
        assert!(lo >= 0.5 && hi <= 1.0);
    }

    #[test]
    fn dyadic_levels() {
        assert_eq!(default_levels(10, true), vec![1, 2, 4, 8, 9]);
        assert_eq!(default_levels(4, false), vec![0, 1, 2, 3]);
    }
}
