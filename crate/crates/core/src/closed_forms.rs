//! Exact spectral models: Haar wavelets on shifts, Legendre polynomials on
//! intervals and Fourier modes on the circle.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{domain_err, Error, Result};
use crate::form_engine::{BasisFamily, BasisSet, EigenLevel, SpectralModel, SpectrumSource};
use crate::quadrature::gauss_legendre_on;
use crate::spaces::{Space, SpaceKind};

/// Harmonic number `h_n`.
pub fn harmonic(n: usize) -> f64 {
    (1..=n).rev().map(|k| 1.0 / k as f64).sum()
}

/// `P_0(t), ..., P_n(t)` (unnormalized Legendre polynomials).
pub fn legendre_values(max_degree: usize, t: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(max_degree + 1);
    p.push(1.0);
    if max_degree >= 1 {
        p.push(t);
    }
    for k in 2..=max_degree {
        let kf = k as f64;
        p.push(((2.0 * kf - 1.0) * t * p[k - 1] - (kf - 1.0) * p[k - 2]) / kf);
    }
    p
}

/// `1 + (1 - 1/N) n`, computed as an exact integer ratio.
pub fn shift_eigenvalue(symbols: usize, level: usize) -> f64 {
    (symbols + (symbols - 1) * level) as f64 / symbols as f64
}

/// `0` plus `1 + (1 - 1/N) n` with multiplicity `N^n (N - 1)` for `n <= max_level`.
pub fn shift_spectrum(symbols: usize, max_level: usize) -> Result<SpectralModel> {
    if symbols < 2 {
        return domain_err(format!("shift needs N >= 2, got {symbols}"));
    }
    let mut levels = vec![EigenLevel { value: 0.0, multiplicity: 1 }];
    for n in 0..=max_level {
        let multiplicity = (symbols as u64)
            .checked_pow(n as u32)
            .and_then(|m| m.checked_mul(symbols as u64 - 1))
            .ok_or_else(|| Error::ParameterDomain(format!("multiplicity of level {n} overflows u64")))?;
        levels.push(EigenLevel { value: shift_eigenvalue(symbols, n), multiplicity });
    }
    Ok(SpectralModel::from_levels(levels, SpectrumSource::ClosedForm))
}

/// Orthonormal wavelets of one level, sampled on the space.
pub fn haar_wavelets(space: &Space, level: usize) -> Result<BasisSet> {
    let SpaceKind::Shift { depth, .. } = space.kind else {
        return Err(Error::Domain("Haar wavelets live on a shift".into()));
    };
    if level >= depth {
        return domain_err(format!("wavelet level {level} must be below depth {depth}"));
    }
    BasisSet::haar_level(space, level)
}

/// `0` plus `2 h_n` for `1 <= n <= max_degree`, eigenvectors in Legendre coordinates.
pub fn interval_spectrum(max_degree: usize) -> Result<SpectralModel> {
    if max_degree < 1 {
        return domain_err("interval spectrum needs max_degree >= 1");
    }
    let mut levels = Vec::with_capacity(max_degree + 1);
    let mut h = 0.0;
    levels.push(EigenLevel { value: 0.0, multiplicity: 1 });
    for n in 1..=max_degree {
        h += 1.0 / n as f64;
        levels.push(EigenLevel { value: 2.0 * h, multiplicity: 1 });
    }
    let mut model = SpectralModel::from_levels(levels, SpectrumSource::ClosedForm);
    if max_degree <= 1024 {
        model.eigenvectors = Some(DMatrix::identity(max_degree + 1, max_degree + 1));
    }
    Ok(model)
}

/// `λ_k = ∫_0^{2π} (1 - cos ku) / (2 sin(u/2)) du` by Gauss-Legendre.
///
/// With `1 - cos ku = 2 sin²(ku/2)` the integrand is
/// `sin(u/2) (sin(ku/2) / sin(u/2))²`, bounded near `u = 0`; by symmetry the
/// rule runs over `[0, π]` and doubles.
pub fn circle_eigenvalue_quadrature(k: usize, quad_nodes: usize) -> f64 {
    let (u, w) = gauss_legendre_on(quad_nodes.div_ceil(2).max(2), 0.0, PI);
    let kf = k as f64;
    2.0 * u
        .iter()
        .zip(&w)
        .map(|(&u, &w)| {
            let s = (0.5 * u).sin();
            // Ratio sin(ku/2)/sin(u/2) extends continuously by k at u = 0.
            let ratio = if s == 0.0 { kf } else { (0.5 * kf * u).sin() / s };
            w * s * ratio * ratio
        })
        .sum::<f64>()
}

/// `4 Σ_{j<=k} 1/(2j - 1)`.
pub fn circle_eigenvalue_series(k: usize) -> f64 {
    4.0 * (1..=k).rev().map(|j| 1.0 / (2 * j - 1) as f64).sum::<f64>()
}

/// Circle spectrum from quadrature; errors when `quad_nodes < 8 max_freq`.
pub fn circle_spectrum(max_freq: usize, quad_nodes: usize) -> Result<SpectralModel> {
    if max_freq < 1 {
        return domain_err("circle spectrum needs max_freq >= 1");
    }
    if quad_nodes < 8 * max_freq {
        return Err(Error::Resolution(format!(
            "{quad_nodes} nodes cannot resolve frequency {max_freq} (need {})",
            8 * max_freq
        )));
    }
    Ok(circle_model((1..=max_freq).map(|k| circle_eigenvalue_quadrature(k, quad_nodes))))
}

/// Circle spectrum from the series `4 Σ 1/(2j - 1)`.
pub fn circle_spectrum_series(max_freq: usize) -> Result<SpectralModel> {
    if max_freq < 1 {
        return domain_err("circle spectrum needs max_freq >= 1");
    }
    let mut acc = 0.0;
    Ok(circle_model((1..=max_freq).map(|j| {
        acc += 4.0 / (2 * j - 1) as f64;
        acc
    })))
}

fn circle_model(values: impl Iterator<Item = f64>) -> SpectralModel {
    let levels = std::iter::once(EigenLevel { value: 0.0, multiplicity: 1 })
        .chain(values.map(|value| EigenLevel { value, multiplicity: 2 }))
        .collect();
    SpectralModel::from_levels(levels, SpectrumSource::ClosedForm)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum OracleFamily {
    Shift { symbols: usize },
    Interval,
    Circle,
}

/// A closed-form spectrum truncated at `truncation` levels beyond the kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleSpectrum {
    pub family: OracleFamily,
    /// Largest wavelet level, Legendre degree or frequency included.
    pub truncation: usize,
}

impl OracleSpectrum {
    pub fn new(family: OracleFamily, truncation: usize) -> Self {
        OracleSpectrum { family, truncation }
    }

    /// Oracle matching a catalog space.
    pub fn for_space(space: &Space, truncation: usize) -> Self {
        let family = match space.kind {
            SpaceKind::Shift { symbols, .. } => OracleFamily::Shift { symbols },
            SpaceKind::Interval { .. } => OracleFamily::Interval,
            SpaceKind::Circle => OracleFamily::Circle,
        };
        OracleSpectrum { family, truncation }
    }

    pub fn model(&self) -> Result<SpectralModel> {
        match self.family {
            OracleFamily::Shift { symbols } => shift_spectrum(symbols, self.truncation),
            OracleFamily::Interval => interval_spectrum(self.truncation),
            OracleFamily::Circle => circle_spectrum_series(self.truncation),
        }
    }

    /// Exact trace-class threshold `t_0`.
    pub fn t0_exact(&self) -> f64 {
        match self.family {
            OracleFamily::Shift { symbols } => {
                let n = symbols as f64;
                n * n.ln() / (n - 1.0)
            }
            OracleFamily::Interval | OracleFamily::Circle => 0.5,
        }
    }
}

/// Eigenvalue attached to each function of an oracle basis.
pub fn oracle_diagonal(basis: &BasisSet) -> Result<Vec<f64>> {
    match (basis.family, basis.space_kind) {
        (BasisFamily::Haar { levels }, SpaceKind::Shift { symbols, .. }) => {
            let mut d = vec![0.0];
            for level in 0..levels {
                let count = symbols.pow(level as u32) * (symbols - 1);
                d.extend(std::iter::repeat_n(shift_eigenvalue(symbols, level), count));
            }
            Ok(d)
        }
        (BasisFamily::HaarLevel { level }, SpaceKind::Shift { symbols, .. }) => {
            Ok(vec![shift_eigenvalue(symbols, level); basis.size()])
        }
        (BasisFamily::Legendre { max_degree }, SpaceKind::Interval { .. }) => {
            Ok((0..=max_degree).map(|n| 2.0 * harmonic(n)).collect())
        }
        (BasisFamily::Fourier { .. }, SpaceKind::Circle) => {
            Ok((0..basis.size()).map(|j| circle_eigenvalue_series(BasisSet::fourier_frequency(j))).collect())
        }
        _ => Err(Error::Domain(format!("{} basis has no closed-form spectrum", basis.name()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(m: &SpectralModel) -> Vec<(f64, u64)> {
        m.levels.iter().map(|l| (l.value, l.multiplicity)).collect()
    }

    #[test]
    fn shift_examples() {
        assert_eq!(pairs(&shift_spectrum(2, 2).unwrap()), vec![(0.0, 1), (1.0, 1), (1.5, 2), (2.0, 4)]);
        assert_eq!(pairs(&shift_spectrum(3, 1).unwrap()), vec![(0.0, 1), (1.0, 2), (5.0 / 3.0, 6)]);
        assert_eq!(pairs(&shift_spectrum(2, 0).unwrap()), vec![(0.0, 1), (1.0, 1)]);
    }

    #[test]
    fn wavelets() {
        let s = Space::shift(2, 2.0, 4).unwrap();
        let h0 = haar_wavelets(&s, 0).unwrap();
        assert_eq!(h0.size(), 1);
        let mut vals: Vec<f64> = h0.values.column(0).iter().copied().collect();
        vals.dedup();
        assert_eq!(vals, vec![1.0, -1.0]);
        let h1 = haar_wavelets(&s, 1).unwrap();
        assert_eq!(h1.size(), 2);
        for p in 0..s.node_count() {
            assert!(h1.values[(p, 0)] == 0.0 || h1.values[(p, 1)] == 0.0);
        }
        for j in 0..2 {
            let mean: f64 = (0..16).map(|p| s.weights()[p] * h1.values[(p, j)]).sum();
            assert!(mean.abs() < 1e-14);
        }
        assert!(haar_wavelets(&s, 4).is_err());
    }

    #[test]
    fn interval_examples() {
        let m = interval_spectrum(3).unwrap();
        let want = [0.0, 2.0, 3.0, 11.0 / 3.0];
        for (l, w) in m.levels.iter().zip(want) {
            assert!((l.value - w).abs() < 1e-15);
        }
        let m = interval_spectrum(40).unwrap();
        for n in 1..40 {
            let gap = m.levels[n + 1].value - m.levels[n].value;
            assert!((gap - 2.0 / (n + 1) as f64).abs() < 1e-13);
        }
    }

    #[test]
    fn circle_quadrature_matches_series() {
        assert!((circle_eigenvalue_quadrature(1, 64) - 4.0).abs() < 1e-13);
        assert!((circle_eigenvalue_quadrature(2, 64) - 16.0 / 3.0).abs() < 1e-13);
        assert!((circle_eigenvalue_quadrature(3, 64) - 92.0 / 15.0).abs() < 1e-13);
        let q = circle_spectrum(200, 1600).unwrap();
        let s = circle_spectrum_series(200).unwrap();
        for (a, b) in q.levels.iter().zip(&s.levels) {
            assert!((a.value - b.value).abs() < 1e-10);
            assert_eq!(a.multiplicity, b.multiplicity);
        }
        assert!(matches!(circle_spectrum(10, 79), Err(Error::Resolution(_))));
    }

    #[test]
    fn thresholds() {
        let t = OracleSpectrum::new(OracleFamily::Shift { symbols: 2 }, 10).t0_exact();
        assert!((t - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(OracleSpectrum::new(OracleFamily::Interval, 10).t0_exact(), 0.5);
    }
}
