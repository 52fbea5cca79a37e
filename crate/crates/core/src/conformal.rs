//! Disk automorphisms acting on the circle, their unitaries
//! `U(γ) f(x) = |(γ^{-1})'(x)|^{1/2} f(γ^{-1} x)`, and the commutators of
//! `U(γ)` with the logarithmic and fractional Laplacians.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::closed_forms::circle_eigenvalue_series;
use crate::dini::{least_squares, spectral_norm};
use crate::error::{domain_err, Error, Result};
use crate::form_engine::BasisSet;
use crate::quadrature::{gauss_legendre_on, integrate_with_breaks};
use crate::spaces::chord;

/// `γ(z) = e^{iφ} (z - a) / (1 - ā z)` with `|a| < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MobiusMap {
    pub a: (f64, f64),
    pub rotation: f64,
}

impl MobiusMap {
    pub fn new(a: Complex64, rotation: f64) -> Result<Self> {
        if !(a.norm() < 1.0) {
            return domain_err(format!("Möbius parameter must lie in the open disk, |a| = {}", a.norm()));
        }
        Ok(MobiusMap { a: (a.re, a.im), rotation })
    }

    pub fn identity() -> Self {
        MobiusMap { a: (0.0, 0.0), rotation: 0.0 }
    }

    pub fn rotation(phi: f64) -> Self {
        MobiusMap { a: (0.0, 0.0), rotation: phi }
    }

    fn a(&self) -> Complex64 {
        Complex64::new(self.a.0, self.a.1)
    }

    /// Image of a point of the closed disk.
    pub fn apply(&self, z: Complex64) -> Complex64 {
        let a = self.a();
        if a == Complex64::new(0.0, 0.0) {
            return Complex64::from_polar(1.0, self.rotation) * z;
        }
        Complex64::from_polar(1.0, self.rotation) * (z - a) / (1.0 - a.conj() * z)
    }

    /// `|γ'|` at the boundary point `e^{iθ}`.
    pub fn deriv(&self, theta: f64) -> f64 {
        let a = self.a();
        (1.0 - a.norm_sqr()) / (1.0 - a.conj() * Complex64::from_polar(1.0, theta)).norm_sqr()
    }

    /// Image angle in `[0, 2π)` and conformal derivative.
    pub fn evaluate(&self, theta: f64) -> (f64, f64) {
        let w = self.apply(Complex64::from_polar(1.0, theta));
        (w.arg().rem_euclid(2.0 * PI), self.deriv(theta))
    }

    pub fn inverse(&self) -> Self {
        let a = -self.a() * Complex64::from_polar(1.0, self.rotation);
        MobiusMap { a: (a.re, a.im), rotation: -self.rotation }
    }

    /// `self ∘ other`, through the `SU(1,1)` matrices `[[p, q], [q̄, p̄]]`.
    pub fn compose(&self, other: &Self) -> Self {
        let su = |m: &MobiusMap| {
            let p = Complex64::from_polar(1.0, 0.5 * m.rotation);
            (p, -m.a() * p)
        };
        let (p1, q1) = su(self);
        let (p2, q2) = su(other);
        let p = p1 * p2 + q1 * q2.conj();
        let q = p1 * q2 + q1 * p2.conj();
        let a = -q / p;
        MobiusMap { a: (a.re, a.im), rotation: 2.0 * p.arg() }
    }
}

/// Largest `| |γx - γy| - |γ'(x)|^{1/2} |γ'(y)|^{1/2} |x - y| |` over pairs of
/// `samples` equispaced angles.
pub fn conformal_identity_defect(map: &MobiusMap, samples: usize) -> Result<f64> {
    if samples < 2 {
        return domain_err("conformal identity check needs at least two samples");
    }
    let thetas: Vec<f64> = (0..samples).map(|i| 2.0 * PI * (i as f64 + 0.25) / samples as f64).collect();
    let images: Vec<(Complex64, f64)> =
        thetas.iter().map(|&t| (map.apply(Complex64::from_polar(1.0, t)), map.deriv(t))).collect();
    let mut worst: f64 = 0.0;
    for i in 0..samples {
        for j in (i + 1)..samples {
            let lhs = (images[i].0 - images[j].0).norm();
            let rhs = (images[i].1 * images[j].1).sqrt() * chord(thetas[i] - thetas[j]);
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// Values of `U(γ) e_j` at `quad_nodes` equispaced angles (rows) for the real
/// Fourier basis of frequencies `0..=max_freq` (columns).
fn transported_modes(map: &MobiusMap, max_freq: usize, quad_nodes: usize) -> DMatrix<f64> {
    let inv = map.inverse();
    let probe = BasisSet {
        family: crate::form_engine::BasisFamily::Fourier { max_freq },
        values: DMatrix::zeros(0, 0),
        orthonormal: true,
        space_kind: crate::spaces::SpaceKind::Circle,
    };
    let rows: Vec<Vec<f64>> = (0..quad_nodes)
        .into_par_iter()
        .map(|p| {
            let theta = 2.0 * PI * p as f64 / quad_nodes as f64;
            let (pre, _) = inv.evaluate(theta);
            let s = inv.deriv(theta).sqrt();
            let e = probe.eval(&crate::spaces::Point::Angle(pre)).expect("angle point");
            e.into_iter().map(|v| s * v).collect()
        })
        .collect();
    DMatrix::from_fn(quad_nodes, 2 * max_freq + 1, |p, j| rows[p][j])
}

fn fourier_at_nodes(max_freq: usize, quad_nodes: usize) -> DMatrix<f64> {
    let s = 1.0 / PI.sqrt();
    DMatrix::from_fn(quad_nodes, 2 * max_freq + 1, |p, j| {
        let theta = 2.0 * PI * p as f64 / quad_nodes as f64;
        let k = BasisSet::fourier_frequency(j) as f64;
        match j {
            0 => 1.0 / (2.0 * PI).sqrt(),
            _ if j % 2 == 1 => s * (k * theta).cos(),
            _ => s * (k * theta).sin(),
        }
    })
}

fn check_resolution(max_freq: usize, quad_nodes: usize) -> Result<()> {
    if quad_nodes < 8 * max_freq.max(1) {
        return Err(Error::Resolution(format!(
            "{quad_nodes} nodes cannot resolve frequency {max_freq} (need {})",
            8 * max_freq.max(1)
        )));
    }
    Ok(())
}

/// `⟨e_i, U(γ) e_j⟩` over the real Fourier basis of frequencies `0..=max_freq`.
pub fn unitary_matrix(map: &MobiusMap, max_freq: usize, quad_nodes: usize) -> Result<DMatrix<f64>> {
    check_resolution(max_freq, quad_nodes)?;
    let v = transported_modes(map, max_freq, quad_nodes);
    let e = fourier_at_nodes(max_freq, quad_nodes);
    Ok((2.0 * PI / quad_nodes as f64) * e.transpose() * v)
}

/// `‖G - I‖` for the Gram matrix `G_jk = ⟨U e_j, U e_k⟩` in `L²`.
pub fn unitarity_defect(map: &MobiusMap, max_freq: usize, quad_nodes: usize) -> Result<f64> {
    check_resolution(max_freq, quad_nodes)?;
    let v = transported_modes(map, max_freq, quad_nodes);
    let g = (2.0 * PI / quad_nodes as f64) * v.transpose() * &v;
    let size = g.nrows();
    let d = g - DMatrix::identity(size, size);
    let d = 0.5 * (&d + d.transpose());
    Ok(SymmetricEigen::new(d).eigenvalues.amax())
}

/// `|∫ f(γx) |γ'(x)| dμ(x) - ∫ f dμ|` with `nodes` equispaced angles.
pub fn measure_transformation_defect(map: &MobiusMap, f: &dyn Fn(f64) -> f64, nodes: usize) -> f64 {
    let h = 2.0 * PI / nodes as f64;
    let (mut pulled, mut plain) = (0.0, 0.0);
    for p in 0..nodes {
        let theta = h * p as f64;
        let (image, d) = map.evaluate(theta);
        pulled += h * f(image) * d;
        plain += h * f(theta);
    }
    (pulled - plain).abs()
}

/// Gap, relative to `max(1, |lhs|)`, between `∫∫ F(x, y) / d(x, y)` and
/// `∫∫ F(γx, γy) |γ'(x)|^{1/2} |γ'(y)|^{1/2} / d(x, y)` for `F` vanishing on
/// the diagonal. The inner integral runs over the angular offset.
pub fn change_of_variables_defect(map: &MobiusMap, f: &(dyn Fn(f64, f64) -> f64 + Sync), nodes: usize) -> f64 {
    let h = 2.0 * PI / nodes as f64;
    let (us, ws) = gauss_legendre_on(nodes, 0.0, 2.0 * PI);
    let sums: Vec<(f64, f64)> = (0..nodes)
        .into_par_iter()
        .map(|p| {
            let x = h * p as f64;
            let (gx, dx) = map.evaluate(x);
            let (mut lhs, mut rhs) = (0.0, 0.0);
            for (&u, &w) in us.iter().zip(&ws) {
                let y = x + u;
                let k = w / (2.0 * (0.5 * u).sin());
                let (gy, dy) = map.evaluate(y);
                lhs += k * f(x, y);
                rhs += k * f(gx, gy) * (dx * dy).sqrt();
            }
            (h * lhs, h * rhs)
        })
        .collect();
    let lhs: f64 = sums.iter().map(|s| s.0).sum();
    let rhs: f64 = sums.iter().map(|s| s.1).sum();
    (lhs - rhs).abs() / lhs.abs().max(1.0)
}

/// `λ_k^{(α)} = ∫_0^{2π} (1 - cos ku) / (2 sin(u/2))^{1+α} du`.
///
/// Adaptive Gauss-Kronrod over `[0, π]` (doubled by symmetry) with break
/// points at the zeros of `sin(ku/2)`, grading panels toward the integrable
/// singularity at `u = 0`.
pub fn fractional_eigenvalue(k: usize, alpha: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let kf = k as f64;
    let breaks: Vec<f64> = (0..=k).map(|j| PI * j as f64 / kf).collect();
    let integrand = |u: f64| {
        let s = (0.5 * kf * u).sin();
        2.0 * s * s / (2.0 * (0.5 * u).sin()).powf(1.0 + alpha)
    };
    2.0 * integrate_with_breaks(integrand, &breaks, 1e-14, 1e-12)
}

#[derive(Clone, Debug, Serialize)]
pub struct FractionalModel {
    pub alpha: f64,
    /// `λ_k^{(α)}` for `k = 0..=max_freq`.
    pub eigenvalues: Vec<f64>,
}

impl FractionalModel {
    pub fn new(alpha: f64, max_freq: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return domain_err(format!("fractional exponent must lie in (0, 1), got {alpha}"));
        }
        let eigenvalues = (0..=max_freq).into_par_iter().map(|k| fractional_eigenvalue(k, alpha)).collect();
        Ok(FractionalModel { alpha, eigenvalues })
    }

    /// Exponent of the power fit `λ_k ≈ c k^p` over `k ∈ [lo, hi]`.
    pub fn growth_exponent(&self, lo: usize, hi: usize) -> f64 {
        let ks: Vec<f64> = (lo..=hi).map(|k| (k as f64).ln()).collect();
        let ls: Vec<f64> = (lo..=hi).map(|k| self.eigenvalues[k].ln()).collect();
        least_squares(&ks, &ls).0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OperatorKind {
    Log,
    Fractional { alpha: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthVerdict {
    BoundedTrend,
    GrowingTrend,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct CommutatorGrowth {
    pub map: MobiusMap,
    pub kind: OperatorKind,
    pub freq_list: Vec<usize>,
    pub norms: Vec<f64>,
    pub verdict: GrowthVerdict,
}

/// Operator norms of the `K`-truncated `[Op, U(γ)]` for each `K`, with `Op`
/// diagonal in the Fourier basis.
pub fn commutator_growth(map: &MobiusMap, kind: OperatorKind, freq_list: &[usize]) -> Result<CommutatorGrowth> {
    if freq_list.is_empty() || freq_list.windows(2).any(|w| w[1] <= w[0]) {
        return domain_err("frequency list must be nonempty and increasing");
    }
    let k_max = *freq_list.last().expect("nonempty");
    let quad_nodes = (8 * k_max).max(64);
    let u = unitary_matrix(map, k_max, quad_nodes)?;
    let by_freq: Vec<f64> = match kind {
        OperatorKind::Log => (0..=k_max).map(circle_eigenvalue_series).collect(),
        OperatorKind::Fractional { alpha } => FractionalModel::new(alpha, k_max)?.eigenvalues,
    };
    let diag: Vec<f64> = (0..u.nrows()).map(|j| by_freq[BasisSet::fourier_frequency(j)]).collect();
    let norms: Vec<f64> = freq_list
        .par_iter()
        .map(|&k| {
            let size = 2 * k + 1;
            let c = DMatrix::from_fn(size, size, |i, j| (diag[i] - diag[j]) * u[(i, j)]);
            spectral_norm(&c)
        })
        .collect();
    Ok(CommutatorGrowth { map: *map, kind, freq_list: freq_list.to_vec(), verdict: growth_verdict(&norms), norms })
}

/// Bounded when the norms stay within a factor 2; growing when they strictly
/// increase and end at least 4 times the first.
pub fn growth_verdict(norms: &[f64]) -> GrowthVerdict {
    let hi = norms.iter().copied().fold(0.0, f64::max);
    let lo = norms.iter().copied().fold(f64::INFINITY, f64::min);
    if hi == 0.0 || (lo > 0.0 && hi / lo <= 2.0) {
        return GrowthVerdict::BoundedTrend;
    }
    let increasing = norms.windows(2).all(|w| w[1] > w[0]);
    if increasing && norms[norms.len() - 1] >= 4.0 * norms[0] {
        return GrowthVerdict::GrowingTrend;
    }
    GrowthVerdict::Inconclusive
}
