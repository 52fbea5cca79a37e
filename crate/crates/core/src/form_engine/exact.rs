//! Exact rational form on the cylinder functions of a shift.
//!
//! On cylinders of length `m` the kernel between distinct cylinders whose
//! words first differ at 0-based position `j` is exactly `N^j`, and every
//! cylinder has mass `N^{-m}`, so `E` and `M` have rational entries.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::spaces::{first_difference, index_to_word, Space, SpaceKind};

pub type Rational = BigRational;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// Nearest `f64`, correctly rounded whenever numerator and denominator are
/// exactly representable.
pub fn to_f64(q: &Rational) -> f64 {
    const EXACT: i64 = 1 << 53;
    match (q.numer().to_i64(), q.denom().to_i64()) {
        (Some(n), Some(d)) if n.abs() <= EXACT && d <= EXACT => n as f64 / d as f64,
        _ => q.to_f64().unwrap_or(f64::NAN),
    }
}

/// Best rational approximation of `x` with denominator at most `max_den`.
pub fn rationalize(x: f64, max_den: i64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i128;
        let (h2, k2) = (a * h1 + h0, a * k1 + k0);
        if k2 > max_den as i128 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a as f64;
        if frac.abs() < 1e-12 {
            break;
        }
        r = 1.0 / frac;
    }
    if k1 == 0 {
        return None;
    }
    Some(Rational::new(BigInt::from(h1), BigInt::from(k1)))
}

#[derive(Clone, Debug)]
pub struct ExactShiftForm {
    pub symbols: usize,
    pub depth: usize,
    /// Stiffness matrix in the cylinder-indicator basis.
    pub stiffness: Vec<Vec<Rational>>,
    /// Mass of each cylinder; `M` is this multiple of the identity.
    pub cylinder_mass: Rational,
    /// Integer kernel `N^j` between distinct cylinders.
    kernel: Vec<Vec<BigInt>>,
}

#[derive(Clone, Debug)]
pub struct ExactSpectrum {
    pub levels: Vec<(Rational, usize)>,
    /// Nullities add up to the dimension, so no eigenvalue is missing.
    pub complete: bool,
}

impl ExactShiftForm {
    /// Exact `E` and `M` on the cylinders of length equal to the space depth.
    pub fn assemble(space: &Space) -> Result<Self> {
        let SpaceKind::Shift { symbols, depth, .. } = space.kind else {
            return Err(Error::Domain("exact assembly needs a shift space".into()));
        };
        let dim = space.node_count();
        let words: Vec<Vec<u8>> = (0..dim).map(|i| index_to_word(i, symbols, depth)).collect();
        let base = BigInt::from(symbols);
        let kernel: Vec<Vec<BigInt>> = (0..dim)
            .map(|p| {
                (0..dim)
                    .map(|q| match first_difference(&words[p], &words[q]) {
                        Some(j) => num_traits::pow(base.clone(), j),
                        None => BigInt::zero(),
                    })
                    .collect()
            })
            .collect();
        let mass = Rational::new(BigInt::one(), num_traits::pow(base, depth));
        let w2 = &mass * &mass;
        let stiffness = (0..dim)
            .map(|p| {
                (0..dim)
                    .map(|q| {
                        if p == q {
                            let row: BigInt = kernel[p].iter().sum();
                            Rational::from_integer(row) * &w2
                        } else {
                            -Rational::from_integer(kernel[p][q].clone()) * &w2
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(ExactShiftForm { symbols, depth, stiffness, cylinder_mass: mass, kernel })
    }

    pub fn dim(&self) -> usize {
        self.stiffness.len()
    }

    /// `dim ker(E - λ M)` by rational Gaussian elimination.
    pub fn nullity(&self, value: &Rational) -> usize {
        let shift = value * &self.cylinder_mass;
        let mut a: Vec<Vec<Rational>> = self.stiffness.clone();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] -= &shift;
        }
        self.dim() - rank(a)
    }

    /// Certifies candidate eigenvalues by exact nullities.
    pub fn certify(&self, candidates: &[Rational]) -> ExactSpectrum {
        let mut levels: Vec<(Rational, usize)> = Vec::new();
        for c in candidates {
            if levels.iter().any(|(v, _)| v == c) {
                continue;
            }
            let k = self.nullity(c);
            if k > 0 {
                levels.push((c.clone(), k));
            }
        }
        levels.sort_by(|a, b| a.0.cmp(&b.0));
        let total: usize = levels.iter().map(|l| l.1).sum();
        ExactSpectrum { levels, complete: total == self.dim() }
    }

    /// Certifies floating eigenvalues after rounding them to nearby rationals.
    pub fn certify_floats(&self, values: &[f64]) -> ExactSpectrum {
        let den = (self.symbols as i64).pow(self.depth.min(8) as u32).max(64);
        let candidates: Vec<Rational> = values.iter().filter_map(|&v| rationalize(v, den)).collect();
        self.certify(&candidates)
    }

    /// Whether `E v = λ M v` holds exactly.
    pub fn is_eigenvector(&self, v: &[Rational], value: &Rational) -> bool {
        let shift = value * &self.cylinder_mass;
        self.stiffness.iter().zip(v).all(|(row, vi)| {
            let ev: Rational = row.iter().zip(v).map(|(e, x)| e * x).sum();
            ev == &shift * vi
        })
    }

    /// Coefficients of `1_{C_{w c}} - 1_{C_{w (c+1)}}` for the word with
    /// cylinder index `cylinder` at length `level` and child `c`.
    pub fn wavelet_coefficients(&self, level: usize, cylinder: usize, c: usize) -> Vec<Rational> {
        let n = self.symbols;
        let below = n.pow((self.depth - level - 1) as u32);
        let mut v = vec![Rational::zero(); self.dim()];
        for (child, sign) in [(c, 1), (c + 1, -1)] {
            let start = (cylinder * n + child) * below;
            for x in &mut v[start..start + below] {
                *x = int(sign);
            }
        }
        v
    }

    /// `1 + (1 - 1/N) level`.
    pub fn wavelet_eigenvalue(&self, level: usize) -> Rational {
        let n = self.symbols as i64;
        Rational::new(BigInt::from(n + (n - 1) * level as i64), BigInt::from(n))
    }

    /// Largest entry of `|(Δ m_h - m_h Δ) - K_h|` for `h` constant on the cylinders.
    ///
    /// `Δ = M^{-1} E` and `K_h = M^{-1} K` with
    /// `K_pq = w² (h_p - h_q) N^{j(p, q)}`.
    pub fn commutator_defect(&self, h: &[Rational]) -> Rational {
        let dim = self.dim();
        let inv_mass = self.cylinder_mass.recip();
        let w2 = &self.cylinder_mass * &self.cylinder_mass;
        let mut worst = Rational::zero();
        for p in 0..dim {
            for q in 0..dim {
                let a = &self.stiffness[p][q] * &inv_mass;
                let commutator = &a * &h[q] - &h[p] * &a;
                let k = Rational::from_integer(self.kernel[p][q].clone()) * (&h[p] - &h[q]) * &w2 * &inv_mass;
                let d = (commutator - k).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }
}

fn rank(mut a: Vec<Vec<Rational>>) -> usize {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(pivot) = (r..rows).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(r, pivot);
        let inv = a[r][c].recip();
        for i in (r + 1)..rows {
            if a[i][c].is_zero() {
                continue;
            }
            let factor = &a[i][c] * &inv;
            let (head, tail) = a.split_at_mut(i);
            for (x, p) in tail[0][c..cols].iter_mut().zip(&head[r][c..cols]) {
                *x -= &factor * p;
            }
        }
        r += 1;
        if r == rows {
            break;
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continued_fractions() {
        assert_eq!(rationalize(1.5, 100), Some(Rational::new(3.into(), 2.into())));
        assert_eq!(rationalize(5.0 / 3.0, 100), Some(Rational::new(5.into(), 3.into())));
        assert_eq!(rationalize(0.0, 100), Some(Rational::zero()));
        assert_eq!(rationalize(1e-17, 100), Some(Rational::zero()));
        assert_eq!(to_f64(&Rational::new(5.into(), 3.into())), 5.0 / 3.0);
    }

    #[test]
    fn exact_spectrum_depth_four() {
        let s = Space::shift(2, 2.0, 4).unwrap();
        let form = ExactShiftForm::assemble(&s).unwrap();
        let cands: Vec<Rational> = (0..4).map(|l| form.wavelet_eigenvalue(l)).chain([Rational::zero()]).collect();
        let spec = form.certify(&cands);
        assert!(spec.complete);
        let mults: Vec<usize> = spec.levels.iter().map(|l| l.1).collect();
        assert_eq!(mults, vec![1, 1, 2, 4, 8]);
    }

    #[test]
    fn wavelets_are_exact_eigenvectors() {
        let s = Space::shift(3, 2.0, 3).unwrap();
        let form = ExactShiftForm::assemble(&s).unwrap();
        for level in 0..3 {
            for cyl in 0..3usize.pow(level as u32) {
                for c in 0..2 {
                    let v = form.wavelet_coefficients(level, cyl, c);
                    assert!(form.is_eigenvector(&v, &form.wavelet_eigenvalue(level)));
                    assert!(!form.is_eigenvector(&v, &int(1)) || level == 0);
                }
            }
        }
    }

    #[test]
    fn commutator_vanishes_exactly() {
        let s = Space::shift(2, 2.0, 4).unwrap();
        let form = ExactShiftForm::assemble(&s).unwrap();
        let h: Vec<Rational> = (0..16).map(|i| int(((i / 4) * 3 % 5) as i64)).collect();
        assert!(form.commutator_defect(&h).is_zero());
    }
}
