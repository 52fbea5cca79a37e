//! Moduli of continuity, Dini norms and the commutator kernel
//! `K_h(x, y) = (h(x) - h(y)) d(x, y)^{-δ}`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::closed_forms::oracle_diagonal;
use crate::error::{domain_err, Error, Result};
use crate::form_engine::{cholesky, dirichlet_energy, local_rule, AssemblyRule, BasisSet};
use crate::quadrature::integrate_with_breaks;
use crate::spaces::{Point, Space, SpaceKind, SNAP};

/// Default ratio of the geometric scale grid.
pub const THETA: f64 = 0.367_879_441_171_442_33;

/// Node count above which pair scans use a strided subsample.
pub const PAIR_SCAN_LIMIT: usize = 4096;

#[derive(Clone, Debug, Serialize)]
pub struct DiniProfile {
    /// Scales as fractions of the diameter, in the order given.
    pub t_grid: Vec<f64>,
    pub omega: Vec<f64>,
    /// `∫ ω(t)/t dt` by the trapezoid rule in `log t` over the grid.
    pub dini_constant: f64,
    /// `Σ_n ω(θ^n)` over the scales `θ^n >= min(t_grid)`.
    pub theta_sum: f64,
    pub sup_norm: f64,
    pub dini_norm: f64,
    /// Nodes entering the pair scan.
    pub sample_count: usize,
}

/// `θ^{k/refinement}` for `k = 0..=refinement·decades`, decreasing from 1.
pub fn geometric_t_grid(refinement: usize, decades: usize) -> Vec<f64> {
    let m = refinement.max(1);
    (0..=m * decades).map(|k| THETA.powf(k as f64 / m as f64)).collect()
}

fn validate_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return domain_err("scale grid is empty");
    }
    if t_grid.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return domain_err("scale grid must lie in (0, 1]");
    }
    Ok(())
}

fn scan_indices(space: &Space) -> Vec<usize> {
    let n = space.node_count();
    if n <= PAIR_SCAN_LIMIT {
        (0..n).collect()
    } else {
        (0..PAIR_SCAN_LIMIT).map(|i| i * n / PAIR_SCAN_LIMIT).collect()
    }
}

/// `ω_f(t)` for each ascending threshold, from one scan over node pairs.
fn omega_scan(space: &Space, f: &[f64], idx: &[usize], sorted_t: &[f64]) -> Vec<f64> {
    let diam = space.diam;
    let buckets = idx
        .par_iter()
        .enumerate()
        .map(|(a, &p)| {
            let mut local = vec![0.0f64; sorted_t.len()];
            for &q in &idx[a + 1..] {
                let d = space.node_distance(p, q) / diam;
                let k = sorted_t.partition_point(|&t| t * (1.0 + SNAP) < d);
                if k < local.len() {
                    local[k] = local[k].max((f[p] - f[q]).abs());
                }
            }
            local
        })
        .reduce(
            || vec![0.0; sorted_t.len()],
            |mut x, y| {
                for (a, b) in x.iter_mut().zip(y) {
                    *a = a.max(b);
                }
                x
            },
        );
    let mut running: f64 = 0.0;
    buckets
        .into_iter()
        .map(|b| {
            running = running.max(b);
            running
        })
        .collect()
}

/// Sampled modulus of continuity of node values `f`.
pub fn modulus_of_continuity(space: &Space, f: &[f64], t_grid: &[f64]) -> Result<DiniProfile> {
    validate_grid(t_grid)?;
    if f.len() != space.node_count() || f.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("node values must be finite, one per node".into()));
    }
    let idx = scan_indices(space);
    profile_on(space, f, &idx, t_grid)
}

fn profile_on(space: &Space, f: &[f64], idx: &[usize], t_grid: &[f64]) -> Result<DiniProfile> {
    let t_min = t_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let theta_scales: Vec<f64> = (0..).map(|n| THETA.powi(n)).take_while(|&t| t >= t_min * (1.0 - SNAP)).collect();
    let mut all: Vec<f64> = t_grid.iter().chain(&theta_scales).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let omega_all = omega_scan(space, f, idx, &all);
    let lookup = |t: f64| omega_all[all.partition_point(|&s| s < t)];

    let omega: Vec<f64> = t_grid.iter().map(|&t| lookup(t)).collect();
    let mut sorted: Vec<(f64, f64)> = t_grid.iter().copied().zip(omega.iter().copied()).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    sorted.dedup_by(|a, b| a.0 == b.0);
    let mut dini_constant = 0.0;
    for pair in sorted.windows(2) {
        let (t0, w0) = pair[0];
        let (t1, w1) = pair[1];
        dini_constant += 0.5 * (w0 + w1) * (t1 / t0).ln();
    }
    let (t_top, w_top) = *sorted.last().expect("grid is nonempty");
    dini_constant += w_top * (1.0 / t_top).ln();

    let theta_sum = theta_scales.iter().map(|&t| lookup(t)).sum();
    let sup_norm = idx.iter().map(|&p| f[p].abs()).fold(0.0, f64::max);
    Ok(DiniProfile {
        t_grid: t_grid.to_vec(),
        omega,
        dini_constant,
        theta_sum,
        sup_norm,
        dini_norm: sup_norm + dini_constant,
        sample_count: idx.len(),
    })
}

/// Profiles of `f`, `g` and `fg` over the same node pairs.
pub fn product_profiles(space: &Space, f: &[f64], g: &[f64], t_grid: &[f64]) -> Result<[DiniProfile; 3]> {
    let fg: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
    Ok([
        modulus_of_continuity(space, f, t_grid)?,
        modulus_of_continuity(space, g, t_grid)?,
        modulus_of_continuity(space, &fg, t_grid)?,
    ])
}

/// `max_t ω_{fg}(t) - (ω_g(t) ‖f‖_∞ + ω_f(t) ‖g‖_∞)`, nonpositive up to rounding.
pub fn dini_algebra_defect(space: &Space, f: &[f64], g: &[f64], t_grid: &[f64]) -> Result<f64> {
    let [pf, pg, pfg] = product_profiles(space, f, g, t_grid)?;
    Ok((0..t_grid.len())
        .map(|i| pfg.omega[i] - (pg.omega[i] * pf.sup_norm + pf.omega[i] * pg.sup_norm))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Matrix of `K_h` paired against the basis, with its operator norm.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    pub matrix: DMatrix<f64>,
    pub operator_norm: f64,
}

type Scalar<'a> = &'a (dyn Fn(&Point) -> f64 + Sync);

/// `⟨b_i, K_h b_j⟩`, with the singularity-adapted inner rule when the basis
/// can be evaluated off the nodes. The norm is that of `M^{-1/2} K M^{-1/2}`.
pub fn commutator_kernel_matrix(space: &Space, h: Scalar, basis: &BasisSet) -> Result<KernelMatrix> {
    let rule = AssemblyRule::default_for(space, basis);
    let b = &basis.values;
    let (n, size) = b.shape();
    let w = space.weights();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|p| {
            let x = space.node(p);
            let hx = h(x);
            let mut acc = vec![0.0; size];
            match rule {
                AssemblyRule::PointAdapted => {
                    for (y, c) in local_rule(space, x, &[])? {
                        let by = basis.eval(&y)?;
                        let s = c * (hx - h(&y));
                        for (a, v) in acc.iter_mut().zip(&by) {
                            *a += s * v;
                        }
                    }
                }
                AssemblyRule::NodePairs => {
                    for q in 0..n {
                        let k = space.node_kernel(p, q);
                        if k == 0.0 {
                            continue;
                        }
                        let s = w[q] * k * (hx - h(space.node(q)));
                        for (j, a) in acc.iter_mut().enumerate() {
                            *a += s * b[(q, j)];
                        }
                    }
                }
            }
            Ok(acc.into_iter().map(|a| w[p] * a).collect())
        })
        .collect::<Result<_>>()?;
    let kb = DMatrix::from_fn(n, size, |p, j| rows[p][j]);
    let matrix = b.transpose() * kb;
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("commutator kernel matrix has non-finite entries".into()));
    }
    let operator_norm = if basis.orthonormal {
        spectral_norm(&matrix)
    } else {
        let l = cholesky(&basis.gram(space))?;
        let y = l.solve_lower_triangular(&matrix).expect("factor is nonsingular");
        let c = l.solve_lower_triangular(&y.transpose()).expect("factor is nonsingular");
        spectral_norm(&c)
    };
    Ok(KernelMatrix { matrix, operator_norm })
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct CommutatorReport {
    pub basis_size: usize,
    pub commutator_norm: f64,
    pub kernel_norm: f64,
    pub defect: f64,
}

/// `‖(Δ m_h - m_h Δ) - K_h‖` on the span of an oracle basis, where `Δ` acts
/// through its closed-form eigenvalues.
pub fn commutator_defect(space: &Space, h: Scalar, basis: &BasisSet) -> Result<CommutatorReport> {
    let diag = oracle_diagonal(basis)?;
    if !basis.orthonormal {
        return Err(Error::Domain("commutator defect needs an orthonormal oracle basis".into()));
    }
    let b = &basis.values;
    let w = space.weights();
    let hw = DMatrix::from_fn(b.nrows(), b.ncols(), |p, j| w[p] * h(space.node(p)) * b[(p, j)]);
    let mult = b.transpose() * hw;
    let size = basis.size();
    let commutator = DMatrix::from_fn(size, size, |i, j| (diag[i] - diag[j]) * mult[(i, j)]);
    let kernel = commutator_kernel_matrix(space, h, basis)?;
    Ok(CommutatorReport {
        basis_size: size,
        commutator_norm: spectral_norm(&commutator),
        kernel_norm: kernel.operator_norm,
        defect: spectral_norm(&(commutator - kernel.matrix)),
    })
}

/// `E(hf, hf)^{1/2} / (‖h‖_Din (‖f‖_{L²} + E(f, f)^{1/2}))`.
pub fn module_ratio(space: &Space, h: &[f64], f: &[f64], t_grid: &[f64]) -> Result<f64> {
    let din = modulus_of_continuity(space, h, t_grid)?.dini_norm;
    let hf: Vec<f64> = h.iter().zip(f).map(|(a, b)| a * b).collect();
    let l2 = f.iter().zip(space.weights()).map(|(v, w)| w * v * v).sum::<f64>().sqrt();
    let denom = din * (l2 + dirichlet_energy(space, f)?.sqrt());
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(dirichlet_energy(space, &hf)?.sqrt() / denom)
}

#[derive(Clone, Debug, Serialize)]
pub struct HolderReport {
    pub alpha: f64,
    pub center: f64,
    pub offsets: Vec<f64>,
    /// `|Δf(center + s) - Δf(center)|` for each offset `s`.
    pub increments: Vec<f64>,
    /// Least-squares slope of `log increment` against `log s`.
    pub fitted_exponent: f64,
}

/// Fitted Hölder exponent of `Δf` at `center` for `f(y) = |y - center|^α` on an interval.
pub fn holder_image_exponent(space: &Space, alpha: f64, center: f64, offsets: &[f64]) -> Result<HolderReport> {
    let SpaceKind::Interval { a, b } = space.kind else {
        return Err(Error::Domain("Hölder profiles are generated on an interval".into()));
    };
    if !(alpha > 0.0 && alpha < 1.0) || center <= a || center >= b || offsets.len() < 2 {
        return domain_err("Hölder check needs 0 < alpha < 1, interior center, two offsets");
    }
    let f = |y: f64| (y - center).abs().powf(alpha);
    let delta_f = |x: f64| {
        let mut cuts = vec![a, x, center, b];
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        integrate_with_breaks(|y| (f(x) - f(y)) / (x - y).abs(), &cuts, 1e-14, 1e-13)
    };
    let base = delta_f(center);
    let increments: Vec<f64> = offsets.iter().map(|&s| (delta_f(center + s) - base).abs()).collect();
    let xs: Vec<f64> = offsets.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = increments.iter().map(|v| v.ln()).collect();
    let fitted_exponent = least_squares(&xs, &ys).0;
    Ok(HolderReport { alpha, center, offsets: offsets.to_vec(), increments, fitted_exponent })
}

/// Slope and intercept of the least-squares line.
pub(crate) fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coords(space: &Space) -> Vec<f64> {
        space.quadrature.nodes.iter().map(|p| p.scalar().unwrap()).collect()
    }

    #[test]
    fn identity_on_unit_interval() {
        let s = Space::interval(0.0, 1.0, 1000).unwrap();
        let f = coords(&s);
        let grid = geometric_t_grid(16, 12);
        let prof = modulus_of_continuity(&s, &f, &grid).unwrap();
        for (t, w) in prof.t_grid.iter().zip(&prof.omega) {
            assert!(*w <= *t + 1e-12);
        }
        assert!((prof.dini_constant - 1.0).abs() < 0.02, "{}", prof.dini_constant);
        assert!(prof.theta_sum >= prof.dini_constant);
    }

    #[test]
    fn constant_function() {
        let s = Space::circle(64).unwrap();
        let prof = modulus_of_continuity(&s, &vec![2.0; 64], &geometric_t_grid(4, 5)).unwrap();
        assert!(prof.omega.iter().all(|&w| w == 0.0));
        assert_eq!(prof.dini_constant, 0.0);
        assert_eq!(prof.dini_norm, 2.0);
        assert!(modulus_of_continuity(&s, &vec![2.0; 64], &[]).is_err());
        assert!(modulus_of_continuity(&s, &vec![2.0; 64], &[1.5]).is_err());
    }

    #[test]
    fn cylinder_indicator_jumps_at_full_scale() {
        let s = Space::shift(2, 2.0, 6).unwrap();
        let f: Vec<f64> = (0..64).map(|i| if i < 32 { 1.0 } else { 0.0 }).collect();
        let grid = geometric_t_grid(4, 6);
        let prof = modulus_of_continuity(&s, &f, &grid).unwrap();
        for (t, w) in prof.t_grid.iter().zip(&prof.omega) {
            assert_eq!(*w, if *t >= 1.0 { 1.0 } else { 0.0 });
        }
        assert!(prof.dini_constant.is_finite());
    }

    #[test]
    fn algebra_inequality() {
        let s = Space::interval(0.0, 1.0, 200).unwrap();
        let f = coords(&s);
        let grid = geometric_t_grid(4, 8);
        assert!(dini_algebra_defect(&s, &f, &f, &grid).unwrap() <= 0.0);
        let c = vec![-3.0; 200];
        assert!(dini_algebra_defect(&s, &c, &f, &grid).unwrap() <= 1e-15);
    }

    #[test]
    fn constant_multiplier_commutes() {
        let s = Space::interval(-1.0, 1.0, 64).unwrap();
        let b = BasisSet::legendre(&s, 6).unwrap();
        let k = commutator_kernel_matrix(&s, &|_| 1.5, &b).unwrap();
        assert!(k.matrix.amax() == 0.0);
        let r = commutator_defect(&s, &|_| 1.5, &b).unwrap();
        assert!(r.defect < 1e-12);
    }

    #[test]
    fn interval_commutator_matches_kernel() {
        let s = Space::interval(-1.0, 1.0, 64).unwrap();
        let b = BasisSet::legendre(&s, 8).unwrap();
        let r = commutator_defect(&s, &|p| p.scalar().unwrap(), &b).unwrap();
        assert!(r.defect < 1e-10, "{r:?}");
        assert!(r.commutator_norm > 0.1);
    }

    #[test]
    fn shift_commutator_matches_kernel() {
        let s = Space::shift(2, 2.0, 5).unwrap();
        let b = BasisSet::haar(&s, 5).unwrap();
        let h = |p: &Point| match p {
            Point::Word(w) => (w[0] as f64) * 2.0 - (w[1] as f64),
            _ => unreachable!(),
        };
        let r = commutator_defect(&s, &h, &b).unwrap();
        assert!(r.defect < 1e-10, "{r:?}");
        let nodal = BasisSet::nodal(&s).unwrap();
        assert!(matches!(commutator_defect(&s, &h, &nodal), Err(Error::Domain(_))));
    }

    #[test]
    fn module_ratio_is_finite() {
        let s = Space::interval(0.0, 1.0, 200).unwrap();
        let x = coords(&s);
        let f: Vec<f64> = x.iter().map(|t| (3.0 * t).sin()).collect();
        let k = module_ratio(&s, &x, &f, &geometric_t_grid(4, 8)).unwrap();
        assert!(k.is_finite() && k > 0.0);
    }

    #[test]
    fn least_squares_line() {
        let (m, c) = least_squares(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((m - 2.0).abs() < 1e-15 && (c - 1.0).abs() < 1e-15);
    }
}
