//! Galerkin matrices of the form
//! `E(f, g) = ½ ∫∫ (f(x) - f(y)) (g(x) - g(y)) d(x, y)^{-δ} dμ dμ`,
//! the generalized eigenproblem `E v = λ M v`, and pointwise evaluation of
//! `Δf(x) = ∫ (f(x) - f(y)) d(x, y)^{-δ} dμ(y)`.

pub mod basis;
pub mod exact;

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_on;
use crate::spaces::{Point, Space, SpaceKind};

pub use basis::{BasisFamily, BasisSet};

/// Default relative tolerance for grouping eigenvalues: `tol (1 + λ)`.
pub const DEFAULT_MULTIPLICITY_TOL: f64 = 1e-6;

/// How the double integral is discretized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssemblyRule {
    /// Product rule over distinct quadrature-node pairs.
    NodePairs,
    /// Outer quadrature nodes, inner rule adapted to the singularity at each
    /// outer node (split Gauss-Legendre on the interval, Gauss-Legendre in the
    /// angular offset on the circle). Requires a continuous basis.
    PointAdapted,
}

impl AssemblyRule {
    /// The rule used when none is requested.
    pub fn default_for(space: &Space, basis: &BasisSet) -> Self {
        match space.kind {
            SpaceKind::Shift { .. } => AssemblyRule::NodePairs,
            _ if basis.is_continuous() => AssemblyRule::PointAdapted,
            _ => AssemblyRule::NodePairs,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FormMatrices {
    /// Stiffness matrix.
    pub e: DMatrix<f64>,
    /// Mass matrix.
    pub m: DMatrix<f64>,
    pub basis: BasisSet,
    pub rule: AssemblyRule,
    pub space_kind: SpaceKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumSource {
    Galerkin,
    ClosedForm,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EigenLevel {
    pub value: f64,
    pub multiplicity: u64,
}

/// Ascending eigenvalues with multiplicities.
#[derive(Clone, Debug)]
pub struct SpectralModel {
    pub levels: Vec<EigenLevel>,
    /// Ungrouped ascending eigenvalues (Galerkin models only).
    pub raw: Vec<f64>,
    /// M-orthonormal eigenvector coefficients, one column per raw eigenvalue.
    pub eigenvectors: Option<DMatrix<f64>>,
    pub source: SpectrumSource,
}

impl SpectralModel {
    pub fn from_levels(levels: Vec<EigenLevel>, source: SpectrumSource) -> Self {
        SpectralModel { levels, raw: Vec::new(), eigenvectors: None, source }
    }

    pub fn distinct_count(&self) -> usize {
        self.levels.len()
    }

    /// Length of the multiplicity-expanded sequence.
    pub fn expanded_len(&self) -> u128 {
        self.levels.iter().map(|l| l.multiplicity as u128).sum()
    }

    /// `index`-th entry (0-based) of the expanded ascending sequence.
    pub fn eigenvalue_at(&self, index: u128) -> Option<f64> {
        let mut seen = 0u128;
        for level in &self.levels {
            seen += level.multiplicity as u128;
            if index < seen {
                return Some(level.value);
            }
        }
        None
    }

    /// Running totals of multiplicities, one per level.
    pub fn cumulative_counts(&self) -> Vec<u128> {
        let mut seen = 0u128;
        self.levels
            .iter()
            .map(|l| {
                seen += l.multiplicity as u128;
                seen
            })
            .collect()
    }

    /// First `cap` entries of the expanded sequence.
    pub fn expanded(&self, cap: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for level in &self.levels {
            let room = cap - out.len();
            let take = (level.multiplicity as usize).min(room);
            out.extend(std::iter::repeat_n(level.value, take));
            if out.len() == cap {
                break;
            }
        }
        out
    }

    /// Same model with every eigenvalue shifted by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        for l in &mut out.levels {
            l.value += c;
        }
        for v in &mut out.raw {
            *v += c;
        }
        out
    }

    /// Rows `(index, eigenvalue, multiplicity)` with canonical float formatting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,eigenvalue,multiplicity\n");
        for (i, l) in self.levels.iter().enumerate() {
            s.push_str(&format!("{i},{:?},{}\n", l.value, l.multiplicity));
        }
        s
    }
}

/// Assembles `E` and `M` with the default rule for the space and basis.
pub fn assemble_form_matrix(space: &Space, basis: &BasisSet) -> Result<FormMatrices> {
    assemble_form_matrix_with(space, basis, AssemblyRule::default_for(space, basis))
}

pub fn assemble_form_matrix_with(space: &Space, basis: &BasisSet, rule: AssemblyRule) -> Result<FormMatrices> {
    if basis.values.nrows() != space.node_count() {
        return Err(Error::Data(format!(
            "basis sampled at {} nodes, space has {}",
            basis.values.nrows(),
            space.node_count()
        )));
    }
    if basis.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("basis has non-finite values".into()));
    }
    let b = &basis.values;
    let (n, size) = b.shape();
    let w = space.weights();

    // Row p of `lb` holds w_p (Δ_h b_j)(p) for the chosen inner rule.
    let rows: Vec<Vec<f64>> = match rule {
        AssemblyRule::NodePairs => (0..n)
            .into_par_iter()
            .map(|p| {
                let mut acc = vec![0.0; size];
                for q in 0..n {
                    let k = space.node_kernel(p, q);
                    if k == 0.0 {
                        continue;
                    }
                    let c = w[q] * k;
                    for (j, a) in acc.iter_mut().enumerate() {
                        *a += c * (b[(p, j)] - b[(q, j)]);
                    }
                }
                acc.iter().map(|a| w[p] * a).collect()
            })
            .collect(),
        AssemblyRule::PointAdapted => {
            if !basis.is_continuous() {
                return Err(Error::Domain("point-adapted rule needs a continuous basis".into()));
            }
            (0..n)
                .into_par_iter()
                .map(|p| {
                    let x = space.node(p);
                    let rule = local_rule(space, x, &[])?;
                    let mut acc = vec![0.0; size];
                    for (y, c) in &rule {
                        let by = basis.eval(y)?;
                        for j in 0..size {
                            acc[j] += c * (b[(p, j)] - by[j]);
                        }
                    }
                    Ok(acc.iter().map(|a| w[p] * a).collect())
                })
                .collect::<Result<_>>()?
        }
    };
    let lb = DMatrix::from_fn(n, size, |p, j| rows[p][j]);
    let e = b.transpose() * lb;
    let e = 0.5 * (&e + e.transpose());
    Ok(FormMatrices { e, m: basis.gram(space), basis: basis.clone(), rule, space_kind: space.kind })
}

/// Inner quadrature for `∫ g(y) d(x, y)^{-δ} dμ(y)` around `x`: points and
/// weights already multiplied by the kernel. `breaks` adds interval split points.
pub fn local_rule(space: &Space, x: &Point, breaks: &[f64]) -> Result<Vec<(Point, f64)>> {
    space.validate(x)?;
    let m = space.node_count();
    let mut out = Vec::new();
    match (space.kind, x) {
        (SpaceKind::Interval { a, b }, Point::Coordinate(x0)) => {
            let mut cuts = vec![a, *x0, b];
            cuts.extend(breaks.iter().copied().filter(|t| *t > a && *t < b));
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let per_panel = (m / (cuts.len() - 1)).max(16);
            for pair in cuts.windows(2) {
                let (ys, ws) = gauss_legendre_on(per_panel, pair[0], pair[1]);
                for (y, wy) in ys.into_iter().zip(ws) {
                    let d = (y - x0).abs();
                    if d > 0.0 {
                        out.push((Point::Coordinate(y), wy * d.powf(-space.delta)));
                    }
                }
            }
        }
        (SpaceKind::Circle, Point::Angle(x0)) => {
            let (us, ws) = gauss_legendre_on(m, 0.0, 2.0 * std::f64::consts::PI);
            for (u, wu) in us.into_iter().zip(ws) {
                let d = 2.0 * (0.5 * u).sin();
                out.push((Point::angle(x0 + u), wu / d.powf(space.delta)));
            }
        }
        _ => {
            for (q, wq) in space.quadrature.nodes.iter().zip(space.weights()) {
                let k = space.kernel(x, q)?;
                if k > 0.0 {
                    out.push((q.clone(), wq * k));
                }
            }
        }
    }
    Ok(out)
}

/// `Δf(x)` for a function given by a closure, using [`local_rule`].
pub fn apply_logdirichlet(space: &Space, f: &dyn Fn(&Point) -> f64, x: &Point) -> Result<f64> {
    apply_logdirichlet_with_breaks(space, f, x, &[])
}

/// As [`apply_logdirichlet`] with extra split points where `f` is not smooth.
pub fn apply_logdirichlet_with_breaks(
    space: &Space,
    f: &dyn Fn(&Point) -> f64,
    x: &Point,
    breaks: &[f64],
) -> Result<f64> {
    let fx = f(x);
    Ok(local_rule(space, x, breaks)?.iter().map(|(y, c)| c * (fx - f(y))).sum())
}

/// `Σ_{q ≠ p} w_q (f_p - f_q) d(p, q)^{-δ}` at every node `p`.
pub fn apply_logdirichlet_nodes(space: &Space, f: &[f64]) -> Result<Vec<f64>> {
    check_len(space, f)?;
    let w = space.weights();
    Ok((0..space.node_count())
        .into_par_iter()
        .map(|p| (0..space.node_count()).map(|q| w[q] * space.node_kernel(p, q) * (f[p] - f[q])).sum())
        .collect())
}

/// `E(f, g)` over distinct node pairs.
pub fn dirichlet_form(space: &Space, f: &[f64], g: &[f64]) -> Result<f64> {
    check_len(space, f)?;
    check_len(space, g)?;
    let w = space.weights();
    let n = space.node_count();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|p| {
            let s: f64 = (0..n).map(|q| w[q] * space.node_kernel(p, q) * (f[p] - f[q]) * (g[p] - g[q])).sum();
            w[p] * s
        })
        .collect();
    Ok(0.5 * rows.iter().sum::<f64>())
}

/// `E(f, f)`.
pub fn dirichlet_energy(space: &Space, f: &[f64]) -> Result<f64> {
    dirichlet_form(space, f, f)
}

fn check_len(space: &Space, f: &[f64]) -> Result<()> {
    if f.len() != space.node_count() {
        return Err(Error::Data(format!("expected {} node values, got {}", space.node_count(), f.len())));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("node values must be finite".into()));
    }
    Ok(())
}

/// Lower Cholesky factor, reporting the smallest pivot on failure.
pub fn cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max);
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut smallest = (f64::INFINITY, 0);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < smallest.0 {
            smallest = (d, j);
        }
        if !(d > 1e-13 * scale) {
            return Err(Error::Conditioning { smallest_pivot: d, row: j });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `E v = λ M v` through `M = L Lᵀ` and a symmetric eigendecomposition
/// of `L^{-1} E L^{-T}`. Eigenvalues within `tol (1 + λ)` share a level.
pub fn solve_spectrum(fm: &FormMatrices, tol: f64) -> Result<SpectralModel> {
    let l = cholesky(&fm.m)?;
    let y = l.solve_lower_triangular(&fm.e).ok_or_else(|| singular(&l))?;
    let c = l.solve_lower_triangular(&y.transpose()).ok_or_else(|| singular(&l))?;
    let c = 0.5 * (&c + c.transpose());
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let raw: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let z = DMatrix::from_fn(raw.len(), raw.len(), |r, k| eig.eigenvectors[(r, order[k])]);
    let v = l.transpose().solve_upper_triangular(&z).ok_or_else(|| singular(&l))?;
    Ok(SpectralModel { levels: group_levels(&raw, tol), raw, eigenvectors: Some(v), source: SpectrumSource::Galerkin })
}

fn singular(l: &DMatrix<f64>) -> Error {
    let (row, pivot) = (0..l.nrows()).map(|i| (i, l[(i, i)])).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap_or((0, 0.0));
    Error::Conditioning { smallest_pivot: pivot * pivot, row }
}

/// Groups an ascending sequence into levels with mean values.
pub fn group_levels(sorted: &[f64], tol: f64) -> Vec<EigenLevel> {
    let mut levels = Vec::new();
    let mut start = 0;
    for i in 1..=sorted.len() {
        let split = i == sorted.len() || sorted[i] - sorted[start] > tol * (1.0 + sorted[start].abs());
        if split {
            let group = &sorted[start..i];
            levels.push(EigenLevel {
                value: group.iter().sum::<f64>() / group.len() as f64,
                multiplicity: group.len() as u64,
            });
            start = i;
        }
    }
    levels
}

/// `|Tr(M^{-1} E) - Σ λ| / max(1, |Σ λ|)`, with the trace from an LU solve.
pub fn trace_consistency(fm: &FormMatrices, model: &SpectralModel) -> Result<f64> {
    let a = fm.m.clone().lu().solve(&fm.e).ok_or(Error::Conditioning { smallest_pivot: 0.0, row: 0 })?;
    let sum: f64 = model.raw.iter().sum();
    Ok((a.trace() - sum).abs() / sum.abs().max(1.0))
}

/// Writes a matrix row-major, one row per line, space separated.
pub fn write_dense<W: Write>(m: &DMatrix<f64>, mut out: W) -> std::io::Result<()> {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::harmonic;

    fn node_scalars(space: &Space) -> Vec<f64> {
        space.quadrature.nodes.iter().map(|p| p.scalar().unwrap()).collect()
    }

    #[test]
    fn shift_haar_form_is_diagonal() {
        let s = Space::shift(2, 2.0, 3).unwrap();
        let b = BasisSet::haar(&s, 3).unwrap();
        let fm = assemble_form_matrix(&s, &b).unwrap();
        let want = [0.0, 1.0, 1.5, 1.5, 2.0, 2.0, 2.0, 2.0];
        for (i, &w) in want.iter().enumerate() {
            for j in 0..8 {
                let target = if i == j { w } else { 0.0 };
                assert!((fm.e[(i, j)] - target).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn shift_cylinder_spectrum() {
        let s = Space::shift(2, 2.0, 4).unwrap();
        let b = BasisSet::cylinder_indicators(&s, 4).unwrap();
        let fm = assemble_form_matrix(&s, &b).unwrap();
        let c = b.constant_coefficients(&s).unwrap();
        let ec = &fm.e * nalgebra::DVector::from_vec(c);
        assert!(ec.amax() < 1e-13);
        let model = solve_spectrum(&fm, DEFAULT_MULTIPLICITY_TOL).unwrap();
        let got: Vec<(f64, u64)> = model.levels.iter().map(|l| (l.value, l.multiplicity)).collect();
        let want = [(0.0, 1), (1.0, 1), (1.5, 2), (2.0, 4), (2.5, 8)];
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g.0 - w.0).abs() < 1e-10);
            assert_eq!(g.1, w.1);
        }
        assert!(trace_consistency(&fm, &model).unwrap() < 1e-8);
    }

    #[test]
    fn legendre_galerkin_eigenvalues() {
        let s = Space::interval(-1.0, 1.0, 200).unwrap();
        let b = BasisSet::legendre(&s, 5).unwrap();
        let fm = assemble_form_matrix(&s, &b).unwrap();
        let model = solve_spectrum(&fm, DEFAULT_MULTIPLICITY_TOL).unwrap();
        assert!(model.raw[0].abs() < 1e-8);
        for n in 1..=5 {
            assert!((model.raw[n] - 2.0 * harmonic(n)).abs() < 1e-6);
        }
    }

    #[test]
    fn node_pair_legendre_off_diagonals_are_small() {
        let s = Space::interval(-1.0, 1.0, 200).unwrap();
        let b = BasisSet::legendre(&s, 8).unwrap();
        let fm = assemble_form_matrix_with(&s, &b, AssemblyRule::NodePairs).unwrap();
        let scale = (0..9).map(|i| fm.e[(i, i)].abs()).fold(0.0, f64::max);
        for i in 0..9 {
            for j in 0..9 {
                if i != j {
                    assert!(fm.e[(i, j)].abs() / scale <= 1e-4, "({i},{j}) {}", fm.e[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn pointwise_operator() {
        let s = Space::interval(-1.0, 1.0, 400).unwrap();
        let v = apply_logdirichlet(&s, &|p| p.scalar().unwrap(), &Point::Coordinate(0.3)).unwrap();
        assert!((v - 0.6).abs() < 1e-10);
        let c = Space::circle(256).unwrap();
        let v = apply_logdirichlet(&c, &|p| p.scalar().unwrap().cos(), &Point::angle(0.0)).unwrap();
        assert!((v - 4.0).abs() < 1e-10);
        let v = apply_logdirichlet(&c, &|_| 2.5, &Point::angle(1.0)).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn energies() {
        let s = Space::interval(-1.0, 1.0, 800).unwrap();
        let f = node_scalars(&s);
        assert!((dirichlet_energy(&s, &f).unwrap() - 4.0 / 3.0).abs() < 1e-4);
        assert_eq!(dirichlet_energy(&s, &vec![1.0; 800]).unwrap(), 0.0);

        let sh = Space::shift(2, 2.0, 6).unwrap();
        let h = crate::closed_forms::haar_wavelets(&sh, 0).unwrap();
        let f: Vec<f64> = h.values.column(0).iter().copied().collect();
        assert!((dirichlet_energy(&sh, &f).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn weak_form_consistency() {
        let s = Space::shift(3, 2.0, 4).unwrap();
        let f: Vec<f64> = (0..81).map(|i| ((i * 7) % 11) as f64).collect();
        let g: Vec<f64> = (0..81).map(|i| ((i * 5) % 13) as f64 - 3.0).collect();
        let lf = apply_logdirichlet_nodes(&s, &f).unwrap();
        let lhs: f64 = lf.iter().zip(&g).zip(s.weights()).map(|((a, b), w)| a * b * w).sum();
        let rhs = dirichlet_form(&s, &f, &g).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
    }

    #[test]
    fn singular_mass_is_reported() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(cholesky(&m), Err(Error::Conditioning { row: 1, .. })));
    }

    #[test]
    fn grouping() {
        let levels = group_levels(&[0.0, 1.0, 1.0 + 1e-9, 2.0], 1e-6);
        assert_eq!(levels.len(), 3);
        assert_eq!(levels[1].multiplicity, 2);
    }

    #[test]
    fn dense_dump() {
        let mut buf = Vec::new();
        write_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1.0 0.5\n0.5 2.0\n");
    }
}
