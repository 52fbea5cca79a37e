//! Singular annulus integrals and truncated-kernel smoothing.

use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain_err, Error, Result};
use crate::form_engine::dirichlet_energy;
use crate::spaces::{Point, Space, SpaceKind, SNAP};

type Rule = Arc<(Vec<f64>, Vec<f64>)>;

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`, memoized per `n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let hit = cache.lock().expect("rule cache").get(&n).cloned();
    let rule = match hit {
        Some(r) => r,
        None => {
            let r: Rule = Arc::new(compute_gauss_legendre(n));
            cache.lock().expect("rule cache").insert(n, r.clone());
            r
        }
    };
    (rule.0.clone(), rule.1.clone())
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `P_n(z)` and `P_n'(z)` by the three-term recurrence.
fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (x.iter().map(|t| mid + half * t).collect(), w.iter().map(|v| v * half).collect())
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// 15-point Kronrod estimate and error on `[a, b]`.
fn qk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        resk += WGK[j] * s;
        if j % 2 == 1 {
            resg += WG[j / 2] * s;
        }
    }
    (resk * h, ((resk - resg) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss-Kronrod integration over `[a, b]`.
///
/// Bisects the panel with the largest error estimate until the summed
/// estimate drops below `max(abs_tol, rel_tol |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    integrate_with_breaks(f, &[a, b], abs_tol, rel_tol)
}

/// As [`integrate`], starting from the panels between consecutive `breaks`.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, breaks: &[f64], abs_tol: f64, rel_tol: f64) -> f64 {
    const MAX_PANELS: usize = 4000;
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut err = 0.0;
    for pair in breaks.windows(2) {
        if pair[1] > pair[0] {
            let (value, error) = qk15(&f, pair[0], pair[1]);
            total += value;
            err += error;
            heap.push(Panel { a: pair[0], b: pair[1], value, error });
        }
    }
    while err > abs_tol.max(rel_tol * total.abs()) && heap.len() < MAX_PANELS {
        let Some(p) = heap.pop() else { break };
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            heap.push(p);
            break;
        }
        let (v1, e1) = qk15(&f, p.a, m);
        let (v2, e2) = qk15(&f, m, p.b);
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        heap.push(Panel { a: p.a, b: m, value: v1, error: e1 });
        heap.push(Panel { a: m, b: p.b, value: v2, error: e2 });
    }
    // Re-add in a fixed order so the result does not carry the running sum's drift.
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    panels.iter().map(|p| p.value).sum()
}

/// `∫_lo^hi s^{-e} ds`, infinite when divergent at 0.
fn power_integral(lo: f64, hi: f64, e: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if lo == 0.0 && e >= 1.0 {
        return f64::INFINITY;
    }
    if e == 1.0 {
        (hi / lo).ln()
    } else {
        let q = 1.0 - e;
        (hi.powf(q) - lo.powf(q)) / q
    }
}

/// `(2 sin(v))/(2v)` with a series near 0.
fn sinc(v: f64) -> f64 {
    if v.abs() < 1e-3 {
        let v2 = v * v;
        1.0 - v2 / 6.0 + v2 * v2 / 120.0
    } else {
        v.sin() / v
    }
}

/// `∫_{r1 < d(x, y) <= r2} d(x, y)^{-exponent} dμ(y)`.
///
/// Closed annuli on the outside match the closed-ball convention, so that
/// `annulus_integral(x, r, diam, δ)` is the integral over `X \ B(x, r)`.
/// Returns `+∞` when the integral diverges at the center.
pub fn annulus_integral(space: &Space, x: &Point, r1: f64, r2: f64, exponent: f64) -> Result<f64> {
    space.validate(x)?;
    if !(r1 >= 0.0) || !(r2 > r1) || r2 > space.diam * (1.0 + SNAP) {
        return domain_err(format!("annulus needs 0 <= r1 < r2 <= diam = {}, got ({r1}, {r2})", space.diam));
    }
    Ok(match (space.kind, x) {
        (SpaceKind::Interval { a, b }, Point::Coordinate(c)) => {
            let mut total = 0.0;
            for side in [c - a, b - c] {
                total += power_integral(r1, r2.min(side), exponent);
            }
            total
        }
        (SpaceKind::Circle, _) => {
            // d = 2 sin(u/2) for the angular offset u ∈ [0, π], on both sides.
            let u1 = 2.0 * (r1.min(2.0) / 2.0).asin();
            let u2 = 2.0 * (r2.min(2.0) / 2.0).asin();
            let singular = power_integral(u1, u2, exponent);
            if singular.is_infinite() {
                return Ok(f64::INFINITY);
            }
            let smooth = |u: f64| {
                if u == 0.0 {
                    return 0.0;
                }
                let ln_ratio = -sinc(0.5 * u).ln();
                u.powf(-exponent) * (exponent * ln_ratio).exp_m1()
            };
            2.0 * (singular + integrate(smooth, u1, u2, 1e-15, 1e-13))
        }
        (SpaceKind::Shift { symbols, lambda, .. }, _) => shift_annulus(symbols as f64, lambda, r1, r2, exponent),
        _ => unreachable!("validated above"),
    })
}

/// Shell sum on the shift: the set `{d = λ^{-j}}` has measure `(1 - 1/N) N^{-j}`.
fn shift_annulus(n: f64, lambda: f64, r1: f64, r2: f64, exponent: f64) -> f64 {
    let level = |r: f64| -r.ln() / lambda.ln();
    // Shells j with λ^{-j} <= r2, i.e. j >= first.
    let t2 = level(r2);
    let first = if (t2 - t2.round()).abs() < 1e-9 { t2.round() } else { t2.ceil() }.max(0.0);
    let ratio = lambda.powf(exponent) / n;
    let shell = |j: f64| (1.0 - 1.0 / n) * ratio.powf(j);
    if r1 == 0.0 {
        if ratio >= 1.0 {
            return f64::INFINITY;
        }
        return shell(first) / (1.0 - ratio);
    }
    // Shells with λ^{-j} > r1, i.e. j < t1.
    let t1 = level(r1);
    let last = if (t1 - t1.round()).abs() < 1e-9 { t1.round() - 1.0 } else { t1.floor() };
    let mut total = 0.0;
    let mut j = first;
    while j <= last {
        total += shell(j);
        j += 1.0;
    }
    total
}

/// `∫_{X \ B(x, r)} d(x, y)^{-δ} dμ(y)`.
pub fn log_tail_integral(space: &Space, x: &Point, r: f64) -> Result<f64> {
    if !(r > 0.0) || r >= space.diam {
        return domain_err(format!("log tail needs 0 < r < diam = {}, got {r}", space.diam));
    }
    annulus_integral(space, x, r, space.diam, space.delta)
}

/// Row-normalized far-field kernel `d^{-δ} 1_{d >= r}` on the quadrature nodes.
#[derive(Clone, Debug)]
pub struct TruncatedKernel<'a> {
    pub space: &'a Space,
    pub r: f64,
    /// `Σ_q w_q t_r(p, q)` for every node `p`.
    pub normalization: Vec<f64>,
}

impl<'a> TruncatedKernel<'a> {
    pub fn new(space: &'a Space, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return domain_err(format!("truncation radius must be positive, got {r}"));
        }
        let n = space.node_count();
        let normalization: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|p| (0..n).map(|q| space.weights()[q] * kernel_value(space, r, p, q)).sum())
            .collect();
        if let Some(node) = normalization.iter().position(|&m| !(m > 0.0)) {
            return Err(Error::DegenerateTruncation { node, r });
        }
        Ok(TruncatedKernel { space, r, normalization })
    }

    /// `T_r f` at every node.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let space = self.space;
        let n = space.node_count();
        if f.len() != n {
            return Err(Error::Data(format!("expected {n} node values, got {}", f.len())));
        }
        Ok((0..n)
            .into_par_iter()
            .map(|p| {
                let s: f64 = (0..n).map(|q| space.weights()[q] * kernel_value(space, self.r, p, q) * f[q]).sum();
                s / self.normalization[p]
            })
            .collect())
    }

    /// Sum of the normalized kernel row at node `p` against μ (equals 1).
    pub fn row_mass(&self, p: usize) -> f64 {
        let space = self.space;
        (0..space.node_count()).map(|q| space.weights()[q] * kernel_value(space, self.r, p, q)).sum::<f64>()
            / self.normalization[p]
    }
}

fn kernel_value(space: &Space, r: f64, p: usize, q: usize) -> f64 {
    if p == q {
        return 0.0;
    }
    let d = space.node_distance(p, q);
    if d >= r * (1.0 - SNAP) {
        space.node_kernel(p, q)
    } else {
        0.0
    }
}

/// Convenience wrapper for [`TruncatedKernel::apply`].
pub fn truncated_kernel_apply(kernel: &TruncatedKernel, f: &[f64]) -> Result<Vec<f64>> {
    kernel.apply(f)
}

/// `‖f - T_r f‖² log(1/r) / E(f, f)`, zero for functions of zero energy.
pub fn approximation_defect(space: &Space, r: f64, f: &[f64]) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return domain_err(format!("approximation defect needs 0 < r < 1, got {r}"));
    }
    let energy = dirichlet_energy(space, f)?;
    if energy <= 0.0 {
        return Ok(0.0);
    }
    let smoothed = TruncatedKernel::new(space, r)?.apply(f)?;
    let l2: f64 = f.iter().zip(&smoothed).zip(space.weights()).map(|((a, b), w)| w * (a - b) * (a - b)).sum();
    Ok(l2 * (1.0 / r).ln() / energy)
}

/// `(r, approximation_defect(r))` over a radius grid.
pub fn defect_sweep(space: &Space, f: &[f64], radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    radii.iter().map(|&r| Ok((r, approximation_defect(space, r, f)?))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimate {
    /// `∫_{B(x, r)} d^{s - δ} <= C e^{δ + s} (e^s - 1)^{-1} r^s`.
    InnerPower,
    /// `∫_{X \ B(x, r)} d^{-δ - s} <= C e^{δ + s} (e^s - 1)^{-1} r^{-s}`.
    OuterPower,
    /// `∫_{B(x, r) \ B(x, r/e)} d^{-δ} <= C e^δ`.
    Shell,
    /// `∫_{X \ B(x, r)} d^{-δ} / log(1/r)` stays in a fixed band.
    LogTail,
}

/// Worst case of one estimate over sampled centers and radii.
///
/// `observed_*` are the scale-free quantities (integral divided by `r^s`,
/// times `r^s`, as is, or divided by `log(1/r)`). The log-tail band has no
/// explicit constant, so its `bound` and `margin` are absent.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub estimate: Estimate,
    pub s: Option<f64>,
    pub bound: Option<f64>,
    pub observed_min: f64,
    pub observed_max: f64,
    pub margin: Option<f64>,
    pub samples: usize,
}

impl LemmaCheck {
    pub fn holds(&self) -> bool {
        match self.margin {
            Some(m) => m >= 0.0,
            None => self.observed_min > 0.0 && self.observed_max.is_finite(),
        }
    }
}

/// All four annulus estimates at every center and radius in `radii`
/// (`0 < r <= diam`); the log-tail band only uses radii up to `diam / 10`.
pub fn lemma_checks(space: &Space, centers: &[Point], radii: &[f64], s_values: &[f64]) -> Result<Vec<LemmaCheck>> {
    if let Some(&r) = radii.iter().find(|&&r| !(r > 0.0) || r > space.diam) {
        return domain_err(format!("radius {r} outside (0, diam = {}]", space.diam));
    }
    if let Some(&s) = s_values.iter().find(|&&s| !(s > 0.0)) {
        return domain_err(format!("estimate exponent must be positive, got {s}"));
    }
    let (c, delta, diam) = (space.regularity_constant, space.delta, space.diam);
    let tail_radii: Vec<f64> = radii.iter().copied().filter(|&r| r <= diam / 10.0).collect();
    let scan = |estimate: Estimate, s: Option<f64>, rs: &[f64], bound: Option<f64>| -> Result<LemmaCheck> {
        let per_center: Vec<(f64, f64)> = centers
            .par_iter()
            .map(|x| {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for &r in rs {
                    let v = match (estimate, s) {
                        (Estimate::InnerPower, Some(s)) => annulus_integral(space, x, 0.0, r, delta - s)? / r.powf(s),
                        (Estimate::OuterPower, Some(s)) if r < diam => {
                            annulus_integral(space, x, r, diam, delta + s)? * r.powf(s)
                        }
                        (Estimate::OuterPower, _) => 0.0,
                        (Estimate::Shell, _) => annulus_integral(space, x, r / std::f64::consts::E, r, delta)?,
                        _ => log_tail_integral(space, x, r)? / (1.0 / r).ln(),
                    };
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                Ok((lo, hi))
            })
            .collect::<Result<_>>()?;
        let observed_min = per_center.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let observed_max = per_center.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        Ok(LemmaCheck {
            estimate,
            s,
            bound,
            observed_min,
            observed_max,
            margin: bound.map(|b| b - observed_max),
            samples: centers.len() * rs.len(),
        })
    };
    let mut out = Vec::new();
    for &s in s_values {
        let bound = c * (delta + s).exp() / s.exp_m1();
        out.push(scan(Estimate::InnerPower, Some(s), radii, Some(bound))?);
        out.push(scan(Estimate::OuterPower, Some(s), radii, Some(bound))?);
    }
    out.push(scan(Estimate::Shell, None, radii, Some(c * delta.exp()))?);
    out.push(scan(Estimate::LogTail, None, &tail_radii, None)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [2, 5, 16, 101] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for k in 0..(2 * n).min(30) {
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
                assert!((got - exact).abs() < 1e-13, "n={n} k={k}");
            }
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn large_gauss_legendre_is_accurate() {
        let (x, w) = gauss_legendre_on(3000, 0.0, PI);
        let s: f64 = x.iter().zip(&w).map(|(a, b)| b * a.sin()).sum();
        assert!((s - 2.0).abs() < 1e-13);
    }

    #[test]
    fn adaptive_kronrod() {
        let v = integrate(|x: f64| x.exp(), 0.0, 1.0, 1e-14, 1e-14);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-14);
        let v = integrate(|x: f64| x.sqrt(), 0.0, 1.0, 1e-13, 1e-13);
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
        let v = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-10, 1e-10);
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn interval_annuli() {
        let s = Space::interval(-1.0, 1.0, 16).unwrap();
        let x = Point::Coordinate(0.0);
        assert!((annulus_integral(&s, &x, 0.0, 1.0, 0.0).unwrap() - 2.0).abs() < 1e-15);
        let v = annulus_integral(&s, &x, (-1f64).exp(), 1.0, 1.0).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
        assert!(annulus_integral(&s, &x, 0.0, 1.0, 1.0).unwrap().is_infinite());
        assert!(annulus_integral(&s, &x, 0.5, 0.5, 1.0).is_err());
        let t = log_tail_integral(&s, &x, 0.1).unwrap();
        assert!((t - 2.0 * 10f64.ln()).abs() < 1e-13);
        let x = Point::Coordinate(0.3);
        let t = log_tail_integral(&s, &x, 0.1).unwrap();
        assert!((t - (13f64.ln() + 7f64.ln())).abs() < 1e-13);
    }

    #[test]
    fn shift_annuli() {
        let s = Space::shift(2, 2.0, 6).unwrap();
        let x = s.node(3).clone();
        for n in 0..8 {
            let r2 = 2f64.powi(-n) + 1e-9;
            let r1 = 2f64.powi(-(n + 1));
            let v = annulus_integral(&s, &x, r1, r2.min(1.0), 1.0).unwrap();
            assert!((v - 0.5).abs() < 1e-14, "n={n} v={v}");
        }
        for n in 1..20 {
            let v = log_tail_integral(&s, &x, 2f64.powi(-n)).unwrap();
            assert!((v - 0.5 * n as f64).abs() < 1e-12);
        }
        // Measure of the ball, exponent 0.
        let v = annulus_integral(&s, &x, 0.0, 0.25, 0.0).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn circle_annuli_match_direct_integration() {
        let s = Space::circle(16).unwrap();
        let x = Point::angle(0.7);
        for (r1, r2, e) in [(0.1, 1.5, 1.0), (0.0, 2.0, 0.5), (0.01, 0.2, 1.5), (0.0, 2.0, 0.0)] {
            let got = annulus_integral(&s, &x, r1, r2, e).unwrap();
            let u1 = 2.0 * (r1 / 2.0f64).asin();
            let u2 = 2.0 * (r2 / 2.0f64).asin();
            let direct = 2.0
                * integrate_with_breaks(
                    |u: f64| (2.0 * (0.5 * u).sin()).powf(-e),
                    &[u1, 0.5 * (u1 + u2), u2],
                    1e-13,
                    1e-12,
                );
            assert!((got - direct).abs() < 1e-8 * direct.max(1.0), "{r1} {r2} {e}: {got} {direct}");
        }
        assert!((annulus_integral(&s, &x, 0.0, 2.0, 0.0).unwrap() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn truncated_kernel_is_stochastic() {
        let s = Space::interval(-1.0, 1.0, 64).unwrap();
        let k = TruncatedKernel::new(&s, 1.0).unwrap();
        let ones = vec![1.0; 64];
        for v in k.apply(&ones).unwrap() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        for p in 0..64 {
            assert!((k.row_mass(p) - 1.0).abs() < 1e-10);
        }
        let f: Vec<f64> = s.quadrature.nodes.iter().map(|p| p.scalar().unwrap()).collect();
        assert!(k.apply(&f).unwrap().iter().all(|v| v.abs() <= 1.0));
        assert!(matches!(TruncatedKernel::new(&s, 2.5), Err(Error::DegenerateTruncation { .. })));
    }

    #[test]
    fn constant_defect_is_zero() {
        let s = Space::shift(2, 2.0, 5).unwrap();
        assert_eq!(approximation_defect(&s, 0.125, &vec![3.0; 32]).unwrap(), 0.0);
    }

    #[test]
    fn lemma_estimates_hold_on_catalog_spaces() {
        let radii: Vec<f64> = (0..=12).map(|k| 10f64.powf(-4.0 + k as f64 / 3.0)).collect();
        for space in [
            Space::shift(2, 2.0, 8).unwrap(),
            Space::shift(3, 2.0, 5).unwrap(),
            Space::interval(-1.0, 1.0, 16).unwrap(),
            Space::circle(16).unwrap(),
        ] {
            let rs: Vec<f64> = radii.iter().map(|r| r * space.diam).collect();
            let centers = space.sample_points(12);
            let checks = lemma_checks(&space, &centers, &rs, &[0.25, 0.5, 1.0]).unwrap();
            assert_eq!(checks.len(), 8);
            for c in &checks {
                assert!(c.holds(), "{:?} on {:?}", c, space.kind);
            }
            let tail = checks.last().unwrap();
            assert!(tail.observed_min > 0.3 && tail.observed_max < 5.0, "{tail:?}");
        }
    }

    #[test]
    fn sweep_is_bounded_for_wavelet() {
        let s = Space::shift(2, 2.0, 8).unwrap();
        let f: Vec<f64> = (0..s.node_count()).map(|p| if p % 4 < 2 { 1.0 } else { -1.0 }).collect();
        let radii: Vec<f64> = (3..=7).map(|k| 2f64.powi(-k)).collect();
        let sweep = defect_sweep(&s, &f, &radii).unwrap();
        assert!(sweep.iter().all(|&(_, d)| d.is_finite() && d < 10.0));
        assert!(lemma_checks(&s, &s.sample_points(2), &[2.0], &[0.5]).is_err());
    }
}
