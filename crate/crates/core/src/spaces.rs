//! Concrete Ahlfors regular metric-measure spaces.
//!
//! Three families are supported:
//!
//! * the full shift on `N` symbols with the ultrametric
//!   `d(x, y) = λ^{-(k-1)}` (`k` the first index where the words differ) and
//!   the Bernoulli measure `μ(C_w) = N^{-|w|}`;
//! * a compact interval `[a, b]` with the Euclidean metric and Lebesgue measure;
//! * the unit circle with the chordal distance `2 |sin((θ - θ')/2)|` and arc
//!   length measure.
//!
//! Balls are closed: `B(x, r) = {y : d(x, y) <= r}`. For the shift this makes
//! `B(x, λ^{-n})` the cylinder `C_{x_1 ... x_n}`.

use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use crate::error::{domain_err, Error, Result};
use crate::quadrature::gauss_legendre;

/// Relative slack used when comparing distances against radii.
pub(crate) const SNAP: f64 = 1e-12;

/// Largest number of shift nodes a single space may carry.
const MAX_SHIFT_NODES: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    /// Finite word over `{1, ..., N}`, representing the cylinder it spells.
    Word(Vec<u8>),
    /// Coordinate in an interval.
    Coordinate(f64),
    /// Angle in `[0, 2π)`.
    Angle(f64),
}

impl Point {
    /// Angle reduced into `[0, 2π)`.
    pub fn angle(theta: f64) -> Self {
        Point::Angle(theta.rem_euclid(2.0 * PI))
    }

    fn kind_name(&self) -> &'static str {
        match self {
            Point::Word(_) => "word",
            Point::Coordinate(_) => "coordinate",
            Point::Angle(_) => "angle",
        }
    }

    /// Scalar coordinate for interval and circle points.
    pub fn scalar(&self) -> Option<f64> {
        match self {
            Point::Coordinate(x) | Point::Angle(x) => Some(*x),
            Point::Word(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpaceKind {
    Shift { symbols: usize, lambda: f64, depth: usize },
    Interval { a: f64, b: f64 },
    Circle,
}

impl SpaceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SpaceKind::Shift { .. } => "shift",
            SpaceKind::Interval { .. } => "interval",
            SpaceKind::Circle => "circle",
        }
    }
}

/// Discretization of the measure: nodes with positive weights.
#[derive(Clone, Debug)]
pub struct QuadratureScheme {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    pub level: usize,
}

impl QuadratureScheme {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        // Compensated sum so that the total mass check holds at 1e-12.
        let mut sum = 0.0;
        let mut c = 0.0;
        for &w in &self.weights {
            let y = w - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        sum
    }
}

#[derive(Clone, Debug)]
pub struct Space {
    pub kind: SpaceKind,
    /// Ahlfors dimension.
    pub delta: f64,
    pub diam: f64,
    /// A constant `C >= 1` for which `C^{-1} r^δ <= μ(B(x, r)) <= C r^δ`.
    pub regularity_constant: f64,
    pub quadrature: QuadratureScheme,
}

#[derive(Clone, Debug, Serialize)]
pub struct RadiusRatios {
    pub radius: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub estimated_c: f64,
    pub per_radius: Vec<RadiusRatios>,
    pub sample_count: usize,
}

impl Space {
    /// Full shift on `symbols` letters with ultrametric parameter `lambda`,
    /// discretized by the `symbols^depth` cylinders of length `depth`.
    pub fn shift(symbols: usize, lambda: f64, depth: usize) -> Result<Self> {
        if symbols < 2 || symbols > u8::MAX as usize {
            return domain_err(format!("shift needs 2 <= N <= 255 symbols, got {symbols}"));
        }
        if !(lambda > 1.0) || !lambda.is_finite() {
            return domain_err(format!("shift needs lambda > 1, got {lambda}"));
        }
        if depth < 1 {
            return domain_err("shift depth must be at least 1");
        }
        let count = symbols
            .checked_pow(depth as u32)
            .filter(|&c| c <= MAX_SHIFT_NODES)
            .ok_or_else(|| Error::ParameterDomain(format!("{symbols}^{depth} nodes exceeds {MAX_SHIFT_NODES}")))?;
        let nodes = (0..count).map(|i| Point::Word(index_to_word(i, symbols, depth))).collect();
        let weight = (symbols as f64).powi(-(depth as i32));
        Ok(Space {
            kind: SpaceKind::Shift { symbols, lambda, depth },
            delta: (symbols as f64).ln() / lambda.ln(),
            diam: 1.0,
            regularity_constant: symbols as f64,
            quadrature: QuadratureScheme { nodes, weights: vec![weight; count], level: depth },
        })
    }

    /// Interval `[a, b]` with Gauss-Legendre nodes.
    pub fn interval(a: f64, b: f64, nodes: usize) -> Result<Self> {
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return domain_err(format!("interval needs a < b, got [{a}, {b}]"));
        }
        if nodes < 2 {
            return domain_err(format!("interval needs at least 2 nodes, got {nodes}"));
        }
        let (x, w) = gauss_legendre(nodes);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        Ok(Space {
            kind: SpaceKind::Interval { a, b },
            delta: 1.0,
            diam: b - a,
            regularity_constant: 2.0,
            quadrature: QuadratureScheme {
                nodes: x.iter().map(|&t| Point::Coordinate(mid + half * t)).collect(),
                weights: w.iter().map(|&wi| wi * half).collect(),
                level: nodes,
            },
        })
    }

    /// Unit circle with equispaced nodes and the chordal metric.
    pub fn circle(nodes: usize) -> Result<Self> {
        if nodes < 4 {
            return domain_err(format!("circle needs at least 4 nodes, got {nodes}"));
        }
        let h = 2.0 * PI / nodes as f64;
        Ok(Space {
            kind: SpaceKind::Circle,
            delta: 1.0,
            diam: 2.0,
            regularity_constant: PI,
            quadrature: QuadratureScheme {
                nodes: (0..nodes).map(|i| Point::Angle(h * i as f64)).collect(),
                weights: vec![h; nodes],
                level: nodes,
            },
        })
    }

    /// Total mass `μ(X)`.
    pub fn total_measure(&self) -> f64 {
        match self.kind {
            SpaceKind::Shift { .. } => 1.0,
            SpaceKind::Interval { a, b } => b - a,
            SpaceKind::Circle => 2.0 * PI,
        }
    }

    pub fn node_count(&self) -> usize {
        self.quadrature.len()
    }

    pub fn node(&self, i: usize) -> &Point {
        &self.quadrature.nodes[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.quadrature.weights
    }

    /// Checks that a point belongs to this space.
    pub fn validate(&self, p: &Point) -> Result<()> {
        match (self.kind, p) {
            (SpaceKind::Shift { symbols, .. }, Point::Word(w)) => {
                if w.iter().any(|&s| s == 0 || s as usize > symbols) {
                    return domain_err(format!("word symbols must lie in 1..={symbols}"));
                }
                Ok(())
            }
            (SpaceKind::Interval { a, b }, Point::Coordinate(x)) => {
                if *x < a || *x > b {
                    return domain_err(format!("coordinate {x} outside [{a}, {b}]"));
                }
                Ok(())
            }
            (SpaceKind::Circle, Point::Angle(t)) => {
                if !t.is_finite() {
                    return domain_err("angle must be finite");
                }
                Ok(())
            }
            _ => Err(self.kind_mismatch(p)),
        }
    }

    fn kind_mismatch(&self, p: &Point) -> Error {
        let expected = match self.kind {
            SpaceKind::Shift { .. } => "word",
            SpaceKind::Interval { .. } => "coordinate",
            SpaceKind::Circle => "angle",
        };
        Error::PointKind { expected, got: p.kind_name() }
    }

    /// Metric distance between two points.
    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64> {
        match (self.kind, p, q) {
            (SpaceKind::Shift { lambda, .. }, Point::Word(x), Point::Word(y)) => Ok(match first_difference(x, y) {
                Some(j) => lambda.powi(-(j as i32)),
                None => 0.0,
            }),
            (SpaceKind::Interval { .. }, Point::Coordinate(x), Point::Coordinate(y)) => Ok((x - y).abs()),
            (SpaceKind::Circle, Point::Angle(x), Point::Angle(y)) => Ok(chord(x - y)),
            (_, Point::Word(_), _) | (_, Point::Coordinate(_), _) | (_, Point::Angle(_), _) => {
                let bad = if self.validate_kind(p) { q } else { p };
                Err(self.kind_mismatch(bad))
            }
        }
    }

    fn validate_kind(&self, p: &Point) -> bool {
        matches!(
            (self.kind, p),
            (SpaceKind::Shift { .. }, Point::Word(_))
                | (SpaceKind::Interval { .. }, Point::Coordinate(_))
                | (SpaceKind::Circle, Point::Angle(_))
        )
    }

    /// Distance between quadrature nodes `i` and `j`.
    pub fn node_distance(&self, i: usize, j: usize) -> f64 {
        self.distance(self.node(i), self.node(j)).expect("nodes share the space kind")
    }

    /// Singular kernel `d(p, q)^{-δ}`, or `0` for coincident points.
    ///
    /// On the shift `d^{-δ} = N^j` exactly when `d = λ^{-j}`, and the integer
    /// power is used instead of `powf`.
    pub fn kernel(&self, p: &Point, q: &Point) -> Result<f64> {
        self.kernel_pow(p, q, self.delta)
    }

    /// `d(p, q)^{-exponent}`, or `0` for coincident points.
    pub fn kernel_pow(&self, p: &Point, q: &Point, exponent: f64) -> Result<f64> {
        match (self.kind, p, q) {
            (SpaceKind::Shift { symbols, lambda, .. }, Point::Word(x), Point::Word(y)) => {
                Ok(match first_difference(x, y) {
                    Some(j) if exponent == self.delta => (symbols as f64).powi(j as i32),
                    Some(j) => lambda.powf(j as f64 * exponent),
                    None => 0.0,
                })
            }
            _ => {
                let d = self.distance(p, q)?;
                Ok(if d > 0.0 { d.powf(-exponent) } else { 0.0 })
            }
        }
    }

    pub fn node_kernel(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        self.kernel(self.node(i), self.node(j)).expect("nodes share the space kind")
    }

    /// Exact measure of the closed ball `B(center, r)`.
    pub fn ball_measure(&self, center: &Point, r: f64) -> Result<f64> {
        self.validate(center)?;
        if !(r > 0.0) {
            return domain_err(format!("ball radius must be positive, got {r}"));
        }
        Ok(match (self.kind, center) {
            (SpaceKind::Shift { symbols, lambda, .. }, _) => {
                (symbols as f64).powi(-(self.shift_ball_level(r, lambda) as i32))
            }
            (SpaceKind::Interval { a, b }, Point::Coordinate(x)) => ((x + r).min(b) - (x - r).max(a)).max(0.0),
            (SpaceKind::Circle, _) => 4.0 * (r.min(2.0) / 2.0).asin(),
            _ => unreachable!("validated above"),
        })
    }

    /// Quadrature estimate of `μ(B(center, r))`: total weight of nodes in the ball.
    pub fn ball_measure_quadrature(&self, center: &Point, r: f64) -> Result<f64> {
        self.validate(center)?;
        let mut total = 0.0;
        for (q, w) in self.quadrature.nodes.iter().zip(&self.quadrature.weights) {
            if self.distance(center, q)? <= r * (1.0 + SNAP) {
                total += w;
            }
        }
        Ok(total)
    }

    /// Length `n` of the cylinder equal to the closed ball of radius `r`.
    fn shift_ball_level(&self, r: f64, lambda: f64) -> u32 {
        if r >= 1.0 {
            return 0;
        }
        let t = -r.ln() / lambda.ln();
        let nearest = t.round();
        if (t - nearest).abs() < 1e-9 {
            nearest as u32
        } else {
            t.ceil() as u32
        }
    }

    /// `r^δ`, exact on the shift at the natural radii `λ^{-n}`.
    pub fn radius_power(&self, r: f64) -> f64 {
        if let SpaceKind::Shift { symbols, lambda, .. } = self.kind {
            let t = -r.ln() / lambda.ln();
            let nearest = t.round();
            if (t - nearest).abs() < 1e-9 {
                return (symbols as f64).powi(-(nearest as i32));
            }
        }
        r.powf(self.delta)
    }

    /// Deterministic, evenly spread sample of points.
    pub fn sample_points(&self, count: usize) -> Vec<Point> {
        let count = count.max(1);
        match self.kind {
            SpaceKind::Interval { a, b } => {
                if count == 1 {
                    return vec![Point::Coordinate(0.5 * (a + b))];
                }
                (0..count).map(|i| Point::Coordinate(a + (b - a) * i as f64 / (count - 1) as f64)).collect()
            }
            SpaceKind::Circle => (0..count).map(|i| Point::Angle(2.0 * PI * i as f64 / count as f64)).collect(),
            SpaceKind::Shift { .. } => {
                let n = self.node_count();
                let stride = (n / count).max(1);
                (0..n).step_by(stride).take(count).map(|i| self.node(i).clone()).collect()
            }
        }
    }

    /// Random points drawn from μ (words of length `max(depth, 32)` on the shift).
    pub fn random_points<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<Point> {
        (0..count)
            .map(|_| match self.kind {
                SpaceKind::Interval { a, b } => Point::Coordinate(rng.gen_range(a..=b)),
                SpaceKind::Circle => Point::Angle(rng.gen_range(0.0..2.0 * PI)),
                SpaceKind::Shift { symbols, depth, .. } => {
                    Point::Word((0..depth.max(32)).map(|_| rng.gen_range(1..=symbols as u8)).collect())
                }
            })
            .collect()
    }

    /// Min/max of `μ(B(x, r)) / r^δ` over a deterministic sample of centers.
    pub fn verify_ahlfors(&self, sample_count: usize, radii: &[f64]) -> Result<RegularityReport> {
        if sample_count < 1 {
            return domain_err("verify_ahlfors needs at least one sample");
        }
        let centers = self.sample_points(sample_count);
        self.verify_ahlfors_at(&centers, radii)
    }

    pub fn verify_ahlfors_at(&self, centers: &[Point], radii: &[f64]) -> Result<RegularityReport> {
        if centers.is_empty() || radii.is_empty() {
            return domain_err("verify_ahlfors needs centers and radii");
        }
        let mut per_radius = Vec::with_capacity(radii.len());
        let mut estimated_c: f64 = 1.0;
        for &r in radii {
            if !(r > 0.0) || r > self.diam * (1.0 + SNAP) {
                return domain_err(format!("radius {r} outside (0, {}]", self.diam));
            }
            let scale = self.radius_power(r);
            let mut lo = f64::INFINITY;
            let mut hi: f64 = 0.0;
            for c in centers {
                let ratio = self.ball_measure(c, r)? / scale;
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
            estimated_c = estimated_c.max(hi).max(1.0 / lo);
            per_radius.push(RadiusRatios { radius: r, min_ratio: lo, max_ratio: hi });
        }
        Ok(RegularityReport { estimated_c, per_radius, sample_count: centers.len() })
    }

    /// Size of a greedy (farthest-point) cover of the nodes by closed balls.
    pub fn covering_number(&self, radius: f64) -> Result<usize> {
        if !(radius > 0.0) {
            return domain_err(format!("covering radius must be positive, got {radius}"));
        }
        let n = self.node_count();
        let mut gap: Vec<f64> = (0..n).map(|j| self.node_distance(0, j)).collect();
        let mut centers = 1;
        loop {
            let (far, &far_d) =
                gap.iter().enumerate().fold((0, &f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
            if far_d <= radius * (1.0 + SNAP) {
                return Ok(centers);
            }
            centers += 1;
            for (j, g) in gap.iter_mut().enumerate() {
                *g = g.min(self.node_distance(far, j));
            }
        }
    }
}

/// Chordal distance of two angles.
pub fn chord(dtheta: f64) -> f64 {
    2.0 * (0.5 * dtheta).sin().abs()
}

/// 0-based index of the first differing symbol over the common prefix.
pub fn first_difference(x: &[u8], y: &[u8]) -> Option<usize> {
    x.iter().zip(y).position(|(a, b)| a != b)
}

/// Word of length `depth` whose base-`symbols` digits spell `index`.
pub fn index_to_word(mut index: usize, symbols: usize, depth: usize) -> Vec<u8> {
    let mut word = vec![0u8; depth];
    for slot in word.iter_mut().rev() {
        *slot = (index % symbols) as u8 + 1;
        index /= symbols;
    }
    word
}

/// Inverse of [`index_to_word`] over the first `depth` symbols.
pub fn word_to_index(word: &[u8], symbols: usize, depth: usize) -> usize {
    word.iter().take(depth).fold(0, |acc, &s| acc * symbols + (s as usize - 1))
}
