use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::closed_forms::legendre_values;
use crate::error::{domain_err, Error, Result};
use crate::spaces::{word_to_index, Point, Space, SpaceKind};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum BasisFamily {
    /// Indicators of the cylinders of a fixed length.
    CylinderIndicators { level: usize },
    /// The constant function followed by all wavelets of levels `0..levels`.
    Haar { levels: usize },
    /// Wavelets of a single level.
    HaarLevel { level: usize },
    /// Orthonormal Legendre polynomials of degree `0..=max_degree`.
    Legendre { max_degree: usize },
    /// `1, cos θ, sin θ, ..., cos Kθ, sin Kθ`, normalized.
    Fourier { max_freq: usize },
    /// Indicator of each quadrature node.
    Nodal,
}

impl BasisFamily {
    pub fn name(&self) -> &'static str {
        match self {
            BasisFamily::CylinderIndicators { .. } => "cylinder-indicators",
            BasisFamily::Haar { .. } | BasisFamily::HaarLevel { .. } => "haar",
            BasisFamily::Legendre { .. } => "legendre",
            BasisFamily::Fourier { .. } => "fourier",
            BasisFamily::Nodal => "nodal",
        }
    }
}

/// Finite family of functions sampled at the quadrature nodes of a space.
#[derive(Clone, Debug)]
pub struct BasisSet {
    pub family: BasisFamily,
    /// `values[(p, j)] = b_j(node p)`.
    pub values: DMatrix<f64>,
    pub orthonormal: bool,
    pub space_kind: SpaceKind,
}

impl BasisSet {
    pub fn size(&self) -> usize {
        self.values.ncols()
    }

    pub fn name(&self) -> &'static str {
        self.family.name()
    }

    fn sample(space: &Space, family: BasisFamily, orthonormal: bool) -> Result<Self> {
        let mut basis = BasisSet { family, values: DMatrix::zeros(0, 0), orthonormal, space_kind: space.kind };
        let n = space.node_count();
        let rows: Vec<Vec<f64>> = space.quadrature.nodes.iter().map(|p| basis.eval(p)).collect::<Result<_>>()?;
        let size = rows.first().map_or(0, Vec::len);
        if size == 0 {
            return domain_err("basis must contain at least one function");
        }
        basis.values = DMatrix::from_fn(n, size, |p, j| rows[p][j]);
        Ok(basis)
    }

    /// Indicators of the `N^level` cylinders of length `level`.
    pub fn cylinder_indicators(space: &Space, level: usize) -> Result<Self> {
        let SpaceKind::Shift { depth, .. } = space.kind else {
            return Err(Error::Domain("cylinder indicators live on a shift".into()));
        };
        if level > depth {
            return domain_err(format!("cylinder level {level} exceeds depth {depth}"));
        }
        Self::sample(space, BasisFamily::CylinderIndicators { level }, false)
    }

    /// Constant plus wavelets of levels `0..levels`, spanning the functions
    /// constant on cylinders of length `levels`.
    pub fn haar(space: &Space, levels: usize) -> Result<Self> {
        let SpaceKind::Shift { depth, .. } = space.kind else {
            return Err(Error::Domain("Haar wavelets live on a shift".into()));
        };
        if levels > depth {
            return domain_err(format!("Haar levels {levels} exceed depth {depth}"));
        }
        Self::sample(space, BasisFamily::Haar { levels }, true)
    }

    pub(crate) fn haar_level(space: &Space, level: usize) -> Result<Self> {
        Self::sample(space, BasisFamily::HaarLevel { level }, true)
    }

    pub fn legendre(space: &Space, max_degree: usize) -> Result<Self> {
        if !matches!(space.kind, SpaceKind::Interval { .. }) {
            return Err(Error::Domain("Legendre polynomials live on an interval".into()));
        }
        Self::sample(space, BasisFamily::Legendre { max_degree }, true)
    }

    pub fn fourier(space: &Space, max_freq: usize) -> Result<Self> {
        if space.kind != SpaceKind::Circle {
            return Err(Error::Domain("Fourier modes live on the circle".into()));
        }
        Self::sample(space, BasisFamily::Fourier { max_freq }, true)
    }

    pub fn nodal(space: &Space) -> Result<Self> {
        let n = space.node_count();
        Ok(BasisSet {
            family: BasisFamily::Nodal,
            values: DMatrix::identity(n, n),
            orthonormal: false,
            space_kind: space.kind,
        })
    }

    /// Whether every function can be evaluated away from the quadrature nodes.
    pub fn is_continuous(&self) -> bool {
        !matches!(self.family, BasisFamily::Nodal)
    }

    /// Values of every basis function at `p`.
    pub fn eval(&self, p: &Point) -> Result<Vec<f64>> {
        match (self.family, self.space_kind, p) {
            (BasisFamily::CylinderIndicators { level }, SpaceKind::Shift { symbols, .. }, Point::Word(w)) => {
                check_word_length(w, level)?;
                let mut v = vec![0.0; symbols.pow(level as u32)];
                v[word_to_index(w, symbols, level)] = 1.0;
                Ok(v)
            }
            (BasisFamily::Haar { levels }, SpaceKind::Shift { symbols, .. }, Point::Word(w)) => {
                check_word_length(w, levels)?;
                let mut v = vec![1.0];
                for level in 0..levels {
                    push_wavelets(&mut v, w, symbols, level);
                }
                Ok(v)
            }
            (BasisFamily::HaarLevel { level }, SpaceKind::Shift { symbols, .. }, Point::Word(w)) => {
                check_word_length(w, level + 1)?;
                let mut v = Vec::new();
                push_wavelets(&mut v, w, symbols, level);
                Ok(v)
            }
            (BasisFamily::Legendre { max_degree }, SpaceKind::Interval { a, b }, Point::Coordinate(x)) => {
                let t = (2.0 * x - a - b) / (b - a);
                let mut v = legendre_values(max_degree, t);
                for (n, value) in v.iter_mut().enumerate() {
                    *value *= ((2 * n + 1) as f64 / (b - a)).sqrt();
                }
                Ok(v)
            }
            (BasisFamily::Fourier { max_freq }, SpaceKind::Circle, Point::Angle(theta)) => {
                let mut v = Vec::with_capacity(2 * max_freq + 1);
                v.push(1.0 / (2.0 * PI).sqrt());
                let s = 1.0 / PI.sqrt();
                for k in 1..=max_freq {
                    let (sin, cos) = (k as f64 * theta).sin_cos();
                    v.push(s * cos);
                    v.push(s * sin);
                }
                Ok(v)
            }
            (BasisFamily::Nodal, _, _) => {
                Err(Error::Domain("nodal basis has no values off the quadrature nodes".into()))
            }
            _ => Err(Error::Domain(format!("{} basis cannot be evaluated at this point", self.name()))),
        }
    }

    /// Gram matrix `Σ_p w_p b_i(p) b_j(p)`.
    pub fn gram(&self, space: &Space) -> DMatrix<f64> {
        let weighted =
            DMatrix::from_fn(self.values.nrows(), self.size(), |p, j| space.weights()[p] * self.values[(p, j)]);
        let g = self.values.transpose() * weighted;
        0.5 * (&g + g.transpose())
    }

    /// Coefficients of the constant function 1 in this basis.
    pub fn constant_coefficients(&self, space: &Space) -> Result<Vec<f64>> {
        let n = self.size();
        Ok(match self.family {
            BasisFamily::CylinderIndicators { .. } | BasisFamily::Nodal => vec![1.0; n],
            BasisFamily::Haar { .. } => {
                let mut c = vec![0.0; n];
                c[0] = 1.0;
                c
            }
            BasisFamily::Legendre { .. } => {
                let mut c = vec![0.0; n];
                c[0] = space.total_measure().sqrt();
                c
            }
            BasisFamily::Fourier { .. } => {
                let mut c = vec![0.0; n];
                c[0] = (2.0 * PI).sqrt();
                c
            }
            BasisFamily::HaarLevel { .. } => {
                return Err(Error::Domain("a single wavelet level omits constants".into()))
            }
        })
    }

    /// Frequency carried by basis index `j` of a Fourier basis.
    pub fn fourier_frequency(j: usize) -> usize {
        j.div_ceil(2)
    }
}

fn check_word_length(w: &[u8], needed: usize) -> Result<()> {
    if w.len() < needed {
        return domain_err(format!("word of length {} is shorter than level {needed}", w.len()));
    }
    Ok(())
}

/// Entry `c` of the `k`-th Helmert vector (`k = 1..N-1`), orthogonal to constants.
pub fn helmert(k: usize, c: usize) -> f64 {
    let norm = ((k * (k + 1)) as f64).sqrt();
    match c.cmp(&k) {
        std::cmp::Ordering::Less => 1.0 / norm,
        std::cmp::Ordering::Equal => -(k as f64) / norm,
        std::cmp::Ordering::Greater => 0.0,
    }
}

/// Appends the `N^level (N - 1)` wavelet values of one level at word `w`.
///
/// Wavelets are ordered by cylinder (lexicographic), then by Helmert index.
fn push_wavelets(v: &mut Vec<f64>, w: &[u8], symbols: usize, level: usize) {
    let cylinders = symbols.pow(level as u32);
    let scale = (symbols as f64).powf(0.5 * (level + 1) as f64);
    let home = word_to_index(w, symbols, level);
    let child = w[level] as usize - 1;
    let start = v.len();
    v.resize(start + cylinders * (symbols - 1), 0.0);
    for k in 1..symbols {
        v[start + home * (symbols - 1) + k - 1] = scale * helmert(k, child);
    }
}
