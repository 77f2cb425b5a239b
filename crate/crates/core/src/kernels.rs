//! Compactly supported kernels on [-1, 1] and their one-sided moment
//! matrices.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::RkdError;
use crate::linalg::Lu;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Uniform,
    #[default]
    Triangular,
    Epanechnikov,
}

/// A kernel supported on [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KernelSpec {
    pub kind: KernelKind,
}

impl KernelSpec {
    pub const UNIFORM: Self = Self::new(KernelKind::Uniform);
    pub const TRIANGULAR: Self = Self::new(KernelKind::Triangular);
    pub const EPANECHNIKOV: Self = Self::new(KernelKind::Epanechnikov);
    pub const ALL: [Self; 3] = [Self::UNIFORM, Self::TRIANGULAR, Self::EPANECHNIKOV];

    pub const fn new(kind: KernelKind) -> Self {
        Self { kind }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            KernelKind::Uniform => "uniform",
            KernelKind::Triangular => "triangular",
            KernelKind::Epanechnikov => "epanechnikov",
        }
    }

    /// K(u); zero outside [-1, 1].
    #[inline]
    pub fn eval<T: Real>(&self, u: T) -> T {
        let a = u.abs();
        if a > T::one() {
            return T::zero();
        }
        match self.kind {
            KernelKind::Uniform => T::lit(0.5),
            KernelKind::Triangular => T::one() - a,
            KernelKind::Epanechnikov => T::lit(0.75) * (T::one() - u * u),
        }
    }

    /// ∫₀¹ u^k K(u) du.
    fn half_moment(&self, k: u32) -> f64 {
        let k = f64::from(k);
        match self.kind {
            KernelKind::Uniform => 0.5 / (k + 1.0),
            KernelKind::Triangular => 1.0 / (k + 1.0) - 1.0 / (k + 2.0),
            KernelKind::Epanechnikov => 0.75 * (1.0 / (k + 1.0) - 1.0 / (k + 3.0)),
        }
    }

    /// ∫₀¹ u^k K(u)² du.
    fn half_moment_sq(&self, k: u32) -> f64 {
        let k = f64::from(k);
        match self.kind {
            KernelKind::Uniform => 0.25 / (k + 1.0),
            KernelKind::Triangular => 1.0 / (k + 1.0) - 2.0 / (k + 2.0) + 1.0 / (k + 3.0),
            KernelKind::Epanechnikov => {
                0.5625 * (1.0 / (k + 1.0) - 2.0 / (k + 3.0) + 1.0 / (k + 5.0))
            }
        }
    }
}

/// Shorthand for [`KernelSpec::eval`].
pub fn eval_kernel<T: Real>(spec: KernelSpec, u: T) -> T {
    spec.eval(u)
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelSpec {
    type Err = RkdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" | "rectangular" => Ok(Self::UNIFORM),
            "triangular" | "triangle" => Ok(Self::TRIANGULAR),
            "epanechnikov" | "epa" => Ok(Self::EPANECHNIKOV),
            other => Err(RkdError::InvalidArgument(format!("unknown kernel '{other}'"))),
        }
    }
}

/// One-sided kernel moment matrices with r(u) = (1, u, u²)' and
/// r₁(u) = (1, u)':
///
/// * `gamma` = ∫ r r' K, the local quadratic Gram limit (3x3)
/// * `gamma1` = ∫ r₁ r₁' K, the local linear Gram limit (2x2)
/// * `psi1` = ∫ r₁ r₁' K², the local linear variance kernel (2x2)
/// * `lambda` = ∫ u² r₁ K, the local linear bias moment
///
/// Integrals run over (0, 1] for the `_plus` fields and [-1, 0) for `_minus`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMoments<T> {
    pub gamma_plus: [[T; 3]; 3],
    pub gamma_minus: [[T; 3]; 3],
    pub gamma1_plus: [[T; 2]; 2],
    pub gamma1_minus: [[T; 2]; 2],
    pub psi1_plus: [[T; 2]; 2],
    pub psi1_minus: [[T; 2]; 2],
    pub lambda_plus: [T; 2],
    pub lambda_minus: [T; 2],
}

fn sign(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Closed-form moment matrices. All shipped kernels are piecewise
/// polynomials, so every entry is exact.
pub fn moment_matrices<T: Real>(spec: KernelSpec) -> KernelMoments<T> {
    let m = |k: usize| spec.half_moment(k as u32);
    let m2 = |k: usize| spec.half_moment_sq(k as u32);
    build_moments(m, m2)
}

/// Moment matrices by composite Gauss-Legendre quadrature, 64 nodes on each
/// half of the support. Independent of the closed forms in
/// [`moment_matrices`].
pub fn moment_matrices_quadrature<T: Real>(spec: KernelSpec) -> KernelMoments<T> {
    let (nodes, weights) = gauss_legendre(64);
    // map [-1, 1] -> [0, 1]
    let integrate = |f: &dyn Fn(f64) -> f64| -> f64 {
        nodes
            .iter()
            .zip(&weights)
            .map(|(&t, &w)| 0.5 * w * f(0.5 * (t + 1.0)))
            .sum()
    };
    let integrate_minus = |f: &dyn Fn(f64) -> f64| -> f64 {
        nodes
            .iter()
            .zip(&weights)
            .map(|(&t, &w)| 0.5 * w * f(0.5 * (t - 1.0)))
            .sum()
    };
    let k = |u: f64| spec.eval(u);
    let lit = T::lit;

    let mut out = KernelMoments {
        gamma_plus: [[T::zero(); 3]; 3],
        gamma_minus: [[T::zero(); 3]; 3],
        gamma1_plus: [[T::zero(); 2]; 2],
        gamma1_minus: [[T::zero(); 2]; 2],
        psi1_plus: [[T::zero(); 2]; 2],
        psi1_minus: [[T::zero(); 2]; 2],
        lambda_plus: [T::zero(); 2],
        lambda_minus: [T::zero(); 2],
    };
    for i in 0..3 {
        for j in 0..3 {
            let p = (i + j) as i32;
            out.gamma_plus[i][j] = lit(integrate(&|u| u.powi(p) * k(u)));
            out.gamma_minus[i][j] = lit(integrate_minus(&|u| u.powi(p) * k(u)));
            if i < 2 && j < 2 {
                out.gamma1_plus[i][j] = out.gamma_plus[i][j];
                out.gamma1_minus[i][j] = out.gamma_minus[i][j];
                out.psi1_plus[i][j] = lit(integrate(&|u| u.powi(p) * k(u) * k(u)));
                out.psi1_minus[i][j] = lit(integrate_minus(&|u| u.powi(p) * k(u) * k(u)));
            }
        }
    }
    for i in 0..2 {
        let p = (i + 2) as i32;
        out.lambda_plus[i] = lit(integrate(&|u| u.powi(p) * k(u)));
        out.lambda_minus[i] = lit(integrate_minus(&|u| u.powi(p) * k(u)));
    }
    out
}

fn build_moments<T: Real>(m: impl Fn(usize) -> f64, m2: impl Fn(usize) -> f64) -> KernelMoments<T> {
    let lit = T::lit;
    let mut gp = [[T::zero(); 3]; 3];
    let mut gm = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            gp[i][j] = lit(m(i + j));
            gm[i][j] = lit(sign(i + j) * m(i + j));
        }
    }
    let mut g1p = [[T::zero(); 2]; 2];
    let mut g1m = [[T::zero(); 2]; 2];
    let mut pp = [[T::zero(); 2]; 2];
    let mut pm = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            g1p[i][j] = gp[i][j];
            g1m[i][j] = gm[i][j];
            pp[i][j] = lit(m2(i + j));
            pm[i][j] = lit(sign(i + j) * m2(i + j));
        }
    }
    KernelMoments {
        gamma_plus: gp,
        gamma_minus: gm,
        gamma1_plus: g1p,
        gamma1_minus: g1m,
        psi1_plus: pp,
        psi1_minus: pm,
        lambda_plus: [lit(m(2)), lit(m(3))],
        lambda_minus: [lit(m(2)), lit(-m(3))],
    }
}

impl<T: Real> KernelMoments<T> {
    /// e₁'(Γ±)⁻¹, the slope row of the inverse local quadratic Gram limit.
    pub fn slope_row(&self, plus: bool) -> [T; 3] {
        let g = if plus { &self.gamma_plus } else { &self.gamma_minus };
        let rows: Vec<Vec<T>> = g.iter().map(|r| r.to_vec()).collect();
        let inv = Lu::factor(&rows)
            .expect("kernel Gram matrix is positive definite")
            .inverse();
        [inv[1][0], inv[1][1], inv[1][2]]
    }

    /// e₁'(Γ₁±)⁻¹Λ±: slope component of the local linear bias vector.
    pub fn linear_bias_slope(&self, plus: bool) -> T {
        let (g, l) = if plus {
            (&self.gamma1_plus, &self.lambda_plus)
        } else {
            (&self.gamma1_minus, &self.lambda_minus)
        };
        let inv = inv2(g);
        inv[1][0] * l[0] + inv[1][1] * l[1]
    }

    /// e₁'(Γ₁±)⁻¹Ψ₁±(Γ₁±)⁻¹e₁: local linear slope variance constant.
    pub fn linear_variance_slope(&self, plus: bool) -> T {
        let (g, p) = if plus {
            (&self.gamma1_plus, &self.psi1_plus)
        } else {
            (&self.gamma1_minus, &self.psi1_minus)
        };
        let inv = inv2(g);
        let row = [inv[1][0], inv[1][1]];
        let mut acc = T::zero();
        for i in 0..2 {
            for j in 0..2 {
                acc = acc + row[i] * p[i][j] * row[j];
            }
        }
        acc
    }
}

fn inv2<T: Real>(g: &[[T; 2]; 2]) -> [[T; 2]; 2] {
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    [
        [g[1][1] / det, -g[0][1] / det],
        [-g[1][0] / det, g[0][0] / det],
    ]
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
