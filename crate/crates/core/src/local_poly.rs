//! One-sided kernel-weighted local polynomial fits at the kink.
//!
//! Coefficients live in the scaled basis r(x/h) = (1, x/h, (x/h)²), so the
//! slope per unit of x is `alpha[1] / h` and the curvature is
//! `2 alpha[2] / h²`.

use crate::error::{Result, RkdError};
use crate::kernels::KernelSpec;
use crate::linalg::{solve_with_condition, Matrix};
use crate::sample::{Arm, Side};
use crate::scalar::Real;

/// Designs with a 1-norm condition number above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degree {
    Linear = 1,
    Quadratic = 2,
}

impl Degree {
    fn dim(self) -> usize {
        self as usize + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneSidedFit<T> {
    pub side: Side,
    pub degree: Degree,
    /// Coefficients in the scaled basis; `alpha_hat[2]` is zero for linear fits.
    pub alpha_hat: [T; 3],
    pub level: T,
    pub slope: T,
    pub curvature: T,
    pub n_effective: usize,
    pub bandwidth: T,
    pub condition: T,
}

impl<T: Real> OneSidedFit<T> {
    fn from_alpha(side: Side, degree: Degree, alpha: [T; 3], h: T, n_eff: usize, cond: T) -> Self {
        Self {
            side,
            degree,
            alpha_hat: alpha,
            level: alpha[0],
            slope: alpha[1] / h,
            curvature: T::lit(2.0) * alpha[2] / (h * h),
            n_effective: n_eff,
            bandwidth: h,
            condition: cond,
        }
    }

    /// Polynomial extrapolation from the kink: level + slope·x + curvature·x²/2.
    pub fn eval(&self, x: T) -> T {
        self.level + self.slope * x + self.curvature * x * x / T::lit(2.0)
    }
}

pub(crate) fn check_bandwidth<T: Real>(h: T) -> Result<()> {
    if h > T::zero() && h.is_finite() {
        Ok(())
    } else {
        Err(RkdError::NonpositiveBandwidth(h.as_f64()))
    }
}

#[inline]
fn basis<T: Real>(u: T) -> [T; 3] {
    [T::one(), u, u * u]
}

/// Minimizer of Σᵢ [respᵢ − r'(xᵢ/h)α]² K(xᵢ/h) δᵢ over α, solved through
/// the weighted normal equations.
pub fn fit_one_sided<T: Real>(
    x: &[T],
    response: &[T],
    side: Side,
    h: T,
    spec: KernelSpec,
    degree: Degree,
) -> Result<OneSidedFit<T>> {
    check_bandwidth(h)?;
    if x.len() != response.len() {
        return Err(RkdError::LengthMismatch {
            expected: x.len(),
            got: response.len(),
        });
    }
    let p = degree.dim();
    let mut gram: Matrix<T> = vec![vec![T::zero(); p]; p];
    let mut rhs = vec![T::zero(); p];
    let mut support: Vec<T> = Vec::new();
    for (&xi, &ri) in x.iter().zip(response) {
        if !side.contains(xi) {
            continue;
        }
        let u = xi / h;
        let k = spec.eval(u);
        if k <= T::zero() {
            continue;
        }
        support.push(xi);
        let b = basis(u);
        for a in 0..p {
            rhs[a] = rhs[a] + b[a] * k * ri;
            for c in 0..p {
                gram[a][c] = gram[a][c] + b[a] * b[c] * k;
            }
        }
    }
    let n_eff = support.len();
    check_support(side, &mut support, p)?;
    let (sol, cond) = solve_with_condition(&gram, &rhs).ok_or_else(|| singular(side, "zero pivot"))?;
    if !(cond.as_f64() < MAX_CONDITION) {
        return Err(singular(side, &format!("condition number {:.3e}", cond.as_f64())));
    }
    let mut alpha = [T::zero(); 3];
    alpha[..p].copy_from_slice(&sol);
    Ok(OneSidedFit::from_alpha(side, degree, alpha, h, n_eff, cond))
}

fn singular(side: Side, reason: &str) -> RkdError {
    RkdError::SingularDesign {
        side: side.name(),
        reason: reason.to_string(),
    }
}

fn check_support<T: Real>(side: Side, support: &mut [T], p: usize) -> Result<()> {
    if support.len() < p {
        return Err(singular(
            side,
            &format!("{} in-window observations, need {p}", support.len()),
        ));
    }
    crate::scalar::sort_total(support);
    let distinct = 1 + support.windows(2).filter(|w| w[1] != w[0]).count();
    if distinct < p {
        return Err(singular(
            side,
            &format!("{distinct} distinct in-window x values, need {p}"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndicatorKind {
    /// 𝟙{Y ≤ y}·𝟙{D = d}
    Joint,
    /// 𝟙{D = d}
    TreatmentOnly,
}

pub fn indicator_response<T: Real>(
    y_obs: &[T],
    d_obs: &[bool],
    y: T,
    arm: Arm,
    kind: IndicatorKind,
) -> Vec<T> {
    y_obs
        .iter()
        .zip(d_obs)
        .map(|(&yi, &di)| {
            let hit = arm.matches(di) && (kind == IndicatorKind::TreatmentOnly || yi <= y);
            if hit {
                T::one()
            } else {
                T::zero()
            }
        })
        .collect()
}

/// (1/b)·K((Yᵢ − y)/b)·𝟙{Dᵢ = d}.
pub fn smoothed_response<T: Real>(
    y_obs: &[T],
    d_obs: &[bool],
    y: T,
    arm: Arm,
    b: T,
    spec: KernelSpec,
) -> Result<Vec<T>> {
    check_bandwidth(b)?;
    Ok(y_obs
        .iter()
        .zip(d_obs)
        .map(|(&yi, &di)| {
            if arm.matches(di) {
                spec.eval((yi - y) / b) / b
            } else {
                T::zero()
            }
        })
        .collect())
}

/// A one-sided local quadratic fit with the design factored once, so that
/// many responses over the same (x, h, kernel) cost one weighted sum each.
///
/// Row `j` of `weights` holds (Σ K r r')⁻¹ r(xᵢ/h) K(xᵢ/h) for the `j`-th
/// in-window observation, so α̂ = Σⱼ weights[j]·resp[index[j]].
#[derive(Debug, Clone)]
pub struct OneSidedSmoother<T> {
    pub side: Side,
    pub bandwidth: T,
    pub index: Vec<usize>,
    pub weights: Vec<[T; 3]>,
    pub condition: T,
}

impl<T: Real> OneSidedSmoother<T> {
    pub fn new(x: &[T], side: Side, h: T, spec: KernelSpec) -> Result<Self> {
        check_bandwidth(h)?;
        let mut index = Vec::new();
        let mut rk: Vec<([T; 3], T)> = Vec::new();
        let mut gram: Matrix<T> = vec![vec![T::zero(); 3]; 3];
        for (i, &xi) in x.iter().enumerate() {
            if !side.contains(xi) {
                continue;
            }
            let u = xi / h;
            let k = spec.eval(u);
            if k <= T::zero() {
                continue;
            }
            let b = basis(u);
            for a in 0..3 {
                for c in 0..3 {
                    gram[a][c] = gram[a][c] + b[a] * b[c] * k;
                }
            }
            index.push(i);
            rk.push((b, k));
        }
        let mut support: Vec<T> = index.iter().map(|&i| x[i]).collect();
        check_support(side, &mut support, 3)?;
        let lu = crate::linalg::Lu::factor(&gram).ok_or_else(|| singular(side, "zero pivot"))?;
        let inv = lu.inverse();
        let cond = crate::linalg::norm1(&gram) * crate::linalg::norm1(&inv);
        if !(cond.as_f64() < MAX_CONDITION) {
            return Err(singular(side, &format!("condition number {:.3e}", cond.as_f64())));
        }
        let weights = rk
            .iter()
            .map(|(b, k)| {
                let mut w = [T::zero(); 3];
                for (a, wa) in w.iter_mut().enumerate() {
                    *wa = (inv[a][0] * b[0] + inv[a][1] * b[1] + inv[a][2] * b[2]) * *k;
                }
                w
            })
            .collect();
        Ok(Self {
            side,
            bandwidth: h,
            index,
            weights,
            condition: cond,
        })
    }

    pub fn n_effective(&self) -> usize {
        self.index.len()
    }

    /// Fit a response given as a function of the observation index.
    pub fn fit_with(&self, mut response: impl FnMut(usize) -> T) -> OneSidedFit<T> {
        let mut alpha = [T::zero(); 3];
        for (&i, w) in self.index.iter().zip(&self.weights) {
            let r = response(i);
            if r != T::zero() {
                for a in 0..3 {
                    alpha[a] = alpha[a] + w[a] * r;
                }
            }
        }
        OneSidedFit::from_alpha(
            self.side,
            Degree::Quadratic,
            alpha,
            self.bandwidth,
            self.index.len(),
            self.condition,
        )
    }

    pub fn fit(&self, response: &[T]) -> OneSidedFit<T> {
        self.fit_with(|i| response[i])
    }
}
