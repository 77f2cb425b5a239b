//! First-stage local quadratic models μ̃₁(x, y, d) and μ̃₂(x, d), their
//! check-bandwidth variants, and the residual variance estimator.

use crate::error::{Result, RkdError};
use crate::kernels::KernelSpec;
use crate::local_poly::{check_bandwidth, OneSidedFit, OneSidedSmoother};
use crate::sample::{Arm, Sample, Side};
use crate::scalar::Real;
use crate::wald_qte::rearrange;

fn side_idx(side: Side) -> usize {
    match side {
        Side::Plus => 0,
        Side::Minus => 1,
    }
}

/// The two one-sided smoothers at a common bandwidth.
#[derive(Debug, Clone)]
pub struct SmootherPair<T> {
    pub plus: OneSidedSmoother<T>,
    pub minus: OneSidedSmoother<T>,
}

impl<T: Real> SmootherPair<T> {
    pub fn new(x: &[T], h: T, spec: KernelSpec) -> Result<Self> {
        Ok(Self {
            plus: OneSidedSmoother::new(x, Side::Plus, h, spec)?,
            minus: OneSidedSmoother::new(x, Side::Minus, h, spec)?,
        })
    }

    pub fn get(&self, side: Side) -> &OneSidedSmoother<T> {
        match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
        }
    }
}

/// One-sided quadratic fits of 𝟙{Y ≤ y}𝟙{D = d} on a y-grid and of 𝟙{D = d},
/// for both arms and both sides, at a single bandwidth.
#[derive(Debug, Clone)]
pub struct FirstStageModel<T> {
    pub bandwidth: T,
    pub y_grid: Vec<T>,
    /// `mu1[arm][side][k]` is the fit at `y_grid[k]`; side 0 = plus.
    pub mu1: [[Vec<OneSidedFit<T>>; 2]; 2],
    /// `mu2[arm][side]`
    pub mu2: [[OneSidedFit<T>; 2]; 2],
}

/// Fit every first-stage regression at bandwidth `h`.
pub fn fit_first_stage<T: Real>(
    sample: &Sample<T>,
    y_grid: &[T],
    h: T,
    spec: KernelSpec,
) -> Result<FirstStageModel<T>> {
    let pair = SmootherPair::new(&sample.x, h, spec)?;
    Ok(fit_first_stage_with(sample, y_grid, &pair))
}

pub(crate) fn fit_first_stage_with<T: Real>(
    sample: &Sample<T>,
    y_grid: &[T],
    pair: &SmootherPair<T>,
) -> FirstStageModel<T> {
    let fit_mu1 = |arm: Arm, side: Side| -> Vec<OneSidedFit<T>> {
        let sm = pair.get(side);
        y_grid
            .iter()
            .map(|&y| {
                sm.fit_with(|i| {
                    if arm.matches(sample.d[i]) && sample.y[i] <= y {
                        T::one()
                    } else {
                        T::zero()
                    }
                })
            })
            .collect()
    };
    let fit_mu2 = |arm: Arm, side: Side| -> OneSidedFit<T> {
        pair.get(side).fit_with(|i| {
            if arm.matches(sample.d[i]) {
                T::one()
            } else {
                T::zero()
            }
        })
    };
    let u = Arm::Untreated;
    let t = Arm::Treated;
    FirstStageModel {
        bandwidth: pair.plus.bandwidth,
        y_grid: y_grid.to_vec(),
        mu1: [
            [fit_mu1(u, Side::Plus), fit_mu1(u, Side::Minus)],
            [fit_mu1(t, Side::Plus), fit_mu1(t, Side::Minus)],
        ],
        mu2: [
            [fit_mu2(u, Side::Plus), fit_mu2(u, Side::Minus)],
            [fit_mu2(t, Side::Plus), fit_mu2(t, Side::Minus)],
        ],
    }
}

impl<T: Real> FirstStageModel<T> {
    fn in_window(&self, x: T) -> Option<Side> {
        if (x / self.bandwidth).abs() > T::one() {
            return None;
        }
        Side::BOTH.into_iter().find(|s| s.contains(x))
    }

    pub fn mu1_fit(&self, k: usize, arm: Arm, side: Side) -> &OneSidedFit<T> {
        &self.mu1[arm.index()][side_idx(side)][k]
    }

    pub fn mu2_fit(&self, arm: Arm, side: Side) -> &OneSidedFit<T> {
        &self.mu2[arm.index()][side_idx(side)]
    }

    /// μ̃₁(x, y_k, d)·𝟙{|x/h| ≤ 1}. Zero at x = 0 exactly.
    pub fn eval_mu1(&self, x: T, k: usize, arm: Arm) -> T {
        match self.in_window(x) {
            Some(side) => self.mu1_fit(k, arm, side).eval(x),
            None => T::zero(),
        }
    }

    /// μ̃₂(x, d)·𝟙{|x/h| ≤ 1}, clipped to [0, 1].
    pub fn eval_mu2(&self, x: T, arm: Arm) -> T {
        match self.in_window(x) {
            Some(side) => self.mu2_fit(arm, side).eval(x).max(T::zero()).min(T::one()),
            None => T::zero(),
        }
    }

    /// μ̃₁(x, ·, d) over the whole y-grid after monotone rearrangement.
    pub fn eval_mu1_monotone(&self, x: T, arm: Arm) -> Vec<T> {
        let raw: Vec<T> = (0..self.y_grid.len()).map(|k| self.eval_mu1(x, k, arm)).collect();
        rearrange(&raw)
    }

    /// μ̂′₁(0⁺, y_k, d) − μ̂′₁(0⁻, y_k, d)
    pub fn mu1_slope_diff(&self, k: usize, arm: Arm) -> T {
        self.mu1_fit(k, arm, Side::Plus).slope - self.mu1_fit(k, arm, Side::Minus).slope
    }

    /// μ̂′₂(0⁺, d) − μ̂′₂(0⁻, d)
    pub fn mu2_slope_diff(&self, arm: Arm) -> T {
        self.mu2_fit(arm, Side::Plus).slope - self.mu2_fit(arm, Side::Minus).slope
    }
}

/// Kernel-weighted root mean squared residual of 𝟙{Y ≤ y, D = d} around the
/// check model on one side of the kink, at bandwidth `h0`. `k` indexes the
/// check model's y-grid.
pub fn sigma_hat<T: Real>(
    sample: &Sample<T>,
    check_model: &FirstStageModel<T>,
    k: usize,
    arm: Arm,
    side: Side,
    h0: T,
    spec: KernelSpec,
) -> Result<T> {
    check_bandwidth(h0)?;
    let y = check_model.y_grid[k];
    let mut num = T::zero();
    let mut den = T::zero();
    for i in 0..sample.len() {
        let xi = sample.x[i];
        if !side.contains(xi) {
            continue;
        }
        let w = spec.eval(xi / h0);
        if w <= T::zero() {
            continue;
        }
        let ind = if arm.matches(sample.d[i]) && sample.y[i] <= y {
            T::one()
        } else {
            T::zero()
        };
        let r = ind - check_model.eval_mu1(xi, k, arm);
        num = num + r * r * w;
        den = den + w;
    }
    if den <= T::zero() {
        return Err(RkdError::EmptyWindow(side.name()));
    }
    Ok((num / den).sqrt())
}
