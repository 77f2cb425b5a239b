//! Local Wald ratios of slope kinks as potential-outcome CDFs, monotone
//! rearrangement, and the quantile treatment effect process.

use serde::Serialize;

use crate::error::{Result, RkdError};
use crate::first_stage::{fit_first_stage, FirstStageModel};
use crate::kernels::KernelSpec;
use crate::sample::{Arm, Sample};
use crate::scalar::{quantile_sorted, sort_total, Real};

pub const DEFAULT_TOL_DENOMINATOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfProcess<T> {
    pub arm: Arm,
    pub y_grid: Vec<T>,
    /// Raw Wald ratios; may be non-monotone and leave [0, 1].
    pub values_raw: Vec<T>,
    /// Clipped to [0, 1], then rearranged.
    pub values: Vec<T>,
    pub numerator_slopes: Vec<T>,
    pub denominator_slope_diff: T,
}

/// Monotone rearrangement on a finite grid: the sorted values.
pub fn rearrange<T: Real>(values: &[T]) -> Vec<T> {
    let mut out = values.to_vec();
    sort_total(&mut out);
    out
}

pub(crate) fn weak_kink_check<T: Real>(arm: Arm, denom: T, tol: T) -> Result<()> {
    if denom.abs() < tol || !denom.is_finite() {
        Err(RkdError::WeakKink {
            arm: arm as u8,
            slope_diff: denom.as_f64(),
            tol: tol.as_f64(),
        })
    } else {
        Ok(())
    }
}

impl<T: Real> CdfProcess<T> {
    /// Wald CDF from the slope kinks stored in a first-stage model.
    pub fn from_first_stage(model: &FirstStageModel<T>, arm: Arm, tol_denominator: T) -> Result<Self> {
        let denom = model.mu2_slope_diff(arm);
        weak_kink_check(arm, denom, tol_denominator)?;
        let numerator_slopes: Vec<T> = (0..model.y_grid.len())
            .map(|k| model.mu1_slope_diff(k, arm))
            .collect();
        let values_raw: Vec<T> = numerator_slopes.iter().map(|&n| n / denom).collect();
        let clipped: Vec<T> = values_raw
            .iter()
            .map(|&v| v.max(T::zero()).min(T::one()))
            .collect();
        Ok(Self {
            arm,
            y_grid: model.y_grid.clone(),
            values: rearrange(&clipped),
            values_raw,
            numerator_slopes,
            denominator_slope_diff: denom,
        })
    }
}

/// Local Wald estimate of F_{Y^d|VX}(·|h(0), 0) on `y_grid`.
pub fn wald_cdf<T: Real>(
    sample: &Sample<T>,
    y_grid: &[T],
    arm: Arm,
    h: T,
    spec: KernelSpec,
    tol_denominator: T,
) -> Result<CdfProcess<T>> {
    if y_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(RkdError::InvalidArgument("y-grid must be strictly increasing".into()));
    }
    let model = fit_first_stage(sample, y_grid, h, spec)?;
    CdfProcess::from_first_stage(&model, arm, tol_denominator)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridQuantile<T> {
    pub value: T,
    pub index: usize,
    /// No grid point reached θ; `value` is the last grid point.
    pub grid_too_narrow: bool,
}

/// Left-continuous inverse: the smallest grid point with F(y) ≥ θ.
pub fn quantile_invert<T: Real>(cdf: &CdfProcess<T>, theta: T) -> GridQuantile<T> {
    invert_values(&cdf.y_grid, &cdf.values, theta)
}

fn invert_values<T: Real>(grid: &[T], values: &[T], theta: T) -> GridQuantile<T> {
    // values are nondecreasing, so the first hit is a partition point
    let idx = values.partition_point(|&v| v < theta);
    if idx < values.len() {
        GridQuantile {
            value: grid[idx],
            index: idx,
            grid_too_narrow: false,
        }
    } else {
        let last = grid.len() - 1;
        GridQuantile {
            value: grid[last],
            index: last,
            grid_too_narrow: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QteProcess<T> {
    pub theta_grid: Vec<T>,
    pub tau: Vec<T>,
    pub q1: Vec<T>,
    pub q0: Vec<T>,
    /// Grid positions of q1, q0 on the shared y-grid.
    #[serde(skip)]
    pub q1_index: Vec<usize>,
    #[serde(skip)]
    pub q0_index: Vec<usize>,
    /// θ values where inversion ran off the grid, per arm.
    #[serde(skip)]
    pub grid_too_narrow: Vec<(Arm, T)>,
}

/// τ̂(θ) = Q̂₁(θ) − Q̂₀(θ) on the θ-grid.
pub fn qte_process<T: Real>(
    cdf1: &CdfProcess<T>,
    cdf0: &CdfProcess<T>,
    theta_grid: &[T],
) -> Result<QteProcess<T>> {
    if cdf1.y_grid != cdf0.y_grid {
        return Err(RkdError::InvalidArgument(
            "both CDFs must share the same y-grid".into(),
        ));
    }
    let mut out = QteProcess {
        theta_grid: theta_grid.to_vec(),
        tau: Vec::with_capacity(theta_grid.len()),
        q1: Vec::with_capacity(theta_grid.len()),
        q0: Vec::with_capacity(theta_grid.len()),
        q1_index: Vec::with_capacity(theta_grid.len()),
        q0_index: Vec::with_capacity(theta_grid.len()),
        grid_too_narrow: Vec::new(),
    };
    for &theta in theta_grid {
        let a = quantile_invert(cdf1, theta);
        let b = quantile_invert(cdf0, theta);
        if a.grid_too_narrow {
            out.grid_too_narrow.push((Arm::Treated, theta));
        }
        if b.grid_too_narrow {
            out.grid_too_narrow.push((Arm::Untreated, theta));
        }
        out.q1.push(a.value);
        out.q0.push(b.value);
        out.q1_index.push(a.index);
        out.q0_index.push(b.index);
        out.tau.push(a.value - b.value);
    }
    Ok(out)
}

/// `size` equally spaced points on [a, 1 − a].
pub fn theta_grid<T: Real>(a: T, size: usize) -> Vec<T> {
    linspace(a, T::one() - a, size)
}

pub(crate) fn linspace<T: Real>(lo: T, hi: T, size: usize) -> Vec<T> {
    if size == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / T::from_usize_lossy(size - 1);
    (0..size)
        .map(|i| {
            if i + 1 == size {
                hi
            } else {
                lo + step * T::from_usize_lossy(i)
            }
        })
        .collect()
}

/// Default outcome grid: `size` points spanning the empirical p and 1 − p
/// quantiles of Y among observations with |X/h| ≤ 1, widened on both ends by
/// `pad` times that range.
pub fn default_y_grid<T: Real>(
    sample: &Sample<T>,
    h: T,
    size: usize,
    p: T,
    pad: T,
) -> Result<Vec<T>> {
    let mut ys: Vec<T> = sample
        .y
        .iter()
        .zip(&sample.x)
        .filter(|(_, &x)| (x / h).abs() <= T::one())
        .map(|(&y, _)| y)
        .collect();
    if ys.len() < 2 {
        return Err(RkdError::EmptyWindow("either"));
    }
    sort_total(&mut ys);
    let lo = quantile_sorted(&ys, p);
    let hi = quantile_sorted(&ys, T::one() - p);
    let range = hi - lo;
    if !(range > T::zero()) {
        return Err(RkdError::InvalidArgument(
            "outcome has no spread inside the bandwidth window".into(),
        ));
    }
    Ok(linspace(lo - pad * range, hi + pad * range, size))
}
