//! f̂_X(0) and the conditional potential-outcome density at the kink.
//!
//! The conditional density is a Wald ratio whose numerator is the slope kink
//! of a kernel-smoothed outcome indicator (1/b)K((Y − y)/b)𝟙{D = d},
//! fitted by one-sided local quadratics at bandwidth `a`.

use crate::error::{Result, RkdError};
use crate::first_stage::SmootherPair;
use crate::kernels::KernelSpec;
use crate::local_poly::check_bandwidth;
use crate::sample::{Arm, Sample, Side};
use crate::scalar::{mean_sd, Real};
use crate::wald_qte::weak_kink_check;

/// Floor on conditional densities, in units of 1/sd(Y).
pub const DEFAULT_DENSITY_FLOOR: f64 = 0.01;

/// (1/(n c)) Σ K(Xᵢ/c)
pub fn kde_at_zero<T: Real>(x: &[T], c: T, spec: KernelSpec) -> Result<T> {
    check_bandwidth(c)?;
    if x.is_empty() {
        return Err(RkdError::InvalidArgument("kde_at_zero needs at least one observation".into()));
    }
    let s: T = x.iter().map(|&xi| spec.eval(xi / c)).sum();
    Ok(s / (T::from_usize_lossy(x.len()) * c))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityValue<T> {
    pub value: T,
    pub raw: T,
    pub floored: bool,
}

/// Tuning for the conditional density.
#[derive(Debug, Clone, Copy)]
pub struct DensityTuning<T> {
    /// x-bandwidth of the local quadratic slope fits.
    pub a: T,
    /// y-bandwidth of the smoothed indicator.
    pub b: T,
    /// Floor in units of 1/sd(Y).
    pub floor: T,
}

impl<T: Real> DensityTuning<T> {
    /// Floor converted to the original outcome units.
    pub fn floor_in_units(&self, sd_y: T) -> T {
        if sd_y > T::zero() {
            self.floor / sd_y
        } else {
            self.floor
        }
    }
}

/// Default y-bandwidth: 1.06·sd(Y)·n^(−1/5).
pub fn default_outcome_bandwidth<T: Real>(y: &[T]) -> T {
    let (_, sd) = mean_sd(y);
    T::lit(1.06) * sd * T::from_usize_lossy(y.len()).powf(T::lit(-0.2))
}

/// Estimated f_{Y^d|VX}(y | h(0), 0) with a single-point interface.
/// `denominator` is the first-stage slope kink μ̂′₂(0⁺, d) − μ̂′₂(0⁻, d).
pub fn conditional_density<T: Real>(
    sample: &Sample<T>,
    y: T,
    arm: Arm,
    tuning: DensityTuning<T>,
    denominator: T,
    spec: KernelSpec,
    tol_denominator: T,
) -> Result<DensityValue<T>> {
    check_bandwidth(tuning.b)?;
    let pair = SmootherPair::new(&sample.x, tuning.a, spec)?;
    let (_, sd_y) = mean_sd(&sample.y);
    estimate_at(sample, &pair, y, arm, tuning, denominator, spec, tol_denominator, sd_y)
}

#[allow(clippy::too_many_arguments)]
fn estimate_at<T: Real>(
    sample: &Sample<T>,
    pair: &SmootherPair<T>,
    y: T,
    arm: Arm,
    tuning: DensityTuning<T>,
    denominator: T,
    spec: KernelSpec,
    tol_denominator: T,
    sd_y: T,
) -> Result<DensityValue<T>> {
    weak_kink_check(arm, denominator, tol_denominator)?;
    let b = tuning.b;
    let resp = |i: usize| {
        if arm.matches(sample.d[i]) {
            spec.eval((sample.y[i] - y) / b) / b
        } else {
            T::zero()
        }
    };
    let plus = pair.get(Side::Plus).fit_with(resp).slope;
    let minus = pair.get(Side::Minus).fit_with(resp).slope;
    let raw = (plus - minus) / denominator;
    let floor = tuning.floor_in_units(sd_y);
    let floored = !(raw >= floor);
    Ok(DensityValue {
        value: if floored { floor } else { raw },
        raw,
        floored,
    })
}

/// Densities on a y-grid for both arms.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimates<T> {
    pub fx0: T,
    pub y_grid: Vec<T>,
    /// `f_cond[arm][k]`
    pub f_cond: [Vec<T>; 2],
    /// Unfloored estimates.
    pub f_raw: [Vec<T>; 2],
    pub floor_applied: [Vec<bool>; 2],
    pub floor: T,
}

impl<T: Real> DensityEstimates<T> {
    pub fn get(&self, arm: Arm, k: usize) -> T {
        self.f_cond[arm.index()][k]
    }

    pub fn floored(&self, arm: Arm, k: usize) -> bool {
        self.floor_applied[arm.index()][k]
    }

    /// Evaluate on the full grid, reusing one smoother pair at bandwidth `a`.
    /// `denominators[d]` is the first-stage slope kink of arm d.
    pub fn estimate(
        sample: &Sample<T>,
        y_grid: &[T],
        fx0: T,
        tuning: DensityTuning<T>,
        denominators: [T; 2],
        spec: KernelSpec,
        tol_denominator: T,
    ) -> Result<Self> {
        check_bandwidth(tuning.b)?;
        if !(fx0 > T::zero()) {
            return Err(RkdError::InvalidArgument("f_X(0) estimate must be positive".into()));
        }
        let pair = SmootherPair::new(&sample.x, tuning.a, spec)?;
        let (_, sd_y) = mean_sd(&sample.y);
        let mut f_cond = [Vec::new(), Vec::new()];
        let mut f_raw = [Vec::new(), Vec::new()];
        let mut floor_applied = [Vec::new(), Vec::new()];
        for arm in Arm::BOTH {
            for &y in y_grid {
                let v = estimate_at(
                    sample,
                    &pair,
                    y,
                    arm,
                    tuning,
                    denominators[arm.index()],
                    spec,
                    tol_denominator,
                    sd_y,
                )?;
                f_cond[arm.index()].push(v.value);
                f_raw[arm.index()].push(v.raw);
                floor_applied[arm.index()].push(v.floored);
            }
        }
        Ok(Self {
            fx0,
            y_grid: y_grid.to_vec(),
            f_cond,
            f_raw,
            floor_applied,
            floor: tuning.floor_in_units(sd_y),
        })
    }
}
