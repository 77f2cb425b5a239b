//! Bandwidth selection: Silverman's rule for f̂_X(0), a pilot bandwidth h₀
//! at the n^(−1/5) rate, and the main undersmoothed bandwidth h at the
//! n^(−1/4) rate.

use serde::Serialize;

use crate::diagnostics::Warning;
use crate::error::{Result, RkdError};
use crate::first_stage::{fit_first_stage, sigma_hat};
use crate::kernels::{moment_matrices, KernelMoments, KernelSpec};
use crate::linalg::Lu;
use crate::sample::{Arm, Sample, Side};
use crate::scalar::{mean_sd, median, Real};
use crate::density::kde_at_zero;

/// 1.06·σ̂_X·n^(−1/5)
pub fn silverman<T: Real>(x: &[T]) -> Result<T> {
    if x.len() < 2 {
        return Err(RkdError::DegenerateX);
    }
    let (_, sd) = mean_sd(x);
    if !(sd > T::zero()) {
        return Err(RkdError::DegenerateX);
    }
    Ok(T::lit(1.06) * sd * T::from_usize_lossy(x.len()).powf(T::lit(-0.2)))
}

/// ((3/2)·C′/C²)^(1/5)·n^(−rate)
pub fn bandwidth_from_constants<T: Real>(c: T, c_prime: T, n: usize, rate: T) -> T {
    (T::lit(1.5) * c_prime / (c * c)).powf(T::lit(0.2)) * T::from_usize_lossy(n).powf(-rate)
}

/// Inputs to the pilot rule: curvature and variance of μ₁ on each side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PreliminaryEstimates<T> {
    pub curvature_plus: T,
    pub curvature_minus: T,
    pub sigma2_plus: T,
    pub sigma2_minus: T,
    /// Outcome level y at which the curvature was evaluated (median of Y).
    pub eval_y: T,
}

impl<T: Copy> PreliminaryEstimates<T> {
    pub fn map<U>(&self, f: impl Fn(T) -> U) -> PreliminaryEstimates<U> {
        PreliminaryEstimates {
            curvature_plus: f(self.curvature_plus),
            curvature_minus: f(self.curvature_minus),
            sigma2_plus: f(self.sigma2_plus),
            sigma2_minus: f(self.sigma2_minus),
            eval_y: f(self.eval_y),
        }
    }
}

/// Global cubic per side of 𝟙{Y ≤ med(Y)}·𝟙{D = 1}; curvature at 0 is twice
/// the quadratic coefficient. Variances are set to the Bernoulli maximum 1/4.
pub fn preliminary_estimates<T: Real>(sample: &Sample<T>) -> Result<PreliminaryEstimates<T>> {
    let m = median(&sample.y).ok_or(RkdError::EmptyFile)?;
    let (_, sd) = mean_sd(&sample.x);
    if !(sd > T::zero()) {
        return Err(RkdError::DegenerateX);
    }
    let curv = |side: Side| -> Result<T> {
        let mut gram = vec![vec![T::zero(); 4]; 4];
        let mut rhs = vec![T::zero(); 4];
        let mut support = Vec::new();
        for i in 0..sample.len() {
            let x = sample.x[i];
            if !side.contains(x) {
                continue;
            }
            let u = x / sd;
            let b = [T::one(), u, u * u, u * u * u];
            let r = if sample.d[i] && sample.y[i] <= m { T::one() } else { T::zero() };
            for a in 0..4 {
                rhs[a] = rhs[a] + b[a] * r;
                for c in 0..4 {
                    gram[a][c] = gram[a][c] + b[a] * b[c];
                }
            }
            support.push(x);
        }
        crate::scalar::sort_total(&mut support);
        support.dedup();
        if support.len() < 4 {
            return Err(RkdError::SingularDesign {
                side: side.name(),
                reason: "fewer than 4 distinct x values for the preliminary cubic".into(),
            });
        }
        let lu = Lu::factor(&gram).ok_or_else(|| RkdError::SingularDesign {
            side: side.name(),
            reason: "preliminary cubic design is singular".into(),
        })?;
        let coef = lu.solve(&rhs);
        Ok(T::lit(2.0) * coef[2] / (sd * sd))
    };
    let quarter = T::lit(0.25);
    Ok(PreliminaryEstimates {
        curvature_plus: curv(Side::Plus)?,
        curvature_minus: curv(Side::Minus)?,
        sigma2_plus: quarter,
        sigma2_minus: quarter,
        eval_y: m,
    })
}

/// Leading local linear bias constant of a slope kink:
/// e₁′[(Γ₁⁺)⁻¹Λ⁺/2·m₊ − (Γ₁⁻)⁻¹Λ⁻/2·m₋].
pub fn bias_constant<T: Real>(k: &KernelMoments<T>, curv_plus: T, curv_minus: T) -> T {
    let half = T::lit(0.5);
    k.linear_bias_slope(true) * half * curv_plus - k.linear_bias_slope(false) * half * curv_minus
}

/// Leading variance constant of a slope kink:
/// e₁′[s₊(Γ₁⁺)⁻¹Ψ₁⁺(Γ₁⁺)⁻¹ + s₋(Γ₁⁻)⁻¹Ψ₁⁻(Γ₁⁻)⁻¹]e₁ / f̂_X(0).
pub fn variance_constant<T: Real>(k: &KernelMoments<T>, var_plus: T, var_minus: T, fx0: T) -> T {
    (var_plus * k.linear_variance_slope(true) + var_minus * k.linear_variance_slope(false)) / fx0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PilotBandwidth<T> {
    pub h0: T,
    pub c0: T,
    pub c0_prime: T,
    pub fallback: bool,
}

impl<T: Copy> PilotBandwidth<T> {
    pub fn map<U>(&self, f: impl Fn(T) -> U) -> PilotBandwidth<U> {
        PilotBandwidth {
            h0: f(self.h0),
            c0: f(self.c0),
            c0_prime: f(self.c0_prime),
            fallback: self.fallback,
        }
    }
}

/// Pilot bandwidth h₀ = ((3/2)·C₀′/C₀²)^(1/5)·n^(−1/5).
pub fn pilot_bandwidth<T: Real>(
    sample: &Sample<T>,
    spec: KernelSpec,
    prelim: &PreliminaryEstimates<T>,
    fx0: T,
) -> Result<PilotBandwidth<T>> {
    let k = moment_matrices::<T>(spec);
    let c0 = bias_constant(&k, prelim.curvature_plus, prelim.curvature_minus);
    let c0p = variance_constant(&k, prelim.sigma2_plus, prelim.sigma2_minus, fx0);
    if !(c0p > T::zero()) || !c0p.is_finite() {
        return Err(RkdError::ZeroVariance("pilot"));
    }
    if c0 == T::zero() || !c0.is_finite() {
        let h0 = silverman(&sample.x)?;
        log::warn!("pilot bias constant is zero; falling back to Silverman bandwidth {h0}");
        return Ok(PilotBandwidth {
            h0,
            c0,
            c0_prime: c0p,
            fallback: true,
        });
    }
    Ok(PilotBandwidth {
        h0: bandwidth_from_constants(c0, c0p, sample.len(), T::lit(0.2)),
        c0,
        c0_prime: c0p,
        fallback: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MainBandwidth<T> {
    pub h: T,
    /// C₁(med(Y|D=d), d), indexed by arm.
    pub c1: [T; 2],
    pub c1_prime: [T; 2],
    pub medians: [T; 2],
    /// σ̂(med(Y|D=d), d | 0±), `[arm][plus, minus]`.
    pub sigma: [[T; 2]; 2],
    /// μ̌″₁(0±, med(Y|D=d), d), `[arm][plus, minus]`.
    pub curvature: [[T; 2]; 2],
    pub fallback: bool,
}

impl<T: Copy> MainBandwidth<T> {
    pub fn map<U>(&self, f: impl Fn(T) -> U) -> MainBandwidth<U> {
        let pair = |a: [T; 2]| [f(a[0]), f(a[1])];
        MainBandwidth {
            h: f(self.h),
            c1: pair(self.c1),
            c1_prime: pair(self.c1_prime),
            medians: pair(self.medians),
            sigma: [pair(self.sigma[0]), pair(self.sigma[1])],
            curvature: [pair(self.curvature[0]), pair(self.curvature[1])],
            fallback: self.fallback,
        }
    }
}

/// h from per-arm constants: the ratio pools C₁′ and C₁ across arms before
/// squaring.
pub fn main_bandwidth_from_constants<T: Real>(c1: [T; 2], c1_prime: [T; 2], n: usize) -> Option<T> {
    let denom = c1[0] + c1[1];
    if denom == T::zero() || !denom.is_finite() {
        return None;
    }
    let ratio = (c1_prime[0] + c1_prime[1]) / (denom * denom);
    Some((T::lit(1.5) * ratio).powf(T::lit(0.2)) * T::from_usize_lossy(n).powf(T::lit(-0.25)))
}

/// Main bandwidth from check fits at the pilot bandwidth, evaluated at the
/// arm-specific outcome medians.
pub fn main_bandwidth<T: Real>(
    sample: &Sample<T>,
    spec: KernelSpec,
    h0: T,
    fx0: T,
) -> Result<MainBandwidth<T>> {
    let medians = [
        median(&sample.outcomes(Arm::Untreated)).ok_or_else(|| empty_arm(Arm::Untreated))?,
        median(&sample.outcomes(Arm::Treated)).ok_or_else(|| empty_arm(Arm::Treated))?,
    ];
    let check = fit_first_stage(sample, &medians, h0, spec)?;
    let k = moment_matrices::<T>(spec);
    let mut c1 = [T::zero(); 2];
    let mut c1p = [T::zero(); 2];
    let mut sigma = [[T::zero(); 2]; 2];
    let mut curvature = [[T::zero(); 2]; 2];
    for arm in Arm::BOTH {
        let a = arm.index();
        let cp = check.mu1_fit(a, arm, Side::Plus).curvature;
        let cm = check.mu1_fit(a, arm, Side::Minus).curvature;
        let sp = sigma_hat(sample, &check, a, arm, Side::Plus, h0, spec)?;
        let sm = sigma_hat(sample, &check, a, arm, Side::Minus, h0, spec)?;
        c1[a] = bias_constant(&k, cp, cm);
        c1p[a] = variance_constant(&k, sp * sp, sm * sm, fx0);
        sigma[a] = [sp, sm];
        curvature[a] = [cp, cm];
    }
    if !(c1p[0] + c1p[1] > T::zero()) {
        return Err(RkdError::ZeroVariance("main"));
    }
    let n = sample.len();
    let (h, fallback) = match main_bandwidth_from_constants(c1, c1p, n) {
        Some(h) => (h, false),
        None => {
            let nf = T::from_usize_lossy(n);
            let h = h0 * nf.powf(T::lit(-0.25 + 0.2));
            log::warn!("main bias constant is zero; falling back to rate-adjusted pilot {h}");
            (h, true)
        }
    };
    Ok(MainBandwidth {
        h,
        c1,
        c1_prime: c1p,
        medians,
        sigma,
        curvature,
        fallback,
    })
}

fn empty_arm(arm: Arm) -> RkdError {
    RkdError::InvalidArgument(format!("no observations with treatment = {arm}"))
}

/// User-supplied bandwidths; any that are set bypass their selector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthOverrides {
    pub c: Option<f64>,
    pub h0: Option<f64>,
    pub h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthSet<T> {
    pub c_n: T,
    pub h0_n: T,
    pub h_n: T,
    pub fx0: T,
    pub preliminary: Option<PreliminaryEstimates<T>>,
    pub pilot: Option<PilotBandwidth<T>>,
    pub main: Option<MainBandwidth<T>>,
}

/// Run the full selector chain, honoring overrides.
pub fn select_bandwidths<T: Real>(
    sample: &Sample<T>,
    spec: KernelSpec,
    overrides: &BandwidthOverrides,
    warnings: &mut Vec<Warning>,
) -> Result<BandwidthSet<T>> {
    let positive = |v: f64| -> Result<T> {
        if v > 0.0 && v.is_finite() {
            Ok(T::lit(v))
        } else {
            Err(RkdError::NonpositiveBandwidth(v))
        }
    };
    let c_n = match overrides.c {
        Some(c) => positive(c)?,
        None => silverman(&sample.x)?,
    };
    let fx0 = kde_at_zero(&sample.x, c_n, spec)?;
    if !(fx0 > T::zero()) {
        return Err(RkdError::EmptyWindow("either"));
    }
    let (h0_n, preliminary, pilot) = match overrides.h0 {
        Some(h0) => (positive(h0)?, None, None),
        None => {
            let prelim = preliminary_estimates(sample)?;
            let pilot = pilot_bandwidth(sample, spec, &prelim, fx0)?;
            if pilot.fallback {
                warnings.push(Warning::PilotFallback { c0: pilot.c0.as_f64() });
            }
            (pilot.h0, Some(prelim), Some(pilot))
        }
    };
    let (h_n, main) = match overrides.h {
        Some(h) => (positive(h)?, None),
        None => {
            let main = main_bandwidth(sample, spec, h0_n, fx0)?;
            if main.fallback {
                warnings.push(Warning::MainFallback {
                    c1_sum: (main.c1[0] + main.c1[1]).as_f64(),
                });
            }
            (main.h, Some(main))
        }
    };
    Ok(BandwidthSet {
        c_n,
        h0_n,
        h_n,
        fx0,
        preliminary,
        pilot,
        main,
    })
}
