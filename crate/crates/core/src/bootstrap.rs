//! Multiplier bootstrap for the QTE process.
//!
//! The estimated multiplier processes ν̂±(y, d, k) are linear in the
//! multipliers ξ, and so are Ẑ and Ξ̂ once the estimated ingredients are
//! fixed. [`XiOperator`] folds the whole chain into one matrix so each draw
//! is a single matrix-vector product; [`emp_draw`] / [`xi_process`] compute
//! the same quantities step by step.

use rayon::prelude::*;
use serde::Serialize;

use crate::density::DensityEstimates;
use crate::error::{Result, RkdError};
use crate::first_stage::FirstStageModel;
use crate::kernels::{moment_matrices, KernelSpec};
use crate::rng::{domain, standard_normals, substream};
use crate::sample::{Arm, Sample, Side};
use crate::scalar::Real;
use crate::wald_qte::{CdfProcess, QteProcess};

/// Per-observation EMP weights e₁′(Γ±)⁻¹r(Xᵢ/h)K(Xᵢ/h)/(√(nh)·f̂_X(0)) for the
/// in-window observations of each side.
#[derive(Debug, Clone)]
struct EmpWeights<T> {
    plus: Vec<(usize, T)>,
    minus: Vec<(usize, T)>,
}

impl<T: Real> EmpWeights<T> {
    fn new(x: &[T], h: T, fx0: T, spec: KernelSpec) -> Self {
        let km = moment_matrices::<T>(spec);
        let n = T::from_usize_lossy(x.len());
        let scale = T::one() / ((n * h).sqrt() * fx0);
        let build = |side: Side| {
            let row = km.slope_row(side.is_plus());
            x.iter()
                .enumerate()
                .filter(|(_, &xi)| side.contains(xi))
                .filter_map(|(i, &xi)| {
                    let u = xi / h;
                    let k = spec.eval(u);
                    (k > T::zero()).then(|| (i, (row[0] + row[1] * u + row[2] * u * u) * k * scale))
                })
                .collect::<Vec<_>>()
        };
        Self {
            plus: build(Side::Plus),
            minus: build(Side::Minus),
        }
    }

    fn side(&self, side: Side) -> &[(usize, T)] {
        match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
        }
    }
}

fn joint<T: Real>(sample: &Sample<T>, i: usize, y: T, arm: Arm) -> T {
    if arm.matches(sample.d[i]) && sample.y[i] <= y {
        T::one()
    } else {
        T::zero()
    }
}

fn treat<T: Real>(sample: &Sample<T>, i: usize, arm: Arm) -> T {
    if arm.matches(sample.d[i]) {
        T::one()
    } else {
        T::zero()
    }
}

/// One realization of the estimated multiplier processes.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpDraw<T> {
    pub xi: Vec<T>,
    /// ν̂±(y_k, d, 1) as `nu1[arm][side][k]`, side 0 = plus.
    pub nu1: [[Vec<T>; 2]; 2],
    /// ν̂±(d, 2) as `nu2[arm][side]`.
    pub nu2: [[T; 2]; 2],
}

impl<T: Real> EmpDraw<T> {
    /// ν̂⁺ − ν̂⁻ for k = 1.
    pub fn nu1_diff(&self, k: usize, arm: Arm) -> T {
        self.nu1[arm.index()][0][k] - self.nu1[arm.index()][1][k]
    }

    /// ν̂⁺ − ν̂⁻ for k = 2.
    pub fn nu2_diff(&self, arm: Arm) -> T {
        self.nu2[arm.index()][0] - self.nu2[arm.index()][1]
    }
}

/// Evaluate the EMP on the first-stage y-grid for a given multiplier vector.
pub fn emp_draw<T: Real>(
    sample: &Sample<T>,
    first_stage: &FirstStageModel<T>,
    fx0: T,
    spec: KernelSpec,
    xi: &[T],
) -> Result<EmpDraw<T>> {
    if xi.len() != sample.len() {
        return Err(RkdError::LengthMismatch {
            expected: sample.len(),
            got: xi.len(),
        });
    }
    if !(fx0 > T::zero()) {
        return Err(RkdError::InvalidArgument("f_X(0) estimate must be positive".into()));
    }
    let weights = EmpWeights::new(&sample.x, first_stage.bandwidth, fx0, spec);
    let grid_len = first_stage.y_grid.len();
    let mut nu1: [[Vec<T>; 2]; 2] = Default::default();
    let mut nu2 = [[T::zero(); 2]; 2];
    for arm in Arm::BOTH {
        for (s, side) in Side::BOTH.into_iter().enumerate() {
            let w = weights.side(side);
            nu1[arm.index()][s] = (0..grid_len)
                .map(|k| {
                    let y = first_stage.y_grid[k];
                    w.iter()
                        .map(|&(i, c)| {
                            let r = joint(sample, i, y, arm) - first_stage.eval_mu1(sample.x[i], k, arm);
                            xi[i] * c * r
                        })
                        .sum()
                })
                .collect();
            nu2[arm.index()][s] = w
                .iter()
                .map(|&(i, c)| {
                    let r = treat(sample, i, arm) - first_stage.eval_mu2(sample.x[i], arm);
                    xi[i] * c * r
                })
                .sum();
        }
    }
    Ok(EmpDraw {
        xi: xi.to_vec(),
        nu1,
        nu2,
    })
}

/// Ẑ(y_k, d): delta-method linearization of the Wald ratio.
pub fn z_hat<T: Real>(cdf: &CdfProcess<T>, emp: &EmpDraw<T>, k: usize) -> T {
    let den = cdf.denominator_slope_diff;
    let num = cdf.numerator_slopes[k];
    (den * emp.nu1_diff(k, cdf.arm) - num * emp.nu2_diff(cdf.arm)) / (den * den)
}

/// Ξ̂(θ) = −[Ẑ(Q̂₁(θ), 1)/f̂₁(Q̂₁(θ)) − Ẑ(Q̂₀(θ), 0)/f̂₀(Q̂₀(θ))] over the θ-grid.
/// Estimated quantiles are grid points, so Ẑ is read off the grid directly.
pub fn xi_process<T: Real>(
    cdf1: &CdfProcess<T>,
    cdf0: &CdfProcess<T>,
    emp: &EmpDraw<T>,
    densities: &DensityEstimates<T>,
    qte: &QteProcess<T>,
) -> Vec<T> {
    (0..qte.theta_grid.len())
        .map(|t| {
            let k1 = qte.q1_index[t];
            let k0 = qte.q0_index[t];
            let a = z_hat(cdf1, emp, k1) / densities.get(Arm::Treated, k1);
            let b = z_hat(cdf0, emp, k0) / densities.get(Arm::Untreated, k0);
            -(a - b)
        })
        .collect()
}

/// The linear map ξ ↦ Ξ̂ restricted to in-window observations.
#[derive(Debug, Clone)]
pub struct XiOperator<T> {
    n: usize,
    index: Vec<usize>,
    /// `rows[t][j]` multiplies ξ[index[j]] in Ξ̂(θ_t).
    rows: Vec<Vec<T>>,
}

impl<T: Real> XiOperator<T> {
    pub fn new(
        sample: &Sample<T>,
        first_stage: &FirstStageModel<T>,
        fx0: T,
        spec: KernelSpec,
        cdfs: [&CdfProcess<T>; 2],
        densities: &DensityEstimates<T>,
        qte: &QteProcess<T>,
    ) -> Self {
        let weights = EmpWeights::new(&sample.x, first_stage.bandwidth, fx0, spec);
        // Δν = ν⁺ − ν⁻, so minus-side weights enter with a flipped sign
        let signed: Vec<(usize, T)> = weights
            .plus
            .iter()
            .copied()
            .chain(weights.minus.iter().map(|&(i, c)| (i, -c)))
            .collect();
        let index: Vec<usize> = signed.iter().map(|&(i, _)| i).collect();
        let rows = (0..qte.theta_grid.len())
            .map(|t| {
                let mut row = vec![T::zero(); signed.len()];
                for (arm, k, sgn) in [
                    (Arm::Treated, qte.q1_index[t], -T::one()),
                    (Arm::Untreated, qte.q0_index[t], T::one()),
                ] {
                    let cdf = cdfs[arm.index()];
                    let den = cdf.denominator_slope_diff;
                    let num = cdf.numerator_slopes[k];
                    let y = first_stage.y_grid[k];
                    let scale = sgn / (den * den * densities.get(arm, k));
                    for (j, &(i, c)) in signed.iter().enumerate() {
                        let x = sample.x[i];
                        let r1 = joint(sample, i, y, arm) - first_stage.eval_mu1(x, k, arm);
                        let r2 = treat(sample, i, arm) - first_stage.eval_mu2(x, arm);
                        row[j] = row[j] + scale * c * (den * r1 - num * r2);
                    }
                }
                row
            })
            .collect();
        Self {
            n: sample.len(),
            index,
            rows,
        }
    }

    pub fn apply(&self, xi: &[T]) -> Vec<T> {
        debug_assert_eq!(xi.len(), self.n);
        let picked: Vec<T> = self.index.iter().map(|&i| xi[i]).collect();
        self.rows
            .iter()
            .map(|row| row.iter().zip(&picked).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    /// Ξ̂ for bootstrap draw `b` under `seed`.
    pub fn draw(&self, seed: u64, b: usize) -> Vec<T> {
        let mut rng = substream(seed, domain::BOOTSTRAP, b as u64);
        let xi: Vec<T> = standard_normals(&mut rng, self.n);
        self.apply(&xi)
    }
}

/// Multipliers used by draw `b` under `seed` (same stream as [`XiOperator::draw`]).
pub fn multipliers<T: Real>(n: usize, seed: u64, b: usize) -> Vec<T> {
    let mut rng = substream(seed, domain::BOOTSTRAP, b as u64);
    standard_normals(&mut rng, n)
}

/// Θ-average by the trapezoid rule divided by |Θ|.
pub fn theta_average<T: Real>(values: &[T], theta_grid: &[T]) -> T {
    let m = values.len();
    if m == 1 {
        return values[0];
    }
    let two = T::lit(2.0);
    let integral: T = (1..m)
        .map(|i| (theta_grid[i] - theta_grid[i - 1]) * (values[i] + values[i - 1]) / two)
        .sum();
    integral / (theta_grid[m - 1] - theta_grid[0])
}

/// v − Θ-average of v.
pub fn demean<T: Real>(values: &[T], theta_grid: &[T]) -> Vec<T> {
    let avg = theta_average(values, theta_grid);
    values.iter().map(|&v| v - avg).collect()
}

fn sup_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Number of draws allowed at or above the statistic while still rejecting:
/// the largest m with (1 + m)/(B + 1) < α, or `None` if even m = 0 fails.
fn allowed_exceedances(b: usize, alpha: f64) -> Option<usize> {
    let mut m: Option<usize> = None;
    for c in 0..=b {
        if ((1 + c) as f64) / ((b + 1) as f64) < alpha {
            m = Some(c);
        } else {
            break;
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult<T> {
    pub statistic: T,
    pub critical_value: T,
    pub p_value: T,
    pub reject: bool,
}

/// Sup test against bootstrap sups. The critical value is the order
/// statistic that makes `statistic > critical_value` equivalent to
/// `p_value < alpha` with p = (1 + #{sup ≥ stat})/(B + 1).
pub fn sup_test<T: Real>(statistic: T, sups: &[T], alpha: f64) -> TestResult<T> {
    let b = sups.len();
    let mut sorted = sups.to_vec();
    crate::scalar::sort_total(&mut sorted);
    let critical_value = match allowed_exceedances(b, alpha) {
        Some(m) => sorted[b - 1 - m],
        None => T::infinity(),
    };
    let exceed = sups.iter().filter(|&&s| s >= statistic).count();
    let p_value = T::from_usize_lossy(1 + exceed) / T::from_usize_lossy(b + 1);
    TestResult {
        statistic,
        critical_value,
        p_value,
        reject: p_value.as_f64() < alpha,
    }
}

/// √(n·h³)
pub fn rate<T: Real>(n: usize, h: T) -> T {
    (T::from_usize_lossy(n) * h * h * h).sqrt()
}

/// sup_θ|√(nh³)·τ̂(θ)| against sup_θ|Ξ̂(θ)|.
pub fn test_significance<T: Real>(qte: &QteProcess<T>, draws: &[Vec<T>], rate: T, alpha: f64) -> TestResult<T> {
    let stat = sup_abs(&qte.tau) * rate;
    let sups: Vec<T> = draws.iter().map(|d| sup_abs(d)).collect();
    sup_test(stat, &sups, alpha)
}

/// sup_θ|√(nh³)·(τ̂(θ) − avg τ̂)| against the demeaned Ξ̂ sups.
pub fn test_homogeneity<T: Real>(qte: &QteProcess<T>, draws: &[Vec<T>], rate: T, alpha: f64) -> TestResult<T> {
    let stat = sup_abs(&demean(&qte.tau, &qte.theta_grid)) * rate;
    let sups: Vec<T> = draws
        .iter()
        .map(|d| sup_abs(&demean(d, &qte.theta_grid)))
        .collect();
    sup_test(stat, &sups, alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformBand<T> {
    pub theta: Vec<T>,
    pub tau: Vec<T>,
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

/// τ̂(θ) ± crit/√(nh³).
pub fn uniform_bands<T: Real>(qte: &QteProcess<T>, critical_value: T, rate: T) -> UniformBand<T> {
    let half = critical_value / rate;
    UniformBand {
        theta: qte.theta_grid.clone(),
        tau: qte.tau.clone(),
        lo: qte.tau.iter().map(|&t| t - half).collect(),
        hi: qte.tau.iter().map(|&t| t + half).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapRun<T> {
    pub draws: usize,
    pub alpha: f64,
    pub seed: u64,
    pub rate: T,
    #[serde(skip)]
    pub xi_processes: Vec<Vec<T>>,
    #[serde(skip)]
    pub sup_ts: Vec<T>,
    #[serde(skip)]
    pub sup_th: Vec<T>,
    pub significance: TestResult<T>,
    pub homogeneity: TestResult<T>,
}

/// Draw B realizations of Ξ̂ (in parallel; order-independent) and run both
/// sup tests.
pub fn run_bootstrap<T: Real>(
    op: &XiOperator<T>,
    qte: &QteProcess<T>,
    rate: T,
    draws: usize,
    alpha: f64,
    seed: u64,
) -> Result<BootstrapRun<T>> {
    if draws < 1 {
        return Err(RkdError::InvalidArgument("bootstrap needs at least one draw".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(RkdError::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let xi_processes: Vec<Vec<T>> = (0..draws).into_par_iter().map(|b| op.draw(seed, b)).collect();
    let significance = test_significance(qte, &xi_processes, rate, alpha);
    let homogeneity = test_homogeneity(qte, &xi_processes, rate, alpha);
    let sup_ts = xi_processes.iter().map(|d| sup_abs(d)).collect();
    let sup_th = xi_processes
        .iter()
        .map(|d| sup_abs(&demean(d, &qte.theta_grid)))
        .collect();
    Ok(BootstrapRun {
        draws,
        alpha,
        seed,
        rate,
        xi_processes,
        sup_ts,
        sup_th,
        significance,
        homogeneity,
    })
}
