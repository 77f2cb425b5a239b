//! End-to-end estimation: bandwidths → first stage → CDFs → densities →
//! QTE → bootstrap tests and bands.

use std::collections::BTreeSet;

use crate::bandwidth::{select_bandwidths, BandwidthSet};
use crate::bootstrap::{rate, run_bootstrap, uniform_bands, BootstrapRun, UniformBand, XiOperator};
use crate::config::AnalysisConfig;
use crate::density::{default_outcome_bandwidth, DensityEstimates, DensityTuning};
use crate::diagnostics::Warning;
use crate::error::Result;
use crate::first_stage::{fit_first_stage_with, FirstStageModel, SmootherPair};
use crate::sample::{Arm, Sample};
use crate::scalar::Real;
use crate::wald_qte::{default_y_grid, qte_process, theta_grid, CdfProcess, QteProcess};

#[derive(Debug, Clone)]
pub struct Analysis<T> {
    pub n: usize,
    pub bandwidths: BandwidthSet<T>,
    pub density_tuning: DensityTuning<T>,
    pub first_stage: FirstStageModel<T>,
    /// Indexed by arm.
    pub cdfs: [CdfProcess<T>; 2],
    pub densities: DensityEstimates<T>,
    pub qte: QteProcess<T>,
    pub bootstrap: BootstrapRun<T>,
    pub band: UniformBand<T>,
    pub warnings: Vec<Warning>,
}

/// Run the full estimator on a sample whose kink already sits at zero.
pub fn estimate<T: Real>(sample: &Sample<T>, cfg: &AnalysisConfig) -> Result<Analysis<T>> {
    cfg.validate()?;
    let spec = cfg.kernel;
    let tol = T::lit(cfg.tol_denominator);
    let mut warnings = Vec::new();

    let bandwidths = select_bandwidths(sample, spec, &cfg.bandwidth, &mut warnings)?;
    let h = bandwidths.h_n;
    let y_grid = default_y_grid(
        sample,
        h,
        cfg.y_grid_size,
        T::lit(cfg.y_grid_quantile),
        T::lit(cfg.y_grid_pad),
    )?;

    let pair = SmootherPair::new(&sample.x, h, spec)?;
    let first_stage = fit_first_stage_with(sample, &y_grid, &pair);
    let cdfs = [
        CdfProcess::from_first_stage(&first_stage, Arm::Untreated, tol)?,
        CdfProcess::from_first_stage(&first_stage, Arm::Treated, tol)?,
    ];

    let density_tuning = DensityTuning {
        a: cfg.density_bandwidth.a.map_or(bandwidths.h0_n, T::lit),
        b: cfg
            .density_bandwidth
            .b
            .map_or_else(|| default_outcome_bandwidth(&sample.y), T::lit),
        floor: T::lit(cfg.density_floor),
    };
    let densities = DensityEstimates::estimate(
        sample,
        &y_grid,
        bandwidths.fx0,
        density_tuning,
        [cdfs[0].denominator_slope_diff, cdfs[1].denominator_slope_diff],
        spec,
        tol,
    )?;

    let thetas = theta_grid(T::lit(cfg.theta_a), cfg.theta_grid_size);
    let qte = qte_process(&cdfs[1], &cdfs[0], &thetas)?;
    for &(arm, theta) in &qte.grid_too_narrow {
        warnings.push(Warning::GridTooNarrow {
            arm: arm as u8,
            theta: theta.as_f64(),
        });
    }
    let mut used = BTreeSet::new();
    for t in 0..thetas.len() {
        used.insert((Arm::Treated, qte.q1_index[t]));
        used.insert((Arm::Untreated, qte.q0_index[t]));
    }
    for (arm, k) in used {
        if densities.floored(arm, k) {
            warnings.push(Warning::DegenerateDensity {
                arm: arm as u8,
                y: y_grid[k].as_f64(),
                raw: densities.f_raw[arm.index()][k].as_f64(),
                floor: densities.floor.as_f64(),
            });
        }
    }

    let op = XiOperator::new(
        sample,
        &first_stage,
        bandwidths.fx0,
        spec,
        [&cdfs[0], &cdfs[1]],
        &densities,
        &qte,
    );
    let r = rate(sample.len(), h);
    let bootstrap = run_bootstrap(&op, &qte, r, cfg.draws, cfg.alpha, cfg.seed)?;
    let band = uniform_bands(&qte, bootstrap.significance.critical_value, r);
    for w in &warnings {
        w.log();
    }
    Ok(Analysis {
        n: sample.len(),
        bandwidths,
        density_tuning,
        first_stage,
        cdfs,
        densities,
        qte,
        bootstrap,
        band,
        warnings,
    })
}
