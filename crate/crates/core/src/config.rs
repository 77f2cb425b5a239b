use serde::{Deserialize, Serialize};

use crate::bandwidth::BandwidthOverrides;
use crate::error::{Result, RkdError};
use crate::kernels::KernelSpec;

/// CSV column names for the three observed variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub outcome: String,
    pub treatment: String,
    pub running: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            outcome: "y".into(),
            treatment: "d".into(),
            running: "x".into(),
        }
    }
}

/// Optional overrides for the conditional density bandwidths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityBandwidths {
    /// x-bandwidth; defaults to the pilot bandwidth h₀.
    pub a: Option<f64>,
    /// y-bandwidth; defaults to 1.06·sd(Y)·n^(−1/5).
    pub b: Option<f64>,
}

/// Everything needed to reproduce an analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub kink_location: f64,
    pub kernel: KernelSpec,
    pub theta_a: f64,
    pub y_grid_size: usize,
    pub theta_grid_size: usize,
    /// Tail probability trimmed from the outcome grid before padding.
    pub y_grid_quantile: f64,
    /// Padding on each end of the outcome grid, as a fraction of its range.
    pub y_grid_pad: f64,
    #[serde(alias = "B")]
    pub draws: usize,
    pub alpha: f64,
    pub seed: u64,
    pub density_floor: f64,
    pub tol_denominator: f64,
    pub bandwidth: BandwidthOverrides,
    pub density_bandwidth: DensityBandwidths,
    pub columns: ColumnMap,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            kink_location: 0.0,
            kernel: KernelSpec::TRIANGULAR,
            theta_a: 0.1,
            y_grid_size: 101,
            theta_grid_size: 41,
            y_grid_quantile: 0.02,
            y_grid_pad: 0.1,
            draws: 500,
            alpha: 0.05,
            seed: 0,
            density_floor: crate::density::DEFAULT_DENSITY_FLOOR,
            tol_denominator: crate::wald_qte::DEFAULT_TOL_DENOMINATOR,
            bandwidth: BandwidthOverrides::default(),
            density_bandwidth: DensityBandwidths::default(),
            columns: ColumnMap::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RkdError::InvalidArgument(m));
        if self.y_grid_size < 2 || self.theta_grid_size < 2 {
            return bad("grid sizes must be at least 2".into());
        }
        if self.draws < 100 {
            return bad(format!("at least 100 bootstrap draws are required, got {}", self.draws));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.theta_a > 0.0 && self.theta_a < 0.5) {
            return bad(format!("theta_a must lie in (0, 0.5), got {}", self.theta_a));
        }
        if !(self.y_grid_quantile >= 0.0 && self.y_grid_quantile < 0.5) {
            return bad(format!("y_grid_quantile must lie in [0, 0.5), got {}", self.y_grid_quantile));
        }
        if !(self.y_grid_pad >= 0.0) {
            return bad("y_grid_pad must be nonnegative".into());
        }
        if !(self.density_floor > 0.0) {
            return bad("density_floor must be positive".into());
        }
        if !(self.tol_denominator > 0.0) {
            return bad("tol_denominator must be positive".into());
        }
        if !self.kink_location.is_finite() {
            return bad("kink_location must be finite".into());
        }
        Ok(())
    }
}
