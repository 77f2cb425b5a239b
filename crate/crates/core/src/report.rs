//! Serializable summary of an analysis. Field order is the JSON key order.

use std::io::Write;

use serde::Serialize;

use crate::bandwidth::{MainBandwidth, PilotBandwidth, PreliminaryEstimates};
use crate::config::AnalysisConfig;
use crate::diagnostics::Warning;
use crate::error::Result;
use crate::pipeline::{estimate, Analysis};
use crate::sample::{Arm, Sample};
use crate::scalar::Real;

/// Where the pilot selector evaluates its constants.
pub const PILOT_EVALUATION: &str =
    "global cubic per side of 1{Y <= median(Y)}1{D = 1}, x scaled by sd(X), conditional variance 0.25";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthReport {
    pub c: f64,
    pub h0: f64,
    pub h: f64,
    pub fx0: f64,
    pub c_overridden: bool,
    pub h0_overridden: bool,
    pub h_overridden: bool,
    pub pilot_evaluation: &'static str,
    pub preliminary: Option<PreliminaryEstimates<f64>>,
    pub pilot: Option<PilotBandwidth<f64>>,
    pub main: Option<MainBandwidth<f64>>,
    pub density_a: f64,
    pub density_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KinkReport {
    pub arm: u8,
    pub slope_diff: f64,
    pub tolerance: f64,
    /// |slope_diff| − tolerance; negative would have been a WeakKink failure.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfReport {
    pub arm: u8,
    pub values: Vec<f64>,
    pub values_raw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QteReport {
    pub theta: Vec<f64>,
    pub tau: Vec<f64>,
    pub q1: Vec<f64>,
    pub q0: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestReport {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestsReport {
    pub draws: usize,
    pub alpha: f64,
    pub seed: u64,
    pub rate: f64,
    pub significance: TestReport,
    pub homogeneity: TestReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub version: &'static str,
    pub seed: u64,
    pub n: usize,
    pub config: AnalysisConfig,
    pub bandwidths: BandwidthReport,
    pub kink: Vec<KinkReport>,
    pub y_grid: Vec<f64>,
    pub cdfs: Vec<CdfReport>,
    pub qte: QteReport,
    pub tests: TestsReport,
    pub warnings: Vec<Warning>,
}

fn f64s<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn prelim64<T: Real>(p: &PreliminaryEstimates<T>) -> PreliminaryEstimates<f64> {
    p.map(|v| v.as_f64())
}

impl Report {
    pub fn from_analysis<T: Real>(a: &Analysis<T>, cfg: &AnalysisConfig) -> Self {
        let bw = &a.bandwidths;
        let tol = cfg.tol_denominator;
        let kink = Arm::BOTH
            .iter()
            .map(|&arm| {
                let s = a.cdfs[arm.index()].denominator_slope_diff.as_f64();
                KinkReport {
                    arm: arm as u8,
                    slope_diff: s,
                    tolerance: tol,
                    margin: s.abs() - tol,
                }
            })
            .collect();
        let test = |t: &crate::bootstrap::TestResult<T>| TestReport {
            statistic: t.statistic.as_f64(),
            critical_value: t.critical_value.as_f64(),
            p_value: t.p_value.as_f64(),
            reject: t.reject,
        };
        Report {
            version: crate::VERSION,
            seed: cfg.seed,
            n: a.n,
            config: cfg.clone(),
            bandwidths: BandwidthReport {
                c: bw.c_n.as_f64(),
                h0: bw.h0_n.as_f64(),
                h: bw.h_n.as_f64(),
                fx0: bw.fx0.as_f64(),
                c_overridden: cfg.bandwidth.c.is_some(),
                h0_overridden: cfg.bandwidth.h0.is_some(),
                h_overridden: cfg.bandwidth.h.is_some(),
                pilot_evaluation: PILOT_EVALUATION,
                preliminary: bw.preliminary.as_ref().map(prelim64),
                pilot: bw.pilot.as_ref().map(|p| p.map(|v| v.as_f64())),
                main: bw.main.as_ref().map(|m| m.map(|v| v.as_f64())),
                density_a: a.density_tuning.a.as_f64(),
                density_b: a.density_tuning.b.as_f64(),
            },
            kink,
            y_grid: f64s(&a.cdfs[0].y_grid),
            cdfs: a
                .cdfs
                .iter()
                .map(|c| CdfReport {
                    arm: c.arm as u8,
                    values: f64s(&c.values),
                    values_raw: f64s(&c.values_raw),
                })
                .collect(),
            qte: QteReport {
                theta: f64s(&a.qte.theta_grid),
                tau: f64s(&a.qte.tau),
                q1: f64s(&a.qte.q1),
                q0: f64s(&a.qte.q0),
                lo: f64s(&a.band.lo),
                hi: f64s(&a.band.hi),
            },
            tests: TestsReport {
                draws: a.bootstrap.draws,
                alpha: a.bootstrap.alpha,
                seed: a.bootstrap.seed,
                rate: a.bootstrap.rate.as_f64(),
                significance: test(&a.bootstrap.significance),
                homogeneity: test(&a.bootstrap.homogeneity),
            },
            warnings: a.warnings.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `grid,value` rows for one arm's rearranged CDF.
    pub fn write_cdf_csv(&self, arm: Arm, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let c = &self.cdfs[arm.index()];
        out.write_record(["grid", "value"]).map_err(csv_err)?;
        for (g, v) in self.y_grid.iter().zip(&c.values) {
            out.write_record([g.to_string(), v.to_string()]).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// `grid,value` rows for the QTE process on the θ-grid.
    pub fn write_qte_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["grid", "value"]).map_err(csv_err)?;
        for (t, v) in self.qte.theta.iter().zip(&self.qte.tau) {
            out.write_record([t.to_string(), v.to_string()]).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// `theta,tau,lo,hi` rows for the uniform band.
    pub fn write_bands_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["theta", "tau", "lo", "hi"]).map_err(csv_err)?;
        let q = &self.qte;
        for i in 0..q.theta.len() {
            out.write_record([
                q.theta[i].to_string(),
                q.tau[i].to_string(),
                q.lo[i].to_string(),
                q.hi[i].to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> crate::error::RkdError {
    crate::error::RkdError::Io(e.to_string())
}

/// Estimate and summarize. The sample must already be recentered.
pub fn run_analysis<T: Real>(sample: &Sample<T>, cfg: &AnalysisConfig) -> Result<Report> {
    let a = estimate(sample, cfg)?;
    Ok(Report::from_analysis(&a, cfg))
}
