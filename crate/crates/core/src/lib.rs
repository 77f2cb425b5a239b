//! Quantile treatment effects in the fuzzy regression kink design with a
//! binary treatment, plus uniform inference by multiplier bootstrap.
//!
//! Every estimator is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the bottom of this file fix the scalar for common use.

pub mod bandwidth;
pub mod bootstrap;
pub mod config;
pub mod density;
pub mod diagnostics;
pub mod error;
pub mod first_stage;
pub mod ingest;
pub mod kernels;
pub mod linalg;
pub mod local_poly;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod sample;
pub mod scalar;
pub mod simulation;
pub mod wald_qte;

pub use bandwidth::{select_bandwidths, BandwidthOverrides, BandwidthSet};
pub use bootstrap::{run_bootstrap, BootstrapRun, TestResult, UniformBand, XiOperator};
pub use config::{AnalysisConfig, ColumnMap};
pub use diagnostics::Warning;
pub use error::{Result, RkdError};
pub use ingest::{ingest, ingest_reader};
pub use kernels::{KernelKind, KernelSpec};
pub use local_poly::{fit_one_sided, Degree, OneSidedFit};
pub use pipeline::{estimate, Analysis};
pub use report::{run_analysis, Report};
pub use sample::{Arm, Sample, Side};
pub use scalar::Real;
pub use simulation::{run_coverage, true_qte, CellSpec, DgpConfig, McResult};
pub use wald_qte::{rearrange, CdfProcess, QteProcess};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Sample64 = Sample<f64>;
pub type Sample32 = Sample<f32>;
pub type Analysis64 = Analysis<f64>;
pub type Analysis32 = Analysis<f32>;
pub type CdfProcess64 = CdfProcess<f64>;
pub type QteProcess64 = QteProcess<f64>;
pub type OneSidedFit64 = OneSidedFit<f64>;
