//! Simulation design with a kinked treatment assignment, closed-form truths,
//! and the Monte Carlo coverage harness.
//!
//! Y = α₀ + α₁X + α₂X² + β₁D + (γ₀ + γ₁D)U,
//! D = 𝟙{2·𝟙{X ≥ 0}·X − X − 1 ≥ V}, (X, U, V) jointly normal.

use std::fmt::Write as _;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::AnalysisConfig;
use crate::error::{Result, RkdError};
use crate::pipeline::estimate;
use crate::rng::{derive_seed, domain, substream};
use crate::sample::Sample;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub sigma_x: f64,
    pub sigma_u: f64,
    pub sigma_v: f64,
    pub rho_xu: f64,
    pub rho_xv: f64,
    pub rho_uv: f64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            alpha0: 1.0,
            alpha1: 0.1,
            alpha2: 0.01,
            beta1: 0.0,
            gamma0: 1.0,
            gamma1: 0.0,
            sigma_x: 1.0,
            sigma_u: 1.0,
            sigma_v: 1.0,
            rho_xu: 0.5,
            rho_xv: 0.5,
            rho_uv: 0.5,
        }
    }
}

/// Assignment threshold h(x) = 2·𝟙{x ≥ 0}·x − x − 1 (equals |x| − 1).
pub fn assignment_threshold(x: f64) -> f64 {
    let on = if x >= 0.0 { 1.0 } else { 0.0 };
    2.0 * on * x - x - 1.0
}

impl DgpConfig {
    pub fn with_effects(beta1: f64, gamma1: f64) -> Self {
        Self {
            beta1,
            gamma1,
            ..Self::default()
        }
    }

    /// Covariance of (X, U, V).
    pub fn covariance(&self) -> [[f64; 3]; 3] {
        let (sx, su, sv) = (self.sigma_x, self.sigma_u, self.sigma_v);
        [
            [sx * sx, self.rho_xu * sx * su, self.rho_xv * sx * sv],
            [self.rho_xu * sx * su, su * su, self.rho_uv * su * sv],
            [self.rho_xv * sx * sv, self.rho_uv * su * sv, sv * sv],
        ]
    }

    /// Lower Cholesky factor of the covariance.
    pub fn cholesky(&self) -> Result<[[f64; 3]; 3]> {
        let a = self.covariance();
        let mut l = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..=i {
                let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
                if i == j {
                    let d = a[i][i] - s;
                    if !(d > 0.0) || !d.is_finite() {
                        return Err(RkdError::NotPositiveDefinite);
                    }
                    l[i][j] = d.sqrt();
                } else {
                    l[i][j] = (a[i][j] - s) / l[j][j];
                }
            }
        }
        Ok(l)
    }

    /// Mean and variance of U given (X, V) = (0, h(0)).
    pub fn conditional_u_at_kink(&self) -> (f64, f64) {
        let s = self.covariance();
        // Σ_{(X,V)} and Σ_{U,(X,V)}
        let (a, b, c) = (s[0][0], s[0][2], s[2][2]);
        let (ux, uv) = (s[1][0], s[1][2]);
        let det = a * c - b * b;
        // Σ_U,(XV) Σ_(XV)⁻¹
        let w0 = (ux * c - uv * b) / det;
        let w1 = (uv * a - ux * b) / det;
        let v0 = assignment_threshold(0.0);
        let mean = w1 * v0; // X = 0 contributes nothing
        let var = s[1][1] - (w0 * ux + w1 * uv);
        (mean, var)
    }

    fn outcome(&self, x: f64, d: bool, u: f64) -> f64 {
        let df = if d { 1.0 } else { 0.0 };
        self.alpha0
            + self.alpha1 * x
            + self.alpha2 * x * x
            + self.beta1 * df
            + (self.gamma0 + self.gamma1 * df) * u
    }

    /// True conditional CDF of Y^d at the local compliance event.
    pub fn true_cdf(&self, y: f64, treated: bool) -> f64 {
        let (m, v) = self.conditional_u_at_kink();
        let scale = if treated { self.gamma0 + self.gamma1 } else { self.gamma0 };
        let shift = self.alpha0 + if treated { self.beta1 } else { 0.0 };
        let z = (y - shift - scale * m) / (scale.abs() * v.sqrt());
        std_normal().cdf(if scale >= 0.0 { z } else { -z })
    }

    /// True conditional density of Y^d at the local compliance event.
    pub fn true_density(&self, y: f64, treated: bool) -> f64 {
        let (m, v) = self.conditional_u_at_kink();
        let scale = if treated { self.gamma0 + self.gamma1 } else { self.gamma0 };
        let shift = self.alpha0 + if treated { self.beta1 } else { 0.0 };
        let s = scale.abs() * v.sqrt();
        let z = (y - shift - scale * m) / s;
        (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    }

    /// True conditional quantile of Y^d at the local compliance event.
    pub fn true_quantile(&self, theta: f64, treated: bool) -> f64 {
        let (m, v) = self.conditional_u_at_kink();
        let scale = if treated { self.gamma0 + self.gamma1 } else { self.gamma0 };
        let shift = self.alpha0 + if treated { self.beta1 } else { 0.0 };
        let zq = std_normal().inverse_cdf(if scale >= 0.0 { theta } else { 1.0 - theta });
        shift + scale * (m + v.sqrt() * zq)
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// τ(θ) = β₁ + γ₁·Q_{U|V=h(0),X=0}(θ) for nonnegative γ₀, γ₀ + γ₁.
pub fn true_qte(cfg: &DgpConfig, theta: f64) -> f64 {
    cfg.true_quantile(theta, true) - cfg.true_quantile(theta, false)
}

/// Draw n observations from the design using the given stream.
pub fn draw_sample_with<T: Real>(cfg: &DgpConfig, n: usize, rng: &mut impl rand::Rng) -> Result<Sample<T>> {
    let l = cfg.cholesky()?;
    let mut y = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    for _ in 0..n {
        let z: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let xi = l[0][0] * z[0];
        let ui = l[1][0] * z[0] + l[1][1] * z[1];
        let vi = l[2][0] * z[0] + l[2][1] * z[1] + l[2][2] * z[2];
        let di = assignment_threshold(xi) >= vi;
        y.push(T::lit(cfg.outcome(xi, di, ui)));
        d.push(di);
        x.push(T::lit(xi));
    }
    Sample::new(y, d, x)
}

/// Draw n observations; `seed` selects a deterministic stream.
pub fn draw_sample<T: Real>(cfg: &DgpConfig, n: usize, seed: u64) -> Result<Sample<T>> {
    if n == 0 {
        return Err(RkdError::InvalidArgument("sample size must be positive".into()));
    }
    let mut rng = substream(seed, domain::DATA, 0);
    draw_sample_with(cfg, n, &mut rng)
}

/// Sample for Monte Carlo replication `rep`. Shared across cells so that
/// cells differ only through (β₁, γ₁).
pub fn replication_sample<T: Real>(cfg: &DgpConfig, n: usize, seed: u64, rep: usize) -> Result<Sample<T>> {
    let mut rng = substream(seed, domain::DATA, rep as u64);
    draw_sample_with(cfg, n, &mut rng)
}

/// One (n, β₁, γ₁) configuration of the coverage study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub n: usize,
    pub beta1: f64,
    pub gamma1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub n: usize,
    pub beta1: f64,
    pub gamma1: f64,
    pub reps: usize,
    pub failed: usize,
    pub accept_significance: usize,
    pub accept_homogeneity: usize,
    pub freq_significance: f64,
    pub freq_homogeneity: f64,
    /// More than 2% of replications failed.
    pub flagged: bool,
    /// Distinct failure messages with counts.
    pub failures: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McResult {
    pub reps: usize,
    pub draws: usize,
    pub alpha: f64,
    pub seed: u64,
    pub cells: Vec<CellResult>,
}

#[derive(Debug, Clone, Copy)]
enum RepOutcome {
    Done { sig: bool, hom: bool },
}

/// Run the coverage study. Replication `r` of every cell uses data stream
/// `r` and bootstrap seed `derive_seed(seed, r)`.
pub fn run_coverage<T: Real>(
    cells: &[CellSpec],
    base: &DgpConfig,
    analysis: &AnalysisConfig,
    reps: usize,
    seed: u64,
) -> Result<McResult> {
    if reps < 1 {
        return Err(RkdError::InvalidArgument("reps must be at least 1".into()));
    }
    analysis.validate()?;
    base.cholesky()?;
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..reps).map(move |r| (c, r)))
        .collect();
    let outcomes: Vec<std::result::Result<RepOutcome, String>> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let cell = cells[c];
            let dgp = DgpConfig {
                beta1: cell.beta1,
                gamma1: cell.gamma1,
                ..*base
            };
            let sample = replication_sample::<T>(&dgp, cell.n, seed, r).map_err(|e| e.to_string())?;
            let cfg = AnalysisConfig {
                seed: derive_seed(seed, r as u64),
                ..analysis.clone()
            };
            let a = estimate(&sample, &cfg).map_err(|e| e.to_string())?;
            Ok(RepOutcome::Done {
                sig: !a.bootstrap.significance.reject,
                hom: !a.bootstrap.homogeneity.reject,
            })
        })
        .collect();

    let mut results = Vec::with_capacity(cells.len());
    for (c, cell) in cells.iter().enumerate() {
        let slice = &outcomes[c * reps..(c + 1) * reps];
        let mut acc_s = 0;
        let mut acc_h = 0;
        let mut failures: Vec<(String, usize)> = Vec::new();
        for o in slice {
            match o {
                Ok(RepOutcome::Done { sig, hom }) => {
                    acc_s += usize::from(*sig);
                    acc_h += usize::from(*hom);
                }
                Err(msg) => {
                    log::warn!("cell {c} replication failed: {msg}");
                    match failures.iter_mut().find(|(m, _)| m == msg) {
                        Some(entry) => entry.1 += 1,
                        None => failures.push((msg.clone(), 1)),
                    }
                }
            }
        }
        let failed: usize = failures.iter().map(|(_, k)| k).sum();
        let ok = reps - failed;
        let freq = |k: usize| if ok == 0 { f64::NAN } else { k as f64 / ok as f64 };
        results.push(CellResult {
            n: cell.n,
            beta1: cell.beta1,
            gamma1: cell.gamma1,
            reps,
            failed,
            accept_significance: acc_s,
            accept_homogeneity: acc_h,
            freq_significance: freq(acc_s),
            freq_homogeneity: freq(acc_h),
            flagged: failed as f64 > 0.02 * reps as f64,
            failures,
        });
    }
    Ok(McResult {
        reps,
        draws: analysis.draws,
        alpha: analysis.alpha,
        seed,
        cells: results,
    })
}

impl McResult {
    /// Acceptance table laid out with one block of two rows per sample size
    /// and one column per (β₁, γ₁) pair.
    pub fn format_table(&self) -> String {
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        let mut ns: Vec<usize> = Vec::new();
        for c in &self.cells {
            if !pairs.iter().any(|&(b, g)| b == c.beta1 && g == c.gamma1) {
                pairs.push((c.beta1, c.gamma1));
            }
            if !ns.contains(&c.n) {
                ns.push(c.n);
            }
        }
        let mut out = String::new();
        let rule = "=".repeat(24 + 9 * pairs.len());
        let _ = writeln!(out, "{rule}");
        let _ = write!(out, "{:<10}{:<14}", "", "beta1");
        for (b, _) in &pairs {
            let _ = write!(out, "{b:>9.2}");
        }
        let _ = writeln!(out);
        let _ = write!(out, "{:<10}{:<14}", "", "gamma1");
        for (_, g) in &pairs {
            let _ = write!(out, "{g:>9.2}");
        }
        let _ = writeln!(out);
        for n in ns {
            let _ = writeln!(out, "{}", "-".repeat(rule.len()));
            for (label, pick) in [("Significance", true), ("Homogeneity", false)] {
                let head = if pick { format!("n={n}") } else { String::new() };
                let _ = write!(out, "{head:<10}{label:<14}");
                for &(b, g) in &pairs {
                    let cell = self
                        .cells
                        .iter()
                        .find(|c| c.n == n && c.beta1 == b && c.gamma1 == g);
                    match cell {
                        Some(c) => {
                            let f = if pick { c.freq_significance } else { c.freq_homogeneity };
                            let mark = if c.flagged { "*" } else { " " };
                            let _ = write!(out, "{f:>8.3}{mark}");
                        }
                        None => {
                            let _ = write!(out, "{:>9}", "-");
                        }
                    }
                }
                let _ = writeln!(out);
            }
        }
        let _ = writeln!(out, "{rule}");
        let _ = writeln!(
            out,
            "reps={} B={} alpha={} seed={} (* = more than 2% failed replications)",
            self.reps, self.draws, self.alpha, self.seed
        );
        out
    }

    /// Per-cell CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "n,beta1,gamma1,reps,failed,accept_significance,accept_homogeneity,freq_significance,freq_homogeneity,flagged\n",
        );
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                c.n,
                c.beta1,
                c.gamma1,
                c.reps,
                c.failed,
                c.accept_significance,
                c.accept_homogeneity,
                c.freq_significance,
                c.freq_homogeneity,
                c.flagged
            );
        }
        out
    }
}
