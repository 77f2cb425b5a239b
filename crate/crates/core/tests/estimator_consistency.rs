mod common;

use rkqte::density::{conditional_density, default_outcome_bandwidth, DensityTuning};
use rkqte::first_stage::fit_first_stage;
use rkqte::simulation::replication_sample;
use rkqte::wald_qte::{default_y_grid, qte_process, theta_grid, wald_cdf};
use rkqte::{estimate, AnalysisConfig, Arm, DgpConfig, KernelSpec, RkdError, Sample, Sample64};

const TRI: KernelSpec = KernelSpec::TRIANGULAR;

fn big_sample(c: &DgpConfig) -> Sample64 {
    replication_sample(c, 1_000_000, 2024, 0).unwrap()
}

#[test]
fn wald_cdf_uniformly_close_to_truth() {
    let c = DgpConfig::with_effects(1.0, 0.0);
    let s = big_sample(&c);
    let grid = default_y_grid(&s, 1.0, 101, 0.02, 0.1).unwrap();
    for arm in Arm::BOTH {
        let cdf = wald_cdf(&s, &grid, arm, 1.0, TRI, 1e-6).unwrap();
        let err = grid
            .iter()
            .zip(&cdf.values)
            .map(|(&y, &v)| (v - common::complier_cdf(&c, y, arm == Arm::Treated)).abs())
            .fold(0.0, f64::max);
        assert!(err < 0.1, "arm {arm}: sup error {err}");
    }
}

#[test]
fn median_qte_recovers_constant_effect() {
    let c = DgpConfig::with_effects(1.0, 0.0);
    let s = big_sample(&c);
    let grid = default_y_grid(&s, 1.0, 201, 0.02, 0.1).unwrap();
    let c1 = wald_cdf(&s, &grid, Arm::Treated, 1.0, TRI, 1e-6).unwrap();
    let c0 = wald_cdf(&s, &grid, Arm::Untreated, 1.0, TRI, 1e-6).unwrap();
    let q = qte_process(&c1, &c0, &theta_grid(0.2, 31)).unwrap();
    let mut tau = q.tau.clone();
    tau.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = tau[tau.len() / 2];
    assert!((med - 1.0).abs() < 0.25, "median τ̂ {med}");
}

#[test]
fn conditional_density_near_truth_at_median() {
    let c = DgpConfig::default();
    let s = big_sample(&c);
    let y = c.true_quantile(0.5, true);
    let want = common::complier_density(&c, y, true);
    let den = wald_cdf(&s, &[y], Arm::Treated, 1.0, TRI, 1e-6).unwrap().denominator_slope_diff;
    let tuning = DensityTuning {
        a: 1.0,
        b: default_outcome_bandwidth(&s.y),
        floor: 0.01,
    };
    let got = conditional_density(&s, y, Arm::Treated, tuning, den, TRI, 1e-6).unwrap();
    assert!(!got.floored);
    assert!((got.value / want - 1.0).abs() < 0.3, "{} vs {want}", got.value);
}

#[test]
fn smoothed_slope_matches_finite_difference_of_cdf_slopes() {
    // both sides estimate ∂/∂y of the μ₁ slope kink
    let c = DgpConfig::default();
    let s = big_sample(&c);
    let y = c.true_quantile(0.5, true);
    let e = 0.3;
    let fd = {
        let cdf = wald_cdf(&s, &[y - e, y + e], Arm::Treated, 1.0, TRI, 1e-6).unwrap();
        (cdf.numerator_slopes[1] - cdf.numerator_slopes[0]) / (2.0 * e)
    };
    let tuning = DensityTuning {
        a: 1.0,
        b: default_outcome_bandwidth(&s.y),
        floor: 1e-9,
    };
    let smooth = conditional_density(&s, y, Arm::Treated, tuning, 1.0, TRI, 1e-6).unwrap().raw;
    assert!((smooth / fd - 1.0).abs() < 0.25, "{smooth} vs {fd}");
}

#[test]
fn first_stage_uniformly_close_to_truth() {
    let c = DgpConfig::default();
    let s: Sample64 = replication_sample(&c, 20_000, 31, 0).unwrap();
    let a = {
        let mut cfg = AnalysisConfig::default();
        cfg.draws = 100;
        estimate(&s, &cfg).unwrap()
    };
    let h = a.bandwidths.h_n;
    let grid = &a.first_stage.y_grid;
    let mut worst: f64 = 0.0;
    for k in 0..grid.len() {
        for arm in Arm::BOTH {
            for j in 1..40 {
                let x = -h + 2.0 * h * j as f64 / 40.0;
                if x == 0.0 {
                    continue;
                }
                let truth = common::mu1(&c, x, grid[k], arm == Arm::Treated);
                worst = worst.max((a.first_stage.eval_mu1(x, k, arm) - truth).abs());
            }
        }
    }
    assert!(worst < 0.15, "sup error {worst} at h = {h}");
}

#[test]
fn treatment_kinks_are_complementary() {
    let s: Sample64 = replication_sample(&DgpConfig::default(), 3000, 4, 0).unwrap();
    let grid = [0.0, 1.0, 2.0];
    let a = wald_cdf(&s, &grid, Arm::Treated, 0.8, TRI, 1e-6).unwrap();
    let b = wald_cdf(&s, &grid, Arm::Untreated, 0.8, TRI, 1e-6).unwrap();
    assert!((a.denominator_slope_diff + b.denominator_slope_diff).abs() < 1e-12);
    // and close to the population kink
    let want = common::treatment_kink(&DgpConfig::default(), true);
    assert!((want - 0.473).abs() < 0.01, "{want}");
}

#[test]
fn outcome_shift_leaves_tau_unchanged() {
    let s: Sample64 = replication_sample(&DgpConfig::with_effects(0.5, 0.5), 2000, 8, 0).unwrap();
    let shifted = Sample::new(s.y.iter().map(|y| y + 4.0).collect(), s.d.clone(), s.x.clone()).unwrap();
    let cfg = AnalysisConfig {
        draws: 100,
        ..AnalysisConfig::default()
    };
    let a = estimate(&s, &cfg).unwrap();
    let b = estimate(&shifted, &cfg).unwrap();
    for t in 0..a.qte.tau.len() {
        assert!((a.qte.q1[t] + 4.0 - b.qte.q1[t]).abs() < 1e-9);
        assert!((a.qte.q0[t] + 4.0 - b.qte.q0[t]).abs() < 1e-9);
        assert!((a.qte.tau[t] - b.qte.tau[t]).abs() < 1e-9);
    }
}

#[test]
fn no_kink_is_a_weak_kink_failure() {
    // treatment jumps at the threshold but has no slope change
    let base: Sample64 = replication_sample(&DgpConfig::default(), 2000, 9, 0).unwrap();
    let d: Vec<bool> = base.x.iter().map(|&x| x > 0.0).collect();
    let s = Sample::new(base.y.clone(), d, base.x.clone()).unwrap();
    match estimate(&s, &AnalysisConfig::default()) {
        Err(RkdError::WeakKink { slope_diff, tol, .. }) => {
            assert!(slope_diff.abs() < tol);
            let e = RkdError::WeakKink { arm: 0, slope_diff, tol };
            assert!(e.is_design_failure());
        }
        other => panic!("expected WeakKink, got {:?}", other.map(|a| a.n)),
    }
}

#[test]
fn fit_first_stage_reproduces_grid() {
    let s: Sample64 = replication_sample(&DgpConfig::default(), 1500, 2, 0).unwrap();
    let m = fit_first_stage(&s, &[0.5, 1.0, 1.5], 0.9, TRI).unwrap();
    assert_eq!(m.y_grid, vec![0.5, 1.0, 1.5]);
    assert_eq!(m.bandwidth, 0.9);
}
