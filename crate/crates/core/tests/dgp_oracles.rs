mod common;

use rand::Rng;
use rand_distr::StandardNormal;
use rkqte::rng::{domain, substream};
use rkqte::simulation::{assignment_threshold, draw_sample};
use rkqte::{true_qte, DgpConfig, Sample64};

#[test]
fn treatment_probability_by_bins() {
    let c = DgpConfig::default();
    let s: Sample64 = draw_sample(&c, 100_000, 11).unwrap();
    for lo in [-1.5, -1.0, -0.5, -0.1, 0.0, 0.4, 0.9, 1.4] {
        let hi = lo + 0.1;
        let (mut hits, mut tot) = (0usize, 0usize);
        let mut expected = 0.0;
        for i in 0..s.len() {
            if s.x[i] >= lo && s.x[i] < hi {
                tot += 1;
                hits += usize::from(s.d[i]);
                expected += common::p_treated(&c, s.x[i]);
            }
        }
        let got = hits as f64 / tot as f64;
        let want = expected / tot as f64;
        assert!((got - want).abs() < 0.01 + 3.0 * (want * (1.0 - want) / tot as f64).sqrt(),
            "bin [{lo},{hi}): {got} vs {want} over {tot}");
    }
}

#[test]
fn closed_form_probability_matches() {
    // V | X = x ~ N(x/2, 3/4)
    let c = DgpConfig::default();
    for x in [-1.2f64, -0.3, 0.0, 0.25, 1.7] {
        let direct = statrs::function::erf::erfc(-((x.abs() - 1.0 - 0.5 * x) / 0.75f64.sqrt()) / 2f64.sqrt()) / 2.0;
        assert!((common::p_treated(&c, x) - direct).abs() < 1e-12);
    }
}

#[test]
fn sample_moments_match_covariance() {
    let c = DgpConfig {
        rho_xu: 0.3,
        rho_uv: -0.2,
        sigma_u: 1.5,
        ..DgpConfig::default()
    };
    // recover (X, U) from Y and (X, V) from the seed stream directly
    let n = 100_000;
    let l = c.cholesky().unwrap();
    let mut rng = substream(5, domain::DATA, 0);
    let mut acc = [[0.0; 3]; 3];
    for _ in 0..n {
        let z: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let w = [
            l[0][0] * z[0],
            l[1][0] * z[0] + l[1][1] * z[1],
            l[2][0] * z[0] + l[2][1] * z[1] + l[2][2] * z[2],
        ];
        for i in 0..3 {
            for j in 0..3 {
                acc[i][j] += w[i] * w[j] / n as f64;
            }
        }
    }
    let want = c.covariance();
    for i in 0..3 {
        for j in 0..3 {
            assert!((acc[i][j] - want[i][j]).abs() < 0.02, "({i},{j}) {} vs {}", acc[i][j], want[i][j]);
        }
    }
    // and the public sampler uses the same construction
    let s: Sample64 = draw_sample(&c, 2, 5).unwrap();
    let mut rng = substream(5, domain::DATA, 0);
    let z0: f64 = rng.sample(StandardNormal);
    assert_eq!(s.x[0], l[0][0] * z0);
}

#[test]
fn assignment_rule_examples() {
    assert_eq!(assignment_threshold(0.0), -1.0);
    let c = DgpConfig::default();
    // at X = 0, D = 1{V ≤ −1}
    assert!((common::p_treated(&c, 0.0) - statrs::distribution::ContinuousCDF::cdf(
        &statrs::distribution::Normal::new(0.0, 0.75f64.sqrt()).unwrap(), -1.0)).abs() < 1e-12);
}

/// Rejection sampler for U | X ≈ 0, V ≈ −1.
fn rejection_u(c: &DgpConfig, draws: usize, window: f64) -> Vec<f64> {
    let l = c.cholesky().unwrap();
    let mut rng = substream(99, domain::DATA, 7);
    let mut out = Vec::new();
    for _ in 0..draws {
        let z0: f64 = rng.sample(StandardNormal);
        let x = l[0][0] * z0;
        let (z1, z2): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        if x.abs() > window {
            continue;
        }
        let v = l[2][0] * z0 + l[2][1] * z1 + l[2][2] * z2;
        if (v + 1.0).abs() > window {
            continue;
        }
        out.push(l[1][0] * z0 + l[1][1] * z1);
    }
    out
}

#[test]
fn true_qte_against_rejection_sampling() {
    let c = DgpConfig::with_effects(0.4, 1.0);
    let mut u = rejection_u(&c, 40_000_000, 0.04);
    u.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert!(u.len() > 20_000, "{} accepted", u.len());
    for theta in [0.25, 0.5, 0.75] {
        let qu = u[(theta * u.len() as f64) as usize];
        // τ(θ) = Q_{Y¹}(θ) − Q_{Y⁰}(θ) = β₁ + γ₁·Q_U(θ)
        let want = c.beta1 + c.gamma1 * qu;
        let got = true_qte(&c, theta);
        assert!((got - want).abs() < 0.02, "θ={theta}: {got} vs {want}");
    }
}

#[test]
fn closed_form_cdf_matches_kink_ratio() {
    for c in [DgpConfig::default(), DgpConfig::with_effects(1.0, 0.5)] {
        for treated in [false, true] {
            for y in [-0.5, 0.3, 0.8, 1.5, 2.7] {
                let want = common::complier_cdf(&c, y, treated);
                let got = c.true_cdf(y, treated);
                assert!((got - want).abs() < 2e-4, "y={y} d={treated}: {got} vs {want}");
            }
        }
        let y = c.true_quantile(0.5, true);
        let want = common::complier_density(&c, y, true);
        assert!((c.true_density(y, true) - want).abs() < 2e-3);
    }
}
