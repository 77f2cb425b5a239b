//! Acceptance suite. Prints one PASS/FAIL line per criterion, then fails the
//! test if any criterion failed.
//!
//! Run with `cargo test -p rkqte-cli --test acceptance -- --nocapture`.

use std::path::Path;
use std::process::Command;

use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rkqte::bootstrap::{emp_draw, multipliers, xi_process, z_hat, EmpDraw};
use rkqte::kernels::{moment_matrices, moment_matrices_quadrature, KernelMoments};
use rkqte::linalg::symmetric_eigenvalues;
use rkqte::simulation::replication_sample;
use rkqte::{
    estimate, fit_one_sided, rearrange, run_coverage, true_qte, Analysis64, AnalysisConfig, Arm, CellSpec, Degree,
    DgpConfig, KernelSpec, Sample64, Side,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

const ALPHA_BAND: (f64, f64) = (0.894, 0.964);

fn coverage_cells(cells: &[CellSpec]) -> rkqte::McResult {
    let cfg = AnalysisConfig {
        draws: 500,
        alpha: 0.05,
        ..AnalysisConfig::default()
    };
    run_coverage::<f64>(cells, &DgpConfig::default(), &cfg, 500, 0).expect("coverage run")
}

fn criteria_coverage() -> [Outcome; 3] {
    let n500 = coverage_cells(&[
        CellSpec { n: 500, beta1: 0.0, gamma1: 0.0 },
        CellSpec { n: 500, beta1: 1.5, gamma1: 0.0 },
    ]);
    print!("{}", n500.format_table());
    let n1000 = coverage_cells(&[
        CellSpec { n: 1000, beta1: 0.0, gamma1: 0.0 },
        CellSpec { n: 1000, beta1: 0.0, gamma1: 1.5 },
    ]);
    print!("{}", n1000.format_table());

    let null = &n500.cells[0];
    let alt = &n500.cells[1];
    let inside = |f: f64| (ALPHA_BAND.0..=ALPHA_BAND.1).contains(&f);
    let c1 = outcome(
        inside(null.freq_significance) && inside(null.freq_homogeneity),
        format!(
            "significance {:.3}, homogeneity {:.3}, band [{}, {}]",
            null.freq_significance, null.freq_homogeneity, ALPHA_BAND.0, ALPHA_BAND.1
        ),
    );
    let c2 = outcome(
        alt.freq_significance <= null.freq_significance - 0.03,
        format!(
            "significance {:.3} at beta1=1.5 vs {:.3} at beta1=0",
            alt.freq_significance, null.freq_significance
        ),
    );
    let (h0, h1) = (&n1000.cells[0], &n1000.cells[1]);
    let c3 = outcome(
        h1.freq_homogeneity < h0.freq_homogeneity,
        format!(
            "homogeneity {:.3} at gamma1=1.5 vs {:.3} at gamma1=0",
            h1.freq_homogeneity, h0.freq_homogeneity
        ),
    );
    [c1, c2, c3]
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

fn sup_error(n: usize, rep: usize) -> f64 {
    let dgp = DgpConfig::with_effects(0.0, 1.0);
    let s: Sample64 = replication_sample(&dgp, n, 0, rep).unwrap();
    let cfg = AnalysisConfig {
        draws: 100,
        ..AnalysisConfig::default()
    };
    let a = estimate(&s, &cfg).unwrap();
    a.qte
        .theta_grid
        .iter()
        .zip(&a.qte.tau)
        .filter(|(&t, _)| (0.2..=0.8).contains(&t))
        .map(|(&t, &tau)| (tau - true_qte(&dgp, t)).abs())
        .fold(0.0, f64::max)
}

fn criterion_consistency() -> Outcome {
    let small = median((0..20).map(|r| sup_error(1000, r)).collect());
    let large = median((0..20).map(|r| sup_error(4000, r)).collect());
    outcome(large < small, format!("median sup error {small:.3} at n=1000, {large:.3} at n=4000"))
}

fn criterion_exact_fit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..600).map(|i| -3.0 + 6.0 * (i as f64 + 0.5) / 600.0).collect();
    let mut worst = 0.0f64;
    for spec in KernelSpec::ALL {
        for _ in 0..50 {
            let h = rng.random_range(0.2..3.0);
            for side in [Side::Plus, Side::Minus] {
                let (a, b, c): (f64, f64, f64) =
                    (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                let resp: Vec<f64> = x.iter().map(|&v| a + b * v + c * v * v).collect();
                let fit = fit_one_sided(&x, &resp, side, h, spec, Degree::Quadratic).unwrap();
                worst = worst
                    .max((fit.level - a).abs())
                    .max((fit.slope - b).abs())
                    .max((fit.curvature - 2.0 * c).abs());
            }
        }
    }
    outcome(worst < 1e-8, format!("max coefficient error {worst:.2e} over 3 kernels x 50 bandwidths"))
}

fn criterion_kernel_constants() -> Outcome {
    let closed: KernelMoments<f64> = moment_matrices(KernelSpec::UNIFORM);
    let quad: KernelMoments<f64> = moment_matrices_quadrature(KernelSpec::UNIFORM);
    let gap = closed
        .gamma_plus
        .iter()
        .flatten()
        .zip(quad.gamma_plus.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mut min_eig = f64::INFINITY;
    for spec in KernelSpec::ALL {
        let m: KernelMoments<f64> = moment_matrices(spec);
        for g in [m.gamma_plus, m.gamma_minus] {
            let rows: Vec<Vec<f64>> = g.iter().map(|r| r.to_vec()).collect();
            min_eig = min_eig.min(symmetric_eigenvalues(&rows)[0]);
        }
    }
    outcome(
        gap < 1e-10 && min_eig > 0.0,
        format!("uniform closed form vs quadrature {gap:.1e}, smallest eigenvalue {min_eig:.2e}"),
    )
}

fn flatten(e: &EmpDraw<f64>) -> Vec<f64> {
    let mut v = Vec::new();
    for arm in 0..2 {
        for side in 0..2 {
            v.extend_from_slice(&e.nu1[arm][side]);
            v.push(e.nu2[arm][side]);
        }
    }
    v
}

fn criterion_bootstrap() -> Outcome {
    let s: Sample64 = replication_sample(&DgpConfig::with_effects(0.5, 0.5), 1500, 17, 0).unwrap();
    let a: Analysis64 = estimate(&s, &AnalysisConfig { draws: 100, ..AnalysisConfig::default() }).unwrap();
    let emp = |xi: &[f64]| emp_draw(&s, &a.first_stage, a.bandwidths.fx0, KernelSpec::TRIANGULAR, xi).unwrap();
    let xi_of = |e: &EmpDraw<f64>| xi_process(&a.cdfs[1], &a.cdfs[0], e, &a.densities, &a.qte);

    let zero = emp(&vec![0.0; s.len()]);
    let zero_ok = flatten(&zero).iter().all(|&v| v == 0.0)
        && Arm::BOTH
            .iter()
            .all(|&arm| (0..a.first_stage.y_grid.len()).all(|k| z_hat(&a.cdfs[arm.index()], &zero, k) == 0.0))
        && xi_of(&zero).iter().all(|&v| v == 0.0);

    let x1: Vec<f64> = multipliers(s.len(), 1, 0);
    let x2: Vec<f64> = multipliers(s.len(), 2, 0);
    let sum: Vec<f64> = x1.iter().zip(&x2).map(|(p, q)| p + q).collect();
    let (e1, e2, e12) = (emp(&x1), emp(&x2), emp(&sum));
    let mut lin = flatten(&e1)
        .iter()
        .zip(flatten(&e2))
        .zip(flatten(&e12))
        .map(|((p, q), r)| (p + q - r).abs())
        .fold(0.0, f64::max);
    let (z1, z2, z12) = (xi_of(&e1), xi_of(&e2), xi_of(&e12));
    for t in 0..z1.len() {
        lin = lin.max((z1[t] + z2[t] - z12[t]).abs() / (1.0 + z12[t].abs()));
    }

    let mid = a.first_stage.y_grid.len() / 2;
    let reps = 2000;
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(reps); 8];
    for b in 0..reps {
        let e = emp(&multipliers(s.len(), 7, b));
        for arm in 0..2 {
            for side in 0..2 {
                cols[4 * arm + 2 * side].push(e.nu1[arm][side][mid]);
                cols[4 * arm + 2 * side + 1].push(e.nu2[arm][side]);
            }
        }
    }
    let worst_mean = cols
        .iter()
        .map(|c| {
            let n = c.len() as f64;
            let m = c.iter().sum::<f64>() / n;
            let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            m.abs() / (sd / n.sqrt())
        })
        .fold(0.0, f64::max);
    outcome(
        zero_ok && lin < 1e-10 && worst_mean <= 3.0,
        format!("zero map {zero_ok}, linearity gap {lin:.1e}, worst |mean|/se {worst_mean:.2}"),
    )
}

fn criterion_rearrangement() -> Outcome {
    let mut runner = TestRunner::new(Config {
        failure_persistence: None,
        ..Config::with_cases(1000)
    });
    let strategy = proptest::collection::vec(-5.0f64..5.0, 0..60);
    let result = runner.run(&strategy, |v| {
        let r = rearrange(&v);
        proptest::prop_assert!(r.windows(2).all(|w| w[0] <= w[1]));
        proptest::prop_assert_eq!(rearrange(&r), r.clone());
        let mut a = v.clone();
        a.sort_by(f64::total_cmp);
        proptest::prop_assert_eq!(&a, &r);
        proptest::prop_assert_eq!(rearrange(&a), a);
        Ok(())
    });
    match result {
        Ok(()) => outcome(true, "1000 random vectors"),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn rkqte(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_rkqte"))
        .args(args)
        .env_remove("RKQTE_SEED")
        .output()
        .expect("spawn rkqte");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn write_sample(path: &Path, s: &Sample64) {
    let mut text = String::from("y,d,x\n");
    for i in 0..s.len() {
        text.push_str(&format!("{},{},{}\n", s.y[i], u8::from(s.d[i]), s.x[i]));
    }
    std::fs::write(path, text).unwrap();
}

fn criterion_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sample.csv");
    write_sample(&data, &replication_sample(&DgpConfig::with_effects(0.5, 0.5), 1200, 3, 0).unwrap());
    let data = data.to_str().unwrap();

    let est = |threads: &str| rkqte(&["--threads", threads, "estimate", data, "--seed", "11", "-B", "200"]);
    let sim = |threads: &str| {
        let json = dir.path().join(format!("sim{threads}.json"));
        let table = rkqte(&[
            "--threads", threads, "simulate", "--n", "400", "--beta1", "0,1.5", "--reps", "6", "-B", "100", "--seed",
            "5", "--json", json.to_str().unwrap(),
        ]);
        (table, std::fs::read(json).unwrap())
    };
    let e = [est("1"), est("1"), est("3")];
    let s = [sim("1"), sim("2"), sim("3")];
    let same_est = e.iter().all(|v| v == &e[0]);
    let same_sim = s.iter().all(|v| v == &s[0]);
    outcome(
        same_est && same_sim,
        format!("estimate identical {same_est}, simulate identical {same_sim} (1 to 3 threads)"),
    )
}

#[test]
fn acceptance() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let [c1, c2, c3] = criteria_coverage();
    results.push(("coverage under the null", c1));
    results.push(("power of the significance test", c2));
    results.push(("power of the homogeneity test", c3));
    results.push(("estimator consistency", criterion_consistency()));
    results.push(("exact polynomial fits", criterion_exact_fit()));
    results.push(("kernel constants", criterion_kernel_constants()));
    results.push(("bootstrap identities", criterion_bootstrap()));
    results.push(("rearrangement", criterion_rearrangement()));
    results.push(("determinism", criterion_determinism()));

    for (i, (name, o)) in results.iter().enumerate() {
        println!("{} criterion {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, (_, o))| !o.pass)
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
