//! Truth oracles for the simulation design, coded from the conditional
//! normal algebra with numerical integration. Nothing here calls the
//! library's own closed forms.
#![allow(dead_code)]

use rkqte::DgpConfig;
use statrs::distribution::{ContinuousCDF, Normal};

fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn big_phi(z: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(z)
}

/// Law of (U, V) given X = x: means, variances and covariance.
fn uv_given_x(c: &DgpConfig, x: f64) -> (f64, f64, f64, f64, f64) {
    let sxx = c.sigma_x * c.sigma_x;
    let sxu = c.rho_xu * c.sigma_x * c.sigma_u;
    let sxv = c.rho_xv * c.sigma_x * c.sigma_v;
    let suv = c.rho_uv * c.sigma_u * c.sigma_v;
    let mu = sxu / sxx * x;
    let mv = sxv / sxx * x;
    let vu = c.sigma_u * c.sigma_u - sxu * sxu / sxx;
    let vv = c.sigma_v * c.sigma_v - sxv * sxv / sxx;
    let cuv = suv - sxu * sxv / sxx;
    (mu, mv, vu, vv, cuv)
}

fn threshold(x: f64) -> f64 {
    let on = if x >= 0.0 { 1.0 } else { 0.0 };
    2.0 * on * x - x - 1.0
}

/// P(D = 1 | X = x).
pub fn p_treated(c: &DgpConfig, x: f64) -> f64 {
    let (_, mv, _, vv, _) = uv_given_x(c, x);
    big_phi((threshold(x) - mv) / vv.sqrt())
}

/// μ₁(x, y, d) = P(Y ≤ y, D = d | X = x) by midpoint quadrature over V.
pub fn mu1(c: &DgpConfig, x: f64, y: f64, treated: bool) -> f64 {
    let (mu, mv, vu, vv, cuv) = uv_given_x(c, x);
    let scale = if treated { c.gamma0 + c.gamma1 } else { c.gamma0 };
    let shift = c.alpha0 + c.alpha1 * x + c.alpha2 * x * x + if treated { c.beta1 } else { 0.0 };
    let ustar = (y - shift) / scale;
    let sv = vv.sqrt();
    let sc = (vu - cuv * cuv / vv).sqrt();
    let thr = threshold(x);
    let (lo, hi) = if treated { (mv - 9.0 * sv, thr) } else { (thr, mv + 9.0 * sv) };
    if hi <= lo {
        return 0.0;
    }
    let m = 6000;
    let dv = (hi - lo) / m as f64;
    (0..m)
        .map(|i| {
            let v = lo + (i as f64 + 0.5) * dv;
            phi((v - mv) / sv) / sv * big_phi((ustar - mu - cuv / vv * (v - mv)) / sc) * dv
        })
        .sum()
}

fn one_sided_slope(f: impl Fn(f64) -> f64, plus: bool) -> f64 {
    // second-order one-sided difference
    let e = 1e-4;
    let s = if plus { 1.0 } else { -1.0 };
    let (x1, x2) = (s * e, s * 2.0 * e);
    let (f0, f1, f2) = (f(s * 1e-12), f(x1), f(x2));
    s * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * e)
}

/// Slope kink of μ₁ at zero.
pub fn mu1_kink(c: &DgpConfig, y: f64, treated: bool) -> f64 {
    one_sided_slope(|x| mu1(c, x, y, treated), true) - one_sided_slope(|x| mu1(c, x, y, treated), false)
}

/// Slope kink of P(D = d | X = x) at zero.
pub fn treatment_kink(c: &DgpConfig, treated: bool) -> f64 {
    let p = |x: f64| {
        let q = p_treated(c, x);
        if treated {
            q
        } else {
            1.0 - q
        }
    };
    one_sided_slope(p, true) - one_sided_slope(p, false)
}

/// Complier CDF as the ratio of kinks.
pub fn complier_cdf(c: &DgpConfig, y: f64, treated: bool) -> f64 {
    mu1_kink(c, y, treated) / treatment_kink(c, treated)
}

/// Complier density by central difference of the kink ratio.
pub fn complier_density(c: &DgpConfig, y: f64, treated: bool) -> f64 {
    let e = 1e-3;
    (complier_cdf(c, y + e, treated) - complier_cdf(c, y - e, treated)) / (2.0 * e)
}
