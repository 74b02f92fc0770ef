//! The rho(z) solver (inverse of psi(1+.) - psi(1)), the MGF asymptotic
//! approximation E[exp(z D_n)] ~ C(z) n^rho(z), CLT parameters, and the
//! Fenchel-Legendre rate function governing Pr(D_n > x log n).

use serde::Serialize;
use std::sync::LazyLock;

use crate::specfun::{
    digamma_real, gamma_ratio, log_gamma_real, polygamma_real, psi_roots, EULER_GAMMA, ZETA2,
    ZETA3,
};
use crate::{Error, Result};

/// x0 = 1/zeta(2): the LLN location where the rate function vanishes.
pub fn x_zero() -> f64 {
    1.0 / ZETA2
}

/// x1 = 1/(zeta(2)-1): right edge of the strictly convex branch; beyond it
/// the rate function is exactly x - 1.
pub fn x_one() -> f64 {
    1.0 / (ZETA2 - 1.0)
}

/// sigma* = 1 + |s_1(psi(2))|, a contour abscissa valid for every z < 1.
pub fn sigma_star() -> f64 {
    static S: LazyLock<f64> =
        LazyLock::new(|| 1.0 - psi_roots(digamma_real(2.0), 1).roots[0].1);
    *S
}

/// The unique rho in (-1, 1) with psi(1+rho) - psi(1) = z, for z < 1.
pub fn rho(z: f64) -> Result<f64> {
    if z >= 1.0 {
        return Err(Error::Domain(format!("rho needs z < 1, got {z}")));
    }
    let f = |r: f64| digamma_real(1.0 + r) + EULER_GAMMA - z;
    let mut lo = -1.0 + 1e-14;
    let mut hi = 1.0;
    let mut r = (z / ZETA2).clamp(-0.95, 0.95);
    for _ in 0..100 {
        let fr = f(r);
        if fr.abs() <= 1e-12 {
            return Ok(r);
        }
        if fr < 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let step = fr / polygamma_real(1, 1.0 + r);
        let next = r - step;
        r = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(r)
}

/// Prefactor -z Gamma(-rho(z)) evaluated as (z/rho) Gamma(1-rho), with the
/// removable z = 0 limit psi'(1).
pub(crate) fn mgf_prefactor_numerator(z: f64, rho_z: f64) -> f64 {
    let z_over_rho = if rho_z.abs() < 1e-4 {
        // (psi(1+rho)-psi(1))/rho expanded at 0.
        ZETA2 + rho_z * (-2.0 * ZETA3) / 2.0 + rho_z * rho_z * polygamma_real(3, 1.0) / 6.0
    } else {
        z / rho_z
    };
    z_over_rho * log_gamma_real(1.0 - rho_z).exp()
}

/// Leading MGF approximation [-z Gamma(-rho)/psi'(1+rho)] Gamma(n)/Gamma(n-rho),
/// together with the exponent of its relative error.
pub fn mgf_approx(n: usize, z: f64) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::Domain(format!("mgf_approx needs n >= 2, got {n}")));
    }
    let r = rho(z)?;
    let value =
        mgf_prefactor_numerator(z, r) / polygamma_real(1, 1.0 + r) * gamma_ratio(n as u64, -r)?;
    let rel_error_order = -(sigma_star() + r).min(1.0);
    Ok((value, rel_error_order))
}

/// (mu, sigma^2) of the CLT for D_n/log n: mu = 1/zeta(2),
/// sigma^2 = 2 zeta(3)/zeta(2)^3. Cross-checked against finite differences
/// of rho at 0.
pub fn clt_params() -> (f64, f64) {
    let mu = 1.0 / ZETA2;
    let sigma2 = 2.0 * ZETA3 / (ZETA2 * ZETA2 * ZETA2);
    let h = 1e-4;
    let rp = (rho(h).unwrap() - rho(-h).unwrap()) / (2.0 * h);
    let rpp = (rho(h).unwrap() - 2.0 * rho(0.0).unwrap() + rho(-h).unwrap()) / (h * h);
    assert!((rp - mu).abs() <= 1e-6, "rho'(0) = {rp} vs mu = {mu}");
    assert!((rpp - sigma2).abs() <= 1e-6, "rho''(0) = {rpp} vs sigma2 = {sigma2}");
    (mu, sigma2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRegime {
    /// x <= x0: lower-tail exponent exact.
    LowerExact,
    /// x0 <= x < x1: upper-tail exponent exact.
    UpperExact,
    /// x >= x1: only an upper bound on the exponent.
    UpperBoundOnly,
}

/// Which tail statement of the large-deviation theorem applies at x.
pub fn tail_regime(x: f64) -> TailRegime {
    assert!(x > 0.0, "tail_regime needs x > 0");
    if x <= x_zero() {
        TailRegime::LowerExact
    } else if x < x_one() {
        TailRegime::UpperExact
    } else {
        TailRegime::UpperBoundOnly
    }
}

/// One evaluation of the rate function Lambda*.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateFunctionSample {
    pub x: f64,
    /// Argmax of xz - rho(z); equals 1 for x >= x1, tends to -1 as x -> 0.
    pub rho_hat: f64,
    pub lambda_star: f64,
    /// d Lambda*/dx = psi(1 + rho_hat) - psi(1).
    pub derivative: f64,
}

/// Lambda*(x) = sup_z (xz - rho(z)): solved through psi'(1+rho_hat) = 1/x on
/// the convex branch, linear x - 1 beyond x1, +infinity for x < 0, and 1 at
/// x = 0.
pub fn rate_function(x: f64) -> RateFunctionSample {
    if x < 0.0 {
        return RateFunctionSample {
            x,
            rho_hat: 1.0,
            lambda_star: f64::INFINITY,
            derivative: 1.0,
        };
    }
    if x == 0.0 {
        return RateFunctionSample {
            x,
            rho_hat: -1.0,
            lambda_star: 1.0,
            derivative: f64::NEG_INFINITY,
        };
    }
    if x >= x_one() {
        // psi(2) - psi(1) = 1, so lambda_star = x - 1 exactly.
        return RateFunctionSample {
            x,
            rho_hat: 1.0,
            lambda_star: x - 1.0,
            derivative: 1.0,
        };
    }
    let rho_hat = solve_rho_hat(x);
    let derivative = digamma_real(1.0 + rho_hat) + EULER_GAMMA;
    RateFunctionSample {
        x,
        rho_hat,
        lambda_star: x * derivative - rho_hat,
        derivative,
    }
}

/// Solves psi'(1 + r) = 1/x for r in (-1, 1]; psi' is strictly decreasing.
fn solve_rho_hat(x: f64) -> f64 {
    let target = 1.0 / x;
    let g = |r: f64| polygamma_real(1, 1.0 + r) - target;
    let mut lo = -1.0 + 1e-14; // g > 0 here
    let mut hi = 1.0; // g <= 0 here since x <= x1
    let mut r = 0.0;
    for _ in 0..100 {
        let gr = g(r);
        if gr.abs() <= 1e-13 * target.max(1.0) {
            return r;
        }
        if gr > 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let step = gr / polygamma_real(2, 1.0 + r);
        let next = r - step;
        r = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    r
}
