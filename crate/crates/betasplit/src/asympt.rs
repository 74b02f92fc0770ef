//! Asymptotic expansions for E[D_n], E[L_n], E[Lambda_n], higher moments of
//! D_n, and the occupation-probability limit, with coefficients produced by a
//! truncated-Laurent-series residue engine.
//!
//! The expansions come from shifting a vertical contour across the poles of
//! Gamma(s) (Gamma(n)/Gamma(n+s)) (psi(1-s) - psi(1))^(-k): the pole at s = 0
//! contributes the log-degree terms, and each root s_i of psi(s) = psi(1) on
//! the negative axis contributes a term of order n^(-1-|s_i|).

use num_complex::Complex64;
use serde::Serialize;
use std::sync::LazyLock;

use crate::specfun::{
    gamma_ratio, harmonic, log_gamma_real, polygamma_real, psi_roots, EULER_GAMMA, RootTable,
    ZETA2, ZETA3, ZETAS,
};
use crate::{Error, Result};

/// Number of negative-axis poles kept by default; the first omitted term is
/// then of order n^(-1-|s_3|), about n^-3.6, negligible at double precision
/// for n >= 100.
pub const DEFAULT_POLE_COUNT: usize = 2;

/// An expansion value together with its individual terms and the order of the
/// first omitted term.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticValue {
    pub value: f64,
    pub terms: Vec<(String, f64)>,
    pub pole_count: usize,
    /// Exponent of the first omitted order, e.g. -(1 + |s_{N+1}|).
    pub error_order: f64,
}

impl AsymptoticValue {
    fn from_terms(terms: Vec<(String, f64)>, pole_count: usize, error_order: f64) -> Self {
        let value = terms.iter().map(|(_, v)| v).sum();
        AsymptoticValue {
            value,
            terms,
            pole_count,
            error_order,
        }
    }
}

/// Finitely many Laurent coefficients around a point, for exponents
/// lowest_exponent..lowest_exponent+len.
#[derive(Debug, Clone)]
pub struct TruncatedLaurentSeries {
    pub lowest_exponent: i32,
    pub coefficients: Vec<Complex64>,
}

impl TruncatedLaurentSeries {
    pub fn new(lowest_exponent: i32, coefficients: Vec<Complex64>) -> Self {
        TruncatedLaurentSeries {
            lowest_exponent,
            coefficients,
        }
    }

    pub fn from_real(lowest_exponent: i32, coeffs: &[f64]) -> Self {
        Self::new(
            lowest_exponent,
            coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Product truncated to `len` coefficients from the combined lowest
    /// exponent.
    pub fn mul(&self, other: &Self, len: usize) -> Self {
        let lowest = self.lowest_exponent + other.lowest_exponent;
        let mut c = vec![Complex64::new(0.0, 0.0); len];
        for (i, &a) in self.coefficients.iter().enumerate() {
            if i >= len {
                break;
            }
            for (j, &b) in other.coefficients.iter().enumerate() {
                if i + j >= len {
                    break;
                }
                c[i + j] += a * b;
            }
        }
        Self::new(lowest, c)
    }

    /// Multiplicative inverse truncated to `len` coefficients; the leading
    /// coefficient must be nonzero.
    pub fn reciprocal(&self, len: usize) -> Result<Self> {
        let v0 = self.coefficients[0];
        if v0.norm() == 0.0 {
            return Err(Error::SeriesTruncation {
                residual: f64::INFINITY,
                tol: 1e-10,
            });
        }
        let mut c = vec![Complex64::new(0.0, 0.0); len];
        c[0] = v0.inv();
        for m in 1..len {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 1..=m {
                let vj = self
                    .coefficients
                    .get(j)
                    .copied()
                    .unwrap_or(Complex64::new(0.0, 0.0));
                s += vj * c[m - j];
            }
            c[m] = -s / v0;
        }
        Ok(Self::new(-self.lowest_exponent, c))
    }

    pub fn pow(&self, k: usize, len: usize) -> Self {
        let mut acc = Self::from_real(0, &[1.0]);
        for _ in 0..k {
            acc = acc.mul(self, len);
        }
        acc
    }

    /// Coefficient of exponent -1 (zero if outside the stored window).
    pub fn residue(&self) -> Complex64 {
        let idx = -1 - self.lowest_exponent;
        if idx < 0 {
            return Complex64::new(0.0, 0.0);
        }
        self.coefficients
            .get(idx as usize)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Largest residual coefficient of self * reciprocal(self) - 1; the
    /// truncation health check used by the residue engine.
    pub fn reciprocal_residual(&self, inv: &Self, len: usize) -> f64 {
        let p = self.mul(inv, len);
        let mut worst: f64 = 0.0;
        for (i, &c) in p.coefficients.iter().enumerate() {
            let expect = if i as i32 + p.lowest_exponent == 0 { 1.0 } else { 0.0 };
            worst = worst.max((c - expect).norm());
        }
        worst
    }
}

/// exp of a Taylor series with zero constant term, truncated to `len`.
pub(crate) fn exp_series(a: &[f64], len: usize) -> Vec<f64> {
    debug_assert!(a.is_empty() || a[0] == 0.0);
    let mut b = vec![0.0; len];
    b[0] = 1.0;
    for m in 1..len {
        let mut s = 0.0;
        for j in 1..=m {
            let aj = if j < a.len() { a[j] } else { 0.0 };
            s += j as f64 * aj * b[m - j];
        }
        b[m] = s / m as f64;
    }
    b
}

static PSI1_ROOTS: LazyLock<RootTable> = LazyLock::new(|| psi_roots(-EULER_GAMMA, 8));

/// Cached roots of psi(s) = psi(1); eight of them, enough for every expansion
/// order supported here.
pub fn standard_roots() -> &'static RootTable {
    &PSI1_ROOTS
}

const RESIDUAL_TOL: f64 = 1e-10;

/// k! times the residue of Gamma(s) (Gamma(n)/Gamma(n+s))
/// (psi(1-s)-psi(1))^(-k) at s = 0 (pole_index 0) or s = 1 + |s_i|
/// (pole_index i >= 1), via truncated Laurent arithmetic.
pub fn moment_residue(k: usize, pole_index: usize, n: usize) -> Result<f64> {
    if !(1..=6).contains(&k) || n < 2 {
        return Err(Error::Domain(format!(
            "moment_residue needs 1 <= k <= 6 and n >= 2, got k = {k}, n = {n}"
        )));
    }
    let roots = standard_roots();
    let len = k + 3;

    // Pole location p and the point 1 - p where psi(1-s) is expanded.
    let (p, at) = if pole_index == 0 {
        (0.0, 1.0)
    } else {
        let s_i = roots.root(pole_index)?;
        (1.0 - s_i, s_i)
    };

    // u(eps) = psi(1 - p - eps) - psi(1); u(0) = 0 by definition of the pole,
    // forced exactly so the root tolerance does not leak into the inversion.
    let mut u = vec![0.0; len + 1];
    for m in 1..=len {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        u[m] = sign * polygamma_real(m, at) / crate::asympt::factorial(m);
    }
    // v = u / eps, invert, raise to k: u^-k = eps^-k v^-k.
    let v = TruncatedLaurentSeries::from_real(0, &u[1..]);
    let v_inv = v.reciprocal(len)?;
    let residual = v.reciprocal_residual(&v_inv, len);
    if !(residual <= RESIDUAL_TOL) {
        return Err(Error::SeriesTruncation {
            residual,
            tol: RESIDUAL_TOL,
        });
    }
    let mut u_pow = v_inv.pow(k, len);
    u_pow.lowest_exponent -= k as i32;

    // Gamma(p + eps).
    let gamma_series = if pole_index == 0 {
        // Gamma(eps) = eps^-1 exp(-gamma eps + sum_{j>=2} (-1)^j zeta(j) eps^j / j).
        let mut g = vec![0.0; len + 1];
        g[1] = -EULER_GAMMA;
        for j in 2..=len {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            g[j] = sign * ZETAS[j - 2] / j as f64;
        }
        TruncatedLaurentSeries::from_real(-1, &exp_series(&g, len))
    } else {
        let mut g = vec![0.0; len + 1];
        for j in 1..=len {
            g[j] = polygamma_real(j - 1, p) / factorial(j);
        }
        let mut coeffs = exp_series(&g, len);
        let g0 = log_gamma_real(p).exp();
        for c in coeffs.iter_mut() {
            *c *= g0;
        }
        TruncatedLaurentSeries::from_real(0, &coeffs)
    };

    // Gamma(n)/Gamma(n + p + eps) = gamma_ratio(n, p) exp(-sum psi^(j-1)(n+p) eps^j/j!).
    let np = n as f64 + p;
    let mut r = vec![0.0; len + 1];
    for j in 1..=len {
        r[j] = -polygamma_real(j - 1, np) / factorial(j);
    }
    let mut r_coeffs = exp_series(&r, len);
    let r0 = crate::specfun::log_gamma_ratio(n as f64, p).exp();
    for c in r_coeffs.iter_mut() {
        *c *= r0;
    }
    let ratio_series = TruncatedLaurentSeries::from_real(0, &r_coeffs);

    let product = gamma_series.mul(&ratio_series, len).mul(&u_pow, len);
    let res = product.residue();
    debug_assert!(res.im.abs() <= 1e-12 * res.re.abs().max(1.0));
    Ok(factorial(k) * res.re)
}

pub(crate) fn factorial(n: usize) -> f64 {
    let mut f = 1.0;
    for i in 2..=n {
        f *= i as f64;
    }
    f
}

fn pole_term_ed(n: usize, s_i: f64) -> Result<f64> {
    // -Gamma(|s_i|+1)/psi'(s_i) * Gamma(n)/Gamma(n+|s_i|+1).
    let a = s_i.abs();
    Ok(-log_gamma_real(a + 1.0).exp() / polygamma_real(1, s_i) * gamma_ratio(n as u64, a + 1.0)?)
}

/// E[D_n] expansion: h_{n-1}/zeta(2) + zeta(3)/zeta(2)^2 plus N pole terms of
/// order n^(-1-|s_i|).
pub fn ed_expansion(n: usize, pole_count: usize, roots: &RootTable) -> Result<AsymptoticValue> {
    if n < 2 {
        return Err(Error::Domain(format!("ed_expansion needs n >= 2, got {n}")));
    }
    roots.require(pole_count + 1)?;
    let h = harmonic(n as u64 - 1);
    let mut terms = vec![
        ("main".to_string(), h / ZETA2),
        ("const".to_string(), ZETA3 / (ZETA2 * ZETA2)),
    ];
    for i in 1..=pole_count {
        terms.push((format!("pole{i}"), pole_term_ed(n, roots.root(i)?)?));
    }
    let error_order = -(1.0 + roots.root(pole_count + 1)?.abs());
    Ok(AsymptoticValue::from_terms(terms, pole_count, error_order))
}

/// E[L_n] expansion: h^2/(2 zeta(2)) + (zeta(3)/zeta(2)^2) h
/// + zeta(3)^2/zeta(2)^3 + 1/10 - psi'(n)/(2 zeta(2)) plus pole terms.
pub fn el_expansion(n: usize, pole_count: usize, roots: &RootTable) -> Result<AsymptoticValue> {
    if n < 2 {
        return Err(Error::Domain(format!("el_expansion needs n >= 2, got {n}")));
    }
    roots.require(pole_count + 1)?;
    let h = harmonic(n as u64 - 1);
    let z22 = ZETA2 * ZETA2;
    let mut terms = vec![
        ("main".to_string(), h * h / (2.0 * ZETA2)),
        ("hterm".to_string(), ZETA3 / z22 * h),
        ("const".to_string(), ZETA3 * ZETA3 / (z22 * ZETA2) + 0.1),
        ("psi_n".to_string(), -polygamma_real(1, n as f64) / (2.0 * ZETA2)),
    ];
    for i in 1..=pole_count {
        let s_i = roots.root(i)?;
        let a = s_i.abs();
        let t = log_gamma_real(a + 1.0).exp() / ((a + 1.0) * polygamma_real(1, s_i))
            * gamma_ratio(n as u64, a + 1.0)?;
        terms.push((format!("pole{i}"), t));
    }
    let error_order = -(1.0 + roots.root(pole_count + 1)?.abs());
    Ok(AsymptoticValue::from_terms(terms, pole_count, error_order))
}

/// E[Lambda_n] expansion: (6/pi^2) n minus pole terms of order n^(-|s_i|).
pub fn length_expansion(n: usize, pole_count: usize, roots: &RootTable) -> Result<AsymptoticValue> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "length_expansion needs n >= 2, got {n}"
        )));
    }
    roots.require(pole_count + 1)?;
    let mut terms = vec![("main".to_string(), n as f64 / ZETA2)];
    for i in 1..=pole_count {
        let s_i = roots.root(i)?;
        let a = s_i.abs();
        // Gamma(n+1)/Gamma(n+a+1) = n * Gamma(n)/Gamma(n+1+a).
        let ratio = n as f64 * gamma_ratio(n as u64, a + 1.0)?;
        let t = -log_gamma_real(a + 2.0).exp() / (a * polygamma_real(1, s_i)) * ratio;
        terms.push((format!("pole{i}"), t));
    }
    let error_order = -roots.root(pole_count + 1)?.abs();
    Ok(AsymptoticValue::from_terms(terms, pole_count, error_order))
}

/// E[D_n^k] expansion as the sum of residues at s = 0 and the first N
/// negative-axis poles.
pub fn moment_expansion(k: usize, n: usize, pole_count: usize) -> Result<AsymptoticValue> {
    let roots = standard_roots();
    roots.require(pole_count + 1)?;
    let mut terms = Vec::with_capacity(pole_count + 1);
    for i in 0..=pole_count {
        terms.push((format!("pole{i}"), moment_residue(k, i, n)?));
    }
    let error_order = -(1.0 + roots.root(pole_count + 1)?.abs());
    Ok(AsymptoticValue::from_terms(terms, pole_count, error_order))
}

/// Leading variance approximation
/// (2 zeta(3)/zeta(2)^3) h_{n-1} + 5 zeta(3)^2/zeta(2)^4 - 18/(5 pi^2);
/// error O(log n / n).
pub fn var_d_approx(n: usize) -> f64 {
    let h = harmonic(n as u64 - 1);
    let z2 = ZETA2;
    let z3 = ZETA3;
    2.0 * z3 / (z2 * z2 * z2) * h + 5.0 * z3 * z3 / (z2 * z2 * z2 * z2)
        - 18.0 / (5.0 * std::f64::consts::PI * std::f64::consts::PI)
}

/// Limit of a(n,j) as n grows: (6/pi^2) h_{j-1}/(j-1); approached at rate
/// n^(-1-|s_1|).
pub fn a_limit(j: usize) -> f64 {
    assert!(j >= 2);
    harmonic(j as u64 - 1) / (ZETA2 * (j - 1) as f64)
}
