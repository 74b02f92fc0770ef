//! Closed-form Mellin transforms, the density expansion of the limit measure,
//! and numerical vertical-line (Parseval) integral evaluators that serve as an
//! oracle independent of both the exact recurrences and the asymptotic
//! expansions.
//!
//! The integrands decay only like |tau|^-2 times log powers along a vertical
//! line, so the quadrature splits the line into [0, T] (adaptive Gauss-Kronrod
//! panels; the integrand oscillates with frequency log n from the factor
//! Gamma(n)/Gamma(n+s) ~ n^-s) and a tail handled by the substitution
//! tau = T e^w, under which the integrand decays like e^-w and, for T >= 5n,
//! has essentially stopped oscillating (the phase of the gamma ratio is within
//! O(n/10) of its limit). The leftover beyond the substituted range is bounded
//! by the calibrated |s|^-2 envelope and reported inside `est_error`.

use num_complex::Complex64;
use serde::Serialize;

use crate::asympt::exp_series;
use crate::mgf_ldp::{rho, sigma_star};
use crate::specfun::{
    digamma, harmonic, log_gamma, log_gamma_diff, log_gamma_real, polygamma_real, psi_roots,
    RootTable, EULER_GAMMA, ZETA2, ZETAS,
};
use crate::{Error, Result};

/// Parameters of a vertical-line quadrature.
#[derive(Debug, Clone, Serialize)]
pub struct ContourSpec {
    /// Abscissa Re s of the line.
    pub sigma: f64,
    /// End of the directly integrated segment [0, T]; the tail beyond is
    /// integrated in log-substituted form.
    pub tail_cutoff: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for ContourSpec {
    fn default() -> Self {
        ContourSpec {
            sigma: -0.5,
            tail_cutoff: 1e4,
            abs_tol: 1e-9,
            max_panels: 200_000,
        }
    }
}

impl ContourSpec {
    pub fn with_sigma(sigma: f64) -> Self {
        ContourSpec {
            sigma,
            ..Default::default()
        }
    }

    /// Default contour for the MGF line integral: sigma* ~ 1.457, valid for
    /// every z < 1.
    pub fn mgf_default() -> Self {
        ContourSpec {
            sigma: sigma_star(),
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tail_cutoff >= 10.0) {
            return Err(Error::Domain(format!(
                "tail_cutoff must be >= 10, got {}",
                self.tail_cutoff
            )));
        }
        if !(1e-12..=1e-4).contains(&self.abs_tol) {
            return Err(Error::Domain(format!(
                "abs_tol must lie in [1e-12, 1e-4], got {}",
                self.abs_tol
            )));
        }
        Ok(())
    }
}

const POLE_MARGIN: f64 = 1e-3;
/// Radius inside which removable singularities switch to local Taylor data;
/// direct evaluation loses about six digits inside it.
const SERIES_RADIUS: f64 = 1e-3;

/// k! (psi(s) - psi(1))^(-k): the Mellin transform of the k-th power layer of
/// the limit measure, by meromorphic continuation.
pub fn mellin_u(s: Complex64, k: usize) -> Result<Complex64> {
    if k < 1 {
        return Err(Error::Domain(format!("mellin_u needs k >= 1, got {k}")));
    }
    let w = digamma(s)? + EULER_GAMMA;
    if w.norm() < 1e-8 {
        return Err(Error::PoleArgument(format!(
            "mellin_u pole: psi(s) = psi(1) at s = {s}"
        )));
    }
    Ok(w.powi(-(k as i32)) * crate::asympt::factorial(k))
}

fn check_halfplane(s: Complex64) -> Result<()> {
    if s.re <= -1.0 {
        return Err(Error::Domain(format!(
            "transform defined for Re s > -1, got {s}"
        )));
    }
    Ok(())
}

/// Taylor coefficients of e^A - 1 where
/// A(s) = log Gamma(1+s) + log Gamma(n) - log Gamma(n+s); used by the
/// removable-singularity paths at s = 0.
fn efn_coeffs(n: usize) -> Vec<f64> {
    let len = 8;
    let mut a = vec![0.0; len];
    a[1] = -harmonic(n as u64 - 1);
    for j in 2..len {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        a[j] = sign * ZETAS[j - 2] / j as f64
            - polygamma_real(j - 1, n as f64) / crate::asympt::factorial(j);
    }
    let mut e = exp_series(&a, len);
    e[0] = 0.0;
    e
}

/// Mellin transform of f_n(x) = 1 - (1-x)^(n-1):
/// (1/s)(1 - Gamma(s+1) Gamma(n)/Gamma(n+s)), with cancellation-safe Taylor
/// data near the removable singularity at s = 0 (value h_{n-1} there).
pub fn mellin_fn(s: Complex64, n: usize) -> Result<Complex64> {
    check_halfplane(s)?;
    assert!(n >= 1);
    if s.norm() < SERIES_RADIUS {
        let e = efn_coeffs(n);
        // Mfn = -sum_{j>=1} e_j s^(j-1).
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in e.iter().skip(1).rev() {
            acc = acc * s + c;
        }
        return Ok(-acc);
    }
    let a = log_gamma(s + 1.0)? + log_gamma_real(n as f64)
        - log_gamma(s + n as f64)?;
    Ok((1.0 - a.exp()) / s)
}

/// Mellin transform of H_n: (h_{n-1} - Mfn(s))/s, with the second-order
/// Taylor data at the removable singularity s = 0.
pub fn mellin_hn(s: Complex64, n: usize) -> Result<Complex64> {
    check_halfplane(s)?;
    if s.norm() < SERIES_RADIUS {
        let e = efn_coeffs(n);
        // (h - Mfn)/s = sum_{j>=2} e_j s^(j-2).
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in e.iter().skip(2).rev() {
            acc = acc * s + c;
        }
        return Ok(acc);
    }
    Ok((harmonic(n as u64 - 1) - mellin_fn(s, n)?) / s)
}

/// Mellin transform of lambda_n(x) = (1-(1-x)^n - nx(1-x)^(n-1))/x:
/// (1/(s-1))(1 - Gamma(s+1) Gamma(n+1)/Gamma(n+s)), with Taylor data at the
/// removable singularity s = 1 (value h_n - 1 there).
pub fn mellin_lambda(s: Complex64, n: usize) -> Result<Complex64> {
    check_halfplane(s)?;
    assert!(n >= 2);
    let eps = s - 1.0;
    if eps.norm() < SERIES_RADIUS {
        // exponent B(1+eps) = sum_j b_j eps^j with
        // b_j = (psi^(j-1)(2) - psi^(j-1)(n+1))/j!.
        let len = 8;
        let mut b = vec![0.0; len];
        for j in 1..len {
            b[j] = (polygamma_real(j - 1, 2.0) - polygamma_real(j - 1, n as f64 + 1.0))
                / crate::asympt::factorial(j);
        }
        let e = exp_series(&b, len);
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in e.iter().skip(1).rev() {
            acc = acc * eps + c;
        }
        return Ok(-acc);
    }
    let a = log_gamma(s + 1.0)? + log_gamma_real(n as f64 + 1.0)
        - log_gamma(s + n as f64)?;
    Ok((1.0 - a.exp()) / eps)
}

/// The truncated density expansion of the limit measure on (0, 1/2).
#[derive(Debug, Clone, Serialize)]
pub struct DensityExpansion {
    pub pole_count: usize,
    /// Coefficient of the 1/x leading term: 6/pi^2.
    pub main_coeff: f64,
    /// (|s_i|, 1/psi'(s_i)) per retained pole, exponents increasing.
    pub pole_terms: Vec<(f64, f64)>,
    /// Exponent |s_{N+1}| of the remainder bound.
    pub remainder_order: f64,
}

pub fn density_expansion(pole_count: usize, roots: &RootTable) -> Result<DensityExpansion> {
    roots.require(pole_count + 1)?;
    let mut pole_terms = Vec::with_capacity(pole_count);
    for i in 1..=pole_count {
        let s_i = roots.root(i)?;
        pole_terms.push((s_i.abs(), 1.0 / polygamma_real(1, s_i)));
    }
    Ok(DensityExpansion {
        pole_count,
        main_coeff: 1.0 / ZETA2,
        pole_terms,
        remainder_order: roots.root(pole_count + 1)?.abs(),
    })
}

/// Density of the limit measure at x in (0, 1/2):
/// (6/pi^2)/x + sum_i x^|s_i|/psi'(s_i), plus a remainder of order
/// x^|s_{N+1}|. Returns (value, remainder_bound_order). The simplified
/// remainder bound fails near x = 1, hence the domain cut at 1/2.
pub fn density_u(x: f64, pole_count: usize, roots: &RootTable) -> Result<(f64, f64)> {
    if !(x > 0.0 && x < 0.5) {
        return Err(Error::Domain(format!(
            "density_u defined on (0, 1/2), got {x}"
        )));
    }
    let exp = density_expansion(pole_count, roots)?;
    let mut v = exp.main_coeff / x;
    for &(a, c) in &exp.pole_terms {
        v += c * x.powf(a);
    }
    Ok((v, exp.remainder_order))
}

// ---------------------------------------------------------------------------
// Gauss-Kronrod 15 adaptive quadrature.

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;
    let mut resabs = WGK[7] * fc.abs();
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(mid - dx);
        let f2 = f(mid + dx);
        let sum = f1 + f2;
        resk += WGK[j] * sum;
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * sum;
        }
    }
    let value = resk * half;
    let raw = ((resk - resg) * half).abs();
    // QUADPACK-style rescale: the raw K-G difference usually overestimates
    // sharply once the panel resolves the integrand.
    let resasc = (resabs * half.abs()).max(1e-300);
    let err = if raw == 0.0 {
        0.0
    } else {
        resasc * 1.0_f64.min((200.0 * raw / resasc).powf(1.5))
    };
    (value, err.max(raw * 1e-3))
}

/// Deterministic stack-based adaptive quadrature with per-length error
/// budget; errors if the panel budget is exhausted before reaching tol.
fn adaptive_quad(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    max_panels: usize,
) -> Result<(f64, f64, usize)> {
    let total_len = b - a;
    let mut stack = vec![(a, b)];
    let mut sum = 0.0;
    let mut err_sum = 0.0;
    let mut panels = 0usize;
    while let Some((lo, hi)) = stack.pop() {
        panels += 1;
        if panels > max_panels {
            return Err(Error::Nonconvergence(format!(
                "exceeded {max_panels} panels on [{a}, {b}]"
            )));
        }
        let (v, e) = gk15(f, lo, hi);
        let len = hi - lo;
        if e <= tol * len / total_len || len <= 1e-12 * total_len {
            sum += v;
            err_sum += e;
        } else {
            let mid = 0.5 * (lo + hi);
            // push right first so the left half is processed next: panel
            // results accumulate in ascending order, deterministically.
            stack.push((mid, hi));
            stack.push((lo, mid));
        }
    }
    Ok((sum, err_sum, panels))
}

// ---------------------------------------------------------------------------
// Vertical-line expectation integrals.

/// Which expectation the vertical-line integral evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    Ed,
    El,
    ELambda,
    MomentK,
}

/// Result of one contour evaluation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LineEval {
    pub value: f64,
    /// Accumulated panel error estimates plus the envelope bound for the
    /// un-integrated far tail.
    pub est_error: f64,
    pub panels: usize,
}

struct Integrand {
    kind: LineKind,
    k: i32,
    n_f: f64,
    lg_n: f64,
    /// Shift of the MGF denominator; 0 for the expectation kinds.
    z: f64,
    mgf: bool,
}

impl Integrand {
    fn eval(&self, s: Complex64) -> Complex64 {
        // The contours keep s and n+s off the poles of Gamma and 1-s inside
        // Re in (1, 2), away from the poles of psi.
        let denom_base = digamma(1.0 - s).expect("contour keeps 1-s off poles") + EULER_GAMMA
            - self.z;
        if self.mgf {
            let p = (log_gamma_diff(s, self.n_f).unwrap() + self.lg_n).exp();
            return p / denom_base;
        }
        match self.kind {
            LineKind::Ed | LineKind::MomentK => {
                let p = (log_gamma_diff(s, self.n_f).unwrap() + self.lg_n).exp();
                p / denom_base.powi(self.k)
            }
            LineKind::El => {
                let p = (log_gamma_diff(s, self.n_f).unwrap() + self.lg_n).exp();
                p / (denom_base * s)
            }
            LineKind::ELambda => {
                // Gamma(s+1)/Gamma(s+n) = Gamma(s+1)/Gamma((s+1) + (n-1)).
                let p = (log_gamma_diff(s + 1.0, self.n_f - 1.0).unwrap() + self.lg_n).exp();
                p / (denom_base * (s - 1.0))
            }
        }
    }
}

/// Integrates Re G(sigma + i tau) over tau in [0, inf): directly on [0, T],
/// then with tau = T e^w on the tail. Returns (integral, err, panels,
/// far-tail envelope bound).
fn integrate_line(
    g: &Integrand,
    sigma: f64,
    spec: &ContourSpec,
    n: usize,
    tol: f64,
) -> Result<(f64, f64, usize, f64)> {
    let t_eff = spec.tail_cutoff.max(5.0 * n as f64);
    let mut f_vert = |tau: f64| g.eval(Complex64::new(sigma, tau)).re;
    // The integrand concentrates in tau = O(10) while the segment extends to
    // t_eff >= 1e4; a single initial panel would sample right past the mass
    // and accept a spuriously tiny answer, so seed the subdivision with
    // geometrically growing segments.
    let mut edges = vec![0.0];
    let mut hi = 10.0f64;
    while hi < t_eff {
        edges.push(hi);
        hi *= 10.0;
    }
    edges.push(t_eff);
    let seg_tol = 0.5 * tol / (edges.len() - 1) as f64;
    let (mut v1, mut e1, mut p1) = (0.0, 0.0, 0usize);
    for pair in edges.windows(2) {
        let (v, e, p) = adaptive_quad(&mut f_vert, pair[0], pair[1], seg_tol, spec.max_panels)?;
        v1 += v;
        e1 += e;
        p1 += p;
    }
    const W_END: f64 = 34.0;
    let mut f_tail = |w: f64| {
        let tau = t_eff * w.exp();
        g.eval(Complex64::new(sigma, tau)).re * tau
    };
    let (v2, e2, p2) = adaptive_quad(&mut f_tail, 0.0, W_END, 0.5 * tol, spec.max_panels)?;
    // |G| <= C |s|^-2 / log|s| empirically; bound the discarded tail beyond
    // T e^W by C/(tau_end log tau_end).
    let tau_end = t_eff * W_END.exp();
    let g_end = g.eval(Complex64::new(sigma, tau_end)).norm();
    let c_env = g_end * tau_end * tau_end * tau_end.ln();
    let far_bound = c_env / (tau_end * tau_end.ln());
    Ok((v1 + v2, e1 + e2, p1 + p2, far_bound))
}

/// Vertical-line Parseval integral for E[D_n] (kind Ed), E[L_n] (El),
/// E[Lambda_n] (ELambda) or E[D_n^k] (MomentK, k >= 1); sigma must lie in
/// (-1, 0) away from the integrand poles.
pub fn line_expectation(kind: LineKind, n: usize, k: usize, spec: &ContourSpec) -> Result<f64> {
    Ok(line_expectation_detailed(kind, n, k, spec)?.value)
}

pub fn line_expectation_detailed(
    kind: LineKind,
    n: usize,
    k: usize,
    spec: &ContourSpec,
) -> Result<LineEval> {
    spec.validate()?;
    if n < 2 {
        return Err(Error::Domain(format!("line integrals need n >= 2, got {n}")));
    }
    let k_eff = if kind == LineKind::MomentK {
        if !(1..=6).contains(&k) {
            return Err(Error::Domain(format!("MomentK needs 1 <= k <= 6, got {k}")));
        }
        k
    } else {
        1
    };
    let sigma = spec.sigma;
    if sigma <= -1.0 + POLE_MARGIN || sigma >= -POLE_MARGIN {
        return Err(Error::PoleArgument(format!(
            "sigma = {sigma} must lie in (-1, 0) at least {POLE_MARGIN} from the poles"
        )));
    }
    let coeff = match kind {
        LineKind::Ed => -1.0 / std::f64::consts::PI,
        LineKind::MomentK => -crate::asympt::factorial(k_eff) / std::f64::consts::PI,
        LineKind::El => 1.0 / std::f64::consts::PI,
        LineKind::ELambda => -1.0 / std::f64::consts::PI,
    };
    let g = Integrand {
        kind,
        k: k_eff as i32,
        n_f: n as f64,
        lg_n: log_gamma_real(if kind == LineKind::ELambda {
            n as f64 + 1.0
        } else {
            n as f64
        }),
        z: 0.0,
        mgf: false,
    };
    let tol = spec.abs_tol / coeff.abs();
    let (i, err, panels, far) = integrate_line(&g, sigma, spec, n, tol)?;
    Ok(LineEval {
        value: coeff * i,
        est_error: coeff.abs() * (err + far),
        panels,
    })
}

/// MGF via the shifted contour: the explicit residue at -rho(z) plus the
/// remainder integral at sigma in (1, 1 + |s_1(z - gamma)|).
pub fn line_mgf(n: usize, z: f64, spec: &ContourSpec) -> Result<LineEval> {
    spec.validate()?;
    if z >= 1.0 {
        return Err(Error::Domain(format!("mgf diverges for z >= 1, got z = {z}")));
    }
    if n < 2 {
        return Err(Error::Domain(format!("line_mgf needs n >= 2, got {n}")));
    }
    let r = rho(z)?;
    let residue_term = crate::mgf_ldp::mgf_prefactor_numerator(z, r)
        / polygamma_real(1, 1.0 + r)
        * crate::specfun::gamma_ratio(n as u64, -r)?;
    if z == 0.0 {
        return Ok(LineEval {
            value: residue_term,
            est_error: 0.0,
            panels: 0,
        });
    }
    // Rightmost allowed abscissa: the next denominator zero 1 + |s_1(psi(1)+z)|.
    let upper = 1.0 - psi_roots(-EULER_GAMMA + z, 1).roots[0].1;
    let sigma = spec.sigma;
    if sigma <= 1.0 + POLE_MARGIN || sigma >= upper - POLE_MARGIN {
        return Err(Error::PoleArgument(format!(
            "sigma = {sigma} must lie in (1, {upper:.4}) at least {POLE_MARGIN} from the poles"
        )));
    }
    let coeff = -z / std::f64::consts::PI;
    let g = Integrand {
        kind: LineKind::Ed,
        k: 1,
        n_f: n as f64,
        lg_n: log_gamma_real(n as f64),
        z,
        mgf: true,
    };
    let tol = spec.abs_tol / coeff.abs();
    let (i, err, panels, far) = integrate_line(&g, sigma, spec, n, tol)?;
    Ok(LineEval {
        value: residue_term + coeff * i,
        est_error: coeff.abs() * (err + far),
        panels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hd_exact::{build_exact_tables, mgf_exact};
    use crate::specfun::psi_roots;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn mellin_u_values() {
        assert_abs_diff_eq!(mellin_u(c(2.0, 0.0), 1).unwrap().re, 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(
            mellin_u(c(3.0, 0.0), 1).unwrap().re,
            2.0 / 3.0,
            epsilon = 1e-13
        );
        assert!(mellin_u(c(1.0, 0.0), 1).is_err());
        let s1 = psi_roots(-EULER_GAMMA, 1).roots[0].1;
        assert!(mellin_u(c(s1, 0.0), 2).is_err());
        // (s-1) U(s,1) -> 6/pi^2 approaching the simple pole at 1.
        for eps in [1e-2, 1e-3, 1e-4] {
            let s = c(1.0 + eps, 0.0);
            let v = ((s - 1.0) * mellin_u(s, 1).unwrap()).re;
            assert!((v - 1.0 / ZETA2).abs() <= 1.0 * eps, "eps = {eps}");
        }
    }

    #[test]
    fn mellin_fn_closed_forms() {
        for n in [1usize, 2, 5, 40] {
            assert_abs_diff_eq!(
                mellin_fn(c(0.0, 0.0), n).unwrap().re,
                harmonic(n as u64 - 1),
                epsilon = 1e-12
            );
            let one = mellin_fn(c(1.0, 0.0), n).unwrap().re;
            assert_abs_diff_eq!(one, 1.0 - 1.0 / n as f64, epsilon = 1e-12);
        }
        for s in [c(0.5, 0.0), c(2.0, 1.0), c(-0.5, 3.0)] {
            let v = mellin_fn(s, 2).unwrap();
            assert!((v - (s + 1.0).inv()).norm() <= 1e-12);
        }
    }

    #[test]
    fn mellin_fn_series_direct_continuity() {
        // Values just inside and outside the series radius must agree.
        for n in [2usize, 7, 1000] {
            for &t in &[0.0, 0.3, 2.1] {
                let inside = mellin_fn(Complex64::from_polar(1e-3 * (1.0 - 1e-7), t), n).unwrap();
                let outside = mellin_fn(Complex64::from_polar(1e-3 * (1.0 + 1e-7), t), n).unwrap();
                assert!((inside - outside).norm() <= 1e-8 * inside.norm().max(1.0), "n={n} t={t}");
            }
        }
    }

    #[test]
    fn mellin_hn_closed_forms() {
        for s in [c(0.5, 0.0), c(2.0, 1.0), c(1e-5, 0.0)] {
            let v = mellin_hn(s, 2).unwrap();
            assert!((v - (s + 1.0).inv()).norm() <= 1e-10, "s = {s}");
        }
        for n in [2usize, 10, 500] {
            let h = harmonic(n as u64 - 1);
            let expect = 0.5 * h * h + ZETA2 / 2.0 - 0.5 * polygamma_real(1, n as f64);
            assert_abs_diff_eq!(mellin_hn(c(0.0, 0.0), n).unwrap().re, expect, epsilon = 1e-10);
            // s MHn + Mfn = h_{n-1}.
            for s in [c(0.7, 0.3), c(3.0, -2.0)] {
                let lhs = s * mellin_hn(s, n).unwrap() + mellin_fn(s, n).unwrap();
                assert!((lhs.re - h).abs() <= 1e-11 && lhs.im.abs() <= 1e-11);
            }
        }
    }

    #[test]
    fn mellin_lambda_closed_forms() {
        for n in [2usize, 5, 100] {
            assert_abs_diff_eq!(
                mellin_lambda(c(0.0, 0.0), n).unwrap().re,
                n as f64 - 1.0,
                epsilon = 1e-11
            );
            // Removable singularity at s = 1: value h_n - 1, and bilateral
            // numerical limits agree.
            let at_one = mellin_lambda(c(1.0, 0.0), n).unwrap().re;
            assert_abs_diff_eq!(at_one, harmonic(n as u64) - 1.0, epsilon = 1e-11);
            let left = mellin_lambda(c(1.0 - 2e-3, 0.0), n).unwrap().re;
            let right = mellin_lambda(c(1.0 + 2e-3, 0.0), n).unwrap().re;
            assert!((0.5 * (left + right) - at_one).abs() <= 1e-4 * at_one.abs().max(1.0));
        }
        for s in [c(0.5, 0.0), c(2.0, 1.0)] {
            let v = mellin_lambda(s, 2).unwrap();
            assert!((v - (s + 1.0).inv()).norm() <= 1e-12);
        }
    }

    #[test]
    fn transforms_match_defining_integrals() {
        // Direct quadrature of int_0^1 phi(x) x^(s-1) dx for the three
        // defining functions.
        // Substituting x = t^4 removes the endpoint singularity at 0 for every
        // s with Re s > 1/4 considered below.
        let quad = |phi: &dyn Fn(f64) -> f64, s: Complex64| -> Complex64 {
            let g = |t: f64| {
                let x = t * t * t * t;
                4.0 * phi(x) * Complex64::new(t, 0.0).powc(4.0 * s - 1.0)
            };
            let mut re = |t: f64| g(t).re;
            let (vr, _, _) = adaptive_quad(&mut re, 0.0, 1.0, 1e-10, 100_000).unwrap();
            let mut im = |t: f64| g(t).im;
            let (vi, _, _) = adaptive_quad(&mut im, 0.0, 1.0, 1e-10, 100_000).unwrap();
            Complex64::new(vr, vi)
        };
        for &n in &[2usize, 7] {
            let f = move |x: f64| 1.0 - (1.0 - x).powi(n as i32 - 1);
            let hn = move |x: f64| {
                (1..n)
                    .map(|k| {
                        harmonic(k as u64)
                            * binom(n - 1, k)
                            * x.powi(k as i32)
                            * (1.0 - x).powi((n - 1 - k) as i32)
                    })
                    .sum::<f64>()
            };
            // Cancellation-safe binomial form of
            // (1 - (1-x)^n - nx(1-x)^(n-1))/x; the direct form is pure
            // rounding noise divided by x near zero.
            let lam = move |x: f64| {
                (2..=n)
                    .map(|k| binom(n, k) * x.powi(k as i32 - 1) * (1.0 - x).powi((n - k) as i32))
                    .sum::<f64>()
            };
            for s in [c(0.5, 0.0), c(1.5, 0.0), c(2.0, 1.0)] {
                assert!((mellin_fn(s, n).unwrap() - quad(&f, s)).norm() <= 1e-8, "fn n={n} s={s}");
                assert!((mellin_hn(s, n).unwrap() - quad(&hn, s)).norm() <= 1e-8, "hn n={n} s={s}");
                assert!(
                    (mellin_lambda(s, n).unwrap() - quad(&lam, s)).norm() <= 1e-8,
                    "lambda n={n} s={s}"
                );
            }
        }
    }

    fn binom(n: usize, k: usize) -> f64 {
        let mut c = 1.0;
        for i in 0..k {
            c = c * (n - i) as f64 / (i + 1) as f64;
        }
        c
    }

    #[test]
    fn density_expansion_shape() {
        let roots = psi_roots(-EULER_GAMMA, 4);
        let d = density_expansion(2, &roots).unwrap();
        assert_abs_diff_eq!(d.main_coeff, 1.0 / ZETA2, epsilon = 1e-14);
        assert!(d.pole_terms[0].0 < d.pole_terms[1].0);
        assert!(d.pole_terms.iter().all(|&(_, c)| c.is_finite() && c != 0.0));
        // x * density -> 6/pi^2 as x -> 0.
        for x in [1e-3, 1e-5] {
            let (v, _) = density_u(x, 0, &roots).unwrap();
            assert!((x * v - 1.0 / ZETA2).abs() <= 1e-10);
        }
        assert!(density_u(0.6, 2, &roots).is_err());
        assert!(density_u(0.0, 2, &roots).is_err());
    }

    #[test]
    fn line_ed_small_n() {
        let spec = ContourSpec::default();
        let v2 = line_expectation(LineKind::Ed, 2, 1, &spec).unwrap();
        assert!((v2 - 1.0).abs() <= 1e-8, "ED(2) = {v2}");
        let v3 = line_expectation(LineKind::Ed, 3, 1, &spec).unwrap();
        assert!((v3 - 4.0 / 3.0).abs() <= 1e-8, "ED(3) = {v3}");
    }

    #[test]
    fn line_el_and_length_small_n() {
        let spec = ContourSpec::default();
        let l3 = line_expectation(LineKind::El, 3, 1, &spec).unwrap();
        assert!((l3 - 5.0 / 3.0).abs() <= 1e-8, "EL(3) = {l3}");
        let g3 = line_expectation(LineKind::ELambda, 3, 1, &spec).unwrap();
        assert!((g3 - 5.0 / 3.0).abs() <= 1e-8, "ELambda(3) = {g3}");
    }

    #[test]
    fn line_moment2_small_n() {
        let spec = ContourSpec::default();
        let m2 = line_expectation(LineKind::MomentK, 3, 2, &spec).unwrap();
        assert!((m2 - 28.0 / 9.0).abs() <= 1e-7, "M2(3) = {m2}");
        // MomentK with k = 1 must coincide with Ed.
        let m1 = line_expectation(LineKind::MomentK, 10, 1, &spec).unwrap();
        let ed = line_expectation(LineKind::Ed, 10, 1, &spec).unwrap();
        assert!((m1 - ed).abs() <= 2e-9);
    }

    #[test]
    fn line_matches_exact_tables() {
        let t = build_exact_tables(100, 2).unwrap();
        let spec = ContourSpec::default();
        for &n in &[5usize, 50, 100] {
            let ed = line_expectation(LineKind::Ed, n, 1, &spec).unwrap();
            assert!((ed - t.ed(n)).abs() <= 1e-7, "ED n={n}: {} vs {}", ed, t.ed(n));
            let el = line_expectation(LineKind::El, n, 1, &spec).unwrap();
            assert!((el - t.el(n)).abs() <= 1e-7, "EL n={n}");
            let lg = line_expectation(LineKind::ELambda, n, 1, &spec).unwrap();
            assert!((lg - t.length(n)).abs() <= 1e-7, "ELambda n={n}");
        }
    }

    #[test]
    fn contour_independence() {
        let mut vals = vec![];
        for sigma in [-0.8, -0.5, -0.2] {
            let spec = ContourSpec::with_sigma(sigma);
            vals.push(line_expectation(LineKind::Ed, 10, 1, &spec).unwrap());
        }
        for v in &vals[1..] {
            assert!((v - vals[0]).abs() <= 2e-9);
        }
    }

    #[test]
    fn sigma_validation() {
        let spec = ContourSpec::with_sigma(-1e-5);
        assert!(line_expectation(LineKind::Ed, 5, 1, &spec).is_err());
        let spec = ContourSpec::with_sigma(0.5);
        assert!(line_expectation(LineKind::Ed, 5, 1, &spec).is_err());
        let bad = ContourSpec {
            tail_cutoff: 5.0,
            ..Default::default()
        };
        assert!(line_expectation(LineKind::Ed, 5, 1, &bad).is_err());
    }

    #[test]
    fn line_mgf_matches_exact() {
        let spec = ContourSpec::mgf_default();
        assert_abs_diff_eq!(line_mgf(10, 0.0, &spec).unwrap().value, 1.0, epsilon = 1e-9);
        for &z in &[-1.0, 0.5] {
            let got = line_mgf(50, z, &spec).unwrap().value;
            let exact = mgf_exact(50, z).unwrap();
            assert!((got - exact).abs() <= 1e-7, "z = {z}: {got} vs {exact}");
        }
        assert!(line_mgf(50, 1.0, &spec).is_err());
        // sigma outside (1, upper) is rejected.
        let bad = ContourSpec::with_sigma(0.9);
        assert!(line_mgf(50, 0.5, &bad).is_err());
    }

    #[test]
    fn line_mgf_remainder_decay() {
        // The remainder integral (value minus the explicit residue term)
        // decays like n^-sigma*; the constant here is recorded empirically.
        let spec = ContourSpec::mgf_default();
        let z = 0.5;
        let r = rho(z).unwrap();
        for &n in &[100usize, 1000] {
            let whole = line_mgf(n, z, &spec).unwrap().value;
            let residue = crate::mgf_ldp::mgf_prefactor_numerator(z, r)
                / polygamma_real(1, 1.0 + r)
                * crate::specfun::gamma_ratio(n as u64, -r)
                    .unwrap();
            let rem = (whole - residue).abs();
            assert!(
                rem <= 20.0 * (n as f64).powf(-sigma_star()),
                "n = {n}: remainder {rem:e}"
            );
        }
    }
}

