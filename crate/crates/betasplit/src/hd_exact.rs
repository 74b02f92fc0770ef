//! Exact finite-n quantities for the harmonic descent chain and the trees:
//! first-step recurrences for the height moments E[D_n^k], the hop count
//! E[L_n], the total edge length E[Lambda_n], the occupation probabilities
//! a(n,j), the full hop-count PMF, and the exact MGF.
//!
//! Notation used throughout the crate: a clade of size m splits into parts
//! (i, m-i) with probability q(m,i) proportional to 1/(i(m-i)); the part
//! containing a fixed leaf has size i with probability
//! q*(m,i) = 1/(h_{m-1}(m-i)). D_n is the continuous-time leaf height (sum of
//! Exponential(h_{m-1}) holding times down the descent chain), L_n the number
//! of hops, Lambda_n the sum of clade lifetimes.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use std::collections::BTreeMap;
use twofloat::TwoFloat;

use crate::specfun::harmonic;
use crate::{Error, Result};

/// One row of the splitting and descent kernels at clade size m.
#[derive(Debug, Clone)]
pub struct SplitKernel {
    pub m: usize,
    /// q(m, i) for i = 1..=m-1 (probability the left part has size i).
    pub split_probs: Vec<f64>,
    /// q*(m, i) for i = 1..=m-1 (probability the leaf's part has size i).
    pub descent_probs: Vec<f64>,
    /// Splitting rate h_{m-1} of a size-m clade.
    pub rate: f64,
}

pub fn build_kernel(m: usize) -> Result<SplitKernel> {
    if m < 2 {
        return Err(Error::Domain(format!("build_kernel needs m >= 2, got {m}")));
    }
    let h = harmonic(m as u64 - 1);
    let mut split = Vec::with_capacity(m - 1);
    let mut descent = Vec::with_capacity(m - 1);
    for i in 1..m {
        split.push(m as f64 / (2.0 * h * (i * (m - i)) as f64));
        descent.push(1.0 / (h * (m - i) as f64));
    }
    Ok(SplitKernel {
        m,
        split_probs: split,
        descent_probs: descent,
        rate: h,
    })
}

/// Hard cap on nmax^2 * kmax for the moment tables (about nmax = 20000 at the
/// maximum kmax of 6).
const MOMENT_BUDGET: u128 = 2_400_000_000;
/// The full a(n,j) triangle is O(nmax^2) memory and O(nmax^3) work; capped
/// independently of the means.
pub const OCCUPANCY_NMAX_DEFAULT: usize = 5000;
/// DP budget for the hop-count PMF.
pub const HOP_PMF_BUDGET: usize = 2000;
const KMAX_CAP: usize = 6;

/// Exact per-n tables, filled by increasing n.
#[derive(Debug, Clone)]
pub struct ExactTables {
    pub nmax: usize,
    pub kmax: usize,
    /// moments_d[k][n] = E[D_n^k] for n = 1..=nmax (index 0 unused, row 0 all
    /// ones).
    pub moments_d: Vec<Vec<f64>>,
    /// mean_l[n] = E[L_n].
    pub mean_l: Vec<f64>,
    /// mean_length[n] = E[Lambda_n].
    pub mean_length: Vec<f64>,
    /// Largest n covered by the occupancy triangle (min(nmax, triangle cap)).
    pub occupancy_nmax: usize,
    /// Column j stores a(n, j) for n = j..=occupancy_nmax at [n - j].
    occupancy_cols: Vec<Vec<f64>>,
}

impl ExactTables {
    pub fn ed(&self, n: usize) -> f64 {
        self.moments_d[1][n]
    }

    /// E[D_n^k].
    pub fn moment(&self, k: usize, n: usize) -> f64 {
        self.moments_d[k][n]
    }

    pub fn el(&self, n: usize) -> f64 {
        self.mean_l[n]
    }

    pub fn length(&self, n: usize) -> f64 {
        self.mean_length[n]
    }

    /// a(n, j): probability the descent chain from n ever visits j.
    pub fn occupancy(&self, n: usize, j: usize) -> f64 {
        assert!(1 <= j && j <= n && n <= self.occupancy_nmax);
        self.occupancy_cols[j - 1][n - j]
    }

    /// CSV dump of the per-n columns (not the occupancy triangle).
    pub fn to_csv(&self) -> String {
        let mut head = String::from("n,ED");
        for k in 2..=self.kmax {
            head.push_str(&format!(",ED{k}"));
        }
        head.push_str(",EL,ELambda\n");
        let mut out = head;
        for n in 1..=self.nmax {
            out.push_str(&format!("{n},{}", self.moments_d[1][n]));
            for k in 2..=self.kmax {
                out.push_str(&format!(",{}", self.moments_d[k][n]));
            }
            out.push_str(&format!(",{},{}\n", self.mean_l[n], self.mean_length[n]));
        }
        out
    }

    /// JSON object keyed by quantity name; arrays run over n = 1..=nmax.
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        map.insert("nmax".into(), self.nmax.into());
        map.insert("kmax".into(), self.kmax.into());
        for k in 1..=self.kmax {
            let key = if k == 1 { "ED".to_string() } else { format!("ED{k}") };
            map.insert(key, serde_json::json!(self.moments_d[k][1..].to_vec()));
        }
        map.insert("EL".into(), serde_json::json!(self.mean_l[1..].to_vec()));
        map.insert(
            "ELambda".into(),
            serde_json::json!(self.mean_length[1..].to_vec()),
        );
        serde_json::Value::Object(map)
    }
}

/// Fills every table up to nmax by the first-step recurrences. Cost
/// O(nmax^2 * kmax) for the moments plus O(occupancy_nmax^3) for the
/// triangle (columns are independent and run in parallel).
/// Neumaier-compensated accumulator: error independent of the term count.
#[derive(Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    carry: f64,
}

impl Neumaier {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

pub fn build_exact_tables(nmax: usize, kmax: usize) -> Result<ExactTables> {
    build_exact_tables_capped(nmax, kmax, OCCUPANCY_NMAX_DEFAULT.min(nmax))
}

/// As [`build_exact_tables`] with an explicit occupancy-triangle cap.
pub fn build_exact_tables_capped(
    nmax: usize,
    kmax: usize,
    occupancy_nmax: usize,
) -> Result<ExactTables> {
    if nmax < 1 || kmax < 1 || kmax > KMAX_CAP {
        return Err(Error::Domain(format!(
            "need nmax >= 1 and 1 <= kmax <= {KMAX_CAP}, got nmax = {nmax}, kmax = {kmax}"
        )));
    }
    if (nmax as u128).pow(2) * kmax as u128 > MOMENT_BUDGET {
        return Err(Error::Resource(format!(
            "nmax^2 * kmax = {} exceeds budget {MOMENT_BUDGET}",
            (nmax as u128).pow(2) * kmax as u128
        )));
    }
    if occupancy_nmax > nmax || occupancy_nmax > OCCUPANCY_NMAX_DEFAULT {
        return Err(Error::Resource(format!(
            "occupancy cap {occupancy_nmax} out of range (nmax = {nmax}, hard cap {OCCUPANCY_NMAX_DEFAULT})"
        )));
    }

    // Reciprocal table: the inner sums run over 1/(n-i) and 1/(i(n-i));
    // multiplying by cached reciprocals keeps the O(nmax^2) loops out of the
    // divider.
    let inv: Vec<f64> = (0..=nmax).map(|d| if d == 0 { 0.0 } else { 1.0 / d as f64 }).collect();
    // Double-double reciprocals and state for the two first-moment rows. The
    // mean tables serve as the reference oracle for remainder-decay checks
    // whose targets at the top of the n-grid sit below one ulp of the value;
    // plain f64 recurrences drift by tens of ulps over thousands of steps.
    let inv_dd: Vec<TwoFloat> = (0..=nmax)
        .map(|d| if d == 0 { TwoFloat::from(0.0) } else { TwoFloat::from(1.0) / d as f64 })
        .collect();
    let mut ed_dd = vec![TwoFloat::from(0.0); nmax + 1];
    let mut el_dd = vec![TwoFloat::from(0.0); nmax + 1];
    let mut h_dd = TwoFloat::from(0.0);

    let binom = pascal_row_table(kmax);
    let mut moments_d = vec![vec![0.0; nmax + 1]; kmax + 1];
    for v in moments_d[0].iter_mut() {
        *v = 1.0;
    }
    let mut mean_l = vec![0.0; nmax + 1];
    let mut mean_length = vec![0.0; nmax + 1];

    for n in 2..=nmax {
        let h = harmonic(n as u64 - 1);
        let hinv = 1.0 / h;
        h_dd += inv_dd[n - 1];
        let hinv_dd = TwoFloat::from(1.0) / h_dd;
        // First moment of the leaf depth, carried in double-double.
        let mut s_ed = TwoFloat::from(0.0);
        let mut s_el = TwoFloat::from(0.0);
        for i in 1..n {
            s_ed += ed_dd[i] * inv_dd[n - i];
            s_el += el_dd[i] * inv_dd[n - i];
        }
        let sbar1_dd = s_ed * hinv_dd;
        ed_dd[n] = sbar1_dd + hinv_dd;
        el_dd[n] = s_el * hinv_dd + 1.0;
        moments_d[1][n] = f64::from(ed_dd[n]);
        mean_l[n] = f64::from(el_dd[n]);
        // sbar[m] = sum_i q*(n,i) E[D_i^m]. The higher-moment sums are
        // compensated; their checks sit near 1e-10.
        let mut sbar = vec![0.0; kmax + 1];
        sbar[0] = 1.0;
        sbar[1] = f64::from(sbar1_dd);
        for m in 2..=kmax {
            let row = &moments_d[m];
            let mut s = Neumaier::default();
            for i in 1..n {
                s.add(row[i] * inv[n - i]);
            }
            sbar[m] = s.value() * hinv;
        }
        for k in (2..=kmax).rev() {
            let mut v = Neumaier::default();
            let mut w = 1.0; // j!/h^j
            for j in 0..=k {
                v.add(binom[k][j] * w * sbar[k - j]);
                w *= (j + 1) as f64 * hinv;
            }
            moments_d[k][n] = v.value();
        }
        let mut sg = Neumaier::default();
        for i in 1..n {
            sg.add(mean_length[i] * inv[i] * inv[n - i]);
        }
        mean_length[n] = hinv + n as f64 * hinv * sg.value();
    }

    let occupancy_cols: Vec<Vec<f64>> = (1..=occupancy_nmax)
        .into_par_iter()
        .map(|j| {
            let len = occupancy_nmax - j + 1;
            let mut col = vec![0.0; len];
            col[0] = 1.0; // a(j, j) = 1
            for n in (j + 1)..=occupancy_nmax {
                let mut s = 0.0;
                for i in j..n {
                    s += col[i - j] * inv[n - i];
                }
                col[n - j] = s / harmonic(n as u64 - 1);
            }
            col
        })
        .collect();

    Ok(ExactTables {
        nmax,
        kmax,
        moments_d,
        mean_l,
        mean_length,
        occupancy_nmax,
        occupancy_cols,
    })
}

fn pascal_row_table(kmax: usize) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![1.0]];
    for k in 1..=kmax {
        let prev = &rows[k - 1];
        let mut row = vec![1.0; k + 1];
        for j in 1..k {
            row[j] = prev[j - 1] + prev[j];
        }
        rows.push(row);
    }
    rows
}

fn check_closed_form_range(n: usize, digits: u32) -> Result<()> {
    if digits < 30 {
        return Err(Error::Domain(format!("digits must be >= 30, got {digits}")));
    }
    if n > 200 {
        return Err(Error::Precision(format!(
            "alternating sums are only contracted up to n = 200, got {n}"
        )));
    }
    Ok(())
}

fn rational_harmonics(up_to: usize) -> Vec<BigRational> {
    let mut h = Vec::with_capacity(up_to + 1);
    h.push(BigRational::zero());
    let mut acc = BigRational::zero();
    for j in 1..=up_to {
        acc += BigRational::new(BigInt::one(), BigInt::from(j));
        h.push(acc.clone());
    }
    h
}

/// E[D_n] as the exact alternating binomial sum
/// sum_{j=1}^{n-1} (-1)^(j-1) C(n-1,j) / h_j, evaluated in exact rational
/// arithmetic (which more than meets any requested decimal precision; the
/// `digits` knob is validated but cannot be exceeded by a rational result).
pub fn alt_sum_ed(n: usize, digits: u32) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("alt_sum_ed needs n >= 2, got {n}")));
    }
    check_closed_form_range(n, digits)?;
    let h = rational_harmonics(n - 1);
    let mut c = BigInt::from(n - 1); // C(n-1, j), starting at j = 1
    let mut sum = BigRational::zero();
    for j in 1..n {
        let term = BigRational::from(c.clone()) / &h[j];
        if j % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
        c = c * BigInt::from(n - 1 - j) / BigInt::from(j + 1);
    }
    sum.to_f64()
        .ok_or_else(|| Error::Precision("rational-to-float conversion failed".into()))
}

/// a(n, j) as the exact alternating multinomial sum
/// sum_k (-1)^k (n-1)!/((j-1)! k! (n-j-k)!) h_{j-1}/h_{j+k-1}.
pub fn occupancy_closed_form(n: usize, j: usize, digits: u32) -> Result<f64> {
    if j < 2 || j > n {
        return Err(Error::Domain(format!(
            "occupancy_closed_form needs 2 <= j <= n, got n = {n}, j = {j}"
        )));
    }
    check_closed_form_range(n, digits)?;
    let h = rational_harmonics(n - 1);
    // multinomial(n-1; j-1, k, n-j-k), incremented in k from C(n-1, j-1).
    let mut m = binomial_big(n - 1, j - 1);
    let mut sum = BigRational::zero();
    for k in 0..=(n - j) {
        let term = BigRational::from(m.clone()) * &h[j - 1] / &h[j + k - 1];
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        if k < n - j {
            m = m * BigInt::from(n - j - k) / BigInt::from(k + 1);
        }
    }
    debug_assert!(sum.is_positive());
    sum.to_f64()
        .ok_or_else(|| Error::Precision("rational-to-float conversion failed".into()))
}

fn binomial_big(n: usize, k: usize) -> BigInt {
    let mut c = BigInt::one();
    for i in 0..k {
        c = c * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    c
}

/// Expected number of size-j clades, E[N_n(j)] = n a(n,j)/j, for j = 1..=n
/// (entry 0 of the result is unused).
pub fn subtree_counts(n: usize, tables: &ExactTables) -> Result<Vec<f64>> {
    if n > tables.occupancy_nmax {
        return Err(Error::Resource(format!(
            "n = {n} exceeds the occupancy range {}",
            tables.occupancy_nmax
        )));
    }
    let mut out = vec![0.0; n + 1];
    for j in 1..=n {
        out[j] = n as f64 * tables.occupancy(n, j) / j as f64;
    }
    Ok(out)
}

/// Distribution of the hop count L_n.
#[derive(Debug, Clone)]
pub struct HopPmf {
    pub n: usize,
    /// Pr(L_n = k) for every k with nonzero (un-underflowed) mass.
    pub probs: BTreeMap<u32, f64>,
}

impl HopPmf {
    pub fn mean(&self) -> f64 {
        self.probs.iter().map(|(&k, &p)| k as f64 * p).sum()
    }
}

/// Absorption-hop-count PMF via the DP
/// p_n(k) = sum_i q*(n,i) p_i(k-1), p_1 = {0: 1}; memoized over all states
/// up to n. Vectors are trimmed of underflowed tails, keeping the DP near
/// O(n^2 * effective support).
pub fn hop_pmf(n: usize) -> Result<HopPmf> {
    if n < 1 || n > HOP_PMF_BUDGET {
        return Err(Error::Resource(format!(
            "hop_pmf needs 1 <= n <= {HOP_PMF_BUDGET}, got {n}"
        )));
    }
    let mut pmfs: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pmfs.push(vec![]); // state 0 unused
    pmfs.push(vec![1.0]); // L_1 = 0
    for m in 2..=n {
        let h = harmonic(m as u64 - 1);
        let max_len = pmfs[1..m].iter().map(|p| p.len()).max().unwrap();
        let mut next = vec![0.0; max_len + 1];
        for i in 1..m {
            let w = 1.0 / (h * (m - i) as f64);
            for (k, &p) in pmfs[i].iter().enumerate() {
                next[k + 1] += w * p;
            }
        }
        while next.len() > 1 && *next.last().unwrap() == 0.0 {
            next.pop();
        }
        pmfs.push(next);
    }
    let probs = pmfs[n]
        .iter()
        .enumerate()
        .filter(|&(_, &p)| p > 0.0)
        .map(|(k, &p)| (k as u32, p))
        .collect();
    Ok(HopPmf { n, probs })
}

/// Exact MGF E[exp(z D_n)] via
/// phi_n = h_{n-1}/(h_{n-1} - z) sum_i q*(n,i) phi_i, phi_1 = 1.
/// Finite exactly when z < 1.
pub fn mgf_exact(n: usize, z: f64) -> Result<f64> {
    if z >= 1.0 {
        return Err(Error::Domain(format!("mgf diverges for z >= 1, got z = {z}")));
    }
    if n < 1 || (n as u128).pow(2) > MOMENT_BUDGET {
        return Err(Error::Resource(format!("mgf_exact budget exceeded at n = {n}")));
    }
    let mut phi = vec![0.0; n + 1];
    phi[1] = 1.0;
    for m in 2..=n {
        let h = harmonic(m as u64 - 1);
        let mut s = 0.0;
        for i in 1..m {
            s += phi[i] / (m - i) as f64;
        }
        phi[m] = s / (h - z);
    }
    Ok(phi[n])
}
