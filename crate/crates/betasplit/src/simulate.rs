//! Seeded Monte Carlo: the clade-size descent chain, full continuous-time
//! trees, and the clade-of-leaf-1 fraction process, with a deterministic
//! parallel summary harness.
//!
//! Reproducibility contract: the generator is ChaCha12; substream k uses
//! `seed ^ splitmix64(k + 1)` so distinct streams get decorrelated seeds and
//! stream 0 differs from the root seed. Samples are split into contiguous
//! blocks per stream and partial summaries merge in fixed stream order, so a
//! given (seed, streams) pair yields bit-identical output regardless of
//! thread scheduling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::mgf_ldp::clt_params;
use crate::specfun::{harmonic, EULER_GAMMA};
use crate::{Error, Result};

/// Largest m for which harmonic inversion binary-searches the cached prefix
/// sums; above it a closed-form guess with a local scan is used instead.
pub const HARMONIC_SAMPLE_CUTOFF: u64 = 100_000;

/// Hard cap on the clade count of a single simulated tree.
const TREE_SIZE_LIMIT: u64 = 100_000_000;

/// Which process a [`SimConfig`] samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// Clade sizes along the path to a fixed leaf: height and hop count.
    Chain,
    /// The full continuous-time tree: total length and mean leaf height.
    Tree,
    /// The clade-of-leaf-1 size fraction at a fixed time.
    CladeFraction,
}

/// A complete description of one Monte Carlo experiment.
#[derive(Debug, Clone, Serialize)]
pub struct SimConfig {
    pub n: u64,
    pub samples: u64,
    pub seed: u64,
    pub mode: SimMode,
    /// Observation time; used by [`SimMode::CladeFraction`] only.
    pub t: f64,
    /// Number of parallel substreams; part of the determinism contract.
    pub streams: u64,
    /// Thresholds x for the tail frequencies Pr(height > x log n) recorded in
    /// chain mode.
    pub x_grid: Vec<f64>,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.samples < 1 {
            return Err(Error::Usage("samples must be >= 1".into()));
        }
        if self.streams < 1 {
            return Err(Error::Usage("streams must be >= 1".into()));
        }
        match self.mode {
            SimMode::Chain => {
                if self.n < 1 {
                    return Err(Error::Usage("chain mode needs n >= 1".into()));
                }
            }
            SimMode::Tree => {
                if self.n < 2 {
                    return Err(Error::Usage("tree mode needs n >= 2".into()));
                }
                if self.n > TREE_SIZE_LIMIT {
                    return Err(Error::Resource(format!(
                        "tree mode capped at n = {TREE_SIZE_LIMIT}, got {}",
                        self.n
                    )));
                }
            }
            SimMode::CladeFraction => {
                if self.n < 1 {
                    return Err(Error::Usage("clade_fraction mode needs n >= 1".into()));
                }
                if !(self.t >= 0.0 && self.t.is_finite()) {
                    return Err(Error::Usage(format!(
                        "clade_fraction needs finite t >= 0, got {}",
                        self.t
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Merged summary of one experiment. The primary statistic is the height
/// sample (chain), the total length (tree) or the size fraction
/// (clade_fraction); everything else lives in `extra`.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryStats {
    pub count: u64,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// sqrt(variance / count).
    pub stderr: f64,
    pub min: f64,
    pub max: f64,
    pub extra: BTreeMap<String, f64>,
}

// ---------------------------------------------------------------------------
// RNG plumbing.

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed ^ splitmix64(stream + 1))
}

/// Exponential(rate) by inverse CDF; 1 - U lies in (0, 1] so the log argument
/// never vanishes.
fn exp_draw<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -(1.0 - rng.random::<f64>()).ln() / rate
}

// ---------------------------------------------------------------------------
// Kernel samplers.

/// J in {1, ..., m} with Pr(J = j) proportional to 1/j.
pub fn sample_harmonic<R: Rng + ?Sized>(m: u64, rng: &mut R) -> u64 {
    debug_assert!(m >= 1);
    if m == 1 {
        return 1;
    }
    harmonic_inverse(rng.random::<f64>() * harmonic(m), m)
}

/// Smallest j in [1, m] with h_j >= u, for 0 < u <= h_m. Binary search over
/// the cached prefix sums up to the cutoff; beyond it, h_j = log j + gamma +
/// O(1/j) is inverted in closed form and corrected by a +-2 scan (the guess
/// error is below 1e-5 relative there).
fn harmonic_inverse(u: f64, m: u64) -> u64 {
    let table_top = m.min(HARMONIC_SAMPLE_CUTOFF);
    if u <= harmonic(table_top) {
        let mut lo = 1u64;
        let mut hi = table_top;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if harmonic(mid) >= u {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        return lo;
    }
    let guess = (u - EULER_GAMMA).exp();
    let lo = (guess - 2.5).max(1.0) as u64;
    for j in lo..lo + 5 {
        if j >= m || harmonic(j) >= u {
            return j.min(m);
        }
    }
    m
}

/// A split part size i ~ q(m, .): the mixture decomposition
/// 1/(i(m-i)) = (1/i + 1/(m-i))/m reduces the kernel to a fair coin over two
/// harmonic draws on {1, ..., m-1}.
pub fn sample_split<R: Rng + ?Sized>(m: u64, rng: &mut R) -> u64 {
    debug_assert!(m >= 2);
    if rng.random::<bool>() {
        sample_harmonic(m - 1, rng)
    } else {
        m - sample_harmonic(m - 1, rng)
    }
}

// ---------------------------------------------------------------------------
// Process simulators.

/// One descent of the clade-size chain from n to 1 in continuous time:
/// (height, hop count, states entered in descending order). The jump from
/// state m draws the gap g = m - next with g proportional to 1/g, which is
/// exactly the size-biased projection of the split kernel onto the part
/// holding a fixed leaf.
pub fn simulate_chain<R: Rng + ?Sized>(n: u64, rng: &mut R) -> (f64, u64, Vec<u64>) {
    let mut state = n;
    let mut d = 0.0;
    let mut hops = 0u64;
    let mut visited = Vec::new();
    visited.push(state);
    while state > 1 {
        let rate = harmonic(state - 1);
        d += exp_draw(rng, rate);
        hops += 1;
        state -= sample_harmonic(state - 1, rng);
        visited.push(state);
    }
    (d, hops, visited)
}

/// One full continuous-time tree on n leaves: (total internal lifetime, sum
/// of leaf creation times). Iterative worklist, O(live clades) memory.
pub fn simulate_tree<R: Rng + ?Sized>(n: u64, rng: &mut R) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::Domain(format!("simulate_tree needs n >= 2, got {n}")));
    }
    if n > TREE_SIZE_LIMIT {
        return Err(Error::Resource(format!(
            "simulate_tree capped at n = {TREE_SIZE_LIMIT}, got {n}"
        )));
    }
    let mut length = 0.0;
    let mut leaf_height_sum = 0.0;
    // (clade size >= 2, birth time).
    let mut work: Vec<(u64, f64)> = vec![(n, 0.0)];
    while let Some((m, born)) = work.pop() {
        let lifetime = exp_draw(rng, harmonic(m - 1));
        length += lifetime;
        let split_at = born + lifetime;
        let i = sample_split(m, rng);
        for part in [i, m - i] {
            if part == 1 {
                leaf_height_sum += split_at;
            } else {
                work.push((part, split_at));
            }
        }
    }
    Ok((length, leaf_height_sum))
}

/// Size fraction of the clade containing leaf 1 at time t, started from the
/// root clade of n leaves. The embedded jump chain is the same descent chain
/// as [`simulate_chain`]; jumps after t are discarded.
pub fn clade_fraction<R: Rng + ?Sized>(n: u64, t: f64, rng: &mut R) -> f64 {
    let mut state = n;
    let mut clock = 0.0;
    while state > 1 {
        clock += exp_draw(rng, harmonic(state - 1));
        if clock > t {
            break;
        }
        state -= sample_harmonic(state - 1, rng);
    }
    state as f64 / n as f64
}

// ---------------------------------------------------------------------------
// Summary harness.

#[derive(Debug, Clone, Copy)]
struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Welford {
    fn new() -> Self {
        Welford {
            count: 0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    fn merge(self, other: Welford) -> Welford {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        Welford {
            count,
            mean: self.mean + delta * other.count as f64 / count as f64,
            m2: self.m2
                + other.m2
                + delta * delta * self.count as f64 * other.count as f64 / count as f64,
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }
}

struct Partial {
    primary: Welford,
    sums: BTreeMap<String, f64>,
    dump: Vec<f64>,
}

fn add_sum(sums: &mut BTreeMap<String, f64>, key: &str, v: f64) {
    *sums.entry(key.to_string()).or_insert(0.0) += v;
}

fn run_stream(config: &SimConfig, stream: u64, block: u64, collect: bool) -> Partial {
    let mut rng = stream_rng(config.seed, stream);
    let mut primary = Welford::new();
    let mut sums = BTreeMap::new();
    let mut dump = Vec::new();
    let log_n = (config.n as f64).ln();
    let (mu, sigma2) = clt_params();
    let sd = (sigma2 * log_n).sqrt();
    for _ in 0..block {
        let value = match config.mode {
            SimMode::Chain => {
                let (d, hops, visited) = simulate_chain(config.n, &mut rng);
                add_sum(&mut sums, "hops", hops as f64);
                for j in 2..=6u64 {
                    if visited.contains(&j) {
                        add_sum(&mut sums, &format!("visited_{j}"), 1.0);
                    }
                }
                for &x in &config.x_grid {
                    if d > x * log_n {
                        add_sum(&mut sums, &format!("tail_{x}"), 1.0);
                    }
                }
                if config.n >= 2 && sd > 0.0 {
                    let z = (d - mu * log_n) / sd;
                    let mut p = 1.0;
                    for k in 1..=4u32 {
                        p *= z;
                        add_sum(&mut sums, &format!("z{k}"), p);
                    }
                }
                d
            }
            SimMode::Tree => {
                let (length, leaf_height_sum) =
                    simulate_tree(config.n, &mut rng).expect("validated in run()");
                let height = leaf_height_sum / config.n as f64;
                add_sum(&mut sums, "height", height);
                add_sum(&mut sums, "height_sq", height * height);
                length
            }
            SimMode::CladeFraction => {
                let f = clade_fraction(config.n, config.t, &mut rng);
                add_sum(&mut sums, "pow_1_5", f.powf(1.5));
                add_sum(&mut sums, "pow_2", f * f);
                f
            }
        };
        primary.push(value);
        if collect {
            dump.push(value);
        }
    }
    Partial {
        primary,
        sums,
        dump,
    }
}

fn finalize(config: &SimConfig, primary: Welford, sums: BTreeMap<String, f64>) -> SummaryStats {
    let count = primary.count;
    let cf = count as f64;
    let variance = if count > 1 {
        (primary.m2 / (cf - 1.0)).max(0.0)
    } else {
        0.0
    };
    let mut extra = BTreeMap::new();
    match config.mode {
        SimMode::Chain => {
            extra.insert("hops_mean".into(), sums.get("hops").copied().unwrap_or(0.0) / cf);
            for j in 2..=6u64 {
                let c = sums.get(&format!("visited_{j}")).copied().unwrap_or(0.0);
                extra.insert(format!("visited_{j}"), c / cf);
            }
            for &x in &config.x_grid {
                let c = sums.get(&format!("tail_{x}")).copied().unwrap_or(0.0);
                extra.insert(format!("tail_{x}"), c / cf);
            }
            for k in 1..=4u32 {
                if let Some(&s) = sums.get(&format!("z{k}")) {
                    extra.insert(format!("std_m{k}"), s / cf);
                }
            }
        }
        SimMode::Tree => {
            let hm = sums.get("height").copied().unwrap_or(0.0) / cf;
            let hsq = sums.get("height_sq").copied().unwrap_or(0.0) / cf;
            let hvar = if count > 1 {
                ((hsq - hm * hm) * cf / (cf - 1.0)).max(0.0)
            } else {
                0.0
            };
            extra.insert("height_mean".into(), hm);
            extra.insert("height_variance".into(), hvar);
            extra.insert("height_stderr".into(), (hvar / cf).sqrt());
        }
        SimMode::CladeFraction => {
            extra.insert(
                "pow_1_5_mean".into(),
                sums.get("pow_1_5").copied().unwrap_or(0.0) / cf,
            );
            extra.insert(
                "pow_2_mean".into(),
                sums.get("pow_2").copied().unwrap_or(0.0) / cf,
            );
        }
    }
    SummaryStats {
        count,
        mean: primary.mean,
        variance,
        stderr: (variance / cf).sqrt(),
        min: primary.min,
        max: primary.max,
        extra,
    }
}

/// Runs the configured experiment across `streams` parallel substreams and
/// merges the per-stream summaries in stream order.
pub fn run(config: &SimConfig) -> Result<SummaryStats> {
    Ok(run_with_dump(config, false)?.0)
}

/// Like [`run`], optionally also returning every primary sample in
/// deterministic (stream-major) order.
pub fn run_with_dump(config: &SimConfig, collect: bool) -> Result<(SummaryStats, Vec<f64>)> {
    config.validate()?;
    let streams = config.streams.min(config.samples);
    let base = config.samples / streams;
    let rem = config.samples % streams;
    let partials: Vec<Partial> = (0..streams)
        .into_par_iter()
        .map(|k| {
            let block = base + u64::from(k < rem);
            run_stream(config, k, block, collect)
        })
        .collect();
    let mut primary = Welford::new();
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    let mut dump = Vec::new();
    for p in partials {
        primary = primary.merge(p.primary);
        for (k, v) in p.sums {
            *sums.entry(k).or_insert(0.0) += v;
        }
        dump.extend(p.dump);
    }
    Ok((finalize(config, primary, sums), dump))
}

/// Exact split kernel weights q(m, .) on {1, ..., m-1}.
pub(crate) fn split_weights(m: u64) -> Vec<f64> {
    let h = harmonic(m - 1);
    (1..m)
        .map(|i| m as f64 / (2.0 * h * (i as f64) * ((m - i) as f64)))
        .collect()
}

/// Exact harmonic sampler weights on {1, ..., m}.
#[cfg(test)]
pub(crate) fn harmonic_weights(m: u64) -> Vec<f64> {
    let h = harmonic(m);
    (1..=m).map(|j| 1.0 / (j as f64 * h)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hd_exact::build_exact_tables;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    const SEED: u64 = 0x5EED_0001;

    /// Upper-tail chi-square p-value of observed counts against exact cell
    /// probabilities.
    fn chi_square_p(obs: &[u64], probs: &[f64]) -> f64 {
        assert_eq!(obs.len(), probs.len());
        let total: u64 = obs.iter().sum();
        let stat: f64 = obs
            .iter()
            .zip(probs)
            .map(|(&o, &p)| {
                let e = p * total as f64;
                (o as f64 - e) * (o as f64 - e) / e
            })
            .sum();
        let df = (obs.len() - 1) as f64;
        1.0 - ChiSquared::new(df).unwrap().cdf(stat)
    }

    #[test]
    fn harmonic_sampler_edge_cases() {
        let mut rng = stream_rng(SEED, 0);
        for _ in 0..100 {
            assert_eq!(sample_harmonic(1, &mut rng), 1);
            let j = sample_harmonic(2, &mut rng);
            assert!(j == 1 || j == 2);
        }
    }

    #[test]
    fn harmonic_sampler_m2_frequencies() {
        let mut rng = stream_rng(SEED, 1);
        let draws = 100_000;
        let ones = (0..draws)
            .filter(|_| sample_harmonic(2, &mut rng) == 1)
            .count() as f64;
        let p = 1.0 / (1.5); // (1/1)/h_2
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!((ones - p * draws as f64).abs() <= 4.0 * sd);
    }

    #[test]
    fn harmonic_sampler_gof() {
        for (m, draws) in [(3u64, 200_000usize), (10, 200_000), (100, 1_000_000)] {
            let mut rng = stream_rng(SEED, 10 + m);
            let mut obs = vec![0u64; m as usize];
            for _ in 0..draws {
                obs[(sample_harmonic(m, &mut rng) - 1) as usize] += 1;
            }
            let p = chi_square_p(&obs, &harmonic_weights(m));
            assert!(p > 0.001, "m = {m}: p = {p}");
        }
    }

    #[test]
    fn harmonic_sampler_gof_large_m() {
        // m = 10^4 stays below the table cutoff but exercises deep binary
        // search; cells are pooled to keep expected counts above 5.
        let m = 10_000u64;
        let mut rng = stream_rng(SEED, 42);
        let weights = harmonic_weights(m);
        let mut obs = vec![0u64; m as usize];
        for _ in 0..1_000_000 {
            obs[(sample_harmonic(m, &mut rng) - 1) as usize] += 1;
        }
        // Pool geometrically: [1,2), [2,4), [4,8), ...
        let mut pooled_obs = Vec::new();
        let mut pooled_p = Vec::new();
        let mut lo = 0usize;
        while lo < m as usize {
            let hi = (2 * (lo + 1) - 1).min(m as usize);
            pooled_obs.push(obs[lo..hi].iter().sum::<u64>());
            pooled_p.push(weights[lo..hi].iter().sum::<f64>());
            lo = hi;
        }
        let p = chi_square_p(&pooled_obs, &pooled_p);
        assert!(p > 0.001, "p = {p}");
    }

    #[test]
    fn harmonic_inverse_closed_form_matches_search() {
        // Exercise the above-cutoff path against a reference linear scan over
        // the same monotone harmonic values.
        let m = 150_000u64;
        let hm = harmonic(m);
        for i in 0..2000 {
            let u = hm * (i as f64 + 0.5) / 2000.0;
            let j = harmonic_inverse(u, m);
            assert!(harmonic(j) >= u, "u = {u}: j = {j} too small");
            assert!(j == 1 || harmonic(j - 1) < u, "u = {u}: j = {j} too large");
        }
        // Top edge.
        assert_eq!(harmonic_inverse(hm, m), m);
    }

    #[test]
    fn split_sampler_small_m() {
        let mut rng = stream_rng(SEED, 3);
        for _ in 0..100 {
            assert_eq!(sample_split(2, &mut rng), 1);
        }
        let draws = 200_000;
        let mut ones = 0u64;
        for _ in 0..draws {
            if sample_split(3, &mut rng) == 1 {
                ones += 1;
            }
        }
        let sd = (draws as f64 * 0.25).sqrt();
        assert!((ones as f64 - draws as f64 * 0.5).abs() <= 4.0 * sd);
    }

    #[test]
    fn split_sampler_m4_frequencies() {
        // q(4, .) = (4/11, 3/11, 4/11).
        let mut rng = stream_rng(SEED, 4);
        let draws = 1_000_000usize;
        let mut obs = [0u64; 3];
        for _ in 0..draws {
            obs[(sample_split(4, &mut rng) - 1) as usize] += 1;
        }
        for (o, p) in obs.iter().zip([4.0 / 11.0, 3.0 / 11.0, 4.0 / 11.0]) {
            let sd = (draws as f64 * p * (1.0 - p)).sqrt();
            assert!((*o as f64 - draws as f64 * p).abs() <= 4.0 * sd);
        }
    }

    #[test]
    fn split_sampler_gof() {
        for (m, draws) in [(10u64, 500_000usize), (100, 1_000_000)] {
            let mut rng = stream_rng(SEED, 100 + m);
            let mut obs = vec![0u64; m as usize - 1];
            for _ in 0..draws {
                obs[(sample_split(m, &mut rng) - 1) as usize] += 1;
            }
            let p = chi_square_p(&obs, &split_weights(m));
            assert!(p > 0.001, "m = {m}: p = {p}");
        }
    }

    #[test]
    fn chain_trivial_and_n2() {
        let mut rng = stream_rng(SEED, 5);
        assert_eq!(simulate_chain(1, &mut rng), (0.0, 0, vec![1]));
        let mut sum = 0.0;
        let runs = 100_000;
        for _ in 0..runs {
            let (d, hops, visited) = simulate_chain(2, &mut rng);
            assert_eq!(hops, 1);
            assert_eq!(visited, vec![2, 1]);
            sum += d;
        }
        // D_2 is Exponential(1): mean 1, variance 1.
        let mean = sum / runs as f64;
        assert!((mean - 1.0).abs() <= 4.0 / (runs as f64).sqrt());
    }

    #[test]
    fn chain_visits_match_occupancy() {
        let t = build_exact_tables(200, 1).unwrap();
        let mut rng = stream_rng(SEED, 6);
        let runs = 100_000;
        let mut hits = 0u64;
        for _ in 0..runs {
            let (_, _, visited) = simulate_chain(200, &mut rng);
            if visited.contains(&2) {
                hits += 1;
            }
        }
        let p = t.occupancy(200, 2);
        let sd = (runs as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (hits as f64 - runs as f64 * p).abs() <= 4.0 * sd,
            "hits = {hits}, expected {}",
            runs as f64 * p
        );
    }

    #[test]
    fn tree_n2_identity() {
        let mut rng = stream_rng(SEED, 7);
        for _ in 0..100 {
            let (length, leaf_sum) = simulate_tree(2, &mut rng).unwrap();
            assert!((length - leaf_sum / 2.0).abs() <= 1e-15 * length.max(1.0));
        }
        assert!(simulate_tree(1, &mut rng).is_err());
    }

    #[test]
    fn tree_means_match_exact_tables() {
        let t = build_exact_tables(1000, 1).unwrap();
        let mut rng = stream_rng(SEED, 8);
        let runs = 10_000;
        let mut w_len = Welford::new();
        let mut w_height = Welford::new();
        for _ in 0..runs {
            let (length, leaf_sum) = simulate_tree(1000, &mut rng).unwrap();
            w_len.push(length);
            w_height.push(leaf_sum / 1000.0);
        }
        let se_len = (w_len.m2 / (runs as f64 - 1.0) / runs as f64).sqrt();
        assert!(
            (w_len.mean - t.length(1000)).abs() <= 4.0 * se_len,
            "length {} vs {}",
            w_len.mean,
            t.length(1000)
        );
        let se_h = (w_height.m2 / (runs as f64 - 1.0) / runs as f64).sqrt();
        assert!(
            (w_height.mean - t.ed(1000)).abs() <= 4.0 * se_h,
            "height {} vs {}",
            w_height.mean,
            t.ed(1000)
        );
    }

    #[test]
    fn chain_and_tree_agree() {
        let n = 300u64;
        let mut rng = stream_rng(SEED, 9);
        let runs = 20_000;
        let mut w_chain = Welford::new();
        for _ in 0..runs {
            w_chain.push(simulate_chain(n, &mut rng).0);
        }
        let tree_runs = 2_000;
        let mut w_tree = Welford::new();
        for _ in 0..tree_runs {
            let (_, leaf_sum) = simulate_tree(n, &mut rng).unwrap();
            w_tree.push(leaf_sum / n as f64);
        }
        let var = w_chain.m2 / (runs as f64 - 1.0) / runs as f64
            + w_tree.m2 / (tree_runs as f64 - 1.0) / tree_runs as f64;
        assert!(
            (w_chain.mean - w_tree.mean).abs() <= 5.0 * var.sqrt(),
            "chain {} vs tree {}",
            w_chain.mean,
            w_tree.mean
        );
    }

    #[test]
    fn clade_fraction_boundaries() {
        let mut rng = stream_rng(SEED, 11);
        assert_eq!(clade_fraction(100, 0.0, &mut rng), 1.0);
        // Far beyond absorption the fraction is 1/n.
        assert_eq!(clade_fraction(100, 1e9, &mut rng), 0.01);
    }

    #[test]
    fn paintbox_moments() {
        // E[(K/n)^s] -> exp(-t (psi(s+1) - psi(1))) with O(1/n) bias.
        let n = 1_000_000u64;
        let runs = 100_000;
        let cases = [
            (1.0, 1.0, (-1.0f64).exp()),
            (2.0, 0.5, (-0.75f64).exp()),
            (1.5, 2.0, (-2.0 * (crate::specfun::digamma_real(2.5) + EULER_GAMMA)).exp()),
        ];
        for (idx, &(s, t, target)) in cases.iter().enumerate() {
            let mut rng = stream_rng(SEED, 20 + idx as u64);
            let mut w = Welford::new();
            for _ in 0..runs {
                w.push(clade_fraction(n, t, &mut rng).powf(s));
            }
            let se = (w.m2 / (runs as f64 - 1.0) / runs as f64).sqrt();
            let slack = 4.0 * se + 10.0 / n as f64;
            assert!(
                (w.mean - target).abs() <= slack,
                "s = {s}, t = {t}: {} vs {target} (slack {slack:.2e})",
                w.mean
            );
        }
    }

    #[test]
    fn run_is_deterministic() {
        let config = SimConfig {
            n: 500,
            samples: 4_000,
            seed: 12345,
            mode: SimMode::Chain,
            t: 0.0,
            streams: 4,
            x_grid: vec![1.0, 1.5],
        };
        let a = run(&config).unwrap();
        let b = run(&config).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.count, 4_000);
        assert!(a.variance >= 0.0 && a.stderr > 0.0);
        assert!(a.extra.contains_key("tail_1") && a.extra.contains_key("tail_1.5"));
        assert!(a.min <= a.mean && a.mean <= a.max);
    }

    #[test]
    fn run_chain_mean_matches_exact() {
        let t = build_exact_tables(400, 1).unwrap();
        let config = SimConfig {
            n: 400,
            samples: 50_000,
            seed: 777,
            mode: SimMode::Chain,
            t: 0.0,
            streams: 8,
            x_grid: vec![],
        };
        let s = run(&config).unwrap();
        assert!(
            (s.mean - t.ed(400)).abs() <= 4.0 * s.stderr,
            "{} vs {}",
            s.mean,
            t.ed(400)
        );
        assert!(
            (s.extra["hops_mean"] - t.el(400)).abs()
                <= 4.0 * (s.extra["hops_mean"] / (config.samples as f64).sqrt()).max(0.02),
            "{} vs {}",
            s.extra["hops_mean"],
            t.el(400)
        );
        // Visited-state frequencies reproduce the occupancy rows.
        for j in 2..=6u64 {
            let p = t.occupancy(400, j as usize);
            let sd = (p * (1.0 - p) / config.samples as f64).sqrt();
            let key = format!("visited_{j}");
            assert!(
                (s.extra[&key] - p).abs() <= 4.0 * sd,
                "j = {j}: {} vs {p}",
                s.extra[&key]
            );
        }
    }

    #[test]
    fn run_validates_config() {
        let mut config = SimConfig {
            n: 10,
            samples: 0,
            seed: 1,
            mode: SimMode::Chain,
            t: 0.0,
            streams: 1,
            x_grid: vec![],
        };
        assert!(run(&config).is_err());
        config.samples = 10;
        config.mode = SimMode::Tree;
        config.n = 1;
        assert!(run(&config).is_err());
        config.mode = SimMode::CladeFraction;
        config.t = f64::NAN;
        assert!(run(&config).is_err());
    }

    #[test]
    fn dump_matches_summary() {
        let config = SimConfig {
            n: 50,
            samples: 1_000,
            seed: 9,
            mode: SimMode::Tree,
            t: 0.0,
            streams: 3,
            x_grid: vec![],
        };
        let (s, dump) = run_with_dump(&config, true).unwrap();
        assert_eq!(dump.len(), 1_000);
        let mean = dump.iter().sum::<f64>() / dump.len() as f64;
        assert!((mean - s.mean).abs() <= 1e-12 * mean.abs());
    }
}
