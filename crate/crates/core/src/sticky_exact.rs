//! Exact algebra of the sticky lattice flow on `Z_m`.
//!
//! Every site `x` draws a coin `theta ~ Beta(eps, eps)` per step, and each of
//! its `s_x` particles moves right with probability `theta`. The number of
//! particles sent right from `x` is then `k` with probability
//! `alpha(k) alpha(s_x - k) / beta(s_x)`, and occupation vectors have the
//! invariant law `prod_x beta(s_x)` for every fixed particle count.
//!
//! All Gamma ratios are evaluated through `ln_gamma`; `beta(n)` underflows
//! quickly for small `eps`.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::flows::{CoinLaw, CoinStep};

/// Largest number of occupation vectors the exact routines will enumerate.
pub const MAX_CONFIGS: u128 = 100_000;

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("eps must lie in (0, 1), got {eps}")))
    }
}

fn ln_factorial(k: u32) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

pub fn ln_alpha(k: u32, eps: f64) -> f64 {
    ln_gamma(k as f64 + eps) - ln_factorial(k) - ln_gamma(eps)
}

pub fn ln_beta_fn(n: u32, eps: f64) -> f64 {
    ln_gamma(n as f64 + 2.0 * eps) - ln_factorial(n) - ln_gamma(2.0 * eps)
}

/// `alpha(k) = Gamma(k + eps) / (k! Gamma(eps))`.
pub fn alpha(k: u32, eps: f64) -> f64 {
    if k == 0 {
        1.0
    } else {
        ln_alpha(k, eps).exp()
    }
}

/// `beta(n) = Gamma(n + 2 eps) / (n! Gamma(2 eps))`.
pub fn beta_fn(n: u32, eps: f64) -> f64 {
    if n == 0 {
        1.0
    } else {
        ln_beta_fn(n, eps).exp()
    }
}

/// Both sides of `C(n,k) E[theta^k (1-theta)^(n-k)] = alpha(k) alpha(n-k) / beta(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentIdentity {
    pub n: u32,
    pub k: u32,
    pub eps: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
}

/// Evaluates the left side from the Beta-function moment
/// `B(k + eps, n - k + eps) / B(eps, eps)` and the right side from
/// [`alpha`] and [`beta_fn`].
pub fn beta_moment_identity(n: u32, k: u32, eps: f64) -> Result<MomentIdentity> {
    check_eps(eps)?;
    if k > n {
        return Err(invalid(format!("need k <= n, got k = {k}, n = {n}")));
    }
    let ln_binom = ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k);
    let ln_moment = ln_gamma(2.0 * eps) - 2.0 * ln_gamma(eps)
        + ln_gamma(k as f64 + eps)
        + ln_gamma((n - k) as f64 + eps)
        - ln_gamma(n as f64 + 2.0 * eps);
    let lhs = (ln_binom + ln_moment).exp();
    let rhs = (ln_alpha(k, eps) + ln_alpha(n - k, eps) - ln_beta_fn(n, eps)).exp();
    Ok(MomentIdentity {
        n,
        k,
        eps,
        lhs,
        rhs,
        rel_err: (lhs - rhs).abs() / lhs.abs().max(rhs.abs()),
    })
}

/// Occupation numbers `s_x` on `Z_m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct OccupationConfig {
    pub s: Vec<u32>,
}

impl OccupationConfig {
    pub fn new(s: Vec<u32>) -> Self {
        Self { s }
    }

    pub fn from_positions(m: u32, positions: &[u32]) -> Self {
        let mut s = vec![0; m as usize];
        for &x in positions {
            s[x as usize] += 1;
        }
        Self { s }
    }

    pub fn m(&self) -> usize {
        self.s.len()
    }

    pub fn n(&self) -> u32 {
        self.s.iter().sum()
    }

    /// Unnormalised invariant weight `prod_x beta(s_x)`, as a logarithm.
    pub fn ln_weight(&self, eps: f64) -> f64 {
        self.s.iter().map(|&k| ln_beta_fn(k, eps)).sum()
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, j| acc.saturating_mul(n - j) / (j + 1))
}

/// Number of occupation vectors of `n` particles on `m` sites.
pub fn config_count(m: usize, n: u32) -> u128 {
    if m == 0 {
        return u128::from(n == 0);
    }
    binomial(n as u128 + m as u128 - 1, m as u128 - 1)
}

fn check_circle(m: usize, n: u32) -> Result<()> {
    if m < 3 {
        return Err(invalid(format!("need m >= 3, got {m}")));
    }
    if n < 1 {
        return Err(invalid("need at least one particle"));
    }
    let count = config_count(m, n);
    if count > MAX_CONFIGS {
        return Err(Error::StateSpaceTooLarge {
            states: count,
            limit: MAX_CONFIGS,
        });
    }
    Ok(())
}

/// All occupation vectors of `n` particles on `Z_m`, in lexicographic order.
pub fn enumerate_configs(m: usize, n: u32) -> Result<Vec<OccupationConfig>> {
    check_circle(m, n)?;
    let mut out = Vec::new();
    let mut s = vec![0u32; m];
    fn fill(s: &mut Vec<u32>, x: usize, left: u32, out: &mut Vec<OccupationConfig>) {
        if x + 1 == s.len() {
            s[x] = left;
            out.push(OccupationConfig::new(s.clone()));
            return;
        }
        for k in (0..=left).rev() {
            s[x] = k;
            fill(s, x + 1, left - k, out);
        }
    }
    fill(&mut s, 0, n, &mut out);
    Ok(out)
}

/// The normalised invariant law `mu_n(s) ~ prod_x beta(s_x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantMeasure {
    pub m: usize,
    pub n: u32,
    pub eps: f64,
    pub configs: Vec<OccupationConfig>,
    pub probs: Vec<f64>,
    index: HashMap<OccupationConfig, usize>,
}

impl InvariantMeasure {
    pub fn probability(&self, s: &OccupationConfig) -> f64 {
        self.index.get(s).map_or(0.0, |&i| self.probs[i])
    }

    pub fn index_of(&self, s: &OccupationConfig) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// `mu_n` conditioned on `keep`.
    pub fn conditioned(
        &self,
        keep: impl Fn(&OccupationConfig) -> bool,
    ) -> BTreeMap<OccupationConfig, f64> {
        let kept: Vec<(&OccupationConfig, f64)> = self
            .configs
            .iter()
            .zip(&self.probs)
            .filter(|(c, _)| keep(c))
            .map(|(c, &p)| (c, p))
            .collect();
        let z: f64 = kept.iter().map(|(_, p)| p).sum();
        kept.into_iter().map(|(c, p)| (c.clone(), p / z)).collect()
    }
}

pub fn invariant_measure(m: usize, n: u32, eps: f64) -> Result<InvariantMeasure> {
    check_eps(eps)?;
    let configs = enumerate_configs(m, n)?;
    let ln_w: Vec<f64> = configs.iter().map(|c| c.ln_weight(eps)).collect();
    let top = ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = ln_w.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    let probs = w.into_iter().map(|x| x / z).collect();
    let index = configs
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, c)| (c, i))
        .collect();
    Ok(InvariantMeasure {
        m,
        n,
        eps,
        configs,
        probs,
        index,
    })
}

/// Edge occupation numbers of one transition: `right[x]` particles go
/// `x -> x+1` and `left[x]` go `x -> x-1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ChannelFlow {
    pub right: Vec<u32>,
    pub left: Vec<u32>,
}

impl ChannelFlow {
    pub fn source(&self) -> OccupationConfig {
        OccupationConfig::new(
            self.right
                .iter()
                .zip(&self.left)
                .map(|(r, l)| r + l)
                .collect(),
        )
    }

    /// `s''_x = right[x-1] + left[x+1]`.
    pub fn target(&self) -> OccupationConfig {
        let m = self.right.len();
        OccupationConfig::new(
            (0..m)
                .map(|x| self.right[(x + m - 1) % m] + self.left[(x + 1) % m])
                .collect(),
        )
    }

    /// The same edges traversed backwards, a channel from `target()` to
    /// `source()`.
    pub fn reversed(&self) -> Self {
        let m = self.right.len();
        Self {
            right: (0..m).map(|y| self.left[(y + 1) % m]).collect(),
            left: (0..m).map(|y| self.right[(y + m - 1) % m]).collect(),
        }
    }

    /// `ln prod_x alpha(right[x]) alpha(left[x])`, symmetric under reversal.
    pub fn ln_edge_weight(&self, eps: f64) -> f64 {
        self.right
            .iter()
            .chain(&self.left)
            .map(|&k| ln_alpha(k, eps))
            .sum()
    }
}

/// Every channel out of `source`.
pub fn channels_from(source: &OccupationConfig) -> Vec<ChannelFlow> {
    let m = source.m();
    let mut out = Vec::new();
    let mut right = vec![0u32; m];
    fn fill(s: &[u32], x: usize, right: &mut Vec<u32>, out: &mut Vec<ChannelFlow>) {
        if x == s.len() {
            let left = s.iter().zip(right.iter()).map(|(a, r)| a - r).collect();
            out.push(ChannelFlow {
                right: right.clone(),
                left,
            });
            return;
        }
        for k in 0..=s[x] {
            right[x] = k;
            fill(s, x + 1, right, out);
        }
    }
    fill(&source.s, 0, &mut right, &mut out);
    out
}

pub fn ln_channel_probability(
    source: &OccupationConfig,
    channel: &ChannelFlow,
    eps: f64,
) -> Result<f64> {
    check_eps(eps)?;
    if channel.right.len() != source.m() || channel.source() != *source {
        return Err(Error::Mismatch(format!(
            "channel {channel:?} does not start from {:?}",
            source.s
        )));
    }
    Ok(channel.ln_edge_weight(eps) - source.ln_weight(eps))
}

/// `prod_x alpha(right[x]) alpha(left[x]) / beta(s_x)`.
pub fn channel_probability(
    source: &OccupationConfig,
    channel: &ChannelFlow,
    eps: f64,
) -> Result<f64> {
    Ok(ln_channel_probability(source, channel, eps)?.exp())
}

/// Sparse transition kernel on the enumerated configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl TransitionKernel {
    /// `mu P`.
    pub fn push_forward(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; mu.len()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                out[j] += mu[i] * p;
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|e| e.1).sum())
            .collect()
    }
}

pub fn transition_kernel(measure: &InvariantMeasure) -> Result<TransitionKernel> {
    let rows = measure
        .configs
        .iter()
        .map(|src| {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            for ch in channels_from(src) {
                let p = channel_probability(src, &ch, measure.eps)?;
                let j = measure
                    .index_of(&ch.target())
                    .expect("particles are conserved");
                *acc.entry(j).or_insert(0.0) += p;
            }
            Ok(acc.into_iter().collect())
        })
        .collect::<Result<_>>()?;
    Ok(TransitionKernel { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstChannel {
    pub source: Vec<u32>,
    pub right: Vec<u32>,
    pub left: Vec<u32>,
}

/// Outcome of the exhaustive detailed-balance check. Violations are
/// relative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetailedBalanceReport {
    pub m: usize,
    pub n: u32,
    pub eps: f64,
    pub states: usize,
    pub channels: usize,
    /// `mu(s') p_c(s' -> s'')` against `mu(s'') p_rev(s'' -> s')`.
    pub max_violation: f64,
    pub worst_channel: Option<WorstChannel>,
    /// `mu(s') p_c` against `prod alpha(edges) / Z`.
    pub max_product_form_violation: f64,
    /// Largest `|sum_c p_c - 1|` over sources.
    pub max_row_sum_error: f64,
    /// Largest relative gap between `mu P` and `mu`.
    pub max_stationarity_violation: f64,
}

impl DetailedBalanceReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_violation <= tol
            && self.max_product_form_violation <= tol
            && self.max_row_sum_error <= tol
            && self.max_stationarity_violation <= tol
    }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Checks every channel of every configuration of `n` particles on `Z_m`.
pub fn check_detailed_balance(m: usize, n: u32, eps: f64) -> Result<DetailedBalanceReport> {
    let measure = invariant_measure(m, n, eps)?;
    let ln_z = {
        let ln_w: Vec<f64> = measure.configs.iter().map(|c| c.ln_weight(eps)).collect();
        let top = ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        top + ln_w.iter().map(|l| (l - top).exp()).sum::<f64>().ln()
    };
    let mut report = DetailedBalanceReport {
        m,
        n,
        eps,
        states: measure.configs.len(),
        channels: 0,
        max_violation: 0.0,
        worst_channel: None,
        max_product_form_violation: 0.0,
        max_row_sum_error: 0.0,
        max_stationarity_violation: 0.0,
    };
    for (i, src) in measure.configs.iter().enumerate() {
        let mut row_sum = 0.0;
        for ch in channels_from(src) {
            report.channels += 1;
            let p = channel_probability(src, &ch, eps)?;
            row_sum += p;
            let forward = measure.probs[i] * p;
            let rev = ch.reversed();
            let tgt = ch.target();
            let back = measure.probability(&tgt) * channel_probability(&tgt, &rev, eps)?;
            let v = rel_gap(forward, back);
            if v > report.max_violation || report.worst_channel.is_none() {
                report.max_violation = report.max_violation.max(v);
                report.worst_channel = Some(WorstChannel {
                    source: src.s.clone(),
                    right: ch.right.clone(),
                    left: ch.left.clone(),
                });
            }
            let product_form = (ch.ln_edge_weight(eps) - ln_z).exp();
            report.max_product_form_violation = report
                .max_product_form_violation
                .max(rel_gap(forward, product_form));
        }
        report.max_row_sum_error = report.max_row_sum_error.max((row_sum - 1.0).abs());
    }
    let kernel = transition_kernel(&measure)?;
    let pushed = kernel.push_forward(&measure.probs);
    report.max_stationarity_violation = pushed
        .iter()
        .zip(&measure.probs)
        .map(|(a, b)| rel_gap(*a, *b))
        .fold(0.0, f64::max);
    Ok(report)
}

/// Occupation vectors of the sticky lattice flow, started from particles at
/// `starts`, after each of `steps` steps (the initial vector first).
pub fn simulate_sticky_lattice<R: Rng + ?Sized>(
    m: u32,
    starts: &[u32],
    law: CoinLaw,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<OccupationConfig>> {
    let mut out = Vec::with_capacity(steps + 1);
    run_sticky_lattice(m, starts, law, steps, rng, |pos| {
        out.push(OccupationConfig::from_positions(m, pos))
    })?;
    Ok(out)
}

/// Drives particles through `steps` coin steps, calling `visit` on the
/// positions before the first step and after each one.
pub fn run_sticky_lattice<R: Rng + ?Sized>(
    m: u32,
    starts: &[u32],
    law: CoinLaw,
    steps: usize,
    rng: &mut R,
    mut visit: impl FnMut(&[u32]),
) -> Result<()> {
    if m < 3 {
        return Err(invalid(format!("need m >= 3, got {m}")));
    }
    if starts.is_empty() {
        return Err(invalid("need at least one particle"));
    }
    if let Some(&x) = starts.iter().find(|&&x| x >= m) {
        return Err(Error::OutsideDomain(format!("{x} in Z_{m}")));
    }
    let mut pos = starts.to_vec();
    visit(&pos);
    for _ in 0..steps {
        let step = CoinStep::sample(m, law, rng);
        for x in pos.iter_mut() {
            *x = step.move_particle(*x, rng.random());
        }
        visit(&pos);
    }
    Ok(())
}

/// Fraction of time spent in each occupation vector after `burn_in` steps.
pub fn empirical_occupancy<R: Rng + ?Sized>(
    m: u32,
    starts: &[u32],
    law: CoinLaw,
    burn_in: usize,
    steps: usize,
    rng: &mut R,
) -> Result<BTreeMap<OccupationConfig, f64>> {
    let mut counts: HashMap<Vec<u32>, u64> = HashMap::new();
    let mut t = 0usize;
    let mut s = vec![0u32; m as usize];
    run_sticky_lattice(m, starts, law, burn_in + steps, rng, |pos| {
        if t > burn_in {
            s.fill(0);
            for &x in pos {
                s[x as usize] += 1;
            }
            *counts.entry(s.clone()).or_insert(0) += 1;
        }
        t += 1;
    })?;
    Ok(counts
        .into_iter()
        .map(|(s, c)| (OccupationConfig::new(s), c as f64 / steps as f64))
        .collect())
}

/// Total variation distance between two laws on occupation vectors.
pub fn total_variation(
    p: &BTreeMap<OccupationConfig, f64>,
    q: &BTreeMap<OccupationConfig, f64>,
) -> f64 {
    let mut gap = 0.0;
    for (c, a) in p {
        gap += (a - q.get(c).copied().unwrap_or(0.0)).abs();
    }
    for (c, b) in q {
        if !p.contains_key(c) {
            gap += b;
        }
    }
    gap / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;
    use crate::stats::{chi_square_uniform, SE_BAND};
    use proptest::prelude::*;

    /// `(x)_k / k!` as a rising product, independent of `ln_gamma`.
    fn rising_over_factorial(x: f64, k: u32) -> f64 {
        (0..k).map(|j| (x + j as f64) / (j as f64 + 1.0)).product()
    }

    const EPS: [f64; 5] = [0.05, 0.1, 0.3, 0.5, 0.9];

    #[test]
    fn alpha_beta_examples() {
        for eps in EPS {
            assert_eq!(alpha(0, eps), 1.0);
            assert_eq!(beta_fn(0, eps), 1.0);
            assert!((alpha(1, eps) - eps).abs() < 1e-12 * eps);
            assert!((beta_fn(1, eps) - 2.0 * eps).abs() < 1e-12 * eps);
            assert!((beta_fn(2, eps) - eps * (1.0 + 2.0 * eps)).abs() < 1e-12);
            for k in 0..12 {
                let a = rising_over_factorial(eps, k);
                let b = rising_over_factorial(2.0 * eps, k);
                assert!((alpha(k, eps) - a).abs() < 1e-11 * a);
                assert!((beta_fn(k, eps) - b).abs() < 1e-11 * b);
            }
        }
    }

    #[test]
    fn moment_identity_against_rising_products() {
        for eps in EPS {
            for n in 0..=8u32 {
                for k in 0..=n {
                    let id = beta_moment_identity(n, k, eps).unwrap();
                    assert!(id.rel_err <= 1e-10, "{id:?}");
                    // C(n,k) [eps]_k [eps]_{n-k} / [2 eps]_n with [x]_j rising
                    let binom = binomial(n as u128, k as u128) as f64;
                    let rising = |x: f64, j: u32| (0..j).map(|i| x + i as f64).product::<f64>();
                    let oracle = binom * rising(eps, k) * rising(eps, n - k) / rising(2.0 * eps, n);
                    assert!((id.lhs - oracle).abs() <= 1e-10 * oracle);
                }
            }
        }
        let half = beta_moment_identity(1, 0, 0.3).unwrap();
        assert!((half.lhs - 0.5).abs() < 1e-12);
        let eps = 0.3;
        let mid = beta_moment_identity(2, 1, eps).unwrap();
        assert!((mid.rhs - eps / (1.0 + 2.0 * eps)).abs() < 1e-12);
        assert!(beta_moment_identity(2, 3, 0.3).is_err());
        assert!(beta_moment_identity(2, 1, 1.0).is_err());
    }

    #[test]
    fn small_eps_does_not_underflow() {
        let id = beta_moment_identity(200, 100, 1e-3).unwrap();
        assert!(id.lhs > 0.0 && id.rel_err < 1e-9);
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_configs(4, 2).unwrap().len(), 10);
        assert_eq!(enumerate_configs(5, 4).unwrap().len(), 70);
        let all = enumerate_configs(3, 3).unwrap();
        assert!(all.iter().all(|c| c.n() == 3));
        assert!(enumerate_configs(2, 2).is_err());
        assert!(enumerate_configs(4, 0).is_err());
        assert!(matches!(
            enumerate_configs(30, 30),
            Err(Error::StateSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn invariant_measure_examples() {
        let one = invariant_measure(5, 1, 0.2).unwrap();
        assert!(one.probs.iter().all(|p| (p - 0.2).abs() < 1e-14));
        let eps = 0.25;
        let mu = invariant_measure(4, 2, eps).unwrap();
        assert!((mu.probs.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let ratio = mu.probability(&OccupationConfig::new(vec![2, 0, 0, 0]))
            / mu.probability(&OccupationConfig::new(vec![1, 1, 0, 0]));
        assert!((ratio - (1.0 + 2.0 * eps) / (4.0 * eps)).abs() < 1e-12);
    }

    #[test]
    fn channel_examples() {
        let eps = 0.4;
        let single = OccupationConfig::new(vec![0, 1, 0]);
        let chans = channels_from(&single);
        assert_eq!(chans.len(), 2);
        for ch in &chans {
            assert!((channel_probability(&single, ch, eps).unwrap() - 0.5).abs() < 1e-14);
        }
        let heap = OccupationConfig::new(vec![5, 0, 0, 0]);
        let all_right = ChannelFlow {
            right: vec![5, 0, 0, 0],
            left: vec![0; 4],
        };
        let p = channel_probability(&heap, &all_right, eps).unwrap();
        assert!((p - alpha(5, eps) / beta_fn(5, eps)).abs() < 1e-14);
        assert_eq!(all_right.target().s, vec![0, 5, 0, 0]);
        assert!(channel_probability(&single, &all_right, eps).is_err());
        let sum: f64 = channels_from(&OccupationConfig::new(vec![2, 0, 3, 1]))
            .iter()
            .map(|ch| {
                channel_probability(&OccupationConfig::new(vec![2, 0, 3, 1]), ch, eps).unwrap()
            })
            .sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reversal_is_an_involution() {
        let ch = ChannelFlow {
            right: vec![1, 0, 2, 0, 1],
            left: vec![0, 3, 1, 0, 0],
        };
        let rev = ch.reversed();
        assert_eq!(rev.source(), ch.target());
        assert_eq!(rev.target(), ch.source());
        assert_eq!(rev.reversed(), ch);
    }

    #[test]
    fn detailed_balance_examples() {
        let r = check_detailed_balance(4, 2, 0.25).unwrap();
        assert!(r.passes(1e-10), "{r:?}");
        let r1 = check_detailed_balance(6, 1, 0.7).unwrap();
        assert!(r1.max_violation < 1e-14);
        let json = serde_json::to_value(&r).unwrap();
        for key in ["m", "n", "eps", "max_violation", "worst_channel"] {
            assert!(json.get(key).is_some());
        }
    }

    #[test]
    fn kernel_rows_are_stochastic() {
        let mu = invariant_measure(3, 3, 0.6).unwrap();
        let k = transition_kernel(&mu).unwrap();
        assert!(k.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn two_point_coins_coalesce() {
        let mut rng = replica_rng(1, 0);
        let path = simulate_sticky_lattice(6, &[0, 0, 0], CoinLaw::TwoPoint, 50, &mut rng).unwrap();
        for c in &path {
            assert_eq!(c.s.iter().filter(|&&k| k > 0).count(), 1);
        }
    }

    #[test]
    fn tagged_particle_is_simple_walk() {
        let law = CoinLaw::beta(0.2).unwrap();
        let mut rng = replica_rng(2, 0);
        let mut counts = [0u64; 2];
        let mut last = 0u32;
        run_sticky_lattice(7, &[0, 0, 3], law, 100_000, &mut rng, |pos| {
            if pos[0] == (last + 1) % 7 {
                counts[1] += 1;
            } else if pos[0] != last {
                counts[0] += 1;
            }
            last = pos[0];
        })
        .unwrap();
        let (_, _, p) = chi_square_uniform(&counts);
        assert!(p > 0.01, "{counts:?}");
    }

    #[test]
    fn occupancy_of_even_circle_keeps_parity_class() {
        // on even m every particle flips parity each step, so particles that
        // start with equal parity keep it and only that class is visited
        let eps = 0.4;
        let law = CoinLaw::beta(eps).unwrap();
        let mut rng = replica_rng(8, 0);
        let emp = empirical_occupancy(4, &[0, 2], law, 1000, 400_000, &mut rng).unwrap();
        let same_parity = |c: &OccupationConfig| {
            let occupied: Vec<usize> = (0..c.m()).filter(|&x| c.s[x] > 0).collect();
            occupied.iter().all(|x| x % 2 == occupied[0] % 2)
        };
        assert!(emp.keys().all(same_parity));
        let mu = invariant_measure(4, 2, eps).unwrap();
        let exact = mu.conditioned(same_parity);
        assert!(total_variation(&emp, &exact) < 0.02);
        assert!(total_variation(&emp, &mu.conditioned(|_| true)) > 0.1);
    }

    #[test]
    fn occupancy_of_odd_circle() {
        let eps = 0.3;
        let law = CoinLaw::beta(eps).unwrap();
        let mut rng = replica_rng(3, 0);
        let emp = empirical_occupancy(5, &[0, 1], law, 1000, 200_000, &mut rng).unwrap();
        let mu = invariant_measure(5, 2, eps).unwrap();
        let exact = mu.conditioned(|_| true);
        assert!(total_variation(&emp, &exact) < 0.02);
        let together: f64 = emp
            .iter()
            .filter(|(c, _)| c.s.contains(&2))
            .map(|e| e.1)
            .sum();
        let exact_together: f64 = exact
            .iter()
            .filter(|(c, _)| c.s.contains(&2))
            .map(|e| e.1)
            .sum();
        // correlated samples: a loose band on the sticking fraction
        assert!((together - exact_together).abs() < SE_BAND * 0.005);
    }

    proptest! {
        #[test]
        fn product_form_holds_for_random_configs(
            s in prop::collection::vec(0u32..4, 3..6),
            eps in 0.05f64..0.95,
        ) {
            let src = OccupationConfig::new(s);
            prop_assume!(src.n() > 0);
            let mut total = 0.0;
            for ch in channels_from(&src) {
                let p = channel_probability(&src, &ch, eps).unwrap();
                total += p;
                let rev = ch.reversed();
                let fwd = src.ln_weight(eps) + ln_channel_probability(&src, &ch, eps).unwrap();
                let back = ch.target().ln_weight(eps)
                    + ln_channel_probability(&ch.target(), &rev, eps).unwrap();
                prop_assert!((fwd - back).abs() < 1e-10);
            }
            prop_assert!((total - 1.0).abs() < 1e-10);
        }
    }
}
