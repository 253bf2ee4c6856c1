//! Small statistical toolkit shared by the estimators: jackknife standard
//! errors, Kolmogorov-Smirnov statistics and chi-square tests.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Width of the acceptance band used throughout the crate, in standard errors.
pub const SE_BAND: f64 = 3.0;

/// Mean with its leave-one-out jackknife standard error.
///
/// For a plain mean the jackknife error coincides with `s / sqrt(n)`; it is
/// computed through the pseudo-values anyway so that ratio-type statistics
/// built on top share one code path.
pub fn jackknife_mean(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let total: f64 = xs.iter().sum();
    let mean = total / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let nf = n as f64;
    let loo = xs.iter().map(|x| (total - x) / (nf - 1.0));
    let spread: f64 = loo.map(|t| (t - mean).powi(2)).sum();
    (mean, ((nf - 1.0) / nf * spread).sqrt())
}

/// Unbiased sample variance with its jackknife standard error.
pub fn jackknife_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n < 3 {
        return (f64::NAN, f64::NAN);
    }
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    // centred sums keep the leave-one-out updates well conditioned
    let s1: f64 = xs.iter().map(|x| x - mean).sum();
    let s2: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    let var = (s2 - s1 * s1 / nf) / (nf - 1.0);
    let loo: Vec<f64> = xs
        .iter()
        .map(|x| {
            let d = x - mean;
            let t1 = s1 - d;
            let t2 = s2 - d * d;
            (t2 - t1 * t1 / (nf - 1.0)) / (nf - 2.0)
        })
        .collect();
    let loo_mean = loo.iter().sum::<f64>() / nf;
    let spread: f64 = loo.iter().map(|v| (v - loo_mean).powi(2)).sum();
    (var, ((nf - 1.0) / nf * spread).sqrt())
}

/// `sum(num) / sum(den)` with its jackknife standard error.
pub fn jackknife_ratio(num: &[f64], den: &[f64]) -> (f64, f64) {
    assert_eq!(num.len(), den.len());
    let n = num.len();
    let (sn, sd): (f64, f64) = (num.iter().sum(), den.iter().sum());
    let ratio = sn / sd;
    if n < 2 {
        return (ratio, f64::INFINITY);
    }
    let nf = n as f64;
    let loo: Vec<f64> = num
        .iter()
        .zip(den)
        .map(|(a, b)| (sn - a) / (sd - b))
        .collect();
    let loo_mean = loo.iter().sum::<f64>() / nf;
    let spread: f64 = loo.iter().map(|r| (r - loo_mean).powi(2)).sum();
    (ratio, ((nf - 1.0) / nf * spread).sqrt())
}

/// Outcome of a Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    /// Asymptotic p-value from the Kolmogorov distribution.
    pub p_value_bound: f64,
    pub n1: usize,
    /// `None` for a one-sample test against a reference CDF.
    pub n2: Option<usize>,
}

impl KsResult {
    pub fn effective_size(&self) -> f64 {
        match self.n2 {
            Some(n2) => (self.n1 * n2) as f64 / (self.n1 + n2) as f64,
            None => self.n1 as f64,
        }
    }

    /// Critical value of the statistic at significance `alpha`.
    pub fn critical_value(&self, alpha: f64) -> f64 {
        ks_critical_coefficient(alpha) / self.effective_size().sqrt()
    }

    pub fn passes(&self, alpha: f64) -> bool {
        self.statistic < self.critical_value(alpha)
    }
}

/// `c(alpha)` with `P(sqrt(n) D > c) ~ alpha` for large samples.
pub fn ks_critical_coefficient(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// Survival function of the Kolmogorov distribution,
/// `Q(x) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 x^2)`.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.2 {
        // the alternating series converges slowly here and the value is 1 to
        // machine precision
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Two-sample Kolmogorov-Smirnov test. Ties are handled by advancing both
/// empirical CDFs past equal values before comparing.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let a = sorted(a);
    let b = sorted(b);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let mut out = KsResult {
        statistic: d,
        p_value_bound: 1.0,
        n1: na,
        n2: Some(nb),
    };
    out.p_value_bound = kolmogorov_survival(out.effective_size().sqrt() * d);
    out
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let xs = sorted(xs);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    KsResult {
        statistic: d,
        p_value_bound: kolmogorov_survival(n.sqrt() * d),
        n1: xs.len(),
        n2: None,
    }
}

/// Upper tail probability of the chi-square distribution.
pub fn chi_square_sf(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    dist.sf(statistic)
}

/// Pearson chi-square statistic of the counts against equal expected counts.
/// Returns `(statistic, dof, p_value)`.
pub fn chi_square_uniform(counts: &[u64]) -> (f64, usize, f64) {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dof = counts.len() - 1;
    (stat, dof, chi_square_sf(stat, dof))
}

/// Chi-square test of homogeneity of two histograms over the same bins.
/// Bins empty in both histograms are dropped.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> (f64, usize, f64) {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let (ka, kb) = (
        (nb as f64 / na as f64).sqrt(),
        (na as f64 / nb as f64).sqrt(),
    );
    let mut stat = 0.0;
    let mut bins = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        if x + y == 0 {
            continue;
        }
        bins += 1;
        stat += (ka * x as f64 - kb * y as f64).powi(2) / (x + y) as f64;
    }
    let dof = bins.saturating_sub(1);
    (stat, dof, chi_square_sf(stat, dof))
}
