//! Statistical tests of distributional claims about the flows.
//!
//! Each test returns a typed result and can be summarised as a
//! [`TestReport`] with fields `{test, params, statistic, threshold, verdict}`.
//! Acceptance bands are [`SE_BAND`] standard errors; KS tests use the
//! asymptotic Kolmogorov law at level [`KS_ALPHA`].

use std::collections::VecDeque;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::flows::{
    log_time_increments, sample_sticky_increment, ArratiaLattice, StepModel, StickyWalk,
};
use crate::rng::map_replicas;
use crate::semigroups::{CircleMap, Semigroup, StickyElem};
use crate::stats::{
    chi_square_uniform, jackknife_mean, jackknife_ratio, ks_one_sample, ks_two_sample, KsResult,
    SE_BAND,
};

/// Significance level of the KS acceptance tests.
pub const KS_ALPHA: f64 = 0.01;
/// Smallest sample accepted by a KS test, so the asymptotic law applies.
pub const MIN_KS_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Machine-readable summary of one test. `details` carries the full typed
/// result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub test: String,
    pub params: Value,
    pub statistic: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub details: Value,
}

impl TestReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

fn report<T: Serialize>(
    test: &str,
    params: Value,
    statistic: f64,
    threshold: f64,
    ok: bool,
    details: &T,
) -> TestReport {
    TestReport {
        test: test.to_string(),
        params,
        statistic,
        threshold,
        verdict: Verdict::from_bool(ok),
        details: serde_json::to_value(details).unwrap_or(Value::Null),
    }
}

fn check_replicas(replicas: usize, min: usize) -> Result<()> {
    if replicas < min {
        return Err(invalid(format!(
            "need at least {min} replicas, got {replicas}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Two-point motion of the Arratia lattice flow

/// Where the difference walk lives: the circle `Z_m` or the line `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Geometry {
    Circle(u32),
    Line,
}

impl Geometry {
    fn distance(&self, diff: i64) -> i64 {
        match *self {
            Geometry::Circle(m) => {
                let r = diff.rem_euclid(m as i64);
                r.min(m as i64 - r)
            }
            Geometry::Line => diff.abs(),
        }
    }
}

/// Exact law of the difference of two particles that step independently by
/// +-1 until they meet: increments -2, 0, +2 with probabilities 1/4, 1/2,
/// 1/4, absorbed at 0. Returns, for `t = 0..=steps`, the probability of
/// having met by `t` and the mean distance at `t`.
pub fn difference_walk_dp(
    d: i64,
    steps: usize,
    geometry: Geometry,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if d % 2 != 0 {
        return Err(invalid(format!(
            "distance {d} is odd: the particles never meet"
        )));
    }
    if let Geometry::Circle(m) = geometry {
        if m < 4 || m % 2 != 0 {
            return Err(invalid(format!(
                "circle size must be even and >= 4, got {m}"
            )));
        }
    }
    // offset so that every reachable difference is a valid index
    let span = match geometry {
        Geometry::Circle(m) => m as usize,
        Geometry::Line => 2 * (d.unsigned_abs() as usize + 2 * steps) + 1,
    };
    let offset = match geometry {
        Geometry::Circle(_) => 0,
        Geometry::Line => (span / 2) as i64,
    };
    let wrap = |x: i64| -> usize {
        match geometry {
            Geometry::Circle(m) => x.rem_euclid(m as i64) as usize,
            Geometry::Line => (x + offset) as usize,
        }
    };
    let value = |i: usize| -> i64 { i as i64 - offset };
    let zero = wrap(0);
    let mut dist = vec![0.0; span];
    dist[wrap(d)] = 1.0;
    let mut met = Vec::with_capacity(steps + 1);
    let mut mean_distance = Vec::with_capacity(steps + 1);
    let mut absorbed = dist[zero];
    dist[zero] = 0.0;
    let summarize = |dist: &[f64]| -> f64 {
        dist.iter()
            .enumerate()
            .map(|(i, p)| p * geometry.distance(value(i)) as f64)
            .sum()
    };
    met.push(absorbed);
    mean_distance.push(summarize(&dist));
    for _ in 0..steps {
        let mut next = vec![0.0; span];
        for (i, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let x = value(i);
            next[wrap(x - 2)] += 0.25 * p;
            next[i] += 0.5 * p;
            next[wrap(x + 2)] += 0.25 * p;
        }
        absorbed += next[zero];
        next[zero] = 0.0;
        dist = next;
        met.push(absorbed);
        mean_distance.push(summarize(&dist));
    }
    Ok((met, mean_distance))
}

/// Probability that two particles at distance `d` have met within `steps`.
pub fn meeting_probability_oracle(d: i64, steps: usize, geometry: Geometry) -> Result<f64> {
    Ok(difference_walk_dp(d, steps, geometry)?.0[steps])
}

/// Expected distance after each step, `t = 0..=steps`.
pub fn expected_distance_oracle(d: i64, steps: usize, geometry: Geometry) -> Result<Vec<f64>> {
    Ok(difference_walk_dp(d, steps, geometry)?.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeetingEstimate {
    pub m: u32,
    pub x1: u32,
    pub x2: u32,
    pub steps: usize,
    pub value: f64,
    pub std_error: f64,
    pub replicas: usize,
    pub oracle: f64,
}

impl MeetingEstimate {
    pub fn report(&self) -> TestReport {
        let z = (self.value - self.oracle).abs() / self.std_error.max(f64::MIN_POSITIVE);
        report(
            "meeting_probability",
            json!({ "m": self.m, "x1": self.x1, "x2": self.x2, "steps": self.steps, "replicas": self.replicas }),
            z,
            SE_BAND,
            z <= SE_BAND,
            self,
        )
    }
}

fn check_pair(m: u32, x1: u32, x2: u32) -> Result<i64> {
    if x1 >= m || x2 >= m {
        return Err(Error::OutsideDomain(format!("({x1}, {x2}) in Z_{m}")));
    }
    if x1 == x2 {
        return Err(invalid("starting points must differ"));
    }
    let d = x2 as i64 - x1 as i64;
    if d % 2 != 0 {
        return Err(invalid(format!(
            "starting points {x1} and {x2} have different parity"
        )));
    }
    Ok(d)
}

/// Fraction of replicas in which the particles from `x1` and `x2` have met
/// within `steps` steps of the Arratia lattice flow on `Z_m`.
pub fn meeting_probability(
    m: u32,
    x1: u32,
    x2: u32,
    steps: usize,
    replicas: usize,
    seed: u64,
) -> Result<MeetingEstimate> {
    let model = ArratiaLattice::new(m)?;
    let d = check_pair(m, x1, x2)?;
    if steps < 1 {
        return Err(invalid("need at least one step"));
    }
    check_replicas(replicas, 2)?;
    let hits: Vec<f64> = map_replicas(seed, replicas, |_, rng| {
        let (mut a, mut b) = (x1, x2);
        for _ in 0..steps {
            let step: CircleMap = model.sample_step(rng);
            a = step.table()[a as usize];
            b = step.table()[b as usize];
            if a == b {
                return 1.0;
            }
        }
        0.0
    });
    let (value, std_error) = jackknife_mean(&hits);
    Ok(MeetingEstimate {
        m,
        x1,
        x2,
        steps,
        value,
        std_error,
        replicas,
        oracle: meeting_probability_oracle(d, steps, Geometry::Circle(m))?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceCheck {
    pub m: u32,
    pub x1: u32,
    pub x2: u32,
    pub replicas: usize,
    pub means: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub oracle: Vec<f64>,
    /// Largest `(mean_t - d_0) / se_t` over `t`.
    pub max_excess: f64,
}

impl DistanceCheck {
    pub fn is_supermartingale(&self) -> bool {
        self.max_excess <= SE_BAND
    }

    pub fn report(&self) -> TestReport {
        report(
            "distance_supermartingale",
            json!({ "m": self.m, "x1": self.x1, "x2": self.x2, "horizon": self.means.len() - 1, "replicas": self.replicas }),
            self.max_excess,
            SE_BAND,
            self.is_supermartingale(),
            self,
        )
    }
}

/// Mean circle distance between two particles of the Arratia lattice flow
/// at every step up to `horizon`, with the exact values for comparison.
pub fn distance_supermartingale_check(
    m: u32,
    x1: u32,
    x2: u32,
    horizon: usize,
    replicas: usize,
    seed: u64,
) -> Result<DistanceCheck> {
    let model = ArratiaLattice::new(m)?;
    let d = check_pair(m, x1, x2)?;
    check_replicas(replicas, 2)?;
    let geometry = Geometry::Circle(m);
    let paths: Vec<Vec<f64>> = map_replicas(seed, replicas, |_, rng| {
        let (mut a, mut b) = (x1, x2);
        let mut out = Vec::with_capacity(horizon + 1);
        out.push(geometry.distance(b as i64 - a as i64) as f64);
        for _ in 0..horizon {
            if a != b {
                let step = model.sample_step(rng);
                a = step.table()[a as usize];
                b = step.table()[b as usize];
            }
            out.push(geometry.distance(b as i64 - a as i64) as f64);
        }
        out
    });
    let d0 = geometry.distance(d) as f64;
    let (mut means, mut std_errors) = (Vec::new(), Vec::new());
    let mut max_excess = f64::NEG_INFINITY;
    for t in 0..=horizon {
        let xs: Vec<f64> = paths.iter().map(|p| p[t]).collect();
        let (mean, se) = jackknife_mean(&xs);
        let excess = if se > 0.0 {
            (mean - d0) / se
        } else if mean > d0 {
            f64::INFINITY
        } else {
            0.0
        };
        max_excess = max_excess.max(excess);
        means.push(mean);
        std_errors.push(se);
    }
    Ok(DistanceCheck {
        m,
        x1,
        x2,
        replicas,
        means,
        std_errors,
        oracle: expected_distance_oracle(d, horizon, geometry)?,
        max_excess,
    })
}

// ---------------------------------------------------------------------------
// Sticky convolution law

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvolutionCheck {
    pub s: f64,
    pub t: f64,
    pub lambda: f64,
    pub samples: usize,
    pub atom_composed: f64,
    pub atom_direct: f64,
    /// Standard error of the difference of the two atom frequencies.
    pub atom_se: f64,
    /// KS comparison of the positive parts of `c`.
    pub ks: KsResult,
    pub ks_critical: f64,
}

impl ConvolutionCheck {
    pub fn atom_z(&self) -> f64 {
        (self.atom_composed - self.atom_direct).abs() / self.atom_se.max(f64::MIN_POSITIVE)
    }

    pub fn passes(&self) -> bool {
        self.atom_z() <= SE_BAND && self.ks.passes(KS_ALPHA)
    }

    pub fn report(&self) -> TestReport {
        report(
            "sticky_convolution",
            json!({ "s": self.s, "t": self.t, "lambda": self.lambda, "samples": self.samples }),
            self.ks.statistic,
            self.ks_critical,
            self.passes(),
            self,
        )
    }
}

/// Compares `c` of the composition of independent sticky increments over
/// durations `s` and `t` with `c` of a single increment over `s + t`: the
/// atom at 0 by frequency, the positive part by two-sample KS.
pub fn sticky_convolution_check(
    s: f64,
    t: f64,
    lambda: f64,
    samples: usize,
    seed: u64,
) -> Result<ConvolutionCheck> {
    if !(s > 0.0 && t > 0.0 && s.is_finite() && t.is_finite()) {
        return Err(invalid(format!(
            "durations must be positive, got {s} and {t}"
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    check_replicas(samples, MIN_KS_SAMPLES)?;
    let pairs: Vec<Result<(f64, f64)>> = map_replicas(seed, samples, |_, rng| {
        let first = sample_sticky_increment(s, lambda, rng)?;
        let second = sample_sticky_increment(t, lambda, rng)?;
        let direct = sample_sticky_increment(s + t, lambda, rng)?;
        Ok((first.compose(&second).c(), direct.c()))
    });
    let pairs: Vec<(f64, f64)> = pairs.into_iter().collect::<Result<_>>()?;
    let atom = |xs: &mut dyn Iterator<Item = f64>| -> f64 {
        xs.filter(|&c| c == 0.0).count() as f64 / samples as f64
    };
    let atom_composed = atom(&mut pairs.iter().map(|p| p.0));
    let atom_direct = atom(&mut pairs.iter().map(|p| p.1));
    let n = samples as f64;
    let atom_se =
        ((atom_composed * (1.0 - atom_composed) + atom_direct * (1.0 - atom_direct)) / n).sqrt();
    let composed: Vec<f64> = pairs.iter().map(|p| p.0).filter(|&c| c > 0.0).collect();
    let direct: Vec<f64> = pairs.iter().map(|p| p.1).filter(|&c| c > 0.0).collect();
    let ks = ks_two_sample(&composed, &direct);
    Ok(ConvolutionCheck {
        s,
        t,
        lambda,
        samples,
        atom_composed,
        atom_direct,
        atom_se,
        ks_critical: ks.critical_value(KS_ALPHA),
        ks,
    })
}

// ---------------------------------------------------------------------------
// Poisson snake

/// The spots `{c(s,t) : s < t} \ {0}` of the sticky lattice walk, as levels
/// in units of the space pitch.
///
/// Under every generator, positive levels move rigidly with the walk `A`,
/// so spots are kept as fixed coordinates `level - A` in a deque: `f_*`
/// inserts level 1 at the front and `f_-` deletes the spot at level 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoissonSnake {
    a: i64,
    min_a: i64,
    spots: VecDeque<i64>,
}

impl PoissonSnake {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies one generator step.
    pub fn step(&mut self, g: &StickyElem<i64>) -> Result<()> {
        if *g == StickyElem::MINUS {
            if self.spots.front().is_some_and(|&u| u + self.a == 1) {
                self.spots.pop_front();
            }
            self.a -= 1;
            self.min_a = self.min_a.min(self.a);
        } else if *g == StickyElem::STAR {
            self.spots.push_front(-self.a);
            self.a += 1;
        } else if *g == StickyElem::PLUS {
            self.a += 1;
        } else {
            return Err(invalid(format!("{g:?} is not a sticky generator")));
        }
        Ok(())
    }

    /// `a(0,t)`.
    pub fn a(&self) -> i64 {
        self.a
    }

    /// `a(0,t) + b(0,t)`: no spot lies above this level.
    pub fn height(&self) -> i64 {
        self.a - self.min_a
    }

    /// Spot levels in increasing order.
    pub fn levels(&self) -> impl Iterator<Item = i64> + '_ {
        self.spots.iter().map(move |u| u + self.a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnakeStatistics {
    pub lambda: f64,
    pub dt: f64,
    pub time: f64,
    pub window: f64,
    pub replicas: usize,
    /// Full windows below the boundary height, over all replicas.
    pub windows: usize,
    pub mean_count: f64,
    pub count_se: f64,
    pub expected_count: f64,
    pub spacing_ks: Option<KsResult>,
    pub spacing_ks_critical: Option<f64>,
}

impl SnakeStatistics {
    pub fn count_z(&self) -> f64 {
        (self.mean_count - self.expected_count).abs() / self.count_se.max(f64::MIN_POSITIVE)
    }

    pub fn count_passes(&self) -> bool {
        self.count_z() <= SE_BAND
    }

    pub fn spacing_passes(&self) -> bool {
        self.spacing_ks.is_some_and(|k| k.passes(KS_ALPHA))
    }

    pub fn report(&self) -> TestReport {
        report(
            "snake_spot_statistics",
            json!({ "lambda": self.lambda, "dt": self.dt, "time": self.time, "window": self.window, "replicas": self.replicas }),
            self.count_z(),
            SE_BAND,
            self.count_passes() && self.spacing_passes(),
            self,
        )
    }
}

/// Most spacings fed to the KS test; the discrete walk is exponential only
/// up to a relative rate error of order `sqrt(dt) / lambda`.
pub const MAX_SPACINGS: usize = 20_000;

/// Runs the sticky lattice walk for `time` and collects the spots below the
/// boundary: counts in consecutive windows of length `window` and spacings
/// between neighbouring spots, all in space units.
///
/// Given the walk `a`, the sites `1..=a+b` carry independent marks of
/// probability `sqrt(dt)/lambda`, so the count per window has mean
/// `window / lambda` exactly. Geometric spacings are turned into
/// exponential ones by adding an independent truncated exponential
/// fraction.
pub fn snake_spot_statistics(
    lambda: f64,
    dt: f64,
    time: f64,
    window: f64,
    replicas: usize,
    seed: u64,
) -> Result<SnakeStatistics> {
    let walk = StickyWalk::new(lambda, dt)?;
    if !(time > 0.0 && window > 0.0) {
        return Err(invalid("time and window must be positive"));
    }
    check_replicas(replicas, 2)?;
    let dx = walk.dx();
    let steps = (time / dt).round() as usize;
    let window_levels = (window / dx).round() as i64;
    if window_levels < 1 {
        return Err(invalid("window shorter than one lattice site"));
    }
    let p = dx / lambda;
    let mu = -(1.0 - p).ln();
    // gaps starting this far below the boundary are censored with
    // probability below exp(-10)
    let margin = (10.0 * lambda / dx).ceil() as i64;
    let rows: Vec<Result<(f64, f64, Vec<f64>)>> = map_replicas(seed, replicas, |_, rng| {
        let mut snake = PoissonSnake::new();
        for _ in 0..steps {
            snake.step(&walk.sample_step(rng))?;
        }
        let h = snake.height();
        let full = h / window_levels;
        let top = full * window_levels;
        let count = snake.levels().take_while(|&y| y <= top).count() as f64;
        let mut spacings = Vec::new();
        let mut prev = 0i64;
        for y in snake.levels() {
            if prev > h - margin || y > h {
                break;
            }
            let gap = y - prev;
            let u: f64 = rng.random();
            let frac = -(1.0 - u * (1.0 - (-mu).exp())).ln() / mu;
            spacings.push((gap as f64 - 1.0 + frac) * dx);
            prev = y;
        }
        Ok((count, full as f64, spacings))
    });
    let rows: Vec<(f64, f64, Vec<f64>)> = rows.into_iter().collect::<Result<_>>()?;
    let counts: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let windows: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let total_windows = windows.iter().sum::<f64>() as usize;
    if total_windows == 0 {
        return Err(Error::Degenerate(
            "no full window below the boundary".into(),
        ));
    }
    let (mean_count, count_se) = jackknife_ratio(&counts, &windows);
    let spacings: Vec<f64> = rows
        .iter()
        .flat_map(|r| r.2.iter().copied())
        .take(MAX_SPACINGS)
        .collect();
    let spacing_ks = (spacings.len() >= MIN_KS_SAMPLES)
        .then(|| ks_one_sample(&spacings, |x| 1.0 - (-x / lambda).exp()));
    Ok(SnakeStatistics {
        lambda,
        dt,
        time: steps as f64 * dt,
        window: window_levels as f64 * dx,
        replicas,
        windows: total_windows,
        mean_count,
        count_se,
        expected_count: window_levels as f64 * dx / lambda,
        spacing_ks_critical: spacing_ks.map(|k| k.critical_value(KS_ALPHA)),
        spacing_ks,
    })
}

// ---------------------------------------------------------------------------
// Circle flow in logarithmic time

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircleCorrelation {
    pub s: f64,
    pub t: f64,
    pub re: f64,
    pub im: f64,
    pub re_se: f64,
    pub im_se: f64,
}

impl CircleCorrelation {
    pub fn within_band(&self) -> bool {
        self.re.abs() <= SE_BAND * self.re_se && self.im.abs() <= SE_BAND * self.im_se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircleFlowReport {
    pub eps: f64,
    pub replicas: usize,
    pub bins: usize,
    pub counts: Vec<u64>,
    pub chi_square: f64,
    pub chi_square_p: f64,
    pub correlations: Vec<CircleCorrelation>,
}

impl CircleFlowReport {
    pub fn uniform(&self) -> bool {
        self.chi_square_p > 0.01
    }

    pub fn independent(&self) -> bool {
        self.correlations.iter().all(CircleCorrelation::within_band)
    }

    pub fn report(&self) -> TestReport {
        report(
            "circle_flow",
            json!({ "eps": self.eps, "replicas": self.replicas, "bins": self.bins }),
            self.chi_square_p,
            0.01,
            self.uniform() && self.independent(),
            self,
        )
    }
}

/// Uniformity of `Y(0,1)` (chi-square over `bins` equal bins) and the
/// correlation of `exp(2 pi i Y(0,1))` with `exp(2 pi i Y(s,t))` for each
/// pair in `pairs`.
pub fn circle_flow_tests(
    eps: f64,
    pairs: &[(f64, f64)],
    bins: usize,
    replicas: usize,
    seed: u64,
) -> Result<CircleFlowReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    if bins < 2 {
        return Err(invalid("need at least two bins"));
    }
    for &(s, t) in pairs {
        if !(0.0 < s && s < t && t <= 1.0) {
            return Err(invalid(format!("need 0 < s < t <= 1, got ({s}, {t})")));
        }
    }
    check_replicas(replicas, 2)?;
    let e = |y: f64| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * y);
    let rows: Vec<Result<(f64, Vec<Complex64>)>> = map_replicas(seed, replicas, |_, rng| {
        let mut grid = vec![0.0, 1.0];
        for &(s, t) in pairs {
            grid.extend([s, t]);
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let inc = log_time_increments(eps, &grid, rng)?;
        let at = |x: f64| grid.iter().position(|&g| g == x).expect("grid point");
        let span = |a: f64, b: f64| -> f64 { inc[at(a)..at(b)].iter().sum() };
        let y01 = span(0.0, 1.0).rem_euclid(1.0);
        let products = pairs
            .iter()
            .map(|&(s, t)| e(y01) * e(span(s, t)).conj())
            .collect();
        Ok((y01, products))
    });
    let rows: Vec<(f64, Vec<Complex64>)> = rows.into_iter().collect::<Result<_>>()?;
    let mut counts = vec![0u64; bins];
    for (y, _) in &rows {
        counts[((y * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let (chi_square, _, chi_square_p) = chi_square_uniform(&counts);
    let correlations = pairs
        .iter()
        .enumerate()
        .map(|(j, &(s, t))| {
            let re: Vec<f64> = rows.iter().map(|r| r.1[j].re).collect();
            let im: Vec<f64> = rows.iter().map(|r| r.1[j].im).collect();
            let (re, re_se) = jackknife_mean(&re);
            let (im, im_se) = jackknife_mean(&im);
            CircleCorrelation {
                s,
                t,
                re,
                im,
                re_se,
                im_se,
            }
        })
        .collect();
    Ok(CircleFlowReport {
        eps,
        replicas,
        bins,
        counts,
        chi_square,
        chi_square_p,
        correlations,
    })
}

// ---------------------------------------------------------------------------
// Black-noise variance scan

/// 1-Lipschitz test function on the circle `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Phi {
    /// Circle distance to a point.
    DistanceTo(f64),
    /// `sin(2 pi x) / (2 pi)`.
    Sine,
    Constant(f64),
    /// Values at the sites `x / m`.
    Table(Vec<f64>),
}

impl Phi {
    pub fn tabulate(&self, m: u32) -> Result<Vec<f64>> {
        let h = 1.0 / m as f64;
        let table: Vec<f64> = match self {
            Phi::DistanceTo(p) => (0..m)
                .map(|x| {
                    let d = (x as f64 * h - p).rem_euclid(1.0);
                    d.min(1.0 - d)
                })
                .collect(),
            Phi::Sine => (0..m)
                .map(|x| {
                    (2.0 * std::f64::consts::PI * x as f64 * h).sin() / (2.0 * std::f64::consts::PI)
                })
                .collect(),
            Phi::Constant(c) => vec![*c; m as usize],
            Phi::Table(v) => {
                if v.len() != m as usize {
                    return Err(Error::Mismatch(format!("{} values for {m} sites", v.len())));
                }
                v.clone()
            }
        };
        for x in 0..m as usize {
            let jump = (table[(x + 1) % m as usize] - table[x]).abs();
            if jump > h * (1.0 + 1e-12) {
                return Err(invalid(format!("phi is not 1-Lipschitz at site {x}")));
            }
        }
        Ok(table)
    }
}

/// Measure on the circle, required to be at most the uniform measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Nu {
    Uniform,
    /// Uniform measure restricted to the arc `[start, end)`.
    Arc {
        start: f64,
        end: f64,
    },
    Point(f64),
    /// Masses of the sites `x / m`.
    Weights(Vec<f64>),
}

impl Nu {
    pub fn half_circle() -> Self {
        Nu::Arc {
            start: 0.0,
            end: 0.5,
        }
    }

    pub fn site_weights(&self, m: u32) -> Result<Vec<f64>> {
        let h = 1.0 / m as f64;
        let w: Vec<f64> = match self {
            Nu::Uniform => vec![h; m as usize],
            Nu::Arc { start, end } => (0..m)
                .map(|x| {
                    let u = x as f64 * h;
                    if *start <= u && u < *end {
                        h
                    } else {
                        0.0
                    }
                })
                .collect(),
            Nu::Point(p) => {
                let mut w = vec![0.0; m as usize];
                w[((p.rem_euclid(1.0) * m as f64).round() as usize) % m as usize] = 1.0;
                w
            }
            Nu::Weights(v) => {
                if v.len() != m as usize {
                    return Err(Error::Mismatch(format!(
                        "{} weights for {m} sites",
                        v.len()
                    )));
                }
                v.clone()
            }
        };
        if w.iter().any(|&x| !(x >= 0.0 && x <= h * (1.0 + 1e-12))) {
            return Err(invalid(
                "nu must be a measure dominated by the uniform measure",
            ));
        }
        Ok(w)
    }
}

/// Slope of `ln(Var/eps)` against `ln eps`, with a jackknife error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendStatistic {
    pub slope: f64,
    pub slope_se: f64,
    /// One-sided p-value of "no decrease as eps shrinks" (slope <= 0).
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceScanResult {
    pub model: String,
    pub m: u32,
    pub replicas: usize,
    /// Largest scale first.
    pub scales: Vec<f64>,
    pub steps: Vec<usize>,
    pub variances: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub ratios: Vec<f64>,
    pub ratio_std_errors: Vec<f64>,
    pub trend: TrendStatistic,
}

impl VarianceScanResult {
    /// `Var/eps` strictly decreases as `eps` shrinks.
    pub fn strictly_decreasing(&self) -> bool {
        self.ratios.windows(2).all(|w| w[1] < w[0])
    }

    /// Drop of `Var/eps` from the largest to the smallest scale, in
    /// standard errors of the difference.
    pub fn total_drop_z(&self) -> f64 {
        let k = self.ratios.len() - 1;
        let se = (self.ratio_std_errors[0].powi(2) + self.ratio_std_errors[k].powi(2)).sqrt();
        (self.ratios[0] - self.ratios[k]) / se.max(f64::MIN_POSITIVE)
    }

    /// The black-noise signature: strict decrease with a significant trend.
    pub fn shows_decay(&self) -> bool {
        self.strictly_decreasing() && self.trend.p_value < 0.05
    }

    /// The classical signature: the smallest scale is not below the largest
    /// by more than the acceptance band.
    pub fn is_flat(&self) -> bool {
        self.total_drop_z() <= SE_BAND
    }

    pub fn report(&self) -> TestReport {
        report(
            "blacknoise_variance_scan",
            json!({ "model": self.model, "m": self.m, "replicas": self.replicas, "scales": self.scales }),
            self.trend.p_value,
            0.05,
            self.shows_decay(),
            self,
        )
    }
}

fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Monte Carlo variance of `int phi(X(0,eps) x) nu(dx)` over a grid of
/// scales for a flow of circle maps. Every replica runs once to the largest
/// scale and is read off at each smaller one.
pub fn blacknoise_variance_scan<M: StepModel<Elem = CircleMap>>(
    model: &M,
    phi: &Phi,
    nu: &Nu,
    eps_grid: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<VarianceScanResult> {
    let m = model.unit().modulus();
    let table = phi.tabulate(m)?;
    let weights = nu.site_weights(m)?;
    if eps_grid.len() < 2 {
        return Err(invalid("need at least two scales"));
    }
    check_replicas(replicas, 3)?;
    let mut scales = eps_grid.to_vec();
    scales.sort_by(|a, b| b.total_cmp(a));
    scales.dedup();
    let dt = model.dt();
    let steps: Vec<usize> = scales
        .iter()
        .map(|&e| {
            let k = e / dt;
            if k < 1.0 - 1e-9 {
                return Err(invalid(format!("scale {e} is below one lattice step {dt}")));
            }
            if (k - k.round()).abs() > 1e-9 * k {
                return Err(invalid(format!("scale {e} is not a whole number of steps")));
            }
            Ok(k.round() as usize)
        })
        .collect::<Result<_>>()?;
    let starts: Vec<(u32, f64)> = weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(x, &w)| (x as u32, w))
        .collect();
    let horizon = steps[0];
    let samples: Vec<Vec<f64>> = map_replicas(seed, replicas, |_, rng| {
        let mut pos: Vec<u32> = starts.iter().map(|s| s.0).collect();
        let mut out = vec![0.0; steps.len()];
        for k in 1..=horizon {
            let step = model.sample_step(rng);
            for x in pos.iter_mut() {
                *x = step.table()[*x as usize];
            }
            for (j, &kj) in steps.iter().enumerate() {
                if kj == k {
                    out[j] = pos
                        .iter()
                        .zip(&starts)
                        .map(|(&x, &(_, w))| w * table[x as usize])
                        .sum();
                }
            }
        }
        out
    });
    let n = replicas as f64;
    let columns: Vec<Vec<f64>> = (0..scales.len())
        .map(|j| samples.iter().map(|r| r[j]).collect())
        .collect();
    // centred running sums give every leave-one-out variance in O(1)
    let sums: Vec<(f64, f64, f64)> = columns
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n;
            let s1 = c.iter().map(|x| x - mean).sum::<f64>();
            let s2 = c.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
            (mean, s1, s2)
        })
        .collect();
    let variance = |j: usize, drop: Option<usize>| -> f64 {
        let (mean, s1, s2) = sums[j];
        match drop {
            None => (s2 - s1 * s1 / n) / (n - 1.0),
            Some(i) => {
                let d = columns[j][i] - mean;
                let (t1, t2) = (s1 - d, s2 - d * d);
                (t2 - t1 * t1 / (n - 1.0)) / (n - 2.0)
            }
        }
    };
    let log_eps: Vec<f64> = scales.iter().map(|e| e.ln()).collect();
    let slope_of = |drop: Option<usize>| -> f64 {
        let y: Vec<f64> = (0..scales.len())
            .map(|j| (variance(j, drop) / scales[j]).ln())
            .collect();
        ols_slope(&log_eps, &y)
    };
    let jackknife_se = |f: &dyn Fn(Option<usize>) -> f64| -> f64 {
        let loo: Vec<f64> = (0..replicas).map(|i| f(Some(i))).collect();
        let mean = loo.iter().sum::<f64>() / n;
        ((n - 1.0) / n * loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>()).sqrt()
    };
    let variances: Vec<f64> = (0..scales.len()).map(|j| variance(j, None)).collect();
    let std_errors: Vec<f64> = (0..scales.len())
        .map(|j| jackknife_se(&|d| variance(j, d)))
        .collect();
    let ratios: Vec<f64> = variances.iter().zip(&scales).map(|(v, e)| v / e).collect();
    let ratio_std_errors: Vec<f64> = std_errors.iter().zip(&scales).map(|(s, e)| s / e).collect();
    let trend = if variances.iter().all(|&v| v > 0.0) {
        let slope = slope_of(None);
        let slope_se = jackknife_se(&slope_of);
        let z = slope / slope_se;
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        TrendStatistic {
            slope,
            slope_se,
            p_value: 1.0 - normal.cdf(z),
        }
    } else {
        TrendStatistic {
            slope: 0.0,
            slope_se: 0.0,
            p_value: 1.0,
        }
    };
    Ok(VarianceScanResult {
        model: model.name().to_string(),
        m,
        replicas,
        scales,
        steps,
        variances,
        std_errors,
        ratios,
        ratio_std_errors,
        trend,
    })
}

/// Dyadic scales `2^-lo, ..., 2^-hi`.
pub fn dyadic_scales(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(-k)).collect()
}
