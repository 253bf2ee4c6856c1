//! The rho-resampling coupling of discrete flows and correlation estimates.
//!
//! Every independent factor of a flow (each step, and the toy tail) is kept
//! with probability `rho` and otherwise redrawn. A coupled replica is drawn
//! once as the original flow, an independent alternative flow and one uniform
//! per factor; the second copy at any `rho` takes the alternative factor where
//! the uniform exceeds `rho`. Curves over a `rho` grid therefore reuse the
//! same randomness at every grid point.

use std::io::{self, Write};

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::chaos::RandomVariable;
use crate::error::{invalid, Error, Result};
use crate::flows::{build_flow, FlowPath, StepModel};
use crate::rng::map_replicas;
use crate::stats::jackknife_mean;

/// Fewest replicas accepted by the Monte Carlo estimators.
pub const MIN_REPLICAS: usize = 100;

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(invalid(format!("rho must lie in [0, 1], got {rho}")))
    }
}

/// Two flows coupled factor-wise; `resampled[k]` marks factors redrawn in
/// `second`, with the tail (if any) last.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair<E> {
    pub rho: f64,
    pub first: FlowPath<E>,
    pub second: FlowPath<E>,
    pub resampled: Vec<bool>,
}

impl<E: crate::semigroups::Semigroup> CoupledPair<E> {
    /// The same pair with the roles of the copies exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            rho: self.rho,
            first: self.second.clone(),
            second: self.first.clone(),
            resampled: self.resampled.clone(),
        }
    }
}

/// Randomness shared by all `rho` for one replica.
#[derive(Debug, Clone)]
pub struct CommonDraws<E> {
    original: FlowPath<E>,
    alternative: FlowPath<E>,
    uniforms: Vec<f64>,
}

impl<E: crate::semigroups::Semigroup> CommonDraws<E> {
    pub fn sample<M, R>(model: &M, n_steps: usize, rng: &mut R) -> Result<Self>
    where
        M: StepModel<Elem = E>,
        R: Rng + ?Sized,
    {
        let original = build_flow(model, n_steps, rng)?;
        let alternative = build_flow(model, n_steps, rng)?;
        let factors = n_steps + usize::from(original.tail().is_some());
        let uniforms = (0..factors).map(|_| rng.random::<f64>()).collect();
        Ok(Self {
            original,
            alternative,
            uniforms,
        })
    }

    pub fn original(&self) -> &FlowPath<E> {
        &self.original
    }

    /// The coupled copy at `rho`.
    pub fn at(&self, rho: f64) -> Result<CoupledPair<E>> {
        check_rho(rho)?;
        // u in [0, 1): u < 1 keeps everything, u >= 0 redraws everything
        let resampled: Vec<bool> = self.uniforms.iter().map(|&u| u >= rho).collect();
        let n = self.original.len();
        let steps = (0..n)
            .map(|k| {
                if resampled[k] {
                    self.alternative.steps()[k].clone()
                } else {
                    self.original.steps()[k].clone()
                }
            })
            .collect();
        let tail = self.original.tail().map(|t| {
            if resampled[n] {
                self.alternative.tail().expect("same model").clone()
            } else {
                t.clone()
            }
        });
        Ok(CoupledPair {
            rho,
            first: self.original.clone(),
            second: self.original.replace_steps(steps, tail),
            resampled,
        })
    }
}

/// Draws a coupled pair of flows of `n_steps` steps.
pub fn couple<M: StepModel, R: Rng + ?Sized>(
    model: &M,
    n_steps: usize,
    rho: f64,
    rng: &mut R,
) -> Result<CoupledPair<M::Elem>> {
    check_rho(rho)?;
    CommonDraws::sample(model, n_steps, rng)?.at(rho)
}

/// Monte Carlo estimate of `E[f(first) conj(f(second))]`, a lower bound on
/// the maximal correlation when `f` is centred with unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationEstimate {
    pub rho: f64,
    pub value: f64,
    pub std_error: f64,
    pub replicas: usize,
}

fn check_replicas(replicas: usize) -> Result<()> {
    if replicas < MIN_REPLICAS {
        return Err(invalid(format!(
            "need at least {MIN_REPLICAS} replicas, got {replicas}"
        )));
    }
    Ok(())
}

fn check_variance(values: &[Complex64]) -> Result<()> {
    let n = values.len() as f64;
    let mean: Complex64 = values.iter().sum::<Complex64>() / n;
    let var = values.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / n;
    let scale = values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    if var <= 1e-24 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate(
            "functional has zero sample variance".into(),
        ));
    }
    Ok(())
}

/// `E[f(first) conj(f(second))]` at a single `rho`, over replicas `0..replicas`
/// of the run `seed`.
pub fn estimate_correlation<M, F>(
    functional: F,
    model: &M,
    n_steps: usize,
    rho: f64,
    replicas: usize,
    seed: u64,
) -> Result<CorrelationEstimate>
where
    M: StepModel,
    F: Fn(&FlowPath<M::Elem>) -> Complex64 + Sync,
{
    Ok(sensitivity_curve(functional, model, n_steps, &[rho], replicas, seed)?[0])
}

/// Correlation estimates over a grid of `rho`, all computed from the same
/// replicas.
pub fn sensitivity_curve<M, F>(
    functional: F,
    model: &M,
    n_steps: usize,
    rho_grid: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<CorrelationEstimate>>
where
    M: StepModel,
    F: Fn(&FlowPath<M::Elem>) -> Complex64 + Sync,
{
    check_replicas(replicas)?;
    for &rho in rho_grid {
        check_rho(rho)?;
    }
    let rows: Vec<Result<(Complex64, Vec<f64>)>> = map_replicas(seed, replicas, |_, rng| {
        let draws = CommonDraws::sample(model, n_steps, rng)?;
        let f1 = functional(draws.original());
        let products = rho_grid
            .iter()
            .map(|&rho| {
                let pair = draws.at(rho)?;
                Ok((f1 * functional(&pair.second).conj()).re)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok((f1, products))
    });
    let rows: Vec<(Complex64, Vec<f64>)> = rows.into_iter().collect::<Result<_>>()?;
    let firsts: Vec<Complex64> = rows.iter().map(|r| r.0).collect();
    check_variance(&firsts)?;
    Ok(rho_grid
        .iter()
        .enumerate()
        .map(|(j, &rho)| {
            let xs: Vec<f64> = rows.iter().map(|r| r.1[j]).collect();
            let (value, std_error) = jackknife_mean(&xs);
            CorrelationEstimate {
                rho,
                value,
                std_error,
                replicas,
            }
        })
        .collect())
}

pub const CURVE_CSV_HEADER: &str = "rho,estimate,std_error,replicas";

pub fn write_curve_csv<W: Write>(out: &mut W, curve: &[CorrelationEstimate]) -> io::Result<()> {
    writeln!(out, "{CURVE_CSV_HEADER}")?;
    for e in curve {
        writeln!(out, "{},{},{},{}", e.rho, e.value, e.std_error, e.replicas)?;
    }
    Ok(())
}

/// `|E f|^2 + rho Var f` for one factor with law `probs` and values
/// `values`: the exact correlation contributed by a single resampled factor.
pub fn exact_step_factor(probs: &[f64], values: &[Complex64], rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if probs.len() != values.len() {
        return Err(Error::Mismatch(format!(
            "{} probabilities for {} values",
            probs.len(),
            values.len()
        )));
    }
    let mean: Complex64 = probs.iter().zip(values).map(|(p, v)| v * p).sum();
    let second: f64 = probs
        .iter()
        .zip(values)
        .map(|(p, v)| v.norm_sqr() * p)
        .sum();
    let var = (second - mean.norm_sqr()).max(0.0);
    Ok(mean.norm_sqr() + rho * var)
}

/// Largest state space [`enumerate_correlation`] will square.
pub const MAX_ENUMERATION_STATES: usize = 1 << 14;

/// Exact `E[f(first) conj(f(second))]` by summing over every pair of outcomes
/// with the coupling weight `prod_t (rho p_t(x) [x = y] + (1 - rho) p_t(x) p_t(y))`.
pub fn enumerate_correlation(f: &RandomVariable, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let space = f.space();
    let size = space.size();
    if size > MAX_ENUMERATION_STATES {
        return Err(Error::StateSpaceTooLarge {
            states: size as u128,
            limit: MAX_ENUMERATION_STATES as u128,
        });
    }
    let n = space.n_factors();
    let kernels: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|t| {
            let p = space.probs(t);
            (0..p.len())
                .map(|x| {
                    (0..p.len())
                        .map(|y| {
                            let diag = if x == y { rho * p[x] } else { 0.0 };
                            diag + (1.0 - rho) * p[x] * p[y]
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let digits: Vec<Vec<usize>> = (0..size).map(|i| space.multi_index(i)).collect();
    let values = f.values();
    let mut total = Complex64::default();
    for (x, dx) in digits.iter().enumerate() {
        let mut row = Complex64::default();
        for (y, dy) in digits.iter().enumerate() {
            let w: f64 = (0..n).map(|t| kernels[t][dx[t]][dy[t]]).product();
            if w != 0.0 {
                row += values[y].conj() * w;
            }
        }
        total += values[x] * row;
    }
    Ok(total.re)
}
