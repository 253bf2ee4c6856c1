//! Exact L2 analysis on finite products of probability spaces.
//!
//! A random variable is a dense complex tensor with one axis per factor,
//! row-major with factor 0 varying slowest. Subsets of factors are `u64`
//! bitmasks, bit `t` standing for factor `t`.
//!
//! The spectral measure is computed in a per-factor orthonormal basis whose
//! first vector is the constant 1, so the support of a basis coefficient is
//! the subset it belongs to. [`decompose`] instead applies `E_t` and `I - E_t`
//! directly and serves as an independent route to the same projections.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{invalid, Error, Result};

/// Largest tensor the module will allocate.
pub const MAX_STATES: usize = 1 << 24;
/// Largest number of factors a bitmask can index.
pub const MAX_FACTORS: usize = 63;
/// Cap on `2^n * size` for a full decomposition.
pub const MAX_DECOMPOSITION_ENTRIES: usize = 1 << 26;

const PROB_TOL: f64 = 1e-12;

pub type Subset = u64;

pub fn subset_from_indices(indices: &[usize]) -> Subset {
    indices.iter().fold(0, |m, &t| m | (1 << t))
}

pub fn subset_indices(c: Subset) -> Vec<usize> {
    (0..64).filter(|t| c >> t & 1 == 1).collect()
}

/// Finite product of probability spaces. Atoms have positive mass.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteProductSpace {
    factors: Vec<Vec<f64>>,
    strides: Vec<usize>,
    size: usize,
    tail: Option<usize>,
}

impl FiniteProductSpace {
    pub fn new(factors: Vec<Vec<f64>>) -> Result<Self> {
        if factors.len() > MAX_FACTORS {
            return Err(Error::StateSpaceTooLarge {
                states: factors.len() as u128,
                limit: MAX_FACTORS as u128,
            });
        }
        let mut size: u128 = 1;
        for (t, p) in factors.iter().enumerate() {
            if p.is_empty() {
                return Err(invalid(format!("factor {t} has no atoms")));
            }
            if p.iter().any(|&q| !(q > 0.0 && q.is_finite())) {
                return Err(invalid(format!("factor {t} has a non-positive mass")));
            }
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > PROB_TOL * p.len() as f64 {
                return Err(invalid(format!("factor {t} has total mass {total}")));
            }
            size *= p.len() as u128;
            if size > MAX_STATES as u128 {
                return Err(Error::StateSpaceTooLarge {
                    states: factors[..=t].iter().map(|p| p.len() as u128).product(),
                    limit: MAX_STATES as u128,
                });
            }
        }
        let mut strides = vec![1; factors.len()];
        for t in (0..factors.len().saturating_sub(1)).rev() {
            strides[t] = strides[t + 1] * factors[t + 1].len();
        }
        Ok(Self {
            factors,
            strides,
            size: size as usize,
            tail: None,
        })
    }

    pub fn uniform(atoms: &[usize]) -> Result<Self> {
        Self::new(
            atoms
                .iter()
                .map(|&k| vec![1.0 / k.max(1) as f64; k])
                .collect(),
        )
    }

    /// Marks factor `index` as the tail factor, reported as `"tail"` in JSON.
    pub fn with_tail(mut self, index: usize) -> Result<Self> {
        if index >= self.factors.len() {
            return Err(Error::OutOfRange(format!(
                "tail index {index} with {} factors",
                self.factors.len()
            )));
        }
        self.tail = Some(index);
        Ok(self)
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn atoms(&self, t: usize) -> usize {
        self.factors[t].len()
    }

    pub fn probs(&self, t: usize) -> &[f64] {
        &self.factors[t]
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn tail(&self) -> Option<usize> {
        self.tail
    }

    pub fn flat_index(&self, atoms: &[usize]) -> usize {
        atoms.iter().zip(&self.strides).map(|(x, s)| x * s).sum()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        self.strides
            .iter()
            .map(|s| {
                let x = flat / s;
                flat %= s;
                x
            })
            .collect()
    }

    /// Probability of the atom at `flat`.
    pub fn mass(&self, flat: usize) -> f64 {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(t, &x)| self.factors[t][x])
            .product()
    }

    fn masses(&self) -> Vec<f64> {
        let mut out = vec![1.0; self.size];
        for (t, p) in self.factors.iter().enumerate() {
            let (k, stride) = (p.len(), self.strides[t]);
            for (i, w) in out.iter_mut().enumerate() {
                *w *= p[(i / stride) % k];
            }
        }
        out
    }
}

/// Complex random variable on a finite product space.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVariable {
    space: Arc<FiniteProductSpace>,
    values: Vec<Complex64>,
}

impl RandomVariable {
    pub fn new(space: Arc<FiniteProductSpace>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != space.size() {
            return Err(Error::Mismatch(format!(
                "{} values for a space of {} atoms",
                values.len(),
                space.size()
            )));
        }
        Ok(Self { space, values })
    }

    pub fn from_fn(space: Arc<FiniteProductSpace>, f: impl Fn(&[usize]) -> Complex64) -> Self {
        let values = (0..space.size())
            .map(|i| f(&space.multi_index(i)))
            .collect();
        Self { space, values }
    }

    pub fn constant(space: Arc<FiniteProductSpace>, c: Complex64) -> Self {
        let values = vec![c; space.size()];
        Self { space, values }
    }

    /// A variable depending on factor `t` only, given by its per-atom values.
    pub fn of_factor(space: Arc<FiniteProductSpace>, t: usize, g: &[Complex64]) -> Result<Self> {
        if t >= space.n_factors() {
            return Err(Error::OutOfRange(format!("factor {t}")));
        }
        if g.len() != space.atoms(t) {
            return Err(Error::Mismatch(format!(
                "{} values for a factor of {} atoms",
                g.len(),
                space.atoms(t)
            )));
        }
        Ok(Self::from_fn(space, |x| g[x[t]]))
    }

    pub fn space(&self) -> &Arc<FiniteProductSpace> {
        &self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn mean(&self) -> Complex64 {
        self.space
            .masses()
            .iter()
            .zip(&self.values)
            .map(|(p, v)| v * p)
            .sum()
    }

    /// `E[f conj(g)]`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same_space(other)?;
        Ok(self
            .space
            .masses()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(p, (f, g))| f * g.conj() * p)
            .sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.space
            .masses()
            .iter()
            .zip(&self.values)
            .map(|(p, v)| v.norm_sqr() * p)
            .sum()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(self.zip_with(other, |a, b| a * b))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_space(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Conditional expectation onto the factors in `keep`.
    pub fn conditional_expectation(&self, keep: Subset) -> Self {
        let mut out = self.clone();
        for t in 0..self.space.n_factors() {
            if keep >> t & 1 == 0 {
                out.average_axis(t);
            }
        }
        out
    }

    fn zip_with(&self, other: &Self, op: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        Self {
            space: self.space.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        }
    }

    fn check_same_space(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.space, &other.space) || self.space == other.space {
            Ok(())
        } else {
            Err(Error::Mismatch(
                "random variables on different spaces".into(),
            ))
        }
    }

    /// Replaces every fibre along `axis` by `op` of it.
    fn map_axis(&mut self, axis: usize, op: impl Fn(&[f64], &[Complex64], &mut [Complex64])) {
        let k = self.space.atoms(axis);
        let inner = self.space.strides[axis];
        let block = k * inner;
        let p = &self.space.factors[axis];
        let mut fibre = vec![Complex64::default(); k];
        let mut image = vec![Complex64::default(); k];
        for base in (0..self.values.len()).step_by(block) {
            for i in 0..inner {
                for x in 0..k {
                    fibre[x] = self.values[base + x * inner + i];
                }
                op(p, &fibre, &mut image);
                for x in 0..k {
                    self.values[base + x * inner + i] = image[x];
                }
            }
        }
    }

    /// `E_t`: averages factor `t` against its law.
    fn average_axis(&mut self, t: usize) {
        self.map_axis(t, |p, v, out| {
            let m: Complex64 = p.iter().zip(v).map(|(q, x)| x * q).sum();
            out.fill(m);
        });
    }

    /// `I - E_t`.
    fn center_axis(&mut self, t: usize) {
        self.map_axis(t, |p, v, out| {
            let m: Complex64 = p.iter().zip(v).map(|(q, x)| x * q).sum();
            for (o, x) in out.iter_mut().zip(v) {
                *o = x - m;
            }
        });
    }

    /// `rho I + (1 - rho) E_t`.
    fn relax_axis(&mut self, t: usize, rho: f64) {
        self.map_axis(t, |p, v, out| {
            let m: Complex64 = p.iter().zip(v).map(|(q, x)| x * q).sum();
            for (o, x) in out.iter_mut().zip(v) {
                *o = x * rho + m * (1.0 - rho);
            }
        });
    }
}

/// Orthonormal basis of `L2(p)` whose first vector is the constant 1, as
/// rows `e_j(x)`. Modified Gram-Schmidt on `1, delta_0, ..., delta_{k-2}`.
fn factor_basis(p: &[f64]) -> Vec<Vec<f64>> {
    let k = p.len();
    let dot = |u: &[f64], v: &[f64]| -> f64 { (0..k).map(|x| p[x] * u[x] * v[x]).sum() };
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0; k]];
    for j in 0..k.saturating_sub(1) {
        let mut v = vec![0.0; k];
        v[j] = 1.0;
        for e in &basis {
            let c = dot(&v, e);
            for x in 0..k {
                v[x] -= c * e[x];
            }
        }
        let norm = dot(&v, &v).sqrt();
        for x in v.iter_mut() {
            *x /= norm;
        }
        basis.push(v);
    }
    basis
}

/// Weights of the spectral measure, `mu_f(C) = ||Q_C f||^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    weights: BTreeMap<Subset, f64>,
    n_factors: usize,
    tail: Option<usize>,
}

impl SpectralMeasure {
    pub fn weights(&self) -> &BTreeMap<Subset, f64> {
        &self.weights
    }

    pub fn weight(&self, c: Subset) -> f64 {
        self.weights.get(&c).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }

    pub fn n_factors(&self) -> usize {
        self.n_factors
    }

    /// Mass of each chaos level `H_k = sum over |C| = k`.
    pub fn by_level(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_factors + 1];
        for (c, w) in &self.weights {
            out[c.count_ones() as usize] += w;
        }
        out
    }

    /// `sum_C rho^|C| mu(C)`, which equals `<U^rho f, f>`.
    pub fn urho_inner(&self, rho: f64) -> f64 {
        self.weights
            .iter()
            .map(|(c, w)| rho.powi(c.count_ones() as i32) * w)
            .sum()
    }

    /// Probability that factor `t` is in the spectral set, under the
    /// normalised measure.
    pub fn point_probability(&self, t: usize) -> f64 {
        let on: f64 = self
            .weights
            .iter()
            .filter(|(c, _)| *c >> t & 1 == 1)
            .map(|(_, w)| w)
            .sum();
        on / self.total()
    }

    fn label(&self, t: usize) -> Value {
        if Some(t) == self.tail {
            json!("tail")
        } else {
            json!(t)
        }
    }

    /// `[{"subset": [...], "weight": w}, ...]`; the tail factor is labelled
    /// `"tail"`.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.weights
                .iter()
                .map(|(&c, &w)| {
                    let subset: Vec<Value> = subset_indices(c)
                        .into_iter()
                        .map(|t| self.label(t))
                        .collect();
                    json!({ "subset": subset, "weight": w })
                })
                .collect(),
        )
    }
}

/// Spectral measure of `f`.
pub fn spectral_measure(f: &RandomVariable) -> SpectralMeasure {
    let space = f.space.clone();
    let mut coeffs = f.clone();
    for t in 0..space.n_factors() {
        let basis = factor_basis(space.probs(t));
        coeffs.map_axis(t, |p, v, out| {
            for (j, e) in basis.iter().enumerate() {
                out[j] = (0..p.len()).map(|x| v[x] * (p[x] * e[x])).sum();
            }
        });
    }
    let mut weights = BTreeMap::new();
    for (i, c) in coeffs.values.iter().enumerate() {
        let support = space
            .multi_index(i)
            .iter()
            .enumerate()
            .filter(|(_, &j)| j != 0)
            .fold(0u64, |m, (t, _)| m | 1 << t);
        *weights.entry(support).or_insert(0.0) += c.norm_sqr();
    }
    SpectralMeasure {
        weights,
        n_factors: space.n_factors(),
        tail: space.tail(),
    }
}

/// The projections `Q_C f` for every subset `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosDecomposition {
    components: BTreeMap<Subset, RandomVariable>,
}

impl ChaosDecomposition {
    pub fn components(&self) -> &BTreeMap<Subset, RandomVariable> {
        &self.components
    }

    pub fn component(&self, c: Subset) -> Option<&RandomVariable> {
        self.components.get(&c)
    }

    /// Sum of all components, which reconstructs `f`.
    pub fn sum(&self) -> RandomVariable {
        let mut it = self.components.values();
        let first = it.next().expect("at least the empty subset").clone();
        it.fold(first, |acc, g| acc.add(g).expect("same space"))
    }
}

/// Applies `prod_{t not in C} E_t prod_{t in C} (I - E_t)` for every `C`.
pub fn decompose(f: &RandomVariable) -> Result<ChaosDecomposition> {
    let n = f.space.n_factors();
    let entries = (f.space.size() as u128) << n;
    if entries > MAX_DECOMPOSITION_ENTRIES as u128 {
        return Err(Error::StateSpaceTooLarge {
            states: entries,
            limit: MAX_DECOMPOSITION_ENTRIES as u128,
        });
    }
    let mut components = BTreeMap::new();
    let mut stack = vec![(0usize, 0u64, f.clone())];
    while let Some((t, mask, g)) = stack.pop() {
        if t == n {
            components.insert(mask, g);
            continue;
        }
        let mut centred = g.clone();
        centred.center_axis(t);
        let mut averaged = g;
        averaged.average_axis(t);
        stack.push((t + 1, mask | 1 << t, centred));
        stack.push((t + 1, mask, averaged));
    }
    Ok(ChaosDecomposition { components })
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(invalid(format!("rho must lie in [0, 1], got {rho}")))
    }
}

/// `U^rho f`, applied as `rho I + (1 - rho) E_t` on every factor.
pub fn apply_urho(f: &RandomVariable, rho: f64) -> Result<RandomVariable> {
    check_rho(rho)?;
    let mut out = f.clone();
    for t in 0..f.space.n_factors() {
        out.relax_axis(t, rho);
    }
    Ok(out)
}

/// `<U^rho f, f>`.
pub fn urho_inner(f: &RandomVariable, rho: f64) -> Result<f64> {
    Ok(apply_urho(f, rho)?.inner(f)?.re)
}

/// Per-factor values `g_t(x_t)` of a factor-wise functional.
pub type FactorValues = Vec<Complex64>;

/// `Exp g = prod_t (1 + g_t)` for centred `g_t` depending on factor `t`.
pub fn exp_map(space: Arc<FiniteProductSpace>, g: &[FactorValues]) -> Result<RandomVariable> {
    if g.len() != space.n_factors() {
        return Err(Error::Mismatch(format!(
            "{} components for {} factors",
            g.len(),
            space.n_factors()
        )));
    }
    for (t, gt) in g.iter().enumerate() {
        if gt.len() != space.atoms(t) {
            return Err(Error::Mismatch(format!(
                "component {t} has {} values for {} atoms",
                gt.len(),
                space.atoms(t)
            )));
        }
        let p = space.probs(t);
        let mean: Complex64 = gt.iter().zip(p).map(|(v, q)| v * q).sum();
        let scale: f64 = 1.0 + gt.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if mean.norm() > 1e-12 * scale {
            return Err(invalid(format!("component {t} has mean {mean}")));
        }
    }
    Ok(RandomVariable::from_fn(space, |x| {
        x.iter()
            .enumerate()
            .map(|(t, &a)| Complex64::new(1.0, 0.0) + g[t][a])
            .product()
    }))
}

/// Inverse of [`exp_map`]: recovers `g_t = E[f | factor t] - 1` and checks
/// that `f` is their product.
pub fn log_map(f: &RandomVariable) -> Result<Vec<FactorValues>> {
    let space = f.space.clone();
    let mean = f.mean();
    let scale = f.norm_sq().sqrt().max(1.0);
    if (mean - 1.0).norm() > 1e-12 * scale {
        return Err(Error::NonDecomposable(format!("mean {mean} is not 1")));
    }
    let g: Vec<FactorValues> = (0..space.n_factors())
        .map(|t| {
            let h = f.conditional_expectation(1 << t);
            (0..space.atoms(t))
                .map(|x| {
                    let mut idx = vec![0; space.n_factors()];
                    idx[t] = x;
                    h.values[space.flat_index(&idx)] - 1.0
                })
                .collect()
        })
        .collect();
    let rebuilt = exp_map(space, &g)?;
    let gap = rebuilt.max_abs_diff(f)?;
    let tol = 1e-10 * f.values.iter().map(|v| v.norm()).fold(1.0, f64::max);
    if gap > tol {
        return Err(Error::NonDecomposable(format!(
            "product of factor marginals misses f by {gap:e}"
        )));
    }
    Ok(g)
}

// ---------------------------------------------------------------------------
// The Z_m toy model

/// Space of the `Z_m` toy flow: `n_steps` fair binary steps, then a uniform
/// tail on `Z_m`.
pub fn zm_toy_space(m: u32, n_steps: usize) -> Result<Arc<FiniteProductSpace>> {
    if m < 2 {
        return Err(invalid(format!("Z_m toy model needs m >= 2, got {m}")));
    }
    let mut atoms = vec![2; n_steps];
    atoms.push(m as usize);
    Ok(Arc::new(
        FiniteProductSpace::uniform(&atoms)?.with_tail(n_steps)?,
    ))
}

/// The character `exp(2 pi i X(0, inf) / m)` of the toy flow.
pub fn zm_character(m: u32, n_steps: usize) -> Result<RandomVariable> {
    let space = zm_toy_space(m, n_steps)?;
    Ok(RandomVariable::from_fn(space, |x| {
        let total: usize = x.iter().sum();
        Complex64::from_polar(
            1.0,
            2.0 * std::f64::consts::PI * (total % m as usize) as f64 / m as f64,
        )
    }))
}

/// Closed form `rho (cos^2(pi/m) + rho sin^2(pi/m))^n` of `<U^rho f, f>`
/// for the toy character.
pub fn zm_character_urho(m: u32, n_steps: usize, rho: f64) -> f64 {
    let s2 = (std::f64::consts::PI / m as f64).sin().powi(2);
    rho * (1.0 - s2 + rho * s2).powi(n_steps as i32)
}

/// Serializable `(subset, weight)` row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralRow {
    pub subset: Vec<usize>,
    pub weight: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    fn biased_space() -> Arc<FiniteProductSpace> {
        Arc::new(
            FiniteProductSpace::new(vec![
                vec![0.2, 0.8],
                vec![0.5, 0.3, 0.2],
                vec![0.1, 0.2, 0.3, 0.4],
            ])
            .unwrap(),
        )
    }

    fn arbitrary_rv(space: Arc<FiniteProductSpace>, seed: u64) -> RandomVariable {
        RandomVariable::from_fn(space, |x| {
            let h = x.iter().fold(seed, |h, &a| {
                h.wrapping_mul(6364136223846793005)
                    .wrapping_add(a as u64 + 1442695040888963407)
            });
            c(
                ((h >> 11) % 1000) as f64 / 500.0 - 1.0,
                ((h >> 31) % 1000) as f64 / 500.0 - 1.0,
            )
        })
    }

    #[test]
    fn space_validation() {
        assert!(FiniteProductSpace::new(vec![vec![0.5, 0.6]]).is_err());
        assert!(FiniteProductSpace::new(vec![vec![1.0, 0.0]]).is_err());
        assert!(FiniteProductSpace::new(vec![vec![]]).is_err());
        assert!(matches!(
            FiniteProductSpace::uniform(&[2; 25]),
            Err(Error::StateSpaceTooLarge { .. })
        ));
        let s = biased_space();
        assert_eq!(s.size(), 24);
        assert_eq!(s.multi_index(s.flat_index(&[1, 2, 3])), vec![1, 2, 3]);
        assert!((s.mass(s.flat_index(&[1, 0, 3])) - 0.8 * 0.5 * 0.4).abs() < 1e-15);
    }

    #[test]
    fn basis_is_orthonormal() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let e = factor_basis(&p);
        for i in 0..4 {
            for j in 0..4 {
                let d: f64 = (0..4).map(|x| p[x] * e[i][x] * e[j][x]).sum();
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn constant_has_only_empty_component() {
        let f = RandomVariable::constant(biased_space(), c(2.0, -1.0));
        let mu = spectral_measure(&f);
        assert!(close(mu.weight(0), 5.0, 1e-13));
        assert!(mu.weights().iter().all(|(&k, &w)| k == 0 || w < 1e-26));
        let d = decompose(&f).unwrap();
        assert!(d
            .components()
            .iter()
            .all(|(&k, g)| k == 0 || g.norm_sq() < 1e-26));
    }

    #[test]
    fn first_factor_centred_is_first_chaos() {
        let s = biased_space();
        // mean 0.2 * 4 + 0.8 * (-1) = 0
        let f = RandomVariable::of_factor(s, 0, &[c(4.0, 0.0), c(-1.0, 0.0)]).unwrap();
        let mu = spectral_measure(&f);
        assert!(close(mu.weight(1), f.norm_sq(), 1e-13));
        assert!(close(mu.total(), mu.weight(1), 1e-13));
    }

    #[test]
    fn product_of_unit_variables_sits_on_pair() {
        let s = Arc::new(FiniteProductSpace::uniform(&[2, 2, 3]).unwrap());
        let f = RandomVariable::from_fn(s, |x| {
            let u = if x[0] == 0 { 1.0 } else { -1.0 };
            let v = if x[1] == 0 { 1.0 } else { -1.0 };
            c(u * v, 0.0)
        });
        let mu = spectral_measure(&f);
        assert!(close(mu.weight(0b011), 1.0, 1e-13));
        assert!(close(mu.total(), 1.0, 1e-13));
        let d = decompose(&f).unwrap();
        assert!(close(d.component(0b011).unwrap().norm_sq(), 1.0, 1e-13));
    }

    #[test]
    fn decomposition_matches_spectral_measure() {
        let f = arbitrary_rv(biased_space(), 17);
        let mu = spectral_measure(&f);
        let d = decompose(&f).unwrap();
        assert_eq!(d.components().len(), 8);
        for (&k, g) in d.components() {
            assert!(close(g.norm_sq(), mu.weight(k), 1e-12));
            for (&l, h) in d.components() {
                if k != l {
                    assert!(g.inner(h).unwrap().norm() < 1e-12 * f.norm_sq());
                }
            }
            // centred in every factor of C, constant in the others
            for t in 0..3 {
                let mut e = g.clone();
                e.average_axis(t);
                if k >> t & 1 == 1 {
                    assert!(e.norm_sq() < 1e-26 * (1.0 + f.norm_sq()));
                } else {
                    assert!(e.max_abs_diff(g).unwrap() < 1e-12);
                }
            }
        }
        assert!(d.sum().max_abs_diff(&f).unwrap() < 1e-12);
    }

    #[test]
    fn decomposition_cap() {
        let s = Arc::new(FiniteProductSpace::uniform(&[2; 20]).unwrap());
        let f = RandomVariable::constant(s, c(1.0, 0.0));
        assert!(matches!(
            decompose(&f),
            Err(Error::StateSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn urho_endpoints_and_semigroup() {
        let f = arbitrary_rv(biased_space(), 5);
        assert!(apply_urho(&f, 1.0).unwrap().max_abs_diff(&f).unwrap() < 1e-14);
        let zero = apply_urho(&f, 0.0).unwrap();
        let mean = RandomVariable::constant(f.space().clone(), f.mean());
        assert!(zero.max_abs_diff(&mean).unwrap() < 1e-14);
        let twice = apply_urho(&apply_urho(&f, 0.7).unwrap(), 0.4).unwrap();
        let once = apply_urho(&f, 0.28).unwrap();
        assert!(twice.max_abs_diff(&once).unwrap() < 1e-12);
        assert!(apply_urho(&f, 1.5).is_err());
    }

    #[test]
    fn urho_matches_spectral_sum() {
        let f = arbitrary_rv(biased_space(), 9);
        let mu = spectral_measure(&f);
        for rho in [0.0, 0.3, 0.9, 1.0] {
            assert!(close(
                urho_inner(&f, rho).unwrap(),
                mu.urho_inner(rho),
                1e-12
            ));
        }
    }

    #[test]
    fn toy_character_closed_form() {
        for m in [2, 3, 4] {
            for n in [0, 1, 5, 12] {
                let f = zm_character(m, n).unwrap();
                let mu = spectral_measure(&f);
                for rho in [0.0, 0.25, 0.9] {
                    let exact = zm_character_urho(m, n, rho);
                    assert!(close(urho_inner(&f, rho).unwrap(), exact, 1e-12));
                    assert!(close(mu.urho_inner(rho), exact, 1e-12));
                }
            }
        }
    }

    #[test]
    fn toy_spectral_points_independent() {
        let n = 6;
        let f = zm_character(4, n).unwrap();
        let mu = spectral_measure(&f);
        assert!(close(mu.point_probability(n), 1.0, 1e-12));
        for t in 0..n {
            assert!(close(mu.point_probability(t), 0.5, 1e-12));
        }
        // each subset containing the tail: 2^-n
        for (&k, &w) in mu.weights() {
            let expected = if k >> n & 1 == 1 {
                0.5f64.powi(n as i32)
            } else {
                0.0
            };
            assert!((w - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn first_chaos_additivity() {
        let s = Arc::new(FiniteProductSpace::uniform(&[2, 3, 2, 2]).unwrap());
        let g = [
            vec![c(1.0, 0.0), c(-1.0, 0.0)],
            vec![c(2.0, 0.0), c(-1.0, 1.0), c(-1.0, -1.0)],
            vec![c(0.5, 0.0), c(-0.5, 0.0)],
            vec![c(0.0, 3.0), c(0.0, -3.0)],
        ];
        let f = g
            .iter()
            .enumerate()
            .map(|(t, v)| RandomVariable::of_factor(s.clone(), t, v).unwrap())
            .reduce(|a, b| a.add(&b).unwrap())
            .unwrap();
        let (rs, st, rt) = (0b0011, 0b1100, 0b1111);
        let lhs = f.conditional_expectation(rt);
        let rhs = f
            .conditional_expectation(rs)
            .add(&f.conditional_expectation(st))
            .unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-13);
        assert!(close(
            spectral_measure(&f).by_level()[1],
            f.norm_sq(),
            1e-13
        ));
    }

    #[test]
    fn exp_examples() {
        let s = Arc::new(FiniteProductSpace::uniform(&[2]).unwrap());
        let one = exp_map(s.clone(), &[vec![c(0.0, 0.0); 2]]).unwrap();
        assert!(
            one.max_abs_diff(&RandomVariable::constant(s.clone(), c(1.0, 0.0)))
                .unwrap()
                < 1e-15
        );
        let f = exp_map(s.clone(), &[vec![c(1.0, 0.0), c(-1.0, 0.0)]]).unwrap();
        assert!(close(f.norm_sq(), 2.0, 1e-14));
        assert!(exp_map(s, &[vec![c(1.0, 0.0), c(0.0, 0.0)]]).is_err());
    }

    #[test]
    fn exp_inner_product_factorizes() {
        let s = biased_space();
        let g = vec![
            vec![c(0.8, 0.1), c(-0.2, -0.025)],
            vec![c(0.4, 0.0), c(-1.0, 0.3), c(0.5, -0.45)],
            vec![c(1.0, 0.0), c(1.0, 1.0), c(-1.0, 0.0), c(-0.25, -0.5)],
        ];
        let h = vec![
            vec![c(-0.4, 0.0), c(0.1, 0.0)],
            vec![c(0.0, 0.2), c(0.0, -0.2), c(0.0, -0.2)],
            vec![c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
        ];
        let centre = |v: Vec<FactorValues>| -> Vec<FactorValues> {
            v.into_iter()
                .enumerate()
                .map(|(t, gt)| {
                    let raw: Vec<(f64, f64)> = gt.iter().map(|z| (z.re, z.im)).collect();
                    centred(&raw, s.probs(t))
                })
                .collect()
        };
        let (g, h) = (centre(g), centre(h));
        let (eg, eh) = (
            exp_map(s.clone(), &g).unwrap(),
            exp_map(s.clone(), &h).unwrap(),
        );
        let expected: Complex64 = (0..3)
            .map(|t| {
                let p = s.probs(t);
                c(1.0, 0.0)
                    + (0..p.len())
                        .map(|x| g[t][x] * h[t][x].conj() * p[x])
                        .sum::<Complex64>()
            })
            .product();
        assert!((eg.inner(&eh).unwrap() - expected).norm() < 1e-12);
        let first = spectral_measure(&eg);
        let first_level = decompose(&eg).unwrap();
        let sum_g = g
            .iter()
            .enumerate()
            .map(|(t, v)| RandomVariable::of_factor(s.clone(), t, v).unwrap())
            .reduce(|a, b| a.add(&b).unwrap())
            .unwrap();
        let first_chaos = [1u64, 2, 4]
            .iter()
            .map(|&k| first_level.component(k).unwrap().clone())
            .reduce(|a, b| a.add(&b).unwrap())
            .unwrap();
        assert!(first_chaos.max_abs_diff(&sum_g).unwrap() < 1e-12);
        assert!(close(first.total(), eg.norm_sq(), 1e-12));
    }

    #[test]
    fn log_examples() {
        let s = Arc::new(FiniteProductSpace::uniform(&[2, 2]).unwrap());
        let one = RandomVariable::constant(s.clone(), c(1.0, 0.0));
        let g = log_map(&one).unwrap();
        assert!(g.iter().flatten().all(|v| v.norm() < 1e-15));
        let sum = RandomVariable::from_fn(s.clone(), |x| {
            c(
                if x[0] == 0 { 1.0 } else { -1.0 } + if x[1] == 0 { 1.0 } else { -1.0 },
                0.0,
            )
        });
        assert!(matches!(log_map(&sum), Err(Error::NonDecomposable(_))));
        let shifted = sum.add(&one).unwrap();
        assert!(matches!(log_map(&shifted), Err(Error::NonDecomposable(_))));
    }

    #[test]
    fn json_labels_tail() {
        let f = zm_character(2, 1).unwrap();
        let v = spectral_measure(&f).to_json();
        let rows = v.as_array().unwrap();
        let full = rows
            .iter()
            .find(|r| r["subset"].as_array().unwrap().len() == 2)
            .unwrap();
        assert_eq!(full["subset"], json!([0, "tail"]));
        assert!((full["weight"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }

    fn factor_values(atoms: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), atoms)
    }

    fn centred(raw: &[(f64, f64)], p: &[f64]) -> FactorValues {
        let v: Vec<Complex64> = raw.iter().map(|&(a, b)| c(a, b)).collect();
        let m: Complex64 = v.iter().zip(p).map(|(x, q)| x * q).sum();
        v.iter().map(|x| x - m).collect()
    }

    proptest! {
        #[test]
        fn parseval(seed in any::<u64>()) {
            let f = arbitrary_rv(biased_space(), seed);
            let mu = spectral_measure(&f);
            prop_assert!(close(mu.total(), f.norm_sq(), 1e-12));
        }

        #[test]
        fn exp_spectral_is_product_bernoulli(
            raw in prop::collection::vec(factor_values(2), 1..=8)
        ) {
            let n = raw.len();
            let s = Arc::new(FiniteProductSpace::uniform(&vec![2; n]).unwrap());
            let g: Vec<FactorValues> = raw.iter().map(|r| centred(r, &[0.5, 0.5])).collect();
            let f = exp_map(s.clone(), &g).unwrap();
            let mu = spectral_measure(&f);
            let q: Vec<f64> = g
                .iter()
                .map(|gt| {
                    let n2: f64 = gt.iter().map(|v| v.norm_sqr() * 0.5).sum();
                    n2 / (1.0 + n2)
                })
                .collect();
            let total = mu.total();
            for c_mask in 0..(1u64 << n) {
                let expected: f64 = (0..n)
                    .map(|t| if c_mask >> t & 1 == 1 { q[t] } else { 1.0 - q[t] })
                    .product();
                prop_assert!((mu.weight(c_mask) / total - expected).abs() < 1e-12);
            }
        }

        #[test]
        fn log_inverts_exp(raw in prop::collection::vec(factor_values(3), 1..=5)) {
            let n = raw.len();
            let p = [0.2, 0.3, 0.5];
            let s = Arc::new(FiniteProductSpace::new(vec![p.to_vec(); n]).unwrap());
            let g: Vec<FactorValues> = raw.iter().map(|r| centred(r, &p)).collect();
            let f = exp_map(s, &g).unwrap();
            let back = log_map(&f).unwrap();
            for (a, b) in g.iter().flatten().zip(back.iter().flatten()) {
                prop_assert!((a - b).norm() < 1e-12);
            }
            let again = exp_map(f.space().clone(), &back).unwrap();
            prop_assert!(again.max_abs_diff(&f).unwrap() < 1e-12);
        }

        #[test]
        fn tensor_multiplicativity(s1 in any::<u64>(), s2 in any::<u64>()) {
            let left = Arc::new(FiniteProductSpace::new(vec![vec![0.3, 0.7], vec![0.5, 0.25, 0.25]]).unwrap());
            let right = Arc::new(FiniteProductSpace::new(vec![vec![0.1, 0.9], vec![0.6, 0.4]]).unwrap());
            let both = Arc::new(FiniteProductSpace::new(vec![
                vec![0.3, 0.7], vec![0.5, 0.25, 0.25], vec![0.1, 0.9], vec![0.6, 0.4],
            ]).unwrap());
            let f1 = arbitrary_rv(left.clone(), s1);
            let f2 = arbitrary_rv(right.clone(), s2);
            let f = RandomVariable::from_fn(both, |x| {
                f1.values()[left.flat_index(&x[..2])] * f2.values()[right.flat_index(&x[2..])]
            });
            let (m1, m2, m) = (spectral_measure(&f1), spectral_measure(&f2), spectral_measure(&f));
            for a in 0..4u64 {
                for b in 0..4u64 {
                    let w = m.weight(a | b << 2);
                    prop_assert!((w - m1.weight(a) * m2.weight(b)).abs() < 1e-12 * (1.0 + w));
                }
            }
        }
    }
}
