//! Discrete flows built from i.i.d. steps, exact continuum increment
//! samplers, and n-point motions.
//!
//! Steps are addressed by grid index; real time only enters through the
//! model's time pitch `dt`. A [`FlowPath`] stores the steps of one replica and
//! answers interval products `X(s,t)`, the ordered composition of steps
//! `s..t`.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::semigroups::{
    CircleMap, CoalElem, LatticeSplitElem, Radial, Semigroup, StickyElem, ZmElem,
};

/// Law of the i.i.d. steps of a discrete flow.
pub trait StepModel: Send + Sync {
    type Elem: Semigroup;

    fn name(&self) -> &'static str;

    /// Neutral element of the model's semigroup.
    fn unit(&self) -> Self::Elem;

    fn sample_step<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Elem;

    /// Independent factor standing in for the far end of the time axis.
    /// Only the `Z_m` toy model has one.
    fn sample_tail<R: Rng + ?Sized>(&self, _rng: &mut R) -> Option<Self::Elem> {
        None
    }

    fn dt(&self) -> f64 {
        1.0
    }
}

/// Random walk on `Z_m` with increments 0 or 1, plus a uniform tail factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZmToy {
    m: u32,
}

impl ZmToy {
    pub fn new(m: u32) -> Result<Self> {
        if m < 2 {
            return Err(invalid(format!("Z_m toy model needs m >= 2, got {m}")));
        }
        Ok(Self { m })
    }

    pub fn modulus(&self) -> u32 {
        self.m
    }
}

impl StepModel for ZmToy {
    type Elem = ZmElem;

    fn name(&self) -> &'static str {
        "zm-toy"
    }

    fn unit(&self) -> ZmElem {
        ZmElem::identity(self.m).expect("validated modulus")
    }

    fn sample_step<R: Rng + ?Sized>(&self, rng: &mut R) -> ZmElem {
        ZmElem::new(self.m, rng.random_range(0..2u32)).expect("0 and 1 are in Z_m")
    }

    fn sample_tail<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<ZmElem> {
        Some(ZmElem::new(self.m, rng.random_range(0..self.m)).expect("uniform value in range"))
    }
}

/// Coalescing walk on `Z_+`: `f_+` or `f_-`, equiprobably.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CoalWalk;

impl StepModel for CoalWalk {
    type Elem = CoalElem<i64>;

    fn name(&self) -> &'static str {
        "coal-lattice"
    }

    fn unit(&self) -> CoalElem<i64> {
        CoalElem::identity()
    }

    fn sample_step<R: Rng + ?Sized>(&self, rng: &mut R) -> CoalElem<i64> {
        if rng.random::<bool>() {
            CoalElem::UP
        } else {
            CoalElem::DOWN
        }
    }
}

/// Splitting walk on `Z + 1/2`: `f_+` or `f_-`, equiprobably.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SplitWalk;

impl StepModel for SplitWalk {
    type Elem = LatticeSplitElem;

    fn name(&self) -> &'static str {
        "split-lattice"
    }

    fn unit(&self) -> LatticeSplitElem {
        LatticeSplitElem::identity()
    }

    fn sample_step<R: Rng + ?Sized>(&self, rng: &mut R) -> LatticeSplitElem {
        if rng.random::<bool>() {
            LatticeSplitElem::UP
        } else {
            LatticeSplitElem::DOWN
        }
    }
}

/// Sticky walk on `Z_+` with generators `f_-`, `f_*`, `f_+` drawn with
/// probabilities `1/2`, `sqrt(dt)/(2 lambda)` and the remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StickyWalk {
    lambda: f64,
    dt: f64,
}

impl StickyWalk {
    pub fn new(lambda: f64, dt: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("time pitch must be positive, got {dt}")));
        }
        let walk = Self { lambda, dt };
        if walk.star_probability() > 0.5 {
            return Err(invalid(format!(
                "time pitch {dt} too large for lambda {lambda}: Pr(f_*) exceeds 1/2"
            )));
        }
        Ok(walk)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Space pitch, `sqrt(dt)`.
    pub fn dx(&self) -> f64 {
        self.dt.sqrt()
    }

    pub fn minus_probability(&self) -> f64 {
        0.5
    }

    pub fn star_probability(&self) -> f64 {
        self.dt.sqrt() / (2.0 * self.lambda)
    }

    pub fn plus_probability(&self) -> f64 {
        0.5 - self.star_probability()
    }
}

impl StepModel for StickyWalk {
    type Elem = StickyElem<i64>;

    fn name(&self) -> &'static str {
        "sticky-walk"
    }

    fn unit(&self) -> StickyElem<i64> {
        StickyElem::identity()
    }

    fn sample_step<R: Rng + ?Sized>(&self, rng: &mut R) -> StickyElem<i64> {
        let u: f64 = rng.random();
        if u < 0.5 {
            StickyElem::MINUS
        } else if u < 0.5 + self.star_probability() {
            StickyElem::STAR
        } else {
            StickyElem::PLUS
        }
    }

    fn dt(&self) -> f64 {
        self.dt
    }
}

fn check_circle(m: u32) -> Result<()> {
    if m < 4 || !m.is_multiple_of(2) {
        return Err(invalid(format!(
            "lattice circle needs an even size of at least 4, got {m}"
        )));
    }
    Ok(())
}

/// Arratia's coalescing flow on the discrete circle `Z_m`: every site
/// independently sends its particles one step left or right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArratiaLattice {
    m: u32,
}

impl ArratiaLattice {
    pub fn new(m: u32) -> Result<Self> {
        check_circle(m)?;
        Ok(Self { m })
    }

    pub fn modulus(&self) -> u32 {
        self.m
    }
}

impl StepModel for ArratiaLattice {
    type Elem = CircleMap;

    fn name(&self) -> &'static str {
        "arratia-lattice"
    }

    fn unit(&self) -> CircleMap {
        CircleMap::identity(self.m).expect("validated size")
    }

    fn sample_step<R: Rng + ?Sized>(&self, rng: &mut R) -> CircleMap {
        let words: Vec<u64> = (0..self.m.div_ceil(64)).map(|_| rng.random()).collect();
        CircleMap::from_moves(self.m, |x| (words[(x / 64) as usize] >> (x % 64)) & 1 == 1)
    }

    fn dt(&self) -> f64 {
        1.0 / (self.m as f64).powi(2)
    }
}

/// Rigid rotation of `Z_m` by a single +-1 walk: the classical reference
/// flow, driven by one random walk shared by all sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotationLattice {
    m: u32,
}

impl RotationLattice {
    pub fn new(m: u32) -> Result<Self> {
        check_circle(m)?;
        Ok(Self { m })
    }
}

impl StepModel for RotationLattice {
    type Elem = CircleMap;

    fn name(&self) -> &'static str {
        "rotation-lattice"
    }

    fn unit(&self) -> CircleMap {
        CircleMap::identity(self.m).expect("validated size")
    }

    fn sample_step<R: Rng + ?Sized>(&self, rng: &mut R) -> CircleMap {
        let right: bool = rng.random();
        CircleMap::from_moves(self.m, |_| right)
    }

    fn dt(&self) -> f64 {
        1.0 / (self.m as f64).powi(2)
    }
}

// ---------------------------------------------------------------------------

/// One replica of a discrete flow: its steps and, for the toy model, the
/// tail factor.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPath<E> {
    unit: E,
    steps: Vec<E>,
    tail: Option<E>,
    dt: f64,
}

impl<E: Semigroup> FlowPath<E> {
    pub fn new(unit: E, steps: Vec<E>, tail: Option<E>, dt: f64) -> Self {
        Self {
            unit,
            steps,
            tail,
            dt,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[E] {
        &self.steps
    }

    pub fn tail(&self) -> Option<&E> {
        self.tail.as_ref()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn unit(&self) -> &E {
        &self.unit
    }

    /// `X(s,t)`: steps `s..t` composed in order; the identity when `s == t`.
    pub fn interval_product(&self, s: usize, t: usize) -> Result<E> {
        if s > t || t > self.steps.len() {
            return Err(Error::OutOfRange(format!(
                "interval ({s}, {t}) on a grid of {} steps",
                self.steps.len()
            )));
        }
        Ok(self.steps[s..t]
            .iter()
            .fold(self.unit.clone(), |acc, step| acc.compose(step)))
    }

    /// `X(s, end)`: the product from `s` through the last step and the tail
    /// factor, if any.
    pub fn to_end(&self, s: usize) -> Result<E> {
        let head = self.interval_product(s, self.steps.len())?;
        Ok(match &self.tail {
            Some(tail) => head.compose(tail),
            None => head,
        })
    }

    /// Applies `f` to every step, keeping the grid.
    pub fn map_steps<F, G>(&self, f: F) -> FlowPath<G>
    where
        G: Semigroup,
        F: Fn(&E) -> G,
    {
        FlowPath {
            unit: f(&self.unit),
            steps: self.steps.iter().map(&f).collect(),
            tail: self.tail.as_ref().map(&f),
            dt: self.dt,
        }
    }

    pub(crate) fn replace_steps(&self, steps: Vec<E>, tail: Option<E>) -> Self {
        Self {
            unit: self.unit.clone(),
            steps,
            tail,
            dt: self.dt,
        }
    }
}

impl<E: Semigroup + Radial> FlowPath<E> {
    /// The coalescence flow obtained by projecting every step radially.
    pub fn radial(&self) -> FlowPath<CoalElem<E::Scalar>> {
        self.map_steps(|e| e.radial())
    }
}

/// Samples one step of `model`.
pub fn sample_step<M: StepModel, R: Rng + ?Sized>(model: &M, rng: &mut R) -> M::Elem {
    model.sample_step(rng)
}

/// Builds a flow of `n_steps` i.i.d. steps (plus the tail factor, if the
/// model has one).
pub fn build_flow<M: StepModel, R: Rng + ?Sized>(
    model: &M,
    n_steps: usize,
    rng: &mut R,
) -> Result<FlowPath<M::Elem>> {
    if n_steps == 0 {
        return Err(invalid("a flow needs at least one step"));
    }
    let steps = (0..n_steps).map(|_| model.sample_step(rng)).collect();
    let tail = model.sample_tail(rng);
    Ok(FlowPath::new(model.unit(), steps, tail, model.dt()))
}

/// Path of one particle over the grid; `positions[0]` is the start.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory<P> {
    pub start: P,
    pub positions: Vec<P>,
}

/// Motions of several particles driven by the same steps.
pub fn n_point_motion<E: Semigroup>(
    flow: &FlowPath<E>,
    starts: &[E::Point],
) -> Result<Vec<Trajectory<E::Point>>> {
    starts
        .iter()
        .map(|&start| {
            let mut positions = Vec::with_capacity(flow.len() + 1);
            positions.push(start);
            let mut x = start;
            for step in flow.steps() {
                x = step.apply(x)?;
                positions.push(x);
            }
            Ok(Trajectory { start, positions })
        })
        .collect()
}

pub const TRAJECTORY_CSV_HEADER: &str = "replica,time_index,particle,position";

/// Writes trajectories as CSV rows `replica,time_index,particle,position`.
/// The header is written separately with [`TRAJECTORY_CSV_HEADER`].
pub fn write_trajectories_csv<W: Write, P: std::fmt::Display>(
    out: &mut W,
    replica: usize,
    trajectories: &[Trajectory<P>],
) -> io::Result<()> {
    for (particle, tr) in trajectories.iter().enumerate() {
        for (k, p) in tr.positions.iter().enumerate() {
            writeln!(out, "{replica},{k},{particle},{p}")?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Continuum increments

/// Exact sample of the coalescence increment over a duration `t`: `a` is
/// the Brownian increment and `b` minus its running minimum, drawn from the
/// conditional tail `P(b > y | a) = exp(-2 y (y + a) / t)`.
pub fn sample_coal_increment<R: Rng + ?Sized>(t: f64, rng: &mut R) -> Result<CoalElem<f64>> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("duration must be positive, got {t}")));
    }
    let z: f64 = StandardNormal.sample(rng);
    let e: f64 = Exp1.sample(rng);
    let a = t.sqrt() * z;
    let root = (a * a + 2.0 * t * e).sqrt();
    let b = if a >= 0.0 {
        t * e / (a + root)
    } else {
        (root - a) / 2.0
    };
    CoalElem::new(a, b.max(0.0).max(-a))
}

/// Sticky increment: `(a, b)` as in [`sample_coal_increment`] and
/// `c = max(0, a + b - lambda * eta)` with an independent `eta ~ Exp(1)`.
pub fn sample_sticky_increment<R: Rng + ?Sized>(
    t: f64,
    lambda: f64,
    rng: &mut R,
) -> Result<StickyElem<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    let coal = sample_coal_increment(t, rng)?;
    let eta: f64 = Exp1.sample(rng);
    let top = coal.a() + coal.b();
    let c = (top - lambda * eta).max(0.0).min(top);
    StickyElem::new(coal.a(), coal.b(), c)
}

/// Increments of a Brownian motion run in logarithmic time `ln(t/eps)`,
/// frozen before `eps`, over consecutive grid intervals. Not reduced mod 1.
pub fn log_time_increments<R: Rng + ?Sized>(
    eps: f64,
    grid: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("scale must be positive, got {eps}")));
    }
    if grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(invalid("grid times must be finite and non-negative"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("grid must be strictly increasing"));
    }
    let clock = |t: f64| (t.max(eps) / eps).ln();
    Ok(grid
        .windows(2)
        .map(|w| {
            let var = clock(w[1]) - clock(w[0]);
            if var > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                var.sqrt() * z
            } else {
                0.0
            }
        })
        .collect())
}

/// The circle flow `Y(s,t)` over consecutive grid intervals, as angles in
/// `[0, 1)`.
pub fn sample_circle_flow<R: Rng + ?Sized>(
    eps: f64,
    grid: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(log_time_increments(eps, grid, rng)?
        .into_iter()
        .map(|x| x.rem_euclid(1.0))
        .collect())
}

// ---------------------------------------------------------------------------
// Sticky lattice flow driven by random site coins

/// Law of the site coins `theta` of the sticky lattice flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CoinLaw {
    /// `theta ~ Beta(eps, eps)`.
    Beta { eps: f64 },
    /// `theta` is 0 or 1 equiprobably; particles then coalesce.
    TwoPoint,
}

impl CoinLaw {
    pub fn beta(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(invalid(format!("eps must lie in (0, 1), got {eps}")));
        }
        Ok(CoinLaw::Beta { eps })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            CoinLaw::Beta { eps } => sample_symmetric_beta(eps, rng),
            CoinLaw::TwoPoint => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `Beta(eps, eps)` as a ratio of two `Gamma(eps)` variables, each drawn in
/// log space as `ln G(1 + eps) + ln(U) / eps` so that small shapes do not
/// underflow.
pub fn sample_symmetric_beta<R: Rng + ?Sized>(eps: f64, rng: &mut R) -> f64 {
    let gamma = Gamma::new(1.0 + eps, 1.0).expect("positive shape");
    let mut log_gamma = || {
        let g: f64 = gamma.sample(rng);
        let u: f64 = rng.random::<f64>();
        g.ln() + (1.0 - u).ln() / eps
    };
    let (l1, l2) = (log_gamma(), log_gamma());
    1.0 / (1.0 + (l2 - l1).exp())
}

/// One step of the sticky lattice flow on `Z_m`: a coin per site.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoinStep {
    pub theta: Vec<f64>,
}

impl CoinStep {
    pub fn sample<R: Rng + ?Sized>(m: u32, law: CoinLaw, rng: &mut R) -> Self {
        Self {
            theta: (0..m).map(|_| law.sample(rng)).collect(),
        }
    }

    /// Moves a particle at `x` right with probability `theta[x]`, using the
    /// particle's own uniform `u`.
    pub fn move_particle(&self, x: u32, u: f64) -> u32 {
        let m = self.theta.len() as u32;
        if u < self.theta[x as usize] {
            (x + 1) % m
        } else {
            (x + m - 1) % m
        }
    }
}

/// Particles of the sticky lattice flow, conditionally independent given
/// the coins.
pub fn sticky_coin_motion<R: Rng + ?Sized>(
    m: u32,
    law: CoinLaw,
    starts: &[u32],
    steps: usize,
    rng: &mut R,
) -> Result<Vec<Trajectory<u32>>> {
    if m < 3 {
        return Err(invalid(format!("sticky lattice needs m >= 3, got {m}")));
    }
    if let Some(&x) = starts.iter().find(|&&x| x >= m) {
        return Err(Error::OutsideDomain(format!("{x} in Z_{m}")));
    }
    let mut out: Vec<Trajectory<u32>> = starts
        .iter()
        .map(|&s| Trajectory {
            start: s,
            positions: vec![s],
        })
        .collect();
    let mut pos = starts.to_vec();
    for _ in 0..steps {
        let step = CoinStep::sample(m, law, rng);
        for (x, tr) in pos.iter_mut().zip(out.iter_mut()) {
            *x = step.move_particle(*x, rng.random());
            tr.positions.push(*x);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;
    use crate::stats::SE_BAND;

    #[test]
    fn empty_interval_is_identity_and_cocycle_holds() {
        let mut rng = replica_rng(1, 0);
        let flow = build_flow(&CoalWalk, 50, &mut rng).unwrap();
        assert_eq!(flow.interval_product(7, 7).unwrap(), CoalElem::identity());
        for (r, s, t) in [(0, 10, 50), (3, 3, 9), (5, 30, 31), (0, 0, 50)] {
            let lhs = flow.interval_product(r, t).unwrap();
            let rhs = flow
                .interval_product(r, s)
                .unwrap()
                .compose(&flow.interval_product(s, t).unwrap());
            assert_eq!(lhs, rhs);
        }
        assert!(flow.interval_product(5, 4).is_err());
        assert!(flow.interval_product(0, 51).is_err());
    }

    #[test]
    fn full_product_is_left_fold() {
        let mut rng = replica_rng(2, 0);
        let flow = build_flow(&StickyWalk::new(1.0, 0.01).unwrap(), 40, &mut rng).unwrap();
        let fold = flow
            .steps()
            .iter()
            .fold(StickyElem::identity(), |acc, s| acc.compose(s));
        assert_eq!(flow.interval_product(0, 40).unwrap(), fold);
    }

    #[test]
    fn zero_steps_rejected() {
        let mut rng = replica_rng(3, 0);
        assert!(build_flow(&CoalWalk, 0, &mut rng).is_err());
    }

    #[test]
    fn toy_flow_has_tail_and_binary_steps() {
        let mut rng = replica_rng(4, 0);
        let model = ZmToy::new(2).unwrap();
        let flow = build_flow(&model, 4, &mut rng).unwrap();
        assert_eq!(flow.len(), 4);
        assert!(flow.steps().iter().all(|s| s.value() < 2));
        assert!(flow.tail().is_some());
        let total = flow
            .steps()
            .iter()
            .chain(flow.tail())
            .map(|s| s.value())
            .sum::<u32>()
            % 2;
        assert_eq!(flow.to_end(0).unwrap().value(), total);
    }

    #[test]
    fn coal_dual_formulas_hold_exactly() {
        let mut rng = replica_rng(5, 0);
        for _ in 0..50 {
            let flow = build_flow(&CoalWalk, 200, &mut rng).unwrap();
            let a_prefix: Vec<i64> = (0..=200)
                .map(|s| flow.interval_product(0, s).unwrap().a())
                .collect();
            let total = flow.interval_product(0, 200).unwrap();
            assert_eq!(total.b(), -a_prefix.iter().min().unwrap());
            let a_suffix_max = (0..=200)
                .map(|s| flow.interval_product(s, 200).unwrap().a())
                .max()
                .unwrap();
            assert_eq!(total.a() + total.b(), a_suffix_max);
        }
    }

    #[test]
    fn sticky_walk_probabilities() {
        let w = StickyWalk::new(1.0, 0.01).unwrap();
        assert!((w.minus_probability() - 0.5).abs() < 1e-15);
        assert!((w.star_probability() - 0.05).abs() < 1e-15);
        assert!((w.plus_probability() - 0.45).abs() < 1e-15);
        assert!(StickyWalk::new(0.1, 1.0).is_err());
        assert!(StickyWalk::new(-1.0, 0.01).is_err());
    }

    #[test]
    fn sticky_walk_step_frequencies() {
        let w = StickyWalk::new(1.0, 0.01).unwrap();
        let mut rng = replica_rng(6, 0);
        let n = 200_000;
        let (mut minus, mut star) = (0u32, 0u32);
        for _ in 0..n {
            match w.sample_step(&mut rng) {
                s if s == StickyElem::MINUS => minus += 1,
                s if s == StickyElem::STAR => star += 1,
                _ => {}
            }
        }
        for (count, p) in [(minus, 0.5), (star, 0.05)] {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((count as f64 / n as f64 - p).abs() < SE_BAND * se);
        }
    }

    #[test]
    fn split_walk_projects_onto_coal_walk() {
        let mut rng = replica_rng(7, 0);
        let flow = build_flow(&SplitWalk, 100, &mut rng).unwrap();
        let radial = flow.radial();
        for (s, r) in flow.steps().iter().zip(radial.steps()) {
            let expected = if *s == LatticeSplitElem::UP {
                CoalElem::UP
            } else {
                CoalElem::DOWN
            };
            assert_eq!(*r, expected);
        }
        assert_eq!(
            radial.interval_product(0, 100).unwrap(),
            flow.interval_product(0, 100).unwrap().radial()
        );
    }

    #[test]
    fn coalescing_two_point_motion() {
        let mut rng = replica_rng(8, 0);
        for _ in 0..200 {
            let flow = build_flow(&CoalWalk, 300, &mut rng).unwrap();
            let tr = n_point_motion(&flow, &[0, 4]).unwrap();
            let mut met = false;
            let mut last = 4;
            for (x, y) in tr[0].positions.iter().zip(&tr[1].positions) {
                let d = y - x;
                assert!(d <= last && d >= 0);
                if met {
                    assert_eq!(d, 0);
                }
                met |= d == 0;
                last = d;
            }
        }
    }

    #[test]
    fn arratia_equal_starts_move_together() {
        let mut rng = replica_rng(9, 0);
        let flow = build_flow(&ArratiaLattice::new(16).unwrap(), 100, &mut rng).unwrap();
        let tr = n_point_motion(&flow, &[3, 3]).unwrap();
        assert_eq!(tr[0], tr[1]);
        assert!(n_point_motion(&flow, &[16]).is_err());
    }

    #[test]
    fn sticky_coin_particles_separate_after_meeting() {
        let law = CoinLaw::beta(0.3).unwrap();
        let mut rng = replica_rng(10, 0);
        let mut separations = 0;
        for _ in 0..10_000 {
            let tr = sticky_coin_motion(8, law, &[0, 0], 3, &mut rng).unwrap();
            if tr[0]
                .positions
                .iter()
                .zip(&tr[1].positions)
                .any(|(a, b)| a != b)
            {
                separations += 1;
            }
        }
        assert!(separations > 0);
        let mut rng = replica_rng(11, 0);
        for _ in 0..1000 {
            let tr = sticky_coin_motion(8, CoinLaw::TwoPoint, &[2, 2], 5, &mut rng).unwrap();
            assert_eq!(tr[0], tr[1]);
        }
    }

    #[test]
    fn symmetric_beta_moments() {
        let mut rng = replica_rng(12, 0);
        let eps = 0.25;
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_symmetric_beta(eps, &mut rng))
            .collect();
        assert!(xs.iter().all(|x| (0.0..=1.0).contains(x)));
        let mean = xs.iter().sum::<f64>() / n as f64;
        // Var Beta(e,e) = 1 / (4 (2e + 1))
        let var = 1.0 / (4.0 * (2.0 * eps + 1.0));
        assert!((mean - 0.5).abs() < SE_BAND * (var / n as f64).sqrt());
        let emp_var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((emp_var - var).abs() < 0.01 * var + 0.002);
    }

    #[test]
    fn coal_increment_support_and_marginal() {
        let mut rng = replica_rng(13, 0);
        let t = 2.0;
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let e = sample_coal_increment(t, &mut rng).unwrap();
            assert!(e.b() >= 0.0 && e.a() + e.b() >= 0.0);
            sum += e.a();
            sum2 += e.a() * e.a();
        }
        let mean = sum / n as f64;
        assert!(mean.abs() < SE_BAND * (t / n as f64).sqrt());
        let var = sum2 / n as f64 - mean * mean;
        // the sample variance of a normal has sd sqrt(2/n) t
        assert!((var - t).abs() < SE_BAND * (2.0 / n as f64).sqrt() * t);
        assert!(sample_coal_increment(0.0, &mut rng).is_err());
    }

    #[test]
    fn sticky_increment_has_atom_at_zero() {
        let mut rng = replica_rng(14, 0);
        let mut zeros = 0;
        for _ in 0..10_000 {
            let e = sample_sticky_increment(0.5, 1.0, &mut rng).unwrap();
            assert!(e.c() >= 0.0 && e.c() <= e.a() + e.b());
            if e.c() == 0.0 {
                zeros += 1;
            }
        }
        assert!(zeros > 0);
        assert!(sample_sticky_increment(1.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn circle_flow_is_frozen_before_eps() {
        let mut rng = replica_rng(15, 0);
        let y = sample_circle_flow(0.1, &[0.0, 0.05, 0.1, 0.5], &mut rng).unwrap();
        assert_eq!(y[0], 0.0);
        assert_eq!(y[1], 0.0);
        assert!((0.0..1.0).contains(&y[2]));
        assert!(sample_circle_flow(0.1, &[0.0, 0.5, 0.4], &mut rng).is_err());
    }

    #[test]
    fn log_time_variance() {
        let mut rng = replica_rng(16, 0);
        let (s, t) = (0.2, 0.8);
        let n = 50_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| log_time_increments(1e-3, &[s, t], &mut rng).unwrap()[0])
            .collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let target = (t / s).ln();
        assert!((var - target).abs() < SE_BAND * (2.0 / n as f64).sqrt() * target);
    }

    #[test]
    fn trajectories_csv_rows() {
        let tr = vec![Trajectory {
            start: 0u32,
            positions: vec![0, 1],
        }];
        let mut buf = Vec::new();
        write_trajectories_csv(&mut buf, 3, &tr).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "3,0,0,0\n3,1,0,1\n");
    }
}
