//! Concrete semigroups of maps and their composition laws.
//!
//! **Composition order.** Throughout the crate `x.compose(&y)` means "apply
//! `x` first, then `y`", i.e. the map `p -> y(x(p))`. Products of flow
//! increments read left to right in time: `X(r,t) = X(r,s).compose(X(s,t))`.
//!
//! The semigroups:
//!
//! * [`ZmElem`]: the cyclic group `Z_m`, acting on itself by translation.
//! * [`CoalElem`]: maps `x -> a + max(x, b)` of `[0, inf)`, with `b >= 0`
//!   and `a + b >= 0` (coalescence at the origin).
//! * [`SplitElem`]: maps of the line that move `|x| > b` away from the origin
//!   by `a` and send `[-b, b]` to `+-(a + b)` (splitting).
//! * [`StickyElem`]: maps of `[0, inf)` sending `[0, b]` to `c` and
//!   `x > b` to `x + a`, with `0 <= c <= a + b` (stickiness).
//! * [`LatticeSplitElem`]: the discrete splitting walk on half-integers.
//! * [`CircleMap`]: arbitrary maps of `Z_m`, used for lattice flows on the
//!   discrete circle.
//!
//! Integer instances (`i64`) are exact; real instances use `f64`.

use std::fmt::{Debug, Display};
use std::ops::{Add, Neg, Sub};

use num_traits::Zero;
use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Scalar parameter type of the real-line semigroups.
pub trait Scalar:
    Copy
    + PartialOrd
    + Debug
    + Display
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Zero
    + Send
    + Sync
    + 'static
{
    fn is_finite_value(self) -> bool;

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn abs_value(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }
}

impl Scalar for i64 {
    fn is_finite_value(self) -> bool {
        true
    }
}

impl Scalar for f64 {
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

/// A semigroup of maps with a unit.
pub trait Semigroup: Clone + PartialEq + Debug + Send + Sync {
    type Point: Copy + PartialEq + Debug;

    /// The neutral element of the semigroup `self` lives in.
    fn unit(&self) -> Self;

    /// `self` first, then `next`.
    fn compose(&self, next: &Self) -> Self;

    fn apply(&self, point: Self::Point) -> Result<Self::Point>;
}

/// Elements whose radial part is a coalescence map.
pub trait Radial {
    type Scalar: Scalar;
    fn radial(&self) -> CoalElem<Self::Scalar>;
}

// ---------------------------------------------------------------------------

/// Element of the cyclic group `Z_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ZmElem {
    modulus: u32,
    value: u32,
}

impl ZmElem {
    pub fn new(modulus: u32, value: u32) -> Result<Self> {
        if modulus < 2 {
            return Err(invalid(format!(
                "modulus must be at least 2, got {modulus}"
            )));
        }
        if value >= modulus {
            return Err(invalid(format!(
                "value {value} not below modulus {modulus}"
            )));
        }
        Ok(Self { modulus, value })
    }

    pub fn identity(modulus: u32) -> Result<Self> {
        Self::new(modulus, 0)
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn value(&self) -> u32 {
        self.value
    }

    pub fn checked_compose(&self, next: &Self) -> Result<Self> {
        if self.modulus != next.modulus {
            return Err(Error::Mismatch(format!(
                "Z_{} and Z_{}",
                self.modulus, next.modulus
            )));
        }
        Ok(Self {
            modulus: self.modulus,
            value: (self.value + next.value) % self.modulus,
        })
    }
}

impl Semigroup for ZmElem {
    type Point = u32;

    fn unit(&self) -> Self {
        Self {
            modulus: self.modulus,
            value: 0,
        }
    }

    /// Panics if the moduli differ; use [`ZmElem::checked_compose`] for
    /// untrusted input.
    fn compose(&self, next: &Self) -> Self {
        self.checked_compose(next).expect("Z_m moduli must agree")
    }

    fn apply(&self, point: u32) -> Result<u32> {
        if point >= self.modulus {
            return Err(Error::OutsideDomain(format!(
                "{point} in Z_{}",
                self.modulus
            )));
        }
        Ok((point + self.value) % self.modulus)
    }
}

// ---------------------------------------------------------------------------

/// Coalescence map `x -> a + max(x, b)` on `[0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct CoalElem<S> {
    a: S,
    b: S,
}

impl<S: Scalar> CoalElem<S> {
    pub fn new(a: S, b: S) -> Result<Self> {
        if !a.is_finite_value() || !b.is_finite_value() {
            return Err(invalid("coalescence parameters must be finite"));
        }
        if b < S::zero() || a + b < S::zero() {
            return Err(invalid(format!(
                "need b >= 0 and a + b >= 0, got a={a}, b={b}"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn identity() -> Self {
        Self {
            a: S::zero(),
            b: S::zero(),
        }
    }

    pub fn a(&self) -> S {
        self.a
    }

    pub fn b(&self) -> S {
        self.b
    }
}

impl CoalElem<i64> {
    /// `f_+(x) = x + 1`.
    pub const UP: Self = Self { a: 1, b: 0 };
    /// `f_-(x) = max(0, x - 1)`.
    pub const DOWN: Self = Self { a: -1, b: 1 };
}

fn coal_law<S: Scalar>(first: &CoalElem<S>, next: &CoalElem<S>) -> CoalElem<S> {
    CoalElem {
        a: first.a + next.a,
        b: first.b.max_of(next.b - first.a),
    }
}

fn check_half_line<S: Scalar>(point: S) -> Result<()> {
    if !point.is_finite_value() || point < S::zero() {
        return Err(Error::OutsideDomain(format!("{point} not in [0, inf)")));
    }
    Ok(())
}

impl<S: Scalar> Semigroup for CoalElem<S> {
    type Point = S;

    fn unit(&self) -> Self {
        Self::identity()
    }

    fn compose(&self, next: &Self) -> Self {
        coal_law(self, next)
    }

    fn apply(&self, point: S) -> Result<S> {
        check_half_line(point)?;
        Ok(self.a + point.max_of(self.b))
    }
}

impl<S: Scalar> Radial for CoalElem<S> {
    type Scalar = S;
    fn radial(&self) -> CoalElem<S> {
        *self
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn flip(self) -> Self {
        match self {
            Sign::Minus => Sign::Plus,
            Sign::Plus => Sign::Minus,
        }
    }
}

/// Splitting map `f^sign_{a,b}` of the real line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SplitElem<S> {
    a: S,
    b: S,
    sign: Sign,
}

impl<S: Scalar> SplitElem<S> {
    pub fn new(a: S, b: S, sign: Sign) -> Result<Self> {
        let CoalElem { a, b } = CoalElem::new(a, b)?;
        Ok(Self::canonical(a, b, sign))
    }

    /// When `a + b = 0` the centre goes to 0 and both signs give the same
    /// map; the sign is then stored as `Plus` so equality is equality of maps.
    fn canonical(a: S, b: S, sign: Sign) -> Self {
        let sign = if a + b == S::zero() { Sign::Plus } else { sign };
        Self { a, b, sign }
    }

    pub fn identity() -> Self {
        Self {
            a: S::zero(),
            b: S::zero(),
            sign: Sign::Plus,
        }
    }

    pub fn a(&self) -> S {
        self.a
    }

    pub fn b(&self) -> S {
        self.b
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }
}

impl<S: Scalar> Semigroup for SplitElem<S> {
    type Point = S;

    fn unit(&self) -> Self {
        Self::identity()
    }

    fn compose(&self, next: &Self) -> Self {
        let CoalElem { a, b } = coal_law(&self.radial(), &next.radial());
        // the centre of the composite is the centre of `self` exactly when
        // its image lands outside the centre of `next`
        let sign = if self.a + self.b > next.b {
            self.sign
        } else {
            next.sign
        };
        Self::canonical(a, b, sign)
    }

    fn apply(&self, x: S) -> Result<S> {
        if !x.is_finite_value() {
            return Err(Error::OutsideDomain(format!("{x}")));
        }
        let y = if x < -self.b {
            x - self.a
        } else if x > self.b {
            x + self.a
        } else {
            match self.sign {
                Sign::Minus => -(self.a + self.b),
                Sign::Plus => self.a + self.b,
            }
        };
        Ok(y)
    }
}

impl<S: Scalar> Radial for SplitElem<S> {
    type Scalar = S;
    fn radial(&self) -> CoalElem<S> {
        CoalElem {
            a: self.a,
            b: self.b,
        }
    }
}

// ---------------------------------------------------------------------------

/// Sticky map `f_{a,b,c}` of `[0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct StickyElem<S> {
    a: S,
    b: S,
    c: S,
}

impl<S: Scalar> StickyElem<S> {
    pub fn new(a: S, b: S, c: S) -> Result<Self> {
        let CoalElem { a, b } = CoalElem::new(a, b)?;
        if !c.is_finite_value() || c < S::zero() || c > a + b {
            return Err(invalid(format!(
                "need 0 <= c <= a + b, got a={a}, b={b}, c={c}"
            )));
        }
        Ok(Self { a, b, c })
    }

    pub fn identity() -> Self {
        Self {
            a: S::zero(),
            b: S::zero(),
            c: S::zero(),
        }
    }

    pub fn a(&self) -> S {
        self.a
    }

    pub fn b(&self) -> S {
        self.b
    }

    pub fn c(&self) -> S {
        self.c
    }
}

impl StickyElem<i64> {
    /// `f_+`: `x -> x + 1` for `x > 0`, `0 -> 0`.
    pub const PLUS: Self = Self { a: 1, b: 0, c: 0 };
    /// `f_-(x) = max(0, x - 1)`.
    pub const MINUS: Self = Self { a: -1, b: 1, c: 0 };
    /// `f_*(x) = x + 1`.
    pub const STAR: Self = Self { a: 1, b: 0, c: 1 };
}

impl<S: Scalar> Semigroup for StickyElem<S> {
    type Point = S;

    fn unit(&self) -> Self {
        Self::identity()
    }

    fn compose(&self, next: &Self) -> Self {
        let CoalElem { a, b } = coal_law(&self.radial(), &next.radial());
        let c = if self.c > next.b {
            next.a + self.c
        } else {
            next.c
        };
        Self { a, b, c }
    }

    fn apply(&self, x: S) -> Result<S> {
        check_half_line(x)?;
        Ok(if x <= self.b { self.c } else { x + self.a })
    }
}

impl<S: Scalar> Radial for StickyElem<S> {
    type Scalar = S;
    fn radial(&self) -> CoalElem<S> {
        CoalElem {
            a: self.a,
            b: self.b,
        }
    }
}

// ---------------------------------------------------------------------------

/// Word `f_-^j f_+^k` of the discrete splitting walk on `Z + 1/2`.
///
/// The generators satisfy `f_+ f_- = 1`, so every word has this normal form
/// and the element is stored through its coalescence parameters
/// `b = j`, `a = k - j`. Points are half-integers scaled by two, i.e. odd
/// integers: the point `x` is stored as `2x`.
///
/// Near the origin `f_-` flips the sign (`1/2 -> -1/2 -> 1/2`), so the map
/// is not one of the continuum forms `f^+-_{a,b}`: the image of the centre
/// depends on the parity of the starting point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct LatticeSplitElem {
    radial: CoalElem<i64>,
}

impl LatticeSplitElem {
    pub const UP: Self = Self {
        radial: CoalElem::UP,
    };
    pub const DOWN: Self = Self {
        radial: CoalElem::DOWN,
    };

    pub fn identity() -> Self {
        Self {
            radial: CoalElem::identity(),
        }
    }

    pub fn from_radial(radial: CoalElem<i64>) -> Self {
        Self { radial }
    }
}

impl Semigroup for LatticeSplitElem {
    /// Twice a half-integer, hence always odd.
    type Point = i64;

    fn unit(&self) -> Self {
        Self::identity()
    }

    fn compose(&self, next: &Self) -> Self {
        Self {
            radial: coal_law(&self.radial, &next.radial),
        }
    }

    fn apply(&self, x: i64) -> Result<i64> {
        if x % 2 == 0 {
            return Err(Error::OutsideDomain(format!(
                "{x} is not twice a half-integer"
            )));
        }
        let down = self.radial.b;
        let up = self.radial.a + self.radial.b;
        let level = (x.abs() - 1) / 2;
        let sign = x.signum();
        let (level, sign) = if level >= down {
            (level - down, sign)
        } else if (down - level) % 2 == 0 {
            (0, sign)
        } else {
            (0, -sign)
        };
        Ok(sign * (2 * (level + up) + 1))
    }
}

impl Radial for LatticeSplitElem {
    type Scalar = i64;
    fn radial(&self) -> CoalElem<i64> {
        self.radial
    }
}

// ---------------------------------------------------------------------------

/// A map of `Z_m` to itself, stored as its value table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CircleMap {
    table: Vec<u32>,
}

impl CircleMap {
    pub fn new(table: Vec<u32>) -> Result<Self> {
        let m = table.len();
        if m < 2 {
            return Err(invalid("circle maps need at least two sites"));
        }
        if table.iter().any(|&v| v as usize >= m) {
            return Err(invalid("circle map value outside Z_m"));
        }
        Ok(Self { table })
    }

    pub fn identity(m: u32) -> Result<Self> {
        Self::new((0..m).collect())
    }

    /// Moves site `x` to `x + 1` when `right(x)` and to `x - 1` otherwise.
    pub fn from_moves(m: u32, right: impl Fn(u32) -> bool) -> Self {
        let table = (0..m)
            .map(|x| {
                if right(x) {
                    (x + 1) % m
                } else {
                    (x + m - 1) % m
                }
            })
            .collect();
        Self { table }
    }

    pub fn modulus(&self) -> u32 {
        self.table.len() as u32
    }

    pub fn table(&self) -> &[u32] {
        &self.table
    }

    pub fn checked_compose(&self, next: &Self) -> Result<Self> {
        if self.table.len() != next.table.len() {
            return Err(Error::Mismatch(format!(
                "maps of Z_{} and Z_{}",
                self.table.len(),
                next.table.len()
            )));
        }
        Ok(self.compose(next))
    }
}

impl Semigroup for CircleMap {
    type Point = u32;

    fn unit(&self) -> Self {
        Self {
            table: (0..self.table.len() as u32).collect(),
        }
    }

    fn compose(&self, next: &Self) -> Self {
        assert_eq!(
            self.table.len(),
            next.table.len(),
            "circle sizes must agree"
        );
        Self {
            table: self.table.iter().map(|&y| next.table[y as usize]).collect(),
        }
    }

    fn apply(&self, x: u32) -> Result<u32> {
        self.table
            .get(x as usize)
            .copied()
            .ok_or_else(|| Error::OutsideDomain(format!("{x} in Z_{}", self.table.len())))
    }
}

// ---------------------------------------------------------------------------
// Tagged elements

/// Names a concrete semigroup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SemigroupKind {
    Zm { modulus: u32 },
    CoalInt,
    CoalReal,
    SplitInt,
    SplitReal,
    StickyInt,
    StickyReal,
    LatticeSplit,
    Circle { modulus: u32 },
}

/// A point of the space a semigroup acts on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Point {
    Int(i64),
    Real(f64),
}

/// An element of one of the concrete semigroups, tagged with its kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SemigroupElement {
    Zm(ZmElem),
    CoalInt(CoalElem<i64>),
    CoalReal(CoalElem<f64>),
    SplitInt(SplitElem<i64>),
    SplitReal(SplitElem<f64>),
    StickyInt(StickyElem<i64>),
    StickyReal(StickyElem<f64>),
    LatticeSplit(LatticeSplitElem),
    Circle(CircleMap),
}

/// The neutral element of `kind`.
pub fn identity(kind: SemigroupKind) -> Result<SemigroupElement> {
    use SemigroupElement as E;
    Ok(match kind {
        SemigroupKind::Zm { modulus } => E::Zm(ZmElem::identity(modulus)?),
        SemigroupKind::CoalInt => E::CoalInt(CoalElem::identity()),
        SemigroupKind::CoalReal => E::CoalReal(CoalElem::identity()),
        SemigroupKind::SplitInt => E::SplitInt(SplitElem::identity()),
        SemigroupKind::SplitReal => E::SplitReal(SplitElem::identity()),
        SemigroupKind::StickyInt => E::StickyInt(StickyElem::identity()),
        SemigroupKind::StickyReal => E::StickyReal(StickyElem::identity()),
        SemigroupKind::LatticeSplit => E::LatticeSplit(LatticeSplitElem::identity()),
        SemigroupKind::Circle { modulus } => E::Circle(CircleMap::identity(modulus)?),
    })
}

fn mismatch(x: &SemigroupElement, y: &SemigroupElement) -> Error {
    Error::Mismatch(format!("{:?} and {:?}", x.kind(), y.kind()))
}

/// `x` first, then `y`.
pub fn compose(x: &SemigroupElement, y: &SemigroupElement) -> Result<SemigroupElement> {
    use SemigroupElement as E;
    Ok(match (x, y) {
        (E::Zm(p), E::Zm(q)) => E::Zm(p.checked_compose(q)?),
        (E::CoalInt(p), E::CoalInt(q)) => E::CoalInt(p.compose(q)),
        (E::CoalReal(p), E::CoalReal(q)) => E::CoalReal(p.compose(q)),
        (E::SplitInt(p), E::SplitInt(q)) => E::SplitInt(p.compose(q)),
        (E::SplitReal(p), E::SplitReal(q)) => E::SplitReal(p.compose(q)),
        (E::StickyInt(p), E::StickyInt(q)) => E::StickyInt(p.compose(q)),
        (E::StickyReal(p), E::StickyReal(q)) => E::StickyReal(p.compose(q)),
        (E::LatticeSplit(p), E::LatticeSplit(q)) => E::LatticeSplit(p.compose(q)),
        (E::Circle(p), E::Circle(q)) => E::Circle(p.checked_compose(q)?),
        _ => return Err(mismatch(x, y)),
    })
}

fn int_point(p: Point) -> Result<i64> {
    match p {
        Point::Int(v) => Ok(v),
        Point::Real(v) => Err(Error::OutsideDomain(format!("{v} is not an integer point"))),
    }
}

fn real_point(p: Point) -> f64 {
    match p {
        Point::Int(v) => v as f64,
        Point::Real(v) => v,
    }
}

fn site(p: Point) -> Result<u32> {
    let v = int_point(p)?;
    u32::try_from(v).map_err(|_| Error::OutsideDomain(format!("{v}")))
}

/// Evaluates the map represented by `x` at `point`.
pub fn apply(x: &SemigroupElement, point: Point) -> Result<Point> {
    use SemigroupElement as E;
    Ok(match x {
        E::Zm(e) => Point::Int(e.apply(site(point)?)? as i64),
        E::CoalInt(e) => Point::Int(e.apply(int_point(point)?)?),
        E::CoalReal(e) => Point::Real(e.apply(real_point(point))?),
        E::SplitInt(e) => Point::Int(e.apply(int_point(point)?)?),
        E::SplitReal(e) => Point::Real(e.apply(real_point(point))?),
        E::StickyInt(e) => Point::Int(e.apply(int_point(point)?)?),
        E::StickyReal(e) => Point::Real(e.apply(real_point(point))?),
        E::LatticeSplit(e) => Point::Int(e.apply(int_point(point)?)?),
        E::Circle(e) => Point::Int(e.apply(site(point)?)? as i64),
    })
}

/// Projects a splitting or sticky element onto its coalescence part.
pub fn radial_homomorphism(x: &SemigroupElement) -> Result<SemigroupElement> {
    use SemigroupElement as E;
    Ok(match x {
        E::SplitInt(e) => E::CoalInt(e.radial()),
        E::SplitReal(e) => E::CoalReal(e.radial()),
        E::StickyInt(e) => E::CoalInt(e.radial()),
        E::StickyReal(e) => E::CoalReal(e.radial()),
        E::LatticeSplit(e) => E::CoalInt(e.radial()),
        other => {
            return Err(Error::Mismatch(format!(
                "{:?} has no radial projection",
                other.kind()
            )))
        }
    })
}

impl SemigroupElement {
    pub fn kind(&self) -> SemigroupKind {
        use SemigroupElement as E;
        match self {
            E::Zm(e) => SemigroupKind::Zm {
                modulus: e.modulus(),
            },
            E::CoalInt(_) => SemigroupKind::CoalInt,
            E::CoalReal(_) => SemigroupKind::CoalReal,
            E::SplitInt(_) => SemigroupKind::SplitInt,
            E::SplitReal(_) => SemigroupKind::SplitReal,
            E::StickyInt(_) => SemigroupKind::StickyInt,
            E::StickyReal(_) => SemigroupKind::StickyReal,
            E::LatticeSplit(_) => SemigroupKind::LatticeSplit,
            E::Circle(e) => SemigroupKind::Circle {
                modulus: e.modulus(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn coal(a: i64, b: i64) -> CoalElem<i64> {
        CoalElem::new(a, b).unwrap()
    }

    #[test]
    fn collapsing_split_maps_have_one_representation() {
        let minus = SplitElem::new(-3i64, 3, Sign::Minus).unwrap();
        let plus = SplitElem::new(-3i64, 3, Sign::Plus).unwrap();
        assert_eq!(minus, plus);
        assert_eq!(minus.compose(&minus.unit()), minus);
        let x = SplitElem::new(-2i64, 5, Sign::Minus).unwrap();
        let y = SplitElem::new(-4i64, 4, Sign::Minus).unwrap();
        assert_eq!(x.compose(&y).sign(), Sign::Plus);
    }

    fn sticky(a: i64, b: i64, c: i64) -> StickyElem<i64> {
        StickyElem::new(a, b, c).unwrap()
    }

    #[test]
    fn identities() {
        assert_eq!(
            identity(SemigroupKind::CoalInt).unwrap(),
            SemigroupElement::CoalInt(coal(0, 0))
        );
        assert_eq!(
            identity(SemigroupKind::StickyReal).unwrap(),
            SemigroupElement::StickyReal(StickyElem::new(0.0, 0.0, 0.0).unwrap())
        );
        let z = identity(SemigroupKind::Zm { modulus: 5 }).unwrap();
        assert_eq!(z, SemigroupElement::Zm(ZmElem::new(5, 0).unwrap()));
        assert!(identity(SemigroupKind::Zm { modulus: 1 }).is_err());
    }

    #[test]
    fn composition_examples() {
        assert_eq!(coal(2, 1).compose(&coal(-1, 4)), coal(1, 2));
        assert_eq!(sticky(1, 0, 1).compose(&sticky(0, 2, 1)), sticky(1, 1, 1));
        assert_eq!(CoalElem::UP.compose(&CoalElem::DOWN), CoalElem::identity());
    }

    #[test]
    fn composition_agrees_pointwise_on_a_grid() {
        let (x, y) = (coal(2, 1), coal(-1, 4));
        let xy = x.compose(&y);
        for p in 0..20 {
            assert_eq!(xy.apply(p).unwrap(), y.apply(x.apply(p).unwrap()).unwrap());
        }
        let (x, y) = (sticky(1, 0, 1), sticky(0, 2, 1));
        let xy = x.compose(&y);
        for p in 0..20 {
            assert_eq!(xy.apply(p).unwrap(), y.apply(x.apply(p).unwrap()).unwrap());
        }
    }

    #[test]
    fn apply_examples() {
        assert_eq!(coal(2, 1).apply(0).unwrap(), 3);
        let s = SplitElem::new(1, 2, Sign::Plus).unwrap();
        assert_eq!(s.apply(0).unwrap(), 3);
        assert_eq!(StickyElem::MINUS.apply(0).unwrap(), 0);
        assert!(coal(2, 1).apply(-1).is_err());
        assert!(StickyElem::STAR.apply(-3).is_err());
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(CoalElem::new(-2, 1).is_err());
        assert!(CoalElem::new(0, -1).is_err());
        assert!(StickyElem::new(1, 1, 3).is_err());
        assert!(StickyElem::new(1, 1, -1).is_err());
        assert!(CoalElem::new(f64::NAN, 1.0).is_err());
        assert!(ZmElem::new(4, 4).is_err());
    }

    #[test]
    fn lattice_relations() {
        assert_eq!(CoalElem::UP.compose(&CoalElem::DOWN), CoalElem::identity());
        assert_ne!(CoalElem::DOWN.compose(&CoalElem::UP), CoalElem::identity());
        let (plus, minus, star) = (StickyElem::PLUS, StickyElem::MINUS, StickyElem::STAR);
        assert_eq!(plus.compose(&minus), StickyElem::identity());
        assert_eq!(star.compose(&minus), StickyElem::identity());
        assert_eq!(star.compose(&plus), star.compose(&star));
        let (up, down) = (LatticeSplitElem::UP, LatticeSplitElem::DOWN);
        assert_eq!(up.compose(&down), LatticeSplitElem::identity());
    }

    #[test]
    fn lattice_split_generators_act_on_half_integers() {
        // points scaled by two: 1 is 1/2, -3 is -3/2
        let down = LatticeSplitElem::DOWN;
        assert_eq!(down.apply(1).unwrap(), -1);
        assert_eq!(down.apply(-1).unwrap(), 1);
        assert_eq!(down.apply(3).unwrap(), 1);
        assert_eq!(down.apply(-5).unwrap(), -3);
        let up = LatticeSplitElem::UP;
        assert_eq!(up.apply(1).unwrap(), 3);
        assert_eq!(up.apply(-1).unwrap(), -3);
        assert!(up.apply(2).is_err());
    }

    #[test]
    fn radial_examples() {
        let s = SemigroupElement::SplitInt(SplitElem::new(1, 2, Sign::Minus).unwrap());
        assert_eq!(
            radial_homomorphism(&s).unwrap(),
            SemigroupElement::CoalInt(coal(1, 2))
        );
        let t = SemigroupElement::StickyInt(sticky(1, 1, 0));
        assert_eq!(
            radial_homomorphism(&t).unwrap(),
            SemigroupElement::CoalInt(coal(1, 1))
        );
        assert!(radial_homomorphism(&SemigroupElement::CoalInt(coal(0, 0))).is_err());
    }

    #[test]
    fn tagged_compose_rejects_mismatches() {
        let z5 = SemigroupElement::Zm(ZmElem::new(5, 1).unwrap());
        let z6 = SemigroupElement::Zm(ZmElem::new(6, 1).unwrap());
        assert!(compose(&z5, &z6).is_err());
        let c = SemigroupElement::CoalInt(coal(0, 0));
        assert!(compose(&z5, &c).is_err());
        let z = compose(&z5, &z5).unwrap();
        assert_eq!(apply(&z, Point::Int(4)).unwrap(), Point::Int(1));
    }

    #[test]
    fn circle_maps_compose_left_first() {
        let right = CircleMap::from_moves(4, |_| true);
        let left = CircleMap::from_moves(4, |_| false);
        assert_eq!(right.compose(&left), right.unit());
        let swap = CircleMap::new(vec![1, 0, 3, 2]).unwrap();
        let shift = CircleMap::new(vec![1, 2, 3, 0]).unwrap();
        let both = swap.compose(&shift);
        for x in 0..4 {
            assert_eq!(
                both.apply(x).unwrap(),
                shift.apply(swap.apply(x).unwrap()).unwrap()
            );
        }
    }

    fn coal_strategy() -> impl Strategy<Value = CoalElem<i64>> {
        (0i64..20, 0i64..40).prop_map(|(b, s)| coal(s - b, b))
    }

    fn split_strategy() -> impl Strategy<Value = SplitElem<i64>> {
        (coal_strategy(), any::<bool>()).prop_map(|(c, plus)| {
            let sign = if plus { Sign::Plus } else { Sign::Minus };
            SplitElem::new(c.a(), c.b(), sign).unwrap()
        })
    }

    fn sticky_strategy() -> impl Strategy<Value = StickyElem<i64>> {
        (coal_strategy(), 0.0f64..=1.0).prop_map(|(c, u)| {
            let top = c.a() + c.b();
            sticky(c.a(), c.b(), (u * top as f64).floor() as i64)
        })
    }

    fn real_coal() -> impl Strategy<Value = CoalElem<f64>> {
        (0.0f64..5.0, 0.0f64..10.0).prop_map(|(b, s)| CoalElem::new(s - b, b).unwrap())
    }

    proptest! {
        #[test]
        fn coal_associative(x in coal_strategy(), y in coal_strategy(), z in coal_strategy()) {
            prop_assert_eq!(x.compose(&y).compose(&z), x.compose(&y.compose(&z)));
        }

        #[test]
        fn split_associative(x in split_strategy(), y in split_strategy(), z in split_strategy()) {
            prop_assert_eq!(x.compose(&y).compose(&z), x.compose(&y.compose(&z)));
        }

        #[test]
        fn sticky_associative(x in sticky_strategy(), y in sticky_strategy(), z in sticky_strategy()) {
            prop_assert_eq!(x.compose(&y).compose(&z), x.compose(&y.compose(&z)));
        }

        #[test]
        fn real_coal_associative(x in real_coal(), y in real_coal(), z in real_coal()) {
            let l = x.compose(&y).compose(&z);
            let r = x.compose(&y.compose(&z));
            prop_assert!((l.a() - r.a()).abs() < 1e-12 && (l.b() - r.b()).abs() < 1e-12);
        }

        #[test]
        fn pointwise_soundness(x in split_strategy(), y in split_strategy(), p in -60i64..60) {
            let xy = x.compose(&y);
            prop_assert_eq!(xy.apply(p).unwrap(), y.apply(x.apply(p).unwrap()).unwrap());
        }

        #[test]
        fn sticky_pointwise_soundness(x in sticky_strategy(), y in sticky_strategy(), p in 0i64..60) {
            let xy = x.compose(&y);
            prop_assert_eq!(xy.apply(p).unwrap(), y.apply(x.apply(p).unwrap()).unwrap());
        }

        #[test]
        fn results_satisfy_invariants(x in sticky_strategy(), y in sticky_strategy()) {
            let xy = x.compose(&y);
            prop_assert!(StickyElem::new(xy.a(), xy.b(), xy.c()).is_ok());
        }

        #[test]
        fn radial_intertwining(x in split_strategy(), p in -60i64..60) {
            let lhs = x.apply(p).unwrap().abs();
            prop_assert_eq!(lhs, x.radial().apply(p.abs()).unwrap());
        }

        #[test]
        fn radial_is_a_homomorphism(x in sticky_strategy(), y in sticky_strategy()) {
            prop_assert_eq!(x.compose(&y).radial(), x.radial().compose(&y.radial()));
        }

        #[test]
        fn lattice_split_words_act_consistently(
            word in proptest::collection::vec(any::<bool>(), 0..12),
            p in -30i64..30,
        ) {
            let p = 2 * p + 1;
            let gens: Vec<LatticeSplitElem> = word
                .iter()
                .map(|&up| if up { LatticeSplitElem::UP } else { LatticeSplitElem::DOWN })
                .collect();
            let product = gens.iter().fold(LatticeSplitElem::identity(), |acc, g| acc.compose(g));
            let mut q = p;
            for g in &gens {
                q = g.apply(q).unwrap();
            }
            prop_assert_eq!(product.apply(p).unwrap(), q);
            let r = (p.abs() - 1) / 2;
            prop_assert_eq!((q.abs() - 1) / 2, product.radial().apply(r).unwrap());
        }
    }
}
