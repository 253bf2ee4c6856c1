//! Composition laws of the one-dimensional semigroups.
//!
//! `x.compose(&y)` runs `x` first. Words in the lattice generators reduce to
//! a two- or three-parameter normal form, and the radial part of a splitting
//! or sticky map is a coalescence map.

use flownoise::semigroups::{
    CoalElem, LatticeSplitElem, Radial, Semigroup, Sign, SplitElem, StickyElem,
};

fn main() -> flownoise::Result<()> {
    let up = CoalElem::UP;
    let down = CoalElem::DOWN;
    println!("f_+ f_- = {:?}", up.compose(&down));
    println!("f_- f_+ = {:?}", down.compose(&up));

    // any word collapses to f_-^j f_+^k, stored as (a, b) = (k - j, j)
    let word = [down, down, up, down, up, up, up];
    let x = word
        .iter()
        .fold(CoalElem::identity(), |acc, g| acc.compose(g));
    println!("word -,-,+,-,+,+,+ = {x:?}");
    for p in 0..5 {
        println!("  {p} -> {}", x.apply(p)?);
    }

    let (plus, minus, star) = (StickyElem::PLUS, StickyElem::MINUS, StickyElem::STAR);
    println!("f_* f_+ = {:?}", star.compose(&plus));
    println!("f_* f_* = {:?}", star.compose(&star));
    println!("f_+ f_- = {:?}", plus.compose(&minus));
    let sticky = [star, minus, star, plus, minus]
        .iter()
        .fold(StickyElem::identity(), |acc, g| acc.compose(g));
    println!(
        "sticky word = {sticky:?}, radial part {:?}",
        sticky.radial()
    );

    let f = SplitElem::new(-1i64, 3, Sign::Minus)?;
    for x in [-5, -2, 0, 2, 5] {
        let y = f.apply(x)?;
        println!(
            "f^-_{{-1,3}}({x}) = {y}, |y| = {} = f_{{-1,3}}(|x|)",
            f.radial().apply(x.abs())?
        );
    }

    // half-integers stored doubled: 2x is odd
    let walk = [
        LatticeSplitElem::DOWN,
        LatticeSplitElem::DOWN,
        LatticeSplitElem::UP,
    ];
    let g = walk
        .iter()
        .fold(LatticeSplitElem::identity(), |acc, s| acc.compose(s));
    for x in [-3i64, -1, 1, 3] {
        println!(
            "split lattice: {} -> {}",
            x as f64 / 2.0,
            g.apply(x)? as f64 / 2.0
        );
    }
    Ok(())
}
