//! Exact sticky-flow increments and their convolution law.
//!
//! Composing independent increments over `s` and `t` must reproduce the
//! law of one increment over `s + t`: the atom of `c` at 0 and its
//! positive part.

use flownoise::estimators::sticky_convolution_check;
use flownoise::flows::{sample_sticky_increment, StickyWalk};
use flownoise::rng::replica_rng;
use flownoise::semigroups::Semigroup;

fn main() -> flownoise::Result<()> {
    let lambda = 1.0;
    let mut rng = replica_rng(3, 0);
    for _ in 0..5 {
        let x = sample_sticky_increment(0.5, lambda, &mut rng)?;
        println!("a = {:+.4}  b = {:.4}  c = {:.4}", x.a(), x.b(), x.c());
    }

    let walk = StickyWalk::new(lambda, 1e-4)?;
    println!(
        "lattice walk, dt = 1e-4: P(+) = {:.4}, P(-) = {:.4}, P(*) = {:.4}",
        walk.plus_probability(),
        walk.minus_probability(),
        walk.star_probability()
    );

    let check = sticky_convolution_check(0.5, 1.0, lambda, 100_000, 7)?;
    println!(
        "atom at 0: composed {:.4}, direct {:.4} (|z| = {:.2})",
        check.atom_composed,
        check.atom_direct,
        check.atom_z()
    );
    println!(
        "KS on the positive part: {:.4} (1% critical value {:.4}), pass: {}",
        check.ks.statistic,
        check.ks_critical,
        check.passes()
    );
    let x = sample_sticky_increment(0.5, lambda, &mut rng)?;
    let y = sample_sticky_increment(1.0, lambda, &mut rng)?;
    println!("one composed sample: {:?}", x.compose(&y));
    Ok(())
}
