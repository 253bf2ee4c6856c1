//! Correlation of a functional of a flow with the same functional of a
//! partially resampled copy.
//!
//! For the `Z_2` toy model and its character the exact value is
//! `rho^(n+1)`: every step and the tail must survive resampling. The
//! Arratia lattice character decays too, at a rate no formula gives.

use num_complex::Complex64;

use flownoise::chaos::zm_character_urho;
use flownoise::flows::{ArratiaLattice, FlowPath, ZmToy};
use flownoise::perturb::sensitivity_curve;
use flownoise::semigroups::{CircleMap, ZmElem};

fn main() -> flownoise::Result<()> {
    let n = 8;
    let grid = [0.0, 0.3, 0.6, 0.9, 0.99, 1.0];
    let sign = |flow: &FlowPath<ZmElem>| {
        let x = flow.to_end(0).expect("full interval").value();
        Complex64::new(if x == 0 { 1.0 } else { -1.0 }, 0.0)
    };
    let curve = sensitivity_curve(sign, &ZmToy::new(2)?, n, &grid, 100_000, 7)?;
    println!("Z_2 toy model, {n} steps plus tail");
    for e in &curve {
        println!(
            "  rho {:<5} estimate {:>8.5} +- {:.5}   exact {:.5}",
            e.rho,
            e.value,
            e.std_error,
            zm_character_urho(2, n, e.rho)
        );
    }

    let m = 16;
    let character = move |flow: &FlowPath<CircleMap>| {
        let x = flow.to_end(0).expect("full interval").table()[0];
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * x as f64 / m as f64)
    };
    let curve = sensitivity_curve(character, &ArratiaLattice::new(m)?, 64, &grid, 20_000, 7)?;
    println!("Arratia lattice on Z_{m}, 64 steps, character of the particle from 0");
    for e in &curve {
        println!(
            "  rho {:<5} estimate {:>8.5} +- {:.5}",
            e.rho, e.value, e.std_error
        );
    }
    Ok(())
}
