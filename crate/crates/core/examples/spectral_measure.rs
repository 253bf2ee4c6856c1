//! Exact chaos decomposition and spectral measures on finite product spaces.
//!
//! The toy character puts mass `sin^2(pi/m)` on each step independently and
//! always includes the tail. A multiplicative `Exp g` has a product
//! Bernoulli spectral measure, and `log_map` recovers `g`.

use std::sync::Arc;

use num_complex::Complex64;

use flownoise::chaos::{
    decompose, exp_map, log_map, spectral_measure, subset_indices, zm_character, FiniteProductSpace,
};

fn main() -> flownoise::Result<()> {
    for m in [2, 3, 4] {
        let f = zm_character(m, 4)?;
        let mu = spectral_measure(&f);
        let incl: Vec<String> = (0..mu.n_factors())
            .map(|t| format!("{:.4}", mu.point_probability(t)))
            .collect();
        println!(
            "Z_{m} character, 4 steps: inclusion probabilities [{}]",
            incl.join(", ")
        );
        println!(
            "  mass by level: {:?}",
            mu.by_level()
                .iter()
                .map(|w| format!("{w:.4}"))
                .collect::<Vec<_>>()
        );
    }

    let f = zm_character(4, 3)?;
    let parts = decompose(&f)?;
    println!(
        "Z_4 character, 3 steps: {} subsets; the first with nonzero components:",
        parts.components().len()
    );
    for (&c, part) in parts
        .components()
        .iter()
        .filter(|(_, p)| p.norm_sq() > 1e-12)
        .take(4)
    {
        println!(
            "  subset {:?}: squared norm {:.4}",
            subset_indices(c),
            part.norm_sq()
        );
    }

    let space = Arc::new(FiniteProductSpace::uniform(&[2, 2, 3])?);
    let g = vec![
        vec![Complex64::new(0.5, 0.0), Complex64::new(-0.5, 0.0)],
        vec![Complex64::new(0.0, 0.2), Complex64::new(0.0, -0.2)],
        vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-0.5, 0.0),
            Complex64::new(-0.5, 0.0),
        ],
    ];
    let e = exp_map(space, &g)?;
    let mu = spectral_measure(&e);
    println!("Exp g: spectral weights {}", mu.to_json());
    let back = log_map(&e)?;
    let gap = back
        .iter()
        .zip(&g)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
        .fold(0.0, f64::max);
    println!("log(Exp g) recovers g to {gap:.1e}");
    Ok(())
}
