//! Spots of the sticky lattice walk below its running boundary.
//!
//! In the stationary regime they form a Poisson process of rate `1/lambda`.

use flownoise::estimators::{snake_spot_statistics, PoissonSnake};
use flownoise::flows::{StepModel, StickyWalk};
use flownoise::rng::replica_rng;

fn main() -> flownoise::Result<()> {
    let walk = StickyWalk::new(0.5, 1e-3)?;
    let mut rng = replica_rng(5, 0);
    let mut snake = PoissonSnake::new();
    for _ in 0..20_000 {
        snake.step(&walk.sample_step(&mut rng))?;
    }
    let spots: Vec<String> = snake
        .levels()
        .take(10)
        .map(|y| format!("{:.2}", y as f64 * walk.dx()))
        .collect();
    println!(
        "after t = 20: height {:.2}, lowest spots [{}]",
        snake.height() as f64 * walk.dx(),
        spots.join(", ")
    );

    for lambda in [0.5, 1.0, 2.0] {
        let s = snake_spot_statistics(lambda, 1e-4, 16.0, 1.0, 500, 9)?;
        let ks = s
            .spacing_ks
            .map(|k| {
                format!(
                    "spacing KS {:.4} (critical {:.4})",
                    k.statistic,
                    s.spacing_ks_critical.unwrap_or(f64::NAN)
                )
            })
            .unwrap_or_else(|| "too few spacings for KS".into());
        println!(
            "lambda {lambda}: {:.4} +- {:.4} spots per unit, expected {:.4}; {ks}",
            s.mean_count, s.count_se, s.expected_count
        );
    }
    Ok(())
}
