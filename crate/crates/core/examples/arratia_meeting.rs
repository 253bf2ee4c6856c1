//! Two particles of the Arratia lattice flow: meeting probability against
//! the exact difference-walk oracle, and their distance as a
//! supermartingale.

use flownoise::estimators::{
    distance_supermartingale_check, meeting_probability, meeting_probability_oracle, Geometry,
};

fn main() -> flownoise::Result<()> {
    for t in 1..=4 {
        println!(
            "distance 2, {t} steps: Z_6 {:.4}, line {:.4}",
            meeting_probability_oracle(2, t, Geometry::Circle(6))?,
            meeting_probability_oracle(2, t, Geometry::Line)?
        );
    }
    for (m, x1, x2, steps) in [(6, 0, 2, 2), (16, 0, 4, 10), (64, 10, 12, 50)] {
        let e = meeting_probability(m, x1, x2, steps, 100_000, 1)?;
        println!(
            "Z_{m}, {x1} and {x2}, {steps} steps: {:.4} +- {:.4}, oracle {:.4}",
            e.value, e.std_error, e.oracle
        );
    }
    let d = distance_supermartingale_check(32, 0, 10, 40, 20_000, 1)?;
    println!(
        "mean distance on Z_32 from 10: {:.3} after 40 steps (exact {:.3}), supermartingale: {}",
        d.means[40],
        d.oracle[40],
        d.is_supermartingale()
    );
    Ok(())
}
