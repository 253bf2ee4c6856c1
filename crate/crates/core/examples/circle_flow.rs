//! The circle flow in logarithmic time.
//!
//! As `eps -> 0` the position `Y(0,1)` becomes uniform and independent of
//! the increments over subintervals: the noise carries no information at
//! any fixed time scale. The flow is frozen before `eps`, so at
//! `eps = 0.5` the position `Y(0,1)` is exactly `Y(0.5,1)`.

use flownoise::estimators::circle_flow_tests;

fn main() -> flownoise::Result<()> {
    let pairs = [(0.25, 0.5), (0.5, 1.0), (0.1, 0.9)];
    for eps in [0.95, 0.5, 1e-6] {
        let r = circle_flow_tests(eps, &pairs, 16, 100_000, 3)?;
        println!(
            "eps = {eps}: chi-square p = {:.3e}, uniform: {}",
            r.chi_square_p,
            r.uniform()
        );
        for c in &r.correlations {
            println!(
                "  corr with Y({}, {}): {:+.4} {:+.4}i (se {:.4})",
                c.s, c.t, c.re, c.im, c.re_se
            );
        }
    }
    Ok(())
}
