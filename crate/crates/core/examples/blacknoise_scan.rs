//! Variance of a coalescing-flow functional across dyadic time scales,
//! against the rigid rotation as a classical control.
//!
//! For the Arratia lattice flow `Var/eps` keeps falling as `eps` shrinks;
//! for the rotation it does not.

use flownoise::estimators::{blacknoise_variance_scan, dyadic_scales, Nu, Phi, VarianceScanResult};
use flownoise::flows::{ArratiaLattice, RotationLattice};

fn show(r: &VarianceScanResult) {
    println!("{} on Z_{} ({} replicas)", r.model, r.m, r.replicas);
    println!(
        "  {:>10} {:>6} {:>12} {:>10}",
        "eps", "steps", "Var/eps", "se"
    );
    for j in 0..r.scales.len() {
        println!(
            "  {:>10.6} {:>6} {:>12.6} {:>10.6}",
            r.scales[j], r.steps[j], r.ratios[j], r.ratio_std_errors[j]
        );
    }
    println!(
        "  slope {:.3} +- {:.3}, p = {:.2e}, strictly decreasing: {}",
        r.trend.slope,
        r.trend.slope_se,
        r.trend.p_value,
        r.strictly_decreasing()
    );
}

fn main() -> flownoise::Result<()> {
    let m = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(128);
    let replicas = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10_000);
    let lo = std::env::args()
        .nth(3)
        .and_then(|s| s.parse().ok())
        .unwrap_or(6);
    let scales = dyadic_scales(lo, lo + 4);
    let phi = Phi::DistanceTo(0.0);
    let nu = Nu::half_circle();
    let arratia =
        blacknoise_variance_scan(&ArratiaLattice::new(m)?, &phi, &nu, &scales, replicas, 2024)?;
    show(&arratia);
    let rotation = blacknoise_variance_scan(
        &RotationLattice::new(m)?,
        &phi,
        &nu,
        &scales,
        replicas,
        2024,
    )?;
    show(&rotation);
    Ok(())
}
