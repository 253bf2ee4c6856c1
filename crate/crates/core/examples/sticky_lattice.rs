//! The sticky lattice flow with Beta coins: invariant measure of the
//! occupation numbers, channel-wise detailed balance, and a long run.

use flownoise::flows::CoinLaw;
use flownoise::rng::replica_rng;
use flownoise::sticky_exact::{
    check_detailed_balance, empirical_occupancy, invariant_measure, total_variation,
};

fn main() -> flownoise::Result<()> {
    let eps = 0.3;
    for (m, n) in [(3, 2), (4, 3), (5, 4)] {
        let r = check_detailed_balance(m, n, eps)?;
        println!(
            "m = {m}, n = {n}: {} states, {} channels, worst channel asymmetry {:.1e}, stationarity {:.1e}",
            r.states, r.channels, r.max_violation, r.max_stationarity_violation
        );
    }

    // odd m keeps the chain aperiodic
    let (m, n) = (5, 3);
    let mu = invariant_measure(m, n, eps)?;
    let exact = mu.conditioned(|_| true);
    let mut rng = replica_rng(4, 0);
    let law = CoinLaw::beta(eps)?;
    let empirical = empirical_occupancy(m as u32, &[0, 1, 3], law, 1000, 1_000_000, &mut rng)?;
    println!(
        "long run on Z_{m} with {n} particles: total variation {:.4}",
        total_variation(&empirical, &exact)
    );
    let most_likely = exact
        .iter()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    println!(
        "most likely occupation {:?} with probability {:.4}",
        most_likely.0.s, most_likely.1
    );
    Ok(())
}
