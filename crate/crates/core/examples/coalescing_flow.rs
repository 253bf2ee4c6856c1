//! Trajectories of the coalescing and splitting lattice walks as CSV.
//!
//! All particles share the steps of one flow: coalescing particles merge
//! once they meet at the origin, splitting particles reflect through it.

use std::io::{self, Write};

use flownoise::flows::{
    build_flow, n_point_motion, write_trajectories_csv, CoalWalk, SplitWalk, TRAJECTORY_CSV_HEADER,
};
use flownoise::rng::replica_rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps = 40;
    let stdout = io::stdout();
    let mut out = stdout.lock();

    writeln!(out, "# coalescing walk on [0, inf)")?;
    writeln!(out, "{TRAJECTORY_CSV_HEADER}")?;
    for replica in 0..2 {
        let mut rng = replica_rng(1, replica as u64);
        let flow = build_flow(&CoalWalk, steps, &mut rng)?;
        let trs = n_point_motion(&flow, &[0i64, 2, 5])?;
        write_trajectories_csv(&mut out, replica, &trs)?;
    }

    writeln!(out, "# splitting walk on Z + 1/2, positions doubled")?;
    writeln!(out, "{TRAJECTORY_CSV_HEADER}")?;
    let mut rng = replica_rng(1, 99);
    let flow = build_flow(&SplitWalk, steps, &mut rng)?;
    let trs = n_point_motion(&flow, &[-3i64, -1, 1, 3])?;
    write_trajectories_csv(&mut out, 0, &trs)?;
    Ok(())
}
