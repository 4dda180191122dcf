//! Particles with conserved momentum and energy: a tagged particle's
//! fluctuation against a 3D OU process, and the compensated-noise gap.
//!
//!     cargo run --release --example momentum_model

use sphere_lab::ensemble::default_workers;
use sphere_lab::momentum::{compensated_noise_check, run_prop1, Prop1Config};

fn main() -> sphere_lab::Result<()> {
    let workers = default_workers();
    println!("     N  sup msd     OU beta");
    for n in [100, 1000, 10_000] {
        let cfg = Prop1Config {
            particles: n,
            ensemble: 1000,
            ..Prop1Config::default()
        };
        let r = run_prop1(&cfg, workers)?;
        println!("{n:6} {:9.3e} {:8.4}", r.sup_mean_msd(), r.ou.beta);
    }

    let r = compensated_noise_check(100, 1.0, 5, 10_000, 1, workers)?;
    println!("\n   t    msd      se   3t/N");
    for k in 0..r.times.len() {
        println!("{:4.1} {:7.4} {:7.4} {:6.4}", r.times[k], r.msd[k], r.se[k], r.theory[k]);
    }
    Ok(())
}
