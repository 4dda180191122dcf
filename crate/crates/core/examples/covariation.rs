//! Quadratic covariation of the martingale part along one path, for the
//! projected-noise and the rotation representations.
//!
//!     cargo run --release --example covariation

use sphere_lab::config::{IntegratorKind, SimConfig};
use sphere_lab::noise::NoiseStream;
use sphere_lab::sphere::simulate_path;
use sphere_lab::state::make_initial_state;
use sphere_lab::stats::quadratic_covariation;

fn main() -> sphere_lab::Result<()> {
    let noise = NoiseStream::new(5, 0);
    let v0 = make_initial_state(&[2.0, 2.0], 10, &noise)?;
    for integrator in [IntegratorKind::ItoEm, IntegratorKind::Rotation] {
        let config = SimConfig {
            dimension: 10,
            dt: 1e-4,
            horizon: 1.0,
            integrator,
            store_martingale: true,
            ..SimConfig::default()
        };
        let path = simulate_path(&config, &v0, &noise)?;
        println!("{integrator:?}");
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            let q = quadratic_covariation(&path, i, j)?;
            let (e, p) = (q.empirical.last().unwrap(), q.predicted.last().unwrap());
            println!("  <M_{i}, M_{j}>_T = {e:+.4}, int sigma_{i}{j} dt = {p:+.4}");
        }
    }
    Ok(())
}
