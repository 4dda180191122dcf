//! Kac collisions on the sphere and their small-angle limit.
//!
//!     cargo run --release --example kac_jump

use sphere_lab::config::{IntegratorKind, SimConfig};
use sphere_lab::ensemble::default_workers;
use sphere_lab::kac::{diffusion_limit_report, simulate_kac, JumpConfig};
use sphere_lab::noise::NoiseStream;
use sphere_lab::state::make_initial_state;

fn main() -> sphere_lab::Result<()> {
    let noise = NoiseStream::new(3, 0);
    let v0 = make_initial_state(&[1.0], 10, &noise)?;
    let jump = JumpConfig::matched(10, 0.25, 1.0, 3);
    let path = simulate_kac(&jump, &v0, &noise)?;
    println!(
        "eps = 0.25: {} collisions in jump time {:.4}, energy drift {:.1e}",
        path.events.len(),
        jump.horizon,
        path.max_energy_drift
    );
    for (e, t) in path.events.iter().zip(&path.event_times).take(5) {
        println!("  t = {t:.5}  pair ({}, {})  angle {:+.4}", e.i, e.j, e.angle);
    }

    let reference = SimConfig {
        dimension: 10,
        dt: 1e-3,
        horizon: 1.0,
        ensemble: 4000,
        integrator: IntegratorKind::Rotation,
        checkpoints: 1,
        seed: 9,
        ..SimConfig::default()
    };
    let report = diffusion_limit_report(&reference, &[1.0], &[0.5, 0.25, 0.125], default_workers())?;
    println!("\n   eps   KS dist     se   chi2 p   pair count (mean / expected)");
    for r in &report.rows {
        println!(
            "{:6.3} {:9.4} {:6.4} {:8.3}   {:.4} / {:.4}",
            r.epsilon, r.ks_distance, r.se, r.chi2_p, r.mean_pair_count, r.expected_pair_count
        );
    }
    println!("monotone within 2 SE: {}", report.monotone_within(2.0));
    Ok(())
}
