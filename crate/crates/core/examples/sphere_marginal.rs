//! The one-coordinate marginal of the uniform law on the sphere of radius
//! sqrt(N), and the lift from the (N-1)-sphere.
//!
//!     cargo run --release --example sphere_marginal

use sphere_lab::noise::NoiseStream;
use sphere_lab::state::sample_uniform_sphere;
use sphere_lab::stats::{ks_test, lift_phi, MarginalLaw};

fn main() -> sphere_lab::Result<()> {
    for n in [3, 10, 100, 1000] {
        let law = MarginalLaw::new(n)?;
        println!(
            "N = {n:4}: density at 0 = {:.5}, P(V_1 <= 1) = {:.5}, 97.5% quantile = {:.4}",
            law.density(0.0),
            law.cdf(1.0),
            law.quantile(0.975)
        );
    }

    let n = 10;
    let law = MarginalLaw::new(n)?;
    let lifted: Vec<f64> = (0..20_000u64)
        .map(|m| {
            let u = sample_uniform_sphere(n - 1, &NoiseStream::new(1, m))?;
            let y = sample_uniform_sphere(n, &NoiseStream::new(2, m))?[0];
            Ok(lift_phi(&u, y)?[0])
        })
        .collect::<sphere_lab::Result<_>>()?;
    let ks = ks_test(&lifted, |y| law.cdf(y))?;
    println!("\nlifted samples vs nu_10: D = {:.4}, p = {:.3}", ks.statistic, ks.p_value);
    Ok(())
}
