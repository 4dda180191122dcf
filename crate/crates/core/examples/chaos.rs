//! Independence of three tagged components, at large D and at D = d.
//!
//!     cargo run --release --example chaos

use sphere_lab::config::{Engine, SimConfig};
use sphere_lab::ensemble::{default_workers, run_tagged_ensemble};
use sphere_lab::stats::chaos_metric;

fn main() -> sphere_lab::Result<()> {
    let cases = [
        (10_000, Engine::TaggedBlock, [1.0, 1.0, 1.0]),
        (3, Engine::Full, [1.5f64.sqrt(), 1.5f64.sqrt(), 0.0]),
    ];
    for (dim, engine, c) in cases {
        let config = SimConfig {
            dimension: dim,
            dt: 1e-3,
            horizon: 1.0,
            ensemble: 5000,
            tagged: vec![0, 1, 2],
            engine,
            checkpoints: 1,
            ..SimConfig::default()
        };
        let ens = run_tagged_ensemble(&config, &c, default_workers())?;
        let r = chaos_metric(&ens.terminal)?;
        println!("D = {dim:5}: max |corr| = {:.4} (null se {:.4})", r.score, r.null_se);
        for row in &r.covariance {
            println!("    {:+.4} {:+.4} {:+.4}", row[0], row[1], row[2]);
        }
    }
    Ok(())
}
